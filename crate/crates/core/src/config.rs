//! Declarative run configuration.
//!
//! The file is TOML: top-level run keys followed by `[roster]`, `[prices]`,
//! and the optional `[finance]` and `[sweep]` sections. Unknown keys are
//! rejected. Relative paths resolve against the directory of the config file.

use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lcoe::PvCostModel;
use crate::market::ThresholdMode;
use crate::profiles::{default_start, parse_synth_token, HOURS_PER_YEAR};
use crate::scenario::{PriceParams, ScenarioKind, ScenarioLabel};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

/// One violated rule, named by its dotted field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub reason: String,
}

impl Violation {
    fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSelection {
    #[default]
    Fixed,
    Dynamic,
    Both,
}

impl ModeSelection {
    pub fn modes(&self) -> Vec<ThresholdMode> {
        match self {
            ModeSelection::Fixed => vec![ThresholdMode::Fixed],
            ModeSelection::Dynamic => vec![ThresholdMode::Dynamic],
            ModeSelection::Both => vec![ThresholdMode::Fixed, ThresholdMode::Dynamic],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Not echoed into the manifest so that runs into different directories
    /// produce identical files.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
    /// Threshold mode(s) used when `scenarios` is not given; an explicit
    /// scenario list takes precedence.
    pub mode: ModeSelection,
    /// Explicit scenario labels such as `LCOE-Fixed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<Vec<String>>,
    /// Also write the full per-participant ledger of every scenario.
    pub write_ledger: bool,
    pub roster: RosterConfig,
    pub prices: PriceConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finance: Option<FinanceConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            output_dir: PathBuf::from("out"),
            mode: ModeSelection::default(),
            scenarios: None,
            write_ledger: false,
            roster: RosterConfig::default(),
            prices: PriceConfig::default(),
            finance: None,
            sweep: None,
            base_dir: PathBuf::from("."),
        }
    }
}

/// Either a roster CSV (`path`) or an inline synthetic neighborhood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RosterConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Synthetic households `H01`, `H02`, ...
    pub households: usize,
    /// Synthetic households that own PV.
    pub prosumers: Vec<String>,
    pub annual_kwh: f64,
    pub pv_capacity_kwp: f64,
    pub horizon: usize,
    pub start: DateTime<Utc>,
}

impl Default for RosterConfig {
    fn default() -> Self {
        Self {
            path: None,
            households: 10,
            prosumers: ["H01", "H02", "H04", "H06"].map(String::from).to_vec(),
            annual_kwh: 3500.0,
            pv_capacity_kwp: 8.0,
            horizon: HOURS_PER_YEAR,
            start: default_start(),
        }
    }
}

/// Id of the `i`-th synthetic household, counting from 1.
pub fn synth_household_id(i: usize) -> String {
    format!("H{i:02}")
}

impl RosterConfig {
    pub fn synth_ids(&self) -> Vec<String> {
        (1..=self.households).map(synth_household_id).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriceConfig {
    pub p_fixed_upper: f64,
    pub fit: f64,
    pub lcoe: f64,
    pub p_lower_auction: f64,
    pub markup_frac: f64,
    pub markup_add: f64,
    /// Spot-price CSV path or `synth:<seed>`; required for dynamic scenarios.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spot: Option<String>,
}

impl Default for PriceConfig {
    fn default() -> Self {
        let p = PriceParams::default();
        Self {
            p_fixed_upper: p.p_fixed_upper,
            fit: p.fit,
            lcoe: p.lcoe,
            p_lower_auction: p.p_lower_auction,
            markup_frac: p.markup_frac,
            markup_add: p.markup_add,
            spot: None,
        }
    }
}

impl PriceConfig {
    pub fn params(&self) -> PriceParams {
        PriceParams {
            p_fixed_upper: self.p_fixed_upper,
            fit: self.fit,
            lcoe: self.lcoe,
            p_lower_auction: self.p_lower_auction,
            markup_frac: self.markup_frac,
            markup_add: self.markup_add,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FinanceConfig {
    /// Replace `prices.lcoe` by the mean LCOE of the roster's PV systems.
    pub compute_lcoe: bool,
    pub lifetime_years: usize,
    pub wacc: f64,
    /// EUR per year per system; 1 % of the system's capex when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opex_per_year: Option<f64>,
    pub equipment_per_kwp: f64,
    pub direct_labor_per_kwp: f64,
    pub indirect_labor_per_kwp: f64,
    pub permitting_per_kwp: f64,
    pub overhead_per_kwp: f64,
}

impl Default for FinanceConfig {
    fn default() -> Self {
        let m = PvCostModel::default();
        Self {
            compute_lcoe: false,
            lifetime_years: 25,
            wacc: 0.04,
            opex_per_year: None,
            equipment_per_kwp: m.equipment_per_kwp,
            direct_labor_per_kwp: m.direct_labor_per_kwp,
            indirect_labor_per_kwp: m.indirect_labor_per_kwp,
            permitting_per_kwp: m.permitting_per_kwp,
            overhead_per_kwp: m.overhead_per_kwp,
        }
    }
}

/// OPEX as a fraction of capex when no explicit value is configured.
pub const DEFAULT_OPEX_SHARE: f64 = 0.01;

impl FinanceConfig {
    pub fn cost_model(&self) -> PvCostModel {
        PvCostModel {
            equipment_per_kwp: self.equipment_per_kwp,
            direct_labor_per_kwp: self.direct_labor_per_kwp,
            indirect_labor_per_kwp: self.indirect_labor_per_kwp,
            permitting_per_kwp: self.permitting_per_kwp,
            overhead_per_kwp: self.overhead_per_kwp,
        }
    }

    pub fn opex_for(&self, capex: f64) -> f64 {
        self.opex_per_year.unwrap_or(DEFAULT_OPEX_SHARE * capex)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Prosumer counts; `1..N-1` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<usize>>,
    pub tracked_consumer: String,
    pub tracked_prosumer: String,
    /// Capacity given to newly assigned prosumers; `roster.pv_capacity_kwp` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pv_capacity_kwp: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            counts: None,
            tracked_consumer: "H03".into(),
            tracked_prosumer: "H01".into(),
            pv_capacity_kwp: None,
        }
    }
}

impl ScenarioConfig {
    /// The default reference run: both modes, all eight scenarios, synthetic
    /// spot prices and the default sweep.
    pub fn paper_default() -> Self {
        Self {
            mode: ModeSelection::Both,
            prices: PriceConfig {
                spot: Some("synth:7".into()),
                ..PriceConfig::default()
            },
            sweep: Some(SweepConfig::default()),
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, String> {
        let mut config: ScenarioConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        config.base_dir = base_dir.to_path_buf();
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base_dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        Self::from_toml_str(&text, &base_dir).map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Scenario labels of the run, in output order. Unparseable labels are
    /// skipped here and reported by [`ScenarioConfig::validate`].
    pub fn labels(&self) -> Vec<ScenarioLabel> {
        match &self.scenarios {
            Some(names) => {
                let mut labels: Vec<ScenarioLabel> =
                    names.iter().filter_map(|n| n.parse().ok()).collect();
                let order = ScenarioLabel::all();
                labels.sort_by_key(|l| order.iter().position(|o| o == l));
                labels.dedup();
                labels
            }
            None => self
                .mode
                .modes()
                .into_iter()
                .flat_map(ScenarioLabel::for_mode)
                .collect(),
        }
    }

    /// Every violated rule; empty when the configuration is usable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        self.validate_scenarios(&mut v);
        self.validate_prices(&mut v);
        self.validate_roster(&mut v);
        if let Some(finance) = &self.finance {
            validate_finance(finance, &mut v);
        }
        if let Some(sweep) = &self.sweep {
            self.validate_sweep(sweep, &mut v);
        }
        v
    }

    fn validate_scenarios(&self, v: &mut Vec<Violation>) {
        if let Some(names) = &self.scenarios {
            if names.is_empty() {
                v.push(Violation::new("scenarios", "must list at least one scenario"));
            }
            for name in names {
                if let Err(e) = name.parse::<ScenarioLabel>() {
                    v.push(Violation::new("scenarios", e.to_string()));
                }
            }
        }
    }

    fn validate_prices(&self, v: &mut Vec<Violation>) {
        let p = &self.prices;
        for (name, value) in [
            ("p_fixed_upper", p.p_fixed_upper),
            ("fit", p.fit),
            ("lcoe", p.lcoe),
            ("p_lower_auction", p.p_lower_auction),
        ] {
            if !value.is_finite() {
                v.push(Violation::new(format!("prices.{name}"), "must be finite"));
            } else if value < 0.0 {
                v.push(Violation::new(format!("prices.{name}"), format!("{value} must be >= 0")));
            }
        }
        for (name, value) in [("markup_frac", p.markup_frac), ("markup_add", p.markup_add)] {
            if !value.is_finite() {
                v.push(Violation::new(format!("prices.{name}"), "must be finite"));
            }
        }
        if p.markup_frac < 0.0 {
            v.push(Violation::new("prices.markup_frac", format!("{} must be >= 0", p.markup_frac)));
        }
        let labels = self.labels();
        if labels.iter().any(|l| l.mode == ThresholdMode::Fixed) {
            let params = p.params();
            let mut kinds: Vec<ScenarioKind> = labels.iter().map(|l| l.kind).collect();
            kinds.dedup();
            for kind in kinds {
                let (reference, lower) = params.lower_bounds(kind);
                if !(lower <= reference && reference <= p.p_fixed_upper) {
                    v.push(Violation::new(
                        "prices",
                        format!(
                            "stability criterion p_L <= reference <= p_U violated for {kind:?}: \
                             {lower} <= {reference} <= {}",
                            p.p_fixed_upper
                        ),
                    ));
                }
            }
        }
        let needs_spot = labels.iter().any(|l| l.mode == ThresholdMode::Dynamic);
        match &p.spot {
            None if needs_spot => v.push(Violation::new(
                "prices.spot",
                "dynamic scenarios require a spot price path or `synth:<seed>`",
            )),
            Some(token) => {
                if let Some(Err(e)) = parse_synth_token(token) {
                    v.push(Violation::new("prices.spot", e.to_string()));
                }
            }
            None => {}
        }
    }

    fn validate_roster(&self, v: &mut Vec<Violation>) {
        let r = &self.roster;
        if r.horizon < 24 {
            v.push(Violation::new("roster.horizon", "must be at least 24 hours"));
        }
        if r.start.timestamp() % 3600 != 0 {
            v.push(Violation::new("roster.start", "must be hour-aligned"));
        }
        if r.path.is_some() {
            return;
        }
        if r.households == 0 {
            v.push(Violation::new("roster.households", "must be >= 1"));
        }
        if !(r.annual_kwh.is_finite() && r.annual_kwh > 0.0) {
            v.push(Violation::new("roster.annual_kwh", "must be > 0"));
        }
        if !(r.pv_capacity_kwp.is_finite() && r.pv_capacity_kwp > 0.0) {
            v.push(Violation::new("roster.pv_capacity_kwp", "must be > 0"));
        }
        let ids = r.synth_ids();
        for id in &r.prosumers {
            if !ids.contains(id) {
                v.push(Violation::new(
                    "roster.prosumers",
                    format!("unknown household `{id}` (expected H01..{})", synth_household_id(r.households)),
                ));
            }
        }
    }

    fn validate_sweep(&self, sweep: &SweepConfig, v: &mut Vec<Violation>) {
        if sweep.tracked_consumer == sweep.tracked_prosumer {
            v.push(Violation::new(
                "sweep.tracked_prosumer",
                "must differ from sweep.tracked_consumer",
            ));
        }
        if let Some(cap) = sweep.pv_capacity_kwp {
            if !(cap.is_finite() && cap > 0.0) {
                v.push(Violation::new("sweep.pv_capacity_kwp", "must be > 0"));
            }
        }
        if let Some(counts) = &sweep.counts {
            if counts.is_empty() {
                v.push(Violation::new("sweep.counts", "must not be empty"));
            }
            if counts.contains(&0) {
                v.push(Violation::new("sweep.counts", "counts must be >= 1"));
            }
        }
        if self.roster.path.is_some() {
            return;
        }
        let ids = self.roster.synth_ids();
        for (field, id) in [
            ("sweep.tracked_consumer", &sweep.tracked_consumer),
            ("sweep.tracked_prosumer", &sweep.tracked_prosumer),
        ] {
            if !ids.contains(id) {
                v.push(Violation::new(field, format!("unknown household `{id}`")));
            }
        }
        if let Some(counts) = &sweep.counts {
            let n = self.roster.households;
            if let Some(bad) = counts.iter().find(|c| **c >= n) {
                v.push(Violation::new(
                    "sweep.counts",
                    format!("count {bad} must be below the household count {n}"),
                ));
            }
        }
    }
}

fn validate_finance(f: &FinanceConfig, v: &mut Vec<Violation>) {
    if f.lifetime_years == 0 {
        v.push(Violation::new("finance.lifetime_years", "must be >= 1"));
    }
    if !(f.wacc.is_finite() && f.wacc >= 0.0) {
        v.push(Violation::new("finance.wacc", "must be >= 0"));
    }
    if let Some(opex) = f.opex_per_year {
        if !(opex.is_finite() && opex >= 0.0) {
            v.push(Violation::new("finance.opex_per_year", "must be >= 0"));
        }
    }
    if let Err(e) = f.cost_model().validate() {
        v.push(Violation::new("finance", e.to_string()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ScenarioConfig {
        ScenarioConfig::from_toml_str(text, Path::new(".")).unwrap()
    }

    #[test]
    fn defaults_are_valid() {
        assert!(ScenarioConfig::default().validate().is_empty());
        assert!(ScenarioConfig::paper_default().validate().is_empty());
        let empty = parse("");
        assert_eq!(empty.prices.p_fixed_upper, 30.46);
        assert_eq!(empty.prices.fit, 6.0);
        assert_eq!(empty.prices.lcoe, 8.0);
        assert_eq!(empty.prices.p_lower_auction, 5.0);
        assert_eq!(empty.prices.markup_frac, 0.10);
        assert!(empty.validate().is_empty());
    }

    #[test]
    fn dynamic_without_spot_names_the_field() {
        let c = parse("mode = \"dynamic\"\n");
        let v = c.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "prices.spot");
    }

    #[test]
    fn lcoe_above_upper_breaks_stability() {
        let c = parse("[prices]\nlcoe = 40\n");
        let v = c.validate();
        assert!(v.iter().any(|x| x.reason.contains("stability criterion")), "{v:?}");
    }

    #[test]
    fn negative_fit_is_a_range_violation() {
        let c = parse("[prices]\nfit = -1\n");
        let v = c.validate();
        assert!(v.iter().any(|x| x.field == "prices.fit" && x.reason.contains(">= 0")), "{v:?}");
    }

    #[test]
    fn every_violation_is_listed() {
        let c = parse(
            "mode = \"both\"\nscenarios = [\"LCOE-Weekly\"]\n[prices]\nfit = -1\n[roster]\nhouseholds = 0\n",
        );
        let fields: Vec<String> = c.validate().into_iter().map(|x| x.field).collect();
        assert!(fields.contains(&"scenarios".to_string()));
        assert!(fields.contains(&"prices.fit".to_string()));
        assert!(fields.contains(&"roster.households".to_string()));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ScenarioConfig::from_toml_str("sed = 1\n", Path::new(".")).is_err());
        assert!(ScenarioConfig::from_toml_str("[prices]\nfitt = 1\n", Path::new(".")).is_err());
    }

    #[test]
    fn labels_follow_mode_or_list() {
        assert_eq!(parse("").labels().len(), 4);
        assert_eq!(parse("mode = \"both\"\n").labels().len(), 8);
        let c = parse("scenarios = [\"lcoe-fixed\", \"BaseFiT-Fixed\", \"LCOE-Fixed\"]\n");
        let names: Vec<String> = c.labels().iter().map(|l| l.to_string()).collect();
        assert_eq!(names, ["BaseFiT-Fixed", "LCOE-Fixed"]);
    }

    #[test]
    fn sweep_checks() {
        let c = parse("[sweep]\ntracked_consumer = \"H01\"\ntracked_prosumer = \"H01\"\ncounts = [3, 10]\n");
        let fields: Vec<String> = c.validate().into_iter().map(|x| x.field).collect();
        assert!(fields.contains(&"sweep.tracked_prosumer".to_string()));
        assert!(fields.contains(&"sweep.counts".to_string()));
    }

    #[test]
    fn finance_section_parses_flat_cost_model() {
        let c = parse("[finance]\ncompute_lcoe = true\nequipment_per_kwp = 1000\nwacc = 0.05\n");
        let f = c.finance.unwrap();
        assert!(f.compute_lcoe);
        assert_eq!(f.equipment_per_kwp, 1000.0);
        assert_eq!(f.overhead_per_kwp, 20.0);
        assert_eq!(f.opex_for(5500.0), 55.0);
    }
}
