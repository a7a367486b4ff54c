//! Batch pipeline: build inputs from a [`ScenarioConfig`], run every
//! scenario, check conservation, analyze and render the output files.
//!
//! [`run_in_memory`] does all the work and returns file contents; [`run`]
//! additionally writes them to the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{
    daily_avg_csv, daily_monthly_stats, duration_csv, duration_curve, self_consumption_csv,
    self_consumption_report, sensitivity_sweep, standard_deltas, summary_csv, sweep_csv,
    AnalysisError, ScenarioOutcome, SweepPoint, TrackedIds,
};
use crate::config::{synth_household_id, ConfigError, ScenarioConfig, Violation};
use crate::lcoe::{capex, lcoe, neighborhood_lcoe, FinancialParams, LcoeError};
use crate::market::ThresholdMode;
use crate::profiles::{
    load_profile_csv, load_roster, mix_seed, parse_synth_token, read_roster_entries,
    synth_pv_from, synth_spot_from, Neighborhood, ProfileError, RosterEntry, SeriesUnit,
    SynthContext, TimeSeries, HOURS_PER_YEAR, SYNTH_PREFIX,
};
use crate::scenario::{Scenario, ScenarioError, ScenarioLabel};
use crate::settlement::{ledger_csv, SettlementError, CONSERVATION_TOL};

/// Offset between a synthetic household's load seed and its PV seed.
const PV_SEED_OFFSET: u64 = 100;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration:\n{}", format_violations(.0))]
    Validation(Vec<Violation>),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("LCOE computation failed: {0}")]
    Lcoe(#[from] LcoeError),
    #[error(transparent)]
    Scenario(ScenarioError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("conservation check failed in {label}: {source}")]
    Invariant {
        label: ScenarioLabel,
        #[source]
        source: SettlementError,
    },
    #[error("{path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}

impl PipelineError {
    /// 1 validation, 2 input, 3 invariant breach.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 1,
            PipelineError::Config(ConfigError::Parse { .. }) => 1,
            PipelineError::Analysis(AnalysisError::RoleViolation(_)) => 1,
            PipelineError::Lcoe(_) => 1,
            PipelineError::Invariant { .. } => 3,
            PipelineError::Scenario(ScenarioError::Settlement {
                source: SettlementError::InvariantBreach { .. },
                ..
            }) => 3,
            PipelineError::Scenario(ScenarioError::MissingSpot(_)) => 1,
            _ => 2,
        }
    }
}

impl From<ScenarioError> for PipelineError {
    fn from(e: ScenarioError) -> Self {
        PipelineError::Scenario(e)
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    /// When non-empty, replaces the configured scenario set.
    pub scenarios: Vec<ScenarioLabel>,
    /// Fail when the config has no `[sweep]` section.
    pub require_sweep: bool,
}

impl RunOptions {
    pub fn apply(&self, config: &mut ScenarioConfig) {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out_dir {
            config.output_dir = out.clone();
        }
        if !self.scenarios.is_empty() {
            config.scenarios = Some(self.scenarios.iter().map(|l| l.to_string()).collect());
        }
    }
}

/// A hashed input file as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Materialized inputs of a run.
#[derive(Debug, Clone)]
pub struct PreparedInputs {
    pub neighborhood: Neighborhood,
    pub spot: Option<TimeSeries>,
    /// Capacity and generation each household gets when it is a prosumer.
    pub pv_pool: Vec<(f64, TimeSeries)>,
    pub inputs: Vec<InputDigest>,
    /// Lower reference of the LCOE scenarios actually used.
    pub lcoe: f64,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn digest_file(config: &ScenarioConfig, shown: &Path) -> Result<InputDigest, PipelineError> {
    let path = config.resolve(shown);
    let bytes = fs::read(&path).map_err(|source| ProfileError::Io { path, source })?;
    Ok(InputDigest {
        path: shown.to_string_lossy().replace('\\', "/"),
        sha256: sha256_hex(&bytes),
    })
}

fn synth_entries(config: &ScenarioConfig) -> Vec<RosterEntry> {
    let r = &config.roster;
    (1..=r.households)
        .map(|i| {
            let id = synth_household_id(i);
            let prosumer = r.prosumers.contains(&id);
            RosterEntry {
                annual_kwh: r.annual_kwh,
                pv_capacity_kwp: if prosumer { r.pv_capacity_kwp } else { 0.0 },
                load_source: format!("{SYNTH_PREFIX}{i}"),
                generation_source: if prosumer {
                    format!("{SYNTH_PREFIX}{}", i as u64 + PV_SEED_OFFSET)
                } else {
                    String::new()
                },
                id,
            }
        })
        .collect()
}

/// Builds the neighborhood, spot series and sweep PV pool, and hashes every
/// input file.
pub fn prepare_inputs(config: &ScenarioConfig) -> Result<PreparedInputs, PipelineError> {
    let ctx = SynthContext {
        start: config.roster.start,
        horizon: config.roster.horizon,
        run_seed: config.seed,
    };
    let mut inputs = Vec::new();
    let neighborhood = match &config.roster.path {
        Some(shown) => {
            inputs.push(digest_file(config, shown)?);
            let path = config.resolve(shown);
            let shown_dir = shown.parent().unwrap_or_else(|| Path::new(""));
            for entry in read_roster_entries(&path)? {
                for file in entry.input_files(shown_dir) {
                    inputs.push(digest_file(config, &file)?);
                }
            }
            load_roster(&path, &ctx)?
        }
        None => {
            let participants = synth_entries(config)
                .iter()
                .map(|e| e.materialize(&config.base_dir, &ctx))
                .collect::<Result<Vec<_>, _>>()?;
            Neighborhood::new(participants)?
        }
    };

    let labels = config.labels();
    let spot = if labels.iter().any(|l| l.mode == ThresholdMode::Dynamic) {
        let token = config.prices.spot.as_deref().unwrap_or_default();
        Some(match parse_synth_token(token) {
            Some(seed) => synth_spot_from(
                neighborhood.start(),
                mix_seed(config.seed, seed?),
                neighborhood.horizon(),
            )?,
            None => {
                let shown = Path::new(token);
                inputs.push(digest_file(config, shown)?);
                load_profile_csv(&config.resolve(shown), SeriesUnit::PriceEurPerMwh)?
            }
        })
    } else {
        None
    };

    let pv_pool = match &config.sweep {
        Some(sweep) => build_pv_pool(config, &neighborhood, &sweep.tracked_prosumer, sweep.pv_capacity_kwp)?,
        None => Vec::new(),
    };

    let lcoe = match &config.finance {
        Some(f) if f.compute_lcoe => computed_lcoe(config, &neighborhood)?,
        _ => config.prices.lcoe,
    };
    Ok(PreparedInputs {
        neighborhood,
        spot,
        pv_pool,
        inputs,
        lcoe,
    })
}

fn build_pv_pool(
    config: &ScenarioConfig,
    n: &Neighborhood,
    tracked_prosumer: &str,
    capacity: Option<f64>,
) -> Result<Vec<(f64, TimeSeries)>, PipelineError> {
    let role = |msg: String| PipelineError::Analysis(AnalysisError::RoleViolation(msg));
    if config.roster.path.is_none() {
        let capacity = capacity.unwrap_or(config.roster.pv_capacity_kwp);
        return n
            .participants()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if p.has_pv() {
                    return Ok((p.pv_capacity(), p.generation().clone()));
                }
                let seed = mix_seed(config.seed, i as u64 + 1 + PV_SEED_OFFSET);
                Ok((capacity, synth_pv_from(n.start(), seed, capacity, n.horizon())?))
            })
            .collect();
    }
    // File rosters: new prosumers reuse the tracked prosumer's per-kWp profile.
    let idx = n
        .index_of(tracked_prosumer)
        .ok_or_else(|| role(format!("unknown tracked prosumer `{tracked_prosumer}`")))?;
    let template = &n.participants()[idx];
    if !template.has_pv() {
        return Err(role(format!(
            "tracked prosumer `{tracked_prosumer}` has no PV profile in the roster"
        )));
    }
    let capacity = capacity.unwrap_or(template.pv_capacity());
    let scale = capacity / template.pv_capacity();
    let scaled = TimeSeries::energy(
        n.start(),
        template.generation().values().iter().map(|g| g * scale).collect(),
    )?;
    Ok(n.participants()
        .iter()
        .map(|p| {
            if p.has_pv() {
                (p.pv_capacity(), p.generation().clone())
            } else {
                (capacity, scaled.clone())
            }
        })
        .collect())
}

/// Mean LCOE over the roster's PV systems, with production annualized from
/// the simulated horizon.
pub fn computed_lcoe(config: &ScenarioConfig, n: &Neighborhood) -> Result<f64, PipelineError> {
    let finance = config.finance.clone().unwrap_or_default();
    let model = finance.cost_model();
    let annualize = HOURS_PER_YEAR as f64 / n.horizon() as f64;
    let values = n
        .participants()
        .iter()
        .filter(|p| p.has_pv())
        .map(|p| {
            let i0 = capex(&model, p.pv_capacity());
            let fin = FinancialParams::constant(
                finance.lifetime_years,
                finance.wacc,
                finance.opex_for(i0),
                p.generation().sum() * annualize,
            )?;
            lcoe(i0, &fin)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(neighborhood_lcoe(&values)?)
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub outcomes: Vec<ScenarioOutcome>,
    pub sweep: Option<Vec<SweepPoint>>,
    /// `(file name, content)` in write order; the manifest comes last.
    pub files: Vec<(String, String)>,
    pub lcoe: f64,
}

impl RunArtifacts {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

#[derive(Serialize)]
struct OutputDigest<'a> {
    file: &'a str,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ScenarioConfig,
    lcoe_used: f64,
    scenarios: Vec<String>,
    inputs: &'a [InputDigest],
    outputs: Vec<OutputDigest<'a>>,
}

pub fn load_config(path: &Path, opts: &RunOptions) -> Result<ScenarioConfig, PipelineError> {
    let mut config = ScenarioConfig::from_path(path)?;
    opts.apply(&mut config);
    Ok(config)
}

/// Runs every scenario, and the sweep when configured, without touching the
/// file system except to read inputs.
pub fn run_in_memory(config: &ScenarioConfig, require_sweep: bool) -> Result<RunArtifacts, PipelineError> {
    let mut violations = config.validate();
    if require_sweep && config.sweep.is_none() {
        violations.push(Violation {
            field: "sweep".into(),
            reason: "the sweep command needs a [sweep] section".into(),
        });
    }
    if !violations.is_empty() {
        return Err(PipelineError::Validation(violations));
    }

    let inputs = prepare_inputs(config)?;
    let mut prices = config.prices.params();
    prices.lcoe = inputs.lcoe;
    let labels = config.labels();
    if labels.iter().any(|l| l.mode == ThresholdMode::Fixed)
        && !(prices.p_lower_auction <= prices.lcoe && prices.lcoe <= prices.p_fixed_upper)
    {
        return Err(PipelineError::Validation(vec![Violation {
            field: "finance.compute_lcoe".into(),
            reason: format!(
                "computed LCOE {} violates the stability criterion {} <= LCOE <= {}",
                prices.lcoe, prices.p_lower_auction, prices.p_fixed_upper
            ),
        }]));
    }
    let scenarios = labels
        .iter()
        .map(|&l| Scenario::build(l, &prices, inputs.spot.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;

    let outcomes = scenarios
        .par_iter()
        .map(|s| {
            let outcome = s.run(&inputs.neighborhood)?;
            outcome
                .ledger
                .check_conservation(CONSERVATION_TOL)
                .map_err(|source| PipelineError::Invariant {
                    label: s.label,
                    source,
                })?;
            Ok(outcome)
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;

    let sweep = match &config.sweep {
        Some(sc) => {
            let n = inputs.neighborhood.len();
            let counts = sc.counts.clone().unwrap_or_else(|| (1..n).collect());
            let tracked = TrackedIds {
                consumer: sc.tracked_consumer.clone(),
                prosumer: sc.tracked_prosumer.clone(),
            };
            Some(sensitivity_sweep(
                &inputs.neighborhood,
                &inputs.pv_pool,
                &counts,
                &scenarios,
                &tracked,
            )?)
        }
        None => None,
    };

    let mut files = Vec::new();
    for o in &outcomes {
        files.push((format!("duration_{}.csv", o.label), duration_csv(&duration_curve(&o.prices))));
        let stats = daily_monthly_stats(&o.prices)?;
        files.push((format!("daily_avg_{}.csv", o.label), daily_avg_csv(&stats)));
    }
    files.push(("summary.csv".into(), summary_csv(&outcomes, &standard_deltas(&outcomes))));
    let shares = outcomes
        .iter()
        .filter_map(|o| self_consumption_report(&o.ledger).ok().map(|s| (o.label, s)))
        .collect::<Vec<_>>();
    files.push(("selfconsumption.csv".into(), self_consumption_csv(&shares)));
    if let Some(points) = &sweep {
        files.push(("sweep.csv".into(), sweep_csv(points)));
    }
    if config.write_ledger {
        for o in &outcomes {
            files.push((format!("ledger_{}.csv", o.label), ledger_csv(&o.ledger)));
        }
    }

    let manifest = Manifest {
        tool: "lemsim",
        version: env!("CARGO_PKG_VERSION"),
        config,
        lcoe_used: inputs.lcoe,
        scenarios: labels.iter().map(|l| l.to_string()).collect(),
        inputs: &inputs.inputs,
        outputs: files
            .iter()
            .map(|(name, content)| OutputDigest {
                file: name,
                sha256: sha256_hex(content.as_bytes()),
            })
            .collect(),
    };
    let mut manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest_json.push('\n');
    files.push(("manifest.json".into(), manifest_json));

    Ok(RunArtifacts {
        outcomes,
        sweep,
        files,
        lcoe: inputs.lcoe,
    })
}

/// Runs the pipeline and writes all files into `config.output_dir`
/// (resolved against the config directory when relative).
pub fn run(config: &ScenarioConfig, require_sweep: bool) -> Result<(PathBuf, RunArtifacts), PipelineError> {
    let artifacts = run_in_memory(config, require_sweep)?;
    let out_dir = config.resolve(&config.output_dir);
    let out_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PipelineError::Output { path, source }
    };
    fs::create_dir_all(&out_dir).map_err(out_err(&out_dir))?;
    for (name, content) in &artifacts.files {
        let path = out_dir.join(name);
        fs::write(&path, content).map_err(out_err(&path))?;
    }
    Ok((out_dir, artifacts))
}
