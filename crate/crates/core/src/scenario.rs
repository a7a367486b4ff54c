//! Scenario labels and single-scenario execution.
//!
//! A scenario pairs a pricing variant (a no-LEM base case paid at FiT or at
//! the auction price, or an LEM whose lower reference is the FiT or the LCOE)
//! with a fixed or spot-indexed utility price.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::analysis::ScenarioOutcome;
use crate::market::{clear_market, price_series, MarketError, ThresholdMode, Thresholds};
use crate::profiles::{Neighborhood, TimeSeries};
use crate::settlement::{settle, settle_base, SettlementError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioKind {
    BaseFit,
    BaseAuction,
    Fit,
    Lcoe,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::BaseFit,
        ScenarioKind::BaseAuction,
        ScenarioKind::Fit,
        ScenarioKind::Lcoe,
    ];

    pub fn is_base(&self) -> bool {
        matches!(self, ScenarioKind::BaseFit | ScenarioKind::BaseAuction)
    }

    fn name(&self) -> &'static str {
        match self {
            ScenarioKind::BaseFit => "BaseFiT",
            ScenarioKind::BaseAuction => "BaseAuction",
            ScenarioKind::Fit => "FiT",
            ScenarioKind::Lcoe => "LCOE",
        }
    }
}

/// One of the eight scenario labels, e.g. `LCOE-Fixed` or `BaseAuction-Dynamic`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScenarioLabel {
    pub kind: ScenarioKind,
    pub mode: ThresholdMode,
}

impl ScenarioLabel {
    pub const fn new(kind: ScenarioKind, mode: ThresholdMode) -> Self {
        Self { kind, mode }
    }

    /// All eight labels, fixed mode first.
    pub fn all() -> Vec<ScenarioLabel> {
        [ThresholdMode::Fixed, ThresholdMode::Dynamic]
            .into_iter()
            .flat_map(|mode| ScenarioKind::ALL.into_iter().map(move |kind| Self::new(kind, mode)))
            .collect()
    }

    pub fn for_mode(mode: ThresholdMode) -> Vec<ScenarioLabel> {
        ScenarioKind::ALL.into_iter().map(|kind| Self::new(kind, mode)).collect()
    }

    /// Base scenario a LEM scenario is measured against in sweeps.
    pub fn base_counterpart(&self) -> ScenarioLabel {
        let kind = match self.kind {
            ScenarioKind::Fit | ScenarioKind::BaseFit => ScenarioKind::BaseFit,
            ScenarioKind::Lcoe | ScenarioKind::BaseAuction => ScenarioKind::BaseAuction,
        };
        Self::new(kind, self.mode)
    }
}

impl fmt::Display for ScenarioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.kind.name(), self.mode)
    }
}

impl Serialize for ScenarioLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown scenario label `{0}` (expected <BaseFiT|BaseAuction|FiT|LCOE>-<Fixed|Dynamic>)")]
pub struct ParseLabelError(pub String);

impl FromStr for ScenarioLabel {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseLabelError(s.to_string());
        let (kind, mode) = s.trim().split_once('-').ok_or_else(err)?;
        let kind = match kind.to_ascii_lowercase().as_str() {
            "basefit" => ScenarioKind::BaseFit,
            "baseauction" => ScenarioKind::BaseAuction,
            "fit" => ScenarioKind::Fit,
            "lcoe" => ScenarioKind::Lcoe,
            _ => return Err(err()),
        };
        let mode = match mode.to_ascii_lowercase().as_str() {
            "fixed" => ThresholdMode::Fixed,
            "dynamic" => ThresholdMode::Dynamic,
            _ => return Err(err()),
        };
        Ok(Self::new(kind, mode))
    }
}

/// Price constants in EUR/MWh shared by all scenarios of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceParams {
    pub p_fixed_upper: f64,
    pub fit: f64,
    pub lcoe: f64,
    pub p_lower_auction: f64,
    /// Proportional markup on the spot price.
    pub markup_frac: f64,
    /// Additive markup on the spot price, EUR/MWh.
    pub markup_add: f64,
}

impl Default for PriceParams {
    fn default() -> Self {
        Self {
            p_fixed_upper: 30.46,
            fit: 6.0,
            lcoe: 8.0,
            p_lower_auction: 5.0,
            markup_frac: 0.10,
            markup_add: 0.0,
        }
    }
}

impl PriceParams {
    /// `(lower reference, price paid for exports)` of a scenario kind.
    pub fn lower_bounds(&self, kind: ScenarioKind) -> (f64, f64) {
        match kind {
            ScenarioKind::Fit | ScenarioKind::BaseFit => (self.fit, self.fit),
            ScenarioKind::Lcoe => (self.lcoe, self.p_lower_auction),
            ScenarioKind::BaseAuction => (self.p_lower_auction, self.p_lower_auction),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario {0} needs a spot price series")]
    MissingSpot(ScenarioLabel),
    #[error("scenario {label}: {source}")]
    Market {
        label: ScenarioLabel,
        #[source]
        source: MarketError,
    },
    #[error("scenario {label}: {source}")]
    Settlement {
        label: ScenarioLabel,
        #[source]
        source: SettlementError,
    },
}

/// A fully parameterized scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: ScenarioLabel,
    pub thresholds: Thresholds,
    /// Export price in base scenarios (FiT or auction).
    pub sell_price: f64,
}

impl Scenario {
    pub fn build(
        label: ScenarioLabel,
        prices: &PriceParams,
        spot: Option<&TimeSeries>,
    ) -> Result<Self, ScenarioError> {
        let (lower_ref, p_lower) = prices.lower_bounds(label.kind);
        let thresholds = match label.mode {
            ThresholdMode::Fixed => Thresholds::fixed(prices.p_fixed_upper, lower_ref, p_lower),
            ThresholdMode::Dynamic => {
                let spot = spot.ok_or(ScenarioError::MissingSpot(label))?;
                Thresholds::dynamic(
                    spot.clone(),
                    prices.markup_frac,
                    prices.markup_add,
                    lower_ref,
                    p_lower,
                )
            }
        }
        .map_err(|source| ScenarioError::Market { label, source })?;
        Ok(Self {
            label,
            thresholds,
            sell_price: p_lower,
        })
    }

    /// Clears (for LEM scenarios) and settles the neighborhood.
    pub fn run(&self, n: &Neighborhood) -> Result<ScenarioOutcome, ScenarioError> {
        let label = self.label;
        let market_err = |source| ScenarioError::Market { label, source };
        let settle_err = |source| ScenarioError::Settlement { label, source };
        if label.kind.is_base() {
            let ledger = settle_base(n, self.sell_price, &self.thresholds).map_err(settle_err)?;
            let upper = (0..n.horizon())
                .map(|t| self.thresholds.p_upper_at(t))
                .collect::<Result<Vec<_>, _>>()
                .map_err(market_err)?;
            let prices = TimeSeries::new(n.start(), upper).expect("finite utility prices");
            Ok(ScenarioOutcome::new(label, prices, None, ledger))
        } else {
            let results = clear_market(n, &self.thresholds).map_err(market_err)?;
            let ledger = settle(&results, n).map_err(settle_err)?;
            let prices = price_series(&results, n);
            let regimes = results.iter().map(|mr| mr.regime).collect();
            Ok(ScenarioOutcome::new(label, prices, Some(regimes), ledger))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for label in ScenarioLabel::all() {
            assert_eq!(label.to_string().parse::<ScenarioLabel>().unwrap(), label);
        }
        assert_eq!(
            "lcoe-dynamic".parse::<ScenarioLabel>().unwrap(),
            ScenarioLabel::new(ScenarioKind::Lcoe, ThresholdMode::Dynamic)
        );
        assert!("LCOE".parse::<ScenarioLabel>().is_err());
        assert!("Auction-Fixed".parse::<ScenarioLabel>().is_err());
        assert_eq!(ScenarioLabel::all().len(), 8);
    }

    #[test]
    fn lower_bounds_per_kind() {
        let p = PriceParams::default();
        assert_eq!(p.lower_bounds(ScenarioKind::Fit), (6.0, 6.0));
        assert_eq!(p.lower_bounds(ScenarioKind::Lcoe), (8.0, 5.0));
        assert_eq!(p.lower_bounds(ScenarioKind::BaseAuction), (5.0, 5.0));
    }

    #[test]
    fn dynamic_requires_spot() {
        let label = ScenarioLabel::new(ScenarioKind::Lcoe, ThresholdMode::Dynamic);
        assert!(matches!(
            Scenario::build(label, &PriceParams::default(), None),
            Err(ScenarioError::MissingSpot(_))
        ));
    }
}
