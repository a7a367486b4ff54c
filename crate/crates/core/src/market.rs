//! Supply-demand ratio and local price clearing.
//!
//! The local price is a convex combination of a lower reference (LCOE or FiT)
//! and the utility price while local surplus only partly covers local demand,
//! and collapses to the external sell price `p_lower` once the market is
//! saturated. With a dynamic (spot-indexed) utility price the upper threshold
//! varies per hour; hours where it falls below the lower reference trade at
//! the utility price, and hours where it is negative curtail all surplus.

use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::profiles::{Neighborhood, TimeSeries};

#[derive(Debug, Error, PartialEq)]
pub enum MarketError {
    #[error("negative {kind} entry {value} at index {index}")]
    NegativeEntry {
        kind: &'static str,
        index: usize,
        value: f64,
    },
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("unstable thresholds: need p_lower ({p_lower}) <= lower reference ({lower_ref}) <= p_upper ({p_upper})")]
    Unstable {
        p_lower: f64,
        lower_ref: f64,
        p_upper: f64,
    },
    #[error("timestep {t} outside spot horizon {horizon}")]
    OutOfRange { t: usize, horizon: usize },
    #[error("horizon mismatch: {0}")]
    HorizonMismatch(String),
    #[error("operation requires {expected} thresholds")]
    WrongMode { expected: ThresholdMode },
}

/// Supply-demand ratio of one timestep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sdr {
    /// Σs / Σd, or 0 when there is neither surplus nor demand.
    Ratio(f64),
    /// Surplus with zero demand. Kept distinct from `f64::INFINITY` so that
    /// serialized results stay exact.
    SaturatedInfinite,
}

impl Sdr {
    pub fn is_zero(&self) -> bool {
        matches!(self, Sdr::Ratio(r) if *r == 0.0)
    }

    pub fn is_saturated(&self) -> bool {
        match self {
            Sdr::Ratio(r) => *r >= 1.0,
            Sdr::SaturatedInfinite => true,
        }
    }

    /// Finite ratio, if any.
    pub fn ratio(&self) -> Option<f64> {
        match self {
            Sdr::Ratio(r) => Some(*r),
            Sdr::SaturatedInfinite => None,
        }
    }
}

impl fmt::Display for Sdr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sdr::Ratio(r) => write!(f, "{r}"),
            Sdr::SaturatedInfinite => f.write_str("saturated"),
        }
    }
}

impl Serialize for Sdr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Sdr::Ratio(r) => serializer.serialize_f64(*r),
            Sdr::SaturatedInfinite => serializer.serialize_str("saturated"),
        }
    }
}

/// Market state of one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Regime {
    /// No surplus: everything is bought from the utility at the upper threshold.
    Inactive,
    /// Surplus covers part of the demand; convex-combination price.
    Partial,
    /// Surplus covers all demand; price collapses to `p_lower`.
    Saturated,
    /// Dynamic upper threshold in `[0, lower reference)`: local trades at the utility price.
    BelowLcoe,
    /// Dynamic upper threshold negative: surplus is curtailed.
    Curtailed,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Regime::Inactive => "inactive",
            Regime::Partial => "partial",
            Regime::Saturated => "saturated",
            Regime::BelowLcoe => "below_lcoe",
            Regime::Curtailed => "curtailed",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ThresholdMode {
    Fixed,
    Dynamic,
}

impl fmt::Display for ThresholdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdMode::Fixed => f.write_str("Fixed"),
            ThresholdMode::Dynamic => f.write_str("Dynamic"),
        }
    }
}

/// Upper price threshold: a fixed utility tariff or a spot price plus markup.
#[derive(Debug, Clone, PartialEq)]
pub enum UpperThreshold {
    Fixed(f64),
    /// `spot * (1 + markup_frac) + markup_add`.
    Dynamic {
        spot: TimeSeries,
        markup_frac: f64,
        markup_add: f64,
    },
}

/// Price thresholds of one scenario. All prices in EUR/MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    upper: UpperThreshold,
    p_lower: f64,
    lower_bound_ref: f64,
}

impl Thresholds {
    /// Fixed utility price `p_upper`. Enforces `p_lower <= lower_bound_ref <= p_upper`.
    pub fn fixed(p_upper: f64, lower_bound_ref: f64, p_lower: f64) -> Result<Self, MarketError> {
        check_finite(&[("p_upper", p_upper), ("lower_bound_ref", lower_bound_ref), ("p_lower", p_lower)])?;
        if !(p_lower <= lower_bound_ref && lower_bound_ref <= p_upper) {
            return Err(MarketError::Unstable {
                p_lower,
                lower_ref: lower_bound_ref,
                p_upper,
            });
        }
        Ok(Self {
            upper: UpperThreshold::Fixed(p_upper),
            p_lower,
            lower_bound_ref,
        })
    }

    /// Spot-indexed utility price.
    pub fn dynamic(
        spot: TimeSeries,
        markup_frac: f64,
        markup_add: f64,
        lower_bound_ref: f64,
        p_lower: f64,
    ) -> Result<Self, MarketError> {
        check_finite(&[
            ("markup_frac", markup_frac),
            ("markup_add", markup_add),
            ("lower_bound_ref", lower_bound_ref),
            ("p_lower", p_lower),
        ])?;
        if markup_frac < 0.0 {
            return Err(MarketError::InvalidThresholds(format!(
                "markup_frac {markup_frac} must be >= 0"
            )));
        }
        Ok(Self {
            upper: UpperThreshold::Dynamic {
                spot,
                markup_frac,
                markup_add,
            },
            p_lower,
            lower_bound_ref,
        })
    }

    pub fn mode(&self) -> ThresholdMode {
        match self.upper {
            UpperThreshold::Fixed(_) => ThresholdMode::Fixed,
            UpperThreshold::Dynamic { .. } => ThresholdMode::Dynamic,
        }
    }

    pub fn upper(&self) -> &UpperThreshold {
        &self.upper
    }

    pub fn p_lower(&self) -> f64 {
        self.p_lower
    }

    pub fn lower_bound_ref(&self) -> f64 {
        self.lower_bound_ref
    }

    /// Upper threshold at step `t`; constant in fixed mode.
    pub fn p_upper_at(&self, t: usize) -> Result<f64, MarketError> {
        match &self.upper {
            UpperThreshold::Fixed(p) => Ok(*p),
            UpperThreshold::Dynamic { .. } => upper_threshold(t, self),
        }
    }

    /// Checks that the thresholds can serve a neighborhood of `horizon` steps
    /// starting at the neighborhood's first timestamp.
    pub fn check_horizon(&self, n: &Neighborhood) -> Result<(), MarketError> {
        if let UpperThreshold::Dynamic { spot, .. } = &self.upper {
            if spot.start() != n.start() {
                return Err(MarketError::HorizonMismatch(format!(
                    "spot starts at {}, profiles at {}",
                    spot.start(),
                    n.start()
                )));
            }
            if spot.len() < n.horizon() {
                return Err(MarketError::HorizonMismatch(format!(
                    "spot covers {} steps, profiles need {}",
                    spot.len(),
                    n.horizon()
                )));
            }
        }
        Ok(())
    }
}

fn check_finite(values: &[(&str, f64)]) -> Result<(), MarketError> {
    for (name, v) in values {
        if !v.is_finite() {
            return Err(MarketError::InvalidThresholds(format!("{name} is not finite")));
        }
    }
    Ok(())
}

/// Σs / Σd with the zero-demand policy: surplus without demand saturates,
/// and an empty market has ratio 0.
pub fn sdr(surpluses: &[f64], demands: &[f64]) -> Result<Sdr, MarketError> {
    for (kind, values) in [("surplus", surpluses), ("demand", demands)] {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| v.is_nan() || **v < 0.0) {
            return Err(MarketError::NegativeEntry { kind, index, value });
        }
    }
    let total_surplus: f64 = surpluses.iter().sum();
    let total_demand: f64 = demands.iter().sum();
    Ok(sdr_from_totals(total_surplus, total_demand))
}

fn sdr_from_totals(total_surplus: f64, total_demand: f64) -> Sdr {
    if total_demand > 0.0 {
        Sdr::Ratio(total_surplus / total_demand)
    } else if total_surplus > 0.0 {
        Sdr::SaturatedInfinite
    } else {
        Sdr::Ratio(0.0)
    }
}

/// Shared three-branch rule: upper at r = 0, convex combination on (0, 1),
/// `p_lower` once saturated.
fn convex_price(r: Sdr, p_upper: f64, lower_ref: f64, p_lower: f64) -> (f64, Regime) {
    match r {
        Sdr::SaturatedInfinite => (p_lower, Regime::Saturated),
        Sdr::Ratio(r) if r >= 1.0 => (p_lower, Regime::Saturated),
        Sdr::Ratio(0.0) => (p_upper, Regime::Inactive),
        Sdr::Ratio(r) => (r * lower_ref + (1.0 - r) * p_upper, Regime::Partial),
    }
}

/// Local price under fixed thresholds.
pub fn price_fixed(r: Sdr, th: &Thresholds) -> Result<(f64, Regime), MarketError> {
    match th.upper {
        UpperThreshold::Fixed(p_upper) => {
            Ok(convex_price(r, p_upper, th.lower_bound_ref, th.p_lower))
        }
        UpperThreshold::Dynamic { .. } => Err(MarketError::WrongMode {
            expected: ThresholdMode::Fixed,
        }),
    }
}

/// Dynamic upper threshold `spot(t) * (1 + markup_frac) + markup_add`.
///
/// The sign of the spot price is preserved, so a negative spot gives an even
/// more negative threshold under a proportional markup.
pub fn upper_threshold(t: usize, th: &Thresholds) -> Result<f64, MarketError> {
    match &th.upper {
        UpperThreshold::Dynamic {
            spot,
            markup_frac,
            markup_add,
        } => {
            let alpha = spot.get(t).map_err(|_| MarketError::OutOfRange {
                t,
                horizon: spot.len(),
            })?;
            Ok(alpha * (1.0 + markup_frac) + markup_add)
        }
        UpperThreshold::Fixed(_) => Err(MarketError::WrongMode {
            expected: ThresholdMode::Dynamic,
        }),
    }
}

/// Local price under a dynamic upper threshold `p_ut`.
///
/// Without surplus the hour is inactive at `p_ut` whatever its sign. With
/// surplus, a negative `p_ut` curtails, `0 <= p_ut < lower reference` trades
/// locally at `p_ut`, and otherwise the fixed-threshold rule applies with
/// `p_ut` as the upper bound.
pub fn price_dynamic(r: Sdr, p_ut: f64, th: &Thresholds) -> Result<(f64, Regime), MarketError> {
    if th.mode() != ThresholdMode::Dynamic {
        return Err(MarketError::WrongMode {
            expected: ThresholdMode::Dynamic,
        });
    }
    Ok(dynamic_rule(r, p_ut, th.lower_bound_ref, th.p_lower))
}

fn dynamic_rule(r: Sdr, p_ut: f64, lower_ref: f64, p_lower: f64) -> (f64, Regime) {
    if r.is_zero() {
        (p_ut, Regime::Inactive)
    } else if p_ut < 0.0 {
        (p_ut, Regime::Curtailed)
    } else if p_ut < lower_ref {
        (p_ut, Regime::BelowLcoe)
    } else {
        convex_price(r, p_ut, lower_ref, p_lower)
    }
}

/// Cleared state of one timestep. Energies in kWh, prices in EUR/MWh.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketResult {
    pub t: usize,
    pub surpluses: Vec<f64>,
    pub demands: Vec<f64>,
    pub total_surplus: f64,
    pub total_demand: f64,
    pub sdr: Sdr,
    /// Upper threshold in force (fixed `p_U` or dynamic `p_Ut`).
    pub p_upper_t: f64,
    /// External sell price paid for exports to the utility.
    pub p_lower: f64,
    pub price: f64,
    pub regime: Regime,
}

impl MarketResult {
    /// Energy traded locally: all surplus up to the local demand, none when
    /// the market is inactive or curtailing.
    pub fn local_volume(&self) -> f64 {
        match self.regime {
            Regime::Inactive | Regime::Curtailed => 0.0,
            _ => self.total_surplus.min(self.total_demand),
        }
    }

    /// Surplus exported to the utility.
    pub fn export_volume(&self) -> f64 {
        match self.regime {
            Regime::Curtailed => 0.0,
            _ => self.total_surplus - self.local_volume(),
        }
    }

    /// Demand served by the utility.
    pub fn import_volume(&self) -> f64 {
        self.total_demand - self.local_volume()
    }

    pub fn curtailed_volume(&self) -> f64 {
        match self.regime {
            Regime::Curtailed => self.total_surplus,
            _ => 0.0,
        }
    }
}

/// Clears a single timestep from per-participant surpluses and demands.
pub fn clear_step(
    t: usize,
    surpluses: Vec<f64>,
    demands: Vec<f64>,
    th: &Thresholds,
) -> Result<MarketResult, MarketError> {
    let r = sdr(&surpluses, &demands)?;
    let total_surplus: f64 = surpluses.iter().sum();
    let total_demand: f64 = demands.iter().sum();
    let p_upper_t = th.p_upper_at(t)?;
    let (price, regime) = match th.upper {
        UpperThreshold::Fixed(_) => price_fixed(r, th)?,
        UpperThreshold::Dynamic { .. } => price_dynamic(r, p_upper_t, th)?,
    };
    Ok(MarketResult {
        t,
        surpluses,
        demands,
        total_surplus,
        total_demand,
        sdr: r,
        p_upper_t,
        p_lower: th.p_lower,
        price,
        regime,
    })
}

/// Clears every timestep of the horizon, in time order.
pub fn clear_market(n: &Neighborhood, th: &Thresholds) -> Result<Vec<MarketResult>, MarketError> {
    th.check_horizon(n)?;
    (0..n.horizon())
        .into_par_iter()
        .map(|t| {
            let (surpluses, demands) = n
                .participants()
                .iter()
                .map(|p| {
                    crate::profiles::split_net(p.generation().values()[t], p.load().values()[t])
                })
                .unzip();
            clear_step(t, surpluses, demands, th)
        })
        .collect()
}

/// Price series of a cleared horizon.
pub fn price_series(results: &[MarketResult], n: &Neighborhood) -> TimeSeries {
    TimeSeries::new(n.start(), results.iter().map(|mr| mr.price).collect())
        .expect("cleared prices are finite and non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{default_start, Participant};
    use proptest::prelude::*;

    fn fixed(p_upper: f64, lower_ref: f64, p_lower: f64) -> Thresholds {
        Thresholds::fixed(p_upper, lower_ref, p_lower).unwrap()
    }

    fn dynamic(spot: Vec<f64>, lower_ref: f64, p_lower: f64) -> Thresholds {
        let spot = TimeSeries::new(default_start(), spot).unwrap();
        Thresholds::dynamic(spot, 0.10, 0.0, lower_ref, p_lower).unwrap()
    }

    #[test]
    fn sdr_examples() {
        assert_eq!(sdr(&[2.0, 1.0], &[4.0]).unwrap(), Sdr::Ratio(0.75));
        assert_eq!(sdr(&[], &[5.0]).unwrap(), Sdr::Ratio(0.0));
        assert_eq!(sdr(&[3.0], &[]).unwrap(), Sdr::SaturatedInfinite);
        assert_eq!(sdr(&[3.0], &[0.0, 0.0]).unwrap(), Sdr::SaturatedInfinite);
        assert_eq!(sdr(&[0.0], &[0.0]).unwrap(), Sdr::Ratio(0.0));
        assert!(matches!(
            sdr(&[1.0, -0.5], &[1.0]),
            Err(MarketError::NegativeEntry { kind: "surplus", index: 1, .. })
        ));
    }

    #[test]
    fn price_fixed_examples() {
        let th = fixed(30.46, 8.0, 5.0);
        assert_eq!(price_fixed(Sdr::Ratio(0.0), &th).unwrap(), (30.46, Regime::Inactive));
        let (p, regime) = price_fixed(Sdr::Ratio(0.5), &th).unwrap();
        assert!((p - 19.23).abs() < 1e-12);
        assert_eq!(regime, Regime::Partial);
        assert_eq!(price_fixed(Sdr::Ratio(1.2), &th).unwrap(), (5.0, Regime::Saturated));
        assert_eq!(price_fixed(Sdr::Ratio(1.0), &th).unwrap(), (5.0, Regime::Saturated));
        assert_eq!(
            price_fixed(Sdr::SaturatedInfinite, &th).unwrap(),
            (5.0, Regime::Saturated)
        );
    }

    #[test]
    fn unstable_fixed_thresholds_rejected() {
        assert!(matches!(
            Thresholds::fixed(30.46, 40.0, 5.0),
            Err(MarketError::Unstable { .. })
        ));
        assert!(Thresholds::fixed(30.46, 4.0, 5.0).is_err());
        assert!(Thresholds::fixed(f64::NAN, 8.0, 5.0).is_err());
    }

    #[test]
    fn upper_threshold_examples() {
        let th = dynamic(vec![20.0, 0.0, -10.0], 8.0, 5.0);
        assert!((upper_threshold(0, &th).unwrap() - 22.0).abs() < 1e-12);
        assert_eq!(upper_threshold(1, &th).unwrap(), 0.0);
        assert!((upper_threshold(2, &th).unwrap() + 11.0).abs() < 1e-12);
        assert!(matches!(
            upper_threshold(3, &th),
            Err(MarketError::OutOfRange { t: 3, horizon: 3 })
        ));
        assert!(upper_threshold(0, &fixed(30.46, 8.0, 5.0)).is_err());
    }

    #[test]
    fn additive_markup() {
        let spot = TimeSeries::new(default_start(), vec![20.0, -10.0]).unwrap();
        let th = Thresholds::dynamic(spot, 0.0, 3.0, 8.0, 5.0).unwrap();
        assert_eq!(upper_threshold(0, &th).unwrap(), 23.0);
        assert_eq!(upper_threshold(1, &th).unwrap(), -7.0);
    }

    #[test]
    fn price_dynamic_examples() {
        let th = dynamic(vec![20.0], 8.0, 5.0);
        let (p, regime) = price_dynamic(Sdr::Ratio(0.5), 22.0, &th).unwrap();
        assert!((p - 15.0).abs() < 1e-12);
        assert_eq!(regime, Regime::Partial);
        for r in [Sdr::Ratio(0.3), Sdr::Ratio(1.5), Sdr::SaturatedInfinite] {
            assert_eq!(price_dynamic(r, 5.5, &th).unwrap(), (5.5, Regime::BelowLcoe));
            assert_eq!(price_dynamic(r, -11.0, &th).unwrap(), (-11.0, Regime::Curtailed));
        }
        assert_eq!(price_dynamic(Sdr::Ratio(0.2), 0.0, &th).unwrap(), (0.0, Regime::BelowLcoe));
        assert_eq!(price_dynamic(Sdr::Ratio(0.0), -11.0, &th).unwrap(), (-11.0, Regime::Inactive));
        assert_eq!(price_dynamic(Sdr::Ratio(1.1), 22.0, &th).unwrap(), (5.0, Regime::Saturated));
        assert!(price_dynamic(Sdr::Ratio(0.5), 22.0, &fixed(30.46, 8.0, 5.0)).is_err());
    }

    #[test]
    fn single_step_clear() {
        let th = fixed(30.46, 8.0, 5.0);
        let mr = clear_step(0, vec![2.0, 1.0, 0.0], vec![0.0, 0.0, 4.0], &th).unwrap();
        assert_eq!(mr.sdr, Sdr::Ratio(0.75));
        assert!((mr.price - 13.615).abs() < 1e-12);
        assert_eq!(mr.regime, Regime::Partial);
    }

    fn participant(id: &str, load: Vec<f64>, gen: Vec<f64>, cap: f64) -> Participant {
        let start = default_start();
        Participant::new(
            id,
            TimeSeries::energy(start, load).unwrap(),
            cap,
            TimeSeries::energy(start, gen).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn dead_market_is_inactive_everywhere() {
        let n = Neighborhood::new(vec![
            participant("a", vec![1.0, 2.0, 0.0], vec![0.0; 3], 0.0),
            participant("b", vec![0.5, 0.0, 0.0], vec![0.0; 3], 0.0),
        ])
        .unwrap();
        let th = fixed(30.46, 8.0, 5.0);
        let results = clear_market(&n, &th).unwrap();
        assert_eq!(results.len(), 3);
        for mr in &results {
            assert_eq!(mr.regime, Regime::Inactive);
            assert_eq!(mr.price, mr.p_upper_t);
        }
    }

    #[test]
    fn clear_market_matches_net_positions() {
        let n = Neighborhood::new(vec![
            participant("a", vec![1.0, 1.0], vec![3.0, 0.5], 2.0),
            participant("b", vec![4.0, 1.0], vec![0.0, 0.0], 0.0),
        ])
        .unwrap();
        let results = clear_market(&n, &fixed(30.46, 8.0, 5.0)).unwrap();
        for mr in &results {
            for (i, p) in n.participants().iter().enumerate() {
                let (s, d) = p.net_position(mr.t).unwrap();
                assert_eq!(mr.surpluses[i], s);
                assert_eq!(mr.demands[i], d);
            }
        }
        assert_eq!(results[0].sdr, Sdr::Ratio(0.5));
        assert_eq!(results[1].sdr, Sdr::Ratio(0.0));
    }

    #[test]
    fn spot_horizon_mismatch() {
        let n = Neighborhood::new(vec![participant("a", vec![1.0; 3], vec![0.0; 3], 0.0)]).unwrap();
        let th = dynamic(vec![20.0, 21.0], 8.0, 5.0);
        assert!(matches!(clear_market(&n, &th), Err(MarketError::HorizonMismatch(_))));
    }

    proptest! {
        #[test]
        fn fixed_price_within_bounds_and_decreasing(
            p_lower in 0.0f64..10.0,
            gap1 in 0.0f64..10.0,
            gap2 in 0.01f64..50.0,
            r1 in 0.0f64..1.0,
            r2 in 0.0f64..1.0,
        ) {
            let lower_ref = p_lower + gap1;
            let p_upper = lower_ref + gap2;
            let th = fixed(p_upper, lower_ref, p_lower);
            let (a, b) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            prop_assume!(a > 0.0 && b - a > 1e-9);
            let (pa, _) = price_fixed(Sdr::Ratio(a), &th).unwrap();
            let (pb, _) = price_fixed(Sdr::Ratio(b), &th).unwrap();
            prop_assert!(pa > pb);
            prop_assert!(pa <= p_upper && pb >= lower_ref - 1e-12);
        }

        #[test]
        fn limit_continuity(eps in 1e-9f64..1.0, lower_ref in 0.0f64..20.0, spread in 0.0f64..50.0) {
            let p_upper = lower_ref + spread;
            let th = fixed(p_upper, lower_ref, 0.0);
            let (near_one, _) = price_fixed(Sdr::Ratio(1.0 - eps), &th).unwrap();
            let (near_zero, _) = price_fixed(Sdr::Ratio(eps), &th).unwrap();
            let slack = 1e-12 * p_upper.max(1.0);
            prop_assert!((near_one - lower_ref).abs() <= eps * spread + slack);
            prop_assert!((near_zero - p_upper).abs() <= eps * spread + slack);
        }

        #[test]
        fn scale_invariance(
            loads in proptest::collection::vec(0.0f64..5.0, 1..6),
            gens in proptest::collection::vec(0.0f64..5.0, 1..6),
            k in 0.01f64..100.0,
        ) {
            let n = loads.len().min(gens.len());
            let split = |scale: f64| -> (Vec<f64>, Vec<f64>) {
                (0..n).map(|i| crate::profiles::split_net(gens[i] * scale, loads[i] * scale)).unzip()
            };
            let (s1, d1) = split(1.0);
            let (sk, dk) = split(k);
            let th = fixed(30.46, 8.0, 5.0);
            let a = clear_step(0, s1, d1, &th).unwrap();
            let b = clear_step(0, sk, dk, &th).unwrap();
            prop_assert_eq!(a.regime, b.regime);
            match (a.sdr, b.sdr) {
                (Sdr::Ratio(x), Sdr::Ratio(y)) => prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0)),
                (x, y) => prop_assert_eq!(x, y),
            }
            prop_assert!((a.price - b.price).abs() <= 1e-10);
        }
    }
}
