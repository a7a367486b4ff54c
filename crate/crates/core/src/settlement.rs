//! Ex-post allocation of procurement costs and prosumer revenues.
//!
//! Each timestep's neighborhood cost is split over participants in
//! proportion to their net demand, and its revenue in proportion to their
//! surplus. Energy routing (local, utility, curtailed) is attributed pro rata
//! in the same way. Energies are kWh and prices EUR/MWh, so every money
//! amount is `kWh / 1000 * EUR/MWh`.

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::market::{MarketError, MarketResult, Regime, Sdr, Thresholds};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::profiles::{split_net, Neighborhood};

pub const KWH_PER_MWH: f64 = 1000.0;

/// Relative tolerance for runtime conservation checks.
pub const CONSERVATION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SettlementError {
    #[error("horizon mismatch: {0}")]
    HorizonMismatch(String),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("invariant breach at t={t}: {check} ({lhs} vs {rhs})")]
    InvariantBreach {
        t: usize,
        check: &'static str,
        lhs: f64,
        rhs: f64,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Neighborhood procurement cost `c_t` in EUR.
///
/// Locally covered demand is paid at the local price and the remainder at the
/// upper threshold. This gives `Σs·p_t + (Σd−Σs)·p_Ut` while the surplus only
/// partly covers demand, `Σd·p_t` once saturated, and `Σd·p_Ut` when the
/// market is inactive or curtailing.
pub fn total_cost(mr: &MarketResult) -> f64 {
    (mr.local_volume() * mr.price + mr.import_volume() * mr.p_upper_t) / KWH_PER_MWH
}

/// Share of `c_t` borne by participant `i`: `d_i / Σd · c_t`.
pub fn individual_cost(mr: &MarketResult, i: usize) -> f64 {
    if mr.total_demand > 0.0 {
        mr.demands[i] / mr.total_demand * total_cost(mr)
    } else {
        0.0
    }
}

/// Closed form `d_i · (r·p_t + (1−r)·p_Ut)`; only defined for `0 < r <= 1`.
pub fn individual_cost_closed_form(mr: &MarketResult, i: usize) -> Option<f64> {
    match mr.sdr {
        Sdr::Ratio(r) if r > 0.0 && r <= 1.0 => {
            Some(mr.demands[i] * (r * mr.price + (1.0 - r) * mr.p_upper_t) / KWH_PER_MWH)
        }
        _ => None,
    }
}

/// Prosumer revenue `y_t` in EUR.
///
/// Locally sold surplus earns the local price and exports earn `p_lower`;
/// curtailed surplus earns nothing. In partial hours this is `Σs·p_t`, and
/// in saturated hours, where `p_t = p_lower`, it is `Σs·p_lower`.
pub fn total_revenue(mr: &MarketResult) -> f64 {
    (mr.local_volume() * mr.price + mr.export_volume() * mr.p_lower) / KWH_PER_MWH
}

/// Share of `y_t` earned by participant `i`: `s_i / Σs · y_t`.
pub fn individual_revenue(mr: &MarketResult, i: usize) -> f64 {
    if mr.total_surplus > 0.0 {
        mr.surpluses[i] / mr.total_surplus * total_revenue(mr)
    } else {
        0.0
    }
}

/// Alternative closed form `s_i · (p_t/r + (1 − 1/r)·p_lower)` for `r > 0`
/// (its `r → ∞` limit `s_i·p_lower` for zero demand).
///
/// It coincides with [`individual_revenue`] when `p_t = p_lower`, i.e. in
/// saturated hours, but not in partial hours.
pub fn individual_revenue_closed_form(mr: &MarketResult, i: usize) -> Option<f64> {
    let s = mr.surpluses[i];
    match mr.sdr {
        Sdr::Ratio(r) if r > 0.0 => {
            Some(s * (mr.price / r + (1.0 - 1.0 / r) * mr.p_lower) / KWH_PER_MWH)
        }
        Sdr::SaturatedInfinite => Some(s * mr.p_lower / KWH_PER_MWH),
        _ => None,
    }
}

/// One participant in one timestep. Energies in kWh, money in EUR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SettlementRecord {
    pub participant: usize,
    pub t: usize,
    pub cost: f64,
    pub revenue: f64,
    pub net_cost: f64,
    pub bought_local: f64,
    pub bought_utility: f64,
    pub sold_local: f64,
    pub sold_utility: f64,
    pub curtailed: f64,
    pub self_consumed: f64,
    pub demand: f64,
    pub surplus: f64,
}

/// Neighborhood flows of one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepTotals {
    pub t: usize,
    pub regime: Option<Regime>,
    /// `c_t`: everything paid for net demand.
    pub cost: f64,
    /// `y_t`: everything received for surplus.
    pub revenue: f64,
    /// Paid by consumers to prosumers for local energy.
    pub local_payment: f64,
    /// Paid by consumers to the utility.
    pub utility_receipts: f64,
    /// Paid by the utility to prosumers for exports.
    pub utility_export_payment: f64,
    pub total_demand: f64,
    pub total_surplus: f64,
    pub local: f64,
    pub imported: f64,
    pub exported: f64,
    pub curtailed: f64,
}

/// Annual sums for one participant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ParticipantTotals {
    pub cost: f64,
    pub revenue: f64,
    pub net_cost: f64,
    pub bought_local: f64,
    pub bought_utility: f64,
    pub sold_local: f64,
    pub sold_utility: f64,
    pub curtailed: f64,
    pub self_consumed: f64,
    pub generation: f64,
}

/// The three summary rows compared across scenarios.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct NeighborhoodTotals {
    /// Procurement cost of participants without PV.
    pub consumer_cost: f64,
    /// `Σ_t y_t`.
    pub prosumer_revenue: f64,
    /// Net cost summed over all participants.
    pub net_cost: f64,
}

/// Every participant/timestep record plus derived totals.
#[derive(Debug, Clone, PartialEq)]
pub struct SettlementLedger {
    participant_ids: Vec<String>,
    has_pv: Vec<bool>,
    horizon: usize,
    records: Vec<SettlementRecord>,
    steps: Vec<StepTotals>,
    totals: Vec<ParticipantTotals>,
    neighborhood: NeighborhoodTotals,
}

impl SettlementLedger {
    fn assemble(n: &Neighborhood, records: Vec<SettlementRecord>, steps: Vec<StepTotals>) -> Self {
        let count = n.len();
        let mut acc = vec![[CompensatedSum::new(); 10]; count];
        for rec in &records {
            let g = n.participants()[rec.participant].generation().values()[rec.t];
            let fields = [
                rec.cost,
                rec.revenue,
                rec.net_cost,
                rec.bought_local,
                rec.bought_utility,
                rec.sold_local,
                rec.sold_utility,
                rec.curtailed,
                rec.self_consumed,
                g,
            ];
            for (sum, v) in acc[rec.participant].iter_mut().zip(fields) {
                sum.add(v);
            }
        }
        let totals: Vec<ParticipantTotals> = acc
            .iter()
            .map(|a| ParticipantTotals {
                cost: a[0].value(),
                revenue: a[1].value(),
                net_cost: a[2].value(),
                bought_local: a[3].value(),
                bought_utility: a[4].value(),
                sold_local: a[5].value(),
                sold_utility: a[6].value(),
                curtailed: a[7].value(),
                self_consumed: a[8].value(),
                generation: a[9].value(),
            })
            .collect();
        let has_pv: Vec<bool> = n.participants().iter().map(|p| p.has_pv()).collect();
        let neighborhood = NeighborhoodTotals {
            consumer_cost: compensated_sum(
                records.iter().filter(|r| !has_pv[r.participant]).map(|r| r.cost),
            ),
            prosumer_revenue: compensated_sum(steps.iter().map(|s| s.revenue)),
            net_cost: compensated_sum(records.iter().map(|r| r.net_cost)),
        };
        Self {
            participant_ids: n.participants().iter().map(|p| p.id().to_string()).collect(),
            has_pv,
            horizon: n.horizon(),
            records,
            steps,
            totals,
            neighborhood,
        }
    }

    pub fn participant_ids(&self) -> &[String] {
        &self.participant_ids
    }

    pub fn has_pv(&self, i: usize) -> bool {
        self.has_pv[i]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// All records, time-major: index `t * participants + i`.
    pub fn records(&self) -> &[SettlementRecord] {
        &self.records
    }

    pub fn record(&self, i: usize, t: usize) -> &SettlementRecord {
        &self.records[t * self.participant_ids.len() + i]
    }

    pub fn records_at(&self, t: usize) -> &[SettlementRecord] {
        let n = self.participant_ids.len();
        &self.records[t * n..(t + 1) * n]
    }

    pub fn steps(&self) -> &[StepTotals] {
        &self.steps
    }

    pub fn totals(&self) -> &[ParticipantTotals] {
        &self.totals
    }

    pub fn participant_totals(&self, id: &str) -> Option<&ParticipantTotals> {
        self.participant_ids
            .iter()
            .position(|p| p == id)
            .map(|i| &self.totals[i])
    }

    pub fn neighborhood(&self) -> &NeighborhoodTotals {
        &self.neighborhood
    }

    /// Verifies cost/revenue allocation, money balance, energy balance and
    /// the net-cost identity at every timestep.
    pub fn check_conservation(&self, tol: f64) -> Result<(), SettlementError> {
        for step in &self.steps {
            let t = step.t;
            let recs = self.records_at(t);
            let check = |check: &'static str, lhs: f64, rhs: f64, scale: f64| {
                if (lhs - rhs).abs() <= tol * scale.max(f64::MIN_POSITIVE) {
                    Ok(())
                } else {
                    Err(SettlementError::InvariantBreach { t, check, lhs, rhs })
                }
            };
            let abs_sum = |f: fn(&SettlementRecord) -> f64| -> f64 {
                recs.iter().map(|r| f(r).abs()).sum()
            };
            let sum = |f: fn(&SettlementRecord) -> f64| -> f64 { recs.iter().map(f).sum() };

            check("sum of individual costs", sum(|r| r.cost), step.cost, abs_sum(|r| r.cost).max(step.cost.abs()))?;
            check(
                "sum of individual revenues",
                sum(|r| r.revenue),
                step.revenue,
                abs_sum(|r| r.revenue).max(step.revenue.abs()),
            )?;
            check(
                "consumer payments",
                step.cost,
                step.local_payment + step.utility_receipts,
                step.cost.abs() + step.local_payment.abs() + step.utility_receipts.abs(),
            )?;
            check(
                "prosumer receipts",
                step.revenue,
                step.local_payment + step.utility_export_payment,
                step.revenue.abs() + step.local_payment.abs() + step.utility_export_payment.abs(),
            )?;
            check(
                "local energy",
                sum(|r| r.bought_local),
                sum(|r| r.sold_local),
                abs_sum(|r| r.bought_local) + abs_sum(|r| r.sold_local),
            )?;
            let imports = sum(|r| r.bought_utility);
            let exports = sum(|r| r.sold_utility);
            let curtailed = sum(|r| r.curtailed);
            check(
                "utility energy",
                imports - exports,
                step.total_demand - step.total_surplus + curtailed,
                imports + exports + step.total_demand + step.total_surplus,
            )?;
            for r in recs {
                if r.net_cost != r.cost - r.revenue {
                    return Err(SettlementError::InvariantBreach {
                        t,
                        check: "net cost identity",
                        lhs: r.net_cost,
                        rhs: r.cost - r.revenue,
                    });
                }
                check("demand routing", r.bought_local + r.bought_utility, r.demand, r.demand)?;
                check(
                    "surplus routing",
                    r.sold_local + r.sold_utility + r.curtailed,
                    r.surplus,
                    r.surplus,
                )?;
            }
        }
        Ok(())
    }
}

fn settle_step(mr: &MarketResult, n: &Neighborhood, out: &mut Vec<SettlementRecord>) -> StepTotals {
    let t = mr.t;
    let cost = total_cost(mr);
    let revenue = total_revenue(mr);
    let local = mr.local_volume();
    let imported = mr.import_volume();
    let exported = mr.export_volume();
    let curtailed = mr.curtailed_volume();
    for (i, p) in n.participants().iter().enumerate() {
        let d = mr.demands[i];
        let s = mr.surpluses[i];
        let demand_share = if mr.total_demand > 0.0 { d / mr.total_demand } else { 0.0 };
        let surplus_share = if mr.total_surplus > 0.0 { s / mr.total_surplus } else { 0.0 };
        let c = demand_share * cost;
        let y = surplus_share * revenue;
        out.push(SettlementRecord {
            participant: i,
            t,
            cost: c,
            revenue: y,
            net_cost: c - y,
            bought_local: demand_share * local,
            bought_utility: demand_share * imported,
            sold_local: surplus_share * local,
            sold_utility: surplus_share * exported,
            curtailed: surplus_share * curtailed,
            self_consumed: p.generation().values()[t].min(p.load().values()[t]),
            demand: d,
            surplus: s,
        });
    }
    StepTotals {
        t,
        regime: Some(mr.regime),
        cost,
        revenue,
        local_payment: local * mr.price / KWH_PER_MWH,
        utility_receipts: imported * mr.p_upper_t / KWH_PER_MWH,
        utility_export_payment: exported * mr.p_lower / KWH_PER_MWH,
        total_demand: mr.total_demand,
        total_surplus: mr.total_surplus,
        local,
        imported,
        exported,
        curtailed,
    }
}

/// Settles a cleared horizon.
pub fn settle(mrs: &[MarketResult], n: &Neighborhood) -> Result<SettlementLedger, SettlementError> {
    if mrs.len() != n.horizon() {
        return Err(SettlementError::HorizonMismatch(format!(
            "{} market results for a horizon of {}",
            mrs.len(),
            n.horizon()
        )));
    }
    let mut records = Vec::with_capacity(mrs.len() * n.len());
    let mut steps = Vec::with_capacity(mrs.len());
    for (t, mr) in mrs.iter().enumerate() {
        if mr.t != t || mr.demands.len() != n.len() || mr.surpluses.len() != n.len() {
            return Err(SettlementError::HorizonMismatch(format!(
                "market result {t} does not match the neighborhood"
            )));
        }
        steps.push(settle_step(mr, n, &mut records));
    }
    Ok(SettlementLedger::assemble(n, records, steps))
}

/// No-LEM counterfactual: consumers buy all net demand at the upper
/// threshold, prosumers export all surplus at `sell_price`.
pub fn settle_base(
    n: &Neighborhood,
    sell_price: f64,
    th: &Thresholds,
) -> Result<SettlementLedger, SettlementError> {
    th.check_horizon(n)?;
    let mut records = Vec::with_capacity(n.horizon() * n.len());
    let mut steps = Vec::with_capacity(n.horizon());
    for t in 0..n.horizon() {
        let p_upper = th.p_upper_at(t)?;
        let mut total_demand = 0.0;
        let mut total_surplus = 0.0;
        for (i, p) in n.participants().iter().enumerate() {
            let g = p.generation().values()[t];
            let l = p.load().values()[t];
            let (s, d) = split_net(g, l);
            total_demand += d;
            total_surplus += s;
            let cost = d * p_upper / KWH_PER_MWH;
            let revenue = s * sell_price / KWH_PER_MWH;
            records.push(SettlementRecord {
                participant: i,
                t,
                cost,
                revenue,
                net_cost: cost - revenue,
                bought_local: 0.0,
                bought_utility: d,
                sold_local: 0.0,
                sold_utility: s,
                curtailed: 0.0,
                self_consumed: g.min(l),
                demand: d,
                surplus: s,
            });
        }
        let cost = total_demand * p_upper / KWH_PER_MWH;
        let revenue = total_surplus * sell_price / KWH_PER_MWH;
        steps.push(StepTotals {
            t,
            regime: None,
            cost,
            revenue,
            local_payment: 0.0,
            utility_receipts: cost,
            utility_export_payment: revenue,
            total_demand,
            total_surplus,
            local: 0.0,
            imported: total_demand,
            exported: total_surplus,
            curtailed: 0.0,
        });
    }
    Ok(SettlementLedger::assemble(n, records, steps))
}

/// Header of the ledger export.
pub const LEDGER_HEADER: &str =
    "participant,t,cost,revenue,net_cost,bought_local,bought_utility,sold_local,sold_utility,curtailed";

/// Renders the ledger, one row per participant and timestep in time-major order.
pub fn ledger_csv(ledger: &SettlementLedger) -> String {
    use std::fmt::Write as _;
    let mut out = format!("{LEDGER_HEADER}\n");
    for r in ledger.records() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            ledger.participant_ids[r.participant],
            r.t,
            r.cost,
            r.revenue,
            r.net_cost,
            r.bought_local,
            r.bought_utility,
            r.sold_local,
            r.sold_utility,
            r.curtailed
        );
    }
    out
}

pub fn write_ledger_csv(path: &Path, ledger: &SettlementLedger) -> Result<(), SettlementError> {
    std::fs::write(path, ledger_csv(ledger)).map_err(|source| SettlementError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{clear_market, clear_step};
    use crate::profiles::{default_start, Participant, TimeSeries};
    use proptest::prelude::*;

    fn fixed() -> Thresholds {
        Thresholds::fixed(30.46, 8.0, 5.0).unwrap()
    }

    /// s = {2, 1} MWh from two prosumers, d = {4} MWh from one consumer.
    fn partial_step() -> MarketResult {
        clear_step(0, vec![2000.0, 1000.0, 0.0], vec![0.0, 0.0, 4000.0], &fixed()).unwrap()
    }

    #[test]
    fn total_cost_examples() {
        let mr = partial_step();
        assert!((mr.price - 13.615).abs() < 1e-12);
        assert!((total_cost(&mr) - 71.305).abs() < 1e-9);

        let saturated = clear_step(0, vec![5000.0, 0.0], vec![0.0, 4000.0], &fixed()).unwrap();
        assert_eq!(saturated.regime, Regime::Saturated);
        assert!((total_cost(&saturated) - 20.0).abs() < 1e-12);

        let utility_only = clear_step(0, vec![0.0], vec![4000.0], &fixed()).unwrap();
        assert!((total_cost(&utility_only) - 121.84).abs() < 1e-9);
    }

    #[test]
    fn individual_cost_examples() {
        let mr = partial_step();
        assert!((individual_cost(&mr, 2) - total_cost(&mr)).abs() < 1e-12);
        assert_eq!(individual_cost(&mr, 0), 0.0);

        // Two consumers d = {1, 3} MWh sharing the same 71.305 EUR.
        let two = clear_step(0, vec![2000.0, 1000.0, 0.0, 0.0], vec![0.0, 0.0, 1000.0, 3000.0], &fixed())
            .unwrap();
        assert!((total_cost(&two) - 71.305).abs() < 1e-9);
        assert!((individual_cost(&two, 2) - 17.826_25).abs() < 1e-9);
        assert!((individual_cost(&two, 3) - 53.478_75).abs() < 1e-9);
    }

    #[test]
    fn revenue_examples() {
        let mr = partial_step();
        assert!((total_revenue(&mr) - 40.845).abs() < 1e-9);
        assert!((individual_revenue(&mr, 0) - 27.23).abs() < 1e-9);
        assert_eq!(individual_revenue(&mr, 2), 0.0);

        let saturated = clear_step(0, vec![5000.0, 0.0], vec![0.0, 4000.0], &fixed()).unwrap();
        let y = total_revenue(&saturated);
        assert!((y - 25.0).abs() < 1e-12);
        // 20 EUR from the consumer, 5 EUR from the utility.
        let ledger_step = {
            let mut recs = Vec::new();
            let n = neighborhood_from_step(&[5000.0, 0.0], &[0.0, 4000.0]);
            settle_step(&saturated, &n, &mut recs)
        };
        assert!((ledger_step.local_payment - 20.0).abs() < 1e-12);
        assert!((ledger_step.utility_export_payment - 5.0).abs() < 1e-12);
        assert!((individual_revenue(&saturated, 0) - 25.0).abs() < 1e-12);
        assert!((individual_revenue_closed_form(&saturated, 0).unwrap() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn curtailed_revenue_is_zero() {
        let spot = TimeSeries::new(default_start(), vec![-10.0]).unwrap();
        let th = Thresholds::dynamic(spot, 0.1, 0.0, 8.0, 5.0).unwrap();
        let mr = clear_step(0, vec![3000.0, 0.0], vec![0.0, 1000.0], &th).unwrap();
        assert_eq!(mr.regime, Regime::Curtailed);
        assert_eq!(total_revenue(&mr), 0.0);
        assert!((total_cost(&mr) - (-11.0)).abs() < 1e-12);
    }

    #[test]
    fn below_lcoe_saturated_exports_at_p_lower() {
        let spot = TimeSeries::new(default_start(), vec![5.0]).unwrap();
        let th = Thresholds::dynamic(spot, 0.1, 0.0, 8.0, 5.0).unwrap();
        let mr = clear_step(0, vec![3000.0, 0.0], vec![0.0, 1000.0], &th).unwrap();
        assert_eq!(mr.regime, Regime::BelowLcoe);
        assert!((mr.price - 5.5).abs() < 1e-12);
        assert!((total_cost(&mr) - 5.5).abs() < 1e-12);
        assert!((total_revenue(&mr) - (5.5 + 2.0 * 5.0)).abs() < 1e-12);
    }

    #[test]
    fn closed_form_revenue_diverges_in_partial_hours() {
        let mr = partial_step();
        let primary = individual_revenue(&mr, 0);
        let alt = individual_revenue_closed_form(&mr, 0).unwrap();
        // 2 * (13.615 / 0.75 + (1 - 4/3) * 5) = 32.973..., vs 27.23.
        assert!((alt - 32.973_333_333_333).abs() < 1e-9);
        assert!((primary - alt).abs() > 1.0);
    }

    fn neighborhood_from_step(s: &[f64], d: &[f64]) -> Neighborhood {
        let participants = s
            .iter()
            .zip(d)
            .enumerate()
            .map(|(i, (&s, &d))| {
                let load = TimeSeries::energy(default_start(), vec![d + 1.0]).unwrap();
                let gen = TimeSeries::energy(default_start(), vec![if s > 0.0 { s + 1.0 } else { 1.0 }])
                    .unwrap();
                Participant::new(format!("p{i}"), load, 1.0, gen).unwrap()
            })
            .collect();
        Neighborhood::new(participants).unwrap()
    }

    #[test]
    fn settle_single_partial_step() {
        let n = neighborhood_from_step(&[2000.0, 1000.0, 0.0], &[0.0, 0.0, 4000.0]);
        let mrs = clear_market(&n, &fixed()).unwrap();
        let ledger = settle(&mrs, &n).unwrap();
        let r0 = ledger.record(0, 0);
        let r1 = ledger.record(1, 0);
        let r2 = ledger.record(2, 0);
        assert!((r0.revenue - 27.23).abs() < 1e-9);
        assert!((r1.revenue - 13.615).abs() < 1e-9);
        assert!((r2.cost - 71.305).abs() < 1e-9);
        assert!((r2.bought_local - 3000.0).abs() < 1e-9);
        assert!((r2.bought_utility - 1000.0).abs() < 1e-9);
        assert_eq!(r0.cost, 0.0);
        ledger.check_conservation(CONSERVATION_TOL).unwrap();
    }

    #[test]
    fn dead_market_ledger() {
        let load = TimeSeries::energy(default_start(), vec![1000.0, 2000.0]).unwrap();
        let n = Neighborhood::new(vec![Participant::consumer("c", load).unwrap()]).unwrap();
        let mrs = clear_market(&n, &fixed()).unwrap();
        let ledger = settle(&mrs, &n).unwrap();
        let expected = 3000.0 * 30.46 / 1000.0;
        assert!((ledger.totals()[0].cost - expected).abs() < 1e-12);
        assert_eq!(ledger.neighborhood().prosumer_revenue, 0.0);
        assert!((ledger.neighborhood().consumer_cost - expected).abs() < 1e-12);
    }

    #[test]
    fn settle_rejects_wrong_horizon() {
        let n = neighborhood_from_step(&[2000.0, 0.0], &[0.0, 1000.0]);
        let mrs = clear_market(&n, &fixed()).unwrap();
        assert!(settle(&mrs[..0], &n).is_err());
    }

    fn random_neighborhood(seed: u64, hours: usize, members: usize) -> Neighborhood {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let participants = (0..members)
            .map(|i| {
                let load: Vec<f64> = (0..hours).map(|_| rng.gen_range(0.0..2.0)).collect();
                let load = TimeSeries::energy(default_start(), load).unwrap();
                if i % 2 == 0 {
                    let gen: Vec<f64> = (0..hours).map(|_| rng.gen_range(0.0..4.0)).collect();
                    let gen = TimeSeries::energy(default_start(), gen).unwrap();
                    Participant::new(format!("p{i}"), load, 3.0, gen).unwrap()
                } else {
                    Participant::consumer(format!("c{i}"), load).unwrap()
                }
            })
            .collect();
        Neighborhood::new(participants).unwrap()
    }

    #[test]
    fn money_balance_on_random_instance() {
        let n = random_neighborhood(17, 100, 7);
        let spot: Vec<f64> = (0..100).map(|t| ((t as f64) * 0.7).sin() * 30.0 + 5.0).collect();
        let spot = TimeSeries::new(default_start(), spot).unwrap();
        let schemes = [
            fixed(),
            Thresholds::fixed(30.46, 6.0, 6.0).unwrap(),
            Thresholds::dynamic(spot, 0.1, 0.0, 8.0, 5.0).unwrap(),
        ];
        for th in &schemes {
            let mrs = clear_market(&n, th).unwrap();
            let ledger = settle(&mrs, &n).unwrap();
            ledger.check_conservation(CONSERVATION_TOL).unwrap();
            let base = settle_base(&n, 6.0, th).unwrap();
            base.check_conservation(CONSERVATION_TOL).unwrap();
        }
    }

    #[test]
    fn base_revenue_is_linear_in_sell_price() {
        let n = random_neighborhood(3, 200, 6);
        let fit = settle_base(&n, 6.0, &fixed()).unwrap();
        let auction = settle_base(&n, 5.0, &fixed()).unwrap();
        let surplus: f64 = fit.steps().iter().map(|s| s.total_surplus).sum();
        let diff = fit.neighborhood().prosumer_revenue - auction.neighborhood().prosumer_revenue;
        assert!((diff - surplus / 1000.0).abs() < 1e-9);
        assert!(fit.neighborhood().prosumer_revenue > auction.neighborhood().prosumer_revenue);
        assert_eq!(fit.neighborhood().consumer_cost, auction.neighborhood().consumer_cost);
        for t in 0..n.horizon() {
            for r in auction.records_at(t) {
                assert_eq!(r.bought_local, 0.0);
                assert_eq!(r.cost, r.demand * 30.46 / 1000.0);
            }
        }
    }

    proptest! {
        #[test]
        fn cost_closed_form_matches_allocation(
            s in proptest::collection::vec(0.0f64..5000.0, 1..4),
            d in proptest::collection::vec(1.0f64..5000.0, 1..4),
        ) {
            let total_s: f64 = s.iter().sum();
            let total_d: f64 = d.iter().sum();
            prop_assume!(total_s > 0.0 && total_s <= total_d);
            let mut surpluses = s.clone();
            surpluses.extend(std::iter::repeat_n(0.0, d.len()));
            let mut demands = vec![0.0; s.len()];
            demands.extend(d.iter().copied());
            let mr = clear_step(0, surpluses, demands, &fixed()).unwrap();
            for i in 0..mr.demands.len() {
                let a = individual_cost(&mr, i);
                let b = individual_cost_closed_form(&mr, i).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300));
            }
        }
    }
}
