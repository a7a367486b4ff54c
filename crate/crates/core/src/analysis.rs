//! Result artifacts: duration curves, daily and monthly price statistics,
//! scenario comparisons, the prosumer-count sweep and the self-consumption
//! breakdown. CSV renderers live here too so that file content is produced in
//! one place.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::market::Regime;
use crate::numeric::{compensated_sum, pct_delta};
use crate::profiles::{Neighborhood, Participant, ProfileError, TimeSeries};
use crate::scenario::{Scenario, ScenarioError, ScenarioKind, ScenarioLabel};
use crate::settlement::{NeighborhoodTotals, SettlementLedger};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("price series shorter than one full day")]
    NoFullDay,
    #[error("reference scenario {0} is missing")]
    MissingScenario(ScenarioLabel),
    #[error("outcomes do not share a neighborhood horizon")]
    HorizonMismatch,
    #[error("role violation: {0}")]
    RoleViolation(String),
    #[error("no PV generation to break down")]
    ZeroGeneration,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// Everything one scenario run produces.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub label: ScenarioLabel,
    pub prices: TimeSeries,
    /// Per-hour regimes; `None` for base scenarios.
    pub regimes: Option<Vec<Regime>>,
    pub ledger: SettlementLedger,
    pub summary: NeighborhoodTotals,
}

impl ScenarioOutcome {
    pub fn new(
        label: ScenarioLabel,
        prices: TimeSeries,
        regimes: Option<Vec<Regime>>,
        ledger: SettlementLedger,
    ) -> Self {
        let summary = *ledger.neighborhood();
        Self {
            label,
            prices,
            regimes,
            ledger,
            summary,
        }
    }

    /// Fraction of hours in which the market traded or curtailed.
    pub fn active_share(&self) -> Option<f64> {
        self.regimes.as_ref().map(|regimes| {
            let active = regimes.iter().filter(|r| **r != Regime::Inactive).count();
            active as f64 / regimes.len() as f64
        })
    }
}

/// Prices sorted in descending order.
pub fn duration_curve(prices: &TimeSeries) -> Vec<f64> {
    let mut sorted = prices.values().to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DailyAverage {
    pub date: NaiveDate,
    pub avg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonthlyMean {
    pub year: i32,
    pub month: u32,
    /// Mean of the month's daily averages.
    pub mean: f64,
    pub days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailyMonthlyStats {
    pub daily: Vec<DailyAverage>,
    pub monthly: Vec<MonthlyMean>,
    /// Hours belonging to incomplete calendar days, left out of all averages.
    pub excluded_hours: usize,
}

impl DailyMonthlyStats {
    pub fn month(&self, year: i32, month: u32) -> Option<&MonthlyMean> {
        self.monthly.iter().find(|m| m.year == year && m.month == month)
    }
}

/// Averages complete UTC calendar days, then averages those per month.
pub fn daily_monthly_stats(prices: &TimeSeries) -> Result<DailyMonthlyStats, AnalysisError> {
    let mut by_day: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for (t, &p) in prices.values().iter().enumerate() {
        by_day.entry(prices.timestamp(t).date_naive()).or_default().push(p);
    }
    let mut excluded_hours = 0;
    let mut daily = Vec::new();
    for (date, values) in by_day {
        if values.len() == 24 {
            daily.push(DailyAverage {
                date,
                avg: compensated_sum(values.iter().copied()) / 24.0,
            });
        } else {
            excluded_hours += values.len();
        }
    }
    if daily.is_empty() {
        return Err(AnalysisError::NoFullDay);
    }
    let mut by_month: BTreeMap<(i32, u32), Vec<f64>> = BTreeMap::new();
    for d in &daily {
        by_month.entry((d.date.year(), d.date.month())).or_default().push(d.avg);
    }
    let monthly = by_month
        .into_iter()
        .map(|((year, month), avgs)| MonthlyMean {
            year,
            month,
            mean: compensated_sum(avgs.iter().copied()) / avgs.len() as f64,
            days: avgs.len(),
        })
        .collect();
    Ok(DailyMonthlyStats {
        daily,
        monthly,
        excluded_hours,
    })
}

/// Rows of the scenario summary table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SummaryRow {
    ConsumerCost,
    ProsumerRevenue,
    NetCost,
}

impl SummaryRow {
    pub const ALL: [SummaryRow; 3] = [
        SummaryRow::ConsumerCost,
        SummaryRow::ProsumerRevenue,
        SummaryRow::NetCost,
    ];

    pub fn of(&self, s: &NeighborhoodTotals) -> f64 {
        match self {
            SummaryRow::ConsumerCost => s.consumer_cost,
            SummaryRow::ProsumerRevenue => s.prosumer_revenue,
            SummaryRow::NetCost => s.net_cost,
        }
    }
}

/// Percentage change of one scenario's summary rows against a reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioDelta {
    pub subject: ScenarioLabel,
    pub reference: ScenarioLabel,
    /// `(subject - reference) / reference * 100`, in [`SummaryRow::ALL`] order.
    pub pct: [f64; 3],
}

impl ScenarioDelta {
    pub fn get(&self, row: SummaryRow) -> f64 {
        self.pct[SummaryRow::ALL.iter().position(|r| *r == row).unwrap()]
    }
}

fn find(
    outcomes: &[ScenarioOutcome],
    label: ScenarioLabel,
) -> Result<&ScenarioOutcome, AnalysisError> {
    outcomes
        .iter()
        .find(|o| o.label == label)
        .ok_or(AnalysisError::MissingScenario(label))
}

/// Deltas of `subject` against each reference scenario.
pub fn compare_scenarios(
    outcomes: &[ScenarioOutcome],
    subject: ScenarioLabel,
    references: &[ScenarioLabel],
) -> Result<Vec<ScenarioDelta>, AnalysisError> {
    let subj = find(outcomes, subject)?;
    if outcomes.iter().any(|o| !o.prices.same_axis(&subj.prices)) {
        return Err(AnalysisError::HorizonMismatch);
    }
    references
        .iter()
        .map(|&reference| {
            let refo = find(outcomes, reference)?;
            let pct = SummaryRow::ALL.map(|row| pct_delta(row.of(&subj.summary), row.of(&refo.summary)));
            Ok(ScenarioDelta {
                subject,
                reference,
                pct,
            })
        })
        .collect()
}

/// The LCOE scenario of each mode against its FiT and base-auction
/// counterparts, for every mode whose three scenarios are all present.
pub fn standard_deltas(outcomes: &[ScenarioOutcome]) -> Vec<ScenarioDelta> {
    let mut out = Vec::new();
    for mode in [crate::market::ThresholdMode::Fixed, crate::market::ThresholdMode::Dynamic] {
        let subject = ScenarioLabel::new(ScenarioKind::Lcoe, mode);
        let refs = [
            ScenarioLabel::new(ScenarioKind::Fit, mode),
            ScenarioLabel::new(ScenarioKind::BaseAuction, mode),
        ];
        if let Ok(mut deltas) = compare_scenarios(outcomes, subject, &refs) {
            out.append(&mut deltas);
        }
    }
    out
}

/// Shares of total PV generation by destination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelfConsumptionShares {
    pub self_consumed: f64,
    pub local: f64,
    pub utility: f64,
    pub curtailed: f64,
}

pub fn self_consumption_report(
    ledger: &SettlementLedger,
) -> Result<SelfConsumptionShares, AnalysisError> {
    let totals = ledger.totals();
    let generation = compensated_sum(totals.iter().map(|t| t.generation));
    if generation <= 0.0 {
        return Err(AnalysisError::ZeroGeneration);
    }
    let share = |f: fn(&crate::settlement::ParticipantTotals) -> f64| {
        compensated_sum(totals.iter().map(f)) / generation
    };
    Ok(SelfConsumptionShares {
        self_consumed: share(|t| t.self_consumed),
        local: share(|t| t.sold_local),
        utility: share(|t| t.sold_utility),
        curtailed: share(|t| t.curtailed),
    })
}

/// Households whose annual results the sweep reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackedIds {
    /// Never receives PV.
    pub consumer: String,
    /// Always has PV.
    pub prosumer: String,
}

/// Annual result for the tracked households at one prosumer count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub scenario: ScenarioLabel,
    pub n_prosumers: usize,
    pub tracked_consumer_net_cost: f64,
    pub tracked_prosumer_revenue: f64,
}

/// Order in which households receive PV: the tracked prosumer first, then
/// all others by ascending id, never the tracked consumer.
pub fn sweep_assignment_order(
    n: &Neighborhood,
    tracked: &TrackedIds,
) -> Result<Vec<usize>, AnalysisError> {
    if tracked.consumer == tracked.prosumer {
        return Err(AnalysisError::RoleViolation(format!(
            "`{}` cannot be both tracked consumer and tracked prosumer",
            tracked.consumer
        )));
    }
    let missing = |id: &str| AnalysisError::RoleViolation(format!("unknown participant `{id}`"));
    let consumer = n.index_of(&tracked.consumer).ok_or_else(|| missing(&tracked.consumer))?;
    let prosumer = n.index_of(&tracked.prosumer).ok_or_else(|| missing(&tracked.prosumer))?;
    let mut rest: Vec<usize> = (0..n.len()).filter(|&i| i != consumer && i != prosumer).collect();
    rest.sort_by(|&a, &b| n.participants()[a].id().cmp(n.participants()[b].id()));
    let mut order = vec![prosumer];
    order.extend(rest);
    Ok(order)
}

/// Rebuilds `base` so that exactly the first `count` households of `order`
/// carry PV, taking capacity and generation from `pv_pool`.
pub fn with_prosumers(
    base: &Neighborhood,
    pv_pool: &[(f64, TimeSeries)],
    order: &[usize],
    count: usize,
) -> Result<Neighborhood, AnalysisError> {
    let chosen: Vec<usize> = order[..count].to_vec();
    let participants = base
        .participants()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if chosen.contains(&i) {
                let (capacity, generation) = &pv_pool[i];
                Participant::new(p.id(), p.load().clone(), *capacity, generation.clone())
            } else {
                Participant::consumer(p.id(), p.load().clone())
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Neighborhood::new(participants)?)
}

/// Re-runs every scenario for each prosumer count, reporting the tracked
/// consumer's annual net cost and the tracked prosumer's annual revenue.
///
/// `pv_pool[i]` is the capacity and generation household `i` gets when it is
/// a prosumer. Results are ordered by scenario, then count.
pub fn sensitivity_sweep(
    base: &Neighborhood,
    pv_pool: &[(f64, TimeSeries)],
    counts: &[usize],
    scenarios: &[Scenario],
    tracked: &TrackedIds,
) -> Result<Vec<SweepPoint>, AnalysisError> {
    if pv_pool.len() != base.len() {
        return Err(AnalysisError::RoleViolation(format!(
            "PV pool has {} entries for {} households",
            pv_pool.len(),
            base.len()
        )));
    }
    let order = sweep_assignment_order(base, tracked)?;
    let prosumer_idx = order[0];
    if pv_pool[prosumer_idx].0 <= 0.0 {
        return Err(AnalysisError::RoleViolation(format!(
            "tracked prosumer `{}` has no PV capacity to assign",
            tracked.prosumer
        )));
    }
    for &count in counts {
        if count < 1 || count >= base.len() {
            return Err(AnalysisError::RoleViolation(format!(
                "prosumer count {count} must lie in 1..={}",
                base.len() - 1
            )));
        }
        if order[..count].iter().any(|&i| pv_pool[i].0 <= 0.0) {
            return Err(AnalysisError::RoleViolation(format!(
                "prosumer count {count} assigns PV to a household without a PV profile"
            )));
        }
    }
    let neighborhoods = counts
        .par_iter()
        .map(|&count| with_prosumers(base, pv_pool, &order, count))
        .collect::<Result<Vec<_>, _>>()?;
    let consumer_idx = base.index_of(&tracked.consumer).expect("checked above");

    let jobs: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|s| (0..counts.len()).map(move |c| (s, c)))
        .collect();
    jobs.par_iter()
        .map(|&(s, c)| {
            let outcome = scenarios[s].run(&neighborhoods[c])?;
            let totals = outcome.ledger.totals();
            Ok(SweepPoint {
                scenario: scenarios[s].label,
                n_prosumers: counts[c],
                tracked_consumer_net_cost: totals[consumer_idx].net_cost,
                tracked_prosumer_revenue: totals[prosumer_idx].revenue,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// CSV renderers

pub fn duration_csv(curve: &[f64]) -> String {
    let mut out = String::from("rank,price\n");
    for (rank, p) in curve.iter().enumerate() {
        let _ = writeln!(out, "{},{}", rank + 1, p);
    }
    out
}

pub fn daily_avg_csv(stats: &DailyMonthlyStats) -> String {
    let mut out = String::from("date,avg_price\n");
    for d in &stats.daily {
        let _ = writeln!(out, "{},{}", d.date.format("%Y-%m-%d"), d.avg);
    }
    out
}

pub const SUMMARY_HEADER: &str = "scenario,consumer_cost,prosumer_revenue,net_cost,\
reference,delta_consumer_cost_pct,delta_prosumer_revenue_pct,delta_net_cost_pct";

/// One row per scenario with empty delta columns, then one row per delta.
pub fn summary_csv(outcomes: &[ScenarioOutcome], deltas: &[ScenarioDelta]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for o in outcomes {
        let s = &o.summary;
        let _ = writeln!(
            out,
            "{},{},{},{},,,,",
            o.label, s.consumer_cost, s.prosumer_revenue, s.net_cost
        );
    }
    for d in deltas {
        let s = &find(outcomes, d.subject).expect("delta subject present").summary;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            d.subject,
            s.consumer_cost,
            s.prosumer_revenue,
            s.net_cost,
            d.reference,
            d.pct[0],
            d.pct[1],
            d.pct[2]
        );
    }
    out
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("scenario,n_prosumers,tracked_consumer_cost,tracked_prosumer_revenue\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.scenario, p.n_prosumers, p.tracked_consumer_net_cost, p.tracked_prosumer_revenue
        );
    }
    out
}

pub fn self_consumption_csv(rows: &[(ScenarioLabel, SelfConsumptionShares)]) -> String {
    let mut out = String::from("scenario,self_consumed,local,utility,curtailed\n");
    for (label, s) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            label, s.self_consumed, s.local, s.utility, s.curtailed
        );
    }
    out
}
