//! C ABI over `lemsim-core`.
//!
//! Every fallible function returns a [`LemStatus`]; on failure a message is
//! kept per thread and can be read with [`lem_last_error`]. Results are
//! written through out-pointers. Neighborhoods and scenario outcomes are
//! opaque handles that must be released with their `_free` function.
//! Panics never cross the boundary; they surface as `LEM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use chrono::{DateTime, Utc};

use lemsim_core::config::ScenarioConfig;
use lemsim_core::lcoe::{capex, lcoe, FinancialParams, PvCostModel};
use lemsim_core::market::{price_dynamic, price_fixed, sdr, Regime, Sdr, Thresholds};
use lemsim_core::pipeline::{self, RunOptions};
use lemsim_core::scenario::{PriceParams, Scenario};
use lemsim_core::{Neighborhood, Participant, ScenarioLabel, ScenarioOutcome, TimeSeries};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    /// Configuration or parameter validation failed.
    Validation = 4,
    /// An input file could not be read or parsed.
    Input = 5,
    /// A runtime conservation check failed.
    Invariant = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Market regime of a cleared hour.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemRegime {
    Inactive = 0,
    Partial = 1,
    Saturated = 2,
    BelowLcoe = 3,
    Curtailed = 4,
}

impl From<Regime> for LemRegime {
    fn from(r: Regime) -> Self {
        match r {
            Regime::Inactive => LemRegime::Inactive,
            Regime::Partial => LemRegime::Partial,
            Regime::Saturated => LemRegime::Saturated,
            Regime::BelowLcoe => LemRegime::BelowLcoe,
            Regime::Curtailed => LemRegime::Curtailed,
        }
    }
}

/// Per-kWp investment cost components in EUR/kWp.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LemCostModel {
    pub equipment_per_kwp: f64,
    pub direct_labor_per_kwp: f64,
    pub indirect_labor_per_kwp: f64,
    pub permitting_per_kwp: f64,
    pub overhead_per_kwp: f64,
}

/// Scenario price constants in EUR/MWh.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LemPriceParams {
    pub p_fixed_upper: f64,
    pub fit: f64,
    pub lcoe: f64,
    pub p_lower_auction: f64,
    pub markup_frac: f64,
    pub markup_add: f64,
}

impl From<PriceParams> for LemPriceParams {
    fn from(p: PriceParams) -> Self {
        Self {
            p_fixed_upper: p.p_fixed_upper,
            fit: p.fit,
            lcoe: p.lcoe,
            p_lower_auction: p.p_lower_auction,
            markup_frac: p.markup_frac,
            markup_add: p.markup_add,
        }
    }
}

impl From<LemPriceParams> for PriceParams {
    fn from(p: LemPriceParams) -> Self {
        Self {
            p_fixed_upper: p.p_fixed_upper,
            fit: p.fit,
            lcoe: p.lcoe,
            p_lower_auction: p.p_lower_auction,
            markup_frac: p.markup_frac,
            markup_add: p.markup_add,
        }
    }
}

/// Annual totals over the whole neighborhood, EUR.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LemSummary {
    pub consumer_cost: f64,
    pub prosumer_revenue: f64,
    pub net_cost: f64,
}

/// Annual totals of one participant. Money in EUR, energy in kWh.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LemParticipantTotals {
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

/// Participants collected before a scenario run.
pub struct LemNeighborhood {
    start: DateTime<Utc>,
    horizon: usize,
    participants: Vec<Participant>,
}

/// Result of one scenario run.
pub struct LemOutcome {
    inner: ScenarioOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: LemStatus,
    message: String,
}

impl Failure {
    fn new(status: LemStatus, message: impl ToString) -> Self {
        Self {
            status,
            message: message.to_string(),
        }
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> LemStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LemStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(_) => {
            set_last_error("internal panic");
            LemStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure::new(LemStatus::NullPointer, format!("`{name}` is NULL"))
}

fn invalid(e: impl ToString) -> Failure {
    Failure::new(LemStatus::InvalidArgument, e)
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn in_slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn in_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(LemStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lem_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fills `out` with the default cost model.
///
/// # Safety
/// `out` must be NULL or point to writable memory for one `LemCostModel`.
#[no_mangle]
pub unsafe extern "C" fn lem_cost_model_default(out: *mut LemCostModel) -> LemStatus {
    guard(|| {
        let m = PvCostModel::default();
        *out_ref(out, "out")? = LemCostModel {
            equipment_per_kwp: m.equipment_per_kwp,
            direct_labor_per_kwp: m.direct_labor_per_kwp,
            indirect_labor_per_kwp: m.indirect_labor_per_kwp,
            permitting_per_kwp: m.permitting_per_kwp,
            overhead_per_kwp: m.overhead_per_kwp,
        };
        Ok(())
    })
}

/// Fills `out` with the default price constants.
///
/// # Safety
/// `out` must be NULL or point to writable memory for one `LemPriceParams`.
#[no_mangle]
pub unsafe extern "C" fn lem_price_params_default(out: *mut LemPriceParams) -> LemStatus {
    guard(|| {
        *out_ref(out, "out")? = PriceParams::default().into();
        Ok(())
    })
}

/// Investment cost in EUR of `pv_kwp` kWp. `model` may be NULL for the defaults.
///
/// # Safety
/// `model` must be NULL or valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lem_capex(
    model: *const LemCostModel,
    pv_kwp: f64,
    out: *mut f64,
) -> LemStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let m = match model.as_ref() {
            Some(m) => PvCostModel {
                equipment_per_kwp: m.equipment_per_kwp,
                direct_labor_per_kwp: m.direct_labor_per_kwp,
                indirect_labor_per_kwp: m.indirect_labor_per_kwp,
                permitting_per_kwp: m.permitting_per_kwp,
                overhead_per_kwp: m.overhead_per_kwp,
            },
            None => PvCostModel::default(),
        };
        m.validate().map_err(|e| Failure::new(LemStatus::Validation, e))?;
        if !(pv_kwp.is_finite() && pv_kwp >= 0.0) {
            return Err(invalid(format!("pv_kwp {pv_kwp} must be >= 0")));
        }
        *out = capex(&m, pv_kwp);
        Ok(())
    })
}

/// Levelized cost in EUR/MWh. `opex` (EUR) and `energy_kwh` hold one entry
/// per year, year 1 first.
///
/// # Safety
/// `opex` and `energy_kwh` must point to `years` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lem_lcoe(
    i0: f64,
    years: usize,
    wacc: f64,
    opex: *const f64,
    energy_kwh: *const f64,
    out: *mut f64,
) -> LemStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let opex = in_slice(opex, years, "opex")?;
        let energy = in_slice(energy_kwh, years, "energy_kwh")?;
        let fin = FinancialParams::new(years, wacc, opex.to_vec(), energy.to_vec())
            .map_err(|e| Failure::new(LemStatus::Validation, e))?;
        *out = lcoe(i0, &fin).map_err(|e| Failure::new(LemStatus::Validation, e))?;
        Ok(())
    })
}

/// Supply-demand ratio of `n` surpluses and demands in kWh. Zero demand with
/// positive surplus yields `+INFINITY`.
///
/// # Safety
/// `surpluses` and `demands` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lem_sdr(
    surpluses: *const f64,
    demands: *const f64,
    n: usize,
    out: *mut f64,
) -> LemStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let s = in_slice(surpluses, n, "surpluses")?;
        let d = in_slice(demands, n, "demands")?;
        let r = sdr(s, d).map_err(invalid)?;
        *out = r.ratio().unwrap_or(f64::INFINITY);
        Ok(())
    })
}

fn to_sdr(r: f64) -> Result<Sdr, Failure> {
    if r == f64::INFINITY {
        Ok(Sdr::SaturatedInfinite)
    } else if r.is_finite() && r >= 0.0 {
        Ok(Sdr::Ratio(r))
    } else {
        Err(invalid(format!("sdr {r} must be >= 0")))
    }
}

/// Local price under a fixed utility price. `r` may be `+INFINITY`.
///
/// # Safety
/// `out_price` and `out_regime` must be writable; `out_regime` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn lem_price_fixed(
    r: f64,
    p_upper: f64,
    lower_ref: f64,
    p_lower: f64,
    out_price: *mut f64,
    out_regime: *mut LemRegime,
) -> LemStatus {
    guard(|| {
        let out = out_ref(out_price, "out_price")?;
        let th = Thresholds::fixed(p_upper, lower_ref, p_lower)
            .map_err(|e| Failure::new(LemStatus::Validation, e))?;
        let (price, regime) = price_fixed(to_sdr(r)?, &th).map_err(invalid)?;
        *out = price;
        if let Some(slot) = out_regime.as_mut() {
            *slot = regime.into();
        }
        Ok(())
    })
}

/// Local price for an hour whose spot-indexed utility price is `p_ut`.
///
/// # Safety
/// `out_price` must be writable; `out_regime` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn lem_price_dynamic(
    r: f64,
    p_ut: f64,
    lower_ref: f64,
    p_lower: f64,
    out_price: *mut f64,
    out_regime: *mut LemRegime,
) -> LemStatus {
    guard(|| {
        let out = out_ref(out_price, "out_price")?;
        let spot = TimeSeries::new(lemsim_core::profiles::default_start(), vec![p_ut]).map_err(invalid)?;
        let th = Thresholds::dynamic(spot, 0.0, 0.0, lower_ref, p_lower).map_err(invalid)?;
        let (price, regime) = price_dynamic(to_sdr(r)?, p_ut, &th).map_err(invalid)?;
        *out = price;
        if let Some(slot) = out_regime.as_mut() {
            *slot = regime.into();
        }
        Ok(())
    })
}

/// Creates an empty neighborhood of `horizon` hourly steps starting at
/// `start_unix` (seconds, hour-aligned). Release with [`lem_neighborhood_free`].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lem_neighborhood_new(
    start_unix: i64,
    horizon: usize,
    out: *mut *mut LemNeighborhood,
) -> LemStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let start = DateTime::<Utc>::from_timestamp(start_unix, 0)
            .filter(|_| start_unix % 3600 == 0)
            .ok_or_else(|| invalid(format!("start {start_unix} is not an hour-aligned timestamp")))?;
        if horizon == 0 {
            return Err(invalid("horizon must be >= 1"));
        }
        *out = Box::into_raw(Box::new(LemNeighborhood {
            start,
            horizon,
            participants: Vec::new(),
        }));
        Ok(())
    })
}

/// Adds a participant with `horizon` hourly load values in kWh.
/// `generation` may be NULL for a pure consumer, in which case `pv_kwp`
/// must be 0.
///
/// # Safety
/// `n` must come from [`lem_neighborhood_new`]; `id` must be a NUL-terminated
/// string; `load` and non-NULL `generation` must hold `horizon` doubles.
#[no_mangle]
pub unsafe extern "C" fn lem_neighborhood_add(
    n: *mut LemNeighborhood,
    id: *const c_char,
    load: *const f64,
    generation: *const f64,
    pv_kwp: f64,
) -> LemStatus {
    guard(|| {
        let n = out_ref(n, "n")?;
        let id = in_str(id, "id")?;
        let load = TimeSeries::energy(n.start, in_slice(load, n.horizon, "load")?.to_vec())
            .map_err(invalid)?;
        let participant = if generation.is_null() {
            Participant::new(id, load, pv_kwp, TimeSeries::zeros(n.start, n.horizon).map_err(invalid)?)
        } else {
            let generation = in_slice(generation, n.horizon, "generation")?.to_vec();
            Participant::new(id, load, pv_kwp, TimeSeries::energy(n.start, generation).map_err(invalid)?)
        }
        .map_err(invalid)?;
        if n.participants.iter().any(|p| p.id() == participant.id()) {
            return Err(invalid(format!("duplicate participant id `{id}`")));
        }
        n.participants.push(participant);
        Ok(())
    })
}

/// Number of participants added so far.
///
/// # Safety
/// `n` must be NULL or come from [`lem_neighborhood_new`].
#[no_mangle]
pub unsafe extern "C" fn lem_neighborhood_len(n: *const LemNeighborhood) -> usize {
    n.as_ref().map_or(0, |n| n.participants.len())
}

/// Releases a neighborhood. NULL is ignored.
///
/// # Safety
/// `n` must be NULL or come from [`lem_neighborhood_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lem_neighborhood_free(n: *mut LemNeighborhood) {
    if !n.is_null() {
        drop(Box::from_raw(n));
    }
}

/// Runs one scenario, e.g. `"LCOE-Fixed"`. `prices` may be NULL for the
/// defaults; `spot` (EUR/MWh, `horizon` values) is required for dynamic
/// scenarios and ignored otherwise. Release the result with [`lem_outcome_free`].
///
/// # Safety
/// Pointers must be valid as described; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lem_scenario_run(
    n: *const LemNeighborhood,
    label: *const c_char,
    prices: *const LemPriceParams,
    spot: *const f64,
    out: *mut *mut LemOutcome,
) -> LemStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let n = n.as_ref().ok_or_else(|| null("n"))?;
        let label: ScenarioLabel = in_str(label, "label")?.parse().map_err(invalid)?;
        let prices: PriceParams = prices.as_ref().map_or_else(PriceParams::default, |p| (*p).into());
        let spot = if spot.is_null() {
            None
        } else {
            Some(TimeSeries::new(n.start, in_slice(spot, n.horizon, "spot")?.to_vec()).map_err(invalid)?)
        };
        let neighborhood = Neighborhood::new(n.participants.clone()).map_err(invalid)?;
        let scenario = Scenario::build(label, &prices, spot.as_ref())
            .map_err(|e| Failure::new(LemStatus::Validation, e))?;
        let outcome = scenario.run(&neighborhood).map_err(invalid)?;
        outcome
            .ledger
            .check_conservation(lemsim_core::settlement::CONSERVATION_TOL)
            .map_err(|e| Failure::new(LemStatus::Invariant, e))?;
        *out = Box::into_raw(Box::new(LemOutcome { inner: outcome }));
        Ok(())
    })
}

/// Neighborhood totals of an outcome.
///
/// # Safety
/// `o` must come from [`lem_scenario_run`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lem_outcome_summary(o: *const LemOutcome, out: *mut LemSummary) -> LemStatus {
    guard(|| {
        let o = o.as_ref().ok_or_else(|| null("o"))?;
        let s = o.inner.summary;
        *out_ref(out, "out")? = LemSummary {
            consumer_cost: s.consumer_cost,
            prosumer_revenue: s.prosumer_revenue,
            net_cost: s.net_cost,
        };
        Ok(())
    })
}

/// Annual totals of participant `index` (insertion order).
///
/// # Safety
/// `o` must come from [`lem_scenario_run`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lem_outcome_participant_totals(
    o: *const LemOutcome,
    index: usize,
    out: *mut LemParticipantTotals,
) -> LemStatus {
    guard(|| {
        let o = o.as_ref().ok_or_else(|| null("o"))?;
        let t = o
            .inner
            .ledger
            .totals()
            .get(index)
            .ok_or_else(|| invalid(format!("participant index {index} out of range")))?;
        *out_ref(out, "out")? = LemParticipantTotals {
            cost: t.cost,
            revenue: t.revenue,
            net_cost: t.net_cost,
            bought_local: t.bought_local,
            bought_utility: t.bought_utility,
            sold_local: t.sold_local,
            sold_utility: t.sold_utility,
            curtailed: t.curtailed,
            self_consumed: t.self_consumed,
            generation: t.generation,
        };
        Ok(())
    })
}

/// Number of hourly prices in an outcome; 0 for NULL.
///
/// # Safety
/// `o` must be NULL or come from [`lem_scenario_run`].
#[no_mangle]
pub unsafe extern "C" fn lem_outcome_len(o: *const LemOutcome) -> usize {
    o.as_ref().map_or(0, |o| o.inner.prices.len())
}

/// Copies the hourly local prices into `buf`. Fails with
/// `LEM_STATUS_BUFFER_TOO_SMALL` when `len` is below [`lem_outcome_len`].
///
/// # Safety
/// `o` must come from [`lem_scenario_run`]; `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lem_outcome_prices(o: *const LemOutcome, buf: *mut f64, len: usize) -> LemStatus {
    guard(|| {
        let o = o.as_ref().ok_or_else(|| null("o"))?;
        let prices = o.inner.prices.values();
        if len < prices.len() {
            return Err(Failure::new(
                LemStatus::BufferTooSmall,
                format!("buffer holds {len} values, {} needed", prices.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        slice::from_raw_parts_mut(buf, prices.len()).copy_from_slice(prices);
        Ok(())
    })
}

/// Hourly regimes of a LEM scenario; fails for base scenarios, which have none.
///
/// # Safety
/// `o` must come from [`lem_scenario_run`]; `buf` must hold `len` writable entries.
#[no_mangle]
pub unsafe extern "C" fn lem_outcome_regimes(o: *const LemOutcome, buf: *mut LemRegime, len: usize) -> LemStatus {
    guard(|| {
        let o = o.as_ref().ok_or_else(|| null("o"))?;
        let regimes = o
            .inner
            .regimes
            .as_ref()
            .ok_or_else(|| invalid("base scenarios have no market regimes"))?;
        if len < regimes.len() {
            return Err(Failure::new(
                LemStatus::BufferTooSmall,
                format!("buffer holds {len} values, {} needed", regimes.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        let out = slice::from_raw_parts_mut(buf, regimes.len());
        for (slot, r) in out.iter_mut().zip(regimes) {
            *slot = (*r).into();
        }
        Ok(())
    })
}

/// Releases an outcome. NULL is ignored.
///
/// # Safety
/// `o` must be NULL or come from [`lem_scenario_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lem_outcome_free(o: *mut LemOutcome) {
    if !o.is_null() {
        drop(Box::from_raw(o));
    }
}

/// Runs the full pipeline for a config file, like `lemsim run`. `out_dir`
/// may be NULL to use the configured output directory.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out_dir` NULL or one.
#[no_mangle]
pub unsafe extern "C" fn lem_run_config_file(config_path: *const c_char, out_dir: *const c_char) -> LemStatus {
    guard(|| {
        let path = PathBuf::from(in_str(config_path, "config_path")?);
        let opts = RunOptions {
            out_dir: if out_dir.is_null() {
                None
            } else {
                Some(PathBuf::from(in_str(out_dir, "out_dir")?))
            },
            ..RunOptions::default()
        };
        let to_failure = |e: pipeline::PipelineError| {
            let status = match e.exit_code() {
                1 => LemStatus::Validation,
                3 => LemStatus::Invariant,
                _ => LemStatus::Input,
            };
            Failure::new(status, e)
        };
        let config: ScenarioConfig = pipeline::load_config(&path, &opts).map_err(to_failure)?;
        pipeline::run(&config, false).map_err(to_failure)?;
        Ok(())
    })
}
