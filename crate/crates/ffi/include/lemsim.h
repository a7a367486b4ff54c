#ifndef LEMSIM_H
#define LEMSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Market regime of a cleared hour.
 */
typedef enum LemRegime {
  LEM_REGIME_INACTIVE = 0,
  LEM_REGIME_PARTIAL = 1,
  LEM_REGIME_SATURATED = 2,
  LEM_REGIME_BELOW_LCOE = 3,
  LEM_REGIME_CURTAILED = 4,
} LemRegime;

/**
 * Result code of every fallible call.
 */
typedef enum LemStatus {
  LEM_STATUS_OK = 0,
  LEM_STATUS_NULL_POINTER = 1,
  LEM_STATUS_INVALID_ARGUMENT = 2,
  LEM_STATUS_INVALID_UTF8 = 3,
  /**
   * Configuration or parameter validation failed.
   */
  LEM_STATUS_VALIDATION = 4,
  /**
   * An input file could not be read or parsed.
   */
  LEM_STATUS_INPUT = 5,
  /**
   * A runtime conservation check failed.
   */
  LEM_STATUS_INVARIANT = 6,
  LEM_STATUS_BUFFER_TOO_SMALL = 7,
  LEM_STATUS_PANIC = 8,
} LemStatus;

/**
 * Participants collected before a scenario run.
 */
typedef struct LemNeighborhood LemNeighborhood;

/**
 * Result of one scenario run.
 */
typedef struct LemOutcome LemOutcome;

/**
 * Per-kWp investment cost components in EUR/kWp.
 */
typedef struct LemCostModel {
  double equipment_per_kwp;
  double direct_labor_per_kwp;
  double indirect_labor_per_kwp;
  double permitting_per_kwp;
  double overhead_per_kwp;
} LemCostModel;

/**
 * Scenario price constants in EUR/MWh.
 */
typedef struct LemPriceParams {
  double p_fixed_upper;
  double fit;
  double lcoe;
  double p_lower_auction;
  double markup_frac;
  double markup_add;
} LemPriceParams;

/**
 * Annual totals over the whole neighborhood, EUR.
 */
typedef struct LemSummary {
  double consumer_cost;
  double prosumer_revenue;
  double net_cost;
} LemSummary;

/**
 * Annual totals of one participant. Money in EUR, energy in kWh.
 */
typedef struct LemParticipantTotals {
  double cost;
  double revenue;
  double net_cost;
  double bought_local;
  double bought_utility;
  double sold_local;
  double sold_utility;
  double curtailed;
  double self_consumed;
  double generation;
} LemParticipantTotals;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *lem_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lem_version(void);

/**
 * Fills `out` with the default cost model.
 *
 * # Safety
 * `out` must be NULL or point to writable memory for one `LemCostModel`.
 */
enum LemStatus lem_cost_model_default(struct LemCostModel *out);

/**
 * Fills `out` with the default price constants.
 *
 * # Safety
 * `out` must be NULL or point to writable memory for one `LemPriceParams`.
 */
enum LemStatus lem_price_params_default(struct LemPriceParams *out);

/**
 * Investment cost in EUR of `pv_kwp` kWp. `model` may be NULL for the defaults.
 *
 * # Safety
 * `model` must be NULL or valid; `out` must be writable.
 */
enum LemStatus lem_capex(const struct LemCostModel *model, double pv_kwp, double *out);

/**
 * Levelized cost in EUR/MWh. `opex` (EUR) and `energy_kwh` hold one entry
 * per year, year 1 first.
 *
 * # Safety
 * `opex` and `energy_kwh` must point to `years` readable doubles; `out` must be writable.
 */
enum LemStatus lem_lcoe(double i0,
                        size_t years,
                        double wacc,
                        const double *opex,
                        const double *energy_kwh,
                        double *out);

/**
 * Supply-demand ratio of `n` surpluses and demands in kWh. Zero demand with
 * positive surplus yields `+INFINITY`.
 *
 * # Safety
 * `surpluses` and `demands` must point to `n` readable doubles; `out` must be writable.
 */
enum LemStatus lem_sdr(const double *surpluses, const double *demands, size_t n, double *out);

/**
 * Local price under a fixed utility price. `r` may be `+INFINITY`.
 *
 * # Safety
 * `out_price` and `out_regime` must be writable; `out_regime` may be NULL.
 */
enum LemStatus lem_price_fixed(double r,
                               double p_upper,
                               double lower_ref,
                               double p_lower,
                               double *out_price,
                               enum LemRegime *out_regime);

/**
 * Local price for an hour whose spot-indexed utility price is `p_ut`.
 *
 * # Safety
 * `out_price` must be writable; `out_regime` may be NULL.
 */
enum LemStatus lem_price_dynamic(double r,
                                 double p_ut,
                                 double lower_ref,
                                 double p_lower,
                                 double *out_price,
                                 enum LemRegime *out_regime);

/**
 * Creates an empty neighborhood of `horizon` hourly steps starting at
 * `start_unix` (seconds, hour-aligned). Release with [`lem_neighborhood_free`].
 *
 * # Safety
 * `out` must be writable.
 */
enum LemStatus lem_neighborhood_new(int64_t start_unix,
                                    size_t horizon,
                                    struct LemNeighborhood **out);

/**
 * Adds a participant with `horizon` hourly load values in kWh.
 * `generation` may be NULL for a pure consumer, in which case `pv_kwp`
 * must be 0.
 *
 * # Safety
 * `n` must come from [`lem_neighborhood_new`]; `id` must be a NUL-terminated
 * string; `load` and non-NULL `generation` must hold `horizon` doubles.
 */
enum LemStatus lem_neighborhood_add(struct LemNeighborhood *n,
                                    const char *id,
                                    const double *load,
                                    const double *generation,
                                    double pv_kwp);

/**
 * Number of participants added so far.
 *
 * # Safety
 * `n` must be NULL or come from [`lem_neighborhood_new`].
 */
size_t lem_neighborhood_len(const struct LemNeighborhood *n);

/**
 * Releases a neighborhood. NULL is ignored.
 *
 * # Safety
 * `n` must be NULL or come from [`lem_neighborhood_new`] and not be used afterwards.
 */
void lem_neighborhood_free(struct LemNeighborhood *n);

/**
 * Runs one scenario, e.g. `"LCOE-Fixed"`. `prices` may be NULL for the
 * defaults; `spot` (EUR/MWh, `horizon` values) is required for dynamic
 * scenarios and ignored otherwise. Release the result with [`lem_outcome_free`].
 *
 * # Safety
 * Pointers must be valid as described; `out` must be writable.
 */
enum LemStatus lem_scenario_run(const struct LemNeighborhood *n,
                                const char *label,
                                const struct LemPriceParams *prices,
                                const double *spot,
                                struct LemOutcome **out);

/**
 * Neighborhood totals of an outcome.
 *
 * # Safety
 * `o` must come from [`lem_scenario_run`]; `out` must be writable.
 */
enum LemStatus lem_outcome_summary(const struct LemOutcome *o, struct LemSummary *out);

/**
 * Annual totals of participant `index` (insertion order).
 *
 * # Safety
 * `o` must come from [`lem_scenario_run`]; `out` must be writable.
 */
enum LemStatus lem_outcome_participant_totals(const struct LemOutcome *o,
                                              size_t index,
                                              struct LemParticipantTotals *out);

/**
 * Number of hourly prices in an outcome; 0 for NULL.
 *
 * # Safety
 * `o` must be NULL or come from [`lem_scenario_run`].
 */
size_t lem_outcome_len(const struct LemOutcome *o);

/**
 * Copies the hourly local prices into `buf`. Fails with
 * `LEM_STATUS_BUFFER_TOO_SMALL` when `len` is below [`lem_outcome_len`].
 *
 * # Safety
 * `o` must come from [`lem_scenario_run`]; `buf` must hold `len` writable doubles.
 */
enum LemStatus lem_outcome_prices(const struct LemOutcome *o, double *buf, size_t len);

/**
 * Hourly regimes of a LEM scenario; fails for base scenarios, which have none.
 *
 * # Safety
 * `o` must come from [`lem_scenario_run`]; `buf` must hold `len` writable entries.
 */
enum LemStatus lem_outcome_regimes(const struct LemOutcome *o, enum LemRegime *buf, size_t len);

/**
 * Releases an outcome. NULL is ignored.
 *
 * # Safety
 * `o` must be NULL or come from [`lem_scenario_run`] and not be used afterwards.
 */
void lem_outcome_free(struct LemOutcome *o);

/**
 * Runs the full pipeline for a config file, like `lemsim run`. `out_dir`
 * may be NULL to use the configured output directory.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; `out_dir` NULL or one.
 */
enum LemStatus lem_run_config_file(const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEMSIM_H */
