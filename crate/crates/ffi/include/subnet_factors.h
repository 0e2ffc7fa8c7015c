#ifndef SUBNET_FACTORS_H
#define SUBNET_FACTORS_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_NULL_POINTER = 1,
  SF_STATUS_INVALID_ARGUMENT = 2,
  SF_STATUS_INVALID_POOL = 3,
  SF_STATUS_DOMAIN = 4,
  SF_STATUS_INSUFFICIENT_DATA = 5,
  SF_STATUS_SINGULAR = 6,
  SF_STATUS_NO_ELIGIBLE_OBSERVATIONS = 7,
  SF_STATUS_PARSE = 8,
  SF_STATUS_CONFIG = 9,
  SF_STATUS_IO = 10,
  SF_STATUS_NETWORK = 11,
  SF_STATUS_PANIC = 12,
} SfStatus;

// Factor return series on a panel's dates.
typedef struct SfFactors SfFactors;

// Fitted least-squares regression.
typedef struct SfOls SfOls;

// Return panel with the subnet history it was built from.
typedef struct SfPanel SfPanel;

// Constant-product pool.
typedef struct SfPool SfPool;

// Summary statistics of one return series.
typedef struct SfSummary {
  double mean;
  double std;
  // Annualized with 365 days.
  double sharpe;
  double t_ols;
  double t_nw;
  // NaN when undefined.
  double skewness;
  // Raw kurtosis (3 for a normal sample); NaN when undefined.
  double kurtosis;
  size_t n;
} SfSummary;

typedef struct SfGrs {
  double f_stat;
  double p_value;
  double mean_abs_alpha;
  size_t t;
  size_t n;
  size_t n_effective;
  size_t k;
} SfGrs;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` and returns the
// buffer size the full message needs. Empty after a successful call.
size_t sf_last_error(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *sf_version(void);

// Releases a string returned by this library.
void sf_string_free(char *s);

// New pool from its base and alpha reserves.
enum SfStatus sf_pool_new(double tau_reserve, double alpha_reserve, struct SfPool **pool);

void sf_pool_free(struct SfPool *pool);

enum SfStatus sf_pool_reserves(const struct SfPool *pool,
                               double *tau,
                               double *alpha,
                               double *price);

// Stakes `delta_tau` into the pool: a new pool handle, the alpha paid out,
// and the exact price return.
enum SfStatus sf_pool_stake(const struct SfPool *pool,
                            double delta_tau,
                            struct SfPool **after,
                            double *alpha_out,
                            double *exact_return);

// One-way execution cost of a trade of `delta_tau`, as a fraction.
enum SfStatus sf_pool_slippage(const struct SfPool *pool, double delta_tau, double *slippage);

// Summary statistics of `n` returns with Newey-West `lags`.
enum SfStatus sf_summary_stats(const double *xs, size_t n, size_t lags, struct SfSummary *summary);

// Least squares of `y` (length `n`) on `k` regressors stored column-major in
// `x` (length `n * k`), with an optional leading intercept.
enum SfStatus sf_ols_fit(const double *y,
                         size_t n,
                         const double *x,
                         size_t k,
                         bool intercept,
                         struct SfOls **fit);

void sf_ols_free(struct SfOls *fit);

// Number of coefficients, including the intercept when fitted.
size_t sf_ols_len(const struct SfOls *fit);

// Coefficients, OLS standard errors and R². `coef` and `se` hold
// [`sf_ols_len`] values; `se` may be null.
enum SfStatus sf_ols_coefficients(const struct SfOls *fit,
                                  double *coef,
                                  double *se,
                                  double *r_squared);

// Newey-West standard errors with Bartlett weights into `se` ([`sf_ols_len`] values).
enum SfStatus sf_ols_newey_west(const struct SfOls *fit, size_t lags, double *se);

// GRS test of `n` portfolios on `k` factors over `t` aligned days; both
// blocks are column-major.
enum SfStatus sf_grs(const double *portfolios,
                     size_t n,
                     const double *factors,
                     size_t k,
                     size_t t,
                     struct SfGrs *result,
                     double *alphas);

// Builds a return panel from snapshot CSV bytes and, optionally, an FX CSV
// (`date,tao_usd`; pass null and 0 to omit).
enum SfStatus sf_panel_from_csv(const uint8_t *snapshot,
                                size_t snapshot_len,
                                const uint8_t *fx,
                                size_t fx_len,
                                double winsor_bound,
                                size_t min_history,
                                struct SfPanel **panel);

void sf_panel_free(struct SfPanel *panel);

enum SfStatus sf_panel_shape(const struct SfPanel *panel,
                             size_t *n_dates,
                             size_t *n_subnets,
                             size_t *eligible_cells);

// The eight long-short factors. `usd` selects USD returns; `floor_cuts`
// rounds tercile cuts down instead of up.
enum SfStatus sf_factors_build(const struct SfPanel *panel,
                               bool usd,
                               bool floor_cuts,
                               struct SfFactors **factors);

void sf_factors_free(struct SfFactors *factors);

size_t sf_factors_count(const struct SfFactors *factors);

// Days in every series.
size_t sf_factors_days(const struct SfFactors *factors);

// Copies factor `index`'s name into `buf` and returns the size it needs,
// or 0 when the handle or index is invalid.
size_t sf_factors_name(const struct SfFactors *factors, size_t index, char *buf, size_t len);

// Factor `index`'s daily returns into `returns` ([`sf_factors_days`]
// values), NaN on days without a return.
enum SfStatus sf_factors_returns(const struct SfFactors *factors, size_t index, double *returns);

// Simulates a market and returns its snapshot CSV, to be released with
// [`sf_string_free`]. `config_toml` may be null for the defaults.
enum SfStatus sf_synth_snapshot_csv(const char *config_toml, char **csv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBNET_FACTORS_H */
