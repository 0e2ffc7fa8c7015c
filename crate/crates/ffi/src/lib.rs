//! C ABI over the engine.
//!
//! Every fallible function returns an [`SfStatus`] and writes results through
//! out-pointers. On failure the message is kept per thread and can be read with
//! [`sf_last_error`]. Objects cross the boundary as opaque handles that the
//! caller releases with the matching `*_free` function.
//!
//! # Safety
//!
//! Pointer arguments must be null or valid for the access the function
//! documents: `len`-sized buffers readable or writable, handles obtained from
//! this library and not yet freed, strings NUL-terminated. Null is reported
//! as [`SfStatus::NullPointer`] wherever a value is required.
#![allow(clippy::missing_safety_doc, clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use subnet_factors::amm::PoolState;
use subnet_factors::econometrics::{grs_test, newey_west_se, ols, summary_stats, KurtosisConvention, RegressionResult};
use subnet_factors::factors::{build_all_factors, FactorOptions, FactorSeries, TercileConvention};
use subnet_factors::ingest::{parse_fx_csv, parse_snapshot_csv, snapshot_csv_bytes};
use subnet_factors::panel::{build_panel, Denomination, PanelOptions, ReturnPanel, SubnetHistory};
use subnet_factors::synth::{generate, SynthConfig};
use subnet_factors::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidPool = 3,
    Domain = 4,
    InsufficientData = 5,
    Singular = 6,
    NoEligibleObservations = 7,
    Parse = 8,
    Config = 9,
    Io = 10,
    Network = 11,
    Panic = 12,
}

/// Summary statistics of one return series.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SfSummary {
    pub mean: f64,
    pub std: f64,
    /// Annualized with 365 days.
    pub sharpe: f64,
    pub t_ols: f64,
    pub t_nw: f64,
    /// NaN when undefined.
    pub skewness: f64,
    /// Raw kurtosis (3 for a normal sample); NaN when undefined.
    pub kurtosis: f64,
    pub n: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SfGrs {
    pub f_stat: f64,
    pub p_value: f64,
    pub mean_abs_alpha: f64,
    pub t: usize,
    pub n: usize,
    pub n_effective: usize,
    pub k: usize,
}

/// Constant-product pool.
pub struct SfPool(PoolState);

/// Fitted least-squares regression.
pub struct SfOls(RegressionResult);

/// Return panel with the subnet history it was built from.
pub struct SfPanel {
    history: SubnetHistory,
    panel: ReturnPanel,
}

/// Factor return series on a panel's dates.
pub struct SfFactors {
    series: Vec<FactorSeries>,
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("NUL bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SfStatus {
    match e {
        Error::InvalidPool(_) => SfStatus::InvalidPool,
        Error::Domain(_) | Error::UndefinedAllocation(_) | Error::Fx(_) | Error::UnknownCharacteristic(_) => {
            SfStatus::Domain
        }
        Error::InsufficientData(_) => SfStatus::InsufficientData,
        Error::SingularDesign { .. } | Error::ZeroVariance(_) => SfStatus::Singular,
        Error::NoEligibleObservations(_) => SfStatus::NoEligibleObservations,
        Error::Schema { .. } | Error::DuplicateKey { .. } | Error::Csv(_) | Error::Json(_) => SfStatus::Parse,
        Error::Config(_) | Error::Auth(_) => SfStatus::Config,
        Error::Io { .. } | Error::MissingArtifact { .. } => SfStatus::Io,
        Error::Network { .. } => SfStatus::Network,
    }
}

struct Fail(SfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn fail<T>(status: SfStatus, msg: &str) -> Result<T, Fail> {
    Err(Fail(status, msg.to_string()))
}

/// Runs `f`, turning errors and panics into a status and the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SfStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SfStatus::Panic
        }
    }
}

fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    // SAFETY: the caller passes either null or a valid, writable pointer.
    unsafe { p.as_mut() }.ok_or_else(|| Fail(SfStatus::NullPointer, format!("{what} is null")))
}

fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    // SAFETY: non-null handles come from this library and are still live.
    unsafe { p.as_ref() }.ok_or_else(|| Fail(SfStatus::NullPointer, format!("{what} is null")))
}

fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(SfStatus::NullPointer, &format!("{what} is null"));
    }
    // SAFETY: the caller guarantees `len` readable elements at `p`.
    Ok(unsafe { slice::from_raw_parts(p, len) })
}

fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return fail(SfStatus::NullPointer, &format!("{what} is null"));
    }
    // SAFETY: the caller guarantees `len` writable elements at `p`.
    Ok(unsafe { slice::from_raw_parts_mut(p, len) })
}

fn boxed<T>(slot: *mut *mut T, value: T) -> Result<(), Fail> {
    *out(slot, "output handle")? = Box::into_raw(Box::new(value));
    Ok(())
}

/// Column-major `cols x rows` block as one vector per column.
fn columns(data: &[f64], cols: usize, rows: usize) -> Vec<Vec<f64>> {
    (0..cols).map(|c| data[c * rows..(c + 1) * rows].to_vec()).collect()
}

/// Copies `s` into `buf` (NUL-terminated, truncated to fit) and returns the
/// length `s` needs including the terminator.
fn copy_str(s: &CStr, buf: *mut c_char, len: usize) -> usize {
    let bytes = s.to_bytes_with_nul();
    if !buf.is_null() && len > 0 {
        let n = bytes.len().min(len);
        // SAFETY: the caller provides `len` writable bytes at `buf`.
        unsafe {
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n - 1) = 0;
        }
    }
    bytes.len()
}

// ---- errors and strings

/// Copies the calling thread's last error message into `buf` and returns the
/// buffer size the full message needs. Empty after a successful call.
#[no_mangle]
pub unsafe extern "C" fn sf_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| copy_str(&e.borrow(), buf, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn sf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---- pools

/// New pool from its base and alpha reserves.
#[no_mangle]
pub unsafe extern "C" fn sf_pool_new(tau_reserve: f64, alpha_reserve: f64, pool: *mut *mut SfPool) -> SfStatus {
    guard(|| boxed(pool, SfPool(PoolState::new(tau_reserve, alpha_reserve)?)))
}

#[no_mangle]
pub unsafe extern "C" fn sf_pool_free(pool: *mut SfPool) {
    if !pool.is_null() {
        drop(Box::from_raw(pool));
    }
}

#[no_mangle]
pub unsafe extern "C" fn sf_pool_reserves(
    pool: *const SfPool,
    tau: *mut f64,
    alpha: *mut f64,
    price: *mut f64,
) -> SfStatus {
    guard(|| {
        let p = &handle(pool, "pool")?.0;
        *out(tau, "tau")? = p.tau_reserve();
        *out(alpha, "alpha")? = p.alpha_reserve();
        *out(price, "price")? = p.spot_price();
        Ok(())
    })
}

/// Stakes `delta_tau` into the pool: a new pool handle, the alpha paid out,
/// and the exact price return.
#[no_mangle]
pub unsafe extern "C" fn sf_pool_stake(
    pool: *const SfPool,
    delta_tau: f64,
    after: *mut *mut SfPool,
    alpha_out: *mut f64,
    exact_return: *mut f64,
) -> SfStatus {
    guard(|| {
        let s = handle(pool, "pool")?.0.stake(delta_tau)?;
        *out(alpha_out, "alpha_out")? = s.alpha_out;
        *out(exact_return, "exact_return")? = s.exact_return;
        boxed(after, SfPool(s.pool))
    })
}

/// One-way execution cost of a trade of `delta_tau`, as a fraction.
#[no_mangle]
pub unsafe extern "C" fn sf_pool_slippage(pool: *const SfPool, delta_tau: f64, slippage: *mut f64) -> SfStatus {
    guard(|| {
        *out(slippage, "slippage")? = handle(pool, "pool")?.0.slippage_one_way(delta_tau)?;
        Ok(())
    })
}

// ---- statistics

/// Summary statistics of `n` returns with Newey-West `lags`.
#[no_mangle]
pub unsafe extern "C" fn sf_summary_stats(xs: *const f64, n: usize, lags: usize, summary: *mut SfSummary) -> SfStatus {
    guard(|| {
        let s = summary_stats(input(xs, n, "xs")?, lags, KurtosisConvention::Raw)?;
        *out(summary, "summary")? = SfSummary {
            mean: s.mean,
            std: s.std,
            sharpe: s.sharpe,
            t_ols: s.t_ols,
            t_nw: s.t_nw,
            skewness: s.skewness.unwrap_or(f64::NAN),
            kurtosis: s.kurtosis.unwrap_or(f64::NAN),
            n: s.n,
        };
        Ok(())
    })
}

/// Least squares of `y` (length `n`) on `k` regressors stored column-major in
/// `x` (length `n * k`), with an optional leading intercept.
#[no_mangle]
pub unsafe extern "C" fn sf_ols_fit(
    y: *const f64,
    n: usize,
    x: *const f64,
    k: usize,
    intercept: bool,
    fit: *mut *mut SfOls,
) -> SfStatus {
    guard(|| {
        let y = input(y, n, "y")?;
        let cols = columns(input(x, n * k, "x")?, k, n);
        let names: Vec<String> = (0..k).map(|j| format!("x{j}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        boxed(fit, SfOls(ols(y, &cols, &refs, intercept)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_ols_free(fit: *mut SfOls) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Number of coefficients, including the intercept when fitted.
#[no_mangle]
pub unsafe extern "C" fn sf_ols_len(fit: *const SfOls) -> usize {
    // SAFETY: non-null handles come from this library.
    unsafe { fit.as_ref() }.map_or(0, |f| f.0.coefficients.len())
}

/// Coefficients, OLS standard errors and R². `coef` and `se` hold
/// [`sf_ols_len`] values; `se` may be null.
#[no_mangle]
pub unsafe extern "C" fn sf_ols_coefficients(
    fit: *const SfOls,
    coef: *mut f64,
    se: *mut f64,
    r_squared: *mut f64,
) -> SfStatus {
    guard(|| {
        let f = &handle(fit, "fit")?.0;
        let m = f.coefficients.len();
        output(coef, m, "coef")?.copy_from_slice(&f.coefficients);
        if !se.is_null() {
            output(se, m, "se")?.copy_from_slice(&f.ols_se);
        }
        if !r_squared.is_null() {
            *out(r_squared, "r_squared")? = f.r_squared;
        }
        Ok(())
    })
}

/// Newey-West standard errors with Bartlett weights into `se` ([`sf_ols_len`] values).
#[no_mangle]
pub unsafe extern "C" fn sf_ols_newey_west(fit: *const SfOls, lags: usize, se: *mut f64) -> SfStatus {
    guard(|| {
        let f = &handle(fit, "fit")?.0;
        let v = newey_west_se(f, lags)?;
        output(se, v.len(), "se")?.copy_from_slice(&v);
        Ok(())
    })
}

/// GRS test of `n` portfolios on `k` factors over `t` aligned days; both
/// blocks are column-major.
#[no_mangle]
pub unsafe extern "C" fn sf_grs(
    portfolios: *const f64,
    n: usize,
    factors: *const f64,
    k: usize,
    t: usize,
    result: *mut SfGrs,
    alphas: *mut f64,
) -> SfStatus {
    guard(|| {
        let p = columns(input(portfolios, n * t, "portfolios")?, n, t);
        let f = columns(input(factors, k * t, "factors")?, k, t);
        let g = grs_test(&p, &f)?;
        if !alphas.is_null() {
            output(alphas, n, "alphas")?.copy_from_slice(&g.alphas);
        }
        *out(result, "result")? = SfGrs {
            f_stat: g.f_stat,
            p_value: g.p_value,
            mean_abs_alpha: g.mean_abs_alpha,
            t: g.t,
            n: g.n,
            n_effective: g.n_effective,
            k: g.k,
        };
        Ok(())
    })
}

// ---- panels and factors

/// Builds a return panel from snapshot CSV bytes and, optionally, an FX CSV
/// (`date,tao_usd`; pass null and 0 to omit).
#[no_mangle]
pub unsafe extern "C" fn sf_panel_from_csv(
    snapshot: *const u8,
    snapshot_len: usize,
    fx: *const u8,
    fx_len: usize,
    winsor_bound: f64,
    min_history: usize,
    panel: *mut *mut SfPanel,
) -> SfStatus {
    guard(|| {
        let rows = parse_snapshot_csv(input(snapshot, snapshot_len, "snapshot")?)?;
        let fx = if fx.is_null() {
            None
        } else {
            Some(parse_fx_csv(input(fx, fx_len, "fx")?)?)
        };
        if !(winsor_bound > 0.0) {
            return fail(SfStatus::InvalidArgument, "winsor_bound must be positive");
        }
        let history = SubnetHistory::from_rows(&rows)?;
        let p = build_panel(
            &history,
            fx.as_ref(),
            PanelOptions {
                winsor_bound,
                min_history,
            },
        );
        boxed(panel, SfPanel { history, panel: p })
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_panel_free(panel: *mut SfPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

#[no_mangle]
pub unsafe extern "C" fn sf_panel_shape(
    panel: *const SfPanel,
    n_dates: *mut usize,
    n_subnets: *mut usize,
    eligible_cells: *mut usize,
) -> SfStatus {
    guard(|| {
        let p = &handle(panel, "panel")?.panel;
        *out(n_dates, "n_dates")? = p.axis.n_dates();
        *out(n_subnets, "n_subnets")? = p.axis.n_subnets();
        *out(eligible_cells, "eligible_cells")? = p.eligible_counts().iter().sum();
        Ok(())
    })
}

/// The eight long-short factors. `usd` selects USD returns; `floor_cuts`
/// rounds tercile cuts down instead of up.
#[no_mangle]
pub unsafe extern "C" fn sf_factors_build(
    panel: *const SfPanel,
    usd: bool,
    floor_cuts: bool,
    factors: *mut *mut SfFactors,
) -> SfStatus {
    guard(|| {
        let p = handle(panel, "panel")?;
        let opts = FactorOptions {
            denomination: if usd { Denomination::Usd } else { Denomination::Tao },
            convention: if floor_cuts {
                TercileConvention::Floor
            } else {
                TercileConvention::Ceil
            },
        };
        let series = build_all_factors(&p.history, &p.panel, &opts)?;
        let names = series
            .iter()
            .map(|s| CString::new(s.name.clone()).expect("factor names have no NUL"))
            .collect();
        boxed(factors, SfFactors { series, names })
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_factors_free(factors: *mut SfFactors) {
    if !factors.is_null() {
        drop(Box::from_raw(factors));
    }
}

#[no_mangle]
pub unsafe extern "C" fn sf_factors_count(factors: *const SfFactors) -> usize {
    // SAFETY: non-null handles come from this library.
    unsafe { factors.as_ref() }.map_or(0, |f| f.series.len())
}

/// Days in every series.
#[no_mangle]
pub unsafe extern "C" fn sf_factors_days(factors: *const SfFactors) -> usize {
    // SAFETY: non-null handles come from this library.
    unsafe { factors.as_ref() }
        .and_then(|f| f.series.first())
        .map_or(0, |s| s.dates.len())
}

/// Copies factor `index`'s name into `buf` and returns the size it needs,
/// or 0 when the handle or index is invalid.
#[no_mangle]
pub unsafe extern "C" fn sf_factors_name(
    factors: *const SfFactors,
    index: usize,
    buf: *mut c_char,
    len: usize,
) -> usize {
    // SAFETY: non-null handles come from this library.
    match unsafe { factors.as_ref() }.and_then(|f| f.names.get(index)) {
        Some(name) => copy_str(name, buf, len),
        None => 0,
    }
}

/// Factor `index`'s daily returns into `returns` ([`sf_factors_days`]
/// values), NaN on days without a return.
#[no_mangle]
pub unsafe extern "C" fn sf_factors_returns(factors: *const SfFactors, index: usize, returns: *mut f64) -> SfStatus {
    guard(|| {
        let f = handle(factors, "factors")?;
        let Some(s) = f.series.get(index) else {
            return fail(SfStatus::InvalidArgument, &format!("factor index {index} out of range"));
        };
        let dst = output(returns, s.returns.len(), "returns")?;
        for (d, r) in dst.iter_mut().zip(&s.returns) {
            *d = r.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

// ---- synthetic markets

/// Simulates a market and returns its snapshot CSV, to be released with
/// [`sf_string_free`]. `config_toml` may be null for the defaults.
#[no_mangle]
pub unsafe extern "C" fn sf_synth_snapshot_csv(config_toml: *const c_char, csv: *mut *mut c_char) -> SfStatus {
    guard(|| {
        let cfg = if config_toml.is_null() {
            SynthConfig::default()
        } else {
            // SAFETY: non-null config is a NUL-terminated string.
            let text = unsafe { CStr::from_ptr(config_toml) }
                .to_str()
                .map_err(|_| Fail(SfStatus::InvalidArgument, "config is not UTF-8".into()))?;
            SynthConfig::from_toml(text)?
        };
        let bytes = snapshot_csv_bytes(&generate(&cfg)?.rows)?;
        let s = CString::new(bytes).map_err(|_| Fail(SfStatus::Parse, "snapshot contains NUL".into()))?;
        *out(csv, "csv")? = s.into_raw();
        Ok(())
    })
}
