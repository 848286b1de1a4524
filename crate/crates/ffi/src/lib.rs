//! C ABI over `psitest-core`.
//!
//! Every function returns a [`PsitestStatus`] and writes results through out
//! pointers. Simulation results live behind opaque handles that the caller
//! releases with the matching `*_free` function. On failure, a description is
//! available from [`psitest_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use psitest_core::analysis::{epsilon_expt, expected_epsilon, NoiseModelParams};
use psitest_core::apparatus::{run_experiment, single_photon_fraction, ApparatusConfig, ClickCounts};
use psitest_core::cli::verify_nogo;
use psitest_core::config::VerifyOptions;
use psitest_core::phase_model::{analytic_expected_delta, delta0_distribution, Delta0Distribution, PhaseWalkModel};
use psitest_core::state_space::delta0_closed_form;
use psitest_core::{Error, SeededRandomSource};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsitestStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    DimMismatch = 3,
    NoClicks = 4,
    ZeroClickProbability = 5,
    Parse = 6,
    Config = 7,
    Io = 8,
    /// A Rust panic was caught at the boundary.
    Internal = 9,
}

impl From<&Error> for PsitestStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => Self::Domain,
            Error::DimMismatch { .. } => Self::DimMismatch,
            Error::NoClicks { .. } => Self::NoClicks,
            Error::ZeroClickProbability { .. } => Self::ZeroClickProbability,
            Error::Parse { .. } => Self::Parse,
            Error::Config(_) => Self::Config,
            Error::Io { .. } => Self::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), PsitestStatus>) -> PsitestStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PsitestStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_last_error("internal panic".into());
            PsitestStatus::Internal
        }
    }
}

fn fail(e: Error) -> PsitestStatus {
    let s = PsitestStatus::from(&e);
    set_last_error(e.to_string());
    s
}

fn null() -> PsitestStatus {
    set_last_error("null pointer argument".into());
    PsitestStatus::NullPointer
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), PsitestStatus> {
    if out.is_null() {
        return Err(null());
    }
    out.write(value);
    Ok(())
}

unsafe fn borrow<'a, T>(p: *const T) -> Result<&'a T, PsitestStatus> {
    p.as_ref().ok_or_else(null)
}

/// Static description of a status code. Never null.
#[no_mangle]
pub extern "C" fn psitest_status_message(status: PsitestStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        PsitestStatus::Ok => b"ok\0",
        PsitestStatus::NullPointer => b"null pointer argument\0",
        PsitestStatus::Domain => b"argument outside the domain of the operation\0",
        PsitestStatus::DimMismatch => b"dimension mismatch\0",
        PsitestStatus::NoClicks => b"a prepared state recorded no clicks\0",
        PsitestStatus::ZeroClickProbability => b"a preparation never clicks\0",
        PsitestStatus::Parse => b"parse error\0",
        PsitestStatus::Config => b"invalid configuration\0",
        PsitestStatus::Io => b"i/o error\0",
        PsitestStatus::Internal => b"internal error\0",
    };
    s.as_ptr().cast()
}

/// Message for the last failure on this thread, or null if the last call
/// succeeded. Valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn psitest_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Vacuum-projected distance between a missing-bin train and the reference.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn psitest_delta0_closed_form(d: usize, mean_photons: f64, out: *mut f64) -> PsitestStatus {
    guard(|| write(out, delta0_closed_form(d, mean_photons).map_err(fail)?))
}

/// Leading-order mean distance under phase noise; `out_within_validity`
/// reports whether `d * step_variance < 1`.
///
/// # Safety
/// Out pointers must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn psitest_analytic_expected_delta(
    d: usize,
    mean_photons: f64,
    step_variance: f64,
    out_value: *mut f64,
    out_within_validity: *mut bool,
) -> PsitestStatus {
    guard(|| {
        let e = analytic_expected_delta(d, mean_photons, step_variance).map_err(fail)?;
        write(out_value, e.value)?;
        write(out_within_validity, e.within_validity)
    })
}

/// Fraction of clicking trains that carried exactly one photon.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn psitest_single_photon_fraction(mean_photons: f64, out: *mut f64) -> PsitestStatus {
    guard(|| write(out, single_photon_fraction(mean_photons).map_err(fail)?))
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsitestNoiseParams {
    /// Hz.
    pub dark_rate: f64,
    pub dark_rate_err: f64,
    /// Seconds.
    pub keep_window: f64,
    /// Click probability per train, `eta <n>`.
    pub detection_probability: f64,
    pub detection_probability_rel_err: f64,
    pub extinction_db: f64,
    pub extinction_db_err: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsitestBand {
    pub central: f64,
    pub low: f64,
    pub high: f64,
}

/// Nominal noise parameters.
#[no_mangle]
pub extern "C" fn psitest_noise_params_nominal() -> PsitestNoiseParams {
    let p = NoiseModelParams::nominal();
    PsitestNoiseParams {
        dark_rate: p.dark_rate,
        dark_rate_err: p.dark_rate_err,
        keep_window: p.keep_window,
        detection_probability: p.detection_probability,
        detection_probability_rel_err: p.detection_probability_rel_err,
        extinction_db: p.extinction_db,
        extinction_db_err: p.extinction_db_err,
    }
}

/// Expected `epsilon_expt` at dimension `d` and its uncertainty band.
///
/// # Safety
/// `params` must be null or point to a valid struct; `out` must be null or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn psitest_expected_epsilon(
    params: *const PsitestNoiseParams,
    d: usize,
    out: *mut PsitestBand,
) -> PsitestStatus {
    guard(|| {
        let p = borrow(params)?;
        let core = NoiseModelParams {
            dark_rate: p.dark_rate,
            dark_rate_err: p.dark_rate_err,
            keep_window: p.keep_window,
            detection_probability: p.detection_probability,
            detection_probability_rel_err: p.detection_probability_rel_err,
            extinction_db: p.extinction_db,
            extinction_db_err: p.extinction_db_err,
        };
        let b = expected_epsilon(&core, d).map_err(fail)?;
        write(
            out,
            PsitestBand {
                central: b.central,
                low: b.low,
                high: b.high,
            },
        )
    })
}

/// Opaque Monte Carlo distance distribution.
pub struct PsitestDistribution(Delta0Distribution);

/// Samples the distance distribution under phase noise. `coherence_time`
/// may be infinite for a noiseless laser. Release with
/// [`psitest_distribution_free`].
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn psitest_distribution_new(
    coherence_time: f64,
    bin_spacing: f64,
    d: usize,
    mean_photons: f64,
    samples_per_k: usize,
    seed: u64,
    out: *mut *mut PsitestDistribution,
) -> PsitestStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let model = PhaseWalkModel::new(coherence_time, bin_spacing).map_err(fail)?;
        let dist = delta0_distribution(&model, d, mean_photons, samples_per_k, &SeededRandomSource::new(seed))
            .map_err(fail)?;
        write(out, Box::into_raw(Box::new(PsitestDistribution(dist))))
    })
}

/// # Safety
/// `dist` must be a live handle or null; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn psitest_distribution_len(dist: *const PsitestDistribution, out: *mut usize) -> PsitestStatus {
    guard(|| write(out, borrow(dist)?.0.sample_count()))
}

/// # Safety
/// `dist` must be a live handle or null; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn psitest_distribution_mean(dist: *const PsitestDistribution, out: *mut f64) -> PsitestStatus {
    guard(|| write(out, borrow(dist)?.0.mean()))
}

/// Type-7 empirical quantile for `q` in (0, 1).
///
/// # Safety
/// `dist` must be a live handle or null; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn psitest_distribution_quantile(
    dist: *const PsitestDistribution,
    q: f64,
    out: *mut f64,
) -> PsitestStatus {
    guard(|| write(out, borrow(dist)?.0.quantile(q).map_err(fail)?))
}

/// # Safety
/// `dist` must be null or a handle from [`psitest_distribution_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn psitest_distribution_free(dist: *mut PsitestDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsitestApparatus {
    pub dim: usize,
    pub mean_photons: f64,
    pub efficiency: f64,
    /// Hz.
    pub dark_rate: f64,
    /// Seconds.
    pub keep_window: f64,
    /// Seconds.
    pub bin_period: f64,
    /// Linear power leakage into a blocked bin.
    pub extinction_power_ratio: f64,
}

impl From<&PsitestApparatus> for ApparatusConfig {
    fn from(a: &PsitestApparatus) -> Self {
        ApparatusConfig {
            dim: a.dim,
            mean_photons: a.mean_photons,
            efficiency: a.efficiency,
            dark_rate: a.dark_rate,
            keep_window: a.keep_window,
            bin_period: a.bin_period,
            extinction_power_ratio: a.extinction_power_ratio,
        }
    }
}

/// Nominal apparatus at dimension `d`.
#[no_mangle]
pub extern "C" fn psitest_apparatus_nominal(d: usize) -> PsitestApparatus {
    let c = ApparatusConfig::nominal(d);
    PsitestApparatus {
        dim: c.dim,
        mean_photons: c.mean_photons,
        efficiency: c.efficiency,
        dark_rate: c.dark_rate,
        keep_window: c.keep_window,
        bin_period: c.bin_period,
        extinction_power_ratio: c.extinction_power_ratio,
    }
}

/// Opaque click-count table.
pub struct PsitestCounts(ClickCounts);

/// Simulates `trials_per_k` trains per prepared bin. Release with
/// [`psitest_counts_free`].
///
/// # Safety
/// `config` must be null or valid; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn psitest_run_experiment(
    config: *const PsitestApparatus,
    trials_per_k: u64,
    seed: u64,
    out: *mut *mut PsitestCounts,
) -> PsitestStatus {
    guard(|| {
        let cfg = ApparatusConfig::from(borrow(config)?);
        if out.is_null() {
            return Err(null());
        }
        let counts = run_experiment(&cfg, trials_per_k, &SeededRandomSource::new(seed)).map_err(fail)?;
        write(out, Box::into_raw(Box::new(PsitestCounts(counts))))
    })
}

/// # Safety
/// `counts` must be a live handle or null; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn psitest_counts_dim(counts: *const PsitestCounts, out: *mut usize) -> PsitestStatus {
    guard(|| write(out, borrow(counts)?.0.dim()))
}

/// Clicks in bin `j` when bin `k` was blocked (both zero-based).
///
/// # Safety
/// `counts` must be a live handle or null; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn psitest_counts_get(
    counts: *const PsitestCounts,
    k: usize,
    j: usize,
    out: *mut u64,
) -> PsitestStatus {
    guard(|| {
        let c = &borrow(counts)?.0;
        match c.counts().get(k).and_then(|row| row.get(j)) {
            Some(&n) => write(out, n),
            None => Err(fail(Error::Domain(format!(
                "index ({k}, {j}) out of range for d={}",
                c.dim()
            )))),
        }
    })
}

/// Trains without any click when bin `k` was blocked.
///
/// # Safety
/// `counts` must be a live handle or null; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn psitest_counts_no_clicks(
    counts: *const PsitestCounts,
    k: usize,
    out: *mut u64,
) -> PsitestStatus {
    guard(|| {
        let c = &borrow(counts)?.0;
        match c.no_clicks().get(k) {
            Some(&n) => write(out, n),
            None => Err(fail(Error::Domain(format!("k={k} out of range for d={}", c.dim())))),
        }
    })
}

/// `epsilon_expt` and its binomial standard error.
///
/// # Safety
/// `counts` must be a live handle or null; out pointers null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn psitest_counts_epsilon(
    counts: *const PsitestCounts,
    out_value: *mut f64,
    out_std_error: *mut f64,
) -> PsitestStatus {
    guard(|| {
        let e = epsilon_expt(&borrow(counts)?.0).map_err(fail)?;
        write(out_value, e.value)?;
        write(out_std_error, e.std_error)
    })
}

/// # Safety
/// `counts` must be null or a handle from [`psitest_run_experiment`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn psitest_counts_free(counts: *mut PsitestCounts) {
    if !counts.is_null() {
        drop(Box::from_raw(counts));
    }
}

/// Checks both overlap bounds on `models` random model pairs. `out_passed`
/// is true iff no model violates either bound.
///
/// # Safety
/// `out_passed` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn psitest_verify_nogo(models: usize, seed: u64, out_passed: *mut bool) -> PsitestStatus {
    guard(|| {
        let opts = VerifyOptions {
            models,
            ..VerifyOptions::default()
        };
        let report = verify_nogo(&opts, &SeededRandomSource::new(seed)).map_err(fail)?;
        write(out_passed, report.passed())
    })
}
