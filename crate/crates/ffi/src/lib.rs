//! C ABI for the airspread simulator.
//!
//! Every function returns an [`AirspreadStatus`] and hands results back
//! through out-pointers. Configs and results are opaque handles, released
//! with the matching `*_free` function. After a failing call,
//! [`airspread_last_error`] copies the message of the most recent error on
//! the calling thread. Panics never cross the boundary; they surface as
//! [`AirspreadStatus::Panic`].
//!
//! The generated header lives at `include/airspread.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::slice;

use airspread::error::Error;
use airspread::harness::{self, EnsembleSummary, RealizationResult, SimConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AirspreadStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    /// Bad config: unknown key, wrong type, missing file or invalid value.
    Config = 4,
    /// A room or config file failed to parse.
    Format = 5,
    Validation = 6,
    Resolution = 7,
    Convergence = 8,
    Stability = 9,
    Injection = 10,
    Io = 11,
    Internal = 12,
    /// The caller's buffer is shorter than the data.
    BufferTooSmall = 13,
    Panic = 14,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AirspreadCompartment {
    Susceptible = 0,
    Exposed = 1,
    Infected = 2,
}

/// Simulation config handle.
pub struct AirspreadConfig(SimConfig);

/// One realization's results.
pub struct AirspreadRealization(RealizationResult);

/// Ensemble summary.
pub struct AirspreadEnsemble(EnsembleSummary);

/// Particle budget of a realization, in particles.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AirspreadLedger {
    pub emitted: f64,
    pub mask_trapped_out: f64,
    pub absorbed: f64,
    pub mask_trapped_in: f64,
    pub decayed: f64,
    pub vented: f64,
    pub outflow: f64,
    pub field: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AirspreadTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub df: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(AirspreadStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.root() {
            Error::InvalidArgument(_) => AirspreadStatus::InvalidArgument,
            Error::Format { .. } => AirspreadStatus::Format,
            Error::Validation(_) => AirspreadStatus::Validation,
            Error::Resolution(_) => AirspreadStatus::Resolution,
            Error::Convergence { .. } => AirspreadStatus::Convergence,
            Error::Stability(_) => AirspreadStatus::Stability,
            Error::Injection(_) => AirspreadStatus::Injection,
            Error::Config(_) | Error::UnknownKey(_) | Error::TypeMismatch { .. } | Error::MissingConfig(_) => {
                AirspreadStatus::Config
            }
            Error::Io(_) => AirspreadStatus::Io,
            _ => AirspreadStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(AirspreadStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AirspreadStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| panic.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(Failure(AirspreadStatus::Panic, msg))
    });
    match outcome {
        Ok(()) => AirspreadStatus::Ok,
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            status
        }
    }
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(AirspreadStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Copies `src` into a caller buffer of `cap` elements.
unsafe fn copy_out<T: Copy>(src: &[T], dst: *mut T, cap: usize, what: &str) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(null(what));
    }
    if cap < src.len() {
        return Err(Failure(
            AirspreadStatus::BufferTooSmall,
            format!("{what} holds {cap} values, {} needed", src.len()),
        ));
    }
    slice::from_raw_parts_mut(dst, src.len()).copy_from_slice(src);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn airspread_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated and
/// NUL-terminated) and returns its full length in bytes, excluding the NUL.
/// Pass a null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn airspread_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            let dst = slice::from_raw_parts_mut(buf.cast::<u8>(), n + 1);
            dst[..n].copy_from_slice(&msg.as_bytes()[..n]);
            dst[n] = 0;
        }
        msg.len()
    })
}

/// Creates a config holding the defaults.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn airspread_config_default(out: *mut *mut AirspreadConfig) -> AirspreadStatus {
    guard(|| {
        let handle = Box::into_raw(Box::new(AirspreadConfig(SimConfig::default())));
        put(out, handle, "out")
    })
}

/// Parses a TOML config layered over the defaults. A relative `room.file`
/// resolves against the working directory.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn airspread_config_parse(
    toml: *const c_char,
    out: *mut *mut AirspreadConfig,
) -> AirspreadStatus {
    guard(|| {
        let text = as_str(toml, "toml")?;
        let config = SimConfig::parse(text, Path::new("<ffi>"))?;
        put(out, Box::into_raw(Box::new(AirspreadConfig(config))), "out")
    })
}

/// Loads a TOML config file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn airspread_config_load(
    path: *const c_char,
    out: *mut *mut AirspreadConfig,
) -> AirspreadStatus {
    guard(|| {
        let path = as_str(path, "path")?;
        let config = SimConfig::load(path)?;
        put(out, Box::into_raw(Box::new(AirspreadConfig(config))), "out")
    })
}

/// Applies one `dotted.key=value` override. The config is unchanged on
/// failure.
///
/// # Safety
/// `config` must be a live handle; `assignment` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn airspread_config_set(
    config: *mut AirspreadConfig,
    assignment: *const c_char,
) -> AirspreadStatus {
    guard(|| {
        let config = config.as_mut().ok_or_else(|| null("config"))?;
        let assignment = as_str(assignment, "assignment")?;
        config.0 = config.0.with_overrides(&[assignment])?;
        Ok(())
    })
}

/// Writes the 16-character config hash plus a NUL into `buf`.
///
/// # Safety
/// `config` must be a live handle; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn airspread_config_hash(
    config: *const AirspreadConfig,
    buf: *mut c_char,
    cap: usize,
) -> AirspreadStatus {
    guard(|| {
        let config = as_ref(config, "config")?;
        let mut bytes = config.0.hash().into_bytes();
        bytes.push(0);
        copy_out(&bytes, buf.cast::<u8>(), cap, "buf")
    })
}

/// Releases a config. Null is ignored.
///
/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn airspread_config_free(config: *mut AirspreadConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs realization `index` of the config.
///
/// # Safety
/// `config` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn airspread_run_realization(
    config: *const AirspreadConfig,
    index: u64,
    out: *mut *mut AirspreadRealization,
) -> AirspreadStatus {
    guard(|| {
        let config = as_ref(config, "config")?;
        let result = harness::run_realization(&config.0, index as usize)?;
        put(out, Box::into_raw(Box::new(AirspreadRealization(result))), "out")
    })
}

/// Number of samples in the series.
///
/// # Safety
/// `result` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn airspread_realization_sample_count(
    result: *const AirspreadRealization,
    out: *mut usize,
) -> AirspreadStatus {
    guard(|| put(out, as_ref(result, "result")?.0.series.len(), "out"))
}

/// Copies the sample times (s) and S, E, I counts into arrays of `cap`
/// elements.
///
/// # Safety
/// `result` must be a live handle; each array must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn airspread_realization_series(
    result: *const AirspreadRealization,
    t: *mut f64,
    s: *mut u64,
    e: *mut u64,
    i: *mut u64,
    cap: usize,
) -> AirspreadStatus {
    guard(|| {
        let series = &as_ref(result, "result")?.0.series;
        let times: Vec<f64> = series.iter().map(|c| c.t).collect();
        copy_out(&times, t, cap, "t")?;
        let counts = |f: fn(&harness::SeiCounts) -> usize| series.iter().map(|c| f(c) as u64).collect::<Vec<_>>();
        copy_out(&counts(|c| c.s), s, cap, "s")?;
        copy_out(&counts(|c| c.e), e, cap, "e")?;
        copy_out(&counts(|c| c.i), i, cap, "i")
    })
}

/// Id of the initially infected agent.
///
/// # Safety
/// `result` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn airspread_realization_index_agent(
    result: *const AirspreadRealization,
    out: *mut usize,
) -> AirspreadStatus {
    guard(|| put(out, as_ref(result, "result")?.0.index_agent, "out"))
}

/// Final exposed fraction beyond the index agent.
///
/// # Safety
/// `result` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn airspread_realization_final_exposed(
    result: *const AirspreadRealization,
    out: *mut f64,
) -> AirspreadStatus {
    guard(|| put(out, as_ref(result, "result")?.0.final_exposed_fraction(), "out"))
}

/// # Safety
/// `result` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn airspread_realization_ledger(
    result: *const AirspreadRealization,
    out: *mut AirspreadLedger,
) -> AirspreadStatus {
    guard(|| {
        let l = as_ref(result, "result")?.0.ledger;
        let ledger = AirspreadLedger {
            emitted: l.emitted,
            mask_trapped_out: l.mask_trapped_out,
            absorbed: l.absorbed,
            mask_trapped_in: l.mask_trapped_in,
            decayed: l.decayed,
            vented: l.vented,
            outflow: l.outflow,
            field: l.field,
        };
        put(out, ledger, "out")
    })
}

/// Releases a realization result. Null is ignored.
///
/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn airspread_realization_free(result: *mut AirspreadRealization) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Runs `run.realizations` realizations and summarizes them.
///
/// # Safety
/// `config` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn airspread_run_ensemble(
    config: *const AirspreadConfig,
    out: *mut *mut AirspreadEnsemble,
) -> AirspreadStatus {
    guard(|| {
        let config = as_ref(config, "config")?;
        let summary = harness::run_ensemble(&config.0)?;
        put(out, Box::into_raw(Box::new(AirspreadEnsemble(summary))), "out")
    })
}

/// Number of sample times.
///
/// # Safety
/// `ensemble` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn airspread_ensemble_sample_count(
    ensemble: *const AirspreadEnsemble,
    out: *mut usize,
) -> AirspreadStatus {
    guard(|| put(out, as_ref(ensemble, "ensemble")?.0.times.len(), "out"))
}

/// Number of realizations.
///
/// # Safety
/// `ensemble` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn airspread_ensemble_realization_count(
    ensemble: *const AirspreadEnsemble,
    out: *mut usize,
) -> AirspreadStatus {
    guard(|| put(out, as_ref(ensemble, "ensemble")?.0.final_exposed.len(), "out"))
}

/// # Safety
/// `ensemble` must be a live handle; `out` must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn airspread_ensemble_times(
    ensemble: *const AirspreadEnsemble,
    out: *mut f64,
    cap: usize,
) -> AirspreadStatus {
    guard(|| copy_out(&as_ref(ensemble, "ensemble")?.0.times, out, cap, "out"))
}

/// Copies the mean and standard deviation of one compartment's fraction.
///
/// # Safety
/// `ensemble` must be a live handle; `mean` and `std` must hold `cap`
/// elements each.
#[no_mangle]
pub unsafe extern "C" fn airspread_ensemble_series(
    ensemble: *const AirspreadEnsemble,
    compartment: AirspreadCompartment,
    mean: *mut f64,
    std: *mut f64,
    cap: usize,
) -> AirspreadStatus {
    guard(|| {
        let summary = &as_ref(ensemble, "ensemble")?.0;
        let k = compartment as usize;
        copy_out(&summary.mean[k], mean, cap, "mean")?;
        copy_out(&summary.std[k], std, cap, "std")
    })
}

/// Final exposed fraction of each realization.
///
/// # Safety
/// `ensemble` must be a live handle; `out` must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn airspread_ensemble_final_exposed(
    ensemble: *const AirspreadEnsemble,
    out: *mut f64,
    cap: usize,
) -> AirspreadStatus {
    guard(|| copy_out(&as_ref(ensemble, "ensemble")?.0.final_exposed, out, cap, "out"))
}

/// Releases an ensemble. Null is ignored.
///
/// # Safety
/// `ensemble` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn airspread_ensemble_free(ensemble: *mut AirspreadEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

unsafe fn sample<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

/// Two-sided Welch t-test of `a` against `b`.
///
/// # Safety
/// `a` and `b` must hold `na` and `nb` values; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn airspread_welch_t_test(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    out: *mut AirspreadTestResult,
) -> AirspreadStatus {
    guard(|| {
        let r = harness::welch_t_test(sample(a, na, "a")?, sample(b, nb, "b")?)?;
        put(
            out,
            AirspreadTestResult {
                statistic: r.statistic,
                p_value: r.p_value,
                df: r.df,
            },
            "out",
        )
    })
}

/// Mean-centered Levene test over `k` groups; group `g` has `lens[g]`
/// values at `groups[g]`.
///
/// # Safety
/// `groups` and `lens` must hold `k` entries, each group its length.
#[no_mangle]
pub unsafe extern "C" fn airspread_levene_test(
    groups: *const *const f64,
    lens: *const usize,
    k: usize,
    out: *mut AirspreadTestResult,
) -> AirspreadStatus {
    guard(|| {
        if groups.is_null() || lens.is_null() {
            return Err(null("groups"));
        }
        let ptrs = slice::from_raw_parts(groups, k);
        let lens = slice::from_raw_parts(lens, k);
        let data = ptrs
            .iter()
            .zip(lens)
            .map(|(p, n)| sample(*p, *n, "group"))
            .collect::<Result<Vec<_>, _>>()?;
        let r = harness::levene_test(&data)?;
        put(
            out,
            AirspreadTestResult {
                statistic: r.statistic,
                p_value: r.p_value,
                df: r.df,
            },
            "out",
        )
    })
}
