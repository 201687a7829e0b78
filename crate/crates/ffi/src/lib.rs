//! C ABI over `fracpoisson`.
//!
//! Every fallible call returns an [`FpStatus`] and writes its result through
//! an out-pointer. On failure the message is kept per thread and can be read
//! with [`fp_last_error_message`]. Models and samplers are opaque handles
//! released with their `_free` functions. Infinite rates and the infinite
//! estimate are reported as IEEE infinities.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fracpoisson::estimation::{estimate_nu, rate_j};
use fracpoisson::harness::{run_experiment, ExperimentConfig};
use fracpoisson::large_deviations::{rate_ld, rate_md};
use fracpoisson::model::{covariance_matrix, LatticePoint, ModelParams};
use fracpoisson::sampling::{stream_rng, StreamRng, VectorSampler};
use fracpoisson::special::{log_generalized_mittag_leffler, mittag_leffler};
use fracpoisson::{Error, ExtendedReal};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpStatus {
    Ok = 0,
    Domain = 1,
    Range = 2,
    Precondition = 3,
    Config = 4,
    NonConvergence = 5,
    Truncation = 6,
    NullPointer = 7,
    InvalidString = 8,
    Panic = 9,
}

/// Opaque model handle.
pub struct FpModel {
    params: ModelParams,
}

/// Opaque sampler handle owning its random stream.
pub struct FpSampler {
    sampler: VectorSampler,
    rng: StreamRng,
    dim: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FpStatus {
    match e {
        Error::Domain(_) => FpStatus::Domain,
        Error::Range(_) => FpStatus::Range,
        Error::Precondition(_) => FpStatus::Precondition,
        Error::Config(_) => FpStatus::Config,
        Error::NonConvergence { .. } => FpStatus::NonConvergence,
        Error::TruncationExhausted(_) => FpStatus::Truncation,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Utf8,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> FpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => FpStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer passed for {what}"));
            FpStatus::NullPointer
        }
        Ok(Err(Failure::Utf8)) => {
            set_error("string argument is not valid UTF-8".into());
            FpStatus::InvalidString
        }
        Err(_) => {
            set_error("internal panic".into());
            FpStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn model_ref<'a>(p: *const FpModel) -> Result<&'a FpModel, Failure> {
    p.as_ref().ok_or(Failure::Null("model"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(
    p: *mut T,
    len: usize,
    what: &'static str,
) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn length_check(expected: usize, got: usize, what: &str) -> Result<(), Failure> {
    if expected != got {
        return Err(Failure::Lib(Error::Domain(format!(
            "{what} has length {got}, expected {expected}"
        ))));
    }
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// `E_{alpha,beta}(z)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fp_mittag_leffler(
    alpha: f64,
    beta: f64,
    z: f64,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        *out_ref(out, "out")? = mittag_leffler(alpha, beta, z)?;
        Ok(())
    })
}

/// `log E^gamma_{alpha,beta}(z)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fp_log_generalized_mittag_leffler(
    alpha: f64,
    beta: f64,
    gamma: f64,
    z: f64,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        *out_ref(out, "out")? = log_generalized_mittag_leffler(alpha, beta, gamma, z)?;
        Ok(())
    })
}

/// Creates a model with order `nu` and `m` intensities.
///
/// # Safety
/// `lambda` must point to `m` doubles and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fp_model_new(
    nu: f64,
    lambda: *const f64,
    m: usize,
    out: *mut *mut FpModel,
) -> FpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let params = ModelParams::new(nu, slice(lambda, m, "lambda")?.to_vec())?;
        *out = Box::into_raw(Box::new(FpModel { params }));
        Ok(())
    })
}

/// Releases a model; NULL is ignored.
///
/// # Safety
/// `model` must come from [`fp_model_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn fp_model_free(model: *mut FpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Dimension `m` of the model, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fp_model_dim(model: *const FpModel) -> usize {
    model.as_ref().map_or(0, |m| m.params.dim())
}

/// `log P(s(M(t)) = h)`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fp_marginal_sum_log_pmf(
    model: *const FpModel,
    t: f64,
    h: u64,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        let m = model_ref(model)?;
        *out_ref(out, "out")? = m.params.at(t)?.marginal_log_pmf(h);
        Ok(())
    })
}

/// `log P(M(t) = k)`.
///
/// # Safety
/// `k` must point to `m` integers; `model` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_joint_log_pmf(
    model: *const FpModel,
    t: f64,
    k: *const u64,
    m: usize,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        let model = model_ref(model)?;
        let point = LatticePoint::new(slice(k, m, "k")?.to_vec());
        *out_ref(out, "out")? = model.params.at(t)?.joint_log_pmf(&point)?;
        Ok(())
    })
}

/// `log E[exp(<theta, M(t)>)]`.
///
/// # Safety
/// `theta` must point to `m` doubles; `model` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_log_mgf(
    model: *const FpModel,
    t: f64,
    theta: *const f64,
    m: usize,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        let model = model_ref(model)?;
        let theta = slice(theta, m, "theta")?;
        *out_ref(out, "out")? = model.params.at(t)?.log_mgf(theta)?;
        Ok(())
    })
}

/// Writes `E[M(t)]` into `out[0..m]`.
///
/// # Safety
/// `out` must point to `m` writable doubles; `model` must be live.
#[no_mangle]
pub unsafe extern "C" fn fp_mean_vector(
    model: *const FpModel,
    t: f64,
    out: *mut f64,
    m: usize,
) -> FpStatus {
    guard(|| {
        let model = model_ref(model)?;
        length_check(model.params.dim(), m, "out")?;
        let mean = model.params.at(t)?.mean_vector()?;
        slice_mut(out, m, "out")?.copy_from_slice(&mean);
        Ok(())
    })
}

/// Writes the limiting covariance `C` row-major into `out[0..len]`, `len = m*m`.
///
/// # Safety
/// `out` must point to `len` writable doubles; `model` must be live.
#[no_mangle]
pub unsafe extern "C" fn fp_covariance_matrix(
    model: *const FpModel,
    out: *mut f64,
    len: usize,
) -> FpStatus {
    guard(|| {
        let model = model_ref(model)?;
        let m = model.params.dim();
        length_check(m * m, len, "out")?;
        let c = covariance_matrix(&model.params);
        let dst = slice_mut(out, len, "out")?;
        for (i, row) in c.rows().iter().enumerate() {
            dst[i * m..(i + 1) * m].copy_from_slice(row);
        }
        Ok(())
    })
}

/// `Lambda*(x)`; `+INFINITY` outside the orthant.
///
/// # Safety
/// `x` must point to `m` doubles; `model` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_rate_ld(
    model: *const FpModel,
    x: *const f64,
    m: usize,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        let model = model_ref(model)?;
        *out_ref(out, "out")? = rate_ld(&model.params, slice(x, m, "x")?)?.value.to_f64();
        Ok(())
    })
}

/// `<x, C^-1 x>/2`.
///
/// # Safety
/// `x` must point to `m` doubles; `model` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_rate_md(
    model: *const FpModel,
    x: *const f64,
    m: usize,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        let model = model_ref(model)?;
        *out_ref(out, "out")? = rate_md(&model.params, slice(x, m, "x")?)?.to_f64();
        Ok(())
    })
}

/// Estimate of `nu` from the total `sum` observed at time `t`; `+INFINITY`
/// for a zero total. Uses the intensities of `model` only.
///
/// # Safety
/// `model` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_estimate_nu(
    model: *const FpModel,
    t: f64,
    sum: u64,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        let model = model_ref(model)?;
        *out_ref(out, "out")? = estimate_nu(&model.params, t, sum)?.nu_hat.to_f64();
        Ok(())
    })
}

/// `J_{nu}(nu_hat)` with `nu` taken from the model; `nu_hat` may be infinite.
///
/// # Safety
/// `model` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_rate_j(model: *const FpModel, nu_hat: f64, out: *mut f64) -> FpStatus {
    guard(|| {
        let model = model_ref(model)?;
        if nu_hat.is_nan() {
            return Err(Error::Domain("nu_hat is NaN".into()).into());
        }
        let v = rate_j(
            &model.params,
            model.params.nu(),
            ExtendedReal::from_f64(nu_hat),
        )?;
        *out_ref(out, "out")? = v.to_f64();
        Ok(())
    })
}

/// Sampler for `M(t)` on the stream `(seed, 0, 0)`.
///
/// # Safety
/// `model` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_sampler_new(
    model: *const FpModel,
    t: f64,
    seed: u64,
    out: *mut *mut FpSampler,
) -> FpStatus {
    guard(|| {
        let model = model_ref(model)?;
        let out = out_ref(out, "out")?;
        let sampler = VectorSampler::new(&model.params, t)?;
        *out = Box::into_raw(Box::new(FpSampler {
            sampler,
            rng: stream_rng(seed, 0, 0),
            dim: model.params.dim(),
        }));
        Ok(())
    })
}

/// Releases a sampler; NULL is ignored.
///
/// # Safety
/// `sampler` must come from [`fp_sampler_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn fp_sampler_free(sampler: *mut FpSampler) {
    if !sampler.is_null() {
        drop(Box::from_raw(sampler));
    }
}

/// Writes the next draw into `counts[0..m]`.
///
/// # Safety
/// `sampler` must be live and `counts` must point to `m` writable integers.
#[no_mangle]
pub unsafe extern "C" fn fp_sampler_next(
    sampler: *mut FpSampler,
    counts: *mut u64,
    m: usize,
) -> FpStatus {
    guard(|| {
        let s = out_ref(sampler, "sampler")?;
        length_check(s.dim, m, "counts")?;
        let draw = s.sampler.sample(&mut s.rng);
        slice_mut(counts, m, "counts")?.copy_from_slice(draw.counts());
        Ok(())
    })
}

/// Runs an experiment from its JSON config and returns the JSON report in
/// `*out`, to be released with [`fp_string_free`].
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_run_experiment_json(
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> FpStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(Failure::Null("config_json"));
        }
        let out = out_ref(out, "out")?;
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|_| Failure::Utf8)?;
        let cfg = ExperimentConfig::from_json(text)?;
        let json = run_experiment(&cfg)?.to_json_string()?;
        *out = CString::new(json).map_err(|_| Failure::Utf8)?.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library; NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn fp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
