//! C ABI over the core library.
//!
//! Conventions:
//! - Every function returns an [`SmdpStatus`]; results travel through out
//!   pointers. `SMDP_STATUS_OK` (0) means every out pointer was written.
//! - Handles ([`SmdpSpec`], [`SmdpMeasure`]) are opaque; free them with the
//!   matching `_free`, which tolerates null.
//! - On any non-zero status the calling thread's error message is updated;
//!   fetch it with [`smdp_last_error`]. Messages never outlive the thread.
//! - Every entry point catches panics and reports `SMDP_STATUS_PANIC`
//!   instead of unwinding across the boundary.
//! - Buffers are caller-allocated; functions that fill one take its
//!   capacity and refuse (without partial writes) when it is too small.
//!
//! The header `include/spectral_mdp.h` is generated from this file at build
//! time.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_traits::ToPrimitive;
use spectral_mdp::combinatorics::{dk_matrix, gen_catalan};
use spectral_mdp::ensembles::{
    estimate_moment_covariance, moment_vector, sample_tridiagonal, spectral_measure,
    EnsembleSpec, RngState,
};
use spectral_mdp::measures::{ReferenceMeasure, SignedMeasureRep, SpectralMeasure};
use spectral_mdp::mdp::{
    measure_rate, moment_rate, projection_partial_sums, scalar_rate, ScalarRateKind,
    ScalarRateSpec,
};
use spectral_mdp::orthopoly::MomentVector;
use spectral_mdp::{Ensemble, Error};

/// Status code of every ABI call. Non-zero codes leave a message retrievable
/// via `smdp_last_error` on the same thread.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmdpStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A parameter violated its domain (dimension, shape, support, ...).
    Domain = 2,
    /// Two related buffers or sequences disagree in length.
    LengthMismatch = 3,
    /// Input is not supported on the half line (Laguerre-side decomposition).
    NotHalfLine = 4,
    /// Input is not supported on the unit interval (canonical moments).
    NotUnitInterval = 5,
    /// Input is not the moment sequence of a nondegenerate measure.
    NotMomentSequence = 6,
    /// Moment inversion beyond the conditioning guard.
    ConditioningGuard = 7,
    /// An iterative kernel (eigensolver, tail fraction) did not converge.
    NonConvergence = 8,
    /// A floating-point computation failed.
    Numeric = 9,
    /// Filesystem or serialization failure.
    Io = 10,
    /// A provided buffer is smaller than the result.
    BufferTooSmall = 11,
    /// The library panicked; state is unchanged but the call did nothing.
    Panic = 12,
}

/// Ensemble selector mirroring the core enum.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmdpEnsemble {
    Gaussian = 0,
    Laguerre = 1,
    Jacobi = 2,
}

impl From<SmdpEnsemble> for Ensemble {
    fn from(e: SmdpEnsemble) -> Ensemble {
        match e {
            SmdpEnsemble::Gaussian => Ensemble::Gaussian,
            SmdpEnsemble::Laguerre => Ensemble::Laguerre,
            SmdpEnsemble::Jacobi => Ensemble::Jacobi,
        }
    }
}

/// Reference measure selector.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmdpReference {
    Semicircle = 0,
    MarchenkoPastur = 1,
    Arcsine = 2,
}

impl From<SmdpReference> for ReferenceMeasure {
    fn from(r: SmdpReference) -> ReferenceMeasure {
        match r {
            SmdpReference::Semicircle => ReferenceMeasure::Semicircle,
            SmdpReference::MarchenkoPastur => ReferenceMeasure::MarchenkoPastur,
            SmdpReference::Arcsine => ReferenceMeasure::Arcsine,
        }
    }
}

/// Scalar finite-n law selector for the closed-form rates.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmdpRateKind {
    NormalVar = 0,
    GammaMean = 1,
    BetaHalf = 2,
}

impl From<SmdpRateKind> for ScalarRateKind {
    fn from(k: SmdpRateKind) -> ScalarRateKind {
        match k {
            SmdpRateKind::NormalVar => ScalarRateKind::NormalVar,
            SmdpRateKind::GammaMean => ScalarRateKind::GammaMean,
            SmdpRateKind::BetaHalf => ScalarRateKind::BetaHalf,
        }
    }
}

/// Opaque ensemble description (kind, dimension, beta, shape parameters).
pub struct SmdpSpec(EnsembleSpec);

/// Opaque sampled spectral measure (atoms ascending, weights summing to 1).
pub struct SmdpMeasure(SpectralMeasure);

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|cell| {
        let mut buf = cell.borrow_mut();
        buf.clear();
        buf.extend_from_slice(msg.as_bytes());
    });
}

fn fail(err: Error) -> SmdpStatus {
    set_error(&err.to_string());
    match err {
        Error::Domain(_) => SmdpStatus::Domain,
        Error::LengthMismatch { .. } => SmdpStatus::LengthMismatch,
        Error::NotHalfLineSupported { .. } => SmdpStatus::NotHalfLine,
        Error::NotUnitIntervalSupported { .. } => SmdpStatus::NotUnitInterval,
        Error::NotMomentSequence { .. } => SmdpStatus::NotMomentSequence,
        Error::ConditioningGuard { .. } => SmdpStatus::ConditioningGuard,
        Error::NonConvergence { .. } => SmdpStatus::NonConvergence,
        Error::Numeric(_) => SmdpStatus::Numeric,
        Error::Io(_) => SmdpStatus::Io,
    }
}

fn null_arg(what: &str) -> SmdpStatus {
    set_error(&format!("{what} must not be null"));
    SmdpStatus::NullArgument
}

/// Runs the body under a panic guard; a panic becomes `SMDP_STATUS_PANIC`.
fn guard<F: FnOnce() -> SmdpStatus>(f: F) -> SmdpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| (*s).to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in spectral-mdp".into());
            set_error(&msg);
            SmdpStatus::Panic
        }
    }
}

/// Input slice from a (pointer, length) pair; null is allowed only at
/// length zero.
unsafe fn in_slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], SmdpStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null_arg(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// Copies `values` into `buf` (capacity `cap`), refusing without partial
/// writes when the buffer is too small.
unsafe fn fill(buf: *mut f64, cap: usize, values: &[f64], what: &str) -> SmdpStatus {
    if buf.is_null() {
        return null_arg(what);
    }
    if cap < values.len() {
        set_error(&format!(
            "{what} buffer holds {cap} values, {} required",
            values.len()
        ));
        return SmdpStatus::BufferTooSmall;
    }
    std::slice::from_raw_parts_mut(buf, values.len()).copy_from_slice(values);
    SmdpStatus::Ok
}

fn box_out<T>(out: *mut *mut T, value: T, what: &str) -> SmdpStatus {
    if out.is_null() {
        return null_arg(what);
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    SmdpStatus::Ok
}

// ---------------------------------------------------------------------------
// error retrieval

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string (truncated to `cap - 1` bytes when necessary) and
/// returns the full message length in bytes, excluding the NUL. With a null
/// buffer or zero capacity nothing is written and only the length returns.
#[no_mangle]
pub extern "C" fn smdp_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|cell| {
        let msg = cell.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

// ---------------------------------------------------------------------------
// ensemble specs

/// Creates a Gaussian (Hermite) spec: dimension `n >= 1`, `beta > 0`.
#[no_mangle]
pub extern "C" fn smdp_spec_gaussian(n: usize, beta: f64, out: *mut *mut SmdpSpec) -> SmdpStatus {
    guard(|| match EnsembleSpec::gaussian(n, beta) {
        Ok(spec) => box_out(out, SmdpSpec(spec), "out"),
        Err(err) => fail(err),
    })
}

/// Creates a Laguerre (Wishart) spec: `gamma > -1`.
#[no_mangle]
pub extern "C" fn smdp_spec_laguerre(
    n: usize,
    beta: f64,
    gamma: f64,
    out: *mut *mut SmdpSpec,
) -> SmdpStatus {
    guard(|| match EnsembleSpec::laguerre(n, beta, gamma) {
        Ok(spec) => box_out(out, SmdpSpec(spec), "out"),
        Err(err) => fail(err),
    })
}

/// Creates a Jacobi (MANOVA) spec: `gamma, delta > -1`.
#[no_mangle]
pub extern "C" fn smdp_spec_jacobi(
    n: usize,
    beta: f64,
    gamma: f64,
    delta: f64,
    out: *mut *mut SmdpSpec,
) -> SmdpStatus {
    guard(|| match EnsembleSpec::jacobi(n, beta, gamma, delta) {
        Ok(spec) => box_out(out, SmdpSpec(spec), "out"),
        Err(err) => fail(err),
    })
}

/// Frees a spec handle; null is a no-op.
#[no_mangle]
pub extern "C" fn smdp_spec_free(spec: *mut SmdpSpec) {
    if !spec.is_null() {
        drop(unsafe { Box::from_raw(spec) });
    }
}

// ---------------------------------------------------------------------------
// sampling

/// Samples the spectral measure of one tridiagonal draw. Identical
/// (seed, stream) pairs reproduce the measure bit for bit.
#[no_mangle]
pub extern "C" fn smdp_sample(
    spec: *const SmdpSpec,
    seed: u64,
    stream: u64,
    out: *mut *mut SmdpMeasure,
) -> SmdpStatus {
    guard(|| {
        if spec.is_null() {
            return null_arg("spec");
        }
        let spec = unsafe { &*spec }.0;
        let state = RngState { seed, stream };
        let measure = sample_tridiagonal(spec, state).and_then(|t| spectral_measure(&t));
        match measure {
            Ok(mu) => box_out(out, SmdpMeasure(mu), "out"),
            Err(err) => fail(err),
        }
    })
}

/// Number of atoms in a sampled measure (its matrix dimension).
#[no_mangle]
pub extern "C" fn smdp_measure_len(measure: *const SmdpMeasure, out: *mut usize) -> SmdpStatus {
    guard(|| {
        if measure.is_null() {
            return null_arg("measure");
        }
        if out.is_null() {
            return null_arg("out");
        }
        unsafe { *out = (*measure).0.atoms().len() };
        SmdpStatus::Ok
    })
}

/// Copies the atoms (ascending) into `buf`.
#[no_mangle]
pub extern "C" fn smdp_measure_atoms(
    measure: *const SmdpMeasure,
    buf: *mut f64,
    cap: usize,
) -> SmdpStatus {
    guard(|| {
        if measure.is_null() {
            return null_arg("measure");
        }
        unsafe { fill(buf, cap, (*measure).0.atoms(), "atoms") }
    })
}

/// Copies the weights (matching atom order, summing to 1) into `buf`.
#[no_mangle]
pub extern "C" fn smdp_measure_weights(
    measure: *const SmdpMeasure,
    buf: *mut f64,
    cap: usize,
) -> SmdpStatus {
    guard(|| {
        if measure.is_null() {
            return null_arg("measure");
        }
        unsafe { fill(buf, cap, (*measure).0.weights(), "weights") }
    })
}

/// Moments m_1..m_k of a sampled measure, written to `buf` (capacity `cap`).
#[no_mangle]
pub extern "C" fn smdp_measure_moments(
    measure: *const SmdpMeasure,
    k: usize,
    buf: *mut f64,
    cap: usize,
) -> SmdpStatus {
    guard(|| {
        if measure.is_null() {
            return null_arg("measure");
        }
        match unsafe { &*measure }.0.moments(k) {
            Ok(m) => unsafe { fill(buf, cap, m.m(), "moments") },
            Err(err) => fail(err),
        }
    })
}

/// Frees a measure handle; null is a no-op.
#[no_mangle]
pub extern "C" fn smdp_measure_free(measure: *mut SmdpMeasure) {
    if !measure.is_null() {
        drop(unsafe { Box::from_raw(measure) });
    }
}

/// Moments m_1..m_k of one draw, without materializing the eigensystem
/// (the counting recursion on the tridiagonal entries).
#[no_mangle]
pub extern "C" fn smdp_sample_moments(
    spec: *const SmdpSpec,
    k: usize,
    seed: u64,
    stream: u64,
    buf: *mut f64,
    cap: usize,
) -> SmdpStatus {
    guard(|| {
        if spec.is_null() {
            return null_arg("spec");
        }
        let spec = unsafe { &*spec }.0;
        let state = RngState { seed, stream };
        let m = sample_tridiagonal(spec, state).and_then(|t| moment_vector(&t, k));
        match m {
            Ok(m) => unsafe { fill(buf, cap, m.m(), "moments") },
            Err(err) => fail(err),
        }
    })
}

/// Monte Carlo covariance of the rescaled moment vector over `reps`
/// replicates (streams `stream .. stream + reps`). `cov` and `se` receive
/// the k x k matrices row-major; both need capacity `k * k`.
#[no_mangle]
pub extern "C" fn smdp_estimate_covariance(
    spec: *const SmdpSpec,
    k: usize,
    reps: usize,
    seed: u64,
    stream: u64,
    cov: *mut f64,
    se: *mut f64,
    cap: usize,
) -> SmdpStatus {
    guard(|| {
        if spec.is_null() {
            return null_arg("spec");
        }
        let spec = unsafe { &*spec }.0;
        let state = RngState { seed, stream };
        let est = match estimate_moment_covariance(spec, k, reps, state) {
            Ok(est) => est,
            Err(err) => return fail(err),
        };
        let flat_cov: Vec<f64> = est.covariance().iter().flatten().copied().collect();
        let flat_se: Vec<f64> = est.standard_errors().iter().flatten().copied().collect();
        let status = unsafe { fill(cov, cap, &flat_cov, "cov") };
        if status != SmdpStatus::Ok {
            return status;
        }
        unsafe { fill(se, cap, &flat_se, "se") }
    })
}

// ---------------------------------------------------------------------------
// exact combinatorics

/// Generalized Catalan number d_{i,j}; fails with `SMDP_STATUS_NUMERIC`
/// when the value exceeds 64 bits.
#[no_mangle]
pub extern "C" fn smdp_catalan(i: u64, j: u64, out: *mut u64) -> SmdpStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        match gen_catalan(i, j) {
            Ok(value) => match value.to_u64() {
                Some(v) => {
                    unsafe { *out = v };
                    SmdpStatus::Ok
                }
                None => {
                    set_error(&format!("d({i},{j}) exceeds 64 bits"));
                    SmdpStatus::Numeric
                }
            },
            Err(err) => fail(err),
        }
    })
}

/// The k x k covariance factor D_k, row-major with zeros above the
/// diagonal (Jacobi entries include the 2^(-1/2) factor). `buf` needs
/// capacity `k * k`.
#[no_mangle]
pub extern "C" fn smdp_dk_matrix(
    ensemble: SmdpEnsemble,
    k: usize,
    buf: *mut f64,
    cap: usize,
) -> SmdpStatus {
    guard(|| match dk_matrix(ensemble.into(), k) {
        Ok(dk) => {
            let flat: Vec<f64> = dk.to_f64().iter().flatten().copied().collect();
            unsafe { fill(buf, cap, &flat, "dk") }
        }
        Err(err) => fail(err),
    })
}

// ---------------------------------------------------------------------------
// rate functions

/// Closed-form scalar rate: x^2/(2 alpha), alpha x^2 / 2, or 4 alpha x^2.
#[no_mangle]
pub extern "C" fn smdp_scalar_rate(
    kind: SmdpRateKind,
    alpha: f64,
    x: f64,
    out: *mut f64,
) -> SmdpStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        match ScalarRateSpec::new(kind.into(), alpha) {
            Ok(spec) => {
                unsafe { *out = scalar_rate(spec, x) };
                SmdpStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Moment-level rate (beta/4) ||D_k^{-1} m||^2 for the deviation vector
/// `m` of length `len`.
#[no_mangle]
pub extern "C" fn smdp_moment_rate(
    ensemble: SmdpEnsemble,
    beta: f64,
    m: *const f64,
    len: usize,
    out: *mut f64,
) -> SmdpStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let m = match unsafe { in_slice(m, len, "m") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let m = match MomentVector::new(m.to_vec()) {
            Ok(m) => m,
            Err(err) => return fail(err),
        };
        match moment_rate(ensemble.into(), beta, &m) {
            Ok(rate) => {
                unsafe { *out = rate };
                SmdpStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Measure-level rate of a polynomial density: coefficients in the
/// reference's orthonormal basis, degrees 1..=len. Equals
/// (beta/4) sum c_d^2.
#[no_mangle]
pub extern "C" fn smdp_polynomial_rate(
    reference: SmdpReference,
    beta: f64,
    coeffs: *const f64,
    len: usize,
    out: *mut f64,
) -> SmdpStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let coeffs = match unsafe { in_slice(coeffs, len, "coeffs") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let mu = match SignedMeasureRep::polynomial_density(reference.into(), coeffs.to_vec()) {
            Ok(mu) => mu,
            Err(err) => return fail(err),
        };
        match measure_rate(beta, &mu) {
            Ok(rate) => {
                unsafe { *out = rate };
                SmdpStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Measure-level rate of a discrete signed measure (weights must sum to
/// zero): 0 when the measure vanishes, +infinity otherwise.
#[no_mangle]
pub extern "C" fn smdp_discrete_rate(
    beta: f64,
    atoms: *const f64,
    weights: *const f64,
    len: usize,
    out: *mut f64,
) -> SmdpStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let atoms = match unsafe { in_slice(atoms, len, "atoms") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let weights = match unsafe { in_slice(weights, len, "weights") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let mu = match SignedMeasureRep::discrete_signed(atoms.to_vec(), weights.to_vec()) {
            Ok(mu) => mu,
            Err(err) => return fail(err),
        };
        match measure_rate(beta, &mu) {
            Ok(rate) => {
                unsafe { *out = rate };
                SmdpStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Projection partial sum (beta/4) sum_{d<=max_k} (int p_d dmu)^2 of a
/// discrete signed measure against the reference's orthonormal basis; the
/// diverging counterpart of `smdp_discrete_rate`.
#[no_mangle]
pub extern "C" fn smdp_discrete_projection_rate(
    reference: SmdpReference,
    beta: f64,
    atoms: *const f64,
    weights: *const f64,
    len: usize,
    max_k: usize,
    out: *mut f64,
) -> SmdpStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let atoms = match unsafe { in_slice(atoms, len, "atoms") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let weights = match unsafe { in_slice(weights, len, "weights") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let mu = match SignedMeasureRep::discrete_signed(atoms.to_vec(), weights.to_vec()) {
            Ok(mu) => mu,
            Err(err) => return fail(err),
        };
        let reference: ReferenceMeasure = reference.into();
        // Degree max_k consumes max_k off-diagonal coefficients.
        let sums = reference
            .recursion(max_k + 1)
            .and_then(|sigma| projection_partial_sums(beta, &mu, &sigma, max_k));
        match sums {
            Ok(partials) => {
                unsafe { *out = *partials.last().expect("max_k >= 1 checked by the library") };
                SmdpStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}
