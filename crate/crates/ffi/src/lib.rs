//! C interface to the `tpr` library.
//!
//! Objects are opaque handles created by `*_new` functions and released
//! with the matching `*_free`. Every fallible call returns a
//! [`TprStatus`]; on failure `tpr_last_error` describes the cause. Output
//! buffers are caller-allocated: functions report the required length and
//! write at most `len` values.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tpr::dynamics::{evolve_const, linspace, ConstMethod, EvolutionResult, EvolveOptions, Observable};
use tpr::fock::{HilbertSpec, QuantumState, Qubit};
use tpr::hamiltonians::{build_dicke, EffectiveParams};
use tpr::spectrum::{build_parity, eigensystem, ParityLabel};
use tpr::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TprStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Convergence = 3,
    Budget = 4,
    Regime = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TprParity {
    PlusOne = 0,
    MinusOne = 1,
    PlusI = 2,
    MinusI = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TprSpectrumClass {
    Discrete = 0,
    Collapse = 1,
    ContinuousUnbounded = 2,
}

/// Hamiltonian of the two-photon Rabi/Dicke model on a truncated space.
pub struct TprModel {
    params: EffectiveParams,
    spec: HilbertSpec,
}

/// Observable traces from a time evolution.
pub struct TprTrace {
    result: EvolutionResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> TprStatus {
    match e {
        Error::KrylovBreakdown { .. }
        | Error::StepUnderflow { .. }
        | Error::TraceDrift { .. }
        | Error::EigenConvergence { .. } => TprStatus::Convergence,
        Error::Budget(_) => TprStatus::Budget,
        Error::Regime(_) => TprStatus::Regime,
        _ => TprStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status and last-error
/// message.
fn guard(f: impl FnOnce() -> Result<(), (TprStatus, String)>) -> TprStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TprStatus::Ok
        }
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            TprStatus::Panic
        }
    }
}

fn lib<T>(r: tpr::Result<T>) -> Result<T, (TprStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (TprStatus, String) {
    (TprStatus::NullPointer, format!("{what} is null"))
}

/// Copies `src` into `dst[..len]` and stores the full length in `needed`.
unsafe fn fill<T: Copy>(src: &[T], dst: *mut T, len: usize, needed: *mut usize) -> Result<(), (TprStatus, String)> {
    if !needed.is_null() {
        *needed = src.len();
    }
    if len < src.len() {
        return Err((TprStatus::BufferTooSmall, format!("buffer holds {len}, need {}", src.len())));
    }
    if src.is_empty() {
        return Ok(());
    }
    if dst.is_null() {
        return Err(null("output buffer"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Message for the most recent failed call on this thread; empty after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn tpr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tpr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Homogeneous `n_qubits`-qubit model `ω a†a + (ω_q/2)Σσ_z + (g/N)Σσ_x(a²+a†²)`
/// in natural units, truncated at `cutoff` bosons.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn tpr_model_new(
    n_qubits: usize,
    omega: f64,
    omega_q: f64,
    g: f64,
    cutoff: usize,
    out: *mut *mut TprModel,
) -> TprStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if n_qubits == 0 {
            return Err((TprStatus::InvalidArgument, "n_qubits must be at least 1".into()));
        }
        let mut params = EffectiveParams::dicke(n_qubits, omega_q, g);
        params.omega = omega;
        lib(params.validate())?;
        let spec = lib(HilbertSpec::new(n_qubits, cutoff))?;
        *out = Box::into_raw(Box::new(TprModel { params, spec }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from `tpr_model_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tpr_model_free(model: *mut TprModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Hilbert-space dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tpr_model_dim(model: *const TprModel) -> usize {
    model.as_ref().map_or(0, |m| m.spec.dim())
}

fn parity_code(l: ParityLabel) -> TprParity {
    match l {
        ParityLabel::PlusOne => TprParity::PlusOne,
        ParityLabel::MinusOne => TprParity::MinusOne,
        ParityLabel::PlusI => TprParity::PlusI,
        ParityLabel::MinusI => TprParity::MinusI,
    }
}

/// Lowest `k` eigenvalues with their generalized-parity labels. Both
/// buffers must hold `k` entries; `labels` may be null.
///
/// # Safety
/// `model` must be a live handle; `energies` must point to `k` writable
/// doubles and `labels`, if non-null, to `k` writable `TprParity` values.
#[no_mangle]
pub unsafe extern "C" fn tpr_model_spectrum(
    model: *const TprModel,
    k: usize,
    energies: *mut f64,
    labels: *mut TprParity,
) -> TprStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if k == 0 || k > m.spec.dim() {
            return Err((TprStatus::InvalidArgument, format!("k must be in 1..={}", m.spec.dim())));
        }
        if energies.is_null() {
            return Err(null("energies"));
        }
        let h = lib(build_dicke(&m.params, m.spec))?;
        let es = lib(eigensystem(&h, k, &build_parity(m.spec)))?;
        fill(&es.values, energies, k, ptr::null_mut())?;
        if !labels.is_null() {
            let l: Vec<TprParity> = es.labels.iter().map(|c| parity_code(c.label)).collect();
            fill(&l, labels, k, ptr::null_mut())?;
        }
        Ok(())
    })
}

/// Evolves the product state `|q_1 … q_N, n⟩` on `samples` evenly spaced
/// times in `[0, t_end]`. `qubits[i]` is 0 for excited and 1 for ground.
///
/// # Safety
/// `model` must be a live handle, `qubits` must point to `n_qubits`
/// bytes and `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn tpr_model_evolve(
    model: *const TprModel,
    qubits: *const u8,
    n: usize,
    t_end: f64,
    samples: usize,
    out: *mut *mut TprTrace,
) -> TprStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if qubits.is_null() {
            return Err(null("qubits"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        if samples < 2 || !(t_end > 0.0) {
            return Err((TprStatus::InvalidArgument, "need t_end > 0 and samples >= 2".into()));
        }
        let raw = std::slice::from_raw_parts(qubits, m.spec.n_qubits);
        let q: Vec<Qubit> = raw
            .iter()
            .map(|&b| match b {
                0 => Ok(Qubit::Excited),
                1 => Ok(Qubit::Ground),
                _ => Err((TprStatus::InvalidArgument, format!("qubit code {b} is not 0 or 1"))),
            })
            .collect::<Result<_, _>>()?;
        let h = lib(build_dicke(&m.params, m.spec))?;
        let psi0 = lib(QuantumState::basis(m.spec, &q, n))?;
        let obs = lib(Observable::standard_set(m.spec, Some((&q, n))))?;
        let opts = EvolveOptions {
            store_states: false,
            ..EvolveOptions::default()
        };
        let result = lib(evolve_const(&h, &psi0, &linspace(0.0, t_end, samples), ConstMethod::Eig, &opts, &obs))?;
        *out = Box::into_raw(Box::new(TprTrace { result }));
        Ok(())
    })
}

/// # Safety
/// `trace` must be null or a handle from `tpr_model_evolve` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tpr_trace_free(trace: *mut TprTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tpr_trace_len(trace: *const TprTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.result.times.len())
}

/// Sample times. `needed` (nullable) receives the sample count.
///
/// # Safety
/// `trace` must be a live handle and `buf` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn tpr_trace_times(trace: *const TprTrace, buf: *mut f64, len: usize, needed: *mut usize) -> TprStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        fill(&t.result.times, buf, len, needed)
    })
}

/// Values of the observable `name`: `n` (photon number), `sz1` … (qubit
/// inversions), `excitations`, or the tracked population such as `P_g2`.
///
/// # Safety
/// `trace` must be a live handle, `name` a NUL-terminated string and `buf`
/// must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tpr_trace_observable(
    trace: *const TprTrace,
    name: *const c_char,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> TprStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name).to_str().map_err(|_| (TprStatus::InvalidArgument, "name is not UTF-8".into()))?;
        let values = t
            .result
            .observable(name)
            .ok_or_else(|| (TprStatus::InvalidArgument, format!("no observable {name:?}")))?;
        fill(values, buf, len, needed)
    })
}

/// Spectral class of the single-qubit model at coupling `g`, and the
/// normalizability margin `1 − |γ|` (0 unless the spectrum is discrete).
///
/// # Safety
/// `class_out` and `margin_out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn tpr_classify(g: f64, omega: f64, class_out: *mut TprSpectrumClass, margin_out: *mut f64) -> TprStatus {
    guard(|| {
        let m = lib(tpr::bargmann::classify_model(g, omega))?;
        if !class_out.is_null() {
            *class_out = match m.classification {
                tpr::bargmann::SpectrumClass::Discrete => TprSpectrumClass::Discrete,
                tpr::bargmann::SpectrumClass::Collapse => TprSpectrumClass::Collapse,
                tpr::bargmann::SpectrumClass::ContinuousUnbounded => TprSpectrumClass::ContinuousUnbounded,
            };
        }
        if !margin_out.is_null() {
            *margin_out = m.margin;
        }
        Ok(())
    })
}
