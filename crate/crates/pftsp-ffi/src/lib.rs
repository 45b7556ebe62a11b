//! C ABI for the penalty-free variational TSP solver.
//!
//! Conventions: opaque handles, integer status codes, caller-allocated
//! output buffers sized from `pf_instance_n` / `pf_bit_length`, and
//! Rust-allocated strings released through [`pf_string_free`]. Solver runs
//! accept an optional configuration JSON and return the full run record as
//! JSON. On any non-zero status, [`pf_last_error_message`] carries the
//! detail for the current thread.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use libc::c_char;

use pftsp::bench::monte_carlo;
use pftsp::codec::{bit_length, BitString, CodecKind, CodecSpec};
use pftsp::ml::{run_ml, MlConfig};
use pftsp::optimizer::{estimate_runtime, run_vqa, VqaConfig};
use pftsp::qsim::build_circuit;
use pftsp::tsp::{
    brute_force_optimum, greedy_nearest_neighbour, load_instance, tour_length, Cycle, TspInstance,
};
use pftsp::Error;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Invalid configuration or argument values.
    Config = 2,
    /// A resource budget (dense statevector, enumeration size) was exceeded.
    Resource = 3,
    /// Malformed input data or a domain error.
    Data = 4,
    /// A panic was caught at the boundary.
    Panic = 5,
}

/// Codec selector mirrored into the header.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfCodec {
    NonFactorial = 0,
    Factorial = 1,
}

impl From<PfCodec> for CodecKind {
    fn from(c: PfCodec) -> CodecKind {
        match c {
            PfCodec::NonFactorial => CodecKind::NonFactorial,
            PfCodec::Factorial => CodecKind::Factorial,
        }
    }
}

/// Opaque problem instance.
pub struct PfInstance {
    inner: TspInstance,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> PfStatus {
    match err.exit_code() {
        2 => PfStatus::Config,
        3 => PfStatus::Resource,
        _ => PfStatus::Data,
    }
}

fn fail(err: Error) -> PfStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

/// Run `f` behind a panic guard, storing the message on failure.
fn guarded(f: impl FnOnce() -> PfStatus) -> PfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("panic at the ffi boundary".into());
            PfStatus::Panic
        }
    }
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, PfStatus> {
    if ptr.is_null() {
        set_error("null string argument".into());
        return Err(PfStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8".into());
        PfStatus::Config
    })
}

fn string_out(s: String, out: *mut *mut c_char) -> PfStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            PfStatus::Ok
        }
        Err(_) => {
            set_error("output contained an interior NUL".into());
            PfStatus::Data
        }
    }
}

/// Last error message for this thread, or null. Caller frees the string via
/// [`pf_string_free`].
#[no_mangle]
pub extern "C" fn pf_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        Some(c) => c.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be a pointer previously returned by a `pftsp` function and not
/// yet freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Load an instance from a coordinate CSV ("x,y" per line).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_instance_load(
    path: *const c_char,
    out: *mut *mut PfInstance,
) -> PfStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer".into());
            return PfStatus::NullArgument;
        }
        let path = match cstr_arg(path) {
            Ok(p) => PathBuf::from(p),
            Err(s) => return s,
        };
        match load_instance(&path) {
            Ok(inst) => {
                *out = Box::into_raw(Box::new(PfInstance { inner: inst }));
                PfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Generate a uniform random instance on the 100 x 100 square.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_instance_random(
    n: u32,
    seed: u64,
    out: *mut *mut PfInstance,
) -> PfStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer".into());
            return PfStatus::NullArgument;
        }
        match TspInstance::random(n as usize, seed) {
            Ok(inst) => {
                *out = Box::into_raw(Box::new(PfInstance { inner: inst }));
                PfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Release an instance handle.
///
/// # Safety
/// `inst` must come from an instance constructor and not be freed twice;
/// null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pf_instance_free(inst: *mut PfInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Location count, or 0 for a null handle.
///
/// # Safety
/// `inst` must be a live instance handle or null.
#[no_mangle]
pub unsafe extern "C" fn pf_instance_n(inst: *const PfInstance) -> u32 {
    if inst.is_null() {
        return 0;
    }
    (*inst).inner.n() as u32
}

/// Distance between two locations.
///
/// # Safety
/// `inst` must be a live instance handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_instance_distance(
    inst: *const PfInstance,
    u: u32,
    v: u32,
    out: *mut f64,
) -> PfStatus {
    guarded(|| {
        if inst.is_null() || out.is_null() {
            set_error("null argument".into());
            return PfStatus::NullArgument;
        }
        let n = (*inst).inner.n() as u32;
        if u >= n || v >= n {
            set_error(format!("location out of range: {u},{v} with n={n}"));
            return PfStatus::Data;
        }
        *out = (*inst).inner.dist(u as usize, v as usize);
        PfStatus::Ok
    })
}

unsafe fn order_arg(order: *const u32, n: usize) -> Result<Cycle, PfStatus> {
    if order.is_null() {
        set_error("null order pointer".into());
        return Err(PfStatus::NullArgument);
    }
    let slice = std::slice::from_raw_parts(order, n);
    Cycle::new(slice.iter().map(|&v| v as usize).collect()).map_err(|e| {
        let s = status_of(&e);
        set_error(e.to_string());
        s
    })
}

unsafe fn write_order(cycle: &Cycle, out: *mut u32) {
    let slice = std::slice::from_raw_parts_mut(out, cycle.len());
    for (slot, &loc) in slice.iter_mut().zip(cycle.order()) {
        *slot = loc as u32;
    }
}

/// Closed-tour length of a visiting order (`n` entries starting at 0).
///
/// # Safety
/// `order` must point to `n` readable entries; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf_tour_length(
    inst: *const PfInstance,
    order: *const u32,
    out: *mut f64,
) -> PfStatus {
    guarded(|| {
        if inst.is_null() || out.is_null() {
            set_error("null argument".into());
            return PfStatus::NullArgument;
        }
        let n = (*inst).inner.n();
        let cycle = match order_arg(order, n) {
            Ok(c) => c,
            Err(s) => return s,
        };
        match tour_length(&(*inst).inner, &cycle) {
            Ok(d) => {
                *out = d;
                PfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Exact optimum; writes `n` entries to `out_order`.
///
/// # Safety
/// `out_order` must have room for `n` entries; `out_distance` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf_brute_force_optimum(
    inst: *const PfInstance,
    out_order: *mut u32,
    out_distance: *mut f64,
) -> PfStatus {
    guarded(|| {
        if inst.is_null() || out_order.is_null() || out_distance.is_null() {
            set_error("null argument".into());
            return PfStatus::NullArgument;
        }
        match brute_force_optimum(&(*inst).inner) {
            Ok((cycle, d)) => {
                write_order(&cycle, out_order);
                *out_distance = d;
                PfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Greedy nearest-neighbour tour; writes `n` entries to `out_order`.
///
/// # Safety
/// `out_order` must have room for `n` entries; `out_distance` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf_greedy(
    inst: *const PfInstance,
    out_order: *mut u32,
    out_distance: *mut f64,
) -> PfStatus {
    guarded(|| {
        if inst.is_null() || out_order.is_null() || out_distance.is_null() {
            set_error("null argument".into());
            return PfStatus::NullArgument;
        }
        let (cycle, d) = greedy_nearest_neighbour(&(*inst).inner);
        write_order(&cycle, out_order);
        *out_distance = d;
        PfStatus::Ok
    })
}

/// Required word length for a codec at `n` locations.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_bit_length(codec: PfCodec, n: u32, out: *mut u32) -> PfStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer".into());
            return PfStatus::NullArgument;
        }
        match bit_length(codec.into(), n as usize) {
            Ok(len) => {
                *out = len as u32;
                PfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Decode an ASCII '0'/'1' word into a visiting order of `n` entries.
///
/// # Safety
/// `word` must be NUL-terminated; `out_order` must have room for `n` entries.
#[no_mangle]
pub unsafe extern "C" fn pf_decode(
    codec: PfCodec,
    gray: bool,
    n: u32,
    word: *const c_char,
    out_order: *mut u32,
) -> PfStatus {
    guarded(|| {
        if out_order.is_null() {
            set_error("null output pointer".into());
            return PfStatus::NullArgument;
        }
        let word = match cstr_arg(word) {
            Ok(w) => w,
            Err(s) => return s,
        };
        let spec = CodecSpec::new(codec.into(), gray, n as usize);
        let parsed = match BitString::parse(word) {
            Ok(b) => b,
            Err(e) => return fail(e),
        };
        match spec.decode(&parsed) {
            Ok(cycle) => {
                write_order(&cycle, out_order);
                PfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Encode a visiting order into a word that decodes back to it. The returned
/// string is freed with [`pf_string_free`].
///
/// # Safety
/// `order` must point to `n` readable entries; `out_word` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf_encode(
    codec: PfCodec,
    gray: bool,
    n: u32,
    order: *const u32,
    out_word: *mut *mut c_char,
) -> PfStatus {
    guarded(|| {
        if out_word.is_null() {
            set_error("null output pointer".into());
            return PfStatus::NullArgument;
        }
        let cycle = match order_arg(order, n as usize) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let spec = CodecSpec::new(codec.into(), gray, n as usize);
        match spec.encode(&cycle) {
            Ok(word) => string_out(word.to_string(), out_word),
            Err(e) => fail(e),
        }
    })
}

/// Uniform random-word baseline with the given draw budget; writes the best
/// order found and its distance.
///
/// # Safety
/// `out_order` must have room for `n` entries; `out_distance` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf_monte_carlo(
    inst: *const PfInstance,
    codec: PfCodec,
    gray: bool,
    budget: u64,
    seed: u64,
    out_order: *mut u32,
    out_distance: *mut f64,
) -> PfStatus {
    guarded(|| {
        if inst.is_null() || out_order.is_null() || out_distance.is_null() {
            set_error("null argument".into());
            return PfStatus::NullArgument;
        }
        let spec = CodecSpec::new(codec.into(), gray, (*inst).inner.n());
        match monte_carlo(&(*inst).inner, &spec, budget, seed) {
            Ok((cycle, d)) => {
                write_order(&cycle, out_order);
                *out_distance = d;
                PfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Run the variational solver. `config_json` is an optional `VqaConfig`
/// document (null for the tuned defaults); the run record is returned as
/// JSON in `out_record_json`, freed with [`pf_string_free`].
///
/// # Safety
/// `config_json` must be NUL-terminated or null; `out_record_json` valid.
#[no_mangle]
pub unsafe extern "C" fn pf_solve_vqa(
    inst: *const PfInstance,
    circuit: u8,
    codec: PfCodec,
    gray: bool,
    config_json: *const c_char,
    seed: u64,
    out_record_json: *mut *mut c_char,
) -> PfStatus {
    guarded(|| {
        if inst.is_null() || out_record_json.is_null() {
            set_error("null argument".into());
            return PfStatus::NullArgument;
        }
        let cfg: VqaConfig = if config_json.is_null() {
            VqaConfig::default()
        } else {
            let text = match cstr_arg(config_json) {
                Ok(t) => t,
                Err(s) => return s,
            };
            match serde_json::from_str(text) {
                Ok(c) => c,
                Err(e) => {
                    set_error(format!("bad config JSON: {e}"));
                    return PfStatus::Config;
                }
            }
        };
        let spec = CodecSpec::new(codec.into(), gray, (*inst).inner.n());
        let record = spec
            .bit_length()
            .and_then(|q| build_circuit(circuit, q))
            .and_then(|circuit| run_vqa(&(*inst).inner, &circuit, &spec, &cfg, seed));
        match record {
            Ok(rec) => match serde_json::to_string(&rec) {
                Ok(json) => string_out(json, out_record_json),
                Err(e) => {
                    set_error(format!("serializing run record: {e}"));
                    PfStatus::Data
                }
            },
            Err(e) => fail(e),
        }
    })
}

/// Run the classical ML solver. `config_json` is an optional `MlConfig`
/// document (null for the tuned defaults); the run record is returned as
/// JSON in `out_record_json`, freed with [`pf_string_free`].
///
/// # Safety
/// `config_json` must be NUL-terminated or null; `out_record_json` valid.
#[no_mangle]
pub unsafe extern "C" fn pf_solve_ml(
    inst: *const PfInstance,
    codec: PfCodec,
    gray: bool,
    config_json: *const c_char,
    seed: u64,
    out_record_json: *mut *mut c_char,
) -> PfStatus {
    guarded(|| {
        if inst.is_null() || out_record_json.is_null() {
            set_error("null argument".into());
            return PfStatus::NullArgument;
        }
        let cfg: MlConfig = if config_json.is_null() {
            MlConfig::default()
        } else {
            let text = match cstr_arg(config_json) {
                Ok(t) => t,
                Err(s) => return s,
            };
            match serde_json::from_str(text) {
                Ok(c) => c,
                Err(e) => {
                    set_error(format!("bad config JSON: {e}"));
                    return PfStatus::Config;
                }
            }
        };
        let spec = CodecSpec::new(codec.into(), gray, (*inst).inner.n());
        match run_ml(&(*inst).inner, &spec, &cfg, seed) {
            Ok(rec) => match serde_json::to_string(&rec) {
                Ok(json) => string_out(json, out_record_json),
                Err(e) => {
                    set_error(format!("serializing run record: {e}"));
                    PfStatus::Data
                }
            },
            Err(e) => fail(e),
        }
    })
}

/// Projected hardware completion time in seconds: `4 * I * n_shot * t_shot`.
#[no_mangle]
pub extern "C" fn pf_estimate_runtime(iterations: u64, shots: u64, t_shot: f64) -> f64 {
    estimate_runtime(iterations, shots, t_shot)
}
