//! C ABI over the scsat library.
//!
//! Every function returns an integer status (`SCSAT_OK` on success) and
//! writes results through out-pointers. Objects are opaque handles created
//! by `*_new` functions and released by the matching `*_free`. After a
//! failure, `scsat_last_error` returns a message for the calling thread.
//! Panics never cross the boundary; they become `SCSAT_ERR_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use scsat::bicm::{
    bicm_system, build_exit_chart, cm_capacity, rate_loss, BicmModel, DemodTable, ExitChart, MapDecoder, Preset, RateLoss,
    RegularEnsemble,
};
use scsat::de::{de_run_with, find_fixed_points, saturation_check, DeOptions};
use scsat::interleaver::ScInterleaver;
use scsat::potential::{potential_threshold, unique_min_predicate, ThresholdOptions};
use scsat::system::SystemFunctions;
use scsat::Error;

pub const SCSAT_OK: i32 = 0;
pub const SCSAT_ERR_NULL: i32 = 1;
pub const SCSAT_ERR_PARAMETER: i32 = 2;
pub const SCSAT_ERR_RANGE: i32 = 3;
pub const SCSAT_ERR_MODEL: i32 = 4;
pub const SCSAT_ERR_NUMERIC: i32 = 5;
pub const SCSAT_ERR_CONFIG: i32 = 6;
pub const SCSAT_ERR_IO: i32 = 7;
pub const SCSAT_ERR_BUFFER: i32 = 8;
pub const SCSAT_ERR_PANIC: i32 = 9;

/// A (φ, ψ) system.
pub struct ScsatSystem {
    inner: SystemFunctions,
}

/// An EXIT chart with its rate-loss decomposition.
pub struct ScsatExitChart {
    chart: ExitChart,
    loss: RateLoss,
}

pub struct ScsatInterleaver {
    inner: ScInterleaver,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) => SCSAT_ERR_PARAMETER,
        Error::Range(_) => SCSAT_ERR_RANGE,
        Error::Model(_) => SCSAT_ERR_MODEL,
        Error::Config(_) => SCSAT_ERR_CONFIG,
        Error::Io(_) => SCSAT_ERR_IO,
        _ => SCSAT_ERR_NUMERIC,
    }
}

struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(code(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SCSAT_ERR_NULL, format!("{what} is null"))
}

/// Runs `f`, records any failure and converts it to a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SCSAT_OK,
        Ok(Err(Fail(c, msg))) => {
            set_error(msg);
            c
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SCSAT_ERR_PANIC
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SCSAT_ERR_PARAMETER, format!("{what} is not UTF-8")))
}

fn boxed<T>(slot: &mut *mut T, value: T) {
    *slot = Box::into_raw(Box::new(value));
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn scsat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn scsat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Regular (l, r) LDPC ensemble over the BEC with erasure probability eps.
#[no_mangle]
pub unsafe extern "C" fn scsat_system_bec_new(l: usize, r: usize, eps: f64, result: *mut *mut ScsatSystem) -> i32 {
    guard(|| {
        let slot = out(result, "result")?;
        boxed(slot, ScsatSystem { inner: SystemFunctions::bec_regular(l, r, eps)? });
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn scsat_system_identity_new(result: *mut *mut ScsatSystem) -> i32 {
    guard(|| {
        boxed(out(result, "result")?, ScsatSystem { inner: SystemFunctions::identity() });
        Ok(())
    })
}

/// BICM system for a 16-QAM preset ("gray", "natural", "set-partition",
/// "id-optimized") with a regular (l, r) decoder. `smoothing` <= 0 keeps
/// the unsmoothed decoder curve.
#[no_mangle]
pub unsafe extern "C" fn scsat_system_bicm_new(
    mapping: *const c_char,
    snr_db: f64,
    l: usize,
    r: usize,
    smoothing: f64,
    result: *mut *mut ScsatSystem,
) -> i32 {
    guard(|| {
        let slot = out(result, "result")?;
        let preset: Preset = text(mapping, "mapping")?.parse()?;
        let model = BicmModel::new(preset.constellation(), snr_db);
        let n = (smoothing > 0.0).then_some(smoothing);
        boxed(slot, ScsatSystem { inner: bicm_system(&model, RegularEnsemble::new(l, r)?, n)? });
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn scsat_system_free(system: *mut ScsatSystem) {
    free(system);
}

/// Largest and BP fixed points of u = φ₀(ψ₀(u)).
#[no_mangle]
pub unsafe extern "C" fn scsat_fixed_points(system: *const ScsatSystem, u_opt: *mut f64, u_bp: *mut f64) -> i32 {
    guard(|| {
        let s = handle(system, "system")?;
        let (a, b) = (out(u_opt, "u_opt")?, out(u_bp, "u_bp")?);
        let fp = find_fixed_points(&s.inner, 4096, 1e-12)?;
        *a = fp.u_opt;
        *b = fp.u_bp;
        Ok(())
    })
}

/// Runs coupled DE with L = `sections`, width `w`, and copies the final
/// u profile into `u_out` (length at least `sections`). `saturated` is set
/// to 1 when min u ≥ u_opt − delta.
#[no_mangle]
pub unsafe extern "C" fn scsat_de_run(
    system: *const ScsatSystem,
    sections: usize,
    w: usize,
    max_iter: usize,
    delta: f64,
    u_out: *mut f64,
    u_len: usize,
    saturated: *mut i32,
) -> i32 {
    guard(|| {
        let s = handle(system, "system")?;
        let sat = out(saturated, "saturated")?;
        if u_out.is_null() {
            return Err(null("u_out"));
        }
        if u_len < sections {
            return Err(Fail(SCSAT_ERR_BUFFER, format!("u_out holds {u_len} values, need {sections}")));
        }
        let fp = find_fixed_points(&s.inner, 4096, 1e-12)?;
        let opts = DeOptions { max_iter, ..DeOptions::default() };
        let run = de_run_with(&s.inner, sections, w, fp.v_opt, &opts)?;
        std::slice::from_raw_parts_mut(u_out, sections).copy_from_slice(&run.state.u);
        *sat = saturation_check(&run.state, &fp, delta) as i32;
        Ok(())
    })
}

/// Sets `unique` to 1 when u_opt is the unique global minimizer of the
/// potential on an `n_grid`-point grid.
#[no_mangle]
pub unsafe extern "C" fn scsat_potential_unique_min(system: *const ScsatSystem, n_grid: usize, unique: *mut i32) -> i32 {
    guard(|| {
        let s = handle(system, "system")?;
        let u = out(unique, "unique")?;
        let opts = ThresholdOptions { n_grid, ..ThresholdOptions::default() };
        *u = unique_min_predicate(&s.inner, &opts)? as i32;
        Ok(())
    })
}

/// Erasure probability where u_opt stops being the unique global
/// minimizer for the regular (l, r) ensemble, bisected in [lo, hi].
#[no_mangle]
pub unsafe extern "C" fn scsat_potential_threshold_bec(
    l: usize,
    r: usize,
    lo: f64,
    hi: f64,
    tol: f64,
    eps: *mut f64,
) -> i32 {
    guard(|| {
        let e = out(eps, "eps")?;
        let opts = ThresholdOptions { theta_tol: tol, ..ThresholdOptions::default() };
        *e = potential_threshold(|t| SystemFunctions::bec_regular(l, r, t), lo, hi, &opts)?;
        Ok(())
    })
}

/// BP and MAP erasure thresholds of the regular (l, r) ensemble.
#[no_mangle]
pub unsafe extern "C" fn scsat_ensemble_thresholds(l: usize, r: usize, eps_bp: *mut f64, eps_map: *mut f64) -> i32 {
    guard(|| {
        let (bp, map) = (out(eps_bp, "eps_bp")?, out(eps_map, "eps_map")?);
        let e = RegularEnsemble::new(l, r)?;
        *bp = e.bp_threshold().0;
        *map = e.map_threshold()?.0;
        Ok(())
    })
}

/// Coded-modulation capacity of a 16-QAM preset in bits per symbol.
#[no_mangle]
pub unsafe extern "C" fn scsat_cm_capacity(mapping: *const c_char, snr_db: f64, capacity: *mut f64) -> i32 {
    guard(|| {
        let c = out(capacity, "capacity")?;
        let preset: Preset = text(mapping, "mapping")?.parse()?;
        *c = cm_capacity(&BicmModel::new(preset.constellation(), snr_db))?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn scsat_exit_chart_new(
    mapping: *const c_char,
    snr_db: f64,
    l: usize,
    r: usize,
    result: *mut *mut ScsatExitChart,
) -> i32 {
    guard(|| {
        let slot = out(result, "result")?;
        let preset: Preset = text(mapping, "mapping")?.parse()?;
        let ens = RegularEnsemble::new(l, r)?;
        let table = DemodTable::new(&BicmModel::new(preset.constellation(), snr_db))?;
        let chart = build_exit_chart(&table, &MapDecoder::new(ens)?, 200)?;
        let loss = rate_loss(&chart, ens.rate());
        boxed(slot, ScsatExitChart { chart, loss });
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn scsat_exit_chart_free(chart: *mut ScsatExitChart) {
    free(chart);
}

/// Areas S_t, S_m, S_b and the rate-loss residual
/// C_CM − Qr − QS_b − Q(S_t − S_m).
#[no_mangle]
pub unsafe extern "C" fn scsat_exit_chart_areas(
    chart: *const ScsatExitChart,
    s_t: *mut f64,
    s_m: *mut f64,
    s_b: *mut f64,
    residual: *mut f64,
) -> i32 {
    guard(|| {
        let c = handle(chart, "chart")?;
        *out(s_t, "s_t")? = c.chart.s_t;
        *out(s_m, "s_m")? = c.chart.s_m;
        *out(s_b, "s_b")? = c.chart.s_b;
        *out(residual, "residual")? = c.loss.residual;
        Ok(())
    })
}

/// Sets `count` to the number of crossings and copies them into the
/// arrays, ordered by z. `stable` entries are 1 or 0. With `cap` = 0 the
/// arrays may be null and only the count is returned; a nonzero `cap`
/// below the count fills the arrays and returns `SCSAT_ERR_BUFFER`.
#[no_mangle]
pub unsafe extern "C" fn scsat_exit_chart_crossings(
    chart: *const ScsatExitChart,
    z: *mut f64,
    u: *mut f64,
    stable: *mut i32,
    cap: usize,
    count: *mut usize,
) -> i32 {
    guard(|| {
        let c = handle(chart, "chart")?;
        let n = out(count, "count")?;
        let xs = &c.chart.crossings;
        *n = xs.len();
        if cap > 0 && (z.is_null() || u.is_null() || stable.is_null()) {
            return Err(null("crossing buffer"));
        }
        for (k, x) in xs.iter().take(cap).enumerate() {
            *z.add(k) = x.z;
            *u.add(k) = x.u;
            *stable.add(k) = x.stable as i32;
        }
        if cap < xs.len() && cap > 0 {
            return Err(Fail(SCSAT_ERR_BUFFER, format!("{} crossings, buffers hold {cap}", xs.len())));
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn scsat_interleaver_new(
    sections: usize,
    w: usize,
    m: usize,
    seed: u64,
    result: *mut *mut ScsatInterleaver,
) -> i32 {
    guard(|| {
        let slot = out(result, "result")?;
        boxed(slot, ScsatInterleaver { inner: ScInterleaver::build(sections, w, m, seed)? });
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn scsat_interleaver_free(il: *mut ScsatInterleaver) {
    free(il);
}

/// (bit, section) ↦ (bit_out, section_out).
#[no_mangle]
pub unsafe extern "C" fn scsat_interleaver_forward(
    il: *const ScsatInterleaver,
    bit: usize,
    section: usize,
    bit_out: *mut usize,
    section_out: *mut usize,
) -> i32 {
    guard(|| {
        let i = handle(il, "interleaver")?;
        let (b, s) = i.inner.forward(bit, section)?;
        *out(bit_out, "bit_out")? = b;
        *out(section_out, "section_out")? = s;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn scsat_interleaver_inverse(
    il: *const ScsatInterleaver,
    bit: usize,
    section: usize,
    bit_out: *mut usize,
    section_out: *mut usize,
) -> i32 {
    guard(|| {
        let i = handle(il, "interleaver")?;
        let (b, s) = i.inner.inverse(bit, section)?;
        *out(bit_out, "bit_out")? = b;
        *out(section_out, "section_out")? = s;
        Ok(())
    })
}

/// Largest minus smallest per-offset bit count; 0 means exactly uniform.
#[no_mangle]
pub unsafe extern "C" fn scsat_interleaver_max_deviation(il: *const ScsatInterleaver, deviation: *mut usize) -> i32 {
    guard(|| {
        let i = handle(il, "interleaver")?;
        *out(deviation, "deviation")? = i.inner.verify_uniformity().max_deviation;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_status_codes() {
        assert_eq!(guard(|| panic!("boom")), SCSAT_ERR_PANIC);
        let msg = unsafe { CStr::from_ptr(scsat_last_error()) }.to_str().unwrap();
        assert_eq!(msg, "panic: boom");
        assert_eq!(guard(|| Ok(())), SCSAT_OK);
    }

    #[test]
    fn error_kinds_map_to_codes() {
        assert_eq!(code(&Error::Parameter(String::new())), SCSAT_ERR_PARAMETER);
        assert_eq!(code(&Error::Numeric(String::new())), SCSAT_ERR_NUMERIC);
        assert_eq!(code(&Error::Bracketing(String::new())), SCSAT_ERR_NUMERIC);
        assert_eq!(code(&Error::Config(String::new())), SCSAT_ERR_CONFIG);
    }
}
