//! C ABI over the dyadic toolkit: opaque handles, integer status codes, and
//! a thread-local error message. Rationals cross the boundary as
//! numerator/denominator pairs; grids as flat `double` buffers.
//!
//! Ownership: every `*_new`/`*_build` hands back a pointer owned by the
//! caller, released with the matching `*_free`. Handles are immutable after
//! creation and safe to share across threads.

use mfrac::geometry::{Rat, RootSystem, Shift};
use mfrac::grid::{discretize_power, GridFunction};
use mfrac::sharpness::{run_experiment, ExperimentConfig, Theorem};
use mfrac::weights::{a_infty_constant, a_pq_constant, CubeFamily, WeightVector};
use mfrac::ExponentData;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::sync::Arc;

/// Status code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum MfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Failed = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

fn fail(e: impl std::fmt::Display) -> MfStatus {
    set_error(&e.to_string());
    MfStatus::Failed
}

/// Message of the most recent failure on this thread; valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn mf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static version string of the underlying library.
#[no_mangle]
pub extern "C" fn mf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Finite analysis window: root box with its dyadic mesh.
pub struct MfSystem(Arc<RootSystem>);
/// Nonnegative cell-constant function on a system's mesh.
pub struct MfGrid(GridFunction);
/// Lebesgue exponents of one operator setup.
pub struct MfExponents(ExponentData);
/// A weight vector with its derived conjugate and product weights.
pub struct MfWeights(WeightVector);
/// Stopping-time sparse family.
pub struct MfSparse(mfrac::SparseFamily);

macro_rules! nonnull {
    ($p:expr) => {
        match unsafe { $p.as_ref() } {
            Some(r) => r,
            None => {
                set_error("null argument");
                return MfStatus::NullArgument;
            }
        }
    };
}

macro_rules! out_ptr {
    ($p:expr) => {
        match unsafe { $p.as_mut() } {
            Some(r) => r,
            None => {
                set_error("null output pointer");
                return MfStatus::NullArgument;
            }
        }
    };
}

fn rational(num: i64, den: i64) -> Result<Rat, MfStatus> {
    if den == 0 {
        set_error("zero denominator");
        return Err(MfStatus::InvalidArgument);
    }
    Ok(Rat::new(num as i128, den as i128))
}

/// Create a system with root `[corner_i, corner_i + side)^n` and mesh level
/// `max_level`.
///
/// # Safety
/// `corner` must point to `n` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_system_new(
    corner: *const i64,
    n: usize,
    side: i64,
    max_level: u32,
    out: *mut *mut MfSystem,
) -> MfStatus {
    let out = out_ptr!(out);
    if corner.is_null() || n == 0 {
        set_error("corner must point to n >= 1 values");
        return MfStatus::NullArgument;
    }
    let corner = unsafe { std::slice::from_raw_parts(corner, n) }.to_vec();
    match RootSystem::new(corner, side, max_level) {
        Ok(sys) => {
            *out = Box::into_raw(Box::new(MfSystem(sys)));
            MfStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `sys` must come from `mf_system_new` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mf_system_free(sys: *mut MfSystem) {
    if !sys.is_null() {
        drop(unsafe { Box::from_raw(sys) });
    }
}

/// Total number of mesh cells of a system.
///
/// # Safety
/// `sys` must be a live system handle.
#[no_mangle]
pub unsafe extern "C" fn mf_system_num_cells(sys: *const MfSystem, out: *mut usize) -> MfStatus {
    let sys = nonnull!(sys);
    let out = out_ptr!(out);
    *out = sys.0.num_cells();
    MfStatus::Ok
}

/// Constant grid.
///
/// # Safety
/// `sys` live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_grid_constant(
    sys: *const MfSystem,
    value: f64,
    out: *mut *mut MfGrid,
) -> MfStatus {
    let sys = nonnull!(sys);
    let out = out_ptr!(out);
    if !(value.is_finite() && value >= 0.0) {
        set_error("grid values must be finite and nonnegative");
        return MfStatus::InvalidArgument;
    }
    *out = Box::into_raw(Box::new(MfGrid(GridFunction::constant(sys.0.clone(), value))));
    MfStatus::Ok
}

/// Radial power `|x|^{num/den}` discretized as exact cell averages.
///
/// # Safety
/// `sys` live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_grid_power(
    sys: *const MfSystem,
    num: i64,
    den: i64,
    out: *mut *mut MfGrid,
) -> MfStatus {
    let sys = nonnull!(sys);
    let out = out_ptr!(out);
    let a = match rational(num, den) {
        Ok(a) => a,
        Err(s) => return s,
    };
    match discretize_power(&sys.0, a) {
        Ok(g) => {
            *out = Box::into_raw(Box::new(MfGrid(g)));
            MfStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Grid from a caller buffer of `len` cell values (row-major).
///
/// # Safety
/// `values` must point to `len` readable doubles; `sys` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_grid_from_values(
    sys: *const MfSystem,
    values: *const f64,
    len: usize,
    out: *mut *mut MfGrid,
) -> MfStatus {
    let sys = nonnull!(sys);
    let out = out_ptr!(out);
    if values.is_null() {
        set_error("null value buffer");
        return MfStatus::NullArgument;
    }
    let vals = unsafe { std::slice::from_raw_parts(values, len) }.to_vec();
    match GridFunction::from_values(sys.0.clone(), vals) {
        Ok(g) => {
            *out = Box::into_raw(Box::new(MfGrid(g)));
            MfStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Copy a grid's cell values into a caller buffer of `len` doubles.
///
/// # Safety
/// `buffer` must hold `len` writable doubles; `grid` live.
#[no_mangle]
pub unsafe extern "C" fn mf_grid_copy_values(
    grid: *const MfGrid,
    buffer: *mut f64,
    len: usize,
) -> MfStatus {
    let grid = nonnull!(grid);
    if buffer.is_null() {
        set_error("null buffer");
        return MfStatus::NullArgument;
    }
    let vals = grid.0.values();
    if len != vals.len() {
        set_error("buffer length does not match the cell count");
        return MfStatus::InvalidArgument;
    }
    unsafe { std::ptr::copy_nonoverlapping(vals.as_ptr(), buffer, len) };
    MfStatus::Ok
}

/// Integral of a grid over the whole root.
///
/// # Safety
/// `grid` live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_grid_total(grid: *const MfGrid, out: *mut f64) -> MfStatus {
    let grid = nonnull!(grid);
    let out = out_ptr!(out);
    *out = grid.0.total();
    MfStatus::Ok
}

/// # Safety
/// `grid` from a grid constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mf_grid_free(grid: *mut MfGrid) {
    if !grid.is_null() {
        drop(unsafe { Box::from_raw(grid) });
    }
}

/// Homogeneous exponent data: `1/p_1 + ... + 1/p_m = 1/q + alpha/n` with `q`
/// derived. Rationals are numerator/denominator pairs.
///
/// # Safety
/// `p_num`/`p_den` point to `m` readable values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_exponents_homogeneous(
    n: u32,
    alpha_num: i64,
    alpha_den: i64,
    p_num: *const i64,
    p_den: *const i64,
    m: usize,
    out: *mut *mut MfExponents,
) -> MfStatus {
    let out = out_ptr!(out);
    if p_num.is_null() || p_den.is_null() || m == 0 {
        set_error("p must list m >= 1 rationals");
        return MfStatus::NullArgument;
    }
    let alpha = match rational(alpha_num, alpha_den) {
        Ok(a) => a,
        Err(s) => return s,
    };
    let nums = unsafe { std::slice::from_raw_parts(p_num, m) };
    let dens = unsafe { std::slice::from_raw_parts(p_den, m) };
    let mut p = Vec::with_capacity(m);
    for i in 0..m {
        match rational(nums[i], dens[i]) {
            Ok(r) => p.push(r),
            Err(s) => return s,
        }
    }
    match ExponentData::homogeneous(n, alpha, p) {
        Ok(e) => {
            *out = Box::into_raw(Box::new(MfExponents(e)));
            MfStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `e` from `mf_exponents_homogeneous`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mf_exponents_free(e: *mut MfExponents) {
    if !e.is_null() {
        drop(unsafe { Box::from_raw(e) });
    }
}

/// Power-law weight vector `w_i = |x|^{a_i}` with exactly discretized
/// conjugate and product weights.
///
/// # Safety
/// `a_num`/`a_den` point to `m` values matching the exponent slots.
#[no_mangle]
pub unsafe extern "C" fn mf_weights_from_powers(
    sys: *const MfSystem,
    exps: *const MfExponents,
    a_num: *const i64,
    a_den: *const i64,
    out: *mut *mut MfWeights,
) -> MfStatus {
    let sys = nonnull!(sys);
    let exps = nonnull!(exps);
    let out = out_ptr!(out);
    let m = exps.0.m();
    if a_num.is_null() || a_den.is_null() {
        set_error("null power buffers");
        return MfStatus::NullArgument;
    }
    let nums = unsafe { std::slice::from_raw_parts(a_num, m) };
    let dens = unsafe { std::slice::from_raw_parts(a_den, m) };
    let mut a = Vec::with_capacity(m);
    for i in 0..m {
        match rational(nums[i], dens[i]) {
            Ok(r) => a.push(r),
            Err(s) => return s,
        }
    }
    match WeightVector::from_powers(&sys.0, exps.0.clone(), &a) {
        Ok(wv) => {
            *out = Box::into_raw(Box::new(MfWeights(wv)));
            MfStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Weight vector from explicit grids (one per slot).
///
/// # Safety
/// `grids` points to `m` live grid handles on one system.
#[no_mangle]
pub unsafe extern "C" fn mf_weights_from_grids(
    exps: *const MfExponents,
    grids: *const *const MfGrid,
    out: *mut *mut MfWeights,
) -> MfStatus {
    let exps = nonnull!(exps);
    let out = out_ptr!(out);
    let m = exps.0.m();
    if grids.is_null() {
        set_error("null grid list");
        return MfStatus::NullArgument;
    }
    let handles = unsafe { std::slice::from_raw_parts(grids, m) };
    let mut ws = Vec::with_capacity(m);
    for &h in handles {
        match unsafe { h.as_ref() } {
            Some(g) => ws.push(g.0.clone()),
            None => {
                set_error("null grid handle");
                return MfStatus::NullArgument;
            }
        }
    }
    match WeightVector::new(exps.0.clone(), ws) {
        Ok(wv) => {
            *out = Box::into_raw(Box::new(MfWeights(wv)));
            MfStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `w` from a weights constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mf_weights_free(w: *mut MfWeights) {
    if !w.is_null() {
        drop(unsafe { Box::from_raw(w) });
    }
}

/// Multilinear Muckenhoupt-type characteristic over the full cube family
/// scanned down to `scan_level`.
///
/// # Safety
/// `w` live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_apq_constant(
    w: *const MfWeights,
    scan_level: i32,
    out: *mut f64,
) -> MfStatus {
    let w = nonnull!(w);
    let out = out_ptr!(out);
    if scan_level > w.0.system().max_level() {
        set_error("scan level finer than the mesh");
        return MfStatus::InvalidArgument;
    }
    let family = CubeFamily::all_shifts(w.0.system(), scan_level);
    match a_pq_constant(&w.0, &family) {
        Ok(v) => {
            *out = v;
            MfStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Fujii-Wilson constant of the slot's conjugate weight.
///
/// # Safety
/// `w` live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_a_infty_constant(
    w: *const MfWeights,
    slot: usize,
    scan_level: i32,
    out: *mut f64,
) -> MfStatus {
    let w = nonnull!(w);
    let out = out_ptr!(out);
    if slot >= w.0.m() || scan_level > w.0.system().max_level() {
        set_error("slot or scan level out of range");
        return MfStatus::InvalidArgument;
    }
    let family = CubeFamily::all_shifts(w.0.system(), scan_level);
    match a_infty_constant(w.0.sigma(slot), &family) {
        Ok(v) => {
            *out = v;
            MfStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Multilinear fractional maximal field of `m` grids.
///
/// # Safety
/// `grids` points to `m` live grids on one system; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_maximal_field(
    exps: *const MfExponents,
    grids: *const *const MfGrid,
    out: *mut *mut MfGrid,
) -> MfStatus {
    let exps = nonnull!(exps);
    let out = out_ptr!(out);
    if grids.is_null() {
        set_error("null grid list");
        return MfStatus::NullArgument;
    }
    let handles = unsafe { std::slice::from_raw_parts(grids, exps.0.m()) };
    let mut refs = Vec::with_capacity(handles.len());
    for &h in handles {
        match unsafe { h.as_ref() } {
            Some(g) => refs.push(&g.0),
            None => {
                set_error("null grid handle");
                return MfStatus::NullArgument;
            }
        }
    }
    match mfrac::operators::multilinear_maximal(&refs, &exps.0) {
        Ok(field) => {
            *out = Box::into_raw(Box::new(MfGrid(field)));
            MfStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Stopping-time sparse family of `m` grids on the grid selected by
/// `shift_bits` (bit `i` set: coordinate `i` uses the 1/3 shift).
///
/// # Safety
/// `grids` points to `m` live grids on one system; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_sparse_build(
    exps: *const MfExponents,
    grids: *const *const MfGrid,
    shift_bits: u32,
    out: *mut *mut MfSparse,
) -> MfStatus {
    let exps = nonnull!(exps);
    let out = out_ptr!(out);
    if grids.is_null() {
        set_error("null grid list");
        return MfStatus::NullArgument;
    }
    let handles = unsafe { std::slice::from_raw_parts(grids, exps.0.m()) };
    let mut refs = Vec::with_capacity(handles.len());
    for &h in handles {
        match unsafe { h.as_ref() } {
            Some(g) => refs.push(&g.0),
            None => {
                set_error("null grid handle");
                return MfStatus::NullArgument;
            }
        }
    }
    match mfrac::sparse::build_sparse(&refs, &exps.0, Shift(shift_bits)) {
        Ok(outcome) => {
            *out = Box::into_raw(Box::new(MfSparse(outcome.family)));
            MfStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Number of member cubes.
///
/// # Safety
/// `s` live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_sparse_len(s: *const MfSparse, out: *mut usize) -> MfStatus {
    let s = nonnull!(s);
    let out = out_ptr!(out);
    *out = s.0.len();
    MfStatus::Ok
}

/// Run the sparseness checks: `Ok` when all invariants hold, `Failed` with
/// the violation in the error message otherwise.
///
/// # Safety
/// `s` live handle.
#[no_mangle]
pub unsafe extern "C" fn mf_sparse_verify(s: *const MfSparse) -> MfStatus {
    let s = nonnull!(s);
    match s.0.verify().violation {
        None => MfStatus::Ok,
        Some(v) => fail(format!(
            "{:?} violated at generation {} by {:?}: {}",
            v.invariant, v.generation, v.cube, v.detail
        )),
    }
}

/// Write the family's line-based text form to a file.
///
/// # Safety
/// `path` is a NUL-terminated UTF-8 path; `s` live handle.
#[no_mangle]
pub unsafe extern "C" fn mf_sparse_write_text(
    s: *const MfSparse,
    path: *const c_char,
) -> MfStatus {
    let s = nonnull!(s);
    if path.is_null() {
        set_error("null path");
        return MfStatus::NullArgument;
    }
    let path = match unsafe { CStr::from_ptr(path) }.to_str() {
        Ok(p) => p,
        Err(_) => {
            set_error("path is not UTF-8");
            return MfStatus::InvalidArgument;
        }
    };
    match std::fs::write(path, s.0.to_text()) {
        Ok(()) => MfStatus::Ok,
        Err(e) => fail(e),
    }
}

/// # Safety
/// `s` from `mf_sparse_build`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mf_sparse_free(s: *mut MfSparse) {
    if !s.is_null() {
        drop(unsafe { Box::from_raw(s) });
    }
}

/// Run a sharpness experiment from a key/value config file and write the
/// report (CSV) to `csv_path`. `theorem` is `"t1"`, `"t2"` or `"t3"`.
///
/// # Safety
/// Both paths are NUL-terminated UTF-8 strings.
#[no_mangle]
pub unsafe extern "C" fn mf_sharpness_run(
    theorem: *const c_char,
    config_path: *const c_char,
    csv_path: *const c_char,
) -> MfStatus {
    if theorem.is_null() || config_path.is_null() || csv_path.is_null() {
        set_error("null path or theorem");
        return MfStatus::NullArgument;
    }
    let parse = |p: *const c_char| unsafe { CStr::from_ptr(p) }.to_str().map(str::to_owned);
    let (Ok(theorem), Ok(config_path), Ok(csv_path)) =
        (parse(theorem), parse(config_path), parse(csv_path))
    else {
        set_error("arguments are not UTF-8");
        return MfStatus::InvalidArgument;
    };
    let theorem = match theorem.as_str() {
        "t1" => Theorem::T1,
        "t2" => Theorem::T2,
        "t3" => Theorem::T3,
        other => {
            set_error(&format!("theorem must be t1, t2 or t3, got {other:?}"));
            return MfStatus::InvalidArgument;
        }
    };
    let run = match mfrac::config::load_config(std::path::Path::new(&config_path)) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let cfg: ExperimentConfig = run.experiment(theorem);
    match run_experiment(&cfg) {
        Ok(report) => match std::fs::write(&csv_path, report.to_csv()) {
            Ok(()) => MfStatus::Ok,
            Err(e) => fail(e),
        },
        Err(e) => fail(e),
    }
}
