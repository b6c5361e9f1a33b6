//! C interface to the somrl knowledge base.
//!
//! A map is an opaque `SomrlMap` handle created by `somrl_map_random`,
//! `somrl_map_from_weights` or `somrl_map_load` and released with
//! `somrl_map_free`. Every fallible call returns a `SomrlStatus`; on failure
//! `somrl_last_error` describes the most recent error on the calling thread.
//! Panics never cross the boundary and are reported as `SOMRL_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use somrl::gsom::{GrowthWindow, GsomConfig, InputOrder, KnowledgeBase, NeighborhoodKernel, RateSchedule, SomMap};
use somrl::transfer;
use somrl::{vector, Error, WeightVector};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SomrlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ZeroNorm = 3,
    Io = 4,
    Format = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SomrlRateSchedule {
    RunExponent = 0,
    FinalFraction = 1,
    FractionOfRun = 2,
    Iterations = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SomrlGrowthWindow {
    Iteration = 0,
    Epoch = 1,
    SinceGrowth = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SomrlInputOrder {
    Random = 0,
    Shuffled = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SomrlKernel {
    Gaussian = 0,
    Unsquared = 1,
}

/// Training parameters; fill with `somrl_gsom_config_default` and adjust.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SomrlGsomConfig {
    pub initial_rows: usize,
    pub initial_cols: usize,
    pub sigma0: f64,
    pub tau1: f64,
    pub kappa0: f64,
    pub tau2: f64,
    pub rate_schedule: SomrlRateSchedule,
    pub growth_threshold: f64,
    pub growth_window: SomrlGrowthWindow,
    pub input_order: SomrlInputOrder,
    pub iterations: usize,
    pub kernel: SomrlKernel,
}

impl From<&GsomConfig> for SomrlGsomConfig {
    fn from(c: &GsomConfig) -> Self {
        SomrlGsomConfig {
            initial_rows: c.initial_rows,
            initial_cols: c.initial_cols,
            sigma0: c.sigma0,
            tau1: c.tau1,
            kappa0: c.kappa0,
            tau2: c.tau2,
            rate_schedule: match c.rate_schedule {
                RateSchedule::RunExponent => SomrlRateSchedule::RunExponent,
                RateSchedule::FinalFraction => SomrlRateSchedule::FinalFraction,
                RateSchedule::FractionOfRun => SomrlRateSchedule::FractionOfRun,
                RateSchedule::Iterations => SomrlRateSchedule::Iterations,
            },
            growth_threshold: c.growth_threshold,
            growth_window: match c.growth_window {
                GrowthWindow::Iteration => SomrlGrowthWindow::Iteration,
                GrowthWindow::Epoch => SomrlGrowthWindow::Epoch,
                GrowthWindow::SinceGrowth => SomrlGrowthWindow::SinceGrowth,
            },
            input_order: match c.input_order {
                InputOrder::Random => SomrlInputOrder::Random,
                InputOrder::Shuffled => SomrlInputOrder::Shuffled,
            },
            iterations: c.iterations,
            kernel: match c.kernel {
                NeighborhoodKernel::Gaussian => SomrlKernel::Gaussian,
                NeighborhoodKernel::Unsquared => SomrlKernel::Unsquared,
            },
        }
    }
}

impl From<&SomrlGsomConfig> for GsomConfig {
    fn from(c: &SomrlGsomConfig) -> Self {
        GsomConfig {
            initial_rows: c.initial_rows,
            initial_cols: c.initial_cols,
            sigma0: c.sigma0,
            tau1: c.tau1,
            kappa0: c.kappa0,
            tau2: c.tau2,
            rate_schedule: match c.rate_schedule {
                SomrlRateSchedule::RunExponent => RateSchedule::RunExponent,
                SomrlRateSchedule::FinalFraction => RateSchedule::FinalFraction,
                SomrlRateSchedule::FractionOfRun => RateSchedule::FractionOfRun,
                SomrlRateSchedule::Iterations => RateSchedule::Iterations,
            },
            growth_threshold: c.growth_threshold,
            growth_window: match c.growth_window {
                SomrlGrowthWindow::Iteration => GrowthWindow::Iteration,
                SomrlGrowthWindow::Epoch => GrowthWindow::Epoch,
                SomrlGrowthWindow::SinceGrowth => GrowthWindow::SinceGrowth,
            },
            input_order: match c.input_order {
                SomrlInputOrder::Random => InputOrder::Random,
                SomrlInputOrder::Shuffled => InputOrder::Shuffled,
            },
            iterations: c.iterations,
            kernel: match c.kernel {
                SomrlKernel::Gaussian => NeighborhoodKernel::Gaussian,
                SomrlKernel::Unsquared => NeighborhoodKernel::Unsquared,
            },
        }
    }
}

/// A knowledge-base map together with the random stream used to train it.
pub struct SomrlMap {
    kb: KnowledgeBase,
    rng: ChaCha8Rng,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    // Interior NULs cannot appear in a C string.
    let msg = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: SomrlStatus, msg: impl Into<String>) -> SomrlStatus {
    set_last_error(msg.into());
    status
}

fn from_error(e: Error) -> SomrlStatus {
    let status = match e {
        Error::ZeroNorm => SomrlStatus::ZeroNorm,
        Error::Io { .. } => SomrlStatus::Io,
        Error::Format { .. } => SomrlStatus::Format,
        Error::Contract(_) | Error::Config(_) | Error::Divergence(_) => SomrlStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> SomrlStatus) -> SomrlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            fail(SomrlStatus::Panic, format!("panic: {msg}"))
        }
    }
}

/// Borrows `len` doubles, rejecting NULL unless `len` is zero.
unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], SomrlStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(SomrlStatus::NullPointer, "vector pointer is NULL"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn map_ref<'a>(map: *const SomrlMap) -> Result<&'a SomrlMap, SomrlStatus> {
    map.as_ref().ok_or_else(|| fail(SomrlStatus::NullPointer, "map handle is NULL"))
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, SomrlStatus> {
    if path.is_null() {
        return Err(fail(SomrlStatus::NullPointer, "path is NULL"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(SomrlStatus::InvalidArgument, "path is not valid UTF-8"))
}

fn check_dim(map: &SomMap, len: usize) -> Result<(), SomrlStatus> {
    if len != map.dim() {
        return Err(fail(
            SomrlStatus::InvalidArgument,
            format!("vector has {len} entries, map nodes have {}", map.dim()),
        ));
    }
    Ok(())
}

fn publish(out: *mut *mut SomrlMap, map: SomrlMap) -> SomrlStatus {
    // SAFETY: callers checked `out` for NULL.
    unsafe { *out = Box::into_raw(Box::new(map)) };
    SomrlStatus::Ok
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Message of the last failed call on this thread, or NULL if none failed.
/// The string stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn somrl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Writes the default training parameters to `out`.
///
/// # Safety
/// `out` must be NULL or point to writable memory for one `SomrlGsomConfig`.
#[no_mangle]
pub unsafe extern "C" fn somrl_gsom_config_default(out: *mut SomrlGsomConfig) -> SomrlStatus {
    if out.is_null() {
        return fail(SomrlStatus::NullPointer, "config pointer is NULL");
    }
    *out = SomrlGsomConfig::from(&GsomConfig::default());
    SomrlStatus::Ok
}

/// Cosine similarity of two vectors of length `len`.
///
/// # Safety
/// `a` and `b` must point to `len` readable doubles and `out` to one
/// writable double.
#[no_mangle]
pub unsafe extern "C" fn somrl_cosine_similarity(
    a: *const f64,
    b: *const f64,
    len: usize,
    out: *mut f64,
) -> SomrlStatus {
    guard(|| {
        let a = try_ffi!(slice(a, len));
        let b = try_ffi!(slice(b, len));
        if out.is_null() {
            return fail(SomrlStatus::NullPointer, "output pointer is NULL");
        }
        match vector::cosine(a, b) {
            Some(c) => {
                *out = c;
                SomrlStatus::Ok
            }
            None => from_error(Error::ZeroNorm),
        }
    })
}

/// New `rows` x `cols` map of random unit vectors of length `dim`. `seed`
/// fixes both the initial weights and all later training randomness.
///
/// # Safety
/// `out` must point to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn somrl_map_random(
    rows: usize,
    cols: usize,
    dim: usize,
    seed: u64,
    out: *mut *mut SomrlMap,
) -> SomrlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SomrlStatus::NullPointer, "output pointer is NULL");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match SomMap::random(rows, cols, dim, &mut rng) {
            Ok(map) => publish(
                out,
                SomrlMap {
                    kb: KnowledgeBase::new(map),
                    rng,
                },
            ),
            Err(e) => from_error(e),
        }
    })
}

/// Map from row-major node weights (`rows * cols * dim` doubles). The nodes
/// count as stored knowledge, so the next `somrl_map_store` integrates with
/// them.
///
/// # Safety
/// `weights` must point to `rows * cols * dim` readable doubles and `out`
/// to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn somrl_map_from_weights(
    rows: usize,
    cols: usize,
    dim: usize,
    weights: *const f64,
    seed: u64,
    out: *mut *mut SomrlMap,
) -> SomrlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SomrlStatus::NullPointer, "output pointer is NULL");
        }
        let Some(total) = rows.checked_mul(cols).and_then(|n| n.checked_mul(dim)) else {
            return fail(SomrlStatus::InvalidArgument, "map size overflows");
        };
        let w = try_ffi!(slice(weights, total));
        let nodes = if dim == 0 {
            Vec::new()
        } else {
            w.chunks_exact(dim).map(|c| WeightVector::from_vec(c.to_vec())).collect()
        };
        match SomMap::from_nodes(rows, cols, nodes) {
            Ok(map) => publish(
                out,
                SomrlMap {
                    kb: KnowledgeBase::with_stored(map, 1),
                    rng: ChaCha8Rng::seed_from_u64(seed),
                },
            ),
            Err(e) => from_error(e),
        }
    })
}

/// Loads a map written by `somrl_map_save`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` must point to writable
/// storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn somrl_map_load(path: *const c_char, seed: u64, out: *mut *mut SomrlMap) -> SomrlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SomrlStatus::NullPointer, "output pointer is NULL");
        }
        let path = try_ffi!(path_arg(path));
        match SomMap::load(&path) {
            Ok((map, _)) => publish(
                out,
                SomrlMap {
                    kb: KnowledgeBase::with_stored(map, 1),
                    rng: ChaCha8Rng::seed_from_u64(seed),
                },
            ),
            Err(e) => from_error(e),
        }
    })
}

/// Writes the map to `path`, echoing `cfg` when it is not NULL.
///
/// # Safety
/// `map` must be a live handle, `path` a NUL-terminated string and `cfg`
/// NULL or a valid config.
#[no_mangle]
pub unsafe extern "C" fn somrl_map_save(
    map: *const SomrlMap,
    path: *const c_char,
    cfg: *const SomrlGsomConfig,
) -> SomrlStatus {
    guard(|| {
        let m = try_ffi!(map_ref(map));
        let path = try_ffi!(path_arg(path));
        let cfg = cfg.as_ref().map(GsomConfig::from);
        match m.kb.map().save(cfg.as_ref(), &path) {
            Ok(()) => SomrlStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `map` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn somrl_map_free(map: *mut SomrlMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Number of nodes; 0 for a NULL handle.
///
/// # Safety
/// `map` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn somrl_map_node_count(map: *const SomrlMap) -> usize {
    map.as_ref().map_or(0, |m| m.kb.map().len())
}

/// Grid shape and node length.
///
/// # Safety
/// `map` must be a live handle; each output pointer may be NULL.
#[no_mangle]
pub unsafe extern "C" fn somrl_map_shape(
    map: *const SomrlMap,
    rows: *mut usize,
    cols: *mut usize,
    dim: *mut usize,
) -> SomrlStatus {
    let m = try_ffi!(map_ref(map)).kb.map();
    for (p, v) in [(rows, m.rows()), (cols, m.cols()), (dim, m.dim())] {
        if !p.is_null() {
            *p = v;
        }
    }
    SomrlStatus::Ok
}

/// Copies the weights of node `node` (row-major index) into `out`, which
/// must hold `len` = node length doubles.
///
/// # Safety
/// `map` must be a live handle and `out` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn somrl_map_node_weights(
    map: *const SomrlMap,
    node: usize,
    out: *mut f64,
    len: usize,
) -> SomrlStatus {
    guard(|| {
        let m = try_ffi!(map_ref(map)).kb.map();
        try_ffi!(check_dim(m, len));
        if node >= m.len() {
            return fail(SomrlStatus::InvalidArgument, format!("node {node} out of range"));
        }
        if out.is_null() {
            return fail(SomrlStatus::NullPointer, "output pointer is NULL");
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(m.node_weights(node));
        SomrlStatus::Ok
    })
}

/// Row-major index of the node most cosine-similar to `x`.
///
/// # Safety
/// `map` must be a live handle, `x` must point to `len` readable doubles
/// and `node` to one writable `size_t`.
#[no_mangle]
pub unsafe extern "C" fn somrl_map_find_winner(
    map: *const SomrlMap,
    x: *const f64,
    len: usize,
    node: *mut usize,
) -> SomrlStatus {
    guard(|| {
        let m = try_ffi!(map_ref(map)).kb.map();
        try_ffi!(check_dim(m, len));
        let x = try_ffi!(slice(x, len));
        if node.is_null() {
            return fail(SomrlStatus::NullPointer, "output pointer is NULL");
        }
        match m.best_match(x) {
            Ok((i, _)) => {
                *node = i;
                SomrlStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Source node for target weights `w`: the most similar node and its
/// similarity. Ties go to the lowest index.
///
/// # Safety
/// `map` must be a live handle, `w` must point to `len` readable doubles,
/// `node` to one writable `size_t` and `similarity` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn somrl_map_select_source(
    map: *const SomrlMap,
    w: *const f64,
    len: usize,
    node: *mut usize,
    similarity: *mut f64,
) -> SomrlStatus {
    guard(|| {
        let m = try_ffi!(map_ref(map)).kb.map();
        try_ffi!(check_dim(m, len));
        let w = try_ffi!(slice(w, len));
        if node.is_null() || similarity.is_null() {
            return fail(SomrlStatus::NullPointer, "output pointer is NULL");
        }
        match transfer::select_source(m, &WeightVector::from_vec(w.to_vec())) {
            Ok(s) => {
                *node = s.node;
                *similarity = s.similarity;
                SomrlStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Stores a learned weight vector. The first vector stored in a random map
/// is trained on alone; later ones are integrated together with the
/// recycled node weights. The map may grow.
///
/// # Safety
/// `map` must be a live handle not used concurrently, `w` must point to
/// `len` readable doubles and `cfg` must be NULL (defaults) or valid.
#[no_mangle]
pub unsafe extern "C" fn somrl_map_store(
    map: *mut SomrlMap,
    w: *const f64,
    len: usize,
    cfg: *const SomrlGsomConfig,
) -> SomrlStatus {
    guard(|| {
        let Some(m) = map.as_mut() else {
            return fail(SomrlStatus::NullPointer, "map handle is NULL");
        };
        try_ffi!(check_dim(m.kb.map(), len));
        let w = WeightVector::from_vec(try_ffi!(slice(w, len)).to_vec());
        let cfg = cfg.as_ref().map(GsomConfig::from).unwrap_or_default();
        match m.kb.store(&w, &cfg, &mut m.rng) {
            Ok(_) => SomrlStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}
