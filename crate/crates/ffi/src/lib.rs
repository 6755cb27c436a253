//! C interface to the `ngf` library.
//!
//! Graphs and filters are opaque handles created by `ngf_*_new`-style
//! constructors and released with the matching `*_free`. Every fallible
//! function returns an [`NgfStatus`]; on failure a description is available
//! from [`ngf_last_error`] on the same thread until the next failing call.
//! Matrices cross the boundary as dense row-major `double` buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ndarray::{Array2, ArrayView2};
use ngf::filters::{apply, build_classical, build_ngf, normalized_error, FilterMatrix, FilterSpec};
use ngf::graph::{
    bfs_distances, generate_er, generate_sbm, generate_small_world, khop_stack, perturb, Graph, GsoChoice, GsoKind,
};
use ngf::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NgfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A buffer was too small or a dimension did not match.
    DimensionMismatch = 3,
    /// Overflow or a failed eigenvalue estimate.
    Numerical = 4,
    Panic = 5,
}

/// Undirected simple graph.
pub struct NgfGraph {
    inner: Graph,
}

/// Dense `n × n` filter matrix.
pub struct NgfFilter {
    inner: FilterMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> NgfStatus {
    match e {
        Error::DimensionMismatch { .. } => NgfStatus::DimensionMismatch,
        Error::PowerIteration { .. } | Error::FilterOverflow { .. } | Error::ZeroNormReference => NgfStatus::Numerical,
        _ => NgfStatus::InvalidArgument,
    }
}

fn fail(status: NgfStatus, msg: impl Into<String>) -> NgfStatus {
    set_error(msg.into());
    status
}

fn guard<F: FnOnce() -> Result<(), (NgfStatus, String)>>(f: F) -> NgfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NgfStatus::Ok,
        Ok(Err((status, msg))) => fail(status, msg),
        Err(_) => fail(NgfStatus::Panic, "internal panic"),
    }
}

fn lib(e: Error) -> (NgfStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (NgfStatus, String) {
    (NgfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn graph_ref<'a>(g: *const NgfGraph) -> Result<&'a Graph, (NgfStatus, String)> {
    g.as_ref().map(|g| &g.inner).ok_or_else(|| null("graph"))
}

unsafe fn filter_ref<'a>(f: *const NgfFilter) -> Result<&'a FilterMatrix, (NgfStatus, String)> {
    f.as_ref().map(|f| &f.inner).ok_or_else(|| null("filter"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (NgfStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), (NgfStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_matrix(m: &Array2<f64>, out: *mut f64, len: usize) -> Result<(), (NgfStatus, String)> {
    if len < m.len() {
        return Err((
            NgfStatus::DimensionMismatch,
            format!("output buffer holds {len} values, {} needed", m.len()),
        ));
    }
    if out.is_null() {
        return Err(null("output buffer"));
    }
    let dst = std::slice::from_raw_parts_mut(out, m.len());
    for (d, s) in dst.iter_mut().zip(m.iter()) {
        *d = *s;
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ngf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Graph on `n` nodes from `edge_count` pairs stored as `edges[2*e]`, `edges[2*e+1]`.
///
/// # Safety
/// `edges` must point to `2 * edge_count` readable values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ngf_graph_from_edges(
    n: usize,
    edges: *const usize,
    edge_count: usize,
    out: *mut *mut NgfGraph,
) -> NgfStatus {
    guard(|| {
        let flat = slice(edges, 2 * edge_count, "edges")?;
        let g = Graph::from_edges(n, flat.chunks_exact(2).map(|p| (p[0], p[1]))).map_err(lib)?;
        write_out(out, NgfGraph { inner: g })
    })
}

/// Erdős–Rényi graph.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ngf_graph_erdos_renyi(n: usize, p: f64, seed: u64, out: *mut *mut NgfGraph) -> NgfStatus {
    guard(|| write_out(out, NgfGraph { inner: generate_er(n, p, seed).map_err(lib)? }))
}

/// Stochastic block model with equal community sizes.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ngf_graph_sbm(
    n: usize,
    communities: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
    out: *mut *mut NgfGraph,
) -> NgfStatus {
    guard(|| {
        let g = generate_sbm(n, communities, p_in, p_out, seed).map_err(lib)?.graph;
        write_out(out, NgfGraph { inner: g })
    })
}

/// Watts–Strogatz graph: ring lattice of degree `k_ring`, rewired with probability `beta`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ngf_graph_small_world(
    n: usize,
    k_ring: usize,
    beta: f64,
    seed: u64,
    out: *mut *mut NgfGraph,
) -> NgfStatus {
    guard(|| write_out(out, NgfGraph { inner: generate_small_world(n, k_ring, beta, seed).map_err(lib)? }))
}

/// Copy of `g` with `create_pct` of its edge count added and `destroy_pct` removed.
///
/// # Safety
/// `g` must be a live graph handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ngf_graph_perturb(
    g: *const NgfGraph,
    create_pct: f64,
    destroy_pct: f64,
    seed: u64,
    out: *mut *mut NgfGraph,
) -> NgfStatus {
    guard(|| {
        let g = graph_ref(g)?;
        write_out(out, NgfGraph { inner: perturb(g, create_pct, destroy_pct, seed).map_err(lib)? })
    })
}

/// # Safety
/// `g` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ngf_graph_free(g: *mut NgfGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live graph handle and `n`, `edges` writable.
#[no_mangle]
pub unsafe extern "C" fn ngf_graph_size(g: *const NgfGraph, n: *mut usize, edges: *mut usize) -> NgfStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if n.is_null() || edges.is_null() {
            return Err(null("output pointer"));
        }
        *n = g.n();
        *edges = g.edge_count();
        Ok(())
    })
}

/// Largest finite hop distance between any two nodes.
///
/// # Safety
/// `g` must be a live graph handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ngf_graph_diameter(g: *const NgfGraph, out: *mut usize) -> NgfStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = bfs_distances(g).diameter().unwrap_or(0);
        Ok(())
    })
}

/// Writes the `n × n` k-hop adjacency matrix `A(k)` into `out`.
///
/// # Safety
/// `g` must be a live graph handle and `out` must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn ngf_graph_khop(g: *const NgfGraph, k: usize, out: *mut f64, len: usize) -> NgfStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let stack = khop_stack(g, k);
        copy_matrix(&stack.layer(k).to_dense(), out, len)
    })
}

/// Neighborhood filter `Σ_k h_k A(k)` with `taps` coefficients.
///
/// # Safety
/// `g` must be a live graph handle, `coeffs` must hold `taps` values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn ngf_filter_neighborhood(
    g: *const NgfGraph,
    coeffs: *const f64,
    taps: usize,
    out: *mut *mut NgfFilter,
) -> NgfStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let h = slice(coeffs, taps, "coeffs")?;
        if h.is_empty() {
            return Err((NgfStatus::InvalidArgument, "need at least one coefficient".into()));
        }
        let f = build_ngf(&khop_stack(g, taps - 1), h).map_err(lib)?;
        write_out(out, NgfFilter { inner: f })
    })
}

/// Classical filter `Σ_k h_k S^k` on the adjacency matrix, divided by its
/// spectral radius when `normalize` is nonzero.
///
/// # Safety
/// `g` must be a live graph handle, `coeffs` must hold `taps` values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn ngf_filter_classical(
    g: *const NgfGraph,
    coeffs: *const f64,
    taps: usize,
    normalize: i32,
    out: *mut *mut NgfFilter,
) -> NgfStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let h = slice(coeffs, taps, "coeffs")?;
        let choice = GsoChoice {
            kind: GsoKind::Adjacency,
            normalize: normalize != 0,
        };
        let f = build_classical(g, &FilterSpec::classical(h.to_vec(), choice)).map_err(lib)?;
        write_out(out, NgfFilter { inner: f })
    })
}

/// # Safety
/// `f` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ngf_filter_free(f: *mut NgfFilter) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Node count of the filter's graph.
///
/// # Safety
/// `f` must be a live filter handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ngf_filter_size(f: *const NgfFilter, out: *mut usize) -> NgfStatus {
    guard(|| {
        let f = filter_ref(f)?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = f.n();
        Ok(())
    })
}

/// Copies the `n × n` filter matrix into `out`.
///
/// # Safety
/// `f` must be a live filter handle and `out` must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn ngf_filter_matrix(f: *const NgfFilter, out: *mut f64, len: usize) -> NgfStatus {
    guard(|| copy_matrix(filter_ref(f)?.matrix(), out, len))
}

/// `y = H x` for an `n × cols` signal matrix `x`.
///
/// # Safety
/// `f` must be a live filter handle; `x` and `y` must each hold `n * cols` values.
#[no_mangle]
pub unsafe extern "C" fn ngf_filter_apply(f: *const NgfFilter, x: *const f64, cols: usize, y: *mut f64) -> NgfStatus {
    guard(|| {
        let f = filter_ref(f)?;
        let n = f.n();
        let xs = slice(x, n * cols, "x")?;
        let xm = ArrayView2::from_shape((n, cols), xs)
            .map_err(|e| (NgfStatus::DimensionMismatch, e.to_string()))?
            .to_owned();
        let out = apply(f, &xm).map_err(lib)?;
        copy_matrix(&out, y, n * cols)
    })
}

/// `‖H̄ − H‖²_F / ‖H‖²_F`.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ngf_filter_normalized_error(
    reference: *const NgfFilter,
    perturbed: *const NgfFilter,
    out: *mut f64,
) -> NgfStatus {
    guard(|| {
        let r = filter_ref(reference)?;
        let p = filter_ref(perturbed)?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = normalized_error(r, p).map_err(lib)?;
        Ok(())
    })
}
