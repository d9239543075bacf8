//! C ABI over the graph, clustering and metric primitives.
//!
//! Functions return a [`ScimapStatus`]; on failure the message is available
//! from [`scimap_last_error`] on the same thread. Handles are opaque and must
//! be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use scimap::community::{louvain, modularity_with_resolution, tune_resolution_to_k, Partition};
use scimap::embedding::SimilarityMatrix;
use scimap::evaluation::{ari, optimal_alignment};
use scimap::graph::{RelationGraph, RelationMode};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScimapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The computation rejected its input (empty graph, mismatched partitions, ...).
    Failed = 3,
    Panic = 4,
}

/// Weighted undirected paper graph.
pub struct ScimapGraph {
    inner: RelationGraph,
}

/// Paper → cluster assignment with labels 1..k.
pub struct ScimapPartition {
    inner: Partition,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let mut bytes = message.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), (ScimapStatus, String)>) -> ScimapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            ScimapStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ScimapStatus::Panic
        }
    }
}

fn failed(e: scimap::Error) -> (ScimapStatus, String) {
    (ScimapStatus::Failed, e.to_string())
}

fn null(name: &str) -> (ScimapStatus, String) {
    (ScimapStatus::NullPointer, format!("{name} is null"))
}

/// `len` elements from `p`; a null pointer is only accepted for `len == 0`.
unsafe fn view<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], (ScimapStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// Message from the most recent call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn scimap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn scimap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build a graph over `nodes` from `n_edges` triples `(us[i], vs[i], weights[i])`.
/// `mode` is 0 for bibliographic coupling, 1 for direct citation.
///
/// # Safety
/// Array arguments must point to at least as many readable elements as their
/// counts say, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scimap_graph_new(
    mode: u32,
    nodes: *const u64,
    n_nodes: usize,
    us: *const u64,
    vs: *const u64,
    weights: *const f64,
    n_edges: usize,
    out: *mut *mut ScimapGraph,
) -> ScimapStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mode = match mode {
            0 => RelationMode::Bc,
            1 => RelationMode::Cit,
            m => return Err((ScimapStatus::InvalidArgument, format!("unknown relation mode {m}"))),
        };
        let nodes = view(nodes, n_nodes, "nodes")?;
        let us = view(us, n_edges, "us")?;
        let vs = view(vs, n_edges, "vs")?;
        let ws = view(weights, n_edges, "weights")?;
        let edges = us.iter().zip(vs).zip(ws).map(|((&u, &v), &w)| (u, v, w));
        let graph = RelationGraph::from_edges(mode, nodes.iter().copied(), edges).map_err(failed)?;
        *out = Box::into_raw(Box::new(ScimapGraph { inner: graph }));
        Ok(())
    })
}

/// # Safety
/// `graph` must come from [`scimap_graph_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn scimap_graph_free(graph: *mut ScimapGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn scimap_graph_node_count(graph: *const ScimapGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.inner.node_count())
}

/// # Safety
/// `graph` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn scimap_graph_edge_count(graph: *const ScimapGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.inner.edge_count())
}

/// Partition from `(ids[i], labels[i])` pairs. Labels may be any integers;
/// they are renumbered 1..k by decreasing cluster size.
///
/// # Safety
/// `ids` and `labels` must hold `n` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scimap_partition_new(
    ids: *const u64,
    labels: *const u32,
    n: usize,
    out: *mut *mut ScimapPartition,
) -> ScimapStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ids = view(ids, n, "ids")?;
        let labels = view(labels, n, "labels")?;
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(**id)) {
            return Err((ScimapStatus::InvalidArgument, format!("duplicate id {dup}")));
        }
        let p = Partition::from_labels(ids.iter().copied().zip(labels.iter().copied()));
        *out = Box::into_raw(Box::new(ScimapPartition { inner: p }));
        Ok(())
    })
}

/// # Safety
/// `partition` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn scimap_partition_free(partition: *mut ScimapPartition) {
    if !partition.is_null() {
        drop(Box::from_raw(partition));
    }
}

/// Number of clusters, 0 for a null handle.
///
/// # Safety
/// `partition` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn scimap_partition_k(partition: *const ScimapPartition) -> usize {
    partition.as_ref().map_or(0, |p| p.inner.k())
}

/// Number of assigned nodes, 0 for a null handle.
///
/// # Safety
/// `partition` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn scimap_partition_len(partition: *const ScimapPartition) -> usize {
    partition.as_ref().map_or(0, |p| p.inner.len())
}

/// Copy the assignment, ordered by id, into `ids` and `labels` (capacity `cap`).
///
/// # Safety
/// `ids` and `labels` must be writable for `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn scimap_partition_assignment(
    partition: *const ScimapPartition,
    ids: *mut u64,
    labels: *mut u32,
    cap: usize,
) -> ScimapStatus {
    guard(|| {
        let p = partition.as_ref().ok_or_else(|| null("partition"))?;
        if ids.is_null() || labels.is_null() {
            return Err(null("ids/labels"));
        }
        if cap < p.inner.len() {
            return Err((
                ScimapStatus::InvalidArgument,
                format!("capacity {cap} < {} nodes", p.inner.len()),
            ));
        }
        for (i, (&id, &label)) in p.inner.assignment().iter().enumerate() {
            *ids.add(i) = id;
            *labels.add(i) = label;
        }
        Ok(())
    })
}

/// Louvain communities at `resolution`, reproducible for a fixed `seed`.
///
/// # Safety
/// `graph` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn scimap_louvain(
    graph: *const ScimapGraph,
    resolution: f64,
    seed: u64,
    out: *mut *mut ScimapPartition,
) -> ScimapStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let p = louvain(&g.inner, resolution, seed).map_err(failed)?;
        *out = Box::into_raw(Box::new(ScimapPartition { inner: p }));
        Ok(())
    })
}

/// Search the resolution for `target_k` clusters. `resolution` and `exact`
/// may be null.
///
/// # Safety
/// `graph` must be live; non-null output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn scimap_tune_resolution(
    graph: *const ScimapGraph,
    target_k: usize,
    seed: u64,
    out: *mut *mut ScimapPartition,
    resolution: *mut f64,
    exact: *mut bool,
) -> ScimapStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = tune_resolution_to_k(&g.inner, target_k, seed).map_err(failed)?;
        if !resolution.is_null() {
            *resolution = r.resolution;
        }
        if !exact.is_null() {
            *exact = r.exact;
        }
        *out = Box::into_raw(Box::new(ScimapPartition { inner: r.partition }));
        Ok(())
    })
}

/// Modularity of `partition` on `graph` at `resolution` (1.0 for the standard score).
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn scimap_modularity(
    graph: *const ScimapGraph,
    partition: *const ScimapPartition,
    resolution: f64,
    out: *mut f64,
) -> ScimapStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        let p = partition.as_ref().ok_or_else(|| null("partition"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = modularity_with_resolution(&g.inner, &p.inner, resolution).map_err(failed)?;
        Ok(())
    })
}

/// Adjusted Rand index of two partitions of the same ids.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn scimap_ari(
    a: *const ScimapPartition,
    b: *const ScimapPartition,
    out: *mut f64,
) -> ScimapStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("a"))?;
        let b = b.as_ref().ok_or_else(|| null("b"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ari(&a.inner, &b.inner).map_err(failed)?;
        Ok(())
    })
}

/// Maximum-sum one-to-one matching on a row-major `k × k` score matrix.
/// `cols[r]` receives the column matched to row `r`; `total` may be null.
///
/// # Safety
/// `matrix` must hold `k*k` readable values and `cols` `k` writable slots.
#[no_mangle]
pub unsafe extern "C" fn scimap_optimal_alignment(
    matrix: *const f64,
    k: usize,
    cols: *mut usize,
    total: *mut f64,
) -> ScimapStatus {
    guard(|| {
        if cols.is_null() {
            return Err(null("cols"));
        }
        let n = k
            .checked_mul(k)
            .ok_or((ScimapStatus::InvalidArgument, "k too large".to_string()))?;
        let values = view(matrix, n, "matrix")?;
        let rows = if k == 0 {
            Vec::new()
        } else {
            values.chunks(k).map(<[f64]>::to_vec).collect()
        };
        let m = SimilarityMatrix::from_rows(rows).map_err(failed)?;
        let a = optimal_alignment(&m).map_err(failed)?;
        for &(r, c) in &a.pairs {
            *cols.add(r) = c;
        }
        if !total.is_null() {
            *total = a.total;
        }
        Ok(())
    })
}
