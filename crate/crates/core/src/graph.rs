//! Structural and spectral computations on a single directed weighted layer:
//! degrees and strengths, largest strongly connected component, leading
//! eigenvalue of a nonnegative matrix, and the vulnerability PageRank.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Layer;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;
pub const DEFAULT_ALPHA_FACTOR: f64 = 0.85;

/// Degree and strength summary of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerMetrics {
    /// links / nodes, over the full index space including isolated nodes
    pub avg_degree: f64,
    pub in_degree: Vec<usize>,
    pub out_degree: Vec<usize>,
    /// per-node sum of incoming weights
    pub in_strength: Vec<f64>,
}

pub fn degrees_and_strengths(layer: &Layer) -> LayerMetrics {
    let n = layer.node_count();
    let avg_degree = if n == 0 {
        0.0
    } else {
        layer.edge_count() as f64 / n as f64
    };
    LayerMetrics {
        avg_degree,
        in_degree: layer.in_degrees(),
        out_degree: layer.out_degrees(),
        in_strength: layer.column_sums(),
    }
}

/// Strongly connected components of the layer's adjacency (any edge counts,
/// regardless of weight), via Tarjan's algorithm with an explicit stack.
pub fn strongly_connected_components(layer: &Layer) -> Vec<Vec<usize>> {
    let n = layer.node_count();
    let mut adj = vec![Vec::new(); n];
    for (i, j, _) in layer.edges() {
        adj[i].push(j);
    }

    const UNVISITED: usize = usize::MAX;
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut components = Vec::new();

    // (node, next child position) frames instead of recursion
    let mut call_stack: Vec<(usize, usize)> = Vec::new();

    for start in 0..n {
        if index[start] != UNVISITED {
            continue;
        }
        call_stack.push((start, 0));
        index[start] = next_index;
        lowlink[start] = next_index;
        next_index += 1;
        stack.push(start);
        on_stack[start] = true;

        while let Some(&mut (v, ref mut child)) = call_stack.last_mut() {
            if *child < adj[v].len() {
                let w = adj[v][*child];
                *child += 1;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    lowlink[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call_stack.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
            } else {
                call_stack.pop();
                if let Some(&(parent, _)) = call_stack.last() {
                    lowlink[parent] = lowlink[parent].min(lowlink[v]);
                }
                if lowlink[v] == index[v] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    components.push(component);
                }
            }
        }
    }
    components
}

/// |largest SCC| / |nodes|, over the full index space including isolated
/// nodes. Node count 0 yields 0.
pub fn largest_scc_fraction(layer: &Layer) -> f64 {
    let n = layer.node_count();
    if n == 0 {
        return 0.0;
    }
    let largest = strongly_connected_components(layer)
        .iter()
        .map(Vec::len)
        .max()
        .unwrap_or(0);
    largest as f64 / n as f64
}

/// Leading eigenvalue magnitude of a nonnegative weight matrix.
///
/// Power iteration runs on the shifted matrix `A + eps*I`. For a
/// nonnegative matrix every eigenvalue lies in the disk `|z| <= lambda`,
/// so shifting moves the Perron root to `lambda + eps` while every other
/// eigenvalue stays strictly smaller in magnitude; the shift is exact
/// (`lambda(A + eps*I) = lambda(A) + eps`) and is chosen at half the
/// spectral upper bound `min(max row sum, max column sum)` so that
/// oscillatory spectra (e.g. pure cycles, whose eigenvalues fill the
/// circle `|z| = lambda`) still leave a usable gap. The reported value is
/// the shifted Rayleigh estimate minus `eps`. Converged when successive
/// Rayleigh-quotient estimates differ by less than `tol`.
pub fn leading_eigenvalue(layer: &Layer, tol: f64, max_iter: usize) -> Result<f64> {
    let n = layer.node_count();
    if n == 0 || layer.is_empty() {
        return Ok(0.0);
    }
    // A nonnegative matrix has Perron root 0 exactly when its graph is
    // acyclic (every SCC a singleton without a self-loop); power iteration
    // cannot resolve that case, so settle it combinatorially.
    let acyclic = strongly_connected_components(layer)
        .iter()
        .all(|scc| scc.len() == 1 && !layer.contains_edge(scc[0], scc[0]));
    if acyclic {
        return Ok(0.0);
    }
    let bound = layer
        .row_sums()
        .into_iter()
        .fold(0.0f64, f64::max)
        .min(layer.column_sums().into_iter().fold(0.0f64, f64::max));
    let eps = tol + 0.5 * bound;
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut estimate = f64::NAN;
    for _ in 0..max_iter {
        let mut y = vec![0.0; n];
        for (i, j, w) in layer.edges() {
            y[i] += w * x[j];
        }
        for i in 0..n {
            y[i] += eps * x[i];
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            // x fell entirely into the kernel; shifted matrix prevents this
            // unless the layer itself is all-zero
            return Ok(0.0);
        }
        for v in &mut y {
            *v /= norm;
        }
        // Rayleigh quotient of the shifted matrix at the normalized iterate
        let next = norm * x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        let residual = (next - estimate).abs();
        x = y;
        if residual < tol {
            return Ok((next - eps).max(0.0));
        }
        estimate = next;
    }
    Err(Error::NoConvergence {
        max_iter,
        last_estimate: (estimate - eps).max(0.0),
        residual: f64::NAN,
    })
}

/// Converged vulnerability PageRank of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageRank {
    pub scores: Vec<f64>,
    /// effective damping alpha = alpha_factor / lambda
    pub alpha: f64,
    pub lambda: f64,
    /// true when lambda < tol; scores are then uniformly 1 and carry no
    /// network information
    pub degenerate: bool,
    pub iterations: usize,
}

/// Fixed point of `PR_i = alpha * sum_j V_ij PR_j / k_out_j + (1 - alpha)`
/// with `alpha = alpha_factor / lambda(V)`, iterated from `PR = 1` until the
/// max-norm change drops below `tol`.
///
/// Dangling exporters (`k_out_j = 0`) contribute nothing. A layer whose
/// leading eigenvalue is below `tol` is flagged degenerate and returns
/// `PR = 1` everywhere.
pub fn pagerank(layer: &Layer, alpha_factor: f64, tol: f64, max_iter: usize) -> Result<PageRank> {
    assert!(
        alpha_factor > 0.0 && alpha_factor < 1.0,
        "alpha_factor must lie in (0,1)"
    );
    let n = layer.node_count();
    let lambda = leading_eigenvalue(layer, tol, max_iter)?;
    if lambda < tol {
        return Ok(PageRank {
            scores: vec![1.0; n],
            alpha: 0.0,
            lambda,
            degenerate: true,
            iterations: 0,
        });
    }
    let alpha = alpha_factor / lambda;
    let out_deg = layer.out_degrees();

    let mut pr = vec![1.0; n];
    for iter in 1..=max_iter {
        let mut next = vec![1.0 - alpha; n];
        for (i, j, w) in layer.edges() {
            if out_deg[j] > 0 {
                next[i] += alpha * w * pr[j] / out_deg[j] as f64;
            }
        }
        let delta = pr
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        pr = next;
        if delta < tol {
            return Ok(PageRank {
                scores: pr,
                alpha,
                lambda,
                degenerate: false,
                iterations: iter,
            });
        }
    }
    Err(Error::NoConvergence {
        max_iter,
        last_estimate: f64::NAN,
        residual: f64::NAN,
    })
}
