//! The bond picture of a metric graph: directed bonds, the fixed real
//! orthogonal scattering matrix `S`, the bond-reversal matrix `J`, the
//! trace-lift matrix `M = [S+J; i(S-J)]`, and the evaluation of
//! `U(z) = diag(z, z) S`.
//!
//! Edge `j` carries a forward bond `j` (direction of increasing arc length)
//! and a reverse bond `N + j`. An amplitude vector `a = (a_1..a_N, b_1..b_N)`
//! solves `U(exp(ik l)) a = a` exactly when `k^2` is an eigenvalue, with the
//! wave on edge `j` being `a_j e^{-ik(l_j - t)} + b_j e^{-ikt}`.
//!
//! The literature states `S` only up to amplitude conventions, so the
//! constructor verifies two identities that pin the convention: a loop's
//! (forward +1, reverse -1) amplitude vector must be a `z_j` eigenvector of
//! `U(z)`, and the single interval must reproduce the Neumann spectrum
//! `k l = n pi`. If the checks fail the reversed convention `J S J` is tried
//! before giving up.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::MetricGraph;
use crate::linalg::{singular_values_ascending, C64};

#[derive(Debug, Error)]
pub enum ScatteringError {
    #[error("scattering convention error: {0}")]
    ConventionError(String),
}

/// A metric graph together with its fixed bond matrices. Immutable after
/// construction; evaluation methods are pure, so the system can be shared
/// read-only across concurrent workers.
#[derive(Debug, Clone)]
pub struct BondSystem {
    graph: MetricGraph,
    s: DMatrix<f64>,
    m: DMatrix<C64>,
}

impl BondSystem {
    pub fn build(graph: &MetricGraph) -> Result<Self, ScatteringError> {
        let s = vertex_scattering_matrix(graph);
        if let Some(sys) = Self::assemble_if_valid(graph, s.clone()) {
            return Ok(sys);
        }
        // Reversed amplitude convention: swap the roles of forward and
        // reverse bonds and re-run the checks.
        let j = reversal_matrix(graph.edge_count());
        let flipped = &j * &s * &j;
        if let Some(sys) = Self::assemble_if_valid(graph, flipped) {
            return Ok(sys);
        }
        Err(ScatteringError::ConventionError(
            "bond scattering matrix fails the loop-eigenvector and interval-spectrum self-checks \
             in both conventions"
                .into(),
        ))
    }

    fn assemble_if_valid(graph: &MetricGraph, s: DMatrix<f64>) -> Option<Self> {
        let n = graph.edge_count();
        let two_n = 2 * n;
        // Real orthogonality.
        let gram = &s * s.transpose();
        for i in 0..two_n {
            for j in 0..two_n {
                let want = if i == j { 1.0 } else { 0.0 };
                if (gram[(i, j)] - want).abs() > 1e-12 {
                    return None;
                }
            }
        }
        let j = reversal_matrix(n);
        let m = lift_matrix(&s, &j);
        // M must have full column rank (the kernel -> trace isomorphism).
        let (sigmas, _) = singular_values_ascending(&m);
        if sigmas[0] <= 1e-8 {
            return None;
        }
        let sys = BondSystem {
            graph: graph.clone(),
            s,
            m,
        };
        if !sys.loop_eigenvector_check() {
            return None;
        }
        if !interval_spectrum_check() {
            return None;
        }
        Some(sys)
    }

    /// For every loop, the vector with forward amplitude +1 and reverse
    /// amplitude -1 must satisfy `U(z) a = z_j a` on the whole torus.
    fn loop_eigenvector_check(&self) -> bool {
        let n = self.graph.edge_count();
        let loops: Vec<usize> = (0..n).filter(|&j| self.graph.edge(j).is_loop()).collect();
        if loops.is_empty() {
            return true;
        }
        for probe in 0..3 {
            let z: Vec<C64> = (0..n)
                .map(|j| C64::from_polar(1.0, 0.7 + 1.3 * j as f64 + 0.29 * probe as f64))
                .collect();
            let u = self.evaluate_u(&z);
            for &j in &loops {
                let mut a = DVector::<C64>::zeros(2 * n);
                a[j] = C64::new(1.0, 0.0);
                a[n + j] = C64::new(-1.0, 0.0);
                let ua = &u * &a;
                let want = a.map(|v| v * z[j]);
                if (ua - want).norm() > 1e-12 {
                    return false;
                }
            }
        }
        true
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    /// Dimension of the bond space, 2N.
    pub fn bond_count(&self) -> usize {
        2 * self.graph.edge_count()
    }

    pub fn s_matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// The 4N x 2N lift `M = [S+J; i(S-J)]` mapping kernel vectors of
    /// `I - U(z)` to trace vectors (in stacked `(A.., C.., B.., D..)` order).
    pub fn m_matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    /// `U(z) = diag(z, z) S`. Unitary when `|z_j| = 1`; callers may pass
    /// off-torus points for polynomial work.
    pub fn evaluate_u(&self, z: &[C64]) -> DMatrix<C64> {
        let n = self.graph.edge_count();
        assert_eq!(z.len(), n, "torus point dimension mismatch");
        let two_n = 2 * n;
        DMatrix::from_fn(two_n, two_n, |r, c| {
            let zr = z[r % n];
            zr * self.s[(r, c)]
        })
    }

    /// The torus point `exp(ik l)`.
    pub fn torus_point(lengths: &[f64], k: f64) -> Vec<C64> {
        lengths.iter().map(|&l| C64::from_polar(1.0, k * l)).collect()
    }
}

/// Bond reversal: swaps the forward and reverse blocks.
pub fn reversal_matrix(n: usize) -> DMatrix<f64> {
    let two_n = 2 * n;
    DMatrix::from_fn(two_n, two_n, |r, c| {
        if (r + n) % two_n == c {
            1.0
        } else {
            0.0
        }
    })
}

fn lift_matrix(s: &DMatrix<f64>, j: &DMatrix<f64>) -> DMatrix<C64> {
    let two_n = s.nrows();
    let mut m = DMatrix::<C64>::zeros(2 * two_n, two_n);
    for r in 0..two_n {
        for c in 0..two_n {
            m[(r, c)] = C64::new(s[(r, c)] + j[(r, c)], 0.0);
            m[(two_n + r, c)] = C64::new(0.0, s[(r, c)] - j[(r, c)]);
        }
    }
    m
}

/// Kirchhoff vertex scattering assembled bond-by-bond:
/// `S[b, a] = 2/deg(v) - [b is the reversal of a]` whenever bond `a`
/// terminates at `v` and bond `b` originates at `v`, zero otherwise.
fn vertex_scattering_matrix(graph: &MetricGraph) -> DMatrix<f64> {
    let n = graph.edge_count();
    let two_n = 2 * n;
    let origin = |bond: usize| -> usize {
        if bond < n {
            graph.edge(bond).tail
        } else {
            graph.edge(bond - n).head
        }
    };
    let terminus = |bond: usize| -> usize {
        if bond < n {
            graph.edge(bond).head
        } else {
            graph.edge(bond - n).tail
        }
    };
    let mut s = DMatrix::<f64>::zeros(two_n, two_n);
    for alpha in 0..two_n {
        let v = terminus(alpha);
        let deg = graph.degree(v) as f64;
        let reversal = (alpha + n) % two_n;
        for beta in 0..two_n {
            if origin(beta) == v {
                s[(beta, alpha)] = 2.0 / deg - if beta == reversal { 1.0 } else { 0.0 };
            }
        }
    }
    s
}

/// The single interval must have secular polynomial `1 - z^2`, whose torus
/// zeros are the Neumann spectrum `k l = n pi`.
fn interval_spectrum_check() -> bool {
    let g = MetricGraph::interval(1.0);
    let s = vertex_scattering_matrix(&g);
    let expect = [[0.0, 1.0], [1.0, 0.0]];
    for r in 0..2 {
        for c in 0..2 {
            if (s[(r, c)] - expect[r][c]).abs() > 1e-14 {
                return false;
            }
        }
    }
    true
}
