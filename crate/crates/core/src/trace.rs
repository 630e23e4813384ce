//! Scale-invariant eigenfunction traces.
//!
//! An eigenfunction restricted to edge `j` is
//! `f(t) = A_j cos(kt) + B_j sin(kt) = C_j cos(k(l_j - t)) + D_j sin(k(l_j - t))`,
//! so `(A_j, C_j)` are the boundary values and `(B_j, D_j)` the outgoing
//! derivatives divided by `k`. The trace vector collects the 4-tuples of all
//! edges; it solves the vertex conditions `P_std x = 0` together with the
//! per-edge equations
//! `A + iB - z(C - iD) = 0` and `C + iD - z(A - iB) = 0` with `z = e^{ikl}`.
//!
//! Fibers over a manifold point are images of `ker(I - U(z))` under the lift
//! `M`, always spanned by real vectors; this module realifies and normalizes
//! the representatives and implements the classification predicates built on
//! them (non-vanishing entries, loop support, mandarin symmetry, per-edge
//! support via amplitudes and via secular derivatives).

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::MetricGraph;
use crate::linalg::{kernel_basis, C64};
use crate::scattering::BondSystem;
use crate::secular::{secular_gradient, ON_MANIFOLD_COEF};

/// Classification decisions on normalized traces happen at this tolerance:
/// well inside the residual regime of located eigenpairs, above roundoff.
pub const CLASSIFICATION_TOL: f64 = 1e-7;
/// An entry counts as vanishing for the non-vanishing predicate below this.
pub const NONVANISHING_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("empty fiber: smallest singular value {0:.3e} is off the manifold")]
    EmptyFiber(f64),
    #[error("arc length {t} outside [0, {len}] on edge {edge}")]
    OutOfRange { edge: usize, t: f64, len: f64 },
    #[error(
        "mandarin trace matches neither symmetry pattern (symmetric deviation {sym_dev:.3e}, antisymmetric {asym_dev:.3e})"
    )]
    Unclassified { sym_dev: f64, asym_dev: f64 },
    #[error("support tests inconsistent: amplitude says {amplitude:?}, gradient says {gradient:?}")]
    SupportTestsInconsistent {
        amplitude: Vec<bool>,
        gradient: Vec<bool>,
    },
}

/// Index in the per-edge grouped layout `(A_j, B_j, C_j, D_j)` of the entry
/// at position `s` of the stacked layout `(A.., C.., B.., D..)` produced by
/// the lift matrix `M`.
pub(crate) fn grouped_of_stacked(n: usize, s: usize) -> usize {
    match s / n {
        0 => 4 * s,
        1 => 4 * (s - n) + 2,
        2 => 4 * (s - 2 * n) + 1,
        _ => 4 * (s - 3 * n) + 3,
    }
}

/// A normalized trace vector at a manifold point: unit norm, first
/// significant entry rotated to the positive real axis, entries grouped per
/// edge as `(A_j, B_j, C_j, D_j)`.
#[derive(Debug, Clone)]
pub struct TraceVector {
    z: Vec<C64>,
    entries: Vec<C64>,
    imag_residual: f64,
}

impl TraceVector {
    pub fn z(&self) -> &[C64] {
        &self.z
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn edge_count(&self) -> usize {
        self.z.len()
    }

    pub fn a(&self, j: usize) -> C64 {
        self.entries[4 * j]
    }

    pub fn b(&self, j: usize) -> C64 {
        self.entries[4 * j + 1]
    }

    pub fn c(&self, j: usize) -> C64 {
        self.entries[4 * j + 2]
    }

    pub fn d(&self, j: usize) -> C64 {
        self.entries[4 * j + 3]
    }

    /// Worst imaginary component left after realification, relative to the
    /// unit norm of the vector.
    pub fn imag_residual(&self) -> f64 {
        self.imag_residual
    }

    /// Export rows `edge_id,A_re,A_im,B_re,B_im,C_re,C_im,D_re,D_im` at 15
    /// significant digits, preceded by a header carrying `k` and `z`.
    pub fn to_text(&self, k: f64) -> String {
        let mut out = String::new();
        let zs: Vec<String> = self
            .z
            .iter()
            .map(|z| format!("{:.14e}{:+.14e}i", z.re, z.im))
            .collect();
        let _ = writeln!(out, "# k={:.14e} z={}", k, zs.join(";"));
        let _ = writeln!(out, "edge_id,A_re,A_im,B_re,B_im,C_re,C_im,D_re,D_im");
        for j in 0..self.edge_count() {
            let (a, b, c, d) = (self.a(j), self.b(j), self.c(j), self.d(j));
            let _ = writeln!(
                out,
                "{j},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e}",
                a.re, a.im, b.re, b.im, c.re, c.im, d.re, d.im
            );
        }
        out
    }
}

/// Trace basis of the fiber over `z`: lifts an orthonormal kernel basis of
/// `I - U(z)` through `M`, regroups per edge, realifies, and normalizes.
pub fn kernel_traces(bs: &BondSystem, z: &[C64]) -> Result<Vec<TraceVector>, TraceError> {
    let two_n = bs.bond_count();
    let mut a = bs.evaluate_u(z).map(|v| -v);
    for i in 0..two_n {
        a[(i, i)] += C64::new(1.0, 0.0);
    }
    let on_tol = ON_MANIFOLD_COEF * two_n as f64;
    let (sigmas, basis) = kernel_basis(&a, on_tol);
    if basis.is_empty() {
        return Err(TraceError::EmptyFiber(sigmas[0]));
    }
    Ok(traces_from_kernel(bs, z, &basis))
}

/// Same as [`kernel_traces`] but starting from an already computed kernel
/// basis (e.g. the one stored in a solver record).
pub fn traces_from_kernel(
    bs: &BondSystem,
    z: &[C64],
    kernel: &[DVector<C64>],
) -> Vec<TraceVector> {
    let n = bs.edge_count();
    let m = bs.m_matrix();
    let lifted: Vec<DVector<C64>> = kernel
        .iter()
        .map(|a| {
            let stacked = m * a;
            let mut grouped = DVector::<C64>::zeros(4 * n);
            for s in 0..4 * n {
                grouped[grouped_of_stacked(n, s)] = stacked[s];
            }
            grouped
        })
        .collect();
    let (real_basis, residuals) = realify(&lifted);
    real_basis
        .into_iter()
        .zip(residuals)
        .map(|(mut x, imag_residual)| {
            normalize(&mut x);
            TraceVector {
                z: z.to_vec(),
                entries: x.iter().cloned().collect(),
                imag_residual,
            }
        })
        .collect()
}

/// The trace space has a real basis; find one. A single vector is rotated by
/// the phase minimizing its imaginary norm; a higher-dimensional fiber is
/// realified jointly from the real and imaginary parts of the whole basis.
fn realify(basis: &[DVector<C64>]) -> (Vec<DVector<C64>>, Vec<f64>) {
    let dim = basis.len();
    if dim == 1 {
        let x = &basis[0];
        let uu: f64 = x.iter().map(|v| v.re * v.re).sum();
        let vv: f64 = x.iter().map(|v| v.im * v.im).sum();
        let uv: f64 = x.iter().map(|v| v.re * v.im).sum();
        // Minimize |sin p * u + cos p * v|^2 over the unit circle: smallest
        // eigenvector of [[uu, uv], [uv, vv]].
        let half_gap = (0.25 * (uu - vv) * (uu - vv) + uv * uv).sqrt();
        let lam_min = 0.5 * (uu + vv) - half_gap;
        let (s, c) = if uv.abs() > (lam_min - uu).abs() {
            (lam_min - vv, uv)
        } else {
            (uv, lam_min - uu)
        };
        let norm = (s * s + c * c).sqrt();
        let (s, c) = if norm > 0.0 { (s / norm, c / norm) } else { (0.0, 1.0) };
        let phase = C64::new(c, s);
        let rotated = x.map(|v| v * phase);
        let imag: f64 = rotated.iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
        let norm: f64 = rotated.norm();
        return (vec![rotated], vec![imag / norm.max(1e-300)]);
    }
    // Stack real and imaginary parts; the top `dim` singular directions span
    // the real form of the fiber.
    let rows = basis[0].len();
    let mut stacked = DMatrix::<f64>::zeros(rows, 2 * dim);
    for (c, x) in basis.iter().enumerate() {
        for r in 0..rows {
            stacked[(r, 2 * c)] = x[r].re;
            stacked[(r, 2 * c + 1)] = x[r].im;
        }
    }
    let svd = stacked.svd(true, false);
    let u = svd.u.expect("svd with u requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap()
    });
    let leading = svd.singular_values[order[0]].max(1e-300);
    // Everything beyond the fiber dimension should be numerically zero.
    let defect = if order.len() > dim {
        svd.singular_values[order[dim]] / leading
    } else {
        0.0
    };
    let mut out = Vec::with_capacity(dim);
    for &col in order.iter().take(dim) {
        let v = DVector::<C64>::from_fn(rows, |r, _| C64::new(u[(r, col)], 0.0));
        out.push(v);
    }
    (out, vec![defect; dim])
}

fn normalize(x: &mut DVector<C64>) {
    let norm = x.norm();
    if norm > 0.0 {
        *x /= C64::new(norm, 0.0);
    }
    if let Some(first) = x.iter().find(|v| v.norm() > 1e-8) {
        let phase = first.conj() / C64::new(first.norm(), 0.0);
        *x *= phase;
    }
}

/// The standard vertex conditions as a `2N x 4N` real matrix on grouped
/// trace vectors: continuity of the boundary values at every vertex, and a
/// balanced sum of scaled outgoing derivatives (`B` at tails, `D` at heads).
pub fn standard_conditions_matrix(g: &MetricGraph) -> DMatrix<f64> {
    let n = g.edge_count();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(2 * n);
    for v in 0..g.vertex_count() {
        let mut value_slots = Vec::new();
        for (j, e) in g.edges().iter().enumerate() {
            if e.tail == v {
                value_slots.push(4 * j);
            }
            if e.head == v {
                value_slots.push(4 * j + 2);
            }
        }
        for w in value_slots.windows(2) {
            rows.push(vec![(w[0], 1.0), (w[1], -1.0)]);
        }
        let mut deriv = Vec::new();
        for (j, e) in g.edges().iter().enumerate() {
            if e.tail == v {
                deriv.push((4 * j + 1, 1.0));
            }
            if e.head == v {
                deriv.push((4 * j + 3, 1.0));
            }
        }
        rows.push(deriv);
    }
    debug_assert_eq!(rows.len(), 2 * n);
    let mut p = DMatrix::<f64>::zeros(rows.len(), 4 * n);
    for (r, row) in rows.iter().enumerate() {
        for &(c, v) in row {
            p[(r, c)] = v;
        }
    }
    p
}

#[derive(Debug, Clone)]
pub struct ResidualReport {
    /// `|P_std x|`.
    pub vertex: f64,
    /// Worst of the two edge-equation residuals, per edge.
    pub edge_equations: Vec<f64>,
    /// `| |(A,B)| - |(C,D)| |` per edge.
    pub norm_mismatch: Vec<f64>,
}

impl ResidualReport {
    pub fn worst(&self) -> f64 {
        let e = self.edge_equations.iter().cloned().fold(0.0, f64::max);
        let m = self.norm_mismatch.iter().cloned().fold(0.0, f64::max);
        self.vertex.max(e).max(m)
    }
}

pub fn trace_residuals(bs: &BondSystem, x: &TraceVector) -> ResidualReport {
    let g = bs.graph();
    let n = g.edge_count();
    let p = standard_conditions_matrix(g);
    let xv = DVector::<C64>::from_row_slice(x.entries());
    let pc = p.map(|v| C64::new(v, 0.0));
    let vertex = (pc * &xv).norm();
    let i = C64::new(0.0, 1.0);
    let mut edge_equations = Vec::with_capacity(n);
    let mut norm_mismatch = Vec::with_capacity(n);
    for j in 0..n {
        let (a, b, c, d) = (x.a(j), x.b(j), x.c(j), x.d(j));
        let z = x.z()[j];
        let e1 = (a + i * b - z * (c - i * d)).norm();
        let e2 = (c + i * d - z * (a - i * b)).norm();
        edge_equations.push(e1.max(e2));
        let nab = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let ncd = (c.norm_sqr() + d.norm_sqr()).sqrt();
        norm_mismatch.push((nab - ncd).abs());
    }
    ResidualReport {
        vertex,
        edge_equations,
        norm_mismatch,
    }
}

/// Evaluate the eigenfunction on edge `j` at arc length `t` from the tail,
/// using the `(A, B)` form.
pub fn eigenfunction_eval(
    x: &TraceVector,
    k: f64,
    lengths: &[f64],
    j: usize,
    t: f64,
) -> Result<C64, TraceError> {
    let len = lengths[j];
    if !(0.0..=len).contains(&t) {
        return Err(TraceError::OutOfRange { edge: j, t, len });
    }
    Ok(x.a(j) * (k * t).cos() + x.b(j) * (k * t).sin())
}

/// Same value from the `(C, D)` end of the edge.
pub fn eigenfunction_eval_from_end(
    x: &TraceVector,
    k: f64,
    lengths: &[f64],
    j: usize,
    t: f64,
) -> Result<C64, TraceError> {
    let len = lengths[j];
    if !(0.0..=len).contains(&t) {
        return Err(TraceError::OutOfRange { edge: j, t, len });
    }
    let s = k * (len - t);
    Ok(x.c(j) * s.cos() + x.d(j) * s.sin())
}

#[derive(Debug, Clone)]
pub struct NonvanishingReport {
    pub nonvanishing: bool,
    /// Smallest modulus among the non-excluded entries.
    pub min_abs: f64,
    /// Grouped index attaining the minimum.
    pub argmin: usize,
    /// Grouped indices excluded as forced zeros (derivative entries at
    /// degree-one vertices).
    pub excluded: Vec<usize>,
}

/// Does the trace vanish anywhere it is not forced to? Neumann entries at
/// degree-one vertices are zero by the vertex condition and are excluded.
pub fn nonvanishing_test(g: &MetricGraph, x: &TraceVector) -> NonvanishingReport {
    let mut excluded = Vec::new();
    for (j, e) in g.edges().iter().enumerate() {
        if g.degree(e.tail) == 1 {
            excluded.push(4 * j + 1);
        }
        if g.degree(e.head) == 1 {
            excluded.push(4 * j + 3);
        }
    }
    let mut min_abs = f64::INFINITY;
    let mut argmin = 0;
    for (i, v) in x.entries().iter().enumerate() {
        if excluded.contains(&i) {
            continue;
        }
        if v.norm() < min_abs {
            min_abs = v.norm();
            argmin = i;
        }
    }
    NonvanishingReport {
        nonvanishing: min_abs > NONVANISHING_TOL,
        min_abs,
        argmin,
        excluded,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryClass {
    Generic,
    LoopSupported(usize),
    MandarinSymmetric,
    MandarinAntisymmetric,
}

/// Symmetry classification of a normalized trace. Mandarin traces must match
/// one of the two reflection patterns at a simple eigenvalue; failing both is
/// reported as an error since it signals a numerical or convention bug.
pub fn classify_symmetry(g: &MetricGraph, x: &TraceVector) -> Result<SymmetryClass, TraceError> {
    let class = g.classify();
    let tol = CLASSIFICATION_TOL;
    let n = g.edge_count();
    if class.is_mandarin {
        let mut sym_dev: f64 = 0.0;
        let mut asym_dev: f64 = 0.0;
        for j in 0..n {
            sym_dev = sym_dev
                .max((x.a(j) - x.c(j)).norm())
                .max((x.b(j) - x.d(j)).norm());
            asym_dev = asym_dev
                .max((x.a(j) + x.c(j)).norm())
                .max((x.b(j) + x.d(j)).norm());
        }
        return if sym_dev <= tol {
            Ok(SymmetryClass::MandarinSymmetric)
        } else if asym_dev <= tol {
            Ok(SymmetryClass::MandarinAntisymmetric)
        } else {
            Err(TraceError::Unclassified { sym_dev, asym_dev })
        };
    }
    for &j in &class.loop_edges {
        let mut off_loop: f64 = 0.0;
        for i in 0..n {
            if i != j {
                for s in 0..4 {
                    off_loop = off_loop.max(x.entries()[4 * i + s].norm());
                }
            }
        }
        let pattern = off_loop
            .max(x.a(j).norm())
            .max(x.c(j).norm())
            .max((x.b(j) + x.d(j)).norm());
        if pattern <= tol {
            return Ok(SymmetryClass::LoopSupported(j));
        }
    }
    Ok(SymmetryClass::Generic)
}

/// True when the trace is reflection symmetric on every loop,
/// `(A_j, B_j) = (C_j, D_j)` for all loop edges. On a flower this selects the
/// symmetric factor shared with the mandarin of equal edge count.
pub fn symmetric_on_all_loops(g: &MetricGraph, x: &TraceVector) -> bool {
    let class = g.classify();
    class.loop_edges.iter().all(|&j| {
        (x.a(j) - x.c(j)).norm() <= CLASSIFICATION_TOL
            && (x.b(j) - x.d(j)).norm() <= CLASSIFICATION_TOL
    })
}

#[derive(Debug, Clone)]
pub struct EdgeSupportReport {
    /// Per edge: the eigenfunction vanishes identically by the amplitude
    /// criterion `|(A_j, B_j)| <= tol`.
    pub amplitude_vanishing: Vec<bool>,
    /// Per edge: the secular derivative criterion `|dP/dz_j| <= tol |grad P|`.
    pub gradient_vanishing: Vec<bool>,
}

/// Detects edges where the eigenfunction vanishes identically, by two
/// independent routes that must agree at a regular point: per-edge trace
/// amplitudes, and vanishing of the matching secular partial derivative.
pub fn edge_support(bs: &BondSystem, x: &TraceVector) -> Result<EdgeSupportReport, TraceError> {
    let n = bs.edge_count();
    let tol = CLASSIFICATION_TOL;
    let amplitude: Vec<bool> = (0..n)
        .map(|j| (x.a(j).norm_sqr() + x.b(j).norm_sqr()).sqrt() <= tol)
        .collect();
    let grad = secular_gradient(bs, x.z());
    let gnorm = grad.iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt();
    let gradient: Vec<bool> = grad.iter().map(|g| g.norm() <= tol * gnorm).collect();
    if amplitude != gradient {
        return Err(TraceError::SupportTestsInconsistent {
            amplitude,
            gradient,
        });
    }
    Ok(EdgeSupportReport {
        amplitude_vanishing: amplitude,
        gradient_vanishing: gradient,
    })
}
