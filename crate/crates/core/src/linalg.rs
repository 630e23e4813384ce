//! Small dense complex linear algebra shared by the secular and solver
//! modules: the Faddeev-LeVerrier determinant/adjugate recursion, SVD-based
//! kernel extraction, and eigenphases of unitary matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

pub type C64 = Complex<f64>;

pub const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Determinant and adjugate together, by the Faddeev-LeVerrier recursion.
///
/// Unlike `det * inverse`, this stays exact (up to roundoff) when the matrix
/// is singular, which is precisely where the adjugate carries the spectral
/// information we need. O(n^4), fine at the dimensions used here.
pub fn det_and_adjugate(a: &DMatrix<C64>) -> (C64, DMatrix<C64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square matrix required");
    if n == 0 {
        return (C64::new(1.0, 0.0), DMatrix::zeros(0, 0));
    }
    // M_1 = I, c_{n-1} = -tr(A); then
    // M_k = A M_{k-1} + c_{n-k+1} I, c_{n-k} = -tr(A M_k)/k.
    let mut mk = DMatrix::<C64>::identity(n, n);
    let mut c = -a.trace();
    for k in 2..=n {
        let mut next = a * &mk;
        for i in 0..n {
            next[(i, i)] += c;
        }
        mk = next;
        c = -(a * &mk).trace() / C64::new(k as f64, 0.0);
    }
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let det = c * sign;
    let adj = mk.map(|v| v * (-sign));
    (det, adj)
}

pub fn adjugate(a: &DMatrix<C64>) -> DMatrix<C64> {
    det_and_adjugate(a).1
}

/// Singular values in ascending order paired with the corresponding right
/// singular vectors (columns).
pub fn singular_values_ascending(a: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("svd with v requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[i]
            .partial_cmp(&svd.singular_values[j])
            .unwrap()
    });
    let sigmas: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = DMatrix::<C64>::zeros(v_t.ncols(), order.len());
    for (col, &i) in order.iter().enumerate() {
        for r in 0..v_t.ncols() {
            v[(r, col)] = v_t[(i, r)].conj();
        }
    }
    (sigmas, v)
}

/// Orthonormal basis of the (numerical) kernel: right singular vectors whose
/// singular value is at most `tol`.
pub fn kernel_basis(a: &DMatrix<C64>, tol: f64) -> (Vec<f64>, Vec<DVector<C64>>) {
    let (sigmas, v) = singular_values_ascending(a);
    let dim = sigmas.iter().take_while(|&&s| s <= tol).count();
    let basis = (0..dim).map(|c| DVector::from(v.column(c).into_owned())).collect();
    (sigmas, basis)
}

/// Eigenvalue arguments of a (numerically unitary) matrix, sorted in [0, 2pi).
/// Returns the phases and the largest deviation of |lambda| from 1 so callers
/// can assert unitarity at their own tolerance.
pub fn unitary_eigenphases(u: &DMatrix<C64>) -> (Vec<f64>, f64) {
    let eig = u.clone().eigenvalues().unwrap_or_else(|| {
        // The QR iteration very occasionally stalls on exact symmetry; a tiny
        // diagonal perturbation breaks the tie without moving phases beyond
        // roundoff.
        let mut p = u.clone();
        let n = p.nrows();
        for i in 0..n {
            p[(i, i)] *= C64::new(1.0, 1e-14 * (i as f64 + 1.0));
        }
        p.eigenvalues().expect("eigenvalue iteration failed twice")
    });
    let mut modulus_dev: f64 = 0.0;
    let mut phases: Vec<f64> = eig
        .iter()
        .map(|l| {
            modulus_dev = modulus_dev.max((l.norm() - 1.0).abs());
            let mut t = l.arg();
            if t < 0.0 {
                t += TAU;
            }
            if t >= TAU {
                t -= TAU;
            }
            t
        })
        .collect();
    phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (phases, modulus_dev)
}
