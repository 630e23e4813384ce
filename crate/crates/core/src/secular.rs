//! The secular polynomial `P(z) = det(I - U(z))` and its derived objects:
//! the gradient (via the adjugate and the Jacobi formula), the rank-one
//! matrix `A(z) = M adj(I - U(z)) M*` whose nonzero fibers span the trace
//! space, the explicit mandarin factors, monomial expansion on the
//! cube-roots-of-unity grid, and numerical verification of the loop /
//! mandarin / flower factorization identities.
//!
//! `P` is a polynomial of degree at most 2 in every variable; its zero set on
//! the unit torus is the secular manifold, and `k` is in the spectrum exactly
//! when `exp(ik l)` lies on it. Regular points (nonzero gradient) carry
//! simple eigenvalues, singular points multiple ones.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{AssumptionViolation, MetricGraph};
use crate::linalg::{adjugate, singular_values_ascending, C64, TAU};
use crate::scattering::BondSystem;
use crate::trace::grouped_of_stacked;

/// Coefficients with modulus below this are treated as exact zeros when
/// expanding determinants into monomials.
const COEFF_EPS: f64 = 1e-12;

/// A point is on the secular manifold when the smallest singular value of
/// `I - U(z)` is at most `ON_MANIFOLD_COEF * 2N`.
pub const ON_MANIFOLD_COEF: f64 = 1e-10;
/// Singular (multiple-eigenvalue) when the second singular value is also
/// tiny; cross-checked against the gradient norm.
pub const SINGULAR_SIGMA: f64 = 1e-8;
pub const SINGULAR_GRAD: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SecularError {
    #[error("mandarin requires at least 3 edges, got {0}")]
    MandarinTooSmall(usize),
    #[error("expansion guard exceeded: N = {0} > 10")]
    ExpansionGuardExceeded(usize),
    #[error("assumption violated: {0:?}")]
    AssumptionViolated(Vec<AssumptionViolation>),
}

/// `P(z) = det(I - U(z))`, defined on all of C^N.
pub fn secular_value(bs: &BondSystem, z: &[C64]) -> C64 {
    let two_n = bs.bond_count();
    let mut a = bs.evaluate_u(z).map(|v| -v);
    for i in 0..two_n {
        a[(i, i)] += C64::new(1.0, 0.0);
    }
    a.determinant()
}

/// Gradient of `P` by the Jacobi formula:
/// `dP/dz_j = -tr[adj(I - U) (d diag(z,z)/dz_j) S]`, i.e. minus the `j`-th
/// and `N+j`-th diagonal entries of `S adj(I - U)`.
pub fn secular_gradient(bs: &BondSystem, z: &[C64]) -> Vec<C64> {
    let n = bs.edge_count();
    let adj = adjugate(&i_minus_u(bs, z));
    let s = bs.s_matrix();
    let two_n = 2 * n;
    // (S adj) diagonal entries only.
    let mut grad = vec![C64::ZERO; n];
    for j in 0..n {
        let mut d = C64::ZERO;
        for t in 0..two_n {
            d += adj[(t, j)] * s[(j, t)];
            d += adj[(t, n + j)] * s[(n + j, t)];
        }
        grad[j] = -d;
    }
    grad
}

fn i_minus_u(bs: &BondSystem, z: &[C64]) -> DMatrix<C64> {
    let two_n = bs.bond_count();
    let mut a = bs.evaluate_u(z).map(|v| -v);
    for i in 0..two_n {
        a[(i, i)] += C64::new(1.0, 0.0);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularity {
    OffManifold,
    Regular,
    Singular,
}

/// Value, gradient and manifold classification of `P` at a torus point.
/// The on/off and regular/singular decisions follow the singular values of
/// `I - U(z)`, which are better conditioned than the raw polynomial values;
/// the gradient criterion is kept as a cross-check.
#[derive(Debug, Clone)]
pub struct SecularValue {
    pub z: Vec<C64>,
    pub value: C64,
    pub gradient: Vec<C64>,
    pub regularity: Regularity,
}

impl SecularValue {
    pub fn at(bs: &BondSystem, z: &[C64]) -> Self {
        let a = i_minus_u(bs, z);
        let value = a.determinant();
        let gradient = secular_gradient(bs, z);
        let (sigmas, _) = singular_values_ascending(&a);
        let two_n = bs.bond_count() as f64;
        let regularity = if sigmas[0] > ON_MANIFOLD_COEF * two_n {
            Regularity::OffManifold
        } else if sigmas.len() > 1 && sigmas[1] <= SINGULAR_SIGMA {
            Regularity::Singular
        } else {
            Regularity::Regular
        };
        if regularity == Regularity::Singular {
            debug_assert!(
                gradient.iter().map(|g| g.norm()).sum::<f64>() <= SINGULAR_GRAD * 10.0,
                "singular-value and gradient criteria disagree"
            );
        }
        SecularValue {
            z: z.to_vec(),
            value,
            gradient,
            regularity,
        }
    }
}

/// `A(z) = M adj(I - U(z)) M*`, expressed in the per-edge trace coordinates
/// `(A_j, B_j, C_j, D_j)`. Zero on the singular set; proportional to `x x*`
/// for any trace fiber vector `x` at regular manifold points.
pub fn rank_one_a(bs: &BondSystem, z: &[C64]) -> DMatrix<C64> {
    let n = bs.edge_count();
    let m = bs.m_matrix();
    let adj = adjugate(&i_minus_u(bs, z));
    let stacked = m * adj * m.adjoint();
    let four_n = 4 * n;
    let mut grouped = DMatrix::<C64>::zeros(four_n, four_n);
    for r in 0..four_n {
        let gr = grouped_of_stacked(n, r);
        for c in 0..four_n {
            grouped[(gr, grouped_of_stacked(n, c))] = stacked[(r, c)];
        }
    }
    grouped
}

/// The explicit symmetric and antisymmetric mandarin factors
/// `P_s = sum_j (z_j - 1) prod_{i != j} (z_i + 1)` and
/// `P_as = sum_j (z_j + 1) prod_{i != j} (z_i - 1)`.
pub fn mandarin_factors(z: &[C64]) -> Result<(C64, C64), SecularError> {
    let n = z.len();
    if n < 3 {
        return Err(SecularError::MandarinTooSmall(n));
    }
    let one = C64::new(1.0, 0.0);
    let mut sym = C64::ZERO;
    let mut asym = C64::ZERO;
    for j in 0..n {
        let mut term_s = z[j] - one;
        let mut term_a = z[j] + one;
        for (i, &zi) in z.iter().enumerate() {
            if i != j {
                term_s *= zi + one;
                term_a *= zi - one;
            }
        }
        sym += term_s;
        asym += term_a;
    }
    Ok((sym, asym))
}

/// Sparse monomial table of a polynomial of degree <= 2 per variable,
/// keyed by the multi-degree vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyTable {
    n: usize,
    coeffs: BTreeMap<Vec<u8>, C64>,
}

impl PolyTable {
    pub fn variables(&self) -> usize {
        self.n
    }

    pub fn coefficients(&self) -> &BTreeMap<Vec<u8>, C64> {
        &self.coeffs
    }

    pub fn coefficient(&self, degrees: &[u8]) -> C64 {
        self.coeffs.get(degrees).copied().unwrap_or(C64::ZERO)
    }

    pub fn evaluate(&self, z: &[C64]) -> C64 {
        assert_eq!(z.len(), self.n);
        let mut acc = C64::ZERO;
        for (d, &c) in &self.coeffs {
            let mut term = c;
            for (j, &dj) in d.iter().enumerate() {
                for _ in 0..dj {
                    term *= z[j];
                }
            }
            acc += term;
        }
        acc
    }

    pub fn max_coefficient_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Exact recovery of any function that is polynomial of degree <= 2 per
    /// variable, by the inverse DFT on the tensor grid of cube roots of
    /// unity (3 points per variable).
    pub fn interpolate<F: FnMut(&[C64]) -> C64>(n: usize, mut f: F) -> Result<Self, SecularError> {
        if n > 10 {
            return Err(SecularError::ExpansionGuardExceeded(n));
        }
        let size = 3usize.pow(n as u32);
        let omega = C64::from_polar(1.0, TAU / 3.0);
        let roots = [
            C64::new(1.0, 0.0),
            omega,
            omega * omega,
        ];
        let mut values = vec![C64::ZERO; size];
        let mut idx = vec![0u8; n];
        let mut point = vec![roots[0]; n];
        for (flat, slot) in values.iter_mut().enumerate() {
            let mut rem = flat;
            for j in 0..n {
                idx[j] = (rem % 3) as u8;
                point[j] = roots[idx[j] as usize];
                rem /= 3;
            }
            *slot = f(&point);
        }
        // One inverse size-3 DFT per axis turns samples into coefficients:
        // c_m = (v_0 + v_1 w^{-m} + v_2 w^{-2m}) / 3 along every line.
        let third = C64::new(1.0 / 3.0, 0.0);
        let wconj = [roots[0], roots[1].conj(), roots[2].conj()];
        let mut stride = 1usize;
        for _axis in 0..n {
            let block = stride * 3;
            for base in (0..size).step_by(block) {
                for off in 0..stride {
                    let i0 = base + off;
                    let (v0, v1, v2) = (values[i0], values[i0 + stride], values[i0 + 2 * stride]);
                    for (m, &w1) in wconj.iter().enumerate() {
                        values[i0 + m * stride] = (v0 + v1 * w1 + v2 * w1 * w1) * third;
                    }
                }
            }
            stride *= 3;
        }
        let mut coeffs = BTreeMap::new();
        for (flat, &c) in values.iter().enumerate() {
            if c.norm() > COEFF_EPS {
                let mut d = vec![0u8; n];
                let mut rem = flat;
                for slot in d.iter_mut() {
                    *slot = (rem % 3) as u8;
                    rem /= 3;
                }
                coeffs.insert(d, c);
            }
        }
        Ok(PolyTable { n, coeffs })
    }

    /// Polynomial division by `(1 - z_j)`. Returns the quotient and the
    /// remainder (a table constant in `z_j`, equal to the restriction
    /// `z_j = 1`). The division is exact when `(1 - z_j)` is a factor,
    /// making the remainder's coefficient norm the divisibility defect.
    pub fn divide_by_one_minus(&self, j: usize) -> (PolyTable, PolyTable) {
        assert!(j < self.n);
        // Group by the degrees away from axis j.
        let mut groups: BTreeMap<Vec<u8>, [C64; 3]> = BTreeMap::new();
        for (d, &c) in &self.coeffs {
            let mut rest = d.clone();
            let dj = rest[j] as usize;
            rest[j] = 0;
            groups.entry(rest).or_insert([C64::ZERO; 3])[dj] += c;
        }
        let mut quo = BTreeMap::new();
        let mut rem = BTreeMap::new();
        for (rest, [p0, p1, p2]) in groups {
            // p0 + p1 x + p2 x^2 = (1 - x)(q0 + q1 x) + r with
            // q1 = -p2, q0 = -p1 - p2, r = p0 + p1 + p2.
            let q1 = -p2;
            let q0 = -p1 - p2;
            let r = p0 + p1 + p2;
            if q0.norm() > COEFF_EPS {
                quo.insert(rest.clone(), q0);
            }
            if q1.norm() > COEFF_EPS {
                let mut d = rest.clone();
                d[j] = 1;
                quo.insert(d, q1);
            }
            if r.norm() > COEFF_EPS {
                rem.insert(rest, r);
            }
        }
        (
            PolyTable { n: self.n, coeffs: quo },
            PolyTable { n: self.n, coeffs: rem },
        )
    }

    /// Export format: one line per monomial, degrees then the coefficient as
    /// a (real, imaginary) pair at 17 significant digits, sorted by degree.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# polytable n={}", self.n);
        let _ = writeln!(out, "# degrees... re im");
        for (d, c) in &self.coeffs {
            for dj in d {
                let _ = write!(out, "{dj} ");
            }
            let _ = writeln!(out, "{:.16e} {:.16e}", c.re, c.im);
        }
        out
    }
}

/// Expands the secular polynomial into its monomial table.
pub fn expand_polynomial(bs: &BondSystem) -> Result<PolyTable, SecularError> {
    PolyTable::interpolate(bs.edge_count(), |z| secular_value(bs, z))
}

/// Multilinear table of the symmetric mandarin factor: the coefficient of
/// `prod_{i in T} z_i` is `2|T| - N`.
pub fn mandarin_symmetric_table(n: usize) -> PolyTable {
    subset_table(n, |t| C64::new(2.0 * t as f64 - n as f64, 0.0))
}

/// Antisymmetric factor: coefficient `(-1)^{N-|T|} (2|T| - N)`.
pub fn mandarin_antisymmetric_table(n: usize) -> PolyTable {
    subset_table(n, |t| {
        let sign = if (n - t).is_multiple_of(2) { 1.0 } else { -1.0 };
        C64::new(sign * (2.0 * t as f64 - n as f64), 0.0)
    })
}

fn subset_table(n: usize, coeff_of_popcount: impl Fn(usize) -> C64) -> PolyTable {
    assert!(n <= 20);
    let mut coeffs = BTreeMap::new();
    for mask in 0u32..(1 << n) {
        let c = coeff_of_popcount(mask.count_ones() as usize);
        if c.norm() > COEFF_EPS {
            let d: Vec<u8> = (0..n).map(|j| ((mask >> j) & 1) as u8).collect();
            coeffs.insert(d, c);
        }
    }
    PolyTable { n, coeffs }
}

/// Proportionality between two polynomial routes: the fitted constant and
/// the worst relative deviation observed.
#[derive(Debug, Clone)]
pub struct ProportionalityCheck {
    pub constant: C64,
    pub max_deviation: f64,
    pub samples: usize,
}

/// Numerical verification of the factorization identities applicable to a
/// graph: loop factors `(1 - z_j)`, the mandarin product `c P_s P_as`, and
/// the flower/mandarin coincidence of symmetric factors.
#[derive(Debug, Clone, Default)]
pub struct FactorizationReport {
    /// Remainder coefficient norm from dividing by `(1 - z_j)`, per loop.
    pub loop_division_remainders: Vec<(usize, f64)>,
    /// The quotient after all loop divisions (the symmetric factor).
    pub symmetric_factor: Option<PolyTable>,
    pub mandarin: Option<ProportionalityCheck>,
    pub flower_vs_mandarin: Option<ProportionalityCheck>,
}

impl FactorizationReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("factorization-report\n");
        let _ = writeln!(out, "tool_version: {}", env!("CARGO_PKG_VERSION"));
        if self.loop_division_remainders.is_empty() {
            out.push_str("loop_remainders: none\n");
        }
        for (edge, rem) in &self.loop_division_remainders {
            let _ = writeln!(out, "loop_remainder: edge={edge} remainder={rem:.16e}");
        }
        if let Some(check) = &self.mandarin {
            let _ = writeln!(
                out,
                "mandarin: c={:.16e}{:+.16e}i max_deviation={:.16e} samples={}",
                check.constant.re, check.constant.im, check.max_deviation, check.samples
            );
        }
        if let Some(check) = &self.flower_vs_mandarin {
            let _ = writeln!(
                out,
                "flower_vs_mandarin: c={:.16e}{:+.16e}i max_deviation={:.16e} coefficients={}",
                check.constant.re, check.constant.im, check.max_deviation, check.samples
            );
        }
        if let Some(sym) = &self.symmetric_factor {
            out.push_str("symmetric_factor:\n");
            out.push_str(&sym.to_text());
        }
        out
    }
}

pub fn verify_factorization(g: &MetricGraph) -> Result<FactorizationReport, SecularError> {
    verify_factorization_with(g, 10_000, 7)
}

pub fn verify_factorization_with(
    g: &MetricGraph,
    samples: usize,
    seed: u64,
) -> Result<FactorizationReport, SecularError> {
    let class = g.classify();
    if !class.satisfies_assumption {
        return Err(SecularError::AssumptionViolated(class.violation_reasons));
    }
    let bs = BondSystem::build(g).expect("validated graph");
    let n = g.edge_count();
    let mut report = FactorizationReport::default();

    if !class.loop_edges.is_empty() {
        let mut table = expand_polynomial(&bs)?;
        for &j in &class.loop_edges {
            let (quo, rem) = table.divide_by_one_minus(j);
            report
                .loop_division_remainders
                .push((j, rem.max_coefficient_norm()));
            table = quo;
        }
        report.symmetric_factor = Some(table);
    }

    if class.is_mandarin {
        let zero = vec![C64::ZERO; n];
        let (s0, a0) = mandarin_factors(&zero)?;
        let c = secular_value(&bs, &zero) / (s0 * a0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut max_dev: f64 = 0.0;
        for _ in 0..samples {
            let z: Vec<C64> = (0..n)
                .map(|_| C64::from_polar(1.0, rng.random_range(0.0..TAU)))
                .collect();
            let (s, a) = mandarin_factors(&z)?;
            let ratio = secular_value(&bs, &z) / (c * s * a);
            max_dev = max_dev.max((ratio - C64::new(1.0, 0.0)).norm());
        }
        report.mandarin = Some(ProportionalityCheck {
            constant: c,
            max_deviation: max_dev,
            samples,
        });
    }

    if class.is_flower {
        let sym = report
            .symmetric_factor
            .as_ref()
            .expect("flower has loops, divisions ran");
        let ms = mandarin_symmetric_table(n);
        // Fit the constant from the evaluation at z = 0.
        let zero = vec![C64::ZERO; n];
        let c = sym.evaluate(&zero) / ms.evaluate(&zero);
        let scale = sym.max_coefficient_norm();
        let mut max_dev: f64 = 0.0;
        let mut keys: std::collections::BTreeSet<Vec<u8>> = sym.coefficients().keys().cloned().collect();
        keys.extend(ms.coefficients().keys().cloned());
        let count = keys.len();
        for d in keys {
            let dev = (sym.coefficient(&d) - c * ms.coefficient(&d)).norm() / scale;
            max_dev = max_dev.max(dev);
        }
        report.flower_vs_mandarin = Some(ProportionalityCheck {
            constant: c,
            max_deviation: max_dev,
            samples: count,
        });
    }

    Ok(report)
}
