//! Spectrum computation by monotone eigenphase tracking.
//!
//! The eigenphases of `U(exp(ik l))` all move counterclockwise as `k` grows,
//! with speed bounded between the minimal and maximal edge length (first
//! order perturbation gives `theta' = sum_j l_j (|a_j|^2 + |b_j|^2)` for a
//! unit eigenvector). `k` is in the spectrum exactly when a phase crosses 0
//! mod 2pi, and the eigenvalue's multiplicity is the number of simultaneous
//! crossings, i.e. the kernel dimension of `I - U`.
//!
//! The speed bracket turns root finding into interval arithmetic: on a step
//! where every phase moves less than pi/2, the number of crossings is
//! sandwiched between computable bounds, and intervals are bisected until the
//! bounds localize every crossing. No eigenvalue can be missed as long as the
//! initial grid step keeps the per-step motion below pi/2.
//!
//! Everything here is pure over an immutable [`BondSystem`]; subwindows are
//! independent and the merged result does not depend on evaluation order, so
//! windows can be partitioned across workers.

use nalgebra::DVector;
use thiserror::Error;

use crate::linalg::{kernel_basis, unitary_eigenphases, C64, TAU};
use crate::scattering::BondSystem;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("window ({k_min}, {k_max}] is invalid; need 0 < k_min < k_max")]
    BadWindow { k_min: f64, k_max: f64 },
    #[error("window too large: expected about {expected:.0} eigenvalues, guard is {guard:.0}")]
    WindowTooLarge { expected: f64, guard: f64 },
    #[error("rank decision ambiguous at k={k}: singular values {sigmas:?} straddle the threshold band")]
    RankAmbiguous { k: f64, sigmas: Vec<f64> },
    #[error("rank decision ambiguous at torus point: singular values {sigmas:?} straddle the threshold band")]
    RankAmbiguousAtPoint { sigmas: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Initial grid step safety factor against the exact pi/2 motion bound.
    pub grid_safety: f64,
    /// Terminal bisection width; located roots are accurate to this scale.
    pub k_tol: f64,
    /// Roots closer than this merge into one record; the effective radius is
    /// raised when short edges would blur the kernel rank decision.
    pub merge_tol: f64,
    /// On-manifold residual coefficient (times 2N).
    pub on_manifold_coef: f64,
    /// Kernel/rest separation factor demanded before a multiplicity is
    /// accepted.
    pub ambiguity_factor: f64,
    /// Cap on the expected eigenvalue count (L/pi)(k_max - k_min) per call.
    pub resource_guard: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid_safety: 0.99,
            k_tol: 1e-12,
            merge_tol: 1e-9,
            on_manifold_coef: 1e-10,
            ambiguity_factor: 10.0,
            resource_guard: 1e6,
        }
    }
}

/// One located eigenvalue: `k`, kernel dimension, an orthonormal basis of
/// `ker(I - U(exp(ik l)))` (bond amplitude vectors), and the smallest
/// singular value at `k` as the residual.
#[derive(Debug, Clone)]
pub struct EigenvalueRecord {
    pub k: f64,
    pub multiplicity: usize,
    pub kernel_basis: Vec<DVector<C64>>,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SpectrumWindow {
    pub lengths: Vec<f64>,
    pub k_min: f64,
    pub k_max: f64,
    pub records: Vec<EigenvalueRecord>,
}

impl SpectrumWindow {
    pub fn total_count(&self) -> usize {
        self.records.iter().map(|r| r.multiplicity).sum()
    }

    /// `k` values repeated by multiplicity, ascending.
    pub fn flattened(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_count());
        for r in &self.records {
            for _ in 0..r.multiplicity {
                out.push(r.k);
            }
        }
        out
    }

    /// CSV export: header `k,multiplicity,residual`, 15 significant digits,
    /// rows ascending in `k`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,multiplicity,residual\n");
        for r in &self.records {
            out.push_str(&format!(
                "{:.14e},{},{:.14e}\n",
                r.k, r.multiplicity, r.residual
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct WeylReport {
    pub count: usize,
    pub predicted: f64,
    pub deviation: f64,
    pub flagged: bool,
}

/// Sorted eigenphases of `U(exp(ik l))` in `[0, 2pi)`.
pub fn eigenphases(bs: &BondSystem, lengths: &[f64], k: f64) -> Vec<f64> {
    assert!(k > 0.0, "eigenphases requires k > 0");
    let (phases, dev) = unitary_eigenphases(&bs.evaluate_u(&BondSystem::torus_point(lengths, k)));
    debug_assert!(dev <= 1e-12, "eigenvalue modulus off the unit circle: {dev}");
    phases
}

/// All eigenvalues in `(k_min, k_max]` with multiplicities and kernels.
pub fn solve_spectrum(
    bs: &BondSystem,
    lengths: &[f64],
    k_min: f64,
    k_max: f64,
) -> Result<SpectrumWindow, SolverError> {
    solve_spectrum_with(bs, lengths, k_min, k_max, &SolverConfig::default())
}

pub fn solve_spectrum_with(
    bs: &BondSystem,
    lengths: &[f64],
    k_min: f64,
    k_max: f64,
    cfg: &SolverConfig,
) -> Result<SpectrumWindow, SolverError> {
    assert_eq!(lengths.len(), bs.edge_count(), "length vector dimension");
    if !(0.0 < k_min && k_min < k_max) {
        return Err(SolverError::BadWindow { k_min, k_max });
    }
    let total_len: f64 = lengths.iter().sum();
    let expected = total_len / std::f64::consts::PI * (k_max - k_min);
    if expected > cfg.resource_guard {
        return Err(SolverError::WindowTooLarge {
            expected,
            guard: cfg.resource_guard,
        });
    }
    let l_min = lengths.iter().cloned().fold(f64::INFINITY, f64::min);
    let l_max = lengths.iter().cloned().fold(0.0, f64::max);
    let on_tol = cfg.on_manifold_coef * (bs.bond_count() as f64);
    // An unmerged neighbor must sit clearly above the kernel threshold, so
    // the merge radius grows when the shortest edge is short.
    let merge_tol = cfg.merge_tol.max(4.0 * on_tol / l_min);

    let phases_at = |k: f64| eigenphases(bs, lengths, k);

    // Initial grid: motion strictly below pi/2 per step.
    let step = cfg.grid_safety * (std::f64::consts::FRAC_PI_2) / l_max;
    let mut grid = vec![k_min];
    let mut k = k_min;
    while k < k_max {
        k = (k + step).min(k_max);
        grid.push(k);
    }

    // Bisection on segments carrying crossing-count bounds.
    struct Segment {
        kl: f64,
        kr: f64,
        tl: Vec<f64>,
        tr: Vec<f64>,
    }
    let mut stack: Vec<Segment> = Vec::new();
    let mut prev_t = phases_at(grid[0]);
    for w in grid.windows(2) {
        let tr = phases_at(w[1]);
        stack.push(Segment {
            kl: w[0],
            kr: w[1],
            tl: std::mem::replace(&mut prev_t, tr.clone()),
            tr,
        });
    }
    let mut candidates: Vec<f64> = Vec::new();
    while let Some(seg) = stack.pop() {
        let dk = seg.kr - seg.kl;
        let (_, hi) = crossing_bounds(&seg.tl, &seg.tr, dk * l_min, dk * l_max);
        if hi == 0 {
            continue;
        }
        if dk <= cfg.k_tol {
            candidates.push(0.5 * (seg.kl + seg.kr));
            continue;
        }
        let km = 0.5 * (seg.kl + seg.kr);
        let tm = phases_at(km);
        stack.push(Segment {
            kl: seg.kl,
            kr: km,
            tl: seg.tl,
            tr: tm.clone(),
        });
        stack.push(Segment {
            kl: km,
            kr: seg.kr,
            tl: tm,
            tr: seg.tr,
        });
    }
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Merge duplicates and near-degenerate roots, then read multiplicity off
    // the kernel at the best point of each cluster.
    let residual_at = |k: f64| -> f64 {
        let a = i_minus_u(bs, lengths, k);
        crate::linalg::singular_values_ascending(&a).0[0]
    };
    let mut clusters: Vec<(f64, f64, f64)> = Vec::new(); // (k_best, sigma_best, spread)
    let mut i = 0;
    while i < candidates.len() {
        let mut j = i;
        while j + 1 < candidates.len() && candidates[j + 1] - candidates[j] <= merge_tol {
            j += 1;
        }
        let members = &candidates[i..=j];
        let spread = members[members.len() - 1] - members[0];
        let (mut k_best, mut s_best) = (members[0], residual_at(members[0]));
        for &m in &members[1..] {
            let s = residual_at(m);
            if s < s_best {
                k_best = m;
                s_best = s;
            }
        }
        clusters.push((k_best, s_best, spread));
        i = j + 1;
    }

    let mut records = Vec::new();
    for (idx, &(k_star, sigma, spread)) in clusters.iter().enumerate() {
        if sigma > on_tol || k_star <= k_min {
            continue; // spurious candidate or boundary exclusion
        }
        let mult_tol = on_tol.max(3.0 * l_max * (spread + cfg.k_tol));
        let a = i_minus_u(bs, lengths, k_star);
        let (sigmas, basis) = kernel_basis(&a, mult_tol);
        let d = basis.len();
        if d == 0 {
            continue;
        }
        // The first excluded singular value must be separated either from
        // the threshold band or by the distance to the nearest other root.
        if d < sigmas.len() {
            let next = sigmas[d];
            let gap_prev = if idx > 0 { k_star - clusters[idx - 1].0 } else { f64::INFINITY };
            let gap_next = if idx + 1 < clusters.len() {
                clusters[idx + 1].0 - k_star
            } else {
                f64::INFINITY
            };
            let gap = gap_prev.min(gap_next);
            if next <= cfg.ambiguity_factor * mult_tol && next <= 0.25 * l_min * gap {
                return Err(SolverError::RankAmbiguous {
                    k: k_star,
                    sigmas: sigmas.iter().take(d + 2).cloned().collect(),
                });
            }
        }
        records.push(EigenvalueRecord {
            k: k_star,
            multiplicity: d,
            kernel_basis: basis,
            residual: sigma,
        });
    }

    Ok(SpectrumWindow {
        lengths: lengths.to_vec(),
        k_min,
        k_max,
        records,
    })
}

/// Kernel dimension of `I - U(z)` at a torus point, with the kernel basis.
/// Zero when the point is off the manifold. Errors when singular values
/// straddle the decision band.
pub fn multiplicity(
    bs: &BondSystem,
    z: &[C64],
) -> Result<(usize, Vec<DVector<C64>>), SolverError> {
    multiplicity_with(bs, z, &SolverConfig::default())
}

pub fn multiplicity_with(
    bs: &BondSystem,
    z: &[C64],
    cfg: &SolverConfig,
) -> Result<(usize, Vec<DVector<C64>>), SolverError> {
    let on_tol = cfg.on_manifold_coef * (bs.bond_count() as f64);
    let two_n = bs.bond_count();
    let mut a = bs.evaluate_u(z).map(|v| -v);
    for i in 0..two_n {
        a[(i, i)] += C64::new(1.0, 0.0);
    }
    let (sigmas, basis) = kernel_basis(&a, on_tol);
    let d = basis.len();
    if d < sigmas.len() && sigmas[d] <= 100.0 * on_tol {
        return Err(SolverError::RankAmbiguousAtPoint {
            sigmas: sigmas.iter().take(d + 2).cloned().collect(),
        });
    }
    Ok((d, basis))
}

/// Eigenvalue count against the Weyl prediction `(L/pi) k_max`. Deviations
/// beyond `2N` indicate missed or spurious roots.
pub fn weyl_check(window: &SpectrumWindow) -> WeylReport {
    let total_len: f64 = window.lengths.iter().sum();
    let predicted = total_len / std::f64::consts::PI * window.k_max;
    let count = window.total_count();
    let deviation = count as f64 - predicted;
    let flagged = deviation.abs() > 2.0 * window.lengths.len() as f64;
    WeylReport {
        count,
        predicted,
        deviation,
        flagged,
    }
}

fn i_minus_u(bs: &BondSystem, lengths: &[f64], k: f64) -> nalgebra::DMatrix<C64> {
    let two_n = bs.bond_count();
    let mut a = bs
        .evaluate_u(&BondSystem::torus_point(lengths, k))
        .map(|v| -v);
    for i in 0..two_n {
        a[(i, i)] += C64::new(1.0, 0.0);
    }
    a
}

/// Phases carry a few ulps of error, so the decision thresholds are padded:
/// the "must cross" bounds shrink and the "can cross" bounds widen. An
/// underestimated upper bound would silently discard a root (the exact
/// boundary is hit whenever the motion equals the bound, e.g. on equilateral
/// graphs); an overestimate only costs bisection work.
const PHASE_SLACK: f64 = 1e-12;

/// Bounds on the number of phases crossing 0 over a step where each phase
/// advances by an amount in `[m_lo, m_hi]`, `m_hi < pi/2`:
/// a phase at `theta` crosses iff `theta + motion >= 2pi`, and a phase below
/// `m_lo` on the right end must have wrapped.
fn crossing_bounds(tl: &[f64], tr: &[f64], m_lo: f64, m_hi: f64) -> (usize, usize) {
    debug_assert!(m_hi < std::f64::consts::FRAC_PI_2 + 1e-9);
    let l_must = tl.iter().filter(|&&t| t >= TAU - m_lo + PHASE_SLACK).count();
    let r_must = tr.iter().filter(|&&t| t < m_lo - PHASE_SLACK).count();
    let l_can = tl.iter().filter(|&&t| t >= TAU - m_hi - PHASE_SLACK).count();
    let r_can = tr.iter().filter(|&&t| t < m_hi + PHASE_SLACK).count();
    (l_must.max(r_must), l_can.min(r_can))
}
