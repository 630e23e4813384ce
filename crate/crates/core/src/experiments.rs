//! Desk-scale statistical experiments: density of eigenvalue/eigenfunction
//! properties along the spectrum of a fixed graph with (generically chosen)
//! random lengths, and the matched fraction of the spectra of two graphs
//! sharing one length vector.
//!
//! The limits these experiments probe are exact statements for Q-independent
//! lengths; continuous sampling realizes Q-independence almost surely, and a
//! small-denominator filter rejects draws that are rationally related at the
//! resolution of the solver.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{AssumptionViolation, GraphError, MetricGraph};
use crate::scattering::{BondSystem, ScatteringError};
use crate::solver::{solve_spectrum_with, SolverConfig, SolverError, SpectrumWindow};
use crate::trace::{
    classify_symmetry, nonvanishing_test, traces_from_kernel, SymmetryClass, TraceError,
};

pub const DEFAULT_MATCH_TOL_BASE: f64 = 1e-8;
const OFFENDER_CAP: usize = 32;
const PAIR_CAP: usize = 64;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid length range [{0}, {1}]; need 0 < a < b")]
    InvalidRange(f64, f64),
    #[error("could not draw rationally independent lengths after {0} attempts")]
    ResampleExhausted(usize),
    #[error("assumption violated: {0:?}")]
    AssumptionViolated(Vec<AssumptionViolation>),
    #[error("edge counts differ: {0} vs {1}")]
    EdgeCountMismatch(usize, usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Uniform lengths in `[a, b]`, deterministic per seed, redrawn until no
/// pairwise ratio is within 1e-9 of a fraction p/q with p, q <= 50.
pub fn random_lengths(
    n: usize,
    seed: u64,
    range: (f64, f64),
) -> Result<Vec<f64>, ExperimentError> {
    let (a, b) = range;
    if !(0.0 < a && a < b) || !a.is_finite() || !b.is_finite() {
        return Err(ExperimentError::InvalidRange(a, b));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attempts = 100;
    for _ in 0..attempts {
        let lengths: Vec<f64> = (0..n).map(|_| rng.random_range(a..b)).collect();
        if !has_small_rational_ratio(&lengths) {
            return Ok(lengths);
        }
    }
    Err(ExperimentError::ResampleExhausted(attempts))
}

/// True when some pairwise ratio sits within 1e-9 of p/q, p, q <= 50.
pub(crate) fn has_small_rational_ratio(lengths: &[f64]) -> bool {
    for i in 0..lengths.len() {
        for j in 0..lengths.len() {
            if i == j {
                continue;
            }
            let r = lengths[i] / lengths[j];
            for q in 1..=50u32 {
                let p = (r * q as f64).round();
                if (1.0..=50.0).contains(&p) && (r - p / q as f64).abs() < 1e-9 {
                    return true;
                }
            }
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenericityProperty {
    /// Failing count: eigenvalues with multiplicity above one.
    Simple,
    /// Failing count: traces vanishing somewhere they are not forced to
    /// (loop-supported eigenfunctions are exempt).
    Nonvanishing,
    /// Occurring count: eigenfunctions supported on a single loop.
    LoopSupported,
}

impl GenericityProperty {
    pub fn name(&self) -> &'static str {
        match self {
            GenericityProperty::Simple => "simple",
            GenericityProperty::Nonvanishing => "nonvanishing",
            GenericityProperty::LoopSupported => "loop_supported",
        }
    }
}

/// Outcome of a property scan along a spectrum window. `count` is the
/// failing count for `simple`/`nonvanishing` and the occurring count for
/// `loop_supported`; `fraction = count / total` with a Wilson 95% band.
#[derive(Debug, Clone)]
pub struct DensityReport {
    pub property: String,
    pub lengths: Vec<f64>,
    pub seed: Option<u64>,
    pub k_min: f64,
    pub k_max: f64,
    pub total: usize,
    pub count: usize,
    pub fraction: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub offenders: Vec<f64>,
    pub on_manifold_coef: f64,
}

impl DensityReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("density-report\n");
        out.push_str(&format!("tool_version: {}\n", env!("CARGO_PKG_VERSION")));
        out.push_str(&format!("property: {}\n", self.property));
        out.push_str(&format!(
            "seed: {}\n",
            self.seed.map_or("none".to_string(), |s| s.to_string())
        ));
        out.push_str(&format!(
            "lengths: {}\n",
            self.lengths
                .iter()
                .map(|l| format!("{l:.16e}"))
                .collect::<Vec<_>>()
                .join(",")
        ));
        out.push_str(&format!(
            "window: ({:.16e}, {:.16e}]\n",
            self.k_min, self.k_max
        ));
        out.push_str(&format!("on_manifold_coef: {:.16e}\n", self.on_manifold_coef));
        out.push_str(&format!("total: {}\n", self.total));
        out.push_str(&format!("count: {}\n", self.count));
        out.push_str(&format!("fraction: {:.16e}\n", self.fraction));
        out.push_str(&format!(
            "wilson_95: [{:.16e}, {:.16e}]\n",
            self.wilson_low, self.wilson_high
        ));
        if self.offenders.is_empty() {
            out.push_str("offenders: none\n");
        } else {
            out.push_str(&format!(
                "offenders: {}\n",
                self.offenders
                    .iter()
                    .map(|k| format!("{k:.14e}"))
                    .collect::<Vec<_>>()
                    .join(",")
            ));
        }
        out
    }
}

pub fn genericity_density(
    g: &MetricGraph,
    property: GenericityProperty,
    lengths: &[f64],
    k_max: f64,
    seed: Option<u64>,
) -> Result<DensityReport, ExperimentError> {
    genericity_density_with(g, property, lengths, k_max, seed, &SolverConfig::default())
}

pub fn genericity_density_with(
    g: &MetricGraph,
    property: GenericityProperty,
    lengths: &[f64],
    k_max: f64,
    seed: Option<u64>,
    cfg: &SolverConfig,
) -> Result<DensityReport, ExperimentError> {
    let class = g.classify();
    if !class.satisfies_assumption {
        return Err(ExperimentError::AssumptionViolated(class.violation_reasons));
    }
    let g = g.with_lengths(lengths)?;
    let bs = BondSystem::build(&g)?;
    let k_min = low_window_edge(lengths);
    let window = solve_spectrum_with(&bs, lengths, k_min, k_max, cfg)?;
    let total = window.total_count();
    let mut count = 0usize;
    let mut offenders = Vec::new();
    for rec in &window.records {
        let hit = match property {
            GenericityProperty::Simple => {
                if rec.multiplicity > 1 {
                    count += rec.multiplicity;
                    true
                } else {
                    false
                }
            }
            GenericityProperty::Nonvanishing => {
                let z = BondSystem::torus_point(lengths, rec.k);
                let traces = traces_from_kernel(&bs, &z, &rec.kernel_basis);
                let mut failing = false;
                for t in &traces {
                    let is_loop = matches!(
                        classify_symmetry(&g, t)?,
                        SymmetryClass::LoopSupported(_)
                    );
                    if !is_loop && !nonvanishing_test(&g, t).nonvanishing {
                        failing = true;
                    }
                }
                if failing {
                    count += rec.multiplicity;
                }
                failing
            }
            GenericityProperty::LoopSupported => {
                let z = BondSystem::torus_point(lengths, rec.k);
                let traces = traces_from_kernel(&bs, &z, &rec.kernel_basis);
                let mut occurring = false;
                for t in &traces {
                    if matches!(classify_symmetry(&g, t)?, SymmetryClass::LoopSupported(_)) {
                        occurring = true;
                    }
                }
                if occurring {
                    count += 1;
                }
                occurring
            }
        };
        if hit && offenders.len() < OFFENDER_CAP {
            offenders.push(rec.k);
        }
    }
    let (wilson_low, wilson_high) = wilson_interval(count, total);
    Ok(DensityReport {
        property: property.name().to_string(),
        lengths: lengths.to_vec(),
        seed,
        k_min,
        k_max,
        total,
        count,
        fraction: if total == 0 { 0.0 } else { count as f64 / total as f64 },
        wilson_low,
        wilson_high,
        offenders,
        on_manifold_coef: cfg.on_manifold_coef,
    })
}

/// Matched fraction of two spectra computed with one shared length vector.
#[derive(Debug, Clone)]
pub struct MatchReport {
    pub lengths: Vec<f64>,
    pub seed: Option<u64>,
    pub k_min: f64,
    pub k_max: f64,
    pub total_first: usize,
    pub total_second: usize,
    pub matched: usize,
    pub fraction: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub match_tol_base: f64,
    pub matched_pairs: Vec<(f64, f64)>,
    pub on_manifold_coef: f64,
}

impl MatchReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("common-spectrum-report\n");
        out.push_str(&format!("tool_version: {}\n", env!("CARGO_PKG_VERSION")));
        out.push_str(&format!(
            "seed: {}\n",
            self.seed.map_or("none".to_string(), |s| s.to_string())
        ));
        out.push_str(&format!(
            "lengths: {}\n",
            self.lengths
                .iter()
                .map(|l| format!("{l:.16e}"))
                .collect::<Vec<_>>()
                .join(",")
        ));
        out.push_str(&format!(
            "window: ({:.16e}, {:.16e}]\n",
            self.k_min, self.k_max
        ));
        out.push_str(&format!("match_tol_base: {:.16e}\n", self.match_tol_base));
        out.push_str(&format!("on_manifold_coef: {:.16e}\n", self.on_manifold_coef));
        out.push_str(&format!("total_first: {}\n", self.total_first));
        out.push_str(&format!("total_second: {}\n", self.total_second));
        out.push_str(&format!("matched: {}\n", self.matched));
        out.push_str(&format!("fraction: {:.16e}\n", self.fraction));
        out.push_str(&format!(
            "wilson_95: [{:.16e}, {:.16e}]\n",
            self.wilson_low, self.wilson_high
        ));
        if self.matched_pairs.is_empty() {
            out.push_str("pairs: none\n");
        } else {
            out.push_str(&format!(
                "pairs: {}\n",
                self.matched_pairs
                    .iter()
                    .map(|(a, b)| format!("{a:.14e}~{b:.14e}"))
                    .collect::<Vec<_>>()
                    .join(",")
            ));
        }
        out
    }
}

pub fn common_spectrum(
    g1: &MetricGraph,
    g2: &MetricGraph,
    lengths: &[f64],
    k_max: f64,
    seed: Option<u64>,
) -> Result<MatchReport, ExperimentError> {
    common_spectrum_with(
        g1,
        g2,
        lengths,
        k_max,
        seed,
        DEFAULT_MATCH_TOL_BASE,
        &SolverConfig::default(),
    )
}

pub fn common_spectrum_with(
    g1: &MetricGraph,
    g2: &MetricGraph,
    lengths: &[f64],
    k_max: f64,
    seed: Option<u64>,
    match_tol_base: f64,
    cfg: &SolverConfig,
) -> Result<MatchReport, ExperimentError> {
    if g1.edge_count() != g2.edge_count() {
        return Err(ExperimentError::EdgeCountMismatch(
            g1.edge_count(),
            g2.edge_count(),
        ));
    }
    for g in [g1, g2] {
        let class = g.classify();
        if !class.satisfies_assumption {
            return Err(ExperimentError::AssumptionViolated(class.violation_reasons));
        }
    }
    let k_min = low_window_edge(lengths);
    let solve = |g: &MetricGraph| -> Result<SpectrumWindow, ExperimentError> {
        let g = g.with_lengths(lengths)?;
        let bs = BondSystem::build(&g)?;
        Ok(solve_spectrum_with(&bs, lengths, k_min, k_max, cfg)?)
    };
    let w1 = solve(g1)?;
    let w2 = solve(g2)?;
    let a = w1.flattened();
    let b = w2.flattened();
    let (matched_pairs_full, matched) = match_sorted(&a, &b, match_tol_base);
    let total_first = a.len();
    let (wilson_low, wilson_high) = wilson_interval(matched, total_first);
    Ok(MatchReport {
        lengths: lengths.to_vec(),
        seed,
        k_min,
        k_max,
        total_first,
        total_second: b.len(),
        matched,
        fraction: if total_first == 0 {
            0.0
        } else {
            matched as f64 / total_first as f64
        },
        wilson_low,
        wilson_high,
        match_tol_base,
        matched_pairs: matched_pairs_full.into_iter().take(PAIR_CAP).collect(),
        on_manifold_coef: cfg.on_manifold_coef,
    })
}

/// Greedy multiplicity-aware matching of two ascending multisets with the
/// scale-aware band `|k - k'| <= base (1 + k)`.
pub fn match_sorted(a: &[f64], b: &[f64], tol_base: f64) -> (Vec<(f64, f64)>, usize) {
    let mut pairs = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        let tol = tol_base * (1.0 + a[i]);
        if (a[i] - b[j]).abs() <= tol {
            pairs.push((a[i], b[j]));
            i += 1;
            j += 1;
        } else if a[i] < b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    let matched = pairs.len();
    (pairs, matched)
}

fn low_window_edge(lengths: &[f64]) -> f64 {
    let total: f64 = lengths.iter().sum();
    1e-3 * std::f64::consts::PI / total
}

/// Wilson 95% score interval for a binomial fraction.
pub fn wilson_interval(count: usize, total: usize) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054_f64;
    let n = total as f64;
    let p = count as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}
