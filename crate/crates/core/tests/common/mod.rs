//! Closed-form spectral oracles used by the integration suites. These never
//! touch the scattering matrix or any determinant: star, flower and mandarin
//! spectra come from separation of variables, reduced to sign-change scans of
//! strictly monotone tangent/cotangent sums between their poles.
//!
//! Each test target compiles this module separately and uses its own subset.
#![allow(dead_code)]

/// Zeros of a function strictly monotone between consecutive poles, inside
/// `(k_min, k_max]`. `poles` need not be sorted or deduplicated.
pub fn monotone_zeros(
    f: &dyn Fn(f64) -> f64,
    poles: &[f64],
    k_min: f64,
    k_max: f64,
) -> Vec<f64> {
    let mut bounds: Vec<f64> = poles
        .iter()
        .cloned()
        .filter(|&p| p > k_min && p < k_max)
        .collect();
    bounds.push(k_min);
    bounds.push(k_max);
    bounds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bounds.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let pad = 1e-9;
    let mut zeros = Vec::new();
    for w in bounds.windows(2) {
        let (mut a, mut b) = (w[0] + pad, w[1] - pad);
        if a >= b {
            continue;
        }
        let (fa, fb) = (f(a), f(b));
        if fa == 0.0 {
            zeros.push(a);
            continue;
        }
        if fa.signum() == fb.signum() {
            continue;
        }
        let increasing = fb > fa;
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let fm = f(m);
            if (fm > 0.0) == increasing {
                b = m;
            } else {
                a = m;
            }
            if b - a < 1e-13 {
                break;
            }
        }
        zeros.push(0.5 * (a + b));
    }
    zeros.retain(|&z| z > k_min && z <= k_max);
    zeros
}

/// Poles of `tan(k l / s)` in `(0, k_max]`: `k = (2m + 1) pi s / (2 l)`.
fn tan_poles(lengths: &[f64], scale: f64, k_max: f64) -> Vec<f64> {
    let mut poles = Vec::new();
    for &l in lengths {
        let step = std::f64::consts::PI * scale / l;
        let mut k = step / 2.0;
        while k <= k_max + step {
            poles.push(k);
            k += step;
        }
    }
    poles
}

/// Neumann star spectrum: zeros of `sum_j tan(k l_j)` for rationally
/// independent lengths (all simple).
pub fn star_spectrum(lengths: &[f64], k_min: f64, k_max: f64) -> Vec<f64> {
    let ls = lengths.to_vec();
    let f = move |k: f64| ls.iter().map(|&l| (k * l).tan()).sum::<f64>();
    monotone_zeros(&f, &tan_poles(lengths, 1.0, k_max), k_min, k_max)
}

/// Flower spectrum: the symmetric family `sum_j tan(k l_j / 2) = 0` plus the
/// loop eigenvalues `k = 2 pi m / l_j`, all simple for independent lengths.
pub fn flower_spectrum(lengths: &[f64], k_min: f64, k_max: f64) -> Vec<f64> {
    let ls = lengths.to_vec();
    let f = move |k: f64| ls.iter().map(|&l| (k * l / 2.0).tan()).sum::<f64>();
    let mut ks = monotone_zeros(&f, &tan_poles(lengths, 2.0, k_max), k_min, k_max);
    ks.extend(loop_eigenvalues(lengths, k_min, k_max));
    ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ks
}

/// Mandarin spectrum: symmetric family `sum tan(k l_j / 2) = 0` and
/// antisymmetric family `sum cot(k l_j / 2) = 0`.
pub fn mandarin_spectrum(lengths: &[f64], k_min: f64, k_max: f64) -> Vec<f64> {
    let ls = lengths.to_vec();
    let sym = move |k: f64| ls.iter().map(|&l| (k * l / 2.0).tan()).sum::<f64>();
    let mut ks = monotone_zeros(&sym, &tan_poles(lengths, 2.0, k_max), k_min, k_max);
    let ls = lengths.to_vec();
    let asym = move |k: f64| ls.iter().map(|&l| 1.0 / (k * l / 2.0).tan()).sum::<f64>();
    // cot poles sit at k = 2 pi m / l_j.
    let cot_poles = loop_eigenvalues(lengths, 0.0, k_max + 1.0);
    ks.extend(monotone_zeros(&asym, &cot_poles, k_min, k_max));
    ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ks
}

/// `k = 2 pi m / l_j` for every edge, inside `(k_min, k_max]`.
pub fn loop_eigenvalues(lengths: &[f64], k_min: f64, k_max: f64) -> Vec<f64> {
    let mut ks = Vec::new();
    for &l in lengths {
        let step = 2.0 * std::f64::consts::PI / l;
        let mut k = step;
        while k <= k_max {
            if k > k_min {
                ks.push(k);
            }
            k += step;
        }
    }
    ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ks
}

/// Asserts two ascending spectra agree element-by-element within `tol`.
pub fn assert_spectra_match(got: &[f64], want: &[f64], tol: f64, label: &str) {
    assert_eq!(
        got.len(),
        want.len(),
        "{label}: count mismatch {} vs {}",
        got.len(),
        want.len()
    );
    for (i, (g, w)) in got.iter().zip(want.iter()).enumerate() {
        assert!(
            (g - w).abs() <= tol,
            "{label}: entry {i} differs: {g} vs {w}"
        );
    }
}
