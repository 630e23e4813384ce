//! Solver output checked against the closed-form separation-of-variables
//! oracles, plus property tests of the advertised invariants.

mod common;

use common::{assert_spectra_match, flower_spectrum, mandarin_spectrum, star_spectrum};
use proptest::prelude::*;
use qgraph_core::*;

fn solve_flat(g: &MetricGraph, k_min: f64, k_max: f64) -> Vec<f64> {
    let bs = BondSystem::build(g).unwrap();
    solve_spectrum(&bs, &g.lengths(), k_min, k_max)
        .unwrap()
        .flattened()
}

#[test]
fn random_star_matches_tan_oracle() {
    for seed in [1u64, 2, 3] {
        let lengths = random_lengths(3, seed, (1.0, 2.0)).unwrap();
        let g = MetricGraph::star(&lengths);
        let got = solve_flat(&g, 0.1, 60.0);
        let want = star_spectrum(&lengths, 0.1, 60.0);
        assert!(got.len() > 50);
        assert_spectra_match(&got, &want, 1e-9, &format!("star seed {seed}"));
    }
}

#[test]
fn random_flower_matches_oracle() {
    let lengths = random_lengths(2, 11, (1.0, 2.0)).unwrap();
    let g = MetricGraph::flower(&lengths);
    let got = solve_flat(&g, 0.1, 80.0);
    let want = flower_spectrum(&lengths, 0.1, 80.0);
    assert_spectra_match(&got, &want, 1e-9, "flower");
}

#[test]
fn random_mandarin_matches_oracle() {
    let lengths = random_lengths(3, 13, (1.0, 2.0)).unwrap();
    let g = MetricGraph::mandarin(&lengths);
    let got = solve_flat(&g, 0.1, 60.0);
    let want = mandarin_spectrum(&lengths, 0.1, 60.0);
    assert_spectra_match(&got, &want, 1e-9, "mandarin");
}

#[test]
fn five_edge_mandarin_matches_oracle() {
    let lengths = random_lengths(5, 19, (1.0, 2.0)).unwrap();
    let g = MetricGraph::mandarin(&lengths);
    assert!(g.classify().is_mandarin);
    let got = solve_flat(&g, 0.1, 25.0);
    let want = mandarin_spectrum(&lengths, 0.1, 25.0);
    assert!(got.len() > 40);
    assert_spectra_match(&got, &want, 1e-9, "5-mandarin");
}

#[test]
fn lasso_spectrum_contains_exactly_the_loop_family_as_loop_supported() {
    let lengths = random_lengths(2, 17, (1.0, 2.0)).unwrap();
    let g = MetricGraph::lasso(lengths[0], &lengths[1..]);
    let bs = BondSystem::build(&g).unwrap();
    let w = solve_spectrum(&bs, &lengths, 0.1, 100.0).unwrap();
    let loop_family = common::loop_eigenvalues(&lengths[..1], 0.1, 100.0);
    let mut found = Vec::new();
    for rec in &w.records {
        let z = BondSystem::torus_point(&lengths, rec.k);
        let traces = traces_from_kernel(&bs, &z, &rec.kernel_basis);
        if traces
            .iter()
            .any(|t| matches!(classify_symmetry(&g, t).unwrap(), SymmetryClass::LoopSupported(_)))
        {
            found.push(rec.k);
        }
    }
    assert_spectra_match(&found, &loop_family, 1e-9, "loop-supported family");
}

// A six-edge graph mixing parallel edges, a loop and pendant tails: the
// window must satisfy the Weyl bound, survive step halving, keep the loop
// family, and produce valid traces throughout.
#[test]
fn mixed_topology_window_is_consistent() {
    let lengths = random_lengths(6, 37, (1.0, 2.0)).unwrap();
    let g = MetricGraph::from_json(&format!(
        r#"{{ "vertices": ["u", "v", "w1", "w2"],
             "edges": [ {{"id": 0, "tail": "u", "head": "u", "length": {}}},
                        {{"id": 1, "tail": "u", "head": "v", "length": {}}},
                        {{"id": 2, "tail": "u", "head": "v", "length": {}}},
                        {{"id": 3, "tail": "u", "head": "v", "length": {}}},
                        {{"id": 4, "tail": "v", "head": "w1", "length": {}}},
                        {{"id": 5, "tail": "v", "head": "w2", "length": {}}} ] }}"#,
        lengths[0], lengths[1], lengths[2], lengths[3], lengths[4], lengths[5]
    ))
    .unwrap();
    assert!(g.classify().satisfies_assumption);
    let bs = BondSystem::build(&g).unwrap();
    let w = solve_spectrum(&bs, &lengths, 0.05, 40.0).unwrap();
    let weyl = weyl_check(&w);
    assert!(weyl.deviation.abs() <= 12.0, "weyl deviation {}", weyl.deviation);

    let cfg = SolverConfig {
        grid_safety: 0.495,
        ..SolverConfig::default()
    };
    let w2 = solve_spectrum_with(&bs, &lengths, 0.05, 40.0, &cfg).unwrap();
    assert_eq!(w.total_count(), w2.total_count());

    // The loop family k = 2 pi n / l_0 belongs to the spectrum with
    // loop-supported traces; every trace satisfies the defining equations.
    let loop_family = common::loop_eigenvalues(&lengths[..1], 0.05, 40.0);
    assert!(!loop_family.is_empty());
    let flat = w.flattened();
    for &target in &loop_family {
        assert!(flat.iter().any(|&k| (k - target).abs() < 1e-9));
    }
    for rec in &w.records {
        let z = BondSystem::torus_point(&lengths, rec.k);
        for t in traces_from_kernel(&bs, &z, &rec.kernel_basis) {
            assert!(trace_residuals(&bs, &t).worst() <= 1e-9);
        }
    }
}

// At a simple eigenvalue with normalized kernel vector a, the secular
// derivatives satisfy dP/dz_j = (c/z_j)(|a_j|^2 + |b_j|^2) with one
// j-independent constant c. This ties the gradient, the kernel and the
// bond amplitudes together across modules.
#[test]
fn gradient_is_proportional_to_bond_intensities() {
    let lengths = random_lengths(3, 23, (1.0, 2.0)).unwrap();
    let g = MetricGraph::star(&lengths);
    let bs = BondSystem::build(&g).unwrap();
    let w = solve_spectrum(&bs, &lengths, 0.5, 20.0).unwrap();
    assert!(w.records.len() >= 10);
    for rec in w.records.iter().filter(|r| r.multiplicity == 1) {
        let z = BondSystem::torus_point(&lengths, rec.k);
        let grad = secular_gradient(&bs, &z);
        let a = &rec.kernel_basis[0];
        let n = lengths.len();
        let mut constants = Vec::new();
        for j in 0..n {
            let intensity = a[j].norm_sqr() + a[n + j].norm_sqr();
            assert!(intensity > 1e-8, "k = {}: edge {j} carries no wave", rec.k);
            constants.push(grad[j] * z[j] / C64::new(intensity, 0.0));
        }
        let c0 = constants[0];
        assert!(c0.norm() > 1e-8);
        for c in &constants[1..] {
            assert!(
                (c - c0).norm() <= 1e-8 * c0.norm(),
                "k = {}: constants differ: {constants:?}",
                rec.k
            );
        }
    }
}

// First-order perturbation: the eigenphase crossing zero at an eigenvalue
// moves with speed sum_j l_j (|a_j|^2 + |b_j|^2).
#[test]
fn crossing_speed_matches_bond_intensities() {
    let lengths = random_lengths(3, 29, (1.0, 2.0)).unwrap();
    let g = MetricGraph::star(&lengths);
    let bs = BondSystem::build(&g).unwrap();
    let w = solve_spectrum(&bs, &lengths, 0.5, 12.0).unwrap();
    let h = 1e-7;
    for rec in w.records.iter().filter(|r| r.multiplicity == 1) {
        let a = &rec.kernel_basis[0];
        let n = lengths.len();
        let predicted: f64 = (0..n)
            .map(|j| lengths[j] * (a[j].norm_sqr() + a[n + j].norm_sqr()))
            .collect::<Vec<_>>()
            .iter()
            .sum();
        // Just before the crossing the branch sits below 2pi, just after it
        // sits above 0.
        let before = eigenphases(&bs, &lengths, rec.k - h);
        let after = eigenphases(&bs, &lengths, rec.k + h);
        let theta_before = before.last().unwrap();
        let theta_after = after.first().unwrap();
        let speed = (theta_after + TAU - theta_before) / (2.0 * h);
        assert!(
            (speed - predicted).abs() <= 1e-4 * predicted,
            "k = {}: speed {speed} vs predicted {predicted}",
            rec.k
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, .. ProptestConfig::default() })]

    // No-miss: halving the sweep step never changes the spectrum, and the
    // count tracks the Weyl prediction within 2N.
    #[test]
    fn halved_step_and_weyl(seed in 0u64..1000) {
        let lengths = random_lengths(3, seed, (1.0, 2.0)).unwrap();
        let g = MetricGraph::star(&lengths);
        let bs = BondSystem::build(&g).unwrap();
        let w1 = solve_spectrum(&bs, &lengths, 0.01, 25.0).unwrap();
        let cfg = SolverConfig { grid_safety: 0.495, ..SolverConfig::default() };
        let w2 = solve_spectrum_with(&bs, &lengths, 0.01, 25.0, &cfg).unwrap();
        prop_assert_eq!(w1.total_count(), w2.total_count());
        for (a, b) in w1.flattened().iter().zip(w2.flattened().iter()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        let weyl = weyl_check(&w1);
        prop_assert!(weyl.deviation.abs() <= 6.0);
    }

    // Kernel traces satisfy the trace-space equations: vertex conditions,
    // edge conditions and the per-edge norm equality.
    #[test]
    fn trace_invariants_on_random_eigenvalues(seed in 0u64..1000) {
        let lengths = random_lengths(3, seed, (1.0, 2.0)).unwrap();
        let g = MetricGraph::star(&lengths);
        let bs = BondSystem::build(&g).unwrap();
        let w = solve_spectrum(&bs, &lengths, 0.5, 10.0).unwrap();
        prop_assert!(!w.records.is_empty());
        for rec in &w.records {
            let z = BondSystem::torus_point(&lengths, rec.k);
            for t in traces_from_kernel(&bs, &z, &rec.kernel_basis) {
                let rep = trace_residuals(&bs, &t);
                prop_assert!(rep.vertex <= 1e-9);
                for j in 0..3 {
                    prop_assert!(rep.edge_equations[j] <= 1e-9);
                    prop_assert!(rep.norm_mismatch[j] <= 1e-9);
                }
                prop_assert!(t.imag_residual() <= 1e-8);
            }
        }
    }
}
