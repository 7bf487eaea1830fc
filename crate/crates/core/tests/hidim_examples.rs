//! Correlation-matrix oracles and scaling experiments.

use std::f64::consts::PI;

use depu::hidim::{
    population_matrix_oracle, scaling_experiment, CopulaFamily, CorrelationStructure, EstimatorKind, ScalingConfig,
};

fn family(structure: CorrelationStructure, temporal: f64) -> CopulaFamily {
    CopulaFamily { structure, temporal }
}

#[test]
fn latent_half_oracle_is_precise_and_matches_closed_forms() {
    let spec = family(CorrelationStructure::Equicorrelation { rho: 0.5 }, 0.0).spec(2, 17);
    let kendall = population_matrix_oracle(&spec, EstimatorKind::Kendall, 1_000_000).unwrap();
    let se = kendall.stderr[1];
    assert!(se <= 0.002, "stderr {se}");
    // Gaussian copula: τ = (2/π) asin ρ, ρ_S = (6/π) asin(ρ/2).
    let tau = 2.0 / PI * 0.5f64.asin();
    assert!((kendall.matrix.get(0, 1) - tau).abs() <= 4.0 * se);

    let spearman = population_matrix_oracle(&spec, EstimatorKind::Spearman, 1_000_000).unwrap();
    let rho_s = 6.0 / PI * 0.25f64.asin();
    assert!(spearman.stderr[1] <= 0.002);
    assert!((spearman.matrix.get(0, 1) - rho_s).abs() <= 4.0 * spearman.stderr[1]);

    let again = population_matrix_oracle(&spec, EstimatorKind::Kendall, 1_000_000).unwrap();
    assert_eq!(again.matrix, kendall.matrix);
}

fn config(temporal: f64, t_grid: Vec<usize>, p: usize, replications: usize, seed: u64) -> ScalingConfig {
    ScalingConfig {
        family: family(CorrelationStructure::Identity, temporal),
        kind: EstimatorKind::Kendall,
        t_grid,
        p_grid: vec![p],
        replications,
        oracle_draws: 100_000,
        seed,
        budget: 1e13,
    }
}

#[test]
fn iid_median_deviation_decays_at_root_t() {
    let rep = scaling_experiment(&config(0.0, vec![250, 500, 1000, 2000, 4000], 5, 400, 21)).unwrap();
    let slope = rep.slopes[0].slope.unwrap();
    assert!((slope + 0.5).abs() <= 0.05, "slope {slope}");
}

#[test]
fn temporal_dependence_inflates_the_deviation_by_a_bounded_factor() {
    let iid = scaling_experiment(&config(0.0, vec![1000], 10, 200, 4)).unwrap();
    let mixing = scaling_experiment(&config(0.5, vec![1000], 10, 200, 4)).unwrap();
    let (a, b) = (&iid.cells[0], &mixing.cells[0]);
    assert!(b.median >= a.median, "mixing {} < iid {}", b.median, a.median);
    for c in [a, b] {
        assert!((0.2..5.0).contains(&c.ratio_to_rate), "ratio {}", c.ratio_to_rate);
    }
}
