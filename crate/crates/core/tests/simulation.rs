use std::f64::consts::PI;
use std::sync::Arc;

use cdme_core::analysis::{
    compare_number_laws, intensity_bin_averages, ks_test, reflected_heat_cdf, CompareOptions,
};
use cdme_core::generator::{assemble_from_genfun, evolve};
use cdme_core::mcsim::{diffuse, estimate, replica_rng, SimConfig};
use cdme_core::spectral::{make_basis, project_creation_rate, RateFn};
use cdme_core::state::make_space;
use cdme_core::{CoeffState, IntegratorConfig, IntegratorMethod};

#[test]
fn reflected_steps_follow_the_heat_kernel() {
    let mut rng = replica_rng(99, 0);
    let (x0, t) = (0.2, 0.1);
    let mut xs = vec![x0; 20_000];
    diffuse(&mut xs, t, &mut rng);
    let (_, p) = ks_test(&xs, |x| reflected_heat_cdf(x0, t, x)).unwrap();
    assert!(p > 0.001, "p = {p}");
}

#[test]
fn split_steps_compose() {
    // two steps of t/2 have the same law as one step of t
    let mut rng = replica_rng(100, 0);
    let (x0, t) = (0.9, 0.05);
    let mut xs = vec![x0; 20_000];
    diffuse(&mut xs, t / 2.0, &mut rng);
    diffuse(&mut xs, t / 2.0, &mut rng);
    let (_, p) = ks_test(&xs, |x| reflected_heat_cdf(x0, t, x)).unwrap();
    assert!(p > 0.001, "p = {p}");
}

#[test]
fn small_ensemble_agrees_with_hierarchy() {
    let n_modes = 2;
    let basis = make_basis(n_modes).unwrap();
    let rate = RateFn::custom(|x| 1.0 + (PI * x).cos());
    let cr = project_creation_rate(&basis, rate, 128).unwrap();
    let space = Arc::new(make_space(n_modes, 14).unwrap());
    let l = assemble_from_genfun(space.clone(), &basis, &cr, 1.0).unwrap();
    let state = &evolve(
        &CoeffState::vacuum(space),
        &l,
        &IntegratorConfig::new(IntegratorMethod::Expm, vec![1.0]),
    )
    .unwrap()[0];

    let cfg = SimConfig::new(cr, 1.0, 1.0, 20_000, 5)
        .unwrap()
        .with_bins(10)
        .unwrap();
    let est = estimate(&cfg).unwrap();
    let (p_hat, se) = est.number_law_padded(6);
    let exact = &state.number_law()[..6];
    let opts = CompareOptions {
        z_threshold: 4.0,
        stderr_floor: 1.0 / 20_000.0,
        ..CompareOptions::default()
    };
    let r = compare_number_laws(&p_hat, exact, Some(&se), &opts).unwrap();
    assert!(r.pass, "{r:?}");

    let want = intensity_bin_averages(&state.intensity_coeffs(), &est.bin_edges);
    for ((m, s), w) in est.intensity.iter().zip(&est.intensity_stderr).zip(&want) {
        assert!((m - w).abs() <= 4.0 * s, "{m} vs {w} ± {s}");
    }
}
