use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use cdme_core::analysis::{cme_generator, cme_stationary, compare_generators, creation_only_law};
use cdme_core::generator::{assemble_from_cdme, assemble_from_genfun, evolve};
use cdme_core::spectral::{make_basis, project_creation_rate, CreationRate, ModeBasis, RateFn};
use cdme_core::state::make_space;
use cdme_core::{CoeffState, GeneratorMatrix, IntegratorConfig, IntegratorMethod};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bump() -> RateFn {
    RateFn::custom(|x| 1.0 + (PI * x).cos())
}

fn setup(
    n: usize,
    m: usize,
    rate: RateFn,
    lambda_d: f64,
) -> (ModeBasis, CreationRate, GeneratorMatrix) {
    let basis = make_basis(n).unwrap();
    let space = Arc::new(make_space(n, m).unwrap());
    let cr = project_creation_rate(&basis, rate, 64 * n).unwrap();
    let l = assemble_from_genfun(space, &basis, &cr, lambda_d).unwrap();
    (basis, cr, l)
}

#[test]
fn routes_agree_on_grid() {
    for n in 1..=3 {
        for m in 2..=4 {
            for gamma in [0.0, 1.0] {
                for lambda_d in [0.0, 1.0] {
                    for bumpy in [false, true] {
                        let rate = if bumpy {
                            let g = gamma;
                            RateFn::custom(move |x| g * (1.0 + (PI * x).cos()))
                        } else {
                            RateFn::Constant(gamma)
                        };
                        let basis = make_basis(n).unwrap();
                        let space = Arc::new(make_space(n, m).unwrap());
                        let cr = project_creation_rate(&basis, rate, 64 * n).unwrap();
                        let a = assemble_from_genfun(space.clone(), &basis, &cr, lambda_d).unwrap();
                        let b = assemble_from_cdme(space, &basis, &cr, lambda_d, 64 * n).unwrap();
                        let r = compare_generators(&a, &b, 1e-10).unwrap();
                        assert!(
                            r.pass,
                            "N={n} M={m} γ={gamma} λ_d={lambda_d} bump={bumpy}: {r:?}"
                        );
                    }
                }
            }
        }
    }
}

/// Sparse polynomial in `z_0..z_{N-1}`.
type Poly = BTreeMap<Vec<u32>, f64>;

fn add(p: &mut Poly, k: Vec<u32>, v: f64) {
    *p.entry(k).or_insert(0.0) += v;
}

fn d(p: &Poly, j: usize) -> Poly {
    let mut out = Poly::new();
    for (k, &v) in p {
        if k[j] > 0 {
            let mut k2 = k.clone();
            k2[j] -= 1;
            add(&mut out, k2, v * k[j] as f64);
        }
    }
    out
}

fn times_z(p: &Poly, j: usize) -> Poly {
    p.iter()
        .map(|(k, &v)| {
            let mut k2 = k.clone();
            k2[j] += 1;
            (k2, v)
        })
        .collect()
}

fn axpy(acc: &mut Poly, a: f64, p: &Poly) {
    for (k, &v) in p {
        add(acc, k.clone(), a * v);
    }
}

/// Applies the generating-function operator
/// `-Σ α_k z_k ∂_k + (λ_d/2)∂₀² − (λ_d/2)Σ z_j z_k ∂_j∂_k + Σ c_k z_k − γ`
/// to `v` by polynomial arithmetic.
fn apply_operator(v: &Poly, n: usize, alpha: &[f64], c: &[f64], gamma: f64, lambda_d: f64) -> Poly {
    let mut out = Poly::new();
    for k in 0..n {
        axpy(&mut out, -alpha[k], &times_z(&d(v, k), k));
        axpy(&mut out, c[k], &times_z(v, k));
    }
    axpy(&mut out, 0.5 * lambda_d, &d(&d(v, 0), 0));
    for j in 0..n {
        for k in 0..n {
            axpy(
                &mut out,
                -0.5 * lambda_d,
                &times_z(&times_z(&d(&d(v, k), j), k), j),
            );
        }
    }
    axpy(&mut out, -gamma, v);
    out
}

#[test]
fn genfun_matches_symbolic_operator() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (n, m) in [(1, 5), (2, 4), (3, 3)] {
        for lambda_d in [0.0, 0.7] {
            let (basis, cr, l) = setup(n, m, bump(), lambda_d);
            let space = l.space().clone();
            let coeffs: Vec<f64> = (0..space.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let v: Poly = space
                .iter()
                .map(|b| b.to_vec())
                .zip(coeffs.iter().copied())
                .collect();
            let lv = apply_operator(
                &v,
                n,
                basis.eigenvalues(),
                cr.mode_coeffs(),
                cr.total_rate(),
                lambda_d,
            );
            let lc = l.mul_vec(&coeffs);
            for (i, beta) in space.iter().enumerate() {
                let want = lv.get(beta).copied().unwrap_or(0.0);
                assert!(
                    (lc[i] - want).abs() < 1e-12 * (1.0 + want.abs()),
                    "β={beta:?}"
                );
            }
            // truncation only discards monomials above degree M, and the
            // only upward coupling is creation into degree M+1
            for (k, &val) in &lv {
                if space.lookup(k).is_none() {
                    let deg: u32 = k.iter().sum();
                    assert!(deg as usize == m + 1 || val.abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn one_mode_is_the_classical_generating_function() {
    // ∂_t v = (λ_d/2)(1 − z²) v'' + γ(z − 1) v on dense coefficient vectors
    let (gamma, lambda_d, m) = (1.3, 0.8, 8);
    let (_, _, l) = setup(1, m, RateFn::Constant(gamma), lambda_d);
    let dense = l.to_dense();
    for j in 0..=m {
        // image of the monomial z^j
        let mut img = vec![0.0; m + 3];
        let jf = j as f64;
        if j >= 2 {
            img[j - 2] += 0.5 * lambda_d * jf * (jf - 1.0);
        }
        img[j] -= 0.5 * lambda_d * jf * (jf - 1.0);
        img[j + 1] += gamma;
        img[j] -= gamma;
        for i in 0..=m {
            assert!((dense[(i, j)] - img[i]).abs() < 1e-13, "({i}, {j})");
        }
    }
}

#[test]
fn pure_slice_equals_cme_exactly() {
    for n in 1..=3 {
        for m in [2, 5, 9] {
            for gamma in [0.0, 0.5, 2.0] {
                for lambda_d in [0.0, 1.0, 3.5] {
                    let (_, _, l) = setup(n, m, RateFn::Constant(gamma), lambda_d);
                    let cme = cme_generator(m, gamma, lambda_d).unwrap();
                    let space = l.space();
                    for a in 0..=m {
                        for b in 0..=m {
                            let (ra, rb) =
                                (space.pure_index(a).unwrap(), space.pure_index(b).unwrap());
                            assert_eq!(l.get(ra, rb), cme.matrix[(a, b)]);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn pure_slice_is_closed() {
    // rows on the slice read only slice columns, for any creation profile
    let (_, _, l) = setup(3, 6, bump(), 1.0);
    let space = l.space();
    for a in 0..=6 {
        let row = space.pure_index(a).unwrap();
        for (col, _) in l.row(row) {
            let beta = space.index(col);
            assert!(beta[1..].iter().all(|&b| b == 0), "row {a} reads {beta:?}");
        }
    }
    let state = CoeffState::vacuum(l.space().clone());
    let cfg = IntegratorConfig::new(IntegratorMethod::Expm, vec![0.5]);
    let out = evolve(&state, &l, &cfg).unwrap();
    let law = out[0].number_law();
    let cme = cme_generator(6, l.params().gamma, 1.0).unwrap();
    let p = cme.evolve_from_vacuum(&[0.5]).unwrap();
    for (x, y) in law.iter().zip(&p[0]) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn diffusion_damps_each_mode() {
    let (basis, _, l) = setup(4, 2, RateFn::Constant(0.0), 0.0);
    let space = l.space().clone();
    for k in 0..4 {
        let mut unit = vec![0u32; 4];
        unit[k] = 1;
        let mut s = CoeffState::zeros(space.clone());
        s.set_coeff(&unit, 1.0).unwrap();
        for method in [IntegratorMethod::Expm, IntegratorMethod::Rk4] {
            let out = evolve(&s, &l, &IntegratorConfig::new(method, vec![0.01, 0.1])).unwrap();
            for st in &out {
                let want = (-basis.eigenvalue(k) * st.time()).exp();
                assert!((st.coeff(&unit) - want).abs() < 1e-9, "k={k} {method:?}");
            }
        }
    }
}

#[test]
fn mass_is_conserved_below_truncation() {
    let (_, _, l) = setup(2, 14, bump(), 1.0);
    let times: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let out = evolve(
        &CoeffState::vacuum(l.space().clone()),
        &l,
        &IntegratorConfig::new(IntegratorMethod::Expm, times),
    )
    .unwrap();
    for s in out {
        assert!(
            (s.mass() - 1.0).abs() < 1e-8,
            "t={} mass {}",
            s.time(),
            s.mass()
        );
    }
}

#[test]
fn creation_only_is_poisson_for_any_mode_count() {
    for n in 1..=3 {
        let (_, _, l) = setup(n, 12, bump(), 0.0);
        let out = evolve(
            &CoeffState::vacuum(l.space().clone()),
            &l,
            &IntegratorConfig::new(IntegratorMethod::Expm, vec![0.7]),
        )
        .unwrap();
        let want = creation_only_law(l.params().gamma, 0.7, 12);
        for (x, y) in out[0].number_law().iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn stationary_mean_grows_with_rate_ratio() {
    let mean = |gamma: f64, lambda_d: f64| {
        let pi = cme_stationary(&cme_generator(25, gamma, lambda_d).unwrap()).unwrap();
        pi.iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum::<f64>()
    };
    let ratios = [0.25, 0.5, 1.0, 2.0, 4.0];
    for lambda_d in [0.5, 1.0, 2.0] {
        let means: Vec<f64> = ratios
            .iter()
            .map(|r| mean(r * lambda_d, lambda_d))
            .collect();
        assert!(means.windows(2).all(|w| w[1] > w[0]), "{means:?}");
    }
}

#[test]
fn long_time_law_approaches_stationary() {
    let (_, _, l) = setup(1, 20, RateFn::Constant(1.0), 1.0);
    let out = evolve(
        &CoeffState::vacuum(l.space().clone()),
        &l,
        &IntegratorConfig::new(IntegratorMethod::Expm, vec![20.0]),
    )
    .unwrap();
    let pi = cme_stationary(&cme_generator(20, 1.0, 1.0).unwrap()).unwrap();
    let tv = cdme_core::analysis::total_variation(&out[0].number_law(), &pi);
    assert!(tv < 1e-6, "{tv}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn evolution_is_linear(
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        seed in any::<u64>(),
    ) {
        let (_, _, l) = setup(2, 4, bump(), 0.6);
        let space = l.space().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || {
            let c: Vec<f64> = (0..space.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            CoeffState::from_coeffs(space.clone(), c, 0.0).unwrap()
        };
        let (x, y) = (draw(), draw());
        let cfg = IntegratorConfig::new(IntegratorMethod::Expm, vec![0.3]);
        let ex = &evolve(&x, &l, &cfg).unwrap()[0];
        let ey = &evolve(&y, &l, &cfg).unwrap()[0];
        let mix = evolve(&x.combine(a, &y, b).unwrap(), &l, &cfg).unwrap();
        let want = ex.combine(a, ey, b).unwrap();
        for (p, q) in mix[0].coeffs().iter().zip(want.coeffs()) {
            prop_assert!((p - q).abs() < 1e-11);
        }
    }

    #[test]
    fn generator_columns_of_the_slice_conserve_probability(
        gamma in 0.0f64..3.0,
        lambda_d in 0.0f64..3.0,
        m in 2usize..10,
    ) {
        let cme = cme_generator(m, gamma, lambda_d).unwrap();
        for j in 0..m {
            let s: f64 = cme.matrix.column(j).iter().sum();
            prop_assert!(s.abs() < 1e-12 * (1.0 + gamma + lambda_d * (m * m) as f64));
        }
    }
}
