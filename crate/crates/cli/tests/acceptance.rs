//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::{PI, SQRT_2};
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use cdme_cli::config::{ExperimentConfig, ModelConfig, TimeGrid, TruncationConfig};
use cdme_cli::{cmd_simulate_mc, cmd_solve_hierarchy, Experiment};
use cdme_core::analysis::{
    cme_generator, cme_stationary, compare_generators, intensity_bin_averages, ks_test,
    reflected_heat_cdf, total_variation, uniform_grid, weierstrass_transfer_check,
};
use cdme_core::generator::{assemble_from_cdme, assemble_from_genfun, evolve};
use cdme_core::mcsim::{diffuse, estimate, replica_rng, SimConfig};
use cdme_core::spectral::{
    make_basis, project_creation_rate, CreationRate, ModeBasis, RateFn, RateSpec,
};
use cdme_core::state::make_space;
use cdme_core::{CoeffState, GeneratorMatrix, IntegratorConfig, IntegratorMethod};

const ROUTE_REL_TOL: f64 = 1e-10;
const ROUTE_BUDGET_S: f64 = 10.0;
const MASS_TOL: f64 = 1e-8;
const MASS_BUDGET_S: f64 = 30.0;
const CME_TOL: f64 = 1e-8;
const POISSON_TOL: f64 = 1e-6;
const INTENSITY_TOL: f64 = 1e-6;
const Z_MAX: f64 = 3.0;
const MC_REPLICAS: u64 = 100_000;
const MC_BUDGET_S: f64 = 120.0;
const MC_SEED: u64 = 1;
const TRANSFER_TOL: f64 = 1e-8;
const TRANSFER_BUDGET_S: f64 = 1.0;
const STATIONARY_TV_TOL: f64 = 1e-6;
const KS_P_MIN: f64 = 0.001;
const KS_SAMPLES: usize = 100_000;

struct Outcome {
    value: f64,
    tolerance: f64,
    pass: bool,
    detail: String,
}

impl Outcome {
    fn at_most(value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            value,
            tolerance,
            pass: value <= tolerance,
            detail: detail.into(),
        }
    }
}

fn bump() -> RateFn {
    RateFn::custom(|x| 1.0 + (PI * x).cos())
}

fn model(
    n: usize,
    m: usize,
    rate: RateFn,
    lambda_d: f64,
) -> (ModeBasis, CreationRate, GeneratorMatrix) {
    let basis = make_basis(n).unwrap();
    let cr = project_creation_rate(&basis, rate, 64 * n).unwrap();
    let space = Arc::new(make_space(n, m).unwrap());
    let l = assemble_from_genfun(space, &basis, &cr, lambda_d).unwrap();
    (basis, cr, l)
}

fn hierarchy(l: &GeneratorMatrix, times: Vec<f64>) -> Vec<CoeffState> {
    let cfg = IntegratorConfig::new(IntegratorMethod::Expm, times);
    evolve(&CoeffState::vacuum(l.space().clone()), l, &cfg).unwrap()
}

fn unit_times(count: usize) -> Vec<f64> {
    (0..count).map(|i| i as f64 / (count - 1) as f64).collect()
}

fn route_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    let mut at = String::new();
    for n in 1..=3 {
        for m in 2..=4 {
            for gamma in [0.0, 1.0] {
                for lambda_d in [0.0, 1.0] {
                    for bumpy in [false, true] {
                        let rate = if bumpy {
                            RateFn::custom(move |x| gamma * (1.0 + (PI * x).cos()))
                        } else {
                            RateFn::Constant(gamma)
                        };
                        let basis = make_basis(n).unwrap();
                        let cr = project_creation_rate(&basis, rate, 64 * n).unwrap();
                        let space = Arc::new(make_space(n, m).unwrap());
                        let a = assemble_from_genfun(space.clone(), &basis, &cr, lambda_d).unwrap();
                        let b = assemble_from_cdme(space, &basis, &cr, lambda_d, 64 * n).unwrap();
                        let r = compare_generators(&a, &b, ROUTE_REL_TOL).unwrap();
                        if r.value >= worst {
                            worst = r.value;
                            at = format!(
                                "N={n} M={m} gamma={gamma} lambda_d={lambda_d} bump={bumpy}"
                            );
                        }
                    }
                }
            }
        }
    }
    Outcome::at_most(worst, ROUTE_REL_TOL, format!("worst case {at}"))
}

fn mass_conservation() -> Outcome {
    let (_, _, l) = model(3, 14, bump(), 1.0);
    let states = hierarchy(&l, unit_times(11));
    let drift = states
        .iter()
        .map(|s| (s.mass() - 1.0).abs())
        .fold(0.0, f64::max);
    Outcome::at_most(drift, MASS_TOL, format!("N=3 M=14 dim={}", l.dim()))
}

fn cme_reduction() -> Outcome {
    let (_, _, l) = model(3, 14, RateFn::Constant(1.0), 1.0);
    let times = unit_times(11);
    let states = hierarchy(&l, times.clone());
    let cme = cme_generator(14, 1.0, 1.0)
        .unwrap()
        .evolve_from_vacuum(&times)
        .unwrap();
    let diff = states
        .iter()
        .zip(&cme)
        .flat_map(|(s, p)| {
            s.number_law()
                .iter()
                .zip(p)
                .map(|(a, b)| (a - b).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    Outcome::at_most(diff, CME_TOL, "N=3, 11 times on [0, 1]")
}

fn poisson_law() -> Outcome {
    let (_, _, l) = model(1, 20, RateFn::Constant(1.0), 0.0);
    let p = hierarchy(&l, vec![1.0])[0].number_law();
    let mut fact = 1.0;
    let mut worst = 0.0f64;
    for (n, pn) in p.iter().enumerate() {
        if n > 0 {
            fact *= n as f64;
        }
        worst = worst.max((pn - (-1.0f64).exp() / fact).abs());
    }
    Outcome::at_most(worst, POISSON_TOL, "n = 0..=20")
}

fn creation_intensity() -> Outcome {
    let (_, _, l) = model(2, 20, bump(), 0.0);
    let times = vec![0.05, 0.2, 1.0];
    let states = hierarchy(&l, times);
    let mut worst = 0.0f64;
    for s in &states {
        let t = s.time();
        let m = s.intensity_coeffs();
        let m1 = (1.0 / SQRT_2) * (1.0 - (-PI * PI * t).exp()) / (PI * PI);
        worst = worst.max((m[0] - t).abs()).max((m[1] - m1).abs());
    }
    Outcome::at_most(worst, INTENSITY_TOL, "t in {0.05, 0.2, 1}")
}

fn monte_carlo() -> Outcome {
    let (_, cr, l) = model(2, 14, bump(), 1.0);
    let state = &hierarchy(&l, vec![1.0])[0];
    let cfg = SimConfig::new(cr, 1.0, 1.0, MC_REPLICAS, MC_SEED)
        .unwrap()
        .with_bins(20)
        .unwrap();
    let est = estimate(&cfg).unwrap();
    let r = MC_REPLICAS as f64;
    let exact = state.number_law();
    let (p_hat, se) = est.number_law_padded(9);
    let mut worst = 0.0f64;
    let mut at = String::new();
    for n in 0..=8 {
        let z = (p_hat[n] - exact[n]).abs() / se[n].max(1.0 / r);
        if z > worst {
            worst = z;
            at = format!("P({n})");
        }
    }
    let width = 1.0 / 20.0;
    let bins = intensity_bin_averages(&state.intensity_coeffs(), &est.bin_edges);
    for (b, want) in bins.iter().enumerate() {
        let s = est.intensity_stderr[b].max(1.0 / (r * width));
        let z = (est.intensity[b] - want).abs() / s;
        if z > worst {
            worst = z;
            at = format!("bin {b}");
        }
    }
    Outcome::at_most(
        worst,
        Z_MAX,
        format!("max |z| over 9 counts and 20 bins at {at}"),
    )
}

fn transfer() -> Outcome {
    let grid = uniform_grid(-2.0, 2.0, 41);
    let worst = (0..=8)
        .map(|n| weierstrass_transfer_check(n, &grid).unwrap())
        .fold(0.0, f64::max);
    Outcome::at_most(worst, TRANSFER_TOL, "He_0..He_8 on 41 points in [-2, 2]")
}

fn stationary() -> Outcome {
    let (_, _, l) = model(2, 20, RateFn::Constant(1.0), 1.0);
    let law = hierarchy(&l, vec![20.0])[0].number_law();
    let pi = cme_stationary(&cme_generator(20, 1.0, 1.0).unwrap()).unwrap();
    Outcome::at_most(total_variation(&law, &pi), STATIONARY_TV_TOL, "N=2, t=20")
}

fn reflected_diffusion() -> Outcome {
    let (x0, t) = (0.3, 0.1);
    let mut rng = replica_rng(MC_SEED, 0);
    let mut xs = vec![x0; KS_SAMPLES];
    diffuse(&mut xs, t, &mut rng);
    let (d, p) = ks_test(&xs, |x| reflected_heat_cdf(x0, t, x)).unwrap();
    Outcome {
        value: p,
        tolerance: KS_P_MIN,
        pass: p > KS_P_MIN,
        detail: format!("D = {d:.3e}, x0 = {x0}, p must exceed the tolerance"),
    }
}

fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in fs::read_dir(root).unwrap() {
        let sub = sub.unwrap().path();
        for f in fs::read_dir(&sub).unwrap() {
            let f = f.unwrap().path();
            let name = format!(
                "{}/{}",
                sub.file_name().unwrap().to_string_lossy(),
                f.file_name().unwrap().to_string_lossy()
            );
            if !name.ends_with("timings.json") {
                out.push((name, fs::read(&f).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let mut config = ExperimentConfig {
        model: ModelConfig {
            lambda_d: 1.0,
            creation: Some(RateSpec::Cosine {
                coeffs: vec![1.0, 1.0 / SQRT_2],
            }),
            creation_table_file: None,
            quad_points: None,
        },
        truncation: TruncationConfig {
            modes: 2,
            max_degree: 8,
        },
        times: TimeGrid::list(vec![0.0, 0.5, 1.0]),
        integrator: Default::default(),
        mc: Default::default(),
        outputs: Default::default(),
        compare: Default::default(),
    };
    config.mc.replicas = 5_000;
    config.mc.master_seed = 11;
    config.outputs.kernel_slices = true;
    config.outputs.raw_counts = true;
    let exp = Experiment::from_config(config, ".").unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let root = tmp.path().join(name);
            cmd_solve_hierarchy(&exp, &root).unwrap();
            cmd_simulate_mc(&exp, &root).unwrap();
            read_tree(&root)
        })
        .collect();
    let files = runs[0].len();
    let differing = runs[0].iter().zip(&runs[1]).filter(|(a, b)| a != b).count()
        + runs[0].len().abs_diff(runs[1].len());
    Outcome::at_most(
        differing as f64,
        0.0,
        format!("{files} files compared byte for byte, {differing} differ"),
    )
}

/// Name, check, wall-clock budget in seconds.
type Criterion = (&'static str, fn() -> Outcome, Option<f64>);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            "generator route equivalence",
            route_equivalence,
            Some(ROUTE_BUDGET_S),
        ),
        ("mass conservation", mass_conservation, Some(MASS_BUDGET_S)),
        ("CME reduction", cme_reduction, None),
        ("creation-only Poisson law", poisson_law, None),
        ("creation-only intensity", creation_intensity, None),
        ("Monte Carlo vs hierarchy", monte_carlo, Some(MC_BUDGET_S)),
        ("Weierstrass transfer", transfer, Some(TRANSFER_BUDGET_S)),
        ("stationary consistency", stationary, None),
        ("reflected-diffusion exactness", reflected_diffusion, None),
        ("determinism", determinism, None),
    ];
    let mut failures = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut o = check();
        let secs = start.elapsed().as_secs_f64();
        if let Some(b) = budget {
            if secs >= *b {
                o.pass = false;
                o.detail = format!("{}; over the {b} s budget", o.detail);
            }
        }
        if !o.pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {} {name}: value {:.3e}, tolerance {:.1e}, {:.2} s ({})",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.value,
            o.tolerance,
            secs,
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
