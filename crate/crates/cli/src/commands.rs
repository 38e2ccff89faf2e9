use std::collections::BTreeMap;
use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cdme_core::analysis::{
    cme_generator, cme_stationary, compare_generators, compare_max_abs, compare_z_scores,
    creation_only_intensity, creation_only_law, intensity_bin_averages, uniform_grid,
    weierstrass_transfer_check, CompareOptions, ComparisonReport, ReportSuite,
};
use cdme_core::generator::{
    assemble_from_cdme, assemble_from_genfun, evolve, GeneratorMatrix, IntegratorConfig,
    CDME_TENSOR_CAP,
};
use cdme_core::mcsim::{estimate, McEstimate, SimConfig};
use cdme_core::spectral::{make_basis, project_creation_rate, CreationRate, ModeBasis, RateFn};
use cdme_core::state::{make_space, CoeffState, MultiIndexSpace};
use cdme_core::CdmeError;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::output::{num, OutputDir, RunManifest};

/// Overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "CDME_OUTPUT_DIR";

/// Default tolerance per compare check.
pub const DEFAULT_TOLERANCES: [(&str, f64); 8] = [
    ("route_equivalence", 1e-10),
    ("cme_slice", 1e-8),
    ("mass", 1e-8),
    ("poisson", 1e-6),
    ("intensity_oracle", 1e-6),
    ("mc_number_law", 3.0),
    ("mc_intensity", 3.0),
    ("transfer", 1e-8),
];

/// Largest particle count checked against the simulator by default.
pub const DEFAULT_Z_MAX_COUNT: usize = 8;

/// A validated configuration and the directory relative paths resolve from.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
    pub source: PathBuf,
}

impl Experiment {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config = ExperimentConfig::from_toml(&text).map_err(|source| CliError::Config {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self {
            config,
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            source: path.to_path_buf(),
        })
    }

    pub fn from_config(config: ExperimentConfig, base_dir: impl Into<PathBuf>) -> CliResult<Self> {
        let source = PathBuf::from("<config>");
        config
            .validate()
            .map_err(|(key, message)| CliError::Config {
                path: source.clone(),
                source: ConfigError {
                    line: None,
                    key,
                    message,
                },
            })?;
        Ok(Self {
            config,
            base_dir: base_dir.into(),
            source,
        })
    }

    /// Revalidates after scalar overrides.
    pub fn revalidate(&self) -> CliResult<()> {
        self.config
            .validate()
            .map_err(|(key, message)| CliError::Config {
                path: self.source.clone(),
                source: ConfigError {
                    line: None,
                    key,
                    message,
                },
            })
    }

    /// Flag, then environment, then config file.
    pub fn output_root(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(p);
        }
        let dir = &self.config.outputs.directory;
        if dir.is_absolute() {
            dir.clone()
        } else {
            self.base_dir.join(dir)
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.config.times.points()
    }

    pub fn integrator(&self) -> IntegratorConfig {
        let mut cfg = IntegratorConfig::new(self.config.integrator.method, self.times());
        cfg.dt = self.config.integrator.dt;
        cfg
    }
}

/// Basis, projected creation rate and truncated space of an experiment.
pub struct Model {
    pub basis: ModeBasis,
    pub creation: CreationRate,
    pub lambda_d: f64,
    pub space: Arc<MultiIndexSpace>,
}

impl Model {
    pub fn build(exp: &Experiment) -> CliResult<Self> {
        let cfg = &exp.config;
        let basis = make_basis(cfg.truncation.modes)?;
        let rate = match (&cfg.model.creation, &cfg.model.creation_table_file) {
            (Some(spec), _) => spec.to_rate_fn()?,
            (None, Some(path)) => {
                let (xs, ys) =
                    ExperimentConfig::read_table_file(path, &exp.base_dir).map_err(|source| {
                        CliError::Config {
                            path: exp.source.clone(),
                            source,
                        }
                    })?;
                RateFn::table(xs, ys)?
            }
            (None, None) => unreachable!("validated config has a creation source"),
        };
        let quad = cfg
            .model
            .quad_points
            .unwrap_or_else(|| basis.default_quad_points());
        let creation = project_creation_rate(&basis, rate, quad)?;
        let space = Arc::new(make_space(cfg.truncation.modes, cfg.truncation.max_degree)?);
        Ok(Self {
            basis,
            creation,
            lambda_d: cfg.model.lambda_d,
            space,
        })
    }

    pub fn generator(&self) -> CliResult<GeneratorMatrix> {
        Ok(assemble_from_genfun(
            self.space.clone(),
            &self.basis,
            &self.creation,
            self.lambda_d,
        )?)
    }

    pub fn gamma(&self) -> f64 {
        self.creation.total_rate()
    }
}

/// Hierarchy states at the output times, from the empty state.
pub fn solve_hierarchy(
    exp: &Experiment,
    model: &Model,
    l: &GeneratorMatrix,
) -> CliResult<Vec<CoeffState>> {
    Ok(evolve(
        &CoeffState::vacuum(model.space.clone()),
        l,
        &exp.integrator(),
    )?)
}

fn sim_config(exp: &Experiment, model: &Model, horizon: f64) -> CliResult<SimConfig> {
    let mc = &exp.config.mc;
    let mut cfg = SimConfig::new(
        model.creation.clone(),
        model.lambda_d,
        horizon,
        mc.replicas,
        mc.master_seed,
    )?
    .with_bins(mc.bins)?;
    if let Some(cap) = mc.max_events {
        cfg.max_events = cap;
    }
    Ok(cfg)
}

fn horizon(exp: &Experiment) -> f64 {
    exp.times().last().copied().unwrap_or(0.0)
}

pub fn cmd_solve_hierarchy(exp: &Experiment, out_root: &Path) -> CliResult<RunManifest> {
    let mut out = OutputDir::create(out_root.join("hierarchy"))?;
    let outputs = &exp.config.outputs;
    let (model, l) = out.stage("assemble", |_| {
        let model = Model::build(exp)?;
        let l = model.generator()?;
        Ok((model, l))
    })?;
    let states = out.stage("evolve", |_| solve_hierarchy(exp, &model, &l))?;

    out.stage("write", |out| {
        if outputs.wants("csv") {
            let mut law = Vec::new();
            let mut curve = Vec::new();
            let mut modes = Vec::new();
            let mut mass = Vec::new();
            let xs = uniform_grid(0.0, 1.0, outputs.intensity_points);
            for s in &states {
                let t = num(s.time());
                let obs = s.observables();
                for (n, p) in obs.number_law.iter().enumerate() {
                    law.push(vec![t.clone(), n.to_string(), num(*p)]);
                }
                for &x in &xs {
                    curve.push(vec![
                        t.clone(),
                        num(x),
                        num(model.basis.synthesize(&obs.intensity_coeffs, x)),
                    ]);
                }
                for (k, m) in obs.intensity_coeffs.iter().enumerate() {
                    modes.push(vec![t.clone(), k.to_string(), num(*m)]);
                }
                mass.push(vec![
                    t.clone(),
                    num(obs.mass),
                    num(obs.mass - 1.0),
                    obs.negative_entries.len().to_string(),
                ]);
            }
            out.write_csv("number_law.csv", &["t", "n", "P"], law)?;
            out.write_csv("intensity.csv", &["t", "x", "m"], curve)?;
            out.write_csv("intensity_modes.csv", &["t", "k", "m_k"], modes)?;
            out.write_csv(
                "mass.csv",
                &["t", "mass", "drift", "negative_entries"],
                mass,
            )?;
            if outputs.kernel_slices {
                if let Some(last) = states.last() {
                    out.write_csv(
                        "kernels.csv",
                        &["t", "n", "x1", "x2", "x3", "rho"],
                        kernel_slices(last)?,
                    )?;
                }
            }
        }
        if outputs.wants("json") {
            if let Some(last) = states.last() {
                out.write_bytes("state_final.json", (last.to_json() + "\n").as_bytes())?;
            }
        }
        if outputs.wants("coo") {
            let mut buf = Vec::new();
            l.write_coo(&mut buf)
                .map_err(|e| CliError::io(out.path("generator.coo"), e))?;
            out.write_bytes("generator.coo", &buf)?;
        }
        Ok(())
    })?;
    out.finish("solve-hierarchy", &exp.config.hash())
}

const KERNEL_GRID: usize = 21;

/// `ρ_1(x)`, `ρ_2(x, y)` and `ρ_3(x, y, ½)` on a coarse grid.
fn kernel_slices(s: &CoeffState) -> CliResult<Vec<Vec<String>>> {
    let grid = uniform_grid(0.0, 1.0, KERNEL_GRID);
    let t = num(s.time());
    let top = s.space().max_degree().min(3);
    let mut rows = Vec::new();
    for n in 1..=top {
        match n {
            1 => {
                for &x in &grid {
                    let v = s.eval_kernel(&[x])?;
                    rows.push(vec![
                        t.clone(),
                        "1".into(),
                        num(x),
                        String::new(),
                        String::new(),
                        num(v),
                    ]);
                }
            }
            _ => {
                for &x in &grid {
                    for &y in &grid {
                        let (v, z) = if n == 2 {
                            (s.eval_kernel(&[x, y])?, String::new())
                        } else {
                            (s.eval_kernel(&[x, y, 0.5])?, num(0.5))
                        };
                        rows.push(vec![t.clone(), n.to_string(), num(x), num(y), z, num(v)]);
                    }
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
struct McSummary {
    horizon: f64,
    replicas: u64,
    master_seed: u64,
    bins: usize,
    mean_count: f64,
}

pub fn cmd_simulate_mc(exp: &Experiment, out_root: &Path) -> CliResult<RunManifest> {
    let mut out = OutputDir::create(out_root.join("mc"))?;
    let t_end = horizon(exp);
    let est = out.stage("simulate", |_| {
        let model = Model::build(exp)?;
        Ok(estimate(&sim_config(exp, &model, t_end)?)?)
    })?;
    out.stage("write", |out| write_mc(out, exp, &est, t_end))?;
    out.finish("simulate-mc", &exp.config.hash())
}

fn write_mc(out: &mut OutputDir, exp: &Experiment, est: &McEstimate, t_end: f64) -> CliResult<()> {
    let outputs = &exp.config.outputs;
    if outputs.wants("csv") {
        let law = est
            .number_law
            .iter()
            .zip(&est.number_stderr)
            .enumerate()
            .map(|(n, (p, s))| vec![n.to_string(), num(*p), num(*s)]);
        out.write_csv("mc_number_law.csv", &["n", "P", "stderr"], law)?;
        let centers = est.bin_centers();
        let hist = (0..centers.len()).map(|b| {
            vec![
                num(est.bin_edges[b]),
                num(est.bin_edges[b + 1]),
                num(centers[b]),
                num(est.intensity[b]),
                num(est.intensity_stderr[b]),
            ]
        });
        out.write_csv(
            "mc_intensity.csv",
            &["bin_lo", "bin_hi", "bin_center", "intensity", "stderr"],
            hist,
        )?;
        if outputs.raw_counts {
            let counts = est
                .counts
                .iter()
                .enumerate()
                .map(|(r, c)| vec![r.to_string(), c.to_string()]);
            out.write_csv("mc_counts.csv", &["replica", "count"], counts)?;
        }
    }
    let mean_count =
        est.counts.iter().map(|&c| c as u64).sum::<u64>() as f64 / est.counts.len() as f64;
    out.write_json(
        "mc_summary.json",
        &McSummary {
            horizon: t_end,
            replicas: est.replicas_used,
            master_seed: exp.config.mc.master_seed,
            bins: exp.config.mc.bins,
            mean_count,
        },
    )?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct CmeSummary {
    gamma: f64,
    lambda_d: f64,
    max_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    stationary_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stationary_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stationary_skipped: Option<String>,
}

pub fn cmd_solve_cme(exp: &Experiment, out_root: &Path) -> CliResult<RunManifest> {
    let mut out = OutputDir::create(out_root.join("cme"))?;
    let times = exp.times();
    let (sys, laws) = out.stage("evolve", |_| {
        let model = Model::build(exp)?;
        let sys = cme_generator(
            exp.config.truncation.max_degree,
            model.gamma(),
            model.lambda_d,
        )?;
        let laws = sys.evolve_from_vacuum(&times)?;
        Ok((sys, laws))
    })?;
    let stationary = out.stage("stationary", |_| {
        if sys.gamma > 0.0 && sys.lambda_d > 0.0 {
            Ok(Some(cme_stationary(&sys)?))
        } else {
            Ok(None)
        }
    })?;
    out.stage("write", |out| {
        if exp.config.outputs.wants("csv") {
            let rows = times.iter().zip(&laws).flat_map(|(t, p)| {
                p.iter()
                    .enumerate()
                    .map(move |(n, v)| vec![num(*t), n.to_string(), num(*v)])
            });
            out.write_csv(
                "cme_number_law.csv",
                &["t", "n", "P"],
                rows.collect::<Vec<_>>(),
            )?;
            if let Some(pi) = &stationary {
                let rows = pi
                    .iter()
                    .enumerate()
                    .map(|(n, v)| vec![n.to_string(), num(*v)]);
                out.write_csv("cme_stationary.csv", &["n", "pi"], rows)?;
            }
        }
        let summary = CmeSummary {
            gamma: sys.gamma,
            lambda_d: sys.lambda_d,
            max_count: sys.max_count,
            stationary_mean: stationary
                .as_ref()
                .map(|pi| pi.iter().enumerate().map(|(n, p)| n as f64 * p).sum()),
            stationary_residual: stationary.as_ref().map(|pi| sys.stationary_residual(pi)),
            stationary_skipped: stationary
                .is_none()
                .then(|| "stationary law needs gamma > 0 and lambda_d > 0".to_string()),
        };
        out.write_json("cme_summary.json", &summary)?;
        Ok(())
    })?;
    out.finish("solve-cme", &exp.config.hash())
}

/// Compare-time knobs that are not part of the experiment config.
#[derive(Debug, Clone, Default)]
pub struct CompareSettings {
    pub tolerance_overrides: BTreeMap<String, f64>,
    /// Test hook: `(row, col, delta)` added to the recursion-route generator
    /// before the route-equivalence check.
    pub perturb: Option<(usize, usize, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub all_pass: bool,
    pub config_hash: String,
    pub tolerances: BTreeMap<String, f64>,
    pub checks: ReportSuite,
    /// Checks that do not apply to this configuration, with the reason.
    pub skipped: Vec<(String, String)>,
}

pub struct CompareOutcome {
    pub report: CompareReport,
    pub manifest: RunManifest,
}

fn resolve_tolerances(
    exp: &Experiment,
    settings: &CompareSettings,
) -> CliResult<BTreeMap<String, f64>> {
    let mut tol: BTreeMap<String, f64> = DEFAULT_TOLERANCES
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    for (k, v) in exp
        .config
        .compare
        .tolerances
        .iter()
        .chain(&settings.tolerance_overrides)
    {
        if !tol.contains_key(k) {
            let known: Vec<&str> = DEFAULT_TOLERANCES.iter().map(|(k, _)| *k).collect();
            return Err(CliError::Usage(format!(
                "unknown tolerance {k:?}; known checks: {known:?}"
            )));
        }
        if !(v.is_finite() && *v >= 0.0) {
            return Err(CliError::Usage(format!(
                "tolerance {k} must be >= 0, got {v}"
            )));
        }
        tol.insert(k.clone(), *v);
    }
    Ok(tol)
}

/// Tensor size budget for the route check inside `compare`; the tensor
/// route costs about `N^M · M · N` per column at the top degree.
pub const ROUTE_CHECK_TENSOR_BUDGET: usize = 1 << 16;

/// Largest degree `≤ M` whose tensors fit the route-check budget.
fn route_degree(n_modes: usize, max_degree: usize) -> usize {
    let cap = ROUTE_CHECK_TENSOR_BUDGET.min(CDME_TENSOR_CAP) as u128;
    let mut m = 0;
    while m < max_degree && (n_modes as u128).pow(m as u32 + 1) <= cap {
        m += 1;
    }
    m
}

pub fn cmd_compare(
    exp: &Experiment,
    out_root: &Path,
    settings: &CompareSettings,
) -> CliResult<CompareOutcome> {
    let tol = resolve_tolerances(exp, settings)?;
    let mut out = OutputDir::create(out_root.join("compare"))?;
    let mut suite = ReportSuite::default();
    let mut skipped = Vec::new();
    let model = Model::build(exp)?;
    let times = exp.times();
    let n_modes = model.space.num_modes();
    let max_degree = model.space.max_degree();

    out.stage("route_equivalence", |_| {
        let m = route_degree(n_modes, max_degree);
        let space = Arc::new(make_space(n_modes, m)?);
        let mut a =
            assemble_from_genfun(space.clone(), &model.basis, &model.creation, model.lambda_d)?;
        if let Some((r, c, d)) = settings.perturb {
            a = a.with_entry_perturbed(r, c, d)?;
        }
        let quad = exp
            .config
            .model
            .quad_points
            .unwrap_or_else(|| model.basis.default_quad_points());
        let b = assemble_from_cdme(space, &model.basis, &model.creation, model.lambda_d, quad)?;
        let mut r = compare_generators(&a, &b, tol["route_equivalence"])?;
        if m < max_degree {
            let d = r.detail.take().unwrap_or_default();
            r.detail = Some(format!("{d}; checked at max_degree {m} (tensor budget)"));
        }
        suite.push("route_equivalence", r);
        Ok(())
    })?;

    let l = model.generator()?;
    let states = out.stage("hierarchy", |_| solve_hierarchy(exp, &model, &l))?;
    let laws: Vec<Vec<f64>> = states.iter().map(|s| s.number_law()).collect();

    out.stage("cme_slice", |_| {
        let sys = cme_generator(max_degree, model.gamma(), model.lambda_d)?;
        let cme = sys.evolve_from_vacuum(&times)?;
        suite.push(
            "cme_slice",
            compare_max_abs(
                "max_abs_difference",
                &laws.concat(),
                &cme.concat(),
                tol["cme_slice"],
            )?,
        );
        let masses: Vec<f64> = states.iter().map(|s| s.mass()).collect();
        suite.push(
            "mass",
            compare_max_abs(
                "max_abs_mass_drift",
                &masses,
                &vec![1.0; masses.len()],
                tol["mass"],
            )?,
        );
        Ok(())
    })?;

    out.stage("oracles", |_| {
        if model.lambda_d != 0.0 {
            let why = "closed form needs lambda_d = 0".to_string();
            skipped.push(("poisson".to_string(), why.clone()));
            skipped.push(("intensity_oracle".to_string(), why));
            return Ok(());
        }
        let poisson: Vec<f64> = times
            .iter()
            .flat_map(|&t| creation_only_law(model.gamma(), t, max_degree))
            .collect();
        suite.push(
            "poisson",
            compare_max_abs(
                "max_abs_difference",
                &laws.concat(),
                &poisson,
                tol["poisson"],
            )?,
        );
        let mut got = Vec::new();
        let mut want = Vec::new();
        for s in &states {
            got.extend(s.intensity_coeffs());
            want.extend(creation_only_intensity(
                &model.creation,
                &model.basis,
                s.time(),
            )?);
        }
        suite.push(
            "intensity_oracle",
            compare_max_abs("max_abs_difference", &got, &want, tol["intensity_oracle"])?,
        );
        Ok(())
    })?;

    out.stage("monte_carlo", |_| {
        let t_end = horizon(exp);
        let Some(last) = states.last() else {
            return Ok(());
        };
        let est = estimate(&sim_config(exp, &model, t_end)?)?;
        let r = est.replicas_used as f64;
        let top = exp
            .config
            .compare
            .z_max_count
            .unwrap_or(DEFAULT_Z_MAX_COUNT)
            .min(max_degree);
        let (p_hat, se) = est.number_law_padded(top + 1);
        let labels: Vec<String> = (0..=top).map(|n| format!("n={n}")).collect();
        let opts = CompareOptions {
            z_threshold: tol["mc_number_law"],
            stderr_floor: 1.0 / r,
            ..CompareOptions::default()
        };
        let law = last.number_law();
        suite.push(
            "mc_number_law",
            compare_z_scores("max_abs_z", &labels, &p_hat, &law[..=top], &se, &opts)?,
        );

        let width = 1.0 / est.intensity.len() as f64;
        let want = intensity_bin_averages(&last.intensity_coeffs(), &est.bin_edges);
        let labels: Vec<String> = est.bin_centers().iter().map(|c| format!("x={c}")).collect();
        let opts = CompareOptions {
            z_threshold: tol["mc_intensity"],
            stderr_floor: 1.0 / (r * width),
            ..CompareOptions::default()
        };
        suite.push(
            "mc_intensity",
            compare_z_scores(
                "max_abs_z",
                &labels,
                &est.intensity,
                &want,
                &est.intensity_stderr,
                &opts,
            )?,
        );
        Ok(())
    })?;

    out.stage("transfer", |_| {
        suite.push(
            "transfer",
            transfer_report(&TransferParams::default(), tol["transfer"])?.0,
        );
        Ok(())
    })?;

    let report = CompareReport {
        all_pass: suite.all_pass(),
        config_hash: exp.config.hash(),
        tolerances: tol,
        checks: suite,
        skipped,
    };
    out.write_json("report.json", &report)?;
    let manifest = out.finish("compare", &report.config_hash)?;
    Ok(CompareOutcome { report, manifest })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferParams {
    pub max_degree: usize,
    pub points: usize,
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for TransferParams {
    fn default() -> Self {
        Self {
            max_degree: 8,
            points: 41,
            z_min: -2.0,
            z_max: 2.0,
        }
    }
}

/// Worst transfer error over degrees `0..=max_degree`, and the per-degree
/// errors.
pub fn transfer_report(
    p: &TransferParams,
    tolerance: f64,
) -> CliResult<(ComparisonReport, Vec<f64>)> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    if p.points < 1 || !(p.z_max >= p.z_min) {
        return Err(CliError::Usage(format!(
            "transfer grid needs points >= 1 and z_max >= z_min, got {} points on [{}, {}]",
            p.points, p.z_min, p.z_max
        )));
    }
    let grid = uniform_grid(p.z_min, p.z_max, p.points);
    let errors = (0..=p.max_degree)
        .map(|n| weierstrass_transfer_check(n, &grid))
        .collect::<Result<Vec<f64>, CdmeError>>()?;
    let (worst_n, worst) = errors
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0f64), |acc, (n, e)| {
            if e > acc.1 || e.is_nan() {
                (n, e)
            } else {
                acc
            }
        });
    let report = ComparisonReport::new("max_abs_error", worst, tolerance)
        .with_detail(format!("worst at degree {worst_n}"));
    Ok((report, errors))
}

pub fn cmd_transfer_check(
    out_root: &Path,
    params: &TransferParams,
    tolerance: f64,
) -> CliResult<(ComparisonReport, RunManifest)> {
    let mut out = OutputDir::create(out_root.join("transfer"))?;
    let (report, errors) = out.stage("check", |_| transfer_report(params, tolerance))?;
    let rows = errors
        .iter()
        .enumerate()
        .map(|(n, e)| vec![n.to_string(), num(*e)]);
    out.write_csv("transfer.csv", &["n", "max_error"], rows)?;
    out.write_json("report.json", &report)?;
    let key = serde_json::to_string(&(params, tolerance)).expect("serializable");
    let manifest = out.finish(
        "transfer-check",
        &hex::encode(Sha256::digest(key.as_bytes())),
    )?;
    Ok((report, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn route_degree_respects_cap() {
        assert_eq!(route_degree(2, 14), 14);
        assert_eq!(route_degree(3, 14), 10);
        assert_eq!(route_degree(1, 40), 40);
    }

    #[test]
    fn transfer_defaults_pass() {
        let (r, errs) = transfer_report(&TransferParams::default(), 1e-8).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(errs.len(), 9);
        let bad = TransferParams {
            max_degree: 11,
            ..TransferParams::default()
        };
        assert!(transfer_report(&bad, 1e-8).is_err());
    }
}
