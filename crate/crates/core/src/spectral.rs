//! Neumann cosine eigenbasis of `-d²/dx²` on `[0, 1]`, Gauss–Legendre
//! quadrature, and projection of creation-rate profiles onto the basis.
//!
//! Mode indices are zero-based throughout: mode `0` is the constant function
//! `ξ₀ ≡ 1` with eigenvalue `0`, and mode `k ≥ 1` is `√2 cos(kπx)` with
//! eigenvalue `k²π²`. The family is orthonormal in `L²([0, 1])`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CdmeError, Result};

/// Multiplier applied to the sampled maximum of a rate to get the rejection
/// sampling envelope.
pub const DENSITY_SUP_SAFETY: f64 = 1.01;

/// Uniform grid used (together with the quadrature nodes) to sample rates for
/// validation and the envelope.
const VALIDATION_GRID: usize = 1025;

/// Default number of quadrature points per retained mode.
pub const DEFAULT_POINTS_PER_MODE: usize = 64;

/// Gauss–Legendre rule mapped to `[0, 1]`, nodes in ascending order.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `n`-point rule by Newton iteration on `P_n`. Exact for
    /// polynomials of degree `2n - 1`; spectrally accurate for analytic
    /// integrands.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, p_prev) = legendre_pair(n, z);
                dp = nf * (z * p - p_prev) / (z * z - 1.0);
                let step = p / dp;
                z -= step;
                if step.abs() <= 1e-16 {
                    break;
                }
            }
            let (p, p_prev) = legendre_pair(n, z);
            if p != 0.0 {
                dp = nf * (z * p - p_prev) / (z * z - 1.0);
            }
            // on [-1, 1] the weight is 2 / ((1 - z²) P'(z)²); halve it for [0, 1]
            let w = 1.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = 0.5 * (1.0 - z);
            nodes[n - 1 - i] = 0.5 * (1.0 + z);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// `(P_n(z), P_{n-1}(z))` by the three-term recurrence.
fn legendre_pair(n: usize, z: f64) -> (f64, f64) {
    let mut p = 1.0;
    let mut p_prev = 0.0;
    for j in 1..=n {
        let jf = j as f64;
        let next = ((2.0 * jf - 1.0) * z * p - (jf - 1.0) * p_prev) / jf;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// Integrates `f` over `[0, 1]` with an `num_points`-point Gauss–Legendre
/// rule (error `O(f^{(2n)})`, i.e. spectral for smooth `f`).
pub fn quadrature<F: Fn(f64) -> f64>(f: F, num_points: usize) -> Result<f64> {
    if num_points < 2 {
        return Err(CdmeError::Validation(format!(
            "quadrature needs at least 2 points, got {num_points}"
        )));
    }
    Ok(GaussLegendre::new(num_points).integrate(f))
}

/// First `N` Neumann eigenpairs of `-d²/dx²` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBasis {
    eigenvalues: Vec<f64>,
}

pub fn make_basis(num_modes: usize) -> Result<ModeBasis> {
    ModeBasis::new(num_modes)
}

impl ModeBasis {
    pub fn new(num_modes: usize) -> Result<Self> {
        if num_modes == 0 {
            return Err(CdmeError::Validation("num_modes must be >= 1".into()));
        }
        let eigenvalues = (0..num_modes)
            .map(|k| {
                let kf = k as f64;
                kf * kf * PI * PI
            })
            .collect();
        Ok(Self { eigenvalues })
    }

    pub fn num_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.eigenvalues[k]
    }

    /// `ξ_k(x)` with range checks on both arguments.
    pub fn eval_mode(&self, k: usize, x: f64) -> Result<f64> {
        if k >= self.num_modes() {
            return Err(CdmeError::Domain(format!(
                "mode index {k} out of range for {} modes",
                self.num_modes()
            )));
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(CdmeError::Domain(format!("position {x} outside [0, 1]")));
        }
        Ok(mode_value(k, x))
    }

    /// All `N` basis values at `x`.
    pub fn values_at(&self, x: f64) -> Vec<f64> {
        (0..self.num_modes()).map(|k| mode_value(k, x)).collect()
    }

    /// Default quadrature size for this basis.
    pub fn default_quad_points(&self) -> usize {
        DEFAULT_POINTS_PER_MODE * self.num_modes()
    }

    /// `m(x) = Σ_k coeffs[k] ξ_k(x)`.
    pub fn synthesize(&self, coeffs: &[f64], x: f64) -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| c * mode_value(k, x))
            .sum()
    }
}

/// Unchecked `ξ_k(x)`.
#[inline]
pub fn mode_value(k: usize, x: f64) -> f64 {
    if k == 0 {
        1.0
    } else {
        SQRT_2 * (k as f64 * PI * x).cos()
    }
}

/// `ξ_k'(x)`.
#[inline]
pub fn mode_derivative(k: usize, x: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        let w = k as f64 * PI;
        -SQRT_2 * w * (w * x).sin()
    }
}

/// Creation-rate profile `λ_c` on `[0, 1]`.
#[derive(Clone)]
pub enum RateFn {
    Constant(f64),
    /// Coefficients on the orthonormal cosine modes, mode 0 first.
    Cosine(Vec<f64>),
    /// Piecewise-linear interpolation through `(xs[i], ys[i])`.
    Table {
        xs: Vec<f64>,
        ys: Vec<f64>,
    },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for RateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateFn::Constant(g) => f.debug_tuple("Constant").field(g).finish(),
            RateFn::Cosine(c) => f.debug_tuple("Cosine").field(c).finish(),
            RateFn::Table { xs, ys } => f
                .debug_struct("Table")
                .field("xs", xs)
                .field("ys", ys)
                .finish(),
            RateFn::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl RateFn {
    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        RateFn::Custom(Arc::new(f))
    }

    pub fn table(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(CdmeError::Validation(format!(
                "rate table needs >= 2 points with matching lengths (x: {}, values: {})",
                xs.len(),
                ys.len()
            )));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CdmeError::Validation(
                "rate table x values must be strictly increasing".into(),
            ));
        }
        if xs[0] > 0.0 || xs[xs.len() - 1] < 1.0 {
            return Err(CdmeError::Validation(format!(
                "rate table must cover [0, 1], got [{}, {}]",
                xs[0],
                xs[xs.len() - 1]
            )));
        }
        Ok(RateFn::Table { xs, ys })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            RateFn::Constant(g) => *g,
            RateFn::Cosine(c) => c
                .iter()
                .enumerate()
                .map(|(k, &ck)| ck * mode_value(k, x))
                .sum(),
            RateFn::Table { xs, ys } => {
                let i = xs.partition_point(|&xi| xi <= x);
                if i == 0 {
                    ys[0]
                } else if i == xs.len() {
                    ys[ys.len() - 1]
                } else {
                    let (x0, x1) = (xs[i - 1], xs[i]);
                    let s = (x - x0) / (x1 - x0);
                    ys[i - 1] + s * (ys[i] - ys[i - 1])
                }
            }
            RateFn::Custom(f) => f(x),
        }
    }
}

/// A creation-rate profile together with its total rate `γ = ∫λ_c`, its
/// projections `c_k = ⟨λ_c, ξ_k⟩` and a rejection envelope.
#[derive(Debug, Clone)]
pub struct CreationRate {
    rate: RateFn,
    total_rate: f64,
    mode_coeffs: Vec<f64>,
    density_sup: f64,
}

impl CreationRate {
    pub fn rate(&self) -> &RateFn {
        &self.rate
    }

    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    pub fn mode_coeffs(&self) -> &[f64] {
        &self.mode_coeffs
    }

    /// Upper bound on `λ_c` used as the rejection envelope.
    pub fn density_sup(&self) -> f64 {
        self.density_sup
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.rate.eval(x)
    }

    /// Positional density `π_c(x) = λ_c(x) / γ`.
    pub fn density(&self, x: f64) -> f64 {
        if self.total_rate > 0.0 {
            self.rate.eval(x) / self.total_rate
        } else {
            0.0
        }
    }

    /// Whether `λ_c` is spatially constant, so births are uniform.
    pub fn is_uniform(&self) -> bool {
        matches!(self.rate, RateFn::Constant(_))
    }

    /// Replaces the rejection envelope.
    pub fn with_density_sup(mut self, sup: f64) -> Result<Self> {
        if !(sup.is_finite() && sup > 0.0) {
            return Err(CdmeError::Validation(format!(
                "density sup must be positive and finite, got {sup}"
            )));
        }
        self.density_sup = sup;
        Ok(self)
    }
}

/// Projects `rate` onto the first `N` modes with a `quad_points`-point
/// Gauss–Legendre rule.
pub fn project_creation_rate(
    basis: &ModeBasis,
    rate: RateFn,
    quad_points: usize,
) -> Result<CreationRate> {
    let n_modes = basis.num_modes();
    if quad_points < 2 * n_modes {
        return Err(CdmeError::Validation(format!(
            "quad_points = {quad_points} is below 2N = {}",
            2 * n_modes
        )));
    }
    let rule = GaussLegendre::new(quad_points);

    let grid = (0..VALIDATION_GRID).map(|i| i as f64 / (VALIDATION_GRID - 1) as f64);
    let checks: Vec<(f64, f64)> = rule
        .nodes()
        .iter()
        .copied()
        .chain(grid)
        .map(|x| (x, rate.eval(x)))
        .collect();
    // profiles like 1 + cos(πx) touch zero and round to -1e-16 there
    let scale = checks.iter().fold(1.0_f64, |m, &(_, v)| m.max(v.abs()));
    let round_off = 64.0 * f64::EPSILON * scale;
    let mut sup: f64 = 0.0;
    for &(x, v) in &checks {
        if !v.is_finite() || v < -round_off {
            return Err(CdmeError::Validation(format!(
                "creation rate must be finite and non-negative, got {v} at x = {x}"
            )));
        }
        sup = sup.max(v);
    }

    let samples: Vec<f64> = rule.nodes().iter().map(|&x| rate.eval(x)).collect();
    let project = |k: usize| -> f64 {
        rule.nodes()
            .iter()
            .zip(rule.weights())
            .zip(&samples)
            .map(|((&x, &w), &v)| w * v * mode_value(k, x))
            .sum()
    };
    let mode_coeffs: Vec<f64> = match rate {
        // exact: ξ_0 ≡ 1 and the other modes integrate to zero
        RateFn::Constant(g) => (0..n_modes).map(|k| if k == 0 { g } else { 0.0 }).collect(),
        _ => (0..n_modes).map(project).collect(),
    };
    let total_rate = mode_coeffs[0];

    Ok(CreationRate {
        rate,
        total_rate,
        mode_coeffs,
        density_sup: sup * DENSITY_SUP_SAFETY,
    })
}

/// Serializable description of a creation-rate profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateSpec {
    Constant { gamma: f64 },
    Cosine { coeffs: Vec<f64> },
    Table { x: Vec<f64>, values: Vec<f64> },
}

impl RateSpec {
    pub fn to_rate_fn(&self) -> Result<RateFn> {
        match self {
            RateSpec::Constant { gamma } => Ok(RateFn::Constant(*gamma)),
            RateSpec::Cosine { coeffs } => {
                if coeffs.is_empty() {
                    return Err(CdmeError::Validation(
                        "cosine rate needs at least one coefficient".into(),
                    ));
                }
                Ok(RateFn::Cosine(coeffs.clone()))
            }
            RateSpec::Table { x, values } => RateFn::table(x.clone(), values.clone()),
        }
    }
}
