use std::f64::consts::{PI, SQRT_2};

use crate::error::{CdmeError, Result};
use crate::spectral::{CreationRate, ModeBasis};

/// Poisson(`γt`) probabilities for `n = 0..=M` (not renormalized).
pub fn creation_only_law(gamma: f64, t: f64, max_count: usize) -> Vec<f64> {
    let mu = gamma * t;
    let mut out = Vec::with_capacity(max_count + 1);
    let mut p = (-mu).exp();
    for n in 0..=max_count {
        out.push(p);
        p *= mu / (n + 1) as f64;
    }
    out
}

/// Cosine coefficients of `m(t, ·)` solving `∂_t m = ∂²m + λ_c` from
/// `m(0) = 0`: `m_0 = c_0 t`, `m_k = c_k (1 − e^{−α_k t}) / α_k`.
pub fn creation_only_intensity(
    creation: &CreationRate,
    basis: &ModeBasis,
    t: f64,
) -> Result<Vec<f64>> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(CdmeError::Validation(format!("t must be >= 0, got {t}")));
    }
    let coeffs = creation.mode_coeffs();
    if coeffs.len() != basis.num_modes() {
        return Err(CdmeError::Validation(format!(
            "creation rate has {} modes, basis has {}",
            coeffs.len(),
            basis.num_modes()
        )));
    }
    Ok(coeffs
        .iter()
        .zip(basis.eigenvalues())
        .map(|(&c, &a)| {
            if a == 0.0 {
                c * t
            } else {
                // -expm1 keeps small-t accuracy
                c * -(-a * t).exp_m1() / a
            }
        })
        .collect())
}

/// CDF at `x` of reflected Brownian motion on `[0, 1]` (generator `∂²`)
/// started at `x0`, after time `t > 0`, from the cosine series of the
/// Neumann heat kernel.
pub fn reflected_heat_cdf(x0: f64, t: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let mut acc = x;
    for k in 1.. {
        let kp = k as f64 * PI;
        let decay = (-kp * kp * t).exp();
        if decay < 1e-18 {
            break;
        }
        acc += 2.0 * (kp * x0).cos() * decay * (kp * x).sin() / kp;
    }
    acc
}

/// Bin averages of `Σ_k m_k ξ_k` over consecutive intervals of `edges`.
pub fn intensity_bin_averages(intensity_coeffs: &[f64], edges: &[f64]) -> Vec<f64> {
    edges
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let mut acc = intensity_coeffs.first().copied().unwrap_or(0.0) * (b - a);
            for (k, &m) in intensity_coeffs.iter().enumerate().skip(1) {
                let kp = k as f64 * PI;
                acc += m * SQRT_2 * ((kp * b).sin() - (kp * a).sin()) / kp;
            }
            acc / (b - a)
        })
        .collect()
}
