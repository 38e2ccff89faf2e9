//! Gaussian smoothing `f̃(z) = E[f(z + G)]`, `G ~ N(0, 1)`, maps the
//! probabilists' Hermite polynomial `He_n` to the monomial `z^n`. This is
//! the identity that moves the Gaussian-form generating-function equation
//! onto the monomial form used by the coefficient recursion.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{CdmeError, Result};

pub const GAUSS_HERMITE_NODES: usize = 64;

/// Largest Hermite degree the check accepts.
pub const TRANSFER_MAX_DEGREE: usize = 10;

/// Nodes and weights for `∫ f(x) e^{−x²} dx`, by Newton iteration on the
/// normalized Hermite recurrence. Nodes are returned in descending order.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z1.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Probabilists' Hermite polynomial via `He_{n+1} = z He_n − n He_{n−1}`.
pub fn hermite_he(n: usize, z: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = z * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `E[f(z + G)] ≈ π^{−1/2} Σ w_i f(z + √2 x_i)`.
pub fn weierstrass_transform<F: Fn(f64) -> f64>(f: F, z: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let (x, w) = rule;
    x.iter()
        .zip(w)
        .map(|(&xi, &wi)| wi * f(z + SQRT_2 * xi))
        .sum::<f64>()
        / PI.sqrt()
}

/// `count` equispaced points from `a` to `b` inclusive.
pub fn uniform_grid(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..count)
            .map(|i| a + (b - a) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// `max_z |E[He_n(z + G)] − z^n|` over `grid`, with a 64-node rule.
pub fn weierstrass_transfer_check(n: usize, grid: &[f64]) -> Result<f64> {
    if n > TRANSFER_MAX_DEGREE {
        return Err(CdmeError::Validation(format!(
            "Hermite degree {n} exceeds {TRANSFER_MAX_DEGREE}"
        )));
    }
    let rule = gauss_hermite(GAUSS_HERMITE_NODES);
    Ok(grid
        .iter()
        .map(|&z| (weierstrass_transform(|y| hermite_he(n, y), z, &rule) - z.powi(n as i32)).abs())
        .fold(0.0, f64::max))
}
