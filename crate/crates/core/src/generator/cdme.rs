//! Generator assembly by direct Galerkin projection of the kernel equations
//!
//! `∂_t ρ_n = Σ_i ∂²_{x_i} ρ_n + λ_d (n+2)(n+1)/2 ∫∫ ρ_{n+2}(·, x, y) dx dy
//!            - λ_d n(n-1)/2 ρ_n + (1/n) Σ_i λ_c(x_i) ρ_{n-1}(x without x_i) - γ ρ_n`
//!
//! onto tensor products of cosine modes. Kernels are held as full symmetric
//! tensors `a_{j₁..j_n}` over ordered mode tuples; every 1-D integral
//! (stiffness, means, rate projections) is computed by Gauss–Legendre
//! quadrature. Only the final read-out converts a tensor to multi-index
//! coefficients through `c_β = n!/β! · a_{canonical(β)}`.

use std::sync::Arc;

use super::{check_mode_counts, validate_rates, GeneratorMatrix, GeneratorParams};
use crate::error::{CdmeError, Result};
use crate::spectral::{mode_derivative, mode_value, CreationRate, GaussLegendre, ModeBasis};
use crate::state::{factorial, MultiIndexSpace};

/// Cap on `N^M`, the largest dense tensor this route builds.
pub const CDME_TENSOR_CAP: usize = 1 << 22;

/// Entries below this fraction of the largest magnitude are quadrature
/// round-off and are removed.
const CLEANUP_RELATIVE: f64 = 1e-14;

/// One-dimensional quadrature data shared by every tensor operation.
struct ModeIntegrals {
    n_modes: usize,
    /// `⟨ξ_k, ξ_m''⟩ = -∫ ξ_k' ξ_m'` (Neumann boundary terms vanish).
    stiffness: Vec<Vec<f64>>,
    /// `∫ ξ_k`.
    means: Vec<f64>,
    /// `⟨λ_c, ξ_k⟩`.
    rate_proj: Vec<f64>,
    /// `∫ λ_c`.
    rate_total: f64,
}

impl ModeIntegrals {
    fn new(n_modes: usize, creation: &CreationRate, quad_points: usize) -> Self {
        let rule = GaussLegendre::new(quad_points);
        let stiffness = (0..n_modes)
            .map(|k| {
                (0..n_modes)
                    .map(|m| -rule.integrate(|x| mode_derivative(k, x) * mode_derivative(m, x)))
                    .collect()
            })
            .collect();
        let means = (0..n_modes)
            .map(|k| rule.integrate(|x| mode_value(k, x)))
            .collect();
        let rate_proj = (0..n_modes)
            .map(|k| rule.integrate(|x| creation.eval(x) * mode_value(k, x)))
            .collect();
        let rate_total = rule.integrate(|x| creation.eval(x));
        Self {
            n_modes,
            stiffness,
            means,
            rate_proj,
            rate_total,
        }
    }
}

/// Mode tuples of length `n` packed little-endian in base `N`.
struct TupleCodec {
    base: usize,
}

impl TupleCodec {
    fn size(&self, n: usize) -> usize {
        self.base.pow(n as u32)
    }

    fn decode(&self, mut idx: usize, n: usize, out: &mut Vec<usize>) {
        out.clear();
        for _ in 0..n {
            out.push(idx % self.base);
            idx /= self.base;
        }
    }

    fn encode(&self, tuple: &[usize]) -> usize {
        tuple.iter().rev().fold(0, |acc, &j| acc * self.base + j)
    }
}

/// Symmetric tensor of the kernel with `c_β = 1` and all other coefficients
/// zero: every arrangement of `β` carries `β!/n!`.
fn source_tensor(codec: &TupleCodec, beta: &[u32]) -> Vec<f64> {
    let n: usize = beta.iter().map(|&b| b as usize).sum();
    let beta_fact: f64 = beta.iter().map(|&b| factorial(b as usize)).product();
    let value = beta_fact / factorial(n);
    let mut tensor = vec![0.0; codec.size(n)];
    let mut tuple = Vec::with_capacity(n);
    let mut counts = vec![0u32; beta.len()];
    for (idx, slot) in tensor.iter_mut().enumerate() {
        codec.decode(idx, n, &mut tuple);
        counts.iter_mut().for_each(|c| *c = 0);
        for &j in &tuple {
            counts[j] += 1;
        }
        if counts == beta {
            *slot = value;
        }
    }
    tensor
}

fn diffusion(codec: &TupleCodec, ints: &ModeIntegrals, a: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    let mut tuple = Vec::with_capacity(n);
    let mut moved = Vec::with_capacity(n);
    for (idx, o) in out.iter_mut().enumerate() {
        codec.decode(idx, n, &mut tuple);
        let mut acc = 0.0;
        for i in 0..n {
            moved.clone_from(&tuple);
            for m in 0..ints.n_modes {
                moved[i] = m;
                acc += ints.stiffness[tuple[i]][m] * a[codec.encode(&moved)];
            }
        }
        *o = acc;
    }
    out
}

/// `∫∫ ρ_{n+2}(x₁..x_n, x, y) dx dy` projected: contracts the last two slots
/// against the mode means. `a` is the level-`n+2` tensor.
fn pair_integral(codec: &TupleCodec, ints: &ModeIntegrals, a: &[f64], n: usize) -> Vec<f64> {
    let stride = codec.size(n);
    let mut out = vec![0.0; stride];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in 0..ints.n_modes {
            for l in 0..ints.n_modes {
                acc += a[j + stride * (k + ints.n_modes * l)] * ints.means[k] * ints.means[l];
            }
        }
        *o = acc;
    }
    out
}

/// `(1/n) Σ_i λ_c(x_i) ρ_{n-1}(x without x_i)` projected onto level `n`.
/// `a` is the level-`n-1` tensor.
fn creation_gain(codec: &TupleCodec, ints: &ModeIntegrals, a: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; codec.size(n)];
    let mut tuple = Vec::with_capacity(n);
    let mut rest = Vec::with_capacity(n);
    for (idx, o) in out.iter_mut().enumerate() {
        codec.decode(idx, n, &mut tuple);
        let mut acc = 0.0;
        for i in 0..n {
            rest.clear();
            rest.extend(
                tuple
                    .iter()
                    .enumerate()
                    .filter(|&(p, _)| p != i)
                    .map(|(_, &j)| j),
            );
            acc += ints.rate_proj[tuple[i]] * a[codec.encode(&rest)];
        }
        *o = acc / n as f64;
    }
    out
}

/// Assembles `L` by projecting each term of the constant-`λ_d` kernel
/// equations with a `quad_points`-point rule. Independent of
/// [`assemble_from_genfun`](super::assemble_from_genfun); the two must agree.
pub fn assemble_from_cdme(
    space: Arc<MultiIndexSpace>,
    basis: &ModeBasis,
    creation: &CreationRate,
    lambda_d: f64,
    quad_points: usize,
) -> Result<GeneratorMatrix> {
    validate_rates(creation.total_rate(), lambda_d)?;
    check_mode_counts(&space, basis.num_modes(), creation.mode_coeffs().len())?;
    let n_modes = space.num_modes();
    let max_deg = space.max_degree();
    if quad_points < 2 * n_modes {
        return Err(CdmeError::Validation(format!(
            "quad_points = {quad_points} is below 2N = {}",
            2 * n_modes
        )));
    }
    let largest = (n_modes as u128).checked_pow(max_deg as u32);
    match largest {
        Some(s) if s <= CDME_TENSOR_CAP as u128 => {}
        _ => {
            return Err(CdmeError::SizeCap {
                size: largest.map_or(usize::MAX, |s| s.min(usize::MAX as u128) as usize),
                cap: CDME_TENSOR_CAP,
            })
        }
    }

    let ints = ModeIntegrals::new(n_modes, creation, quad_points);
    let codec = TupleCodec { base: n_modes };
    let mut triplets = Vec::new();

    let mut canonical = Vec::with_capacity(max_deg);
    let mut read_out =
        |level: usize, tensor: &[f64], col: usize, out: &mut Vec<(usize, usize, f64)>| {
            let n_fact = factorial(level);
            for row in space.degree_range(level) {
                let beta = space.index(row);
                canonical.clear();
                for (k, &b) in beta.iter().enumerate() {
                    canonical.extend(std::iter::repeat_n(k, b as usize));
                }
                let beta_fact: f64 = beta.iter().map(|&b| factorial(b as usize)).product();
                let v = n_fact / beta_fact * tensor[codec.encode(&canonical)];
                if v != 0.0 {
                    out.push((row, col, v));
                }
            }
        };

    for col in 0..space.len() {
        let beta = space.index(col);
        let n = space.degree_of(col);
        let a = source_tensor(&codec, beta);

        // same level: diffusion, pair loss, creation loss
        let nf = n as f64;
        let mut same = diffusion(&codec, &ints, &a, n);
        let loss = lambda_d * nf * (nf - 1.0) / 2.0 + ints.rate_total;
        for (s, &ai) in same.iter_mut().zip(&a) {
            *s -= loss * ai;
        }
        read_out(n, &same, col, &mut triplets);

        // ρ_n feeds the equation for ρ_{n-2} through the pair integral
        if n >= 2 {
            let lower = n - 2;
            let factor = lambda_d * nf * (nf - 1.0) / 2.0;
            let gain: Vec<f64> = pair_integral(&codec, &ints, &a, lower)
                .into_iter()
                .map(|v| factor * v)
                .collect();
            read_out(lower, &gain, col, &mut triplets);
        }

        // and the equation for ρ_{n+1} through creation, unless truncated
        if n < max_deg {
            let gain = creation_gain(&codec, &ints, &a, n + 1);
            read_out(n + 1, &gain, col, &mut triplets);
        }
    }

    let scale = triplets.iter().fold(0.0f64, |m, t| m.max(t.2.abs()));
    let generator = GeneratorMatrix::from_triplets(
        space.clone(),
        GeneratorParams {
            gamma: ints.rate_total,
            mode_coeffs: ints.rate_proj.clone(),
            lambda_d,
            eigenvalues: basis.eigenvalues().to_vec(),
        },
        triplets,
    );
    let cleaned: Vec<_> = generator
        .entries()
        .filter(|e| e.2.abs() > CLEANUP_RELATIVE * scale)
        .collect();
    Ok(GeneratorMatrix::from_triplets(
        space,
        generator.params().clone(),
        cleaned,
    ))
}
