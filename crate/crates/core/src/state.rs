//! Truncated multi-index coordinates and the coefficient state of the
//! projected generating function `v_N(t, z) = Σ_β c_β z^β`.
//!
//! Derivatives at the origin give `∂^α v_N(t, 0) = α! c_α`, so every
//! projected kernel, the particle-number law and the one-particle intensity
//! are finite combinations of coefficients.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CdmeError, Result};
use crate::spectral::mode_value;

/// Default cap on `C(N + M, N)`.
pub const DEFAULT_SPACE_CAP: usize = 2_000_000;

/// Largest particle number for which [`CoeffState::eval_kernel`] symmetrizes.
pub const KERNEL_MAX_ORDER: usize = 6;

/// All `β ∈ ℕ₀^N` with `|β| ≤ M`, in graded lexicographic order: by total
/// degree, then descending on the leading components (so `(2,0)` precedes
/// `(1,1)`).
#[derive(Debug, Clone)]
pub struct MultiIndexSpace {
    num_modes: usize,
    max_degree: usize,
    flat: Vec<u32>,
    degree_starts: Vec<usize>,
    lookup: HashMap<Box<[u32]>, usize>,
}

impl PartialEq for MultiIndexSpace {
    fn eq(&self, other: &Self) -> bool {
        self.num_modes == other.num_modes && self.max_degree == other.max_degree
    }
}

/// `C(n + m, n)`, or `None` past `cap`.
fn binomial_capped(n: usize, m: usize, cap: usize) -> Option<usize> {
    let mut acc: u128 = 1;
    for i in 1..=n.min(m) as u128 {
        acc = acc * ((n.max(m)) as u128 + i) / i;
        if acc > cap as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

pub fn make_space(num_modes: usize, max_degree: usize) -> Result<MultiIndexSpace> {
    MultiIndexSpace::with_cap(num_modes, max_degree, DEFAULT_SPACE_CAP)
}

impl MultiIndexSpace {
    pub fn new(num_modes: usize, max_degree: usize) -> Result<Self> {
        make_space(num_modes, max_degree)
    }

    pub fn with_cap(num_modes: usize, max_degree: usize, cap: usize) -> Result<Self> {
        if num_modes == 0 {
            return Err(CdmeError::Validation("num_modes must be >= 1".into()));
        }
        let size = binomial_capped(num_modes, max_degree, cap).ok_or(CdmeError::SizeCap {
            size: usize::MAX,
            cap,
        })?;
        let mut flat = Vec::with_capacity(size * num_modes);
        let mut degree_starts = Vec::with_capacity(max_degree + 2);
        let mut scratch = vec![0u32; num_modes];
        for d in 0..=max_degree {
            degree_starts.push(flat.len() / num_modes);
            push_compositions(d as u32, 0, &mut scratch, &mut flat);
        }
        degree_starts.push(flat.len() / num_modes);
        debug_assert_eq!(flat.len(), size * num_modes);

        let lookup = flat
            .chunks_exact(num_modes)
            .enumerate()
            .map(|(i, b)| (b.to_vec().into_boxed_slice(), i))
            .collect();
        Ok(Self {
            num_modes,
            max_degree,
            flat,
            degree_starts,
            lookup,
        })
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.flat.len() / self.num_modes
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    #[allow(clippy::should_implement_trait)]
    pub fn index(&self, i: usize) -> &[u32] {
        &self.flat[i * self.num_modes..(i + 1) * self.num_modes]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.flat.chunks_exact(self.num_modes)
    }

    pub fn lookup(&self, beta: &[u32]) -> Option<usize> {
        self.lookup.get(beta).copied()
    }

    /// Offsets of the multi-indices of total degree `d`.
    pub fn degree_range(&self, d: usize) -> Range<usize> {
        if d > self.max_degree {
            return 0..0;
        }
        self.degree_starts[d]..self.degree_starts[d + 1]
    }

    /// Offset of `n·e₀`, the pure constant-mode index of degree `n`.
    pub fn pure_index(&self, n: usize) -> Option<usize> {
        (n <= self.max_degree).then(|| self.degree_starts[n])
    }

    pub fn degree_of(&self, i: usize) -> usize {
        self.index(i).iter().map(|&b| b as usize).sum()
    }
}

/// Appends every composition of `remaining` into `scratch[pos..]`, leading
/// component descending.
fn push_compositions(remaining: u32, pos: usize, scratch: &mut [u32], out: &mut Vec<u32>) {
    if pos + 1 == scratch.len() {
        scratch[pos] = remaining;
        out.extend_from_slice(scratch);
        return;
    }
    for v in (0..=remaining).rev() {
        scratch[pos] = v;
        push_compositions(remaining - v, pos + 1, scratch, out);
    }
    scratch[pos] = 0;
}

/// Coefficients `c_β(t)` of `v_N` over a [`MultiIndexSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffState {
    space: Arc<MultiIndexSpace>,
    coeffs: Vec<f64>,
    time: f64,
}

/// Physical observables reconstructed from a state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observables {
    /// `P(N(t) = n)` for `n = 0..=M`.
    pub number_law: Vec<f64>,
    /// Cosine coefficients of the one-particle intensity `m(t, x)`.
    pub intensity_coeffs: Vec<f64>,
    pub mass: f64,
    /// Particle numbers whose probability came out below `-NEGATIVE_TOLERANCE`.
    pub negative_entries: Vec<usize>,
}

/// Threshold below which a reconstructed probability is flagged.
pub const NEGATIVE_TOLERANCE: f64 = 1e-12;

/// JSON layout of a state snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    #[serde(rename = "N")]
    pub num_modes: usize,
    #[serde(rename = "M")]
    pub max_degree: usize,
    pub t: f64,
    pub enumeration: String,
    pub coeffs: Vec<f64>,
}

pub const ENUMERATION_TAG: &str = "grlex";

impl CoeffState {
    /// Empty system: `c_0 = 1`, everything else zero, `t = 0`.
    pub fn vacuum(space: Arc<MultiIndexSpace>) -> Self {
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = 1.0;
        Self {
            space,
            coeffs,
            time: 0.0,
        }
    }

    pub fn from_coeffs(space: Arc<MultiIndexSpace>, coeffs: Vec<f64>, time: f64) -> Result<Self> {
        if coeffs.len() != space.len() {
            return Err(CdmeError::Validation(format!(
                "expected {} coefficients, got {}",
                space.len(),
                coeffs.len()
            )));
        }
        Ok(Self {
            space,
            coeffs,
            time,
        })
    }

    pub fn zeros(space: Arc<MultiIndexSpace>) -> Self {
        let coeffs = vec![0.0; space.len()];
        Self {
            space,
            coeffs,
            time: 0.0,
        }
    }

    pub fn space(&self) -> &Arc<MultiIndexSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    /// Coefficient of `z^β`; zero when `β` lies outside the space.
    pub fn coeff(&self, beta: &[u32]) -> f64 {
        self.space.lookup(beta).map_or(0.0, |i| self.coeffs[i])
    }

    pub fn set_coeff(&mut self, beta: &[u32], value: f64) -> Result<()> {
        let i = self
            .space
            .lookup(beta)
            .ok_or_else(|| CdmeError::Domain(format!("multi-index {beta:?} not in space")))?;
        self.coeffs[i] = value;
        Ok(())
    }

    /// `P(N(t) = n) = c_{n e₀}` for `n = 0..=M`.
    pub fn number_law(&self) -> Vec<f64> {
        (0..=self.space.max_degree())
            .map(|n| self.coeffs[self.space.pure_index(n).unwrap()])
            .collect()
    }

    /// Total probability `Σ_n c_{n e₀}`; below one by the truncation leakage.
    pub fn mass(&self) -> f64 {
        self.number_law().iter().sum()
    }

    /// Cosine coefficients `m_k` of `m(t, x) = Σ_n n ∫ ρ_n(t, x, y) dy`:
    /// `m_0 = Σ n c_{n e₀}` and `m_k = Σ_{n ≥ 1} c_{e_k + (n-1) e₀}`.
    pub fn intensity_coeffs(&self) -> Vec<f64> {
        let n_modes = self.space.num_modes();
        let max_deg = self.space.max_degree();
        let mut m = vec![0.0; n_modes];
        let mut beta = vec![0u32; n_modes];
        for n in 1..=max_deg {
            m[0] += n as f64 * self.coeffs[self.space.pure_index(n).unwrap()];
            for (k, mk) in m.iter_mut().enumerate().skip(1) {
                beta.iter_mut().for_each(|b| *b = 0);
                beta[0] = (n - 1) as u32;
                beta[k] = 1;
                *mk += self.coeff(&beta);
            }
        }
        m
    }

    /// One-particle intensity `m(t, x)`.
    pub fn intensity(&self, x: f64) -> f64 {
        self.intensity_coeffs()
            .iter()
            .enumerate()
            .map(|(k, &c)| c * mode_value(k, x))
            .sum()
    }

    pub fn observables(&self) -> Observables {
        let number_law = self.number_law();
        let negative_entries = number_law
            .iter()
            .enumerate()
            .filter(|(_, &p)| p < -NEGATIVE_TOLERANCE)
            .map(|(n, _)| n)
            .collect();
        Observables {
            mass: number_law.iter().sum(),
            intensity_coeffs: self.intensity_coeffs(),
            number_law,
            negative_entries,
        }
    }

    /// Projected kernel `Π_N^{⊗n} ρ_n(t, x₁..x_n)`:
    ///
    /// `(1/n!) Σ_{j₁..j_n} α(j)! c_{α(j)} ξ_{j₁}(x₁)···ξ_{j_n}(x_n)`,
    ///
    /// summed as one term per multi-index `α` with `|α| = n` times the sum
    /// over its `n!/α!` distinct arrangements.
    pub fn eval_kernel(&self, x: &[f64]) -> Result<f64> {
        let n = x.len();
        if n > self.space.max_degree() {
            return Err(CdmeError::Domain(format!(
                "kernel order {n} exceeds the degree cap M = {}",
                self.space.max_degree()
            )));
        }
        if n > KERNEL_MAX_ORDER {
            return Err(CdmeError::Domain(format!(
                "kernel order {n} exceeds the symmetrization limit {KERNEL_MAX_ORDER}"
            )));
        }
        if let Some(bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(CdmeError::Domain(format!("position {bad} outside [0, 1]")));
        }
        if n == 0 {
            return Ok(self.coeffs[0]);
        }

        let n_modes = self.space.num_modes();
        let table: Vec<Vec<f64>> = x
            .iter()
            .map(|&xi| (0..n_modes).map(|k| mode_value(k, xi)).collect())
            .collect();
        let n_fact = factorial(n);

        let mut total = 0.0;
        let mut tuple = Vec::with_capacity(n);
        for i in self.space.degree_range(n) {
            let c = self.coeffs[i];
            if c == 0.0 {
                continue;
            }
            let alpha = self.space.index(i);
            tuple.clear();
            for (k, &a) in alpha.iter().enumerate() {
                tuple.extend(std::iter::repeat_n(k, a as usize));
            }
            let mut arrangements = 0.0;
            loop {
                arrangements += tuple
                    .iter()
                    .enumerate()
                    .map(|(pos, &k)| table[pos][k])
                    .product::<f64>();
                if !next_permutation(&mut tuple) {
                    break;
                }
            }
            let alpha_fact: f64 = alpha.iter().map(|&a| factorial(a as usize)).product();
            total += alpha_fact / n_fact * c * arrangements;
        }
        Ok(total)
    }

    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            num_modes: self.space.num_modes(),
            max_degree: self.space.max_degree(),
            t: self.time,
            enumeration: ENUMERATION_TAG.to_string(),
            coeffs: self.coeffs.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.snapshot()).expect("snapshot serializes")
    }

    pub fn from_snapshot(snap: &StateSnapshot) -> Result<Self> {
        if snap.enumeration != ENUMERATION_TAG {
            return Err(CdmeError::Validation(format!(
                "unsupported enumeration {:?}",
                snap.enumeration
            )));
        }
        let space = Arc::new(make_space(snap.num_modes, snap.max_degree)?);
        Self::from_coeffs(space, snap.coeffs.clone(), snap.t)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: StateSnapshot = serde_json::from_str(text)
            .map_err(|e| CdmeError::Validation(format!("bad state snapshot: {e}")))?;
        Self::from_snapshot(&snap)
    }

    /// `a·self + b·other`, time taken from `self`.
    pub fn combine(&self, a: f64, other: &CoeffState, b: f64) -> Result<Self> {
        if *self.space != *other.space {
            return Err(CdmeError::Validation(
                "states live in different spaces".into(),
            ));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self::from_coeffs(self.space.clone(), coeffs, self.time)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Lexicographic successor; `false` once the sequence is the last
/// arrangement.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}
