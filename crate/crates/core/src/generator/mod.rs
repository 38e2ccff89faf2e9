//! The linear generator `L` of the coefficient hierarchy, `dc/dt = L c`.
//!
//! Two independent assemblies are provided: [`assemble_from_genfun`] expands
//! the generating-function PDE on monomials, [`assemble_from_cdme`] projects
//! the kernel equations onto tensor cosine modes by quadrature. They must
//! agree entrywise.

mod cdme;
mod genfun;
mod integrate;

use std::io::{self, BufRead, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{CdmeError, Result};
use crate::state::MultiIndexSpace;

pub use cdme::{assemble_from_cdme, CDME_TENSOR_CAP};
pub use genfun::assemble_from_genfun;
pub use integrate::{
    evolve, rk4_step, IntegratorConfig, IntegratorMethod, AUTO_EXPM_MAX_DIM, RK4_DEFAULT_DT_FACTOR,
};

/// Rows above this size are applied in parallel.
const PARALLEL_MATVEC_MIN_DIM: usize = 4096;

/// Model parameters an operator was assembled with.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub gamma: f64,
    pub mode_coeffs: Vec<f64>,
    pub lambda_d: f64,
    pub eigenvalues: Vec<f64>,
}

/// Sparse generator in compressed-row form; columns sorted within a row.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    space: Arc<MultiIndexSpace>,
    params: GeneratorParams,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl GeneratorMatrix {
    /// Sums duplicate `(row, col)` triplets and drops exact zeros.
    pub fn from_triplets(
        space: Arc<MultiIndexSpace>,
        params: GeneratorParams,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        let dim = space.len();
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside {dim}x{dim}");
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);

        let mut row_ptr = vec![0usize; dim + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = merged.iter().map(|e| e.1).collect();
        let values = merged.iter().map(|e| e.2).collect();
        Self {
            space,
            params,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn space(&self) -> &Arc<MultiIndexSpace> {
        &self.space
    }

    pub fn params(&self) -> &GeneratorParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.space.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(col, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// All stored `(row, col, value)` entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim()).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// `out = L c`. Each row is reduced in column order, so results are
    /// identical whether or not rows run in parallel.
    pub fn apply(&self, c: &[f64], out: &mut [f64]) {
        assert_eq!(c.len(), self.dim());
        assert_eq!(out.len(), self.dim());
        let row_dot = |r: usize| -> f64 {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * c[self.col_idx[k]];
            }
            acc
        };
        if self.dim() >= PARALLEL_MATVEC_MIN_DIM {
            out.par_iter_mut()
                .enumerate()
                .for_each(|(r, o)| *o = row_dot(r));
        } else {
            out.iter_mut()
                .enumerate()
                .for_each(|(r, o)| *o = row_dot(r));
        }
    }

    pub fn mul_vec(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply(c, &mut out);
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        m
    }

    /// Largest absolute row sum, a bound on the spectral radius.
    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.dim())
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Copy with `delta` added at `(row, col)`.
    pub fn with_entry_perturbed(&self, row: usize, col: usize, delta: f64) -> Result<Self> {
        if row >= self.dim() || col >= self.dim() {
            return Err(CdmeError::Domain(format!(
                "entry ({row}, {col}) outside {0}x{0} generator",
                self.dim()
            )));
        }
        let mut trip: Vec<_> = self.entries().collect();
        trip.push((row, col, delta));
        Ok(Self::from_triplets(
            self.space.clone(),
            self.params.clone(),
            trip,
        ))
    }

    /// Writes the coordinate-list text form: a `#` header line, then one
    /// `row col value` line per stored entry (zero-based grlex offsets,
    /// values in shortest round-trip notation).
    pub fn write_coo<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "# cdme generator coo N={} M={} dim={} nnz={}",
            self.space.num_modes(),
            self.space.max_degree(),
            self.dim(),
            self.nnz()
        )?;
        for (r, c, v) in self.entries() {
            writeln!(w, "{r} {c} {v:e}")?;
        }
        Ok(())
    }

    /// Reads the output of [`write_coo`](Self::write_coo) back as triplets.
    pub fn read_coo<R: BufRead>(r: R) -> Result<Vec<(usize, usize, f64)>> {
        let mut out = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| CdmeError::Validation(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad =
                || CdmeError::Validation(format!("line {}: malformed entry {line:?}", lineno + 1));
            let mut parts = line.split_whitespace();
            let r = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let c = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let v = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            out.push((r, c, v));
        }
        Ok(out)
    }
}

fn validate_rates(gamma: f64, lambda_d: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(CdmeError::Validation(format!(
            "creation rate gamma must be finite and >= 0, got {gamma}"
        )));
    }
    if !(lambda_d.is_finite() && lambda_d >= 0.0) {
        return Err(CdmeError::Validation(format!(
            "annihilation rate lambda_d must be finite and >= 0, got {lambda_d}"
        )));
    }
    Ok(())
}

fn check_mode_counts(space: &MultiIndexSpace, basis_modes: usize, rate_modes: usize) -> Result<()> {
    if basis_modes != space.num_modes() || rate_modes != space.num_modes() {
        return Err(CdmeError::Validation(format!(
            "mode counts disagree: space N={}, basis N={basis_modes}, creation rate N={rate_modes}",
            space.num_modes()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::make_space;

    fn params() -> GeneratorParams {
        GeneratorParams {
            gamma: 0.0,
            mode_coeffs: vec![0.0],
            lambda_d: 0.0,
            eigenvalues: vec![0.0],
        }
    }

    #[test]
    fn triplets_merge_and_drop_zeros() {
        let sp = Arc::new(make_space(1, 2).unwrap());
        let m = GeneratorMatrix::from_triplets(
            sp,
            params(),
            vec![
                (1, 0, 2.0),
                (0, 0, 1.0),
                (1, 0, -2.0),
                (2, 1, 0.5),
                (2, 1, 0.25),
            ],
        );
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.get(2, 1), 0.75);
        assert_eq!(m.mul_vec(&[1.0, 2.0, 3.0]), vec![1.0, 0.0, 1.5]);
    }

    #[test]
    fn coo_round_trip() {
        let sp = Arc::new(make_space(2, 2).unwrap());
        let m = GeneratorMatrix::from_triplets(
            sp.clone(),
            params(),
            vec![
                (0, 3, 1.0 / 3.0),
                (5, 5, -std::f64::consts::PI),
                (2, 0, 1e-300),
            ],
        );
        let mut buf = Vec::new();
        m.write_coo(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# cdme generator coo N=2 M=2 dim=6 nnz=3"));
        let back = GeneratorMatrix::read_coo(&buf[..]).unwrap();
        let m2 = GeneratorMatrix::from_triplets(sp, params(), back);
        assert_eq!(
            m.entries().collect::<Vec<_>>(),
            m2.entries().collect::<Vec<_>>()
        );
        assert!(GeneratorMatrix::read_coo(&b"0 x 1.0\n"[..]).is_err());
    }

    #[test]
    fn perturbation_hook() {
        let sp = Arc::new(make_space(1, 2).unwrap());
        let m = GeneratorMatrix::from_triplets(sp, params(), vec![(0, 0, 1.0)]);
        let p = m.with_entry_perturbed(2, 0, 0.5).unwrap();
        assert_eq!(p.get(2, 0), 0.5);
        assert_eq!(p.get(0, 0), 1.0);
        assert!(m.with_entry_perturbed(3, 0, 1.0).is_err());
    }
}
