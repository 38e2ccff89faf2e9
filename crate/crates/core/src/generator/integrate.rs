use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::GeneratorMatrix;
use crate::error::{CdmeError, Result};
use crate::state::CoeffState;

/// `Auto` uses the dense exponential up to this state dimension.
pub const AUTO_EXPM_MAX_DIM: usize = 2000;

/// `Auto` falls back to rk4 with `dt = RK4_DEFAULT_DT_FACTOR / max|diag L|`.
pub const RK4_DEFAULT_DT_FACTOR: f64 = 1e-3;

/// Norm growth (relative to the initial state) treated as blow-up.
const BLOWUP_FACTOR: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorMethod {
    /// Classical fixed-step fourth-order Runge–Kutta.
    Rk4,
    /// Dense matrix exponential per output interval.
    Expm,
    /// `Expm` up to [`AUTO_EXPM_MAX_DIM`], otherwise `Rk4`.
    #[default]
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    #[serde(default)]
    pub method: IntegratorMethod,
    /// Step for rk4; derived from the diagonal of `L` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default)]
    pub output_times: Vec<f64>,
}

impl IntegratorConfig {
    pub fn new(method: IntegratorMethod, output_times: Vec<f64>) -> Self {
        Self {
            method,
            dt: None,
            output_times,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(CdmeError::Validation(format!(
                    "dt must be positive, got {dt}"
                )));
            }
        }
        if self
            .output_times
            .iter()
            .any(|t| !(t.is_finite() && *t >= 0.0))
        {
            return Err(CdmeError::Validation(
                "output times must be finite and non-negative".into(),
            ));
        }
        if self.output_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(CdmeError::Validation(
                "output times must be increasing".into(),
            ));
        }
        Ok(())
    }
}

/// One classical RK4 step of `dc/dt = L c`.
pub fn rk4_step(c: &[f64], l: &GeneratorMatrix, dt: f64) -> Vec<f64> {
    if dt == 0.0 {
        return c.to_vec();
    }
    let n = c.len();
    let mut tmp = vec![0.0; n];
    let mut k1 = vec![0.0; n];
    l.apply(c, &mut k1);
    for i in 0..n {
        tmp[i] = c[i] + 0.5 * dt * k1[i];
    }
    let mut k2 = vec![0.0; n];
    l.apply(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = c[i] + 0.5 * dt * k2[i];
    }
    let mut k3 = vec![0.0; n];
    l.apply(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = c[i] + dt * k3[i];
    }
    let mut k4 = vec![0.0; n];
    l.apply(&tmp, &mut k4);
    (0..n)
        .map(|i| c[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `dc/dt = L c` from `state` and returns the state at each output
/// time.
pub fn evolve(
    state: &CoeffState,
    l: &GeneratorMatrix,
    cfg: &IntegratorConfig,
) -> Result<Vec<CoeffState>> {
    cfg.validate()?;
    if **state.space() != **l.space() {
        return Err(CdmeError::SpaceMismatch {
            state_modes: state.space().num_modes(),
            state_degree: state.space().max_degree(),
            op_modes: l.space().num_modes(),
            op_degree: l.space().max_degree(),
        });
    }
    if let Some(&first) = cfg.output_times.first() {
        if first < state.time() {
            return Err(CdmeError::Validation(format!(
                "output time {first} precedes the state time {}",
                state.time()
            )));
        }
    }

    let method = match cfg.method {
        IntegratorMethod::Auto if l.dim() <= AUTO_EXPM_MAX_DIM => IntegratorMethod::Expm,
        IntegratorMethod::Auto => IntegratorMethod::Rk4,
        m => m,
    };
    match method {
        IntegratorMethod::Expm => evolve_expm(state, l, &cfg.output_times),
        _ => {
            let dt = cfg.dt.unwrap_or_else(|| default_rk4_dt(l));
            evolve_rk4(state, l, &cfg.output_times, dt)
        }
    }
}

fn default_rk4_dt(l: &GeneratorMatrix) -> f64 {
    let max_diag = l.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if max_diag > 0.0 {
        RK4_DEFAULT_DT_FACTOR / max_diag
    } else {
        RK4_DEFAULT_DT_FACTOR
    }
}

fn evolve_expm(state: &CoeffState, l: &GeneratorMatrix, times: &[f64]) -> Result<Vec<CoeffState>> {
    let dense = l.to_dense();
    let mut cache: HashMap<u64, DMatrix<f64>> = HashMap::new();
    let mut c = DVector::from_column_slice(state.coeffs());
    let mut t = state.time();
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let delta = target - t;
        if delta > 0.0 {
            let prop = cache
                .entry(delta.to_bits())
                .or_insert_with(|| (&dense * delta).exp());
            c = &*prop * c;
        }
        t = target;
        let mut s = CoeffState::from_coeffs(state.space().clone(), c.as_slice().to_vec(), t)?;
        s.set_time(target);
        out.push(s);
    }
    Ok(out)
}

fn evolve_rk4(
    state: &CoeffState,
    l: &GeneratorMatrix,
    times: &[f64],
    dt: f64,
) -> Result<Vec<CoeffState>> {
    let limit = BLOWUP_FACTOR * inf_norm(state.coeffs()).max(1.0);
    let mut c = state.coeffs().to_vec();
    let mut t = state.time();
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while t < target {
            let h = dt.min(target - t);
            c = rk4_step(&c, l, h);
            // land exactly on the output time
            t = if target - t <= dt { target } else { t + h };
            let norm = inf_norm(&c);
            if !norm.is_finite() || norm > limit {
                let stable = 2.5 / l.max_abs_row_sum().max(f64::MIN_POSITIVE);
                return Err(CdmeError::Unstable {
                    time: t,
                    norm,
                    suggested_dt: stable.min(dt / 2.0),
                });
            }
        }
        out.push(CoeffState::from_coeffs(
            state.space().clone(),
            c.clone(),
            target,
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{assemble_from_genfun, GeneratorParams};
    use crate::spectral::{make_basis, project_creation_rate, RateFn};
    use crate::state::make_space;
    use std::sync::Arc;

    fn creation_only(gamma: f64, m: usize) -> (CoeffState, GeneratorMatrix) {
        let basis = make_basis(1).unwrap();
        let space = Arc::new(make_space(1, m).unwrap());
        let cr = project_creation_rate(&basis, RateFn::Constant(gamma), 64).unwrap();
        let l = assemble_from_genfun(space.clone(), &basis, &cr, 0.0).unwrap();
        (CoeffState::vacuum(space), l)
    }

    fn poisson(lambda: f64, n: usize) -> f64 {
        (-lambda).exp() * lambda.powi(n as i32) / (1..=n).map(|i| i as f64).product::<f64>()
    }

    #[test]
    fn zero_generator_leaves_state_unchanged() {
        let space = Arc::new(make_space(2, 2).unwrap());
        let params = GeneratorParams {
            gamma: 0.0,
            mode_coeffs: vec![0.0, 0.0],
            lambda_d: 0.0,
            eigenvalues: vec![0.0, 0.0],
        };
        let l = GeneratorMatrix::from_triplets(space.clone(), params, vec![]);
        let mut s0 = CoeffState::vacuum(space);
        s0.coeffs_mut()[3] = 0.25;
        for method in [IntegratorMethod::Expm, IntegratorMethod::Rk4] {
            let cfg = IntegratorConfig::new(method, vec![0.0, 0.5, 2.0]).with_dt(0.1);
            for s in evolve(&s0, &l, &cfg).unwrap() {
                assert_eq!(s.coeffs(), s0.coeffs());
            }
        }
    }

    #[test]
    fn creation_only_is_poisson() {
        let (s0, l) = creation_only(1.0, 20);
        let cfg = IntegratorConfig::new(IntegratorMethod::Expm, vec![1.0]);
        let p = evolve(&s0, &l, &cfg).unwrap()[0].number_law();
        assert!((p[0] - 0.367_879_441_171_442_3).abs() < 1e-12);
        for (n, pn) in p.iter().enumerate() {
            assert!((pn - poisson(1.0, n)).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn rk4_dt_zero_is_identity_and_scalar_matches_exp() {
        let (s0, l) = creation_only(1.0, 0);
        // 1x1 generator [-1]
        assert_eq!(rk4_step(s0.coeffs(), &l, 0.0), s0.coeffs());
        let dt = 0.1;
        let one = rk4_step(&[1.0], &l, dt)[0];
        let err = (one - (-dt).exp()).abs();
        // local error is dt^5/120 for the scalar exponential
        assert!(err < dt.powi(5) / 100.0, "{err}");
    }

    #[test]
    fn rk4_is_fourth_order_on_poisson() {
        let (s0, l) = creation_only(1.0, 12);
        let errs: Vec<f64> = [0.1, 0.05]
            .iter()
            .map(|&dt| {
                let cfg = IntegratorConfig::new(IntegratorMethod::Rk4, vec![1.0]).with_dt(dt);
                let p = evolve(&s0, &l, &cfg).unwrap()[0].number_law();
                p.iter()
                    .enumerate()
                    .map(|(n, pn)| (pn - poisson(1.0, n)).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        let ratio = errs[0] / errs[1];
        assert!(
            (12.0..20.0).contains(&ratio),
            "ratio {ratio}, errs {errs:?}"
        );
    }

    #[test]
    fn rk4_blowup_is_reported() {
        let basis = make_basis(4).unwrap();
        let space = Arc::new(make_space(4, 3).unwrap());
        // excites the stiff mode α_3 = 9π²
        let rate = RateFn::Cosine(vec![2.0, 0.0, 0.0, 1.0]);
        let cr = project_creation_rate(&basis, rate, 256).unwrap();
        let l = assemble_from_genfun(space.clone(), &basis, &cr, 0.0).unwrap();
        let cfg = IntegratorConfig::new(IntegratorMethod::Rk4, vec![50.0]).with_dt(0.5);
        let err = evolve(&CoeffState::vacuum(space), &l, &cfg).unwrap_err();
        match err {
            CdmeError::Unstable { suggested_dt, .. } => assert!(suggested_dt < 0.5),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(IntegratorMethod::Rk4, vec![1.0, 0.5])
            .validate()
            .is_err());
        assert!(IntegratorConfig::new(IntegratorMethod::Rk4, vec![-1.0])
            .validate()
            .is_err());
        assert!(IntegratorConfig::new(IntegratorMethod::Rk4, vec![1.0])
            .with_dt(0.0)
            .validate()
            .is_err());
        let (s0, l) = creation_only(1.0, 2);
        let other = Arc::new(make_space(1, 3).unwrap());
        let cfg = IntegratorConfig::new(IntegratorMethod::Expm, vec![1.0]);
        assert!(matches!(
            evolve(&CoeffState::vacuum(other), &l, &cfg),
            Err(CdmeError::SpaceMismatch { .. })
        ));
        let mut late = s0.clone();
        late.set_time(2.0);
        assert!(evolve(&late, &l, &cfg).is_err());
    }
}
