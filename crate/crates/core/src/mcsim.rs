//! Exact event-driven particle simulation of creation, pairwise
//! annihilation and reflected Brownian motion on `[0, 1]`.
//!
//! With a constant pair rate the total reaction rate depends only on the
//! particle count, so between reactions the count is frozen and the waiting
//! time is exactly exponential. Positions are advanced over each waiting
//! time by one Gaussian increment of variance `2·dt` folded back into the
//! unit interval, which is the exact reflected transition law. The
//! simulator has no splitting or discretization error.
//!
//! Every replica draws from its own ChaCha8 stream: key from the master
//! seed, stream number from the replica id. Replica outputs are therefore
//! independent of scheduling, and [`estimate`] aggregates them in id order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CdmeError, Result};
use crate::spectral::CreationRate;

pub type ReplicaRng = ChaCha8Rng;

/// Default cap on reaction events per replica.
pub const DEFAULT_MAX_EVENTS: u64 = 10_000_000;

/// Proposals tried per birth before the rejection sampler gives up.
const MAX_REJECTIONS: usize = 1_000_000;

/// Counter-based stream for one replica.
pub fn replica_rng(master_seed: u64, replica_id: u64) -> ReplicaRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replica_id);
    rng
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleEnsemble {
    pub positions: Vec<f64>,
    pub time: f64,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub creation: CreationRate,
    pub lambda_d: f64,
    pub horizon: f64,
    pub replicas: u64,
    pub master_seed: u64,
    /// Histogram bins for the intensity estimate.
    pub bins: usize,
    pub max_events: u64,
}

impl SimConfig {
    pub fn new(
        creation: CreationRate,
        lambda_d: f64,
        horizon: f64,
        replicas: u64,
        master_seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            creation,
            lambda_d,
            horizon,
            replicas,
            master_seed,
            bins: 20,
            max_events: DEFAULT_MAX_EVENTS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_bins(mut self, bins: usize) -> Result<Self> {
        self.bins = bins;
        self.validate()?;
        Ok(self)
    }

    pub fn gamma(&self) -> f64 {
        self.creation.total_rate()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma().is_finite() && self.gamma() >= 0.0) {
            return Err(CdmeError::Validation(format!(
                "gamma must be >= 0, got {}",
                self.gamma()
            )));
        }
        if !(self.lambda_d.is_finite() && self.lambda_d >= 0.0) {
            return Err(CdmeError::Validation(format!(
                "lambda_d must be >= 0, got {}",
                self.lambda_d
            )));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(CdmeError::Validation(format!(
                "horizon must be >= 0, got {}",
                self.horizon
            )));
        }
        if self.replicas < 1 {
            return Err(CdmeError::Validation("replicas must be >= 1".into()));
        }
        if self.bins < 1 {
            return Err(CdmeError::Validation(
                "histogram needs at least one bin".into(),
            ));
        }
        Ok(())
    }
}

/// Maps a free position back into `[0, 1]` by repeated reflection at both
/// walls (the tent map on `y mod 2`).
pub fn reflect_into_unit(y: f64) -> f64 {
    let r = y.rem_euclid(2.0);
    if r <= 1.0 {
        r
    } else {
        2.0 - r
    }
}

/// Advances every particle by an independent reflected Brownian step over
/// `dt` (free increment variance `2·dt`).
pub fn diffuse<R: Rng + ?Sized>(positions: &mut [f64], dt: f64, rng: &mut R) {
    if dt <= 0.0 {
        return;
    }
    let sd = (2.0 * dt).sqrt();
    for x in positions.iter_mut() {
        let g: f64 = rng.sample(StandardNormal);
        *x = reflect_into_unit(*x + sd * g);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    Creation,
    Annihilation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NextEvent {
    /// `f64::INFINITY` when no reaction can fire.
    pub waiting_time: f64,
    pub kind: Option<EventKind>,
}

/// Total rate `γ + λ_d n(n-1)/2`, exponential waiting time, and the
/// reaction chosen in proportion to its rate.
pub fn next_event<R: Rng + ?Sized>(n: usize, gamma: f64, lambda_d: f64, rng: &mut R) -> NextEvent {
    let pairs = n as f64 * (n as f64 - 1.0) / 2.0;
    let annihilation = lambda_d * pairs;
    let total = gamma + annihilation;
    if total <= 0.0 {
        return NextEvent {
            waiting_time: f64::INFINITY,
            kind: None,
        };
    }
    let e: f64 = rng.sample(Exp1);
    let waiting_time = e / total;
    let kind = if annihilation == 0.0 {
        EventKind::Creation
    } else if gamma == 0.0 {
        EventKind::Annihilation
    } else if rng.random::<f64>() * total < gamma {
        EventKind::Creation
    } else {
        EventKind::Annihilation
    };
    NextEvent {
        waiting_time,
        kind: Some(kind),
    }
}

/// Draws a birth position from `λ_c / γ`: direct uniform draw for a constant
/// profile, rejection under [`CreationRate::density_sup`] otherwise.
pub fn sample_birth_position<R: Rng + ?Sized>(creation: &CreationRate, rng: &mut R) -> Result<f64> {
    if creation.is_uniform() {
        return Ok(rng.random::<f64>());
    }
    let sup = creation.density_sup();
    for _ in 0..MAX_REJECTIONS {
        let x: f64 = rng.random();
        let v = creation.eval(x);
        if v > sup {
            return Err(CdmeError::RejectionBound { x, value: v, sup });
        }
        if rng.random::<f64>() * sup < v {
            return Ok(x);
        }
    }
    Err(CdmeError::Logic(format!(
        "no birth position accepted in {MAX_REJECTIONS} proposals"
    )))
}

pub fn apply_creation<R: Rng + ?Sized>(
    positions: &mut Vec<f64>,
    creation: &CreationRate,
    rng: &mut R,
) -> Result<()> {
    positions.push(sample_birth_position(creation, rng)?);
    Ok(())
}

/// Removes a uniformly chosen unordered pair and returns its original
/// indices `(i, j)` with `i < j`.
pub fn apply_annihilation<R: Rng + ?Sized>(
    positions: &mut Vec<f64>,
    rng: &mut R,
) -> Result<(usize, usize)> {
    let n = positions.len();
    if n < 2 {
        return Err(CdmeError::Logic(format!(
            "annihilation fired with {n} particle(s)"
        )));
    }
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    let (lo, hi) = (i.min(j), i.max(j));
    positions.swap_remove(hi);
    positions.swap_remove(lo);
    Ok((lo, hi))
}

/// Simulates one replica from the empty state up to the horizon.
pub fn run_replica(cfg: &SimConfig, replica_id: u64) -> Result<ParticleEnsemble> {
    let mut rng = replica_rng(cfg.master_seed, replica_id);
    let gamma = cfg.gamma();
    let mut positions = Vec::new();
    let mut t = 0.0;
    let mut events = 0u64;
    loop {
        let ev = next_event(positions.len(), gamma, cfg.lambda_d, &mut rng);
        let remaining = cfg.horizon - t;
        let kind = match ev.kind {
            Some(kind) if ev.waiting_time < remaining => kind,
            _ => {
                diffuse(&mut positions, remaining, &mut rng);
                break;
            }
        };
        diffuse(&mut positions, ev.waiting_time, &mut rng);
        t += ev.waiting_time;
        match kind {
            EventKind::Creation => apply_creation(&mut positions, &cfg.creation, &mut rng)?,
            EventKind::Annihilation => {
                apply_annihilation(&mut positions, &mut rng)?;
            }
        }
        events += 1;
        if events > cfg.max_events {
            return Err(CdmeError::EventCap {
                replica: replica_id,
                cap: cfg.max_events,
            });
        }
    }
    Ok(ParticleEnsemble {
        positions,
        time: cfg.horizon,
    })
}

/// Replica averages at the horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    /// Empirical `P̂(n)` for `n = 0..=max observed count`.
    pub number_law: Vec<f64>,
    /// Binomial standard errors `sqrt(P̂(1-P̂)/R)`.
    pub number_stderr: Vec<f64>,
    pub bin_edges: Vec<f64>,
    /// Replica mean of (particles in bin) / (bin width), estimating the bin
    /// average of `m(T, x)`.
    pub intensity: Vec<f64>,
    /// Sample standard deviation over replicas divided by `sqrt(R)`.
    pub intensity_stderr: Vec<f64>,
    pub replicas_used: u64,
    /// Particle count of each replica at the horizon, in replica order.
    pub counts: Vec<u32>,
}

impl McEstimate {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    /// Number law and errors zero-padded (or cut) to `len` entries.
    pub fn number_law_padded(&self, len: usize) -> (Vec<f64>, Vec<f64>) {
        let pad = |v: &[f64]| {
            let mut out = v.to_vec();
            out.resize(len, 0.0);
            out
        };
        (pad(&self.number_law), pad(&self.number_stderr))
    }
}

fn bin_of(x: f64, bins: usize) -> usize {
    ((x * bins as f64) as usize).min(bins - 1)
}

/// Runs all replicas (in parallel) and aggregates in replica order.
pub fn estimate(cfg: &SimConfig) -> Result<McEstimate> {
    cfg.validate()?;
    if cfg.replicas < 2 {
        return Err(CdmeError::Validation(
            "estimate needs at least 2 replicas".into(),
        ));
    }
    let bins = cfg.bins;
    let per_replica: Vec<Result<(u32, Vec<u32>)>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|id| {
            let ens = run_replica(cfg, id)?;
            let mut hist = vec![0u32; bins];
            for &x in &ens.positions {
                hist[bin_of(x, bins)] += 1;
            }
            Ok((ens.len() as u32, hist))
        })
        .collect();

    let r = cfg.replicas;
    let mut counts = Vec::with_capacity(r as usize);
    let mut sums = vec![0u64; bins];
    let mut sums_sq = vec![0u64; bins];
    for res in per_replica {
        let (count, hist) = res?;
        counts.push(count);
        for (b, &h) in hist.iter().enumerate() {
            sums[b] += h as u64;
            sums_sq[b] += (h as u64) * (h as u64);
        }
    }

    let max_count = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut tally = vec![0u64; max_count + 1];
    for &c in &counts {
        tally[c as usize] += 1;
    }
    let rf = r as f64;
    let number_law: Vec<f64> = tally.iter().map(|&k| k as f64 / rf).collect();
    let number_stderr = number_law
        .iter()
        .map(|&p| (p * (1.0 - p) / rf).sqrt())
        .collect();

    let width = 1.0 / bins as f64;
    let bin_edges = (0..=bins).map(|b| b as f64 * width).collect();
    let intensity = sums.iter().map(|&s| s as f64 / rf / width).collect();
    let intensity_stderr = sums
        .iter()
        .zip(&sums_sq)
        .map(|(&s, &q)| {
            // exact integer numerator of the sample variance times R(R-1)
            let num = (r as u128) * (q as u128) - (s as u128) * (s as u128);
            let var = num as f64 / (rf * (rf - 1.0));
            (var / rf).sqrt() / width
        })
        .collect();

    Ok(McEstimate {
        number_law,
        number_stderr,
        bin_edges,
        intensity,
        intensity_stderr,
        replicas_used: r,
        counts,
    })
}
