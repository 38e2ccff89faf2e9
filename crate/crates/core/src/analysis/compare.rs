use serde::{Deserialize, Serialize};

use crate::error::{CdmeError, Result};
use crate::generator::GeneratorMatrix;

/// One compared component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentResult {
    pub label: String,
    pub a: f64,
    pub b: f64,
    pub abs_diff: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    pub pass: bool,
}

/// A single metric with its tolerance. `pass` is `value <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metric: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<ComponentResult>,
}

impl ComparisonReport {
    pub fn new(metric: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            metric: metric.into(),
            value,
            tolerance,
            // NaN never passes
            pass: value <= tolerance,
            detail: None,
            components: Vec::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn with_components(mut self, components: Vec<ComponentResult>) -> Self {
        self.components = components;
        self
    }
}

/// Named reports for one battery run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportSuite {
    pub reports: Vec<(String, ComparisonReport)>,
}

impl ReportSuite {
    pub fn push(&mut self, name: impl Into<String>, report: ComparisonReport) {
        self.reports.push((name.into(), report));
    }

    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|(_, r)| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &(String, ComparisonReport)> {
        self.reports.iter().filter(|(_, r)| !r.pass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    /// Tolerance on total variation when no standard errors are given.
    pub tv_tolerance: f64,
    /// Largest accepted `|z|` when standard errors are given.
    pub z_threshold: f64,
    /// Lower bound applied to each standard error before forming `z`.
    pub stderr_floor: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            tv_tolerance: 1e-6,
            z_threshold: 3.0,
            stderr_floor: 0.0,
        }
    }
}

/// `½ Σ |a_n − b_n|`.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Total variation of `a` against `b`; with `stderr`, per-component
/// z-scores under the `|z| ≤ z_threshold` rule instead, and the report value
/// is the largest `|z|`.
pub fn compare_number_laws(
    a: &[f64],
    b: &[f64],
    stderr: Option<&[f64]>,
    opts: &CompareOptions,
) -> Result<ComparisonReport> {
    if a.len() != b.len() {
        return Err(CdmeError::Validation(format!(
            "number laws differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let tv = total_variation(a, b);
    match stderr {
        None => {
            let components = a
                .iter()
                .zip(b)
                .enumerate()
                .map(|(n, (&x, &y))| ComponentResult {
                    label: format!("n={n}"),
                    a: x,
                    b: y,
                    abs_diff: (x - y).abs(),
                    stderr: None,
                    z: None,
                    pass: true,
                })
                .collect();
            Ok(
                ComparisonReport::new("total_variation", tv, opts.tv_tolerance)
                    .with_components(components),
            )
        }
        Some(se) => {
            if se.len() != a.len() {
                return Err(CdmeError::Validation(format!(
                    "stderr has {} entries, laws have {}",
                    se.len(),
                    a.len()
                )));
            }
            let components: Vec<ComponentResult> = a
                .iter()
                .zip(b)
                .zip(se)
                .enumerate()
                .map(|(n, ((&x, &y), &s))| z_component(format!("n={n}"), x, y, s, opts))
                .collect();
            let worst = components
                .iter()
                .map(|c| c.z.unwrap_or(0.0).abs())
                .fold(0.0, f64::max);
            Ok(ComparisonReport::new("max_abs_z", worst, opts.z_threshold)
                .with_detail(format!("total variation {tv:e}"))
                .with_components(components))
        }
    }
}

pub(crate) fn z_component(
    label: String,
    a: f64,
    b: f64,
    stderr: f64,
    opts: &CompareOptions,
) -> ComponentResult {
    let diff = a - b;
    let s = stderr.max(opts.stderr_floor);
    let z = if s > 0.0 {
        diff / s
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    };
    ComponentResult {
        label,
        a,
        b,
        abs_diff: diff.abs(),
        stderr: Some(stderr),
        z: Some(z),
        pass: z.abs() <= opts.z_threshold,
    }
}

/// Per-component z-scores of an estimate `a` with errors `stderr` against a
/// reference `b`, labelled by `labels`.
pub fn compare_z_scores(
    metric: &str,
    labels: &[String],
    a: &[f64],
    b: &[f64],
    stderr: &[f64],
    opts: &CompareOptions,
) -> Result<ComparisonReport> {
    if a.len() != b.len() || a.len() != stderr.len() || a.len() != labels.len() {
        return Err(CdmeError::Validation(
            "z-score inputs differ in length".into(),
        ));
    }
    let components: Vec<ComponentResult> = (0..a.len())
        .map(|i| z_component(labels[i].clone(), a[i], b[i], stderr[i], opts))
        .collect();
    let worst = components
        .iter()
        .map(|c| c.z.unwrap_or(0.0).abs())
        .fold(0.0, f64::max);
    Ok(ComparisonReport::new(metric, worst, opts.z_threshold).with_components(components))
}

/// Largest `|a_i − b_i|`.
pub fn compare_max_abs(
    metric: &str,
    a: &[f64],
    b: &[f64],
    tolerance: f64,
) -> Result<ComparisonReport> {
    if a.len() != b.len() {
        return Err(CdmeError::Validation(format!(
            "{metric}: lengths differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let (mut worst, mut at) = (0.0f64, 0usize);
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let d = (x - y).abs();
        if d > worst || d.is_nan() {
            worst = d;
            at = i;
        }
    }
    Ok(ComparisonReport::new(metric, worst, tolerance).with_detail(format!("worst at index {at}")))
}

/// Entrywise relative error `|a − b| / max(|a|, |b|, 1)` over the union of
/// stored entries, reporting the worst coordinate.
pub fn compare_generators(
    a: &GeneratorMatrix,
    b: &GeneratorMatrix,
    tolerance: f64,
) -> Result<ComparisonReport> {
    if **a.space() != **b.space() {
        return Err(CdmeError::SpaceMismatch {
            state_modes: a.space().num_modes(),
            state_degree: a.space().max_degree(),
            op_modes: b.space().num_modes(),
            op_degree: b.space().max_degree(),
        });
    }
    let mut worst = 0.0f64;
    let mut at = (0usize, 0usize, 0.0, 0.0);
    let mut visit = |r: usize, c: usize| {
        let (x, y) = (a.get(r, c), b.get(r, c));
        let rel = (x - y).abs() / x.abs().max(y.abs()).max(1.0);
        if rel > worst || rel.is_nan() {
            worst = rel;
            at = (r, c, x, y);
        }
    };
    for (r, c, _) in a.entries().chain(b.entries()) {
        visit(r, c);
    }
    let space = a.space();
    let (r, c, x, y) = at;
    let detail = format!(
        "worst entry ({r}, {c}) = rows {:?} / cols {:?}: {x:e} vs {y:e}",
        space.index(r),
        space.index(c)
    );
    Ok(ComparisonReport::new("generator_max_rel_error", worst, tolerance).with_detail(detail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_examples() {
        let o = CompareOptions::default();
        let r = compare_number_laws(&[0.3, 0.7], &[0.3, 0.7], None, &o).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.pass);
        let r = compare_number_laws(&[1.0, 0.0], &[0.0, 1.0], None, &o).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(!r.pass);
        assert!(compare_number_laws(&[1.0], &[0.5, 0.5], None, &o).is_err());
    }

    #[test]
    fn z_rule() {
        let o = CompareOptions::default();
        let r = compare_number_laws(&[0.5, 0.5], &[0.52, 0.48], Some(&[0.01, 0.01]), &o).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        assert!(r.pass);
        let r = compare_number_laws(&[0.5, 0.5], &[0.55, 0.45], Some(&[0.01, 0.01]), &o).unwrap();
        assert!(!r.pass);
        assert!(r.components.iter().all(|c| !c.pass));
        // zero stderr: exact agreement passes, any difference fails unless floored
        let r = compare_number_laws(&[0.0], &[1e-6], Some(&[0.0]), &o).unwrap();
        assert!(!r.pass);
        let floored = CompareOptions {
            stderr_floor: 1e-5,
            ..o
        };
        let r = compare_number_laws(&[0.0], &[1e-6], Some(&[0.0]), &floored).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn nan_never_passes() {
        let r = ComparisonReport::new("x", f64::NAN, 1.0);
        assert!(!r.pass);
        let r = compare_max_abs("m", &[1.0, f64::NAN], &[1.0, 2.0], 1.0).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn suite_collects_failures() {
        let mut s = ReportSuite::default();
        s.push("a", ComparisonReport::new("m", 0.5, 1.0));
        assert!(s.all_pass());
        s.push("b", ComparisonReport::new("m", 2.0, 1.0));
        assert!(!s.all_pass());
        assert_eq!(s.failures().count(), 1);
        let json = serde_json::to_string(&s).unwrap();
        let back: ReportSuite = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
