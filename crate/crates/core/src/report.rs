//! Check reports and their text renderings.

use std::fmt::Write as _;

use crate::expr::BasePoint;

/// Residual of one identity at one sample point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResidual {
    /// Max-abs residual over all index combinations; NaN when `error` is set.
    pub residual: f64,
    /// Evaluation failure at this point (e.g. a vanishing denominator).
    pub error: Option<String>,
}

impl PointResidual {
    pub fn ok(residual: f64) -> Self {
        PointResidual {
            residual,
            error: None,
        }
    }

    pub fn failed(error: impl ToString) -> Self {
        PointResidual {
            residual: f64::NAN,
            error: Some(error.to_string()),
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.error.is_none() && self.residual <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    /// Identity name, e.g. `bianchi_linear`.
    pub name: String,
    /// Names of the objects the identity was checked on.
    pub subjects: Vec<String>,
    pub points: Vec<BasePoint>,
    pub residuals: Vec<PointResidual>,
    pub tol: f64,
    pub pass: bool,
    pub seed: Option<u64>,
    /// Extra parameters and sub-results, in insertion order.
    pub params: Vec<(String, String)>,
}

impl CheckReport {
    pub fn new(
        name: &str,
        points: Vec<BasePoint>,
        residuals: Vec<PointResidual>,
        tol: f64,
    ) -> Self {
        let pass = residuals.iter().all(|r| r.passes(tol));
        CheckReport {
            name: name.to_string(),
            subjects: Vec::new(),
            points,
            residuals,
            tol,
            pass,
            seed: None,
            params: Vec::new(),
        }
    }

    pub fn with_subjects<S: ToString>(mut self, subjects: &[S]) -> Self {
        self.subjects = subjects.iter().map(ToString::to_string).collect();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    /// Largest residual; NaN if any point failed to evaluate.
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |acc: f64, r| {
            if acc.is_nan() || r.residual.is_nan() {
                f64::NAN
            } else {
                acc.max(r.residual)
            }
        })
    }

    /// `name` or `name:subject1:subject2…`.
    pub fn label(&self) -> String {
        let mut s = self.name.clone();
        for subj in &self.subjects {
            s.push(':');
            s.push_str(subj);
        }
        s
    }

    /// One `check=… point=… residual=… pass=…` line per point (1-based).
    pub fn machine_lines(&self) -> String {
        let mut out = String::new();
        let label = self.label();
        for (k, r) in self.residuals.iter().enumerate() {
            let _ = writeln!(
                out,
                "check={} point={} residual={} pass={}",
                label,
                k + 1,
                format_residual(r.residual),
                r.passes(self.tol)
            );
        }
        out
    }

    pub fn human_text(&self) -> String {
        let mut out = String::new();
        let status = if self.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(
            out,
            "[{status}] {} (tol {:e}, max residual {})",
            self.label(),
            self.tol,
            format_residual(self.max_residual())
        );
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "    seed: {seed}");
        }
        for (k, v) in &self.params {
            let _ = writeln!(out, "    {k}: {v}");
        }
        for (k, (p, r)) in self.points.iter().zip(&self.residuals).enumerate() {
            match &r.error {
                Some(err) => {
                    let _ = writeln!(out, "    point {} {}: error: {}", k + 1, p, err);
                }
                None => {
                    let mark = if r.passes(self.tol) { "ok" } else { "FAIL" };
                    let _ = writeln!(
                        out,
                        "    point {} {}: {} {}",
                        k + 1,
                        p,
                        format_residual(r.residual),
                        mark
                    );
                }
            }
        }
        out
    }
}

pub fn format_residual(r: f64) -> String {
    if r.is_nan() {
        "nan".to_string()
    } else {
        format!("{r:.6e}")
    }
}
