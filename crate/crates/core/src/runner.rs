//! Executing the checks of a scenario.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::covariant::{
    check_bianchi_classical, check_bianchi_linear, check_bilinear_decomposition,
    check_curvature_oracle, check_dual_curvature, check_ricci_identity, check_ricci_on_curvature,
    check_tensor_curvature, CheckConfig, CURVATURE_FD_STEP, CURVATURE_FD_TOL,
};
use crate::expr::BasePoint;
use crate::report::CheckReport;
use crate::scenario::{CheckKind, CheckSpec, Model, Scenario, ScenarioError};

/// The origin followed by `count` seeded uniform points of `[−1, 1]^m`.
pub fn sample_points(m: usize, count: usize, seed: u64) -> Vec<BasePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![BasePoint::origin(m)];
    points.extend((0..count).map(|_| {
        BasePoint::from(
            (0..m)
                .map(|_| rng.gen_range(-1.0..=1.0))
                .collect::<Vec<f64>>(),
        )
    }));
    points
}

/// Command-line replacements for the `[options]` section. Per-check values
/// in the file still take precedence.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOverrides {
    pub tol: Option<f64>,
    pub points: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// In the order the checks are listed in the scenario.
    pub reports: Vec<CheckReport>,
}

impl RunOutcome {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }

    /// 0 iff every check passed.
    pub fn exit_code(&self) -> i32 {
        if self.all_pass() {
            0
        } else {
            1
        }
    }

    pub fn machine_text(&self) -> String {
        self.reports
            .iter()
            .map(CheckReport::machine_lines)
            .collect()
    }

    pub fn human_text(&self) -> String {
        let mut out: String = self.reports.iter().map(CheckReport::human_text).collect();
        let passed = self.reports.iter().filter(|r| r.pass).count();
        out.push_str(&format!("{passed}/{} checks passed\n", self.reports.len()));
        out
    }
}

pub fn run_checks(s: &Scenario) -> Result<RunOutcome, ScenarioError> {
    run_checks_with(s, RunOverrides::default())
}

/// Runs every check on its own thread; reports come back in scenario order,
/// so the output does not depend on scheduling.
pub fn run_checks_with(s: &Scenario, overrides: RunOverrides) -> Result<RunOutcome, ScenarioError> {
    let model = s.model()?;
    let reports = std::thread::scope(|scope| {
        let handles: Vec<_> = s
            .checks
            .iter()
            .map(|spec| {
                let model = &model;
                scope.spawn(move || run_one(s, model, spec, overrides))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("check thread panicked"))
            .collect()
    });
    Ok(RunOutcome { reports })
}

fn run_one(s: &Scenario, model: &Model, spec: &CheckSpec, ov: RunOverrides) -> CheckReport {
    let seed = ov.seed.unwrap_or(s.options.seed);
    let count = spec.points.or(ov.points).unwrap_or(s.options.points);
    let global_tol = ov.tol.unwrap_or(s.options.tol);
    let tol = match (spec.tol, spec.kind) {
        (Some(t), _) => t,
        // a finite-difference oracle cannot certify tighter than this
        (None, CheckKind::Curvature) => global_tol.max(CURVATURE_FD_TOL),
        (None, _) => global_tol,
    };
    let points = sample_points(model.base_dim, count, seed);
    let cfg = CheckConfig {
        tol,
        perturbation: s.options.perturb,
    };
    let a = &spec.args;
    let k = |i: usize| &model.connections[&a[i]];
    let g = |i: usize| &model.classicals[&a[i]];
    let report = match spec.kind {
        CheckKind::Curvature => check_curvature_oracle(k(0), &points, CURVATURE_FD_STEP, &cfg),
        CheckKind::DualCurvature => check_dual_curvature(k(0), &points, &cfg),
        CheckKind::TensorCurvature => check_tensor_curvature(k(0), k(1), &points, &cfg),
        CheckKind::BilinearDecomposition => check_bilinear_decomposition(k(0), k(1), &points, &cfg),
        CheckKind::BianchiLinear => check_bianchi_linear(k(0), g(1), &points, &cfg),
        CheckKind::BianchiClassical => check_bianchi_classical(g(0), &points, &cfg),
        CheckKind::Ricci => {
            let (t, phi) = &model.fields[&a[0]];
            check_ricci_identity(k(1), g(2), *t, phi, &points, &cfg)
        }
        CheckKind::RicciOnCurvature => check_ricci_on_curvature(k(0), g(1), &points, &cfg),
    };
    report.with_subjects(a).with_seed(seed)
}
