//! Covariant differentials of mixed `(p, q, r, s)` fields with respect to a
//! pair `(K, Γ)`, and evaluation-based checks of the identities they satisfy.
//!
//! For `Φ` with slots `E^p ⊗ E*^q ⊗ TM^r ⊗ T*M^s` the differential is
//!
//! ```text
//! ∇_ν φ = ∂_ν φ − Σ_E K_k^i_ν φ^{..k..} + Σ_E* K_j^k_ν φ_{..k..}
//!               − Σ_TM Γ_ρ^λ_ν φ^{..ρ..} + Σ_T*M Γ_μ^ρ_ν φ_{..ρ..}
//! ```
//!
//! and the new `ν` slot is appended last. The second differential treats that
//! slot as one more `T*M` slot.

use thiserror::Error;

use crate::connection::{
    check_field_shape, dual, tensor_product, ClassicalConnection, ConnectionError, FieldType,
    LinearConnection,
};
use crate::curvature::{
    classical_curvature, curvature, curvature_bilinear_eval, curvature_fd, curvature_form,
    dual_curvature_by_swap, probe_eq, product_action, tensor_product_of_curvatures, CurvatureError,
    CurvatureField, CurvaturePerturbation,
};
use crate::expr::{BasePoint, ScalarExpr, DEFAULT_FD_STEP};
use crate::report::{CheckReport, PointResidual};
use crate::tensor::{
    ChartDims, IndexSort, Tensor, TensorError, TensorField, TensorShape, TensorValue,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CovariantError {
    #[error("two assemblies of {what} disagree")]
    AssemblyMismatch { what: &'static str },
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Tolerance and negative-control settings shared by the checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckConfig {
    pub tol: f64,
    /// When set, the curvature of `K` consumed by a check is perturbed.
    pub perturbation: Option<CurvaturePerturbation>,
}

impl CheckConfig {
    pub fn new(tol: f64) -> Self {
        CheckConfig {
            tol,
            perturbation: None,
        }
    }

    fn curvature_of(&self, k: &LinearConnection) -> CurvatureField {
        let r = curvature(k);
        match &self.perturbation {
            Some(p) => p.apply(&r),
            None => r,
        }
    }
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig::new(1e-8)
    }
}

/// Symbolic covariant differential `∇^{(K,Γ)}Φ`.
pub fn nabla(
    k: &LinearConnection,
    g: &ClassicalConnection,
    t: FieldType,
    phi: &TensorField,
) -> Result<TensorField, ConnectionError> {
    if k.base_dim() != g.base_dim() {
        return Err(ConnectionError::BaseDimMismatch(k.base_dim(), g.base_dim()));
    }
    let m = k.base_dim();
    check_field_shape(phi.shape(), t, m, k.rank())?;
    let partials: Vec<TensorField> = (0..m).map(|nu| phi.diff(nu)).collect();
    let in_shape = phi.shape().clone();
    let sorts = in_shape.sorts().to_vec();
    let rank = sorts.len();
    let mut moved = vec![0; rank];
    let mut terms: Vec<ScalarExpr> = Vec::new();
    Ok(Tensor::from_fn(
        in_shape.push(IndexSort::BaseDown),
        |full| {
            let (idx, nu) = (&full[..rank], full[rank]);
            terms.clear();
            terms.push(partials[nu].get(idx).clone());
            moved.copy_from_slice(idx);
            for (slot, &sort) in sorts.iter().enumerate() {
                let a = idx[slot];
                for c in 0..in_shape.dims().dim_of(sort) {
                    moved[slot] = c;
                    let phi_c = phi.get(&moved);
                    if phi_c.is_zero() {
                        continue;
                    }
                    let term = match sort {
                        IndexSort::FiberUp => -(k.get(a, c, nu) * phi_c),
                        IndexSort::FiberDown => k.get(c, a, nu) * phi_c,
                        IndexSort::BaseUp => -(g.get(c, a, nu) * phi_c),
                        IndexSort::BaseDown => g.get(a, c, nu) * phi_c,
                        IndexSort::Fiber2Up | IndexSort::Fiber2Down => unreachable!(),
                    };
                    if !term.is_zero() {
                        terms.push(term);
                    }
                }
                moved[slot] = a;
            }
            terms.drain(..).sum()
        },
    ))
}

/// `∇∇Φ`, the second application taking `Φ`'s type with one more `T*M` slot.
pub fn nabla2(
    k: &LinearConnection,
    g: &ClassicalConnection,
    t: FieldType,
    phi: &TensorField,
) -> Result<TensorField, ConnectionError> {
    let first = nabla(k, g, t, phi)?;
    nabla(k, g, FieldType::new(t.p, t.q, t.r, t.s + 1), &first)
}

fn curvature_type() -> FieldType {
    FieldType::new(1, 1, 0, 2)
}

/// `∇R` for a given curvature field, slots `(E, E*, T*M, T*M, T*M)`.
pub fn nabla_of_curvature(
    k: &LinearConnection,
    g: &ClassicalConnection,
    r: &CurvatureField,
) -> Result<TensorField, ConnectionError> {
    nabla(k, g, curvature_type(), r.field())
}

/// `∇R[K]`, cross-checked on the probe grid against the explicit
/// five-term expansion ([`nabla_curvature_expansion`]).
pub fn nabla_curvature(
    k: &LinearConnection,
    g: &ClassicalConnection,
) -> Result<TensorField, CovariantError> {
    let r = curvature(k);
    let direct = nabla_of_curvature(k, g, &r)?;
    let expanded = nabla_curvature_expansion(k, g, &r);
    if !probe_eq(&direct, &expanded) {
        return Err(CovariantError::AssemblyMismatch { what: "nabla R[K]" });
    }
    Ok(direct)
}

/// `R_j^i_{λμ;ν} = ∂_ν R_j^i_{λμ} − K_p^i_ν R_j^p_{λμ} + K_j^p_ν R_p^i_{λμ}
///   + Γ_ν^ρ_λ R_j^i_{ρμ} + Γ_ν^ρ_μ R_j^i_{λρ}`.
pub fn nabla_curvature_expansion(
    k: &LinearConnection,
    g: &ClassicalConnection,
    r: &CurvatureField,
) -> TensorField {
    let (m, n) = (k.base_dim(), k.rank());
    let shape = r.field().shape().push(IndexSort::BaseDown);
    Tensor::from_fn(shape, |idx| {
        let (i, j, l, mu, nu) = (idx[0], idx[1], idx[2], idx[3], idx[4]);
        let mut e = r.get(i, j, l, mu).diff(nu);
        for p in 0..n {
            e = e - k.get(i, p, nu) * r.get(p, j, l, mu) + k.get(p, j, nu) * r.get(i, p, l, mu);
        }
        for rho in 0..m {
            e = e
                + g.get(nu, rho, l) * r.get(i, j, rho, mu)
                + g.get(nu, rho, mu) * r.get(i, j, l, rho);
        }
        e
    })
}

/// Right-hand side of the Ricci identity for `R[K]` itself:
///
/// `−½ (R_p^i_{ν₁ν₂} R_j^p_{λμ} − R_j^p_{ν₁ν₂} R_p^i_{λμ}
///      − R[Γ]_λ^ω_{ν₁ν₂} R_j^i_{ωμ} − R[Γ]_μ^ω_{ν₁ν₂} R_j^i_{λω})`,
///
/// from curvature values at one point. Slots `(E, E*, T*M⁴)`.
pub fn alt_nabla2_curvature_expansion(rk: &TensorValue, rg: &TensorValue) -> TensorValue {
    let ext = rk.shape().extents();
    let (n, m) = (ext[0], ext[2]);
    let shape = rk
        .shape()
        .push(IndexSort::BaseDown)
        .push(IndexSort::BaseDown);
    Tensor::from_fn(shape, |idx| {
        let (i, j, l, mu, a, b) = (idx[0], idx[1], idx[2], idx[3], idx[4], idx[5]);
        let mut acc = 0.0;
        for p in 0..n {
            acc += rk.get(&[i, p, a, b]) * rk.get(&[p, j, l, mu]);
            acc -= rk.get(&[p, j, a, b]) * rk.get(&[i, p, l, mu]);
        }
        for w in 0..m {
            acc -= rg.get(&[w, l, a, b]) * rk.get(&[i, j, w, mu]);
            acc -= rg.get(&[w, mu, a, b]) * rk.get(&[i, j, l, w]);
        }
        -0.5 * acc
    })
}

fn per_point(
    points: &[BasePoint],
    mut f: impl FnMut(&BasePoint) -> Result<f64, String>,
) -> Vec<PointResidual> {
    points
        .iter()
        .map(|p| match f(p) {
            Ok(r) => PointResidual::ok(r),
            Err(e) => PointResidual::failed(e),
        })
        .collect()
}

fn mismatch_report(name: &str, points: &[BasePoint], err: impl ToString, tol: f64) -> CheckReport {
    let msg = err.to_string();
    let residuals = points.iter().map(|_| PointResidual::failed(&msg)).collect();
    CheckReport::new(name, points.to_vec(), residuals, tol)
}

/// Symbolic curvature against the finite-difference curvature (step `h`).
pub fn check_curvature_oracle(
    k: &LinearConnection,
    points: &[BasePoint],
    h: f64,
    cfg: &CheckConfig,
) -> CheckReport {
    let r = cfg.curvature_of(k);
    let residuals = per_point(points, |p| {
        let sym = r.eval(p).map_err(|e| e.to_string())?;
        let fd = curvature_fd(k, p, h).map_err(|e| e.to_string())?;
        sym.max_abs_diff(&fd).map_err(|e| e.to_string())
    });
    CheckReport::new("curvature", points.to_vec(), residuals, cfg.tol).with_param("fd_step", h)
}

/// `R[K*]` computed from `K*` against the negative fiber swap of `R[K]`.
pub fn check_dual_curvature(
    k: &LinearConnection,
    points: &[BasePoint],
    cfg: &CheckConfig,
) -> CheckReport {
    let direct = curvature(&dual(k));
    let swapped = dual_curvature_by_swap(&cfg.curvature_of(k));
    let residuals = per_point(points, |p| {
        let a = direct.eval(p).map_err(|e| e.to_string())?;
        let b = swapped.eval(p).map_err(|e| e.to_string())?;
        a.max_abs_diff(&b).map_err(|e| e.to_string())
    });
    CheckReport::new("dual_curvature", points.to_vec(), residuals, cfg.tol)
}

/// Curvature of `K ⊗ K′` against the δ-decomposition from `R[K]`, `R[K′]`.
pub fn check_tensor_curvature(
    k: &LinearConnection,
    k2: &LinearConnection,
    points: &[BasePoint],
    cfg: &CheckConfig,
) -> CheckReport {
    let kk = match tensor_product(k, k2) {
        Ok(kk) => kk,
        Err(e) => return mismatch_report("tensor_curvature", points, e, cfg.tol),
    };
    let direct = curvature(&kk);
    let assembled = tensor_product_of_curvatures(&cfg.curvature_of(k), &curvature(k2));
    let residuals = per_point(points, |p| {
        let a = direct.eval(p).map_err(|e| e.to_string())?;
        let b = assembled.eval(p).map_err(|e| e.to_string())?;
        a.max_abs_diff(&b).map_err(|e| e.to_string())
    });
    CheckReport::new("tensor_curvature", points.to_vec(), residuals, cfg.tol)
}

/// `R[K⊗K′](e⊗e′, e*⊗e′*) = ⟨e′,e′*⟩R[K](e,e*) + ⟨e,e*⟩R[K′](e′,e′*)` over
/// every 4-tuple of basis vectors.
pub fn check_bilinear_decomposition(
    k: &LinearConnection,
    k2: &LinearConnection,
    points: &[BasePoint],
    cfg: &CheckConfig,
) -> CheckReport {
    let kk = match tensor_product(k, k2) {
        Ok(kk) => kk,
        Err(e) => return mismatch_report("bilinear_decomposition", points, e, cfg.tol),
    };
    let (n, n2, m) = (k.rank(), k2.rank(), k.base_dim());
    let rkk = curvature(&kk);
    let (rk, rk2) = (cfg.curvature_of(k), curvature(k2));
    let dims = ChartDims::with_second(m, n, n2);
    let residuals = per_point(points, |p| {
        let rkk_p = rkk.eval(p).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for a in 0..n2 {
                for js in 0..n {
                    for bs in 0..n2 {
                        let e = TensorValue::basis(IndexSort::FiberUp, dims, i);
                        let e2 = TensorValue::basis(IndexSort::Fiber2Up, dims, a);
                        let ed = TensorValue::basis(IndexSort::FiberDown, dims, js);
                        let e2d = TensorValue::basis(IndexSort::Fiber2Down, dims, bs);
                        let rhs = curvature_bilinear_eval(&rk, &rk2, &e, &e2, &ed, &e2d, p)
                            .map_err(|e| e.to_string())?;
                        let v = e.outer(&e2).map_err(|e| e.to_string())?;
                        let w = ed.outer(&e2d).map_err(|e| e.to_string())?;
                        let lhs = curvature_form(&rkk_p, v.data(), w.data());
                        let lhs = lhs
                            .relabel(rhs.shape().sorts().to_vec(), rhs.shape().dims())
                            .map_err(|e| e.to_string())?;
                        worst = worst.max(lhs.max_abs_diff(&rhs).map_err(|e| e.to_string())?);
                    }
                }
            }
        }
        Ok(worst)
    });
    CheckReport::new(
        "bilinear_decomposition",
        points.to_vec(),
        residuals,
        cfg.tol,
    )
}

/// Cyclic sum `R_j^i_{λμ;ν} + R_j^i_{μν;λ} + R_j^i_{νλ;μ}`.
pub fn check_bianchi_linear(
    k: &LinearConnection,
    g: &ClassicalConnection,
    points: &[BasePoint],
    cfg: &CheckConfig,
) -> CheckReport {
    let r = cfg.curvature_of(k);
    let dr = match nabla_of_curvature(k, g, &r) {
        Ok(dr) => dr,
        Err(e) => return mismatch_report("bianchi_linear", points, e, cfg.tol),
    };
    let (n, m) = (k.rank(), k.base_dim());
    let residuals = per_point(points, |p| {
        let v = dr.eval(p).map_err(|e| e.to_string())?;
        Ok(cyclic_residual(&v, n, n, m))
    });
    CheckReport::new("bianchi_linear", points.to_vec(), residuals, cfg.tol)
}

/// Max over `i, j, λ, μ, ν` of `|T[i,j,λ,μ,ν] + T[i,j,μ,ν,λ] + T[i,j,ν,λ,μ]|`.
fn cyclic_residual(v: &TensorValue, n_up: usize, n_down: usize, m: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..n_up {
        for j in 0..n_down {
            for l in 0..m {
                for mu in 0..m {
                    for nu in 0..m {
                        let s = v.get(&[i, j, l, mu, nu])
                            + v.get(&[i, j, mu, nu, l])
                            + v.get(&[i, j, nu, l, mu]);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
    }
    worst
}

/// Both classical Bianchi identities for `R[Γ]`: the cyclic sum over the
/// lower indices, and the cyclic sum of its covariant differential.
pub fn check_bianchi_classical(
    g: &ClassicalConnection,
    points: &[BasePoint],
    cfg: &CheckConfig,
) -> CheckReport {
    let m = g.base_dim();
    let r = classical_curvature(g);
    let flat = LinearConnection::zero(m, 1);
    let dr = match nabla(&flat, g, FieldType::new(0, 0, 1, 3), r.field()) {
        Ok(dr) => dr,
        Err(e) => return mismatch_report("bianchi_classical", points, e, cfg.tol),
    };
    let mut first_max: f64 = 0.0;
    let mut second_max: f64 = 0.0;
    let residuals = per_point(points, |p| {
        let rv = r.eval(p).map_err(|e| e.to_string())?;
        let mut first: f64 = 0.0;
        // R_ν^ρ_{λμ} + R_λ^ρ_{μν} + R_μ^ρ_{νλ}, stored at [ρ, ν, λ, μ]
        for rho in 0..m {
            for nu in 0..m {
                for l in 0..m {
                    for mu in 0..m {
                        let s = rv.get(&[rho, nu, l, mu])
                            + rv.get(&[rho, l, mu, nu])
                            + rv.get(&[rho, mu, nu, l]);
                        first = first.max(s.abs());
                    }
                }
            }
        }
        let dv = dr.eval(p).map_err(|e| e.to_string())?;
        let second = cyclic_residual(&dv, m, m, m);
        first_max = first_max.max(first);
        second_max = second_max.max(second);
        Ok(first.max(second))
    });
    CheckReport::new("bianchi_classical", points.to_vec(), residuals, cfg.tol)
        .with_param(
            "first_identity_max",
            crate::report::format_residual(first_max),
        )
        .with_param(
            "second_identity_max",
            crate::report::format_residual(second_max),
        )
}

/// `Alt ∇²Φ + ½ R[K^p_q ⊗ Γ^r_s](Φ)` entrywise.
pub fn check_ricci_identity(
    k: &LinearConnection,
    g: &ClassicalConnection,
    t: FieldType,
    phi: &TensorField,
    points: &[BasePoint],
    cfg: &CheckConfig,
) -> CheckReport {
    let name = "ricci";
    let lhs = match nabla2(k, g, t, phi).and_then(|f| Ok(f.alt_last_two()?)) {
        Ok(f) => f,
        Err(e) => return mismatch_report(name, points, e, cfg.tol),
    };
    let rk = cfg.curvature_of(k);
    let rg = classical_curvature(g);
    let residuals = per_point(points, |p| {
        let l = lhs.eval(p).map_err(|e| e.to_string())?;
        let v = phi.eval(p).map_err(|e| e.to_string())?;
        let rk_p = rk.eval(p).map_err(|e| e.to_string())?;
        let rg_p = rg.eval(p).map_err(|e| e.to_string())?;
        let action = product_action(t, &rk_p, &rg_p, &v).map_err(|e| e.to_string())?;
        let action = action
            .relabel(l.shape().sorts().to_vec(), l.shape().dims())
            .map_err(|e| e.to_string())?;
        l.add(&action.scaled(0.5))
            .map(|d| d.max_abs())
            .map_err(|e| e.to_string())
    });
    CheckReport::new(name, points.to_vec(), residuals, cfg.tol).with_param("field_type", t)
}

/// Direct `Alt ∇² R[K]` against [`alt_nabla2_curvature_expansion`].
pub fn check_ricci_on_curvature(
    k: &LinearConnection,
    g: &ClassicalConnection,
    points: &[BasePoint],
    cfg: &CheckConfig,
) -> CheckReport {
    let name = "ricci_on_curvature";
    let r = cfg.curvature_of(k);
    let lhs = match nabla2(k, g, curvature_type(), r.field()).and_then(|f| Ok(f.alt_last_two()?)) {
        Ok(f) => f,
        Err(e) => return mismatch_report(name, points, e, cfg.tol),
    };
    let rg = classical_curvature(g);
    let residuals = per_point(points, |p| {
        let l = lhs.eval(p).map_err(|e| e.to_string())?;
        let rhs = alt_nabla2_curvature_expansion(
            &r.eval(p).map_err(|e| e.to_string())?,
            &rg.eval(p).map_err(|e| e.to_string())?,
        );
        l.max_abs_diff(&rhs).map_err(|e| e.to_string())
    });
    CheckReport::new(name, points.to_vec(), residuals, cfg.tol)
}

/// Default finite-difference step for [`check_curvature_oracle`].
pub const CURVATURE_FD_STEP: f64 = DEFAULT_FD_STEP;

/// Tolerance at which the finite-difference curvature is trusted.
pub const CURVATURE_FD_TOL: f64 = 1e-5;

/// Flattens a field to a single `E` slot of rank `n^{p+q} m^{r+s}`.
pub fn flatten_field(phi: &TensorField, m: usize) -> TensorField {
    let shape = TensorShape::new(
        vec![IndexSort::FiberUp],
        ChartDims::new(m, phi.data().len()),
    );
    Tensor::from_vec(shape, phi.data().to_vec()).expect("entry count preserved")
}
