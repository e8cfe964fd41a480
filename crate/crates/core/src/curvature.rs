//! Curvature tensors of linear connections and of the constructions built
//! from them.
//!
//! A curvature field is stored with slots `(E, E*, T*M, T*M)`: the entry at
//! `[i, j, l, m]` is `R_j^i_{lm}`, with
//!
//! `R_j^i_{lm} = ∂_m K_j^i_l − ∂_l K_j^i_m + K_j^p_m K_p^i_l − K_j^p_l K_p^i_m`.
//!
//! The 2-form part is kept as a full antisymmetric `m × m` block.

use thiserror::Error;

use crate::connection::{
    dual, probe_close, probe_grid, ClassicalConnection, ConnectionError, FieldType,
    LinearConnection,
};
use crate::expr::{BasePoint, EvalError, ScalarExpr};
use crate::tensor::{
    ChartDims, IndexSort, Tensor, TensorError, TensorField, TensorShape, TensorValue,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureOrigin {
    /// Coefficient formula applied to a linear connection.
    Linear,
    /// Curvature of the dual connection.
    Dual,
    /// Assembled from the curvatures of two factors.
    TensorProduct,
    /// Curvature of a classical connection, slots `(TM, T*M, T*M, T*M)`.
    Classical,
    /// Deliberately altered; used as a negative control.
    Perturbed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField {
    field: TensorField,
    origin: CurvatureOrigin,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurvatureError {
    #[error("{identity} fails at {point} (residual {residual:e})")]
    IdentityViolation {
        identity: &'static str,
        point: BasePoint,
        residual: f64,
    },
    #[error("vector argument has slots {got:?}, expected {expected:?}")]
    ArgumentShape {
        expected: Vec<IndexSort>,
        got: Vec<IndexSort>,
    },
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl CurvatureField {
    pub fn new(field: TensorField, origin: CurvatureOrigin) -> Self {
        CurvatureField { field, origin }
    }

    pub fn field(&self) -> &TensorField {
        &self.field
    }

    pub fn into_field(self) -> TensorField {
        self.field
    }

    pub fn origin(&self) -> CurvatureOrigin {
        self.origin
    }

    /// Fiber rank (`m` for classical curvature).
    pub fn rank(&self) -> usize {
        self.field.shape().extents()[0]
    }

    pub fn base_dim(&self) -> usize {
        self.field.shape().dims().m
    }

    /// `R_j^i_{lm}`.
    pub fn get(&self, i: usize, j: usize, l: usize, m: usize) -> &ScalarExpr {
        self.field.get(&[i, j, l, m])
    }

    pub fn eval(&self, p: &BasePoint) -> Result<TensorValue, TensorError> {
        self.field.eval(p)
    }

    /// Largest `|R(…,l,m) + R(…,m,l)|` over the probe grid.
    pub fn antisymmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for p in probe_grid(self.base_dim()) {
            if let Ok(v) = self.eval(&p) {
                for (idx, x) in v.indexed() {
                    let y = v.get(&[idx[0], idx[1], idx[3], idx[2]]);
                    worst = worst.max((x + y).abs());
                }
            }
        }
        worst
    }
}

fn curvature_shape(m: usize, n: usize) -> TensorShape {
    TensorShape::new(
        vec![
            IndexSort::FiberUp,
            IndexSort::FiberDown,
            IndexSort::BaseDown,
            IndexSort::BaseDown,
        ],
        ChartDims::new(m, n),
    )
}

/// Symbolic curvature of `K` by the coefficient formula.
pub fn curvature(k: &LinearConnection) -> CurvatureField {
    let (m, n) = (k.base_dim(), k.rank());
    // ∂_a K_j^i_b, shared between the (l,m) and (m,l) entries
    let partials: Vec<ScalarExpr> = (0..n * n * m * m)
        .map(|flat| {
            let (ij, rest) = (flat / (m * m), flat % (m * m));
            let (i, j) = (ij / n, ij % n);
            let (a, b) = (rest / m, rest % m);
            k.get(i, j, b).diff(a)
        })
        .collect();
    let d = |i: usize, j: usize, a: usize, b: usize| &partials[((i * n + j) * m + a) * m + b];
    let field = Tensor::from_fn(curvature_shape(m, n), |idx| {
        let (i, j, l, mu) = (idx[0], idx[1], idx[2], idx[3]);
        if l == mu {
            return ScalarExpr::zero();
        }
        let mut e = d(i, j, mu, l) - d(i, j, l, mu);
        for p in 0..n {
            e = e + k.get(p, j, mu) * k.get(i, p, l) - k.get(p, j, l) * k.get(i, p, mu);
        }
        e
    });
    CurvatureField::new(field, CurvatureOrigin::Linear)
}

/// Curvature `R[Γ]_a^b_{lm}` of a classical connection, stored at
/// `[b, a, l, m]` with slots `(TM, T*M, T*M, T*M)`.
pub fn classical_curvature(g: &ClassicalConnection) -> CurvatureField {
    let m = g.base_dim();
    let linear = curvature(&g.as_linear()).into_field();
    let field = linear
        .relabel(
            vec![
                IndexSort::BaseUp,
                IndexSort::BaseDown,
                IndexSort::BaseDown,
                IndexSort::BaseDown,
            ],
            ChartDims::new(m, m),
        )
        .expect("same extents");
    CurvatureField::new(field, CurvatureOrigin::Classical)
}

/// Curvature of the dual connection, checked on the probe grid against
/// `R[K*]_i^j_{lm} = −R[K]_j^i_{lm}` (negative swap of the fiber slots).
pub fn curvature_dual(k: &LinearConnection) -> Result<CurvatureField, CurvatureError> {
    let direct = curvature(&dual(k)).into_field();
    let via_swap = dual_curvature_by_swap(&curvature(k));
    for p in probe_grid(k.base_dim()) {
        let (a, b) = match (direct.eval(&p), via_swap.eval(&p)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => continue,
        };
        let residual = a.max_abs_diff(&b)?;
        let scale = 1.0 + a.max_abs();
        if residual.is_nan() || residual > 1e-10 * scale {
            return Err(CurvatureError::IdentityViolation {
                identity: "dual curvature",
                point: p,
                residual,
            });
        }
    }
    Ok(CurvatureField::new(direct, CurvatureOrigin::Dual))
}

/// `−R` with the two fiber slots exchanged.
pub fn dual_curvature_by_swap(r: &CurvatureField) -> TensorField {
    let f = r.field();
    Tensor::from_fn(f.shape().clone(), |idx| {
        -f.get(&[idx[1], idx[0], idx[2], idx[3]])
    })
}

/// `R[K⊗K′]_{jb}^{ia}_{lm} = R[K]_j^i_{lm} δ^a_b + R[K′]_b^a_{lm} δ^i_j`, with
/// the composite index `(i, a)` flattened to `i·n′ + a`.
pub fn curvature_tensor_product(
    k: &LinearConnection,
    k2: &LinearConnection,
) -> Result<CurvatureField, CurvatureError> {
    if k.base_dim() != k2.base_dim() {
        return Err(ConnectionError::BaseDimMismatch(k.base_dim(), k2.base_dim()).into());
    }
    Ok(tensor_product_of_curvatures(&curvature(k), &curvature(k2)))
}

/// The δ-decomposition applied to two given curvature fields.
pub fn tensor_product_of_curvatures(r: &CurvatureField, r2: &CurvatureField) -> CurvatureField {
    let (n, n2, m) = (r.rank(), r2.rank(), r.base_dim());
    let field = Tensor::from_fn(curvature_shape(m, n * n2), |idx| {
        let (i, a) = (idx[0] / n2, idx[0] % n2);
        let (j, b) = (idx[1] / n2, idx[1] % n2);
        let (l, mu) = (idx[2], idx[3]);
        let mut e = ScalarExpr::zero();
        if a == b {
            e = e + r.get(i, j, l, mu);
        }
        if i == j {
            e = e + r2.get(a, b, l, mu);
        }
        e
    });
    CurvatureField::new(field, CurvatureOrigin::TensorProduct)
}

fn expect_vector(v: &TensorValue, sort: IndexSort, dim: usize) -> Result<(), CurvatureError> {
    if v.shape().sorts() != [sort] || v.data().len() != dim {
        return Err(CurvatureError::ArgumentShape {
            expected: vec![sort],
            got: v.shape().sorts().to_vec(),
        });
    }
    Ok(())
}

/// `R(v, w)_{lm} = R_j^i_{lm} v^j w_i` for a curvature value `r` at a point.
pub fn curvature_form(r: &TensorValue, v: &[f64], w: &[f64]) -> TensorValue {
    let ext = r.shape().extents();
    let (n, m) = (ext[0], ext[2]);
    // base slots only, so forms from bundles of different rank are comparable
    let shape = TensorShape::new(
        vec![IndexSort::BaseDown, IndexSort::BaseDown],
        ChartDims::new(m, 0),
    );
    Tensor::from_fn(shape, |lm| {
        let mut acc = 0.0;
        for (i, wi) in w.iter().enumerate().take(n) {
            for (j, vj) in v.iter().enumerate().take(n) {
                acc += r.get(&[i, j, lm[0], lm[1]]) * vj * wi;
            }
        }
        acc
    })
}

/// `⟨e′, e′*⟩ R[K](e, e*) + ⟨e, e*⟩ R[K′](e′, e′*)` at `p`.
///
/// `e`, `e*`, `e′`, `e′*` must have sorts `E`, `E*`, `E′`, `E′*`.
pub fn curvature_bilinear_eval(
    rk: &CurvatureField,
    rk2: &CurvatureField,
    e: &TensorValue,
    e2: &TensorValue,
    e_dual: &TensorValue,
    e2_dual: &TensorValue,
    p: &BasePoint,
) -> Result<TensorValue, CurvatureError> {
    let (n, n2) = (rk.rank(), rk2.rank());
    expect_vector(e, IndexSort::FiberUp, n)?;
    expect_vector(e_dual, IndexSort::FiberDown, n)?;
    expect_vector(e2, IndexSort::Fiber2Up, n2)?;
    expect_vector(e2_dual, IndexSort::Fiber2Down, n2)?;
    let pair = |a: &TensorValue, b: &TensorValue| -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
    };
    let first = curvature_form(&rk.eval(p)?, e.data(), e_dual.data()).scaled(pair(e2, e2_dual));
    let second = curvature_form(&rk2.eval(p)?, e2.data(), e2_dual.data()).scaled(pair(e, e_dual));
    Ok(first.add(&second)?)
}

/// Curvature with every partial derivative replaced by a central difference
/// of the connection coefficients.
pub fn curvature_fd(k: &LinearConnection, p: &BasePoint, h: f64) -> Result<TensorValue, EvalError> {
    let (m, n) = (k.base_dim(), k.rank());
    let kv = k.eval(p)?;
    let mut out = TensorValue::zeros(curvature_shape(m, n));
    for i in 0..n {
        for j in 0..n {
            for l in 0..m {
                for mu in 0..m {
                    let mut v = k.get(i, j, l).diff_numeric(mu, p, h)?
                        - k.get(i, j, mu).diff_numeric(l, p, h)?;
                    for q in 0..n {
                        v +=
                            kv.get(q, j, mu) * kv.get(i, q, l) - kv.get(q, j, l) * kv.get(i, q, mu);
                    }
                    out.set(&[i, j, l, mu], v);
                }
            }
        }
    }
    Ok(out)
}

/// Action of the curvature of the induced product connection on a value `v`
/// of type `t`, given the curvature values `rk = R[K](p)` and
/// `rg = R[Γ](p)`. The result carries two extra trailing `T*M` slots.
///
/// Per slot: `+R[K]` on `E`, `−R[K]ᵀ` on `E*`, `+R[Γ]` on `TM`, `−R[Γ]ᵀ` on
/// `T*M`.
pub fn product_action(
    t: FieldType,
    rk: &TensorValue,
    rg: &TensorValue,
    v: &TensorValue,
) -> Result<TensorValue, CurvatureError> {
    let dims = v.shape().dims();
    let expected = t.shape(dims.m, dims.n);
    if v.shape().sorts() != expected.sorts() {
        return Err(ConnectionError::FieldShape {
            expected: expected.sorts().to_vec(),
            got: v.shape().sorts().to_vec(),
        }
        .into());
    }
    let sorts = v.shape().sorts().to_vec();
    let rank = sorts.len();
    let out_shape = v
        .shape()
        .push(IndexSort::BaseDown)
        .push(IndexSort::BaseDown);
    let mut moved = vec![0; rank];
    Ok(Tensor::from_fn(out_shape, |full| {
        let (idx, n1, n2) = (&full[..rank], full[rank], full[rank + 1]);
        moved.copy_from_slice(idx);
        let mut acc = 0.0;
        for (slot, &sort) in sorts.iter().enumerate() {
            let a = idx[slot];
            for c in 0..dims.dim_of(sort) {
                moved[slot] = c;
                let vc = *v.get(&moved);
                acc += match sort {
                    IndexSort::FiberUp => rk.get(&[a, c, n1, n2]) * vc,
                    IndexSort::FiberDown => -rk.get(&[c, a, n1, n2]) * vc,
                    IndexSort::BaseUp => rg.get(&[a, c, n1, n2]) * vc,
                    IndexSort::BaseDown => -rg.get(&[c, a, n1, n2]) * vc,
                    IndexSort::Fiber2Up | IndexSort::Fiber2Down => unreachable!(),
                };
            }
            moved[slot] = a;
        }
        acc
    }))
}

/// [`product_action`] with the curvature fields evaluated at `p`.
pub fn curvature_product_action(
    t: FieldType,
    rk: &CurvatureField,
    rg: &CurvatureField,
    v: &TensorValue,
    p: &BasePoint,
) -> Result<TensorValue, CurvatureError> {
    product_action(t, &rk.eval(p)?, &rg.eval(p)?, v)
}

/// Adds a constant to one curvature coefficient. Only meaningful as a
/// negative control: the result is no longer the curvature of anything.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvaturePerturbation {
    /// `[i, j, l, m]`, 0-based.
    pub index: [usize; 4],
    pub delta: f64,
}

impl CurvaturePerturbation {
    pub fn apply(&self, r: &CurvatureField) -> CurvatureField {
        let mut field = r.field().clone();
        let ext = field.shape().extents();
        if self.index.iter().zip(&ext).all(|(i, e)| i < e) {
            let e = field.get(&self.index) + ScalarExpr::constant(self.delta);
            field.set(&self.index, e);
        }
        CurvatureField::new(field, CurvatureOrigin::Perturbed)
    }
}

/// Max-abs difference of two fields over a point set, ignoring points where
/// either side is singular. Returns `None` when every point is singular.
pub fn probe_max_diff(a: &TensorField, b: &TensorField, points: &[BasePoint]) -> Option<f64> {
    let mut worst = None;
    for p in points {
        if let (Ok(x), Ok(y)) = (a.eval(p), b.eval(p)) {
            let d = x.max_abs_diff(&y).ok()?;
            worst = Some(worst.map_or(d, |w: f64| w.max(d)));
        }
    }
    worst
}

/// Whether two fields agree on the probe grid.
pub fn probe_eq(a: &TensorField, b: &TensorField) -> bool {
    probe_grid(a.shape().dims().m)
        .iter()
        .all(|p| match (a.eval(p), b.eval(p)) {
            (Ok(x), Ok(y)) => x
                .data()
                .iter()
                .zip(y.data())
                .all(|(&u, &v)| probe_close(u, v)),
            (Err(_), Err(_)) => true,
            _ => false,
        })
}
