//! Linear connections on vector bundles and classical connections on the base.
//!
//! Coefficient conventions (0-based indices):
//!
//! * `LinearConnection::get(i, j, l)` is `K_j^i_l`, so that the covariant
//!   differential of a section is `∇_l φ^i = ∂_l φ^i − K_j^i_l φ^j`.
//! * `ClassicalConnection::get(a, b, c)` is `Γ_a^b_c`, symmetric under
//!   `a ↔ c`. Viewed as a linear connection on `TM` it has `K_a^b_c = Γ_a^b_c`.
//!
//! The sign convention is `∇Φ = j¹Φ − K∘Φ`: contravariant slots receive
//! `−K` corrections, covariant slots `+K`.

use thiserror::Error;

use crate::expr::{BasePoint, EvalError, ScalarExpr};
use crate::tensor::{
    ChartDims, IndexSort, Tensor, TensorError, TensorField, TensorShape, TensorValue,
};

/// Largest fiber dimension `n^{p+q} m^{r+s}` that [`product_coefficients`]
/// will materialize.
pub const MAX_PRODUCT_RANK: usize = 4096;

/// Coordinate values of the symmetry probe grid.
pub const PROBE_VALUES: [f64; 4] = [-1.0, 0.3, 0.7, 1.0];

/// Relative tolerance for probe-grid equality of coefficient functions.
pub const PROBE_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConnectionError {
    #[error("base dimensions differ: {0} vs {1}")]
    BaseDimMismatch(usize, usize),
    #[error("coefficient array has {got} entries, expected {expected}")]
    EntryCount { expected: usize, got: usize },
    #[error("coefficient {index:?} uses x{var} on a base of dimension {m}")]
    ExpressionDim {
        index: Vec<usize>,
        var: usize,
        m: usize,
    },
    #[error(
        "Gamma is not symmetric: Gamma[{a},{b},{c}] != Gamma[{c},{b},{a}] at {point}",
        a = .index.0 + 1, b = .index.1 + 1, c = .index.2 + 1
    )]
    NotSymmetric {
        index: (usize, usize, usize),
        point: BasePoint,
    },
    #[error("field shape {got:?} does not match field type {expected:?}")]
    FieldShape {
        expected: Vec<IndexSort>,
        got: Vec<IndexSort>,
    },
    #[error("product bundle rank {rank} exceeds the limit {limit}")]
    SizeBound { rank: usize, limit: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// All points of `{−1, 0.3, 0.7, 1}^m`.
pub fn probe_grid(m: usize) -> Vec<BasePoint> {
    crate::tensor::MultiIndices::new(vec![PROBE_VALUES.len(); m])
        .map(|idx| BasePoint(idx.iter().map(|&k| PROBE_VALUES[k]).collect()))
        .collect()
}

pub(crate) fn probe_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= PROBE_RTOL * (1.0 + a.abs().max(b.abs()))
}

/// Multiplicities `(p, q, r, s)` of `E`, `E*`, `TM`, `T*M` in a field type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldType {
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub s: usize,
}

impl FieldType {
    pub const fn new(p: usize, q: usize, r: usize, s: usize) -> Self {
        FieldType { p, q, r, s }
    }

    pub fn rank(&self) -> usize {
        self.p + self.q + self.r + self.s
    }

    pub fn sorts(&self) -> Vec<IndexSort> {
        let mut sorts = Vec::with_capacity(self.rank());
        sorts.extend(std::iter::repeat_n(IndexSort::FiberUp, self.p));
        sorts.extend(std::iter::repeat_n(IndexSort::FiberDown, self.q));
        sorts.extend(std::iter::repeat_n(IndexSort::BaseUp, self.r));
        sorts.extend(std::iter::repeat_n(IndexSort::BaseDown, self.s));
        sorts
    }

    pub fn shape(&self, m: usize, n: usize) -> TensorShape {
        TensorShape::new(self.sorts(), ChartDims::new(m, n))
    }

    /// `n^{p+q} · m^{r+s}`.
    pub fn fiber_dim(&self, m: usize, n: usize) -> usize {
        n.pow((self.p + self.q) as u32) * m.pow((self.r + self.s) as u32)
    }

    /// Reads the type from a canonical shape with no second-bundle slots.
    pub fn of_shape(shape: &TensorShape) -> Option<FieldType> {
        if !shape.is_canonical() {
            return None;
        }
        let count = |s| shape.sorts().iter().filter(|&&x| x == s).count();
        let t = FieldType::new(
            count(IndexSort::FiberUp),
            count(IndexSort::FiberDown),
            count(IndexSort::BaseUp),
            count(IndexSort::BaseDown),
        );
        (t.rank() == shape.rank()).then_some(t)
    }
}

impl std::fmt::Display for FieldType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{},{})", self.p, self.q, self.r, self.s)
    }
}

/// Linear connection on a rank-`n` bundle over an `m`-dimensional chart.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConnection {
    m: usize,
    n: usize,
    coeffs: Vec<ScalarExpr>,
}

impl LinearConnection {
    pub fn zero(m: usize, n: usize) -> Self {
        LinearConnection {
            m,
            n,
            coeffs: vec![ScalarExpr::zero(); n * n * m],
        }
    }

    /// Builds `K` from `f(i, j, l) = K_j^i_l`.
    pub fn from_fn(
        m: usize,
        n: usize,
        mut f: impl FnMut(usize, usize, usize) -> ScalarExpr,
    ) -> Self {
        let mut coeffs = Vec::with_capacity(n * n * m);
        for i in 0..n {
            for j in 0..n {
                for l in 0..m {
                    coeffs.push(f(i, j, l));
                }
            }
        }
        LinearConnection { m, n, coeffs }
    }

    /// Builds `K` from row-major `[i][j][l]` coefficients, checking that every
    /// expression lives on an `m`-dimensional base.
    pub fn new(m: usize, n: usize, coeffs: Vec<ScalarExpr>) -> Result<Self, ConnectionError> {
        if coeffs.len() != n * n * m {
            return Err(ConnectionError::EntryCount {
                expected: n * n * m,
                got: coeffs.len(),
            });
        }
        let k = LinearConnection { m, n, coeffs };
        k.check_expression_dims()?;
        Ok(k)
    }

    /// Zero connection with the listed coefficients set.
    pub fn from_entries(
        m: usize,
        n: usize,
        entries: impl IntoIterator<Item = ((usize, usize, usize), ScalarExpr)>,
    ) -> Result<Self, ConnectionError> {
        let mut k = LinearConnection::zero(m, n);
        for ((i, j, l), e) in entries {
            k.set(i, j, l, e);
        }
        k.check_expression_dims()?;
        Ok(k)
    }

    fn check_expression_dims(&self) -> Result<(), ConnectionError> {
        for i in 0..self.n {
            for j in 0..self.n {
                for l in 0..self.m {
                    let d = self.get(i, j, l).min_dim();
                    if d > self.m {
                        return Err(ConnectionError::ExpressionDim {
                            index: vec![i, j, l],
                            var: d,
                            m: self.m,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn base_dim(&self) -> usize {
        self.m
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    fn offset(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.n + j) * self.m + l
    }

    /// `K_j^i_l`.
    pub fn get(&self, i: usize, j: usize, l: usize) -> &ScalarExpr {
        &self.coeffs[self.offset(i, j, l)]
    }

    pub fn set(&mut self, i: usize, j: usize, l: usize, e: ScalarExpr) {
        let k = self.offset(i, j, l);
        self.coeffs[k] = e;
    }

    pub fn coefficients(&self) -> &[ScalarExpr] {
        &self.coeffs
    }

    pub fn eval(&self, p: &BasePoint) -> Result<ConnectionValues, EvalError> {
        let values = self
            .coeffs
            .iter()
            .map(|e| e.eval(p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ConnectionValues {
            m: self.m,
            n: self.n,
            values,
        })
    }

    /// Coefficients as a tensor field with slots `(E, E*, T*M)`.
    pub fn as_field(&self) -> TensorField {
        let shape = TensorShape::new(
            vec![
                IndexSort::FiberUp,
                IndexSort::FiberDown,
                IndexSort::BaseDown,
            ],
            ChartDims::new(self.m, self.n),
        );
        Tensor::from_vec(shape, self.coeffs.clone()).expect("coefficient count matches shape")
    }

    /// Probe-grid equality of coefficient functions.
    pub fn probe_eq(&self, other: &LinearConnection) -> bool {
        if self.m != other.m || self.n != other.n {
            return false;
        }
        probe_grid(self.m).iter().all(|p| {
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .all(|(a, b)| match (a.eval(p), b.eval(p)) {
                    (Ok(x), Ok(y)) => probe_close(x, y),
                    (Err(_), Err(_)) => true,
                    _ => false,
                })
        })
    }
}

/// Connection coefficients evaluated at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionValues {
    m: usize,
    n: usize,
    values: Vec<f64>,
}

impl ConnectionValues {
    #[inline]
    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.values[(i * self.n + j) * self.m + l]
    }
}

/// Symmetric linear connection on `TM`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalConnection {
    m: usize,
    coeffs: Vec<ScalarExpr>,
}

impl ClassicalConnection {
    pub fn zero(m: usize) -> Self {
        ClassicalConnection {
            m,
            coeffs: vec![ScalarExpr::zero(); m * m * m],
        }
    }

    /// Builds `Γ` from row-major `[a][b][c]` coefficients `Γ_a^b_c` and checks
    /// `Γ_a^b_c = Γ_c^b_a` on the probe grid.
    pub fn new(m: usize, coeffs: Vec<ScalarExpr>) -> Result<Self, ConnectionError> {
        if coeffs.len() != m * m * m {
            return Err(ConnectionError::EntryCount {
                expected: m * m * m,
                got: coeffs.len(),
            });
        }
        let g = ClassicalConnection { m, coeffs };
        for (k, e) in g.coeffs.iter().enumerate() {
            let d = e.min_dim();
            if d > m {
                return Err(ConnectionError::ExpressionDim {
                    index: vec![k / (m * m), (k / m) % m, k % m],
                    var: d,
                    m,
                });
            }
        }
        g.check_symmetry()?;
        Ok(g)
    }

    pub fn from_fn(
        m: usize,
        mut f: impl FnMut(usize, usize, usize) -> ScalarExpr,
    ) -> Result<Self, ConnectionError> {
        let mut coeffs = Vec::with_capacity(m * m * m);
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    coeffs.push(f(a, b, c));
                }
            }
        }
        ClassicalConnection::new(m, coeffs)
    }

    /// Zero connection with the listed coefficients set; omitted entries are
    /// zero, so both members of each symmetric pair must be listed.
    pub fn from_entries(
        m: usize,
        entries: impl IntoIterator<Item = ((usize, usize, usize), ScalarExpr)>,
    ) -> Result<Self, ConnectionError> {
        let mut coeffs = vec![ScalarExpr::zero(); m * m * m];
        for ((a, b, c), e) in entries {
            coeffs[(a * m + b) * m + c] = e;
        }
        ClassicalConnection::new(m, coeffs)
    }

    fn check_symmetry(&self) -> Result<(), ConnectionError> {
        let m = self.m;
        let pairs: Vec<(usize, usize, usize)> = (0..m)
            .flat_map(|a| (0..m).flat_map(move |b| ((a + 1)..m).map(move |c| (a, b, c))))
            .filter(|&(a, b, c)| self.get(a, b, c) != self.get(c, b, a))
            .collect();
        if pairs.is_empty() {
            return Ok(());
        }
        for p in probe_grid(m) {
            for &(a, b, c) in &pairs {
                let ok = match (self.get(a, b, c).eval(&p), self.get(c, b, a).eval(&p)) {
                    (Ok(x), Ok(y)) => probe_close(x, y),
                    (Err(_), Err(_)) => true,
                    _ => false,
                };
                if !ok {
                    return Err(ConnectionError::NotSymmetric {
                        index: (a, b, c),
                        point: p,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn base_dim(&self) -> usize {
        self.m
    }

    /// `Γ_a^b_c`.
    pub fn get(&self, a: usize, b: usize, c: usize) -> &ScalarExpr {
        &self.coeffs[(a * self.m + b) * self.m + c]
    }

    pub fn coefficients(&self) -> &[ScalarExpr] {
        &self.coeffs
    }

    pub fn eval(&self, p: &BasePoint) -> Result<ClassicalValues, EvalError> {
        let values = self
            .coeffs
            .iter()
            .map(|e| e.eval(p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ClassicalValues { m: self.m, values })
    }

    /// The same connection as a rank-`m` linear connection on `TM`.
    pub fn as_linear(&self) -> LinearConnection {
        LinearConnection::from_fn(self.m, self.m, |i, j, l| self.get(j, i, l).clone())
    }
}

/// Classical connection coefficients evaluated at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalValues {
    m: usize,
    values: Vec<f64>,
}

impl ClassicalValues {
    /// `Γ_a^b_c`.
    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.values[(a * self.m + b) * self.m + c]
    }
}

/// Dual connection on `E*`: `K*_j^i_l = −K_i^j_l`.
pub fn dual(k: &LinearConnection) -> LinearConnection {
    LinearConnection::from_fn(k.m, k.n, |i, j, l| -k.get(j, i, l))
}

/// Tensor product connection on `E ⊗ E′`, fiber index `(i, a)` flattened to
/// `i·n′ + a`:
/// `(K⊗K′)_{jb}^{ia}_l = K_j^i_l δ^a_b + K′_b^a_l δ^i_j`.
pub fn tensor_product(
    k: &LinearConnection,
    k2: &LinearConnection,
) -> Result<LinearConnection, ConnectionError> {
    if k.m != k2.m {
        return Err(ConnectionError::BaseDimMismatch(k.m, k2.m));
    }
    let n2 = k2.n;
    Ok(LinearConnection::from_fn(k.m, k.n * n2, |ia, jb, l| {
        let (i, a) = (ia / n2, ia % n2);
        let (j, b) = (jb / n2, jb % n2);
        let mut e = ScalarExpr::zero();
        if a == b {
            e = e + k.get(i, j, l);
        }
        if i == j {
            e = e + k2.get(a, b, l);
        }
        e
    }))
}

/// Materialized coefficients of the induced connection on
/// `⊗^p E ⊗ ⊗^q E* ⊗ ⊗^r TM ⊗ ⊗^s T*M`, as a plain linear connection whose
/// fiber index is the row-major flattening of the field's multi-index.
pub fn product_coefficients(
    k: &LinearConnection,
    g: &ClassicalConnection,
    t: FieldType,
) -> Result<LinearConnection, ConnectionError> {
    if k.m != g.m {
        return Err(ConnectionError::BaseDimMismatch(k.m, g.m));
    }
    let (m, n) = (k.m, k.n);
    let rank = t.fiber_dim(m, n);
    if rank > MAX_PRODUCT_RANK {
        return Err(ConnectionError::SizeBound {
            rank,
            limit: MAX_PRODUCT_RANK,
        });
    }
    let shape = t.shape(m, n);
    let sorts = shape.sorts().to_vec();
    let mut terms: Vec<Vec<ScalarExpr>> = vec![Vec::new(); rank * rank * m];
    for (row, idx) in shape.indices().enumerate() {
        let mut col_idx = idx.clone();
        for (slot, &sort) in sorts.iter().enumerate() {
            let a = idx[slot];
            let extent = shape.dims().dim_of(sort);
            for c in 0..extent {
                col_idx[slot] = c;
                let col = shape.flat_index(&col_idx);
                for l in 0..m {
                    let term = match sort {
                        IndexSort::FiberUp => k.get(a, c, l).clone(),
                        IndexSort::FiberDown => -k.get(c, a, l),
                        IndexSort::BaseUp => g.get(c, a, l).clone(),
                        IndexSort::BaseDown => -g.get(a, c, l),
                        IndexSort::Fiber2Up | IndexSort::Fiber2Down => unreachable!(),
                    };
                    if !term.is_zero() {
                        terms[(row * rank + col) * m + l].push(term);
                    }
                }
            }
            col_idx[slot] = a;
        }
    }
    let coeffs = terms.into_iter().map(|ts| ts.into_iter().sum()).collect();
    Ok(LinearConnection { m, n: rank, coeffs })
}

pub(crate) fn check_field_shape(
    field_shape: &TensorShape,
    t: FieldType,
    m: usize,
    n: usize,
) -> Result<(), ConnectionError> {
    let expected = t.shape(m, n);
    if field_shape.sorts() != expected.sorts() || field_shape.extents() != expected.extents() {
        return Err(ConnectionError::FieldShape {
            expected: expected.sorts().to_vec(),
            got: field_shape.sorts().to_vec(),
        });
    }
    Ok(())
}

/// Value of `∇^{(K,Γ)}Φ` at `p`, computed slot by slot without materializing
/// the product connection. The result has one trailing `T*M` slot.
pub fn covariant_apply(
    k: &LinearConnection,
    g: &ClassicalConnection,
    t: FieldType,
    phi: &TensorField,
    p: &BasePoint,
) -> Result<TensorValue, ConnectionError> {
    if k.m != g.m {
        return Err(ConnectionError::BaseDimMismatch(k.m, g.m));
    }
    let m = k.m;
    check_field_shape(phi.shape(), t, m, k.n)?;
    let kv = k.eval(p)?;
    let gv = g.eval(p)?;
    let value = phi.eval(p)?;
    let partials = (0..m)
        .map(|nu| phi.diff(nu).eval(p))
        .collect::<Result<Vec<_>, _>>()?;
    let in_shape = phi.shape().clone();
    let sorts = in_shape.sorts().to_vec();
    let out_shape = in_shape.push(IndexSort::BaseDown);
    let rank = sorts.len();
    let mut moved = vec![0; rank];
    Ok(Tensor::from_fn(out_shape, |full| {
        let (idx, nu) = (&full[..rank], full[rank]);
        let mut acc = *partials[nu].get(idx);
        moved.copy_from_slice(idx);
        for (slot, &sort) in sorts.iter().enumerate() {
            let a = idx[slot];
            let extent = in_shape.dims().dim_of(sort);
            for c in 0..extent {
                moved[slot] = c;
                let phi_c = *value.get(&moved);
                acc += match sort {
                    IndexSort::FiberUp => -kv.get(a, c, nu) * phi_c,
                    IndexSort::FiberDown => kv.get(c, a, nu) * phi_c,
                    IndexSort::BaseUp => -gv.get(c, a, nu) * phi_c,
                    IndexSort::BaseDown => gv.get(a, c, nu) * phi_c,
                    IndexSort::Fiber2Up | IndexSort::Fiber2Down => unreachable!(),
                };
            }
            moved[slot] = a;
        }
        acc
    }))
}
