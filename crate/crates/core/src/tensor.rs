//! Dense multi-index tensors with sorted index slots.
//!
//! Every slot carries an [`IndexSort`] that fixes both its dimension (through
//! the chart dimensions `m`, `n`, `n′`) and its variance. Entries are stored
//! row-major over the slots. Indices are 0-based here.

use thiserror::Error;

use crate::expr::{BasePoint, EvalCache, EvalError, ScalarExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IndexSort {
    /// Primary bundle `E`.
    FiberUp,
    /// Dual `E*`.
    FiberDown,
    /// Second bundle `E′`.
    Fiber2Up,
    /// Dual `E′*`.
    Fiber2Down,
    /// Tangent bundle `TM`.
    BaseUp,
    /// Cotangent bundle `T*M`.
    BaseDown,
}

impl IndexSort {
    pub fn dual(self) -> IndexSort {
        match self {
            IndexSort::FiberUp => IndexSort::FiberDown,
            IndexSort::FiberDown => IndexSort::FiberUp,
            IndexSort::Fiber2Up => IndexSort::Fiber2Down,
            IndexSort::Fiber2Down => IndexSort::Fiber2Up,
            IndexSort::BaseUp => IndexSort::BaseDown,
            IndexSort::BaseDown => IndexSort::BaseUp,
        }
    }

    pub fn is_up(self) -> bool {
        matches!(
            self,
            IndexSort::FiberUp | IndexSort::Fiber2Up | IndexSort::BaseUp
        )
    }

    pub fn symbol(self) -> &'static str {
        match self {
            IndexSort::FiberUp => "E",
            IndexSort::FiberDown => "E*",
            IndexSort::Fiber2Up => "E'",
            IndexSort::Fiber2Down => "E'*",
            IndexSort::BaseUp => "TM",
            IndexSort::BaseDown => "T*M",
        }
    }
}

/// Dimensions of the chart: base `m`, primary fiber `n`, second fiber `n′`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChartDims {
    pub m: usize,
    pub n: usize,
    pub n2: usize,
}

impl ChartDims {
    pub fn new(m: usize, n: usize) -> Self {
        ChartDims { m, n, n2: 0 }
    }

    pub fn with_second(m: usize, n: usize, n2: usize) -> Self {
        ChartDims { m, n, n2 }
    }

    pub fn dim_of(&self, sort: IndexSort) -> usize {
        match sort {
            IndexSort::FiberUp | IndexSort::FiberDown => self.n,
            IndexSort::Fiber2Up | IndexSort::Fiber2Down => self.n2,
            IndexSort::BaseUp | IndexSort::BaseDown => self.m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("chart dimensions differ: {0:?} vs {1:?}")]
    ChartMismatch(ChartDims, ChartDims),
    #[error("slot {slot} out of range for a rank-{rank} tensor")]
    SlotOutOfRange { slot: usize, rank: usize },
    #[error("cannot contract slot {up} ({up_sort:?}) with slot {down} ({down_sort:?})")]
    SortMismatch {
        up: usize,
        up_sort: IndexSort,
        down: usize,
        down_sort: IndexSort,
    },
    #[error("last two slots must both be covariant base slots")]
    NotTwoForm,
    #[error("expected {expected} entries, got {got}")]
    EntryCount { expected: usize, got: usize },
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: Vec<IndexSort>,
        got: Vec<IndexSort>,
    },
    #[error("permutation {0:?} is not a permutation of the slots")]
    BadPermutation(Vec<usize>),
    #[error("entry {index:?}: {source}")]
    Eval {
        index: Vec<usize>,
        #[source]
        source: EvalError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TensorShape {
    sorts: Vec<IndexSort>,
    dims: ChartDims,
}

impl TensorShape {
    pub fn new(sorts: Vec<IndexSort>, dims: ChartDims) -> Self {
        TensorShape { sorts, dims }
    }

    pub fn scalar(dims: ChartDims) -> Self {
        TensorShape::new(Vec::new(), dims)
    }

    pub fn sorts(&self) -> &[IndexSort] {
        &self.sorts
    }

    pub fn dims(&self) -> ChartDims {
        self.dims
    }

    pub fn rank(&self) -> usize {
        self.sorts.len()
    }

    pub fn extents(&self) -> Vec<usize> {
        self.sorts.iter().map(|&s| self.dims.dim_of(s)).collect()
    }

    pub fn len(&self) -> usize {
        self.extents().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Slots appear grouped as E, E*, E′, E′*, TM, T*M.
    pub fn is_canonical(&self) -> bool {
        self.sorts.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn strides(&self) -> Vec<usize> {
        let ext = self.extents();
        let mut strides = vec![1; ext.len()];
        for i in (0..ext.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * ext[i + 1];
        }
        strides
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.rank());
        let ext = self.extents();
        index.iter().zip(&ext).fold(0, |acc, (&i, &e)| {
            debug_assert!(i < e);
            acc * e + i
        })
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let ext = self.extents();
        let mut idx = vec![0; ext.len()];
        for k in (0..ext.len()).rev() {
            idx[k] = flat % ext[k];
            flat /= ext[k];
        }
        idx
    }

    /// This shape with `sort` appended as a trailing slot.
    pub fn push(&self, sort: IndexSort) -> TensorShape {
        let mut sorts = self.sorts.clone();
        sorts.push(sort);
        TensorShape::new(sorts, self.dims)
    }

    pub fn concat(&self, other: &TensorShape) -> Result<TensorShape, TensorError> {
        if self.dims != other.dims {
            return Err(TensorError::ChartMismatch(self.dims, other.dims));
        }
        let mut sorts = self.sorts.clone();
        sorts.extend_from_slice(&other.sorts);
        Ok(TensorShape::new(sorts, self.dims))
    }

    /// All multi-indices in row-major order.
    pub fn indices(&self) -> MultiIndices {
        MultiIndices::new(self.extents())
    }
}

/// Row-major iterator over the multi-indices of a box.
pub struct MultiIndices {
    extents: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl MultiIndices {
    pub fn new(extents: Vec<usize>) -> Self {
        let next = if extents.contains(&0) {
            None
        } else {
            Some(vec![0; extents.len()])
        };
        MultiIndices { extents, next }
    }
}

impl Iterator for MultiIndices {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut k = succ.len();
        loop {
            if k == 0 {
                break;
            }
            k -= 1;
            succ[k] += 1;
            if succ[k] < self.extents[k] {
                self.next = Some(succ);
                break;
            }
            succ[k] = 0;
        }
        Some(current)
    }
}

/// Dense tensor over a [`TensorShape`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: TensorShape,
    data: Vec<T>,
}

/// Pointwise tensor value.
pub type TensorValue = Tensor<f64>;
/// Tensor field whose entries are coefficient functions.
pub type TensorField = Tensor<ScalarExpr>;

impl<T: Clone> Tensor<T> {
    pub fn from_vec(shape: TensorShape, data: Vec<T>) -> Result<Self, TensorError> {
        if data.len() != shape.len() {
            return Err(TensorError::EntryCount {
                expected: shape.len(),
                got: data.len(),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn filled(shape: TensorShape, value: T) -> Self {
        let data = vec![value; shape.len()];
        Tensor { shape, data }
    }

    pub fn from_fn(shape: TensorShape, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let data = shape.indices().map(|idx| f(&idx)).collect();
        Tensor { shape, data }
    }

    pub fn try_from_fn<E>(
        shape: TensorShape,
        mut f: impl FnMut(&[usize]) -> Result<T, E>,
    ) -> Result<Self, E> {
        let data = shape
            .indices()
            .map(|idx| f(&idx))
            .collect::<Result<Vec<_>, E>>()?;
        Ok(Tensor { shape, data })
    }

    pub fn shape(&self) -> &TensorShape {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> &T {
        &self.data[self.shape.flat_index(index)]
    }

    pub fn set(&mut self, index: &[usize], value: T) {
        let k = self.shape.flat_index(index);
        self.data[k] = value;
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Entries paired with their multi-indices, row-major.
    pub fn indexed(&self) -> impl Iterator<Item = (Vec<usize>, &T)> {
        self.shape.indices().zip(self.data.iter())
    }

    /// Reorders slots: slot `k` of the result is slot `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self, TensorError> {
        let rank = self.shape.rank();
        let mut seen = vec![false; rank];
        if perm.len() != rank
            || perm
                .iter()
                .any(|&p| p >= rank || std::mem::replace(&mut seen[p], true))
        {
            return Err(TensorError::BadPermutation(perm.to_vec()));
        }
        let sorts = perm.iter().map(|&p| self.shape.sorts[p]).collect();
        let shape = TensorShape::new(sorts, self.shape.dims);
        let mut src = vec![0; rank];
        Ok(Tensor::from_fn(shape, |idx| {
            for (k, &p) in perm.iter().enumerate() {
                src[p] = idx[k];
            }
            self.get(&src).clone()
        }))
    }

    /// Replaces the slot sorts without touching entries. Extents must agree.
    pub fn relabel(&self, sorts: Vec<IndexSort>, dims: ChartDims) -> Result<Self, TensorError> {
        let shape = TensorShape::new(sorts, dims);
        if shape.extents() != self.shape.extents() {
            return Err(TensorError::ShapeMismatch {
                expected: self.shape.sorts.clone(),
                got: shape.sorts,
            });
        }
        Ok(Tensor {
            shape,
            data: self.data.clone(),
        })
    }

    fn alt_with(&self, half_diff: impl Fn(&T, &T) -> T) -> Result<Self, TensorError> {
        let r = self.shape.rank();
        if r < 2
            || self.shape.sorts[r - 1] != IndexSort::BaseDown
            || self.shape.sorts[r - 2] != IndexSort::BaseDown
        {
            return Err(TensorError::NotTwoForm);
        }
        let mut swapped = vec![0; r];
        Ok(Tensor::from_fn(self.shape.clone(), |idx| {
            swapped.copy_from_slice(idx);
            swapped.swap(r - 1, r - 2);
            half_diff(self.get(idx), self.get(&swapped))
        }))
    }
}

impl TensorValue {
    pub fn zeros(shape: TensorShape) -> Self {
        Tensor::filled(shape, 0.0)
    }

    pub fn scalar(dims: ChartDims, value: f64) -> Self {
        Tensor {
            shape: TensorShape::scalar(dims),
            data: vec![value],
        }
    }

    /// A unit vector (or covector) of the given sort.
    pub fn basis(sort: IndexSort, dims: ChartDims, k: usize) -> Self {
        let shape = TensorShape::new(vec![sort], dims);
        Tensor::from_fn(shape, |idx| if idx[0] == k { 1.0 } else { 0.0 })
    }

    pub fn vector(sort: IndexSort, dims: ChartDims, comps: Vec<f64>) -> Result<Self, TensorError> {
        Tensor::from_vec(TensorShape::new(vec![sort], dims), comps)
    }

    /// Tensor product: slots of `self` followed by slots of `other`.
    pub fn outer(&self, other: &TensorValue) -> Result<TensorValue, TensorError> {
        let shape = self.shape.concat(&other.shape)?;
        let mut data = Vec::with_capacity(self.data.len() * other.data.len());
        for a in &self.data {
            for b in &other.data {
                data.push(a * b);
            }
        }
        Ok(Tensor { shape, data })
    }

    /// Sums over a contravariant slot paired with a covariant slot of the
    /// dual sort. Remaining slots keep their relative order.
    pub fn contract(&self, up_slot: usize, down_slot: usize) -> Result<TensorValue, TensorError> {
        let rank = self.shape.rank();
        for slot in [up_slot, down_slot] {
            if slot >= rank {
                return Err(TensorError::SlotOutOfRange { slot, rank });
            }
        }
        let up_sort = self.shape.sorts[up_slot];
        let down_sort = self.shape.sorts[down_slot];
        if up_slot == down_slot || !up_sort.is_up() || up_sort.dual() != down_sort {
            return Err(TensorError::SortMismatch {
                up: up_slot,
                up_sort,
                down: down_slot,
                down_sort,
            });
        }
        let kept: Vec<usize> = (0..rank)
            .filter(|&k| k != up_slot && k != down_slot)
            .collect();
        let sorts = kept.iter().map(|&k| self.shape.sorts[k]).collect();
        let shape = TensorShape::new(sorts, self.shape.dims);
        let dim = self.shape.dims.dim_of(up_sort);
        let mut full = vec![0; rank];
        Ok(Tensor::from_fn(shape, |idx| {
            for (pos, &k) in kept.iter().enumerate() {
                full[k] = idx[pos];
            }
            (0..dim)
                .map(|d| {
                    full[up_slot] = d;
                    full[down_slot] = d;
                    *self.get(&full)
                })
                .sum()
        }))
    }

    /// `T′[…,ν,σ] = ½(T[…,ν,σ] − T[…,σ,ν])`.
    pub fn alt_last_two(&self) -> Result<TensorValue, TensorError> {
        self.alt_with(|a, b| 0.5 * (a - b))
    }

    pub fn scaled(&self, factor: f64) -> TensorValue {
        self.map(|v| v * factor)
    }

    pub fn add(&self, other: &TensorValue) -> Result<TensorValue, TensorError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &TensorValue) -> Result<TensorValue, TensorError> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &TensorValue,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<TensorValue, TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                expected: self.shape.sorts.clone(),
                got: other.shape.sorts.clone(),
            });
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    /// Max-abs entrywise difference. NaN entries make the result NaN.
    pub fn max_abs_diff(&self, other: &TensorValue) -> Result<f64, TensorError> {
        let d = self.sub(other)?;
        Ok(d.data.iter().fold(0.0, |acc: f64, v| {
            if v.is_nan() || acc.is_nan() {
                f64::NAN
            } else {
                acc.max(v.abs())
            }
        }))
    }
}

impl TensorField {
    pub fn zeros(shape: TensorShape) -> Self {
        Tensor::filled(shape, ScalarExpr::zero())
    }

    /// Evaluates every entry at `p`.
    pub fn eval(&self, p: &BasePoint) -> Result<TensorValue, TensorError> {
        let mut cache = EvalCache::new(p.coords());
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(k, e)| {
                cache.eval(e).map_err(|source| TensorError::Eval {
                    index: self.shape.multi_index(k),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    /// Entrywise partial derivative along base axis `axis`.
    pub fn diff(&self, axis: usize) -> TensorField {
        self.map(|e| e.diff(axis))
    }

    pub fn alt_last_two(&self) -> Result<TensorField, TensorError> {
        self.alt_with(|a, b| (a - b).scale(0.5))
    }

    /// Smallest base dimension over which every entry is defined.
    pub fn min_dim(&self) -> usize {
        self.data.iter().map(ScalarExpr::min_dim).max().unwrap_or(0)
    }
}
