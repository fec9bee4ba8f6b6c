use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        check_dim("tensor data length", shape.iter().product(), data.len())?;
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn vector(data: Vec<T>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Rows of a rank-2 tensor.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Columns of a rank-2 tensor.
    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn row(&self, r: usize) -> &[T] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols() + c]
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn norm_sq(&self) -> T {
        self.data.iter().map(|&x| x * x).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape == other.shape
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::InvalidArgument(format!(
                "shape {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| U::of(x.to64())).collect(),
        }
    }
}

/// A collection of tensors that can be optimized and differentiated as a unit.
///
/// `tensors` and `tensors_mut` must enumerate the same tensors in the same order.
pub trait ParamSet<T: Scalar> {
    fn tensors(&self) -> Vec<&Tensor<T>>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// All coordinates flattened in enumeration order.
    fn flatten(&self) -> Vec<T> {
        self.tensors()
            .iter()
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }

    fn zero_(&mut self) {
        for t in self.tensors_mut() {
            t.fill(T::zero());
        }
    }
}

impl<T: Scalar> ParamSet<T> for Vec<Tensor<T>> {
    fn tensors(&self) -> Vec<&Tensor<T>> {
        self.iter().collect()
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.iter_mut().collect()
    }
}

/// `out = W[:, col0..col0+x.len()] x` for a rank-2 `W`.
#[inline]
pub fn matvec_cols<T: Scalar>(w: &Tensor<T>, col0: usize, x: &[T], out: &mut [T]) {
    let cols = w.cols();
    debug_assert!(col0 + x.len() <= cols);
    debug_assert_eq!(out.len(), w.rows());
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w.data[r * cols + col0..r * cols + col0 + x.len()];
        *o = dot(row, x);
    }
}

/// `out = W x`.
#[inline]
pub fn matvec<T: Scalar>(w: &Tensor<T>, x: &[T], out: &mut [T]) {
    matvec_cols(w, 0, x, out)
}

/// `out += W x`.
#[inline]
pub fn matvec_add<T: Scalar>(w: &Tensor<T>, x: &[T], out: &mut [T]) {
    let cols = w.cols();
    for (r, o) in out.iter_mut().enumerate() {
        *o += dot(&w.data[r * cols..(r + 1) * cols], x);
    }
}

/// `dx += W[:, col0..col0+dx.len()]^T dy`.
#[inline]
pub fn matvec_t_cols_add<T: Scalar>(w: &Tensor<T>, col0: usize, dy: &[T], dx: &mut [T]) {
    let cols = w.cols();
    for (r, &g) in dy.iter().enumerate() {
        if g == T::zero() {
            continue;
        }
        let row = &w.data[r * cols + col0..r * cols + col0 + dx.len()];
        for (d, &wv) in dx.iter_mut().zip(row) {
            *d += g * wv;
        }
    }
}

/// `dx += W^T dy`.
#[inline]
pub fn matvec_t_add<T: Scalar>(w: &Tensor<T>, dy: &[T], dx: &mut [T]) {
    matvec_t_cols_add(w, 0, dy, dx)
}

/// `dW[:, col0..col0+x.len()] += dy x^T`.
#[inline]
pub fn outer_cols_add<T: Scalar>(dw: &mut Tensor<T>, col0: usize, dy: &[T], x: &[T]) {
    let cols = dw.cols();
    for (r, &g) in dy.iter().enumerate() {
        if g == T::zero() {
            continue;
        }
        let row = &mut dw.data[r * cols + col0..r * cols + col0 + x.len()];
        for (d, &xv) in row.iter_mut().zip(x) {
            *d += g * xv;
        }
    }
}

/// `dW += dy x^T`.
#[inline]
pub fn outer_add<T: Scalar>(dw: &mut Tensor<T>, dy: &[T], x: &[T]) {
    outer_cols_add(dw, 0, dy, x)
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}
