use std::sync::Arc;

use crate::linalg::Matrix;

/// Off-diagonal coupling of a block system.
///
/// `apply` gives the contribution of the neighbouring block to the current block
/// row; the system matrix holds the negated operator.
#[derive(Clone, Debug, PartialEq)]
pub enum LinearOperator {
    Dense(Arc<Matrix>),
    /// Applies `Mᵀ` without materializing the transpose.
    TransposedDense(Arc<Matrix>),
    Zero { rows: usize, cols: usize },
}

impl LinearOperator {
    pub fn rows(&self) -> usize {
        match self {
            LinearOperator::Dense(m) => m.rows(),
            LinearOperator::TransposedDense(m) => m.cols(),
            LinearOperator::Zero { rows, .. } => *rows,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            LinearOperator::Dense(m) => m.cols(),
            LinearOperator::TransposedDense(m) => m.rows(),
            LinearOperator::Zero { cols, .. } => *cols,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols());
        match self {
            LinearOperator::Dense(m) => m.matvec(x),
            LinearOperator::TransposedDense(m) => m.matvec_transposed(x),
            LinearOperator::Zero { rows, .. } => vec![0.0; *rows],
        }
    }

    /// Multiply-adds performed by one `apply`.
    pub fn cost(&self) -> u64 {
        match self {
            LinearOperator::Dense(m) | LinearOperator::TransposedDense(m) => m.len() as u64,
            LinearOperator::Zero { .. } => 0,
        }
    }

    /// Scalar entries owned by the operator's storage.
    pub fn storage(&self) -> u64 {
        self.cost()
    }

    pub fn to_dense(&self) -> Matrix {
        match self {
            LinearOperator::Dense(m) => (**m).clone(),
            LinearOperator::TransposedDense(m) => m.transpose(),
            LinearOperator::Zero { rows, cols } => Matrix::zeros(*rows, *cols),
        }
    }

    /// Whether both operators point at the same backing storage.
    pub fn shares_storage(&self, other: &LinearOperator) -> bool {
        match (self, other) {
            (LinearOperator::Dense(a), LinearOperator::Dense(b))
            | (LinearOperator::TransposedDense(a), LinearOperator::TransposedDense(b)) => {
                Arc::ptr_eq(a, b)
            }
            _ => false,
        }
    }
}

/// The inverse of a diagonal block, stored by its entries.
///
/// Substitution only ever multiplies by these entries, so a zero entry
/// (a vanishing `f(y)` or `f'(y)`) needs no special handling there.
#[derive(Clone, Debug, PartialEq)]
pub enum InverseDiagonal {
    Identity(usize),
    Values(Vec<f64>),
}

impl InverseDiagonal {
    pub fn len(&self) -> usize {
        match self {
            InverseDiagonal::Identity(n) => *n,
            InverseDiagonal::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> f64 {
        match self {
            InverseDiagonal::Identity(_) => 1.0,
            InverseDiagonal::Values(v) => v[i],
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            InverseDiagonal::Identity(n) => vec![1.0; *n],
            InverseDiagonal::Values(v) => v.clone(),
        }
    }

    /// Scales `v` in place; returns the number of multiplies performed.
    pub fn scale(&self, v: &mut [f64]) -> u64 {
        match self {
            InverseDiagonal::Identity(_) => 0,
            InverseDiagonal::Values(d) => {
                for (x, di) in v.iter_mut().zip(d) {
                    *x *= di;
                }
                d.len() as u64
            }
        }
    }

    /// Multiplies performed by one `scale`.
    pub fn cost(&self) -> u64 {
        match self {
            InverseDiagonal::Identity(_) => 0,
            InverseDiagonal::Values(d) => d.len() as u64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transposed_dense_applies_transpose() {
        let m = Arc::new(Matrix::from_fn(2, 3, |i, j| (i + 2 * j) as f64));
        let op = LinearOperator::TransposedDense(Arc::clone(&m));
        assert_eq!((op.rows(), op.cols()), (3, 2));
        let x = [1.0, -2.0];
        assert_eq!(op.apply(&x), m.transpose().matvec(&x));
        assert_eq!(op.to_dense(), m.transpose());
        assert!(op.shares_storage(&LinearOperator::TransposedDense(m)));
    }

    #[test]
    fn identity_diagonal_scales_for_free() {
        let mut v = vec![2.0, 3.0];
        assert_eq!(InverseDiagonal::Identity(2).scale(&mut v), 0);
        assert_eq!(v, vec![2.0, 3.0]);
        assert_eq!(InverseDiagonal::Values(vec![0.5, 0.0]).scale(&mut v), 2);
        assert_eq!(v, vec![1.0, 0.0]);
    }
}
