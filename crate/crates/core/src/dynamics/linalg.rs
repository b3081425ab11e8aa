//! Small complex matrices: CSR sparse operators for time stepping and dense
//! matrices for exponentials and checks.

use num_complex::Complex;

use crate::scalar::Real;

pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn czero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

pub(crate) fn vec_norm<T: Real>(v: &[C<T>]) -> T {
    v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

/// `⟨a|b⟩`.
pub fn inner<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    a.iter().zip(b).fold(czero(), |acc, (x, y)| acc + x.conj() * y)
}

/// Compressed-sparse-row complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C<T>>,
}

impl<T: Real> SparseMatrix<T> {
    /// Builds from `(row, col, value)` triplets; duplicates are summed, exact zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C<T>)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C<T>> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet index out of range");
            if last == Some((r, c)) {
                let l = vals.len() - 1;
                vals[l] = vals[l] + v;
                continue;
            }
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut m = Self { dim, row_ptr, cols, vals };
        m.prune();
        m
    }

    fn prune(&mut self) {
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[k] != czero() {
                    cols.push(self.cols[k]);
                    vals.push(self.vals[k]);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, C::new(T::one(), T::zero()))).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C<T>)> + '_ {
        (0..self.dim).flat_map(move |r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k])))
    }

    /// `y += coef · M x`.
    #[inline]
    pub fn apply_add(&self, coef: C<T>, x: &[C<T>], y: &mut [C<T>]) {
        for r in 0..self.dim {
            let mut acc = czero::<T>();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc = acc + self.vals[k] * x[self.cols[k]];
            }
            y[r] = y[r] + coef * acc;
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut trip = Vec::new();
        for (r, k, a) in self.triplets() {
            for kk in other.row_ptr[k]..other.row_ptr[k + 1] {
                trip.push((r, other.cols[kk], a * other.vals[kk]));
            }
        }
        Self::from_triplets(self.dim, trip)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(C::new(T::one(), T::zero()), other)
    }

    pub fn add_scaled(&self, coef: C<T>, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut trip: Vec<_> = self.triplets().collect();
        trip.extend(other.triplets().map(|(r, c, v)| (r, c, coef * v)));
        Self::from_triplets(self.dim, trip)
    }

    pub fn scale(&self, coef: C<T>) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (r, c, coef * v)).collect())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect())
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let d = other.dim;
        let mut trip = Vec::with_capacity(self.nnz() * other.nnz());
        for (r1, c1, v1) in self.triplets() {
            for (r2, c2, v2) in other.triplets() {
                trip.push((r1 * d + r2, c1 * d + c2, v1 * v2));
            }
        }
        Self::from_triplets(self.dim * d, trip)
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut m = DenseMatrix::zeros(self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = m[(r, c)] + v;
        }
        m
    }
}

/// Row-major square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    dim: usize,
    data: Vec<C<T>>,
}

impl<T: Real> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = C<T>;
    fn index(&self, (r, c): (usize, usize)) -> &C<T> {
        &self.data[r * self.dim + c]
    }
}

impl<T: Real> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C<T> {
        &mut self.data[r * self.dim + c]
    }
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![czero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut m = Self::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == czero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j] + a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn apply(&self, x: &[C<T>]) -> Vec<C<T>> {
        let n = self.dim;
        (0..n).map(|i| (0..n).fold(czero(), |acc, j| acc + self.data[i * n + j] * x[j])).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)].conj())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { dim: self.dim, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { dim: self.dim, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    pub fn frobenius_norm(&self) -> T {
        vec_norm(&self.data)
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> T {
        (0..self.dim)
            .map(|c| (0..self.dim).fold(T::zero(), |acc, r| acc + self[(r, c)].norm()))
            .fold(T::zero(), T::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(T::zero(), T::max)
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Matrix exponential by scaling and squaring of a Taylor series.
    pub fn expm(&self) -> Self {
        let norm = self.one_norm();
        let mut squarings = 0u32;
        let half = T::lit(0.5);
        let mut scaled_norm = norm;
        while scaled_norm > half {
            scaled_norm = scaled_norm * half;
            squarings += 1;
        }
        let a = self.scale(C::new(T::lit(0.5).powi(squarings as i32), T::zero()));
        let mut result = Self::identity(self.dim);
        let mut term = Self::identity(self.dim);
        for k in 1..=40 {
            term = term.matmul(&a).scale(C::new(T::one() / T::from_usize_lossy(k), T::zero()));
            result = result.add(&term);
            if term.one_norm() <= T::epsilon() * result.one_norm() * T::lit(0.1) {
                break;
            }
        }
        for _ in 0..squarings {
            result = result.matmul(&result);
        }
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_apply_matches_dense() {
        let m = SparseMatrix::<f64>::from_triplets(
            3,
            vec![(0, 1, C::new(1.0, 2.0)), (2, 0, C::new(-0.5, 0.0)), (0, 1, C::new(1.0, 0.0)), (1, 1, C::new(0.0, 0.0))],
        );
        assert_eq!(m.nnz(), 2);
        let x = vec![C::new(1.0, 0.0), C::new(0.0, 1.0), C::new(2.0, -1.0)];
        let mut y = vec![czero(); 3];
        m.apply_add(C::new(1.0, 0.0), &x, &mut y);
        assert_eq!(y, m.to_dense().apply(&x));
        assert_eq!(y[0], C::new(2.0, 2.0) * C::new(0.0, 1.0));
    }

    #[test]
    fn expm_of_pauli_rotation() {
        // exp(-i θ σx) = cos θ - i sin θ σx
        let theta = 2.7_f64;
        let m = DenseMatrix::from_fn(2, |r, c| if r != c { C::new(0.0, -theta) } else { czero() });
        let e = m.expm();
        assert!((e[(0, 0)] - C::new(theta.cos(), 0.0)).norm() < 1e-14);
        assert!((e[(0, 1)] - C::new(0.0, -theta.sin())).norm() < 1e-14);
    }

    #[test]
    fn kron_dimensions_and_values() {
        let x = SparseMatrix::<f64>::from_triplets(2, vec![(0, 1, C::new(1.0, 0.0)), (1, 0, C::new(1.0, 0.0))]);
        let i = SparseMatrix::<f64>::identity(3);
        let k = x.kron(&i);
        assert_eq!(k.dim(), 6);
        assert_eq!(k.to_dense()[(0, 3)], C::new(1.0, 0.0));
        assert_eq!(k.to_dense()[(4, 1)], C::new(1.0, 0.0));
    }
}
