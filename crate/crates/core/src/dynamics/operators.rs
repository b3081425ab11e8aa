use num_complex::Complex;

use crate::scalar::Real;

use super::linalg::{SparseMatrix, C};

/// Spin and motion operators on the two-qubit ⊗ Fock product space.
///
/// Basis index is `(2·q1 + q2)·n_max + n` (qubit-major, Fock-minor). Qubit
/// state 0 is the `σ_z = +1` eigenstate.
#[derive(Debug, Clone)]
pub struct OperatorSet<T> {
    pub n_max: usize,
    pub sx_plus: SparseMatrix<T>,
    pub sx_minus: SparseMatrix<T>,
    pub sy_plus: SparseMatrix<T>,
    pub sz: SparseMatrix<T>,
    pub a: SparseMatrix<T>,
    pub a_dag: SparseMatrix<T>,
    pub number: SparseMatrix<T>,
    pub identity: SparseMatrix<T>,
    /// `Ŝ_x,− â`
    pub sx_minus_a: SparseMatrix<T>,
    /// `Ŝ_x,− â†`
    pub sx_minus_a_dag: SparseMatrix<T>,
}

fn c<T: Real>(re: f64, im: f64) -> C<T> {
    Complex::new(T::lit(re), T::lit(im))
}

pub(crate) fn pauli<T: Real>(which: char) -> SparseMatrix<T> {
    let trip = match which {
        'x' => vec![(0, 1, c(1.0, 0.0)), (1, 0, c(1.0, 0.0))],
        'y' => vec![(0, 1, c(0.0, -1.0)), (1, 0, c(0.0, 1.0))],
        'z' => vec![(0, 0, c(1.0, 0.0)), (1, 1, c(-1.0, 0.0))],
        _ => vec![(0, 0, c(1.0, 0.0)), (1, 1, c(1.0, 0.0))],
    };
    SparseMatrix::from_triplets(2, trip)
}

pub(crate) fn annihilation<T: Real>(n_max: usize) -> SparseMatrix<T> {
    SparseMatrix::from_triplets(
        n_max,
        (1..n_max).map(|n| (n - 1, n, Complex::new(T::from_usize_lossy(n).sqrt(), T::zero()))).collect(),
    )
}

impl<T: Real> OperatorSet<T> {
    pub fn new(n_max: usize) -> Self {
        assert!(n_max >= 1, "Fock cutoff must be positive");
        let i2 = pauli::<T>('i');
        let fock_id = SparseMatrix::identity(n_max);
        let spin = |a: &SparseMatrix<T>, b: &SparseMatrix<T>| a.kron(b).kron(&fock_id);
        let one = |p: char| spin(&pauli(p), &i2);
        let two = |p: char| spin(&i2, &pauli(p));
        let minus_one = Complex::new(-T::one(), T::zero());

        let sx_plus = one('x').add(&two('x'));
        let sx_minus = one('x').add_scaled(minus_one, &two('x'));
        let sy_plus = one('y').add(&two('y'));
        let sz = one('z').add(&two('z'));
        let spin_id = SparseMatrix::<T>::identity(4);
        let a_f = annihilation::<T>(n_max);
        let a = spin_id.kron(&a_f);
        let a_dag = spin_id.kron(&a_f.adjoint());
        let number = a_dag.mul(&a);
        let sx_minus_a = sx_minus.mul(&a);
        let sx_minus_a_dag = sx_minus.mul(&a_dag);
        Self {
            n_max,
            identity: SparseMatrix::identity(4 * n_max),
            sx_plus,
            sx_minus,
            sy_plus,
            sz,
            a,
            a_dag,
            number,
            sx_minus_a,
            sx_minus_a_dag,
        }
    }

    pub fn dim(&self) -> usize {
        4 * self.n_max
    }

    pub fn index(&self, q1: usize, q2: usize, n: usize) -> usize {
        (2 * q1 + q2) * self.n_max + n
    }
}
