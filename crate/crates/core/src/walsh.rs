//! Walsh sign sequences for the decoupling drive.
//!
//! Sequences are Paley-ordered: the order-`2^r - 1` function is the product
//! of the first `r` Rademacher functions on `[0, T]`. Its sign on the `j`-th
//! of the `2^r` equal cells is `(-1)^popcount(j)`, so the order-7 sequence
//! reads `+ - - + - + + -`. That product form is what makes the order-`2^r - 1`
//! sequence annihilate every polynomial drift of degree below `r`.
//!
//! The indexing convention is inferred from the cancellation orders quoted for
//! the experiment (1 kills constants, 3 adds linear, 7 adds quadratic, 15 adds
//! cubic drifts). Sequency ordering would give different functions at the same
//! indices.
//!
//! The type is generic over the time scalar so that moment integrals can be
//! evaluated in exact rational arithmetic (see [`crate::ExactWalsh`]).

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num};
use thiserror::Error;

/// Orders for which a sequence can be built.
pub const SUPPORTED_ORDERS: [u32; 5] = [0, 1, 3, 7, 15];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WalshError {
    #[error("unsupported Walsh order {0}; allowed orders are 0, 1, 3, 7, 15")]
    UnsupportedOrder(u32),
    #[error("sequence duration must be positive")]
    NonPositiveDuration,
    #[error("time {0} lies outside [0, duration]")]
    OutOfRange(String),
}

/// Scalar usable as a time coordinate for Walsh sequences.
pub trait WalshScalar: Num + Clone + PartialOrd + FromPrimitive + Debug {}

impl<T: Num + Clone + PartialOrd + FromPrimitive + Debug> WalshScalar for T {}

/// Piecewise-constant ±1 sign function on `[0, duration]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalshSequence<T> {
    order: u32,
    duration: T,
    switch_times: Vec<T>,
}

/// Builds the Paley Walsh sequence of the given order on `[0, duration]`.
pub fn make_walsh<T: WalshScalar>(order: u32, duration: T) -> Result<WalshSequence<T>, WalshError> {
    WalshSequence::new(order, duration)
}

impl<T: WalshScalar> WalshSequence<T> {
    pub fn new(order: u32, duration: T) -> Result<Self, WalshError> {
        if !SUPPORTED_ORDERS.contains(&order) {
            return Err(WalshError::UnsupportedOrder(order));
        }
        if duration <= T::zero() {
            return Err(WalshError::NonPositiveDuration);
        }
        let cells = (order + 1) as u64;
        let mut switch_times = Vec::new();
        for j in 1..cells {
            // sign on cell j differs from cell j-1 iff their popcount parities differ
            if (j.count_ones() + (j - 1).count_ones()) % 2 == 1 {
                switch_times.push(cell_edge(&duration, j, cells));
            }
        }
        Ok(Self { order, duration, switch_times })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn duration(&self) -> &T {
        &self.duration
    }

    /// Number of Rademacher factors, `r` for order `2^r - 1`.
    pub fn rank(&self) -> u32 {
        (self.order + 1).trailing_zeros()
    }

    /// Times in `(0, duration)` where the sign changes, ascending.
    pub fn switch_times(&self) -> &[T] {
        &self.switch_times
    }

    /// The `2^r` equal dyadic cells `(start, end, sign)` covering `[0, duration]`.
    pub fn cells(&self) -> Vec<(T, T, i8)> {
        let n = (self.order + 1) as u64;
        (0..n)
            .map(|j| {
                let sign = if j.count_ones() % 2 == 0 { 1 } else { -1 };
                (cell_edge(&self.duration, j, n), cell_edge(&self.duration, j + 1, n), sign)
            })
            .collect()
    }

    /// Sign at `t`, right-continuous at switches; the endpoint takes the left limit.
    pub fn sign_at(&self, t: &T) -> Result<i8, WalshError> {
        if *t < T::zero() || *t > self.duration {
            return Err(WalshError::OutOfRange(format!("{t:?}")));
        }
        let flips = self.switch_times.partition_point(|s| s <= t);
        Ok(if flips % 2 == 0 { 1 } else { -1 })
    }

    /// Piecewise intervals `(start, end, sign)` between consecutive switches.
    pub fn pieces(&self) -> Vec<(T, T, i8)> {
        let mut out = Vec::with_capacity(self.switch_times.len() + 1);
        let mut start = T::zero();
        let mut sign = 1i8;
        for s in &self.switch_times {
            out.push((start, s.clone(), sign));
            start = s.clone();
            sign = -sign;
        }
        out.push((start, self.duration.clone(), sign));
        out
    }

    /// Exact value of `∫_0^T t^m s(t) dt`, integrated piecewise in closed form.
    pub fn moment_integral(&self, m: u32) -> T {
        let k = m as usize + 1;
        let denom = T::from_usize(k).expect("moment index representable");
        self.pieces().into_iter().fold(T::zero(), |acc, (a, b, sign)| {
            let piece = (num_traits::pow(b, k) - num_traits::pow(a, k)) / denom.clone();
            if sign > 0 {
                acc + piece
            } else {
                acc - piece
            }
        })
    }
}

fn cell_edge<T: WalshScalar>(duration: &T, j: u64, cells: u64) -> T {
    let jj = T::from_u64(j).expect("cell index representable");
    let nn = T::from_u64(cells).expect("cell count representable");
    duration.clone() * jj / nn
}

/// Exact moments `∫_0^1 t^m s(t) dt` for `m = 0..=max_moment` on the unit interval.
pub fn unit_moments(order: u32, max_moment: u32) -> Result<Vec<num_rational::BigRational>, WalshError> {
    let w = crate::ExactWalsh::new(order, num_rational::BigRational::from_integer(1.into()))?;
    Ok((0..=max_moment).map(|m| w.moment_integral(m)).collect())
}
