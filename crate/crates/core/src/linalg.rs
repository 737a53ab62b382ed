//! Tridiagonal solves and inertia counts.

use std::ops::{Add, Div, Mul, Sub};

use num_complex::Complex64;

/// Thomas factorisation of a tridiagonal matrix with sub/super diagonals
/// `lower[i] = A[i+1][i]`, `upper[i] = A[i][i+1]`. Valid without pivoting for
/// diagonally dominant or symmetric positive definite matrices.
#[derive(Debug, Clone)]
pub struct Tridiag<T> {
    lower: Vec<T>,
    // Modified super diagonal c'_i and inverse pivots 1/b'_i.
    cp: Vec<T>,
    inv_piv: Vec<T>,
}

pub trait Field:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn one() -> Self;
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl Field for f64 {
    fn one() -> Self {
        1.0
    }
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Field for Complex64 {
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

impl<T: Field> Tridiag<T> {
    /// Returns None if a pivot vanishes.
    pub fn factor(lower: &[T], diag: &[T], upper: &[T]) -> Option<Self> {
        let n = diag.len();
        assert!(lower.len() + 1 == n && upper.len() + 1 == n);
        let mut cp = vec![T::zero(); n.saturating_sub(1)];
        let mut inv_piv = vec![T::zero(); n];
        let mut piv = diag[0];
        for i in 0..n {
            if i > 0 {
                piv = diag[i] - lower[i - 1] * cp[i - 1];
            }
            if piv.magnitude() == 0.0 || !piv.magnitude().is_finite() {
                return None;
            }
            inv_piv[i] = T::one() / piv;
            if i + 1 < n {
                cp[i] = upper[i] * inv_piv[i];
            }
        }
        Some(Tridiag {
            lower: lower.to_vec(),
            cp,
            inv_piv,
        })
    }

    pub fn solve_in_place(&self, x: &mut [T]) {
        let n = x.len();
        x[0] = x[0] * self.inv_piv[0];
        for i in 1..n {
            x[i] = (x[i] - self.lower[i - 1] * x[i - 1]) * self.inv_piv[i];
        }
        for i in (0..n - 1).rev() {
            x[i] = x[i] - self.cp[i] * x[i + 1];
        }
    }
}

/// Number of negative pivots of the LDL^T factorisation of the symmetric
/// tridiagonal matrix (diag - shift, off). By Sylvester's law of inertia this
/// is the number of eigenvalues below `shift`.
pub fn count_below(diag: &[f64], off: &[f64], shift: f64) -> usize {
    let mut count = 0;
    let mut d = diag[0] - shift;
    for i in 0..diag.len() {
        if i > 0 {
            let prev = if d == 0.0 { f64::MIN_POSITIVE } else { d };
            d = diag[i] - shift - off[i - 1] * off[i - 1] / prev;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// y = A x for a symmetric tridiagonal matrix.
pub fn sym_matvec(diag: &[f64], off: &[f64], x: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = diag[i] * x[i];
        if i > 0 {
            s += off[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            s += off[i] * x[i + 1];
        }
        y[i] = s;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_count_below(diag: &[f64], off: &[f64], shift: f64) -> usize {
        // Sturm sequence via the characteristic polynomial recurrence.
        let n = diag.len();
        let mut p_prev = 1.0;
        let mut p = diag[0] - shift;
        let mut changes = if p < 0.0 { 1 } else { 0 };
        for i in 1..n {
            let next = (diag[i] - shift) * p - off[i - 1] * off[i - 1] * p_prev;
            if (next < 0.0) != (p < 0.0) {
                changes += 1;
            }
            p_prev = p;
            p = next;
        }
        changes
    }

    #[test]
    fn solves_laplacian() {
        let n = 50;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = sym_matvec(&diag, &off, &x);
        Tridiag::factor(&off, &diag, &off).unwrap().solve_in_place(&mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-11);
        }
    }

    #[test]
    fn complex_solve_round_trip() {
        let n = 40;
        let diag: Vec<Complex64> = (0..n).map(|i| Complex64::new(3.0, 0.1 * i as f64)).collect();
        let off: Vec<Complex64> = (0..n - 1).map(|_| Complex64::new(0.0, -1.0)).collect();
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let mut b: Vec<Complex64> = (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += off[i] * x[i + 1];
                }
                s
            })
            .collect();
        Tridiag::factor(&off, &diag, &off).unwrap().solve_in_place(&mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).norm() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn inertia_matches_sturm(seed in proptest::collection::vec(-1.0f64..1.0, 24), shift in -2.0f64..2.0) {
            let diag: Vec<f64> = seed[..12].iter().map(|x| 2.0 * x).collect();
            let off: Vec<f64> = seed[12..23].iter().map(|x| x + 0.05).collect();
            prop_assert_eq!(count_below(&diag, &off, shift), dense_count_below(&diag, &off, shift));
        }
    }
}
