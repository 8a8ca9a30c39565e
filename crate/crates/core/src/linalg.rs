//! Small dense linear-algebra helpers used by the chain solvers.

use crate::error::{Error, Result};
use crate::scalar::Float;

/// Solves `A x = b` in place by Gaussian elimination with partial pivoting.
///
/// `a` is row-major `n x n`. Returns an error when a pivot is numerically
/// zero, which for our callers means the underlying chain is reducible.
pub(crate) fn solve_linear<F: Float>(a: &mut [F], b: &mut [F], n: usize) -> Result<Vec<F>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let pivot_tol = F::of(1e-13);

    for col in 0..n {
        let mut best = col;
        let mut best_mag = a[col * n + col].abs();
        for row in (col + 1)..n {
            let mag = a[row * n + col].abs();
            if mag > best_mag {
                best = row;
                best_mag = mag;
            }
        }
        if best_mag <= pivot_tol {
            return Err(Error::precondition(format!(
                "singular linear system (pivot {:.3e} at column {col}); \
                 the chain has more than one closed class or a degenerate row",
                best_mag.as_f64()
            )));
        }
        if best != col {
            for k in 0..n {
                a.swap(col * n + k, best * n + k);
            }
            b.swap(col, best);
        }
        let pivot = a[col * n + col];
        for row in (col + 1)..n {
            let factor = a[row * n + col] / pivot;
            if factor == F::zero() {
                continue;
            }
            a[row * n + col] = F::zero();
            for k in (col + 1)..n {
                let upd = a[col * n + k] * factor;
                a[row * n + k] -= upd;
            }
            let upd = b[col] * factor;
            b[row] -= upd;
        }
    }

    let mut x = vec![F::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc = acc - a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Ok(x)
}

/// Ordinary least squares fit `y ≈ intercept + slope * x` with the
/// coefficient of determination.
pub fn affine_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2);
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
        syy += (yi - my) * (yi - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (intercept, slope, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // 2x + y = 5, x - y = 1  ->  x = 2, y = 1
        let mut a: Vec<f64> = vec![2.0, 1.0, 1.0, -1.0];
        let mut b = vec![5.0, 1.0];
        let x = solve_linear(&mut a, &mut b, 2).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_singular_system() {
        let mut a: Vec<f64> = vec![1.0, 2.0, 2.0, 4.0];
        let mut b = vec![1.0, 2.0];
        assert!(solve_linear(&mut a, &mut b, 2).is_err());
    }

    #[test]
    fn affine_fit_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let (b, m, r2) = affine_fit(&x, &y);
        assert!((m - 2.0).abs() < 1e-12);
        assert!((b - 1.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}
