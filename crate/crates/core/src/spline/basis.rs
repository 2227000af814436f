use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// B-splines of order `r` (degree `r − 1`) on `[0, 1]` with `N` equi-spaced
/// interior knots. The knot vector repeats each boundary knot `r` times, so
/// there are `K = N + r` basis functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineBasis1D {
    order: usize,
    interior_knots: usize,
    knots: Vec<f64>,
}

impl BSplineBasis1D {
    pub fn new(order: usize, interior_knots: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("spline order must be at least 1"));
        }
        let mut knots = Vec::with_capacity(interior_knots + 2 * order);
        knots.extend(std::iter::repeat_n(0.0, order));
        knots.extend((1..=interior_knots).map(|l| l as f64 / (interior_knots + 1) as f64));
        knots.extend(std::iter::repeat_n(1.0, order));
        Ok(BSplineBasis1D {
            order,
            interior_knots,
            knots,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn interior_knots(&self) -> usize {
        self.interior_knots
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions, `N + r`.
    pub fn dim(&self) -> usize {
        self.interior_knots + self.order
    }

    /// `(B_1(x), …, B_K(x))` by the Cox–de Boor recursion with `0/0 := 0`.
    ///
    /// Order-one indicators use half-open intervals `[t_k, t_{k+1})`, except
    /// that `x = 1` falls in the last non-degenerate interval, which gives the
    /// left limit at the right endpoint.
    pub fn evaluate(&self, x: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("spline argument {x} outside [0, 1]")));
        }
        Ok(self.evaluate_unchecked(x))
    }

    pub(crate) fn evaluate_unchecked(&self, x: f64) -> Vec<f64> {
        let t = &self.knots;
        let r = self.order;
        let len = t.len();
        // Zero-based: B_{k,1} = 1 on [t[k], t[k+1]) for k in 0..len-1.
        let mut b = vec![0.0; len - 1];
        let span = if x >= 1.0 {
            // last interval with t[k] < t[k+1]
            (0..len - 1).rev().find(|&k| t[k] < t[k + 1]).unwrap()
        } else {
            (0..len - 1).find(|&k| t[k] <= x && x < t[k + 1]).unwrap()
        };
        b[span] = 1.0;
        for s in 2..=r {
            for k in 0..len - s {
                let left_den = t[k + s - 1] - t[k];
                let right_den = t[k + s] - t[k + 1];
                let left = if left_den == 0.0 {
                    0.0
                } else {
                    (x - t[k]) / left_den * b[k]
                };
                let right = if right_den == 0.0 {
                    0.0
                } else {
                    (t[k + s] - x) / right_den * b[k + 1]
                };
                b[k] = left + right;
            }
        }
        b.truncate(self.dim());
        b
    }
}

/// Convenience wrapper around [`BSplineBasis1D::evaluate`].
pub fn basis_vector(basis: &BSplineBasis1D, x: f64) -> Result<Vec<f64>> {
    basis.evaluate(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn knot_vector_layout() {
        let b = BSplineBasis1D::new(3, 3).unwrap();
        assert_eq!(b.knots(), &[0.0, 0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0, 1.0]);
        assert_eq!(b.dim(), 6);
        assert!(BSplineBasis1D::new(0, 2).is_err());
    }

    #[test]
    fn order_one_single_interval() {
        let b = BSplineBasis1D::new(1, 0).unwrap();
        for x in [0.0, 0.3, 1.0] {
            assert_eq!(b.evaluate(x).unwrap(), vec![1.0]);
        }
    }

    #[test]
    fn linear_hats_by_hand() {
        // r = 2, N = 0: t = (0, 0, 1, 1). Unrolled recursion:
        // B_{1,2}(x) = 0/0·… + (1 − x)/(1 − 0)·1 = 1 − x, B_{2,2}(x) = x.
        let b = BSplineBasis1D::new(2, 0).unwrap();
        let v = b.evaluate(0.25).unwrap();
        assert_abs_diff_eq!(v[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn right_endpoint_is_left_limit() {
        for (r, n) in [(1, 3), (2, 2), (4, 5)] {
            let b = BSplineBasis1D::new(r, n).unwrap();
            let at_one = b.evaluate(1.0).unwrap();
            let near = b.evaluate(1.0 - 1e-12).unwrap();
            for (a, c) in at_one.iter().zip(&near) {
                assert_abs_diff_eq!(a, c, epsilon = 1e-9);
            }
            assert_abs_diff_eq!(at_one.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn domain_error() {
        let b = BSplineBasis1D::new(3, 2).unwrap();
        assert!(matches!(b.evaluate(1.5), Err(Error::Domain(_))));
        assert!(matches!(b.evaluate(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn local_support() {
        let b = BSplineBasis1D::new(3, 4).unwrap();
        let t = b.knots().to_vec();
        for i in 0..=200 {
            let x = i as f64 / 200.0;
            let v = b.evaluate(x).unwrap();
            for (k, bk) in v.iter().enumerate() {
                if x < t[k] || x > t[k + 3] {
                    assert_eq!(*bk, 0.0, "B_{k} nonzero at {x}");
                }
            }
        }
    }
}
