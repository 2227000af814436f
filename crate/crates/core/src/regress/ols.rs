use nalgebra::{DMatrix, DVector};

/// Minimum-norm least-squares solution `y ≈ intercept + design · coef`.
#[derive(Debug, Clone)]
pub(crate) struct LeastSquares {
    pub coef: DVector<f64>,
    pub intercept: f64,
    pub rank: usize,
    pub constant_columns: Vec<usize>,
}

pub(crate) fn constant_columns(design: &DMatrix<f64>) -> Vec<usize> {
    design
        .column_iter()
        .enumerate()
        .filter(|(_, c)| c.iter().all(|v| *v == c[0]))
        .map(|(j, _)| j)
        .collect()
}

/// Pseudo-inverse solution via a thin SVD. With `intercept`, the design and
/// response are centred first; constant columns then vanish and get a zero
/// coefficient, so the intercept absorbs their contribution.
pub(crate) fn least_squares(design: &DMatrix<f64>, y: &DVector<f64>, intercept: bool) -> LeastSquares {
    let (n, p) = design.shape();
    let y_mean = if !intercept {
        0.0
    } else if y.iter().all(|v| *v == y[0]) {
        y[0]
    } else {
        y.mean()
    };
    if p == 0 {
        return LeastSquares {
            coef: DVector::zeros(0),
            intercept: y_mean,
            rank: 0,
            constant_columns: Vec::new(),
        };
    }
    let constant = if intercept { constant_columns(design) } else { Vec::new() };
    let mut x = design.clone();
    let mut means = vec![0.0; p];
    if intercept {
        for (j, mut col) in x.column_iter_mut().enumerate() {
            if constant.contains(&j) {
                col.fill(0.0);
                continue;
            }
            means[j] = col.mean();
            col.add_scalar_mut(-means[j]);
        }
    }
    let yc = y.add_scalar(-y_mean);

    let svd = x.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * n.max(p) as f64 * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    let mut coef = if smax == 0.0 {
        DVector::zeros(p)
    } else {
        svd.solve(&yc, tol).expect("U and V were computed")
    };
    for &j in &constant {
        coef[j] = 0.0;
    }
    let shift: f64 = means.iter().zip(coef.iter()).map(|(m, b)| m * b).sum();
    LeastSquares {
        coef,
        intercept: y_mean - shift,
        rank,
        constant_columns: constant,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_line() {
        let x = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let fit = least_squares(&x, &y, true);
        assert_abs_diff_eq!(fit.coef[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 1.0, epsilon = 1e-12);
        assert_eq!(fit.rank, 1);
    }

    #[test]
    fn constant_column_gets_zero() {
        let x = DMatrix::from_column_slice(3, 2, &[1.0, 1.0, 1.0, 0.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![2.0, 4.0, 6.0]);
        let fit = least_squares(&x, &y, true);
        assert_eq!(fit.constant_columns, vec![0]);
        assert_eq!(fit.coef[0], 0.0);
        assert_abs_diff_eq!(fit.coef[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn all_zero_design() {
        let x = DMatrix::zeros(3, 2);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let fit = least_squares(&x, &y, false);
        assert!(fit.coef.iter().all(|b| *b == 0.0));
        assert_eq!(fit.rank, 0);
    }
}
