use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::basis::BSplineBasis1D;
use super::rescale::UnitMap;
use super::tensor::TensorBasis;
use crate::error::{Error, Result};

/// How raw predictor columns are brought onto `[0, 1]` before evaluating
/// B-splines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnitScaling {
    /// Inputs must already lie in `[0, 1]`.
    None,
    /// Per-column min–max map fitted on the training rows.
    MinMax,
    /// Empirical CDF of the training rows, linearly interpolated.
    Rank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplineLayout {
    /// One univariate basis per column, summed.
    Additive,
    /// Full tensor product over the spline columns.
    Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Scaler {
    Identity,
    MinMax(UnitMap),
    Rank(Vec<Vec<f64>>),
}

fn rank_unit(sorted: &[f64], v: f64) -> f64 {
    let n = sorted.len();
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    if hi <= lo {
        return 0.5;
    }
    if v <= lo {
        return 0.0;
    }
    if v >= hi {
        return 1.0;
    }
    let i = sorted.partition_point(|a| *a <= v);
    let (a, b) = (sorted[i - 1], sorted[i]);
    ((i - 1) as f64 + (v - a) / (b - a)) / (n - 1) as f64
}

impl Scaler {
    fn fit(kind: UnitScaling, cols: &DMatrix<f64>) -> Self {
        match kind {
            UnitScaling::None => Scaler::Identity,
            UnitScaling::MinMax => Scaler::MinMax(UnitMap::fit(cols)),
            UnitScaling::Rank => Scaler::Rank(
                cols.column_iter()
                    .map(|c| {
                        let mut v: Vec<f64> = c.iter().copied().collect();
                        v.sort_unstable_by(f64::total_cmp);
                        v
                    })
                    .collect(),
            ),
        }
    }

    fn apply(&self, j: usize, v: f64) -> Result<f64> {
        match self {
            Scaler::Identity => {
                if (0.0..=1.0).contains(&v) {
                    Ok(v)
                } else {
                    Err(Error::Domain(format!("spline input {v} outside [0, 1]")))
                }
            }
            Scaler::MinMax(map) => Ok(map.apply_value(j, v)),
            Scaler::Rank(sorted) => Ok(rank_unit(&sorted[j], v)),
        }
    }
}

/// Feature map turning raw predictors into B-spline regressors: spline
/// columns (additive blocks or one tensor block) followed by any columns kept
/// linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineFeatures {
    axes: TensorBasis,
    layout: SplineLayout,
    spline_cols: Vec<usize>,
    linear_cols: Vec<usize>,
    scaler: Scaler,
    n_inputs: usize,
}

impl SplineFeatures {
    /// Fit the scaling on `design`. `spline_cols = None` expands every column.
    pub fn fit(
        design: &DMatrix<f64>,
        order: usize,
        interior_knots: usize,
        layout: SplineLayout,
        scaling: UnitScaling,
        spline_cols: Option<&[usize]>,
    ) -> Result<Self> {
        let p = design.ncols();
        let spline_cols: Vec<usize> = match spline_cols {
            Some(cols) => {
                if let Some(bad) = cols.iter().find(|&&j| j >= p) {
                    return Err(Error::invalid(format!(
                        "spline column {bad} out of range for {p} predictors"
                    )));
                }
                cols.to_vec()
            }
            None => (0..p).collect(),
        };
        let linear_cols = (0..p).filter(|j| !spline_cols.contains(j)).collect();
        let axes = TensorBasis::uniform(order, interior_knots, spline_cols.len())?;
        let scaler = Scaler::fit(scaling, &design.select_columns(&spline_cols));
        Ok(SplineFeatures {
            axes,
            layout,
            spline_cols,
            linear_cols,
            scaler,
            n_inputs: p,
        })
    }

    /// Tensor basis over inputs that already lie in the unit cube.
    pub fn tensor(basis: TensorBasis) -> Self {
        let d = basis.ndim();
        SplineFeatures {
            axes: basis,
            layout: SplineLayout::Tensor,
            spline_cols: (0..d).collect(),
            linear_cols: Vec::new(),
            scaler: Scaler::Identity,
            n_inputs: d,
        }
    }

    pub fn layout(&self) -> SplineLayout {
        self.layout
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn basis(&self) -> &TensorBasis {
        &self.axes
    }

    fn spline_dim(&self) -> usize {
        match self.layout {
            SplineLayout::Additive => self.axes.axes().iter().map(BSplineBasis1D::dim).sum(),
            SplineLayout::Tensor => {
                if self.spline_cols.is_empty() {
                    0
                } else {
                    self.axes.dim()
                }
            }
        }
    }

    /// Number of generated features.
    pub fn dim(&self) -> usize {
        self.spline_dim() + self.linear_cols.len()
    }

    /// For the additive layout, the feature range generated by each input
    /// column. `None` for tensor layouts with more than one spline column,
    /// where features mix inputs.
    pub fn blocks(&self) -> Option<Vec<(usize, Range<usize>)>> {
        let mut out = Vec::new();
        let mut start = 0;
        match self.layout {
            SplineLayout::Tensor if self.spline_cols.len() > 1 => return None,
            _ => {
                for (axis, &j) in self.axes.axes().iter().zip(&self.spline_cols) {
                    out.push((j, start..start + axis.dim()));
                    start += axis.dim();
                }
            }
        }
        for &j in &self.linear_cols {
            out.push((j, start..start + 1));
            start += 1;
        }
        Some(out)
    }

    pub fn expand(&self, design: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if design.ncols() != self.n_inputs {
            return Err(Error::invalid(format!(
                "design has {} columns, spline features expect {}",
                design.ncols(),
                self.n_inputs
            )));
        }
        let n = design.nrows();
        let mut out = DMatrix::zeros(n, self.dim());
        let mut unit = vec![0.0; self.spline_cols.len()];
        let spline_dim = self.spline_dim();
        for i in 0..n {
            for (k, &j) in self.spline_cols.iter().enumerate() {
                unit[k] = self.scaler.apply(k, design[(i, j)])?;
            }
            match self.layout {
                SplineLayout::Additive => {
                    let mut c = 0;
                    for (axis, u) in self.axes.axes().iter().zip(&unit) {
                        for b in axis.evaluate_unchecked(*u) {
                            out[(i, c)] = b;
                            c += 1;
                        }
                    }
                }
                SplineLayout::Tensor => {
                    if !unit.is_empty() {
                        for (c, b) in self.axes.evaluate_unchecked(&unit).into_iter().enumerate() {
                            out[(i, c)] = b;
                        }
                    }
                }
            }
            for (k, &j) in self.linear_cols.iter().enumerate() {
                out[(i, spline_dim + k)] = design[(i, j)];
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rank_map_interpolates() {
        let s = [1.0, 2.0, 4.0];
        assert_eq!(rank_unit(&s, 1.0), 0.0);
        assert_eq!(rank_unit(&s, 4.0), 1.0);
        assert_eq!(rank_unit(&s, 2.0), 0.5);
        assert_abs_diff_eq!(rank_unit(&s, 3.0), 0.75, epsilon = 1e-15);
        assert_eq!(rank_unit(&s, 9.0), 1.0);
        assert_eq!(rank_unit(&[3.0, 3.0], 3.0), 0.5);
    }

    #[test]
    fn additive_blocks_and_linear_tail() {
        let d = DMatrix::from_row_slice(3, 3, &[0.0, 5.0, 1.0, 0.5, 6.0, 2.0, 1.0, 7.0, 3.0]);
        let f = SplineFeatures::fit(&d, 2, 1, SplineLayout::Additive, UnitScaling::MinMax, Some(&[0, 2])).unwrap();
        assert_eq!(f.dim(), 3 + 3 + 1);
        let blocks = f.blocks().unwrap();
        assert_eq!(blocks, vec![(0, 0..3), (2, 3..6), (1, 6..7)]);
        let e = f.expand(&d).unwrap();
        assert_eq!(e[(1, 6)], 6.0);
        for i in 0..3 {
            assert_abs_diff_eq!(e.row(i).columns(0, 3).sum(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn identity_scaler_rejects_out_of_cube() {
        let tb = TensorBasis::uniform(2, 1, 1).unwrap();
        let f = SplineFeatures::tensor(tb);
        let d = DMatrix::from_column_slice(2, 1, &[0.2, 1.2]);
        assert!(matches!(f.expand(&d), Err(Error::Domain(_))));
    }
}
