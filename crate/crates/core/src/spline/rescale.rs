use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Per-column affine map onto `[0, 1]`, fitted on training data.
///
/// Held-out values outside the training range are clamped. Constant columns
/// map to 0.5 and are listed in [`UnitMap::constant_columns`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitMap {
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

impl UnitMap {
    pub fn fit(points: &DMatrix<f64>) -> Self {
        let (mins, maxs) = points
            .column_iter()
            .map(|c| (c.min(), c.max()))
            .unzip();
        UnitMap { mins, maxs }
    }

    pub fn ncols(&self) -> usize {
        self.mins.len()
    }

    pub fn constant_columns(&self) -> Vec<usize> {
        (0..self.mins.len())
            .filter(|&j| self.maxs[j] <= self.mins[j])
            .collect()
    }

    pub fn apply_value(&self, j: usize, v: f64) -> f64 {
        let (lo, hi) = (self.mins[j], self.maxs[j]);
        if hi <= lo {
            0.5
        } else {
            ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
        }
    }

    pub fn apply(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = points.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            for v in col.iter_mut() {
                *v = self.apply_value(j, *v);
            }
        }
        out
    }

    pub fn invert(&self, unit: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = unit.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (lo, hi) = (self.mins[j], self.maxs[j]);
            for v in col.iter_mut() {
                *v = if hi <= lo { lo } else { lo + *v * (hi - lo) };
            }
        }
        out
    }
}

/// Min–max rescaling of every column onto `[0, 1]`; returns the map for reuse
/// on held-out rows.
pub fn rescale_to_unit(points: &DMatrix<f64>) -> (DMatrix<f64>, UnitMap) {
    let map = UnitMap::fit(points);
    (map.apply(points), map)
}
