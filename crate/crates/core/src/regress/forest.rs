use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_leaf: usize,
    pub mtry_fraction: f64,
    pub max_depth: Option<usize>,
    /// Grow each tree on a bootstrap resample; `false` uses every row once.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            min_leaf: 5,
            mtry_fraction: 1.0 / 3.0,
            max_depth: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("forest needs at least one tree"));
        }
        if self.min_leaf == 0 {
            return Err(Error::invalid("forest min_leaf must be at least 1"));
        }
        if !(self.mtry_fraction > 0.0 && self.mtry_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "forest mtry fraction must lie in (0, 1], got {}",
                self.mtry_fraction
            )));
        }
        Ok(())
    }

    fn mtry(&self, p: usize) -> usize {
        ((self.mtry_fraction * p as f64).floor() as usize).clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict_row(&self, row: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => k = if row[feature] <= threshold { left } else { right },
            }
        }
    }
}

/// Bagged CART regression trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
    n_features: usize,
}

impl Forest {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn predict(&self, design: &DMatrix<f64>) -> DVector<f64> {
        let n = design.nrows();
        let mut row = vec![0.0; design.ncols()];
        DVector::from_iterator(
            n,
            (0..n).map(|i| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = design[(i, j)];
                }
                self.trees.iter().map(|t| t.predict_row(&row)).sum::<f64>() / self.trees.len() as f64
            }),
        )
    }
}

/// Fit a forest; tree `t` draws from `stream.derive(t)`, so the result does
/// not depend on how rayon schedules the trees.
pub(crate) fn fit_forest(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    params: &ForestParams,
    stream: RngStream,
) -> Result<Forest> {
    params.validate()?;
    let (n, p) = design.shape();
    if n == 0 {
        return Err(Error::invalid("forest needs at least one observation"));
    }
    let columns: Vec<Vec<f64>> = design.column_iter().map(|c| c.iter().copied().collect()).collect();
    let y: Vec<f64> = y.iter().copied().collect();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream.derive(t as u64).rng();
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(&columns, &y, rows, params, p, &mut rng)
        })
        .collect();
    Ok(Forest { trees, n_features: p })
}

struct Pending {
    node: usize,
    rows: Vec<usize>,
    depth: usize,
}

fn grow(
    columns: &[Vec<f64>],
    y: &[f64],
    rows: Vec<usize>,
    params: &ForestParams,
    p: usize,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let mut nodes = vec![Node::Leaf(0.0)];
    let mut stack = vec![Pending {
        node: 0,
        rows,
        depth: 0,
    }];
    let mtry = params.mtry(p);
    while let Some(Pending { node, rows, depth }) = stack.pop() {
        let mean = rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64;
        let can_split = p > 0
            && rows.len() >= 2 * params.min_leaf
            && params.max_depth.is_none_or(|d| depth < d)
            && rows.iter().any(|&i| y[i] != y[rows[0]]);
        let best = if can_split {
            let features = sample(rng, p, mtry);
            best_split(columns, y, &rows, features.iter(), params.min_leaf)
        } else {
            None
        };
        match best {
            None => nodes[node] = Node::Leaf(mean),
            Some((feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| columns[feature][i] <= threshold);
                let left = nodes.len();
                nodes.push(Node::Leaf(0.0));
                nodes.push(Node::Leaf(0.0));
                nodes[node] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right: left + 1,
                };
                stack.push(Pending {
                    node: left,
                    rows: l,
                    depth: depth + 1,
                });
                stack.push(Pending {
                    node: left + 1,
                    rows: r,
                    depth: depth + 1,
                });
            }
        }
    }
    Tree { nodes }
}

/// Variance-reduction split: maximise `S_L²/n_L + S_R²/n_R` over thresholds
/// leaving at least `min_leaf` rows on each side.
fn best_split(
    columns: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    features: impl Iterator<Item = usize>,
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = rows.len();
    let total: f64 = rows.iter().map(|&i| y[i]).sum();
    let base = total * total / n as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for f in features {
        let col = &columns[f];
        pairs.clear();
        pairs.extend(rows.iter().map(|&i| (col[i], y[i])));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_sum = 0.0;
        for k in 1..n {
            left_sum += pairs[k - 1].1;
            if k < min_leaf || n - k < min_leaf || pairs[k - 1].0 == pairs[k].0 {
                continue;
            }
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64;
            if score > base * (1.0 + 1e-12) + 1e-300 && best.is_none_or(|b| score > b.0) {
                let (lo, hi) = (pairs[k - 1].0, pairs[k].0);
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some((score, f, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

impl Forest {
    pub(crate) fn n_features(&self) -> usize {
        self.n_features
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_split_on_step() {
        let x = DMatrix::from_column_slice(6, 1, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let params = ForestParams {
            n_trees: 1,
            min_leaf: 1,
            mtry_fraction: 1.0,
            max_depth: Some(1),
            bootstrap: false,
        };
        let f = fit_forest(&x, &y, &params, RngStream::new(1)).unwrap();
        let pred = f.predict(&x);
        assert_eq!(pred.as_slice(), y.as_slice());
        assert_eq!(f.trees[0].nodes.len(), 3);
    }

    #[test]
    fn mtry_bounds() {
        let p = ForestParams::default();
        assert_eq!(p.mtry(1), 1);
        assert_eq!(p.mtry(8), 2);
        assert_eq!(p.mtry(9), 3);
    }

    #[test]
    fn invalid_params() {
        let p = ForestParams { mtry_fraction: 0.0, ..ForestParams::default() };
        assert!(p.validate().is_err());
        let p = ForestParams { n_trees: 0, ..ForestParams::default() };
        assert!(p.validate().is_err());
    }
}
