//! Balanced random sample splits.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Complementary index pairs `(I1, I2)` over `0..total_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub pairs: Vec<(Vec<usize>, Vec<usize>)>,
    pub total_n: usize,
}

/// Uniformly random balanced partition of `0..n`. `|I1| = ⌈n/2⌉`; both halves
/// are returned sorted.
pub fn split(n: usize, stream: RngStream) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::invalid(format!("cannot split {n} observations")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream.rng());
    let mut first = perm[..n.div_ceil(2)].to_vec();
    let mut second = perm[n.div_ceil(2)..].to_vec();
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

/// `b` independent balanced splits; pair `k` uses the child stream `stream.derive(k)`.
pub fn multi_split(n: usize, b: usize, stream: RngStream) -> Result<SplitPlan> {
    if b == 0 {
        return Err(Error::invalid("number of splits must be at least 1"));
    }
    let pairs = (0..b as u64)
        .map(|k| split(n, stream.derive(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SplitPlan { pairs, total_n: n })
}

/// Random partition of `0..n` into `k` folds whose sizes differ by at most one.
pub fn folds(n: usize, k: usize, stream: RngStream) -> Result<Vec<Vec<usize>>> {
    if k == 0 || n < k {
        return Err(Error::invalid(format!("cannot form {k} folds from {n} observations")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream.rng());
    let base = n / k;
    let extra = n % k;
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = perm[start..start + len].to_vec();
        fold.sort_unstable();
        out.push(fold);
        start += len;
    }
    Ok(out)
}
