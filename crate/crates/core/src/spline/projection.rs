use crate::error::{Error, Result};

/// `Πβ = β − 1 ⊗ β̄`, where `β̄_k` is the mean of the `k`-th block of `K_X`
/// consecutive entries. Removes the component of a tensor coefficient vector
/// that depends on `Z` alone; every block of the result sums to zero.
pub fn projection_pi(beta: &[f64], kx: usize, kz: usize) -> Result<Vec<f64>> {
    if kx == 0 || beta.len() != kx * kz {
        return Err(Error::invalid(format!(
            "coefficient length {} is not K_X·K_Z = {}·{}",
            beta.len(),
            kx,
            kz
        )));
    }
    let means = block_means(beta, kx);
    Ok(beta
        .chunks(kx)
        .zip(&means)
        .flat_map(|(block, m)| block.iter().map(move |b| b - m))
        .collect())
}

/// `β̄`, the per-block means. A constant block returns its value exactly, so
/// `Π(1 ⊗ v) = 0` without rounding, and a mean within summation rounding of
/// zero is returned as 0, so `Π(Πβ) = Πβ` without rounding.
pub fn block_means(beta: &[f64], kx: usize) -> Vec<f64> {
    beta.chunks(kx)
        .map(|block| {
            if block.iter().all(|b| *b == block[0]) {
                return block[0];
            }
            let mean = block.iter().sum::<f64>() / kx as f64;
            let scale = block.iter().fold(0.0f64, |m, b| m.max(b.abs()));
            if mean.abs() <= 2.0 * kx as f64 * f64::EPSILON * scale {
                0.0
            } else {
                mean
            }
        })
        .collect()
}

/// `1 ⊗ v` with a ones vector of length `kx`.
pub fn ones_kron(v: &[f64], kx: usize) -> Vec<f64> {
    v.iter().flat_map(|x| std::iter::repeat_n(*x, kx)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_one() {
        assert_eq!(projection_pi(&[1.0, 3.0], 2, 1).unwrap(), vec![-1.0, 1.0]);
    }

    #[test]
    fn annihilates_z_only_part() {
        let v = [0.3, -1.7, 2.25];
        let beta = ones_kron(&v, 4);
        assert!(projection_pi(&beta, 4, 3).unwrap().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn length_mismatch() {
        assert!(projection_pi(&[1.0, 2.0, 3.0], 2, 2).is_err());
    }
}
