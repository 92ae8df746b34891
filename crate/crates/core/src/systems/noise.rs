use rand_distr::{Distribution, Normal};

use crate::{Error, Result};

/// Add i.i.d. zero-mean Gaussian noise with per-channel standard deviation `sigma`.
///
/// Channels with `sigma == 0` are returned untouched.
pub fn add_noise(outputs: &[Vec<f64>], sigma: &[f64], seed: u64) -> Result<Vec<Vec<f64>>> {
    if let Some(s) = sigma.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
        return Err(Error::Config(format!("noise sigma must be finite and >= 0, got {s}")));
    }
    let mut rng = crate::seed::rng(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    outputs
        .iter()
        .map(|row| {
            if row.len() != sigma.len() {
                return Err(Error::shape("noisy output row", sigma.len(), row.len()));
            }
            Ok(row
                .iter()
                .zip(sigma)
                .map(|(&y, &s)| {
                    let n: f64 = std_normal.sample(&mut rng);
                    if s == 0.0 {
                        y
                    } else {
                        y + s * n
                    }
                })
                .collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_identity() {
        let ys = vec![vec![1.0, -2.0], vec![0.5, 3.25]];
        assert_eq!(add_noise(&ys, &[0.0, 0.0], 9).unwrap(), ys);
    }

    #[test]
    fn empirical_std_matches() {
        let ys = vec![vec![0.0]; 100_000];
        let noisy = add_noise(&ys, &[0.05], 1).unwrap();
        let n = noisy.len() as f64;
        let mean = noisy.iter().map(|r| r[0]).sum::<f64>() / n;
        let var = noisy.iter().map(|r| (r[0] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let std = var.sqrt();
        assert!((std - 0.05).abs() / 0.05 < 0.02, "std {std}");
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let ys = vec![vec![1.0, 2.0]; 50];
        let a = add_noise(&ys, &[0.1, 0.2], 5).unwrap();
        let b = add_noise(&ys, &[0.1, 0.2], 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, add_noise(&ys, &[0.1, 0.2], 6).unwrap());
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(add_noise(&[vec![0.0]], &[-1.0], 0).is_err());
    }
}
