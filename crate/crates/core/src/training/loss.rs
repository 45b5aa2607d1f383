use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::model::LOGSIGMA_CLAMP;
use crate::{Error, Result};

/// Reconstruction and (weighted) KL terms of one loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_rc: f64,
    /// Already multiplied by the KL weight.
    pub l_kl: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.l_rc.is_finite() && self.l_kl.is_finite() && self.total.is_finite()
    }

    pub(crate) fn scaled(self, k: f64) -> Self {
        Self {
            l_rc: self.l_rc * k,
            l_kl: self.l_kl * k,
            total: self.total * k,
        }
    }

    pub(crate) fn add(self, other: Self) -> Self {
        Self {
            l_rc: self.l_rc + other.l_rc,
            l_kl: self.l_kl + other.l_kl,
            total: self.total + other.total,
        }
    }
}

fn check_same(context: &str, a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::shape(context, format!("{:?}", a.dim()), format!("{:?}", b.dim())));
    }
    Ok(())
}

/// Squared Frobenius norm of the residual.
pub fn reconstruction_error(x: &Array2<f64>, x_hat: &Array2<f64>) -> Result<f64> {
    check_same("reconstruction", x, x_hat)?;
    Ok(x.iter().zip(x_hat.iter()).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Closed-form `KL(N(mu, sigma^2) || N(0, 1))` summed over every node and
/// latent dimension. `logsigma` is clamped like the forward pass does.
pub fn kl_divergence(mu: &Array2<f64>, logsigma: &Array2<f64>) -> Result<f64> {
    check_same("kl divergence", mu, logsigma)?;
    Ok(mu
        .iter()
        .zip(logsigma.iter())
        .map(|(&m, &ls)| {
            let ls = ls.clamp(-LOGSIGMA_CLAMP, LOGSIGMA_CLAMP);
            0.5 * (m * m + (2.0 * ls).exp() - 2.0 * ls - 1.0)
        })
        .sum())
}

pub fn loss_gwae(x: &Array2<f64>, x_hat: &Array2<f64>) -> Result<LossBreakdown> {
    let l_rc = reconstruction_error(x, x_hat)?;
    Ok(LossBreakdown { l_rc, l_kl: 0.0, total: l_rc })
}

pub fn loss_gwvae(
    x: &Array2<f64>,
    x_hat: &Array2<f64>,
    mu: &Array2<f64>,
    logsigma: &Array2<f64>,
    kl_weight: f64,
) -> Result<LossBreakdown> {
    let l_rc = reconstruction_error(x, x_hat)?;
    let l_kl = kl_weight * kl_divergence(mu, logsigma)?;
    Ok(LossBreakdown { l_rc, l_kl, total: l_rc + l_kl })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn gwae_loss_cases() {
        let x = Array2::from_shape_fn((3, 4), |(i, j)| (i * 4 + j) as f64);
        assert_eq!(loss_gwae(&x, &x).unwrap().total, 0.0);
        let mut y = x.clone();
        y[(1, 2)] += 2.0;
        let l = loss_gwae(&x, &y).unwrap();
        assert_eq!((l.l_rc, l.l_kl, l.total), (4.0, 0.0, 4.0));
        assert!(loss_gwae(&x, &Array2::zeros((4, 3))).is_err());
    }

    #[test]
    fn gwae_loss_matches_double_loop() {
        let mut rng = crate::rng::stream(1, "loss");
        let x = Array2::from_shape_simple_fn((10, 1024), || rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_simple_fn((10, 1024), || rng.random_range(-1.0..1.0));
        let mut oracle = 0.0;
        for i in 0..10 {
            for k in 0..1024 {
                let d = x[(i, k)] - y[(i, k)];
                oracle += d * d;
            }
        }
        assert!((loss_gwae(&x, &y).unwrap().total - oracle).abs() <= 1e-10);
    }

    #[test]
    fn kl_cases() {
        let zero = Array2::zeros((2, 3));
        let x = Array2::ones((2, 4));
        assert_eq!(loss_gwvae(&x, &x, &zero, &zero, 0.5).unwrap().l_kl, 0.0);
        let mut mu = zero.clone();
        mu[(1, 1)] = 1.0;
        assert_eq!(kl_divergence(&mu, &zero).unwrap(), 0.5);
        let l = loss_gwvae(&x, &x, &mu, &zero, 0.5).unwrap();
        assert_eq!(l.l_kl, 0.25);
        assert_eq!(l.total, 0.25);
        let mut y = x.clone();
        y[(0, 0)] = 4.0;
        let l0 = loss_gwvae(&x, &y, &mu, &zero, 0.0).unwrap();
        assert_eq!(l0.total, l0.l_rc);
        assert_eq!(l0.total, 9.0);
    }
}
