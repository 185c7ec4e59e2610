use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::Vec3;

/// Draws a unit direction around `peak`: the unit peak plus independent
/// zero-mean Gaussian noise of deviation `std` on each component, renormalised.
/// With `std == 0` the unit peak is returned and no randomness is consumed.
pub fn sample_direction<R: Rng + ?Sized>(peak: &Vec3, std: f64, rng: &mut R) -> Result<Vec3> {
    let n = peak.norm();
    if !(n > 0.0) {
        return Err(Error::ZeroPeak);
    }
    let u = peak / n;
    if std == 0.0 {
        return Ok(u);
    }
    loop {
        let noise = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let v = u + noise * std;
        let len = v.norm();
        if len > 0.0 {
            return Ok(v / len);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_std_returns_unit_peak() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_direction(&Vec3::new(2.0, 0.0, 0.0), 0.0, &mut rng).unwrap(), Vec3::x());
    }

    #[test]
    fn zero_peak_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample_direction(&Vec3::zeros(), 0.15, &mut rng), Err(Error::ZeroPeak)));
    }

    #[test]
    fn samples_are_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for std in [0.01, 0.15, 0.3, 2.0] {
            for _ in 0..1000 {
                let v = sample_direction(&Vec3::new(0.3, -0.4, 0.5), std, &mut rng).unwrap();
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}
