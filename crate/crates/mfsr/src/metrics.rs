//! Reconstruction quality metrics.

use crate::error::{Error, Result};
use crate::image::ImageGrid;

fn check_shapes(a: &ImageGrid, b: &ImageGrid) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "metric shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Mean absolute difference over all pixels.
pub fn mad_metric(x: &ImageGrid, x_hat: &ImageGrid) -> Result<f64> {
    check_shapes(x, x_hat)?;
    let sum: f64 = x
        .data()
        .iter()
        .zip(x_hat.data())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(sum / x.len() as f64)
}

/// Mean squared difference over all pixels.
pub fn mse_metric(x: &ImageGrid, x_hat: &ImageGrid) -> Result<f64> {
    check_shapes(x, x_hat)?;
    let sum: f64 = x
        .data()
        .iter()
        .zip(x_hat.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / x.len() as f64)
}

/// `10 log10(Var(clean) / noise_var)`, population variance about the mean.
pub fn snr_db(clean: &ImageGrid, noise_var: f64) -> Result<f64> {
    if !(noise_var > 0.0) {
        return Err(Error::Domain(format!(
            "noise variance must be positive, got {noise_var}"
        )));
    }
    Ok(10.0 * (clean.variance() / noise_var).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::add_noise;
    use crate::image::synth_texture;

    #[test]
    fn identical_images_have_zero_error() {
        let img = synth_texture(8, 8, 1);
        assert_eq!(mad_metric(&img, &img).unwrap(), 0.0);
        assert_eq!(mse_metric(&img, &img).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_mad() {
        let x = ImageGrid::zeros(4, 4);
        let y = ImageGrid::filled(4, 4, 7.5);
        assert_eq!(mad_metric(&x, &y).unwrap(), 7.5);
        assert_eq!(mse_metric(&x, &y).unwrap(), 7.5 * 7.5);
    }

    #[test]
    fn metrics_are_symmetric() {
        let a = synth_texture(8, 8, 2);
        let b = synth_texture(8, 8, 3);
        assert_eq!(mad_metric(&a, &b).unwrap(), mad_metric(&b, &a).unwrap());
        assert_eq!(mse_metric(&a, &b).unwrap(), mse_metric(&b, &a).unwrap());
    }

    #[test]
    fn mad_matches_scalar_loop() {
        let a = synth_texture(8, 8, 4);
        let b = synth_texture(8, 8, 5);
        let mut acc = 0.0;
        for r in 0..8 {
            for c in 0..8 {
                acc += (a.get(r, c) - b.get(r, c)).abs();
            }
        }
        assert!((mad_metric(&a, &b).unwrap() - acc / 64.0).abs() < 1e-12);
    }

    #[test]
    fn snr_of_equal_variances_is_zero() {
        let img = synth_texture(16, 16, 6);
        let s = snr_db(&img, img.variance()).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn snr_closes_loop_with_noise_injection() {
        let img = synth_texture(64, 64, 7);
        let noisy = add_noise(&img, 20.0, 8).unwrap();
        let noise_var = img
            .data()
            .iter()
            .zip(noisy.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / img.len() as f64;
        let measured = snr_db(&img, noise_var).unwrap();
        assert!((measured - 20.0).abs() <= 1.0, "measured {measured} dB");
    }

    #[test]
    fn shape_mismatch_and_bad_variance_error() {
        let a = synth_texture(4, 4, 9);
        let b = synth_texture(4, 5, 9);
        assert!(mad_metric(&a, &b).is_err());
        assert!(mse_metric(&a, &b).is_err());
        assert!(snr_db(&a, 0.0).is_err());
        assert!(snr_db(&a, -1.0).is_err());
    }
}
