//! Total-variation functionals and the reweighting step of the MM scheme.
//!
//! Three variants of the per-pixel gradient penalty are supported:
//!
//! * `Classic` — the plain isotropic sum of gradient magnitudes;
//! * `Smoothed` — magnitudes shifted inside the square root by `eps`
//!   (with `eps = 1` this is the minimal-surfaces form);
//! * `LogWeighted` — magnitudes scaled by `p(s) = (2+ln(1+s))/(1+ln(1+s))`,
//!   which can be evaluated but has no quadratic majorizer, so the solver
//!   rejects it.
//!
//! Both difference fields use backward differences with a zero first
//! row/column, so constants are in the null space of the penalty.

use crate::error::{Error, Result};
use crate::image::ImageGrid;

/// Guard against the weight singularity at zero gradient.
pub const EPS_FLOOR: f64 = 1e-8;

/// Which TV functional to use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TvVariant {
    Classic,
    Smoothed { eps: f64 },
    LogWeighted,
}

impl TvVariant {
    /// Smoothing actually used inside majorizer weights: `Classic` runs with
    /// the singularity floor, `Smoothed` with its own eps (floored).
    pub fn effective_eps(&self) -> Result<f64> {
        match self {
            TvVariant::Classic => Ok(EPS_FLOOR),
            TvVariant::Smoothed { eps } => {
                if !eps.is_finite() || *eps < 0.0 {
                    return Err(Error::Domain(format!("smoothing eps {eps} must be >= 0")));
                }
                Ok(eps.max(EPS_FLOOR))
            }
            TvVariant::LogWeighted => Err(Error::UnsupportedVariant(
                "log-weighted TV has no quadratic majorizer",
            )),
        }
    }
}

/// One positive weight per pixel, shared by the horizontal and vertical
/// difference terms; stored in lexicographic (column-major) order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField {
    pub height: usize,
    pub width: usize,
    pub w: Vec<f64>,
}

// Backward-difference fields in lexicographic order.
pub(crate) fn gradient_fields(x: &ImageGrid) -> (Vec<f64>, Vec<f64>) {
    let (h, w) = x.shape();
    let mut dh = vec![0.0; h * w];
    let mut dv = vec![0.0; h * w];
    for c in 0..w {
        for r in 0..h {
            let i = c * h + r;
            if c > 0 {
                dh[i] = x.get(r, c) - x.get(r, c - 1);
            }
            if r > 0 {
                dv[i] = x.get(r, c) - x.get(r - 1, c);
            }
        }
    }
    (dh, dv)
}

/// Total variation of `x` under the chosen variant.
pub fn tv_value(x: &ImageGrid, variant: TvVariant) -> f64 {
    let (dh, dv) = gradient_fields(x);
    match variant {
        TvVariant::Classic => dh
            .iter()
            .zip(&dv)
            .map(|(a, b)| (a * a + b * b).sqrt())
            .sum(),
        TvVariant::Smoothed { eps } => smoothed_sum(&dh, &dv, eps),
        TvVariant::LogWeighted => dh
            .iter()
            .zip(&dv)
            .map(|(a, b)| {
                let s = (a * a + b * b).sqrt();
                let l = (1.0 + s).ln();
                s * (2.0 + l) / (1.0 + l)
            })
            .sum(),
    }
}

/// The eps-smoothed functional `sum(sqrt(dh^2 + dv^2 + eps^2) - eps)`.
/// This is what the quadratic majorizer actually bounds; with `eps = 1` it
/// equals the `Smoothed` variant, and as `eps -> 0` it tends to `Classic`.
pub fn tv_smoothed_value(x: &ImageGrid, eps: f64) -> f64 {
    let (dh, dv) = gradient_fields(x);
    smoothed_sum(&dh, &dv, eps)
}

fn smoothed_sum(dh: &[f64], dv: &[f64], eps: f64) -> f64 {
    dh.iter()
        .zip(dv)
        .map(|(a, b)| (a * a + b * b + eps * eps).sqrt() - eps)
        .sum()
}

/// Majorizer weights at the current iterate:
/// `w_i = (lambda/2) / sqrt(dh_i^2 + dv_i^2 + eps^2)`.
pub fn mm_weights(x_t: &ImageGrid, lambda: f64, variant: TvVariant) -> Result<WeightField> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let eps = variant.effective_eps()?;
    let (dh, dv) = gradient_fields(x_t);
    let w: Vec<f64> = dh
        .iter()
        .zip(&dv)
        .map(|(a, b)| 0.5 * lambda / (a * a + b * b + eps * eps).sqrt())
        .collect();
    debug_assert!(w.iter().all(|v| v.is_finite() && *v > 0.0));
    Ok(WeightField {
        height: x_t.height(),
        width: x_t.width(),
        w,
    })
}
