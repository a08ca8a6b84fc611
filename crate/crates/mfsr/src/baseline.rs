//! Interpolation + fusion baseline.
//!
//! The reference pipeline the solver is judged against: each low-resolution
//! frame is projected onto the fine grid with zeros between samples, the
//! holes are filled by relaxation sweeps, frames are registered to a
//! reference by exhaustive integer block matching under the MAD cost, and
//! the aligned frames are averaged.

use crate::error::{Error, Result};
use crate::image::ImageGrid;

/// Outcome of an exhaustive MAD registration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationResult {
    /// Estimated `(dx, dy)` of the frame relative to the reference.
    pub shift: (i32, i32),
    /// MAD at the winning shift.
    pub mad_at_best: f64,
    pub search_radius: usize,
}

/// Project an LR image onto the `r`-times finer grid (samples at stride-`r`
/// positions, top-left phase) and fill the padded pixels with relaxation
/// sweeps of three-point averages: gaps inside sample rows relax
/// horizontally with `(left + self + right) / 3`, then the fully padded rows
/// relax vertically with `(up + self + down) / 3`.
///
/// Projected pixels are never modified. A missing neighbor (outside the
/// grid) contributes the pixel's own value, so a constant image is an exact
/// fixed point and a padded cell between samples `a` and `b` converges to
/// `(a + b) / 2`.
pub fn zero_fill_interpolate(lr: &ImageGrid, r: usize, sweeps: usize) -> ImageGrid {
    assert!(r >= 1, "magnification factor must be at least 1");
    assert!(sweeps >= 1, "at least one sweep");
    if r == 1 {
        return lr.clone();
    }
    let (lh, lw) = lr.shape();
    let (h, w) = (lh * r, lw * r);
    let mut img = ImageGrid::zeros(h, w);
    for lr_r in 0..lh {
        for lr_c in 0..lw {
            img.set(lr_r * r, lr_c * r, lr.get(lr_r, lr_c));
        }
    }

    let mut next = img.clone();
    for _ in 0..sweeps {
        // horizontal relaxation of the gaps inside sample rows
        for row in (0..h).step_by(r) {
            for col in 0..w {
                if col % r == 0 {
                    continue;
                }
                let me = img.get(row, col);
                let left = if col > 0 { img.get(row, col - 1) } else { me };
                let right = if col + 1 < w { img.get(row, col + 1) } else { me };
                next.set(row, col, (left + me + right) / 3.0);
            }
        }
        std::mem::swap(&mut img, &mut next);
        next = img.clone();
        // vertical relaxation of the fully padded rows
        for row in 0..h {
            if row % r == 0 {
                continue;
            }
            for col in 0..w {
                let me = img.get(row, col);
                let up = if row > 0 { img.get(row - 1, col) } else { me };
                let down = if row + 1 < h { img.get(row + 1, col) } else { me };
                next.set(row, col, (up + me + down) / 3.0);
            }
        }
        std::mem::swap(&mut img, &mut next);
        next = img.clone();
    }
    img
}

// MAD of `frame` against `ref` shifted by (dx, dy), over the overlap only.
fn mad_at_shift(reference: &ImageGrid, frame: &ImageGrid, dx: i32, dy: i32) -> f64 {
    let (h, w) = reference.shape();
    let mut acc = 0.0;
    let mut count = 0usize;
    for r in 0..h as i32 {
        let sr = r - dy;
        if sr < 0 || sr >= h as i32 {
            continue;
        }
        for c in 0..w as i32 {
            let sc = c - dx;
            if sc < 0 || sc >= w as i32 {
                continue;
            }
            acc += (frame.get(r as usize, c as usize) - reference.get(sr as usize, sc as usize))
                .abs();
            count += 1;
        }
    }
    if count == 0 {
        f64::INFINITY
    } else {
        acc / count as f64
    }
}

/// Exhaustive search over integer shifts in `[-radius, radius]^2` for the
/// translation of `frame` relative to `reference`, scoring each candidate by
/// MAD over the overlap region. Ties break toward smaller `|dx| + |dy|`,
/// then lexicographically on `(dx, dy)`.
pub fn mad_register(
    reference: &ImageGrid,
    frame: &ImageGrid,
    radius: usize,
) -> Result<RegistrationResult> {
    if reference.shape() != frame.shape() {
        return Err(Error::Dimension(format!(
            "registration shapes differ: {:?} vs {:?}",
            reference.shape(),
            frame.shape()
        )));
    }
    let (h, w) = reference.shape();
    if radius >= h.min(w) {
        return Err(Error::Dimension(format!(
            "search radius {radius} too large for {h}x{w}"
        )));
    }
    let rad = radius as i32;
    let mut best = RegistrationResult {
        shift: (0, 0),
        mad_at_best: f64::INFINITY,
        search_radius: radius,
    };
    for dx in -rad..=rad {
        for dy in -rad..=rad {
            let mad = mad_at_shift(reference, frame, dx, dy);
            let better = mad < best.mad_at_best
                || (mad == best.mad_at_best && {
                    let (bx, by) = best.shift;
                    let (cand, cur) = (dx.abs() + dy.abs(), bx.abs() + by.abs());
                    cand < cur || (cand == cur && (dx, dy) < (bx, by))
                });
            if better {
                best = RegistrationResult {
                    shift: (dx, dy),
                    mad_at_best: mad,
                    search_radius: radius,
                };
            }
        }
    }
    Ok(best)
}

/// Translate each frame back by its integer shift (zero fill) and average
/// pixelwise over the frames that cover each pixel.
pub fn fuse(frames: &[ImageGrid], shifts: &[(i32, i32)]) -> Result<ImageGrid> {
    if frames.is_empty() {
        return Err(Error::EmptyObservation);
    }
    if frames.len() != shifts.len() {
        return Err(Error::Dimension(format!(
            "{} frames with {} shifts",
            frames.len(),
            shifts.len()
        )));
    }
    let (h, w) = frames[0].shape();
    for f in frames {
        if f.shape() != (h, w) {
            return Err(Error::Dimension("fuse frames must share one shape".into()));
        }
    }

    let mut acc = vec![0.0; h * w];
    let mut cover = vec![0u32; h * w];
    for (frame, &(dx, dy)) in frames.iter().zip(shifts) {
        for r in 0..h as i32 {
            let sr = r + dy;
            if sr < 0 || sr >= h as i32 {
                continue;
            }
            for c in 0..w as i32 {
                let sc = c + dx;
                if sc < 0 || sc >= w as i32 {
                    continue;
                }
                let i = r as usize * w + c as usize;
                acc[i] += frame.get(sr as usize, sc as usize);
                cover[i] += 1;
            }
        }
    }
    for (a, &n) in acc.iter_mut().zip(&cover) {
        if n > 0 {
            *a /= f64::from(n);
        }
    }
    ImageGrid::from_data(h, w, acc)
}
