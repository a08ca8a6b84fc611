//! The 5x5 blur kernel bank.
//!
//! Eight fixed point-spread functions model the combined camera/atmosphere
//! blur. Each is stored as integer taps scaled by the reciprocal of their
//! sum, so every [`Psf`] integrates to exactly one. Kernel 4's published
//! prefactor (1/18) disagrees with its printed taps (sum 16); the tap table
//! wins and the kernel is normalized by 16.

use crate::error::{Error, Result};

/// A normalized 5x5 point spread function.
#[derive(Debug, Clone, PartialEq)]
pub struct Psf {
    id: u8,
    taps: [[f64; 5]; 5],
}

impl Psf {
    /// Identity kernel: center tap 1, everything else 0. Id 0 by convention;
    /// frames built with it pass through the blur stage unchanged.
    pub fn delta() -> Self {
        let mut taps = [[0.0; 5]; 5];
        taps[2][2] = 1.0;
        Psf { id: 0, taps }
    }

    /// Arbitrary user kernel (id 0). Taps must be non-negative and sum to 1
    /// within 1e-12.
    pub fn custom(taps: [[f64; 5]; 5]) -> Result<Self> {
        let mut sum = 0.0;
        for row in &taps {
            for &t in row {
                if t < 0.0 || !t.is_finite() {
                    return Err(Error::Domain("psf taps must be non-negative".into()));
                }
                sum += t;
            }
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("psf taps sum to {sum}, expected 1")));
        }
        Ok(Psf { id: 0, taps })
    }

    pub fn id(&self) -> u8 {
        self.id
    }

    pub fn taps(&self) -> &[[f64; 5]; 5] {
        &self.taps
    }

    #[inline]
    pub fn tap(&self, row: usize, col: usize) -> f64 {
        self.taps[row][col]
    }
}

const BANK: [[[u32; 5]; 5]; 8] = [
    // ker1
    [
        [0, 0, 1, 0, 0],
        [0, 1, 2, 1, 0],
        [1, 2, 3, 2, 1],
        [0, 1, 2, 1, 0],
        [0, 0, 1, 0, 0],
    ],
    // ker2
    [
        [0, 0, 0, 0, 0],
        [0, 1, 2, 1, 0],
        [0, 2, 2, 2, 0],
        [0, 1, 2, 1, 0],
        [0, 0, 0, 0, 0],
    ],
    // ker3
    [
        [0, 0, 0, 0, 0],
        [0, 1, 2, 1, 0],
        [0, 2, 4, 2, 0],
        [0, 1, 2, 1, 0],
        [0, 0, 0, 0, 0],
    ],
    // ker4
    [
        [0, 0, 0, 0, 0],
        [0, 1, 2, 1, 0],
        [1, 2, 2, 2, 1],
        [0, 1, 2, 1, 0],
        [0, 0, 0, 0, 0],
    ],
    // ker5
    [
        [1, 1, 1, 1, 1],
        [1, 1, 1, 1, 1],
        [1, 1, 1, 1, 1],
        [1, 1, 1, 1, 1],
        [1, 1, 1, 1, 1],
    ],
    // ker6
    [
        [0, 0, 0, 0, 0],
        [0, 2, 2, 2, 0],
        [0, 2, 2, 2, 0],
        [0, 2, 2, 2, 0],
        [0, 0, 0, 0, 0],
    ],
    // ker7
    [
        [0, 1, 1, 1, 0],
        [1, 1, 2, 1, 1],
        [1, 2, 4, 2, 1],
        [1, 1, 2, 1, 1],
        [0, 1, 1, 1, 0],
    ],
    // ker8
    [
        [0, 1, 1, 1, 0],
        [1, 1, 2, 1, 1],
        [1, 2, 2, 2, 1],
        [1, 1, 2, 1, 1],
        [0, 1, 1, 1, 0],
    ],
];

/// Kernel `id` from the bank, ids 1..=8.
pub fn make_kernel(id: u8) -> Result<Psf> {
    if !(1..=8).contains(&id) {
        return Err(Error::UnknownKernel(id));
    }
    let raw = &BANK[(id - 1) as usize];
    let sum: u32 = raw.iter().flatten().sum();
    let mut taps = [[0.0; 5]; 5];
    for r in 0..5 {
        for c in 0..5 {
            taps[r][c] = raw[r][c] as f64 / sum as f64;
        }
    }
    Ok(Psf { id, taps })
}

/// Kernel for a frame spec: 0 selects the identity kernel, 1..=8 the bank.
pub fn psf_for_id(id: u8) -> Result<Psf> {
    if id == 0 {
        Ok(Psf::delta())
    } else {
        make_kernel(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ker5_is_uniform() {
        let psf = make_kernel(5).unwrap();
        for r in 0..5 {
            for c in 0..5 {
                assert_eq!(psf.tap(r, c), 1.0 / 25.0);
            }
        }
    }

    #[test]
    fn ker1_raw_taps_sum_19() {
        let sum: u32 = BANK[0].iter().flatten().sum();
        assert_eq!(sum, 19);
        let psf = make_kernel(1).unwrap();
        let total: f64 = psf.taps().iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ker3_center_tap() {
        let psf = make_kernel(3).unwrap();
        assert_eq!(psf.tap(2, 2), 4.0 / 16.0);
    }

    #[test]
    fn all_kernels_normalized_and_nonnegative() {
        for id in 1..=8 {
            let psf = make_kernel(id).unwrap();
            let total: f64 = psf.taps().iter().flatten().sum();
            assert!((total - 1.0).abs() < 1e-12, "kernel {id} sums to {total}");
            assert!(psf.taps().iter().flatten().all(|&t| t >= 0.0));
        }
    }

    #[test]
    fn out_of_range_id_is_error() {
        assert!(matches!(make_kernel(0), Err(Error::UnknownKernel(0))));
        assert!(matches!(make_kernel(9), Err(Error::UnknownKernel(9))));
    }

    #[test]
    fn delta_kernel_is_identity_mass() {
        let psf = Psf::delta();
        assert_eq!(psf.tap(2, 2), 1.0);
        let total: f64 = psf.taps().iter().flatten().sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn custom_kernel_is_validated() {
        let mut taps = [[0.0; 5]; 5];
        taps[1][2] = 0.5;
        taps[3][2] = 0.5;
        assert!(Psf::custom(taps).is_ok());

        taps[3][2] = 0.75; // sums to 1.25
        assert!(Psf::custom(taps).is_err());

        taps[3][2] = -0.5;
        assert!(Psf::custom(taps).is_err());
    }
}
