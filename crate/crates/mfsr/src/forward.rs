//! Observation simulation: per-frame operators, SNR-calibrated noise, and
//! the forward pipeline producing low-resolution frames from a
//! high-resolution scene.
//!
//! Each frame k is `decimate(warp(blur(x))) + noise`, blur first. The noise
//! standard deviation is derived from the clean frame's variance and the
//! requested SNR in decibels, so every frame's noise level is calibrated to
//! its own content.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::image::{from_lex, to_lex, ImageGrid};
use crate::kernels::psf_for_id;
use crate::op::{blur_op, compose, decimate_op, warp_op, Operator};

/// Everything needed to degrade the scene into one observed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpec {
    /// Blur kernel id: 1..=8 from the bank, 0 for no blur.
    pub psf_id: u8,
    /// Horizontal shift in pixels (columns).
    pub dx: f64,
    /// Vertical shift in pixels (rows).
    pub dy: f64,
    /// Decimation factor; must divide both scene dimensions.
    pub decim: usize,
    /// Signal-to-noise ratio in dB; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    /// RNG seed for this frame's noise.
    pub seed: u64,
}

impl FrameSpec {
    /// Clean pass-through frame: no blur, no shift, no decimation, no noise.
    pub fn identity(seed: u64) -> Self {
        FrameSpec {
            psf_id: 0,
            dx: 0.0,
            dy: 0.0,
            decim: 1,
            snr_db: f64::INFINITY,
            seed,
        }
    }
}

/// One observed frame together with the degradation that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub spec: FrameSpec,
    pub image: ImageGrid,
}

/// N low-resolution frames over a common high-resolution grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub hr_height: usize,
    pub hr_width: usize,
    pub frames: Vec<Observation>,
}

impl ObservationSet {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn hr_shape(&self) -> (usize, usize) {
        (self.hr_height, self.hr_width)
    }
}

/// The composite observation operator `H_k = D . M . B` for one spec.
pub fn frame_operator(spec: &FrameSpec, hr_shape: (usize, usize)) -> Result<Operator> {
    let psf = psf_for_id(spec.psf_id)?;
    let b = blur_op(&psf, hr_shape)?;
    let m = warp_op(spec.dx, spec.dy, hr_shape)?;
    let d = decimate_op(spec.decim, hr_shape)?;
    compose(vec![b, m, d])
}

/// Operators for every frame of an observation set, in order.
pub fn observation_operators(obs: &ObservationSet) -> Result<Vec<Operator>> {
    obs.frames
        .iter()
        .map(|f| frame_operator(&f.spec, obs.hr_shape()))
        .collect()
}

/// Add zero-mean Gaussian noise with variance `Var(img) * 10^(-snr_db/10)`.
///
/// Deterministic for a fixed seed. An infinite (positive) SNR returns the
/// input unchanged; a constant image with finite SNR has no defined noise
/// scale and is rejected.
pub fn add_noise(img: &ImageGrid, snr_db: f64, seed: u64) -> Result<ImageGrid> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::Domain(format!("snr {snr_db} dB is not meaningful")));
    }
    if snr_db == f64::INFINITY {
        return Ok(img.clone());
    }
    let variance = img.variance();
    if variance <= 0.0 {
        return Err(Error::DegenerateSignal);
    }
    let sigma = (variance * 10f64.powf(-snr_db / 10.0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = img.clone();
    for v in out.data_mut() {
        let g: f64 = StandardNormal.sample(&mut rng);
        *v += sigma * g;
    }
    Ok(out)
}

/// Run the forward model for every spec against one scene.
pub fn simulate_observations(hr: &ImageGrid, specs: &[FrameSpec]) -> Result<ObservationSet> {
    let hr_lex = to_lex(hr);
    let mut frames = Vec::with_capacity(specs.len());
    for spec in specs {
        let op = frame_operator(spec, hr.shape())?;
        let clean = from_lex(&op.apply(&hr_lex));
        let image = add_noise(&clean, spec.snr_db, spec.seed)?;
        frames.push(Observation {
            spec: spec.clone(),
            image,
        });
    }
    Ok(ObservationSet {
        hr_height: hr.height(),
        hr_width: hr.width(),
        frames,
    })
}

/// splitmix64 step; the standard 64-bit state mixer.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-frame seeds expanded from a master seed. Frame k's seed depends only
/// on `master` and k, so appending frames never perturbs earlier ones.
pub fn derive_frame_seeds(master: u64, n: usize) -> Vec<u64> {
    let mut state = master;
    (0..n).map(|_| splitmix64(&mut state)).collect()
}
