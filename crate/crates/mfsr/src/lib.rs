//! Matrix-free multi-frame super-resolution.
//!
//! A scene observed through blur, subpixel motion, decimation, and noise is
//! reconstructed from its low-resolution frames by total-variation-regularized
//! majorization-minimization with conjugate-gradient inner solves. The crate
//! also ships the forward observation simulator, Horn-Schunck optical flow
//! for motion estimation, and an interpolation+fusion baseline to compare
//! against.
//!
//! The pieces compose bottom-up:
//!
//! * [`image`] — containers, lexicographic ordering, synthetic scenes;
//! * [`pgm`] — the on-disk image format;
//! * [`kernels`] — the 5x5 blur kernel bank;
//! * [`op`] — matrix-free linear operators (blur, warp, decimate,
//!   differences) with exact adjoints, plus a dense oracle for tests;
//! * [`forward`] — SNR-calibrated noise and observation simulation;
//! * [`flow`] — Horn-Schunck estimation with a coarse-to-fine pyramid;
//! * [`tv`], [`cg`], [`solver`] — the TV functionals, the inner CG loop,
//!   and the MM outer loop;
//! * [`baseline`], [`metrics`] — the fusion baseline and quality metrics;
//! * [`config`], [`harness`] — experiment configs and the CLI commands.
//!
//! Start with the runnable examples (`cargo run --example super_resolve`)
//! or the `mfsr` binary (`mfsr simulate --config configs/appendixB.cfg`).

pub mod baseline;
pub mod cg;
pub mod config;
pub mod error;
pub mod flow;
pub mod forward;
pub mod harness;
pub mod image;
pub mod kernels;
pub mod metrics;
pub mod op;
pub mod pgm;
pub mod solver;
pub mod tv;

pub use error::{Error, Result};
pub use image::{from_lex, to_lex, ImageGrid, LexVector};
