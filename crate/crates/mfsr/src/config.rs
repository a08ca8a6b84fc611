//! Experiment configuration: a line-oriented `key = value` format with
//! `[section]` headers and one `[frame]` block per observed frame.
//!
//! ```text
//! [experiment]
//! hr_image = rect:128x128      # rect:, texture:, or a PGM path
//! output_dir = out
//! master_seed = 1
//!
//! [solver]
//! lambda = 1
//! tv = smoothed
//!
//! [frame]
//! kernel = 1
//! dx = 0.5
//! snr_db = 30
//! ```
//!
//! Unknown sections and keys are hard errors. Missing keys take documented
//! defaults. Frames without an explicit `seed` get one derived from
//! `master_seed` by a splitmix64 expansion keyed on the frame index, so
//! appending frames never changes earlier frames' noise.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::forward::{derive_frame_seeds, FrameSpec};
use crate::image::{synth_blocks, synth_rectangle, synth_texture, ImageGrid, Rect};
use crate::pgm::read_pgm_file;
use crate::solver::SolverConfig;
use crate::tv::TvVariant;

/// Scene source: synthetic descriptor or a PGM file.
#[derive(Debug, Clone, PartialEq)]
pub enum SceneSpec {
    /// `rect:HxW` (centered rectangle, half-size, 255 on 0) or
    /// `rect:HxW:top,left,rh,rw` or `rect:HxW:top,left,rh,rw:fg,bg`.
    Rect {
        height: usize,
        width: usize,
        rect: Rect,
        fg: f64,
        bg: f64,
    },
    /// `texture:HxW` or `texture:HxW:seed` — smooth seeded random field.
    Texture {
        height: usize,
        width: usize,
        seed: u64,
    },
    /// `blocks:HxW` or `blocks:HxW:seed` — piecewise-constant random
    /// rectangles, the edge-rich counterpart of `texture`.
    Blocks {
        height: usize,
        width: usize,
        seed: u64,
    },
    /// Any other string: path to a PGM image.
    File(PathBuf),
}

impl SceneSpec {
    pub fn load(&self) -> Result<ImageGrid> {
        match self {
            SceneSpec::Rect {
                height,
                width,
                rect,
                fg,
                bg,
            } => synth_rectangle(*height, *width, *rect, *fg, *bg),
            SceneSpec::Texture {
                height,
                width,
                seed,
            } => Ok(synth_texture(*height, *width, *seed)),
            SceneSpec::Blocks {
                height,
                width,
                seed,
            } => Ok(synth_blocks(*height, *width, *seed)),
            SceneSpec::File(path) => read_pgm_file(path),
        }
    }
}

/// Per-frame degradation settings from one `[frame]` block.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameConfig {
    pub kernel: u8,
    pub dx: f64,
    pub dy: f64,
    pub decim: usize,
    pub snr_db: f64,
    pub seed: Option<u64>,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            kernel: 1,
            dx: 0.0,
            dy: 0.0,
            decim: 2,
            snr_db: f64::INFINITY,
            seed: None,
        }
    }
}

/// Baseline pipeline settings.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    /// Interpolation sweeps.
    pub sweeps: usize,
    /// MAD search radius on the fine grid.
    pub radius: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            sweeps: 50,
            radius: 8,
        }
    }
}

/// A fully parsed experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scene: SceneSpec,
    pub output_dir: PathBuf,
    pub master_seed: u64,
    pub frames: Vec<FrameConfig>,
    pub solver: SolverConfig,
    pub flow: FlowConfig,
    pub baseline: BaselineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scene: parse_scene("rect:128x128", 0).expect("default scene"),
            output_dir: PathBuf::from("out"),
            master_seed: 0,
            frames: Vec::new(),
            solver: SolverConfig::default(),
            flow: FlowConfig::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Frame specs with per-frame seeds resolved from the master seed.
    pub fn frame_specs(&self) -> Vec<FrameSpec> {
        let derived = derive_frame_seeds(self.master_seed, self.frames.len());
        self.frames
            .iter()
            .zip(derived)
            .map(|(f, seed)| FrameSpec {
                psf_id: f.kernel,
                dx: f.dx,
                dy: f.dy,
                decim: f.decim,
                snr_db: f.snr_db,
                seed: f.seed.unwrap_or(seed),
            })
            .collect()
    }
}

fn value_err(key: &str, msg: impl Into<String>) -> Error {
    Error::ConfigValue {
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse::<T>()
        .map_err(|_| value_err(key, format!("cannot parse `{raw}`")))
}

fn parse_dims(key: &str, raw: &str) -> Result<(usize, usize)> {
    let (h, w) = raw
        .split_once(['x', 'X'])
        .ok_or_else(|| value_err(key, format!("expected HxW, got `{raw}`")))?;
    Ok((parse_num(key, h.trim())?, parse_num(key, w.trim())?))
}

fn parse_scene(raw: &str, line: usize) -> Result<SceneSpec> {
    let key = "hr_image";
    if let Some(rest) = raw.strip_prefix("rect:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.is_empty() || parts.len() > 3 {
            return Err(Error::ConfigSyntax {
                line,
                msg: format!("bad rect descriptor `{raw}`"),
            });
        }
        let (height, width) = parse_dims(key, parts[0])?;
        let rect = if parts.len() >= 2 {
            let nums: Vec<&str> = parts[1].split(',').collect();
            if nums.len() != 4 {
                return Err(value_err(key, "rect geometry needs top,left,height,width"));
            }
            Rect {
                top: parse_num(key, nums[0].trim())?,
                left: parse_num(key, nums[1].trim())?,
                height: parse_num(key, nums[2].trim())?,
                width: parse_num(key, nums[3].trim())?,
            }
        } else {
            Rect {
                top: height / 4,
                left: width / 4,
                height: height / 2,
                width: width / 2,
            }
        };
        let (fg, bg) = if parts.len() == 3 {
            let nums: Vec<&str> = parts[2].split(',').collect();
            if nums.len() != 2 {
                return Err(value_err(key, "rect intensities need fg,bg"));
            }
            (
                parse_num(key, nums[0].trim())?,
                parse_num(key, nums[1].trim())?,
            )
        } else {
            (255.0, 0.0)
        };
        return Ok(SceneSpec::Rect {
            height,
            width,
            rect,
            fg,
            bg,
        });
    }
    for (prefix, blocks) in [("texture:", false), ("blocks:", true)] {
        if let Some(rest) = raw.strip_prefix(prefix) {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.is_empty() || parts.len() > 2 {
                return Err(Error::ConfigSyntax {
                    line,
                    msg: format!("bad scene descriptor `{raw}`"),
                });
            }
            let (height, width) = parse_dims(key, parts[0])?;
            let seed = if parts.len() == 2 {
                parse_num(key, parts[1])?
            } else {
                0
            };
            return Ok(if blocks {
                SceneSpec::Blocks {
                    height,
                    width,
                    seed,
                }
            } else {
                SceneSpec::Texture {
                    height,
                    width,
                    seed,
                }
            });
        }
    }
    Ok(SceneSpec::File(PathBuf::from(raw)))
}

fn parse_tv(raw: &str) -> Result<TvVariant> {
    match raw.to_ascii_lowercase().as_str() {
        "classic" => Ok(TvVariant::Classic),
        "smoothed" => Ok(TvVariant::Smoothed { eps: 1.0 }),
        "logweighted" | "log-weighted" => Ok(TvVariant::LogWeighted),
        other => Err(value_err(
            "tv",
            format!("expected classic|smoothed|logweighted, got `{other}`"),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Experiment,
    Solver,
    Flow,
    Baseline,
    Frame,
}

/// Parse configuration text into a validated [`ExperimentConfig`].
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut section = Section::Experiment;
    // eps from [solver] applies to the smoothed variant after the section
    // finishes, whatever the key order was
    let mut smoothing_eps = 1.0;
    let mut tv_seen = TvVariant::Smoothed { eps: 1.0 };

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }

        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::ConfigSyntax {
                    line: line_no,
                    msg: "unterminated section header".into(),
                })?
                .trim();
            section = match name {
                "experiment" => Section::Experiment,
                "solver" => Section::Solver,
                "flow" => Section::Flow,
                "baseline" => Section::Baseline,
                "frame" => {
                    cfg.frames.push(FrameConfig::default());
                    Section::Frame
                }
                other => {
                    return Err(Error::ConfigSyntax {
                        line: line_no,
                        msg: format!("unknown section [{other}]"),
                    })
                }
            };
            continue;
        }

        let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigSyntax {
            line: line_no,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(Error::ConfigSyntax {
                line: line_no,
                msg: "empty key or value".into(),
            });
        }

        match section {
            Section::Experiment => match key {
                "hr_image" => cfg.scene = parse_scene(value, line_no)?,
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                "master_seed" => cfg.master_seed = parse_num(key, value)?,
                other => return Err(value_err(other, "unknown key in [experiment]")),
            },
            Section::Solver => match key {
                "lambda" => cfg.solver.lambda = parse_num(key, value)?,
                "cg_eps" => cfg.solver.cg_eps = parse_num(key, value)?,
                "cg_max_iters" => cfg.solver.cg_max_iters = parse_num(key, value)?,
                "mm_max_iters" => cfg.solver.mm_max_iters = parse_num(key, value)?,
                "mm_rel_tol" => cfg.solver.mm_rel_tol = parse_num(key, value)?,
                "tv" => tv_seen = parse_tv(value)?,
                "eps" => smoothing_eps = parse_num(key, value)?,
                other => return Err(value_err(other, "unknown key in [solver]")),
            },
            Section::Flow => match key {
                "alpha" => cfg.flow.alpha = parse_num(key, value)?,
                "iterations" => cfg.flow.iterations = parse_num(key, value)?,
                "pyramid_levels" => cfg.flow.pyramid_levels = parse_num(key, value)?,
                other => return Err(value_err(other, "unknown key in [flow]")),
            },
            Section::Baseline => match key {
                "sweeps" => cfg.baseline.sweeps = parse_num(key, value)?,
                "radius" => cfg.baseline.radius = parse_num(key, value)?,
                other => return Err(value_err(other, "unknown key in [baseline]")),
            },
            Section::Frame => {
                let frame = cfg.frames.last_mut().expect("inside a [frame] block");
                match key {
                    "kernel" => frame.kernel = parse_num(key, value)?,
                    "dx" => frame.dx = parse_num(key, value)?,
                    "dy" => frame.dy = parse_num(key, value)?,
                    "decim" => frame.decim = parse_num(key, value)?,
                    "snr_db" => frame.snr_db = parse_num(key, value)?,
                    "seed" => frame.seed = Some(parse_num(key, value)?),
                    other => return Err(value_err(other, "unknown key in [frame]")),
                }
            }
        }
    }

    cfg.solver.tv = match tv_seen {
        TvVariant::Smoothed { .. } => TvVariant::Smoothed { eps: smoothing_eps },
        other => other,
    };

    validate(&cfg)?;
    Ok(cfg)
}

/// Parse a config file from disk.
pub fn parse_config_file(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_config(&text)
}

fn validate(cfg: &ExperimentConfig) -> Result<()> {
    if let SceneSpec::File(path) = &cfg.scene {
        if !path.exists() {
            return Err(value_err(
                "hr_image",
                format!("file `{}` does not exist", path.display()),
            ));
        }
    }
    cfg.solver
        .validate()
        .map_err(|e| value_err("solver", e.to_string()))?;
    if !(cfg.flow.alpha > 0.0) {
        return Err(value_err("alpha", "must be positive"));
    }
    if cfg.flow.iterations == 0 {
        return Err(value_err("iterations", "must be at least 1"));
    }
    if cfg.flow.pyramid_levels == 0 {
        return Err(value_err("pyramid_levels", "must be at least 1"));
    }
    if cfg.baseline.sweeps == 0 {
        return Err(value_err("sweeps", "must be at least 1"));
    }
    if let TvVariant::Smoothed { eps } = cfg.solver.tv {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(value_err("eps", "must be a non-negative finite number"));
        }
    }
    for (k, frame) in cfg.frames.iter().enumerate() {
        if frame.kernel > 8 {
            return Err(value_err(
                "kernel",
                format!("frame {}: kernel {} outside 0..=8", k + 1, frame.kernel),
            ));
        }
        if frame.decim == 0 {
            return Err(value_err(
                "decim",
                format!("frame {}: decimation factor must be at least 1", k + 1),
            ));
        }
        if frame.snr_db.is_nan() {
            return Err(value_err("snr_db", format!("frame {}: NaN", k + 1)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse_config("[frame]\n").unwrap();
        assert_eq!(cfg.frames.len(), 1);
        assert_eq!(cfg.frames[0].kernel, 1);
        assert_eq!(cfg.frames[0].decim, 2);
        assert_eq!(cfg.frames[0].snr_db, f64::INFINITY);
        assert_eq!(cfg.solver.lambda, 1.0);
        assert_eq!(cfg.solver.cg_eps, 0.1);
        assert_eq!(cfg.flow.alpha, 1.0);
        assert_eq!(cfg.solver.tv, TvVariant::Smoothed { eps: 1.0 });
        assert!(matches!(cfg.scene, SceneSpec::Rect { height: 128, width: 128, .. }));
    }

    #[test]
    fn type_violation_names_the_key() {
        let err = parse_config("[frame]\nsnr_db = ten\n").unwrap_err();
        match err {
            Error::ConfigValue { key, .. } => assert_eq!(key, "snr_db"),
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn unknown_key_is_hard_error() {
        assert!(matches!(
            parse_config("[solver]\nlambada = 1\n"),
            Err(Error::ConfigValue { .. })
        ));
    }

    #[test]
    fn syntax_error_carries_line_number() {
        let err = parse_config("[solver]\nlambda = 1\nnot a pair\n").unwrap_err();
        match err {
            Error::ConfigSyntax { line, .. } => assert_eq!(line, 3),
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn unknown_section_is_syntax_error() {
        let err = parse_config("[sovler]\nlambda = 1\n").unwrap_err();
        match err {
            Error::ConfigSyntax { line, .. } => assert_eq!(line, 1),
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn frame_seeds_derive_from_master_seed() {
        let cfg = parse_config("[experiment]\nmaster_seed = 11\n[frame]\n[frame]\nseed = 5\n")
            .unwrap();
        let specs = cfg.frame_specs();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[1].seed, 5);
        let reseeded = parse_config(
            "[experiment]\nmaster_seed = 11\n[frame]\n[frame]\nseed = 5\n[frame]\n",
        )
        .unwrap();
        assert_eq!(specs[0].seed, reseeded.frame_specs()[0].seed);
    }

    #[test]
    fn scene_descriptors_parse() {
        let full = parse_scene("rect:64x48:4,5,6,7:200,10", 1).unwrap();
        assert_eq!(
            full,
            SceneSpec::Rect {
                height: 64,
                width: 48,
                rect: Rect {
                    top: 4,
                    left: 5,
                    height: 6,
                    width: 7
                },
                fg: 200.0,
                bg: 10.0,
            }
        );
        let tex = parse_scene("texture:32x32:9", 1).unwrap();
        assert_eq!(
            tex,
            SceneSpec::Texture {
                height: 32,
                width: 32,
                seed: 9
            }
        );
        assert!(matches!(
            parse_scene("frames/scene.pgm", 1).unwrap(),
            SceneSpec::File(_)
        ));
    }

    #[test]
    fn missing_scene_file_fails_validation() {
        let err = parse_config("[experiment]\nhr_image = nope/missing.pgm\n[frame]\n");
        assert!(matches!(err, Err(Error::ConfigValue { .. })));
    }

    #[test]
    fn smoothing_eps_reaches_variant() {
        let cfg = parse_config("[solver]\ntv = smoothed\neps = 0.5\n[frame]\n").unwrap();
        assert_eq!(cfg.solver.tv, TvVariant::Smoothed { eps: 0.5 });
        let classic = parse_config("[solver]\ntv = classic\neps = 0.5\n[frame]\n").unwrap();
        assert_eq!(classic.solver.tv, TvVariant::Classic);
    }
}
