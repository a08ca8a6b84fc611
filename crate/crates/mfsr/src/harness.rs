//! Experiment driver behind the CLI: dataset simulation, flow estimation,
//! reconstruction, the fusion baseline, and plain-text reporting.
//!
//! Every command is deterministic given `(config, master_seed)`: reruns
//! produce byte-identical PGMs and CSVs. Wall-clock timings are reported
//! only in `metrics.txt`, which is the one file excluded from that promise.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::baseline::{fuse, mad_register, zero_fill_interpolate};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::flow::{estimate_global_shift, horn_schunck, FlowConfig};
use crate::forward::{
    frame_operator, observation_operators, simulate_observations, FrameSpec, Observation,
    ObservationSet,
};
use crate::image::{from_lex, to_lex, ImageGrid};
use crate::metrics::{mad_metric, mse_metric};
use crate::pgm::{read_pgm_file, write_pgm, PgmMode};
use crate::solver::{mm_deconvolve, MmResult};

/// Floats in manifests, metrics, and traces print with 12 significant
/// digits so reruns are byte-identical.
pub fn fmt_g12(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.11e}")
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// One frame as recorded in `manifest.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestFrame {
    pub file: String,
    pub spec: FrameSpec,
    pub noise_var: f64,
    pub sha256: String,
}

/// Parsed contents of a run directory's `manifest.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub hr_height: usize,
    pub hr_width: usize,
    pub ground_truth: Option<String>,
    pub frames: Vec<ManifestFrame>,
}

impl RunManifest {
    fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "hr_height = {}", self.hr_height);
        let _ = writeln!(out, "hr_width = {}", self.hr_width);
        if let Some(gt) = &self.ground_truth {
            let _ = writeln!(out, "ground_truth = {gt}");
        }
        let _ = writeln!(out, "n_frames = {}", self.frames.len());
        for (i, f) in self.frames.iter().enumerate() {
            let k = i + 1;
            let _ = writeln!(out, "frame_{k}_file = {}", f.file);
            let _ = writeln!(out, "frame_{k}_kernel = {}", f.spec.psf_id);
            let _ = writeln!(out, "frame_{k}_dx = {}", fmt_g12(f.spec.dx));
            let _ = writeln!(out, "frame_{k}_dy = {}", fmt_g12(f.spec.dy));
            let _ = writeln!(out, "frame_{k}_decim = {}", f.spec.decim);
            let _ = writeln!(out, "frame_{k}_snr_db = {}", fmt_g12(f.spec.snr_db));
            let _ = writeln!(out, "frame_{k}_seed = {}", f.spec.seed);
            let _ = writeln!(out, "frame_{k}_noise_var = {}", fmt_g12(f.noise_var));
            let _ = writeln!(out, "frame_{k}_sha256 = {}", f.sha256);
        }
        out
    }

    /// Parse `manifest.txt` content.
    pub fn parse(text: &str) -> Result<RunManifest> {
        let mut map = std::collections::BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("manifest line without `=`: `{line}`"))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |key: &str| -> Result<&String> {
            map.get(key)
                .ok_or_else(|| Error::Format(format!("manifest missing key `{key}`")))
        };
        let parse_usize = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| Error::Format(format!("manifest key `{key}` is not an integer")))
        };
        let parse_f64 = |key: &str| -> Result<f64> {
            get(key)?
                .parse()
                .map_err(|_| Error::Format(format!("manifest key `{key}` is not a number")))
        };

        let hr_height = parse_usize("hr_height")?;
        let hr_width = parse_usize("hr_width")?;
        let n = parse_usize("n_frames")?;
        let mut frames = Vec::with_capacity(n);
        for k in 1..=n {
            frames.push(ManifestFrame {
                file: get(&format!("frame_{k}_file"))?.clone(),
                spec: FrameSpec {
                    psf_id: parse_usize(&format!("frame_{k}_kernel"))? as u8,
                    dx: parse_f64(&format!("frame_{k}_dx"))?,
                    dy: parse_f64(&format!("frame_{k}_dy"))?,
                    decim: parse_usize(&format!("frame_{k}_decim"))?,
                    snr_db: parse_f64(&format!("frame_{k}_snr_db"))?,
                    seed: get(&format!("frame_{k}_seed"))?.parse().map_err(|_| {
                        Error::Format(format!("manifest key `frame_{k}_seed` is not an integer"))
                    })?,
                },
                noise_var: parse_f64(&format!("frame_{k}_noise_var"))?,
                sha256: get(&format!("frame_{k}_sha256"))?.clone(),
            });
        }
        Ok(RunManifest {
            hr_height,
            hr_width,
            ground_truth: map.get("ground_truth").cloned(),
            frames,
        })
    }
}

/// Outcome of [`cmd_simulate`].
#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub manifest_path: PathBuf,
    pub frame_paths: Vec<PathBuf>,
}

/// Generate the dataset described by `cfg` into `cfg.output_dir`:
/// `ground_truth.pgm`, `frame_k.pgm`, and `manifest.txt`.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<SimulateReport> {
    if cfg.frames.is_empty() {
        return Err(Error::EmptyObservation);
    }
    let scene = cfg.scene.load()?;
    let specs = cfg.frame_specs();
    let obs = simulate_observations(&scene, &specs)?;

    fs::create_dir_all(&cfg.output_dir)?;
    let gt_bytes = write_pgm(&scene, PgmMode::Binary);
    fs::write(cfg.output_dir.join("ground_truth.pgm"), &gt_bytes)?;

    let scene_lex = to_lex(&scene);
    let mut frames = Vec::new();
    let mut frame_paths = Vec::new();
    for (k, frame) in obs.frames.iter().enumerate() {
        let file = format!("frame_{}.pgm", k + 1);
        let bytes = write_pgm(&frame.image, PgmMode::Binary);
        fs::write(cfg.output_dir.join(&file), &bytes)?;

        // replay the clean pipeline to record the realised noise variance
        let clean = from_lex(&frame_operator(&frame.spec, scene.shape())?.apply(&scene_lex));
        let noise_var = frame
            .image
            .data()
            .iter()
            .zip(clean.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / clean.len() as f64;

        frames.push(ManifestFrame {
            file: file.clone(),
            spec: frame.spec.clone(),
            noise_var,
            sha256: sha256_hex(&bytes),
        });
        frame_paths.push(cfg.output_dir.join(&file));
    }

    let manifest = RunManifest {
        hr_height: scene.height(),
        hr_width: scene.width(),
        ground_truth: Some("ground_truth.pgm".to_string()),
        frames,
    };
    let manifest_path = cfg.output_dir.join("manifest.txt");
    fs::write(&manifest_path, manifest.render())?;
    Ok(SimulateReport {
        manifest_path,
        frame_paths,
    })
}

// Load the observation set a manifest points at.
fn load_observations(dir: &Path, manifest: &RunManifest) -> Result<ObservationSet> {
    let mut frames = Vec::with_capacity(manifest.frames.len());
    for entry in &manifest.frames {
        let image = read_pgm_file(dir.join(&entry.file))?;
        frames.push(Observation {
            spec: entry.spec.clone(),
            image,
        });
    }
    Ok(ObservationSet {
        hr_height: manifest.hr_height,
        hr_width: manifest.hr_width,
        frames,
    })
}

fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join("manifest.txt");
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))?;
    RunManifest::parse(&text)
}

/// Fusion baseline: interpolate each LR frame onto the fine grid, register
/// to the first frame by exhaustive MAD, unshift and average. Returns the
/// fused image and each frame's interpolated version.
pub fn fusion_baseline(
    obs: &ObservationSet,
    sweeps: usize,
    radius: usize,
) -> Result<(ImageGrid, Vec<ImageGrid>)> {
    if obs.is_empty() {
        return Err(Error::EmptyObservation);
    }
    let mut interpolated = Vec::with_capacity(obs.len());
    for frame in &obs.frames {
        let up = zero_fill_interpolate(&frame.image, frame.spec.decim, sweeps);
        if up.shape() != obs.hr_shape() {
            return Err(Error::Dimension(format!(
                "interpolated frame is {:?}, scene is {:?}",
                up.shape(),
                obs.hr_shape()
            )));
        }
        interpolated.push(up);
    }
    let radius = radius.min(obs.hr_height.min(obs.hr_width) - 1);
    let mut shifts = Vec::with_capacity(interpolated.len());
    for up in &interpolated {
        let reg = mad_register(&interpolated[0], up, radius)?;
        shifts.push(reg.shift);
    }
    let fused = fuse(&interpolated, &shifts)?;
    Ok((fused, interpolated))
}

/// Outcome of [`cmd_reconstruct`].
#[derive(Debug, Clone)]
pub struct ReconstructReport {
    pub mm: MmResult,
    pub fused: ImageGrid,
    pub mm_mse: Option<f64>,
    pub mm_mad: Option<f64>,
    pub fusion_mse: Option<f64>,
    pub fusion_mad: Option<f64>,
    /// MSE of the best single zero-fill-interpolated frame, when truth known.
    pub best_interp_mse: Option<f64>,
}

/// Reconstruct from a simulated (or user-supplied) run directory. Writes
/// `x_hat.pgm`, `trace.csv`, `fused.pgm`, and `metrics.txt`; on failure any
/// partial outputs are removed.
pub fn cmd_reconstruct(cfg: &ExperimentConfig) -> Result<ReconstructReport> {
    let dir = cfg.output_dir.clone();
    let outputs = [
        dir.join("x_hat.pgm"),
        dir.join("trace.csv"),
        dir.join("fused.pgm"),
        dir.join("metrics.txt"),
    ];
    let run = || -> Result<ReconstructReport> {
        let started = std::time::Instant::now();
        let manifest = read_manifest(&dir)?;
        let obs = load_observations(&dir, &manifest)?;
        let ops = observation_operators(&obs)?;
        let mm = mm_deconvolve(&obs, &ops, &cfg.solver)?;

        fs::write(
            dir.join("x_hat.pgm"),
            write_pgm(&mm.x_hat, PgmMode::Binary),
        )?;

        let mut trace_csv = String::from("iter,objective,cg_iters\n");
        for (i, l) in mm.trace.iter().enumerate() {
            let cg = if i == 0 { 0 } else { mm.cg_iterations[i - 1] };
            let _ = writeln!(trace_csv, "{i},{},{cg}", fmt_g12(*l));
        }
        fs::write(dir.join("trace.csv"), trace_csv)?;

        let (fused, interpolated) =
            fusion_baseline(&obs, cfg.baseline.sweeps, cfg.baseline.radius)?;
        fs::write(dir.join("fused.pgm"), write_pgm(&fused, PgmMode::Binary))?;

        let truth = match &manifest.ground_truth {
            Some(name) => Some(read_pgm_file(dir.join(name))?),
            None => None,
        };
        let mut report = ReconstructReport {
            mm,
            fused,
            mm_mse: None,
            mm_mad: None,
            fusion_mse: None,
            fusion_mad: None,
            best_interp_mse: None,
        };
        if let Some(gt) = &truth {
            report.mm_mse = Some(mse_metric(gt, &report.mm.x_hat)?);
            report.mm_mad = Some(mad_metric(gt, &report.mm.x_hat)?);
            report.fusion_mse = Some(mse_metric(gt, &report.fused)?);
            report.fusion_mad = Some(mad_metric(gt, &report.fused)?);
            let mut best = f64::INFINITY;
            for up in &interpolated {
                best = best.min(mse_metric(gt, up)?);
            }
            report.best_interp_mse = Some(best);
        }

        let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
        let mut metrics = String::new();
        let _ = writeln!(metrics, "outer_iterations = {}", report.mm.trace.len() - 1);
        let _ = writeln!(
            metrics,
            "final_objective = {}",
            fmt_g12(*report.mm.trace.last().expect("non-empty trace"))
        );
        if let (Some(mse), Some(mad)) = (report.mm_mse, report.mm_mad) {
            let _ = writeln!(metrics, "mm_mse = {}", fmt_g12(mse));
            let _ = writeln!(metrics, "mm_mad = {}", fmt_g12(mad));
        }
        if let (Some(mse), Some(mad)) = (report.fusion_mse, report.fusion_mad) {
            let _ = writeln!(metrics, "fusion_mse = {}", fmt_g12(mse));
            let _ = writeln!(metrics, "fusion_mad = {}", fmt_g12(mad));
        }
        if let Some(best) = report.best_interp_mse {
            let _ = writeln!(metrics, "best_interp_mse = {}", fmt_g12(best));
        }
        let _ = writeln!(metrics, "runtime_ms = {}", fmt_g12(runtime_ms));
        fs::write(dir.join("metrics.txt"), metrics)?;
        Ok(report)
    };

    match run() {
        Ok(report) => Ok(report),
        Err(e) => {
            for path in &outputs {
                let _ = fs::remove_file(path);
            }
            Err(e)
        }
    }
}

/// Run only the fusion baseline; writes `fused.pgm` and
/// `baseline_metrics.txt` into the run directory.
pub fn cmd_fuse(cfg: &ExperimentConfig) -> Result<ImageGrid> {
    let dir = cfg.output_dir.clone();
    let manifest = read_manifest(&dir)?;
    let obs = load_observations(&dir, &manifest)?;
    let (fused, _) = fusion_baseline(&obs, cfg.baseline.sweeps, cfg.baseline.radius)?;
    fs::write(dir.join("fused.pgm"), write_pgm(&fused, PgmMode::Binary))?;

    let mut metrics = String::new();
    if let Some(name) = &manifest.ground_truth {
        let gt = read_pgm_file(dir.join(name))?;
        let _ = writeln!(metrics, "fusion_mse = {}", fmt_g12(mse_metric(&gt, &fused)?));
        let _ = writeln!(metrics, "fusion_mad = {}", fmt_g12(mad_metric(&gt, &fused)?));
    }
    let _ = writeln!(metrics, "n_frames = {}", obs.len());
    fs::write(dir.join("baseline_metrics.txt"), metrics)?;
    Ok(fused)
}

/// Outcome of [`cmd_flow`].
#[derive(Debug, Clone)]
pub struct FlowReport {
    pub estimated: (f64, f64),
    pub true_shift: Option<(f64, f64)>,
}

impl FlowReport {
    /// Render the stable, machine-parseable report text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "estimated dx= {} dy= {}",
            fmt_g12(self.estimated.0),
            fmt_g12(self.estimated.1)
        );
        if let Some((tx, ty)) = self.true_shift {
            let _ = writeln!(out, "true dx= {} dy= {}", fmt_g12(tx), fmt_g12(ty));
            let _ = writeln!(
                out,
                "error dx= {} dy= {}",
                fmt_g12(self.estimated.0 - tx),
                fmt_g12(self.estimated.1 - ty)
            );
        }
        out
    }
}

// When both frames appear in a manifest next to frame_a, their spec shifts
// give the true relative displacement. Manifest shifts are in fine-grid
// pixels; the flow runs on the decimated frames, so convert.
fn true_shift_from_manifest(frame_a: &Path, frame_b: &Path) -> Option<(f64, f64)> {
    let dir = frame_a.parent()?;
    let manifest = read_manifest(dir).ok()?;
    let name_a = frame_a.file_name()?.to_str()?;
    let name_b = frame_b.file_name()?.to_str()?;
    let spec_a = &manifest.frames.iter().find(|f| f.file == name_a)?.spec;
    let spec_b = &manifest.frames.iter().find(|f| f.file == name_b)?.spec;
    if spec_a.decim != spec_b.decim {
        return None; // frames live on different grids
    }
    let r = spec_a.decim as f64;
    Some(((spec_b.dx - spec_a.dx) / r, (spec_b.dy - spec_a.dy) / r))
}

// Affine map of a field onto [0, 255] for a viewable diagnostic.
fn scale_for_display(img: &ImageGrid) -> ImageGrid {
    let min = img.data().iter().cloned().fold(f64::INFINITY, f64::min);
    let max = img.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return ImageGrid::filled(img.height(), img.width(), 128.0);
    }
    let mut out = img.clone();
    for v in out.data_mut() {
        *v = (*v - min) / (max - min) * 255.0;
    }
    out
}

/// Estimate the global shift between two PGM frames. When `out_dir` is
/// given, writes `vx.pgm`, `vy.pgm` (display-scaled) and `shift_report.txt`.
pub fn cmd_flow(
    frame_a: &Path,
    frame_b: &Path,
    flow_cfg: &FlowConfig,
    out_dir: Option<&Path>,
) -> Result<FlowReport> {
    let a = read_pgm_file(frame_a)?;
    let b = read_pgm_file(frame_b)?;
    let estimated = estimate_global_shift(&a, &b, flow_cfg, 0.5)?;
    let flow = horn_schunck(&a, &b, flow_cfg)?;
    let report = FlowReport {
        estimated,
        true_shift: true_shift_from_manifest(frame_a, frame_b),
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(
            dir.join("vx.pgm"),
            write_pgm(&scale_for_display(&flow.vx), PgmMode::Binary),
        )?;
        fs::write(
            dir.join("vy.pgm"),
            write_pgm(&scale_for_display(&flow.vy), PgmMode::Binary),
        )?;
        fs::write(dir.join("shift_report.txt"), report.render())?;
    }
    Ok(report)
}

/// Human-readable summary of a run directory.
pub fn cmd_report(dir: &Path) -> Result<String> {
    let manifest = read_manifest(dir)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "run directory {} ({}x{} scene, {} frames)",
        dir.display(),
        manifest.hr_height,
        manifest.hr_width,
        manifest.frames.len()
    );
    for (i, f) in manifest.frames.iter().enumerate() {
        let _ = writeln!(
            out,
            "  frame {}: {} kernel={} shift=({}, {}) decim={} snr_db={} noise_var={}",
            i + 1,
            f.file,
            f.spec.psf_id,
            fmt_g12(f.spec.dx),
            fmt_g12(f.spec.dy),
            f.spec.decim,
            fmt_g12(f.spec.snr_db),
            fmt_g12(f.noise_var)
        );
    }
    if let Ok(metrics) = fs::read_to_string(dir.join("metrics.txt")) {
        let _ = writeln!(out, "metrics:");
        for line in metrics.lines() {
            let _ = writeln!(out, "  {line}");
        }
    }
    if let Ok(trace) = fs::read_to_string(dir.join("trace.csv")) {
        let _ = writeln!(out, "objective trace:");
        for line in trace.lines().skip(1) {
            let _ = writeln!(out, "  {line}");
        }
    }
    Ok(out)
}
