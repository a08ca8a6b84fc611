//! End-to-end tests through the `mfsr` binary: exit codes, report formats,
//! and the simulate -> flow / reconstruct / fuse / report workflows.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mfsr::config::parse_config_file;
use mfsr::pgm::read_pgm_file;

fn mfsr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mfsr"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn shipped_appendix_config_parses_to_eight_frames() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/appendixB.cfg");
    let cfg = parse_config_file(&path).unwrap();
    assert_eq!(cfg.frames.len(), 8);
    let snrs: Vec<f64> = cfg.frames.iter().map(|f| f.snr_db).collect();
    assert_eq!(snrs, vec![100.0, 50.0, 10.0, 20.0, 15.0, 30.0, 50.0, 10.0]);
    let kernels: Vec<u8> = cfg.frames.iter().map(|f| f.kernel).collect();
    assert_eq!(kernels, vec![1, 2, 3, 4, 5, 6, 7, 8]);
    assert!(cfg.frames.iter().all(|f| f.decim == 2));
}

#[test]
fn exit_codes_follow_the_contract() {
    let tmp = tempfile::tempdir().unwrap();

    // 2: config error (unparseable config)
    let bad = write_config(tmp.path(), "bad.cfg", "[solver]\nlambda = banana\n");
    let out = mfsr()
        .args(["simulate", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stdout_str(&out));

    // 2: missing required --config
    let out = mfsr().arg("simulate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // 3: data error (reconstruct without a simulated run directory)
    let cfg = write_config(
        tmp.path(),
        "ok.cfg",
        &format!(
            "[experiment]\nhr_image = blocks:16x16:3\noutput_dir = {}\n[frame]\n",
            tmp.path().join("empty").display()
        ),
    );
    let out = mfsr()
        .args(["reconstruct", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", stdout_str(&out));

    // 3: flow on frames of different shapes
    let a = tmp.path().join("a.pgm");
    let b = tmp.path().join("b.pgm");
    std::fs::write(&a, b"P2\n2 2\n255\n0 1 2 3").unwrap();
    std::fs::write(&b, b"P2\n3 2\n255\n0 1 2 3 4 5").unwrap();
    let out = mfsr().arg("flow").arg(&a).arg(&b).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    // 0: a tiny clean run
    let out = mfsr()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--output-dir"])
        .arg(tmp.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout_str(&out));
}

#[test]
fn appendix_layout_at_full_size_yields_64x64_frames() {
    let tmp = tempfile::tempdir().unwrap();
    let mut body = format!(
        "[experiment]\nhr_image = blocks:128x128:11\noutput_dir = {}\nmaster_seed = 9\n",
        tmp.path().join("run").display()
    );
    let snrs = [100, 50, 10, 20, 15, 30, 50, 10];
    for (k, snr) in snrs.iter().enumerate() {
        body.push_str(&format!(
            "[frame]\nkernel = {}\ndecim = 2\nsnr_db = {snr}\n",
            k + 1
        ));
    }
    let cfg = write_config(tmp.path(), "full.cfg", &body);
    let out = mfsr()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout_str(&out));
    for k in 1..=8 {
        let frame = read_pgm_file(tmp.path().join("run").join(format!("frame_{k}.pgm"))).unwrap();
        assert_eq!(frame.shape(), (64, 64), "frame {k}");
    }
}

#[test]
fn flow_cli_recovers_manifest_shift() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let body = format!(
        "[experiment]\nhr_image = rect:128x128:32,32,64,64\noutput_dir = {}\n\
         [frame]\nkernel = 0\ndecim = 1\n\
         [frame]\nkernel = 0\ndecim = 1\ndx = 10\ndy = 15\n",
        run.display()
    );
    let cfg = write_config(tmp.path(), "flow.cfg", &body);
    let out = mfsr()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout_str(&out));

    let out = mfsr()
        .arg("flow")
        .arg(run.join("frame_1.pgm"))
        .arg(run.join("frame_2.pgm"))
        .args(["--out"])
        .arg(run.join("flow"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout_str(&out));
    let text = stdout_str(&out);

    // stable machine-parseable report: estimated / true / error lines
    let estimated = text
        .lines()
        .find(|l| l.starts_with("estimated dx= "))
        .expect("estimated line");
    let mut fields = estimated.split_whitespace();
    let dx: f64 = fields.nth(2).unwrap().parse().unwrap();
    let dy: f64 = fields.nth(1).unwrap().parse().unwrap();
    assert!((dx - 10.0).abs() <= 0.5, "dx = {dx}");
    assert!((dy - 15.0).abs() <= 0.5, "dy = {dy}");
    assert!(text.lines().any(|l| l.starts_with("true dx= ")));
    assert!(text.lines().any(|l| l.starts_with("error dx= ")));

    assert!(run.join("flow/vx.pgm").exists());
    assert!(run.join("flow/vy.pgm").exists());
    assert!(run.join("flow/shift_report.txt").exists());
}

#[test]
fn flow_cli_on_identical_frames_reports_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let img = mfsr::image::synth_texture(32, 32, 8);
    mfsr::pgm::write_pgm_file(tmp.path().join("f.pgm"), &img, mfsr::pgm::PgmMode::Binary).unwrap();
    let out = mfsr()
        .arg("flow")
        .arg(tmp.path().join("f.pgm"))
        .arg(tmp.path().join("f.pgm"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    assert!(
        text.starts_with("estimated dx= 0.00000000000e0 dy= 0.00000000000e0"),
        "got: {text}"
    );
}

#[test]
fn reconstruct_fuse_and_report_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let body = format!(
        "[experiment]\nhr_image = blocks:32x32:5\noutput_dir = {}\nmaster_seed = 4\n\
         [solver]\nmm_max_iters = 5\ncg_eps = 1e-4\n\
         [frame]\nkernel = 1\ndecim = 2\nsnr_db = 40\n\
         [frame]\nkernel = 3\ndx = 1\ndecim = 2\nsnr_db = 25\n\
         [frame]\nkernel = 5\ndy = 1\ndecim = 2\nsnr_db = 30\n",
        run.display()
    );
    let cfg = write_config(tmp.path(), "rec.cfg", &body);
    for step in ["simulate", "reconstruct", "fuse"] {
        let out = mfsr()
            .args([step, "--config"])
            .arg(&cfg)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{step}: {}", stdout_str(&out));
    }
    for name in [
        "ground_truth.pgm",
        "manifest.txt",
        "x_hat.pgm",
        "trace.csv",
        "fused.pgm",
        "metrics.txt",
        "baseline_metrics.txt",
    ] {
        assert!(run.join(name).exists(), "{name} missing");
    }

    let trace = std::fs::read_to_string(run.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,objective,cg_iters\n"));
    let objectives: Vec<f64> = trace
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    for pair in objectives.windows(2) {
        assert!(pair[1] <= pair[0] * (1.0 + 1e-9), "trace not monotone");
    }

    let metrics = std::fs::read_to_string(run.join("metrics.txt")).unwrap();
    assert!(metrics.contains("mm_mse = "));
    assert!(metrics.contains("fusion_mse = "));
    assert!(metrics.contains("runtime_ms = "));

    let out = mfsr().args(["report", "--dir"]).arg(&run).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    assert!(text.contains("32x32 scene, 3 frames"));
    assert!(text.contains("frame 1"));
    assert!(text.contains("objective trace:"));
}

#[test]
fn solver_flag_overrides_take_effect() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let body = format!(
        "[experiment]\nhr_image = blocks:16x16:2\noutput_dir = {}\n[frame]\nkernel = 1\ndecim = 2\n",
        run.display()
    );
    let cfg = write_config(tmp.path(), "ov.cfg", &body);
    let out = mfsr()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));

    // an invalid override must be rejected as a config error
    let out = mfsr()
        .args(["reconstruct", "--config"])
        .arg(&cfg)
        .args(["--lambda", "-1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stdout_str(&out));

    let out = mfsr()
        .args(["reconstruct", "--config"])
        .arg(&cfg)
        .args(["--mm-max-iters", "2", "--tv", "classic"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout_str(&out));
    let trace = std::fs::read_to_string(run.join("trace.csv")).unwrap();
    assert!(trace.lines().count() <= 4); // header + initial + at most 2 iterations
}

#[test]
fn log_weighted_tv_is_a_config_error_in_the_solver() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let body = format!(
        "[experiment]\nhr_image = blocks:16x16:2\noutput_dir = {}\n[frame]\nkernel = 1\ndecim = 2\n",
        run.display()
    );
    let cfg = write_config(tmp.path(), "lw.cfg", &body);
    mfsr()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    let out = mfsr()
        .args(["reconstruct", "--config"])
        .arg(&cfg)
        .args(["--tv", "logweighted"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stdout_str(&out));
}
