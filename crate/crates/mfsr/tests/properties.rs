//! Property tests and cross-module oracles that don't belong to any single
//! module: randomized round trips, adjoint pairing over random shapes, CG
//! direction conjugacy, and the dense normal-equations oracle for the MM
//! update.

use proptest::prelude::*;

use mfsr::baseline::mad_register;
use mfsr::cg::cg_solve_observed;
use mfsr::forward::{observation_operators, simulate_observations, FrameSpec};
use mfsr::image::{from_lex, synth_texture, to_lex, ImageGrid};
use mfsr::kernels::make_kernel;
use mfsr::op::{blur_op, decimate_op, diff_h, diff_v, warp_op, Operator};
use mfsr::pgm::{read_pgm, write_pgm, PgmMode};
use mfsr::solver::{mm_deconvolve, normal_operator, SolverConfig};
use mfsr::tv::{mm_weights, TvVariant};
use mfsr::LexVector;

fn fill(h: usize, w: usize, seed: u64) -> Vec<f64> {
    let mut state = seed;
    (0..h * w)
        .map(|_| {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 * 255.0
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lex_round_trip_over_random_shapes(h in 1usize..=256, w in 1usize..=256, seed in any::<u64>()) {
        let img = ImageGrid::from_data(h, w, fill(h, w, seed)).unwrap();
        let lex = to_lex(&img);
        prop_assert_eq!(lex.len(), h * w);
        let back = from_lex(&lex);
        prop_assert_eq!(&back, &img);
        // and the vector direction too
        let again = to_lex(&back);
        prop_assert_eq!(again.values(), lex.values());
    }

    #[test]
    fn pgm_preserves_integer_images(h in 1usize..=40, w in 1usize..=40, seed in any::<u64>(), ascii in any::<bool>()) {
        let mut img = ImageGrid::from_data(h, w, fill(h, w, seed)).unwrap();
        for v in img.data_mut() {
            *v = v.round();
        }
        let mode = if ascii { PgmMode::Ascii } else { PgmMode::Binary };
        let back = read_pgm(&write_pgm(&img, mode)).unwrap();
        prop_assert_eq!(&back, &img);
    }

    #[test]
    fn adjoint_pairing_over_random_ops(
        h in 2usize..=32,
        w in 2usize..=32,
        kind in 0usize..5,
        seed in any::<u64>(),
        dx in -3.0f64..3.0,
        dy in -3.0f64..3.0,
    ) {
        let shape = (h.max(5), w.max(5)); // blur needs 5x5
        let op: Operator = match kind {
            0 => blur_op(&make_kernel(1 + (seed % 8) as u8).unwrap(), shape).unwrap(),
            1 => warp_op(dx, dy, shape).unwrap(),
            2 => {
                let r = if shape.0 % 3 == 0 && shape.1 % 3 == 0 { 3 } else { 1 };
                decimate_op(r, shape).unwrap()
            }
            3 => diff_h(shape).unwrap(),
            _ => diff_v(shape).unwrap(),
        };
        let x = LexVector::new(op.in_shape().0, op.in_shape().1,
            fill(op.in_shape().0, op.in_shape().1, seed)).unwrap();
        let y = LexVector::new(op.out_shape().0, op.out_shape().1,
            fill(op.out_shape().0, op.out_shape().1, seed ^ 0xffff)).unwrap();
        let lhs: f64 = op.apply(&x).values().iter().zip(y.values()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.values().iter().zip(op.apply_adjoint(&y).values()).map(|(a, b)| a * b).sum();
        let nx = x.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = y.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * nx * ny);
    }

    #[test]
    fn registration_recovers_random_integer_shifts(
        dx in -5i32..=5,
        dy in -5i32..=5,
        seed in any::<u64>(),
    ) {
        let reference = synth_texture(24, 24, seed);
        let shifted = {
            let op = warp_op(f64::from(dx), f64::from(dy), reference.shape()).unwrap();
            from_lex(&op.apply(&to_lex(&reference)))
        };
        let result = mad_register(&reference, &shifted, 5).unwrap();
        prop_assert_eq!(result.shift, (dx, dy));
    }
}

#[test]
fn cg_directions_are_mutually_conjugate() {
    let n = 12;
    let g = fill(n, n, 0xc0ffee);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += g[k * n + i] * g[k * n + j] / 255.0 / 255.0 / n as f64;
            }
            a[i * n + j] = acc + if i == j { 1.0 } else { 0.0 };
        }
    }
    let apply = |x: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
            .collect()
    };
    let y = fill(1, n, 0xbeef);

    let mut directions: Vec<Vec<f64>> = Vec::new();
    cg_solve_observed(apply, &y, &vec![0.0; n], 1e-6, n, |step| {
        directions.push(step.direction.to_vec());
    })
    .unwrap();
    assert!(directions.len() >= 4, "want several directions to compare");

    let a_norm = |p: &[f64]| -> f64 {
        let ap = apply(p);
        p.iter().zip(&ap).map(|(x, y)| x * y).sum::<f64>().sqrt()
    };
    for i in 0..directions.len() {
        for j in 0..i {
            let api: Vec<f64> = apply(&directions[i]);
            let cross: f64 = directions[j].iter().zip(&api).map(|(x, y)| x * y).sum();
            let bound = 1e-8 * a_norm(&directions[i]) * a_norm(&directions[j]);
            assert!(
                cross.abs() <= bound,
                "directions {j} and {i} not conjugate: {cross} vs bound {bound}"
            );
        }
    }
}

#[test]
fn mm_normal_operator_is_symmetric_psd() {
    let hr = synth_texture(8, 8, 31);
    let specs = vec![
        FrameSpec {
            psf_id: 4,
            dx: 0.5,
            dy: 1.0,
            decim: 2,
            snr_db: 20.0,
            seed: 7,
        },
        FrameSpec {
            psf_id: 6,
            dx: -1.0,
            dy: 0.5,
            decim: 2,
            snr_db: 30.0,
            seed: 8,
        },
    ];
    let obs = simulate_observations(&hr, &specs).unwrap();
    let ops = observation_operators(&obs).unwrap();
    let weights = mm_weights(&hr, 1.0, TvVariant::Smoothed { eps: 1.0 }).unwrap();
    let apply = normal_operator(&ops, &weights);

    for trial in 0..100 {
        let x = fill(8, 8, 500 + trial);
        let y = fill(8, 8, 900 + trial);
        let ax = apply(&x);
        let ay = apply(&y);
        let xay: f64 = x.iter().zip(&ay).map(|(a, b)| a * b).sum();
        let yax: f64 = y.iter().zip(&ax).map(|(a, b)| a * b).sum();
        let scale: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt()
            * y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((xay - yax).abs() <= 1e-10 * scale, "symmetry broke");

        let xax: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        let xx: f64 = x.iter().map(|v| v * v).sum();
        assert!(xax >= -1e-10 * xx, "negative curvature: {xax}");
    }
}

// One exact outer solve through a dense materialization of the normal
// operator must agree with the CG-based iterate when CG runs to tolerance.
#[test]
fn dense_normal_equations_match_first_mm_iterate() {
    let hr = synth_texture(8, 8, 77);
    let specs = vec![
        FrameSpec {
            psf_id: 1,
            dx: 0.0,
            dy: 0.0,
            decim: 2,
            snr_db: 40.0,
            seed: 11,
        },
        FrameSpec {
            psf_id: 3,
            dx: 1.0,
            dy: 1.0,
            decim: 2,
            snr_db: 25.0,
            seed: 12,
        },
    ];
    let obs = simulate_observations(&hr, &specs).unwrap();
    let ops = observation_operators(&obs).unwrap();
    let cfg = SolverConfig {
        cg_eps: 1e-12,
        cg_max_iters: 500,
        mm_max_iters: 1,
        mm_rel_tol: 0.0,
        ..SolverConfig::default()
    };
    let mm = mm_deconvolve(&obs, &ops, &cfg).unwrap();

    // rebuild the same first step densely: X0 = Y' and W from X0
    let mut y_prime = vec![0.0; 64];
    for (op, frame) in ops.iter().zip(&obs.frames) {
        let back = op.apply_adjoint(&to_lex(&frame.image));
        for (acc, b) in y_prime.iter_mut().zip(back.values()) {
            *acc += b;
        }
    }
    let x0 = from_lex(&LexVector::new(8, 8, y_prime.clone()).unwrap());
    let weights = mm_weights(&x0, cfg.lambda, cfg.tv).unwrap();
    let apply = normal_operator(&ops, &weights);

    let dense = nalgebra::DMatrix::from_fn(64, 64, |i, j| {
        let mut e = vec![0.0; 64];
        e[j] = 1.0;
        apply(&e)[i]
    });
    let rhs = nalgebra::DVector::from_column_slice(&y_prime);
    let exact = dense.lu().solve(&rhs).expect("normal system must solve");

    let got = to_lex(&mm.x_hat);
    let diff: f64 = got
        .values()
        .iter()
        .zip(exact.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(diff <= 1e-6 * scale, "dense vs CG differ: {diff} / {scale}");
}
