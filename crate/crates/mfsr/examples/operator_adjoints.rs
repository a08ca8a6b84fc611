//! Matrix-free operators and their adjoints. Every operator in the crate
//! carries an `apply`/`apply_adjoint` pair; this example materializes a few
//! of them on a small grid and verifies the adjoint against the transpose,
//! the way the test oracles do.
//!
//! ```text
//! cargo run --example operator_adjoints
//! ```

use mfsr::image::{synth_texture, to_lex};
use mfsr::kernels::make_kernel;
use mfsr::op::{
    blur_op, compose, decimate_op, dense_materialize, dense_materialize_adjoint, diff_h, warp_op,
    Operator,
};

fn check(label: &str, op: &Operator) {
    // <A x, y> == <x, A' y> on a random pair, relative to the vector norms
    let x = to_lex(&synth_texture(op.in_shape().0, op.in_shape().1, 1));
    let y = to_lex(&synth_texture(op.out_shape().0, op.out_shape().1, 2));
    let lhs: f64 = op
        .apply(&x)
        .values()
        .iter()
        .zip(y.values())
        .map(|(a, b)| a * b)
        .sum();
    let rhs: f64 = x
        .values()
        .iter()
        .zip(op.apply_adjoint(&y).values())
        .map(|(a, b)| a * b)
        .sum();
    let norms = x.values().iter().map(|v| v * v).sum::<f64>().sqrt()
        * y.values().iter().map(|v| v * v).sum::<f64>().sqrt();

    // dense oracle: materialized adjoint equals the materialized transpose
    let transpose = dense_materialize(op).unwrap().transpose();
    let adjoint = dense_materialize_adjoint(op).unwrap();
    let max_entry_diff = transpose
        .data
        .iter()
        .zip(&adjoint.data)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    println!(
        "{label:<28} {}x{} -> {}x{}   pairing gap {:.2e}   transpose gap {:.2e}",
        op.in_shape().0,
        op.in_shape().1,
        op.out_shape().0,
        op.out_shape().1,
        (lhs - rhs).abs() / norms,
        max_entry_diff,
    );
}

fn main() -> mfsr::Result<()> {
    let shape = (12, 12);
    check("blur (kernel 1)", &blur_op(&make_kernel(1)?, shape)?);
    check("blur (kernel 7)", &blur_op(&make_kernel(7)?, shape)?);
    check("warp by (2, 1)", &warp_op(2.0, 1.0, shape)?);
    check("warp by (0.75, -0.5)", &warp_op(0.75, -0.5, shape)?);
    check("decimate by 2", &decimate_op(2, shape)?);
    check("decimate by 3", &decimate_op(3, shape)?);
    check("horizontal difference", &diff_h(shape)?);

    let observation = compose(vec![
        blur_op(&make_kernel(3)?, shape)?,
        warp_op(0.5, 1.5, shape)?,
        decimate_op(2, shape)?,
    ])?;
    check("blur ∘ warp ∘ decimate", &observation);
    Ok(())
}
