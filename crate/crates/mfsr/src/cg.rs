//! Conjugate gradient for symmetric positive (semi)definite systems.
//!
//! The operator is supplied as a closure computing `A*x`, so callers can
//! back it with anything from a dense matrix to a chain of image operators.
//! Iterations stop when `||r|| <= eps * ||y||` or the budget runs out; the
//! quadratic `q(x) = x'Ax/2 - y'x` is non-increasing along the way, which is
//! exactly the property the MM outer loop relies on.

use crate::error::{Error, Result};

/// Solution of one CG run.
#[derive(Debug, Clone)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Per-iteration view for instrumented runs. Borrows solver state; copy out
/// whatever needs to outlive the callback.
#[derive(Debug)]
pub struct CgStep<'a> {
    pub iteration: usize,
    pub residual_norm: f64,
    /// Search direction taken this iteration.
    pub direction: &'a [f64],
    /// Iterate after the step.
    pub x: &'a [f64],
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve `A x = y` from `x0`.
pub fn cg_solve(
    apply_a: impl Fn(&[f64]) -> Vec<f64>,
    y: &[f64],
    x0: &[f64],
    eps: f64,
    max_iters: usize,
) -> Result<CgResult> {
    cg_solve_observed(apply_a, y, x0, eps, max_iters, |_| {})
}

/// [`cg_solve`] with a per-iteration callback; tests use it to audit
/// residual decrease and direction conjugacy.
pub fn cg_solve_observed(
    apply_a: impl Fn(&[f64]) -> Vec<f64>,
    y: &[f64],
    x0: &[f64],
    eps: f64,
    max_iters: usize,
    mut observe: impl FnMut(&CgStep<'_>),
) -> Result<CgResult> {
    assert_eq!(y.len(), x0.len(), "rhs and start vector lengths differ");
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("cg eps must be positive, got {eps}")));
    }

    #[cfg(debug_assertions)]
    check_symmetry(&apply_a, y.len())?;

    let mut x = x0.to_vec();
    let ax = apply_a(&x);
    let mut r: Vec<f64> = y.iter().zip(&ax).map(|(a, b)| a - b).collect();
    let y_norm = norm(y);
    let threshold = eps * y_norm;
    let mut rho = dot(&r, &r);
    if !rho.is_finite() {
        return Err(Error::Numerical("non-finite initial residual".into()));
    }
    if rho.sqrt() <= threshold {
        return Ok(CgResult {
            x,
            iterations: 0,
            residual_norm: rho.sqrt(),
        });
    }

    let mut p = r.clone();
    let mut iterations = 0;
    for m in 1..=max_iters {
        let w = apply_a(&p);
        let p_dot_w = dot(&p, &w);
        if !p_dot_w.is_finite() {
            return Err(Error::Numerical("non-finite curvature p'Ap".into()));
        }
        if p_dot_w <= 0.0 {
            // PSD breakdown: no descent left along p
            if p_dot_w < 0.0 {
                return Err(Error::Numerical(format!(
                    "operator is not positive semidefinite: p'Ap = {p_dot_w}"
                )));
            }
            break;
        }
        let alpha = rho / p_dot_w;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * w[i];
        }
        let rho_next = dot(&r, &r);
        if !rho_next.is_finite() {
            return Err(Error::Numerical("non-finite residual".into()));
        }
        iterations = m;
        observe(&CgStep {
            iteration: m,
            residual_norm: rho_next.sqrt(),
            direction: &p,
            x: &x,
        });

        if rho_next.sqrt() <= threshold {
            rho = rho_next;
            break;
        }
        let beta = rho_next / rho;
        rho = rho_next;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
    }

    Ok(CgResult {
        x,
        iterations,
        residual_norm: rho.sqrt(),
    })
}

// Randomized probe: <A u, v> must equal <u, A v> for a symmetric operator.
#[cfg(debug_assertions)]
fn check_symmetry(apply_a: &impl Fn(&[f64]) -> Vec<f64>, n: usize) -> Result<()> {
    let mut state = 0x5ee0_1234_9abc_def0u64;
    let mut draw = || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let u: Vec<f64> = (0..n).map(|_| draw()).collect();
    let v: Vec<f64> = (0..n).map(|_| draw()).collect();
    let au = apply_a(&u);
    let av = apply_a(&v);
    let lhs = dot(&au, &v);
    let rhs = dot(&u, &av);
    let scale = norm(&au) * norm(&v) + norm(&u) * norm(&av) + 1e-300;
    if (lhs - rhs).abs() > 1e-8 * scale {
        return Err(Error::Numerical(format!(
            "operator fails symmetry probe: {lhs} vs {rhs}"
        )));
    }
    Ok(())
}
