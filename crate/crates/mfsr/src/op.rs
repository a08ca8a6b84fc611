//! Matrix-free linear operators over lexicographic image vectors.
//!
//! Every operator carries explicit input/output shapes and provides the
//! forward map together with its exact adjoint, so `<A x, y> == <x, A^T y>`
//! up to rounding. Nothing here ever materializes a matrix except
//! [`dense_materialize`], which exists as a small-scale test oracle.
//!
//! Index convention: a `(h, w)` image flattens column-major, element
//! `c*h + r` holding pixel `(r, c)`.

use crate::error::{Error, Result};
use crate::image::LexVector;
use crate::kernels::Psf;

/// Cap on `in_len * out_len` for dense materialization.
pub const DENSE_CAP: usize = 1 << 22;

/// Structured description of what an operator does.
#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    Blur(Psf),
    Warp { dx: f64, dy: f64 },
    Decimate(usize),
    DiffH,
    DiffV,
    Identity,
    Composite(Vec<Operator>),
}

/// A linear map between image vectors, with its adjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    kind: OpKind,
    in_shape: (usize, usize),
    out_shape: (usize, usize),
}

impl Operator {
    pub fn kind(&self) -> &OpKind {
        &self.kind
    }

    pub fn in_shape(&self) -> (usize, usize) {
        self.in_shape
    }

    pub fn out_shape(&self) -> (usize, usize) {
        self.out_shape
    }

    pub fn in_len(&self) -> usize {
        self.in_shape.0 * self.in_shape.1
    }

    pub fn out_len(&self) -> usize {
        self.out_shape.0 * self.out_shape.1
    }

    /// Forward application. Panics if `x` does not match the input shape.
    pub fn apply(&self, x: &LexVector) -> LexVector {
        assert_eq!(x.shape(), self.in_shape, "operator input shape mismatch");
        let (h, w) = self.in_shape;
        let values = match &self.kind {
            OpKind::Blur(psf) => correlate(x.values(), h, w, psf.taps()),
            OpKind::Warp { dx, dy } => warp_forward(x.values(), h, w, *dx, *dy),
            OpKind::Decimate(r) => decimate_forward(x.values(), h, w, *r),
            OpKind::DiffH => diff_h_forward(x.values(), h, w),
            OpKind::DiffV => diff_v_forward(x.values(), h, w),
            OpKind::Identity => x.values().to_vec(),
            OpKind::Composite(ops) => {
                let mut cur = x.clone();
                for op in ops {
                    cur = op.apply(&cur);
                }
                return cur;
            }
        };
        let (oh, ow) = self.out_shape;
        LexVector::new(oh, ow, values).expect("operator produced wrong length")
    }

    /// Adjoint application. Panics if `y` does not match the output shape.
    pub fn apply_adjoint(&self, y: &LexVector) -> LexVector {
        assert_eq!(y.shape(), self.out_shape, "operator output shape mismatch");
        let (h, w) = self.in_shape;
        let (oh, ow) = self.out_shape;
        let values = match &self.kind {
            OpKind::Blur(psf) => correlate(y.values(), h, w, &rot180(psf.taps())),
            OpKind::Warp { dx, dy } => warp_adjoint(y.values(), h, w, *dx, *dy),
            OpKind::Decimate(r) => decimate_adjoint(y.values(), oh, ow, *r),
            OpKind::DiffH => diff_h_adjoint(y.values(), h, w),
            OpKind::DiffV => diff_v_adjoint(y.values(), h, w),
            OpKind::Identity => y.values().to_vec(),
            OpKind::Composite(ops) => {
                let mut cur = y.clone();
                for op in ops.iter().rev() {
                    cur = op.apply_adjoint(&cur);
                }
                return cur;
            }
        };
        LexVector::new(h, w, values).expect("adjoint produced wrong length")
    }
}

/// Same-size 2-D correlation with a 5x5 PSF, zero padding at the borders.
pub fn blur_op(psf: &Psf, shape: (usize, usize)) -> Result<Operator> {
    let (h, w) = shape;
    if h < 5 || w < 5 {
        return Err(Error::Dimension(format!(
            "blur needs at least 5x5, got {h}x{w}"
        )));
    }
    Ok(Operator {
        kind: OpKind::Blur(psf.clone()),
        in_shape: shape,
        out_shape: shape,
    })
}

/// Global translation by `(dx, dy)` pixels (columns, rows) with bilinear
/// interpolation and zero fill outside the source. Integer shifts reduce to
/// exact pixel copies.
pub fn warp_op(dx: f64, dy: f64, shape: (usize, usize)) -> Result<Operator> {
    let (h, w) = shape;
    let bound = h.min(w) as f64;
    if !dx.is_finite() || !dy.is_finite() || dx.abs() >= bound || dy.abs() >= bound {
        return Err(Error::Dimension(format!(
            "shift ({dx}, {dy}) too large for {h}x{w}"
        )));
    }
    Ok(Operator {
        kind: OpKind::Warp { dx, dy },
        in_shape: shape,
        out_shape: shape,
    })
}

/// Keep pixels at rows/cols congruent to 0 mod `r` (top-left phase). The
/// adjoint zero-fills back onto the fine grid.
pub fn decimate_op(r: usize, shape: (usize, usize)) -> Result<Operator> {
    let (h, w) = shape;
    if r == 0 || h % r != 0 || w % r != 0 {
        return Err(Error::Dimension(format!(
            "decimation factor {r} does not divide {h}x{w}"
        )));
    }
    Ok(Operator {
        kind: OpKind::Decimate(r),
        in_shape: shape,
        out_shape: (h / r, w / r),
    })
}

/// First-order backward horizontal difference; first column maps to 0.
pub fn diff_h(shape: (usize, usize)) -> Result<Operator> {
    diff_op(shape, OpKind::DiffH)
}

/// First-order backward vertical difference; first row maps to 0.
pub fn diff_v(shape: (usize, usize)) -> Result<Operator> {
    diff_op(shape, OpKind::DiffV)
}

fn diff_op(shape: (usize, usize), kind: OpKind) -> Result<Operator> {
    let (h, w) = shape;
    if h < 2 || w < 2 {
        return Err(Error::Dimension(format!(
            "difference operators need at least 2x2, got {h}x{w}"
        )));
    }
    Ok(Operator {
        kind,
        in_shape: shape,
        out_shape: shape,
    })
}

/// Identity on the given shape.
pub fn identity_op(shape: (usize, usize)) -> Operator {
    Operator {
        kind: OpKind::Identity,
        in_shape: shape,
        out_shape: shape,
    }
}

/// Chain operators left-to-right: `compose([B, M, D])` applies B first.
pub fn compose(ops: Vec<Operator>) -> Result<Operator> {
    if ops.is_empty() {
        return Err(Error::Dimension("compose of empty operator list".into()));
    }
    for pair in ops.windows(2) {
        if pair[0].out_shape != pair[1].in_shape {
            return Err(Error::Dimension(format!(
                "composition shape mismatch: {:?} feeds {:?}",
                pair[0].out_shape, pair[1].in_shape
            )));
        }
    }
    let in_shape = ops[0].in_shape;
    let out_shape = ops[ops.len() - 1].out_shape;
    Ok(Operator {
        kind: OpKind::Composite(ops),
        in_shape,
        out_shape,
    })
}

/// Dense matrix, row-major. Exists for test oracles and tiny systems.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Materialize `op` column by column: column j is `op.apply(e_j)`.
pub fn dense_materialize(op: &Operator) -> Result<DenseMatrix> {
    let (in_len, out_len) = (op.in_len(), op.out_len());
    if in_len.saturating_mul(out_len) > DENSE_CAP {
        return Err(Error::SizeCap {
            in_len,
            out_len,
            cap: DENSE_CAP,
        });
    }
    let (h, w) = op.in_shape();
    let mut mat = DenseMatrix::zeros(out_len, in_len);
    for j in 0..in_len {
        let mut e = LexVector::zeros(h, w);
        e.values_mut()[j] = 1.0;
        let col = op.apply(&e);
        for (i, v) in col.values().iter().enumerate() {
            mat.set(i, j, *v);
        }
    }
    Ok(mat)
}

/// Materialize the adjoint map directly (columns are `apply_adjoint(e_i)`).
/// Comparing against [`dense_materialize`]`(op).transpose()` checks that the
/// adjoint really is the transpose.
pub fn dense_materialize_adjoint(op: &Operator) -> Result<DenseMatrix> {
    let (in_len, out_len) = (op.in_len(), op.out_len());
    if in_len.saturating_mul(out_len) > DENSE_CAP {
        return Err(Error::SizeCap {
            in_len,
            out_len,
            cap: DENSE_CAP,
        });
    }
    let (oh, ow) = op.out_shape();
    let mut mat = DenseMatrix::zeros(in_len, out_len);
    for j in 0..out_len {
        let mut e = LexVector::zeros(oh, ow);
        e.values_mut()[j] = 1.0;
        let col = op.apply_adjoint(&e);
        for (i, v) in col.values().iter().enumerate() {
            mat.set(i, j, *v);
        }
    }
    Ok(mat)
}

#[inline]
fn idx(r: usize, c: usize, h: usize) -> usize {
    c * h + r
}

fn correlate(x: &[f64], h: usize, w: usize, taps: &[[f64; 5]; 5]) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for c in 0..w {
        for r in 0..h {
            let mut acc = 0.0;
            for (tr, row) in taps.iter().enumerate() {
                let sr = r as i64 + tr as i64 - 2;
                if sr < 0 || sr >= h as i64 {
                    continue;
                }
                for (tc, &t) in row.iter().enumerate() {
                    if t == 0.0 {
                        continue;
                    }
                    let sc = c as i64 + tc as i64 - 2;
                    if sc < 0 || sc >= w as i64 {
                        continue;
                    }
                    acc += t * x[idx(sr as usize, sc as usize, h)];
                }
            }
            out[idx(r, c, h)] = acc;
        }
    }
    out
}

fn rot180(taps: &[[f64; 5]; 5]) -> [[f64; 5]; 5] {
    let mut out = [[0.0; 5]; 5];
    for r in 0..5 {
        for c in 0..5 {
            out[r][c] = taps[4 - r][4 - c];
        }
    }
    out
}

// Bilinear gather: out(r, c) samples the source at (r - dy, c - dx).
fn warp_forward(x: &[f64], h: usize, w: usize, dx: f64, dy: f64) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for c in 0..w {
        for r in 0..h {
            let mut acc = 0.0;
            for (sr, sc, wt) in bilinear_sources(r, c, dx, dy, h, w) {
                acc += wt * x[idx(sr, sc, h)];
            }
            out[idx(r, c, h)] = acc;
        }
    }
    out
}

// Exact transpose of the gather: scatter each output value back onto its
// source cells with the same weights.
fn warp_adjoint(y: &[f64], h: usize, w: usize, dx: f64, dy: f64) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for c in 0..w {
        for r in 0..h {
            let v = y[idx(r, c, h)];
            if v == 0.0 {
                continue;
            }
            for (sr, sc, wt) in bilinear_sources(r, c, dx, dy, h, w) {
                out[idx(sr, sc, h)] += wt * v;
            }
        }
    }
    out
}

// The up-to-four source cells and weights for destination pixel (r, c).
fn bilinear_sources(
    r: usize,
    c: usize,
    dx: f64,
    dy: f64,
    h: usize,
    w: usize,
) -> impl Iterator<Item = (usize, usize, f64)> {
    let sr = r as f64 - dy;
    let sc = c as f64 - dx;
    let r0 = sr.floor();
    let c0 = sc.floor();
    let fr = sr - r0;
    let fc = sc - c0;
    let cells = [
        (r0, c0, (1.0 - fr) * (1.0 - fc)),
        (r0, c0 + 1.0, (1.0 - fr) * fc),
        (r0 + 1.0, c0, fr * (1.0 - fc)),
        (r0 + 1.0, c0 + 1.0, fr * fc),
    ];
    cells.into_iter().filter_map(move |(rr, cc, wt)| {
        if wt != 0.0 && rr >= 0.0 && rr < h as f64 && cc >= 0.0 && cc < w as f64 {
            Some((rr as usize, cc as usize, wt))
        } else {
            None
        }
    })
}

fn decimate_forward(x: &[f64], h: usize, w: usize, r: usize) -> Vec<f64> {
    let (lh, lw) = (h / r, w / r);
    let mut out = vec![0.0; lh * lw];
    for c in 0..lw {
        for rr in 0..lh {
            out[idx(rr, c, lh)] = x[idx(rr * r, c * r, h)];
        }
    }
    out
}

fn decimate_adjoint(y: &[f64], lh: usize, lw: usize, r: usize) -> Vec<f64> {
    let (h, w) = (lh * r, lw * r);
    let mut out = vec![0.0; h * w];
    for c in 0..lw {
        for rr in 0..lh {
            out[idx(rr * r, c * r, h)] = y[idx(rr, c, lh)];
        }
    }
    out
}

fn diff_h_forward(x: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for c in 1..w {
        for r in 0..h {
            out[idx(r, c, h)] = x[idx(r, c, h)] - x[idx(r, c - 1, h)];
        }
    }
    out
}

fn diff_h_adjoint(y: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for c in 1..w {
        for r in 0..h {
            let v = y[idx(r, c, h)];
            out[idx(r, c, h)] += v;
            out[idx(r, c - 1, h)] -= v;
        }
    }
    out
}

fn diff_v_forward(x: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for c in 0..w {
        for r in 1..h {
            out[idx(r, c, h)] = x[idx(r, c, h)] - x[idx(r - 1, c, h)];
        }
    }
    out
}

fn diff_v_adjoint(y: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for c in 0..w {
        for r in 1..h {
            let v = y[idx(r, c, h)];
            out[idx(r, c, h)] += v;
            out[idx(r - 1, c, h)] -= v;
        }
    }
    out
}
