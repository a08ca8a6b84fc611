//! Image containers, lexicographic flattening, and synthetic test scenes.
//!
//! Intensities are kept as `f64` throughout the pipeline; the nominal range
//! is [0, 255] but nothing clamps until PGM write. Vectorized linear algebra
//! runs on [`LexVector`], the column-major flattening of an [`ImageGrid`].

use crate::error::{Error, Result};

/// 2-D real-valued intensity field with explicit height/width.
///
/// Storage is row-major; `(row, col)` indexing with `row in 0..height`,
/// `col in 0..width`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    /// Constant image of the given shape.
    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "image shape must be positive");
        ImageGrid {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    /// All-zero image.
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    /// Build from a per-pixel function of `(row, col)`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "image shape must be positive");
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        ImageGrid {
            height,
            width,
            data,
        }
    }

    /// Build from row-major data; errors when the length does not match.
    pub fn from_data(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(Error::Dimension(format!(
                "data length {} does not match {}x{}",
                data.len(),
                height,
                width
            )));
        }
        Ok(ImageGrid {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col] = value;
    }

    /// Row-major view of the raw samples.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Population mean.
    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population variance about the mean.
    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.data.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / self.data.len() as f64
    }

    /// True when every sample is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Column-major lexicographic flattening of an [`ImageGrid`].
///
/// Element `i` of the vector is pixel `(i % height, i / height)` of the grid,
/// i.e. columns are stacked top-to-bottom, left-to-right. Every linear
/// operator in this crate uses the same convention.
#[derive(Debug, Clone, PartialEq)]
pub struct LexVector {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl LexVector {
    /// Wrap raw column-major values; errors when `values.len() != h*w`.
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(Error::Dimension(format!(
                "vector length {} does not match {}x{}",
                values.len(),
                height,
                width
            )));
        }
        Ok(LexVector {
            height,
            width,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        LexVector {
            height,
            width,
            values: vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Pixel access through lexicographic indexing.
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width);
        self.values[col * self.height + row]
    }
}

/// Flatten an image into column lexicographic order.
pub fn to_lex(img: &ImageGrid) -> LexVector {
    let (h, w) = img.shape();
    let mut values = Vec::with_capacity(h * w);
    for c in 0..w {
        for r in 0..h {
            values.push(img.get(r, c));
        }
    }
    LexVector {
        height: h,
        width: w,
        values,
    }
}

/// Exact inverse of [`to_lex`].
pub fn from_lex(v: &LexVector) -> ImageGrid {
    let (h, w) = v.shape();
    ImageGrid::from_fn(h, w, |r, c| v.values[c * h + r])
}

/// Axis-aligned rectangle inside an image, `(top, left)` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

/// Foreground rectangle on a constant background.
pub fn synth_rectangle(
    height: usize,
    width: usize,
    rect: Rect,
    fg: f64,
    bg: f64,
) -> Result<ImageGrid> {
    if rect.height == 0
        || rect.width == 0
        || rect.top + rect.height > height
        || rect.left + rect.width > width
    {
        return Err(Error::Dimension(format!(
            "rect {}x{} at ({},{}) does not fit inside {}x{}",
            rect.height, rect.width, rect.top, rect.left, height, width
        )));
    }
    Ok(ImageGrid::from_fn(height, width, |r, c| {
        if r >= rect.top && r < rect.top + rect.height && c >= rect.left && c < rect.left + rect.width
        {
            fg
        } else {
            bg
        }
    }))
}

/// Smooth pseudo-random texture in [0, 255], deterministic per seed.
///
/// Superposes smoothed white noise at three scales so the field carries
/// gradients from fine detail up to image-size undulations, then affinely
/// maps onto the full intensity range. Useful wherever a test needs a scene
/// with non-degenerate statistics.
pub fn synth_texture(height: usize, width: usize, seed: u64) -> ImageGrid {
    assert!(height > 0 && width > 0, "image shape must be positive");
    let octave = |h: usize, w: usize, s: u64, smooths: usize| -> ImageGrid {
        let mut state = s;
        let mut img = ImageGrid::from_fn(h, w, |_, _| {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64
        });
        for _ in 0..smooths {
            img = box_smooth3(&img);
        }
        img
    };

    let fine = octave(height, width, seed, 3);
    let mid = upsample_bilinear(
        &octave((height / 4).max(2), (width / 4).max(2), seed ^ 0x9e3779b9, 1),
        height,
        width,
    );
    let coarse = upsample_bilinear(
        &octave((height / 16).max(2), (width / 16).max(2), seed ^ 0x7f4a7c15, 1),
        height,
        width,
    );

    let mut img = ImageGrid::from_fn(height, width, |r, c| {
        0.5 * fine.get(r, c) + 2.0 * mid.get(r, c) + 5.0 * coarse.get(r, c)
    });
    let min = img.data.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = img.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if max > min { max - min } else { 1.0 };
    for v in img.data.iter_mut() {
        *v = (*v - min) / span * 255.0;
    }
    img
}

/// Piecewise-constant scene: random axis-aligned rectangles of random
/// intensity over a mid-gray background, deterministic per seed. Edge-rich
/// content of exactly the kind a gradient-magnitude regularizer favors.
pub fn synth_blocks(height: usize, width: usize, seed: u64) -> ImageGrid {
    assert!(height >= 8 && width >= 8, "blocks scene needs at least 8x8");
    let mut state = seed;
    let mut next = move || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    let mut img = ImageGrid::filled(height, width, 96.0);
    for _ in 0..10 {
        let top = next() as usize % (height - height / 4);
        let left = next() as usize % (width - width / 4);
        let block_h = (height / 8 + next() as usize % (height / 3)).max(1);
        let block_w = (width / 8 + next() as usize % (width / 3)).max(1);
        let value = (next() % 256) as f64;
        for r in top..(top + block_h).min(height) {
            for c in left..(left + block_w).min(width) {
                img.set(r, c, value);
            }
        }
    }
    img
}

// Align-corners bilinear resize used by the texture generator.
fn upsample_bilinear(img: &ImageGrid, height: usize, width: usize) -> ImageGrid {
    let (sh, sw) = img.shape();
    ImageGrid::from_fn(height, width, |r, c| {
        let sr = if height > 1 {
            r as f64 * (sh - 1) as f64 / (height - 1) as f64
        } else {
            0.0
        };
        let sc = if width > 1 {
            c as f64 * (sw - 1) as f64 / (width - 1) as f64
        } else {
            0.0
        };
        let r0 = (sr.floor() as usize).min(sh - 1);
        let c0 = (sc.floor() as usize).min(sw - 1);
        let r1 = (r0 + 1).min(sh - 1);
        let c1 = (c0 + 1).min(sw - 1);
        let fr = sr - r0 as f64;
        let fc = sc - c0 as f64;
        img.get(r0, c0) * (1.0 - fr) * (1.0 - fc)
            + img.get(r0, c1) * (1.0 - fr) * fc
            + img.get(r1, c0) * fr * (1.0 - fc)
            + img.get(r1, c1) * fr * fc
    })
}

// 3x3 mean with edge clamping; only used to shape the synthetic texture.
fn box_smooth3(img: &ImageGrid) -> ImageGrid {
    let (h, w) = img.shape();
    ImageGrid::from_fn(h, w, |r, c| {
        let mut acc = 0.0;
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                let rr = (r as i64 + dr).clamp(0, h as i64 - 1) as usize;
                let cc = (c as i64 + dc).clamp(0, w as i64 - 1) as usize;
                acc += img.get(rr, cc);
            }
        }
        acc / 9.0
    })
}
