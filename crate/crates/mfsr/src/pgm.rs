//! PGM (netpbm) reading and writing.
//!
//! Supports P2 (ascii) and P5 (binary) with maxval up to 65535; P5 samples
//! above 255 are big-endian 16-bit, per the netpbm spec. `#` comments are
//! accepted anywhere between header tokens. Writing clamps to [0, maxval]
//! and rounds; this is the only place the pipeline quantizes intensities.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageGrid;

/// Output encoding for [`write_pgm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmMode {
    Ascii,
    Binary,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    // Skips whitespace and '#' comments, then reads one unsigned token.
    fn next_uint(&mut self) -> Result<u64> {
        self.skip_separators()?;
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::Format(format!(
                "expected integer at byte {}, found {:?}",
                start,
                self.bytes.get(start).map(|b| *b as char)
            )));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::Format("non-utf8 header token".into()))?;
        text.parse::<u64>()
            .map_err(|_| Error::Format(format!("integer token `{text}` out of range")))
    }

    fn skip_separators(&mut self) -> Result<()> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            return Ok(());
        }
    }
}

/// Decode a PGM byte stream (P2 or P5).
pub fn read_pgm(bytes: &[u8]) -> Result<ImageGrid> {
    if bytes.len() < 2 {
        return Err(Error::Format("truncated header".into()));
    }
    let binary = match &bytes[..2] {
        b"P2" => false,
        b"P5" => true,
        other => {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected P2 or P5",
                String::from_utf8_lossy(other)
            )))
        }
    };

    let mut cur = Cursor::new(&bytes[2..]);
    let width = cur.next_uint()? as usize;
    let height = cur.next_uint()? as usize;
    let maxval = cur.next_uint()?;
    if width == 0 || height == 0 {
        return Err(Error::Format("zero image dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("maxval {maxval} outside 1..=65535")));
    }

    let n = width * height;
    let mut data = Vec::with_capacity(n);
    if binary {
        // Exactly one whitespace byte separates maxval from the raster.
        let after_header = 2 + cur.pos;
        if after_header >= bytes.len() || !bytes[after_header].is_ascii_whitespace() {
            return Err(Error::Format("missing raster separator".into()));
        }
        let raster = &bytes[after_header + 1..];
        if maxval > 255 {
            if raster.len() < 2 * n {
                return Err(Error::Format(format!(
                    "truncated raster: {} bytes, expected {}",
                    raster.len(),
                    2 * n
                )));
            }
            for i in 0..n {
                let v = u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]);
                if u64::from(v) > maxval {
                    return Err(Error::Format(format!("sample {v} exceeds maxval {maxval}")));
                }
                data.push(f64::from(v));
            }
        } else {
            if raster.len() < n {
                return Err(Error::Format(format!(
                    "truncated raster: {} bytes, expected {}",
                    raster.len(),
                    n
                )));
            }
            for &b in &raster[..n] {
                if u64::from(b) > maxval {
                    return Err(Error::Format(format!("sample {b} exceeds maxval {maxval}")));
                }
                data.push(f64::from(b));
            }
        }
    } else {
        for _ in 0..n {
            let v = cur.next_uint()?;
            if v > maxval {
                return Err(Error::Format(format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64);
        }
    }
    ImageGrid::from_data(height, width, data)
}

/// Encode with maxval 255.
pub fn write_pgm(img: &ImageGrid, mode: PgmMode) -> Vec<u8> {
    write_pgm_maxval(img, mode, 255)
}

/// Encode with an explicit maxval (1..=65535). Values are clamped to
/// [0, maxval] and rounded half away from zero.
pub fn write_pgm_maxval(img: &ImageGrid, mode: PgmMode, maxval: u16) -> Vec<u8> {
    assert!(maxval > 0, "maxval must be positive");
    let (h, w) = img.shape();
    let quantize = |v: f64| -> u16 { v.clamp(0.0, f64::from(maxval)).round() as u16 };

    match mode {
        PgmMode::Ascii => {
            let mut out = format!("P2\n{w} {h}\n{maxval}\n");
            for r in 0..h {
                let row: Vec<String> = (0..w)
                    .map(|c| quantize(img.get(r, c)).to_string())
                    .collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
            out.into_bytes()
        }
        PgmMode::Binary => {
            let mut out = format!("P5\n{w} {h}\n{maxval}\n").into_bytes();
            for r in 0..h {
                for c in 0..w {
                    let q = quantize(img.get(r, c));
                    if maxval > 255 {
                        out.extend_from_slice(&q.to_be_bytes());
                    } else {
                        out.push(q as u8);
                    }
                }
            }
            out
        }
    }
}

/// Read a PGM file from disk.
pub fn read_pgm_file(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let bytes = fs::read(path.as_ref())?;
    read_pgm(&bytes)
}

/// Write a PGM file to disk.
pub fn write_pgm_file(path: impl AsRef<Path>, img: &ImageGrid, mode: PgmMode) -> Result<()> {
    fs::write(path.as_ref(), write_pgm(img, mode))?;
    Ok(())
}
