//! Grayscale raster loading, saving and normalization.
//!
//! Every image entering the pipeline is a [`GrayImage`]: row-major
//! intensities in `[0, 1]` where `1.0` is blank page and `0.0` is full ink.
//! Transforms operate on the looser [`Raster`] type, which carries arbitrary
//! real values (coefficients, reconstructions, linear combinations).

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

/// Intensity used to pad images up to the canonical size (blank page).
pub const BACKGROUND: f64 = 1.0;

/// Default side of the canonical analysis raster.
pub const CANONICAL_SIDE: usize = 256;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image: {0}")]
    CorruptImage(String),
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A row-major grid of real values with no range constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Invalid(format!(
                "empty raster {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(ImageError::Invalid(format!(
                "{} values for a {width}x{height} raster",
                data.len()
            )));
        }
        Ok(Raster {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(
            width > 0 && height > 0,
            "raster dimensions must be positive"
        );
        Raster {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(
            width > 0 && height > 0,
            "raster dimensions must be positive"
        );
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Raster {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Sum of squared values.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &Raster) -> f64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Normalized grayscale image: intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage(Raster);

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, ImageError> {
        Self::from_raster(Raster::new(width, height, pixels)?)
    }

    pub fn from_raster(raster: Raster) -> Result<Self, ImageError> {
        if let Some(bad) = raster.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ImageError::Invalid(format!(
                "intensity {bad} outside [0, 1]"
            )));
        }
        Ok(GrayImage(raster))
    }

    /// Uniform image; `value` is clamped into `[0, 1]`.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        GrayImage(Raster::filled(width, height, value.clamp(0.0, 1.0)))
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.0.data
    }

    pub fn as_raster(&self) -> &Raster {
        &self.0
    }

    pub fn into_raster(self) -> Raster {
        self.0
    }
}

/// Encoding used by [`save_pgm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmEncoding {
    /// `P2`, whitespace separated decimal samples.
    Ascii,
    /// `P5`, one or two bytes per sample.
    Binary,
}

/// Loads a grayscale image from a PGM (`P2`/`P5`) or PNG file.
///
/// PGM samples are normalized as `raw / maxval`. PNG input (any color type)
/// is reduced to luminance first.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage, ImageError> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(ImageError::FileNotFound(path.display().to_string()));
    }
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        return decode_pgm(&bytes);
    }
    if bytes.starts_with(b"\x89PNG") {
        return decode_png(&bytes);
    }
    Err(ImageError::UnsupportedFormat(path.display().to_string()))
}

/// Parses an in-memory PGM file.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let mut cursor = PnmCursor { bytes, pos: 2 };
    let ascii = match bytes.get(..2) {
        Some(b"P2") => true,
        Some(b"P5") => false,
        _ => return Err(ImageError::UnsupportedFormat("missing PGM magic".into())),
    };
    let width = cursor.header_int("width")?;
    let height = cursor.header_int("height")?;
    let maxval = cursor.header_int("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImageError::CorruptImage(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(ImageError::CorruptImage(format!(
            "maxval {maxval} out of range"
        )));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| ImageError::CorruptImage("dimensions overflow".into()))?;
    let scale = 1.0 / maxval as f64;

    let mut pixels = Vec::with_capacity(count);
    if ascii {
        for _ in 0..count {
            let raw = cursor
                .ascii_int()
                .ok_or_else(|| ImageError::CorruptImage(format!("expected {count} samples")))?;
            pixels.push(raw as f64);
        }
        if cursor.ascii_int().is_some() {
            return Err(ImageError::CorruptImage(format!(
                "more than {count} samples"
            )));
        }
    } else {
        // exactly one whitespace byte separates the header from the raster
        let start = cursor.pos + 1;
        let wide = maxval > 255;
        let needed = count * if wide { 2 } else { 1 };
        let body = bytes.get(start..).unwrap_or_default();
        if body.len() != needed {
            return Err(ImageError::CorruptImage(format!(
                "raster holds {} bytes, expected {needed}",
                body.len()
            )));
        }
        if wide {
            pixels.extend(
                body.chunks_exact(2)
                    .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64),
            );
        } else {
            pixels.extend(body.iter().map(|&b| b as f64));
        }
    }
    if let Some(bad) = pixels.iter().find(|&&v| v > maxval as f64) {
        return Err(ImageError::CorruptImage(format!(
            "sample {bad} exceeds maxval {maxval}"
        )));
    }
    for p in &mut pixels {
        *p *= scale;
    }
    GrayImage::new(width, height, pixels)
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| ImageError::CorruptImage(e.to_string()))?;
    let luma = decoded.into_luma16();
    let (w, h) = luma.dimensions();
    let pixels = luma
        .into_raw()
        .into_iter()
        .map(|v| v as f64 / 65535.0)
        .collect();
    GrayImage::new(w as usize, h as usize, pixels)
}

struct PnmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PnmCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn ascii_int(&mut self) -> Option<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }

    fn header_int(&mut self, what: &str) -> Result<usize, ImageError> {
        let value = self
            .ascii_int()
            .ok_or_else(|| ImageError::CorruptImage(format!("bad PGM header field {what}")))?;
        Ok(value)
    }
}

/// Writes an 8-bit PGM (`maxval` 255). Intensities are rounded to the
/// nearest level, so a reload is within `1/510` of the input.
pub fn save_pgm(
    img: &GrayImage,
    path: impl AsRef<Path>,
    encoding: PgmEncoding,
) -> Result<(), ImageError> {
    let bytes = encode_pgm(img, encoding);
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

pub fn encode_pgm(img: &GrayImage, encoding: PgmEncoding) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let levels = img.pixels().iter().map(|&v| (v * 255.0).round() as u8);
    match encoding {
        PgmEncoding::Binary => {
            let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
            out.extend(levels);
            out
        }
        PgmEncoding::Ascii => {
            let mut out = format!("P2\n{w} {h}\n255\n");
            let levels: Vec<u8> = levels.collect();
            for row in levels.chunks(w) {
                let line: Vec<String> = row.iter().map(u8::to_string).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
            out.into_bytes()
        }
    }
}

/// Fits an image into a `target`×`target` canvas.
///
/// Images already at the target size are returned unchanged. Larger images
/// are shrunk by area averaging so the long side equals `target`, keeping
/// the aspect ratio. The result is centered on a white canvas.
pub fn preprocess(img: &GrayImage, target: usize) -> GrayImage {
    assert!(target > 0, "target size must be positive");
    let (w, h) = (img.width(), img.height());
    if w == target && h == target {
        return img.clone();
    }

    let scaled = if w > target || h > target {
        let long = w.max(h) as f64;
        let new_w = ((w as f64 * target as f64 / long).round() as usize).clamp(1, target);
        let new_h = ((h as f64 * target as f64 / long).round() as usize).clamp(1, target);
        area_resample(img.as_raster(), new_w, new_h)
    } else {
        img.as_raster().clone()
    };

    let (sw, sh) = (scaled.width(), scaled.height());
    let (off_col, off_row) = ((target - sw) / 2, (target - sh) / 2);
    let mut canvas = Raster::filled(target, target, BACKGROUND);
    for row in 0..sh {
        let dst = (row + off_row) * target + off_col;
        canvas.data[dst..dst + sw].copy_from_slice(&scaled.data[row * sw..(row + 1) * sw]);
    }
    // area averaging of values in [0, 1] stays in [0, 1] up to rounding
    for v in canvas.data_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    GrayImage(canvas)
}

/// Box-filter resampling: each output cell is the coverage-weighted mean of
/// the source cells it overlaps.
fn area_resample(src: &Raster, new_w: usize, new_h: usize) -> Raster {
    let col_weights = overlap_weights(src.width(), new_w);
    let row_weights = overlap_weights(src.height(), new_h);

    let mut horizontal = vec![0.0; src.height() * new_w];
    for row in 0..src.height() {
        let line = &src.data[row * src.width()..(row + 1) * src.width()];
        for (out_col, taps) in col_weights.iter().enumerate() {
            let norm: f64 = taps.iter().map(|t| t.1).sum();
            let sum: f64 = taps.iter().map(|&(i, wt)| line[i] * wt).sum();
            horizontal[row * new_w + out_col] = sum / norm;
        }
    }

    let mut out = vec![0.0; new_w * new_h];
    for (out_row, taps) in row_weights.iter().enumerate() {
        let norm: f64 = taps.iter().map(|t| t.1).sum();
        for col in 0..new_w {
            let sum: f64 = taps
                .iter()
                .map(|&(i, wt)| horizontal[i * new_w + col] * wt)
                .sum();
            out[out_row * new_w + col] = sum / norm;
        }
    }
    Raster {
        width: new_w,
        height: new_h,
        data: out,
    }
}

/// For each of `dst` output cells, the source cells it covers and the covered length.
fn overlap_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let lo = o as f64 * ratio;
            let hi = (o + 1) as f64 * ratio;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|i| {
                    let cover = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                    (cover > 1e-12).then_some((i, cover))
                })
                .collect()
        })
        .collect()
}
