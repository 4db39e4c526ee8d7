//! Deterministic synthetic signature corpus.
//!
//! Each writer gets a base "signature": a few smooth pen strokes, each a
//! Catmull-Rom spline (piecewise cubic) through a seeded random walk of
//! control points, drawn with an antialiased round pen in dark ink on white.
//! Samples of one writer perturb the control points, the placement and the
//! pen width. Every image depends only on `(seed, writer, sample)`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image_io::{save_pgm, GrayImage, ImageError, PgmEncoding, Raster, CANONICAL_SIDE};

pub const MANIFEST_NAME: &str = "manifest.csv";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("bad corpus spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-sample perturbation amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    /// Standard deviation of control-point displacement, pixels at side 256.
    pub stroke: f64,
    /// Standard deviation of the global offset, pixels at side 256.
    pub translation: f64,
    /// Relative standard deviation of pen width.
    pub thickness: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Jitter {
            stroke: 2.5,
            translation: 6.0,
            thickness: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub writers: usize,
    pub samples_per_writer: usize,
    pub seed: u64,
    pub side: usize,
    pub jitter: Jitter,
}

impl SynthSpec {
    pub fn new(writers: usize, samples_per_writer: usize, seed: u64) -> Self {
        SynthSpec {
            writers,
            samples_per_writer,
            seed,
            side: CANONICAL_SIDE,
            jitter: Jitter::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.writers < 2 {
            return Err(SynthError::BadSpec(format!(
                "{} writer(s), need at least 2",
                self.writers
            )));
        }
        if self.samples_per_writer < 1 {
            return Err(SynthError::BadSpec(
                "need at least one sample per writer".into(),
            ));
        }
        if self.side < 16 {
            return Err(SynthError::BadSpec(format!(
                "side {} is below 16 pixels",
                self.side
            )));
        }
        let j = self.jitter;
        if [j.stroke, j.translation, j.thickness]
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(SynthError::BadSpec(format!(
                "jitter amplitudes must be finite and >= 0: {j:?}"
            )));
        }
        Ok(())
    }

    pub fn writer_label(&self, writer: usize) -> String {
        let width = digits(self.writers);
        format!("w{:0width$}", writer + 1)
    }

    pub fn sample_label(&self, sample: usize) -> String {
        let width = digits(self.samples_per_writer);
        format!("{:0width$}", sample + 1)
    }
}

fn digits(n: usize) -> usize {
    n.to_string().len().max(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub image: GrayImage,
    pub writer: String,
    pub sample: String,
}

impl SynthSample {
    pub fn id(&self) -> String {
        format!("{}/{}", self.writer, self.sample)
    }
}

/// Writer-level style: the "signature" every sample imitates. Coordinates
/// are in units of the image side.
#[derive(Debug, Clone)]
struct Style {
    strokes: Vec<Vec<(f64, f64)>>,
    pen_width: f64,
    ink: f64,
}

/// SplitMix64 finalizer; decorrelates the (seed, writer, sample) streams.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn rng_for(seed: u64, writer: usize, sample: Option<usize>) -> ChaCha8Rng {
    let s = sample.map_or(u64::MAX, |s| s as u64);
    ChaCha8Rng::seed_from_u64(mix(mix(mix(seed) ^ writer as u64) ^ s))
}

fn writer_style(seed: u64, writer: usize) -> Style {
    let mut rng = rng_for(seed, writer, None);
    let stroke_count = rng.random_range(1..=3);
    // overall slant and vertical amplitude give each writer a distinct texture
    let slant: f64 = rng.random_range(-0.6..0.6);
    let amplitude: f64 = rng.random_range(0.05..0.18);
    let loopiness: f64 = rng.random_range(0.3..1.0);
    let left: f64 = rng.random_range(0.15..0.3);
    let right: f64 = rng.random_range(0.7..0.85);
    let baseline: f64 = rng.random_range(0.4..0.6);

    let span = (right - left) / stroke_count as f64;
    let strokes = (0..stroke_count)
        .map(|s| {
            let x0 = left + span * s as f64;
            let points = rng.random_range(5..=10);
            let step = span / points as f64;
            let mut y = baseline + rng.random_range(-0.05..0.05);
            (0..points)
                .map(|p| {
                    // alternate up/down strokes with occasional backtracking loops
                    let up = if p % 2 == 0 { 1.0 } else { -1.0 };
                    y = (baseline + up * amplitude * rng.random_range(0.4..1.0)).clamp(0.15, 0.85);
                    let back = if rng.random::<f64>() < loopiness * 0.4 {
                        -1.5 * step
                    } else {
                        0.0
                    };
                    let x = x0 + step * p as f64 + back + slant * (y - baseline);
                    (x.clamp(0.08, 0.92), y)
                })
                .collect()
        })
        .collect();

    Style {
        strokes,
        pen_width: rng.random_range(1.2..3.2),
        ink: rng.random_range(0.75..0.95),
    }
}

/// Samples a Catmull-Rom spline through `points` at roughly one point per
/// pixel.
fn spline_polyline(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() < 2 {
        return points.to_vec();
    }
    let at = |i: isize| points[i.clamp(0, points.len() as isize - 1) as usize];
    let mut out = vec![points[0]];
    for i in 0..points.len() as isize - 1 {
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        let chord = ((p2.0 - p1.0).powi(2) + (p2.1 - p1.1).powi(2)).sqrt();
        let steps = (chord.ceil() as usize).clamp(2, 512);
        for s in 1..=steps {
            let t = s as f64 / steps as f64;
            let (t2, t3) = (t * t, t * t * t);
            let blend = |a: f64, b: f64, c: f64, d: f64| {
                0.5 * (2.0 * b
                    + (c - a) * t
                    + (2.0 * a - 5.0 * b + 4.0 * c - d) * t2
                    + (3.0 * b - a - 3.0 * c + d) * t3)
            };
            out.push((blend(p0.0, p1.0, p2.0, p3.0), blend(p0.1, p1.1, p2.1, p3.1)));
        }
    }
    out
}

/// Draws polylines with a round antialiased pen into an ink-coverage buffer.
fn rasterize(side: usize, polylines: &[Vec<(f64, f64)>], half_width: f64) -> Vec<f64> {
    let mut coverage = vec![0.0f64; side * side];
    let reach = half_width + 1.0;
    for line in polylines {
        for seg in line.windows(2) {
            let ((ax, ay), (bx, by)) = (seg[0], seg[1]);
            let c0 = ((ax.min(bx) - reach).floor().max(0.0)) as usize;
            let c1 = ((ax.max(bx) + reach).ceil().min(side as f64 - 1.0)).max(0.0) as usize;
            let r0 = ((ay.min(by) - reach).floor().max(0.0)) as usize;
            let r1 = ((ay.max(by) + reach).ceil().min(side as f64 - 1.0)).max(0.0) as usize;
            let (dx, dy) = (bx - ax, by - ay);
            let len2 = dx * dx + dy * dy;
            for r in r0..=r1 {
                for c in c0..=c1 {
                    // pixel centers at integer + 0.5
                    let (px, py) = (c as f64 + 0.5, r as f64 + 0.5);
                    let t = if len2 > 0.0 {
                        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let dist = ((px - ax - t * dx).powi(2) + (py - ay - t * dy).powi(2)).sqrt();
                    let cov = (half_width + 0.5 - dist).clamp(0.0, 1.0);
                    let cell = &mut coverage[r * side + c];
                    if cov > *cell {
                        *cell = cov;
                    }
                }
            }
        }
    }
    coverage
}

fn render_sample(spec: &SynthSpec, style: &Style, writer: usize, sample: usize) -> GrayImage {
    let mut rng = rng_for(spec.seed, writer, Some(sample));
    let side = spec.side as f64;
    let unit = side / CANONICAL_SIDE as f64;
    let gauss = |sd: f64| Normal::new(0.0, sd.max(0.0)).expect("finite sd");
    let point = gauss(spec.jitter.stroke * unit);
    let shift = gauss(spec.jitter.translation * unit);
    let (tx, ty) = (shift.sample(&mut rng), shift.sample(&mut rng));

    let polylines: Vec<Vec<(f64, f64)>> = style
        .strokes
        .iter()
        .map(|stroke| {
            let pts: Vec<(f64, f64)> = stroke
                .iter()
                .map(|&(x, y)| {
                    (
                        x * side + tx + point.sample(&mut rng),
                        y * side + ty + point.sample(&mut rng),
                    )
                })
                .collect();
            spline_polyline(&pts)
        })
        .collect();
    let width_factor = (1.0 + gauss(spec.jitter.thickness).sample(&mut rng)).max(0.3);
    let half_width = 0.5 * style.pen_width * unit * width_factor;

    let coverage = rasterize(spec.side, &polylines, half_width);
    let data = coverage.into_iter().map(|c| 1.0 - style.ink * c).collect();
    GrayImage::from_raster(Raster::new(spec.side, spec.side, data).expect("square raster"))
        .expect("values in [0, 1]")
}

/// Generates `writers × samples_per_writer` images, writer-major.
pub fn generate_corpus(spec: &SynthSpec) -> Result<Vec<SynthSample>, SynthError> {
    spec.validate()?;
    let styles: Vec<Style> = (0..spec.writers)
        .map(|w| writer_style(spec.seed, w))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..spec.writers)
        .flat_map(|w| (0..spec.samples_per_writer).map(move |s| (w, s)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(w, s)| SynthSample {
            image: render_sample(spec, &styles[w], w, s),
            writer: spec.writer_label(w),
            sample: spec.sample_label(s),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub writer: String,
    pub sample: String,
}

/// Writes `<out>/<writer>/<sample>.pgm` for every sample plus
/// `<out>/manifest.csv` with paths relative to `out`.
pub fn write_corpus(
    samples: &[SynthSample],
    out: impl AsRef<Path>,
) -> Result<Vec<ManifestEntry>, SynthError> {
    let out = out.as_ref();
    fs::create_dir_all(out)?;
    let mut entries = Vec::with_capacity(samples.len());
    for s in samples {
        let dir = out.join(&s.writer);
        fs::create_dir_all(&dir)?;
        save_pgm(
            &s.image,
            dir.join(format!("{}.pgm", s.sample)),
            PgmEncoding::Binary,
        )?;
        entries.push(ManifestEntry {
            path: format!("{}/{}.pgm", s.writer, s.sample),
            writer: s.writer.clone(),
            sample: s.sample.clone(),
        });
    }
    let mut csv = csv::Writer::from_path(out.join(MANIFEST_NAME))?;
    for e in &entries {
        csv.serialize(e)?;
    }
    csv.flush()?;
    Ok(entries)
}

/// Reads a manifest; returned paths are resolved against its directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<(PathBuf, ManifestEntry)>, SynthError> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize::<ManifestEntry>()
        .map(|row| {
            let row = row?;
            Ok((base.join(&row.path), row))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(writers: usize, samples: usize) -> SynthSpec {
        SynthSpec {
            side: 64,
            ..SynthSpec::new(writers, samples, 11)
        }
    }

    #[test]
    fn counts_and_labels() {
        let corpus = generate_corpus(&small(3, 4)).unwrap();
        assert_eq!(corpus.len(), 12);
        assert_eq!(corpus[0].id(), "w01/01");
        assert_eq!(corpus[11].id(), "w03/04");
        for w in ["w01", "w02", "w03"] {
            assert_eq!(corpus.iter().filter(|s| s.writer == w).count(), 4);
        }
    }

    #[test]
    fn bad_specs() {
        assert!(matches!(
            generate_corpus(&small(1, 4)),
            Err(SynthError::BadSpec(_))
        ));
        assert!(matches!(
            generate_corpus(&small(2, 0)),
            Err(SynthError::BadSpec(_))
        ));
        let mut spec = small(2, 2);
        spec.jitter.stroke = -1.0;
        assert!(matches!(
            generate_corpus(&spec),
            Err(SynthError::BadSpec(_))
        ));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = generate_corpus(&small(2, 3)).unwrap();
        let b = generate_corpus(&small(2, 3)).unwrap();
        assert_eq!(a, b);
        let c = generate_corpus(&SynthSpec {
            seed: 12,
            ..small(2, 3)
        })
        .unwrap();
        assert_ne!(a[0].image, c[0].image);
    }

    #[test]
    fn images_are_sparse_ink_on_white() {
        for s in generate_corpus(&SynthSpec::new(4, 2, 5)).unwrap() {
            let px = s.image.pixels();
            assert!(px.iter().all(|v| (0.0..=1.0).contains(v)));
            let background = px.iter().filter(|&&v| v == 1.0).count() as f64 / px.len() as f64;
            assert!(background > 0.5, "{}: {background}", s.id());
            assert!(px.iter().any(|&v| v < 0.5), "{} has no ink", s.id());
        }
    }

    #[test]
    fn samples_of_a_writer_differ() {
        let corpus = generate_corpus(&small(2, 2)).unwrap();
        assert_ne!(corpus[0].image, corpus[1].image);
    }

    #[test]
    fn spline_passes_through_control_points() {
        let pts = [(0.0, 0.0), (10.0, 5.0), (20.0, -3.0)];
        let line = spline_polyline(&pts);
        for p in pts {
            assert!(line
                .iter()
                .any(|q| (q.0 - p.0).abs() < 1e-9 && (q.1 - p.1).abs() < 1e-9));
        }
    }

    #[test]
    fn corpus_files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate_corpus(&small(2, 2)).unwrap();
        let entries = write_corpus(&corpus, dir.path()).unwrap();
        assert_eq!(entries.len(), 4);
        assert!(dir.path().join("w02/02.pgm").is_file());
        let manifest = read_manifest(dir.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(manifest.len(), 4);
        assert_eq!(manifest[0].1.path, "w01/01.pgm");
        assert!(manifest.iter().all(|(p, _)| p.is_file()));
        let text = fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap();
        assert!(text.starts_with("path,writer,sample\n"));
    }
}
