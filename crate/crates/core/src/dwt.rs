//! Separable multi-level 2-D discrete wavelet transform with periodic
//! extension.
//!
//! A decomposition of depth `N` yields `3N + 1` subbands: the final
//! approximation plus horizontal, vertical and diagonal details per level.
//! With orthonormal filters and periodic boundaries the analysis operator is
//! an orthogonal matrix, so energy is preserved exactly and the synthesis is
//! its transpose.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image_io::Raster;
use crate::subband::{Orientation, Subband, SubbandLabel};

#[derive(Debug, Error, PartialEq)]
pub enum DwtError {
    #[error("{rows}x{cols} raster is not divisible by 2^{levels}")]
    DimensionNotDivisible {
        rows: usize,
        cols: usize,
        levels: usize,
    },
    #[error("decomposition needs at least one level")]
    ZeroLevels,
    #[error("unknown wavelet {0:?} (expected haar, db2 or db4)")]
    UnknownWavelet(String),
    #[error("malformed pyramid: {0}")]
    MalformedPyramid(String),
}

/// Orthonormal wavelet families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
#[derive(Default)]
pub enum Wavelet {
    Haar,
    /// Daubechies with 2 vanishing moments (4 taps).
    Db2,
    /// Daubechies with 4 vanishing moments (8 taps).
    #[default]
    Db4,
}

const HAAR: [f64; 2] = [
    std::f64::consts::FRAC_1_SQRT_2,
    std::f64::consts::FRAC_1_SQRT_2,
];

// Reconstruction low-pass taps, same convention as PyWavelets' `rec_lo`.
const DB4: [f64; 8] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_7,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_854,
    -0.187_034_811_719_093_09,
    0.030_841_381_835_560_764,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_032,
];

impl Wavelet {
    pub fn name(self) -> &'static str {
        match self {
            Wavelet::Haar => "haar",
            Wavelet::Db2 => "db2",
            Wavelet::Db4 => "db4",
        }
    }

    /// Scaling (low-pass) filter taps.
    pub fn lowpass(self) -> Vec<f64> {
        match self {
            Wavelet::Haar => HAAR.to_vec(),
            Wavelet::Db2 => {
                let s3 = 3f64.sqrt();
                let norm = 4.0 * std::f64::consts::SQRT_2;
                vec![
                    (1.0 + s3) / norm,
                    (3.0 + s3) / norm,
                    (3.0 - s3) / norm,
                    (1.0 - s3) / norm,
                ]
            }
            Wavelet::Db4 => DB4.to_vec(),
        }
    }

    /// Wavelet (high-pass) taps: the alternating flip of the low-pass filter.
    pub fn highpass(self) -> Vec<f64> {
        let h = self.lowpass();
        let k = h.len();
        (0..k)
            .map(|i| {
                if i % 2 == 0 {
                    h[k - 1 - i]
                } else {
                    -h[k - 1 - i]
                }
            })
            .collect()
    }
}

impl fmt::Display for Wavelet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Wavelet {
    type Err = DwtError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "haar" => Ok(Wavelet::Haar),
            "db2" => Ok(Wavelet::Db2),
            "db4" => Ok(Wavelet::Db4),
            other => Err(DwtError::UnknownWavelet(other.to_string())),
        }
    }
}

impl From<Wavelet> for String {
    fn from(w: Wavelet) -> String {
        w.name().to_string()
    }
}

impl TryFrom<String> for Wavelet {
    type Error = DwtError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Subbands of an `N`-level decomposition in canonical order
/// `[LL_N, LH_N, HL_N, HH_N, LH_{N-1}, ..., HH_1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid {
    pub levels: usize,
    pub wavelet: Wavelet,
    pub subbands: Vec<Subband>,
}

impl WaveletPyramid {
    pub fn approximation(&self) -> &Subband {
        &self.subbands[0]
    }

    pub fn details(&self) -> &[Subband] {
        &self.subbands[1..]
    }

    /// Sum of squared coefficients over every subband.
    pub fn energy(&self) -> f64 {
        self.subbands
            .iter()
            .flat_map(|b| &b.coeffs)
            .map(|c| c * c)
            .sum()
    }

    /// Shape of the raster this pyramid reconstructs to.
    pub fn source_shape(&self) -> (usize, usize) {
        let ll = self.approximation();
        (ll.rows << self.levels, ll.cols << self.levels)
    }
}

/// Number of subbands produced by an `levels`-deep decomposition.
pub fn subband_count(levels: usize) -> usize {
    3 * levels + 1
}

/// One filter-bank stage along a line of even length `n`. Low-pass output
/// goes to `out[..n/2]`, high-pass to `out[n/2..]`.
fn analyze_line(input: &[f64], lo: &[f64], hi: &[f64], out: &mut [f64]) {
    let n = input.len();
    let half = n / 2;
    for i in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for (k, (&l, &h)) in lo.iter().zip(hi).enumerate() {
            let x = input[(2 * i + k) % n];
            a += l * x;
            d += h * x;
        }
        out[i] = a;
        out[half + i] = d;
    }
}

/// Transpose of [`analyze_line`].
fn synthesize_line(input: &[f64], lo: &[f64], hi: &[f64], out: &mut [f64]) {
    let n = input.len();
    let half = n / 2;
    out.fill(0.0);
    for i in 0..half {
        let (a, d) = (input[i], input[half + i]);
        for (k, (&l, &h)) in lo.iter().zip(hi).enumerate() {
            out[(2 * i + k) % n] += l * a + h * d;
        }
    }
}

/// One 1-D filter-bank step: `(input, lowpass, highpass, output)`.
type Stage = fn(&[f64], &[f64], &[f64], &mut [f64]);

/// Applies `stage` to every row and then every column of the top-left
/// `rows`×`cols` block of `buf` (row stride `stride`).
#[allow(clippy::too_many_arguments)]
fn separable_pass(
    buf: &mut [f64],
    stride: usize,
    rows: usize,
    cols: usize,
    lo: &[f64],
    hi: &[f64],
    stage: Stage,
    rows_first: bool,
) {
    let mut line = vec![0.0; rows.max(cols)];
    let mut out = vec![0.0; rows.max(cols)];
    let mut do_rows = |buf: &mut [f64]| {
        for r in 0..rows {
            let row = &mut buf[r * stride..r * stride + cols];
            line[..cols].copy_from_slice(row);
            stage(&line[..cols], lo, hi, &mut out[..cols]);
            row.copy_from_slice(&out[..cols]);
        }
    };
    let mut col_line = vec![0.0; rows];
    let mut col_out = vec![0.0; rows];
    let mut do_cols = |buf: &mut [f64]| {
        for c in 0..cols {
            for r in 0..rows {
                col_line[r] = buf[r * stride + c];
            }
            stage(&col_line, lo, hi, &mut col_out);
            for r in 0..rows {
                buf[r * stride + c] = col_out[r];
            }
        }
    };
    if rows_first {
        do_rows(buf);
        do_cols(buf);
    } else {
        do_cols(buf);
        do_rows(buf);
    }
}

fn check_dims(rows: usize, cols: usize, levels: usize) -> Result<(), DwtError> {
    if levels == 0 {
        return Err(DwtError::ZeroLevels);
    }
    let block = 1usize.checked_shl(levels as u32).unwrap_or(0);
    if block == 0 || !rows.is_multiple_of(block) || !cols.is_multiple_of(block) {
        return Err(DwtError::DimensionNotDivisible { rows, cols, levels });
    }
    Ok(())
}

fn extract_block(
    buf: &[f64],
    stride: usize,
    r0: usize,
    c0: usize,
    rows: usize,
    cols: usize,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * cols);
    for r in r0..r0 + rows {
        out.extend_from_slice(&buf[r * stride + c0..r * stride + c0 + cols]);
    }
    out
}

fn insert_block(buf: &mut [f64], stride: usize, r0: usize, c0: usize, cols: usize, data: &[f64]) {
    for (i, chunk) in data.chunks_exact(cols).enumerate() {
        let start = (r0 + i) * stride + c0;
        buf[start..start + cols].copy_from_slice(chunk);
    }
}

/// Forward transform of `levels` stages; recursion continues on the
/// approximation band only.
pub fn dwt2_forward(
    img: &Raster,
    levels: usize,
    wavelet: Wavelet,
) -> Result<WaveletPyramid, DwtError> {
    let (rows, cols) = (img.height(), img.width());
    check_dims(rows, cols, levels)?;
    let lo = wavelet.lowpass();
    let hi = wavelet.highpass();

    // in-place Mallat layout: after each stage the approximation sits in
    // the top-left quadrant of the current block
    let mut buf = img.data().to_vec();
    let mut details = Vec::with_capacity(3 * levels);
    let (mut r, mut c) = (rows, cols);
    for level in 1..=levels {
        separable_pass(&mut buf, cols, r, c, &lo, &hi, analyze_line, true);
        let (hr, hc) = (r / 2, c / 2);
        let label = |orientation| SubbandLabel { level, orientation };
        let mut stage = vec![
            Subband::new(
                hr,
                hc,
                extract_block(&buf, cols, hr, 0, hr, hc),
                label(Orientation::Horizontal),
            ),
            Subband::new(
                hr,
                hc,
                extract_block(&buf, cols, 0, hc, hr, hc),
                label(Orientation::Vertical),
            ),
            Subband::new(
                hr,
                hc,
                extract_block(&buf, cols, hr, hc, hr, hc),
                label(Orientation::Diagonal),
            ),
        ];
        // finest level goes last in canonical order
        stage.extend(details);
        details = stage;
        r = hr;
        c = hc;
    }
    let approx = Subband::new(
        r,
        c,
        extract_block(&buf, cols, 0, 0, r, c),
        SubbandLabel {
            level: levels,
            orientation: Orientation::Approx,
        },
    );
    let mut subbands = Vec::with_capacity(subband_count(levels));
    subbands.push(approx);
    subbands.extend(details);
    Ok(WaveletPyramid {
        levels,
        wavelet,
        subbands,
    })
}

fn validate(pyr: &WaveletPyramid) -> Result<(usize, usize), DwtError> {
    let malformed = |msg: String| Err(DwtError::MalformedPyramid(msg));
    if pyr.levels == 0 {
        return malformed("zero levels".into());
    }
    if pyr.subbands.len() != subband_count(pyr.levels) {
        return malformed(format!(
            "{} subbands for {} levels",
            pyr.subbands.len(),
            pyr.levels
        ));
    }
    let ll = &pyr.subbands[0];
    if ll.rows == 0 || ll.cols == 0 {
        return malformed("empty approximation band".into());
    }
    let expected = |idx: usize| -> (usize, Orientation) {
        if idx == 0 {
            return (pyr.levels, Orientation::Approx);
        }
        let level = pyr.levels - (idx - 1) / 3;
        let orientation = match (idx - 1) % 3 {
            0 => Orientation::Horizontal,
            1 => Orientation::Vertical,
            _ => Orientation::Diagonal,
        };
        (level, orientation)
    };
    for (idx, band) in pyr.subbands.iter().enumerate() {
        let (level, orientation) = expected(idx);
        if band.label != (SubbandLabel { level, orientation }) {
            return malformed(format!("subband {idx} labelled {}", band.label));
        }
        let shift = pyr.levels - level;
        let want = (ll.rows << shift, ll.cols << shift);
        if (band.rows, band.cols) != want || band.coeffs.len() != want.0 * want.1 {
            return malformed(format!(
                "{} is {}x{} with {} coefficients, expected {}x{}",
                band.label,
                band.rows,
                band.cols,
                band.coeffs.len(),
                want.0,
                want.1
            ));
        }
    }
    Ok(pyr.source_shape())
}

/// Synthesis filter bank. The result is not clamped.
pub fn dwt2_inverse(pyr: &WaveletPyramid) -> Result<Raster, DwtError> {
    let (rows, cols) = validate(pyr)?;
    let lo = pyr.wavelet.lowpass();
    let hi = pyr.wavelet.highpass();

    let mut buf = vec![0.0; rows * cols];
    let ll = &pyr.subbands[0];
    insert_block(&mut buf, cols, 0, 0, ll.cols, &ll.coeffs);
    // details are stored coarsest first, three per level
    for (stage, triple) in pyr.subbands[1..].chunks_exact(3).enumerate() {
        let (hr, hc) = (triple[0].rows, triple[0].cols);
        insert_block(&mut buf, cols, hr, 0, hc, &triple[0].coeffs);
        insert_block(&mut buf, cols, 0, hc, hc, &triple[1].coeffs);
        insert_block(&mut buf, cols, hr, hc, hc, &triple[2].coeffs);
        debug_assert_eq!(triple[0].label.level, pyr.levels - stage);
        separable_pass(
            &mut buf,
            cols,
            2 * hr,
            2 * hc,
            &lo,
            &hi,
            synthesize_line,
            false,
        );
    }
    Ok(Raster::new(cols, rows, buf).expect("validated shape"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_raster(side: usize, seed: u64) -> Raster {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Raster::from_fn(side, side, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn filters_are_orthonormal() {
        for w in [Wavelet::Haar, Wavelet::Db2, Wavelet::Db4] {
            let h = w.lowpass();
            let g = w.highpass();
            assert!(
                (h.iter().sum::<f64>() - std::f64::consts::SQRT_2).abs() < 1e-14,
                "{w}"
            );
            assert!(g.iter().sum::<f64>().abs() < 1e-14, "{w}");
            for shift in (0..h.len()).step_by(2) {
                let hh: f64 = (0..h.len() - shift).map(|k| h[k] * h[k + shift]).sum();
                let hg: f64 = (0..h.len() - shift).map(|k| h[k] * g[k + shift]).sum();
                let expected = if shift == 0 { 1.0 } else { 0.0 };
                assert!((hh - expected).abs() < 1e-14, "{w} shift {shift}");
                assert!(hg.abs() < 1e-14, "{w} shift {shift}");
            }
        }
    }

    #[test]
    fn wavelet_names_round_trip() {
        for w in [Wavelet::Haar, Wavelet::Db2, Wavelet::Db4] {
            assert_eq!(w.name().parse::<Wavelet>().unwrap(), w);
        }
        assert_eq!(
            "sym8".parse::<Wavelet>(),
            Err(DwtError::UnknownWavelet("sym8".into()))
        );
    }

    #[test]
    fn haar_ones_block() {
        let img = Raster::filled(2, 2, 1.0);
        let pyr = dwt2_forward(&img, 1, Wavelet::Haar).unwrap();
        assert_eq!(pyr.subbands.len(), 4);
        assert!((pyr.subbands[0].coeffs[0] - 2.0).abs() < 1e-15);
        for band in pyr.details() {
            assert_eq!(band.coeffs, vec![0.0]);
        }
    }

    #[test]
    fn haar_single_ll_coefficient_synthesizes_half_block() {
        let mut pyr = dwt2_forward(&Raster::filled(2, 2, 0.0), 1, Wavelet::Haar).unwrap();
        pyr.subbands[0].coeffs[0] = 1.0;
        let out = dwt2_inverse(&pyr).unwrap();
        for v in out.data() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn haar_edge_orientation() {
        // top half dark, bottom half light: a horizontal edge
        let img = Raster::from_fn(8, 8, |r, _| if r < 3 { 0.0 } else { 1.0 });
        let pyr = dwt2_forward(&img, 1, Wavelet::Haar).unwrap();
        let energy = |i: usize| pyr.subbands[i].coeffs.iter().map(|c| c * c).sum::<f64>();
        assert!(energy(1) > 0.0);
        assert_eq!(energy(2), 0.0);
        assert_eq!(energy(3), 0.0);
    }

    #[test]
    fn constant_image_has_no_detail() {
        for w in [Wavelet::Haar, Wavelet::Db2, Wavelet::Db4] {
            let pyr = dwt2_forward(&Raster::filled(16, 16, 0.8), 2, w).unwrap();
            for band in pyr.details() {
                assert!(
                    band.coeffs.iter().all(|c| c.abs() < 1e-13),
                    "{w} {}",
                    band.label
                );
            }
        }
    }

    #[test]
    fn canonical_order_and_shapes() {
        let pyr = dwt2_forward(&random_raster(32, 1), 3, Wavelet::Db4).unwrap();
        let labels: Vec<String> = pyr.subbands.iter().map(|b| b.label.to_string()).collect();
        assert_eq!(
            labels,
            ["LL3", "LH3", "HL3", "HH3", "LH2", "HL2", "HH2", "LH1", "HL1", "HH1"]
        );
        let sizes: Vec<usize> = pyr.subbands.iter().map(|b| b.rows).collect();
        assert_eq!(sizes, [4, 4, 4, 4, 8, 8, 8, 16, 16, 16]);
        assert_eq!(pyr.source_shape(), (32, 32));
    }

    #[test]
    fn subband_count_formula() {
        for levels in 1..=4 {
            let pyr =
                dwt2_forward(&random_raster(64, levels as u64), levels, Wavelet::Haar).unwrap();
            assert_eq!(pyr.subbands.len(), 3 * levels + 1);
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        let img = Raster::filled(12, 12, 0.0);
        assert_eq!(
            dwt2_forward(&img, 3, Wavelet::Haar),
            Err(DwtError::DimensionNotDivisible {
                rows: 12,
                cols: 12,
                levels: 3
            })
        );
        assert_eq!(
            dwt2_forward(&img, 0, Wavelet::Haar),
            Err(DwtError::ZeroLevels)
        );
        assert!(dwt2_forward(&img, 2, Wavelet::Haar).is_ok());
    }

    #[test]
    fn deep_db4_on_tiny_bands_still_reconstructs() {
        // 8 taps wrap several times around 2-sample lines at the last level
        let img = random_raster(8, 3);
        let pyr = dwt2_forward(&img, 3, Wavelet::Db4).unwrap();
        assert!((pyr.energy() - img.energy()).abs() < 1e-12 * img.energy());
        assert!(dwt2_inverse(&pyr).unwrap().max_abs_diff(&img) < 1e-12);
    }

    #[test]
    fn zero_pyramid_inverts_to_zero() {
        let pyr = dwt2_forward(&Raster::filled(16, 16, 0.0), 2, Wavelet::Db4).unwrap();
        assert!(dwt2_inverse(&pyr).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn malformed_pyramids_are_rejected() {
        let good = dwt2_forward(&random_raster(16, 2), 2, Wavelet::Haar).unwrap();

        let mut missing = good.clone();
        missing.subbands.pop();
        assert!(matches!(
            dwt2_inverse(&missing),
            Err(DwtError::MalformedPyramid(_))
        ));

        let mut reshaped = good.clone();
        reshaped.subbands[5].rows = 3;
        assert!(matches!(
            dwt2_inverse(&reshaped),
            Err(DwtError::MalformedPyramid(_))
        ));

        let mut swapped = good;
        swapped.subbands.swap(1, 2);
        assert!(matches!(
            dwt2_inverse(&swapped),
            Err(DwtError::MalformedPyramid(_))
        ));
    }

    #[test]
    fn rectangular_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let img = Raster::from_fn(32, 16, |_, _| rng.random());
        let pyr = dwt2_forward(&img, 2, Wavelet::Db2).unwrap();
        assert_eq!((pyr.subbands[0].rows, pyr.subbands[0].cols), (4, 8));
        assert!(dwt2_inverse(&pyr).unwrap().max_abs_diff(&img) < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn forward_is_linear(seed_x in any::<u64>(), seed_y in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
                let x = random_raster(32, seed_x);
                let y = random_raster(32, seed_y);
                let combo = Raster::from_fn(32, 32, |r, c| a * x.get(r, c) + b * y.get(r, c));
                let px = dwt2_forward(&x, 3, Wavelet::Db4).unwrap();
                let py = dwt2_forward(&y, 3, Wavelet::Db4).unwrap();
                let pc = dwt2_forward(&combo, 3, Wavelet::Db4).unwrap();
                for ((bx, by), bc) in px.subbands.iter().zip(&py.subbands).zip(&pc.subbands) {
                    for ((cx, cy), cc) in bx.coeffs.iter().zip(&by.coeffs).zip(&bc.coeffs) {
                        prop_assert!((a * cx + b * cy - cc).abs() < 1e-9);
                    }
                }
            }

            #[test]
            fn parseval_and_reconstruction(seed in any::<u64>(), levels in 1usize..=4, which in 0usize..3) {
                let wavelet = [Wavelet::Haar, Wavelet::Db2, Wavelet::Db4][which];
                let img = random_raster(64, seed);
                let pyr = dwt2_forward(&img, levels, wavelet).unwrap();
                prop_assert!((pyr.energy() - img.energy()).abs() <= 1e-9 * img.energy());
                prop_assert!(dwt2_inverse(&pyr).unwrap().max_abs_diff(&img) < 1e-9);
            }
        }
    }
}
