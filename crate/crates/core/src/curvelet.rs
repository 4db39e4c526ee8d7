//! Fast discrete curvelet transform via wrapping.
//!
//! The frequency plane of an `n`×`n` image is split into concentric
//! square coronae (one per scale, dyadic) and each corona into angular
//! wedges. The number of wedges doubles every second scale, so wedge width
//! shrinks like the square root of wedge length (parabolic scaling).
//!
//! Every window `U` is real and smooth, and the squared windows sum to one
//! at every frequency. Each windowed wedge is wrapped periodically onto a
//! small rectangle whose size guarantees no two support points collide,
//! then brought back to space with a unitary inverse FFT. Together this
//! makes the transform a tight frame: energy is preserved and the adjoint
//! (unwrap, multiply by `U`, sum) is the exact inverse.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft::{signed_freq, Fft2};
use crate::image_io::Raster;
use crate::subband::{Orientation, Subband, SubbandLabel};

#[derive(Debug, Error, PartialEq)]
pub enum CurveletError {
    #[error("bad dimensions: {0}")]
    BadDimensions(String),
    #[error("bad curvelet configuration: {0}")]
    BadConfig(String),
    #[error("malformed coefficients: {0}")]
    MalformedCoeffs(String),
}

/// Scale and orientation schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CurveletConfig {
    pub scales: usize,
    pub angles_at_second_coarsest: usize,
    pub finest_is_wavelet: bool,
}

impl Default for CurveletConfig {
    fn default() -> Self {
        CurveletConfig::for_side(crate::image_io::CANONICAL_SIDE)
    }
}

impl CurveletConfig {
    pub fn new(scales: usize, angles_at_second_coarsest: usize) -> Self {
        CurveletConfig {
            scales,
            angles_at_second_coarsest,
            finest_is_wavelet: true,
        }
    }

    /// `log2(side) - 3` scales (at least 2), 16 angles, wavelet finest scale.
    pub fn for_side(side: usize) -> Self {
        let log2 = side.max(1).ilog2() as usize;
        CurveletConfig::new(log2.saturating_sub(3).max(2), 16)
    }

    /// Wedges per scale, coarsest first.
    pub fn orientation_counts(&self) -> Vec<usize> {
        (1..=self.scales)
            .map(|j| {
                if j == 1 || (j == self.scales && self.finest_is_wavelet) {
                    1
                } else {
                    self.angles_at_second_coarsest << ((j - 2) / 2)
                }
            })
            .collect()
    }

    pub fn subband_count(&self) -> usize {
        self.orientation_counts().iter().sum()
    }

    pub fn validate(&self) -> Result<(), CurveletError> {
        if self.scales < 2 {
            return Err(CurveletError::BadConfig(format!(
                "{} scales, need at least 2",
                self.scales
            )));
        }
        if self.scales > 30 {
            return Err(CurveletError::BadConfig(format!(
                "{} scales is too many",
                self.scales
            )));
        }
        let a = self.angles_at_second_coarsest;
        if a == 0 || !a.is_multiple_of(4) {
            return Err(CurveletError::BadConfig(format!(
                "angle count {a} is not a positive multiple of 4"
            )));
        }
        Ok(())
    }

    /// Checks that a `side`×`side` image can be analyzed with this schedule.
    pub fn validate_for_side(&self, side: usize) -> Result<(), CurveletError> {
        self.validate()?;
        if !side.is_power_of_two() || side < (1 << self.scales) {
            return Err(CurveletError::BadDimensions(format!(
                "side {side} must be a power of two >= 2^{}",
                self.scales
            )));
        }
        Ok(())
    }
}

/// A complex coefficient grid for one (scale, wedge) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveletTile {
    pub rows: usize,
    pub cols: usize,
    pub coeffs: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveletCoeffs {
    pub config: CurveletConfig,
    pub source_side: usize,
    /// `tiles[scale][wedge]`, coarsest scale first.
    pub tiles: Vec<Vec<CurveletTile>>,
}

impl CurveletCoeffs {
    pub fn energy(&self) -> f64 {
        self.tiles
            .iter()
            .flatten()
            .flat_map(|t| &t.coeffs)
            .map(|c| c.norm_sqr())
            .sum()
    }

    pub fn tile_count(&self) -> usize {
        self.tiles.iter().map(Vec::len).sum()
    }
}

/// Meyer auxiliary polynomial: smooth step from 0 to 1 on `[0, 1]` with
/// `nu(x) + nu(1 - x) = 1`.
fn meyer_nu(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x.powi(4) * (35.0 - 84.0 * x + 70.0 * x * x - 20.0 * x.powi(3))
}

/// Radial low-pass profile: 1 below 1, smooth roll-off to 0 at 2.
fn lowpass_profile(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        (FRAC_PI_2 * meyer_nu(t - 1.0)).cos()
    }
}

/// Half-width of the angular transition band, in wedge units.
const ANGULAR_TRANSITION: f64 = 0.25;

/// Angular window of wedge `wedge` out of `count`, evaluated at `theta`.
/// Windows of adjacent wedges satisfy `V_l^2 + V_{l+1}^2 = 1` where they
/// overlap; elsewhere exactly one window is 1.
fn angular_window(theta: f64, wedge: usize, count: usize) -> f64 {
    let u = theta.rem_euclid(TAU) / TAU * count as f64;
    let half = count as f64 / 2.0;
    let d = (u - wedge as f64 + half).rem_euclid(count as f64) - half;
    let tau = ANGULAR_TRANSITION;
    if d < -tau || d > 1.0 + tau {
        0.0
    } else if d <= tau {
        (FRAC_PI_2 * meyer_nu((d + tau) / (2.0 * tau))).sin()
    } else if d < 1.0 - tau {
        1.0
    } else {
        (FRAC_PI_2 * meyer_nu((d - 1.0 + tau) / (2.0 * tau))).cos()
    }
}

/// Precomputed support of one window: FFT grid positions, window values and
/// their wrapped positions inside the tile.
#[derive(Debug, Clone)]
struct Wedge {
    grid: Vec<usize>,
    window: Vec<f64>,
    tile_index: Vec<usize>,
    rows: usize,
    cols: usize,
    fft: Fft2,
    /// Frequency-domain center angle, `None` for isotropic windows.
    center: Option<f64>,
}

/// Reusable transform for one image side and configuration.
#[derive(Debug, Clone)]
pub struct CurveletPlan {
    config: CurveletConfig,
    side: usize,
    image_fft: Fft2,
    /// `wedges[scale][wedge]`, coarsest first.
    wedges: Vec<Vec<Wedge>>,
}

impl CurveletPlan {
    pub fn new(side: usize, config: CurveletConfig) -> Result<Self, CurveletError> {
        config.validate_for_side(side)?;
        let n = side;
        let scales = config.scales;
        let counts = config.orientation_counts();

        // low-pass cutoffs: scale j keeps |k|_inf <= m_j with roll-off to 2 m_j;
        // the second finest reaches the Nyquist frequency
        let cutoff = |j: usize| n as f64 / f64::powi(2.0, (scales + 1 - j) as i32);
        let lowpass = |j: usize, kr: f64, kc: f64| -> f64 {
            if j >= scales {
                1.0
            } else {
                let m = cutoff(j);
                lowpass_profile(kr / m) * lowpass_profile(kc / m)
            }
        };

        let mut planner = FftPlanner::new();
        let mut wedges = Vec::with_capacity(scales);
        for (j, &count) in (1..=scales).zip(&counts) {
            // radial profile over the whole grid
            let radial: Vec<f64> = (0..n * n)
                .map(|idx| {
                    let kr = signed_freq(idx / n, n) as f64;
                    let kc = signed_freq(idx % n, n) as f64;
                    let outer = lowpass(j, kr, kc);
                    if j == 1 {
                        outer
                    } else {
                        let inner = lowpass(j - 1, kr, kc);
                        (outer * outer - inner * inner).max(0.0).sqrt()
                    }
                })
                .collect();

            let mut scale_wedges = Vec::with_capacity(count);
            for l in 0..count {
                let mut grid = Vec::new();
                let mut window = Vec::new();
                let mut freqs = Vec::new();
                for (idx, &w) in radial.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let kr = signed_freq(idx / n, n);
                    let kc = signed_freq(idx % n, n);
                    let value = if count == 1 {
                        w
                    } else {
                        w * angular_window((kr as f64).atan2(kc as f64), l, count)
                    };
                    if value > 0.0 {
                        grid.push(idx);
                        window.push(value);
                        freqs.push((kr, kc));
                    }
                }
                if grid.is_empty() {
                    return Err(CurveletError::BadConfig(format!(
                        "wedge {l} of scale {j} has no support on a {n}x{n} grid"
                    )));
                }
                let center = (count > 1).then(|| (l as f64 + 0.5) * TAU / count as f64);
                let along_rows = center.is_some_and(|c| c.sin().abs() >= c.cos().abs());
                let (rows, cols, tile_index) = wrap_layout(&freqs, along_rows);
                scale_wedges.push(Wedge {
                    grid,
                    window,
                    tile_index,
                    rows,
                    cols,
                    fft: Fft2::new(&mut planner, rows, cols),
                    center,
                });
            }
            wedges.push(scale_wedges);
        }

        Ok(CurveletPlan {
            config,
            side,
            image_fft: Fft2::new(&mut planner, n, n),
            wedges,
        })
    }

    pub fn config(&self) -> CurveletConfig {
        self.config
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Orientation (radians in `[0, pi)`, measured from the column axis
    /// toward increasing row index) of the spatial edges that excite the
    /// given wedge. `None` for isotropic scales.
    pub fn wedge_edge_orientation(&self, scale: usize, wedge: usize) -> Option<f64> {
        let center = self.wedges.get(scale.checked_sub(1)?)?.get(wedge)?.center?;
        Some((center + FRAC_PI_2).rem_euclid(PI))
    }

    /// Sum over every frequency of the squared windows; 1 everywhere for a
    /// tight frame.
    pub fn window_partition(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.side * self.side];
        for wedge in self.wedges.iter().flatten() {
            for (&g, &w) in wedge.grid.iter().zip(&wedge.window) {
                total[g] += w * w;
            }
        }
        total
    }

    pub fn forward(&self, img: &Raster) -> Result<CurveletCoeffs, CurveletError> {
        let n = self.side;
        if img.width() != n || img.height() != n {
            return Err(CurveletError::BadDimensions(format!(
                "plan is for {n}x{n}, image is {}x{}",
                img.width(),
                img.height()
            )));
        }
        let mut spectrum: Vec<Complex64> =
            img.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.image_fft.forward(&mut spectrum);

        let tiles = self
            .wedges
            .iter()
            .map(|scale| {
                scale
                    .iter()
                    .map(|wedge| {
                        let mut tile = vec![Complex64::default(); wedge.rows * wedge.cols];
                        for ((&g, &w), &t) in
                            wedge.grid.iter().zip(&wedge.window).zip(&wedge.tile_index)
                        {
                            tile[t] = spectrum[g] * w;
                        }
                        wedge.fft.inverse(&mut tile);
                        CurveletTile {
                            rows: wedge.rows,
                            cols: wedge.cols,
                            coeffs: tile,
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(CurveletCoeffs {
            config: self.config,
            source_side: n,
            tiles,
        })
    }

    /// Adjoint of [`forward`](Self::forward), which for a tight frame is its inverse.
    pub fn inverse(&self, coeffs: &CurveletCoeffs) -> Result<Raster, CurveletError> {
        self.check_coeffs(coeffs)?;
        let n = self.side;
        let mut spectrum = vec![Complex64::default(); n * n];
        for (scale, tiles) in self.wedges.iter().zip(&coeffs.tiles) {
            for (wedge, tile) in scale.iter().zip(tiles) {
                let mut data = tile.coeffs.clone();
                wedge.fft.forward(&mut data);
                for ((&g, &w), &t) in wedge.grid.iter().zip(&wedge.window).zip(&wedge.tile_index) {
                    spectrum[g] += data[t] * w;
                }
            }
        }
        self.image_fft.inverse(&mut spectrum);
        Ok(Raster::new(n, n, spectrum.into_iter().map(|c| c.re).collect()).expect("square raster"))
    }

    fn check_coeffs(&self, coeffs: &CurveletCoeffs) -> Result<(), CurveletError> {
        let bad = |msg: String| Err(CurveletError::MalformedCoeffs(msg));
        if coeffs.config != self.config || coeffs.source_side != self.side {
            return bad(format!(
                "coefficients for side {} / {:?} do not match plan for side {} / {:?}",
                coeffs.source_side, coeffs.config, self.side, self.config
            ));
        }
        if coeffs.tiles.len() != self.wedges.len() {
            return bad(format!(
                "{} scales, expected {}",
                coeffs.tiles.len(),
                self.wedges.len()
            ));
        }
        for (j, (tiles, wedges)) in coeffs.tiles.iter().zip(&self.wedges).enumerate() {
            if tiles.len() != wedges.len() {
                return bad(format!(
                    "scale {} has {} tiles, expected {}",
                    j + 1,
                    tiles.len(),
                    wedges.len()
                ));
            }
            for (l, (tile, wedge)) in tiles.iter().zip(wedges).enumerate() {
                if (tile.rows, tile.cols) != (wedge.rows, wedge.cols)
                    || tile.coeffs.len() != wedge.rows * wedge.cols
                {
                    return bad(format!(
                        "tile ({}, {l}) is {}x{} with {} values, expected {}x{}",
                        j + 1,
                        tile.rows,
                        tile.cols,
                        tile.coeffs.len(),
                        wedge.rows,
                        wedge.cols
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Chooses a tile size and a collision-free periodic wrap for a window's
/// support.
///
/// With `along_rows` the tile spans the full row-frequency extent of the
/// support, so distinct row frequencies never collide, and is as wide as
/// the widest single row of support, so points within a row never
/// collide. Otherwise the roles of rows and columns swap.
fn wrap_layout(freqs: &[(i64, i64)], along_rows: bool) -> (usize, usize, Vec<usize>) {
    let (major, minor): (Vec<i64>, Vec<i64>) = if along_rows {
        freqs.iter().copied().unzip()
    } else {
        freqs.iter().map(|&(r, c)| (c, r)).unzip()
    };
    let lo = *major.iter().min().expect("nonempty support");
    let hi = *major.iter().max().expect("nonempty support");
    let major_len = (hi - lo + 1) as usize;

    let mut span = vec![(i64::MAX, i64::MIN); major_len];
    for (&a, &b) in major.iter().zip(&minor) {
        let s = &mut span[(a - lo) as usize];
        s.0 = s.0.min(b);
        s.1 = s.1.max(b);
    }
    let minor_len = span
        .iter()
        .filter(|s| s.0 <= s.1)
        .map(|s| (s.1 - s.0 + 1) as usize)
        .max()
        .expect("nonempty support");

    let (rows, cols) = if along_rows {
        (major_len, minor_len)
    } else {
        (minor_len, major_len)
    };
    let index = freqs
        .iter()
        .map(|&(r, c)| {
            let tr = r.rem_euclid(rows as i64) as usize;
            let tc = c.rem_euclid(cols as i64) as usize;
            tr * cols + tc
        })
        .collect();
    (rows, cols, index)
}

/// Forward transform with a one-off plan.
pub fn fdct_forward(img: &Raster, config: CurveletConfig) -> Result<CurveletCoeffs, CurveletError> {
    if img.width() != img.height() {
        return Err(CurveletError::BadDimensions(format!(
            "image must be square, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    CurveletPlan::new(img.width(), config)?.forward(img)
}

/// Inverse transform with a one-off plan.
pub fn fdct_inverse(coeffs: &CurveletCoeffs) -> Result<Raster, CurveletError> {
    let plan = CurveletPlan::new(coeffs.source_side, coeffs.config)
        .map_err(|e| CurveletError::MalformedCoeffs(e.to_string()))?;
    plan.inverse(coeffs)
}

/// Flattens tiles into real subbands of coefficient magnitudes, scale-major
/// and coarsest first.
pub fn curvelet_subbands(coeffs: &CurveletCoeffs) -> Vec<Subband> {
    coeffs
        .tiles
        .iter()
        .enumerate()
        .flat_map(|(j, tiles)| {
            tiles.iter().enumerate().map(move |(l, tile)| {
                Subband::new(
                    tile.rows,
                    tile.cols,
                    tile.coeffs.iter().map(|c| c.norm()).collect(),
                    SubbandLabel {
                        level: j + 1,
                        orientation: Orientation::Wedge(l),
                    },
                )
            })
        })
        .collect()
}
