//! Per-subband texture statistics and the combined feature vector.
//!
//! For each subband `W_k` of size `M`×`N`:
//!
//! * energy `E_k = (1 / MN) * sum |W_k(i, j)|` (mean absolute coefficient),
//! * standard deviation `sigma_k = sqrt((1 / MN) * sum (W_k(i, j) - mu_k)^2)`,
//!
//! and the feature vector is `[sigma_1 .. sigma_n, E_1 .. E_n]`.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::curvelet::{curvelet_subbands, CurveletConfig, CurveletError, CurveletPlan};
use crate::dwt::{self, dwt2_forward, DwtError, Wavelet};
use crate::image_io::{GrayImage, Raster};
use crate::subband::Subband;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("subband {0} is empty")]
    EmptySubband(String),
    #[error(transparent)]
    Dwt(#[from] DwtError),
    #[error(transparent)]
    Curvelet(#[from] CurveletError),
}

/// Which transform produced a feature vector, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformSpec {
    Dwt { levels: usize, wavelet: Wavelet },
    Curvelet(CurveletConfig),
}

impl TransformSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TransformSpec::Dwt { .. } => "dwt",
            TransformSpec::Curvelet(_) => "curvelet",
        }
    }

    /// Number of subbands the transform yields.
    pub fn subband_count(&self) -> usize {
        match self {
            TransformSpec::Dwt { levels, .. } => dwt::subband_count(*levels),
            TransformSpec::Curvelet(cfg) => cfg.subband_count(),
        }
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout {
            transform: *self,
            subbands: self.subband_count(),
        }
    }
}

impl Default for TransformSpec {
    fn default() -> Self {
        TransformSpec::Dwt {
            levels: 3,
            wavelet: Wavelet::Db4,
        }
    }
}

impl fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformSpec::Dwt { levels, wavelet } => {
                write!(f, "dwt(levels={levels}, wavelet={wavelet})")
            }
            TransformSpec::Curvelet(c) => write!(
                f,
                "curvelet(scales={}, angles={}, finest_is_wavelet={})",
                c.scales, c.angles_at_second_coarsest, c.finest_is_wavelet
            ),
        }
    }
}

/// Shape contract shared by every vector in a database.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureLayout {
    pub transform: TransformSpec,
    /// Subband count `n`; vectors hold `2n` values.
    pub subbands: usize,
}

impl FeatureLayout {
    pub fn dim(&self) -> usize {
        2 * self.subbands
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: FeatureLayout,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, layout: FeatureLayout) -> Self {
        FeatureVector { values, layout }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The `sigma_k` half.
    pub fn stds(&self) -> &[f64] {
        &self.values[..self.values.len() / 2]
    }

    /// The `E_k` half.
    pub fn energies(&self) -> &[f64] {
        &self.values[self.values.len() / 2..]
    }
}

/// Mean absolute coefficient.
pub fn subband_energy(band: &Subband) -> Result<f64, FeatureError> {
    if band.is_empty() {
        return Err(FeatureError::EmptySubband(band.label.to_string()));
    }
    let sum: f64 = band.coeffs.iter().map(|c| c.abs()).sum();
    Ok(sum / band.coeffs.len() as f64)
}

/// Population standard deviation about the subband mean.
pub fn subband_std(band: &Subband) -> Result<f64, FeatureError> {
    if band.is_empty() {
        return Err(FeatureError::EmptySubband(band.label.to_string()));
    }
    let n = band.coeffs.len() as f64;
    let mean = band.coeffs.iter().sum::<f64>() / n;
    let var = band.coeffs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt())
}

/// Assembles `[sigma_1 .. sigma_n, E_1 .. E_n]` from subbands in canonical order.
pub fn combine(bands: &[Subband], layout: FeatureLayout) -> Result<FeatureVector, FeatureError> {
    let mut values = Vec::with_capacity(2 * bands.len());
    for band in bands {
        values.push(subband_std(band)?);
    }
    for band in bands {
        values.push(subband_energy(band)?);
    }
    Ok(FeatureVector::new(values, layout))
}

/// Runs one transform and reduces it to a feature vector.
///
/// Holds a prebuilt curvelet plan so batch extraction pays for window
/// construction once.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    spec: TransformSpec,
    plan: Option<CurveletPlan>,
}

impl FeatureExtractor {
    /// `side` is the square image size the extractor will see; it is only
    /// needed to plan the curvelet transform.
    pub fn new(spec: TransformSpec, side: usize) -> Result<Self, FeatureError> {
        let plan = match spec {
            TransformSpec::Curvelet(cfg) => Some(CurveletPlan::new(side, cfg)?),
            TransformSpec::Dwt { .. } => None,
        };
        Ok(FeatureExtractor { spec, plan })
    }

    pub fn spec(&self) -> TransformSpec {
        self.spec
    }

    pub fn layout(&self) -> FeatureLayout {
        self.spec.layout()
    }

    /// Canonically ordered subbands for `img`.
    pub fn subbands(&self, img: &Raster) -> Result<Vec<Subband>, FeatureError> {
        match (self.spec, &self.plan) {
            (TransformSpec::Dwt { levels, wavelet }, _) => {
                Ok(dwt2_forward(img, levels, wavelet)?.subbands)
            }
            (TransformSpec::Curvelet(_), Some(plan)) => Ok(curvelet_subbands(&plan.forward(img)?)),
            (TransformSpec::Curvelet(_), None) => {
                unreachable!("curvelet extractor always has a plan")
            }
        }
    }

    pub fn extract(&self, img: &GrayImage) -> Result<FeatureVector, FeatureError> {
        combine(&self.subbands(img.as_raster())?, self.layout())
    }

    /// Extracts every image in parallel; output order follows input order.
    pub fn extract_batch(&self, images: &[GrayImage]) -> Vec<Result<FeatureVector, FeatureError>> {
        images.par_iter().map(|img| self.extract(img)).collect()
    }
}

/// One-shot extraction. `img` should already be at the canonical size.
pub fn extract_features(
    img: &GrayImage,
    spec: TransformSpec,
) -> Result<FeatureVector, FeatureError> {
    if let TransformSpec::Curvelet(_) = spec {
        if img.width() != img.height() {
            return Err(CurveletError::BadDimensions(format!(
                "image must be square, got {}x{}",
                img.width(),
                img.height()
            ))
            .into());
        }
    }
    FeatureExtractor::new(spec, img.width())?.extract(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subband::{Orientation, SubbandLabel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn band(rows: usize, cols: usize, coeffs: Vec<f64>) -> Subband {
        Subband::new(
            rows,
            cols,
            coeffs,
            SubbandLabel {
                level: 1,
                orientation: Orientation::Diagonal,
            },
        )
    }

    fn random_band(seed: u64) -> Subband {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        band(8, 8, (0..64).map(|_| rng.random_range(-5.0..5.0)).collect())
    }

    fn random_image(side: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::new(side, side, (0..side * side).map(|_| rng.random()).collect()).unwrap()
    }

    #[test]
    fn energy_fixtures() {
        assert_eq!(subband_energy(&band(2, 2, vec![1.0; 4])).unwrap(), 1.0);
        assert_eq!(
            subband_energy(&band(2, 2, vec![1.0, -1.0, 2.0, 0.0])).unwrap(),
            1.0
        );
    }

    #[test]
    fn std_fixtures() {
        assert_eq!(subband_std(&band(2, 2, vec![3.0; 4])).unwrap(), 0.0);
        let s = subband_std(&band(2, 2, vec![1.0, -1.0, 2.0, 0.0])).unwrap();
        assert!((s - 1.25f64.sqrt()).abs() < 1e-9);
        assert!((s - 1.118034).abs() < 1e-6);
    }

    #[test]
    fn energy_is_homogeneous() {
        let b = random_band(1);
        let scaled = band(8, 8, b.coeffs.iter().map(|c| 2.5 * c).collect());
        let e = subband_energy(&b).unwrap();
        assert!((subband_energy(&scaled).unwrap() - 2.5 * e).abs() < 1e-12);
    }

    #[test]
    fn std_is_translation_invariant() {
        let b = random_band(2);
        let shifted = band(8, 8, b.coeffs.iter().map(|c| c + 7.0).collect());
        assert!((subband_std(&shifted).unwrap() - subband_std(&b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn empty_subband_errors() {
        let empty = band(0, 0, vec![]);
        assert!(matches!(
            subband_energy(&empty),
            Err(FeatureError::EmptySubband(_))
        ));
        assert!(matches!(
            subband_std(&empty),
            Err(FeatureError::EmptySubband(_))
        ));
    }

    #[test]
    fn dwt_vector_length() {
        let spec = TransformSpec::Dwt {
            levels: 3,
            wavelet: Wavelet::Db4,
        };
        let fv = extract_features(&random_image(256, 3), spec).unwrap();
        assert_eq!(fv.len(), 20);
        assert_eq!(fv.layout.dim(), 20);
    }

    #[test]
    fn curvelet_vector_length() {
        let spec = TransformSpec::Curvelet(CurveletConfig::new(4, 16));
        let fv = extract_features(&random_image(256, 4), spec).unwrap();
        assert_eq!(fv.len(), 68);
        let spec = TransformSpec::Curvelet(CurveletConfig::default());
        assert_eq!(
            extract_features(&random_image(256, 4), spec).unwrap().len(),
            132
        );
    }

    #[test]
    fn constant_white_image_dwt() {
        for wavelet in [Wavelet::Haar, Wavelet::Db4] {
            let spec = TransformSpec::Dwt { levels: 3, wavelet };
            let fv = extract_features(&GrayImage::filled(256, 256, 1.0), spec).unwrap();
            assert!(
                fv.stds().iter().all(|&s| s.abs() < 1e-12),
                "{wavelet}: {:?}",
                fv.stds()
            );
            // approximation band carries the mean, details carry nothing
            assert!(fv.energies()[0] > 1.0);
            assert!(fv.energies()[1..].iter().all(|&e| e.abs() < 1e-12));
        }
    }

    #[test]
    fn layout_contract() {
        let img = random_image(64, 5);
        for spec in [
            TransformSpec::Dwt {
                levels: 2,
                wavelet: Wavelet::Haar,
            },
            TransformSpec::Curvelet(CurveletConfig::new(3, 8)),
        ] {
            let extractor = FeatureExtractor::new(spec, 64).unwrap();
            let bands = extractor.subbands(img.as_raster()).unwrap();
            let fv = extractor.extract(&img).unwrap();
            let n = bands.len();
            assert_eq!(fv.len(), 2 * n);
            for (k, b) in bands.iter().enumerate() {
                assert_eq!(fv.values[k], subband_std(b).unwrap());
                assert_eq!(fv.values[n + k], subband_energy(b).unwrap());
            }
            assert!(fv.values.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn extraction_is_deterministic() {
        let img = random_image(64, 6);
        let spec = TransformSpec::Curvelet(CurveletConfig::new(3, 16));
        let a = extract_features(&img, spec).unwrap();
        let b = extract_features(&img, spec).unwrap();
        assert_eq!(
            a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn batch_matches_single() {
        let images: Vec<GrayImage> = (0..6).map(|s| random_image(32, s)).collect();
        let extractor =
            FeatureExtractor::new(TransformSpec::Curvelet(CurveletConfig::new(2, 8)), 32).unwrap();
        let batch = extractor.extract_batch(&images);
        for (img, got) in images.iter().zip(batch) {
            assert_eq!(got.unwrap(), extractor.extract(img).unwrap());
        }
    }

    #[test]
    fn transform_errors_propagate() {
        let img = random_image(24, 7);
        assert!(matches!(
            extract_features(
                &img,
                TransformSpec::Dwt {
                    levels: 4,
                    wavelet: Wavelet::Haar
                }
            ),
            Err(FeatureError::Dwt(DwtError::DimensionNotDivisible { .. }))
        ));
        assert!(matches!(
            extract_features(&img, TransformSpec::Curvelet(CurveletConfig::new(3, 8))),
            Err(FeatureError::Curvelet(CurveletError::BadDimensions(_)))
        ));
    }
}
