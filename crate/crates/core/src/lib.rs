//! Signature image retrieval from multiscale texture features.
//!
//! Images are normalized to a square grayscale raster ([`image_io`]),
//! decomposed with a 2-D wavelet ([`dwt`]) or curvelet ([`curvelet`])
//! transform, summarized per subband by standard deviation and mean
//! absolute value ([`features`]), and ranked by Canberra distance
//! ([`retrieval`]). [`store`] persists feature databases, [`eval`] measures
//! precision and recall at top-k cuts, and [`synth`] produces a seeded
//! stroke-based corpus to run the whole pipeline on.

pub mod curvelet;
pub mod dwt;
pub mod eval;
pub mod features;
mod fft;
pub mod image_io;
pub mod retrieval;
pub mod store;
pub mod subband;
pub mod synth;

pub use curvelet::{CurveletCoeffs, CurveletConfig, CurveletPlan};
pub use dwt::{Wavelet, WaveletPyramid};
pub use eval::{EvalReport, Protocol};
pub use features::{
    extract_features, FeatureExtractor, FeatureLayout, FeatureVector, TransformSpec,
};
pub use image_io::{load_image, preprocess, GrayImage, Raster};
pub use retrieval::{canberra, query, FeatureDb, FeatureRecord, RankedList};
pub use store::{load_db, save_db};
pub use subband::{Orientation, Subband, SubbandLabel};
pub use synth::{generate_corpus, SynthSpec};
