//! Shared inputs for the criterion benchmarks.

use sigret_core::synth::{generate_corpus, SynthSpec};
use sigret_core::GrayImage;

/// A deterministic corpus of `writers × samples` canonical-size signatures.
pub fn corpus(writers: usize, samples: usize) -> Vec<GrayImage> {
    generate_corpus(&SynthSpec::new(writers, samples, 1))
        .expect("valid spec")
        .into_iter()
        .map(|s| s.image)
        .collect()
}
