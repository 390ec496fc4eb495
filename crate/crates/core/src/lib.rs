//! Spread-spectrum grayscale image watermarking in the wavelet domain.
//!
//! A multi-bit message is spread over the LL and HH sub-bands of a
//! one-level wavelet decomposition using keyed ±1 reference marks (the HH
//! band carries the complement code), shaped by a perceptual mask, and
//! driven to exact detection margins by a per-mark gain solve. Extraction
//! is blind: regenerate the marks from the key and correlate. On top of
//! the bit layer sits a joint source/channel codec (run-length Golomb
//! coding plus a terminated convolutional code with hard-decision Viterbi
//! decoding), and next to it the volumetric attacks and fidelity metrics
//! used to benchmark robustness.

pub mod attacks;
pub mod convcode;
pub mod embedder;
pub mod error;
pub mod golomb;
pub mod imaging;
pub mod metrics;
pub mod pn;
pub mod synth;
pub mod wavelet;

mod linalg;
mod rng;

pub use attacks::{apply_awgn, apply_quantize, AttackKind, AttackSpec};
pub use convcode::{conv_encode, viterbi_decode, Codeword, ConvCodeSpec};
pub use embedder::{
    baseline_alpha, compute_gains, decode_and_extract, detection_response, embed,
    embed_fixed_gain, encode_and_embed, extract, plan_layout, BitMessage, DetectionReport,
    EmbedParams, ExtractOutcome, GainVector, Layout, PipelineHeader, PreparedEmbedder,
};
pub use error::{Error, Result};
pub use golomb::{
    decode_bitmap, encode_bitmap, optimal_m, BitStream, GolombParam,
};
pub use imaging::{load_pbm, load_pgm, save_pbm, save_pgm, BitPlane, GrayImage};
pub use metrics::{ber, key_mismatch_score, psnr, ssim, BerReport};
pub use pn::{correlate, derive_keys, PnSet, WatermarkKey};
pub use wavelet::{
    forward, inverse, perceptual_mask, PerceptualMask, SubbandSet, WaveletFamily, WaveletSpec,
};
