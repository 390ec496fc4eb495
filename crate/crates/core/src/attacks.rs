//! Volumetric distortion sources for robustness benchmarking: seeded
//! additive Gaussian noise, and dead-zone quantization of the wavelet
//! coefficients standing in for transform-codec compression at a quality
//! factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::rng::XorShift64;
use crate::wavelet::{forward, inverse, WaveletSpec};

/// Attack family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Awgn,
    Quantize,
}

/// One attack point: `strength` is the noise sigma in gray levels for
/// `awgn`, or the quality factor in (0, 100] for `quantize`. The seed
/// only matters for noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub strength: f64,
    #[serde(default)]
    pub seed: u64,
}

impl AttackSpec {
    pub fn apply(&self, img: &GrayImage, wavelet: &WaveletSpec) -> Result<GrayImage> {
        match self.kind {
            AttackKind::Awgn => apply_awgn(img, self.strength, self.seed),
            AttackKind::Quantize => apply_quantize(img, self.strength, wavelet),
        }
    }
}

/// Adds seeded Gaussian noise per pixel. No clamping: the image domain
/// stays real-valued until it is saved.
pub fn apply_awgn(img: &GrayImage, sigma: f64, seed: u64) -> Result<GrayImage> {
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(Error::Param(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let mut out = img.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = XorShift64::new(seed);
    let pixels = out.pixels_mut();
    let mut i = 0;
    while i < pixels.len() {
        let (z0, z1) = rng.next_gaussian_pair();
        pixels[i] += sigma * z0;
        if i + 1 < pixels.len() {
            pixels[i + 1] += sigma * z1;
        }
        i += 2;
    }
    Ok(out)
}

/// Step size map: full quality still quantizes at the minimum step, which
/// is why even the mildest setting perturbs an integer image.
const DELTA_MIN: f64 = 0.5;
const DELTA_MAX: f64 = 64.0;
/// The approximation band is quantized this much finer than the details,
/// mirroring perceptual codec practice.
const LL_STEP_SCALE: f64 = 0.25;

/// Uniform dead-zone quantization of all four sub-bands with
/// `delta = DELTA_MAX * (100 - qf) / 100 + DELTA_MIN` (details; LL uses a
/// quarter of that), then reconstruction. Idempotent at fixed `qf`.
pub fn apply_quantize(img: &GrayImage, qf: f64, spec: &WaveletSpec) -> Result<GrayImage> {
    if !(qf > 0.0 && qf <= 100.0) {
        return Err(Error::Param(format!(
            "quality factor must be in (0, 100], got {qf}"
        )));
    }
    let delta_detail = DELTA_MAX * (100.0 - qf) / 100.0 + DELTA_MIN;
    let delta_ll = delta_detail * LL_STEP_SCALE;

    let mut bands = forward(img, spec)?;
    for v in bands.ll_mut().iter_mut() {
        *v = dead_zone(*v, delta_ll);
    }
    // The three detail bands share the coarser step.
    let ll_snapshot = bands.ll().to_vec();
    bands.map_in_place(|v| dead_zone(v, delta_detail));
    bands.ll_mut().copy_from_slice(&ll_snapshot);
    Ok(inverse(&bands, spec))
}

/// Dead-zone scalar quantizer: the zero bin spans (-delta, delta); other
/// bins reconstruct at their midpoint. Reconstructed values are fixed
/// points of the quantizer.
fn dead_zone(value: f64, delta: f64) -> f64 {
    let bin = (value.abs() / delta).floor();
    if bin == 0.0 {
        0.0
    } else {
        value.signum() * (bin + 0.5) * delta
    }
}
