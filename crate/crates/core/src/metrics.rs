//! Fidelity and robustness measurement: PSNR, single-scale SSIM, bit
//! error rate, and a key-mismatch security score.

use crate::attacks::AttackSpec;
use crate::embedder::{extract, BitMessage, EmbedParams};
use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::pn::WatermarkKey;

/// One row of a robustness benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct BerReport {
    pub attack: AttackSpec,
    pub ber_raw: f64,
    pub ber_ecc: f64,
    pub psnr_db: f64,
    pub ssim: f64,
}

/// Peak signal-to-noise ratio in dB against a 255 peak. Identical images
/// return positive infinity.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(Error::Dimension(format!(
            "psnr needs equal dimensions, got {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let n = a.pixels().len() as f64;
    let mse: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);
const SSIM_WINDOW: usize = 8;

/// Mean local SSIM over 8x8 sliding windows with the usual stabilizers.
pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(Error::Dimension(format!(
            "ssim needs equal dimensions, got {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Dimension(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} images, got {w}x{h}"
        )));
    }

    // Summed-area tables over a, b, a^2, b^2, ab; one row/column of
    // zero padding keeps the lookups branch-free.
    let stride = w + 1;
    let mut sums = vec![[0.0f64; 5]; stride * (h + 1)];
    for y in 0..h {
        for x in 0..w {
            let pa = a.pixels()[y * w + x];
            let pb = b.pixels()[y * w + x];
            let vals = [pa, pb, pa * pa, pb * pb, pa * pb];
            let idx = (y + 1) * stride + x + 1;
            for c in 0..5 {
                sums[idx][c] =
                    vals[c] + sums[idx - 1][c] + sums[idx - stride][c] - sums[idx - stride - 1][c];
            }
        }
    }
    let window_sum = |x0: usize, y0: usize, c: usize| -> f64 {
        let x1 = x0 + SSIM_WINDOW;
        let y1 = y0 + SSIM_WINDOW;
        sums[y1 * stride + x1][c] - sums[y0 * stride + x1][c] - sums[y1 * stride + x0][c]
            + sums[y0 * stride + x0][c]
    };

    let area = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=h - SSIM_WINDOW {
        for x0 in 0..=w - SSIM_WINDOW {
            let mu_a = window_sum(x0, y0, 0) / area;
            let mu_b = window_sum(x0, y0, 1) / area;
            let var_a = window_sum(x0, y0, 2) / area - mu_a * mu_a;
            let var_b = window_sum(x0, y0, 3) / area - mu_b * mu_b;
            let cov = window_sum(x0, y0, 4) / area - mu_a * mu_b;
            let value = ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2));
            total += value;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Fraction of differing positions between two equal-length bit slices.
pub fn ber(a: &[u8], b: &[u8]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Param("bit error rate of empty sequences".into()));
    }
    let diff = a.iter().zip(b).filter(|(x, y)| x != y).count();
    Ok(diff as f64 / a.len() as f64)
}

/// Key-leakage score: `|0.5 - BER(extract with key, true message)|`
/// averaged over the given keys. Wrong keys produce coin-flip BER, so a
/// score near zero means the message does not leak without the key;
/// passing the embedding key itself scores about 0.5.
pub fn key_mismatch_score(
    image: &GrayImage,
    true_msg: &BitMessage,
    keys: &[WatermarkKey],
    params: &EmbedParams,
) -> Result<f64> {
    if keys.is_empty() {
        return Err(Error::Param("key mismatch score needs at least one key".into()));
    }
    let mut total = 0.0;
    for &key in keys {
        let mut trial = *params;
        trial.key = key;
        let report = extract(image, true_msg.len(), &trial)?;
        let rate = ber(&report.to_message().bits(), &true_msg.bits())?;
        total += (0.5 - rate).abs();
    }
    Ok(total / keys.len() as f64)
}
