//! One-level orthonormal 2-D wavelet analysis/synthesis (Haar and the
//! 4-tap Daubechies filter) with periodic boundary extension, and the
//! detail-energy perceptual mask.
//!
//! Periodic extension keeps the transform exactly orthogonal for any even
//! signal length, so synthesis is the exact adjoint of analysis and both
//! perfect reconstruction and energy preservation hold to machine
//! precision.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

/// Filter family for the one-level decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WaveletFamily {
    Haar,
    /// 4-tap orthonormal Daubechies filter.
    Db2,
}

/// Boundary handling; only periodic extension is provided since it is the
/// one that keeps the filter bank orthonormal without coefficient growth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WaveletSpec {
    pub family: WaveletFamily,
    pub boundary: Boundary,
}

impl WaveletSpec {
    pub fn new(family: WaveletFamily) -> Self {
        WaveletSpec {
            family,
            boundary: Boundary::Periodic,
        }
    }

    /// Analysis low-pass and high-pass taps.
    pub fn filters(&self) -> (&'static [f64], &'static [f64]) {
        match self.family {
            WaveletFamily::Haar => {
                const H: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];
                const G: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2];
                (&H, &G)
            }
            WaveletFamily::Db2 => {
                static DB2: OnceLock<([f64; 4], [f64; 4])> = OnceLock::new();
                let (h, g) = DB2.get_or_init(|| {
                    let s3 = 3.0f64.sqrt();
                    let denom = 4.0 * 2.0f64.sqrt();
                    let h = [
                        (1.0 + s3) / denom,
                        (3.0 + s3) / denom,
                        (3.0 - s3) / denom,
                        (1.0 - s3) / denom,
                    ];
                    let g = [h[3], -h[2], h[1], -h[0]];
                    (h, g)
                });
                (h, g)
            }
        }
    }
}

/// The four quadrants of a one-level decomposition, each
/// (height/2) x (width/2), row-major.
///
/// `lh` is the band that is low-pass along rows and high-pass along
/// columns; `hl` the converse; `hh` high-pass in both directions.
#[derive(Clone, Debug, PartialEq)]
pub struct SubbandSet {
    half_width: usize,
    half_height: usize,
    ll: Vec<f64>,
    lh: Vec<f64>,
    hl: Vec<f64>,
    hh: Vec<f64>,
}

impl SubbandSet {
    pub fn new(
        half_width: usize,
        half_height: usize,
        ll: Vec<f64>,
        lh: Vec<f64>,
        hl: Vec<f64>,
        hh: Vec<f64>,
    ) -> Result<Self> {
        let n = half_width * half_height;
        for (name, band) in [("LL", &ll), ("LH", &lh), ("HL", &hl), ("HH", &hh)] {
            if band.len() != n {
                return Err(Error::Dimension(format!(
                    "{name} band holds {} coefficients, expected {n}",
                    band.len()
                )));
            }
        }
        Ok(SubbandSet {
            half_width,
            half_height,
            ll,
            lh,
            hl,
            hh,
        })
    }

    pub fn zeros(half_width: usize, half_height: usize) -> Self {
        let n = half_width * half_height;
        SubbandSet {
            half_width,
            half_height,
            ll: vec![0.0; n],
            lh: vec![0.0; n],
            hl: vec![0.0; n],
            hh: vec![0.0; n],
        }
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn half_height(&self) -> usize {
        self.half_height
    }

    pub fn ll(&self) -> &[f64] {
        &self.ll
    }

    pub fn lh(&self) -> &[f64] {
        &self.lh
    }

    pub fn hl(&self) -> &[f64] {
        &self.hl
    }

    pub fn hh(&self) -> &[f64] {
        &self.hh
    }

    pub fn ll_mut(&mut self) -> &mut [f64] {
        &mut self.ll
    }

    pub fn hh_mut(&mut self) -> &mut [f64] {
        &mut self.hh
    }

    /// Applies one function to every coefficient of all four bands.
    pub fn map_in_place(&mut self, mut f: impl FnMut(f64) -> f64) {
        for band in [&mut self.ll, &mut self.lh, &mut self.hl, &mut self.hh] {
            for v in band.iter_mut() {
                *v = f(*v);
            }
        }
    }

    pub fn energy(&self) -> f64 {
        [&self.ll, &self.lh, &self.hl, &self.hh]
            .iter()
            .flat_map(|b| b.iter())
            .map(|v| v * v)
            .sum()
    }
}

/// Per-pixel weight map derived from detail-band energy, entries in
/// [0, msk_max].
#[derive(Clone, Debug, PartialEq)]
pub struct PerceptualMask {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl PerceptualMask {
    pub fn uniform(width: usize, height: usize, value: f64) -> Result<Self> {
        if value < 0.0 {
            return Err(Error::Param(format!("mask value must be >= 0, got {value}")));
        }
        Ok(PerceptualMask {
            width,
            height,
            values: vec![value; width * height],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn check_even_dims(width: usize, height: usize) -> Result<()> {
    if width < 2 || height < 2 || width % 2 != 0 || height % 2 != 0 {
        return Err(Error::Dimension(format!(
            "one-level decomposition needs even dimensions >= 2, got {width}x{height}"
        )));
    }
    Ok(())
}

/// lo[k] = sum_i h[i] x[(2k+i) mod n], hi[k] likewise with g.
fn analyze_1d(input: &[f64], h: &[f64], g: &[f64], lo: &mut [f64], hi: &mut [f64]) {
    let n = input.len();
    let taps = h.len();
    for k in 0..n / 2 {
        let mut a = 0.0;
        let mut d = 0.0;
        for i in 0..taps {
            let x = input[(2 * k + i) % n];
            a += h[i] * x;
            d += g[i] * x;
        }
        lo[k] = a;
        hi[k] = d;
    }
}

/// Exact adjoint of `analyze_1d`; `out` must be zeroed by the caller.
fn synthesize_1d(lo: &[f64], hi: &[f64], h: &[f64], g: &[f64], out: &mut [f64]) {
    let n = out.len();
    let taps = h.len();
    for k in 0..n / 2 {
        let a = lo[k];
        let d = hi[k];
        for i in 0..taps {
            out[(2 * k + i) % n] += h[i] * a + g[i] * d;
        }
    }
}

/// One-level analysis into four sub-bands.
pub fn forward(img: &GrayImage, spec: &WaveletSpec) -> Result<SubbandSet> {
    let (w, h) = (img.width(), img.height());
    check_even_dims(w, h)?;
    let (lo_f, hi_f) = spec.filters();
    let (hw, hh) = (w / 2, h / 2);

    // Rows first: row_lo and row_hi are h x hw.
    let mut row_lo = vec![0.0; h * hw];
    let mut row_hi = vec![0.0; h * hw];
    for r in 0..h {
        let row = &img.pixels()[r * w..(r + 1) * w];
        analyze_1d(
            row,
            lo_f,
            hi_f,
            &mut row_lo[r * hw..(r + 1) * hw],
            &mut row_hi[r * hw..(r + 1) * hw],
        );
    }

    // Then columns of each half.
    let mut bands = SubbandSet::zeros(hw, hh);
    let mut col = vec![0.0; h];
    let mut lo = vec![0.0; hh];
    let mut hi = vec![0.0; hh];
    for c in 0..hw {
        for r in 0..h {
            col[r] = row_lo[r * hw + c];
        }
        analyze_1d(&col, lo_f, hi_f, &mut lo, &mut hi);
        for r in 0..hh {
            bands.ll[r * hw + c] = lo[r];
            bands.lh[r * hw + c] = hi[r];
        }
        for r in 0..h {
            col[r] = row_hi[r * hw + c];
        }
        analyze_1d(&col, lo_f, hi_f, &mut lo, &mut hi);
        for r in 0..hh {
            bands.hl[r * hw + c] = lo[r];
            bands.hh[r * hw + c] = hi[r];
        }
    }
    Ok(bands)
}

/// Exact synthesis inverse of [`forward`].
pub fn inverse(bands: &SubbandSet, spec: &WaveletSpec) -> GrayImage {
    let (hw, hh) = (bands.half_width, bands.half_height);
    let (w, h) = (2 * hw, 2 * hh);
    let (lo_f, hi_f) = spec.filters();

    let mut row_lo = vec![0.0; h * hw];
    let mut row_hi = vec![0.0; h * hw];
    let mut lo = vec![0.0; hh];
    let mut hi = vec![0.0; hh];
    let mut col = vec![0.0; h];
    for c in 0..hw {
        for r in 0..hh {
            lo[r] = bands.ll[r * hw + c];
            hi[r] = bands.lh[r * hw + c];
        }
        col.iter_mut().for_each(|v| *v = 0.0);
        synthesize_1d(&lo, &hi, lo_f, hi_f, &mut col);
        for r in 0..h {
            row_lo[r * hw + c] = col[r];
        }
        for r in 0..hh {
            lo[r] = bands.hl[r * hw + c];
            hi[r] = bands.hh[r * hw + c];
        }
        col.iter_mut().for_each(|v| *v = 0.0);
        synthesize_1d(&lo, &hi, lo_f, hi_f, &mut col);
        for r in 0..h {
            row_hi[r * hw + c] = col[r];
        }
    }

    let mut out = vec![0.0; w * h];
    for r in 0..h {
        synthesize_1d(
            &row_lo[r * hw..(r + 1) * hw],
            &row_hi[r * hw..(r + 1) * hw],
            lo_f,
            hi_f,
            &mut out[r * w..(r + 1) * w],
        );
    }
    GrayImage::new(w, h, out).expect("sub-band dimensions imply a valid image")
}

/// Detail magnitudes below this stem from floating-point cancellation in
/// the transform, not from image content; the square root would otherwise
/// blow such dust up into spurious mask support.
const MASK_FLUSH: f64 = 1e-6;

/// Perceptual mask: `min(sqrt(|d|), msk_max)` where `d` is the
/// reconstruction from the three detail bands only. Edges and texture get
/// the large weights; flat regions get exactly none.
pub fn perceptual_mask(img: &GrayImage, spec: &WaveletSpec, msk_max: f64) -> Result<PerceptualMask> {
    if msk_max <= 0.0 || !msk_max.is_finite() {
        return Err(Error::Param(format!("msk_max must be positive, got {msk_max}")));
    }
    let mut bands = forward(img, spec)?;
    bands.ll_mut().iter_mut().for_each(|v| *v = 0.0);
    let detail = inverse(&bands, spec);
    let values = detail
        .pixels()
        .iter()
        .map(|&d| {
            let v = d.abs().sqrt().min(msk_max);
            if v < MASK_FLUSH {
                0.0
            } else {
                v
            }
        })
        .collect();
    Ok(PerceptualMask {
        width: img.width(),
        height: img.height(),
        values,
    })
}

/// Which single band a unit pattern occupies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum BandId {
    Ll,
    Hh,
}

/// Synthesizes an image from a single nonzero band; equivalent to
/// `inverse` with the other three bands zeroed but skips their work.
pub(crate) fn synthesize_single_band(
    coeffs: &[f64],
    band: BandId,
    half_width: usize,
    half_height: usize,
    spec: &WaveletSpec,
) -> Vec<f64> {
    let (hw, hh) = (half_width, half_height);
    let (w, h) = (2 * hw, 2 * hh);
    let (lo_f, hi_f) = spec.filters();
    let filt = match band {
        BandId::Ll => lo_f,
        BandId::Hh => hi_f,
    };
    let taps = filt.len();

    // Column synthesis of the occupied half, single filter.
    let mut half_img = vec![0.0; h * hw];
    for c in 0..hw {
        for k in 0..hh {
            let v = coeffs[k * hw + c];
            if v == 0.0 {
                continue;
            }
            for i in 0..taps {
                half_img[((2 * k + i) % h) * hw + c] += filt[i] * v;
            }
        }
    }

    // Row synthesis, same single filter.
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        let src = &half_img[r * hw..(r + 1) * hw];
        let dst = &mut out[r * w..(r + 1) * w];
        for k in 0..hw {
            let v = src[k];
            for i in 0..taps {
                dst[(2 * k + i) % w] += filt[i] * v;
            }
        }
    }
    out
}

/// Analysis restricted to the LL and HH outputs, on a raw pixel slice.
pub(crate) fn forward_ll_hh(
    pixels: &[f64],
    width: usize,
    height: usize,
    spec: &WaveletSpec,
) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (width, height);
    let (lo_f, hi_f) = spec.filters();
    let (hw, hh) = (w / 2, h / 2);
    let taps = lo_f.len();

    let mut row_lo = vec![0.0; h * hw];
    let mut row_hi = vec![0.0; h * hw];
    for r in 0..h {
        let row = &pixels[r * w..(r + 1) * w];
        analyze_1d(
            row,
            lo_f,
            hi_f,
            &mut row_lo[r * hw..(r + 1) * hw],
            &mut row_hi[r * hw..(r + 1) * hw],
        );
    }

    let mut ll = vec![0.0; hw * hh];
    let mut hh_band = vec![0.0; hw * hh];
    for c in 0..hw {
        for k in 0..hh {
            let mut a = 0.0;
            let mut d = 0.0;
            for i in 0..taps {
                let r = (2 * k + i) % h;
                a += lo_f[i] * row_lo[r * hw + c];
                d += hi_f[i] * row_hi[r * hw + c];
            }
            ll[k * hw + c] = a;
            hh_band[k * hw + c] = d;
        }
    }
    (ll, hh_band)
}
