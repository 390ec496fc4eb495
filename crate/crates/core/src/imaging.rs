//! 8-bit grayscale hosts and binary watermark bitmaps, with bit-exact
//! binary PGM (P5) and PBM (P1/P4) readers and writers.
//!
//! Pixels are held as `f64` so intermediate watermarked images keep
//! sub-integer precision; quantization to bytes happens only in
//! [`save_pgm`].

use crate::error::{Error, Result};

/// Real-valued luminance matrix, row-major, nominal range [0, 255].
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    /// Wraps a row-major pixel buffer. Fails when the buffer does not match
    /// the dimensions or either dimension is zero.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "image dimensions must be nonzero, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "pixel buffer holds {} values, {width}x{height} needs {}",
                data.len(),
                width * height
            )));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        GrayImage::new(width, height, vec![0.0; width * height])
    }

    /// Builds an image from a per-pixel function of (x, y).
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn same_dims(&self, other: &GrayImage) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Binary bitmap, row-major, one value in {0, 1} per cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitPlane {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl BitPlane {
    pub fn new(width: usize, height: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Dimension(format!(
                "bit buffer holds {} values, {width}x{height} needs {}",
                bits.len(),
                width * height
            )));
        }
        if let Some(bad) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::Param(format!("bitmap values must be 0 or 1, got {bad}")));
        }
        Ok(BitPlane {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Fraction of one-bits; used to estimate the run-length statistics.
    pub fn density(&self) -> f64 {
        let ones: usize = self.bits.iter().map(|&b| b as usize).sum();
        ones as f64 / self.bits.len() as f64
    }
}

/// Header scanner for the Netpbm text fields: skips whitespace and
/// `#`-comments, then reads an unsigned decimal.
struct HeaderScanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderScanner<'a> {
    fn new(bytes: &'a [u8], pos: usize) -> Self {
        HeaderScanner { bytes, pos }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn read_uint(&mut self, field: &'static str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::Parse {
                field,
                detail: "expected a decimal integer".into(),
            });
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse::<usize>().map_err(|e| Error::Parse {
            field,
            detail: e.to_string(),
        })
    }

    /// Consumes the single whitespace byte that separates the header from
    /// binary payload data.
    fn expect_single_space(&mut self, field: &'static str) -> Result<()> {
        if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse {
                field,
                detail: "expected single whitespace before payload".into(),
            })
        }
    }
}

/// Parses a binary PGM (magic `P5`, maxval up to 255).
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Parse {
            field: "magic",
            detail: "expected binary PGM magic P5".into(),
        });
    }
    let mut scan = HeaderScanner::new(bytes, 2);
    let width = scan.read_uint("width")?;
    let height = scan.read_uint("height")?;
    let maxval = scan.read_uint("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse {
            field: "maxval",
            detail: format!("must be in 1..=255, got {maxval}"),
        });
    }
    scan.expect_single_space("header")?;
    let need = width * height;
    let payload = &bytes[scan.pos..];
    if payload.len() < need {
        return Err(Error::Truncated {
            expected: need,
            got: payload.len(),
            unit: "pixel bytes",
        });
    }
    let data = payload[..need].iter().map(|&b| b as f64).collect();
    GrayImage::new(width, height, data)
}

/// Serializes to binary PGM. Values are rounded to nearest and clamped to
/// [0, 255], so `load_pgm(save_pgm(img))` reproduces the clamped-rounded
/// image exactly.
pub fn save_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|&v| quantize_pixel(v)));
    out
}

pub(crate) fn quantize_pixel(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Parses a PBM bitmap, either ASCII (`P1`) or binary (`P4`, rows padded to
/// byte boundaries). Per the PBM convention, 1 means black.
pub fn load_pbm(bytes: &[u8]) -> Result<BitPlane> {
    if bytes.len() < 2 {
        return Err(Error::Parse {
            field: "magic",
            detail: "input shorter than a PBM magic".into(),
        });
    }
    let magic = &bytes[..2];
    let mut scan = HeaderScanner::new(bytes, 2);
    match magic {
        b"P1" => {
            let width = scan.read_uint("width")?;
            let height = scan.read_uint("height")?;
            let mut bits = Vec::with_capacity(width * height);
            while bits.len() < width * height {
                scan.skip_space_and_comments();
                match bytes.get(scan.pos) {
                    Some(b'0') => bits.push(0),
                    Some(b'1') => bits.push(1),
                    Some(other) => {
                        return Err(Error::Parse {
                            field: "bits",
                            detail: format!("unexpected byte {other:#04x} in P1 data"),
                        })
                    }
                    None => {
                        return Err(Error::Truncated {
                            expected: width * height,
                            got: bits.len(),
                            unit: "bits",
                        })
                    }
                }
                scan.pos += 1;
            }
            BitPlane::new(width, height, bits)
        }
        b"P4" => {
            let width = scan.read_uint("width")?;
            let height = scan.read_uint("height")?;
            scan.expect_single_space("header")?;
            let row_bytes = width.div_ceil(8);
            let need = row_bytes * height;
            let payload = &bytes[scan.pos..];
            if payload.len() < need {
                return Err(Error::Truncated {
                    expected: need,
                    got: payload.len(),
                    unit: "row bytes",
                });
            }
            let mut bits = Vec::with_capacity(width * height);
            for row in 0..height {
                let row_data = &payload[row * row_bytes..(row + 1) * row_bytes];
                for col in 0..width {
                    let byte = row_data[col / 8];
                    bits.push((byte >> (7 - col % 8)) & 1);
                }
            }
            BitPlane::new(width, height, bits)
        }
        other => Err(Error::Parse {
            field: "magic",
            detail: format!("expected P1 or P4, got {:?}", String::from_utf8_lossy(other)),
        }),
    }
}

/// Serializes to binary PBM (`P4`), each row padded to a byte boundary.
pub fn save_pbm(plane: &BitPlane) -> Vec<u8> {
    let mut out = format!("P4\n{} {}\n", plane.width(), plane.height()).into_bytes();
    let row_bytes = plane.width().div_ceil(8);
    for row in 0..plane.height() {
        let mut packed = vec![0u8; row_bytes];
        for col in 0..plane.width() {
            if plane.bits()[row * plane.width() + col] == 1 {
                packed[col / 8] |= 1 << (7 - col % 8);
            }
        }
        out.extend_from_slice(&packed);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_direct_read() {
        let bytes = b"P5\n2 2\n255\n\x00\x80\xff\x40";
        let img = load_pgm(bytes).unwrap();
        assert_eq!(img.width(), 2);
        assert_eq!(img.height(), 2);
        assert_eq!(img.pixels(), &[0.0, 128.0, 255.0, 64.0]);
    }

    #[test]
    fn pgm_comment_skipped() {
        let plain = load_pgm(b"P5\n2 2\n255\n\x00\x80\xff\x40").unwrap();
        let commented = load_pgm(b"P5\n# a comment\n2 2\n# more\n255\n\x00\x80\xff\x40").unwrap();
        assert_eq!(plain, commented);
    }

    #[test]
    fn pgm_truncated_payload() {
        let err = load_pgm(b"P5\n2 2\n255\n\x00\x80").unwrap_err();
        assert!(matches!(err, Error::Truncated { expected: 4, got: 2, .. }));
    }

    #[test]
    fn pgm_maxval_over_255_rejected() {
        let err = load_pgm(b"P5\n2 2\n65535\n\x00\x00\x00\x00\x00\x00\x00\x00").unwrap_err();
        match err {
            Error::Parse { field, .. } => assert_eq!(field, "maxval"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn pgm_bad_magic() {
        assert!(matches!(
            load_pgm(b"P6\n1 1\n255\n\x00"),
            Err(Error::Parse { field: "magic", .. })
        ));
    }

    #[test]
    fn save_clamps_and_rounds() {
        let img = GrayImage::new(2, 1, vec![255.7, -3.2]).unwrap();
        let bytes = save_pgm(&img);
        let back = load_pgm(&bytes).unwrap();
        assert_eq!(back.pixels(), &[255.0, 0.0]);
    }

    #[test]
    fn integral_roundtrip_is_identity() {
        let img = GrayImage::from_fn(6, 4, |x, y| ((x * 7 + y * 31) % 256) as f64);
        let back = load_pgm(&save_pgm(&img)).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn pbm_ascii_read() {
        let plane = load_pbm(b"P1\n2 2\n1 0 0 1\n").unwrap();
        assert_eq!(plane.bits(), &[1, 0, 0, 1]);
    }

    #[test]
    fn pbm_p4_row_padding() {
        // One row of width 3 stored in a single byte 0b101_00000.
        let plane = load_pbm(b"P4\n3 1\n\xa0").unwrap();
        assert_eq!(plane.bits(), &[1, 0, 1]);
    }

    #[test]
    fn pbm_all_zero_16x16() {
        let mut bytes = b"P4\n16 16\n".to_vec();
        bytes.extend(std::iter::repeat(0u8).take(32));
        let plane = load_pbm(&bytes).unwrap();
        assert_eq!(plane.bits(), &[0u8; 256][..]);
    }

    #[test]
    fn pbm_truncated_rows() {
        assert!(matches!(
            load_pbm(b"P4\n16 2\n\x00\x01"),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn pbm_save_load_fixpoint() {
        let plane = BitPlane::new(11, 3, (0..33).map(|i| (i % 3 == 0) as u8).collect()).unwrap();
        let bytes = save_pbm(&plane);
        let back = load_pbm(&bytes).unwrap();
        assert_eq!(back, plane);
        // Canonical serialized form is byte-stable under reload.
        assert_eq!(save_pbm(&back), bytes);
    }
}
