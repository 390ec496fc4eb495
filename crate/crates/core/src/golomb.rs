//! Golomb source codec for run-length-coded sparse bitmaps.
//!
//! A codeword for `n` is the quotient `q = n / m` in unary (q ones, one
//! zero terminator) followed by the remainder in truncated binary: with
//! `c = ceil(log2 m)` and `t = 2^c - m`, remainders below `t` use `c - 1`
//! bits, the rest are stored biased by `t` in `c` bits. Powers of two hit
//! the Rice special case with plain `c`-bit remainders.

use crate::error::{Error, Result};
use crate::imaging::BitPlane;

/// Ordered bit sequence with explicit length; byte packing is MSB-first
/// with a zero-padded final byte, and the bit count travels separately.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BitStream {
    bits: Vec<bool>,
}

impl BitStream {
    pub fn new() -> Self {
        BitStream { bits: Vec::new() }
    }

    pub fn with_capacity(bits: usize) -> Self {
        BitStream {
            bits: Vec::with_capacity(bits),
        }
    }

    /// Parses a string of '0'/'1' characters; other characters are
    /// rejected. Handy for spelled-out codewords in tests and docs.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Param(format!("expected 0 or 1, got {other:?}"))),
            })
            .collect()
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    /// Appends `width` bits of `value`, most significant first.
    pub fn push_uint(&mut self, value: u64, width: u32) {
        for shift in (0..width).rev() {
            self.bits.push((value >> shift) & 1 == 1);
        }
    }

    pub fn extend(&mut self, other: &BitStream) {
        self.bits.extend_from_slice(&other.bits);
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<bool> {
        self.bits.get(index).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    /// MSB-first byte packing, final byte zero-padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &bit) in self.bits.iter().enumerate() {
            if bit {
                out[i / 8] |= 1 << (7 - i % 8);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], bit_len: usize) -> Result<Self> {
        if bytes.len() < bit_len.div_ceil(8) {
            return Err(Error::Truncated {
                expected: bit_len.div_ceil(8),
                got: bytes.len(),
                unit: "bytes",
            });
        }
        let bits = (0..bit_len)
            .map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1 == 1)
            .collect();
        Ok(BitStream { bits })
    }
}

impl FromIterator<bool> for BitStream {
    fn from_iter<T: IntoIterator<Item = bool>>(iter: T) -> Self {
        BitStream {
            bits: iter.into_iter().collect(),
        }
    }
}

impl std::fmt::Display for BitStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Golomb modulus with its derived constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GolombParam {
    m: u64,
    c: u32,
    power_of_two: bool,
}

impl GolombParam {
    pub fn new(m: u64) -> Result<Self> {
        if m < 2 {
            return Err(Error::Param(format!("Golomb modulus must be >= 2, got {m}")));
        }
        let power_of_two = m.is_power_of_two();
        let c = if power_of_two {
            m.trailing_zeros()
        } else {
            64 - (m - 1).leading_zeros()
        };
        Ok(GolombParam { m, c, power_of_two })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn c(&self) -> u32 {
        self.c
    }

    pub fn is_rice(&self) -> bool {
        self.power_of_two
    }
}

/// Best prefix-code modulus for a zero-symbol probability `p`:
/// `ceil(-log2(1 + p) / log2 p)`, clamped below at 2 where the formula
/// drops into the degenerate unary regime.
pub fn optimal_m(p: f64) -> Result<GolombParam> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Param(format!(
            "zero-symbol probability must be in (0, 1), got {p}"
        )));
    }
    let raw = (-(1.0 + p).log2() / p.log2()).ceil();
    GolombParam::new((raw as u64).max(2))
}

/// Appends the codeword for `n` to `out`.
pub fn encode_into(n: u64, param: &GolombParam, out: &mut BitStream) {
    let q = n / param.m;
    let r = n % param.m;
    for _ in 0..q {
        out.push(true);
    }
    out.push(false);
    if param.power_of_two {
        out.push_uint(r, param.c);
    } else {
        let threshold = (1u64 << param.c) - param.m;
        if r < threshold {
            out.push_uint(r, param.c - 1);
        } else {
            out.push_uint(r + threshold, param.c);
        }
    }
}

pub fn encode(n: u64, param: &GolombParam) -> BitStream {
    let mut out = BitStream::new();
    encode_into(n, param, &mut out);
    out
}

/// Decodes one codeword starting at bit `pos`; returns the value and the
/// position just past the codeword.
pub fn decode_at(stream: &BitStream, mut pos: usize, param: &GolombParam) -> Result<(u64, usize)> {
    let mut q = 0u64;
    loop {
        match stream.get(pos) {
            Some(true) => {
                q += 1;
                pos += 1;
            }
            Some(false) => {
                pos += 1;
                break;
            }
            None => {
                return Err(Error::Truncated {
                    expected: pos + 1,
                    got: stream.len(),
                    unit: "bits (unary quotient)",
                })
            }
        }
    }
    let read_uint = |pos: usize, width: u32| -> Result<u64> {
        let mut v = 0u64;
        for i in 0..width as usize {
            match stream.get(pos + i) {
                Some(bit) => v = (v << 1) | bit as u64,
                None => {
                    return Err(Error::Truncated {
                        expected: pos + width as usize,
                        got: stream.len(),
                        unit: "bits (remainder)",
                    })
                }
            }
        }
        Ok(v)
    };
    let r = if param.power_of_two {
        let r = read_uint(pos, param.c)?;
        pos += param.c as usize;
        r
    } else {
        let threshold = (1u64 << param.c) - param.m;
        let head = read_uint(pos, param.c - 1)?;
        pos += param.c as usize - 1;
        if head < threshold {
            head
        } else {
            let tail = read_uint(pos, 1)?;
            pos += 1;
            ((head << 1) | tail) - threshold
        }
    };
    Ok((q * param.m + r, pos))
}

/// Decodes one codeword from the start of the stream; returns the value
/// and the number of bits consumed.
pub fn decode(stream: &BitStream, param: &GolombParam) -> Result<(u64, usize)> {
    decode_at(stream, 0, param)
}

/// Modulus header width at the front of every coded bitmap. `optimal_m`
/// never exceeds 69 for clamped probabilities, so 7 bits are plenty.
const M_HEADER_BITS: u32 = 7;

/// Run-length codes a bitmap: a 7-bit header carries the modulus, then
/// zero-run lengths row-major, each run implicitly terminated by a one.
/// The final run after the last one-bit is coded without any terminator;
/// the decoder stops at width x height bits.
pub fn encode_bitmap(plane: &BitPlane) -> BitStream {
    let total = plane.bits().len();
    let zeros = total - plane.bits().iter().map(|&b| b as usize).sum::<usize>();
    let p_hat = (zeros as f64 / total as f64).clamp(0.01, 0.99);
    let param = optimal_m(p_hat).expect("clamped probability is in range");

    let mut out = BitStream::new();
    out.push_uint(param.m(), M_HEADER_BITS);
    let mut run = 0u64;
    for &bit in plane.bits() {
        if bit == 1 {
            encode_into(run, &param, &mut out);
            run = 0;
        } else {
            run += 1;
        }
    }
    if run > 0 {
        encode_into(run, &param, &mut out);
    }
    out
}

/// Exact inverse of [`encode_bitmap`] for the stated dimensions.
pub fn decode_bitmap(stream: &BitStream, width: usize, height: usize) -> Result<BitPlane> {
    let (bits, err) = decode_bitmap_inner(stream, width, height);
    match err {
        Some(e) => Err(e),
        None => BitPlane::new(width, height, bits),
    }
}

/// Lenient variant: on a corrupt or truncated stream returns whatever
/// prefix decoded cleanly, zero-filled to size, plus a cleanliness flag.
/// Lets the pipeline hand back a best-effort bitmap instead of failing
/// outright.
pub fn decode_bitmap_lossy(stream: &BitStream, width: usize, height: usize) -> (BitPlane, bool) {
    let (mut bits, err) = decode_bitmap_inner(stream, width, height);
    bits.resize(width * height, 0);
    let plane = BitPlane::new(width, height, bits).expect("sized 0/1 buffer");
    (plane, err.is_none())
}

/// Decodes as far as the stream allows; returns the bits recovered so far
/// and the error that stopped decoding, if any.
fn decode_bitmap_inner(
    stream: &BitStream,
    width: usize,
    height: usize,
) -> (Vec<u8>, Option<Error>) {
    let total = width * height;
    let mut bits = Vec::with_capacity(total);

    let param = match read_header(stream).and_then(GolombParam::new) {
        Ok(p) => p,
        Err(e) => return (bits, Some(e)),
    };

    let mut pos = M_HEADER_BITS as usize;
    while bits.len() < total {
        let (run, next) = match decode_at(stream, pos, &param) {
            Ok(v) => v,
            Err(e) => return (bits, Some(e)),
        };
        pos = next;
        if bits.len() + run as usize > total {
            let err = Error::Corrupt(format!(
                "zero-run of {run} overruns the {width}x{height} bitmap"
            ));
            return (bits, Some(err));
        }
        bits.extend(std::iter::repeat(0u8).take(run as usize));
        if bits.len() < total {
            bits.push(1);
        }
    }
    (bits, None)
}

fn read_header(stream: &BitStream) -> Result<u64> {
    let mut m = 0u64;
    for i in 0..M_HEADER_BITS as usize {
        match stream.get(i) {
            Some(bit) => m = (m << 1) | bit as u64,
            None => {
                return Err(Error::Truncated {
                    expected: M_HEADER_BITS as usize,
                    got: stream.len(),
                    unit: "bits (modulus header)",
                })
            }
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimal_m_reference_points() {
        assert_eq!(optimal_m(0.9).unwrap().m(), 7);
        // Raw formula yields 1 at p = 0.5; clamped to the valid domain.
        assert_eq!(optimal_m(0.5).unwrap().m(), 2);
        assert_eq!(optimal_m(0.99).unwrap().m(), 69);
        assert!(optimal_m(0.0).is_err());
        assert!(optimal_m(1.0).is_err());
    }

    #[test]
    fn encode_hand_cases() {
        // n=9, m=4 (Rice, c=2): q=2, r=1 -> 110 01.
        let p4 = GolombParam::new(4).unwrap();
        assert_eq!(encode(9, &p4).to_string(), "11001");
        // n=5, m=3 (c=2, threshold 1): q=1, r=2 -> 10 then 3 in 2 bits.
        let p3 = GolombParam::new(3).unwrap();
        assert_eq!(encode(5, &p3).to_string(), "1011");
        // n=0, m=2 (Rice, c=1).
        let p2 = GolombParam::new(2).unwrap();
        assert_eq!(encode(0, &p2).to_string(), "00");
    }

    #[test]
    fn decode_hand_cases() {
        let p4 = GolombParam::new(4).unwrap();
        let s = BitStream::from_bit_str("11001").unwrap();
        assert_eq!(decode(&s, &p4).unwrap(), (9, 5));
        let p2 = GolombParam::new(2).unwrap();
        let s = BitStream::from_bit_str("00").unwrap();
        assert_eq!(decode(&s, &p2).unwrap(), (0, 2));
    }

    #[test]
    fn roundtrip_small_ranges() {
        for m in 2..=64u64 {
            let param = GolombParam::new(m).unwrap();
            for n in 0..=1000u64 {
                let coded = encode(n, &param);
                let (back, used) = decode(&coded, &param).unwrap();
                assert_eq!((back, used), (n, coded.len()), "n={n} m={m}");
            }
        }
    }

    #[test]
    fn truncation_mid_codeword() {
        let param = GolombParam::new(4).unwrap();
        let s = BitStream::from_bit_str("11").unwrap();
        assert!(matches!(decode(&s, &param), Err(Error::Truncated { .. })));
    }

    #[test]
    fn codeword_lengths_monotone() {
        for m in [2u64, 3, 5, 8, 13, 64] {
            let param = GolombParam::new(m).unwrap();
            let mut prev = 0;
            for n in 0..500 {
                let len = encode(n, &param).len();
                assert!(len >= prev, "m={m} n={n}");
                prev = len;
            }
        }
    }

    #[test]
    fn bitmap_all_zero_single_run() {
        let plane = BitPlane::new(16, 16, vec![0; 256]).unwrap();
        let coded = encode_bitmap(&plane);
        // Header, then exactly one codeword for the run of 256.
        let param = GolombParam::new(69).unwrap(); // p clamps to 0.99
        let mut expect = BitStream::new();
        expect.push_uint(69, 7);
        encode_into(256, &param, &mut expect);
        assert_eq!(coded, expect);
        assert_eq!(decode_bitmap(&coded, 16, 16).unwrap(), plane);
    }

    #[test]
    fn bitmap_run_extraction() {
        // 0,0,1,0,1 -> runs (2, 1), two codewords after the header.
        let plane = BitPlane::new(5, 1, vec![0, 0, 1, 0, 1]).unwrap();
        let coded = encode_bitmap(&plane);
        let param = GolombParam::new(2).unwrap(); // p = 0.6 -> m = 2
        let mut expect = BitStream::new();
        expect.push_uint(2, 7);
        encode_into(2, &param, &mut expect);
        encode_into(1, &param, &mut expect);
        assert_eq!(coded, expect);
        assert_eq!(decode_bitmap(&coded, 5, 1).unwrap(), plane);
    }

    #[test]
    fn bitmap_all_ones_zero_length_runs() {
        let plane = BitPlane::new(4, 1, vec![1, 1, 1, 1]).unwrap();
        let coded = encode_bitmap(&plane);
        // p clamps to 0.01 -> m = 2; four zero-length runs.
        assert_eq!(coded.len(), 7 + 4 * 2);
        assert_eq!(decode_bitmap(&coded, 4, 1).unwrap(), plane);
    }

    #[test]
    fn bitmap_trailing_zeros() {
        let plane = BitPlane::new(4, 1, vec![1, 0, 0, 0]).unwrap();
        let coded = encode_bitmap(&plane);
        assert_eq!(decode_bitmap(&coded, 4, 1).unwrap(), plane);
    }

    #[test]
    fn bitmap_overrun_is_corrupt() {
        // Header m=2 then a run of 300 against a 16x16 plane.
        let param = GolombParam::new(2).unwrap();
        let mut s = BitStream::new();
        s.push_uint(2, 7);
        encode_into(300, &param, &mut s);
        assert!(matches!(
            decode_bitmap(&s, 16, 16),
            Err(Error::Corrupt(_))
        ));
        let (best_effort, clean) = decode_bitmap_lossy(&s, 16, 16);
        assert!(!clean);
        assert_eq!(best_effort.bits().len(), 256);
    }

    #[test]
    fn sparse_16x16_compresses() {
        // Fixed pseudo-random bitmaps at about 20% ones stay under the
        // uncoded 256 bits.
        let mut state = 0x1357_9bdf_2468_aceeu64;
        for _ in 0..5 {
            let bits: Vec<u8> = (0..256)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((state >> 60) == 0) as u8 // p(one) = 1/16 -> sparse
                })
                .collect();
            let ones: usize = bits.iter().map(|&b| b as usize).sum();
            assert!(ones <= 51, "fixture should stay sparse, got {ones}");
            let plane = BitPlane::new(16, 16, bits).unwrap();
            let coded = encode_bitmap(&plane);
            assert!(coded.len() < 256, "coded length {}", coded.len());
            assert_eq!(decode_bitmap(&coded, 16, 16).unwrap(), plane);
        }
    }

    #[test]
    fn bytes_roundtrip_msb_first() {
        let s = BitStream::from_bit_str("101000011").unwrap();
        let bytes = s.to_bytes();
        assert_eq!(bytes, vec![0b1010_0001, 0b1000_0000]);
        assert_eq!(BitStream::from_bytes(&bytes, 9).unwrap(), s);
    }
}
