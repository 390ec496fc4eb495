//! Convolutional channel encoder and hard-decision Viterbi decoder over a
//! terminated trellis.
//!
//! The encoder feeds the information bits followed by `K - 1` flush zeros
//! through a shift register, emitting one parity bit per generator for
//! every input bit. The decoder runs maximum-likelihood search under the
//! Hamming metric with the trellis pinned to the zero state at both ends,
//! breaking metric ties toward the lower-numbered predecessor state.

use crate::error::{Error, Result};
use crate::golomb::BitStream;

/// Code description: constraint length `K` and one `K`-bit tap mask per
/// output stream. Mask bit `K-1` is the current input bit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvCodeSpec {
    constraint_len: u32,
    generators: Vec<u32>,
}

impl ConvCodeSpec {
    pub fn new(constraint_len: u32, generators: Vec<u32>) -> Result<Self> {
        if !(2..=16).contains(&constraint_len) {
            return Err(Error::Param(format!(
                "constraint length must be in 2..=16, got {constraint_len}"
            )));
        }
        if generators.len() < 2 {
            return Err(Error::Param(format!(
                "need at least 2 generators (rate <= 1/2), got {}",
                generators.len()
            )));
        }
        let mask = (1u32 << constraint_len) - 1;
        for &g in &generators {
            if g == 0 || g & !mask != 0 {
                return Err(Error::Param(format!(
                    "generator {g:#o} must be nonzero and fit in {constraint_len} bits"
                )));
            }
        }
        Ok(ConvCodeSpec {
            constraint_len,
            generators,
        })
    }

    /// Rate 1/2, K = 7, generators (171, 133) octal; the de facto
    /// standard pairing for this constraint length.
    pub fn k7_standard() -> Self {
        ConvCodeSpec::new(7, vec![0o171, 0o133]).expect("valid built-in spec")
    }

    /// Rate 1/2, K = 3, generators (7, 5) octal; small enough for
    /// exhaustive nearest-codeword oracles.
    pub fn k3_test() -> Self {
        ConvCodeSpec::new(3, vec![0o7, 0o5]).expect("valid built-in spec")
    }

    pub fn constraint_len(&self) -> u32 {
        self.constraint_len
    }

    pub fn generators(&self) -> &[u32] {
        &self.generators
    }

    /// Coded length for `info_len` information bits with tail flushing.
    pub fn coded_len(&self, info_len: usize) -> usize {
        self.generators.len() * (info_len + self.constraint_len as usize - 1)
    }
}

/// Encoded block plus the pre-coding message length needed to frame the
/// decoder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Codeword {
    pub bits: BitStream,
    pub info_length: usize,
}

/// Encodes `info` with tail flushing.
pub fn conv_encode(info: &BitStream, spec: &ConvCodeSpec) -> Codeword {
    let k = spec.constraint_len;
    let mut bits = BitStream::with_capacity(spec.coded_len(info.len()));
    let mut state = 0u32; // K-1 previous input bits, newest at the top.
    let tail = std::iter::repeat(false).take(k as usize - 1);
    for input in info.iter().chain(tail) {
        let window = ((input as u32) << (k - 1)) | state;
        for &g in &spec.generators {
            bits.push((window & g).count_ones() & 1 == 1);
        }
        state = window >> 1;
    }
    Codeword {
        bits,
        info_length: info.len(),
    }
}

const NO_PATH: u32 = u32::MAX / 2;

/// Maximum-likelihood decoding of a terminated codeword under the
/// Hamming metric.
pub fn viterbi_decode(word: &Codeword, spec: &ConvCodeSpec) -> Result<BitStream> {
    let k = spec.constraint_len;
    let n_out = spec.generators.len();
    let steps = word.info_length + k as usize - 1;
    if word.bits.len() != n_out * steps {
        return Err(Error::Framing(format!(
            "codeword holds {} bits, spec expects {} for {} info bits",
            word.bits.len(),
            n_out * steps,
            word.info_length
        )));
    }
    let states = 1usize << (k - 1);
    let state_mask = states - 1;
    let top_bit = k - 2; // position of the input bit inside a state index

    // Branch outputs depend only on (predecessor, input) = the K-bit
    // window; precompute the emitted symbol per window.
    let windows = 1usize << k;
    let mut branch_bits = vec![0u32; windows];
    for (w, slot) in branch_bits.iter_mut().enumerate() {
        let mut sym = 0u32;
        for &g in &spec.generators {
            sym = (sym << 1) | ((w as u32 & g).count_ones() & 1);
        }
        *slot = sym;
    }

    let mut metrics = vec![NO_PATH; states];
    metrics[0] = 0;
    let mut next_metrics = vec![NO_PATH; states];
    // One predecessor choice bit per (step, state).
    let mut decisions = vec![0u8; steps * states];

    for t in 0..steps {
        let mut received = 0u32;
        for i in 0..n_out {
            received = (received << 1) | word.bits.get(t * n_out + i).unwrap() as u32;
        }
        let tail_step = t >= word.info_length;
        next_metrics.iter_mut().for_each(|m| *m = NO_PATH);
        for next in 0..states {
            let input = (next >> top_bit) & 1;
            if tail_step && input == 1 {
                continue; // tail flushing pins the inputs to zero
            }
            // window = (input << (K-1)) | prev, and next = window >> 1,
            // so prev = ((next << 1) | z) & mask for z in {0, 1}.
            let prev0 = (next << 1) & state_mask;
            let prev1 = prev0 | 1;
            let w0 = (input << (k - 1) as usize) | prev0;
            let w1 = (input << (k - 1) as usize) | prev1;
            let m0 = metrics[prev0].saturating_add((branch_bits[w0] ^ received).count_ones());
            let m1 = metrics[prev1].saturating_add((branch_bits[w1] ^ received).count_ones());
            // Ties resolve toward the lower-numbered predecessor (z = 0).
            if m1 < m0 {
                next_metrics[next] = m1;
                decisions[t * states + next] = 1;
            } else {
                next_metrics[next] = m0;
            }
        }
        std::mem::swap(&mut metrics, &mut next_metrics);
    }

    // Terminated trellis: trace back from the zero state.
    let mut state = 0usize;
    let mut info = vec![false; word.info_length];
    for t in (0..steps).rev() {
        if t < word.info_length {
            info[t] = (state >> top_bit) & 1 == 1;
        }
        state = ((state << 1) | decisions[t * states + state] as usize) & state_mask;
    }
    Ok(info.into_iter().collect())
}
