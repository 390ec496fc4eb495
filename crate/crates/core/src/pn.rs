//! Keyed ±1 reference marks and the normalized linear correlation used by
//! the blind detector.

use crate::error::{Error, Result};
use crate::rng::{splitmix64, XorShift64};

/// Seed shared by embedder and detector; both sides regenerate the same
/// reference marks from it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WatermarkKey {
    pub seed: u64,
}

impl WatermarkKey {
    pub fn new(seed: u64) -> Self {
        WatermarkKey { seed }
    }
}

/// A set of keyed pseudo-random reference marks, every entry exactly ±1.
///
/// Mark `j` is the j-th consecutive block of the keyed symbol stream,
/// then balanced to an exactly zero sum (for even lengths) by flipping
/// trailing majority symbols. Balancing makes every mark orthogonal to
/// constant signals, so the large DC component of a host's approximation
/// band never leaks into the detector.
#[derive(Clone, Debug, PartialEq)]
pub struct PnSet {
    n_marks: usize,
    mark_len: usize,
    data: Vec<f64>,
}

impl PnSet {
    /// Generates `n_marks` marks of `length` symbols each from `key`.
    pub fn generate(key: WatermarkKey, n_marks: usize, length: usize) -> Result<Self> {
        if n_marks == 0 || length == 0 {
            return Err(Error::Param(format!(
                "mark counts must be positive, got {n_marks} marks of length {length}"
            )));
        }
        let mut rng = XorShift64::new(key.seed);
        let mut data = Vec::with_capacity(n_marks * length);
        for _ in 0..n_marks {
            let start = data.len();
            let mut sum = 0i64;
            for _ in 0..length {
                let s = rng.next_sign();
                sum += s as i64;
                data.push(s);
            }
            balance(&mut data[start..], sum);
        }
        Ok(PnSet {
            n_marks,
            mark_len: length,
            data,
        })
    }

    /// Wraps explicit marks; every entry must be ±1. Mainly useful for
    /// constructing exactly orthogonal sets in tests.
    pub fn from_marks(marks: &[Vec<f64>]) -> Result<Self> {
        let n_marks = marks.len();
        if n_marks == 0 {
            return Err(Error::Param("mark set must be nonempty".into()));
        }
        let mark_len = marks[0].len();
        if mark_len == 0 {
            return Err(Error::Param("marks must be nonempty".into()));
        }
        let mut data = Vec::with_capacity(n_marks * mark_len);
        for mark in marks {
            if mark.len() != mark_len {
                return Err(Error::LengthMismatch {
                    left: mark.len(),
                    right: mark_len,
                });
            }
            if mark.iter().any(|&v| v != 1.0 && v != -1.0) {
                return Err(Error::Param("mark entries must be exactly +1 or -1".into()));
            }
            data.extend_from_slice(mark);
        }
        Ok(PnSet {
            n_marks,
            mark_len,
            data,
        })
    }

    pub fn n_marks(&self) -> usize {
        self.n_marks
    }

    pub fn mark_len(&self) -> usize {
        self.mark_len
    }

    pub fn mark(&self, j: usize) -> &[f64] {
        &self.data[j * self.mark_len..(j + 1) * self.mark_len]
    }

    /// All marks as one flat row-major matrix (n_marks x mark_len).
    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    /// The orthogonal code companion set: every entry negated.
    pub fn complement(&self) -> PnSet {
        PnSet {
            n_marks: self.n_marks,
            mark_len: self.mark_len,
            data: self.data.iter().map(|v| -v).collect(),
        }
    }
}

/// Flips trailing majority entries until the mark sums to zero (odd
/// lengths settle at ±1).
fn balance(mark: &mut [f64], mut sum: i64) {
    let majority = if sum > 0 { 1.0 } else { -1.0 };
    for v in mark.iter_mut().rev() {
        if sum.abs() < 2 {
            break;
        }
        if *v == majority {
            *v = -majority;
            sum -= 2 * majority as i64;
        }
    }
}

/// Normalized linear correlation `(1/M) * sum a_i b_i`.
pub fn correlate(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Param("correlation of empty sequences".into()));
    }
    Ok(dot(a, b) / a.len() as f64)
}

/// Plain dot product, unrolled into independent lanes so the reduction
/// vectorizes; the lane pattern is fixed, keeping results bit-stable.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 8];
    let chunks = a.len() / 8;
    for i in 0..chunks {
        let x = &a[i * 8..i * 8 + 8];
        let y = &b[i * 8..i * 8 + 8];
        for l in 0..8 {
            lanes[l] += x[l] * y[l];
        }
    }
    let mut acc = ((lanes[0] + lanes[4]) + (lanes[1] + lanes[5]))
        + ((lanes[2] + lanes[6]) + (lanes[3] + lanes[7]));
    for i in chunks * 8..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Deterministically derives `count` distinct keys from a base key; used
/// by the key-mismatch security score.
pub fn derive_keys(base: WatermarkKey, count: usize) -> Vec<WatermarkKey> {
    let mut state = base.seed;
    (0..count)
        .map(|_| WatermarkKey::new(splitmix64(&mut state)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let key = WatermarkKey::new(1234);
        let a = PnSet::generate(key, 4, 257).unwrap();
        let b = PnSet::generate(key, 4, 257).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn entries_are_signs_and_balanced() {
        let set = PnSet::generate(WatermarkKey::new(9), 8, 4096).unwrap();
        for j in 0..8 {
            let mark = set.mark(j);
            assert!(mark.iter().all(|&v| v == 1.0 || v == -1.0));
            let mean = mark.iter().sum::<f64>() / mark.len() as f64;
            assert!(mean.abs() < 0.1, "mark {j} mean {mean}");
        }
    }

    #[test]
    fn distinct_keys_decorrelated() {
        let a = PnSet::generate(WatermarkKey::new(1), 1, 4096).unwrap();
        let b = PnSet::generate(WatermarkKey::new(2), 1, 4096).unwrap();
        let rho = correlate(a.mark(0), b.mark(0)).unwrap();
        assert!(rho.abs() < 0.1, "cross-key correlation {rho}");
    }

    #[test]
    fn complement_negates_and_involutes() {
        let set = PnSet::from_marks(&[vec![1.0, -1.0, 1.0, -1.0]]).unwrap();
        let comp = set.complement();
        assert_eq!(comp.mark(0), &[-1.0, 1.0, -1.0, 1.0]);
        assert_eq!(comp.complement(), set);
        assert_eq!(correlate(set.mark(0), comp.mark(0)).unwrap(), -1.0);
    }

    #[test]
    fn correlate_hand_cases() {
        assert_eq!(
            correlate(&[1.0, -1.0, 1.0], &[1.0, -1.0, 1.0]).unwrap(),
            1.0
        );
        assert_eq!(
            correlate(&[1.0, 1.0, -1.0, -1.0], &[1.0, -1.0, 1.0, -1.0]).unwrap(),
            0.0
        );
        // (2*1 + 4*(-1)) / 2 = -1.
        assert_eq!(correlate(&[2.0, 4.0], &[1.0, -1.0]).unwrap(), -1.0);
    }

    #[test]
    fn correlate_length_mismatch() {
        assert!(matches!(
            correlate(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(PnSet::generate(WatermarkKey::new(1), 0, 4).is_err());
        assert!(PnSet::generate(WatermarkKey::new(1), 4, 0).is_err());
    }

    #[test]
    fn derived_keys_distinct_and_stable() {
        let keys = derive_keys(WatermarkKey::new(77), 16);
        let again = derive_keys(WatermarkKey::new(77), 16);
        assert_eq!(keys, again);
        for i in 0..16 {
            for j in i + 1..16 {
                assert_ne!(keys[i], keys[j]);
            }
        }
    }
}
