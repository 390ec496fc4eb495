//! Fixed in-repo pseudo-random generator.
//!
//! Embedder and detector must regenerate identical reference marks from the
//! same key on every platform, so the generator is pinned here rather than
//! delegated to a platform RNG: xorshift64* seeded through one splitmix64
//! scramble. The same stream also drives the seeded noise attack and the
//! synthetic sample images.

/// One splitmix64 step; used for seeding and for deriving related seeds.
pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// xorshift64* with the constants from Vigna's reference implementation.
#[derive(Clone, Debug)]
pub(crate) struct XorShift64 {
    state: u64,
}

impl XorShift64 {
    pub(crate) fn new(seed: u64) -> Self {
        // splitmix never yields 0 from a single step unless the input is
        // crafted; guard anyway since xorshift64* requires nonzero state.
        let mut s = seed;
        let state = splitmix64(&mut s);
        XorShift64 {
            state: if state == 0 { 0x9e37_79b9_7f4a_7c15 } else { state },
        }
    }

    pub(crate) fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_f491_4f6c_dd1d)
    }

    /// Uniform draw in the open-closed interval (0, 1].
    pub(crate) fn next_unit(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// One ±1 symbol from the top bit.
    pub(crate) fn next_sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Standard normal pair via Box-Muller.
    pub(crate) fn next_gaussian_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_unit();
        let u2 = self.next_unit();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        (r * theta.cos(), r * theta.sin())
    }
}
