//! Counter-based, splittable pseudo-random generator.
//!
//! Streams are keyed by `(seed, index)` through a SplitMix64-style mixer, so
//! each column of an embedding (or each Monte-Carlo trial) gets its own
//! reproducible generator, independently of evaluation order or thread count.

/// SplitMix64 (Sebastiano Vigna). Non-cryptographic.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

#[inline]
fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        finalize(self.state)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        const DEN: f64 = (1u64 << 53) as f64;
        ((self.next_u64() >> 11) as f64) / DEN
    }

    /// Uniform in [0, n), unbiased (widening multiply with rejection).
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        loop {
            let x = self.next_u64();
            let wide = (x as u128) * (n as u128);
            let lo = wide as u64;
            if lo >= n || lo >= lo.wrapping_neg() % n {
                return (wide >> 64) as u64;
            }
        }
    }

    #[inline]
    pub fn next_sign(&mut self) -> i8 {
        if self.next_u64() & 1 == 0 {
            1
        } else {
            -1
        }
    }
}

/// Combine a base seed with a stream index into a fresh state.
#[inline]
pub fn mix(seed: u64, index: u64) -> u64 {
    finalize(finalize(seed ^ 0x6A09E667F3BCC909).wrapping_add(index.wrapping_mul(0x9E3779B97F4A7C15)))
}

/// Independent generator for stream `index` under `seed`.
#[inline]
pub fn stream(seed: u64, index: u64) -> SplitMix64 {
    SplitMix64::new(mix(seed, index))
}

/// Floyd's algorithm: `s` distinct values from [0, m), in sampling order.
pub fn floyd_sample(rng: &mut SplitMix64, m: u64, s: u64) -> Vec<u32> {
    debug_assert!(s <= m);
    let mut picked: Vec<u32> = Vec::with_capacity(s as usize);
    for j in (m - s)..m {
        let t = rng.below(j + 1) as u32;
        if picked.contains(&t) {
            picked.push(j as u32);
        } else {
            picked.push(t);
        }
    }
    picked
}
