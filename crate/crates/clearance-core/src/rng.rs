//! Counter-based pseudo-randomness used everywhere determinism is part of a
//! contract (splits, fold assignment, bootstrap sampling, fixtures).
//!
//! All sampling reduces to the SplitMix64 finalizer, so that any seed produces
//! the same stream on every platform and in every language that reimplements
//! the mixer. Sequences derived from `(seed, counter)` pairs are stable under
//! refactoring: reordering *callers* cannot silently shift someone else's
//! stream.

/// SplitMix64 finalizer: a bijective 64-bit mix with good avalanche behavior.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Keyed counter hash: the `i`-th draw of the stream identified by `seed`.
pub fn key(seed: u64, i: u64) -> u64 {
    mix64(seed ^ mix64(i.wrapping_add(1)))
}

/// Sequential generator over the SplitMix64 stream for `seed`.
#[derive(Clone, Debug)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: mix64(seed) }
    }

    /// Derive an independent child stream, e.g. one per tree or per record.
    pub fn child(&self, salt: u64) -> Rng {
        Rng::new(self.state ^ mix64(salt.wrapping_add(0xa5a5_a5a5)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, n)`. Rejection-free multiply-shift (Lemire); the bias
    /// for n << 2^64 is far below anything observable here.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.f64() < p
    }

    /// Uniform integer in the inclusive range.
    pub fn range_i64(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        lo + self.below((hi - lo + 1) as u64) as i64
    }

    /// Draw an index from cumulative weights (last entry is the total).
    pub fn weighted(&mut self, cumulative: &[f64]) -> usize {
        let total = *cumulative.last().expect("non-empty weights");
        let x = self.f64() * total;
        match cumulative.binary_search_by(|c| c.partial_cmp(&x).unwrap()) {
            Ok(i) => (i + 1).min(cumulative.len() - 1),
            Err(i) => i.min(cumulative.len() - 1),
        }
    }

    /// Fisher-Yates shuffle driven by this stream.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// `k` indices sampled without replacement from `0..n` (ascending order).
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let k = k.min(n);
        let mut idx: Vec<usize> = (0..n).collect();
        // partial Fisher-Yates: first k slots become the sample
        for i in 0..k {
            let j = i + self.below((n - i) as u64) as usize;
            idx.swap(i, j);
        }
        idx.truncate(k);
        idx.sort_unstable();
        idx
    }
}

/// Deterministic permutation of `0..n`: indices ordered by their counter hash,
/// ties (never expected) broken by index.
pub fn permutation(seed: u64, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (key(seed, i as u64), i));
    order
}
