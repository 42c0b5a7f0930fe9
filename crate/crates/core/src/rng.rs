//! Counter-based deterministic random number generation.
//!
//! Every draw is a pure function of `(seed, x, y, t, draw index)`, so frames can
//! be sampled in any order — serially, pixel-parallel, or frame-parallel — and
//! produce bit-identical results. This also provides the shared-arrival-tape
//! replay used for A/B policy comparisons: two runs with the same seed see the
//! same photon arrivals regardless of how their masks differ.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; full-avalanche 64-bit mix.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for a deterministic counter-based generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSpec {
    seed: u64,
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child seed for a labelled sub-experiment (run arm, image
    /// index, bootstrap replicate). Children with distinct labels are
    /// statistically independent streams.
    pub fn derive(&self, label: u64) -> RngSpec {
        RngSpec {
            seed: mix64(self.seed ^ label.wrapping_mul(GOLDEN) ^ 0x5851_f42d_4c95_7f2d),
        }
    }

    /// Draw stream for pixel `(x, y)` at frame `t`. The n-th draw of the
    /// stream is a pure function of `(seed, x, y, t, n)`.
    #[inline]
    pub fn stream(&self, x: u32, y: u32, t: u32) -> DrawStream {
        let k = mix64(self.seed ^ GOLDEN);
        let k = mix64(k ^ (((y as u64) << 32) | x as u64));
        let k = mix64(k ^ (t as u64).wrapping_mul(0xd6e8_feb8_6659_fd93));
        DrawStream { key: k, n: 0 }
    }
}

/// Lazy sequence of draws keyed to one `(seed, x, y, t)` tuple.
pub struct DrawStream {
    key: u64,
    n: u64,
}

impl DrawStream {
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.n += 1;
        mix64(self.key ^ self.n.wrapping_mul(GOLDEN))
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Poisson count with mean `h` (Knuth's product method). Means above 30
    /// are split recursively so the product never underflows.
    pub fn poisson(&mut self, h: f64) -> u32 {
        debug_assert!(h >= 0.0 && h.is_finite());
        if h <= 0.0 {
            return 0;
        }
        if h > 30.0 {
            let half = h * 0.5;
            return self.poisson(half) + self.poisson(half);
        }
        let limit = (-h).exp();
        let mut k = 0u32;
        let mut prod = 1.0;
        loop {
            prod *= self.uniform();
            if prod <= limit {
                return k;
            }
            k += 1;
        }
    }

    /// Standard normal via Box–Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
