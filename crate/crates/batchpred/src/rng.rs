//! Counter-based pseudorandom generator for reproducible experiments.
//!
//! The generator is SplitMix64 evaluated on a keyed counter: output `i` of
//! stream `key` is `finalize(key + (i+1) * PHI)` where `PHI` is the 64-bit
//! golden-ratio constant and `finalize` is the SplitMix64 avalanche
//! function. Pure integer arithmetic, bit-exact on every platform, and any
//! output can be computed without generating its predecessors.
//!
//! Substreams for parallel replicas are derived with [`derive_seed`], so
//! replica `i` gets an independent stream regardless of execution order.

const PHI: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 avalanche function.
fn finalize(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent stream key from a master seed and a stream index.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    finalize(seed ^ finalize(index.wrapping_add(1).wrapping_mul(PHI)))
}

/// Seedable counter-based generator (SplitMix64 stream).
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    ctr: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { key: seed, ctr: 0 }
    }

    /// Generator for substream `index` of `seed`; used for per-replica
    /// streams in Monte Carlo runs.
    pub fn substream(seed: u64, index: u64) -> Self {
        CounterRng::new(derive_seed(seed, index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.ctr = self.ctr.wrapping_add(1);
        finalize(self.key.wrapping_add(self.ctr.wrapping_mul(PHI)))
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}
