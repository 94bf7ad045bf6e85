use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function applied to `x + γ`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-stream seed:
/// `h = sm(sm(sm(sm(master) ^ round) ^ worker) ^ layer)` with `sm` = [`splitmix64`].
pub fn derive_seed(master_seed: u64, round: u64, worker: u64, layer: u64) -> u64 {
    let h = splitmix64(master_seed);
    let h = splitmix64(h ^ round);
    let h = splitmix64(h ^ worker);
    splitmix64(h ^ layer)
}

/// Independent random stream addressed by `(master_seed, round, worker, layer)`.
///
/// The ChaCha8 key is the four little-endian words
/// `splitmix64(seed + i·0x9E3779B97F4A7C15)`, `i = 0..4`, of the derived seed.
/// Identical addresses replay identical draws. A stream is a mutable cursor
/// and must not be shared between concurrent samplers.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    round: u64,
    worker: u64,
    layer: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, round: u64, worker: u64, layer: u64) -> Self {
        let seed = derive_seed(master_seed, round, worker, layer);
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
            let word = splitmix64(seed.wrapping_add((i as u64).wrapping_mul(GOLDEN_GAMMA)));
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        Self {
            master_seed,
            round,
            worker,
            layer,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// A stream keyed only by a seed, for one-off draws.
    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0, 0, 0)
    }

    pub fn address(&self) -> (u64, u64, u64, u64) {
        (self.master_seed, self.round, self.worker, self.layer)
    }

    /// Uniform in `[0, 1)` from the top 53 bits of one `u64` draw.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `true` with probability `p`; `p >= 1` always succeeds, `p <= 0` never does.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
