//! Seeded, stream-addressable randomness.
//!
//! Every trial owns a [`RandomSource`]: a `(seed, stream)` pair that maps to a
//! ChaCha8 keystream. ChaCha is counter based, so distinct stream ids give
//! disjoint sequences and the order in which trials are executed or merged
//! cannot change what any single trial sees.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const CHANNEL_DOMAIN: u64 = 0;
const PRIVATE_DOMAIN: u64 = 1;

/// Trials per message are addressed below this bit; the message id above it.
pub const MESSAGE_STREAM_SHIFT: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomSource {
    pub seed: u64,
    pub stream: u64,
}

impl RandomSource {
    pub const fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Stream for trial `trial` of message `message` under `seed`.
    pub fn for_trial(seed: u64, message: usize, trial: u64) -> Self {
        debug_assert!(trial < 1 << MESSAGE_STREAM_SHIFT);
        Self::new(seed, ((message as u64) << MESSAGE_STREAM_SHIFT) | trial)
    }

    /// Generator driving the channel: inter-arrival times of counts.
    pub fn channel_rng(&self) -> SimRng {
        self.keyed(CHANNEL_DOMAIN)
    }

    /// Generator handed to encoder policies and weight processes for their
    /// private randomness. Disjoint from [`Self::channel_rng`].
    pub fn private_rng(&self) -> SimRng {
        self.keyed(PRIVATE_DOMAIN)
    }

    /// Derive an independent seed for sub-experiment `index`, e.g. one check
    /// of a verification suite.
    pub fn derive_seed(seed: u64, index: u64) -> u64 {
        splitmix64(seed ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
    }

    fn keyed(&self, domain: u64) -> SimRng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&domain.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw on the open interval (0, 1).
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Exponential draw with the given positive rate, by inversion.
pub fn exponential<R: RngCore + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -open_unit(rng).ln() / rate
}
