//! Deterministic random number streams.
//!
//! Every stochastic operation draws from an [`RngStream`]: a (seed,
//! stream_id) pair backed by the ChaCha8 counter-based generator. Streams are
//! derived hierarchically from a root seed by hashing an operation tag and an
//! index, so distinct (case, slice, operation) triples never share a stream
//! and the whole pipeline is reproducible from one 64-bit seed.
//!
//! Determinism is promised within this implementation only; other
//! implementations of the same spec will produce different noise with the
//! same seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A named, reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    /// Root stream for a run.
    pub fn root(seed: u64) -> Self {
        RngStream { seed, stream_id: 0 }
    }

    /// Child stream for a tagged sub-operation (e.g. `"degrade/low_dose"`)
    /// at a given index (case number, slice number, ...).
    pub fn derive(&self, tag: &str, index: u64) -> Self {
        let mut id = self.stream_id;
        id = splitmix64(id ^ fnv1a64(tag.as_bytes()));
        id = splitmix64(id ^ index);
        RngStream {
            seed: self.seed,
            stream_id: id,
        }
    }

    /// Instantiate the generator for this stream.
    pub fn sampler(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut state = self.seed;
        for chunk in key.chunks_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// FNV-1a over a byte string; stable tag hashing.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer; mixes indices into stream ids.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
