//! Counter-based random streams.
//!
//! Every replica draws from its own ChaCha stream keyed by `(seed, stream)`,
//! so results never depend on how replicas are scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type StreamRng = ChaCha8Rng;

/// Mixes a seed with a tag so that different experiments get unrelated keys.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn tag(name: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `f(k, rng_k)` for every replica `k` in parallel and returns the
/// results in replica order.
pub fn replicate<T, F>(seed: u64, reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut StreamRng) -> T + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k as u64);
            f(k, &mut rng)
        })
        .collect()
}

/// Runs `f` inside a rayon pool with the given worker count.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(f)
}

/// Hands out uniform directions in `0..4` two bits at a time.
pub struct DirectionSource {
    word: u64,
    left: u32,
}

impl DirectionSource {
    pub fn new() -> Self {
        DirectionSource { word: 0, left: 0 }
    }

    #[inline]
    pub fn next<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> usize {
        if self.left == 0 {
            self.word = rng.next_u64();
            self.left = 32;
        }
        let d = (self.word & 3) as usize;
        self.word >>= 2;
        self.left -= 1;
        d
    }
}

impl Default for DirectionSource {
    fn default() -> Self {
        Self::new()
    }
}
