//! Deterministic random substreams.
//!
//! Every random draw is taken from a stream keyed by the run seed, a purpose
//! tag and up to two indices, so results do not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

/// Purpose tags for substreams.
pub mod tag {
    pub const FACTOR_NOISE: u64 = 1;
    pub const MIXTURE_DRAW: u64 = 2;
    pub const SCORE: u64 = 3;
    pub const INIT: u64 = 4;
    pub const SCHEDULE: u64 = 5;
    pub const ELBO: u64 = 6;
    pub const SIMULATE: u64 = 7;
    pub const PSIS: u64 = 8;
    pub const CONTROL_VARIATE: u64 = 9;
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Stream for `(seed, tag, a, b)`.
pub fn substream(seed: u64, tag: u64, a: u64, b: u64) -> Rng {
    let key = splitmix(splitmix(splitmix(seed) ^ tag) ^ a);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(b);
    rng
}

pub fn standard_normals<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}
