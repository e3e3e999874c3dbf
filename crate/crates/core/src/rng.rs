//! Counter-keyed random streams.
//!
//! Every random decision in the crate draws from a stream identified by
//! `(master_seed, domain, a, b)`. Streams are independent of each other and of
//! the order in which they are created, which is what makes parallel stages
//! reproducible regardless of worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Keeps e.g. GA initialization and bootstrap replicates from
/// ever sharing a stream under the same master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    GaInit = 1,
    GaGeneration = 2,
    Bootstrap = 3,
    Synth = 4,
    Sampler = 5,
    Test = 99,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Returns the stream keyed by `(master, domain, a, b)`.
pub fn stream(master: u64, domain: Domain, a: u64, b: u64) -> ChaCha8Rng {
    let key = splitmix64(master ^ splitmix64(domain as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(splitmix64(a).wrapping_add(b.rotate_left(17)) ^ splitmix64(b ^ a.rotate_left(32)));
    rng
}

/// Standard normal variate by inverse-CDF transform of one uniform draw.
pub fn standard_normal<R: rand::Rng>(rng: &mut R) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    // open interval (0, 1): 53-bit uniform shifted by half an ulp
    let bits = rng.next_u64() >> 11;
    let u = (bits as f64 + 0.5) / (1u64 << 53) as f64;
    Normal::standard().inverse_cdf(u)
}
