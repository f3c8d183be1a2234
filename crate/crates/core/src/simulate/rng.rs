//! Per-replicate random streams. Each stream is seeded from a SplitMix64
//! mix of the run seed, a scenario key and the replicate index, so a
//! replicate's draws do not depend on which worker runs it or when.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream_seed(seed: u64, key: &[u64], replicate: u64) -> u64 {
    let mut h = splitmix64(seed);
    for &k in key {
        h = splitmix64(h ^ k);
    }
    splitmix64(h ^ replicate)
}

pub fn stream(seed: u64, key: &[u64], replicate: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, key, replicate))
}
