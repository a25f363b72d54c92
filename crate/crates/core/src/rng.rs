//! Seed splitting. Every random consumer gets its own ChaCha stream derived
//! from `(master, purpose, index)` so adding draws in one place never shifts
//! another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stable 64-bit hash of `(master, purpose, index)`: FNV-1a over the bytes,
/// finished with the splitmix64 mixer.
pub fn sub_seed(master: u64, purpose: &str, index: u64) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    feed(&master.to_le_bytes());
    feed(purpose.as_bytes());
    feed(&[0xff]);
    feed(&index.to_le_bytes());
    splitmix(h)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream(master: u64, purpose: &str, index: u64) -> Rng {
    Rng::seed_from_u64(sub_seed(master, purpose, index))
}
