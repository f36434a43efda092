//! Seeded random substreams.
//!
//! Every draw comes from a ChaCha8 stream keyed by `(seed, purpose)` and
//! selected by the path index, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Purpose {
    Target,
    Initial,
    Noise,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Target => 0x7461_7267_6574,
            Purpose::Initial => 0x696e_6974,
            Purpose::Noise => 0x6e6f_6973_65,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Purpose::Target => "target",
            Purpose::Initial => "initial",
            Purpose::Noise => "noise",
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for path `index` of the given purpose.
pub fn substream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut state = seed ^ purpose.tag().rotate_left(17);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
