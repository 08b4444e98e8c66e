//! Named random sub-streams derived from one root seed.
//!
//! Every consumer of randomness (link simulation, weight initialization,
//! training data, validation data) draws from its own ChaCha stream so that
//! components can be reseeded independently and training and validation
//! never share samples.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

pub const INIT: &str = "init";
pub const TRAIN: &str = "train";
pub const VALIDATE: &str = "validate";
pub const LINK: &str = "link";
pub const EVAL: &str = "eval";

/// FNV-1a, used only to turn stream names into stable 64-bit tags.
fn tag(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Stream `name` under `root`.
pub fn stream(root: u64, name: &str) -> StreamRng {
    indexed_stream(root, name, 0)
}

/// Stream `name`/`index` under `root`, e.g. one per sweep point or batch.
pub fn indexed_stream(root: u64, name: &str, index: u64) -> StreamRng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&root.to_le_bytes());
    seed[8..16].copy_from_slice(&tag(name).to_le_bytes());
    seed[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha12Rng::from_seed(seed)
}
