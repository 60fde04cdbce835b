use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::schema::ObjectId;

pub const QRC_SIDE: usize = 24;
pub const QRC_BITS: usize = QRC_SIDE * QRC_SIDE;
const WORDS: usize = QRC_BITS / 64;

/// 24×24 bit grid, row-major, packed into 64-bit words.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QrcImage {
    pub bits: [u64; WORDS],
}

impl QrcImage {
    pub fn bit(&self, i: usize) -> bool {
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn hamming(&self, other: &QrcImage) -> u32 {
        self.bits.iter().zip(&other.bits).map(|(a, b)| (a ^ b).count_ones()).sum()
    }

    /// Set bits as 1, clear bits as -1.
    pub fn to_vec(&self) -> Vec<f64> {
        (0..QRC_BITS).map(|i| if self.bit(i) { 1.0 } else { -1.0 }).collect()
    }
}

/// The grid is the head of a ChaCha stream keyed by the world seed and the
/// object id, so any change to the object rewrites the whole grid.
pub fn encode_qrc(o: ObjectId, world_seed: u64) -> QrcImage {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&world_seed.to_le_bytes());
    key[8..12].copy_from_slice(&o.0.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    let mut bits = [0u64; WORDS];
    for w in &mut bits {
        *w = rng.next_u64();
    }
    QrcImage { bits }
}
