//! Seeded random streams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CtdError, Result};

/// Counter-based generator. All randomness in a run flows from one of these.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `i` derived from `seed`. Streams share the key and
    /// differ in the ChaCha stream id, so they never overlap.
    pub fn split(seed: u64, i: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(i);
        Rng { inner }
    }

    /// Full generator state as exact 32-bit limbs (key, stream, word position).
    pub fn state(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(14);
        for chunk in self.inner.get_seed().chunks(4) {
            out.push(u32::from_le_bytes(chunk.try_into().unwrap()) as f64);
        }
        let s = self.inner.get_stream();
        out.push((s & 0xffff_ffff) as f64);
        out.push((s >> 32) as f64);
        let w = self.inner.get_word_pos();
        for k in 0..4 {
            out.push(((w >> (32 * k)) & 0xffff_ffff) as f64);
        }
        out
    }

    pub fn from_state(state: &[f64]) -> Result<Self> {
        let bad = || CtdError::Format {
            what: "rng state",
            detail: format!("expected 14 integer limbs, got {:?}", state.len()),
        };
        if state.len() != 14 || state.iter().any(|v| v.fract() != 0.0 || *v < 0.0 || *v > u32::MAX as f64) {
            return Err(bad());
        }
        let limb = |i: usize| state[i] as u32;
        let mut seed = [0u8; 32];
        for i in 0..8 {
            seed[4 * i..4 * i + 4].copy_from_slice(&limb(i).to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(seed);
        inner.set_stream(limb(8) as u64 | (limb(9) as u64) << 32);
        let mut w: u128 = 0;
        for k in 0..4 {
            w |= (limb(10 + k) as u128) << (32 * k);
        }
        inner.set_word_pos(w);
        Ok(Rng { inner })
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        rand::Rng::gen::<f64>(&mut self.inner)
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        rand::Rng::gen_range(&mut self.inner, 0..n)
    }

    /// Standard Gumbel(0, 1) draw.
    pub fn gumbel(&mut self) -> f64 {
        let u = self.uniform().max(f64::MIN_POSITIVE);
        -(-u.ln()).ln()
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        rand::seq::SliceRandom::shuffle(xs, &mut self.inner);
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn split_streams_differ() {
        let firsts: std::collections::HashSet<u64> =
            (0..1000u64).map(|i| Rng::split(7, i).next_u64()).collect();
        assert_eq!(firsts.len(), 1000);
        let mut hi = Rng::split(7, u32::MAX as u64);
        let mut lo = Rng::split(7, 0);
        assert_ne!(hi.next_u64(), lo.next_u64());
    }

    #[test]
    fn state_round_trip() {
        let mut a = Rng::split(3, 9);
        for _ in 0..37 {
            a.next_u32();
        }
        let mut b = Rng::from_state(&a.state()).unwrap();
        for _ in 0..50 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }
}
