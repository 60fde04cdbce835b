//! Binary words from rounded sigmoids.

use crate::diffcore::{Tape, Tensor, Var};
use crate::error::Result;

/// Rounds each entry to {0, 1}; exactly 0.5 rounds down.
pub fn round_bits(t: &Tensor) -> Tensor {
    t.map(|v| if v > 0.5 { 1.0 } else { 0.0 })
}

/// Rounded activations in the forward pass, identity gradient backward.
pub fn round_st(tape: &mut Tape, probs: Var) -> Result<Var> {
    let r = round_bits(tape.value(probs));
    tape.straight_through(probs, r)
}

/// Word id of a bit row, most significant bit first.
pub fn bits_to_id(bits: &[f64]) -> usize {
    bits.iter().fold(0, |acc, &b| acc << 1 | usize::from(b > 0.5))
}

/// Bits needed so that `2^bits ≥ n`.
pub fn bits_for(n: usize) -> usize {
    let mut b = 1;
    while (1usize << b) < n {
        b += 1;
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        let t = Tensor::vector(vec![0.9, 0.2, 0.7]);
        let r = round_bits(&t);
        assert_eq!(r.data(), &[1.0, 0.0, 1.0]);
        assert_eq!(bits_to_id(r.data()), 5);
        let tie = Tensor::vector(vec![0.5 - 1e-9, 0.5, 0.5]);
        assert_eq!(bits_to_id(round_bits(&tie).data()), 0);
        assert_eq!(bits_for(50), 6);
        assert_eq!(bits_for(64), 6);
        assert_eq!(bits_for(65), 7);
    }
}
