mod common;

use common::checks::*;
use proptest::prelude::*;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

const TOL: f64 = 1e-4;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mlp_gradients_match_central_differences(seed in any::<u64>()) {
        prop_assert!(fd_mlp(seed) < TOL);
    }

    #[test]
    fn lstm_gradients_match_central_differences(seed in any::<u64>()) {
        prop_assert!(fd_lstm(seed) < TOL);
    }

    #[test]
    fn loss_heads_match_central_differences(seed in any::<u64>()) {
        for h in [Head::Ce, Head::Bce, Head::Mse] {
            let e = fd_head(seed, h);
            prop_assert!(e < TOL, "{h:?}: {e}");
        }
    }

    #[test]
    fn codebook_straight_through_matches_surrogate(seed in any::<u64>()) {
        prop_assert!(fd_codebook_st(seed) < TOL);
    }

    #[test]
    fn quantized_straight_through_matches_surrogate(seed in any::<u64>()) {
        prop_assert!(fd_quantized_st(seed) < TOL);
    }

    #[test]
    fn ema_matches_closed_form(seed in any::<u64>()) {
        prop_assert!(ema_closed_form_err(seed) < 1e-12);
    }

    #[test]
    fn commitment_matches_hand_rules(seed in any::<u64>()) {
        prop_assert!(commitment_hand_err(seed) < 1e-12);
    }
}
