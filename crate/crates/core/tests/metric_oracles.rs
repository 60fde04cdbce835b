mod common;

use common::oracles::*;
use common::{brute_cbm_matched, random_corpus};
use ctd_core::diffcore::Rng;
use ctd_core::metrics::{ami, cbm, ci, Corpus, CI_DEFAULT_ITERS};
use proptest::prelude::*;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[test]
fn cbm_equals_brute_force_on_small_corpora() {
    assert_eq!(cbm_brute_mismatches(11, 200), 0);
}

#[test]
fn expected_mutual_info_matches_permutation_average() {
    let e = emi_max_err(5, 60);
    assert!(e < 1e-9, "{e}");
}

#[test]
fn ci_is_one_on_bijective_corpora() {
    let e = ci_bijective_err(3);
    assert!(e < 1e-6, "{e}");
}

#[test]
fn disentanglement_on_constructed_and_random_corpora() {
    let (pos, bos) = disent_constructed(9);
    assert!((pos - 1.0).abs() < 1e-9 && (bos - 1.0).abs() < 1e-9, "{pos} {bos}");
    let (pos, bos) = disent_random(9);
    assert!(pos < 0.1 && bos < 0.1, "{pos} {bos}");
}

#[test]
fn ami_of_bijective_corpora_is_one() {
    // repeated samples, otherwise both sides are all singletons and E[I] = I
    for c in bijective_corpora(1) {
        let c = Corpus::new([&c.messages[..]; 3].concat(), [&c.phrases[..]; 3].concat()).unwrap();
        let a = ami(&c).unwrap();
        assert!((a - 1.0).abs() < 1e-9, "{a}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cbm_matches_brute_force(seed in any::<u64>()) {
        let c = random_corpus(&mut Rng::new(seed), 7, 7);
        prop_assert_eq!(cbm(&c).unwrap().matched, brute_cbm_matched(&c));
    }

    #[test]
    fn metrics_are_invariant_to_word_renaming(seed in any::<u64>(), shift in 1usize..100) {
        let c = random_corpus(&mut Rng::new(seed), 6, 6);
        let renamed = Corpus::new(
            c.messages.iter().map(|m| m.iter().map(|w| w * 7 + shift).collect()).collect(),
            c.phrases.clone(),
        ).unwrap();
        prop_assert!((ami(&c).unwrap() - ami(&renamed).unwrap()).abs() < 1e-12);
        prop_assert!((cbm(&c).unwrap().score - cbm(&renamed).unwrap().score).abs() < 1e-12);
        let (a, b) = (ci(&c, CI_DEFAULT_ITERS).unwrap().value, ci(&renamed, CI_DEFAULT_ITERS).unwrap().value);
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn cbm_score_is_a_fraction(seed in any::<u64>()) {
        let c = random_corpus(&mut Rng::new(seed), 7, 7);
        let m = cbm(&c).unwrap();
        prop_assert!((0.0..=1.0).contains(&m.score));
        prop_assert_eq!(m.matched + m.ambiguous + m.paraphrase, m.total);
    }
}
