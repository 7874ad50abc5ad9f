mod common;

use addchain::chain::{binary_chain, factor_compose, is_star, small_summand_total, Target};
use addchain::mersenne::{double_construction, expand, expand_counted, sum_construction};
use addchain::numeral::{closed_form_length_u64, lambda_floor_u64, nu_u64};
use addchain::search::{
    chain_containing, counting_lower_bound, lower_bound, minimal_length, minimal_star_length,
    oracle_lengths_up_to, DEFAULT_NODE_BUDGET,
};
use addchain::ChainProgram;
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn chain_strategy(cap: u64) -> impl Strategy<Value = ChainProgram> {
    (any::<u64>(), 1usize..14).prop_map(move |(seed, steps)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        common::random_chain(&mut rng, cap, steps)
    })
}

fn last_value(p: &ChainProgram) -> u64 {
    *p.evaluate_u64().unwrap().last().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn expand_length_law(p in chain_strategy(512)) {
        let sst = small_summand_total(&p).unwrap().to_usize().unwrap();
        let (m, merged) = expand_counted(&p).unwrap();
        prop_assert_eq!(m.len() + merged, p.len() + sst);
        prop_assert_eq!(m.exponent(), last_value(&p));
        m.program().validate_exact(&Target::Mersenne(m.exponent())).unwrap();
        if is_star(&p) {
            prop_assert_eq!(merged, 0);
        }
    }

    #[test]
    fn expand_provides_every_element_in_order(p in chain_strategy(512)) {
        let m = expand(&p).unwrap();
        let mut previous = None;
        for a in p.evaluate_u64().unwrap() {
            let idx = m.index_of(a);
            prop_assert!(idx.is_some());
            prop_assert!(previous < idx);
            previous = idx;
        }
    }

    #[test]
    fn factor_compose_is_additive(p in chain_strategy(300), q in chain_strategy(300)) {
        let r = factor_compose(&p, &q);
        prop_assert_eq!(r.len(), p.len() + q.len());
        prop_assert_eq!(last_value(&r), last_value(&p) * last_value(&q));
    }

    #[test]
    fn modular_validation_is_sound(p in chain_strategy(1 << 20), seed in any::<u64>()) {
        let target = Target::Value(BigUint::from(last_value(&p)));
        prop_assert!(p.validate_modular(Some(&target), 4, seed));
        prop_assert!(p.validate_modular(None, 2, seed));
    }

    #[test]
    fn double_and_sum_increments(a in 2u64..=64, b_seed in any::<u64>()) {
        let base = expand(&binary_chain(&BigUint::from(a)).unwrap()).unwrap();
        let d = double_construction(&base);
        prop_assert_eq!(d.len(), base.len() + a as usize + 1);
        d.program().validate_exact(&Target::Mersenne(2 * a)).unwrap();

        let provided: Vec<u64> = base.provided_mersennes().filter(|&e| e < a).collect();
        let b = provided[(b_seed % provided.len() as u64) as usize];
        let s = sum_construction(&base, a, b).unwrap();
        prop_assert_eq!(s.len(), base.len() + b as usize + 1);
        s.program().validate_exact(&Target::Mersenne(a + b)).unwrap();
    }

    #[test]
    fn json_round_trip(p in chain_strategy(1000)) {
        let json = serde_json::to_string(&p).unwrap();
        prop_assert_eq!(serde_json::from_str::<ChainProgram>(&json).unwrap(), p.clone());
        let m = expand(&p).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        prop_assert_eq!(serde_json::from_str::<addchain::MersenneProgram>(&json).unwrap(), m);
    }
}

#[test]
fn binary_chain_lengths_up_to_a_million() {
    for n in 1u64..=1_000_000 {
        let p = binary_chain(&BigUint::from(n)).unwrap();
        let len = lambda_floor_u64(n).unwrap() + nu_u64(n).unwrap() - 1;
        assert_eq!(p.len() as u64, len);
        if n % 997 == 0 || n < 4096 {
            assert_eq!(last_value(&p), n);
        }
    }
}

#[test]
fn closed_forms_match_search() {
    for n in 1u64..=4096 {
        if let Some(closed) = closed_form_length_u64(n).unwrap() {
            let r = minimal_length(n, DEFAULT_NODE_BUDGET);
            assert!(r.exact);
            assert_eq!(closed, r.upper, "n = {n}");
        }
    }
}

#[test]
fn search_agrees_with_oracle_to_512() {
    let table = oracle_lengths_up_to(512).unwrap();
    for n in 1u64..=512 {
        let ell = u64::from(table[n as usize]);
        let r = minimal_length(n, DEFAULT_NODE_BUDGET);
        assert!(r.exact && r.upper == ell, "n = {n}");
        let w = r.witness.unwrap();
        assert_eq!(w.len() as u64, ell);
        assert_eq!(last_value(&w), n);
        assert!(lower_bound(n) <= ell);
        assert!(
            counting_lower_bound(n) <= ell,
            "counting bound fails at {n}"
        );

        // Must-contain 1 is no constraint at all.
        if n > 1 {
            let c = chain_containing(n, 1, 2 * ell + 2, false, DEFAULT_NODE_BUDGET)
                .unwrap()
                .unwrap();
            assert_eq!(c, w, "n = {n}");
        }

        let star = minimal_star_length(n, DEFAULT_NODE_BUDGET);
        assert!(star.exact && star.upper >= ell);
        let sw = star.witness.unwrap();
        assert!(is_star(&sw));
        assert_eq!(last_value(&sw), n);
        // Telescoping: the small summands of a star chain sum to n - 1.
        assert_eq!(small_summand_total(&sw).unwrap(), BigUint::from(n - 1));
        let m = expand(&sw).unwrap();
        assert_eq!(m.len() as u64, n + star.upper - 1);
    }
}

#[test]
fn star_length_at_least_length_to_1024() {
    for n in 513u64..=1024 {
        let ell = minimal_length(n, DEFAULT_NODE_BUDGET);
        let star = minimal_star_length(n, DEFAULT_NODE_BUDGET);
        assert!(ell.exact && star.exact);
        assert!(star.upper >= ell.upper, "n = {n}");
    }
}

#[test]
fn budgeted_search_never_worse_than_binary() {
    for n in (1u64..=100_000).step_by(7) {
        let r = minimal_length(n, 64);
        let binary = lambda_floor_u64(n).unwrap() + nu_u64(n).unwrap() - 1;
        assert!(r.lower <= r.upper && r.upper <= binary, "n = {n}");
        let w = r.witness.unwrap();
        assert_eq!(w.len() as u64, r.upper);
        assert_eq!(last_value(&w), n);
    }
}

#[test]
fn containing_search_for_c3_chains() {
    // A star chain of length m + 6 for c3 containing c4 exists for m ≤ 6.
    for m in 1..=6u64 {
        let params = addchain::numeral::family_params(m, 3).unwrap();
        let p = chain_containing(
            params.c3_u64(),
            params.c4_u64(),
            m + 6,
            true,
            DEFAULT_NODE_BUDGET,
        )
        .unwrap()
        .unwrap_or_else(|| panic!("no star chain for m = {m}"));
        assert_eq!(p.len() as u64, m + 6);
        assert!(is_star(&p));
        let v = p.evaluate_u64().unwrap();
        assert!(v.contains(&params.c4_u64()));
        assert_eq!(*v.last().unwrap(), params.c3_u64());
    }
}
