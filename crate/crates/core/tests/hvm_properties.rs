mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use common::gen;
use seqctx_core::empirical::{check_compatibility_of_marginals, validate_behaviour};
use seqctx_core::hvm::{
    behaviour, build_factorizable_hvm, check_nd_hvm, check_no_disturbance, check_outcome_determinism,
    random_restricted_hvm, validate_hvm, HiddenVariableModel, InstrumentModel, Restriction,
};
use seqctx_core::polytope::contextual_fraction;
use seqctx_core::scenario::examples::kcbs_scenario;
use seqctx_core::{InstrumentLabel, SequentialScenario};

fn stochastic(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    gen::distribution(r, n).into_weights()
}

/// Unrestricted model: every row drawn independently.
fn arbitrary_hvm(r: &mut ChaCha8Rng, s: &SequentialScenario, n: usize) -> HiddenVariableModel {
    let mut instruments = BTreeMap::new();
    for inst in s.instruments() {
        let o = inst.outcome_count();
        let response: Vec<f64> = (0..n).flat_map(|_| stochastic(r, o)).collect();
        let transfer: Vec<f64> = (0..n * o).flat_map(|_| stochastic(r, n)).collect();
        instruments.insert(inst.label.clone(), InstrumentModel::new(n, o, response, transfer).unwrap());
    }
    HiddenVariableModel::new(stochastic(r, n), instruments).unwrap()
}

/// Sums the product formula over every hidden-variable path, final transfer
/// included.
fn path_sum(h: &HiddenVariableModel, labels: &[&InstrumentLabel], outcome: &[usize]) -> f64 {
    let n = h.lambda_count();
    let models: Vec<&InstrumentModel> = labels.iter().map(|l| &h.instruments()[*l]).collect();
    let steps = labels.len();
    let mut total = 0.0;
    let paths = n.pow(steps as u32 + 1);
    let mut path = vec![0usize; steps + 1];
    for mut code in 0..paths {
        for p in path.iter_mut() {
            *p = code % n;
            code /= n;
        }
        let mut term = h.mu()[path[0]];
        for i in 0..steps {
            term *= models[i].xi(outcome[i], path[i]) * models[i].gamma(path[i + 1], path[i], outcome[i]);
        }
        total += term;
    }
    total
}

#[test]
fn behaviour_matches_path_sum_oracle() {
    for seed in 0..20 {
        let mut r = gen::rng(seed);
        let s = Arc::new(
            SequentialScenario::binary(&["A", "B", "C"], &[&["A", "B", "C"], &["C", "A", "C"], &["B"]]).unwrap(),
        );
        let h = arbitrary_hvm(&mut r, &s, 3);
        let e = behaviour(&h, &s).unwrap();
        for (si, seq) in s.sequences().iter().enumerate() {
            let labels: Vec<&InstrumentLabel> = seq.labels().collect();
            let sp = s.outcome_space(si).unwrap();
            for (k, o) in sp.iter().enumerate() {
                let want = path_sum(&h, &labels, &o);
                assert!((e.table(si).weights()[k] - want).abs() < 1e-14, "seed {seed}");
            }
        }
    }
}

#[test]
fn index_base_does_not_change_behaviour() {
    let mut r = gen::rng(5);
    let s0 = Arc::new(kcbs_scenario().with_index_base(0));
    let s1 = Arc::new(kcbs_scenario().with_index_base(1));
    let h = arbitrary_hvm(&mut r, &s0, 4);
    let a = behaviour(&h, &s0).unwrap();
    let b = behaviour(&h, &s1).unwrap();
    assert_eq!(a.tables(), b.tables());
}

#[test]
fn missing_instrument_is_reported() {
    let s = Arc::new(SequentialScenario::binary(&["A", "B"], &[&["A", "B"]]).unwrap());
    let h = HiddenVariableModel::new(vec![1.0], BTreeMap::new()).unwrap();
    assert!(behaviour(&h, &s).is_err());
}

#[test]
fn factorizable_hvm_on_uniform_kcbs_weights_is_noncontextual() {
    let s = Arc::new(kcbs_scenario());
    let h = build_factorizable_hvm(&s, &[1.0 / 32.0; 32]).unwrap();
    let e = behaviour(&h, &s).unwrap();
    assert!(contextual_fraction(&e).unwrap().cf <= 1e-9);
    assert!(check_nd_hvm(&h, &s, 0.0).unwrap().holds());
}

// A stochastic instrument measured twice in a row is outcome independent and
// does not disturb itself, yet its two outcomes disagree with positive
// probability. The length-two result therefore needs distinct labels.
#[test]
fn repeated_fair_coin_is_oi_nd_but_contextual() {
    use seqctx_core::hvm::{build_example_instrument, check_outcome_independence, ExampleKind, ExampleParams};
    let s = Arc::new(SequentialScenario::binary(&["A"], &[&["A", "A"]]).unwrap());
    let params = ExampleParams { lambda_count: 1, outcome_count: 2, assignment: None };
    let coin = build_example_instrument(ExampleKind::FairCoinFlip, &params).unwrap();
    let h = HiddenVariableModel::new(vec![1.0], [(InstrumentLabel::from("A"), coin)].into_iter().collect()).unwrap();
    assert!(check_nd_hvm(&h, &s, 0.0).unwrap().holds());
    assert!(check_outcome_independence(&h, "A", 0.0).unwrap());
    let e = behaviour(&h, &s).unwrap();
    assert_eq!(e.table(0).weights(), &[0.25; 4]);
    assert!((contextual_fraction(&e).unwrap().cf - 0.5).abs() < 1e-12);
}

fn small_scenario(r: &mut ChaCha8Rng, max_len: usize) -> Arc<SequentialScenario> {
    Arc::new(gen::scenario(r, 4, 4, max_len, true))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn arbitrary_models_give_distributions(seed in any::<u64>(), n in 1usize..6) {
        let mut r = gen::rng(seed);
        let s = small_scenario(&mut r, 3);
        let h = arbitrary_hvm(&mut r, &s, n);
        prop_assert!(validate_hvm(&h, 1e-12).is_empty());
        let e = behaviour(&h, &s).unwrap();
        prop_assert!(validate_behaviour(&e, 1e-12).is_empty());
    }

    #[test]
    fn nd_models_have_compatible_marginals(seed in any::<u64>(), n in 1usize..=16) {
        let mut r = gen::rng(seed);
        let s = small_scenario(&mut r, 3);
        let h = random_restricted_hvm(&s, Restriction::Nd, r.gen(), n).unwrap();
        prop_assert!(check_nd_hvm(&h, &s, 1e-12).unwrap().holds());
        let e = behaviour(&h, &s).unwrap();
        let report = check_compatibility_of_marginals(&e, 1e-9);
        prop_assert!(report.passes(), "{:?}", report.max_deviation);
    }

    #[test]
    fn od_nd_models_are_noncontextual(seed in any::<u64>(), n in 1usize..=16) {
        let mut r = gen::rng(seed);
        let s = small_scenario(&mut r, 3);
        let h = random_restricted_hvm(&s, Restriction::OdNd, r.gen(), n).unwrap();
        let e = behaviour(&h, &s).unwrap();
        prop_assert!(contextual_fraction(&e).unwrap().cf <= 1e-7);
    }

    #[test]
    fn oi_nd_models_on_short_sequences_are_noncontextual(seed in any::<u64>(), n in 1usize..=16) {
        let mut r = gen::rng(seed);
        let s = Arc::new(gen::scenario(&mut r, 4, 4, 2, false));
        let h = random_restricted_hvm(&s, Restriction::OiNd, r.gen(), n).unwrap();
        let e = behaviour(&h, &s).unwrap();
        prop_assert!(contextual_fraction(&e).unwrap().cf <= 1e-7);
    }

    #[test]
    fn factorizable_models_reproduce_nc_behaviours(seed in any::<u64>(), k in 1usize..6) {
        let mut r = gen::rng(seed);
        let s = small_scenario(&mut r, 3);
        let (w, e) = gen::nc_behaviour(&mut r, &s, k);
        let h = build_factorizable_hvm(&s, &w).unwrap();
        prop_assert!(behaviour(&h, &s).unwrap().max_abs_diff(&e) <= 1e-9);
        prop_assert!(check_nd_hvm(&h, &s, 1e-12).unwrap().holds());
        for inst in s.instruments() {
            prop_assert!(check_outcome_determinism(&h, inst.label.as_str(), 0.0).unwrap());
        }
    }

    // An outcome-deterministic A that does not disturb B can only move λ to
    // hidden variables on which B answers as before.
    #[test]
    fn od_transfers_stay_inside_response_classes(seed in any::<u64>(), n in 1usize..=16) {
        let mut r = gen::rng(seed);
        let s = small_scenario(&mut r, 3);
        let h = random_restricted_hvm(&s, Restriction::OdNd, r.gen(), n).unwrap();
        for (a_label, a) in h.instruments() {
            for (b_label, b) in h.instruments() {
                if !check_no_disturbance(&h, a_label.as_str(), b_label.as_str(), 1e-12).unwrap().holds {
                    continue;
                }
                for l in 0..n {
                    let out = (0..a.outcome_count()).find(|&k| a.xi(k, l) == 1.0).unwrap();
                    for (to, &g) in a.transfer_row(l, out).iter().enumerate() {
                        if g > 0.0 {
                            prop_assert_eq!(b.response_row(to), b.response_row(l));
                        }
                    }
                }
            }
        }
    }

    // For outcome-independent A, summing the no-disturbance condition over a
    // leaves Σ_λ' Γ_A(λ'|λ) ξ_B(b|λ') = ξ_B(b|λ).
    #[test]
    fn oi_nd_pairs_preserve_responses_on_average(seed in any::<u64>(), n in 1usize..=16) {
        let mut r = gen::rng(seed);
        let s = small_scenario(&mut r, 3);
        let h = random_restricted_hvm(&s, Restriction::OiNd, r.gen(), n).unwrap();
        for si in 0..s.sequences().len() {
            let labels: Vec<&InstrumentLabel> = s.sequences()[si].labels().collect();
            for i in 0..labels.len() {
                for j in (i + 1)..labels.len() {
                    let a = &h.instruments()[labels[i]];
                    let b = &h.instruments()[labels[j]];
                    for l in 0..n {
                        for y in 0..b.outcome_count() {
                            let avg: f64 = (0..n).map(|to| a.gamma(to, l, 0) * b.xi(y, to)).sum();
                            prop_assert!((avg - b.xi(y, l)).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }
}
