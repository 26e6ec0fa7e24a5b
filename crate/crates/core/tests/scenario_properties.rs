mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use common::gen;
use seqctx_core::empirical::{
    check_compatibility_of_marginals, deterministic_model, marginal, mix, validate_behaviour,
};
use seqctx_core::scenario::{
    base_set, consistent_projection, enumerate_global_assignments, induce_sequential, underlying_measurement_scenario,
    Instrument, OrderingPolicy,
};
use seqctx_core::{InstrumentLabel, MeasurementScenario, SequentialScenario};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_exists_iff_repeats_agree(seed in any::<u64>()) {
        let mut r = gen::rng(seed);
        let s = gen::scenario(&mut r, 3, 3, 4, true);
        for (si, seq) in s.sequences().iter().enumerate() {
            let labels: Vec<&InstrumentLabel> = seq.labels().collect();
            for o in s.outcome_space(si).unwrap().iter() {
                let agree = (0..o.len()).all(|i| (0..o.len()).all(|j| labels[i] != labels[j] || o[i] == o[j]));
                let proj = consistent_projection(&o, seq).unwrap();
                prop_assert_eq!(proj.is_some(), agree);
                if let Some(p) = proj {
                    prop_assert_eq!(p.keys().cloned().collect::<BTreeSet<_>>(), base_set(seq));
                }
            }
        }
    }

    #[test]
    fn assignments_are_exhaustive_and_distinct(seed in any::<u64>()) {
        let mut r = gen::rng(seed);
        let s = gen::scenario(&mut r, 5, 2, 2, true);
        let all: Vec<Vec<usize>> = enumerate_global_assignments(&s, 1 << 20)
            .unwrap()
            .map(|g| g.as_slice().to_vec())
            .collect();
        let expected: usize = s.instruments().iter().map(|i| i.outcome_count()).product();
        prop_assert_eq!(all.len(), expected);
        let unique: HashSet<_> = all.iter().collect();
        prop_assert_eq!(unique.len(), expected);
    }

    #[test]
    fn induce_then_recover_is_identity(seed in any::<u64>()) {
        let mut r = gen::rng(seed);
        let n = r.gen_range(2..6);
        let names: Vec<String> = (0..n).map(|i| format!("M{i}")).collect();
        let mut contexts: Vec<Vec<InstrumentLabel>> = Vec::new();
        let mut seen = BTreeSet::new();
        for name in &names {
            // each label starts one context so every label is covered
            let k = r.gen_range(0..n);
            let mut ctx: Vec<&String> = names.choose_multiple(&mut r, k).filter(|x| *x != name).collect();
            ctx.push(name);
            ctx.shuffle(&mut r);
            let set: BTreeSet<&String> = ctx.iter().copied().collect();
            if seen.insert(set) {
                contexts.push(ctx.into_iter().map(|x| InstrumentLabel::from(x.as_str())).collect());
            }
        }
        let instruments = names.iter().map(|x| Instrument::binary(x.as_str())).collect();
        let m = MeasurementScenario::new(instruments, contexts).unwrap();
        for policy in [OrderingPolicy::Declared, OrderingPolicy::Reversed] {
            let s = induce_sequential(&m, &policy).unwrap();
            let back = underlying_measurement_scenario(&s).unwrap();
            prop_assert_eq!(back.context_sets(), m.context_sets());
            prop_assert_eq!(back.instruments(), m.instruments());
        }
    }

    #[test]
    fn marginal_commutes_with_mix(seed in any::<u64>(), w in 0.0f64..=1.0) {
        let mut r = gen::rng(seed);
        let s = Arc::new(gen::scenario(&mut r, 3, 3, 3, true));
        let a = gen::behaviour(&mut r, &s);
        let b = gen::behaviour(&mut r, &s);
        let m = mix(&[(w, &a), (1.0 - w, &b)]).unwrap();
        for si in 0..s.sequences().len() {
            let len = s.sequences()[si].len();
            let mut positions: Vec<usize> = (0..len).collect();
            positions.shuffle(&mut r);
            positions.truncate(r.gen_range(1..=len));
            let lhs = marginal(&m, si, &positions).unwrap();
            let ma = marginal(&a, si, &positions).unwrap();
            let mb = marginal(&b, si, &positions).unwrap();
            for k in 0..lhs.len() {
                let rhs = w * ma.weights()[k] + (1.0 - w) * mb.weights()[k];
                prop_assert!((lhs.weights()[k] - rhs).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn vertices_are_exact_behaviours(seed in any::<u64>()) {
        let mut r = gen::rng(seed);
        let s = Arc::new(gen::scenario(&mut r, 4, 4, 3, true));
        let asp = s.assignment_space();
        let g = seqctx_core::scenario::GlobalAssignment::new(asp.decode(r.gen_range(0..asp.size())));
        let e = deterministic_model(&s, &g).unwrap();
        prop_assert!(validate_behaviour(&e, 0.0).is_empty());
        let report = check_compatibility_of_marginals(&e, 0.0);
        prop_assert!(report.passes());
        prop_assert_eq!(report.max_deviation, 0.0);
    }

    // Sequences over the same base set agree on consistent outcomes for
    // non-contextual behaviours.
    #[test]
    fn equal_base_sets_agree_on_nc_behaviours(seed in any::<u64>(), k in 1usize..6) {
        let mut r = gen::rng(seed);
        let s = Arc::new(
            SequentialScenario::binary(&["A", "B", "C"], &[&["A", "B"], &["B", "A"], &["A", "B", "A"], &["B", "C", "B"], &["C", "B"]])
                .unwrap(),
        );
        let (_, e) = gen::nc_behaviour(&mut r, &s, k);
        let table_by_projection = |si: usize| {
            let seq = &s.sequences()[si];
            let mut out = BTreeMap::new();
            for (idx, o) in s.outcome_space(si).unwrap().iter().enumerate() {
                match consistent_projection(&o, seq).unwrap() {
                    Some(p) => {
                        out.insert(p, e.table(si).weights()[idx]);
                    }
                    None => assert!(e.table(si).weights()[idx].abs() <= 1e-15),
                }
            }
            out
        };
        let groups = [[0usize, 1, 2], [3, 4, 4]];
        for g in groups {
            let first = table_by_projection(g[0]);
            for &other in &g[1..] {
                let t = table_by_projection(other);
                for (key, v) in &first {
                    prop_assert!((t[key] - v).abs() <= 1e-12);
                }
            }
        }
    }
}
