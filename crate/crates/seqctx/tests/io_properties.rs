//! Round-trip identity on generated objects, and a parser fuzz run.

#[path = "../../core/tests/common/gen.rs"]
mod gen;
mod common;

use common::fuzz;

use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use seqctx::io::{self, Document};
use seqctx_core::hvm::{self, random_restricted_hvm, Restriction};
use seqctx_core::quantum::{projective_instrument, CMatrix, DensityMatrix, QuantumRealization, C64};
use seqctx_core::scenario::{induce_sequential, underlying_measurement_scenario, OrderingPolicy};
use seqctx_core::SequentialScenario;

fn assert_round_trip(doc: Document) {
    let text = io::to_text(&doc);
    let back = io::parse(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    assert_eq!(back.document, doc);
    assert_eq!(io::serialize(&back), text);
}

fn random_scenario(r: &mut ChaCha8Rng) -> SequentialScenario {
    let base = r.gen_range(0..3);
    gen::scenario(r, 4, 4, 3, true).with_index_base(base)
}

/// Orthonormal basis of `C^d` by Gram-Schmidt on random vectors.
fn random_basis(r: &mut ChaCha8Rng, d: usize) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = Vec::new();
    while basis.len() < d {
        let mut v: Vec<C64> = (0..d).map(|_| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect();
        for b in &basis {
            let overlap: C64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= overlap * bi;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-3 {
            basis.push(v.into_iter().map(|z| z / norm).collect());
        }
    }
    basis
}

fn random_realization(r: &mut ChaCha8Rng, s: &SequentialScenario) -> QuantumRealization {
    let d = r.gen_range(2..=4);
    let basis = random_basis(r, d);
    let probs = gen::distribution(r, d);
    let mut rho = CMatrix::zeros(d);
    for (v, &p) in basis.iter().zip(probs.weights()) {
        rho = &rho + &CMatrix::outer(v).scale(C64::new(p, 0.0));
    }
    let rho = DensityMatrix::new(rho.hermitian_part()).unwrap();
    let mut instruments = BTreeMap::new();
    for inst in s.instruments() {
        let basis = random_basis(r, d);
        let o = inst.outcome_count();
        let mut projectors = vec![CMatrix::zeros(d); o];
        for (k, v) in basis.iter().enumerate() {
            let slot = if k < o { k } else { r.gen_range(0..o) };
            projectors[slot] = &projectors[slot] + &CMatrix::outer(v);
        }
        instruments.insert(inst.label.clone(), projective_instrument(&projectors).unwrap());
    }
    QuantumRealization::new(rho, instruments).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn scenarios_and_behaviours_round_trip(seed in any::<u64>()) {
        let mut r = gen::rng(seed);
        let s = Arc::new(random_scenario(&mut r));
        assert_round_trip(Document::Scenario((*s).clone()));
        assert_round_trip(Document::Behaviour(gen::behaviour(&mut r, &s)));
        if let Some(m) = underlying_measurement_scenario(&s) {
            assert_round_trip(Document::MeasurementScenario(m.clone()));
            let induced = Arc::new(induce_sequential(&m, &OrderingPolicy::Declared).unwrap());
            assert_round_trip(Document::Behaviour(gen::behaviour(&mut r, &induced)));
        }
    }

    #[test]
    fn models_round_trip(seed in any::<u64>()) {
        let mut r = gen::rng(seed);
        let s = Arc::new(random_scenario(&mut r));
        let restriction = *[Restriction::OdNd, Restriction::OiNd, Restriction::Nd].choose(&mut r).unwrap();
        let h = random_restricted_hvm(&s, restriction, seed, r.gen_range(1..=8)).unwrap();
        assert_round_trip(Document::Hvm(h.clone()));
        assert_round_trip(Document::Behaviour(hvm::behaviour(&h, &s).unwrap()));
        let q = random_realization(&mut r, &s);
        assert_round_trip(Document::QuantumRealization(q.clone()));
        assert_round_trip(Document::Behaviour(q.behaviour(&s).unwrap()));
    }
}

#[test]
fn instrument_map_keys_are_sorted() {
    let s = SequentialScenario::binary(&["b", "a"], &[&["b", "a"]]).unwrap();
    let mut r = gen::rng(3);
    let text = io::to_text(&Document::QuantumRealization(random_realization(&mut r, &s)));
    assert!(text.find("\"a\": {").unwrap() < text.find("\"b\": {").unwrap());
}

#[test]
fn parser_survives_100k_random_inputs() {
    let stats = fuzz::run(100_000, 0x5eed);
    // some mutations keep the document valid; the fuzz run must reach them
    assert!(stats.accepted > 0);
    assert_eq!(stats.accepted + stats.rejected, 100_000);
}
