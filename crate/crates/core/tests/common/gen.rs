//! Seeded generators for scenarios and behaviours.

#![allow(dead_code)]

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqctx_core::empirical::{deterministic_model, mix};
use seqctx_core::scenario::{GlobalAssignment, Instrument};
use seqctx_core::{Distribution, EmpiricalBehaviour, Sequence, SequentialScenario};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random scenario with 1..=`max_labels` instruments of 2 or 3 outcomes and
/// 1..=`max_seqs` sequences of length 1..=`max_len`. Repeats are allowed
/// when `repeats` is set.
pub fn scenario(r: &mut ChaCha8Rng, max_labels: usize, max_seqs: usize, max_len: usize, repeats: bool) -> SequentialScenario {
    let nl = r.gen_range(1..=max_labels);
    let names: Vec<String> = (0..nl).map(|i| format!("X{i}")).collect();
    let instruments = names
        .iter()
        .map(|n| Instrument::with_outcome_count(n.as_str(), r.gen_range(2..=3)))
        .collect();
    let ns = r.gen_range(1..=max_seqs);
    let sequences = (0..ns)
        .map(|_| {
            let len = r.gen_range(1..=max_len);
            let labels: Vec<&str> = if repeats {
                (0..len).map(|_| names.choose(r).unwrap().as_str()).collect()
            } else {
                let mut pool: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
                pool.shuffle(r);
                pool.truncate(len.min(nl));
                pool
            };
            Sequence::new(labels)
        })
        .collect();
    SequentialScenario::new(instruments, sequences).unwrap()
}

pub fn distribution(r: &mut ChaCha8Rng, n: usize) -> Distribution {
    let mut w: Vec<f64> = (0..n).map(|_| -r.gen::<f64>().max(1e-300).ln()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Distribution::new(w)
}

/// Independent random table per sequence; usually signalling and contextual.
pub fn behaviour(r: &mut ChaCha8Rng, s: &Arc<SequentialScenario>) -> EmpiricalBehaviour {
    let tables = (0..s.sequences().len())
        .map(|i| distribution(r, s.outcome_space(i).unwrap().size()))
        .collect();
    EmpiricalBehaviour::new(s.clone(), tables).unwrap()
}

/// A random convex mixture of deterministic models and its weight vector over
/// all global assignments.
pub fn nc_behaviour(r: &mut ChaCha8Rng, s: &Arc<SequentialScenario>, components: usize) -> (Vec<f64>, EmpiricalBehaviour) {
    let asp = s.assignment_space();
    let mut weights = vec![0.0; asp.size()];
    let w = distribution(r, components);
    for &x in w.weights() {
        weights[r.gen_range(0..asp.size())] += x;
    }
    let models: Vec<(f64, EmpiricalBehaviour)> = weights
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0)
        .map(|(k, &x)| (x, deterministic_model(s, &GlobalAssignment::new(asp.decode(k))).unwrap()))
        .collect();
    let parts: Vec<(f64, &EmpiricalBehaviour)> = models.iter().map(|(x, m)| (*x, m)).collect();
    (weights, mix(&parts).unwrap())
}
