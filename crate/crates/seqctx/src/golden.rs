//! The documents shipped under `golden/`, built programmatically.

use std::sync::Arc;

use seqctx_core::hvm::{build_factorizable_hvm, epsilon_noisy_family, random_restricted_hvm, Restriction};
use seqctx_core::quantum::{kcbs_realization, pm_realization};
use seqctx_core::scenario::examples::{
    extended_kcbs_scenario, kcbs_measurement_scenario, kcbs_scenario, pm_measurement_scenario, pm_scenario,
};
use seqctx_core::error::Result;
use seqctx_core::SequentialScenario;

use crate::io::Document;

/// Epsilon used for the shipped noisy-family model.
pub const EPSILON: f64 = 0.25;

/// Seed and hidden-variable count of the shipped random OD∧ND model.
pub const OD_ND_SEED: u64 = 7;
pub const OD_ND_LAMBDA: usize = 6;

/// `A` and `B` binary, probed alone and in the order `A, B`.
pub fn epsilon_scenario() -> SequentialScenario {
    SequentialScenario::binary(&["A", "B"], &[&["B"], &["A", "B"]]).expect("valid scenario")
}

/// Weights of the shipped factorizable model, indexed by global assignment of KCBS.
pub fn kcbs_factorizable_weights() -> Vec<f64> {
    let mut w = vec![0.0; 32];
    w[0b00000] = 0.4;
    w[0b01010] = 0.3;
    w[0b10100] = 0.2;
    w[0b11001] = 0.1;
    w
}

/// Documents written by `demo kcbs --emit`.
pub fn kcbs_documents() -> Result<Vec<(&'static str, Document)>> {
    let r = kcbs_realization();
    let s = Arc::new(kcbs_scenario());
    let ext = Arc::new(extended_kcbs_scenario());
    Ok(vec![
        ("kcbs_scenario.json", Document::Scenario((*s).clone())),
        ("kcbs_measurement_scenario.json", Document::MeasurementScenario(kcbs_measurement_scenario())),
        ("kcbs_quantum.json", Document::QuantumRealization(r.clone())),
        ("kcbs_behaviour.json", Document::Behaviour(r.behaviour(&s)?)),
        ("extended_kcbs_scenario.json", Document::Scenario((*ext).clone())),
        ("extended_kcbs_behaviour.json", Document::Behaviour(r.behaviour(&ext)?)),
    ])
}

/// Documents written by `demo pm --emit`.
pub fn pm_documents() -> Result<Vec<(&'static str, Document)>> {
    let r = pm_realization();
    let s = Arc::new(pm_scenario());
    Ok(vec![
        ("pm_scenario.json", Document::Scenario((*s).clone())),
        ("pm_measurement_scenario.json", Document::MeasurementScenario(pm_measurement_scenario())),
        ("pm_quantum.json", Document::QuantumRealization(r.clone())),
        ("pm_behaviour.json", Document::Behaviour(r.behaviour(&s)?)),
    ])
}

/// Hidden variable models together with the scenario file they are simulated on.
pub fn hvm_documents() -> Result<Vec<(&'static str, &'static str, Document)>> {
    let kcbs = kcbs_scenario();
    Ok(vec![
        (
            "kcbs_factorizable_hvm.json",
            "kcbs_scenario.json",
            Document::Hvm(build_factorizable_hvm(&kcbs, &kcbs_factorizable_weights())?),
        ),
        (
            "kcbs_od_nd_hvm.json",
            "kcbs_scenario.json",
            Document::Hvm(random_restricted_hvm(&kcbs, Restriction::OdNd, OD_ND_SEED, OD_ND_LAMBDA)?),
        ),
        (
            "epsilon_noisy_hvm.json",
            "epsilon_scenario.json",
            Document::Hvm(epsilon_noisy_family(EPSILON)?),
        ),
    ])
}

/// Every shipped golden file by name.
pub fn all_documents() -> Result<Vec<(&'static str, Document)>> {
    let mut out = kcbs_documents()?;
    out.extend(pm_documents()?);
    out.push(("epsilon_scenario.json", Document::Scenario(epsilon_scenario())));
    out.extend(hvm_documents()?.into_iter().map(|(name, _, d)| (name, d)));
    Ok(out)
}
