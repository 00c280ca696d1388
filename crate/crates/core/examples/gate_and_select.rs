//! One context-identification decision: gate estimates, the candidate filter and the
//! joint-loss choice for several energy weights.
//!
//! ```text
//! cargo run --example gate_and_select
//! ```

use ctxfuse::gating::{build_gate, select_candidates, GateInput, GateKind};
use ctxfuse::optimizer::{expected_energy_map, select_config, JointWeights};
use ctxfuse::profile::default_profile;
use ctxfuse::scenario::{step_rng, streams};
use ctxfuse::types::Context;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = default_profile();
    let energy = expected_energy_map(&profile)?;
    let gamma = profile.optimizer_params().gamma;

    for kind in [GateKind::Knowledge, GateKind::Estimator] {
        let mut gate = build_gate(kind, &profile, step_rng(1, 0, streams::GATE))?;
        for ctx in [Context::Night, Context::Snow] {
            let est = gate.estimate(&GateInput {
                t: 0,
                context: &ctx,
                true_losses: None,
            })?;
            let candidates = select_candidates(&est, gamma)?;
            println!("{kind} gate, {ctx}: {} candidates within {gamma}", candidates.len());
            for lambda in [0.0, 0.01, 1.0] {
                let id = select_config(&candidates, &est, &energy, JointWeights::new(lambda)?)?;
                println!(
                    "  lambda_e={lambda:<4} -> {id} (est. loss {:.4}, {:.3} J)",
                    est.get(&id).unwrap_or(f64::NAN),
                    energy[&id]
                );
            }
        }
    }
    Ok(())
}
