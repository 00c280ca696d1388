//! Energy versus loss over a range of energy weights for all three gates on the
//! bundled scenario. Runs in parallel.
//!
//! ```text
//! cargo run --release --example pareto_sweep
//! ```

use ctxfuse::gating::GateKind;
use ctxfuse::optimizer::pareto_sweep_gates;
use ctxfuse::profile::default_profile;
use ctxfuse::runtime::RunParams;
use ctxfuse::scenario::{bundled_scenario, BUNDLED_SCENARIO_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = default_profile();
    let trace = bundled_scenario(&profile)?;
    let base = RunParams::new(&profile, GateKind::Estimator, 0.0, BUNDLED_SCENARIO_SEED)?;
    let lambdas = [0.0, 0.001, 0.003, 0.01, 0.03, 0.1, 1.0];
    let points = pareto_sweep_gates(&trace, &profile, &GateKind::ALL, &lambdas, &base)?;
    println!("gate       lambda_e   avg_loss  avg_energy_j");
    for p in points {
        println!(
            "{:<10} {:>8} {:>10.4} {:>13.4}",
            p.gate.as_str(),
            p.lambda_e,
            p.avg_loss,
            p.avg_energy_j
        );
    }
    Ok(())
}
