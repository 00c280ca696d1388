//! Runs the controller over a generated trace and prints the step log around the
//! first context change.
//!
//! ```text
//! cargo run --example run_trace
//! ```

use ctxfuse::gating::GateKind;
use ctxfuse::profile::default_profile;
use ctxfuse::runtime::{run_trace, RunParams, StepMode};
use ctxfuse::scenario::{generate_trace, parse_segments};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = default_profile();
    let trace = generate_trace(&parse_segments("motorway:60,fog:60")?, &profile, 11)?;
    let params = RunParams::new(&profile, GateKind::Estimator, 0.01, 11)?;
    let out = run_trace(&trace, &profile, &params)?;

    for r in out.records.iter().filter(|r| r.mode == StepMode::ContextId) {
        println!(
            "t={:>3} {:<9} -> {:<24} sensor {:.3} J, algo {:.3} J, switch {} J",
            r.t,
            r.context.as_str(),
            r.config_id,
            r.sensor_j,
            r.algo_j,
            r.switch_j
        );
    }
    let totals = out.ledger.totals();
    println!(
        "\n{} steps, {} switches: avg loss {:.4}, avg energy {:.4} J (sensors {:.1} J, algorithms {:.1} J)",
        out.summary.steps,
        out.summary.switch_count,
        out.summary.avg_loss,
        out.summary.avg_energy_j,
        totals.sensor_j,
        totals.algo_j
    );
    Ok(())
}
