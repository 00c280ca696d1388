//! Plugging a custom context-identification schedule into the controller: identify
//! often at first, then back off exponentially.
//!
//! ```text
//! cargo run --example interval_policy
//! ```

use ctxfuse::gating::{build_gate, GateKind};
use ctxfuse::profile::default_profile;
use ctxfuse::runtime::{run_trace, run_trace_with, IntervalPolicy, RunParams};
use ctxfuse::scenario::{generate_trace, parse_segments, step_rng, streams};

/// Doubles the gap after every identification, within `min_gap..=max_gap`.
struct Backoff {
    next: usize,
    gap: usize,
    min_gap: usize,
    max_gap: usize,
}

impl IntervalPolicy for Backoff {
    fn is_context_id_step(&mut self, t: usize) -> bool {
        if t < self.next {
            return false;
        }
        self.gap = (self.gap * 2).clamp(self.min_gap, self.max_gap);
        self.next = t + self.gap;
        true
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = default_profile();
    let seed = 3;
    let trace = generate_trace(&parse_segments("city:200,rain:200")?, &profile, seed)?;
    let params = RunParams::new(&profile, GateKind::Estimator, 0.01, seed)?;

    let constant = run_trace(&trace, &profile, &params)?;
    let gate = build_gate(params.gate, &profile, step_rng(seed, 0, streams::GATE))?;
    let policy = Backoff {
        next: 0,
        gap: 0,
        min_gap: 5,
        max_gap: 80,
    };
    let backoff = run_trace_with(&trace, &profile, &params, gate, Box::new(policy))?;

    for (name, out) in [("constant T_c = 30", &constant), ("backoff 5..80", &backoff)] {
        println!(
            "{name:<18} {:>3} identifications, loss {:.4}, energy {:.4} J",
            out.summary.context_id_steps, out.summary.avg_loss, out.summary.avg_energy_j
        );
    }
    Ok(())
}
