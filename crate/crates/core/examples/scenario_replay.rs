//! Per-context energy and loss of the adaptive controller against the best static
//! configurations, on a trace written to and read back from JSONL.
//!
//! ```text
//! cargo run --release --example scenario_replay
//! ```

use ctxfuse::gating::GateKind;
use ctxfuse::profile::default_profile;
use ctxfuse::report::aggregate_by_context;
use ctxfuse::runtime::{average_records, run_static, run_trace, RunParams};
use ctxfuse::scenario::{generate_trace, parse_segments, SimulationTrace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = default_profile();
    let seed = 5;
    let trace = generate_trace(&parse_segments("city:90,fog:90,night:90,snow:90")?, &profile, seed)?;

    // traces are plain JSONL; round-trip to show the format is lossless
    let dir = std::env::temp_dir().join("ctxfuse-scenario-replay");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("trace.jsonl");
    trace.save(&path)?;
    let trace = SimulationTrace::load(&path)?;

    let params = RunParams::new(&profile, GateKind::Estimator, 0.01, seed)?;
    let adaptive = run_trace(&trace, &profile, &params)?;
    println!("adaptive (estimator gate, lambda_e = 0.01):");
    for row in aggregate_by_context(&adaptive.records) {
        println!(
            "  {:<9} loss {:.4}  energy {:.3} J  mostly {}",
            row.context.as_str(),
            row.avg_loss,
            row.avg_energy_j,
            row.top_config
        );
    }
    println!(
        "  overall   loss {:.4}  energy {:.3} J",
        adaptive.summary.avg_loss, adaptive.summary.avg_energy_j
    );

    println!("static configurations:");
    for id in ["cam_l", "cams", "lidar", "radar", "cam_l+cam_r+lidar+radar"] {
        let cfg = profile.configuration(id).ok_or("unknown configuration")?;
        let avg = average_records(&run_static(&trace, &profile, cfg, seed)?);
        println!("  {id:<24} loss {:.4}  energy {:.3} J", avg.avg_loss, avg.avg_energy_j);
    }
    Ok(())
}
