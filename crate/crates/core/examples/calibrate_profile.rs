//! Monte Carlo calibration of a profile's loss priors.
//!
//! Estimates every configuration's mean loss per context on frames drawn with a
//! calibration seed, prints the best configurations per context and the energy/loss
//! trend of the estimator gate on the bundled scenario.
//!
//! ```text
//! cargo run --release --example calibrate_profile
//! cargo run --release --example calibrate_profile -- --write crates/core/data/radiate-table1.json
//! ```

use std::collections::BTreeMap;

use ctxfuse::gating::GateKind;
use ctxfuse::optimizer::{expected_energy_map, pareto_sweep};
use ctxfuse::profile::{default_profile, SystemProfile};
use ctxfuse::report::aggregate_by_context;
use ctxfuse::runtime::{run_trace, RunParams};
use ctxfuse::scenario::{bundled_scenario, calibrate_config_priors, BUNDLED_SCENARIO_SEED};
use ctxfuse::types::{Context, ModelConfiguration};

const CALIBRATION_SEED: u64 = 7;
const FRAMES_PER_CONTEXT: usize = 400;

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let write_to = args
        .iter()
        .position(|a| a == "--write")
        .and_then(|i| args.get(i + 1).cloned());

    let base = default_profile();
    let priors = calibrate_config_priors(&base, &Context::BUILTIN, FRAMES_PER_CONTEXT, CALIBRATION_SEED)?;
    let priors: BTreeMap<String, BTreeMap<Context, f64>> = priors
        .into_iter()
        .map(|(id, t)| (id, t.into_iter().map(|(c, v)| (c, round4(v))).collect()))
        .collect();

    let profile = base.with_spec(|spec| {
        for b in &mut spec.branches {
            let single = ModelConfiguration::new([b.id.clone()]).expect("non-empty");
            if let Some(t) = priors.get(single.id()) {
                b.loss_profile = t.clone();
            }
        }
        spec.config_priors = priors.clone();
    })?;

    let energy = expected_energy_map(&profile)?;
    for ctx in Context::BUILTIN.iter() {
        let mut ranked: Vec<(&String, f64)> = priors.iter().map(|(id, t)| (id, t[ctx])).collect();
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
        println!("{ctx}:");
        for (id, loss) in ranked.iter().take(5) {
            println!("  {loss:>7.4}  {:>6.3} J  {id}", energy[*id]);
        }
        for single in ["cam_l", "cams", "lidar", "radar", "radar_lidar", "cams_lidar"] {
            print!("  {single}={:.3}", priors[single][ctx]);
        }
        println!();
    }

    let trace = bundled_scenario(&profile)?;
    let base_params = RunParams::new(&profile, GateKind::Estimator, 0.0, BUNDLED_SCENARIO_SEED)?;
    let points = pareto_sweep(&trace, &profile, GateKind::Estimator, &[0.0, 0.01, 1.0], &base_params)?;
    for p in &points {
        println!(
            "lambda_e={:<5} loss={:.4} energy={:.4} J",
            p.lambda_e, p.avg_loss, p.avg_energy_j
        );
    }
    for lambda in [0.0, 0.01] {
        let params = RunParams::new(&profile, GateKind::Estimator, lambda, BUNDLED_SCENARIO_SEED)?;
        let out = run_trace(&trace, &profile, &params)?;
        println!("lambda_e={lambda}: switches={}", out.summary.switch_count);
        for row in aggregate_by_context(&out.records) {
            println!(
                "  {:<9} loss={:.4} energy={:.3} J  top={}",
                row.context, row.avg_loss, row.avg_energy_j, row.top_config
            );
        }
    }
    let (l0, l1) = (&points[0], &points[1]);
    println!(
        "energy reduction {:.1}%, loss change {:+.1}%",
        100.0 * (1.0 - l1.avg_energy_j / l0.avg_energy_j),
        100.0 * (l1.avg_loss / l0.avg_loss - 1.0)
    );

    if let Some(path) = write_to {
        write_profile(&profile, &path)?;
        println!("wrote {path}");
    }
    Ok(())
}

fn write_profile(profile: &SystemProfile, path: &str) -> std::io::Result<()> {
    std::fs::write(path, profile.to_json_pretty() + "\n")
}
