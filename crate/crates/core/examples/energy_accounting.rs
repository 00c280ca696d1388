//! Per-step sensor, algorithm and system energy for every configuration of the
//! bundled profile, with unused sensors clock gated.
//!
//! ```text
//! cargo run --example energy_accounting
//! ```

use ctxfuse::energy::{algorithm_step_energy, sensor_period_energy, sensor_step_energy, SensorActivation};
use ctxfuse::optimizer::expected_config_energy;
use ctxfuse::profile::default_profile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = default_profile();
    let dt = profile.step_duration_s();

    println!("sensor     active J/step  gated J/step  J/period");
    for s in profile.sensors() {
        println!(
            "{:<10} {:>13.4} {:>13.4} {:>9.4}",
            s.id,
            sensor_step_energy(s, SensorActivation::Active, dt),
            sensor_step_energy(s, SensorActivation::Gated, dt),
            sensor_period_energy(s),
        );
    }

    let mut rows = Vec::new();
    for cfg in profile.configurations() {
        let (algo, latency) = algorithm_step_energy(cfg, &profile)?;
        let total = expected_config_energy(cfg, &profile, 1)?;
        rows.push((total, algo, latency, cfg.id().to_owned()));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.3.cmp(&b.3)));
    println!("\ncheapest and most expensive of {} configurations:", rows.len());
    for (total, algo, latency, id) in rows.iter().take(5).chain(rows.iter().rev().take(3)) {
        println!("{total:>7.4} J  (algo {algo:.4} J, {:.1} ms)  {id}", latency * 1e3);
    }
    Ok(())
}
