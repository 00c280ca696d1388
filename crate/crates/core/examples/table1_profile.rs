//! The bundled profile's reference table next to the simulator's own per-configuration
//! cost model.
//!
//! ```text
//! cargo run --example table1_profile
//! ```

use ctxfuse::energy::algorithm_step_energy;
use ctxfuse::optimizer::expected_config_energy;
use ctxfuse::profile::{ProfileDataset, SystemProfile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = ProfileDataset::load(ProfileDataset::DEFAULT)?;
    println!("{} ({} configurations)", profile.name(), profile.configurations().len());
    println!("\nfusion  configuration  avg loss  energy J  latency ms | sim J/step  sim ms  config");
    for row in profile.reference() {
        let cfg = profile
            .configuration(&row.config_id)
            .ok_or("reference row names an unknown configuration")?;
        let (_, latency) = algorithm_step_energy(cfg, &profile)?;
        println!(
            "{:<7} {:<14} {:>8} {:>9} {:>11} | {:>10.4} {:>7.1}  {}",
            row.fusion_type,
            row.configuration,
            row.avg_loss,
            row.energy_j,
            row.latency_ms,
            expected_config_energy(cfg, &profile, 1)?,
            latency * 1e3,
            row.config_id
        );
    }
    let json = profile.to_json_pretty();
    let reparsed = SystemProfile::from_json_str(&json, "round-trip")?;
    println!("\nround-trips through JSON: {}", reparsed.spec() == profile.spec());
    Ok(())
}
