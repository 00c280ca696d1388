//! Sensor, algorithm and system energy per step, plus the run ledger.
//!
//! A sensor's step energy is its power draw integrated over the step. Clock gating
//! removes the measurement power only: spinning sensors keep their motor running so
//! they can be re-enabled quickly, fixed sensors draw nothing while gated.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::SystemProfile;
use crate::types::{Context, ModelConfiguration, SensorId, SensorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorActivation {
    Active,
    Gated,
}

/// How per-branch latencies combine into a configuration latency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatencyRule {
    /// Branches run back to back on one accelerator.
    #[default]
    Sequential,
    /// Branches run concurrently; the slowest one bounds the step.
    Parallel,
}

pub fn sensor_step_energy(
    sensor: &SensorSpec,
    activation: SensorActivation,
    step_duration_s: f64,
) -> f64 {
    debug_assert!(step_duration_s > 0.0);
    match activation {
        SensorActivation::Active => (sensor.p_meas + sensor.p_motor) * step_duration_s,
        SensorActivation::Gated if sensor.spinning => sensor.p_motor * step_duration_s,
        SensorActivation::Gated => 0.0,
    }
}

/// Energy of one sensor over one measurement period, `(P_meas + P_motor) / f`.
pub fn sensor_period_energy(sensor: &SensorSpec) -> f64 {
    (sensor.p_meas + sensor.p_motor) / sensor.freq_hz
}

/// Algorithm energy and latency of one inference of `config`.
///
/// A measured per-configuration override wins over branch composition.
pub fn algorithm_step_energy(
    config: &ModelConfiguration,
    profile: &SystemProfile,
) -> Result<(f64, f64)> {
    if config.is_empty() {
        return Err(Error::EmptyConfiguration);
    }
    let mut energy = 0.0;
    let mut latencies = Vec::with_capacity(config.len());
    for id in config.branches() {
        let b = profile
            .branch(id)
            .ok_or_else(|| Error::UnknownBranch(id.to_string()))?;
        energy += b.power_w * b.latency_s;
        latencies.push(b.latency_s);
    }
    if let Some(cost) = profile.config_override(config) {
        return Ok((cost.energy_j, cost.latency_s));
    }
    let latency = match profile.latency_rule() {
        LatencyRule::Sequential => latencies.iter().sum(),
        LatencyRule::Parallel => latencies.iter().copied().fold(0.0, f64::max),
    };
    Ok((energy, latency))
}

pub fn system_step_energy(sensor_j: f64, algorithm_j: f64, switch_j: f64) -> f64 {
    sensor_j + algorithm_j + switch_j
}

/// Sensor energy for one step given the set of active sensors; everything else is gated.
pub fn sensors_step_energy(
    profile: &SystemProfile,
    active: &BTreeSet<SensorId>,
    step_duration_s: f64,
) -> f64 {
    profile
        .sensors()
        .iter()
        .map(|s| {
            let act = if active.contains(&s.id) {
                SensorActivation::Active
            } else {
                SensorActivation::Gated
            };
            sensor_step_energy(s, act, step_duration_s)
        })
        .sum()
}

/// Algorithm energy of the most expensive configuration in the profile.
pub fn max_algorithm_energy(profile: &SystemProfile) -> Result<f64> {
    profile
        .configurations()
        .iter()
        .map(|c| algorithm_step_energy(c, profile).map(|(e, _)| e))
        .try_fold(0.0_f64, |acc, e| e.map(|e| acc.max(e)))
}

/// Energy charged on top of the selected configuration during a context-ID step.
pub fn context_id_overhead_j(profile: &SystemProfile) -> Result<f64> {
    match profile.spec().context_id_overhead_j {
        Some(v) => Ok(v),
        None => max_algorithm_energy(profile),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub t: usize,
    pub context: Context,
    pub config_id: String,
    pub sensor_j: f64,
    pub algo_j: f64,
    pub switch_j: f64,
    pub loss: f64,
    pub latency_s: f64,
}

impl LedgerEntry {
    pub fn system_j(&self) -> f64 {
        system_step_energy(self.sensor_j, self.algo_j, self.switch_j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyTotals {
    pub sensor_j: f64,
    pub algo_j: f64,
    pub switch_j: f64,
}

impl EnergyTotals {
    pub fn system_j(&self) -> f64 {
        system_step_energy(self.sensor_j, self.algo_j, self.switch_j)
    }
}

/// Per-step energy accounting for one run. Single writer.
#[derive(Debug, Clone, Default)]
pub struct EnergyLedger {
    entries: Vec<LedgerEntry>,
    totals: EnergyTotals,
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, entry: LedgerEntry) -> Result<()> {
        for (name, v) in [
            ("sensor_j", entry.sensor_j),
            ("algo_j", entry.algo_j),
            ("switch_j", entry.switch_j),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(
                    format!("ledger[{}].{name}", entry.t),
                    "energy must be finite and >= 0",
                ));
            }
        }
        self.totals.sensor_j += entry.sensor_j;
        self.totals.algo_j += entry.algo_j;
        self.totals.switch_j += entry.switch_j;
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn totals(&self) -> EnergyTotals {
        self.totals
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub const CSV_HEADER: [&'static str; 8] = [
        "t", "context", "config_id", "sensor_j", "algo_j", "switch_j", "loss", "latency_s",
    ];

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Config(format!("writing ledger CSV: {e}"));
        w.write_record(Self::CSV_HEADER).map_err(csv_err)?;
        for e in &self.entries {
            w.write_record([
                e.t.to_string(),
                e.context.to_string(),
                e.config_id.clone(),
                e.sensor_j.to_string(),
                e.algo_j.to_string(),
                e.switch_j.to_string(),
                e.loss.to_string(),
                e.latency_s.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<ledger>", e))?;
        Ok(())
    }
}
