//! Joint energy/performance selection over the candidate set and the `lambda_e` sweep.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{algorithm_step_energy, sensors_step_energy};
use crate::error::{Error, Result};
use crate::gating::{GateEstimate, GateKind};
use crate::profile::SystemProfile;
use crate::runtime::{run_trace, RunParams};
use crate::scenario::SimulationTrace;
use crate::types::ModelConfiguration;

/// Preference for energy over detection loss, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointWeights {
    lambda_e: f64,
}

impl JointWeights {
    pub fn new(lambda_e: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda_e) {
            return Err(Error::invalid("lambda_e", format!("{lambda_e} is outside [0, 1]")));
        }
        Ok(JointWeights { lambda_e })
    }

    pub fn lambda_e(&self) -> f64 {
        self.lambda_e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerParams {
    /// Candidate margin over the best estimated loss.
    pub gamma: f64,
    /// Min-max normalize losses and energies over the candidates before weighting.
    pub normalize: bool,
    pub horizon_steps: usize,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        OptimizerParams {
            gamma: 0.1,
            normalize: false,
            horizon_steps: 1,
        }
    }
}

impl OptimizerParams {
    pub fn validate(&self) -> Result<()> {
        if self.gamma.is_nan() || self.gamma < 0.0 {
            return Err(Error::invalid("optimizer.gamma", "must be >= 0"));
        }
        if self.horizon_steps == 0 {
            return Err(Error::invalid("optimizer.horizon_steps", "must be >= 1"));
        }
        Ok(())
    }
}

pub fn joint_loss(loss: f64, energy_j: f64, weights: JointWeights) -> f64 {
    loss * (1.0 - weights.lambda_e) + energy_j * weights.lambda_e
}

/// Picks the candidate with the lowest joint loss.
///
/// Ties go to the lower expected energy, then to the smaller canonical id.
pub fn select_config(
    candidates: &[String],
    estimates: &GateEstimate,
    expected_energy: &BTreeMap<String, f64>,
    weights: JointWeights,
) -> Result<String> {
    if candidates.is_empty() {
        return Err(Error::Config("candidate set is empty".into()));
    }
    let mut best: Option<(f64, f64, &str)> = None;
    for id in candidates {
        let loss = estimates
            .get(id)
            .ok_or_else(|| Error::MissingConfiguration(id.clone()))?;
        let energy = *expected_energy
            .get(id)
            .ok_or_else(|| Error::MissingConfiguration(id.clone()))?;
        let key = (joint_loss(loss, energy, weights), energy, id.as_str());
        let better = match best {
            None => true,
            Some(b) => key
                .0
                .total_cmp(&b.0)
                .then(key.1.total_cmp(&b.1))
                .then(key.2.cmp(b.2))
                .is_lt(),
        };
        if better {
            best = Some(key);
        }
    }
    Ok(best.map(|b| b.2.to_owned()).expect("non-empty candidates"))
}

/// Min-max rescales estimates and energies over the candidate set to `[0, 1]`.
/// A constant column maps to 0.
pub fn normalize_over(
    candidates: &[String],
    estimates: &GateEstimate,
    expected_energy: &BTreeMap<String, f64>,
) -> Result<(GateEstimate, BTreeMap<String, f64>)> {
    let mut losses = Vec::with_capacity(candidates.len());
    let mut energies = Vec::with_capacity(candidates.len());
    for id in candidates {
        losses.push(
            estimates
                .get(id)
                .ok_or_else(|| Error::MissingConfiguration(id.clone()))?,
        );
        energies.push(
            *expected_energy
                .get(id)
                .ok_or_else(|| Error::MissingConfiguration(id.clone()))?,
        );
    }
    let scale = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        v.iter()
            .map(|x| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 })
            .collect::<Vec<_>>()
    };
    let (nl, ne) = (scale(&losses), scale(&energies));
    let est = candidates.iter().cloned().zip(nl).collect();
    let en = candidates.iter().cloned().zip(ne).collect();
    Ok((est, en))
}

/// Expected per-step system energy of running `config` for `horizon_steps` steps,
/// with every sensor it does not need gated.
pub fn expected_config_energy(
    config: &ModelConfiguration,
    profile: &SystemProfile,
    horizon_steps: usize,
) -> Result<f64> {
    if horizon_steps == 0 {
        return Err(Error::invalid("horizon_steps", "must be >= 1"));
    }
    let active = profile.required_sensors(config)?;
    let (algo, _) = algorithm_step_energy(config, profile)?;
    let per_step = sensors_step_energy(profile, &active, profile.step_duration_s()) + algo;
    // powers are stationary, so the horizon total is per_step * horizon
    let total = per_step * horizon_steps as f64;
    Ok(total / horizon_steps as f64)
}

/// Expected energy of every configuration in the profile, keyed by id.
pub fn expected_energy_map(profile: &SystemProfile) -> Result<BTreeMap<String, f64>> {
    let horizon = profile.optimizer_params().horizon_steps;
    profile
        .configurations()
        .iter()
        .map(|c| Ok((c.id().to_owned(), expected_config_energy(c, profile, horizon)?)))
        .collect()
}

/// One point of an energy-versus-loss sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub lambda_e: f64,
    pub gate: GateKind,
    pub avg_loss: f64,
    pub avg_energy_j: f64,
    pub avg_latency_s: f64,
}

/// Runs the controller once per `(gate, lambda)` pair with identical seeds.
///
/// Runs execute in parallel; results come back gate-major in input order.
pub fn pareto_sweep_gates(
    trace: &SimulationTrace,
    profile: &SystemProfile,
    gates: &[GateKind],
    lambdas: &[f64],
    base: &RunParams,
) -> Result<Vec<ParetoPoint>> {
    if lambdas.is_empty() {
        return Err(Error::invalid("lambdas", "at least one value is required"));
    }
    if gates.is_empty() {
        return Err(Error::invalid("gates", "at least one gate is required"));
    }
    let jobs: Vec<(GateKind, JointWeights)> = gates
        .iter()
        .flat_map(|g| lambdas.iter().map(move |l| (*g, *l)))
        .map(|(g, l)| Ok((g, JointWeights::new(l)?)))
        .collect::<Result<_>>()?;
    jobs.par_iter()
        .map(|(gate, weights)| {
            let params = RunParams {
                gate: *gate,
                weights: *weights,
                ..base.clone()
            };
            let out = run_trace(trace, profile, &params)?;
            Ok(ParetoPoint {
                lambda_e: weights.lambda_e(),
                gate: *gate,
                avg_loss: out.summary.avg_loss,
                avg_energy_j: out.summary.avg_energy_j,
                avg_latency_s: out.summary.avg_latency_s,
            })
        })
        .collect()
}

pub fn pareto_sweep(
    trace: &SimulationTrace,
    profile: &SystemProfile,
    gate: GateKind,
    lambdas: &[f64],
    base: &RunParams,
) -> Result<Vec<ParetoPoint>> {
    pareto_sweep_gates(trace, profile, &[gate], lambdas, base)
}
