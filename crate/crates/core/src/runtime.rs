//! The runtime controller.
//!
//! Most steps are fusion steps: only the active configuration's sensors and branches
//! run, the rest are clock gated. Every `t_c` steps (and at `t = 0`) a context-ID step
//! powers everything, asks the gate for per-configuration loss estimates, filters the
//! candidates, picks the joint-loss minimizer and gates whatever it does not need.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::energy::{
    algorithm_step_energy, context_id_overhead_j, sensors_step_energy, system_step_energy,
    EnergyLedger, LedgerEntry, SensorActivation,
};
use crate::error::{Error, Result};
use crate::gating::{build_gate, select_candidates, Gate, GateInput, GateKind};
use crate::optimizer::{expected_energy_map, normalize_over, select_config, JointWeights};
use crate::profile::SystemProfile;
use crate::scenario::{config_loss, frame_detections, step_rng, streams, true_config_losses, SimulationTrace, TraceStep};
use crate::types::{BranchId, Context, DetectionSet, ModelConfiguration, SensorId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    Fusion,
    ContextId,
}

impl StepMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepMode::Fusion => "fusion",
            StepMode::ContextId => "context_id",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub mode: StepMode,
    pub context: Context,
    pub config_id: String,
    pub loss: f64,
    pub sensor_j: f64,
    pub algo_j: f64,
    pub switch_j: f64,
    pub latency_s: f64,
}

impl StepRecord {
    pub fn system_j(&self) -> f64 {
        system_step_energy(self.sensor_j, self.algo_j, self.switch_j)
    }
}

/// Decides which steps identify the context.
pub trait IntervalPolicy: Send {
    fn is_context_id_step(&mut self, t: usize) -> bool;
}

/// Context identification every `t_c` steps, starting at `t = 0`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantInterval(usize);

impl ConstantInterval {
    pub fn new(t_c: usize) -> Result<Self> {
        if t_c == 0 {
            return Err(Error::invalid("t_c", "must be >= 1"));
        }
        Ok(ConstantInterval(t_c))
    }
}

impl IntervalPolicy for ConstantInterval {
    fn is_context_id_step(&mut self, t: usize) -> bool {
        t.is_multiple_of(self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunParams {
    pub gate: GateKind,
    pub weights: JointWeights,
    pub gamma: f64,
    pub t_c: usize,
    pub seed: u64,
}

impl RunParams {
    /// Profile defaults for gamma, with `t_c = 30`.
    pub fn new(profile: &SystemProfile, gate: GateKind, lambda_e: f64, seed: u64) -> Result<Self> {
        Ok(RunParams {
            gate,
            weights: JointWeights::new(lambda_e)?,
            gamma: profile.optimizer_params().gamma,
            t_c: DEFAULT_T_C,
            seed,
        })
    }
}

pub const DEFAULT_T_C: usize = 30;

/// Mutable controller state for one run.
#[derive(Debug, Clone)]
pub struct ControllerState {
    pub t: usize,
    pub active_config: Option<ModelConfiguration>,
    pub sensor_activations: BTreeMap<SensorId, SensorActivation>,
}

impl ControllerState {
    /// Before the first context-ID step everything is powered.
    pub fn new(profile: &SystemProfile) -> Self {
        ControllerState {
            t: 0,
            active_config: None,
            sensor_activations: profile
                .sensors()
                .iter()
                .map(|s| (s.id.clone(), SensorActivation::Active))
                .collect(),
        }
    }

    /// Activates the sensors `config` needs and gates the others. Idempotent.
    pub fn apply_gating(&mut self, profile: &SystemProfile, config: &ModelConfiguration) -> Result<()> {
        let needed = profile.required_sensors(config)?;
        for s in profile.sensors() {
            let act = if needed.contains(&s.id) {
                SensorActivation::Active
            } else {
                SensorActivation::Gated
            };
            self.sensor_activations.insert(s.id.clone(), act);
        }
        self.active_config = Some(config.clone());
        Ok(())
    }

    pub fn active_sensors(&self) -> BTreeSet<SensorId> {
        self.sensor_activations
            .iter()
            .filter(|(_, a)| **a == SensorActivation::Active)
            .map(|(s, _)| s.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub gate: GateKind,
    pub lambda_e: f64,
    pub gamma: f64,
    pub t_c: usize,
    pub seed: u64,
    pub steps: usize,
    pub context_id_steps: usize,
    pub switch_count: usize,
    pub avg_loss: f64,
    pub avg_energy_j: f64,
    pub avg_latency_s: f64,
    pub total_energy_j: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<StepRecord>,
    pub ledger: EnergyLedger,
    pub summary: RunSummary,
}

/// Averages over step records, in step order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepAverages {
    pub steps: usize,
    pub avg_loss: f64,
    pub avg_energy_j: f64,
    pub avg_latency_s: f64,
    pub total_energy_j: f64,
}

pub fn average_records<'a>(records: impl IntoIterator<Item = &'a StepRecord>) -> StepAverages {
    let (mut n, mut loss, mut energy, mut latency) = (0usize, 0.0, 0.0, 0.0);
    for r in records {
        n += 1;
        loss += r.loss;
        energy += r.system_j();
        latency += r.latency_s;
    }
    let d = n.max(1) as f64;
    StepAverages {
        steps: n,
        avg_loss: loss / d,
        avg_energy_j: energy / d,
        avg_latency_s: latency / d,
        total_energy_j: energy,
    }
}

pub struct Controller<'p> {
    profile: &'p SystemProfile,
    state: ControllerState,
    gate: Box<dyn Gate>,
    weights: JointWeights,
    gamma: f64,
    interval: Box<dyn IntervalPolicy>,
    expected_energy: BTreeMap<String, f64>,
    context_id_overhead_j: f64,
    ledger: EnergyLedger,
    records: Vec<StepRecord>,
    switch_count: usize,
    context_id_steps: usize,
    // loss observed under the active configuration since the last context-ID step
    pending: Option<(String, f64, usize)>,
}

impl<'p> Controller<'p> {
    pub fn new(
        profile: &'p SystemProfile,
        gate: Box<dyn Gate>,
        weights: JointWeights,
        gamma: f64,
        interval: Box<dyn IntervalPolicy>,
    ) -> Result<Self> {
        if gamma.is_nan() || gamma < 0.0 {
            return Err(Error::invalid("gamma", "must be >= 0"));
        }
        Ok(Controller {
            profile,
            state: ControllerState::new(profile),
            gate,
            weights,
            gamma,
            interval,
            expected_energy: expected_energy_map(profile)?,
            context_id_overhead_j: context_id_overhead_j(profile)?,
            ledger: EnergyLedger::new(),
            records: Vec::new(),
            switch_count: 0,
            context_id_steps: 0,
            pending: None,
        })
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn expected_energy(&self) -> &BTreeMap<String, f64> {
        &self.expected_energy
    }

    pub fn switch_count(&self) -> usize {
        self.switch_count
    }

    /// Runs one step in whichever mode the interval policy dictates.
    pub fn step(&mut self, step: &TraceStep, frame: &BTreeMap<BranchId, DetectionSet>) -> Result<StepRecord> {
        // the policy sees every step, including a forced first identification
        let scheduled = self.interval.is_context_id_step(step.t);
        if scheduled || self.state.active_config.is_none() {
            self.run_context_id_step(step, frame)
        } else {
            self.run_fusion_step(step, frame)
        }
    }

    pub fn run_fusion_step(
        &mut self,
        step: &TraceStep,
        frame: &BTreeMap<BranchId, DetectionSet>,
    ) -> Result<StepRecord> {
        let config = self
            .state
            .active_config
            .clone()
            .ok_or_else(|| Error::Config("fusion step without an active configuration".into()))?;
        let sensor_j = sensors_step_energy(
            self.profile,
            &self.state.active_sensors(),
            self.profile.step_duration_s(),
        );
        let (algo_j, latency_s) = algorithm_step_energy(&config, self.profile)?;
        let (loss, _) = config_loss(self.profile, &config, frame, &step.ground_truth)?;
        self.accumulate(&config, loss);
        self.finish_step(StepRecord {
            t: step.t,
            mode: StepMode::Fusion,
            context: step.context.clone(),
            config_id: config.id().to_owned(),
            loss,
            sensor_j,
            algo_j,
            switch_j: 0.0,
            latency_s,
        })
    }

    pub fn run_context_id_step(
        &mut self,
        step: &TraceStep,
        frame: &BTreeMap<BranchId, DetectionSet>,
    ) -> Result<StepRecord> {
        let profile = self.profile;
        if let Some((id, sum, n)) = self.pending.take() {
            self.gate.observe(&id, sum / n as f64);
        }

        let all_sensors: BTreeSet<SensorId> = profile.sensors().iter().map(|s| s.id.clone()).collect();
        let sensor_j = sensors_step_energy(profile, &all_sensors, profile.step_duration_s());

        let truth = if self.gate.needs_true_losses() {
            Some(true_config_losses(profile, frame, &step.ground_truth)?)
        } else {
            None
        };
        let estimates = self.gate.estimate(&GateInput {
            t: step.t,
            context: &step.context,
            true_losses: truth.as_ref(),
        })?;
        estimates.check_covers(profile.configurations())?;
        let candidates = select_candidates(&estimates, self.gamma)?;
        let chosen = if profile.optimizer_params().normalize {
            let (e, en) = normalize_over(&candidates, &estimates, &self.expected_energy)?;
            select_config(&candidates, &e, &en, self.weights)?
        } else {
            select_config(&candidates, &estimates, &self.expected_energy, self.weights)?
        };
        let config = profile
            .configuration(&chosen)
            .cloned()
            .ok_or_else(|| Error::MissingConfiguration(chosen.clone()))?;

        let changed = self
            .state
            .active_config
            .as_ref()
            .is_some_and(|prev| prev != &config);
        let (mut algo_j, mut latency_s) = algorithm_step_energy(&config, profile)?;
        algo_j += self.context_id_overhead_j;
        let switch_j = if changed {
            self.switch_count += 1;
            latency_s += profile.switch_overhead_s();
            profile.switch_overhead_j()
        } else {
            0.0
        };

        let (loss, _) = config_loss(profile, &config, frame, &step.ground_truth)?;
        self.state.apply_gating(profile, &config)?;
        self.context_id_steps += 1;
        self.accumulate(&config, loss);
        self.finish_step(StepRecord {
            t: step.t,
            mode: StepMode::ContextId,
            context: step.context.clone(),
            config_id: config.id().to_owned(),
            loss,
            sensor_j,
            algo_j,
            switch_j,
            latency_s,
        })
    }

    fn accumulate(&mut self, config: &ModelConfiguration, loss: f64) {
        match &mut self.pending {
            Some((id, sum, n)) if id == config.id() => {
                *sum += loss;
                *n += 1;
            }
            _ => self.pending = Some((config.id().to_owned(), loss, 1)),
        }
    }

    fn finish_step(&mut self, record: StepRecord) -> Result<StepRecord> {
        self.ledger.record(LedgerEntry {
            t: record.t,
            context: record.context.clone(),
            config_id: record.config_id.clone(),
            sensor_j: record.sensor_j,
            algo_j: record.algo_j,
            switch_j: record.switch_j,
            loss: record.loss,
            latency_s: record.latency_s,
        })?;
        self.state.t = record.t + 1;
        self.records.push(record.clone());
        Ok(record)
    }

    pub fn finish(self, params: &RunParams) -> RunOutput {
        let avg = average_records(&self.records);
        let summary = RunSummary {
            gate: self.gate.kind(),
            lambda_e: self.weights.lambda_e(),
            gamma: self.gamma,
            t_c: params.t_c,
            seed: params.seed,
            steps: avg.steps,
            context_id_steps: self.context_id_steps,
            switch_count: self.switch_count,
            avg_loss: avg.avg_loss,
            avg_energy_j: avg.avg_energy_j,
            avg_latency_s: avg.avg_latency_s,
            total_energy_j: avg.total_energy_j,
        };
        RunOutput {
            records: self.records,
            ledger: self.ledger,
            summary,
        }
    }
}

/// Runs the controller over a whole trace with a constant re-identification interval.
pub fn run_trace(trace: &SimulationTrace, profile: &SystemProfile, params: &RunParams) -> Result<RunOutput> {
    let gate = build_gate(params.gate, profile, step_rng(params.seed, 0, streams::GATE))?;
    run_trace_with(trace, profile, params, gate, Box::new(ConstantInterval::new(params.t_c)?))
}

/// Like [`run_trace`] with a caller-supplied gate and interval policy.
pub fn run_trace_with(
    trace: &SimulationTrace,
    profile: &SystemProfile,
    params: &RunParams,
    gate: Box<dyn Gate>,
    interval: Box<dyn IntervalPolicy>,
) -> Result<RunOutput> {
    if trace.is_empty() {
        return Err(Error::invalid("trace", "must contain at least one step"));
    }
    let mut ctl = Controller::new(profile, gate, params.weights, params.gamma, interval)?;
    for step in trace.steps() {
        let frame = frame_detections(profile, step, params.seed);
        ctl.step(step, &frame)?;
    }
    Ok(ctl.finish(params))
}

/// Replays one fixed configuration over the trace: no context identification, no
/// switching, unused sensors gated throughout.
pub fn run_static(
    trace: &SimulationTrace,
    profile: &SystemProfile,
    config: &ModelConfiguration,
    seed: u64,
) -> Result<Vec<StepRecord>> {
    let mut state = ControllerState::new(profile);
    state.apply_gating(profile, config)?;
    let active = state.active_sensors();
    let sensor_j = sensors_step_energy(profile, &active, profile.step_duration_s());
    let (algo_j, latency_s) = algorithm_step_energy(config, profile)?;
    trace
        .steps()
        .iter()
        .map(|step| {
            let frame = frame_detections(profile, step, seed);
            let (loss, _) = config_loss(profile, config, &frame, &step.ground_truth)?;
            Ok(StepRecord {
                t: step.t,
                mode: StepMode::Fusion,
                context: step.context.clone(),
                config_id: config.id().to_owned(),
                loss,
                sensor_j,
                algo_j,
                switch_j: 0.0,
                latency_s,
            })
        })
        .collect()
}
