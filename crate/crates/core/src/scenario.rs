//! Simulation traces: generation, synthetic branch detections, per-configuration
//! ground-truth losses and the JSONL trace format.
//!
//! Branch detections are a stand-in for running the detectors: every ground-truth
//! object is dropped, jittered or kept according to a per-(modality, context)
//! degradation table, and spurious boxes are added. All randomness is drawn from
//! streams keyed by `(seed, t, stream)`, so a branch's detections at a step do not
//! depend on which other branches or configurations are evaluated.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{detection_loss, weighted_boxes_fusion};
use crate::profile::{SystemProfile, SCHEMA_VERSION};
use crate::types::{
    BBox, BranchId, BranchSpec, Context, Detection, DetectionSet, Modality, ModelConfiguration, SensorId,
};

/// Per-(modality, context) sensing quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationParams {
    /// Std-dev of coordinate jitter as a fraction of box width/height.
    pub box_noise_sigma: f64,
    pub miss_prob: f64,
    /// Expected spurious detections per frame.
    pub false_pos_rate: f64,
    pub conf_scale: f64,
}

impl DegradationParams {
    pub const NONE: DegradationParams = DegradationParams {
        box_noise_sigma: 0.0,
        miss_prob: 0.0,
        false_pos_rate: 0.0,
        conf_scale: 1.0,
    };

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.box_noise_sigma >= 0.0 && self.box_noise_sigma.is_finite()) {
            return Err(Error::invalid(format!("{field}.box_noise_sigma"), "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.miss_prob) {
            return Err(Error::invalid(format!("{field}.miss_prob"), "must lie in [0, 1]"));
        }
        if !(self.false_pos_rate >= 0.0 && self.false_pos_rate.is_finite()) {
            return Err(Error::invalid(format!("{field}.false_pos_rate"), "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.conf_scale) {
            return Err(Error::invalid(format!("{field}.conf_scale"), "must lie in [0, 1]"));
        }
        Ok(())
    }
}

impl Default for DegradationParams {
    fn default() -> Self {
        DegradationParams::NONE
    }
}

/// How a multi-sensor branch combines the degradations of its modalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionPolicy {
    /// Element-wise best of the members.
    #[default]
    Best,
    Mean,
    /// Element-wise worst of the members.
    Worst,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DegradationModel {
    pub policy: FusionPolicy,
    /// Used for (modality, context) pairs missing from `table`.
    pub default: DegradationParams,
    pub table: BTreeMap<Modality, BTreeMap<Context, DegradationParams>>,
    /// Branch-specific parameters that replace the policy result.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub branch_overrides: BTreeMap<BranchId, BTreeMap<Context, DegradationParams>>,
}

impl DegradationModel {
    pub fn uniform(params: DegradationParams) -> Self {
        DegradationModel {
            default: params,
            ..DegradationModel::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.default.validate("degradation.default")?;
        for (m, row) in &self.table {
            for (c, p) in row {
                p.validate(&format!("degradation.table.{m}.{c}"))?;
            }
        }
        for (b, row) in &self.branch_overrides {
            for (c, p) in row {
                p.validate(&format!("degradation.branch_overrides.{b}.{c}"))?;
            }
        }
        Ok(())
    }

    pub fn params(&self, modality: Modality, context: &Context) -> DegradationParams {
        self.table
            .get(&modality)
            .and_then(|row| row.get(context))
            .copied()
            .unwrap_or(self.default)
    }

    /// Effective parameters of a branch over the given member modalities.
    pub fn effective(
        &self,
        branch: &BranchId,
        modalities: &BTreeSet<Modality>,
        context: &Context,
    ) -> DegradationParams {
        if let Some(p) = self.branch_overrides.get(branch).and_then(|r| r.get(context)) {
            return *p;
        }
        let members: Vec<DegradationParams> =
            modalities.iter().map(|m| self.params(*m, context)).collect();
        combine(&members, self.policy)
    }
}

fn combine(members: &[DegradationParams], policy: FusionPolicy) -> DegradationParams {
    let Some(first) = members.first() else {
        return DegradationParams::NONE;
    };
    match policy {
        FusionPolicy::Best => members.iter().skip(1).fold(*first, |a, b| DegradationParams {
            box_noise_sigma: a.box_noise_sigma.min(b.box_noise_sigma),
            miss_prob: a.miss_prob.min(b.miss_prob),
            false_pos_rate: a.false_pos_rate.min(b.false_pos_rate),
            conf_scale: a.conf_scale.max(b.conf_scale),
        }),
        FusionPolicy::Worst => members.iter().skip(1).fold(*first, |a, b| DegradationParams {
            box_noise_sigma: a.box_noise_sigma.max(b.box_noise_sigma),
            miss_prob: a.miss_prob.max(b.miss_prob),
            false_pos_rate: a.false_pos_rate.max(b.false_pos_rate),
            conf_scale: a.conf_scale.min(b.conf_scale),
        }),
        FusionPolicy::Mean => {
            let n = members.len() as f64;
            let mean = |f: fn(&DegradationParams) -> f64| members.iter().map(f).sum::<f64>() / n;
            DegradationParams {
                box_noise_sigma: mean(|p| p.box_noise_sigma),
                miss_prob: mean(|p| p.miss_prob),
                false_pos_rate: mean(|p| p.false_pos_rate),
                conf_scale: mean(|p| p.conf_scale),
            }
        }
    }
}

/// Ground-truth object distribution: Poisson count, uniform boxes inside the frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectDistribution {
    pub mean_per_frame: f64,
    pub frame_width: f64,
    pub frame_height: f64,
    pub min_side: f64,
    pub max_side: f64,
    pub num_classes: u32,
}

impl Default for ObjectDistribution {
    fn default() -> Self {
        ObjectDistribution {
            mean_per_frame: 3.0,
            frame_width: 640.0,
            frame_height: 480.0,
            min_side: 16.0,
            max_side: 160.0,
            num_classes: 3,
        }
    }
}

impl ObjectDistribution {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_per_frame >= 0.0 && self.mean_per_frame.is_finite()) {
            return Err(Error::invalid("objects.mean_per_frame", "must be >= 0"));
        }
        if !(self.min_side > 0.0 && self.min_side <= self.max_side) {
            return Err(Error::invalid("objects.min_side", "must satisfy 0 < min_side <= max_side"));
        }
        if self.max_side > self.frame_width || self.max_side > self.frame_height {
            return Err(Error::invalid("objects.max_side", "must fit inside the frame"));
        }
        if self.num_classes == 0 {
            return Err(Error::invalid("objects.num_classes", "must be >= 1"));
        }
        Ok(())
    }

    fn sample_box<R: Rng>(&self, rng: &mut R) -> BBox {
        let w = rng.random_range(self.min_side..=self.max_side);
        let h = rng.random_range(self.min_side..=self.max_side);
        let x1 = rng.random_range(0.0..=self.frame_width - w);
        let y1 = rng.random_range(0.0..=self.frame_height - h);
        BBox::new(x1, y1, x1 + w, y1 + h)
    }

    fn sample_count<R: Rng>(&self, rng: &mut R) -> usize {
        poisson(self.mean_per_frame, rng)
    }

    pub fn sample_frame<R: Rng>(&self, rng: &mut R) -> DetectionSet {
        let n = self.sample_count(rng);
        (0..n)
            .map(|_| {
                let bbox = self.sample_box(rng);
                let class_id = rng.random_range(0..self.num_classes);
                Detection {
                    class_id,
                    bbox,
                    confidence: 1.0,
                }
            })
            .collect()
    }
}

fn poisson<R: Rng>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    let v: f64 = d.sample(rng);
    v as usize
}

/// Random streams used by the simulator.
pub mod streams {
    pub const GROUND_TRUTH: u64 = u64::MAX;
    pub const GATE: u64 = u64::MAX - 1;

    /// Stream of the branch at catalog position `i`.
    pub fn branch(i: usize) -> u64 {
        i as u64
    }

    /// Object visibility stream of the sensor at catalog position `i`.
    pub fn sensor(i: usize) -> u64 {
        (1 << 32) | i as u64
    }
}

/// Deterministic generator for `(seed, t, stream)`; distinct keys give distinct seeds.
pub fn step_rng(seed: u64, t: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&t.to_le_bytes());
    key[16..24].copy_from_slice(&stream.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Degradation that applies to `branch` in `context` under the profile's model.
pub fn effective_degradation(
    profile: &SystemProfile,
    branch: &BranchSpec,
    context: &Context,
) -> DegradationParams {
    let modalities: BTreeSet<Modality> = branch
        .required_sensors
        .iter()
        .filter_map(|s| profile.sensor(s).map(|s| s.modality))
        .collect();
    profile.degradation().effective(&branch.id, &modalities, context)
}

/// Per-object visibility draws of every sensor at a step, in `[0, 1)`.
pub fn sensor_visibility(profile: &SystemProfile, step: &TraceStep, seed: u64) -> BTreeMap<SensorId, Vec<f64>> {
    profile
        .sensors()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = step_rng(seed, step.t as u64, streams::sensor(i));
            let u = step.ground_truth.iter().map(|_| rng.random::<f64>()).collect();
            (s.id.clone(), u)
        })
        .collect()
}

/// The member sensor whose visibility draws a branch reuses: the one with the lowest
/// miss probability in `context`, first in id order on ties. The branch's marginal
/// miss rate stays its effective `miss_prob`.
pub fn visibility_sensor(profile: &SystemProfile, branch: &BranchSpec, context: &Context) -> SensorId {
    let mut best: Option<(f64, &SensorId)> = None;
    for id in &branch.required_sensors {
        let Some(s) = profile.sensor(id) else { continue };
        let p = profile.degradation().params(s.modality, context).miss_prob;
        if best.is_none_or(|(bp, _)| p < bp) {
            best = Some((p, id));
        }
    }
    best.map(|(_, id)| id.clone())
        .expect("branch sensors are validated against the catalog")
}

/// Synthesizes one branch's detections for a frame.
///
/// `visibility[k]` is the branch's visibility draw for object `k`; the object is
/// missed when it falls below `miss_prob`. Branches sharing a sensor share draws, so
/// their misses are correlated.
pub fn synthesize_branch_detections<R: Rng>(
    params: &DegradationParams,
    gt: &[Detection],
    visibility: &[f64],
    objects: &ObjectDistribution,
    rng: &mut R,
) -> DetectionSet {
    debug_assert_eq!(gt.len(), visibility.len());
    let mut out = Vec::with_capacity(gt.len());
    for (obj, u) in gt.iter().zip(visibility) {
        if *u < params.miss_prob {
            continue;
        }
        let (w, h) = (obj.bbox.width(), obj.bbox.height());
        let mut d = [0.0; 4];
        if params.box_noise_sigma > 0.0 {
            for v in d.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v = z * params.box_noise_sigma;
            }
        }
        let mut b = BBox::new(
            obj.bbox.x1 + d[0] * w,
            obj.bbox.y1 + d[1] * h,
            obj.bbox.x2 + d[2] * w,
            obj.bbox.y2 + d[3] * h,
        );
        if b.x2 - b.x1 < 1.0 {
            let c = 0.5 * (b.x1 + b.x2);
            b.x1 = c - 0.5;
            b.x2 = c + 0.5;
        }
        if b.y2 - b.y1 < 1.0 {
            let c = 0.5 * (b.y1 + b.y2);
            b.y1 = c - 0.5;
            b.y2 = c + 0.5;
        }
        let noise = (d.iter().map(|v| v.abs()).sum::<f64>() / 4.0).min(1.0);
        out.push(Detection {
            class_id: obj.class_id,
            bbox: b,
            confidence: (params.conf_scale * (1.0 - noise)).clamp(0.0, 1.0),
        });
    }
    let spurious = poisson(params.false_pos_rate, rng);
    for _ in 0..spurious {
        let bbox = objects.sample_box(rng);
        let class_id = rng.random_range(0..objects.num_classes);
        let confidence = (params.conf_scale * rng.random_range(0.05..0.5)).clamp(0.0, 1.0);
        out.push(Detection {
            class_id,
            bbox,
            confidence,
        });
    }
    out
}

/// One step of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: usize,
    pub context: Context,
    pub ground_truth: DetectionSet,
    /// Cached per-branch detections; synthesized on demand when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<BTreeMap<BranchId, DetectionSet>>,
}

#[derive(Serialize, Deserialize)]
struct TraceLine {
    schema_version: u32,
    #[serde(flatten)]
    step: TraceStep,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationTrace {
    steps: Vec<TraceStep>,
}

impl SimulationTrace {
    pub fn new(steps: Vec<TraceStep>) -> Result<Self> {
        let trace = SimulationTrace { steps };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.steps.iter().enumerate() {
            if s.t != i {
                return Err(Error::invalid(
                    format!("trace[{i}].t"),
                    format!("expected {i}, found {}", s.t),
                ));
            }
            let all_gt_valid = s.ground_truth.iter().all(Detection::is_valid);
            let all_det_valid = s
                .detections
                .iter()
                .flat_map(|m| m.values())
                .flatten()
                .all(Detection::is_valid);
            if !all_gt_valid || !all_det_valid {
                return Err(Error::invalid(
                    format!("trace[{i}]"),
                    "boxes need x1 < x2, y1 < y2 and confidence in [0, 1]",
                ));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Distinct contexts in order of first appearance.
    pub fn contexts(&self) -> Vec<Context> {
        let mut seen = Vec::new();
        for s in &self.steps {
            if !seen.contains(&s.context) {
                seen.push(s.context.clone());
            }
        }
        seen
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for step in &self.steps {
            let line = TraceLine {
                schema_version: SCHEMA_VERSION,
                step: step.clone(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R, source: &str) -> Result<Self> {
        let mut steps = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let de = &mut serde_json::Deserializer::from_str(&line);
            let parsed: TraceLine = serde_path_to_error::deserialize(de).map_err(|e| {
                let field = e.path().to_string();
                let inner = e.into_inner();
                Error::Parse {
                    path: source.to_owned(),
                    line: i + 1,
                    column: inner.column(),
                    field,
                    message: inner.to_string(),
                }
            })?;
            if parsed.schema_version != SCHEMA_VERSION {
                return Err(Error::Parse {
                    path: source.to_owned(),
                    line: i + 1,
                    column: 0,
                    field: "schema_version".into(),
                    message: format!("unsupported schema version {}", parsed.schema_version),
                });
            }
            steps.push(parsed.step);
        }
        if steps.is_empty() {
            return Err(Error::MalformedInput {
                path: source.to_owned(),
                message: "trace has no steps".into(),
            });
        }
        SimulationTrace::new(steps)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        SimulationTrace::read_jsonl(BufReader::new(f), &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_jsonl(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }

    /// Drops cached detections so they are re-synthesized at run time.
    pub fn without_detections(&self) -> Self {
        SimulationTrace {
            steps: self
                .steps
                .iter()
                .map(|s| TraceStep {
                    detections: None,
                    ..s.clone()
                })
                .collect(),
        }
    }
}

pub fn load_profile(path: impl AsRef<Path>) -> Result<SystemProfile> {
    SystemProfile::load(path)
}

/// Parses an inline segment list such as `fog:30,snow:60`.
pub fn parse_segments(spec: &str) -> Result<Vec<(Context, usize)>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (ctx, len) = part
            .split_once(':')
            .ok_or_else(|| Error::invalid("generate", format!("`{part}` is not CONTEXT:STEPS")))?;
        let len: usize = len
            .trim()
            .parse()
            .map_err(|_| Error::invalid("generate", format!("`{len}` is not a step count")))?;
        out.push((ctx.parse()?, len));
    }
    if out.is_empty() {
        return Err(Error::invalid("generate", "no segments given"));
    }
    Ok(out)
}

/// All eight built-in contexts, `steps_per_context` steps each.
pub fn context_tour(steps_per_context: usize) -> Vec<(Context, usize)> {
    Context::BUILTIN
        .iter()
        .map(|c| (c.clone(), steps_per_context))
        .collect()
}

/// Seed and segment layout of the bundled evaluation scenario.
pub const BUNDLED_SCENARIO_SEED: u64 = 2024;
pub const BUNDLED_SCENARIO_STEPS_PER_CONTEXT: usize = 120;

pub fn bundled_scenario(profile: &SystemProfile) -> Result<SimulationTrace> {
    generate_trace(
        &context_tour(BUNDLED_SCENARIO_STEPS_PER_CONTEXT),
        profile,
        BUNDLED_SCENARIO_SEED,
    )
}

/// Generates a trace with the given context segments and caches every branch's
/// detections. Re-synthesizing an uncached copy with the same seed gives the same
/// detections.
pub fn generate_trace(
    segments: &[(Context, usize)],
    profile: &SystemProfile,
    seed: u64,
) -> Result<SimulationTrace> {
    let mut steps = Vec::new();
    for (ctx, len) in segments {
        if *len == 0 {
            return Err(Error::invalid(
                format!("segment `{ctx}`"),
                "segment length must be >= 1",
            ));
        }
        for _ in 0..*len {
            let t = steps.len();
            let mut rng = step_rng(seed, t as u64, streams::GROUND_TRUTH);
            let ground_truth = profile.objects().sample_frame(&mut rng);
            let mut step = TraceStep {
                t,
                context: ctx.clone(),
                ground_truth,
                detections: None,
            };
            step.detections = Some(synthesize_frame(profile, &step, seed));
            steps.push(step);
        }
    }
    SimulationTrace::new(steps)
}

fn synthesize_frame(
    profile: &SystemProfile,
    step: &TraceStep,
    seed: u64,
) -> BTreeMap<BranchId, DetectionSet> {
    let vis = sensor_visibility(profile, step, seed);
    profile
        .branches()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let visibility = &vis[&visibility_sensor(profile, b, &step.context)];
            let mut rng = step_rng(seed, step.t as u64, streams::branch(i));
            let params = effective_degradation(profile, b, &step.context);
            let dets = synthesize_branch_detections(
                &params,
                &step.ground_truth,
                visibility,
                profile.objects(),
                &mut rng,
            );
            (b.id.clone(), dets)
        })
        .collect()
}

/// Every branch's detections for a step: cached ones if present, synthesized otherwise.
pub fn frame_detections(
    profile: &SystemProfile,
    step: &TraceStep,
    seed: u64,
) -> BTreeMap<BranchId, DetectionSet> {
    match &step.detections {
        Some(d) => d.clone(),
        None => synthesize_frame(profile, step, seed),
    }
}

/// Fuses a configuration's branch outputs and scores them against ground truth.
pub fn config_loss(
    profile: &SystemProfile,
    config: &ModelConfiguration,
    frame: &BTreeMap<BranchId, DetectionSet>,
    gt: &[Detection],
) -> Result<(f64, DetectionSet)> {
    let lists: Vec<&[Detection]> = config
        .branches()
        .iter()
        .map(|b| {
            frame
                .get(b)
                .map(Vec::as_slice)
                .ok_or_else(|| Error::Config(format!("no detections for branch `{b}`")))
        })
        .collect::<Result<_>>()?;
    let fused = weighted_boxes_fusion(&lists, profile.fusion_params());
    let loss = detection_loss(&fused, gt, profile.loss_params()).total();
    Ok((loss, fused))
}

/// True loss of every configuration at one step, with branch samples shared.
pub fn true_config_losses(
    profile: &SystemProfile,
    frame: &BTreeMap<BranchId, DetectionSet>,
    gt: &[Detection],
) -> Result<BTreeMap<String, f64>> {
    profile
        .configurations()
        .iter()
        .map(|c| Ok((c.id().to_owned(), config_loss(profile, c, frame, gt)?.0)))
        .collect()
}

/// Monte Carlo estimate of every configuration's mean loss per context.
///
/// Used to fill a profile's `config_priors`; run it with a seed different from
/// the evaluation traces.
pub fn calibrate_config_priors(
    profile: &SystemProfile,
    contexts: &[Context],
    frames_per_context: usize,
    seed: u64,
) -> Result<BTreeMap<String, BTreeMap<Context, f64>>> {
    let segments: Vec<(Context, usize)> = contexts
        .iter()
        .map(|c| (c.clone(), frames_per_context))
        .collect();
    let trace = generate_trace(&segments, profile, seed)?;
    let mut sums: BTreeMap<String, BTreeMap<Context, f64>> = BTreeMap::new();
    for step in trace.steps() {
        let frame = frame_detections(profile, step, seed);
        for (id, loss) in true_config_losses(profile, &frame, &step.ground_truth)? {
            *sums.entry(id).or_default().entry(step.context.clone()).or_default() += loss;
        }
    }
    for table in sums.values_mut() {
        for v in table.values_mut() {
            *v /= frames_per_context as f64;
        }
    }
    Ok(sums)
}
