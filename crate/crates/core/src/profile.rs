//! System profiles: the sensor and branch catalog, configuration space and every
//! tunable the simulator reads. Profiles are JSON documents (`schema_version` 1).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::LatencyRule;
use crate::error::{Error, Result};
use crate::fusion::{FusionParams, LossParams};
use crate::gating::{EstimatorParams, KnowledgeRules};
use crate::optimizer::OptimizerParams;
use crate::scenario::{DegradationModel, ObjectDistribution};
use crate::types::{BranchId, BranchSpec, Context, ModelConfiguration, SensorId, SensorSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// Above this many branches an uncapped enumeration is refused.
const MAX_UNCAPPED_BRANCHES: usize = 20;

/// How the configuration space is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigSpace {
    /// All non-empty branch subsets, optionally capped in size.
    Enumerate {
        #[serde(default)]
        max_size: Option<usize>,
    },
    /// An explicit list of branch sets.
    Explicit(Vec<Vec<BranchId>>),
}

impl Default for ConfigSpace {
    fn default() -> Self {
        ConfigSpace::Enumerate { max_size: None }
    }
}

/// Measured whole-configuration cost, overriding branch composition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfigCost {
    pub energy_j: f64,
    pub latency_s: f64,
}

/// One row of a published per-configuration measurement table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub fusion_type: String,
    pub configuration: String,
    pub config_id: String,
    pub avg_loss: f64,
    pub energy_j: f64,
    pub latency_ms: f64,
}

fn default_step_duration() -> f64 {
    0.1
}

fn default_switch_overhead_s() -> f64 {
    0.001
}

/// The on-disk profile document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Simulation step length; 0.1 s is the 10 FPS real-time floor.
    #[serde(default = "default_step_duration")]
    pub step_duration_s: f64,
    pub sensors: Vec<SensorSpec>,
    pub branches: Vec<BranchSpec>,
    #[serde(default)]
    pub configurations: ConfigSpace,
    #[serde(default)]
    pub latency_rule: LatencyRule,
    #[serde(default)]
    pub config_overrides: BTreeMap<String, ConfigCost>,
    #[serde(default = "default_switch_overhead_s")]
    pub switch_overhead_s: f64,
    #[serde(default)]
    pub switch_overhead_j: f64,
    /// Extra algorithm energy charged on context-identification steps. Defaults to the
    /// algorithm energy of the most expensive configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_id_overhead_j: Option<f64>,
    #[serde(default)]
    pub fusion: FusionParams,
    #[serde(default)]
    pub loss: LossParams,
    #[serde(default)]
    pub optimizer: OptimizerParams,
    #[serde(default)]
    pub estimator: EstimatorParams,
    #[serde(default)]
    pub knowledge_rules: KnowledgeRules,
    /// Per-configuration, per-context expected losses seeding the estimator gate.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub config_priors: BTreeMap<String, BTreeMap<Context, f64>>,
    #[serde(default)]
    pub degradation: DegradationModel,
    #[serde(default)]
    pub objects: ObjectDistribution,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference: Vec<ReferenceRow>,
}

/// A validated, fully resolved profile. Immutable once built.
#[derive(Debug, Clone)]
pub struct SystemProfile {
    spec: ProfileSpec,
    configurations: Vec<ModelConfiguration>,
    sensor_index: BTreeMap<SensorId, usize>,
    branch_index: BTreeMap<BranchId, usize>,
}

impl SystemProfile {
    pub fn from_spec(spec: ProfileSpec) -> Result<Self> {
        if spec.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", spec.schema_version),
            ));
        }
        if !(spec.step_duration_s > 0.0 && spec.step_duration_s.is_finite()) {
            return Err(Error::invalid("step_duration_s", "must be > 0"));
        }
        for (name, v) in [
            ("switch_overhead_s", spec.switch_overhead_s),
            ("switch_overhead_j", spec.switch_overhead_j),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be finite and >= 0"));
            }
        }
        if let Some(v) = spec.context_id_overhead_j {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid("context_id_overhead_j", "must be finite and >= 0"));
            }
        }
        if spec.sensors.is_empty() {
            return Err(Error::invalid("sensors", "at least one sensor is required"));
        }
        if spec.branches.is_empty() {
            return Err(Error::invalid("branches", "at least one branch is required"));
        }

        let mut sensor_index = BTreeMap::new();
        for (i, s) in spec.sensors.iter().enumerate() {
            s.validate()?;
            if sensor_index.insert(s.id.clone(), i).is_some() {
                return Err(Error::invalid(
                    format!("sensors[{i}].id"),
                    format!("duplicate sensor id `{}`", s.id),
                ));
            }
        }
        let mut branch_index = BTreeMap::new();
        for (i, b) in spec.branches.iter().enumerate() {
            b.validate()?;
            for s in &b.required_sensors {
                if !sensor_index.contains_key(s) {
                    return Err(Error::UnknownSensor {
                        sensor: s.to_string(),
                        by: format!("branches[{i}] (`{}`).required_sensors", b.id),
                    });
                }
            }
            if branch_index.insert(b.id.clone(), i).is_some() {
                return Err(Error::invalid(
                    format!("branches[{i}].id"),
                    format!("duplicate branch id `{}`", b.id),
                ));
            }
        }

        spec.fusion.validate()?;
        spec.loss.validate()?;
        spec.optimizer.validate()?;
        spec.estimator.validate()?;
        spec.degradation.validate()?;
        spec.objects.validate()?;

        let mut profile = SystemProfile {
            spec,
            configurations: Vec::new(),
            sensor_index,
            branch_index,
        };
        profile.configurations = enumerate_configurations(&profile)?;
        if profile.configurations.is_empty() {
            return Err(Error::invalid("configurations", "configuration space is empty"));
        }

        // Re-key id-addressed tables by canonical configuration id.
        let overrides = std::mem::take(&mut profile.spec.config_overrides);
        for (id, cost) in overrides {
            let cfg = profile.resolve_id(&id, "config_overrides")?;
            if !(cost.energy_j >= 0.0 && cost.energy_j.is_finite())
                || !(cost.latency_s > 0.0 && cost.latency_s.is_finite())
            {
                return Err(Error::invalid(
                    format!("config_overrides.{id}"),
                    "energy_j must be >= 0 and latency_s > 0",
                ));
            }
            profile.spec.config_overrides.insert(cfg.id().to_owned(), cost);
        }
        let priors = std::mem::take(&mut profile.spec.config_priors);
        for (id, table) in priors {
            let cfg = profile.resolve_id(&id, "config_priors")?;
            if table.values().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::invalid(
                    format!("config_priors.{id}"),
                    "priors must be finite and >= 0",
                ));
            }
            profile.spec.config_priors.insert(cfg.id().to_owned(), table);
        }
        let mut rules = std::mem::take(&mut profile.spec.knowledge_rules);
        for ids in rules.rules.values_mut().chain(rules.default.iter_mut()) {
            for id in ids.iter_mut() {
                *id = profile.resolve_id(id, "knowledge_rules")?.id().to_owned();
            }
        }
        profile.spec.knowledge_rules = rules;
        let mut reference = std::mem::take(&mut profile.spec.reference);
        for (i, row) in reference.iter_mut().enumerate() {
            let id = profile
                .canonicalize_configuration(row.config_id.split(crate::types::CONFIG_ID_SEPARATOR))
                .map_err(|e| Error::invalid(format!("reference[{i}].config_id"), e.to_string()))?;
            row.config_id = id.id().to_owned();
        }
        profile.spec.reference = reference;
        Ok(profile)
    }

    pub fn from_json_str(json: &str, source: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(json);
        let spec: ProfileSpec = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            Error::Parse {
                path: source.to_owned(),
                line: inner.line(),
                column: inner.column(),
                field,
                message: inner.to_string(),
            }
        })?;
        SystemProfile::from_spec(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SystemProfile::from_json_str(&text, &path.display().to_string())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.spec).expect("profile serializes")
    }

    pub fn spec(&self) -> &ProfileSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn sensors(&self) -> &[SensorSpec] {
        &self.spec.sensors
    }

    pub fn branches(&self) -> &[BranchSpec] {
        &self.spec.branches
    }

    pub fn configurations(&self) -> &[ModelConfiguration] {
        &self.configurations
    }

    pub fn step_duration_s(&self) -> f64 {
        self.spec.step_duration_s
    }

    pub fn sensor(&self, id: &SensorId) -> Option<&SensorSpec> {
        self.sensor_index.get(id).map(|&i| &self.spec.sensors[i])
    }

    pub fn branch(&self, id: &BranchId) -> Option<&BranchSpec> {
        self.branch_index.get(id).map(|&i| &self.spec.branches[i])
    }

    /// Position of a branch in the catalog; stable for a given profile.
    pub fn branch_position(&self, id: &BranchId) -> Option<usize> {
        self.branch_index.get(id).copied()
    }

    pub fn configuration(&self, id: &str) -> Option<&ModelConfiguration> {
        self.configurations
            .binary_search_by(|c| c.id().cmp(id))
            .ok()
            .map(|i| &self.configurations[i])
    }

    /// Builds the canonical configuration for a set of branch ids, checking each one.
    pub fn canonicalize_configuration<I, B>(&self, branches: I) -> Result<ModelConfiguration>
    where
        I: IntoIterator<Item = B>,
        B: Into<BranchId>,
    {
        let cfg = ModelConfiguration::new(branches)?;
        for b in cfg.branches() {
            if !self.branch_index.contains_key(b) {
                return Err(Error::UnknownBranch(b.to_string()));
            }
        }
        Ok(cfg)
    }

    fn resolve_id(&self, id: &str, field: &str) -> Result<ModelConfiguration> {
        let cfg = ModelConfiguration::parse(id)
            .and_then(|c| self.canonicalize_configuration(c.branches().iter().cloned()))
            .map_err(|e| Error::invalid(format!("{field}.{id}"), e.to_string()))?;
        if self.configuration(cfg.id()).is_none() {
            return Err(Error::invalid(
                format!("{field}.{id}"),
                "configuration is not part of the configuration space",
            ));
        }
        Ok(cfg)
    }

    /// Union of the sensors required by a configuration's branches.
    pub fn required_sensors(&self, config: &ModelConfiguration) -> Result<BTreeSet<SensorId>> {
        let mut out = BTreeSet::new();
        for b in config.branches() {
            let spec = self
                .branch(b)
                .ok_or_else(|| Error::UnknownBranch(b.to_string()))?;
            out.extend(spec.required_sensors.iter().cloned());
        }
        Ok(out)
    }

    pub fn latency_rule(&self) -> LatencyRule {
        self.spec.latency_rule
    }

    pub fn config_override(&self, config: &ModelConfiguration) -> Option<ConfigCost> {
        self.spec.config_overrides.get(config.id()).copied()
    }

    pub fn switch_overhead_s(&self) -> f64 {
        self.spec.switch_overhead_s
    }

    pub fn switch_overhead_j(&self) -> f64 {
        self.spec.switch_overhead_j
    }

    pub fn fusion_params(&self) -> &FusionParams {
        &self.spec.fusion
    }

    pub fn loss_params(&self) -> &LossParams {
        &self.spec.loss
    }

    pub fn optimizer_params(&self) -> &OptimizerParams {
        &self.spec.optimizer
    }

    pub fn estimator_params(&self) -> &EstimatorParams {
        &self.spec.estimator
    }

    pub fn knowledge_rules(&self) -> &KnowledgeRules {
        &self.spec.knowledge_rules
    }

    pub fn config_priors(&self) -> &BTreeMap<String, BTreeMap<Context, f64>> {
        &self.spec.config_priors
    }

    pub fn degradation(&self) -> &DegradationModel {
        &self.spec.degradation
    }

    pub fn objects(&self) -> &ObjectDistribution {
        &self.spec.objects
    }

    pub fn reference(&self) -> &[ReferenceRow] {
        &self.spec.reference
    }

    pub fn reference_row(&self, config_id: &str) -> Option<&ReferenceRow> {
        self.spec.reference.iter().find(|r| r.config_id == config_id)
    }

    /// Returns a copy of the profile with a modified document, re-validated.
    pub fn with_spec(&self, edit: impl FnOnce(&mut ProfileSpec)) -> Result<Self> {
        let mut spec = self.spec.clone();
        edit(&mut spec);
        SystemProfile::from_spec(spec)
    }
}

/// Lists the configuration space of a profile, deduplicated and ordered by canonical id.
pub fn enumerate_configurations(profile: &SystemProfile) -> Result<Vec<ModelConfiguration>> {
    let ids: Vec<&BranchId> = profile.spec.branches.iter().map(|b| &b.id).collect();
    let mut out: BTreeSet<ModelConfiguration> = BTreeSet::new();
    match &profile.spec.configurations {
        ConfigSpace::Enumerate { max_size } => {
            let cap = max_size.unwrap_or(ids.len()).min(ids.len());
            if cap == 0 {
                return Err(Error::invalid("configurations.enumerate.max_size", "must be >= 1"));
            }
            if max_size.is_none() && ids.len() > MAX_UNCAPPED_BRANCHES {
                return Err(Error::invalid(
                    "configurations.enumerate.max_size",
                    format!(
                        "{} branches need a size cap (uncapped limit is {MAX_UNCAPPED_BRANCHES})",
                        ids.len()
                    ),
                ));
            }
            let mut chosen = Vec::with_capacity(cap);
            subsets(&ids, 0, cap, &mut chosen, &mut out)?;
        }
        ConfigSpace::Explicit(list) => {
            for (i, branches) in list.iter().enumerate() {
                let cfg = profile
                    .canonicalize_configuration(branches.iter().cloned())
                    .map_err(|e| Error::invalid(format!("configurations.explicit[{i}]"), e.to_string()))?;
                out.insert(cfg);
            }
        }
    }
    Ok(out.into_iter().collect())
}

fn subsets(
    ids: &[&BranchId],
    start: usize,
    cap: usize,
    chosen: &mut Vec<BranchId>,
    out: &mut BTreeSet<ModelConfiguration>,
) -> Result<()> {
    for i in start..ids.len() {
        chosen.push(ids[i].clone());
        out.insert(ModelConfiguration::new(chosen.iter().cloned())?);
        if chosen.len() < cap {
            subsets(ids, i + 1, cap, chosen, out)?;
        }
        chosen.pop();
    }
    Ok(())
}

const RADIATE_TABLE1: &str = include_str!("../data/radiate-table1.json");

/// Profiles shipped with the crate.
pub struct ProfileDataset;

impl ProfileDataset {
    pub const DEFAULT: &'static str = "radiate-table1";

    pub fn names() -> &'static [&'static str] {
        &["radiate-table1"]
    }

    pub fn source(name: &str) -> Option<&'static str> {
        match name {
            "radiate-table1" => Some(RADIATE_TABLE1),
            _ => None,
        }
    }

    pub fn load(name: &str) -> Result<SystemProfile> {
        let src = ProfileDataset::source(name)
            .ok_or_else(|| Error::Config(format!("no bundled profile named `{name}`")))?;
        SystemProfile::from_json_str(src, &format!("bundled:{name}"))
    }
}

/// The default bundled profile.
pub fn default_profile() -> SystemProfile {
    ProfileDataset::load(ProfileDataset::DEFAULT).expect("bundled profile is valid")
}
