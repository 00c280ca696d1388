//! Gates estimate the loss of every configuration for the current context; the
//! candidate filter keeps the configurations within `gamma` of the best estimate.
//!
//! Three gates ship: a rule table ([`knowledge_gate`]), an online per-context
//! estimator seeded from profile priors ([`estimator_gate`]) and the oracle
//! ([`oracle_gate`]), which sees the true per-configuration losses of the step.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::SystemProfile;
use crate::types::{Context, ModelConfiguration};

/// Estimate given by the knowledge gate to configurations its rules do not prefer.
pub const KNOWLEDGE_SENTINEL_LOSS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    Knowledge,
    Estimator,
    Oracle,
}

impl GateKind {
    pub const ALL: [GateKind; 3] = [GateKind::Knowledge, GateKind::Estimator, GateKind::Oracle];

    pub fn as_str(&self) -> &'static str {
        match self {
            GateKind::Knowledge => "knowledge",
            GateKind::Estimator => "estimator",
            GateKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GateKind::ALL
            .into_iter()
            .find(|g| g.as_str() == s.trim())
            .ok_or_else(|| {
                Error::invalid("gate", format!("`{s}` is not one of knowledge, estimator, oracle"))
            })
    }
}

/// Estimated loss per configuration id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GateEstimate(BTreeMap<String, f64>);

impl GateEstimate {
    pub fn new(losses: BTreeMap<String, f64>) -> Result<Self> {
        if let Some((id, v)) = losses.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(
                format!("estimate.{id}"),
                format!("loss estimates must be finite and >= 0, got {v}"),
            ));
        }
        Ok(GateEstimate(losses))
    }

    pub fn get(&self, config_id: &str) -> Option<f64> {
        self.0.get(config_id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_map(&self) -> &BTreeMap<String, f64> {
        &self.0
    }

    /// Fails unless every configuration has an estimate.
    pub fn check_covers(&self, configs: &[ModelConfiguration]) -> Result<()> {
        match configs.iter().find(|c| !self.0.contains_key(c.id())) {
            Some(c) => Err(Error::MissingConfiguration(c.id().to_owned())),
            None => Ok(()),
        }
    }
}

impl FromIterator<(String, f64)> for GateEstimate {
    fn from_iter<T: IntoIterator<Item = (String, f64)>>(iter: T) -> Self {
        GateEstimate(iter.into_iter().collect())
    }
}

/// Context → preferred configuration ids, with an optional fallback.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct KnowledgeRules {
    pub rules: BTreeMap<Context, Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub default: Option<Vec<String>>,
}

impl KnowledgeRules {
    pub fn is_empty(&self) -> bool {
        self.rules.is_empty() && self.default.is_none()
    }
}

pub fn knowledge_gate(
    context: &Context,
    rules: &KnowledgeRules,
    configs: &[ModelConfiguration],
) -> Result<GateEstimate> {
    if rules.is_empty() {
        return Err(Error::Config("knowledge rule table is empty".into()));
    }
    let preferred = rules
        .rules
        .get(context)
        .or(rules.default.as_ref())
        .ok_or_else(|| {
            Error::Config(format!(
                "no knowledge rule for context `{context}` and no default rule"
            ))
        })?;
    let preferred: BTreeSet<&str> = preferred.iter().map(String::as_str).collect();
    if let Some(missing) = preferred
        .iter()
        .find(|id| !configs.iter().any(|c| c.id() == **id))
    {
        return Err(Error::MissingConfiguration((*missing).to_owned()));
    }
    GateEstimate::new(
        configs
            .iter()
            .map(|c| {
                let v = if preferred.contains(c.id()) {
                    0.0
                } else {
                    KNOWLEDGE_SENTINEL_LOSS
                };
                (c.id().to_owned(), v)
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorParams {
    /// EMA weight of a new observation.
    pub alpha: f64,
    /// Probability that context inference returns a wrong (uniformly drawn) context.
    pub misclassification_prob: f64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            alpha: 0.3,
            misclassification_prob: 0.0,
        }
    }
}

impl EstimatorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid("estimator.alpha", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.misclassification_prob) {
            return Err(Error::invalid(
                "estimator.misclassification_prob",
                "must lie in [0, 1]",
            ));
        }
        Ok(())
    }
}

/// What the estimator gate sees of the current step.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextFeatures {
    pub declared: Context,
}

/// Per-context EMA of observed configuration losses, seeded from priors.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    params: EstimatorParams,
    priors: BTreeMap<Context, BTreeMap<String, f64>>,
    default_prior: BTreeMap<String, f64>,
    estimates: BTreeMap<Context, BTreeMap<String, f64>>,
    contexts: Vec<Context>,
    current: Option<Context>,
    rng: ChaCha8Rng,
}

impl EstimatorState {
    /// Builds the state from explicit priors. `default_prior` serves unknown contexts.
    pub fn new(
        params: EstimatorParams,
        priors: BTreeMap<Context, BTreeMap<String, f64>>,
        default_prior: BTreeMap<String, f64>,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        params.validate()?;
        let contexts = priors.keys().cloned().collect();
        Ok(EstimatorState {
            params,
            priors,
            default_prior,
            estimates: BTreeMap::new(),
            contexts,
            current: None,
            rng,
        })
    }

    /// Priors come from the profile's per-configuration table; configurations missing
    /// there fall back to the best member-branch loss. The default prior of a
    /// configuration is its mean prior over the known contexts.
    pub fn from_profile(profile: &SystemProfile, rng: ChaCha8Rng) -> Result<Self> {
        let mut contexts: BTreeSet<Context> = BTreeSet::new();
        for table in profile.config_priors().values() {
            contexts.extend(table.keys().cloned());
        }
        for b in profile.branches() {
            contexts.extend(b.loss_profile.keys().cloned());
        }

        let mut priors: BTreeMap<Context, BTreeMap<String, f64>> = BTreeMap::new();
        let mut default_prior = BTreeMap::new();
        for cfg in profile.configurations() {
            let explicit = profile.config_priors().get(cfg.id());
            let mut sum = 0.0;
            let mut n = 0usize;
            for ctx in &contexts {
                let v = match explicit.and_then(|t| t.get(ctx)) {
                    Some(v) => Some(*v),
                    None => composed_prior(profile, cfg, ctx),
                };
                if let Some(v) = v {
                    priors.entry(ctx.clone()).or_default().insert(cfg.id().to_owned(), v);
                    sum += v;
                    n += 1;
                }
            }
            let fallback = if n > 0 {
                sum / n as f64
            } else {
                cfg.branches()
                    .iter()
                    .filter_map(|b| profile.branch(b).and_then(|b| b.default_loss))
                    .fold(f64::INFINITY, f64::min)
            };
            if !fallback.is_finite() {
                return Err(Error::Config(format!(
                    "no loss prior available for configuration `{}`",
                    cfg.id()
                )));
            }
            default_prior.insert(cfg.id().to_owned(), fallback);
        }
        // contexts where some configuration had no prior get the default for it
        for table in priors.values_mut() {
            for (id, v) in &default_prior {
                table.entry(id.clone()).or_insert(*v);
            }
        }
        EstimatorState::new(*profile.estimator_params(), priors, default_prior, rng)
    }

    pub fn params(&self) -> &EstimatorParams {
        &self.params
    }

    /// The context the gate currently believes in, if it has inferred one.
    pub fn current_context(&self) -> Option<&Context> {
        self.current.as_ref()
    }

    /// Declared context, swapped for a random other known context with the
    /// configured misclassification probability.
    pub fn infer_context(&mut self, features: &ContextFeatures) -> Context {
        let p = self.params.misclassification_prob;
        let inferred = if p > 0.0 && self.rng.random::<f64>() < p {
            let others: Vec<&Context> =
                self.contexts.iter().filter(|c| **c != features.declared).collect();
            if others.is_empty() {
                features.declared.clone()
            } else {
                others[self.rng.random_range(0..others.len())].clone()
            }
        } else {
            features.declared.clone()
        };
        self.current = Some(inferred.clone());
        inferred
    }

    pub fn estimate_for(&self, context: &Context) -> BTreeMap<String, f64> {
        let prior = self.priors.get(context).unwrap_or(&self.default_prior);
        let mut out = prior.clone();
        if let Some(learned) = self.estimates.get(context) {
            for (id, v) in learned {
                out.insert(id.clone(), *v);
            }
        }
        out
    }

    /// Folds an observed loss into the estimate for (`context`, `config_id`).
    pub fn observe(&mut self, context: &Context, config_id: &str, loss: f64) {
        let alpha = self.params.alpha;
        let prior = self
            .priors
            .get(context)
            .unwrap_or(&self.default_prior)
            .get(config_id)
            .copied();
        let table = self.estimates.entry(context.clone()).or_default();
        let current = table.get(config_id).copied().or(prior).unwrap_or(loss);
        table.insert(config_id.to_owned(), current + alpha * (loss - current));
    }
}

fn composed_prior(profile: &SystemProfile, cfg: &ModelConfiguration, ctx: &Context) -> Option<f64> {
    cfg.branches()
        .iter()
        .map(|b| profile.branch(b).and_then(|b| b.expected_loss(ctx).ok()))
        .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v)))
        .filter(|v| v.is_finite())
}

pub fn estimator_gate(features: &ContextFeatures, state: &mut EstimatorState) -> Result<GateEstimate> {
    let ctx = state.infer_context(features);
    GateEstimate::new(state.estimate_for(&ctx))
}

/// Passes the true per-configuration losses through unchanged.
pub fn oracle_gate(
    true_losses: &BTreeMap<String, f64>,
    configs: &[ModelConfiguration],
) -> Result<GateEstimate> {
    let est = GateEstimate::new(true_losses.clone())?;
    est.check_covers(configs)?;
    Ok(est)
}

/// Every configuration whose estimate is within `gamma` of the best one, by id.
pub fn select_candidates(estimates: &GateEstimate, gamma: f64) -> Result<Vec<String>> {
    if estimates.is_empty() {
        return Err(Error::Config("cannot select candidates from an empty estimate".into()));
    }
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::invalid("gamma", "must be >= 0"));
    }
    let best = estimates.iter().map(|(_, v)| v).fold(f64::INFINITY, f64::min);
    let threshold = best + gamma;
    Ok(estimates
        .iter()
        .filter(|(_, v)| *v <= threshold)
        .map(|(id, _)| id.to_owned())
        .collect())
}

/// Inputs available to a gate at a context-identification step.
#[derive(Debug, Clone, Copy)]
pub struct GateInput<'a> {
    pub t: usize,
    pub context: &'a Context,
    /// Present only for gates that ask for it.
    pub true_losses: Option<&'a BTreeMap<String, f64>>,
}

/// A context-identification gate as used by the runtime controller.
pub trait Gate: Send {
    fn kind(&self) -> GateKind;

    fn needs_true_losses(&self) -> bool {
        false
    }

    fn estimate(&mut self, input: &GateInput<'_>) -> Result<GateEstimate>;

    /// Loss observed while `config_id` was active since the previous estimate.
    fn observe(&mut self, _config_id: &str, _loss: f64) {}
}

pub struct KnowledgeGate {
    rules: KnowledgeRules,
    configs: Vec<ModelConfiguration>,
}

impl KnowledgeGate {
    pub fn new(rules: KnowledgeRules, configs: Vec<ModelConfiguration>) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::Config("knowledge rule table is empty".into()));
        }
        Ok(KnowledgeGate { rules, configs })
    }
}

impl Gate for KnowledgeGate {
    fn kind(&self) -> GateKind {
        GateKind::Knowledge
    }

    fn estimate(&mut self, input: &GateInput<'_>) -> Result<GateEstimate> {
        knowledge_gate(input.context, &self.rules, &self.configs)
    }
}

pub struct EstimatorGate {
    state: EstimatorState,
}

impl EstimatorGate {
    pub fn new(state: EstimatorState) -> Self {
        EstimatorGate { state }
    }

    pub fn state(&self) -> &EstimatorState {
        &self.state
    }
}

impl Gate for EstimatorGate {
    fn kind(&self) -> GateKind {
        GateKind::Estimator
    }

    fn estimate(&mut self, input: &GateInput<'_>) -> Result<GateEstimate> {
        estimator_gate(
            &ContextFeatures {
                declared: input.context.clone(),
            },
            &mut self.state,
        )
    }

    fn observe(&mut self, config_id: &str, loss: f64) {
        if let Some(ctx) = self.state.current_context().cloned() {
            self.state.observe(&ctx, config_id, loss);
        }
    }
}

pub struct OracleGate {
    configs: Vec<ModelConfiguration>,
}

impl OracleGate {
    pub fn new(configs: Vec<ModelConfiguration>) -> Self {
        OracleGate { configs }
    }
}

impl Gate for OracleGate {
    fn kind(&self) -> GateKind {
        GateKind::Oracle
    }

    fn needs_true_losses(&self) -> bool {
        true
    }

    fn estimate(&mut self, input: &GateInput<'_>) -> Result<GateEstimate> {
        let truth = input.true_losses.ok_or_else(|| {
            Error::Config("oracle gate needs the true per-configuration losses".into())
        })?;
        oracle_gate(truth, &self.configs)
    }
}

/// Builds the gate of the requested kind for a profile.
pub fn build_gate(kind: GateKind, profile: &SystemProfile, rng: ChaCha8Rng) -> Result<Box<dyn Gate>> {
    let configs = profile.configurations().to_vec();
    Ok(match kind {
        GateKind::Knowledge => Box::new(KnowledgeGate::new(profile.knowledge_rules().clone(), configs)?),
        GateKind::Estimator => Box::new(EstimatorGate::new(EstimatorState::from_profile(profile, rng)?)),
        GateKind::Oracle => Box::new(OracleGate::new(configs)),
    })
}
