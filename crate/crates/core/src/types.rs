//! Shared domain vocabulary: sensors, branches, configurations, contexts and detections.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Separator used when joining branch ids into a canonical configuration id.
pub const CONFIG_ID_SEPARATOR: char = '+';

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SensorId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BranchId(pub String);

macro_rules! string_id {
    ($ty:ident) => {
        impl $ty {
            pub fn new(id: impl Into<String>) -> Self {
                $ty(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $ty {
            fn from(s: &str) -> Self {
                $ty(s.to_owned())
            }
        }
    };
}

string_id!(SensorId);
string_id!(BranchId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Camera,
    Lidar,
    Radar,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Camera => "camera",
            Modality::Lidar => "lidar",
            Modality::Radar => "radar",
        })
    }
}

/// A physical sensor. Spinning sensors keep their motor powered while gated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub id: SensorId,
    pub modality: Modality,
    /// Measurement power in Watts.
    pub p_meas: f64,
    /// Motor power in Watts, zero for fixed sensors.
    pub p_motor: f64,
    pub freq_hz: f64,
    pub spinning: bool,
}

impl SensorSpec {
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str| format!("sensor `{}`.{name}", self.id);
        if !(self.p_meas >= 0.0 && self.p_meas.is_finite()) {
            return Err(Error::invalid(field("p_meas"), "must be a finite value >= 0"));
        }
        if !(self.p_motor >= 0.0 && self.p_motor.is_finite()) {
            return Err(Error::invalid(field("p_motor"), "must be a finite value >= 0"));
        }
        if !(self.freq_hz > 0.0 && self.freq_hz.is_finite()) {
            return Err(Error::invalid(field("freq_hz"), "must be > 0"));
        }
        if !self.spinning && self.p_motor != 0.0 {
            return Err(Error::invalid(
                field("p_motor"),
                "fixed (non-spinning) sensors must have zero motor power",
            ));
        }
        Ok(())
    }
}

/// An executable detection branch consuming one or more sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub id: BranchId,
    pub required_sensors: BTreeSet<SensorId>,
    pub latency_s: f64,
    pub power_w: f64,
    /// Expected detection loss per context.
    #[serde(default)]
    pub loss_profile: BTreeMap<Context, f64>,
    /// Loss used for contexts missing from `loss_profile`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_loss: Option<f64>,
}

impl BranchSpec {
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str| format!("branch `{}`.{name}", self.id);
        if self.id.0.is_empty() || self.id.0.contains(CONFIG_ID_SEPARATOR) {
            return Err(Error::invalid(
                field("id"),
                format!("must be non-empty and must not contain `{CONFIG_ID_SEPARATOR}`"),
            ));
        }
        if self.required_sensors.is_empty() {
            return Err(Error::invalid(field("required_sensors"), "must not be empty"));
        }
        if !(self.latency_s > 0.0 && self.latency_s.is_finite()) {
            return Err(Error::invalid(field("latency_s"), "must be > 0"));
        }
        if !(self.power_w > 0.0 && self.power_w.is_finite()) {
            return Err(Error::invalid(field("power_w"), "must be > 0"));
        }
        for (ctx, loss) in &self.loss_profile {
            if !(*loss >= 0.0 && loss.is_finite()) {
                return Err(Error::invalid(
                    field(&format!("loss_profile.{ctx}")),
                    "losses must be finite and >= 0",
                ));
            }
        }
        if let Some(d) = self.default_loss {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::invalid(field("default_loss"), "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn expected_loss(&self, context: &Context) -> Result<f64> {
        self.loss_profile
            .get(context)
            .copied()
            .or(self.default_loss)
            .ok_or_else(|| Error::MissingContext {
                branch: self.id.to_string(),
                context: context.to_string(),
            })
    }
}

/// A non-empty set of branches executed together; identity is the set, not the order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelConfiguration {
    id: String,
    branches: BTreeSet<BranchId>,
}

impl ModelConfiguration {
    /// Builds a configuration from branch ids without resolving them against a profile.
    pub fn new<I, B>(branches: I) -> Result<Self>
    where
        I: IntoIterator<Item = B>,
        B: Into<BranchId>,
    {
        let branches: BTreeSet<BranchId> = branches.into_iter().map(Into::into).collect();
        if branches.is_empty() {
            return Err(Error::EmptyConfiguration);
        }
        let id = branches
            .iter()
            .map(BranchId::as_str)
            .collect::<Vec<_>>()
            .join(&CONFIG_ID_SEPARATOR.to_string());
        Ok(ModelConfiguration { id, branches })
    }

    /// Parses a canonical (or non-canonical) `a+b+c` id.
    pub fn parse(id: &str) -> Result<Self> {
        ModelConfiguration::new(
            id.split(CONFIG_ID_SEPARATOR)
                .filter(|s| !s.is_empty())
                .map(BranchId::from),
        )
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn branches(&self) -> &BTreeSet<BranchId> {
        &self.branches
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn contains(&self, branch: &BranchId) -> bool {
        self.branches.contains(branch)
    }
}

impl fmt::Display for ModelConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

/// Scenario context. The eight driving contexts are built in; anything else is `Custom`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Context {
    City,
    Fog,
    Junction,
    Motorway,
    Night,
    Rain,
    Rural,
    Snow,
    Custom(String),
}

impl Context {
    pub const BUILTIN: [Context; 8] = [
        Context::City,
        Context::Fog,
        Context::Junction,
        Context::Motorway,
        Context::Night,
        Context::Rain,
        Context::Rural,
        Context::Snow,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            Context::City => "city",
            Context::Fog => "fog",
            Context::Junction => "junction",
            Context::Motorway => "motorway",
            Context::Night => "night",
            Context::Rain => "rain",
            Context::Rural => "rural",
            Context::Snow => "snow",
            Context::Custom(s) => s,
        }
    }
}

impl FromStr for Context {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::invalid("context", "must not be empty"));
        }
        Ok(Context::BUILTIN
            .iter()
            .find(|c| c.as_str() == s)
            .cloned()
            .unwrap_or_else(|| Context::Custom(s.to_owned())))
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Context {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Context {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Axis-aligned box in corner format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub const fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        BBox { x1, y1, x2, y2 }
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn is_valid(&self) -> bool {
        [self.x1, self.y1, self.x2, self.y2].iter().all(|v| v.is_finite())
            && self.x1 < self.x2
            && self.y1 < self.y2
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

impl From<[f64; 4]> for BBox {
    fn from(c: [f64; 4]) -> Self {
        BBox::new(c[0], c[1], c[2], c[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.coords()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class_id: u32,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub confidence: f64,
}

impl Detection {
    pub fn new(class_id: u32, bbox: impl Into<BBox>, confidence: f64) -> Self {
        Detection {
            class_id,
            bbox: bbox.into(),
            confidence,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.bbox.is_valid() && (0.0..=1.0).contains(&self.confidence)
    }
}

pub type DetectionSet = Vec<Detection>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_id_is_sorted_and_order_free() {
        let a = ModelConfiguration::new(["cL", "cR"]).unwrap();
        let b = ModelConfiguration::new(["cR", "cL"]).unwrap();
        assert_eq!(a.id(), "cL+cR");
        assert_eq!(a, b);
        assert_eq!(ModelConfiguration::parse(a.id()).unwrap(), a);
    }

    #[test]
    fn empty_configuration_is_rejected() {
        let none: [&str; 0] = [];
        assert!(matches!(
            ModelConfiguration::new(none),
            Err(Error::EmptyConfiguration)
        ));
    }

    #[test]
    fn fixed_sensor_with_motor_power_is_invalid() {
        let s = SensorSpec {
            id: "cam".into(),
            modality: Modality::Camera,
            p_meas: 1.9,
            p_motor: 0.5,
            freq_hz: 10.0,
            spinning: false,
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn contexts_round_trip_through_strings() {
        for c in Context::BUILTIN {
            assert_eq!(c.as_str().parse::<Context>().unwrap(), c);
        }
        assert_eq!(
            "tunnel".parse::<Context>().unwrap(),
            Context::Custom("tunnel".into())
        );
        let json = serde_json::to_string(&Context::Fog).unwrap();
        assert_eq!(json, "\"fog\"");
    }

    #[test]
    fn detection_serializes_box_as_array() {
        let d = Detection::new(2, [0.0, 1.0, 2.0, 3.0], 0.5);
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"class_id":2,"box":[0.0,1.0,2.0,3.0],"confidence":0.5}"#);
    }
}
