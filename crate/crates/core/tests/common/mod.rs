#![allow(dead_code)]

use serde_json::{json, Value};

use ctxfuse::SystemProfile;

/// Two cameras, a lidar and a radar with one single-sensor branch each.
pub fn small_spec() -> Value {
    json!({
        "schema_version": 1,
        "name": "small",
        "step_duration_s": 0.1,
        "switch_overhead_j": 0.0,
        "sensors": [
            {"id": "cL", "modality": "camera", "p_meas": 1.9, "p_motor": 0.0, "freq_hz": 10.0, "spinning": false},
            {"id": "cR", "modality": "camera", "p_meas": 1.9, "p_motor": 0.0, "freq_hz": 10.0, "spinning": false},
            {"id": "lidar", "modality": "lidar", "p_meas": 9.6, "p_motor": 2.4, "freq_hz": 10.0, "spinning": true},
            {"id": "radar", "modality": "radar", "p_meas": 21.6, "p_motor": 2.4, "freq_hz": 4.0, "spinning": true}
        ],
        "branches": [
            {"id": "cL", "required_sensors": ["cL"], "latency_s": 0.01, "power_w": 10.0, "default_loss": 1.0},
            {"id": "cR", "required_sensors": ["cR"], "latency_s": 0.01, "power_w": 10.0, "default_loss": 1.0},
            {"id": "lidar", "required_sensors": ["lidar"], "latency_s": 0.01, "power_w": 10.0, "default_loss": 1.0},
            {"id": "radar", "required_sensors": ["radar"], "latency_s": 0.01, "power_w": 10.0, "default_loss": 1.0}
        ],
        "knowledge_rules": {"default": ["cL+cR+lidar+radar"]}
    })
}

pub fn profile_from(spec: &Value) -> ctxfuse::Result<SystemProfile> {
    SystemProfile::from_json_str(&spec.to_string(), "test")
}

pub fn small_profile() -> SystemProfile {
    profile_from(&small_spec()).expect("small profile is valid")
}
