//! Model, profiles and transcript shipped with the crate.

use crate::bn::{Evidence, Network};

pub const CRC_MODEL_JSON: &str = include_str!("../data/crc_model.json");
pub const SAMPLE_TRANSCRIPT_JSON: &str = include_str!("../data/sample_transcript.json");

/// Named example profiles, `(name, evidence JSON)`.
pub const PROFILES: [(&str, &str); 5] = [
    ("benchmark", include_str!("../data/profiles/benchmark.json")),
    (
        "benchmark_diabetes_hypertension",
        include_str!("../data/profiles/benchmark_diabetes_hypertension.json"),
    ),
    ("older_54_64", include_str!("../data/profiles/older_54_64.json")),
    ("lifestyle_risk", include_str!("../data/profiles/lifestyle_risk.json")),
    ("family_history", include_str!("../data/profiles/family_history.json")),
];

/// The bundled 14-variable CRC network.
pub fn crc_network() -> Network {
    Network::from_json_str(CRC_MODEL_JSON).expect("bundled model is valid")
}

pub fn profile(name: &str) -> Option<Evidence> {
    PROFILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, json)| serde_json::from_str(json).expect("bundled profile is valid"))
}
