//! Intervention catalog: accuracy, cost, comfort and complications of each
//! screening method and of colonoscopy, plus the result-node tables.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CatalogError;

const DIST_TOLERANCE: f64 = 1e-9;

/// Identifier of an intervention. Unknown names become [`InterventionId::Device`],
/// which is how new screening devices enter the catalog.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum InterventionId {
    Gfobt,
    Fit,
    BloodBased,
    Sdna,
    Ctc,
    Cc,
    Colonoscopy,
    NoScreening,
    Device(String),
}

impl InterventionId {
    /// The six screening tests of the default catalog, in catalog order.
    pub const DEFAULT_TESTS: [InterventionId; 6] = [
        InterventionId::Gfobt,
        InterventionId::Fit,
        InterventionId::BloodBased,
        InterventionId::Sdna,
        InterventionId::Ctc,
        InterventionId::Cc,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            Self::Gfobt => "gFOBT",
            Self::Fit => "FIT",
            Self::BloodBased => "BloodBased",
            Self::Sdna => "sDNA",
            Self::Ctc => "CTC",
            Self::Cc => "CC",
            Self::Colonoscopy => "Colonoscopy",
            Self::NoScreening => "NoScreening",
            Self::Device(name) => name,
        }
    }

    /// True for screening tests (anything but colonoscopy and no screening).
    pub fn is_test(&self) -> bool {
        !matches!(self, Self::Colonoscopy | Self::NoScreening)
    }

    fn canonical_rank(&self) -> usize {
        match self {
            Self::Gfobt => 0,
            Self::Fit => 1,
            Self::BloodBased => 2,
            Self::Sdna => 3,
            Self::Ctc => 4,
            Self::Cc => 5,
            Self::Colonoscopy => 6,
            Self::NoScreening => 7,
            Self::Device(_) => 8,
        }
    }
}

impl PartialOrd for InterventionId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic on the display name.
impl Ord for InterventionId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl fmt::Display for InterventionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InterventionId {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "gFOBT" => Self::Gfobt,
            "FIT" => Self::Fit,
            "BloodBased" | "Blood" | "blood-test" => Self::BloodBased,
            "sDNA" => Self::Sdna,
            "CTC" => Self::Ctc,
            "CC" => Self::Cc,
            "Colonoscopy" => Self::Colonoscopy,
            "NoScreening" => Self::NoScreening,
            other => Self::Device(other.to_owned()),
        })
    }
}

impl From<&str> for InterventionId {
    fn from(s: &str) -> Self {
        s.parse().unwrap()
    }
}

impl Serialize for InterventionId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for InterventionId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.as_str().into())
    }
}

/// Ordinal comfort level, 1 (colonoscopy) to 4 (no screening).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Comfort(u8);

impl Comfort {
    pub const COLONOSCOPY: Comfort = Comfort(1);
    pub const NOTICEABLE: Comfort = Comfort(2);
    pub const MINOR: Comfort = Comfort(3);
    pub const NONE: Comfort = Comfort(4);

    pub fn new(level: u8) -> Option<Self> {
        (1..=4).contains(&level).then_some(Self(level))
    }

    pub fn level(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Comfort {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Comfort::new(v).ok_or_else(|| format!("comfort level {v} is outside 1..=4"))
    }
}

impl From<Comfort> for u8 {
    fn from(c: Comfort) -> u8 {
        c.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ComplicationKind {
    None,
    Bleeding,
    Retention,
    Perforation,
    /// Residual row, including death.
    #[serde(alias = "Death")]
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complication {
    pub kind: ComplicationKind,
    pub probability: f64,
    pub cost: f64,
}

impl Complication {
    pub const NONE: Complication = Complication {
        kind: ComplicationKind::None,
        probability: 1.0,
        cost: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionSpec {
    pub id: InterventionId,
    pub sensitivity: f64,
    pub specificity: f64,
    pub unit_cost: f64,
    pub comfort: Comfort,
    pub complications: Vec<Complication>,
}

impl InterventionSpec {
    /// A test with no complications.
    pub fn test(
        id: impl Into<InterventionId>,
        sensitivity: f64,
        specificity: f64,
        unit_cost: f64,
        comfort: u8,
    ) -> Self {
        Self {
            id: id.into(),
            sensitivity,
            specificity,
            unit_cost,
            comfort: Comfort::new(comfort).expect("comfort in 1..=4"),
            complications: vec![Complication::NONE],
        }
    }

    pub fn with_complications(mut self, complications: Vec<Complication>) -> Self {
        self.complications = complications;
        self
    }

    /// `P(result | crc)` for a performed test.
    pub fn likelihood(&self, result: ResultState, crc: bool) -> f64 {
        match (result, crc) {
            (ResultState::PredictedTrue, true) => self.sensitivity,
            (ResultState::PredictedFalse, true) => 1.0 - self.sensitivity,
            (ResultState::PredictedTrue, false) => 1.0 - self.specificity,
            (ResultState::PredictedFalse, false) => self.specificity,
            (ResultState::NoResult, _) => 0.0,
        }
    }

    pub fn expected_complication_cost(&self) -> f64 {
        self.complications.iter().map(|c| c.probability * c.cost).sum()
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        let invalid = |reason: String| CatalogError::Invalid {
            id: self.id.to_string(),
            reason,
        };
        for (name, v) in [("sensitivity", self.sensitivity), ("specificity", self.specificity)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} {v} outside [0, 1]")));
            }
        }
        if !(self.unit_cost >= 0.0) {
            return Err(invalid(format!("negative cost {}", self.unit_cost)));
        }
        if self.complications.is_empty() {
            return Err(invalid("empty complication distribution".into()));
        }
        for c in &self.complications {
            if !(0.0..=1.0).contains(&c.probability) || !(c.cost >= 0.0) {
                return Err(invalid(format!("bad complication {c:?}")));
            }
        }
        let total: f64 = self.complications.iter().map(|c| c.probability).sum();
        if (total - 1.0).abs() > DIST_TOLERANCE {
            return Err(invalid(format!("complication probabilities sum to {total}")));
        }
        if self.id == InterventionId::NoScreening && (self.unit_cost != 0.0 || self.comfort != Comfort::NONE) {
            return Err(invalid("no screening must cost 0 at comfort 4".into()));
        }
        Ok(())
    }
}

/// Outcome of a screening or colonoscopy result node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ResultState {
    PredictedTrue,
    PredictedFalse,
    NoResult,
}

impl ResultState {
    pub const PERFORMED: [ResultState; 2] = [ResultState::PredictedTrue, ResultState::PredictedFalse];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::PredictedTrue => "PredictedTrue",
            Self::PredictedFalse => "PredictedFalse",
            Self::NoResult => "NoResult",
        }
    }
}

impl fmt::Display for ResultState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result distribution over `(PredictedTrue, PredictedFalse, NoResult)`.
///
/// # Panics
/// When asked for a performed no-screening "test".
pub fn result_distribution(spec: &InterventionSpec, performed: bool, crc: bool) -> [f64; 3] {
    if !performed {
        return [0.0, 0.0, 1.0];
    }
    assert!(
        spec.id != InterventionId::NoScreening,
        "no screening cannot be performed as a test"
    );
    [
        spec.likelihood(ResultState::PredictedTrue, crc),
        spec.likelihood(ResultState::PredictedFalse, crc),
        0.0,
    ]
}

pub fn complication_distribution(spec: &InterventionSpec) -> &[Complication] {
    &spec.complications
}

/// Comfort of a screening path: colonoscopy dominates whatever came first.
pub fn combined_comfort(screen: &InterventionSpec, colonoscopy_performed: bool) -> Comfort {
    if colonoscopy_performed {
        Comfort::COLONOSCOPY
    } else {
        screen.comfort
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterventionCatalog {
    specs: BTreeMap<InterventionId, InterventionSpec>,
}

impl InterventionCatalog {
    /// Builds a catalog; all eight default ids must be present exactly once.
    pub fn new(specs: Vec<InterventionSpec>) -> Result<Self, CatalogError> {
        let mut map = BTreeMap::new();
        for s in specs {
            s.validate()?;
            let id = s.id.clone();
            if map.insert(id.clone(), s).is_some() {
                return Err(CatalogError::Duplicate(id.to_string()));
            }
        }
        for id in InterventionId::DEFAULT_TESTS
            .iter()
            .chain([&InterventionId::Colonoscopy, &InterventionId::NoScreening])
        {
            if !map.contains_key(id) {
                return Err(CatalogError::Missing(id.to_string()));
            }
        }
        Ok(Self { specs: map })
    }

    pub fn get(&self, id: &InterventionId) -> Result<&InterventionSpec, CatalogError> {
        self.specs.get(id).ok_or_else(|| CatalogError::Unknown(id.to_string()))
    }

    pub fn colonoscopy(&self) -> &InterventionSpec {
        &self.specs[&InterventionId::Colonoscopy]
    }

    pub fn no_screening(&self) -> &InterventionSpec {
        &self.specs[&InterventionId::NoScreening]
    }

    /// Screening tests in canonical order (defaults first, then devices by name).
    pub fn tests(&self) -> Vec<&InterventionSpec> {
        let mut tests: Vec<&InterventionSpec> = self.specs.values().filter(|s| s.id.is_test()).collect();
        tests.sort_by(|a, b| {
            a.id.canonical_rank()
                .cmp(&b.id.canonical_rank())
                .then_with(|| a.id.cmp(&b.id))
        });
        tests
    }

    pub fn specs(&self) -> impl Iterator<Item = &InterventionSpec> {
        self.specs.values()
    }

    /// Adds (or replaces) an intervention, typically a new device.
    pub fn insert(&mut self, spec: InterventionSpec) -> Result<(), CatalogError> {
        spec.validate()?;
        self.specs.insert(spec.id.clone(), spec);
        Ok(())
    }

    pub fn from_json_str(source: &str) -> Result<Self, CatalogError> {
        let specs: Vec<InterventionSpec> =
            serde_json::from_str(source).map_err(|e| CatalogError::Parse(e.to_string()))?;
        Self::new(specs)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self, crate::Error> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_json_str(&text)?)
    }

    pub fn to_json_string(&self) -> String {
        let specs: Vec<&InterventionSpec> = self.specs.values().collect();
        serde_json::to_string_pretty(&specs).expect("catalog serializes")
    }
}

impl Default for InterventionCatalog {
    fn default() -> Self {
        default_catalog()
    }
}

const BLEEDING_COST: f64 = 1241.0;
const RETENTION_COST: f64 = 1241.0;
const PERFORATION_COST: f64 = 2810.0;
const OTHER_COST: f64 = 6621.0;

/// The eight interventions with French reference accuracy, cost and
/// complication figures.
pub fn default_catalog() -> InterventionCatalog {
    use ComplicationKind as K;
    let comp = |kind, probability, cost| Complication {
        kind,
        probability,
        cost,
    };
    let specs = vec![
        InterventionSpec::test(InterventionId::Gfobt, 0.45, 0.978, 12.14, 3),
        InterventionSpec::test(InterventionId::Fit, 0.75, 0.966, 14.34, 3),
        InterventionSpec::test(InterventionId::BloodBased, 0.66, 0.91, 123.13, 3),
        InterventionSpec::test(InterventionId::Sdna, 0.923, 0.866, 236.88, 3),
        InterventionSpec::test(InterventionId::Ctc, 0.8, 0.89, 95.41, 2).with_complications(vec![
            comp(K::None, 0.9996, 0.0),
            comp(K::Perforation, 0.0004, PERFORATION_COST),
        ]),
        InterventionSpec::test(InterventionId::Cc, 0.87, 0.92, 510.24, 2).with_complications(vec![
            comp(K::None, 0.9997, 0.0),
            comp(K::Retention, 0.0003, RETENTION_COST),
        ]),
        InterventionSpec::test(InterventionId::Colonoscopy, 0.97, 0.99, 1000.0, 1).with_complications(vec![
            comp(K::None, 0.998, 0.0),
            comp(K::Bleeding, 0.0006, BLEEDING_COST),
            comp(K::Perforation, 0.001, PERFORATION_COST),
            comp(K::Other, 0.0004, OTHER_COST),
        ]),
        InterventionSpec::test(InterventionId::NoScreening, 0.0, 1.0, 0.0, 4),
    ];
    InterventionCatalog::new(specs).expect("default catalog is valid")
}
