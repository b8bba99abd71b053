//! On-disk formats: query files, labeled datasets and structured reports.
//!
//! Everything is JSON, the same syntax family as the network file. Timing
//! fields live in a single `timings_ms` object so golden-file tests can mask
//! them while keeping the rest of the report byte-deterministic.

use relucert_core::bounds::{Concretization, EngineStats, LayerBounds, LinearObjective, Mode};
use relucert_core::network::{BoxDomain, NetworkError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Input region of a query: an explicit box, or a center with an epsilon
/// radius expanded per coordinate (clamped to the dataset's valid range when
/// one applies).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryDomain {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Robustness { center: Vec<f64>, epsilon: f64 },
}

impl QueryDomain {
    pub fn to_box(&self, valid_range: Option<&BoxDomain>) -> Result<BoxDomain, NetworkError> {
        match self {
            QueryDomain::Box { lower, upper } => BoxDomain::new(lower.clone(), upper.clone()),
            QueryDomain::Robustness { center, epsilon } => {
                BoxDomain::ball(center, *epsilon, valid_range)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyKind {
    MaxLeq,
    MinGeq,
}

/// A decidable property of the query objective.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Property {
    pub kind: PropertyKind,
    pub threshold: f64,
}

/// One verification query: a domain, a linear objective over the outputs and
/// an optional property to decide.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Query {
    pub domain: QueryDomain,
    pub objective: ObjectiveSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub property: Option<Property>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub coeffs: Vec<f64>,
    #[serde(default)]
    pub constant: f64,
}

impl From<&ObjectiveSpec> for LinearObjective {
    fn from(o: &ObjectiveSpec) -> LinearObjective {
        LinearObjective {
            coeffs: o.coeffs.clone(),
            constant: o.constant,
        }
    }
}

/// A labeled point of a robustness dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataPoint {
    pub x: Vec<f64>,
    pub label: usize,
}

/// Labeled dataset with optional per-feature valid ranges that epsilon boxes
/// are clamped to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub points: Vec<DataPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_range: Option<ValidRange>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidRange {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ValidRange {
    pub fn to_box(&self) -> Result<BoxDomain, NetworkError> {
        BoxDomain::new(self.lower.clone(), self.upper.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Unknown,
}

/// Objective bounds produced by one mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeBounds {
    pub mode: Mode,
    pub lower: f64,
    pub upper: f64,
}

/// A sampled input whose objective value violates the property. Bound
/// propagation is incomplete, so this demotes the verdict to Unknown rather
/// than proving violation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub point: Vec<f64>,
    pub objective: f64,
}

/// Echo of the engine and CLI configuration that produced a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub mode: String,
    pub alpha: String,
    pub mip_budget_ms: u64,
    pub concretization: Concretization,
    pub tolerance: f64,
    pub seed: u64,
    pub workers: usize,
}

/// Structured result of `verify`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub config: ConfigEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    /// Mode that decided the property (cascade and compare runs).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decided_by: Option<Mode>,
    pub objective_bounds: Vec<ModeBounds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub property: Option<Property>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer_bounds: Option<LayerBounds>,
    pub mip_stats: EngineStats,
    pub timings_ms: BTreeMap<String, f64>,
}

/// Per-mode aggregate of a robustness suite run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteModeSummary {
    pub mode: Mode,
    /// Points proven robust against every competitor label.
    pub solved: usize,
    pub attempted: usize,
    pub skipped_misclassified: usize,
    pub mean_time_ms: f64,
    pub total_time_ms: f64,
}

/// Structured result of `suite`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub tool: String,
    pub version: String,
    pub epsilon: f64,
    pub config: ConfigEcho,
    pub summaries: Vec<SuiteModeSummary>,
    /// Indices of dataset points the network misclassifies, with a note.
    pub skipped: Vec<SkippedPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub index: usize,
    pub note: String,
}
