//! Machine-readable validation report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{HfeError, Result};
use crate::validate::{BcSlices, DirectionReliability, ExclusionReport, RegressionMetrics};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MetricsOutcome {
    Evaluated(RegressionMetrics),
    NotEvaluated { reason: String },
}

impl MetricsOutcome {
    pub fn from_result(r: Result<RegressionMetrics>) -> Self {
        match r {
            Ok(m) => MetricsOutcome::Evaluated(m),
            Err(e) => MetricsOutcome::NotEvaluated {
                reason: e.to_string(),
            },
        }
    }

    pub fn metrics(&self) -> Option<&RegressionMetrics> {
        match self {
            MetricsOutcome::Evaluated(m) => Some(m),
            MetricsOutcome::NotEvaluated { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationSummary {
    pub slope: f64,
    pub intercept: f64,
    pub correction_scale: f64,
    pub correction_offset: f64,
    /// RMS fit residual (g/cm³) when fitted from samples.
    pub residual: Option<f64>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaterialSummary {
    pub nodes: usize,
    pub elements: usize,
    pub mean_density: f64,
    pub min_modulus: f64,
    pub max_modulus: f64,
    pub plastic_elements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BcSummary {
    pub slices: BcSlices,
    pub upper_plane: f64,
    pub lower_plane: f64,
    pub upper_nodes: usize,
    pub lower_nodes: usize,
    pub extrapolated_nodes: usize,
    pub constrained_dofs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub analysis: &'static str,
    pub load_steps: usize,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonSummary {
    pub n_points: usize,
    pub central_fraction: f64,
    pub trabecular_only: bool,
    pub reliability: DirectionReliability,
    pub directions: BTreeMap<&'static str, MetricsOutcome>,
    pub pooled: MetricsOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub n_points: usize,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropagationSummary {
    pub n_points: usize,
    pub defined_cells: usize,
    /// Largest `|error| / spacing`.
    pub max_quick_estimate: f64,
    pub mean_quick_estimate: f64,
    /// Largest error strain component at a cell center.
    pub max_cell_strain: f64,
    /// Largest error strain component anywhere in a cell.
    pub max_cell_peak: f64,
    pub residual: Option<ResidualSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReactionSummary {
    /// Axial reaction (N) summed over the lower BC nodes.
    pub lower_axial: f64,
    pub upper_axial: f64,
    /// `|lower + upper| / max(|lower|, |upper|)`.
    pub imbalance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelComparison {
    pub n_nodes: usize,
    pub directions: BTreeMap<&'static str, MetricsOutcome>,
    pub reaction_a: f64,
    pub reaction_b: f64,
    /// `|b - a| / |a|`.
    pub reaction_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ValidationReport {
    pub seed: u64,
    pub stages: Vec<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub materials: Option<MaterialSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_conditions: Option<BcSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reactions: Option<ReactionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclusion: Option<ExclusionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_propagation: Option<PropagationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clinical: Option<ModelComparison>,
    /// Artifact name to file name, relative to the report.
    pub artifacts: BTreeMap<&'static str, String>,
}

impl ValidationReport {
    pub fn excluded(&self) -> bool {
        self.exclusion.as_ref().is_some_and(|e| e.excluded)
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| HfeError::io(path, e))
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| HfeError::Contract(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
