use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{LaguerreBuilder, OtError, TargetDiscretization};
use crate::geometry::{ConvexPolygon, Point2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub max_rel_mass_error: f64,
    /// Accepted damping factor; 0 for the initial record.
    pub step: f64,
    pub dual_objective: f64,
    pub min_area: f64,
    pub area_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStats {
    pub iterations: usize,
    pub converged: bool,
    pub final_max_rel_mass_error: f64,
    pub tol_mass: f64,
    pub trace: Vec<IterationRecord>,
}

/// A solved semi-discrete transport problem. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SemiDiscretePlan {
    pub source: ConvexPolygon<f64>,
    pub target: TargetDiscretization,
    pub weights: Vec<f64>,
    pub cells: Vec<Option<ConvexPolygon<f64>>>,
    pub stats: ConvergenceStats,
    areas: Vec<f64>,
}

impl SemiDiscretePlan {
    pub(super) fn from_parts(
        source: ConvexPolygon<f64>,
        target: TargetDiscretization,
        weights: Vec<f64>,
        cells: Vec<super::CellGeometry>,
        stats: ConvergenceStats,
    ) -> Self {
        let areas = cells.iter().map(|c| c.area).collect();
        Self {
            source,
            target,
            weights,
            cells: cells.into_iter().map(|c| c.polygon).collect(),
            stats,
            areas,
        }
    }

    /// Rebuilds cells from stored weights.
    pub fn from_weights(
        source: ConvexPolygon<f64>,
        target: TargetDiscretization,
        weights: Vec<f64>,
        stats: ConvergenceStats,
    ) -> Result<Self, OtError> {
        if weights.len() != target.len() {
            return Err(OtError::LengthMismatch(target.len(), weights.len()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(OtError::NonFiniteWeights);
        }
        let cells = LaguerreBuilder::new(source.clone(), &target.sites).cells(&weights, None);
        Ok(Self::from_parts(source, target, weights, cells, stats))
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn sites(&self) -> &[Point2<f64>] {
        &self.target.sites
    }

    pub fn cell_area(&self, j: usize) -> f64 {
        self.areas[j]
    }

    pub fn spacing(&self) -> f64 {
        self.target.spacing()
    }

    /// `c_j = |y_j|^2 - w_j`, so that `φ(x) = max_j <x, y_j> - c_j / 2`.
    pub fn dual_constants(&self) -> Vec<f64> {
        self.sites().iter().zip(&self.weights).map(|(y, w)| y.norm_sq() - w).collect()
    }

    /// `Σ_j ∫_{cell_j} |x - y_j|^2 / 2 dx`.
    pub fn transport_cost(&self) -> f64 {
        self.cells
            .iter()
            .zip(self.sites())
            .filter_map(|(c, y)| c.as_ref().map(|p| 0.5 * p.second_moment_about(y)))
            .sum()
    }

    pub fn to_file(&self) -> PlanFile {
        PlanFile {
            source: self.source.vertices().iter().map(|p| [p.x, p.y]).collect(),
            sites: self.sites().iter().map(|p| [p.x, p.y]).collect(),
            masses: self.target.masses.clone(),
            weights: self.weights.clone(),
            convergence: self.stats.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PlanFileError> {
        let file: PlanFile = serde_json::from_str(text)?;
        file.into_plan()
    }

    /// Cells over the source polygon, with sites drawn as dots.
    pub fn to_svg(&self, size_px: f64) -> String {
        let (lo, hi) = self.source.bbox();
        let span = (hi.x - lo.x).max(hi.y - lo.y);
        let sx = |p: &Point2<f64>| ((p.x - lo.x) / span * size_px, (hi.y - p.y) / span * size_px);
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size_px:.0}" height="{size_px:.0}" viewBox="0 0 {size_px:.0} {size_px:.0}">"#
        );
        let poly = |p: &ConvexPolygon<f64>| {
            p.vertices()
                .iter()
                .map(|v| {
                    let (x, y) = sx(v);
                    format!("{x:.3},{y:.3}")
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(out, r##"<polygon points="{}" fill="#f4f4f4" stroke="black" stroke-width="1"/>"##, poly(&self.source));
        for (j, c) in self.cells.iter().enumerate() {
            if let Some(p) = c {
                let _ = writeln!(
                    out,
                    r##"<polygon data-site="{j}" points="{}" fill="none" stroke="#3060a0" stroke-width="0.5"/>"##,
                    poly(p)
                );
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

/// On-disk form of a plan. Cells are recomputed from the weights on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub source: Vec<[f64; 2]>,
    pub sites: Vec<[f64; 2]>,
    pub masses: Vec<f64>,
    pub weights: Vec<f64>,
    pub convergence: ConvergenceStats,
}

#[derive(Debug, thiserror::Error)]
pub enum PlanFileError {
    #[error("malformed plan JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid source polygon: {0}")]
    Source(#[from] crate::geometry::GeometryError),
    #[error("invalid plan: {0}")]
    Plan(#[from] OtError),
}

impl PlanFile {
    pub fn into_plan(self) -> Result<SemiDiscretePlan, PlanFileError> {
        let source = ConvexPolygon::new(self.source.iter().map(|&[x, y]| Point2::new(x, y)).collect())?;
        if self.sites.len() != self.masses.len() {
            return Err(OtError::LengthMismatch(self.sites.len(), self.masses.len()).into());
        }
        let target = TargetDiscretization {
            sites: self.sites.iter().map(|&[x, y]| Point2::new(x, y)).collect(),
            masses: self.masses,
        };
        Ok(SemiDiscretePlan::from_weights(source, target, self.weights, self.convergence)?)
    }
}
