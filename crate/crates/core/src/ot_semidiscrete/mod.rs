//! Semi-discrete optimal transport from the uniform measure on a convex
//! source polygon to a weighted site cloud, solved by damped Newton on the
//! Kantorovich dual.

mod laguerre;
mod linalg;
mod plan;
mod target;

pub use laguerre::{laguerre_cells, CellGeometry, Facet, LaguerreBuilder};
pub use linalg::{conjugate_gradient, SymmetricSparse};
pub use plan::{ConvergenceStats, IterationRecord, PlanFile, PlanFileError, SemiDiscretePlan};
pub use target::{
    discretize_target, lloyd_relax, orbit_permutations, stratified_points, symmetric_orbit, SiteSymmetry,
    TargetDiscretization, MASS_SUM_TOL,
};

use serde::{Deserialize, Serialize};

use crate::geometry::{ConvexPolygon, Point2};

/// Tolerance on `Σ area(cell_j) = Area(source)` at every iterate.
pub const MASS_BALANCE_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OtError {
    #[error("target needs at least 4 sites, got {0}")]
    TooFewSites(usize),
    #[error("symmetrized targets need a multiple of 4 sites, got {0}")]
    OrbitSize(usize),
    #[error("target has no sites")]
    EmptyTarget,
    #[error("{0} sites but {1} masses")]
    LengthMismatch(usize, usize),
    #[error("site {0} lies outside the target domain")]
    SiteOutsideTarget(usize),
    #[error("site {0} has a non-positive mass")]
    NonPositiveMass(usize),
    #[error("target mass {target} does not match source area {expected}")]
    MassMismatch { target: f64, expected: f64 },
    #[error("target contains duplicate sites")]
    DuplicateSite,
    #[error("initial weights leave {0} empty cells")]
    EmptyInitialCell(usize),
    #[error("weights are not finite")]
    NonFiniteWeights,
    #[error("no convergence after {iterations} iterations (max relative mass error {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("damped Newton step could not be accepted at iteration {0}")]
    StepRejected(usize),
    #[error("linear solve failed at iteration {0}")]
    LinearSolve(usize),
    #[error("mass balance violated: cell areas sum to {0}")]
    MassBalance(f64),
}

/// Starting weights for the Newton iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub enum InitialWeights {
    /// `w = 0`: the plain power diagram. Aborts if any cell is empty.
    Zero,
    /// Voronoi diagram of the site cloud shrunk into the source, so that every
    /// initial cell contains its own contracted site.
    #[default]
    Contracted,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Stop when `max_j |area_j - mass_j| / mass_j <= tol_mass`.
    pub tol_mass: f64,
    pub max_iters: usize,
    pub init: InitialWeights,
    /// Step halvings allowed per iteration.
    pub max_halvings: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_mass: 1e-7,
            max_iters: 50,
            init: InitialWeights::Contracted,
            max_halvings: 40,
        }
    }
}

/// Gradient `area_j - mass_j` and Hessian of the dual objective, which is
/// concave in the weights: its Hessian is the negated graph Laplacian with
/// off-diagonal entries `length(facet_jk) / (2 |y_j - y_k|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualDerivatives {
    pub gradient: Vec<f64>,
    pub hessian: SymmetricSparse,
}

/// Derivatives from precomputed cells.
pub fn derivatives_from_cells(sites: &[Point2<f64>], masses: &[f64], cells: &[CellGeometry]) -> DualDerivatives {
    let n = sites.len();
    let gradient = cells.iter().zip(masses).map(|(c, m)| c.area - m).collect();
    // Average the two one-sided facet lengths so the matrix is symmetric.
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (j, c) in cells.iter().enumerate() {
        for f in &c.facets {
            let coef = 0.5 * f.length / (2.0 * sites[j].dist(&sites[f.site]));
            rows[j].push((f.site, coef));
            rows[f.site].push((j, coef));
        }
    }
    DualDerivatives {
        gradient,
        hessian: SymmetricSparse::negated_laplacian(rows),
    }
}

/// Gradient and Hessian of the dual at `weights`.
pub fn dual_gradient_hessian(
    source: &ConvexPolygon<f64>,
    target: &TargetDiscretization,
    weights: &[f64],
) -> DualDerivatives {
    let cells = LaguerreBuilder::new(source.clone(), &target.sites).cells(weights, None);
    derivatives_from_cells(&target.sites, &target.masses, &cells)
}

/// Dual objective `Σ_j ∫_{cell_j} (|x - y_j|^2 - w_j) dx + Σ_j w_j mass_j`.
pub fn dual_objective(sites: &[Point2<f64>], masses: &[f64], weights: &[f64], cells: &[CellGeometry]) -> f64 {
    let mut total = 0.0;
    for j in 0..sites.len() {
        if let Some(p) = &cells[j].polygon {
            total += p.second_moment_about(&sites[j]) - weights[j] * cells[j].area;
        }
        total += weights[j] * masses[j];
    }
    total
}

fn max_relative_error(cells: &[CellGeometry], masses: &[f64]) -> f64 {
    cells
        .iter()
        .zip(masses)
        .map(|(c, m)| (c.area - m).abs() / m)
        .fold(0.0, f64::max)
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Weights making the diagram the Voronoi diagram of `s y_j + b`, where the
/// contracted cloud lies inside `source`. With `c_j = |y_j|^2 - w_j` the power
/// diagram of `(y, c)` and the Voronoi diagram of `s y + b` coincide when
/// `c_j = s |y_j|^2 + 2 <y_j, b>`.
pub fn contracted_weights(source: &ConvexPolygon<f64>, sites: &[Point2<f64>]) -> Vec<f64> {
    let fits = |s: f64, b: Point2<f64>| sites.iter().all(|y| source.contains(&(*y * s + b)) && source.boundary_distance(&(*y * s + b)) > 0.0);
    let (s, b) = if fits(1.0, Point2::origin()) {
        (1.0, Point2::origin())
    } else {
        let centre = source.centroid();
        let (mut lo, mut hi) = (0.0, 1.0);
        // Points scaled about the centroid of their own cloud.
        let mean = sites.iter().fold(Point2::origin(), |a, y| a + *y) * (1.0 / sites.len() as f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if fits(mid, centre - mean * mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * 0.999, centre - mean * (lo * 0.999))
    };
    let w: Vec<f64> = sites.iter().map(|y| (1.0 - s) * y.norm_sq() - 2.0 * y.dot(&b)).collect();
    let w0 = w[0];
    w.into_iter().map(|x| x - w0).collect()
}

/// Damped Newton solve of the semi-discrete problem.
///
/// Each step solves `L δ = mass - area` with `L` the Laplacian of the cell
/// adjacency and `δ_0 = 0`, then halves the step until every cell keeps area
/// at least `ε₀ = ½ min(min mass, min initial area)`, the gradient norm has
/// dropped by the factor `1 - α/2`, and the dual objective has not decreased.
pub fn solve(
    source: &ConvexPolygon<f64>,
    target: &TargetDiscretization,
    opts: &SolveOptions,
) -> Result<SemiDiscretePlan, OtError> {
    let n = target.len();
    if n == 0 {
        return Err(OtError::EmptyTarget);
    }
    let builder = LaguerreBuilder::new(source.clone(), &target.sites);
    let source_area = source.area();
    let mut weights = match &opts.init {
        InitialWeights::Zero => vec![0.0; n],
        InitialWeights::Contracted => contracted_weights(source, &target.sites),
        InitialWeights::Given(w) => {
            if w.len() != n {
                return Err(OtError::LengthMismatch(n, w.len()));
            }
            let w0 = w[0];
            w.iter().map(|x| x - w0).collect()
        }
    };
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(OtError::NonFiniteWeights);
    }
    let mut cells = builder.cells(&weights, None);
    let empty = cells.iter().filter(|c| c.is_empty()).count();
    if empty > 0 {
        return Err(OtError::EmptyInitialCell(empty));
    }
    let min_mass = target.masses.iter().copied().fold(f64::INFINITY, f64::min);
    let min_area = cells.iter().map(|c| c.area).fold(f64::INFINITY, f64::min);
    let eps0 = 0.5 * min_mass.min(min_area);

    let mut trace = Vec::new();
    let mut objective = dual_objective(&target.sites, &target.masses, &weights, &cells);
    let mut iter = 0;
    loop {
        let area_sum: f64 = cells.iter().map(|c| c.area).sum();
        if (area_sum - source_area).abs() > MASS_BALANCE_TOL {
            return Err(OtError::MassBalance(area_sum));
        }
        let err = max_relative_error(&cells, &target.masses);
        let derivs = derivatives_from_cells(&target.sites, &target.masses, &cells);
        let gnorm = l2(&derivs.gradient);
        if iter == 0 {
            trace.push(IterationRecord {
                iteration: 0,
                max_rel_mass_error: err,
                step: 0.0,
                dual_objective: objective,
                min_area: cells.iter().map(|c| c.area).fold(f64::INFINITY, f64::min),
                area_sum,
            });
        }
        if err <= opts.tol_mass {
            break;
        }
        if iter >= opts.max_iters {
            return Err(OtError::NonConvergence { iterations: iter, residual: err });
        }
        iter += 1;
        // The Laplacian is minus the dual Hessian; pin site 0.
        let rhs: Vec<f64> = derivs.gradient.iter().map(|g| -g).collect();
        let delta = derivs
            .hessian
            .solve_pinned_laplacian(&rhs, 0, 1e-12, 20 * n + 100)
            .ok_or(OtError::LinearSolve(iter))?;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = weights.iter().zip(&delta).map(|(w, d)| w + alpha * d).collect();
            let tc = builder.cells(&trial, Some(&cells));
            let ok_area = tc.iter().all(|c| c.area >= eps0);
            if ok_area {
                let g: Vec<f64> = tc.iter().zip(&target.masses).map(|(c, m)| c.area - m).collect();
                let tobj = dual_objective(&target.sites, &target.masses, &trial, &tc);
                let obj_ok = tobj >= objective - 1e-13 * (1.0 + objective.abs());
                if l2(&g) <= (1.0 - 0.5 * alpha) * gnorm && obj_ok {
                    accepted = Some((trial, tc, tobj));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let (w, c, obj) = accepted.ok_or(OtError::StepRejected(iter))?;
        weights = w;
        cells = c;
        objective = obj;
        trace.push(IterationRecord {
            iteration: iter,
            max_rel_mass_error: max_relative_error(&cells, &target.masses),
            step: alpha,
            dual_objective: objective,
            min_area: cells.iter().map(|c| c.area).fold(f64::INFINITY, f64::min),
            area_sum: cells.iter().map(|c| c.area).sum(),
        });
    }
    let final_error = max_relative_error(&cells, &target.masses);
    Ok(SemiDiscretePlan::from_parts(
        source.clone(),
        target.clone(),
        weights,
        cells,
        ConvergenceStats {
            iterations: iter,
            converged: true,
            final_max_rel_mass_error: final_error,
            tol_mass: opts.tol_mass,
            trace,
        },
    ))
}
