//! The Brenier potential of a solved plan and the checks built on it.
//!
//! `φ(x) = max_j <x, y_j> - c_j / 2` is evaluated with a max-affine query on a
//! kd-tree; its gradient is the site of the cell holding `x`. Second
//! derivatives come from a local weighted affine fit of cell centroid to site.

mod checks;
pub(crate) use checks::median;
mod hessian;

pub use checks::{
    check_monotone_along_lines, check_symmetries, cyclical_monotonicity, default_line_offsets, legendre_consistency,
    ma_residuals,
    quadrant_preservation, LegendreReport, ORBIT_CONSTANT_TOL, ORBIT_SITE_TOL, LineMonotonicity, MaResidualReport, MonotonicityReport, PairMonotonicity,
    QuadrantReport, SymmetryReport,
};
pub use hessian::{HessianEstimate, RegressionStencil, MAX_CONDITION, MIN_STENCIL};

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{kite, segment_distance, ConvexPolygon, Point2};
use crate::ot_semidiscrete::{stratified_points, SemiDiscretePlan};
use crate::spatial::{KdTree, OffsetBounds};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("point ({0}, {1}) lies outside the source domain")]
    OutsideDomain(f64, f64),
    #[error("stencil at ({0}, {1}) reaches the slit")]
    NearSlit(f64, f64),
    #[error("stencil at ({0}, {1}) reaches the domain boundary")]
    NearBoundary(f64, f64),
    #[error("stencil has {0} cells, need at least {MIN_STENCIL}")]
    InsufficientStencil(usize),
    #[error("regression normal matrix has condition number {0:e}")]
    IllConditioned(f64),
}

/// Segment in the source along which the transport map jumps, if any.
pub type Slit = Option<(Point2<f64>, Point2<f64>)>;

/// Read-only evaluator for `φ`, `∇φ` and `D²φ` of a plan.
#[derive(Debug)]
pub struct PotentialField<'a> {
    plan: &'a SemiDiscretePlan,
    tree: KdTree,
    offsets: Vec<f64>,
    bounds: OffsetBounds,
    /// Centroids of nonempty cells and the owning site index.
    centroids: Vec<(usize, Point2<f64>, f64)>,
    centroid_tree: KdTree,
    slit: Slit,
}

impl<'a> PotentialField<'a> {
    /// Field over the kite source, whose map is discontinuous along the slit.
    pub fn new(plan: &'a SemiDiscretePlan) -> Self {
        let (a, b) = kite::slit::<f64>();
        Self::with_slit(plan, Some((a, b)))
    }

    pub fn with_slit(plan: &'a SemiDiscretePlan, slit: Slit) -> Self {
        let tree = KdTree::new(plan.sites());
        let offsets: Vec<f64> = plan.dual_constants().iter().map(|c| -0.5 * c).collect();
        let bounds = tree.offset_bounds(&offsets);
        let centroids: Vec<(usize, Point2<f64>, f64)> = plan
            .cells
            .iter()
            .enumerate()
            .filter_map(|(j, c)| c.as_ref().map(|p| (j, p.centroid(), p.area())))
            .collect();
        let pts: Vec<Point2<f64>> = centroids.iter().map(|c| c.1).collect();
        Self {
            plan,
            tree,
            offsets,
            bounds,
            centroid_tree: KdTree::new(&pts),
            centroids,
            slit,
        }
    }

    pub fn plan(&self) -> &SemiDiscretePlan {
        self.plan
    }

    pub fn domain(&self) -> &ConvexPolygon<f64> {
        &self.plan.source
    }

    pub fn spacing(&self) -> f64 {
        self.plan.spacing()
    }

    /// Default regression radius, three site spacings.
    pub fn default_radius(&self) -> f64 {
        3.0 * self.spacing()
    }

    pub fn slit_distance(&self, x: &Point2<f64>) -> f64 {
        match &self.slit {
            Some((a, b)) => segment_distance(x, a, b),
            None => f64::INFINITY,
        }
    }

    fn check_inside(&self, x: &Point2<f64>) -> Result<(), AnalysisError> {
        if self.plan.source.contains(x) {
            Ok(())
        } else {
            Err(AnalysisError::OutsideDomain(x.x, x.y))
        }
    }

    /// Index of the cell containing `x`; the lowest index wins ties.
    pub fn cell_index(&self, x: &Point2<f64>) -> Result<usize, AnalysisError> {
        self.check_inside(x)?;
        Ok(self.locate(x).0)
    }

    fn locate(&self, x: &Point2<f64>) -> (usize, f64) {
        self.tree
            .argmax_affine(x, &self.offsets, &self.bounds)
            .expect("plan has sites")
    }

    pub fn eval_potential(&self, x: &Point2<f64>) -> Result<f64, AnalysisError> {
        self.check_inside(x)?;
        Ok(self.locate(x).1)
    }

    /// Max-affine value without the domain check, for maps of the domain
    /// that land on its boundary up to rounding.
    pub fn potential_unchecked(&self, x: &Point2<f64>) -> f64 {
        self.locate(x).1
    }

    pub fn eval_gradient(&self, x: &Point2<f64>) -> Result<Point2<f64>, AnalysisError> {
        self.check_inside(x)?;
        Ok(self.plan.sites()[self.locate(x).0])
    }

    /// `v = φ_x + φ_y`.
    pub fn eval_v(&self, x: &Point2<f64>) -> Result<f64, AnalysisError> {
        self.eval_gradient(x).map(|g| g.x + g.y)
    }

    /// Discrete Legendre conjugate at site `j`: `c_j / 2`.
    pub fn conjugate_at_site(&self, j: usize) -> f64 {
        -self.offsets[j]
    }

    /// Regression stencil of cells whose centroid lies within `r_loc` of `x`.
    pub fn stencil(&self, x: &Point2<f64>, r_loc: f64) -> Result<RegressionStencil, AnalysisError> {
        self.check_inside(x)?;
        if self.slit_distance(x) <= r_loc {
            return Err(AnalysisError::NearSlit(x.x, x.y));
        }
        if self.plan.source.boundary_distance(x) <= r_loc {
            return Err(AnalysisError::NearBoundary(x.x, x.y));
        }
        let members = self
            .centroid_tree
            .within_radius(x, r_loc)
            .into_iter()
            .map(|k| {
                let (j, c, a) = self.centroids[k];
                (j, c, a)
            })
            .collect();
        Ok(RegressionStencil::new(*x, r_loc, members))
    }

    /// Stencil that may touch the slit: within `r_loc` of it, only cells
    /// whose centroid lies on the same side of the diagonal as `x` are used,
    /// since `φ` is smooth up to the slit from either side.
    pub fn sided_stencil(&self, x: &Point2<f64>, r_loc: f64) -> Result<RegressionStencil, AnalysisError> {
        self.check_inside(x)?;
        if self.plan.source.boundary_distance(x) <= r_loc {
            return Err(AnalysisError::NearBoundary(x.x, x.y));
        }
        let side = (x.y - x.x).signum();
        let near_slit = self.slit_distance(x) <= r_loc;
        if near_slit && side == 0.0 {
            return Err(AnalysisError::NearSlit(x.x, x.y));
        }
        let members = self
            .centroid_tree
            .within_radius(x, r_loc)
            .into_iter()
            .map(|k| self.centroids[k])
            .filter(|(_, c, _)| !near_slit || (c.y - c.x) * side > 0.0)
            .collect();
        Ok(RegressionStencil::new(*x, r_loc, members))
    }

    /// Hessian estimate from [`Self::sided_stencil`].
    pub fn sided_hessian_estimate(&self, x: &Point2<f64>, r_loc: f64) -> Result<HessianEstimate, AnalysisError> {
        self.sided_stencil(x, r_loc)?.fit(self.plan.sites())
    }

    /// Symmetrized Jacobian of `centroid -> site` near `x`: an estimate of `D²φ(x)`.
    pub fn hessian_estimate(&self, x: &Point2<f64>, r_loc: f64) -> Result<HessianEstimate, AnalysisError> {
        self.stencil(x, r_loc)?.fit(self.plan.sites())
    }

    /// Whether `x` is far enough from the slit and the boundary for smooth
    /// estimates: slit clearance `2 r_loc`, boundary clearance `r_loc`.
    pub fn is_interior(&self, x: &Point2<f64>, r_loc: f64) -> bool {
        self.slit_distance(x) > 2.0 * r_loc && self.plan.source.boundary_distance(x) > r_loc
    }

    /// Seeded stratified sample of the source domain.
    pub fn uniform_samples(&self, count: usize, seed: u64) -> Vec<Point2<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        stratified_points(&self.plan.source, count, &mut rng)
    }

    /// CSV rows `x,y,phi,phi_x,phi_y,h11,h12,h22`; Hessian entries are empty
    /// where the stencil is rejected.
    pub fn sample_csv(&self, points: &[Point2<f64>], r_loc: f64) -> String {
        let mut out = String::from("x,y,phi,phi_x,phi_y,h11,h12,h22\n");
        for p in points {
            let (Ok(phi), Ok(g)) = (self.eval_potential(p), self.eval_gradient(p)) else {
                continue;
            };
            let _ = write!(out, "{:.12},{:.12},{:.12},{:.12},{:.12}", p.x, p.y, phi, g.x, g.y);
            match self.hessian_estimate(p, r_loc) {
                Ok(h) => {
                    let _ = writeln!(out, ",{:.9},{:.9},{:.9}", h.h11(), h.h12(), h.h22());
                }
                Err(_) => out.push_str(",,,\n"),
            }
        }
        out
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::ot_semidiscrete::{lloyd_relax, solve, SolveOptions, TargetDiscretization};

    /// Transport from Ω to a Lloyd cloud on Ω itself: the map is close to
    /// the identity and `φ ≈ |x|^2 / 2`.
    pub fn identity_plan(n: usize, seed: u64) -> SemiDiscretePlan {
        let omega = kite::omega::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = lloyd_relax(&omega, stratified_points(&omega, n, &mut rng), 30);
        let t = TargetDiscretization::uniform(pts, std::slice::from_ref(&omega), omega.area()).unwrap();
        solve(&omega, &t, &SolveOptions { tol_mass: 1e-9, ..Default::default() }).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::identity_plan;
    use super::*;

    #[test]
    fn identity_transport_gradient_is_close_to_identity() {
        let plan = identity_plan(400, 1);
        let field = PotentialField::with_slit(&plan, None);
        let h = plan.spacing();
        for x in field.uniform_samples(200, 2) {
            let g = field.eval_gradient(&x).unwrap();
            assert!(g.dist(&x) < 2.0 * h, "{x:?} -> {g:?}");
        }
    }

    #[test]
    fn identity_transport_hessian_is_identity() {
        let plan = identity_plan(2000, 3);
        let field = PotentialField::with_slit(&plan, None);
        let r = field.default_radius();
        let mut checked = 0;
        for x in field.uniform_samples(100, 4) {
            if !field.is_interior(&x, r) {
                continue;
            }
            let h = field.hessian_estimate(&x, r).unwrap();
            assert!((h.h11() - 1.0).abs() < 0.05 && h.h12().abs() < 0.05 && (h.h22() - 1.0).abs() < 0.05, "{h:?}");
            checked += 1;
        }
        assert!(checked > 30);
    }

    #[test]
    fn outside_points_rejected() {
        let plan = identity_plan(50, 5);
        let field = PotentialField::new(&plan);
        let far = Point2::new(10.0, 10.0);
        assert!(matches!(field.eval_potential(&far), Err(AnalysisError::OutsideDomain(..))));
        assert!(matches!(field.eval_gradient(&far), Err(AnalysisError::OutsideDomain(..))));
        assert!(matches!(
            field.hessian_estimate(&Point2::new(0.1, 0.1), 0.05),
            Err(AnalysisError::NearSlit(..))
        ));
        assert!(matches!(
            field.hessian_estimate(&Point2::new(-0.45, -0.45), 0.05),
            Err(AnalysisError::NearBoundary(..))
        ));
    }

    #[test]
    fn tiny_stencil_is_insufficient() {
        let plan = identity_plan(50, 6);
        let field = PotentialField::with_slit(&plan, None);
        let x = Point2::new(-0.2, -0.2);
        assert!(matches!(
            field.hessian_estimate(&x, 0.01),
            Err(AnalysisError::InsufficientStencil(_))
        ));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let plan = identity_plan(50, 7);
        let field = PotentialField::with_slit(&plan, None);
        let csv = field.sample_csv(&[Point2::new(-0.2, -0.2), Point2::new(5.0, 5.0)], 0.2);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "x,y,phi,phi_x,phi_y,h11,h12,h22");
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].split(',').count(), 8);
    }
}
