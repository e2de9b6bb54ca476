//! Small exact and entropic discrete transport solvers, used to validate the
//! semi-discrete solver.

mod lp;
mod sinkhorn;

pub use sinkhorn::{solve_sinkhorn, SinkhornOptions};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{ConvexPolygon, HalfPlane, Point2};
use crate::ot_semidiscrete::{laguerre_cells, lloyd_relax, stratified_points, SemiDiscretePlan};
use crate::scalar::{Rational, Scalar};

/// Largest side accepted by the exact solver.
pub const MAX_LP_SIZE: usize = 256;
/// Relative tolerance on equal total masses.
pub const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("total masses differ: {rows} vs {cols}")]
    MassMismatch { rows: f64, cols: f64 },
    #[error("instance {0} x {1} exceeds the exact solver limit")]
    TooLarge(usize, usize),
    #[error("a measure has no points")]
    Empty,
    #[error("masses must be positive and finite")]
    NonPositiveMass,
    #[error("points and masses differ in length")]
    LengthMismatch,
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("entropic iteration produced non-finite potentials")]
    Underflow,
}

/// Weighted point cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub points: Vec<Point2<f64>>,
    pub masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Point2<f64>>, masses: Vec<f64>) -> Result<Self, OracleError> {
        if points.len() != masses.len() {
            return Err(OracleError::LengthMismatch);
        }
        if points.is_empty() {
            return Err(OracleError::Empty);
        }
        if masses.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(OracleError::NonPositiveMass);
        }
        Ok(Self { points, masses })
    }

    pub fn uniform(points: Vec<Point2<f64>>, total: f64) -> Result<Self, OracleError> {
        let m = total / points.len().max(1) as f64;
        let masses = vec![m; points.len()];
        Self::new(points, masses)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }
}

/// `|x - y|^2 / 2`.
pub fn quadratic_cost(x: &Point2<f64>, y: &Point2<f64>) -> f64 {
    0.5 * (*x - *y).norm_sq()
}

/// A coupling between two discrete measures, stored densely row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePlan {
    pub rows: DiscreteMeasure,
    pub cols: DiscreteMeasure,
    pub coupling: Vec<f64>,
    pub cost: f64,
}

impl DiscretePlan {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.coupling[i * self.cols.len() + j]
    }

    pub fn row_marginals(&self) -> Vec<f64> {
        self.coupling.chunks(self.cols.len()).map(|r| r.iter().sum()).collect()
    }

    pub fn col_marginals(&self) -> Vec<f64> {
        let n = self.cols.len();
        let mut out = vec![0.0; n];
        for (k, v) in self.coupling.iter().enumerate() {
            out[k % n] += v;
        }
        out
    }

    /// Largest absolute deviation of either marginal from its measure.
    pub fn marginal_error(&self) -> f64 {
        let r = self.row_marginals().iter().zip(&self.rows.masses).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let c = self.col_marginals().iter().zip(&self.cols.masses).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        r.max(c)
    }

    /// Cells carrying positive mass, as `(row, col, mass)`.
    pub fn support(&self) -> Vec<(usize, usize, f64)> {
        let n = self.cols.len();
        self.coupling
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(k, &v)| (k / n, k % n, v))
            .collect()
    }
}

fn check_masses(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(), OracleError> {
    let (a, b) = (mu.total(), nu.total());
    if (a - b).abs() > MASS_TOL * a.max(b) {
        return Err(OracleError::MassMismatch { rows: a, cols: b });
    }
    Ok(())
}

fn to_rational(v: f64) -> Rational {
    <Rational as Scalar>::from_f64(v)
}

/// Exact minimum-cost coupling for the quadratic cost, by the
/// transportation simplex in rational arithmetic. Column masses are rescaled
/// exactly so both totals agree; the reported cost is the exact optimum
/// rounded to `f64`.
pub fn solve_exact_lp(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<DiscretePlan, OracleError> {
    if mu.len() > MAX_LP_SIZE || nu.len() > MAX_LP_SIZE {
        return Err(OracleError::TooLarge(mu.len(), nu.len()));
    }
    check_masses(mu, nu)?;
    let a: Vec<Rational> = mu.masses.iter().map(|&m| to_rational(m)).collect();
    let b_raw: Vec<Rational> = nu.masses.iter().map(|&m| to_rational(m)).collect();
    let (sa, sb): (Rational, Rational) = (a.iter().cloned().sum(), b_raw.iter().cloned().sum());
    let scale = sa / sb;
    let b: Vec<Rational> = b_raw.into_iter().map(|v| v * scale.clone()).collect();
    let rx: Vec<Point2<Rational>> = mu.points.iter().map(|p| p.to_rational()).collect();
    let ry: Vec<Point2<Rational>> = nu.points.iter().map(|p| p.to_rational()).collect();
    let half = Rational::half();
    let cost: Vec<Rational> = rx
        .iter()
        .flat_map(|x| ry.iter().map(|y| (x.clone() - y.clone()).norm_sq() * half.clone()))
        .collect();
    let basis = lp::transport_simplex(&a, &b, &cost);
    let n = nu.len();
    let mut coupling = vec![0.0; mu.len() * n];
    let mut total = Rational::from_integer(0.into());
    for (i, j, f) in basis {
        total += f.clone() * cost[i * n + j].clone();
        coupling[i * n + j] = Scalar::to_f64(&f);
    }
    Ok(DiscretePlan { rows: mu.clone(), cols: nu.clone(), coupling, cost: Scalar::to_f64(&total) })
}

/// Quadrature of a convex domain by `m` Lloyd-relaxed points: the Voronoi
/// cell centroids carry the cell areas.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub measure: DiscreteMeasure,
    pub cells: Vec<ConvexPolygon<f64>>,
}

impl Quadrature {
    pub fn new(domain: &ConvexPolygon<f64>, m: usize, seed: u64, lloyd_iters: usize) -> Result<Self, OracleError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = lloyd_relax(domain, stratified_points(domain, m, &mut rng), lloyd_iters);
        let cells: Vec<ConvexPolygon<f64>> =
            laguerre_cells(domain, &pts, &vec![0.0; pts.len()]).into_iter().flatten().collect();
        let points = cells.iter().map(|c| c.centroid()).collect();
        let masses = cells.iter().map(|c| c.area()).collect();
        Ok(Self { measure: DiscreteMeasure::new(points, masses)?, cells })
    }

    /// `sum_i int_{Q_i} |x - c_i|^2 / 2`.
    pub fn within_cell_cost(&self) -> f64 {
        self.cells.iter().zip(&self.measure.points).map(|(c, g)| 0.5 * c.second_moment_about(g)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub sites: usize,
    pub samples: usize,
    /// Continuous cost of the semi-discrete plan.
    pub semi_discrete_cost: f64,
    /// Exact optimum of the discrete problem from quadrature points to sites.
    pub lp_cost: f64,
    /// Cost, on the same discrete problem, of the coupling the semi-discrete
    /// plan induces: quadrature point `i` sends `|Q_i ∩ L_j|` to site `j`.
    pub induced_cost: f64,
    /// Largest marginal violation of the induced coupling.
    pub induced_marginal_error: f64,
    /// `sum_i int_{Q_i} |x - c_i|^2 / 2`; `lp_cost` plus this bounds the
    /// semi-discrete cost from above.
    pub within_cell_cost: f64,
    /// `(induced_cost - lp_cost) / lp_cost`.
    pub relative_gap: f64,
    /// `(lp_cost + within_cell_cost - semi_discrete_cost) / semi_discrete_cost`.
    pub continuous_gap: f64,
}

/// Discretizes the source of `plan` by an `m`-point quadrature and compares
/// the coupling induced by the semi-discrete plan with the exact optimum.
pub fn cross_validate(plan: &SemiDiscretePlan, m: usize, seed: u64) -> Result<CrossValidation, OracleError> {
    let quad = Quadrature::new(&plan.source, m, seed, 30)?;
    let nu = DiscreteMeasure::new(plan.sites().to_vec(), plan.target.masses.clone())?;
    let lp = solve_exact_lp(&quad.measure, &nu)?;

    let n = nu.len();
    let laguerre: Vec<Option<(ConvexPolygon<f64>, Vec<HalfPlane<f64>>)>> =
        plan.cells.iter().map(|c| c.as_ref().map(|c| (c.clone(), c.halfplanes()))).collect();
    let mut rows = vec![0.0; quad.measure.len()];
    let mut cols = vec![0.0; n];
    let mut induced = 0.0;
    for (i, (q, x)) in quad.cells.iter().zip(&quad.measure.points).enumerate() {
        let (lo, hi) = q.bbox();
        for (j, cell) in laguerre.iter().enumerate() {
            let Some((poly, planes)) = cell else { continue };
            let (plo, phi) = poly.bbox();
            if plo.x > hi.x || phi.x < lo.x || plo.y > hi.y || phi.y < lo.y {
                continue;
            }
            if let Some(piece) = q.clip_all(planes.iter()) {
                let a = piece.area();
                induced += a * quadratic_cost(x, &nu.points[j]);
                rows[i] += a;
                cols[j] += a;
            }
        }
    }
    let row_err = rows.iter().zip(&quad.measure.masses).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let col_err = cols.iter().zip(&nu.masses).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let within = quad.within_cell_cost();
    let sd = plan.transport_cost();
    Ok(CrossValidation {
        sites: n,
        samples: quad.measure.len(),
        semi_discrete_cost: sd,
        lp_cost: lp.cost,
        induced_cost: induced,
        induced_marginal_error: row_err.max(col_err),
        within_cell_cost: within,
        relative_gap: (induced - lp.cost) / lp.cost,
        continuous_gap: (lp.cost + within - sd) / sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::kite;
    use crate::ot_semidiscrete::{discretize_target, solve, SiteSymmetry, SolveOptions, TargetDiscretization};
    use rand::Rng;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    fn random_measure(n: usize, rng: &mut ChaCha8Rng) -> DiscreteMeasure {
        let pts = (0..n).map(|_| p(rng.gen(), rng.gen())).collect();
        DiscreteMeasure::uniform(pts, 1.0).unwrap()
    }

    #[test]
    fn identical_sets_cost_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu = random_measure(10, &mut rng);
        let plan = solve_exact_lp(&mu, &mu).unwrap();
        assert_eq!(plan.cost, 0.0);
        for i in 0..10 {
            assert!((plan.get(i, i) - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn two_by_two() {
        let mu = DiscreteMeasure::new(vec![p(0.0, 0.0), p(1.0, 0.0)], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(vec![p(0.0, 1.0), p(1.0, 1.0)], vec![0.5, 0.5]).unwrap();
        let plan = solve_exact_lp(&mu, &nu).unwrap();
        assert_eq!(plan.cost, 0.5);
        assert_eq!(plan.get(0, 0), 0.5);
        assert_eq!(plan.get(1, 1), 0.5);
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for perm in permutations(n - 1) {
            for pos in 0..=perm.len() {
                let mut q = perm.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn eight_by_eight_matches_assignment_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..3 {
            let (mu, nu) = (random_measure(8, &mut rng), random_measure(8, &mut rng));
            let plan = solve_exact_lp(&mu, &nu).unwrap();
            let best = permutations(8)
                .iter()
                .map(|s| (0..8).map(|i| quadratic_cost(&mu.points[i], &nu.points[s[i]])).sum::<f64>() / 8.0)
                .fold(f64::INFINITY, f64::min);
            assert!((plan.cost - best).abs() < 1e-14, "{} vs {best}", plan.cost);
        }
    }

    #[test]
    fn lp_plan_is_feasible_sparse_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mu = DiscreteMeasure::new(
            (0..40).map(|_| p(rng.gen(), rng.gen())).collect(),
            (0..40).map(|_| rng.gen_range(0.5..1.5)).collect(),
        )
        .unwrap();
        let total = mu.total();
        let nu = DiscreteMeasure::uniform((0..30).map(|_| p(rng.gen(), rng.gen())).collect(), total).unwrap();
        let plan = solve_exact_lp(&mu, &nu).unwrap();
        assert!(plan.marginal_error() < 1e-10);
        assert!(plan.coupling.iter().all(|&v| v >= 0.0));
        let supp = plan.support();
        assert!(supp.len() < 40 + 30);
        for _ in 0..1000 {
            let (a, b) = (supp[rng.gen_range(0..supp.len())], supp[rng.gen_range(0..supp.len())]);
            let dx = mu.points[a.0] - mu.points[b.0];
            let dy = nu.points[a.1] - nu.points[b.1];
            assert!(dx.dot(&dy) >= -1e-15);
        }
    }

    #[test]
    fn input_errors() {
        let a = DiscreteMeasure::uniform(vec![p(0.0, 0.0)], 1.0).unwrap();
        let b = DiscreteMeasure::uniform(vec![p(0.0, 0.0)], 2.0).unwrap();
        assert!(matches!(solve_exact_lp(&a, &b), Err(OracleError::MassMismatch { .. })));
        let big = DiscreteMeasure::uniform(vec![p(0.0, 0.0); 257], 1.0).unwrap();
        assert!(matches!(solve_exact_lp(&big, &a), Err(OracleError::TooLarge(257, 1))));
        assert_eq!(DiscreteMeasure::new(vec![], vec![]), Err(OracleError::Empty));
        assert_eq!(DiscreteMeasure::new(vec![p(0.0, 0.0)], vec![0.0]), Err(OracleError::NonPositiveMass));
    }

    #[test]
    fn single_site_matches_second_moment() {
        let omega = kite::omega::<f64>();
        let y = p(0.3, -0.3);
        let t = TargetDiscretization::new(vec![y], vec![omega.area()], &kite::theta(), omega.area()).unwrap();
        let plan = solve(&omega, &t, &SolveOptions::default()).unwrap();
        let exact = 0.5 * omega.second_moment_about(&y);
        let cv = cross_validate(&plan, 16, 1).unwrap();
        assert!((cv.semi_discrete_cost - exact).abs() < 1e-14);
        assert!((cv.lp_cost + cv.within_cell_cost - exact).abs() < 1e-13, "{cv:?}");
        assert!((cv.induced_cost - cv.lp_cost).abs() < 1e-13);
    }

    #[test]
    fn sixteen_sites_sixteen_samples() {
        let t = discretize_target(16, 1, 20, SiteSymmetry::Symmetrized).unwrap();
        let plan = solve(&kite::omega(), &t, &SolveOptions::default()).unwrap();
        let reports: Vec<CrossValidation> = [16, 64, 256].iter().map(|&m| cross_validate(&plan, m, 2).unwrap()).collect();
        for r in &reports {
            assert!(r.induced_marginal_error < 1e-10, "{r:?}");
            assert!(r.continuous_gap >= 0.0);
        }
        let gaps: Vec<f64> = reports.iter().map(|r| r.relative_gap).collect();
        assert!(gaps[0] >= 0.0 && gaps[0] <= 0.02, "{gaps:?}");
        assert!(gaps[1] <= 1.1 * gaps[0] && gaps[2] <= 1.1 * gaps[1], "{gaps:?}");
    }
}
