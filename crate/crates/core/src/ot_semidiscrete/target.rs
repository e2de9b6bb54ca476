//! Discretizations of the target measure: stratified site clouds, Lloyd
//! relaxation, and the symmetric orbit construction on Θ.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::laguerre::LaguerreBuilder;
use super::OtError;
use crate::geometry::{kite, ConvexPolygon, Point2};

/// Tolerance on `Σ masses = source area`.
pub const MASS_SUM_TOL: f64 = 1e-12;

/// Sites and their masses. Masses are positive and sum to the source area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDiscretization {
    pub sites: Vec<Point2<f64>>,
    pub masses: Vec<f64>,
}

impl TargetDiscretization {
    /// Validates sites against `domain` (a union of convex pieces) and the
    /// mass total against `source_area`.
    pub fn new(
        sites: Vec<Point2<f64>>,
        masses: Vec<f64>,
        domain: &[ConvexPolygon<f64>],
        source_area: f64,
    ) -> Result<Self, OtError> {
        let t = Self { sites, masses };
        t.validate(domain, source_area)?;
        Ok(t)
    }

    /// Equal masses `source_area / n`.
    pub fn uniform(sites: Vec<Point2<f64>>, domain: &[ConvexPolygon<f64>], source_area: f64) -> Result<Self, OtError> {
        let n = sites.len().max(1);
        let masses = vec![source_area / n as f64; sites.len()];
        Self::new(sites, masses, domain, source_area)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Mean site spacing `sqrt(area / n)`.
    pub fn spacing(&self) -> f64 {
        (self.total_mass() / self.len() as f64).sqrt()
    }

    pub fn validate(&self, domain: &[ConvexPolygon<f64>], source_area: f64) -> Result<(), OtError> {
        if self.sites.is_empty() {
            return Err(OtError::EmptyTarget);
        }
        if self.sites.len() != self.masses.len() {
            return Err(OtError::LengthMismatch(self.sites.len(), self.masses.len()));
        }
        for (i, (y, &m)) in self.sites.iter().zip(&self.masses).enumerate() {
            if !y.is_finite() || !domain.iter().any(|p| p.contains(y)) {
                return Err(OtError::SiteOutsideTarget(i));
            }
            if !(m > 0.0 && m.is_finite()) {
                return Err(OtError::NonPositiveMass(i));
            }
        }
        let total = self.total_mass();
        if (total - source_area).abs() > MASS_SUM_TOL {
            return Err(OtError::MassMismatch { target: total, expected: source_area });
        }
        let mut sorted: Vec<(f64, f64)> = self.sites.iter().map(|p| (p.x, p.y)).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(OtError::DuplicateSite);
        }
        Ok(())
    }
}

/// How the kite target cloud is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum SiteSymmetry {
    /// Orbit of a fundamental-domain cloud under `{Id, R, Aᵀ, R Aᵀ}`.
    #[default]
    Symmetrized,
    /// Independent stratified clouds in each quad of Θ.
    Unsymmetrized,
}

/// Uniform sample of a triangle from two unit-square coordinates.
fn triangle_point(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>, mut s: f64, mut t: f64) -> Point2<f64> {
    if s + t > 1.0 {
        s = 1.0 - s;
        t = 1.0 - t;
    }
    a + (b - a) * s + (c - a) * t
}

/// `m` stratified points in the triangle `abc`: the triangle is cut into
/// `k^2` congruent subtriangles, `m` of them are picked without replacement,
/// and one uniform point is drawn in each.
fn stratified_triangle(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>, m: usize, rng: &mut ChaCha8Rng) -> Vec<Point2<f64>> {
    if m == 0 {
        return Vec::new();
    }
    let k = (m as f64).sqrt().ceil() as usize;
    let (e1, e2) = ((b - a) * (1.0 / k as f64), (c - a) * (1.0 / k as f64));
    let mut cells: Vec<(Point2<f64>, Point2<f64>, Point2<f64>)> = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k - i {
            let o = a + e1 * i as f64 + e2 * j as f64;
            cells.push((o, o + e1, o + e2));
            if i + j + 1 < k {
                let p = o + e1 + e2;
                cells.push((p, o + e2, o + e1));
            }
        }
    }
    cells.shuffle(rng);
    cells
        .into_iter()
        .take(m)
        .map(|(p, q, r)| triangle_point(p, q, r, rng.gen(), rng.gen()))
        .collect()
}

/// `m` stratified points in a convex polygon, split across a fan
/// triangulation in proportion to area.
pub fn stratified_points(poly: &ConvexPolygon<f64>, m: usize, rng: &mut ChaCha8Rng) -> Vec<Point2<f64>> {
    let v = poly.vertices();
    let tris: Vec<_> = (1..v.len() - 1).map(|i| (v[0], v[i], v[i + 1])).collect();
    let areas: Vec<f64> = tris.iter().map(|(a, b, c)| 0.5 * (*b - *a).cross(&(*c - *a))).collect();
    let counts = apportion(&areas, m);
    let mut out = Vec::with_capacity(m);
    for ((a, b, c), cnt) in tris.into_iter().zip(counts) {
        out.extend(stratified_triangle(a, b, c, cnt, rng));
    }
    out
}

/// Largest-remainder apportionment of `m` items by `weights`.
fn apportion(weights: &[f64], m: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let raw: Vec<f64> = weights.iter().map(|w| w / total * m as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| (raw[j] - raw[j].floor()).total_cmp(&(raw[i] - raw[i].floor())).then(i.cmp(&j)));
    let short = m - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

/// Moves each point to the centroid of its Voronoi cell in `poly`.
pub fn lloyd_relax(poly: &ConvexPolygon<f64>, mut points: Vec<Point2<f64>>, iters: usize) -> Vec<Point2<f64>> {
    for _ in 0..iters {
        if points.len() < 2 {
            break;
        }
        let builder = LaguerreBuilder::new(poly.clone(), &points);
        let cells = builder.cells(&vec![0.0; points.len()], None);
        points = cells
            .iter()
            .zip(&points)
            .map(|(c, p)| c.polygon.as_ref().map_or(*p, |q| q.centroid()))
            .collect();
    }
    points
}

/// Stratified, Lloyd-relaxed site cloud on the shifted kite target with equal
/// masses `Area(Ω) / n`.
pub fn discretize_target(
    n_sites: usize,
    seed: u64,
    lloyd_iters: usize,
    symmetry: SiteSymmetry,
) -> Result<TargetDiscretization, OtError> {
    if n_sites < 4 {
        return Err(OtError::TooFewSites(n_sites));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = kite::theta::<f64>();
    let sites = match symmetry {
        SiteSymmetry::Symmetrized => {
            if !n_sites.is_multiple_of(4) {
                return Err(OtError::OrbitSize(n_sites));
            }
            let base = kite::theta_piece::<f64>(kite::Quadrant::PlusPlus);
            let seeds = stratified_points(&base, n_sites / 4, &mut rng);
            let seeds = lloyd_relax(&base, seeds, lloyd_iters);
            symmetric_orbit(&seeds)
        }
        SiteSymmetry::Unsymmetrized => {
            let counts = apportion(&[theta[0].area(), theta[1].area()], n_sites);
            let mut all = Vec::with_capacity(n_sites);
            for (quad, cnt) in theta.iter().zip(counts) {
                let pts = stratified_points(quad, cnt, &mut rng);
                all.extend(lloyd_relax(quad, pts, lloyd_iters));
            }
            all
        }
    };
    TargetDiscretization::uniform(sites, &theta, kite::omega::<f64>().area())
}

/// Images of fundamental-domain points under `Id, R, Aᵀ, R Aᵀ`, in four
/// consecutive blocks.
pub fn symmetric_orbit(seeds: &[Point2<f64>]) -> Vec<Point2<f64>> {
    let r = kite::r_map::<f64>();
    let at = kite::a_transpose_map::<f64>();
    let mut out = Vec::with_capacity(4 * seeds.len());
    out.extend_from_slice(seeds);
    out.extend(seeds.iter().map(|p| r.apply(p).expect("R is total")));
    let flipped: Vec<_> = seeds.iter().map(|p| at.apply(p).expect("seeds avoid the diagonal")).collect();
    out.extend_from_slice(&flipped);
    out.extend(flipped.iter().map(|p| r.apply(p).expect("R is total")));
    out
}

/// Index permutations of a [`symmetric_orbit`] cloud: `(R, Aᵀ)` images of
/// each site.
pub fn orbit_permutations(n_sites: usize) -> (Vec<usize>, Vec<usize>) {
    let m = n_sites / 4;
    let block = |i: usize| (i / m, i % m);
    let r = (0..n_sites)
        .map(|i| {
            let (b, k) = block(i);
            [1, 0, 3, 2][b] * m + k
        })
        .collect();
    let at = (0..n_sites)
        .map(|i| {
            let (b, k) = block(i);
            [2, 3, 0, 1][b] * m + k
        })
        .collect();
    (r, at)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::kite::{theta_quadrant, Quadrant};

    #[test]
    fn four_sites_form_one_orbit() {
        let t = discretize_target(4, 7, 0, SiteSymmetry::Symmetrized).unwrap();
        let mut quads: Vec<_> = t.sites.iter().map(|p| theta_quadrant(p).unwrap()).collect();
        quads.sort_by_key(|q| q.label());
        let mut all = Quadrant::ALL.to_vec();
        all.sort_by_key(|q| q.label());
        assert_eq!(quads, all);
        let r = kite::r_map::<f64>();
        assert!(r.apply(&t.sites[0]).unwrap().dist(&t.sites[1]) < 1e-15);
    }

    #[test]
    fn masses_sum_to_source_area() {
        for sym in [SiteSymmetry::Symmetrized, SiteSymmetry::Unsymmetrized] {
            let t = discretize_target(400, 3, 2, sym).unwrap();
            assert_eq!(t.len(), 400);
            assert!((t.total_mass() - 1.0 / 3.0).abs() <= 1e-12);
            let theta = kite::theta::<f64>();
            assert!(t.sites.iter().all(|y| theta.iter().any(|q| q.contains(y))));
        }
    }

    #[test]
    fn too_few_sites_rejected() {
        assert!(matches!(discretize_target(3, 0, 0, SiteSymmetry::Symmetrized), Err(OtError::TooFewSites(3))));
        assert!(matches!(discretize_target(10, 0, 0, SiteSymmetry::Symmetrized), Err(OtError::OrbitSize(10))));
        assert!(discretize_target(10, 0, 0, SiteSymmetry::Unsymmetrized).is_ok());
    }

    #[test]
    fn orbit_permutations_are_involutions_matching_maps() {
        let t = discretize_target(40, 5, 1, SiteSymmetry::Symmetrized).unwrap();
        let (rp, ap) = orbit_permutations(40);
        let r = kite::r_map::<f64>();
        let at = kite::a_transpose_map::<f64>();
        for i in 0..40 {
            assert_eq!(rp[rp[i]], i);
            assert_eq!(ap[ap[i]], i);
            assert!(r.apply(&t.sites[i]).unwrap().dist(&t.sites[rp[i]]) < 1e-14);
            assert!(at.apply(&t.sites[i]).unwrap().dist(&t.sites[ap[i]]) < 1e-14);
        }
    }

    #[test]
    fn stratification_fills_each_stratum_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tri = ConvexPolygon::new(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)]).unwrap();
        let pts = stratified_points(&tri, 16, &mut rng);
        assert_eq!(pts.len(), 16);
        assert!(pts.iter().all(|p| tri.contains(p)));
        assert_eq!(apportion(&[1.0, 1.0, 2.0], 5), vec![1, 1, 3]);
    }

    #[test]
    fn lloyd_keeps_points_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let omega = kite::omega::<f64>();
        let pts = lloyd_relax(&omega, stratified_points(&omega, 50, &mut rng), 5);
        assert!(pts.iter().all(|p| omega.contains(p)));
    }
}
