use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PotentialField;
use crate::geometry::{kite, segment_distance, Point2};

pub(crate) fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sup-norm of `f - mean(f)`.
fn centred_sup(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max)
}

/// Largest accepted distance from a site's symmetric image to the nearest site.
pub const ORBIT_SITE_TOL: f64 = 1e-9;
/// Largest accepted centred mismatch of dual constants along an orbit.
pub const ORBIT_CONSTANT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub samples: usize,
    /// `sup |φ - φ∘R|` after subtracting the mean difference.
    pub sup_r: f64,
    /// `sup |φ - φ∘A|` after subtracting the mean difference.
    pub sup_a: f64,
    pub spacing: f64,
    /// Fraction of samples where `v = φ_x + φ_y` has the sign of its subdomain.
    pub v_sign_fraction: f64,
    /// Mean of `v` on a circle of radius two spacings about the origin.
    pub v_at_origin: f64,
    /// Largest distance from `R y_j` or `Aᵀ y_j` to the nearest site.
    pub orbit_site_defect: f64,
    /// Sup of the mean-centred difference of dual constants `c` between a
    /// site and its image under `R` or `Aᵀ`.
    pub orbit_constant_defect: f64,
}

impl SymmetryReport {
    /// Pass rule for a symmetrized plan: `φ` symmetric to `10 h²`, `v` signs
    /// right on 99% of samples, and the site cloud closed under `R` and `Aᵀ`
    /// with matching dual constants.
    pub fn passes(&self) -> bool {
        let h2 = self.spacing * self.spacing;
        self.sup_r <= 10.0 * h2
            && self.sup_a <= 10.0 * h2
            && self.v_sign_fraction >= 0.99
            && self.orbit_site_defect <= ORBIT_SITE_TOL
            && self.orbit_constant_defect <= ORBIT_CONSTANT_TOL
    }
}

/// How far the sites and dual constants are from being invariant under `R`
/// and `Aᵀ`. `Aᵀ` is two valued on the diagonal; the closer image counts.
fn orbit_defects(field: &PotentialField<'_>) -> (f64, f64) {
    let sites = field.plan.sites();
    let c = field.plan.dual_constants();
    let r = kite::r_map::<f64>();
    let at = kite::a_transpose_map::<f64>();
    let mut site_defect = 0.0f64;
    let mut diffs = [Vec::with_capacity(sites.len()), Vec::with_capacity(sites.len())];
    for (j, y) in sites.iter().enumerate() {
        let images = [
            vec![r.branches()[0].apply(y)],
            at.branches().iter().filter(|b| b.contains(y)).map(|b| b.apply(y)).collect::<Vec<_>>(),
        ];
        for (slot, imgs) in images.iter().enumerate() {
            let best = imgs
                .iter()
                .map(|p| {
                    let k = field.tree.nearest(p).expect("plan has sites");
                    (sites[k].dist(p), k)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0));
            if let Some((d, k)) = best {
                site_defect = site_defect.max(d);
                diffs[slot].push(c[k] - c[j]);
            }
        }
    }
    let const_defect = centred_sup(&diffs[0]).max(centred_sup(&diffs[1]));
    (site_defect, const_defect)
}

/// Symmetry of `φ` under `R` and `A` on `samples` off the diagonal, and the
/// sign structure of `v`: negative on `Ω^{+-} ∪ Ω^{--}`, positive on
/// `Ω^{++} ∪ Ω^{-+}`.
pub fn check_symmetries(field: &PotentialField<'_>, samples: &[Point2<f64>]) -> SymmetryReport {
    let r = kite::r_map::<f64>();
    let a = kite::a_map::<f64>();
    let mut dr = Vec::new();
    let mut da = Vec::new();
    let mut sign_ok = 0usize;
    let mut signed = 0usize;
    for x in samples {
        let Ok(phi) = field.eval_potential(x) else { continue };
        if x.x == x.y {
            continue;
        }
        if let Ok(rx) = r.apply(x) {
            dr.push(phi - field.potential_unchecked(&rx));
        }
        if let Ok(ax) = a.apply(x) {
            da.push(phi - field.potential_unchecked(&ax));
        }
        if let Some(q) = kite::omega_quadrant(x) {
            let v = field.eval_v(x).expect("sample inside");
            signed += 1;
            if (v > 0.0) == q.second_positive() && v != 0.0 {
                sign_ok += 1;
            }
        }
    }
    let rad = 2.0 * field.spacing();
    let ring: Vec<f64> = (0..64)
        .filter_map(|k| {
            let t = std::f64::consts::TAU * k as f64 / 64.0;
            field.eval_v(&Point2::new(rad * t.cos(), rad * t.sin())).ok()
        })
        .collect();
    let (orbit_site_defect, orbit_constant_defect) = orbit_defects(field);
    SymmetryReport {
        orbit_site_defect,
        orbit_constant_defect,
        samples: dr.len(),
        sup_r: centred_sup(&dr),
        sup_a: centred_sup(&da),
        spacing: field.spacing(),
        v_sign_fraction: if signed == 0 { 0.0 } else { sign_ok as f64 / signed as f64 },
        v_at_origin: ring.iter().sum::<f64>() / ring.len().max(1) as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantReport {
    pub samples: usize,
    pub fraction: f64,
    pub exceptions: usize,
    /// Largest distance from an exception to the subdomain dividing lines.
    pub max_exception_distance: f64,
    pub all_gradients_in_target: bool,
}

/// Whether `∇φ` sends `Ω^{±±}` into `Θ^{±±}`.
pub fn quadrant_preservation(field: &PotentialField<'_>, samples: &[Point2<f64>]) -> QuadrantReport {
    let o = Point2::origin();
    let splits = [
        Point2::new(0.5, 0.5),
        Point2::new(-0.5, -0.5),
        Point2::new(-0.5, -1.0 / 6.0),
        Point2::new(-1.0 / 6.0, -0.5),
    ];
    let theta = kite::theta::<f64>();
    let mut total = 0usize;
    let mut good = 0usize;
    let mut worst: f64 = 0.0;
    let mut in_target = true;
    for x in samples {
        let Some(q) = kite::omega_quadrant(x) else { continue };
        let Ok(g) = field.eval_gradient(x) else { continue };
        in_target &= theta.iter().any(|p| p.contains(&g));
        total += 1;
        if kite::theta_quadrant(&g) == Some(q) {
            good += 1;
        } else {
            let d = splits.iter().map(|s| segment_distance(x, &o, s)).fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    QuadrantReport {
        samples: total,
        fraction: if total == 0 { 0.0 } else { good as f64 / total as f64 },
        exceptions: total - good,
        max_exception_distance: worst,
        all_gradients_in_target: in_target,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaResidualReport {
    pub samples: usize,
    pub valid: usize,
    /// Median of `|det D²φ - 1|` over valid stencils.
    pub median_abs_residual: f64,
    pub rho_positive_fraction: f64,
    pub min_rho: f64,
}

/// Monge-Ampère residual and positivity of `ρ` at interior samples.
pub fn ma_residuals(field: &PotentialField<'_>, samples: &[Point2<f64>], r_loc: f64) -> MaResidualReport {
    let mut res = Vec::new();
    let mut pos = 0usize;
    let mut min_rho = f64::INFINITY;
    for x in samples {
        if !field.is_interior(x, r_loc) {
            continue;
        }
        let Ok(h) = field.hessian_estimate(x, r_loc) else { continue };
        res.push((h.det() - 1.0).abs());
        if h.rho() > 0.0 {
            pos += 1;
        }
        min_rho = min_rho.min(h.rho());
    }
    MaResidualReport {
        samples: samples.len(),
        valid: res.len(),
        rho_positive_fraction: if res.is_empty() { 0.0 } else { pos as f64 / res.len() as f64 },
        median_abs_residual: median(res),
        min_rho,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineMonotonicity {
    /// The line is `x - y = offset`.
    pub offset: f64,
    pub pairs: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub lines: Vec<LineMonotonicity>,
    pub min_fraction: f64,
}

/// `count` offsets evenly spread over the range of `x - y` on Ω, avoiding
/// the endpoints.
pub fn default_line_offsets(count: usize) -> Vec<f64> {
    let (lo, hi) = (-1.0 / 3.0, 1.0 / 3.0);
    (0..count).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / count as f64).collect()
}

/// Fraction of consecutive samples along each line `x - y = c` (walked in
/// the `(1, 1)` direction) with `v` nondecreasing. Points within
/// `exclude_radius` of the origin are skipped.
pub fn check_monotone_along_lines(
    field: &PotentialField<'_>,
    offsets: &[f64],
    samples_per_line: usize,
    exclude_radius: f64,
) -> MonotonicityReport {
    let dir = Point2::new(1.0, 1.0);
    let mut lines = Vec::with_capacity(offsets.len());
    for &c in offsets {
        let p0 = Point2::new(0.5 * c, -0.5 * c);
        let (mut tmin, mut tmax) = (f64::NEG_INFINITY, f64::INFINITY);
        for h in field.domain().halfplanes() {
            let nd = h.normal().dot(&dir);
            let room = h.offset() - h.normal().dot(&p0);
            if nd > 0.0 {
                tmax = tmax.min(room / nd);
            } else if nd < 0.0 {
                tmin = tmin.max(room / nd);
            }
        }
        let mut values = Vec::new();
        if tmax > tmin {
            let pad = 1e-9 * (tmax - tmin);
            for k in 0..samples_per_line {
                let t = tmin + pad + (tmax - tmin - 2.0 * pad) * k as f64 / (samples_per_line.max(2) - 1) as f64;
                let x = p0 + dir * t;
                if x.norm() <= exclude_radius {
                    continue;
                }
                if let Ok(v) = field.eval_v(&x) {
                    values.push(v);
                }
            }
        }
        let pairs = values.len().saturating_sub(1);
        let ok = values.windows(2).filter(|w| w[1] >= w[0]).count();
        lines.push(LineMonotonicity {
            offset: c,
            pairs,
            fraction: if pairs == 0 { 1.0 } else { ok as f64 / pairs as f64 },
        });
    }
    let min_fraction = lines.iter().map(|l| l.fraction).fold(1.0, f64::min);
    MonotonicityReport { lines, min_fraction }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMonotonicity {
    pub pairs: usize,
    pub violations: usize,
    pub min_value: f64,
}

/// `<x - x', T(x) - T(x')> >= 0` on random pairs of source points.
pub fn cyclical_monotonicity(field: &PotentialField<'_>, pairs: usize, seed: u64) -> PairMonotonicity {
    let (lo, hi) = field.domain().bbox();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || loop {
        let p = Point2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
        if field.domain().contains(&p) {
            return p;
        }
    };
    let mut violations = 0;
    let mut min_value = f64::INFINITY;
    for _ in 0..pairs {
        let (x, xp) = (draw(), draw());
        let (t, tp) = (field.eval_gradient(&x).unwrap(), field.eval_gradient(&xp).unwrap());
        let val = (x - xp).dot(&(t - tp));
        min_value = min_value.min(val);
        if val < 0.0 {
            violations += 1;
        }
    }
    PairMonotonicity { pairs, violations, min_value }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendreReport {
    pub samples: usize,
    /// `max |φ(x) + φ*(∇φ(x)) - <x, ∇φ(x)>|`.
    pub max_abs_residual: f64,
}

/// Fenchel-Young equality at samples, with `φ*` computed independently as a
/// maximum of `<v, y> - φ(v)` over all vertices of the restricted diagram.
pub fn legendre_consistency(field: &PotentialField<'_>, samples: &[Point2<f64>]) -> LegendreReport {
    let plan = field.plan();
    let verts: Vec<(Point2<f64>, f64)> = plan
        .cells
        .iter()
        .flatten()
        .flat_map(|p| p.vertices().iter().copied())
        .map(|v| (v, field.potential_unchecked(&v)))
        .collect();
    let mut cache: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for x in samples {
        let Ok(j) = field.cell_index(x) else { continue };
        let y = plan.sites()[j];
        let conj = *cache.entry(j).or_insert_with(|| {
            verts.iter().map(|(v, phi)| v.dot(&y) - phi).fold(f64::NEG_INFINITY, f64::max)
        });
        let phi = field.eval_potential(x).unwrap();
        worst = worst.max((phi + conj - x.dot(&y)).abs());
        count += 1;
    }
    LegendreReport { samples: count, max_abs_residual: worst }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::identity_plan;
    use super::*;
    use crate::ot_semidiscrete::{discretize_target, solve, SiteSymmetry, SolveOptions};

    fn kite_plan(n: usize, sym: SiteSymmetry) -> crate::ot_semidiscrete::SemiDiscretePlan {
        let t = discretize_target(n, 21, 10, sym).unwrap();
        solve(&kite::omega(), &t, &SolveOptions { tol_mass: 1e-9, ..Default::default() }).unwrap()
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn potential_is_midpoint_convex() {
        let plan = kite_plan(400, SiteSymmetry::Symmetrized);
        let field = PotentialField::new(&plan);
        let pts = field.uniform_samples(2000, 1);
        for w in pts.chunks(2) {
            let (a, b) = (w[0], w[1]);
            let m = (a + b) * 0.5;
            let lhs = field.eval_potential(&m).unwrap();
            let rhs = 0.5 * (field.eval_potential(&a).unwrap() + field.eval_potential(&b).unwrap());
            assert!(lhs <= rhs + 1e-15);
        }
    }

    #[test]
    fn symmetric_plan_is_symmetric() {
        let plan = kite_plan(400, SiteSymmetry::Symmetrized);
        let field = PotentialField::new(&plan);
        let rep = check_symmetries(&field, &field.uniform_samples(1000, 2));
        assert!(rep.sup_r < 1e-9, "{rep:?}");
        assert!(rep.v_at_origin.abs() < 0.05, "{rep:?}");
        assert!(rep.orbit_site_defect < 1e-12, "{rep:?}");
    }

    #[test]
    fn unsymmetrized_sites_fail_the_orbit_check() {
        let plan = kite_plan(400, SiteSymmetry::Unsymmetrized);
        let field = PotentialField::new(&plan);
        let rep = check_symmetries(&field, &field.uniform_samples(500, 2));
        assert!(rep.orbit_site_defect > 1e-4, "{rep:?}");
        assert!(!rep.passes());
    }

    #[test]
    fn identity_lines_are_monotone() {
        let plan = identity_plan(300, 3);
        let field = PotentialField::with_slit(&plan, None);
        let rep = check_monotone_along_lines(&field, &default_line_offsets(50), 100, 0.0);
        assert_eq!(rep.lines.len(), 50);
        assert_eq!(rep.min_fraction, 1.0);
    }

    #[test]
    fn gradient_map_is_monotone_on_pairs() {
        let plan = kite_plan(400, SiteSymmetry::Unsymmetrized);
        let field = PotentialField::new(&plan);
        let rep = cyclical_monotonicity(&field, 10_000, 4);
        assert_eq!(rep.violations, 0, "{rep:?}");
    }

    #[test]
    fn fenchel_young_holds_on_cells() {
        let plan = kite_plan(200, SiteSymmetry::Symmetrized);
        let field = PotentialField::new(&plan);
        let rep = legendre_consistency(&field, &field.uniform_samples(300, 5));
        assert!(rep.max_abs_residual <= 1e-10, "{rep:?}");
        for j in 0..plan.len() {
            let c = field.conjugate_at_site(j);
            assert!((c - 0.5 * plan.dual_constants()[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn quadrants_map_to_quadrants() {
        let plan = kite_plan(400, SiteSymmetry::Symmetrized);
        let field = PotentialField::new(&plan);
        let rep = quadrant_preservation(&field, &field.uniform_samples(2000, 6));
        assert!(rep.all_gradients_in_target);
        assert!(rep.fraction > 0.95, "{rep:?}");
    }
}
