//! Isothermal coordinates `z = u + iv = (x - y) + i(φ_x + φ_y)` of the
//! Brenier potential and numerical checks on the metric `ρ⁻¹ |dz|²`.

mod export;
mod profile;

pub use export::{points_csv, profile_csv, rho_inv_svg};
pub use profile::{
    blowup_check, circle_average, disk_average, fit_log_asymptotics, mean_value_harmonicity, normalize_coordinate, BlowupReport,
    CircleAverage, FnField, HarmonicityReport, LogFit, NormalizedCoordinate, RadialProfile, RadiusRange, UvField,
    CIRCLE_POINTS, MIN_CIRCLE_SAMPLES, TOL_BLOW,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{kite, Point2};
use crate::potential_analysis::{median, HessianEstimate, PotentialField};
use crate::spatial::KdTree;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConformalError {
    #[error("point ({0}, {1}) lies outside the source domain")]
    OutsideDomain(f64, f64),
    #[error("circle of radius {radius} has {count} usable samples, need {MIN_CIRCLE_SAMPLES}")]
    InsufficientSamples { radius: f64, count: usize },
    #[error("{0} usable radii, need at least 4")]
    TooFewRadii(usize),
    #[error("radius range [{r_min}, {r_max}] is empty or non-positive")]
    InvalidRange { r_min: f64, r_max: f64 },
    #[error("log coefficient C = {0} is not positive")]
    NonPositiveC(f64),
    #[error("disk of radius {radius} about ({cu}, {cv}) contains the origin")]
    DiskContainsOrigin { cu: f64, cv: f64, radius: f64 },
}

/// Image of `x` under `f = (u, v)`: `u = x₁ - x₂` exactly and
/// `v = T₁ + T₂` with `T` the transport map. The origin maps to the origin.
pub fn embed(field: &PotentialField<'_>, x: &Point2<f64>) -> Result<Point2<f64>, ConformalError> {
    if x.x == 0.0 && x.y == 0.0 {
        return Ok(Point2::origin());
    }
    let v = field.eval_v(x).map_err(|_| ConformalError::OutsideDomain(x.x, x.y))?;
    Ok(Point2::new(x.x - x.y, v))
}

/// `[[1, -1], [H₁₁ + H₁₂, H₁₂ + H₂₂]]`.
pub fn differential(h: &HessianEstimate) -> [[f64; 2]; 2] {
    [[1.0, -1.0], [h.h11() + h.h12(), h.h12() + h.h22()]]
}

fn det2(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// One point of the conformal sample cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalSample {
    pub x: Point2<f64>,
    pub u: f64,
    pub v: f64,
    pub rho: f64,
    pub hessian: [[f64; 2]; 2],
    pub rho_std_err: f64,
    /// Fitted `∇φ` at `x` from the regression stencil.
    pub smooth_gradient: [f64; 2],
    /// Stencil accepted and `ρ > 0`.
    pub valid: bool,
}

impl ConformalSample {
    pub fn z(&self) -> Point2<f64> {
        Point2::new(self.u, self.v)
    }

    pub fn rho_inv(&self) -> f64 {
        1.0 / self.rho
    }

    pub fn trace(&self) -> f64 {
        self.hessian[0][0] + self.hessian[1][1]
    }

    pub fn det(&self) -> f64 {
        self.hessian[0][0] * self.hessian[1][1] - self.hessian[0][1] * self.hessian[1][0]
    }
}

/// Builds a sample at `x` with a sided regression stencil of radius `r_loc`.
pub fn conformal_sample(field: &PotentialField<'_>, x: &Point2<f64>, r_loc: f64) -> Result<ConformalSample, ConformalError> {
    let z = embed(field, x)?;
    let est = field.sided_hessian_estimate(x, r_loc);
    let (hessian, rho, se, grad, ok) = match est {
        Ok(h) => (h.matrix, h.rho(), h.rho_std_err, h.gradient, h.rho() > 0.0),
        Err(_) => ([[f64::NAN; 2]; 2], f64::NAN, f64::NAN, [f64::NAN; 2], false),
    };
    Ok(ConformalSample { x: *x, u: z.x, v: z.y, rho, hessian, rho_std_err: se, smooth_gradient: grad, valid: ok })
}

/// Lattice points of a `grid_n x grid_n` grid over the bounding box of the
/// source that lie inside it.
pub fn source_grid(field: &PotentialField<'_>, grid_n: usize) -> Vec<Point2<f64>> {
    let (lo, hi) = field.domain().bbox();
    let step = Point2::new((hi.x - lo.x) / grid_n as f64, (hi.y - lo.y) / grid_n as f64);
    (0..grid_n * grid_n)
        .map(|k| Point2::new(lo.x + (k / grid_n) as f64 * step.x + 0.5 * step.x, lo.y + (k % grid_n) as f64 * step.y + 0.5 * step.y))
        .filter(|p| field.domain().contains(p))
        .collect()
}

/// The sampled conformal factor, with a kd-tree over valid image points.
#[derive(Debug)]
pub struct ConformalField<'a> {
    pub field: &'a PotentialField<'a>,
    pub r_loc: f64,
    pub samples: Vec<ConformalSample>,
    valid: Vec<usize>,
    tree: KdTree,
    max_gap: f64,
}

impl<'a> ConformalField<'a> {
    /// Samples the source on a `grid_n` lattice with regression radius `r_loc`.
    pub fn new(field: &'a PotentialField<'a>, grid_n: usize, r_loc: f64) -> Self {
        let pts = source_grid(field, grid_n);
        let samples: Vec<ConformalSample> =
            pts.par_iter().map(|x| conformal_sample(field, x, r_loc).expect("grid point inside")).collect();
        Self::from_samples(field, samples, r_loc)
    }

    pub fn from_samples(field: &'a PotentialField<'a>, samples: Vec<ConformalSample>, r_loc: f64) -> Self {
        let valid: Vec<usize> = (0..samples.len()).filter(|&k| samples[k].valid).collect();
        let pts: Vec<Point2<f64>> = valid.iter().map(|&k| samples[k].z()).collect();
        Self { field, r_loc, tree: KdTree::new(&pts), valid, samples, max_gap: 2.0 * spacing_uv(field) }
    }

    pub fn valid_samples(&self) -> impl Iterator<Item = &ConformalSample> {
        self.valid.iter().map(|&k| &self.samples[k])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.len()
    }

    pub fn spacing_uv(&self) -> f64 {
        spacing_uv(self.field)
    }

    /// Largest distance from a query point to its nearest valid sample for
    /// the query to count as covered.
    pub fn max_gap(&self) -> f64 {
        self.max_gap
    }

    /// Inverse-distance weighted value of `g` over the 8 nearest valid
    /// samples in the image plane; `None` where the cloud has a hole.
    pub fn interpolate<G: Fn(&ConformalSample) -> f64>(&self, z: &Point2<f64>, g: G) -> Option<f64> {
        let nn = self.tree.knn(z, 8);
        let first = *nn.first()?;
        if self.tree.points()[first].dist(z) > self.max_gap {
            return None;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for k in nn {
            let s = &self.samples[self.valid[k]];
            let d = self.tree.points()[k].dist(z);
            if d < 1e-14 {
                return Some(g(s));
            }
            let w = 1.0 / (d * d);
            num += w * g(s);
            den += w;
        }
        Some(num / den)
    }

    /// Distance from the origin to the image of the source boundary.
    pub fn image_inradius(&self) -> f64 {
        let poly = self.field.domain();
        let c = poly.centroid();
        let verts = poly.vertices();
        let mut best = f64::INFINITY;
        for k in 0..verts.len() {
            let (a, b) = (verts[k], verts[(k + 1) % verts.len()]);
            for i in 0..=2000 {
                let t = i as f64 / 2000.0;
                let p = a + (b - a) * t;
                let p = p + (c - p) * 1e-9;
                if let Ok(z) = embed(self.field, &p) {
                    best = best.min(z.norm());
                }
            }
        }
        best
    }
}

impl UvField for ConformalField<'_> {
    fn value(&self, z: &Point2<f64>) -> Option<f64> {
        self.interpolate(z, ConformalSample::rho_inv)
    }
}

/// Site spacing carried to the image plane: `u` and `v` are both sums of
/// two coordinates, so lengths scale by `√2`.
pub fn spacing_uv(field: &PotentialField<'_>) -> f64 {
    std::f64::consts::SQRT_2 * field.spacing()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub samples: usize,
    /// Pairs whose sources are more than `separation` apart.
    pub separation: f64,
    pub min_image_distance: f64,
    /// Separated pairs whose images are closer than `1e-12`.
    pub collisions: usize,
    /// Counts of images in the open quadrants `(+,+), (-,+), (-,-), (+,-)`.
    pub quadrant_counts: [usize; 4],
    pub passed: bool,
}

/// Embeds a `grid_n x grid_n` lattice of the source and looks for distinct
/// sources with coincident images. Pairs closer than four spacings in the
/// source are skipped, since `v` is constant on each cell.
pub fn injectivity_check(field: &PotentialField<'_>, grid_n: usize) -> InjectivityReport {
    let pts = source_grid(field, grid_n);
    let images: Vec<Point2<f64>> = pts.iter().map(|x| embed(field, x).expect("grid point inside")).collect();
    let separation = 4.0 * field.spacing();
    let tree = KdTree::new(&images);
    let mut min_d = f64::INFINITY;
    let mut collisions = 0usize;
    let mut quadrant_counts = [0usize; 4];
    for (k, z) in images.iter().enumerate() {
        match (z.x > 0.0, z.x < 0.0, z.y > 0.0, z.y < 0.0) {
            (true, _, true, _) => quadrant_counts[0] += 1,
            (_, true, true, _) => quadrant_counts[1] += 1,
            (_, true, _, true) => quadrant_counts[2] += 1,
            (true, _, _, true) => quadrant_counts[3] += 1,
            _ => {}
        }
        // Nearest images whose sources are well separated.
        for j in tree.knn(z, 16) {
            if j == k || pts[j].dist(&pts[k]) <= separation {
                continue;
            }
            let d = images[j].dist(z);
            min_d = min_d.min(d);
            if d < 1e-12 {
                collisions += 1;
            }
        }
    }
    InjectivityReport {
        samples: pts.len(),
        separation,
        min_image_distance: min_d,
        collisions: collisions / 2,
        quadrant_counts,
        passed: collisions == 0 && quadrant_counts.iter().all(|&c| c > 0),
    }
}

/// Residuals of the isothermal identities at one sample. `Df` is the
/// central difference, with step `delta`, of the smoothed embedding
/// `x ↦ (x₁ - x₂, ĝ₁ + ĝ₂)` where `ĝ` is the fitted gradient; `H` and `ρ`
/// come from the regression at `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    /// `(det Df - ρ) / ρ`.
    pub det_df: f64,
    /// `(u_x² + v_x² - H₁₁ ρ) / (H₁₁ ρ)`.
    pub dx_norm: f64,
    /// `(u_y² + v_y² - H₂₂ ρ) / (H₂₂ ρ)`.
    pub dy_norm: f64,
    /// `u_x u_y + v_x v_y - H₁₂ ρ`.
    pub cross: f64,
    /// `det H - 1`.
    pub monge_ampere: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricIdentityReport {
    pub samples: usize,
    pub valid: usize,
    pub delta: f64,
    pub median_rel_det_df: f64,
    pub median_rel_dx_norm: f64,
    pub median_rel_dy_norm: f64,
    pub median_abs_cross: f64,
    pub median_abs_monge_ampere: f64,
    /// Spearman correlation of `|det H - 1|` with `|u_x² + v_x² - H₁₁ρ|`.
    pub rank_correlation: f64,
}

fn smooth_v(field: &PotentialField<'_>, x: &Point2<f64>, r_loc: f64) -> Option<f64> {
    field.sided_hessian_estimate(x, r_loc).ok().map(|h| h.gradient[0] + h.gradient[1])
}

/// Identity residuals at one source point, or `None` where a stencil fails.
pub fn identity_residuals(field: &PotentialField<'_>, x: &Point2<f64>, r_loc: f64, delta: f64) -> Option<IdentityResiduals> {
    let h = field.sided_hessian_estimate(x, r_loc).ok()?;
    let rho = h.rho();
    if rho <= 0.0 {
        return None;
    }
    let side = x.y - x.x;
    let probe = |dx: f64, dy: f64| {
        let p = Point2::new(x.x + dx, x.y + dy);
        // Difference quotients must not straddle the slit.
        if field.slit_distance(x) <= r_loc + delta && (p.y - p.x) * side <= 0.0 {
            return None;
        }
        smooth_v(field, &p, r_loc)
    };
    let v_x = (probe(delta, 0.0)? - probe(-delta, 0.0)?) / (2.0 * delta);
    let v_y = (probe(0.0, delta)? - probe(0.0, -delta)?) / (2.0 * delta);
    let df = [[1.0, -1.0], [v_x, v_y]];
    let (a, b, c) = (h.h11(), h.h12(), h.h22());
    Some(IdentityResiduals {
        det_df: (det2(&df) - rho) / rho,
        dx_norm: (1.0 + v_x * v_x - a * rho) / (a * rho),
        dy_norm: (1.0 + v_y * v_y - c * rho) / (c * rho),
        cross: (-1.0 + v_x * v_y) - b * rho,
        monge_ampere: h.det() - 1.0,
    })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; `NaN` for fewer than two points.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    if n < 2 || b.len() != n {
        return f64::NAN;
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let mean = (n - 1) as f64 / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let (x, y) = (ra[k] - mean, rb[k] - mean);
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    sab / (saa * sbb).sqrt()
}

/// Isothermal identity residuals over `samples`, skipping points whose
/// stencils fail or reach the boundary.
pub fn metric_identity_residuals(field: &PotentialField<'_>, samples: &[Point2<f64>], r_loc: f64) -> MetricIdentityReport {
    let delta = r_loc;
    let res: Vec<IdentityResiduals> = samples
        .par_iter()
        .filter(|x| field.domain().boundary_distance(x) > r_loc + delta)
        .filter_map(|x| identity_residuals(field, x, r_loc, delta))
        .collect();
    let col = |f: fn(&IdentityResiduals) -> f64| median(res.iter().map(|r| f(r).abs()).collect());
    let ma: Vec<f64> = res.iter().map(|r| r.monge_ampere.abs()).collect();
    let dx: Vec<f64> = res.iter().map(|r| r.dx_norm.abs()).collect();
    MetricIdentityReport {
        samples: samples.len(),
        valid: res.len(),
        delta,
        median_rel_det_df: col(|r| r.det_df),
        median_rel_dx_norm: col(|r| r.dx_norm),
        median_rel_dy_norm: col(|r| r.dy_norm),
        median_abs_cross: col(|r| r.cross),
        median_abs_monge_ampere: col(|r| r.monge_ampere),
        rank_correlation: spearman(&ma, &dx),
    }
}

/// Algebraic identity residuals for an exact Hessian, used as a fixture.
pub fn exact_identity_residuals(h: [[f64; 2]; 2]) -> IdentityResiduals {
    let (a, b, c) = (h[0][0], h[0][1], h[1][1]);
    let rho = a + 2.0 * b + c;
    let (v_x, v_y) = (a + b, b + c);
    let df = [[1.0, -1.0], [v_x, v_y]];
    IdentityResiduals {
        det_df: (det2(&df) - rho) / rho,
        dx_norm: (1.0 + v_x * v_x - a * rho) / (a * rho),
        dy_norm: (1.0 + v_y * v_y - c * rho) / (c * rho),
        cross: (-1.0 + v_x * v_y) - b * rho,
        monge_ampere: a * c - b * b - 1.0,
    }
}

/// Symmetries of the conformal data: `ρ∘R = ρ`, `ρ∘A = ρ` and `v∘A = -v`
/// in the source, `ρ∘H = ρ` in the image plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalSymmetryReport {
    pub pairs_r: usize,
    /// Fraction of `(x, R x)` pairs with `|Δρ| ≤ 3 σ`, `σ` the combined
    /// standard error of the two regressions.
    pub rho_r_fraction: f64,
    pub pairs_a: usize,
    pub rho_a_fraction: f64,
    /// Fraction of `(x, A x)` pairs with `|v(Ax) + v(x)| ≤ 3 σ_v`, where
    /// `σ_v = σ_ρ · r_loc` is the matching error scale for values of `v`.
    pub v_a_fraction: f64,
    pub pairs_h: usize,
    /// Fraction of valid samples `s` with `|ρ⁻¹(s) - ρ⁻¹(u, -v)|` within
    /// three combined standard errors, the partner value interpolated.
    pub rho_h_fraction: f64,
    /// Image of `R` is `G`: largest `|f(Rx) - G f(x)|` over the samples.
    pub max_embed_g_defect: f64,
    pub passed: bool,
}

/// Fraction required of every symmetry comparison.
pub const SYMMETRY_FRACTION: f64 = 0.95;

pub fn conformal_symmetries(cf: &ConformalField<'_>, samples: &[Point2<f64>]) -> ConformalSymmetryReport {
    let field = cf.field;
    let r_loc = cf.r_loc;
    let r = kite::r_map::<f64>();
    let a = kite::a_map::<f64>();
    let g = kite::g_map::<f64>();
    let estimate = |x: &Point2<f64>| -> Option<HessianEstimate> {
        if !field.is_interior(x, r_loc) {
            return None;
        }
        field.hessian_estimate(x, r_loc).ok().filter(|h| h.rho() > 0.0)
    };
    let (mut pr, mut okr, mut pa, mut oka, mut okv) = (0usize, 0usize, 0usize, 0usize, 0usize);
    let mut g_defect = 0.0f64;
    for x in samples {
        let Ok(fx) = embed(field, x) else { continue };
        if let Ok(rx) = r.apply(x) {
            if let Ok(frx) = embed(field, &rx) {
                if x.x != x.y {
                    let gfx = g.apply(&fx).expect("linear map");
                    g_defect = g_defect.max(frx.dist(&gfx));
                }
            }
        }
        let Some(hx) = estimate(x) else { continue };
        if let Ok(rx) = r.apply(x) {
            if let Some(hr) = estimate(&rx) {
                pr += 1;
                let s = hx.rho_std_err.hypot(hr.rho_std_err);
                if (hx.rho() - hr.rho()).abs() <= 3.0 * s {
                    okr += 1;
                }
            }
        }
        if let Ok(ax) = a.apply(x) {
            if let Some(ha) = estimate(&ax) {
                pa += 1;
                let s = hx.rho_std_err.hypot(ha.rho_std_err);
                if (hx.rho() - ha.rho()).abs() <= 3.0 * s {
                    oka += 1;
                }
                let va = field.eval_v(&ax).unwrap_or(f64::NAN);
                if (va + fx.y).abs() <= 3.0 * s * r_loc {
                    okv += 1;
                }
            }
        }
    }
    let (mut ph, mut okh) = (0usize, 0usize);
    let se_inv = |s: &ConformalSample| s.rho_std_err / (s.rho * s.rho);
    for s in cf.valid_samples().step_by(7) {
        let zh = Point2::new(s.u, -s.v);
        let (Some(a1), Some(e1)) = (cf.value(&zh), cf.interpolate(&zh, se_inv)) else { continue };
        ph += 1;
        if (s.rho_inv() - a1).abs() <= 3.0 * se_inv(s).hypot(e1) {
            okh += 1;
        }
    }
    let frac = |ok: usize, n: usize| if n == 0 { 0.0 } else { ok as f64 / n as f64 };
    let (fr, fa, fv, fh) = (frac(okr, pr), frac(oka, pa), frac(okv, pa), frac(okh, ph));
    ConformalSymmetryReport {
        pairs_r: pr,
        rho_r_fraction: fr,
        pairs_a: pa,
        rho_a_fraction: fa,
        v_a_fraction: fv,
        pairs_h: ph,
        rho_h_fraction: fh,
        max_embed_g_defect: g_defect,
        passed: [fr, fa, fv, fh].iter().all(|&f| f >= SYMMETRY_FRACTION) && g_defect < 1e-9,
    }
}

/// Discrete cross-derivative symmetry of the estimated Hessian field:
/// `∂_y H₁₁ = ∂_x H₁₂` and `∂_y H₁₂ = ∂_x H₂₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossDerivativeReport {
    pub valid: usize,
    pub delta: f64,
    pub median_residual_1: f64,
    pub median_residual_2: f64,
    /// Median standard error of one cross-derivative difference, propagated
    /// from the regression standard errors.
    pub median_noise: f64,
    pub passed: bool,
}

pub fn cross_derivative_symmetry(field: &PotentialField<'_>, samples: &[Point2<f64>], r_loc: f64) -> CrossDerivativeReport {
    let delta = r_loc;
    let rows: Vec<(f64, f64, f64)> = samples
        .par_iter()
        .filter(|x| field.is_interior(x, r_loc + delta))
        .filter_map(|x| {
            let at = |dx: f64, dy: f64| field.hessian_estimate(&Point2::new(x.x + dx, x.y + dy), r_loc).ok();
            let (xp, xm, yp, ym) = (at(delta, 0.0)?, at(-delta, 0.0)?, at(0.0, delta)?, at(0.0, -delta)?);
            let d = 2.0 * delta;
            let r1 = (yp.h11() - ym.h11()) / d - (xp.h12() - xm.h12()) / d;
            let r2 = (yp.h12() - ym.h12()) / d - (xp.h22() - xm.h22()) / d;
            let se = [xp, xm, yp, ym].iter().map(|h| h.rho_std_err * h.rho_std_err).sum::<f64>().sqrt() / d;
            Some((r1.abs(), r2.abs(), se))
        })
        .collect();
    let m1 = median(rows.iter().map(|r| r.0).collect());
    let m2 = median(rows.iter().map(|r| r.1).collect());
    let noise = median(rows.iter().map(|r| r.2).collect());
    CrossDerivativeReport {
        valid: rows.len(),
        delta,
        median_residual_1: m1,
        median_residual_2: m2,
        median_noise: noise,
        passed: !rows.is_empty() && m1 <= 3.0 * noise && m2 <= 3.0 * noise,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::ot_semidiscrete::{discretize_target, solve, SemiDiscretePlan, SiteSymmetry, SolveOptions};
    use std::sync::OnceLock;

    pub(crate) fn plan_2000() -> &'static SemiDiscretePlan {
        static PLAN: OnceLock<SemiDiscretePlan> = OnceLock::new();
        PLAN.get_or_init(|| {
            let t = discretize_target(2000, 1, 20, SiteSymmetry::Symmetrized).unwrap();
            solve(&kite::omega(), &t, &SolveOptions::default()).unwrap()
        })
    }

    #[test]
    fn exact_hessian_identities_vanish() {
        let r = exact_identity_residuals([[2.0, 0.0], [0.0, 0.5]]);
        assert_eq!(r.det_df, 0.0);
        assert_eq!(r.dx_norm, 0.0);
        assert_eq!(r.dy_norm, 0.0);
        assert_eq!(r.cross, 0.0);
        assert_eq!(r.monge_ampere, 0.0);
        let h = HessianEstimate::from_matrix([[2.0, 0.0], [0.0, 0.5]]);
        assert_eq!(differential(&h), [[1.0, -1.0], [2.0, 0.5]]);
        assert_eq!(det2(&differential(&h)), h.rho());
    }

    #[test]
    fn spearman_of_monotone_and_reversed() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&a, &[10.0, 20.0, 25.0, 100.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&a, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert!(spearman(&a[..1], &a[..1]).is_nan());
    }

    #[test]
    fn embedding_basics() {
        let plan = plan_2000();
        let f = PotentialField::new(plan);
        assert_eq!(embed(&f, &Point2::origin()).unwrap(), Point2::origin());
        assert!(matches!(embed(&f, &Point2::new(0.4, -0.4)), Err(ConformalError::OutsideDomain(..))));
        for x in f.uniform_samples(500, 3) {
            let z = embed(&f, &x).unwrap();
            assert_eq!(z.x, x.x - x.y);
            if let Some(q) = kite::omega_quadrant(&x) {
                assert_eq!(z.x < 0.0, q.upper(), "{x:?}");
                if kite::omega_quadrant(&x) == Some(kite::Quadrant::PlusMinus) && f.slit_distance(&x) > 0.05 {
                    assert!(z.x < 0.0 && z.y < 0.0);
                }
            }
        }
    }

    #[test]
    fn embedding_is_injective_and_covers_quadrants() {
        let plan = plan_2000();
        let f = PotentialField::new(plan);
        let rep = injectivity_check(&f, 100);
        assert_eq!(rep.collisions, 0);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn symmetries_of_conformal_data() {
        let plan = plan_2000();
        let f = PotentialField::new(plan);
        let cf = ConformalField::new(&f, 120, f.default_radius());
        let rep = conformal_symmetries(&cf, &f.uniform_samples(1000, 5));
        assert!(rep.max_embed_g_defect < 1e-12, "{rep:?}");
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn cross_derivatives_are_symmetric() {
        let plan = plan_2000();
        let f = PotentialField::new(plan);
        let rep = cross_derivative_symmetry(&f, &f.uniform_samples(600, 8), f.default_radius());
        assert!(rep.valid > 100 && rep.passed, "{rep:?}");
    }
}
