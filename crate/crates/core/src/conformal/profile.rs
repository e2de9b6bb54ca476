//! Circle averages in the image plane and what is built from them.

use serde::{Deserialize, Serialize};

use super::{ConformalError, ConformalField, ConformalSample};
use crate::geometry::Point2;
use crate::potential_analysis::median;

/// Points placed on each circle.
pub const CIRCLE_POINTS: usize = 256;
/// Fewest covered points for a circle average to count.
pub const MIN_CIRCLE_SAMPLES: usize = 32;
/// Absolute slack in the trace inequality `H₁₁ + H₂₂ ≥ 2/ρ`.
pub const TOL_BLOW: f64 = 0.05;

/// A scalar field on the image plane, undefined where it returns `None`.
pub trait UvField {
    fn value(&self, z: &Point2<f64>) -> Option<f64>;
}

/// Closure-backed field, for fixtures.
pub struct FnField<F: Fn(&Point2<f64>) -> Option<f64>>(pub F);

impl<F: Fn(&Point2<f64>) -> Option<f64>> UvField for FnField<F> {
    fn value(&self, z: &Point2<f64>) -> Option<f64> {
        (self.0)(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleAverage {
    pub radius: f64,
    pub mean: f64,
    /// Circle points where the field was defined.
    pub count: usize,
}

/// Trapezoid-rule average of `field` over the circle `|z - center| = r`,
/// using `points` equally spaced angles and skipping undefined points.
pub fn circle_average<F: UvField + ?Sized>(
    field: &F,
    center: &Point2<f64>,
    r: f64,
    points: usize,
) -> Result<CircleAverage, ConformalError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for k in 0..points {
        let t = std::f64::consts::TAU * (k as f64 + 0.5) / points as f64;
        let z = Point2::new(center.x + r * t.cos(), center.y + r * t.sin());
        if let Some(v) = field.value(&z) {
            sum += v;
            count += 1;
        }
    }
    if count < MIN_CIRCLE_SAMPLES {
        return Err(ConformalError::InsufficientSamples { radius: r, count });
    }
    Ok(CircleAverage { radius: r, mean: sum / count as f64, count })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicityReport {
    pub center: Point2<f64>,
    /// Radius of the disk whose area average stands in for the value at
    /// the center; zero means the field is evaluated at the center itself.
    pub center_disk_radius: f64,
    pub value_at_center: f64,
    pub circles: Vec<CircleAverage>,
    /// `|average - value_at_center| / |value_at_center|` per radius.
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
}

/// Rings used for a disk average, at equal-area radii.
const DISK_RINGS: usize = 8;

/// Area average over the disk `|z - center| < a`, from circle averages at
/// the midpoints of `DISK_RINGS` equal-area annuli.
pub fn disk_average<F: UvField + ?Sized>(field: &F, center: &Point2<f64>, a: f64) -> Result<f64, ConformalError> {
    let mut sum = 0.0;
    for k in 0..DISK_RINGS {
        let r = a * ((k as f64 + 0.5) / DISK_RINGS as f64).sqrt();
        sum += circle_average(field, center, r, CIRCLE_POINTS)?.mean;
    }
    Ok(sum / DISK_RINGS as f64)
}

/// Mean-value test of harmonicity: circle averages about `center` against
/// the value there. With `center_disk_radius > 0` the center value is the
/// disk average of that radius, which equals the center value for a
/// harmonic field and averages out pointwise estimator noise.
pub fn mean_value_harmonicity<F: UvField + ?Sized>(
    field: &F,
    center: &Point2<f64>,
    radii: &[f64],
    center_disk_radius: f64,
) -> Result<HarmonicityReport, ConformalError> {
    let rmax = radii.iter().cloned().fold(center_disk_radius, f64::max);
    if rmax >= center.norm() {
        return Err(ConformalError::DiskContainsOrigin { cu: center.x, cv: center.y, radius: rmax });
    }
    let value_at_center = if center_disk_radius > 0.0 {
        disk_average(field, center, center_disk_radius)?
    } else {
        field.value(center).ok_or(ConformalError::InsufficientSamples { radius: 0.0, count: 0 })?
    };
    let circles = radii
        .iter()
        .map(|&r| circle_average(field, center, r, CIRCLE_POINTS))
        .collect::<Result<Vec<_>, _>>()?;
    let deviations: Vec<f64> = circles.iter().map(|c| (c.mean - value_at_center).abs() / value_at_center.abs()).collect();
    let max_deviation = deviations.iter().cloned().fold(0.0, f64::max);
    Ok(HarmonicityReport { center: *center, center_disk_radius, value_at_center, circles, deviations, max_deviation })
}

/// Geometric radii for the log profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusRange {
    pub r_min: f64,
    pub r_max: f64,
    pub n_radii: usize,
}

impl RadiusRange {
    pub fn new(r_min: f64, r_max: f64, n_radii: usize) -> Result<Self, ConformalError> {
        if !(r_min > 0.0 && r_max > r_min) {
            return Err(ConformalError::InvalidRange { r_min, r_max });
        }
        if n_radii < 4 {
            return Err(ConformalError::TooFewRadii(n_radii));
        }
        Ok(Self { r_min, r_max, n_radii })
    }

    /// `r_max = 0.65 · inradius` of the image about the origin and
    /// `r_min = max(r_max / 12, 2 · spacing_uv)`, 12 radii. Below two
    /// spacings the regression smooths the singularity away.
    pub fn default_for(cf: &ConformalField<'_>) -> Result<Self, ConformalError> {
        let r_max = 0.65 * cf.image_inradius();
        Self::new((r_max / 12.0).max(2.0 * cf.spacing_uv()), r_max, 12)
    }

    /// Radii from `r_max` down to `r_min`, strictly decreasing.
    pub fn radii(&self) -> Vec<f64> {
        let q = (self.r_min / self.r_max).powf(1.0 / (self.n_radii - 1) as f64);
        (0..self.n_radii).map(|k| self.r_max * q.powi(k as i32)).collect()
    }

    pub fn decades(&self) -> f64 {
        (self.r_max / self.r_min).log10()
    }
}

/// Circle averages of `ρ⁻¹` about the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub radii: Vec<f64>,
    pub rho_inv: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    /// Slope of `ρ⁻¹` against `-log r`.
    pub c: f64,
    pub c_std_err: f64,
    pub h0: f64,
    pub r_squared: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub radii_used: usize,
}

impl LogFit {
    /// `C / SE(C)`.
    pub fn c_significance(&self) -> f64 {
        self.c / self.c_std_err
    }
}

/// Ordinary least squares `y = a + b t`: `(a, b, SE(b), R²)`.
fn line_fit(t: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = t.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let stt: f64 = t.iter().map(|v| (v - mt).powi(2)).sum();
    let sty: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let b = sty / stt;
    let a = my - b * mt;
    let sse: f64 = t.iter().zip(y).map(|(ti, yi)| (yi - a - b * ti).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let se = if t.len() > 2 { (sse / (n - 2.0) / stt).sqrt() } else { f64::INFINITY };
    (a, b, se, r2)
}

/// Least-squares fit of circle-averaged `ρ⁻¹` about the origin against
/// `-log r`. A harmonic remainder averages to its value at the origin, so
/// the fit of `-C log r + h` is unbiased in `h`. Radii whose circles are too
/// sparsely covered are dropped.
pub fn fit_log_asymptotics<F: UvField + ?Sized>(
    field: &F,
    range: &RadiusRange,
) -> Result<(RadialProfile, LogFit), ConformalError> {
    RadiusRange::new(range.r_min, range.r_max, range.n_radii)?;
    let mut profile = RadialProfile { radii: vec![], rho_inv: vec![], counts: vec![] };
    for r in range.radii() {
        if let Ok(c) = circle_average(field, &Point2::origin(), r, CIRCLE_POINTS) {
            profile.radii.push(r);
            profile.rho_inv.push(c.mean);
            profile.counts.push(c.count);
        }
    }
    if profile.radii.len() < 4 {
        return Err(ConformalError::TooFewRadii(profile.radii.len()));
    }
    let t: Vec<f64> = profile.radii.iter().map(|r| -r.ln()).collect();
    let (h0, c, se, r2) = line_fit(&t, &profile.rho_inv);
    let fit = LogFit {
        c,
        c_std_err: se,
        h0,
        r_squared: r2,
        r_min: *profile.radii.last().expect("nonempty"),
        r_max: profile.radii[0],
        radii_used: profile.radii.len(),
    };
    Ok((profile, fit))
}

/// The rescaling `w = λ z` with `λ = √C` and the size of the bounded part
/// of `ρ⁻¹ / C + log|w|` over the fitted radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCoordinate {
    pub lambda: f64,
    /// `ρ⁻¹/C + log(λ r)` per radius, same order as the profile.
    pub remainder: Vec<f64>,
    /// `bounds[k]` is the largest `|remainder|` over the `k + 1` smallest
    /// radii, so the list follows the range as it shrinks toward `r_min`.
    pub bounds: Vec<f64>,
    pub bound: f64,
}

/// `λ = √C`; with a profile, also the bounded-remainder report.
pub fn normalize_coordinate(fit: &LogFit, profile: Option<&RadialProfile>) -> Result<NormalizedCoordinate, ConformalError> {
    if !(fit.c > 0.0) {
        return Err(ConformalError::NonPositiveC(fit.c));
    }
    let lambda = fit.c.sqrt();
    let remainder: Vec<f64> = profile
        .map(|p| p.radii.iter().zip(&p.rho_inv).map(|(r, q)| q / fit.c + (lambda * r).ln()).collect())
        .unwrap_or_default();
    let mut bounds = Vec::with_capacity(remainder.len());
    let mut run = 0.0f64;
    for v in remainder.iter().rev() {
        run = run.max(v.abs());
        bounds.push(run);
    }
    let bound = bounds.last().copied().unwrap_or(0.0);
    Ok(NormalizedCoordinate { lambda, remainder, bounds, bound })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub valid: usize,
    pub tol_blow: f64,
    /// Fraction of valid samples with `H₁₁ + H₂₂ ≥ 2/ρ - tol_blow`.
    pub trace_fraction: f64,
    /// Median of `|1 - (-(H₁₁ - H₂₂)²/4 + (ρ/2)(H₁₁ + H₂₂) - ρ²/4)|`.
    pub median_identity_residual: f64,
    /// Circle-averaged trace about the origin, by decreasing radius.
    pub trace_profile: Vec<CircleAverage>,
    /// Circle-averaged trace grows strictly as the radius decreases.
    pub trace_increasing: bool,
}

/// `1 - (-(a - c)²/4 + (ρ/2)(a + c) - ρ²/4)` for `H = [[a, b], [b, c]]`.
pub fn blowup_identity_residual(h: &[[f64; 2]; 2]) -> f64 {
    let (a, b, c) = (h[0][0], h[0][1], h[1][1]);
    let rho = a + 2.0 * b + c;
    1.0 - (-0.25 * (a - c) * (a - c) + 0.5 * rho * (a + c) - 0.25 * rho * rho)
}

/// Trace inequality, identity residual and trace growth toward the origin.
pub fn blowup_check(cf: &ConformalField<'_>, range: &RadiusRange, tol_blow: f64) -> BlowupReport {
    let mut ok = 0usize;
    let mut res = Vec::new();
    for s in cf.valid_samples() {
        if s.trace() >= 2.0 / s.rho - tol_blow {
            ok += 1;
        }
        res.push(blowup_identity_residual(&s.hessian).abs());
    }
    let trace_field = FnField(|z: &Point2<f64>| cf.interpolate(z, ConformalSample::trace));
    let trace_profile: Vec<CircleAverage> = range
        .radii()
        .into_iter()
        .filter_map(|r| circle_average(&trace_field, &Point2::origin(), r, CIRCLE_POINTS).ok())
        .collect();
    let trace_increasing = trace_profile.len() >= 2 && trace_profile.windows(2).all(|w| w[1].mean > w[0].mean);
    BlowupReport {
        valid: res.len(),
        tol_blow,
        trace_fraction: if res.is_empty() { 0.0 } else { ok as f64 / res.len() as f64 },
        median_identity_residual: median(res),
        trace_profile,
        trace_increasing,
    }
}
