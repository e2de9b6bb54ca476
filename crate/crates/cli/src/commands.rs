use std::f64::consts::TAU;
use std::path::Path;

use serde_json::{json, Value};

use kite_core::conformal::{
    blowup_check, fit_log_asymptotics, mean_value_harmonicity, metric_identity_residuals, normalize_coordinate,
    points_csv, profile_csv, rho_inv_svg, ConformalError, ConformalField, FnField, RadiusRange, UvField, TOL_BLOW,
};
use kite_core::geometry::kite::DomainConstants;
use kite_core::geometry::Point2;
use kite_core::ot_semidiscrete::{discretize_target, solve as solve_plan, OtError, SemiDiscretePlan, SolveOptions};
use kite_core::potential_analysis::{
    check_monotone_along_lines, check_symmetries, cyclical_monotonicity, default_line_offsets, ma_residuals,
    quadrant_preservation, PotentialField,
};
use kite_core::scalar::{q, Rational};
use kite_core::simplex_charts::{
    pairing_matrix, round_trips, transition_matrix, verify_reduction, Chart, ReductionOptions, Side, SimplexVertexSet,
};
use kite_core::geometry::kite;

use crate::config::RunConfig;
use crate::report::{envelope, write_json, write_text, CheckResult};
use crate::{CliError, Fixture};

pub const VERIFY_CHECKS: [&str; 5] = ["symmetry", "quadrants", "monotonicity", "ma-residual", "reduction"];
pub const CONFORMAL_CHECKS: [&str; 5] = ["identities", "harmonicity", "log-fit", "normalized", "blowup"];

/// Fraction of samples that must satisfy the pointwise sign and quadrant checks.
const SAMPLE_FRACTION: f64 = 0.99;
const MAX_MEDIAN_MA_RESIDUAL: f64 = 0.1;
const MAX_MEDIAN_IDENTITY_RESIDUAL: f64 = 0.1;
const MAX_HARMONIC_DEVIATION: f64 = 0.02;
const MAX_FIXTURE_DEVIATION: f64 = 1e-3;
const MIN_R_SQUARED: f64 = 0.98;
const MIN_DECADES: f64 = 1.0;
const MIN_C_SIGNIFICANCE: f64 = 3.0;
const MAX_MEDIAN_BLOWUP_RESIDUAL: f64 = 0.15;
/// Harmonicity centers sit on this circle in the image plane.
const HARMONIC_RING: f64 = 0.1;
const HARMONIC_RADII: [f64; 3] = [0.0125, 0.025, 0.05];
const HARMONIC_CENTERS: usize = 8;

fn check_selection(config: &RunConfig, known: &[&str]) -> Result<(), CliError> {
    match config.checks.iter().find(|c| !known.contains(&c.as_str())) {
        Some(c) => Err(CliError::Usage(format!("unknown check `{c}`; expected one of {}", known.join(", ")))),
        None => Ok(()),
    }
}

fn load_plan(path: &Path) -> Result<SemiDiscretePlan, CliError> {
    let text = std::fs::read_to_string(path).map_err(|_| CliError::MissingPlan(path.to_path_buf()))?;
    SemiDiscretePlan::from_json(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn finish(checks: &[CheckResult]) -> Result<(), CliError> {
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.to_string()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(failed))
    }
}

pub fn solve(config: &RunConfig) -> Result<(), CliError> {
    let target = discretize_target(config.n_sites, config.seed, config.lloyd_iters, config.symmetry)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let opts = SolveOptions { tol_mass: config.tol_mass, max_iters: config.max_iters, ..Default::default() };
    let plan = solve_plan(&kite::omega(), &target, &opts).map_err(|e| match e {
        OtError::NonConvergence { .. } | OtError::StepRejected(_) | OtError::LinearSolve(_) | OtError::MassBalance(_) => {
            CliError::NonConvergence(e.to_string())
        }
        other => CliError::Usage(other.to_string()),
    })?;
    write_text(&config.out("plan.json"), &plan.to_json())?;
    write_text(&config.out("cells.svg"), &plan.to_svg(800.0))?;
    let stats = &plan.stats;
    let checks = [CheckResult::new(
        "convergence",
        "damped Newton reaches the mass tolerance",
        stats.converged,
        &json!({
            "iterations": stats.iterations,
            "final_max_rel_mass_error": stats.final_max_rel_mass_error,
            "tol_mass": stats.tol_mass,
        }),
    )];
    let extra = json!({
        "n_sites": plan.len(),
        "spacing": plan.spacing(),
        "transport_cost": plan.transport_cost(),
        "trace": stats.trace,
    });
    write_json(&config.out("solve.json"), envelope("solve", config, &checks, extra))?;
    finish(&checks)
}

pub fn verify(config: &RunConfig, plan_path: &Path) -> Result<(), CliError> {
    check_selection(config, &VERIFY_CHECKS)?;
    let plan = load_plan(plan_path)?;
    let field = PotentialField::new(&plan);
    let samples = field.uniform_samples(config.samples, config.sample_seed);
    let r_loc = config.r_loc_mult * field.spacing();
    let mut checks = Vec::new();
    if config.selected("symmetry") {
        let rep = check_symmetries(&field, &samples);
        checks.push(CheckResult::new(
            "symmetry",
            "potential invariant under R and A up to 10 h^2, sign pattern of v, site orbits closed",
            rep.passes(),
            &rep,
        ));
    }
    if config.selected("quadrants") {
        let rep = quadrant_preservation(&field, &samples);
        let passed = rep.fraction >= SAMPLE_FRACTION && rep.all_gradients_in_target;
        checks.push(CheckResult::new("quadrants", "gradient maps each source quadrant to the matching target quadrant", passed, &rep));
    }
    if config.selected("monotonicity") {
        let lines = check_monotone_along_lines(&field, &default_line_offsets(20), 100, 2.0 * field.spacing());
        let pairs = cyclical_monotonicity(&field, 10_000, config.sample_seed);
        let passed = lines.min_fraction >= SAMPLE_FRACTION && pairs.violations == 0;
        checks.push(CheckResult::new(
            "monotonicity",
            "v nondecreasing along lines x - y = c and the transport map monotone on pairs",
            passed,
            &json!({ "lines": lines, "pairs": pairs }),
        ));
    }
    if config.selected("ma-residual") {
        let rep = ma_residuals(&field, &samples, r_loc);
        let passed = rep.valid > 0 && rep.median_abs_residual <= MAX_MEDIAN_MA_RESIDUAL && rep.rho_positive_fraction == 1.0;
        checks.push(CheckResult::new("ma-residual", "median |det D^2 phi - 1| at most 0.1 and rho positive", passed, &rep));
    }
    if config.selected("reduction") {
        let rep = verify_reduction(Some(&field), &ReductionOptions::default()).map_err(|e| CliError::Usage(e.to_string()))?;
        checks.push(CheckResult::new("reduction", "simplex-boundary transport reduces to the kite problem", rep.passed, &rep));
    }
    let extra = json!({ "n_sites": plan.len(), "spacing": plan.spacing(), "r_loc": r_loc });
    write_json(&config.out("verify.json"), envelope("verify", config, &checks, extra))?;
    finish(&checks)
}

fn radii_error(e: ConformalError) -> CliError {
    CliError::Radii(e.to_string())
}

fn harmonic_centers() -> Vec<Point2<f64>> {
    (0..HARMONIC_CENTERS)
        .map(|k| {
            let t = TAU * (k as f64 + 0.5) / HARMONIC_CENTERS as f64;
            Point2::new(HARMONIC_RING * t.cos(), HARMONIC_RING * t.sin())
        })
        .collect()
}

fn harmonicity<F: UvField>(field: &F, max_dev: f64) -> CheckResult {
    let reports: Vec<_> = harmonic_centers()
        .iter()
        .map(|c| mean_value_harmonicity(field, c, &HARMONIC_RADII, HARMONIC_RADII[0]).map_err(|e| e.to_string()))
        .collect();
    let worst = reports.iter().map(|r| r.as_ref().map_or(f64::INFINITY, |h| h.max_deviation)).fold(0.0, f64::max);
    let details: Vec<Value> = reports
        .iter()
        .map(|r| match r {
            Ok(h) => serde_json::to_value(h).expect("report serializes"),
            Err(e) => json!({ "error": e }),
        })
        .collect();
    CheckResult::new(
        "harmonicity",
        "circle averages of 1/rho match the center value on the |z| = 0.1 ring",
        worst <= max_dev,
        &json!({ "max_deviation": if worst.is_finite() { json!(worst) } else { Value::Null }, "tolerance": max_dev, "centers": details }),
    )
}

fn log_fit_checks<F: UvField>(
    config: &RunConfig,
    field: &F,
    range: &RadiusRange,
    checks: &mut Vec<CheckResult>,
) -> Result<Value, CliError> {
    let (profile, fit) = fit_log_asymptotics(field, range).map_err(radii_error)?;
    write_text(&config.out("profile.csv"), &profile_csv(&profile))?;
    let decades = (fit.r_max / fit.r_min).log10();
    if config.selected("log-fit") {
        let passed = fit.r_squared >= MIN_R_SQUARED && decades >= MIN_DECADES && fit.c_significance() >= MIN_C_SIGNIFICANCE;
        checks.push(CheckResult::new(
            "log-fit",
            "circle-averaged 1/rho linear in -log r with C > 0",
            passed,
            &json!({ "fit": fit, "decades": decades, "c_significance": fit.c_significance() }),
        ));
    }
    if config.selected("normalized") {
        let norm = normalize_coordinate(&fit, Some(&profile));
        let passed = norm.as_ref().is_ok_and(|n| n.bound.is_finite());
        let details = match &norm {
            Ok(n) => serde_json::to_value(n).expect("report serializes"),
            Err(e) => json!({ "error": e.to_string() }),
        };
        checks.push(CheckResult::new("normalized", "|1/(C rho) + log|w|| bounded on the fitted range", passed, &details));
    }
    let fit_json = serde_json::to_value(&fit).expect("report serializes");
    write_json(&config.out("logfit.json"), json!({ "config_hash": config.hash(), "decades": decades, "fit": fit_json.clone() }))?;
    Ok(json!({ "range": range, "profile": profile, "fit": fit_json }))
}

fn configured_range(config: &RunConfig, default: impl FnOnce() -> Result<RadiusRange, ConformalError>) -> Result<RadiusRange, CliError> {
    let range = match (config.r_min, config.r_max) {
        (Some(lo), Some(hi)) => RadiusRange::new(lo, hi, config.n_radii),
        (lo, hi) => {
            let d = default().map_err(radii_error)?;
            RadiusRange::new(lo.unwrap_or(d.r_min), hi.unwrap_or(d.r_max), config.n_radii)
        }
    };
    range.map_err(radii_error)
}

pub fn conformal(config: &RunConfig, plan_path: &Path, fixture: Option<Fixture>) -> Result<(), CliError> {
    check_selection(config, &CONFORMAL_CHECKS)?;
    let mut checks = Vec::new();
    let extra = match fixture {
        Some(Fixture::Log3) => {
            let field = FnField(|z: &Point2<f64>| Some(-3.0 * z.norm().ln() + 7.0));
            let range = configured_range(config, || RadiusRange::new(0.01, 0.5, 12))?;
            if config.selected("harmonicity") {
                checks.push(harmonicity(&field, MAX_FIXTURE_DEVIATION));
            }
            let fit = log_fit_checks(config, &field, &range, &mut checks)?;
            json!({ "fixture": "log3", "log_fit": fit })
        }
        None => {
            let plan = load_plan(plan_path)?;
            let field = PotentialField::new(&plan);
            let r_loc = config.r_loc_mult * field.spacing();
            let cf = ConformalField::new(&field, config.grid_n, r_loc);
            let range = configured_range(config, || RadiusRange::default_for(&cf))?;
            if config.selected("identities") {
                let samples = field.uniform_samples(config.samples, config.sample_seed);
                let rep = metric_identity_residuals(&field, &samples, r_loc);
                let passed = rep.valid > 0
                    && rep.median_rel_det_df <= MAX_MEDIAN_IDENTITY_RESIDUAL
                    && rep.median_rel_dx_norm <= MAX_MEDIAN_IDENTITY_RESIDUAL;
                checks.push(CheckResult::new("identities", "det Df = rho and u_x^2 + v_x^2 = phi_xx rho", passed, &rep));
            }
            if config.selected("harmonicity") {
                checks.push(harmonicity(&cf, MAX_HARMONIC_DEVIATION));
            }
            let fit = log_fit_checks(config, &cf, &range, &mut checks)?;
            if config.selected("blowup") {
                let rep = blowup_check(&cf, &range, TOL_BLOW);
                let passed = rep.trace_fraction >= SAMPLE_FRACTION
                    && rep.median_identity_residual <= MAX_MEDIAN_BLOWUP_RESIDUAL
                    && rep.trace_increasing;
                checks.push(CheckResult::new("blowup", "H11 + H22 >= 2/rho - 0.05 and the trace grows toward the origin", passed, &rep));
            }
            json!({
                "n_sites": plan.len(),
                "r_loc": r_loc,
                "valid_samples": cf.valid_count(),
                "image_inradius": cf.image_inradius(),
                "log_fit": fit,
            })
        }
    };
    write_json(&config.out("conformal.json"), envelope("conformal", config, &checks, extra))?;
    finish(&checks)
}

fn rational_pair(p: &Point2<Rational>) -> [String; 2] {
    [p.x.to_string(), p.y.to_string()]
}

pub fn simplex(config: &RunConfig, plan_path: &Path, explicit_plan: bool) -> Result<(), CliError> {
    let pt = |a: i64, b: i64, c: i64, d: i64| Point2::new(q(a, b), q(c, d));
    let usage = |e: kite_core::simplex_charts::ChartError| CliError::Usage(e.to_string());
    let mut checks = Vec::new();

    let k = [pt(1, 3, 0, 1), pt(1, 1, 1, 1), pt(1, 2, 1, 2)];
    let t = transition_matrix(&Chart::q(0, 1).map_err(usage)?, &Chart::q(0, 2).map_err(usage)?, &k).map_err(usage)?;
    let expected = [[q(-1, 1), q(0, 1)], [q(-1, 1), q(1, 1)]];
    let rows = t.matrix.rows.clone();
    checks.push(CheckResult::new(
        "transition",
        "q_02^-1 o q_01 on K is the linear map [[-1, 0], [-1, 1]]",
        rows == expected && t.is_linear(),
        &json!({
            "matrix": rows.iter().map(|r| [r[0].to_string(), r[1].to_string()]).collect::<Vec<_>>(),
            "offset": rational_pair(&t.offset),
        }),
    ));

    let sing = Chart::q(0, 1).map_err(usage)?.inverse(&SimplexVertexSet::n_mid::<Rational>(&[0, 1])).map_err(usage)?;
    checks.push(CheckResult::new(
        "singular-point",
        "q_01^-1(n_01) = (1/2, 1/2)",
        sing == pt(1, 2, 1, 2),
        &rational_pair(&sing),
    ));

    let trips: Vec<_> = [Side::A, Side::B]
        .into_iter()
        .flat_map(|side| (0..4).flat_map(move |i| (0..4).filter(move |&j| j != i).map(move |j| (side, i, j))))
        .map(|(side, i, j)| round_trips(&Chart::new(side, i, j).expect("distinct indices"), 100, config.seed))
        .collect();
    checks.push(CheckResult::new(
        "round-trips",
        "every chart inverts exactly on 100 rational points",
        trips.iter().all(|r| r.points == 100 && r.exact == 100),
        &trips,
    ));

    let pairing: Vec<Vec<String>> = pairing_matrix(6).iter().map(|r| r.iter().map(|v| v.to_string()).collect()).collect();
    let mut extra = json!({ "pairing_matrix": pairing });

    if explicit_plan || plan_path.exists() {
        let plan = load_plan(plan_path)?;
        let field = PotentialField::new(&plan);
        let rep = verify_reduction(Some(&field), &ReductionOptions::default()).map_err(usage)?;
        checks.push(CheckResult::new("reduction", "simplex-boundary transport reduces to the kite problem", rep.passed, &rep));
        extra["n_sites"] = json!(plan.len());
    }
    write_json(&config.out("simplex.json"), envelope("simplex", config, &checks, extra))?;
    finish(&checks)
}

pub fn export(config: &RunConfig, plan_path: &Path, explicit_plan: bool) -> Result<(), CliError> {
    if explicit_plan && !plan_path.exists() {
        return Err(CliError::MissingPlan(plan_path.to_path_buf()));
    }
    let mut written = vec!["domain.json"];
    write_text(&config.out("domain.json"), &DomainConstants::collect().to_json())?;
    if plan_path.exists() {
        let plan = load_plan(plan_path)?;
        let field = PotentialField::new(&plan);
        let r_loc = config.r_loc_mult * field.spacing();
        let samples = field.uniform_samples(config.samples, config.sample_seed);
        write_text(&config.out("cells.svg"), &plan.to_svg(800.0))?;
        write_text(&config.out("potential_samples.csv"), &field.sample_csv(&samples, r_loc))?;
        let cf = ConformalField::new(&field, config.grid_n, r_loc);
        write_text(&config.out("conformal_points.csv"), &points_csv(&cf))?;
        write_text(&config.out("rho_inv.svg"), &rho_inv_svg(&cf, 800.0))?;
        written.extend(["cells.svg", "potential_samples.csv", "conformal_points.csv", "rho_inv.svg"]);
    }
    for w in written {
        println!("{}", config.out(w).display());
    }
    Ok(())
}
