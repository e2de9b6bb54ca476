//! Solve, persist, reload and analyse a small plan across module boundaries.

use std::sync::OnceLock;

use kite_core::conformal::{embed, ConformalField};
use kite_core::geometry::kite;
use kite_core::ot_oracle::cross_validate;
use kite_core::ot_semidiscrete::{
    discretize_target, orbit_permutations, solve, SemiDiscretePlan, SiteSymmetry, SolveOptions, MASS_BALANCE_TOL,
};
use kite_core::potential_analysis::{cyclical_monotonicity, legendre_consistency, PotentialField};

fn plan() -> &'static SemiDiscretePlan {
    static PLAN: OnceLock<SemiDiscretePlan> = OnceLock::new();
    PLAN.get_or_init(|| {
        let t = discretize_target(400, 5, 20, SiteSymmetry::Symmetrized).unwrap();
        solve(&kite::omega(), &t, &SolveOptions::default()).unwrap()
    })
}

#[test]
fn every_iterate_balances_mass_and_the_dual_never_drops() {
    let p = plan();
    let area = kite::omega::<f64>().area();
    assert!(p.stats.converged);
    for rec in &p.stats.trace {
        assert!((rec.area_sum - area).abs() <= MASS_BALANCE_TOL, "{rec:?}");
    }
    for w in p.stats.trace.windows(2) {
        assert!(w[1].dual_objective >= w[0].dual_objective - 1e-14, "{:?}", w);
    }
}

#[test]
fn plan_survives_a_json_round_trip() {
    let p = plan();
    let q = SemiDiscretePlan::from_json(&p.to_json()).unwrap();
    assert_eq!(q.weights, p.weights);
    assert_eq!(q.sites(), p.sites());
    for j in 0..p.len() {
        assert!((q.cell_area(j) - p.cell_area(j)).abs() < 1e-15);
    }
}

#[test]
fn symmetric_sites_get_symmetric_weights() {
    let p = plan();
    let (r, at) = orbit_permutations(p.len());
    let c = p.dual_constants();
    let tol = 10.0 * p.stats.tol_mass;
    for perm in [&r, &at] {
        let shift = (0..p.len()).map(|j| c[perm[j]] - c[j]).sum::<f64>() / p.len() as f64;
        for j in 0..p.len() {
            assert!((c[perm[j]] - c[j] - shift).abs() <= tol, "site {j}");
        }
    }
}

#[test]
fn transport_map_is_monotone_and_legendre_consistent() {
    let field = PotentialField::new(plan());
    let pairs = cyclical_monotonicity(&field, 10_000, 9);
    assert_eq!(pairs.violations, 0, "{pairs:?}");
    let rep = legendre_consistency(&field, &field.uniform_samples(500, 3));
    assert!(rep.max_abs_residual <= 1e-10, "{rep:?}");
}

#[test]
fn oracle_agrees_with_the_solver_on_a_coarse_instance() {
    let t = discretize_target(16, 1, 20, SiteSymmetry::Symmetrized).unwrap();
    let p = solve(&kite::omega(), &t, &SolveOptions::default()).unwrap();
    let cv = cross_validate(&p, 64, 1).unwrap();
    assert!(cv.relative_gap >= 0.0 && cv.relative_gap <= 0.02, "{cv:?}");
    assert!(cv.induced_marginal_error < 1e-10);
}

#[test]
fn image_coordinates_follow_the_plan() {
    let field = PotentialField::new(plan());
    let x = field.uniform_samples(1, 4)[0];
    let z = embed(&field, &x).unwrap();
    assert_eq!(z.x, x.x - x.y);
    let t = field.eval_gradient(&x).unwrap();
    assert_eq!(z.y, t.x + t.y);

    let cf = ConformalField::new(&field, 60, field.default_radius());
    assert!(cf.valid_count() > 0);
    assert!(cf.valid_samples().all(|s| s.rho > 0.0 && s.u == s.x.x - s.x.y));
}
