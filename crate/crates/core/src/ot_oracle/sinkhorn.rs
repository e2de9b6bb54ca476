//! Log-domain Sinkhorn with epsilon scaling and a final rounding onto the
//! transport polytope.

use serde::{Deserialize, Serialize};

use super::{check_masses, quadratic_cost, DiscreteMeasure, DiscretePlan, OracleError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkhornOptions {
    pub epsilon: f64,
    /// Marginal L1 error, relative to the total mass, at which a stage stops.
    pub tolerance: f64,
    /// Iteration cap per stage. Near-degenerate instances can stall above
    /// `tolerance`; the final rounding still makes the marginals exact.
    pub max_iter: usize,
    /// Factor applied to epsilon between stages, in (0, 1).
    pub scaling: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self { epsilon: 1e-3, tolerance: 1e-9, max_iter: 10_000, scaling: 0.5 }
    }
}

fn logsumexp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + it.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Entropic coupling for the quadratic cost. The returned plan has exact
/// marginals up to floating-point rounding, and its `cost` is the
/// unregularized linear cost of that plan.
pub fn solve_sinkhorn(mu: &DiscreteMeasure, nu: &DiscreteMeasure, opts: &SinkhornOptions) -> Result<DiscretePlan, OracleError> {
    if !(opts.epsilon > 0.0) {
        return Err(OracleError::NonPositiveEpsilon(opts.epsilon));
    }
    check_masses(mu, nu)?;
    let (m, n) = (mu.len(), nu.len());
    let scale_b = mu.total() / nu.total();
    let a = mu.masses.clone();
    let b: Vec<f64> = nu.masses.iter().map(|v| v * scale_b).collect();
    let total: f64 = a.iter().sum();
    let cost: Vec<f64> = mu.points.iter().flat_map(|x| nu.points.iter().map(move |y| quadratic_cost(x, y))).collect();
    let (la, lb): (Vec<f64>, Vec<f64>) = (a.iter().map(|v| v.ln()).collect(), b.iter().map(|v| v.ln()).collect());

    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let mut eps = cost.iter().cloned().fold(0.0, f64::max).max(opts.epsilon);
    loop {
        for _ in 0..opts.max_iter {
            for i in 0..m {
                let row = &cost[i * n..(i + 1) * n];
                f[i] = eps * la[i] - eps * logsumexp(row.iter().zip(&g).map(|(c, gj)| (gj - c) / eps));
            }
            for j in 0..n {
                g[j] = eps * lb[j] - eps * logsumexp((0..m).map(|i| (f[i] - cost[i * n + j]) / eps));
            }
            // Columns are exact after the g update; measure the row error.
            let err: f64 = (0..m)
                .map(|i| {
                    let r: f64 = (0..n).map(|j| ((f[i] + g[j] - cost[i * n + j]) / eps).exp()).sum();
                    (r - a[i]).abs()
                })
                .sum();
            if !err.is_finite() {
                return Err(OracleError::Underflow);
            }
            if err <= opts.tolerance * total {
                break;
            }
        }
        if eps <= opts.epsilon {
            break;
        }
        eps = (eps * opts.scaling).max(opts.epsilon);
    }

    let mut p: Vec<f64> = (0..m * n).map(|k| ((f[k / n] + g[k % n] - cost[k]) / eps).exp()).collect();
    round_to_polytope(&mut p, &a, &b);
    let value = p.iter().zip(&cost).map(|(p, c)| p * c).sum();
    Ok(DiscretePlan { rows: mu.clone(), cols: nu.clone(), coupling: p, cost: value })
}

/// Projects a nonnegative matrix onto the couplings of `a` and `b`: scale
/// rows and columns down to their budgets, then add the rank-one correction
/// of the remaining deficits.
fn round_to_polytope(p: &mut [f64], a: &[f64], b: &[f64]) {
    let (m, n) = (a.len(), b.len());
    for i in 0..m {
        let r: f64 = p[i * n..(i + 1) * n].iter().sum();
        if r > a[i] {
            let s = a[i] / r;
            p[i * n..(i + 1) * n].iter_mut().for_each(|v| *v *= s);
        }
    }
    for j in 0..n {
        let c: f64 = (0..m).map(|i| p[i * n + j]).sum();
        if c > b[j] {
            let s = b[j] / c;
            (0..m).for_each(|i| p[i * n + j] *= s);
        }
    }
    let er: Vec<f64> = (0..m).map(|i| (a[i] - p[i * n..(i + 1) * n].iter().sum::<f64>()).max(0.0)).collect();
    let ec: Vec<f64> = (0..n).map(|j| (b[j] - (0..m).map(|i| p[i * n + j]).sum::<f64>()).max(0.0)).collect();
    let deficit: f64 = er.iter().sum();
    if deficit > 0.0 {
        for i in 0..m {
            for j in 0..n {
                p[i * n + j] += er[i] * ec[j] / deficit;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::solve_exact_lp;
    use super::*;
    use crate::geometry::Point2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, rng: &mut ChaCha8Rng) -> DiscreteMeasure {
        DiscreteMeasure::uniform((0..n).map(|_| Point2::new(rng.gen(), rng.gen())).collect(), 1.0).unwrap()
    }

    #[test]
    fn close_to_exact_and_never_below_it() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let (mu, nu) = (cloud(8, &mut rng), cloud(8, &mut rng));
            let lp = solve_exact_lp(&mu, &nu).unwrap();
            let sk = solve_sinkhorn(&mu, &nu, &SinkhornOptions::default()).unwrap();
            assert!(sk.marginal_error() < 1e-12);
            assert!(sk.cost >= lp.cost - 1e-12);
            assert!(sk.cost - lp.cost < 1e-3, "{} {}", sk.cost, lp.cost);
        }
    }

    #[test]
    fn rounding_hits_marginals() {
        let mut p = vec![0.5, 0.1, 0.0, 0.3];
        round_to_polytope(&mut p, &[0.4, 0.6], &[0.5, 0.5]);
        assert!((p[0] + p[1] - 0.4).abs() < 1e-15 && (p[2] + p[3] - 0.6).abs() < 1e-15);
        assert!((p[0] + p[2] - 0.5).abs() < 1e-15 && (p[1] + p[3] - 0.5).abs() < 1e-15);
        assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn rejects_bad_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu = cloud(3, &mut rng);
        let opts = SinkhornOptions { epsilon: 0.0, ..Default::default() };
        assert_eq!(solve_sinkhorn(&mu, &mu, &opts), Err(OracleError::NonPositiveEpsilon(0.0)));
    }

    #[test]
    fn identical_sets_shrink_to_the_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mu = cloud(8, &mut rng);
        let mut last = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let sk = solve_sinkhorn(&mu, &mu, &SinkhornOptions { epsilon: eps, ..Default::default() }).unwrap();
            assert!(sk.cost < last);
            last = sk.cost;
        }
        assert!(last < 1e-5, "{last}");
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn lp_never_exceeds_sinkhorn(seed in 0u64..1000, n in 2usize..10, m in 2usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mu, nu) = (cloud(n, &mut rng), cloud(m, &mut rng));
            let lp = solve_exact_lp(&mu, &nu).unwrap();
            let sk = solve_sinkhorn(&mu, &nu, &SinkhornOptions { epsilon: 1e-2, ..Default::default() }).unwrap();
            proptest::prop_assert!(lp.cost <= sk.cost + 1e-12);
            proptest::prop_assert!(lp.marginal_error() < 1e-10 && sk.marginal_error() < 1e-10);
            proptest::prop_assert!(lp.support().len() < n + m);
        }
    }
}
