//! Closed-form implications between MC, PMC and DC guarantees.
//!
//! Each function returns `None` outside the domain where the bound is defined.

/// DC level implied by `alpha`-MC when the smallest expected prediction is
/// `r_min`: `ln((r_min + alpha) / (r_min - alpha))`. Defined for
/// `0 <= alpha < r_min`.
pub fn mc_to_dc_bound(alpha: f64, r_min: f64) -> Option<f64> {
    (alpha >= 0.0 && r_min > alpha).then(|| ((r_min + alpha) / (r_min - alpha)).ln())
}

/// DC level implied by `alpha`-PMC: `ln((1 + alpha) / (1 - alpha))`.
/// Defined for `0 <= alpha < 1`.
pub fn pmc_to_dc_bound(alpha: f64) -> Option<f64> {
    (0.0..1.0).contains(&alpha).then(|| alpha.ln_1p() - (-alpha).ln_1p())
}

/// MC level implied by `alpha`-PMC: `alpha / (1 - alpha)`. Defined for
/// `0 <= alpha < 1`.
pub fn pmc_to_mc_bound(alpha: f64) -> Option<f64> {
    (0.0..1.0).contains(&alpha).then(|| alpha / (1.0 - alpha))
}

/// MC level implied by `epsilon`-DC together with `delta`-calibration:
/// `1 - e^(-epsilon) + delta`.
pub fn dc_to_mc_bound(epsilon: f64, delta: f64) -> Option<f64> {
    (epsilon >= 0.0 && delta >= 0.0).then(|| delta - (-epsilon).exp_m1())
}

/// PMC level implied by `(alpha, lambda)`-PMC on a uniform discretization
/// when every category has mean outcome at least `rho`: `alpha + lambda / rho`.
pub fn pmc_discretization_bound_uniform(alpha: f64, lambda: f64, rho: f64) -> Option<f64> {
    (alpha >= 0.0 && lambda >= 0.0 && rho > 0.0).then(|| alpha + lambda / rho)
}

/// PMC level implied by `(alpha, lambda)`-PMC on a `(lambda, rho)`-geometric
/// discretization: `alpha rho^(-lambda) + rho^(-lambda) - 1`.
pub fn pmc_discretization_bound_geometric(alpha: f64, lambda: f64, rho: f64) -> Option<f64> {
    (alpha >= 0.0 && lambda >= 0.0 && rho > 0.0 && rho <= 1.0).then(|| {
        let growth = -lambda * rho.ln();
        // rho^(-lambda) - 1 without cancellation for small lambda
        alpha * growth.exp() + growth.exp_m1()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Option<f64>, b: f64) -> bool {
        a.is_some_and(|a| (a - b).abs() < 1e-12)
    }

    #[test]
    fn mc_to_dc() {
        assert!(close(mc_to_dc_bound(0.05, 0.9), (0.95f64 / 0.85).ln()));
        assert!(close(mc_to_dc_bound(0.05, 0.3), (0.35f64 / 0.25).ln()));
        assert_eq!(mc_to_dc_bound(0.0, 0.5), Some(0.0));
        assert!(mc_to_dc_bound(1e-12, 0.5).unwrap() < 1e-11);
        assert_eq!(mc_to_dc_bound(0.3, 0.3), None);
        assert_eq!(mc_to_dc_bound(0.4, 0.3), None);
    }

    #[test]
    fn pmc_to_dc() {
        assert_eq!(pmc_to_dc_bound(0.0), Some(0.0));
        assert!(close(pmc_to_dc_bound(0.1), (1.1f64 / 0.9).ln()));
        assert!(close(pmc_to_dc_bound(0.5), 3f64.ln()));
        assert_eq!(pmc_to_dc_bound(1.0), None);
    }

    #[test]
    fn pmc_to_mc() {
        assert_eq!(pmc_to_mc_bound(0.0), Some(0.0));
        assert!(close(pmc_to_mc_bound(0.1), 1.0 / 9.0));
        for i in 1..100 {
            let a = i as f64 / 100.0;
            assert!(pmc_to_mc_bound(a).unwrap() > a);
        }
        assert_eq!(pmc_to_mc_bound(1.0), None);
    }

    #[test]
    fn dc_to_mc() {
        assert_eq!(dc_to_mc_bound(0.0, 0.0), Some(0.0));
        assert!(close(dc_to_mc_bound(0.2, 0.05), 1.0 - (-0.2f64).exp() + 0.05));
        assert!(dc_to_mc_bound(50.0, 0.0).unwrap() > 1.0 - 1e-12);
        assert!(dc_to_mc_bound(50.0, 0.0).unwrap() <= 1.0);
        assert_eq!(dc_to_mc_bound(-0.1, 0.0), None);
    }

    #[test]
    fn discretization_claims() {
        assert!(close(pmc_discretization_bound_uniform(0.1, 0.1, 0.1), 1.1));
        assert!(close(pmc_discretization_bound_uniform(0.1, 0.0, 0.3), 0.1));
        assert!(close(pmc_discretization_bound_uniform(0.0, 0.05, 0.5), 0.1));
        assert!(close(pmc_discretization_bound_geometric(0.1, 0.0, 0.2), 0.1));
        let g = 10f64.powf(0.1);
        assert!(close(
            pmc_discretization_bound_geometric(0.1, 0.1, 0.1),
            0.1 * g + g - 1.0
        ));
        assert_eq!(pmc_discretization_bound_uniform(0.1, 0.1, 0.0), None);
    }
}
