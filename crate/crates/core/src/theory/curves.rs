//! Bound functions evaluated on parameter grids, for plotting.

use serde::{Deserialize, Serialize};

use super::bounds::*;
use crate::error::{config, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub name: String,
    pub grid: Vec<f64>,
    /// NaN wherever `mask` is false.
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl BoundCurve {
    pub fn evaluate(name: impl Into<String>, grid: &[f64], f: impl Fn(f64) -> Option<f64>) -> Result<Self> {
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return config("curve grid must be strictly increasing");
        }
        let raw: Vec<Option<f64>> = grid.iter().map(|&x| f(x).filter(|v| v.is_finite())).collect();
        Ok(BoundCurve {
            name: name.into(),
            grid: grid.to_vec(),
            mask: raw.iter().map(Option::is_some).collect(),
            values: raw.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
        })
    }

    /// `(x, value)` for the defined points.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid
            .iter()
            .zip(&self.values)
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|((&x, &v), _)| (x, v))
    }
}

/// `start, start + step, ...` up to and including `stop`.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return config(format!("invalid grid {start}:{stop}:{step}"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

/// Curve names accepted by [`named_curve`].
pub const CURVE_NAMES: [&str; 6] = [
    "mc_to_dc",
    "pmc_to_dc",
    "pmc_to_mc",
    "dc_to_mc",
    "uniform_discretization",
    "geometric_discretization",
];

/// Fixed parameters for the two-argument bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveParams {
    pub r_min: f64,
    pub delta: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub rho: f64,
}

impl Default for CurveParams {
    fn default() -> Self {
        CurveParams {
            r_min: 0.5,
            delta: 0.0,
            alpha: 0.1,
            lambda: 0.1,
            rho: 0.1,
        }
    }
}

/// A single bound over `grid`. The grid variable is `alpha` for the MC/PMC
/// bounds, `epsilon` for `dc_to_mc` and `lambda` for the discretization bounds.
pub fn named_curve(name: &str, grid: &[f64], p: &CurveParams) -> Result<BoundCurve> {
    match name {
        "mc_to_dc" => BoundCurve::evaluate(name, grid, |a| mc_to_dc_bound(a, p.r_min)),
        "pmc_to_dc" => BoundCurve::evaluate(name, grid, pmc_to_dc_bound),
        "pmc_to_mc" => BoundCurve::evaluate(name, grid, pmc_to_mc_bound),
        "dc_to_mc" => BoundCurve::evaluate(name, grid, |e| dc_to_mc_bound(e, p.delta)),
        "uniform_discretization" => {
            BoundCurve::evaluate(name, grid, |l| pmc_discretization_bound_uniform(p.alpha, l, p.rho))
        }
        "geometric_discretization" => {
            BoundCurve::evaluate(name, grid, |l| pmc_discretization_bound_geometric(p.alpha, l, p.rho))
        }
        other => config(format!(
            "unknown curve `{other}` (expected one of {})",
            CURVE_NAMES.join(", ")
        )),
    }
}

/// Implied-guarantee comparison. Left pane over `alpha`: DC implied by PMC
/// and by MC for a range of `r_min`. Right pane over `alpha`/`epsilon`: MC
/// implied by PMC and by DC for a range of overall calibration `delta`.
pub fn params_figure(grid: &[f64]) -> Result<Vec<BoundCurve>> {
    let mut curves = vec![BoundCurve::evaluate("pmc_to_dc", grid, pmc_to_dc_bound)?];
    for r_min in [0.01, 0.05, 0.1, 0.2, 0.5, 1.0] {
        curves.push(BoundCurve::evaluate(format!("mc_to_dc[r_min={r_min}]"), grid, |a| {
            mc_to_dc_bound(a, r_min)
        })?);
    }
    curves.push(BoundCurve::evaluate("pmc_to_mc", grid, pmc_to_mc_bound)?);
    for delta in [0.0, 0.1, 0.2, 0.3, 0.4, 0.5] {
        curves.push(BoundCurve::evaluate(format!("dc_to_mc[delta={delta}]"), grid, |e| {
            dc_to_mc_bound(e, delta)
        })?);
    }
    Ok(curves)
}

/// Continuous PMC implied by `(alpha, lambda)`-PMC under a geometric
/// discretization, over `lambda`, one curve per `rho`.
pub fn discrete_figure(lambda_grid: &[f64], alpha: f64, rhos: &[f64]) -> Result<Vec<BoundCurve>> {
    rhos.iter()
        .map(|&rho| {
            BoundCurve::evaluate(format!("geometric[alpha={alpha},rho={rho}]"), lambda_grid, |l| {
                pmc_discretization_bound_geometric(alpha, l, rho)
            })
        })
        .collect()
}

/// How far a prediction may sit from the outcome rate `p` under each
/// criterion: `p ± alpha` for MC and `p ± alpha max(p, rho)` for PMC,
/// clipped to `[0, 1]`.
pub fn constraint_figure(p_grid: &[f64], alpha: f64, rho: f64) -> Result<Vec<BoundCurve>> {
    let pmc_width = move |p: f64| alpha * p.max(rho);
    Ok(vec![
        BoundCurve::evaluate("mc_lower", p_grid, |p| Some((p - alpha).max(0.0)))?,
        BoundCurve::evaluate("mc_upper", p_grid, |p| Some((p + alpha).min(1.0)))?,
        BoundCurve::evaluate("pmc_lower", p_grid, |p| Some((p - pmc_width(p)).max(0.0)))?,
        BoundCurve::evaluate("pmc_upper", p_grid, |p| Some((p + pmc_width(p)).min(1.0)))?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_inclusive() {
        let g = linear_grid(0.0, 0.45, 0.05).unwrap();
        assert_eq!(g.len(), 10);
        assert!((g[9] - 0.45).abs() < 1e-12);
        assert!(linear_grid(0.0, 1.0, 0.0).is_err());
        assert!(linear_grid(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn pmc_to_mc_curve() {
        let g = linear_grid(0.0, 0.45, 0.05).unwrap();
        let c = named_curve("pmc_to_mc", &g, &CurveParams::default()).unwrap();
        assert!(c.mask.iter().all(|&m| m));
        assert!(c.values.windows(2).all(|w| w[0] < w[1]));
        assert!((c.values[2] - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn mask_marks_undefined_points() {
        let g = [0.1, 0.3, 0.5, 0.7];
        let c = named_curve(
            "mc_to_dc",
            &g,
            &CurveParams {
                r_min: 0.4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(c.mask, vec![true, true, false, false]);
        assert!(c.values[2].is_nan());
        assert_eq!(c.points().count(), 2);
    }

    #[test]
    fn rejects_unsorted_grid_and_unknown_name() {
        assert!(BoundCurve::evaluate("x", &[0.2, 0.1], Some).is_err());
        assert!(named_curve("nope", &[0.1], &CurveParams::default()).is_err());
    }

    #[test]
    fn constraint_band_is_flat_below_rho() {
        let g = linear_grid(0.0, 1.0, 0.01).unwrap();
        let curves = constraint_figure(&g, 0.1, 0.2).unwrap();
        let pmc_upper = &curves[3];
        let width = |i: usize| pmc_upper.values[i] - g[i];
        assert!((width(5) - 0.02).abs() < 1e-12);
        assert!((width(15) - 0.02).abs() < 1e-12);
        assert!((width(50) - 0.05).abs() < 1e-12);
        let mc_upper = &curves[1];
        assert!((mc_upper.values[50] - 0.6).abs() < 1e-12);
    }
}
