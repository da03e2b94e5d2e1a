//! Partitions of `[0, 1]` into prediction bins.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscretizationKind {
    /// Equal-width bins of width `lambda`.
    Uniform,
    /// Bins equally spaced in log scale above `rho`, plus an underflow bin `[0, rho)`.
    Geometric,
}

impl fmt::Display for DiscretizationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiscretizationKind::Uniform => "uniform",
            DiscretizationKind::Geometric => "geometric",
        })
    }
}

impl FromStr for DiscretizationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(DiscretizationKind::Uniform),
            "geometric" => Ok(DiscretizationKind::Geometric),
            other => config(format!("unknown discretization `{other}`")),
        }
    }
}

/// Half-open interval `[lo, hi)`, or `[lo, hi]` for the last bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub closed_hi: bool,
}

impl Bin {
    pub fn contains(&self, r: f64) -> bool {
        r >= self.lo && (r < self.hi || (self.closed_hi && r == self.hi))
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    kind: DiscretizationKind,
    lambda: f64,
    rho: Option<f64>,
    bins: Vec<Bin>,
}

/// Slack when deciding how many bins of width `lambda` fit in `[0, 1]`, so
/// that `1/lambda` computed in floating point as `10.000000000000002` still
/// yields ten bins.
const COUNT_SLACK: f64 = 1e-9;

fn bin_count(lambda: f64) -> usize {
    ((1.0 / lambda) - COUNT_SLACK).ceil().max(1.0) as usize
}

/// Build a discretization of `[0, 1]`.
///
/// `lambda` must lie in `(0, 1]`. When `1/lambda` is not an integer the last
/// bin is truncated at 1. The geometric kind requires `rho` in `(0, 1)`.
pub fn make_discretization(kind: DiscretizationKind, lambda: f64, rho: Option<f64>) -> Result<Discretization> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return config(format!("lambda must lie in (0, 1], got {lambda}"));
    }
    let count = bin_count(lambda);
    let mut bins = Vec::with_capacity(count + 1);
    let rho = match kind {
        DiscretizationKind::Uniform => {
            for j in 0..count {
                let lo = j as f64 * lambda;
                let hi = ((j + 1) as f64 * lambda).min(1.0);
                bins.push(Bin {
                    lo,
                    hi,
                    closed_hi: false,
                });
            }
            rho
        }
        DiscretizationKind::Geometric => {
            let rho = match rho {
                Some(r) if r > 0.0 && r < 1.0 => r,
                Some(r) => return config(format!("rho must lie in (0, 1), got {r}")),
                None => return config("geometric discretization requires rho"),
            };
            bins.push(Bin {
                lo: 0.0,
                hi: rho,
                closed_hi: false,
            });
            let edge = |j: usize| {
                let exponent = 1.0 - j as f64 * lambda;
                if exponent <= 0.0 {
                    1.0
                } else {
                    rho.powf(exponent)
                }
            };
            for j in 0..count {
                bins.push(Bin {
                    lo: edge(j),
                    hi: edge(j + 1),
                    closed_hi: false,
                });
            }
            Some(rho)
        }
    };
    let last = bins.last_mut().expect("at least one bin");
    last.hi = 1.0;
    last.closed_hi = true;
    Ok(Discretization {
        kind,
        lambda,
        rho,
        bins,
    })
}

impl Discretization {
    pub fn uniform(lambda: f64) -> Result<Self> {
        make_discretization(DiscretizationKind::Uniform, lambda, None)
    }

    pub fn geometric(lambda: f64, rho: f64) -> Result<Self> {
        make_discretization(DiscretizationKind::Geometric, lambda, Some(rho))
    }

    pub fn kind(&self) -> DiscretizationKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn rho(&self) -> Option<f64> {
        self.rho
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Index of the bin holding `r`. Scores are assumed to lie in `[0, 1]`;
    /// anything below 0 lands in the first bin and anything above 1 in the last.
    pub fn bin_of(&self, r: f64) -> usize {
        self.bins.partition_point(|b| b.lo <= r).saturating_sub(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn uniform_tenths() {
        let d = Discretization::uniform(0.1).unwrap();
        assert_eq!(d.len(), 10);
        for (j, b) in d.bins().iter().enumerate() {
            assert!(close(b.lo, j as f64 / 10.0));
            assert!(close(b.hi, (j + 1) as f64 / 10.0));
            assert_eq!(b.closed_hi, j == 9);
        }
        assert_eq!(d.bin_of(0.0), 0);
        assert_eq!(d.bin_of(0.15), 1);
        assert_eq!(d.bin_of(1.0), 9);
    }

    #[test]
    fn geometric_half_lambda() {
        let d = Discretization::geometric(0.5, 0.01).unwrap();
        let expected = [(0.0, 0.01), (0.01, 0.1), (0.1, 1.0)];
        assert_eq!(d.len(), expected.len());
        for (b, (lo, hi)) in d.bins().iter().zip(expected) {
            assert!(close(b.lo, lo) && close(b.hi, hi), "{b:?}");
        }
        assert_eq!(d.bin_of(0.005), 0);
        assert_eq!(d.bin_of(0.05), 1);
        assert_eq!(d.bin_of(1.0), 2);
    }

    #[test]
    fn single_bin() {
        let d = Discretization::uniform(1.0).unwrap();
        assert_eq!(
            d.bins(),
            &[Bin {
                lo: 0.0,
                hi: 1.0,
                closed_hi: true
            }]
        );
        assert_eq!(d.bin_of(0.0), 0);
        assert_eq!(d.bin_of(1.0), 0);
    }

    #[test]
    fn non_integral_inverse_lambda_truncates() {
        let d = Discretization::uniform(0.3).unwrap();
        assert_eq!(d.len(), 4);
        assert!(close(d.bins()[3].lo, 0.9));
        assert_eq!(d.bins()[3].hi, 1.0);
        let g = Discretization::geometric(0.3, 0.1).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g.bins()[4].hi, 1.0);
    }

    #[test]
    fn parameter_errors() {
        assert!(Discretization::uniform(0.0).is_err());
        assert!(Discretization::uniform(1.5).is_err());
        assert!(make_discretization(DiscretizationKind::Geometric, 0.1, None).is_err());
        assert!(Discretization::geometric(0.1, 1.0).is_err());
    }
}
