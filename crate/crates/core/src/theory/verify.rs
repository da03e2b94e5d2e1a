//! Randomized search for datasets that violate a bound.
//!
//! Each trial draws a small dataset (at most 500 rows, up to three attributes
//! with up to three levels each), measures both sides of the bound with the
//! loss functions on a shared set of qualifying categories, and records a
//! violation when the measured side exceeds the bound by more than
//! [`SLACK`].
//!
//! Scores take a single value per prediction bin, so categories sharing a bin
//! share `rbar`. The MC-to-DC, PMC-to-DC and DC-to-MC relationships compare
//! groups at equal predictions; with binned scores this is what makes them
//! hold for empirical categories and not only in expectation.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bounds::{dc_to_mc_bound, mc_to_dc_bound, pmc_to_dc_bound, pmc_to_mc_bound};
use crate::category::{category_stats, CategoryTable};
use crate::dataset::{Attribute, AuditDataset};
use crate::discretization::Discretization;
use crate::error::{config, Error, Result};
use crate::groups::{enumerate_groups, GroupCollection};
use crate::metrics::{dc_over, mc_over, pmc_over, FilterParams, Qualifier};
use crate::seed::derive_seed;

/// Allowed excess of the measured side over the bound.
pub const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundId {
    /// DC loss against `ln((r_min + mc) / (r_min - mc))`.
    McToDc,
    /// DC loss against `ln((1 + pmc) / (1 - pmc))`.
    PmcToDc,
    /// MC loss against `pmc / (1 - pmc)`.
    PmcToMc,
    /// MC loss against `1 - e^(-dc) + delta`, delta the per-bin overall
    /// calibration error.
    DcToMc,
    /// MC loss over the marginal collection against the MC loss over the
    /// intersectional collection it was built from.
    Efficiency,
}

impl BoundId {
    pub const ALL: [BoundId; 5] = [
        BoundId::McToDc,
        BoundId::PmcToDc,
        BoundId::PmcToMc,
        BoundId::DcToMc,
        BoundId::Efficiency,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BoundId::McToDc => "mc_to_dc",
            BoundId::PmcToDc => "pmc_to_dc",
            BoundId::PmcToMc => "pmc_to_mc",
            BoundId::DcToMc => "dc_to_mc",
            BoundId::Efficiency => "efficiency",
        }
    }
}

impl fmt::Display for BoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundId::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown bound `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub trial: usize,
    pub seed: u64,
    /// Measured quantity.
    pub measured: f64,
    /// Bound it should not exceed.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub bound: BoundId,
    pub trials: usize,
    /// Trials where both sides were defined and compared.
    pub checked: usize,
    /// Trials where the hypothesis did not apply (undefined loss, bound
    /// outside its domain).
    pub vacuous: usize,
    /// Smallest `bound - measured` over checked trials.
    pub min_margin: Option<f64>,
    pub violations: Vec<Violation>,
}

/// One randomly drawn audit setting.
#[derive(Debug, Clone)]
pub struct Trial {
    pub dataset: AuditDataset,
    pub attributes: Vec<String>,
    pub disc: Discretization,
    pub alpha: f64,
    pub rho: f64,
    pub exact: bool,
}

/// Draw a trial dataset.
pub fn random_trial(rng: &mut impl Rng) -> Result<Trial> {
    let n = rng.gen_range(20..=500);
    let n_attrs = rng.gen_range(1..=3);
    let lambda = [0.1, 0.2, 0.25, 0.5, 1.0][rng.gen_range(0..5)];
    let disc = if rng.gen_bool(0.25) {
        Discretization::geometric(lambda, rng.gen_range(0.02..0.3))?
    } else {
        Discretization::uniform(lambda)?
    };
    // one score per bin, so categories in a bin share their mean prediction
    let bin_scores: Vec<f64> = disc
        .bins()
        .iter()
        .map(|b| b.lo + rng.gen::<f64>() * (b.hi - b.lo))
        .collect();
    let bin_weights: Vec<f64> = (0..disc.len()).map(|_| rng.gen::<f64>() + 0.05).collect();
    let weight_sum: f64 = bin_weights.iter().sum();

    let levels: Vec<usize> = (0..n_attrs).map(|_| rng.gen_range(1..=3)).collect();
    let noise = rng.gen_range(0.0..0.3);
    // per (cell, bin) miscalibration, so groups disagree within a bin
    let n_cells: usize = levels.iter().product();
    let offsets: Vec<f64> = (0..n_cells * disc.len())
        .map(|_| rng.gen_range(-noise..=noise))
        .collect();

    let mut codes = vec![Vec::with_capacity(n); n_attrs];
    let mut scores = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    let mut p_star = Vec::with_capacity(n);
    for _ in 0..n {
        let mut cell = 0;
        for (a, &k) in levels.iter().enumerate() {
            let c = rng.gen_range(0..k);
            codes[a].push(c as u32);
            cell = cell * k + c;
        }
        let mut pick = rng.gen::<f64>() * weight_sum;
        let mut bin = 0;
        while bin + 1 < bin_weights.len() && pick >= bin_weights[bin] {
            pick -= bin_weights[bin];
            bin += 1;
        }
        let r = bin_scores[bin];
        let p = (r + offsets[cell * disc.len() + bin]).clamp(0.0, 1.0);
        scores.push(r);
        p_star.push(p);
        outcomes.push(u8::from(rng.gen::<f64>() < p));
    }

    let attributes: Vec<String> = (0..n_attrs).map(|a| format!("a{a}")).collect();
    let columns = codes
        .into_iter()
        .zip(&levels)
        .zip(&attributes)
        .map(|((codes, &k), name)| {
            Attribute::from_codes(name.clone(), (0..k).map(|l| format!("l{l}")).collect(), codes)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trial {
        dataset: AuditDataset::new(outcomes, scores, columns, Some(p_star))?,
        attributes,
        disc,
        alpha: rng.gen_range(0.0..0.3),
        rho: rng.gen_range(0.01..0.3),
        exact: rng.gen_bool(0.5),
    })
}

enum Check {
    Compared { measured: f64, bound: f64 },
    Vacuous,
}

fn table(trial: &Trial, groups: &GroupCollection) -> Result<CategoryTable> {
    category_stats(&trial.dataset, groups, &trial.disc, trial.exact)
}

fn check(bound: BoundId, trial: &Trial) -> Result<Check> {
    let intersectional = enumerate_groups(&trial.dataset, &trial.attributes, false, 0.0)?;
    let n = trial.dataset.len();
    let filter = |rho| FilterParams {
        alpha: trial.alpha,
        lambda: trial.disc.lambda(),
        gamma: 0.0,
        rho,
    };
    let check = match bound {
        BoundId::PmcToMc | BoundId::PmcToDc => {
            let t = table(trial, &intersectional)?;
            let q = Qualifier::from_filter(filter(Some(trial.rho)), n);
            let Some(pmc) = pmc_over(&t, &q).value() else {
                return Ok(Check::Vacuous);
            };
            let (measured, bound) = if bound == BoundId::PmcToMc {
                (mc_over(&t, &q).value(), pmc_to_mc_bound(pmc))
            } else {
                (dc_over(&t, &q).value(), pmc_to_dc_bound(pmc))
            };
            match (measured, bound) {
                (Some(measured), Some(bound)) => Check::Compared { measured, bound },
                _ => Check::Vacuous,
            }
        }
        BoundId::McToDc => {
            let t = table(trial, &intersectional)?;
            // DC only pairs categories with a positive outcome rate, so the MC
            // side and r_min are taken over the same set.
            let q = Qualifier {
                min_ybar: Some(f64::MIN_POSITIVE),
                ..Qualifier::from_filter(filter(None), n)
            };
            let Some(r_min) = q.qualifying(&t).map(|c| c.rbar).reduce(f64::min) else {
                return Ok(Check::Vacuous);
            };
            let Some(mc) = mc_over(&t, &q).value() else {
                return Ok(Check::Vacuous);
            };
            match (dc_over(&t, &q).value(), mc_to_dc_bound(mc, r_min)) {
                (Some(measured), Some(bound)) => Check::Compared { measured, bound },
                _ => Check::Vacuous,
            }
        }
        BoundId::DcToMc => {
            let t = table(trial, &intersectional)?;
            let q = Qualifier::everything(trial.disc.lambda());
            let entries = t.entries();
            // A bin mixing zero and positive outcome rates has unbounded DC.
            let unbounded = (0..trial.disc.len()).any(|b| {
                let mut rates = entries.iter().filter(|c| c.bin_index == b).map(|c| c.ybar);
                let first = rates.next();
                first.is_some_and(|f| rates.any(|y| (y == 0.0) != (f == 0.0)))
            });
            if unbounded {
                return Ok(Check::Vacuous);
            }
            let delta = overall_calibration(trial)?;
            match (dc_over(&t, &q).value(), mc_over(&t, &q).value()) {
                (Some(eps), Some(mc)) => match dc_to_mc_bound(eps, delta) {
                    Some(bound) => Check::Compared { measured: mc, bound },
                    None => Check::Vacuous,
                },
                // every category has zero outcome rate; DC is vacuously 0
                (None, Some(mc)) => Check::Compared {
                    measured: mc,
                    bound: dc_to_mc_bound(0.0, delta).unwrap_or(f64::INFINITY),
                },
                _ => Check::Vacuous,
            }
        }
        BoundId::Efficiency => {
            let marginal = enumerate_groups(&trial.dataset, &trial.attributes, true, 0.0)?;
            let q = Qualifier::everything(trial.disc.lambda());
            let inner = mc_over(&table(trial, &intersectional)?, &q).value();
            let outer = mc_over(&table(trial, &marginal)?, &q).value();
            match (outer, inner) {
                (Some(measured), Some(bound)) => Check::Compared { measured, bound },
                _ => Check::Vacuous,
            }
        }
    };
    Ok(check)
}

/// Largest per-bin `|ybar - rbar|` over the whole sample.
fn overall_calibration(trial: &Trial) -> Result<f64> {
    let targets = trial.dataset.targets(trial.exact)?;
    let bins = trial.disc.len();
    let (mut n, mut sy, mut sr) = (vec![0usize; bins], vec![0.0; bins], vec![0.0; bins]);
    for (row, &r) in trial.dataset.scores().iter().enumerate() {
        let b = trial.disc.bin_of(r);
        n[b] += 1;
        sy[b] += targets[row];
        sr[b] += r;
    }
    Ok((0..bins)
        .filter(|&b| n[b] > 0)
        .map(|b| ((sy[b] - sr[b]) / n[b] as f64).abs())
        .fold(0.0, f64::max))
}

/// Run `trials` random trials of `bound` with per-trial seeds derived from
/// `seed`.
pub fn verify_bound(bound: BoundId, trials: usize, seed: u64) -> Result<VerifyReport> {
    if trials == 0 {
        return config("trials must be at least 1");
    }
    let mut report = VerifyReport {
        bound,
        trials,
        checked: 0,
        vacuous: 0,
        min_margin: None,
        violations: Vec::new(),
    };
    for trial_index in 0..trials {
        let trial_seed = derive_seed(seed, trial_index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let trial = random_trial(&mut rng)?;
        match check(bound, &trial)? {
            Check::Vacuous => report.vacuous += 1,
            Check::Compared { measured, bound } => {
                report.checked += 1;
                let margin = bound - measured;
                report.min_margin = Some(report.min_margin.map_or(margin, |m: f64| m.min(margin)));
                if measured > bound + SLACK {
                    report.violations.push(Violation {
                        trial: trial_index,
                        seed: trial_seed,
                        measured,
                        bound,
                    });
                }
            }
        }
    }
    Ok(report)
}
