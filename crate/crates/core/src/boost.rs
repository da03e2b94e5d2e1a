//! Iterative post-processing that shifts category predictions toward
//! category outcome means.
//!
//! Both engines sweep the `(group, bin)` categories in canonical order. A
//! category is eligible when its joint mass is at least
//! `alpha * lambda * gamma`; an eligible category whose mean error
//! `Δr = ybar - rbar` reaches the cutoff has `Δr` added to every member score,
//! followed by a clamp to `[0, 1]`. Membership and statistics are recomputed
//! at every visit, so an update is visible to the categories visited after it.
//! Sweeps repeat until one makes no update.
//!
//! * PMC mode: cutoff is `alpha * ybar` when `ybar >= rho`, else `alpha * rho`.
//! * MC mode: cutoff is `alpha`.

use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::AuditDataset;
use crate::discretization::Discretization;
use crate::error::{config, Result};
use crate::groups::GroupCollection;
use crate::MASS_TOLERANCE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoostMode {
    Pmc,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub mode: BoostMode,
    pub alpha: f64,
    pub lambda: f64,
    pub gamma: f64,
    /// Outcome floor for the proportional cutoff; ignored in MC mode.
    pub rho: f64,
    pub max_passes: usize,
    /// Fraction of rows drawn (without replacement) to estimate category
    /// statistics on each pass. 1.0 uses every row.
    pub sample_fraction: f64,
    pub seed: u64,
    /// Take category outcome means from `p_star`.
    pub exact: bool,
}

impl BoostConfig {
    pub const DEFAULT_MAX_PASSES: usize = 1000;

    pub fn pmc(alpha: f64, lambda: f64, gamma: f64, rho: f64) -> Self {
        BoostConfig {
            mode: BoostMode::Pmc,
            alpha,
            lambda,
            gamma,
            rho,
            max_passes: Self::DEFAULT_MAX_PASSES,
            sample_fraction: 1.0,
            seed: 0,
            exact: false,
        }
    }

    pub fn mc(alpha: f64, lambda: f64, gamma: f64) -> Self {
        BoostConfig {
            mode: BoostMode::Mc,
            rho: 0.0,
            ..Self::pmc(alpha, lambda, gamma, 0.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                config(format!("{name} must lie in (0, 1), got {v}"))
            }
        };
        unit("alpha", self.alpha)?;
        unit("lambda", self.lambda)?;
        unit("gamma", self.gamma)?;
        if self.mode == BoostMode::Pmc {
            unit("rho", self.rho)?;
        }
        if self.max_passes == 0 {
            return config("max_passes must be at least 1");
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return config(format!(
                "sample_fraction must lie in (0, 1], got {}",
                self.sample_fraction
            ));
        }
        Ok(())
    }

    /// Cutoff applied to `|Δr|` for a category with mean outcome `ybar`.
    pub fn cutoff(&self, ybar: f64) -> f64 {
        match self.mode {
            BoostMode::Mc => self.alpha,
            BoostMode::Pmc if ybar >= self.rho => self.alpha * ybar,
            BoostMode::Pmc => self.alpha * self.rho,
        }
    }

    /// Worst-case number of updates in PMC mode, `N / (alpha^3 rho^2 lambda gamma)`.
    pub fn update_cap(&self, n: usize) -> f64 {
        n as f64 / (self.alpha.powi(3) * self.rho.powi(2) * self.lambda * self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub group_id: usize,
    pub bin_index: usize,
    pub delta_r: f64,
    pub cutoff: f64,
    /// Rows whose score was shifted.
    pub n: usize,
    /// Rows whose shifted score left `[0, 1]` and was clamped.
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRecord {
    pub pass: usize,
    pub updates: Vec<UpdateRecord>,
    /// The pass made no update.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceTotals {
    pub passes: usize,
    pub updates: usize,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateTrace {
    pub passes: Vec<PassRecord>,
    pub totals: TraceTotals,
    pub converged: bool,
}

impl UpdateTrace {
    pub fn updates(&self) -> impl Iterator<Item = &UpdateRecord> {
        self.passes.iter().flat_map(|p| p.updates.iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostOutcome {
    pub scores: Vec<f64>,
    pub trace: UpdateTrace,
}

/// What an observer sees for each applied update.
#[derive(Debug)]
pub struct UpdateEvent<'a> {
    pub pass: usize,
    pub record: &'a UpdateRecord,
    /// Rows of the updated category.
    pub members: &'a [usize],
    /// Scores of `members` before the update.
    pub before: &'a [f64],
    /// Scores of `members` after the update.
    pub after: &'a [f64],
}

/// Clamp to `[0, 1]`.
pub fn squash(score: f64) -> f64 {
    score.clamp(0.0, 1.0)
}

/// PMCBoost. `config.mode` must be [`BoostMode::Pmc`].
pub fn pmc_boost(
    dataset: &AuditDataset,
    groups: &GroupCollection,
    disc: &Discretization,
    config: &BoostConfig,
) -> Result<BoostOutcome> {
    if config.mode != BoostMode::Pmc {
        return crate::error::config("pmc_boost requires mode = pmc");
    }
    boost_with_observer(dataset, groups, disc, config, |_| {})
}

/// MCBoost with the constant cutoff `alpha`. `config.mode` must be
/// [`BoostMode::Mc`].
pub fn mc_boost(
    dataset: &AuditDataset,
    groups: &GroupCollection,
    disc: &Discretization,
    config: &BoostConfig,
) -> Result<BoostOutcome> {
    if config.mode != BoostMode::Mc {
        return crate::error::config("mc_boost requires mode = mc");
    }
    boost_with_observer(dataset, groups, disc, config, |_| {})
}

/// Run the engine selected by `config.mode`.
pub fn boost(
    dataset: &AuditDataset,
    groups: &GroupCollection,
    disc: &Discretization,
    config: &BoostConfig,
) -> Result<BoostOutcome> {
    boost_with_observer(dataset, groups, disc, config, |_| {})
}

/// [`boost`] with a callback invoked after every applied update.
pub fn boost_with_observer(
    dataset: &AuditDataset,
    groups: &GroupCollection,
    disc: &Discretization,
    config: &BoostConfig,
    mut observer: impl FnMut(&UpdateEvent<'_>),
) -> Result<BoostOutcome> {
    config.validate()?;
    let start = Instant::now();
    let targets = dataset.targets(config.exact)?;
    let members = groups.members(dataset)?;
    let n = dataset.len();
    let mut scores = dataset.scores().to_vec();
    let mut bins: Vec<usize> = scores.iter().map(|&r| disc.bin_of(r)).collect();
    let mass_floor = config.alpha * config.lambda * config.gamma;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut in_sample = vec![true; n];
    let mut passes = Vec::new();
    let mut total_updates = 0;
    let mut category = Vec::new();
    let mut before = Vec::new();
    let mut after = Vec::new();

    for pass in 1..=config.max_passes {
        let n_sample = if config.sample_fraction < 1.0 {
            let m = ((config.sample_fraction * n as f64).round() as usize).clamp(1, n);
            in_sample.iter_mut().for_each(|s| *s = false);
            for i in sample(&mut rng, n, m) {
                in_sample[i] = true;
            }
            m
        } else {
            n
        };
        let slack = MASS_TOLERANCE * n_sample as f64;

        let mut updates = Vec::new();
        for (group_id, rows) in members.iter().enumerate() {
            for bin_index in 0..disc.len() {
                category.clear();
                category.extend(rows.iter().copied().filter(|&r| bins[r] == bin_index));
                if category.is_empty() {
                    continue;
                }
                let (mut count, mut sum_y, mut sum_r) = (0usize, 0.0, 0.0);
                for &r in category.iter().filter(|&&r| in_sample[r]) {
                    count += 1;
                    sum_y += targets[r];
                    sum_r += scores[r];
                }
                if count == 0 || (count as f64) < mass_floor * n_sample as f64 - slack {
                    continue;
                }
                let ybar = sum_y / count as f64;
                let rbar = sum_r / count as f64;
                let delta_r = ybar - rbar;
                let cutoff = config.cutoff(ybar);
                if delta_r.abs() < cutoff {
                    continue;
                }

                before.clear();
                after.clear();
                let mut clamped = 0;
                for &r in &category {
                    before.push(scores[r]);
                    let raw = scores[r] + delta_r;
                    let updated = squash(raw);
                    if updated != raw {
                        clamped += 1;
                    }
                    scores[r] = updated;
                    bins[r] = disc.bin_of(updated);
                    after.push(updated);
                }
                let record = UpdateRecord {
                    group_id,
                    bin_index,
                    delta_r,
                    cutoff,
                    n: category.len(),
                    clamped,
                };
                observer(&UpdateEvent {
                    pass,
                    record: &record,
                    members: &category,
                    before: &before,
                    after: &after,
                });
                updates.push(record);
            }
        }
        total_updates += updates.len();
        let converged = updates.is_empty();
        passes.push(PassRecord {
            pass,
            updates,
            converged,
        });
        if converged {
            break;
        }
    }

    let converged = passes.last().is_some_and(|p| p.converged);
    Ok(BoostOutcome {
        scores,
        trace: UpdateTrace {
            totals: TraceTotals {
                passes: passes.len(),
                updates: total_updates,
                wall_time: start.elapsed(),
            },
            passes,
            converged,
        },
    })
}

/// Replay the updates of `trace` on `dataset`, treating the trace as a learned
/// sequence of `(group, bin, Δr)` corrections. Used to score rows that were
/// not seen during boosting.
pub fn apply_trace(
    dataset: &AuditDataset,
    groups: &GroupCollection,
    disc: &Discretization,
    trace: &UpdateTrace,
) -> Result<Vec<f64>> {
    let members = groups.members(dataset)?;
    let mut scores = dataset.scores().to_vec();
    for u in trace.updates() {
        let Some(rows) = members.get(u.group_id) else {
            return config(format!("trace references unknown group {}", u.group_id));
        };
        let hit: Vec<usize> = rows
            .iter()
            .copied()
            .filter(|&r| disc.bin_of(scores[r]) == u.bin_index)
            .collect();
        for r in hit {
            scores[r] = squash(scores[r] + u.delta_r);
        }
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Row;
    use crate::groups::enumerate_groups;

    fn one_category(r: f64, positives: usize) -> (AuditDataset, GroupCollection, Discretization) {
        let rows: Vec<Row> = (0..10)
            .map(|i| Row::new(u8::from(i < positives), r, [("g", "a")]))
            .collect();
        let ds = AuditDataset::from_rows(&rows).unwrap();
        let groups = enumerate_groups(&ds, &["g"], false, 0.0).unwrap();
        (ds, groups, Discretization::uniform(0.1).unwrap())
    }

    #[test]
    fn squash_clamps() {
        assert_eq!(squash(1.2), 1.0);
        assert_eq!(squash(-0.05), 0.0);
        assert_eq!(squash(0.37), 0.37);
    }

    #[test]
    fn pmc_hand_trace_single_category() {
        let (ds, groups, disc) = one_category(0.4, 6);
        let cfg = BoostConfig::pmc(0.1, 0.1, 0.05, 0.01);
        let out = pmc_boost(&ds, &groups, &disc, &cfg).unwrap();
        assert_eq!(out.trace.totals.passes, 2);
        assert_eq!(out.trace.totals.updates, 1);
        assert!(out.trace.converged);
        let u = out.trace.passes[0].updates[0];
        assert!((u.delta_r - 0.2).abs() < 1e-12);
        assert!((u.cutoff - 0.06).abs() < 1e-12);
        assert_eq!((u.n, u.clamped), (10, 0));
        assert!(out.scores.iter().all(|&s| (s - 0.6).abs() < 1e-12));
    }

    #[test]
    fn already_calibrated_is_a_fixed_point() {
        let (ds, groups, disc) = one_category(0.6, 6);
        let cfg = BoostConfig::pmc(0.1, 0.1, 0.05, 0.01);
        let out = pmc_boost(&ds, &groups, &disc, &cfg).unwrap();
        assert_eq!(out.trace.totals.updates, 0);
        assert_eq!(out.trace.totals.passes, 1);
        assert!(out.trace.converged);
        assert_eq!(out.scores, ds.scores());
    }

    #[test]
    fn low_prevalence_uses_absolute_floor() {
        // ybar = 0.005 via p_star, below rho = 0.01: cutoff = alpha * rho = 0.001
        let make = |r: f64| {
            let rows: Vec<Row> = (0..10)
                .map(|_| Row::new(0, r, [("g", "a")]).with_p_star(0.005))
                .collect();
            AuditDataset::from_rows(&rows).unwrap()
        };
        let disc = Discretization::uniform(0.1).unwrap();
        let mut cfg = BoostConfig::pmc(0.1, 0.1, 0.05, 0.01);
        cfg.exact = true;

        let fires = make(0.0065);
        let groups = enumerate_groups(&fires, &["g"], false, 0.0).unwrap();
        let out = pmc_boost(&fires, &groups, &disc, &cfg).unwrap();
        assert_eq!(out.trace.totals.updates, 1);
        assert!((out.trace.passes[0].updates[0].cutoff - 0.001).abs() < 1e-15);

        let quiet = make(0.0059);
        let out = pmc_boost(&quiet, &groups, &disc, &cfg).unwrap();
        assert_eq!(out.trace.totals.updates, 0);
    }

    #[test]
    fn mc_cutoff_is_alpha() {
        let cfg = BoostConfig::mc(0.1, 0.1, 0.05);
        let (ds, groups, disc) = one_category(0.4, 6);
        assert_eq!(mc_boost(&ds, &groups, &disc, &cfg).unwrap().trace.totals.updates, 1);
        let (ds, groups, disc) = one_category(0.55, 6);
        assert_eq!(mc_boost(&ds, &groups, &disc, &cfg).unwrap().trace.totals.updates, 0);
    }

    #[test]
    fn mode_mismatch_and_bad_parameters() {
        let (ds, groups, disc) = one_category(0.4, 6);
        let mc = BoostConfig::mc(0.1, 0.1, 0.05);
        assert!(pmc_boost(&ds, &groups, &disc, &mc).is_err());
        let pmc = BoostConfig::pmc(0.1, 0.1, 0.05, 0.01);
        assert!(mc_boost(&ds, &groups, &disc, &pmc).is_err());
        for bad in [
            BoostConfig { alpha: 0.0, ..pmc },
            BoostConfig { rho: 1.0, ..pmc },
            BoostConfig { max_passes: 0, ..pmc },
            BoostConfig {
                sample_fraction: 0.0,
                ..pmc
            },
        ] {
            assert!(boost(&ds, &groups, &disc, &bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn pass_cap_reports_non_convergence() {
        let (ds, groups, disc) = one_category(0.4, 6);
        let cfg = BoostConfig {
            max_passes: 1,
            ..BoostConfig::pmc(0.1, 0.1, 0.05, 0.01)
        };
        let out = pmc_boost(&ds, &groups, &disc, &cfg).unwrap();
        assert!(!out.trace.converged);
        assert_eq!(out.trace.totals.passes, 1);
    }

    #[test]
    fn clamping_is_counted() {
        let rows: Vec<Row> = (0..10)
            .map(|i| Row::new(1, if i < 5 { 0.1 } else { 0.3 }, [("g", "a")]))
            .collect();
        let ds = AuditDataset::from_rows(&rows).unwrap();
        let groups = enumerate_groups(&ds, &["g"], false, 0.0).unwrap();
        let disc = Discretization::uniform(0.5).unwrap();
        let cfg = BoostConfig::mc(0.1, 0.5, 0.05);
        let out = mc_boost(&ds, &groups, &disc, &cfg).unwrap();
        // both scores share bin [0, 0.5): rbar 0.2, ybar 1, shift +0.8
        let u = out.trace.passes[0].updates[0];
        assert_eq!(u.clamped, 5);
        assert!(out.scores[5..].iter().all(|&s| s == 1.0));
    }

    #[test]
    fn replaying_the_trace_reproduces_scores() {
        let rows: Vec<Row> = (0..200)
            .map(|i| {
                let g = ["a", "b", "c"][i % 3];
                Row::new(u8::from(i % 7 < 3), (i % 10) as f64 / 10.0, [("g", g)])
            })
            .collect();
        let ds = AuditDataset::from_rows(&rows).unwrap();
        let groups = enumerate_groups(&ds, &["g"], false, 0.0).unwrap();
        let disc = Discretization::uniform(0.1).unwrap();
        let out = boost(&ds, &groups, &disc, &BoostConfig::pmc(0.1, 0.1, 0.05, 0.01)).unwrap();
        assert!(out.trace.totals.updates > 0);
        assert_eq!(apply_trace(&ds, &groups, &disc, &out.trace).unwrap(), out.scores);
    }
}
