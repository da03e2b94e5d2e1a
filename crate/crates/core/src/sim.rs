//! Populations scored by an α-multicalibrated model whose calibration error
//! varies with group outcome rate.
//!
//! Group `i` (1-based) has outcome rate `p*_i = 0.2 + 0.01 (i - 1)` and every
//! member receives the score `R_i = p*_i - Δ_i`, with `|Δ_i| <= alpha`. The
//! scenario fixes how `|Δ_i|` varies over groups; the sign of each `Δ_i` is a
//! fair coin flip.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::category::category_stats;
use crate::dataset::{Attribute, AuditDataset};
use crate::discretization::Discretization;
use crate::error::{config, Error, Result};
use crate::groups::enumerate_groups;
use crate::seed::derive_seed;

/// Name of the single attribute of simulated datasets.
pub const GROUP_ATTRIBUTE: &str = "group";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// One uniformly chosen group has `|Δ| = alpha`, the rest `|Δ| ~ U(0, alpha)`.
    Random,
    /// `|Δ| = alpha` everywhere.
    Fixed,
    /// `|Δ|` rises linearly from 0 (first group) to `alpha` (last group).
    Increasing,
    /// `|Δ|` falls linearly from `alpha` to 0.
    Decreasing,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Random,
        Scenario::Fixed,
        Scenario::Increasing,
        Scenario::Decreasing,
    ];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Random => "random",
            Scenario::Fixed => "fixed",
            Scenario::Increasing => "increasing",
            Scenario::Decreasing => "decreasing",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub n_groups: usize,
    pub alpha: f64,
    pub n_per_group: usize,
    /// Replicates for [`run_scenarios`].
    pub n_sims: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            scenario: Scenario::Random,
            n_groups: 61,
            alpha: 0.1,
            n_per_group: 1000,
            n_sims: 100,
            seed: 0,
        }
    }
}

/// `p*_i` for the 1-based group index `i`.
pub fn outcome_rate(i: usize) -> f64 {
    0.2 + 0.01 * (i as f64 - 1.0)
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_groups == 0 {
            return config("n_groups must be at least 1");
        }
        if self.n_per_group == 0 {
            return config("n_per_group must be at least 1");
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return config(format!("alpha must be a finite value >= 0, got {}", self.alpha));
        }
        let top = outcome_rate(self.n_groups);
        if top > 1.0 + 1e-12 {
            return config(format!(
                "{} groups push the outcome rate to {top}, outside [0, 1]",
                self.n_groups
            ));
        }
        if outcome_rate(1) - self.alpha < -1e-12 || top + self.alpha > 1.0 + 1e-12 {
            return config(format!(
                "alpha {} moves scores outside [0, 1] for outcome rates in [{}, {top}]",
                self.alpha,
                outcome_rate(1)
            ));
        }
        Ok(())
    }

    /// `|Δ_i|` for the deterministic scenarios, `None` for [`Scenario::Random`].
    pub fn error_profile(&self, i: usize) -> Option<f64> {
        let ramp = if self.n_groups > 1 {
            (i - 1) as f64 / (self.n_groups - 1) as f64
        } else {
            1.0
        };
        match self.scenario {
            Scenario::Random => None,
            Scenario::Fixed => Some(self.alpha),
            Scenario::Increasing => Some(self.alpha * ramp),
            Scenario::Decreasing => Some(self.alpha * (1.0 - ramp)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimGroup {
    pub level: String,
    pub p_star: f64,
    pub delta: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub dataset: AuditDataset,
    pub groups: Vec<SimGroup>,
}

/// One simulated dataset drawn with `config.seed`.
pub fn simulate(config: &SimConfig) -> Result<Simulation> {
    simulate_with_seed(config, config.seed)
}

/// Replicate `index` of a run, seeded deterministically from `config.seed`.
pub fn simulate_replicate(config: &SimConfig, index: usize) -> Result<Simulation> {
    simulate_with_seed(config, derive_seed(config.seed, index as u64))
}

fn simulate_with_seed(config: &SimConfig, seed: u64) -> Result<Simulation> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = config.n_groups;
    let width = k.to_string().len();

    let pinned = match config.scenario {
        Scenario::Random => Some(rng.gen_range(0..k)),
        _ => None,
    };
    let groups: Vec<SimGroup> = (1..=k)
        .map(|i| {
            let magnitude = match config.error_profile(i) {
                Some(m) => m,
                None if pinned == Some(i - 1) => config.alpha,
                None => rng.gen::<f64>() * config.alpha,
            };
            let delta = if rng.gen_bool(0.5) { magnitude } else { -magnitude };
            let p_star = outcome_rate(i);
            SimGroup {
                level: format!("g{i:0width$}"),
                p_star,
                delta,
                score: (p_star - delta).clamp(0.0, 1.0),
            }
        })
        .collect();

    let n = k * config.n_per_group;
    let mut outcomes = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    let mut p_star = Vec::with_capacity(n);
    let mut codes = Vec::with_capacity(n);
    for (code, g) in groups.iter().enumerate() {
        for _ in 0..config.n_per_group {
            outcomes.push(u8::from(rng.gen::<f64>() < g.p_star));
            scores.push(g.score);
            p_star.push(g.p_star);
            codes.push(code as u32);
        }
    }
    let attribute = Attribute::from_codes(GROUP_ATTRIBUTE, groups.iter().map(|g| g.level.clone()).collect(), codes)?;
    Ok(Simulation {
        dataset: AuditDataset::new(outcomes, scores, vec![attribute], Some(p_star))?,
        groups,
    })
}

/// Mean PMC ratio of one group over the replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    /// 1-based group index.
    pub group: usize,
    pub p_star: f64,
    /// Mean over replicates of `|ybar_i - R_i| / p*_i`.
    pub mean_ratio: f64,
    /// `|Δ_i| / p*_i` for deterministic scenarios.
    pub expected_ratio: Option<f64>,
}

/// Per-group `|ybar_i - R_i| / p*_i` for one dataset, using sampled outcomes
/// or, with `exact`, `p_star`.
pub fn group_ratios(sim: &Simulation, exact: bool) -> Result<Vec<f64>> {
    let groups = enumerate_groups(&sim.dataset, &[GROUP_ATTRIBUTE], false, 0.0)?;
    // scores are constant within a group: one bin suffices
    let table = category_stats(&sim.dataset, &groups, &Discretization::uniform(1.0)?, exact)?;
    Ok(table
        .entries()
        .iter()
        .zip(&sim.groups)
        .map(|(c, g)| (c.ybar - c.rbar).abs() / g.p_star)
        .collect())
}

/// Average per-group PMC ratio over `config.n_sims` replicates.
pub fn run_scenarios(config: &SimConfig) -> Result<Vec<ScenarioRow>> {
    config.validate()?;
    if config.n_sims == 0 {
        return self::config("n_sims must be at least 1");
    }
    let mut sums = vec![0.0; config.n_groups];
    for rep in 0..config.n_sims {
        let sim = simulate_replicate(config, rep)?;
        for (s, r) in sums.iter_mut().zip(group_ratios(&sim, false)?) {
            *s += r;
        }
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(k, sum)| {
            let i = k + 1;
            let p_star = outcome_rate(i);
            ScenarioRow {
                group: i,
                p_star,
                mean_ratio: sum / config.n_sims as f64,
                expected_ratio: config.error_profile(i).map(|d| d / p_star),
            }
        })
        .collect())
}
