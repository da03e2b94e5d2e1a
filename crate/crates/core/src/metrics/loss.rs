//! Empirical MC, PMC and DC losses over qualifying categories.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::category::{category_stats, Category, CategoryTable};
use crate::dataset::AuditDataset;
use crate::discretization::Discretization;
use crate::error::{config, Result};
use crate::groups::GroupCollection;
use crate::MASS_TOLERANCE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mc,
    Pmc,
    Dc,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Mc => "mc",
            LossKind::Pmc => "pmc",
            LossKind::Dc => "dc",
        })
    }
}

/// Parameters of an audit. `alpha` and the discretization's `lambda` set the
/// category count floor `alpha * lambda * N`; `gamma` the group size floor
/// `gamma * N`; `rho` the PMC outcome floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditParams {
    pub alpha: f64,
    pub gamma: f64,
    pub rho: f64,
    /// Use `p_star` instead of sampled outcomes.
    pub exact: bool,
}

impl AuditParams {
    pub fn new(alpha: f64, gamma: f64, rho: f64) -> Self {
        AuditParams {
            alpha,
            gamma,
            rho,
            exact: false,
        }
    }

    pub fn exact(mut self, exact: bool) -> Self {
        self.exact = exact;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !(self.gamma >= 0.0) || !(self.rho >= 0.0) {
            return config(format!(
                "alpha, gamma and rho must be >= 0 (got {}, {}, {})",
                self.alpha, self.gamma, self.rho
            ));
        }
        Ok(())
    }
}

/// Echo of the filters applied to produce a [`LossResult`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub alpha: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub rho: Option<f64>,
}

/// Which categories take part in a loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qualifier {
    pub filter: FilterParams,
    /// Minimum `|S|` in rows.
    pub min_group_size: f64,
    /// Minimum `|S_I|` in rows.
    pub min_count: f64,
    /// Minimum category mean outcome, if any.
    pub min_ybar: Option<f64>,
}

impl Qualifier {
    /// `|S| >= gamma N`, `|S_I| >= alpha lambda N`, and `ybar >= rho` when
    /// `filter.rho` is set.
    pub fn from_filter(filter: FilterParams, n_total: usize) -> Self {
        let n = n_total as f64;
        Qualifier {
            filter,
            min_group_size: filter.gamma * n,
            min_count: filter.alpha * filter.lambda * n,
            min_ybar: filter.rho,
        }
    }

    /// Every nonempty category qualifies.
    pub fn everything(lambda: f64) -> Self {
        Qualifier {
            filter: FilterParams {
                alpha: 0.0,
                lambda,
                gamma: 0.0,
                rho: None,
            },
            min_group_size: 0.0,
            min_count: 0.0,
            min_ybar: None,
        }
    }

    pub fn admits(&self, table: &CategoryTable, c: &Category) -> bool {
        let slack = MASS_TOLERANCE * table.n_total() as f64;
        table.group_sizes()[c.group_id] as f64 >= self.min_group_size - slack
            && c.n as f64 >= self.min_count - slack
            && self.min_ybar.is_none_or(|floor| c.ybar >= floor)
    }

    pub fn qualifying<'t>(&'t self, table: &'t CategoryTable) -> impl Iterator<Item = &'t Category> + 't {
        table.entries().iter().filter(move |c| self.admits(table, c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Witness {
    Category { category: Category },
    Pair { a: Category, b: Category },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum LossOutcome {
    Defined { value: f64, witness: Witness },
    Undefined { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossResult {
    pub kind: LossKind,
    pub outcome: LossOutcome,
    pub n_categories_considered: usize,
    pub filter: FilterParams,
}

impl LossResult {
    pub fn value(&self) -> Option<f64> {
        match self.outcome {
            LossOutcome::Defined { value, .. } => Some(value),
            LossOutcome::Undefined { .. } => None,
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        match &self.outcome {
            LossOutcome::Defined { witness, .. } => Some(witness),
            LossOutcome::Undefined { .. } => None,
        }
    }

    pub fn is_defined(&self) -> bool {
        self.value().is_some()
    }
}

/// Max of `score` over qualifying categories; ties keep the earliest
/// category in `(group_id, bin_index)` order.
fn max_over(
    kind: LossKind,
    table: &CategoryTable,
    q: &Qualifier,
    score: impl Fn(&Category) -> Option<f64>,
) -> LossResult {
    let mut considered = 0;
    let mut best: Option<(f64, Category)> = None;
    for c in q.qualifying(table) {
        let Some(v) = score(c) else { continue };
        considered += 1;
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, *c));
        }
    }
    let outcome = match best {
        Some((value, category)) => LossOutcome::Defined {
            value,
            witness: Witness::Category { category },
        },
        None => LossOutcome::Undefined {
            reason: format!("no category passes the {kind} loss filters"),
        },
    };
    LossResult {
        kind,
        outcome,
        n_categories_considered: considered,
        filter: q.filter,
    }
}

/// `max |ybar - rbar|` over the categories admitted by `q`.
pub fn mc_over(table: &CategoryTable, q: &Qualifier) -> LossResult {
    max_over(LossKind::Mc, table, q, |c| Some((c.ybar - c.rbar).abs()))
}

/// `max |ybar - rbar| / ybar` over the categories admitted by `q` with
/// `ybar > 0`.
pub fn pmc_over(table: &CategoryTable, q: &Qualifier) -> LossResult {
    max_over(LossKind::Pmc, table, q, |c| {
        (c.ybar > 0.0).then(|| (c.ybar - c.rbar).abs() / c.ybar)
    })
}

/// `max |ln(ybar_a / ybar_b)|` over pairs of admitted categories with
/// `ybar > 0` in the same bin. A category paired with itself contributes 0,
/// so a single qualifying category yields 0 rather than an undefined loss.
pub fn dc_over(table: &CategoryTable, q: &Qualifier) -> LossResult {
    let eligible: Vec<&Category> = q.qualifying(table).filter(|c| c.ybar > 0.0).collect();
    let n_bins = eligible.iter().map(|c| c.bin_index + 1).max().unwrap_or(0);
    let mut by_bin: Vec<Vec<&Category>> = vec![Vec::new(); n_bins];
    for c in &eligible {
        by_bin[c.bin_index].push(c);
    }
    let mut best: Option<(f64, Category, Category)> = None;
    for a in &eligible {
        for b in &by_bin[a.bin_index] {
            if b.group_id < a.group_id {
                continue;
            }
            let v = (a.ybar.max(b.ybar) / a.ybar.min(b.ybar)).ln();
            if best.is_none_or(|(x, _, _)| v > x) {
                best = Some((v, **a, **b));
            }
        }
    }
    let outcome = match best {
        Some((value, a, b)) => LossOutcome::Defined {
            value,
            witness: Witness::Pair { a, b },
        },
        None => LossOutcome::Undefined {
            reason: "no category with positive outcome rate passes the dc loss filters".into(),
        },
    };
    LossResult {
        kind: LossKind::Dc,
        outcome,
        n_categories_considered: eligible.len(),
        filter: q.filter,
    }
}

fn filter_for(kind: LossKind, disc: &Discretization, params: &AuditParams) -> FilterParams {
    FilterParams {
        alpha: params.alpha,
        lambda: disc.lambda(),
        gamma: params.gamma,
        rho: (kind == LossKind::Pmc).then_some(params.rho),
    }
}

/// A loss evaluated on an already computed table.
pub fn loss_from_table(
    kind: LossKind,
    table: &CategoryTable,
    disc: &Discretization,
    params: &AuditParams,
) -> LossResult {
    let q = Qualifier::from_filter(filter_for(kind, disc, params), table.n_total());
    match kind {
        LossKind::Mc => mc_over(table, &q),
        LossKind::Pmc => pmc_over(table, &q),
        LossKind::Dc => dc_over(table, &q),
    }
}

fn loss(
    kind: LossKind,
    dataset: &AuditDataset,
    groups: &GroupCollection,
    disc: &Discretization,
    params: &AuditParams,
) -> Result<LossResult> {
    params.validate()?;
    let table = category_stats(dataset, groups, disc, params.exact)?;
    Ok(loss_from_table(kind, &table, disc, params))
}

/// MC loss: the largest `|ybar - rbar|` over categories with
/// `|S| >= gamma N` and `|S_I| >= alpha lambda N`.
pub fn mc_loss(
    dataset: &AuditDataset,
    groups: &GroupCollection,
    disc: &Discretization,
    params: &AuditParams,
) -> Result<LossResult> {
    loss(LossKind::Mc, dataset, groups, disc, params)
}

/// PMC loss: the largest `|ybar - rbar| / ybar` over MC-qualifying categories
/// that also have `ybar >= rho`.
pub fn pmc_loss(
    dataset: &AuditDataset,
    groups: &GroupCollection,
    disc: &Discretization,
    params: &AuditParams,
) -> Result<LossResult> {
    loss(LossKind::Pmc, dataset, groups, disc, params)
}

/// DC loss: the largest `|ln(ybar_a / ybar_b)|` over same-bin pairs of
/// MC-qualifying categories with positive outcome rate.
pub fn dc_loss(
    dataset: &AuditDataset,
    groups: &GroupCollection,
    disc: &Discretization,
    params: &AuditParams,
) -> Result<LossResult> {
    loss(LossKind::Dc, dataset, groups, disc, params)
}
