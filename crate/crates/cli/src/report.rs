//! Structured reports. Everything here serializes to JSON and reads back
//! unchanged; readers refuse documents whose major schema version differs.

use serde::{Deserialize, Serialize};

use pmcal::metrics::{LossOutcome, Witness};
use pmcal::{auroc, AuditDataset, Category, CategoryTable, GroupCollection, LossKind, LossResult};

use crate::error::{invalid, Result};

pub const SCHEMA_VERSION: &str = "1.0";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Echo of the options that produced a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub alpha: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub rho: f64,
    pub bins: String,
    pub groups: Vec<String>,
    pub marginals: bool,
    pub exact: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPrevalence {
    pub group_id: usize,
    pub label: String,
    pub n: usize,
    /// `None` for a group with no rows in this dataset.
    pub prevalence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prevalence {
    pub overall: f64,
    pub groups: Vec<GroupPrevalence>,
}

/// One loss. `value` is null exactly when `reason` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossEntry {
    pub value: Option<f64>,
    pub reason: Option<String>,
    pub n_categories: usize,
}

impl From<&LossResult> for LossEntry {
    fn from(r: &LossResult) -> Self {
        let (value, reason) = match &r.outcome {
            LossOutcome::Defined { value, .. } => (Some(*value), None),
            LossOutcome::Undefined { reason } => (None, Some(reason.clone())),
        };
        LossEntry {
            value,
            reason,
            n_categories: r.n_categories_considered,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessEntry {
    pub loss: LossKind,
    #[serde(flatten)]
    pub witness: Witness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryEntry {
    pub label: String,
    #[serde(flatten)]
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: String,
    pub tool_version: String,
    pub config: AuditConfig,
    pub n: usize,
    pub prevalence: Prevalence,
    pub mc_loss: LossEntry,
    pub pmc_loss: LossEntry,
    pub dc_loss: LossEntry,
    pub auroc: Option<f64>,
    pub witnesses: Vec<WitnessEntry>,
    pub categories: Vec<CategoryEntry>,
}

impl AuditReport {
    /// Assemble a report from already computed losses `[mc, pmc, dc]`.
    pub fn build(
        config: AuditConfig,
        dataset: &AuditDataset,
        groups: &GroupCollection,
        table: &CategoryTable,
        losses: [&LossResult; 3],
    ) -> Result<Self> {
        let members = groups.members(dataset)?;
        let y = dataset.outcomes();
        let prevalence = Prevalence {
            overall: dataset.prevalence(),
            groups: groups
                .groups()
                .iter()
                .zip(&members)
                .map(|(g, m)| GroupPrevalence {
                    group_id: g.id,
                    label: g.label.clone(),
                    n: m.len(),
                    prevalence: (!m.is_empty())
                        .then(|| m.iter().map(|&i| f64::from(y[i])).sum::<f64>() / m.len() as f64),
                })
                .collect(),
        };
        let label = |id: usize| groups.groups()[id].label.clone();
        Ok(AuditReport {
            schema_version: SCHEMA_VERSION.into(),
            tool_version: TOOL_VERSION.into(),
            config,
            n: dataset.len(),
            prevalence,
            mc_loss: losses[0].into(),
            pmc_loss: losses[1].into(),
            dc_loss: losses[2].into(),
            auroc: auroc(dataset),
            witnesses: losses
                .iter()
                .filter_map(|l| {
                    l.witness().map(|w| WitnessEntry {
                        loss: l.kind,
                        witness: *w,
                    })
                })
                .collect(),
            categories: table
                .entries()
                .iter()
                .map(|c| CategoryEntry {
                    label: label(c.group_id),
                    category: *c,
                })
                .collect(),
        })
    }

    pub fn loss(&self, kind: LossKind) -> &LossEntry {
        match kind {
            LossKind::Mc => &self.mc_loss,
            LossKind::Pmc => &self.pmc_loss,
            LossKind::Dc => &self.dc_loss,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        check_version(s)?;
        serde_json::from_str(s).map_err(|e| crate::CliError::Validation(format!("malformed report: {e}")))
    }
}

/// Trace summary and the per-pass update records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub passes: usize,
    pub updates: usize,
    pub converged: bool,
    pub records: Vec<pmcal::boost::PassRecord>,
}

impl From<&pmcal::UpdateTrace> for TraceReport {
    fn from(t: &pmcal::UpdateTrace) -> Self {
        TraceReport {
            passes: t.totals.passes,
            updates: t.totals.updates,
            converged: t.converged,
            records: t.passes.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostEcho {
    pub mode: pmcal::BoostMode,
    pub max_passes: usize,
    pub split: Option<f64>,
    pub sample_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub before: AuditReport,
    pub after: AuditReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostprocessReport {
    pub schema_version: String,
    pub tool_version: String,
    pub boost: BoostEcho,
    /// Rows used to fit the updates.
    pub train_rows: usize,
    /// Rows `before`/`after` were measured on: the held-out fold under a
    /// split, otherwise the training rows.
    pub eval_rows: usize,
    pub before: AuditReport,
    pub after: AuditReport,
    /// Training-fold reports, present only under a split.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub train: Option<Fold>,
    pub trace: TraceReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_secs: Option<f64>,
}

impl PostprocessReport {
    pub fn from_json(s: &str) -> Result<Self> {
        check_version(s)?;
        serde_json::from_str(s).map_err(|e| crate::CliError::Validation(format!("malformed report: {e}")))
    }
}

fn check_version(s: &str) -> Result<()> {
    #[derive(Deserialize)]
    struct Head {
        schema_version: String,
    }
    let head: Head =
        serde_json::from_str(s).map_err(|e| crate::CliError::Validation(format!("malformed report: {e}")))?;
    let ours = SCHEMA_VERSION.split('.').next();
    if head.schema_version.split('.').next() != ours {
        return invalid(format!(
            "unsupported report schema {} (this tool reads {}.x)",
            head.schema_version,
            ours.unwrap_or_default()
        ));
    }
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports contain only finite numbers");
    s.push('\n');
    s
}
