//! Per-(group, bin) statistics.

use serde::{Deserialize, Serialize};

use crate::dataset::AuditDataset;
use crate::discretization::Discretization;
use crate::error::Result;
use crate::groups::GroupCollection;

/// Statistics of one nonempty category `S ∩ {R ∈ I}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub group_id: usize,
    pub bin_index: usize,
    pub n: usize,
    /// Mean outcome (or mean `p_star` in exact mode).
    pub ybar: f64,
    /// Mean score.
    pub rbar: f64,
    /// `n / N`.
    pub joint_mass: f64,
    /// `n / |S|`.
    pub cond_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryTable {
    entries: Vec<Category>,
    group_sizes: Vec<usize>,
    n_total: usize,
    exact: bool,
}

impl CategoryTable {
    /// Entries in canonical `(group_id, bin_index)` order.
    pub fn entries(&self) -> &[Category] {
        &self.entries
    }

    /// `|S|` for each group id, including groups with no members.
    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn exact(&self) -> bool {
        self.exact
    }

    pub fn for_group(&self, group_id: usize) -> impl Iterator<Item = &Category> {
        self.entries.iter().filter(move |c| c.group_id == group_id)
    }
}

/// Compute one [`Category`] per nonempty `(group, bin)` pair.
///
/// With `exact_mode`, `ybar` averages `p_star` instead of the sampled outcome;
/// this requires `p_star` on every row.
pub fn category_stats(
    dataset: &AuditDataset,
    groups: &GroupCollection,
    disc: &Discretization,
    exact_mode: bool,
) -> Result<CategoryTable> {
    let targets = dataset.targets(exact_mode)?;
    let members = groups.members(dataset)?;
    let bins: Vec<usize> = dataset.scores().iter().map(|&r| disc.bin_of(r)).collect();
    let n_total = dataset.len();

    let mut entries = Vec::new();
    let mut counts = vec![0usize; disc.len()];
    let mut sum_y = vec![0.0f64; disc.len()];
    let mut sum_r = vec![0.0f64; disc.len()];
    for (group_id, rows) in members.iter().enumerate() {
        counts.iter_mut().for_each(|c| *c = 0);
        sum_y.iter_mut().for_each(|s| *s = 0.0);
        sum_r.iter_mut().for_each(|s| *s = 0.0);
        for &row in rows {
            let b = bins[row];
            counts[b] += 1;
            sum_y[b] += targets[row];
            sum_r[b] += dataset.scores()[row];
        }
        for bin_index in 0..disc.len() {
            let n = counts[bin_index];
            if n == 0 {
                continue;
            }
            entries.push(Category {
                group_id,
                bin_index,
                n,
                ybar: sum_y[bin_index] / n as f64,
                rbar: sum_r[bin_index] / n as f64,
                joint_mass: n as f64 / n_total as f64,
                cond_mass: n as f64 / rows.len() as f64,
            });
        }
    }
    Ok(CategoryTable {
        entries,
        group_sizes: members.iter().map(Vec::len).collect(),
        n_total,
        exact: exact_mode,
    })
}
