//! Subgroup collections built from categorical attributes.
//!
//! An intersectional collection holds one group per observed combination of
//! levels over the attribute basis. A marginal collection additionally holds
//! the combinations over every nonempty proper subset of the basis, with the
//! remaining attributes left as wildcards.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::dataset::AuditDataset;
use crate::error::{config, Error, Result};
use crate::MASS_TOLERANCE;

/// One `attribute = level` conjunct of a group predicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub attribute: String,
    pub level: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub id: usize,
    pub label: String,
    /// Conjunction of terms, sorted by attribute name.
    pub terms: Vec<Term>,
}

impl Group {
    /// Row-by-row predicate check by level string.
    pub fn contains(&self, dataset: &AuditDataset, row: usize) -> bool {
        self.terms.iter().all(|t| {
            dataset
                .attribute(&t.attribute)
                .is_some_and(|a| a.level_of(row) == t.level)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCollection {
    groups: Vec<Group>,
    attribute_basis: Vec<String>,
    includes_marginals: bool,
}

impl GroupCollection {
    /// Assemble a collection from explicit groups. Ids must be `0..len` in
    /// order and every term must name an attribute of the basis.
    pub fn from_groups(groups: Vec<Group>, attribute_basis: Vec<String>, includes_marginals: bool) -> Result<Self> {
        if groups.is_empty() {
            return config("group collection is empty");
        }
        for (i, g) in groups.iter().enumerate() {
            if g.id != i {
                return config(format!("group ids must be dense and ordered; found id {} at {i}", g.id));
            }
            if let Some(t) = g.terms.iter().find(|t| !attribute_basis.contains(&t.attribute)) {
                return config(format!(
                    "group `{}` references `{}` outside the attribute basis",
                    g.label, t.attribute
                ));
            }
        }
        Ok(GroupCollection {
            groups,
            attribute_basis,
            includes_marginals,
        })
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn attribute_basis(&self) -> &[String] {
        &self.attribute_basis
    }

    pub fn includes_marginals(&self) -> bool {
        self.includes_marginals
    }

    /// Sorted member row indices of every group, in group-id order.
    ///
    /// Groups whose level does not occur in `dataset` get an empty member list,
    /// so a collection enumerated on one sample can be evaluated on another.
    pub fn members(&self, dataset: &AuditDataset) -> Result<Vec<Vec<usize>>> {
        let attr_index = |name: &str| {
            dataset
                .attributes()
                .iter()
                .position(|a| a.name() == name)
                .ok_or_else(|| Error::Config(format!("unknown attribute `{name}`")))
        };

        // Groups sharing the same attribute pattern are resolved in one scan.
        let mut patterns: BTreeMap<Vec<usize>, HashMap<Vec<u32>, Vec<usize>>> = BTreeMap::new();
        for g in &self.groups {
            let mut attrs = Vec::with_capacity(g.terms.len());
            let mut key = Vec::with_capacity(g.terms.len());
            let mut observed = true;
            for t in &g.terms {
                let a = attr_index(&t.attribute)?;
                attrs.push(a);
                match dataset.attributes()[a].level_code(&t.level) {
                    Some(c) => key.push(c),
                    None => observed = false,
                }
            }
            let slot = patterns.entry(attrs).or_default();
            if observed {
                slot.entry(key).or_default().push(g.id);
            }
        }

        let mut members = vec![Vec::new(); self.groups.len()];
        let mut key = Vec::new();
        for (attrs, lookup) in &patterns {
            if lookup.is_empty() {
                continue;
            }
            let columns: Vec<&[u32]> = attrs.iter().map(|&a| dataset.attributes()[a].codes()).collect();
            for row in 0..dataset.len() {
                key.clear();
                key.extend(columns.iter().map(|c| c[row]));
                if let Some(ids) = lookup.get(&key) {
                    for &id in ids {
                        members[id].push(row);
                    }
                }
            }
        }
        Ok(members)
    }
}

/// Enumerate the groups over `attribute_basis` with empirical mass at least
/// `gamma`.
///
/// Attributes are ordered by name and levels lexicographically. Full
/// intersections come first; with `include_marginals` they are followed by the
/// products over smaller attribute subsets, larger subsets first. Only level
/// combinations that occur in the data are emitted.
pub fn enumerate_groups(
    dataset: &AuditDataset,
    attribute_basis: &[impl AsRef<str>],
    include_marginals: bool,
    gamma: f64,
) -> Result<GroupCollection> {
    if !(gamma >= 0.0) {
        return config(format!("gamma must be >= 0, got {gamma}"));
    }
    let mut basis: Vec<String> = attribute_basis.iter().map(|s| s.as_ref().to_string()).collect();
    basis.sort();
    basis.dedup();
    if basis.is_empty() {
        return config("attribute basis is empty");
    }
    let columns = basis
        .iter()
        .map(|name| {
            dataset
                .attribute(name)
                .ok_or_else(|| Error::Config(format!("unknown attribute `{name}`")))
        })
        .collect::<Result<Vec<_>>>()?;

    let k = basis.len();
    let mut subsets: Vec<Vec<usize>> = if include_marginals {
        (1u32..(1 << k))
            .map(|mask| (0..k).filter(|i| mask & (1 << i) != 0).collect())
            .collect()
    } else {
        vec![(0..k).collect()]
    };
    subsets.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));

    let n = dataset.len() as f64;
    let mut groups = Vec::new();
    let mut max_mass: f64 = 0.0;
    for subset in &subsets {
        let mut counts: BTreeMap<Vec<&str>, usize> = BTreeMap::new();
        for row in 0..dataset.len() {
            let key: Vec<&str> = subset.iter().map(|&i| columns[i].level_of(row)).collect();
            *counts.entry(key).or_default() += 1;
        }
        for (levels, count) in counts {
            let mass = count as f64 / n;
            max_mass = max_mass.max(mass);
            if mass < gamma - MASS_TOLERANCE {
                continue;
            }
            let terms: Vec<Term> = subset
                .iter()
                .zip(levels)
                .map(|(&i, level)| Term {
                    attribute: basis[i].clone(),
                    level: level.to_string(),
                })
                .collect();
            let label = terms
                .iter()
                .map(|t| format!("{}={}", t.attribute, t.level))
                .collect::<Vec<_>>()
                .join(",");
            groups.push(Group {
                id: groups.len(),
                label,
                terms,
            });
        }
    }
    if groups.is_empty() {
        return Err(Error::EmptyCollection { gamma, max_mass });
    }
    Ok(GroupCollection {
        groups,
        attribute_basis: basis,
        includes_marginals: include_marginals,
    })
}
