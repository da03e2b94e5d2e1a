//! The audited sample: binary outcomes, risk scores in `[0, 1]` and a vector
//! of categorical attributes per row.
//!
//! Attributes are stored column-wise as dictionary-encoded levels. Levels are
//! opaque strings compared byte-for-byte and kept in sorted order, so a level
//! code also gives its lexicographic rank.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Level used for absent attribute values.
pub const MISSING_LEVEL: &str = "__missing__";

/// One observation, used when building a dataset row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub y: u8,
    pub r: f64,
    pub attrs: BTreeMap<String, String>,
    pub p_star: Option<f64>,
}

impl Row {
    pub fn new<'a>(y: u8, r: f64, attrs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        Row {
            y,
            r,
            attrs: attrs.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            p_star: None,
        }
    }

    pub fn with_p_star(mut self, p: f64) -> Self {
        self.p_star = Some(p);
        self
    }
}

/// A dictionary-encoded categorical column.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribute {
    name: String,
    levels: Vec<String>,
    codes: Vec<u32>,
}

impl Attribute {
    /// Encode raw per-row values. Empty strings become [`MISSING_LEVEL`].
    pub fn from_values<S: AsRef<str>>(name: impl Into<String>, values: &[S]) -> Self {
        let levels: BTreeSet<&str> = values.iter().map(|v| normalize(v.as_ref())).collect();
        let levels: Vec<String> = levels.into_iter().map(str::to_string).collect();
        let index: BTreeMap<&str, u32> = levels.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect();
        let codes = values.iter().map(|v| index[normalize(v.as_ref())]).collect();
        Attribute {
            name: name.into(),
            levels,
            codes,
        }
    }

    /// Build from precomputed codes. `levels` must be strictly increasing and
    /// every code must index into it.
    pub fn from_codes(name: impl Into<String>, levels: Vec<String>, codes: Vec<u32>) -> Result<Self> {
        let name = name.into();
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidData(format!(
                "levels of attribute `{name}` must be sorted and unique"
            )));
        }
        if let Some(row) = codes.iter().position(|&c| c as usize >= levels.len()) {
            return Err(Error::InvalidRow {
                row,
                message: format!("level code out of range for attribute `{name}`"),
            });
        }
        Ok(Attribute { name, levels, codes })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn level_code(&self, level: &str) -> Option<u32> {
        self.levels
            .binary_search_by(|l| l.as_str().cmp(level))
            .ok()
            .map(|i| i as u32)
    }

    pub fn level_of(&self, row: usize) -> &str {
        &self.levels[self.codes[row] as usize]
    }

    fn select(&self, rows: &[usize]) -> Attribute {
        let values: Vec<&str> = rows.iter().map(|&i| self.level_of(i)).collect();
        Attribute::from_values(self.name.clone(), &values)
    }
}

fn normalize(v: &str) -> &str {
    if v.is_empty() {
        MISSING_LEVEL
    } else {
        v
    }
}

/// Outcomes, scores and attributes for `N >= 1` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditDataset {
    outcomes: Vec<u8>,
    scores: Vec<f64>,
    attributes: Vec<Attribute>,
    p_star: Vec<Option<f64>>,
}

impl AuditDataset {
    pub fn new(
        outcomes: Vec<u8>,
        scores: Vec<f64>,
        attributes: Vec<Attribute>,
        p_star: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = outcomes.len();
        let p_star = match p_star {
            Some(p) => p.into_iter().map(Some).collect(),
            None => vec![None; n],
        };
        Self::from_parts(outcomes, scores, attributes, p_star)
    }

    /// Like [`AuditDataset::new`] but with a per-row optional `p_star`.
    pub fn from_parts(
        outcomes: Vec<u8>,
        scores: Vec<f64>,
        attributes: Vec<Attribute>,
        p_star: Vec<Option<f64>>,
    ) -> Result<Self> {
        let n = outcomes.len();
        if n == 0 {
            return Err(Error::InvalidData("dataset has no rows".into()));
        }
        if scores.len() != n || p_star.len() != n {
            return Err(Error::InvalidData(format!(
                "column lengths differ: {n} outcomes, {} scores, {} p_star",
                scores.len(),
                p_star.len()
            )));
        }
        let mut names = BTreeSet::new();
        for a in &attributes {
            if a.codes.len() != n {
                return Err(Error::InvalidData(format!(
                    "attribute `{}` has {} values for {n} rows",
                    a.name,
                    a.codes.len()
                )));
            }
            if !names.insert(a.name.as_str()) {
                return Err(Error::InvalidData(format!("duplicate attribute `{}`", a.name)));
            }
        }
        for (row, &y) in outcomes.iter().enumerate() {
            if y > 1 {
                return Err(Error::InvalidRow {
                    row,
                    message: format!("outcome {y} is not 0 or 1"),
                });
            }
        }
        check_unit("score", scores.iter().copied().map(Some))?;
        check_unit("p_star", p_star.iter().copied())?;
        Ok(AuditDataset {
            outcomes,
            scores,
            attributes,
            p_star,
        })
    }

    /// Build from rows that all carry the same attribute names.
    pub fn from_rows(rows: &[Row]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidData("dataset has no rows".into()))?;
        let names: Vec<&String> = first.attrs.keys().collect();
        for (i, row) in rows.iter().enumerate() {
            if row.attrs.len() != names.len() || !names.iter().all(|k| row.attrs.contains_key(*k)) {
                return Err(Error::InvalidRow {
                    row: i,
                    message: "attribute names differ from the first row".into(),
                });
            }
        }
        let attributes = names
            .iter()
            .map(|name| {
                let values: Vec<&str> = rows.iter().map(|r| r.attrs[*name].as_str()).collect();
                Attribute::from_values(name.as_str(), &values)
            })
            .collect();
        Self::from_parts(
            rows.iter().map(|r| r.y).collect(),
            rows.iter().map(|r| r.r).collect(),
            attributes,
            rows.iter().map(|r| r.p_star).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[u8] {
        &self.outcomes
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|a| a.name.as_str())
    }

    pub fn p_star(&self, row: usize) -> Option<f64> {
        self.p_star[row]
    }

    pub fn has_p_star(&self) -> bool {
        self.p_star.iter().all(Option::is_some)
    }

    /// Fraction of positive outcomes.
    pub fn prevalence(&self) -> f64 {
        self.outcomes.iter().map(|&y| y as f64).sum::<f64>() / self.len() as f64
    }

    /// Target used for category means: the sampled outcome, or `p_star` in
    /// exact mode.
    pub(crate) fn targets(&self, exact: bool) -> Result<Vec<f64>> {
        if !exact {
            return Ok(self.outcomes.iter().map(|&y| y as f64).collect());
        }
        self.p_star
            .iter()
            .enumerate()
            .map(|(row, p)| {
                p.ok_or_else(|| {
                    Error::Config(format!(
                        "exact mode requires p_star on every row (missing at row {row})"
                    ))
                })
            })
            .collect()
    }

    /// Same rows and attributes with the scores replaced.
    pub fn with_scores(&self, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != self.len() {
            return Err(Error::InvalidData(format!(
                "expected {} scores, got {}",
                self.len(),
                scores.len()
            )));
        }
        check_unit("score", scores.iter().copied().map(Some))?;
        Ok(AuditDataset { scores, ..self.clone() })
    }

    /// The rows at `indices`, in that order. Levels are re-encoded from the
    /// rows that remain.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidData(format!("row index {bad} out of range")));
        }
        Self::from_parts(
            indices.iter().map(|&i| self.outcomes[i]).collect(),
            indices.iter().map(|&i| self.scores[i]).collect(),
            self.attributes.iter().map(|a| a.select(indices)).collect(),
            indices.iter().map(|&i| self.p_star[i]).collect(),
        )
    }
}

fn check_unit(column: &str, values: impl Iterator<Item = Option<f64>>) -> Result<()> {
    for (row, v) in values.enumerate() {
        if let Some(v) = v {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidRow {
                    row,
                    message: format!("{column} {v} outside [0, 1]"),
                });
            }
        }
    }
    Ok(())
}
