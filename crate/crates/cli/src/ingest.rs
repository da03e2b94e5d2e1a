//! CSV input and output of audit datasets.
//!
//! Rows are numbered from 1, not counting the header.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use pmcal::{Attribute, AuditDataset};

use crate::error::{invalid, CliError, Result};

/// Which columns hold what.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub outcome_col: String,
    pub score_col: String,
    /// `None` takes every column not otherwise claimed.
    pub attr_cols: Option<Vec<String>>,
    /// `None` uses a column named `p_star` when present.
    pub p_star_col: Option<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            outcome_col: "y".into(),
            score_col: "score".into(),
            attr_cols: None,
            p_star_col: None,
        }
    }
}

pub const DEFAULT_P_STAR_COL: &str = "p_star";

pub fn ingest_csv(path: &Path, schema: &Schema) -> Result<AuditDataset> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_dataset(file, schema).map_err(|e| match e {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn read_dataset(reader: impl Read, schema: &Schema) -> Result<AuditDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let column = |name: &str| -> Result<usize> {
        match headers.iter().position(|h| h == name) {
            Some(i) => Ok(i),
            None => invalid(format!("missing column `{name}`")),
        }
    };
    let y_col = column(&schema.outcome_col)?;
    let r_col = column(&schema.score_col)?;
    let p_col = match &schema.p_star_col {
        Some(name) => Some(column(name)?),
        None => headers.iter().position(|h| h == DEFAULT_P_STAR_COL),
    };
    let attr_idx: Vec<usize> = match &schema.attr_cols {
        Some(names) => names.iter().map(|n| column(n)).collect::<Result<_>>()?,
        None => (0..headers.len())
            .filter(|&i| i != y_col && i != r_col && Some(i) != p_col)
            .collect(),
    };

    let mut outcomes = Vec::new();
    let mut scores = Vec::new();
    let mut p_star = Vec::new();
    let mut values: Vec<Vec<String>> = vec![Vec::new(); attr_idx.len()];
    for (k, record) in rdr.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(csv_error)?;
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let bad = |col: usize, msg: String| -> CliError {
            CliError::Validation(format!("row {row}, column `{}`: {msg}", &headers[col]))
        };

        outcomes.push(match field(y_col) {
            "0" => 0,
            "1" => 1,
            other => return Err(bad(y_col, format!("outcome `{other}` is not 0 or 1"))),
        });
        scores.push(unit_interval(field(r_col)).map_err(|m| bad(r_col, m))?);
        p_star.push(match p_col {
            Some(c) => Some(unit_interval(field(c)).map_err(|m| bad(c, m))?),
            None => None,
        });
        for (vals, &c) in values.iter_mut().zip(&attr_idx) {
            // attribute levels are kept verbatim
            vals.push(record.get(c).unwrap_or("").to_string());
        }
    }
    if outcomes.is_empty() {
        return invalid("no data rows");
    }
    let attributes = attr_idx
        .iter()
        .zip(&values)
        .map(|(&c, v)| Attribute::from_values(&headers[c], v))
        .collect();
    Ok(AuditDataset::from_parts(outcomes, scores, attributes, p_star)?)
}

fn unit_interval(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("value {v} is outside [0, 1]"))
    }
}

fn csv_error(e: csv::Error) -> CliError {
    match e.position() {
        Some(p) if p.record() > 0 => CliError::Validation(format!("row {}: {e}", p.record())),
        _ => CliError::Validation(e.to_string()),
    }
}

/// Write `dataset` with columns `y, score, <attributes...>[, p_star]`.
pub fn write_dataset(out: impl Write, dataset: &AuditDataset) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["y".to_string(), "score".to_string()];
    header.extend(dataset.attribute_names().map(str::to_string));
    let p = dataset.has_p_star();
    if p {
        header.push(DEFAULT_P_STAR_COL.into());
    }
    w.write_record(&header)?;
    for i in 0..dataset.len() {
        let mut rec = vec![dataset.outcomes()[i].to_string(), dataset.scores()[i].to_string()];
        rec.extend(dataset.attributes().iter().map(|a| a.level_of(i).to_string()));
        if p {
            rec.push(dataset.p_star(i).map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()
}
