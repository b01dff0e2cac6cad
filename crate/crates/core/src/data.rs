//! Group-level datasets: ingestion from CSV and reduction of unit records.
//!
//! Everything downstream consumes a [`StudyDataset`], an ordered list of
//! `(estimate, std_error)` pairs. Unit-level files are reduced to that shape
//! first (per-group mean, or treated-minus-control difference when a
//! treatment column is present).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group_id: String,
    pub estimate: f64,
    pub std_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
}

impl GroupSummary {
    pub fn new(group_id: impl Into<String>, estimate: f64, std_error: f64) -> Result<Self> {
        let group_id = group_id.into();
        if !estimate.is_finite() {
            return Err(Error::domain(format!(
                "group {group_id:?}: estimate must be finite"
            )));
        }
        if !(std_error > 0.0 && std_error.is_finite()) {
            return Err(Error::domain(format!(
                "group {group_id:?}: std_error must be positive and finite, got {std_error}"
            )));
        }
        Ok(GroupSummary {
            group_id,
            estimate,
            std_error,
            n: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitRecord {
    pub group_id: String,
    pub outcome: f64,
    /// Program indicator; `Some(true)` for treated units.
    pub treatment: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    SummaryLevel,
    ReducedFromUnits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyDataset {
    summaries: Vec<GroupSummary>,
    pub provenance: Provenance,
    pub metadata: BTreeMap<String, String>,
}

impl StudyDataset {
    /// Validates at least two groups, unique ids and positive standard errors.
    pub fn new(summaries: Vec<GroupSummary>, provenance: Provenance) -> Result<Self> {
        if summaries.len() < 2 {
            return Err(Error::Dataset(format!(
                "at least 2 groups are required, got {}",
                summaries.len()
            )));
        }
        let mut seen = HashSet::new();
        for s in &summaries {
            if !seen.insert(s.group_id.as_str()) {
                return Err(Error::Dataset(format!(
                    "duplicate group id {:?}",
                    s.group_id
                )));
            }
            if !(s.std_error > 0.0 && s.std_error.is_finite()) {
                return Err(Error::Dataset(format!(
                    "group {:?} has non-positive std_error {}",
                    s.group_id, s.std_error
                )));
            }
            if !s.estimate.is_finite() {
                return Err(Error::Dataset(format!(
                    "group {:?} has a non-finite estimate",
                    s.group_id
                )));
            }
        }
        Ok(StudyDataset {
            summaries,
            provenance,
            metadata: BTreeMap::new(),
        })
    }

    /// Convenience constructor from `(id, estimate, std_error)` triples.
    pub fn from_triples<S: AsRef<str>>(rows: &[(S, f64, f64)]) -> Result<Self> {
        let summaries = rows
            .iter()
            .map(|(id, est, se)| GroupSummary::new(id.as_ref(), *est, *se))
            .collect::<Result<Vec<_>>>()?;
        Self::new(summaries, Provenance::SummaryLevel)
    }

    pub fn from_units(records: &[UnitRecord]) -> Result<Self> {
        Self::new(reduce_units(records)?, Provenance::ReducedFromUnits)
    }

    pub fn summaries(&self) -> &[GroupSummary] {
        &self.summaries
    }

    pub fn len(&self) -> usize {
        self.summaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.summaries.is_empty()
    }

    pub fn group_ids(&self) -> Vec<String> {
        self.summaries.iter().map(|s| s.group_id.clone()).collect()
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.summaries.iter().map(|s| s.estimate).collect()
    }

    pub fn std_errors(&self) -> Vec<f64> {
        self.summaries.iter().map(|s| s.std_error).collect()
    }

    /// Messages for conditions that are legal but worth flagging.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.len() < 3 {
            out.push(format!(
                "only {} groups: the between-group scale is weakly identified",
                self.len()
            ));
        }
        out
    }
}

fn parse_f64(field: &str, name: &str, source: &str, row: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Row {
        source_name: source.to_string(),
        row,
        message: format!("{name} is not a number: {field:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Row {
            source_name: source.to_string(),
            row,
            message: format!("{name} is not finite: {field:?}"),
        });
    }
    Ok(v)
}

fn check_header(
    headers: &csv::StringRecord,
    required: &[&str],
    optional: &[&str],
    source: &str,
) -> Result<()> {
    let cols: Vec<&str> = headers.iter().map(str::trim).collect();
    let ok = cols.len() >= required.len()
        && cols.len() <= required.len() + optional.len()
        && cols[..required.len()] == *required
        && cols[required.len()..] == optional[..cols.len() - required.len()];
    if ok {
        Ok(())
    } else {
        let mut expected = required.join(",");
        for o in optional {
            expected.push_str(&format!("[,{o}]"));
        }
        Err(Error::Row {
            source_name: source.to_string(),
            row: 1,
            message: format!("header must be `{expected}`, got `{}`", cols.join(",")),
        })
    }
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader)
}

/// Reads a summary CSV (`group,estimate,std_error[,n]`).
pub fn read_summaries<R: Read>(reader: R, source: &str) -> Result<StudyDataset> {
    let mut rdr = csv_reader(reader);
    check_header(
        rdr.headers()?,
        &["group", "estimate", "std_error"],
        &["n"],
        source,
    )?;
    let mut summaries = Vec::new();
    let mut rows_by_id: HashMap<String, usize> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let row_err = |message: String| Error::Row {
            source_name: source.to_string(),
            row,
            message,
        };
        let id = rec[0].trim().to_string();
        if id.is_empty() {
            return Err(row_err("missing group id".into()));
        }
        if let Some(prev) = rows_by_id.insert(id.clone(), row) {
            return Err(row_err(format!(
                "duplicate group id {id:?} (first seen on row {prev})"
            )));
        }
        let estimate = parse_f64(&rec[1], "estimate", source, row)?;
        let std_error = parse_f64(&rec[2], "std_error", source, row)?;
        if std_error <= 0.0 {
            return Err(row_err(format!(
                "std_error must be positive, got {std_error}"
            )));
        }
        let n = match rec.get(3).map(str::trim) {
            None | Some("") => None,
            Some(f) => match f.parse::<u64>() {
                Ok(n) if n > 0 => Some(n),
                _ => return Err(row_err(format!("n must be a positive integer, got {f:?}"))),
            },
        };
        summaries.push(GroupSummary {
            group_id: id,
            estimate,
            std_error,
            n,
        });
    }
    StudyDataset::new(summaries, Provenance::SummaryLevel).map_err(|e| match e {
        Error::Dataset(msg) => Error::Dataset(format!("{source}: {msg}")),
        other => other,
    })
}

pub fn load_summaries(path: &Path) -> Result<StudyDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_summaries(file, &path.display().to_string())
}

/// Reads a unit CSV (`group,outcome[,treatment]`).
pub fn read_units<R: Read>(reader: R, source: &str) -> Result<Vec<UnitRecord>> {
    let mut rdr = csv_reader(reader);
    check_header(
        rdr.headers()?,
        &["group", "outcome"],
        &["treatment"],
        source,
    )?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let row_err = |message: String| Error::Row {
            source_name: source.to_string(),
            row,
            message,
        };
        let id = rec[0].trim().to_string();
        if id.is_empty() {
            return Err(row_err("missing group id".into()));
        }
        let outcome = parse_f64(&rec[1], "outcome", source, row)?;
        let treatment = match rec.get(2).map(str::trim) {
            None => None,
            Some("0") => Some(false),
            Some("1") => Some(true),
            Some(other) => return Err(row_err(format!("treatment must be 0 or 1, got {other:?}"))),
        };
        out.push(UnitRecord {
            group_id: id,
            outcome,
            treatment,
        });
    }
    Ok(out)
}

pub fn load_units(path: &Path) -> Result<Vec<UnitRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_units(file, &path.display().to_string())
}

/// Mean and n−1 sample variance. Values are sorted first so the result does
/// not depend on record order.
fn mean_var(values: &mut [f64]) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Reduces unit records to one summary per group, in order of first
/// appearance.
pub fn reduce_units(records: &[UnitRecord]) -> Result<Vec<GroupSummary>> {
    let with_flag = records.iter().filter(|r| r.treatment.is_some()).count();
    if with_flag != 0 && with_flag != records.len() {
        return Err(Error::Dataset(
            "treatment flag must be present on every record or on none".into(),
        ));
    }
    let treated_design = with_flag > 0;

    let mut order: Vec<&str> = Vec::new();
    // (control or all, treated)
    let mut groups: HashMap<&str, (Vec<f64>, Vec<f64>)> = HashMap::new();
    for r in records {
        let entry = groups.entry(r.group_id.as_str()).or_insert_with(|| {
            order.push(r.group_id.as_str());
            (Vec::new(), Vec::new())
        });
        if r.treatment == Some(true) {
            entry.1.push(r.outcome);
        } else {
            entry.0.push(r.outcome);
        }
    }

    let mut errors = Vec::new();
    let mut out = Vec::new();
    for id in order {
        let (mut control, mut treated) = groups.remove(id).expect("group recorded in order");
        let group_err = |message: &str| Error::Group {
            group: id.to_string(),
            message: message.to_string(),
        };
        let reduced = if treated_design {
            if control.len() < 2 || treated.len() < 2 {
                Err(group_err("each arm needs at least 2 units"))
            } else {
                let (mc, vc) = mean_var(&mut control);
                let (mt, vt) = mean_var(&mut treated);
                let se = (vt / treated.len() as f64 + vc / control.len() as f64).sqrt();
                Ok((mt - mc, se, control.len() + treated.len()))
            }
        } else if control.len() < 2 {
            Err(group_err("at least 2 units are required"))
        } else {
            let (m, v) = mean_var(&mut control);
            Ok((m, (v / control.len() as f64).sqrt(), control.len()))
        };
        match reduced {
            Ok((_, se, _)) if se <= 0.0 => errors.push(group_err(
                "zero within-group variance gives a zero standard error",
            )),
            Ok((estimate, std_error, n)) => out.push(GroupSummary {
                group_id: id.to_string(),
                estimate,
                std_error,
                n: Some(n as u64),
            }),
            Err(e) => errors.push(e),
        }
    }

    match errors.len() {
        0 => Ok(out),
        1 => Err(errors.pop().expect("one error")),
        _ => Err(Error::Dataset(
            errors
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; "),
        )),
    }
}
