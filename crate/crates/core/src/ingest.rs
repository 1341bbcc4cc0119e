//! CSV ingestion with one-hot encoding of categorical columns.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{UpliftDataset, UpliftInstance};
use crate::error::{Error, Result};

/// Which columns become features.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "SelectionRepr", into = "SelectionRepr")]
#[derive(Default)]
pub enum FeatureSelection {
    /// Every remaining numeric column, plus the declared categorical columns.
    #[default]
    Auto,
    Columns(Vec<String>),
}


// Serialized as either the string "auto" / "a,b,c" or a list of column names.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SelectionRepr {
    Text(String),
    List(Vec<String>),
}

impl From<SelectionRepr> for FeatureSelection {
    fn from(r: SelectionRepr) -> Self {
        match r {
            SelectionRepr::Text(s) => FeatureSelection::parse(&s),
            SelectionRepr::List(cols) => FeatureSelection::Columns(cols),
        }
    }
}

impl From<FeatureSelection> for SelectionRepr {
    fn from(f: FeatureSelection) -> Self {
        match f {
            FeatureSelection::Auto => SelectionRepr::Text("auto".into()),
            FeatureSelection::Columns(cols) => SelectionRepr::List(cols),
        }
    }
}

impl FeatureSelection {
    /// Parses `auto` or a comma separated column list.
    pub fn parse(s: &str) -> Self {
        if s.trim().eq_ignore_ascii_case("auto") {
            FeatureSelection::Auto
        } else {
            FeatureSelection::Columns(split_list(s))
        }
    }
}

pub(crate) fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(String::from)
        .collect()
}

/// Column mapping for [`load_csv`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub treatment_col: String,
    pub response_col: String,
    pub features: FeatureSelection,
    /// Columns one-hot encoded on their distinct string values.
    pub categorical_cols: Vec<String>,
    /// Columns never used as features (e.g. alternative targets).
    pub exclude_cols: Vec<String>,
    /// When set, the treatment column is matched as a string: rows equal to
    /// `treated_value` are treated, rows equal to `control_value` are control,
    /// and all other rows are dropped.
    pub treated_value: Option<String>,
    pub control_value: Option<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            treatment_col: "t".into(),
            response_col: "y".into(),
            features: FeatureSelection::Auto,
            categorical_cols: Vec::new(),
            exclude_cols: Vec::new(),
            treated_value: None,
            control_value: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncodedFeature {
    Numeric { name: String },
    OneHot { name: String, column: String, level: String },
}

impl EncodedFeature {
    pub fn name(&self) -> &str {
        match self {
            EncodedFeature::Numeric { name } | EncodedFeature::OneHot { name, .. } => name,
        }
    }
}

/// Audit record of how raw columns map onto feature indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoding {
    pub treatment_col: String,
    pub response_col: String,
    pub treated_value: Option<String>,
    pub control_value: Option<String>,
    pub features: Vec<EncodedFeature>,
    pub rows_read: usize,
    pub rows_dropped: usize,
}

impl FeatureEncoding {
    /// `<input>.encoding.json`
    pub fn sidecar_path(input: &Path) -> PathBuf {
        let mut name = input.as_os_str().to_owned();
        name.push(".encoding.json");
        PathBuf::from(name)
    }

    pub fn write_sidecar(&self, input: &Path) -> Result<PathBuf> {
        let path = Self::sidecar_path(input);
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

#[derive(Clone, Debug)]
pub struct LoadedCsv {
    pub dataset: UpliftDataset,
    pub encoding: FeatureEncoding,
}

enum Plan {
    Numeric(usize),
    OneHot(usize, Vec<String>),
}

fn parse_binary(cell: &str, line: usize, col: &str) -> Result<bool> {
    match cell.trim().parse::<f64>() {
        Ok(0.0) => Ok(false),
        Ok(1.0) => Ok(true),
        _ => Err(Error::Ingestion {
            row: line,
            message: format!("column `{col}` must be 0 or 1, found `{cell}`"),
        }),
    }
}

fn parse_number(cell: &str, line: usize, col: &str) -> Result<f64> {
    let trimmed = cell.trim();
    if trimmed.is_empty() {
        return Err(Error::Ingestion {
            row: line,
            message: format!("missing value in column `{col}`"),
        });
    }
    match trimmed.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Ingestion {
            row: line,
            message: format!("column `{col}`: cannot parse `{cell}` as a finite number"),
        }),
    }
}

/// Reads an uplift dataset from a headed CSV file.
///
/// Row numbers in errors are file line numbers (the header is line 1).
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<LoadedCsv> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv_from_reader(file, schema)
}

pub fn load_csv_from_reader<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<LoadedCsv> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let t_idx = col(&schema.treatment_col)?;
    let y_idx = col(&schema.response_col)?;
    for c in schema.categorical_cols.iter().chain(&schema.exclude_cols) {
        col(c)?;
    }

    let records = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
    // Drop rows outside the requested treatment arms before anything else.
    let mut kept = Vec::with_capacity(records.len());
    let mut treated_flags = Vec::with_capacity(records.len());
    for (r, rec) in records.iter().enumerate() {
        let line = r + 2;
        let cell = rec.get(t_idx).unwrap_or("");
        let flag = match (&schema.treated_value, &schema.control_value) {
            (Some(tv), Some(cv)) => {
                let v = cell.trim();
                if v == tv {
                    Some(true)
                } else if v == cv {
                    Some(false)
                } else {
                    None
                }
            }
            (None, None) => Some(parse_binary(cell, line, &schema.treatment_col)?),
            _ => {
                return Err(Error::Config(
                    "treated_value and control_value must be given together".into(),
                ))
            }
        };
        if let Some(t) = flag {
            kept.push(r);
            treated_flags.push(t);
        }
    }
    let rows_dropped = records.len() - kept.len();
    if rows_dropped > 0 {
        log::info!("dropped {rows_dropped} rows outside the selected treatment arms");
    }

    let is_numeric_column = |c: usize| {
        kept.iter()
            .all(|&r| records[r].get(c).is_some_and(|v| v.trim().parse::<f64>().is_ok()))
    };

    let candidate_cols: Vec<usize> = match &schema.features {
        FeatureSelection::Columns(cols) => cols.iter().map(|c| col(c)).collect::<Result<_>>()?,
        FeatureSelection::Auto => (0..headers.len())
            .filter(|&c| c != t_idx && c != y_idx && !schema.exclude_cols.contains(&headers[c]))
            .collect(),
    };

    let mut plans = Vec::new();
    let mut encoded = Vec::new();
    for c in candidate_cols {
        let name = &headers[c];
        if c == t_idx || c == y_idx {
            return Err(Error::Config(format!(
                "column `{name}` cannot be both a feature and the treatment/response"
            )));
        }
        if schema.categorical_cols.contains(name) {
            let levels: BTreeSet<String> = kept
                .iter()
                .map(|&r| records[r].get(c).unwrap_or("").trim().to_string())
                .collect();
            let levels: Vec<String> = levels.into_iter().collect();
            for level in &levels {
                encoded.push(EncodedFeature::OneHot {
                    name: format!("{name}={level}"),
                    column: name.clone(),
                    level: level.clone(),
                });
            }
            plans.push(Plan::OneHot(c, levels));
        } else if matches!(schema.features, FeatureSelection::Auto) && !is_numeric_column(c) {
            log::warn!("skipping non-numeric column `{name}` (declare it categorical to encode it)");
        } else {
            encoded.push(EncodedFeature::Numeric { name: name.clone() });
            plans.push(Plan::Numeric(c));
        }
    }

    let mut instances = Vec::with_capacity(kept.len());
    for (&r, &treated) in kept.iter().zip(&treated_flags) {
        let rec = &records[r];
        let line = r + 2;
        let response = parse_binary(rec.get(y_idx).unwrap_or(""), line, &schema.response_col)?;
        let mut features = Vec::with_capacity(encoded.len());
        for plan in &plans {
            match plan {
                Plan::Numeric(c) => {
                    features.push(parse_number(rec.get(*c).unwrap_or(""), line, &headers[*c])?)
                }
                Plan::OneHot(c, levels) => {
                    let v = rec.get(*c).unwrap_or("").trim();
                    features.extend(levels.iter().map(|l| if l == v { 1.0 } else { 0.0 }));
                }
            }
        }
        instances.push(UpliftInstance::new(features, response, treated));
    }
    if instances.is_empty() {
        log::warn!("CSV contains no data rows");
    }

    let dataset = UpliftDataset::new(instances)?;
    Ok(LoadedCsv {
        dataset,
        encoding: FeatureEncoding {
            treatment_col: schema.treatment_col.clone(),
            response_col: schema.response_col.clone(),
            treated_value: schema.treated_value.clone(),
            control_value: schema.control_value.clone(),
            features: encoded,
            rows_read: records.len(),
            rows_dropped,
        },
    })
}

/// Writes a dataset as CSV with columns `t,y,<features...>`.
pub fn write_csv(path: &Path, dataset: &UpliftDataset, feature_names: &[String]) -> Result<()> {
    if feature_names.len() != dataset.n_features() {
        return Err(Error::Shape {
            what: "feature names",
            expected: dataset.n_features(),
            got: feature_names.len(),
        });
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string(), "y".to_string()];
    header.extend(feature_names.iter().cloned());
    w.write_record(&header)?;
    for inst in dataset.instances() {
        let mut row = vec![
            u8::from(inst.treated).to_string(),
            u8::from(inst.response).to_string(),
        ];
        row.extend(inst.features.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
