//! Feature-matrix CSV: a `#session-miner-features v1 <catalog>` header line,
//! then a CSV table with `session_id`, an optional `label` column, and one
//! column per feature in catalog order. Floats use Rust's shortest
//! round-trip formatting.

use std::io::{BufRead, Write};

use super::FeatureError;

pub const FEATURES_HEADER: &str = "#session-miner-features v1";

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow {
    pub session_id: String,
    pub label: Option<String>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub catalog: String,
    pub feature_names: Vec<String>,
    pub has_labels: bool,
    pub rows: Vec<MatrixRow>,
}

fn err(msg: impl Into<String>) -> FeatureError {
    FeatureError::Matrix(msg.into())
}

pub fn write_matrix<W: Write>(m: &FeatureMatrix, mut w: W) -> Result<(), FeatureError> {
    writeln!(w, "{FEATURES_HEADER} {}", m.catalog)?;
    let mut csv = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let mut header = vec!["session_id"];
    if m.has_labels {
        header.push("label");
    }
    header.extend(m.feature_names.iter().map(String::as_str));
    csv.write_record(&header).map_err(|e| err(e.to_string()))?;
    for row in &m.rows {
        if row.values.len() != m.feature_names.len() {
            return Err(err(format!(
                "row {} has {} values, expected {}",
                row.session_id,
                row.values.len(),
                m.feature_names.len()
            )));
        }
        let mut rec = vec![row.session_id.clone()];
        if m.has_labels {
            rec.push(row.label.clone().unwrap_or_default());
        }
        rec.extend(row.values.iter().map(|v| v.to_string()));
        csv.write_record(&rec).map_err(|e| err(e.to_string()))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_matrix<R: BufRead>(mut r: R) -> Result<FeatureMatrix, FeatureError> {
    let mut first = String::new();
    r.read_line(&mut first)?;
    let first = first.trim_end_matches(['\n', '\r']);
    let catalog = first
        .strip_prefix(FEATURES_HEADER)
        .and_then(|rest| rest.strip_prefix(' '))
        .filter(|c| !c.is_empty() && !c.contains(char::is_whitespace))
        .ok_or_else(|| err(format!("missing or wrong format header {first:?}")))?
        .to_string();

    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = csv.headers().map_err(|e| err(e.to_string()))?.clone();
    if header.get(0) != Some("session_id") {
        return Err(err("first column must be session_id"));
    }
    let has_labels = header.get(1) == Some("label");
    let skip = if has_labels { 2 } else { 1 };
    let feature_names: Vec<String> = header.iter().skip(skip).map(String::from).collect();

    let mut rows = Vec::new();
    for (i, rec) in csv.records().enumerate() {
        let rec = rec.map_err(|e| err(format!("record {}: {e}", i + 1)))?;
        let session_id = rec.get(0).unwrap_or_default().to_string();
        let label = if has_labels { rec.get(1).filter(|s| !s.is_empty()).map(String::from) } else { None };
        let values = rec
            .iter()
            .skip(skip)
            .map(|s| match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(err(format!("session {session_id}: non-numeric or non-finite value {s:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != feature_names.len() {
            return Err(err(format!(
                "session {session_id}: {} values for {} features",
                values.len(),
                feature_names.len()
            )));
        }
        rows.push(MatrixRow { session_id, label, values });
    }
    Ok(FeatureMatrix { catalog, feature_names, has_labels, rows })
}
