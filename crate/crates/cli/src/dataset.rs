//! Delimited dataset files.
//!
//! A file has a mandatory header with `id`, `predicted_label`, an optional
//! `true_label` and one column per feature, detected by name prefix. Columns
//! matching none of these are ignored. The label set may be declared in a
//! leading `# labels: a,b,c` line.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use corrector_core::LabeledSample;

pub const ID_COLUMN: &str = "id";
pub const PREDICTED_COLUMN: &str = "predicted_label";
pub const TRUTH_COLUMN: &str = "true_label";
pub const LABELS_DIRECTIVE: &str = "# labels:";

#[derive(Debug, Clone)]
pub struct Format {
    pub delimiter: u8,
    pub feature_prefix: String,
}

impl Default for Format {
    fn default() -> Self {
        Self {
            delimiter: b',',
            feature_prefix: "f".into(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    /// From the `# labels:` line, if present.
    pub declared_labels: Option<Vec<String>>,
    pub has_truth: bool,
    pub samples: Vec<LabeledSample>,
}

pub fn parse_label_list(text: &str) -> Result<Vec<String>> {
    let labels: Vec<String> = text.split(',').map(|l| l.trim().to_string()).collect();
    if labels.iter().any(String::is_empty) {
        bail!("empty label in label list {text:?}");
    }
    Ok(labels)
}

fn split_directive(text: &str) -> Result<(Option<Vec<String>>, &str)> {
    let first_end = text.find('\n').unwrap_or(text.len());
    let first = text[..first_end].trim_end_matches('\r');
    match first.strip_prefix(LABELS_DIRECTIVE) {
        Some(rest) => Ok((
            Some(parse_label_list(rest)?),
            &text[(first_end + 1).min(text.len())..],
        )),
        None => Ok((None, text)),
    }
}

pub fn read(path: &Path, format: &Format) -> Result<Dataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text, format).with_context(|| format!("in {}", path.display()))
}

pub fn parse(text: &str, format: &Format) -> Result<Dataset> {
    let (declared_labels, body) = split_directive(text)?;
    if body.trim().is_empty() {
        return Ok(Dataset {
            declared_labels,
            ..Dataset::default()
        });
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let header = reader.headers().context("reading header")?.clone();
    let find = |name: &str| header.iter().position(|h| h == name);
    let id_col = find(ID_COLUMN).with_context(|| format!("missing {ID_COLUMN} column"))?;
    let pred_col =
        find(PREDICTED_COLUMN).with_context(|| format!("missing {PREDICTED_COLUMN} column"))?;
    let truth_col = find(TRUTH_COLUMN);
    let feature_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|&(i, h)| {
            i != id_col
                && i != pred_col
                && Some(i) != truth_col
                && h.starts_with(format.feature_prefix.as_str())
        })
        .map(|(i, _)| i)
        .collect();
    if feature_cols.is_empty() {
        bail!("no feature columns (prefix {:?})", format.feature_prefix);
    }

    let mut samples = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("data row {}", n + 1))?;
        let id = record[id_col].to_string();
        let features = feature_cols
            .iter()
            .map(|&c| {
                let v: f64 = record[c].parse().with_context(|| {
                    format!(
                        "row {id}: column {}: not a number: {:?}",
                        &header[c], &record[c]
                    )
                })?;
                if !v.is_finite() {
                    bail!("row {id}: column {}: non-finite value", &header[c]);
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        let truth = truth_col
            .map(|c| record[c].to_string())
            .filter(|t| !t.is_empty());
        samples.push(LabeledSample::new(id, features, &record[pred_col], truth));
    }
    Ok(Dataset {
        declared_labels,
        has_truth: truth_col.is_some(),
        samples,
    })
}

/// Fails with the offending row id if a predicted label is outside `labels`.
pub fn check_labels(samples: &[LabeledSample], labels: &[String]) -> Result<()> {
    for s in samples {
        if !labels.contains(&s.predicted) {
            bail!("row {}: unknown predicted label {:?}", s.id, s.predicted);
        }
    }
    Ok(())
}

pub fn write(path: &Path, samples: &[LabeledSample], labels: &[String]) -> Result<()> {
    let mut out = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(out, "{LABELS_DIRECTIVE} {}", labels.join(","))?;
    let d = samples.first().map_or(0, |s| s.features.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        ID_COLUMN.to_string(),
        PREDICTED_COLUMN.into(),
        TRUTH_COLUMN.into(),
    ];
    header.extend((0..d).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for s in samples {
        let mut row = vec![
            s.id.clone(),
            s.predicted.clone(),
            s.truth.clone().unwrap_or_default(),
        ];
        row.extend(s.features.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
