//! Delimited-text ingestion driven by an explicit column schema.
//!
//! The schema sidecar is a flat `key = value` document:
//!
//! ```text
//! delimiter = ,
//! treatment = drug
//! outcome = unprotected
//! covariate.cesd = numeric
//! covariate.condom = categorical:1,2,3,4,5
//! covariate.risk = ordinal:low,medium,high
//! ```
//!
//! Covariates keep the order in which they are listed. Categoricals become
//! indicator columns named `name_level` with the first level as reference;
//! ordinals are coded 1..k in level order. When levels are omitted they are
//! the sorted distinct values (numerically if all values parse).

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    Categorical(Option<Vec<String>>),
    Ordinal(Option<Vec<String>>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub treatment: String,
    pub outcome: String,
    pub covariates: Vec<(String, ColumnKind)>,
    pub delimiter: u8,
}

fn schema_err(line: usize, message: impl Into<String>) -> Error {
    Error::Ingest {
        row: line,
        column: "schema".into(),
        message: message.into(),
    }
}

fn parse_levels(spec: Option<&str>) -> Option<Vec<String>> {
    spec.map(|s| s.split(',').map(|l| l.trim().to_string()).collect())
}

impl Schema {
    /// All listed covariates numeric.
    pub fn numeric(treatment: &str, outcome: &str, covariates: &[&str]) -> Schema {
        Schema {
            treatment: treatment.into(),
            outcome: outcome.into(),
            covariates: covariates
                .iter()
                .map(|c| (c.to_string(), ColumnKind::Numeric))
                .collect(),
            delimiter: b',',
        }
    }

    pub fn parse(text: &str) -> Result<Schema> {
        let mut treatment = None;
        let mut outcome = None;
        let mut delimiter = b',';
        let mut covariates: Vec<(String, ColumnKind)> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| schema_err(k + 1, format!("expected key = value, got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "treatment" => treatment = Some(value.to_string()),
                "outcome" => outcome = Some(value.to_string()),
                "delimiter" => {
                    delimiter = match value {
                        "tab" | "\\t" => b'\t',
                        v if v.len() == 1 => v.as_bytes()[0],
                        v => return Err(schema_err(k + 1, format!("bad delimiter '{v}'"))),
                    }
                }
                _ => {
                    let name = key
                        .strip_prefix("covariate.")
                        .ok_or_else(|| schema_err(k + 1, format!("unknown key '{key}'")))?;
                    let (kind, levels) = match value.split_once(':') {
                        Some((kind, levels)) => (kind.trim(), Some(levels)),
                        None => (value, None),
                    };
                    let kind = match kind {
                        "numeric" if levels.is_none() => ColumnKind::Numeric,
                        "categorical" => ColumnKind::Categorical(parse_levels(levels)),
                        "ordinal" => ColumnKind::Ordinal(parse_levels(levels)),
                        other => return Err(schema_err(k + 1, format!("unknown column kind '{other}'"))),
                    };
                    if covariates.iter().any(|(n, _)| n == name) {
                        return Err(schema_err(k + 1, format!("covariate '{name}' listed twice")));
                    }
                    covariates.push((name.to_string(), kind));
                }
            }
        }
        let schema = Schema {
            treatment: treatment.ok_or_else(|| schema_err(0, "missing 'treatment'"))?,
            outcome: outcome.ok_or_else(|| schema_err(0, "missing 'outcome'"))?,
            covariates,
            delimiter,
        };
        if schema.covariates.is_empty() {
            return Err(schema_err(0, "no covariates listed"));
        }
        Ok(schema)
    }

    pub fn from_file(path: &Path) -> Result<Schema> {
        Schema::parse(&fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let delim = match self.delimiter {
            b'\t' => "tab".to_string(),
            d => (d as char).to_string(),
        };
        let mut s = format!(
            "delimiter = {delim}\ntreatment = {}\noutcome = {}\n",
            self.treatment, self.outcome
        );
        for (name, kind) in &self.covariates {
            let (k, levels) = match kind {
                ColumnKind::Numeric => ("numeric", None),
                ColumnKind::Categorical(l) => ("categorical", l.as_ref()),
                ColumnKind::Ordinal(l) => ("ordinal", l.as_ref()),
            };
            match levels {
                Some(l) => s.push_str(&format!("covariate.{name} = {k}:{}\n", l.join(","))),
                None => s.push_str(&format!("covariate.{name} = {k}\n")),
            }
        }
        s
    }
}

fn is_missing(v: &str) -> bool {
    v.is_empty() || v.eq_ignore_ascii_case("na") || v.eq_ignore_ascii_case("nan")
}

fn parse_number(v: &str, row: usize, column: &str) -> Result<f64> {
    let located = |message: String| Error::Ingest {
        row,
        column: column.to_string(),
        message,
    };
    if is_missing(v) {
        return Err(located("missing value".into()));
    }
    let x: f64 = v
        .parse()
        .map_err(|_| located(format!("'{v}' is not a number")))?;
    if !x.is_finite() {
        return Err(located(format!("'{v}' is not finite")));
    }
    Ok(x)
}

/// Sorted distinct values, numerically when every value parses.
fn observed_levels(values: &[&str]) -> Vec<String> {
    let distinct: BTreeSet<&str> = values.iter().copied().collect();
    let mut levels: Vec<&str> = distinct.into_iter().collect();
    if levels.iter().all(|v| v.parse::<f64>().is_ok()) {
        levels.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    levels.into_iter().map(String::from).collect()
}

/// Reads a header + delimited file and codes it according to `schema`.
/// Row numbers in errors count data rows from 1; row 0 is the header.
pub fn load_dataset(path: &Path, schema: &Schema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    let locate = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Ingest {
            row: 0,
            column: name.to_string(),
            message: "column not found in header".into(),
        })
    };
    let t_col = locate(&schema.treatment)?;
    let y_col = locate(&schema.outcome)?;
    let cov_cols: Vec<usize> = schema
        .covariates
        .iter()
        .map(|(n, _)| locate(n))
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Ingest {
            row: k + 1,
            column: "*".into(),
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    let n = records.len();

    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for (k, rec) in records.iter().enumerate() {
        let row = k + 1;
        let tv = parse_number(&rec[t_col], row, &schema.treatment)?;
        if tv != 0.0 && tv != 1.0 {
            return Err(Error::Ingest {
                row,
                column: schema.treatment.clone(),
                message: format!("treatment must be 0 or 1, got '{}'", &rec[t_col]),
            });
        }
        t.push(tv as u8);
        y.push(parse_number(&rec[y_col], row, &schema.outcome)?);
    }

    let mut columns = Vec::new();
    let mut names = Vec::new();
    for ((name, kind), &c) in schema.covariates.iter().zip(&cov_cols) {
        let raw: Vec<&str> = records.iter().map(|r| &r[c]).collect();
        match kind {
            ColumnKind::Numeric => {
                let col = raw
                    .iter()
                    .enumerate()
                    .map(|(k, v)| parse_number(v, k + 1, name))
                    .collect::<Result<Vec<_>>>()?;
                columns.push(col);
                names.push(name.clone());
            }
            ColumnKind::Categorical(levels) | ColumnKind::Ordinal(levels) => {
                if let Some(k) = raw.iter().position(|v| is_missing(v)) {
                    return Err(Error::Ingest {
                        row: k + 1,
                        column: name.clone(),
                        message: "missing value".into(),
                    });
                }
                let levels = levels.clone().unwrap_or_else(|| observed_levels(&raw));
                let codes = raw
                    .iter()
                    .enumerate()
                    .map(|(k, v)| {
                        levels.iter().position(|l| l == v).ok_or_else(|| Error::Ingest {
                            row: k + 1,
                            column: name.clone(),
                            message: format!("'{v}' is not a declared level"),
                        })
                    })
                    .collect::<Result<Vec<usize>>>()?;
                if matches!(kind, ColumnKind::Ordinal(_)) {
                    columns.push(codes.iter().map(|&c| (c + 1) as f64).collect());
                    names.push(name.clone());
                } else {
                    for (j, level) in levels.iter().enumerate().skip(1) {
                        columns.push(codes.iter().map(|&c| f64::from(u8::from(c == j))).collect());
                        names.push(format!("{name}_{level}"));
                    }
                }
            }
        }
    }
    if columns.is_empty() {
        return Err(Error::config("schema produced no covariate columns"));
    }
    Dataset::with_names(Matrix::from_columns(columns)?, t, y, names)
}

/// Writes `names..., treatment, outcome` with shortest round-trip floats,
/// returning an all-numeric schema that loads it back.
pub fn export_dataset(path: &Path, data: &Dataset, treatment: &str, outcome: &str) -> Result<Schema> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = data.names.iter().map(String::as_str).collect();
    header.push(treatment);
    header.push(outcome);
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = (0..data.p()).map(|j| data.x.get(i, j).to_string()).collect();
        rec.push(data.t[i].to_string());
        rec.push(data.y[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    let names: Vec<&str> = data.names.iter().map(String::as_str).collect();
    Ok(Schema::numeric(treatment, outcome, &names))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn categorical_drops_reference_level() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "a,colour,t,y\n1.5,red,0,2\n2,green,1,3\n3,blue,1,4\n");
        let schema = Schema::parse(
            "treatment = t\noutcome = y\ncovariate.a = numeric\ncovariate.colour = categorical:red,green,blue\n",
        )
        .unwrap();
        let d = load_dataset(&p, &schema).unwrap();
        assert_eq!(d.p(), 3);
        assert_eq!(d.names, vec!["a", "colour_green", "colour_blue"]);
        assert_eq!(d.x.column(1), &[0.0, 1.0, 0.0]);
        assert_eq!(d.x.column(2), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn ordinal_codes_and_inferred_levels() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "s,k,t,y\nhigh,10,0,1\nlow,2,1,1\nmid,2,0,1\n");
        let schema = Schema::parse(
            "treatment = t\noutcome = y\ncovariate.s = ordinal:low,mid,high\ncovariate.k = categorical\n",
        )
        .unwrap();
        let d = load_dataset(&p, &schema).unwrap();
        assert_eq!(d.x.column(0), &[3.0, 1.0, 2.0]);
        // numeric ordering puts 2 before 10, so 2 is the reference
        assert_eq!(d.names[1], "k_10");
        assert_eq!(d.x.column(1), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn located_errors() {
        let dir = tempfile::tempdir().unwrap();
        let schema = Schema::numeric("t", "y", &["a"]);
        let bad_t = write(&dir, "t.csv", "a,t,y\n1,0,1\n2,2,1\n");
        match load_dataset(&bad_t, &schema) {
            Err(Error::Ingest { row, column, .. }) => assert_eq!((row, column.as_str()), (2, "t")),
            other => panic!("{other:?}"),
        }
        let bad_num = write(&dir, "n.csv", "a,t,y\n1,0,1\nabc,1,1\n");
        match load_dataset(&bad_num, &schema) {
            Err(Error::Ingest { row, column, .. }) => assert_eq!((row, column.as_str()), (2, "a")),
            other => panic!("{other:?}"),
        }
        let missing_y = write(&dir, "m.csv", "a,t,y\n1,0,\n2,1,1\n");
        assert!(matches!(load_dataset(&missing_y, &schema), Err(Error::Ingest { row: 1, .. })));
        let unknown = Schema::numeric("t", "y", &["zzz"]);
        assert!(matches!(load_dataset(&bad_t, &unknown), Err(Error::Ingest { row: 0, .. })));
        assert!(Schema::parse("treatment = t\noutcome = y\nfoo = 1\ncovariate.a = numeric").is_err());
    }

    #[test]
    fn export_then_load_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let x = Matrix::from_columns(vec![vec![0.1 + 0.2, -1e-310, 7.0], vec![1.0 / 3.0, 2.5e17, -0.0]]).unwrap();
        let d = Dataset::new(x, vec![0, 1, 1], vec![std::f64::consts::E, 1e-5, -3.25]).unwrap();
        let p = dir.path().join("d.csv");
        let schema = export_dataset(&p, &d, "t", "y").unwrap();
        let back = load_dataset(&p, &Schema::parse(&schema.to_text()).unwrap()).unwrap();
        for j in 0..2 {
            for (a, b) in d.x.column(j).iter().zip(back.x.column(j)) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        assert_eq!(d.y, back.y);
        assert_eq!(d.t, back.t);
        assert_eq!(d.names, back.names);
    }
}
