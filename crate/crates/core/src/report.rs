//! Run records (JSON) and curve tables (CSV).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Serde adapter that writes non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`.
pub mod ext {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct ExtVisitor;

    impl Visitor<'_> for ExtVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(ExtVisitor)
    }

    #[derive(serde::Serialize, serde::Deserialize)]
    #[serde(transparent)]
    pub(crate) struct Wrap(#[serde(with = "super::ext")] pub f64);
}

/// [`ext`] for `Vec<f64>`.
pub mod ext_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::ext::Wrap;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let w: Vec<Wrap> = v.iter().map(|&x| Wrap(x)).collect();
        w.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Wrap>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}

/// One row of the ratio table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub candidate_id: usize,
    pub n_or_lambda: f64,
    #[serde(with = "ext")]
    pub ratio: f64,
    #[serde(with = "ext")]
    pub bound: f64,
    pub pass: bool,
}

pub const RATIO_HEADER: [&str; 5] = ["candidate_id", "n_or_lambda", "ratio", "bound", "pass"];

/// A named curve with free-form columns (norm against λ, kernel profiles, ...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<CurveValue>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CurveValue(#[serde(with = "ext")] pub f64);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    /// SHA-256 of the ingested config bytes, hex encoded.
    pub config_hash: String,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    pub outputs: serde_json::Value,
    pub checks: Vec<Check>,
    pub ratios: Vec<RatioRow>,
    pub curves: Vec<Curve>,
    pub pass: bool,
}

impl RunRecord {
    pub fn new(command: impl Into<String>, config_bytes: &[u8], seed: u64) -> Self {
        Self {
            command: command.into(),
            config_hash: config_hash(config_bytes),
            seed,
            started: now(),
            finished: String::new(),
            outputs: serde_json::Value::Null,
            checks: Vec::new(),
            ratios: Vec::new(),
            curves: Vec::new(),
            pass: true,
        }
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, detail: detail.into() });
        self.pass &= pass;
    }

    pub fn finish(&mut self) {
        self.finished = now();
        self.pass = self.checks.iter().all(|c| c.pass);
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

pub fn config_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

pub fn write_report(record: &RunRecord, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(record).map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

pub fn read_report(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

/// Shortest representation that parses back to the same float.
fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:?}")
    }
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let csv_err = |e: csv::Error| io_err(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_ratio_table(rows: &[RatioRow], path: &Path) -> Result<()> {
    write_csv(
        path,
        &RATIO_HEADER,
        rows.iter().map(|r| {
            vec![r.candidate_id.to_string(), fmt_f64(r.n_or_lambda), fmt_f64(r.ratio), fmt_f64(r.bound), r.pass.to_string()]
        }),
    )
}

/// Writes `ratios.csv` plus one `<name>.csv` per curve into `dir`; returns the paths written.
pub fn emit_plot_data(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut out = Vec::new();
    let ratios = dir.join("ratios.csv");
    write_ratio_table(&record.ratios, &ratios)?;
    out.push(ratios);
    for c in &record.curves {
        let path = dir.join(format!("{}.csv", c.name));
        let header: Vec<&str> = c.columns.iter().map(String::as_str).collect();
        write_csv(&path, &header, c.rows.iter().map(|r| r.iter().map(|v| fmt_f64(v.0)).collect()))?;
        out.push(path);
    }
    Ok(out)
}
