//! Tabular output in CSV or JSON lines.
//!
//! Both formats carry the same field names in the same order. Floats are
//! written in shortest round-trip form, so reading a file back yields the
//! exact values that were written.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }

    pub fn file_name(self, stem: &str) -> String {
        format!("{stem}.{}", self.extension())
    }
}

impl FromStr for Format {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" | "json-lines" => Ok(Format::Jsonl),
            other => Err(HarnessError::invalid(
                "format",
                format!("unknown format `{other}` (expected csv or jsonl)"),
            )),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

/// A flat row type with a fixed column order.
pub trait Record: Serialize + DeserializeOwned {
    /// Column names, identical to the serialized field names.
    const FIELDS: &'static [&'static str];
}

fn serialize_error(path: &Path, reason: impl fmt::Display) -> HarnessError {
    HarnessError::Serialize {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// Writes `records` to `path`. An empty slice still produces the CSV header.
pub fn write_records<R: Record>(path: &Path, format: Format, records: &[R]) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        Format::Csv => {
            let mut writer = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(&mut out);
            writer
                .write_record(R::FIELDS)
                .map_err(|e| serialize_error(path, e))?;
            for record in records {
                writer
                    .serialize(record)
                    .map_err(|e| serialize_error(path, e))?;
            }
            writer.flush().map_err(|e| HarnessError::io(path, e))?;
        }
        Format::Jsonl => {
            for record in records {
                serde_json::to_writer(&mut out, record).map_err(|e| serialize_error(path, e))?;
                out.write_all(b"\n")
                    .map_err(|e| HarnessError::io(path, e))?;
            }
        }
    }
    out.flush().map_err(|e| HarnessError::io(path, e))
}

/// Reads back a file written by [`write_records`].
pub fn read_records<R: Record>(path: &Path, format: Format) -> Result<Vec<R>> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    match format {
        Format::Csv => {
            let mut reader = csv::Reader::from_reader(file);
            let headers = reader.headers().map_err(|e| serialize_error(path, e))?;
            if headers.iter().ne(R::FIELDS.iter().copied()) {
                return Err(serialize_error(
                    path,
                    format!("unexpected header {headers:?}"),
                ));
            }
            reader
                .deserialize()
                .map(|row| row.map_err(|e| serialize_error(path, e)))
                .collect()
        }
        Format::Jsonl => BufReader::new(file)
            .lines()
            .map(|line| {
                let line = line.map_err(|e| HarnessError::io(path, e))?;
                serde_json::from_str(&line).map_err(|e| serialize_error(path, e))
            })
            .collect(),
    }
}

/// Files written by one command, relative to its output directory.
#[derive(Debug, Default)]
pub struct Emitted {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl Emitted {
    pub fn new(dir: &Path) -> Self {
        Emitted {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn write<R: Record>(&mut self, stem: &str, format: Format, records: &[R]) -> Result<()> {
        let name = format.file_name(stem);
        write_records(&self.dir.join(&name), format, records)?;
        self.files.push(name);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct Row {
        #[serde(rename = "N")]
        n: f64,
        policy: String,
        value: f64,
        flag: bool,
    }

    impl Record for Row {
        const FIELDS: &'static [&'static str] = &["N", "policy", "value", "flag"];
    }

    fn rows() -> Vec<Row> {
        vec![
            Row {
                n: 2.5,
                policy: "adaptive".into(),
                value: 0.1 + 0.2,
                flag: false,
            },
            Row {
                n: 300.0,
                policy: "heterodyne".into(),
                value: 1.0 / 3.0e7,
                flag: true,
            },
        ]
    }

    #[test]
    fn round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        for format in [Format::Csv, Format::Jsonl] {
            let path = dir.path().join(format.file_name("rows"));
            write_records(&path, format, &rows()).unwrap();
            assert_eq!(read_records::<Row>(&path, format).unwrap(), rows());
        }
    }

    #[test]
    fn empty_csv_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_records::<Row>(&path, Format::Csv, &[]).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "N,policy,value,flag\n"
        );
        assert!(read_records::<Row>(&path, Format::Csv).unwrap().is_empty());
    }

    #[test]
    fn fields_match_serialized_names() {
        let value = serde_json::to_value(&rows()[0]).unwrap();
        let keys: Vec<&str> = value
            .as_object()
            .unwrap()
            .keys()
            .map(String::as_str)
            .collect();
        let mut expected = Row::FIELDS.to_vec();
        expected.sort_unstable();
        let mut keys = keys;
        keys.sort_unstable();
        assert_eq!(keys, expected);
    }

    #[test]
    fn format_names() {
        assert_eq!("jsonl".parse::<Format>().unwrap(), Format::Jsonl);
        assert_eq!(Format::Csv.file_name("sweep"), "sweep.csv");
        assert!("xml".parse::<Format>().is_err());
    }
}
