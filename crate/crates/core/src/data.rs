//! Data model, CSV ingestion and preprocessing.
//!
//! A [`Dataset`] is an immutable collection of equally long series, one per
//! (scenario, location) pair. Preprocessing steps return new datasets and
//! record what was applied in [`Preprocessing`].

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Preprocessing state of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preprocessing {
    Raw,
    GlobalCentered,
    Zscored,
}

impl Preprocessing {
    pub fn as_str(self) -> &'static str {
        match self {
            Preprocessing::Raw => "raw",
            Preprocessing::GlobalCentered => "global_centered",
            Preprocessing::Zscored => "zscored",
        }
    }
}

impl fmt::Display for Preprocessing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One scenario/location series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesRecord {
    pub scenario_id: u64,
    pub location_id: u64,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub values: Vec<f64>,
}

impl TimeSeriesRecord {
    pub fn new(scenario_id: u64, location_id: u64, values: Vec<f64>) -> Self {
        Self {
            scenario_id,
            location_id,
            lat: None,
            lon: None,
            values,
        }
    }

    /// Sample mean (population convention applies to std, mean is the usual one).
    pub fn mean(&self) -> f64 {
        stats::mean(&self.values)
    }

    pub fn population_std(&self) -> f64 {
        stats::population_std(&self.values)
    }
}

/// CSV layouts understood by [`Dataset::load_csv`] / [`Dataset::write_csv`].
///
/// Wide: one row per record, `scenario,location,lat,lon,v0,...,v{T-1}`.
/// Long: one row per sample, `scenario,location,t,value`; records are sorted
/// by (scenario, location) on load and coordinates are not carried.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvLayout {
    Wide,
    Long,
}

/// N equally long records plus the statistics used for centering.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<TimeSeriesRecord>,
    t: usize,
    global_mean: f64,
    preprocessing: Preprocessing,
}

/// Formats a value with 17 significant digits so parsing recovers the exact
/// f64. This is the writer convention for every CSV this crate emits.
pub fn fmt_sample(v: f64) -> String {
    format!("{:.16e}", v)
}

impl Dataset {
    /// Builds a raw dataset, validating the shared-length, finiteness,
    /// identity-uniqueness and minimum-size invariants.
    pub fn from_records(records: Vec<TimeSeriesRecord>) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::DatasetTooSmall { n: records.len() });
        }
        let t = records[0].values.len();
        if t < 2 {
            return Err(Error::SeriesTooShort { t });
        }
        let mut seen = std::collections::HashSet::new();
        for rec in &records {
            if rec.values.len() != t {
                return Err(Error::RaggedRow {
                    path: "<memory>".into(),
                    row: 0,
                    expected: t,
                    found: rec.values.len(),
                });
            }
            if rec.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    path: "<memory>".into(),
                    row: 0,
                    scenario: rec.scenario_id,
                    location: rec.location_id,
                });
            }
            if !seen.insert((rec.scenario_id, rec.location_id)) {
                return Err(Error::DuplicateRecord {
                    scenario: rec.scenario_id,
                    location: rec.location_id,
                });
            }
        }
        let global_mean = global_mean_of(&records);
        Ok(Self {
            records,
            t,
            global_mean,
            preprocessing: Preprocessing::Raw,
        })
    }

    pub fn records(&self) -> &[TimeSeriesRecord] {
        &self.records
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// For raw data, the mean over all samples; after [`Dataset::center_global`],
    /// the mean that was subtracted.
    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    pub fn preprocessing(&self) -> Preprocessing {
        self.preprocessing
    }

    /// Index of the record with the given identity.
    pub fn index_of(&self, scenario_id: u64, location_id: u64) -> Option<usize> {
        self.records
            .iter()
            .position(|r| r.scenario_id == scenario_id && r.location_id == location_id)
    }

    /// Copies the values into an N x T matrix (record order preserved).
    pub fn values_matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.n(), self.t));
        for (i, rec) in self.records.iter().enumerate() {
            for (j, &v) in rec.values.iter().enumerate() {
                m[[i, j]] = v;
            }
        }
        m
    }

    /// Subtracts the global mean (over all samples of all records) from every
    /// sample. Only valid on raw data; the subtracted mean is recorded.
    pub fn center_global(&self) -> Result<Dataset> {
        if self.preprocessing != Preprocessing::Raw {
            return Err(Error::PreprocessingMismatch {
                expected: "raw",
                found: self.preprocessing.as_str(),
            });
        }
        let gm = self.global_mean;
        let records = self
            .records
            .iter()
            .map(|r| TimeSeriesRecord {
                values: r.values.iter().map(|v| v - gm).collect(),
                ..r.clone()
            })
            .collect();
        Ok(Dataset {
            records,
            t: self.t,
            global_mean: gm,
            preprocessing: Preprocessing::GlobalCentered,
        })
    }

    /// Standardizes each record to mean 0 and population std 1.
    pub fn zscore(&self) -> Result<Dataset> {
        let records = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let m = r.mean();
                let s = r.population_std();
                if s == 0.0 {
                    return Err(Error::ConstantRecord {
                        index: i,
                        scenario: r.scenario_id,
                        location: r.location_id,
                    });
                }
                Ok(TimeSeriesRecord {
                    values: r.values.iter().map(|v| (v - m) / s).collect(),
                    ..r.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            global_mean: global_mean_of(&records),
            records,
            t: self.t,
            preprocessing: Preprocessing::Zscored,
        })
    }

    /// Parses a dataset from CSV. See [`CsvLayout`] for the two formats.
    pub fn load_csv<P: AsRef<Path>>(path: P, layout: CsvLayout) -> Result<Dataset> {
        let path_str = path.as_ref().display().to_string();
        let file = File::open(path.as_ref())?;
        let reader = BufReader::new(file);
        match layout {
            CsvLayout::Wide => load_wide(reader, &path_str),
            CsvLayout::Long => load_long(reader, &path_str),
        }
    }

    /// Writes the dataset as CSV with 17-significant-digit values so that a
    /// subsequent load reproduces the exact dataset.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P, layout: CsvLayout) -> Result<()> {
        let file = File::create(path.as_ref())?;
        let mut w = BufWriter::new(file);
        match layout {
            CsvLayout::Wide => {
                write!(w, "scenario,location,lat,lon")?;
                for j in 0..self.t {
                    write!(w, ",v{j}")?;
                }
                writeln!(w)?;
                for rec in &self.records {
                    write!(w, "{},{}", rec.scenario_id, rec.location_id)?;
                    match rec.lat {
                        Some(lat) => write!(w, ",{}", fmt_sample(lat))?,
                        None => write!(w, ",")?,
                    }
                    match rec.lon {
                        Some(lon) => write!(w, ",{}", fmt_sample(lon))?,
                        None => write!(w, ",")?,
                    }
                    for v in &rec.values {
                        write!(w, ",{}", fmt_sample(*v))?;
                    }
                    writeln!(w)?;
                }
            }
            CsvLayout::Long => {
                writeln!(w, "scenario,location,t,value")?;
                let mut order: Vec<&TimeSeriesRecord> = self.records.iter().collect();
                order.sort_by_key(|r| (r.scenario_id, r.location_id));
                for rec in order {
                    for (idx, v) in rec.values.iter().enumerate() {
                        writeln!(
                            w,
                            "{},{},{},{}",
                            rec.scenario_id,
                            rec.location_id,
                            idx,
                            fmt_sample(*v)
                        )?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn global_mean_of(records: &[TimeSeriesRecord]) -> f64 {
    let total: f64 = records.iter().map(|r| r.values.iter().sum::<f64>()).sum();
    let count: usize = records.iter().map(|r| r.values.len()).sum();
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

fn parse_field<T: std::str::FromStr>(
    raw: &str,
    what: &'static str,
    path: &str,
    row: usize,
    column: usize,
) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Parse {
        path: path.to_string(),
        row,
        column,
        what,
        value: raw.to_string(),
    })
}

fn parse_sample(raw: &str, path: &str, row: usize, column: usize) -> Result<f64> {
    let v: f64 = parse_field(raw, "value", path, row, column)?;
    if !v.is_finite() {
        return Err(Error::Parse {
            path: path.to_string(),
            row,
            column,
            what: "finite value",
            value: raw.to_string(),
        });
    }
    Ok(v)
}

fn load_wide<R: BufRead>(reader: R, path: &str) -> Result<Dataset> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{path}: empty file")))??;
    let cols: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if cols.len() < 5 || cols[0] != "scenario" || cols[1] != "location" {
        return Err(Error::Format(format!(
            "{path}: wide header must start with scenario,location,lat,lon,v0,..."
        )));
    }
    let t = cols.len() - 4;
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let row = lineno + 2; // header is row 1
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != t + 4 {
            return Err(Error::RaggedRow {
                path: path.to_string(),
                row,
                expected: t,
                found: fields.len().saturating_sub(4),
            });
        }
        let scenario_id: u64 = parse_field(fields[0], "scenario id", path, row, 1)?;
        let location_id: u64 = parse_field(fields[1], "location id", path, row, 2)?;
        let lat = if fields[2].trim().is_empty() {
            None
        } else {
            Some(parse_sample(fields[2], path, row, 3)?)
        };
        let lon = if fields[3].trim().is_empty() {
            None
        } else {
            Some(parse_sample(fields[3], path, row, 4)?)
        };
        let mut values = Vec::with_capacity(t);
        for (k, raw) in fields[4..].iter().enumerate() {
            values.push(parse_sample(raw, path, row, k + 5)?);
        }
        records.push(TimeSeriesRecord {
            scenario_id,
            location_id,
            lat,
            lon,
            values,
        });
    }
    Dataset::from_records(records)
}

fn load_long<R: BufRead>(reader: R, path: &str) -> Result<Dataset> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{path}: empty file")))??;
    if header.trim_end_matches('\r') != "scenario,location,t,value" {
        return Err(Error::Format(format!(
            "{path}: long header must be scenario,location,t,value"
        )));
    }
    // (scenario, location) -> (samples keyed by t, last row seen)
    let mut groups: std::collections::BTreeMap<(u64, u64), (Vec<Option<f64>>, usize)> =
        std::collections::BTreeMap::new();
    for (lineno, line) in lines.enumerate() {
        let row = lineno + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::RaggedRow {
                path: path.to_string(),
                row,
                expected: 4,
                found: fields.len(),
            });
        }
        let scenario_id: u64 = parse_field(fields[0], "scenario id", path, row, 1)?;
        let location_id: u64 = parse_field(fields[1], "location id", path, row, 2)?;
        let t_idx: usize = parse_field(fields[2], "time index", path, row, 3)?;
        let value = parse_sample(fields[3], path, row, 4)?;
        let entry = groups
            .entry((scenario_id, location_id))
            .or_insert_with(|| (Vec::new(), row));
        if entry.0.len() <= t_idx {
            entry.0.resize(t_idx + 1, None);
        }
        if entry.0[t_idx].is_some() {
            return Err(Error::Parse {
                path: path.to_string(),
                row,
                column: 3,
                what: "unique time index",
                value: fields[2].to_string(),
            });
        }
        entry.0[t_idx] = Some(value);
        entry.1 = row;
    }
    let expected_t = groups.values().next().map(|(v, _)| v.len()).unwrap_or(0);
    let mut records = Vec::with_capacity(groups.len());
    for ((scenario_id, location_id), (samples, last_row)) in groups {
        if samples.len() != expected_t || samples.iter().any(Option::is_none) {
            return Err(Error::RaggedRow {
                path: path.to_string(),
                row: last_row,
                expected: expected_t,
                found: samples.iter().filter(|s| s.is_some()).count(),
            });
        }
        records.push(TimeSeriesRecord {
            scenario_id,
            location_id,
            lat: None,
            lon: None,
            values: samples.into_iter().map(Option::unwrap).collect(),
        });
    }
    Dataset::from_records(records)
}
