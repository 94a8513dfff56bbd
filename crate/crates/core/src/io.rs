//! CSV and JSON artifacts: arrival records, count traces, Stokes logs,
//! protective-measurement tables and histograms.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{ArrivalHistogram, PmResult};
use crate::plant::Arrival;
use crate::polarization::{fidelity, StokesVector};
use crate::spgd::{StokesSample, TraceSample};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv { path: path.to_path_buf(), source }
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(csv_err(path))
}

#[derive(Debug, Serialize, Deserialize)]
struct ArrivalRow {
    pulse_index: u64,
    arrival_ns: f64,
}

pub fn write_arrivals(path: &Path, arrivals: &[Arrival]) -> Result<(), IoError> {
    write_rows(path, arrivals.iter().map(|a| ArrivalRow { pulse_index: a.pulse_index, arrival_ns: a.time_ns }))
}

pub fn read_arrivals(path: &Path) -> Result<Vec<Arrival>, IoError> {
    Ok(read_rows::<ArrivalRow>(path)?
        .into_iter()
        .map(|r| Arrival { pulse_index: r.pulse_index, time_ns: r.arrival_ns })
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TraceRow {
    pub time_s: f64,
    pub counts: u64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub v4: f64,
    pub transmission: f64,
}

pub fn write_trace(path: &Path, trace: &[TraceSample]) -> Result<(), IoError> {
    write_rows(
        path,
        trace.iter().map(|s| TraceRow {
            time_s: s.time_s,
            counts: s.counts,
            v1: s.voltages[0],
            v2: s.voltages[1],
            v3: s.voltages[2],
            v4: s.voltages[3],
            transmission: s.transmission,
        }),
    )
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>, IoError> {
    read_rows(path)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StokesRow {
    pub time_s: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub fidelity: f64,
}

/// Writes the Stokes log with each sample's fidelity to `target`.
pub fn write_stokes(path: &Path, samples: &[StokesSample], target: &StokesVector) -> Result<(), IoError> {
    write_rows(
        path,
        samples.iter().map(|s| StokesRow {
            time_s: s.time_s,
            s1: s.stokes.s1,
            s2: s.stokes.s2,
            s3: s.stokes.s3,
            fidelity: fidelity(&s.stokes, target).unwrap_or(f64::NAN),
        }),
    )
}

pub fn read_stokes(path: &Path) -> Result<Vec<StokesRow>, IoError> {
    read_rows(path)
}

pub fn write_pm_table(path: &Path, rows: &[PmResult]) -> Result<(), IoError> {
    write_rows(path, rows)
}

pub fn read_pm_table(path: &Path) -> Result<Vec<PmResult>, IoError> {
    read_rows(path)
}

#[derive(Debug, Serialize)]
struct HistogramRow {
    center_ns: f64,
    counts: f64,
}

pub fn write_histogram(path: &Path, h: &ArrivalHistogram) -> Result<(), IoError> {
    write_rows(
        path,
        h.counts.iter().enumerate().map(|(i, &c)| HistogramRow { center_ns: h.center(i), counts: c }),
    )
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| IoError::Json { path: path.into(), source })?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|source| IoError::Json { path: path.into(), source })
}

pub fn sha256_file(path: &Path) -> Result<String, IoError> {
    let mut file = File::open(path).map_err(io_err(path))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}
