//! CSV and JSON formats for samples, matrices and scree data.
//!
//! A sample is a CSV with header `curve_id,t,value`, one row per
//! observation, plus an optional JSON sidecar next to it with the same stem
//! and extension `json`. Matrices are headerless dense `K x K` CSVs.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::complete::RankSweepResult;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::matrix::SymMatrix;
use crate::simulate::{Curve, FragmentSample, GridType, Interval};

/// Metadata stored beside a sample CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub n: usize,
    pub grid_type: GridType,
    pub noise_sd: f64,
    pub intervals: Vec<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
}

impl Sidecar {
    pub fn of(sample: &FragmentSample) -> Self {
        Sidecar {
            n: sample.n(),
            grid_type: sample.grid_type,
            noise_sd: sample.noise_sd,
            intervals: sample.intervals.clone(),
            grid: sample.grid.as_ref().map(|g| g.points().to_vec()),
        }
    }
}

/// `sample.csv` -> `sample.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn write_sample_csv<W: Write>(sample: &FragmentSample, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["curve_id", "t", "value"])?;
    for c in &sample.curves {
        for (t, v) in c.times.iter().zip(&c.values) {
            w.write_record([c.id.as_str(), &t.to_string(), &v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the CSV and its sidecar.
pub fn write_sample(sample: &FragmentSample, path: &Path) -> Result<()> {
    write_sample_csv(sample, File::create(path)?)?;
    let side = File::create(sidecar_path(path))?;
    serde_json::to_writer_pretty(side, &Sidecar::of(sample))?;
    Ok(())
}

/// Reads a sample CSV, using the sidecar when one exists.
///
/// Without a sidecar the grid type is `type2`, the noise level 0 and each
/// interval `[min t, max t]`. Curves with fewer than two points are dropped.
pub fn ingest_fragments(path: &Path) -> Result<FragmentSample> {
    let side = sidecar_path(path);
    let sidecar = if side.exists() && side != path {
        Some(serde_json::from_reader::<_, Sidecar>(File::open(&side)?)?)
    } else {
        None
    };
    read_fragments(File::open(path)?, sidecar)
}

/// Parses sample CSV text with optional metadata.
pub fn read_fragments<R: Read>(input: R, sidecar: Option<Sidecar>) -> Result<FragmentSample> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.len() != 3 || &header[0] != "curve_id" || &header[1] != "t" || &header[2] != "value" {
        return Err(Error::Parse { line: 1, msg: "header must be curve_id,t,value".into() });
    }
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(f64, f64)>> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse { line, msg: e.to_string() }
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |msg: String| Error::Parse { line, msg };
        if rec.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", rec.len())));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(bad("empty curve_id".into()));
        }
        let t: f64 = rec[1].parse().map_err(|_| bad(format!("bad time {:?}", &rec[1])))?;
        let v: f64 = rec[2].parse().map_err(|_| bad(format!("bad value {:?}", &rec[2])))?;
        if !(0.0..=1.0).contains(&t) {
            return Err(bad(format!("time {t} outside [0, 1]")));
        }
        if !v.is_finite() {
            return Err(bad(format!("non-finite value {v}")));
        }
        rows.entry(id.clone())
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push((t, v));
    }

    if let Some(s) = &sidecar {
        if s.n != order.len() || s.intervals.len() != order.len() {
            return Err(Error::invalid(format!(
                "sidecar describes {} curves with {} intervals, file has {}",
                s.n,
                s.intervals.len(),
                order.len()
            )));
        }
    }

    let mut curves = Vec::with_capacity(order.len());
    let mut intervals = Vec::with_capacity(order.len());
    for (idx, id) in order.into_iter().enumerate() {
        let mut obs = rows.remove(&id).expect("grouped curve");
        if obs.len() < 2 {
            warn!("dropping curve {id}: {} point(s)", obs.len());
            continue;
        }
        obs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let interval = match &sidecar {
            Some(s) => s.intervals[idx],
            None => Interval::hull(obs[0].0, obs[obs.len() - 1].0),
        };
        curves.push(Curve { id, times: obs.iter().map(|o| o.0).collect(), values: obs.iter().map(|o| o.1).collect() });
        intervals.push(interval);
    }
    let (grid_type, noise_sd, grid) = match sidecar {
        Some(s) => (s.grid_type, s.noise_sd, s.grid.map(Grid::new).transpose()?),
        None => (GridType::Type2, 0.0, None),
    };
    Ok(FragmentSample { curves, intervals, noise_sd, grid_type, grid })
}

pub fn write_matrix_csv<W: Write>(m: &SymMatrix<f64>, out: W) -> Result<()> {
    let k = m.k();
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for j in 0..k {
        w.write_record((0..k).map(|l| m.get(j, l).to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_counts_csv<W: Write>(counts: &[usize], k: usize, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in counts.chunks(k) {
        w.write_record(row.iter().map(usize::to_string))?;
    }
    w.flush()?;
    Ok(())
}

fn read_square<R: Read, T: std::str::FromStr>(input: R) -> Result<(usize, Vec<T>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input);
    let mut vals = Vec::new();
    let mut k = None;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if *k.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::Parse { line, msg: "ragged row".into() });
        }
        for f in rec.iter() {
            vals.push(f.parse::<T>().map_err(|_| Error::Parse { line, msg: format!("bad number {f:?}") })?);
        }
    }
    let k = k.unwrap_or(0);
    if vals.len() != k * k {
        return Err(Error::invalid(format!("matrix is not square: {} entries, {k} columns", vals.len())));
    }
    Ok((k, vals))
}

/// Reads a dense symmetric matrix; tiny asymmetries are averaged away.
pub fn read_matrix_csv<R: Read>(input: R) -> Result<SymMatrix<f64>> {
    let (k, vals) = read_square::<_, f64>(input)?;
    let m = nalgebra::DMatrix::from_row_slice(k, k, &vals);
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (&m - m.transpose()).amax() > 1e-10 * scale {
        return Err(Error::invalid("matrix is not symmetric"));
    }
    Ok(SymMatrix::from_dmatrix_symmetrized(m))
}

pub fn read_counts_csv<R: Read>(input: R) -> Result<(usize, Vec<usize>)> {
    read_square::<_, usize>(input)
}

/// Scree data with header `rank,fit,normalized_fit`.
pub fn write_scree_csv<W: Write>(sweep: &RankSweepResult<f64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "fit", "normalized_fit"])?;
    for (i, (f, nf)) in sweep.fits.iter().zip(&sweep.normalized_fits).enumerate() {
        w.write_record([(i + 1).to_string(), f.to_string(), nf.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
