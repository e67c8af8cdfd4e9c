//! File formats: event CSV with a JSON sidecar, edge-list CSV, JSON
//! parameters and fit results, tidy metric rows.
//!
//! Sidecar schema (`events.json` next to `events.csv`):
//!
//! ```json
//! {"n_users": 16, "n_categories": 2, "n_locations": 8, "horizon": 4210.5,
//!  "location_category": [0, 0, 0, 0, 1, 1, 1, 1]}
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::log::EventLog;
use crate::model::{Checkin, LocationLayout, SocialGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub n_users: usize,
    pub n_categories: usize,
    pub n_locations: usize,
    pub horizon: f64,
    pub location_category: Vec<usize>,
}

impl Sidecar {
    pub fn of(log: &EventLog) -> Self {
        Self {
            n_users: log.n_users(),
            n_categories: log.n_categories(),
            n_locations: log.n_locations(),
            horizon: log.horizon(),
            location_category: log.layout().location_category().to_vec(),
        }
    }

    pub fn layout(&self) -> Result<LocationLayout> {
        if self.location_category.len() != self.n_locations {
            return Err(Error::Format(format!(
                "sidecar maps {} locations but declares L={}",
                self.location_category.len(),
                self.n_locations
            )));
        }
        LocationLayout::new(self.n_categories, self.location_category.clone())
            .map_err(|e| Error::Format(e.to_string()))
    }
}

/// `events.csv` -> `events.json`.
pub fn sidecar_path(events: &Path) -> PathBuf {
    events.with_extension("json")
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    Ok(BufWriter::new(f))
}

pub fn write_events(log: &EventLog, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for e in log.events() {
        w.serialize(e)?;
    }
    if log.is_empty() {
        w.write_record(["t", "user", "category", "location"])?;
    }
    w.flush()?;
    write_json(&Sidecar::of(log), &sidecar_path(path))
}

/// Read the CSV and its sidecar.
pub fn read_events(path: &Path) -> Result<EventLog> {
    let side: Sidecar = read_json(&sidecar_path(path))?;
    let layout = side.layout()?;
    let mut r = csv::Reader::from_reader(open(path)?);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["t", "user", "category", "location"] {
        return Err(Error::Format(format!(
            "{}: expected header t,user,category,location, got {}",
            path.display(),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let events = r
        .deserialize::<Checkin>()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::Format(format!("{} row {}: {e}", path.display(), i + 1))))
        .collect::<Result<Vec<_>>>()?;
    EventLog::new(side.n_users, layout, events, side.horizon).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[derive(Serialize, Deserialize)]
struct EdgeRow {
    src: usize,
    dst: usize,
}

pub fn write_graph(graph: &SocialGraph, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["src", "dst"])?;
    for (src, dst) in graph.edges() {
        w.write_record([src.to_string(), dst.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Edge list over `n` nodes.
pub fn read_graph(path: &Path, n: usize) -> Result<SocialGraph> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let mut g = SocialGraph::new(n);
    for (i, row) in r.deserialize::<EdgeRow>().enumerate() {
        let row = row.map_err(|e| Error::Format(format!("{} row {}: {e}", path.display(), i + 1)))?;
        g.add_edge(row.src, row.dst)
            .map_err(|e| Error::Format(format!("{} row {}: {e}", path.display(), i + 1)))?;
    }
    Ok(g)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(BufReader::new(open(path)?))
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// One tidy metrics row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    /// `key=value` pairs joined by `;`.
    pub config: String,
    pub value: f64,
}

impl MetricRow {
    pub fn new(metric: impl Into<String>, config: impl Into<String>, value: f64) -> Self {
        Self {
            metric: metric.into(),
            config: config.into(),
            value,
        }
    }
}

pub fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Format(format!("{}: {e}", path.display()))))
        .collect()
}
