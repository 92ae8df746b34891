use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Normalization, SystemKind, Trajectory};
use crate::json::{from_versioned_str, write_pretty};
use crate::{Error, Result};

pub const DATASET_FORMAT_VERSION: u32 = 1;
pub const HEADER_FILE: &str = "header.json";
pub const RECORDS_FILE: &str = "dataset.jsonl";

#[derive(Debug, Serialize, Deserialize)]
struct Splits {
    train: Vec<String>,
    valid: Vec<String>,
    test: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    system: SystemKind,
    n_u: usize,
    n_y: usize,
    dt: f64,
    splits: Splits,
    normalization: Normalization,
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: String,
    u: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    x: Option<Vec<Vec<f64>>>,
}

fn ids(ts: &[Trajectory]) -> Vec<String> {
    ts.iter().map(|t| t.id.clone()).collect()
}

/// Write `header.json` and `dataset.jsonl` into `dir` (created if missing).
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let header = Header {
        format_version: DATASET_FORMAT_VERSION,
        system: ds.system,
        n_u: ds.n_u,
        n_y: ds.n_y,
        dt: ds.dt,
        splits: Splits {
            train: ids(&ds.train),
            valid: ids(&ds.valid),
            test: ids(&ds.test),
        },
        normalization: ds.normalization.clone(),
    };
    write_pretty(&dir.join(HEADER_FILE), &header)?;

    let path = dir.join(RECORDS_FILE);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for t in ds.trajectories() {
        let rec = Record {
            id: t.id.clone(),
            u: t.inputs.clone(),
            y: t.outputs.clone(),
            x: t.true_states.clone(),
        };
        serde_json::to_writer(&mut out, &rec).expect("serializable record");
        out.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    }
    out.flush().map_err(|e| Error::io(&path, e))
}

/// Read a dataset written by [`save_dataset`]. Nothing is returned unless every
/// trajectory listed in the header parses.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let header_path = dir.join(HEADER_FILE);
    let text = fs::read_to_string(&header_path).map_err(|e| Error::io(&header_path, e))?;
    let header: Header = from_versioned_str(&header_path, &text, DATASET_FORMAT_VERSION)?;

    let path = dir.join(RECORDS_FILE);
    let body = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut records: HashMap<String, Record> = HashMap::new();
    let mut n_lines = 0;
    for (i, line) in body.lines().enumerate() {
        n_lines = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.clone(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if records.contains_key(&rec.id) {
            return Err(Error::Parse {
                path: path.clone(),
                line: i + 1,
                message: format!("duplicate trajectory id {}", rec.id),
            });
        }
        records.insert(rec.id.clone(), rec);
    }

    let mut take = |wanted: &[String]| -> Result<Vec<Trajectory>> {
        wanted
            .iter()
            .map(|id| {
                let rec = records.remove(id).ok_or_else(|| Error::Parse {
                    path: path.clone(),
                    line: n_lines + 1,
                    message: format!("trajectory {id} listed in the header is missing (truncated file?)"),
                })?;
                Ok(Trajectory {
                    id: rec.id,
                    dt: header.dt,
                    inputs: rec.u,
                    outputs: rec.y,
                    true_states: rec.x,
                })
            })
            .collect()
    };
    let train = take(&header.splits.train)?;
    let valid = take(&header.splits.valid)?;
    let test = take(&header.splits.test)?;
    if let Some(extra) = records.keys().next() {
        return Err(Error::Parse {
            path,
            line: n_lines,
            message: format!("trajectory {extra} is not listed in the header"),
        });
    }
    let ds = Dataset {
        system: header.system,
        n_u: header.n_u,
        n_y: header.n_y,
        dt: header.dt,
        train,
        valid,
        test,
        normalization: header.normalization,
    };
    ds.validate()?;
    Ok(ds)
}
