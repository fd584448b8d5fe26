//! Configuration files, table and path exports, run manifests.
//!
//! Floats are written with Rust's shortest round-trip formatting so every
//! exported number parses back to the identical value.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::StateGrid;
use crate::model::{Action, ModelConfig};
use crate::simulator::PathRecord;
use crate::solver::{PolicyTable, Solution, ValueTable};

fn io_err<'a>(context: &'static str, path: &'a Path) -> impl FnOnce(std::io::Error) -> Error + 'a {
    move |source| Error::Io {
        context,
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(source) => Error::Io {
                    context: "csv",
                    path: path.to_path_buf(),
                    source,
                },
                _ => unreachable!(),
            }
        } else {
            Error::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            }
        }
    }
}

/// Parse a configuration from TOML text. Missing keys take default values;
/// unknown keys are rejected.
pub fn parse_config(text: &str) -> std::result::Result<ModelConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

/// Load and validate a configuration file.
pub fn load_config(path: &Path) -> Result<ModelConfig> {
    let text = fs::read_to_string(path).map_err(io_err("reading configuration", path))?;
    let cfg = parse_config(&text).map_err(|message| Error::Parse {
        path: path.to_path_buf(),
        message,
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn config_to_toml(cfg: &ModelConfig) -> String {
    toml::to_string(cfg).expect("configuration is always serializable")
}

/// SHA-256 of the canonical JSON encoding of the configuration.
pub fn config_hash(cfg: &ModelConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("configuration is always serializable");
    hex::encode(Sha256::digest(&json))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err("creating directory", dir))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(io_err("writing json", path))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn action_field(a: Option<Action>) -> String {
    a.map(|a| a.name().to_string()).unwrap_or_default()
}

pub fn value_policy_file(step: usize) -> String {
    format!("value_policy_step_{step:03}.csv")
}

#[derive(Debug, Serialize)]
struct TableMetadata<'a> {
    config_hash: String,
    steps: &'a [usize],
    grid: crate::grid::GridSummary,
    files: Vec<String>,
}

/// One CSV per requested step with the value and decision of every grid
/// state, plus `metadata.json`.
pub fn export_value_policy(
    sol: &Solution,
    cfg: &ModelConfig,
    grid: &StateGrid,
    steps: &[usize],
    out: &Path,
) -> Result<Vec<PathBuf>> {
    create_dir(out)?;
    let mut files = Vec::new();
    for &n in steps {
        if n > cfg.steps() {
            return Err(Error::InvalidArgument(format!("step {n} beyond horizon {}", cfg.steps())));
        }
        let path = out.join(value_policy_file(n));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(["i", "j", "k", "z", "r_mid", "q", "g", "value_eur", "action"])
            .map_err(csv_err(&path))?;
        let mu = cfg.seasonal_mean(n);
        for id in 0..grid.num_states() {
            let (i, j, k) = grid.coords(id);
            let x = grid.state(id);
            let action = (n < cfg.steps()).then(|| sol.policy.get(n, id));
            w.write_record([
                i.to_string(),
                j.to_string(),
                k.to_string(),
                fmt(x.z),
                fmt(mu + x.z),
                fmt(x.q),
                fmt(x.g),
                fmt(sol.values.get(n, id)),
                action_field(action),
            ])
            .map_err(csv_err(&path))?;
        }
        w.flush().map_err(io_err("writing csv", &path))?;
        files.push(path);
    }
    let meta = TableMetadata {
        config_hash: config_hash(cfg),
        steps,
        grid: grid.summary(),
        files: files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
    };
    let meta_path = out.join("metadata.json");
    write_json(&meta_path, &meta)?;
    files.push(meta_path);
    Ok(files)
}

/// Rows of an exported value/policy slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceRow {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub z: f64,
    pub r_mid: f64,
    pub q: f64,
    pub g: f64,
    pub value_eur: f64,
    pub action: Option<Action>,
}

fn parse_field<T: std::str::FromStr>(path: &Path, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        message: format!("cannot parse field '{s}'"),
    })
}

fn parse_action(path: &Path, s: &str) -> Result<Option<Action>> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            message: format!("unknown action '{s}'"),
        })
    }
}

pub fn read_value_policy(path: &Path) -> Result<Vec<SliceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        if rec.len() != 9 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: format!("expected 9 columns, found {}", rec.len()),
            });
        }
        rows.push(SliceRow {
            i: parse_field(path, &rec[0])?,
            j: parse_field(path, &rec[1])?,
            k: parse_field(path, &rec[2])?,
            z: parse_field(path, &rec[3])?,
            r_mid: parse_field(path, &rec[4])?,
            q: parse_field(path, &rec[5])?,
            g: parse_field(path, &rec[6])?,
            value_eur: parse_field(path, &rec[7])?,
            action: parse_action(path, &rec[8])?,
        });
    }
    Ok(rows)
}

pub const POLICY_FILE: &str = "policy.csv";
pub const VALUES_FILE: &str = "values.csv";

/// Full decision table: columns step, i, j, k, action.
pub fn write_policy_table(policy: &PolicyTable, grid: &StateGrid, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["step", "i", "j", "k", "action"]).map_err(csv_err(path))?;
    for (n, row) in policy.actions.iter().enumerate() {
        for (id, a) in row.iter().enumerate() {
            let (i, j, k) = grid.coords(id);
            w.write_record([n.to_string(), i.to_string(), j.to_string(), k.to_string(), a.name().to_string()])
                .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err("writing csv", path))
}

pub fn read_policy_table(path: &Path, grid: &StateGrid, steps: usize) -> Result<PolicyTable> {
    let mut table: Vec<Vec<Option<Action>>> = vec![vec![None; grid.num_states()]; steps];
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let n: usize = parse_field(path, &rec[0])?;
        let (i, j, k): (usize, usize, usize) = (
            parse_field(path, &rec[1])?,
            parse_field(path, &rec[2])?,
            parse_field(path, &rec[3])?,
        );
        if n >= steps || i >= grid.z.len() || j >= grid.q.len() || k >= grid.g.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: format!("entry ({n}, {i}, {j}, {k}) outside the grid"),
            });
        }
        table[n][grid.index(i, j, k)] = parse_action(path, &rec[4])?;
    }
    let actions = table
        .into_iter()
        .map(|row| row.into_iter().collect::<Option<Vec<_>>>())
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            message: "policy table is incomplete".into(),
        })?;
    Ok(PolicyTable { actions })
}

/// Full value table: columns step, i, j, k, value_eur.
pub fn write_value_table(values: &ValueTable, grid: &StateGrid, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["step", "i", "j", "k", "value_eur"]).map_err(csv_err(path))?;
    for (n, row) in values.values.iter().enumerate() {
        for (id, v) in row.iter().enumerate() {
            let (i, j, k) = grid.coords(id);
            w.write_record([n.to_string(), i.to_string(), j.to_string(), k.to_string(), fmt(*v)])
                .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err("writing csv", path))
}

/// Path CSV: step, time_h, z, r, q, g, action, stage_cost_eur, cum_cost_eur.
pub fn write_path(records: &[PathRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["step", "time_h", "z", "r", "q", "g", "action", "stage_cost_eur", "cum_cost_eur"])
        .map_err(csv_err(path))?;
    for p in records {
        w.write_record([
            p.step.to_string(),
            fmt(p.time_h),
            fmt(p.z),
            fmt(p.r),
            fmt(p.q),
            fmt(p.g),
            action_field(p.action),
            fmt(p.stage_cost_eur),
            fmt(p.cum_cost_eur),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err("writing csv", path))
}

pub fn read_path(path: &Path) -> Result<Vec<PathRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        out.push(PathRecord {
            step: parse_field(path, &rec[0])?,
            time_h: parse_field(path, &rec[1])?,
            z: parse_field(path, &rec[2])?,
            r: parse_field(path, &rec[3])?,
            q: parse_field(path, &rec[4])?,
            g: parse_field(path, &rec[5])?,
            action: parse_action(path, &rec[6])?,
            stage_cost_eur: parse_field(path, &rec[7])?,
            cum_cost_eur: parse_field(path, &rec[8])?,
        });
    }
    Ok(out)
}

/// Provenance of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub seed: Option<u64>,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(cfg: &ModelConfig, seed: Option<u64>, started_at: String, outputs: Vec<String>) -> Self {
        Self {
            config_hash: config_hash(cfg),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            started_at,
            finished_at: now(),
            outputs,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// Current UTC time in RFC 3339 form.
pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Write a serializable value as pretty JSON.
pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(path, value)
}

/// Create a directory and its parents.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    create_dir(dir)
}

/// Paths of `files` relative to `root`, for manifests.
pub fn relative_names(root: &Path, files: &[PathBuf]) -> Vec<String> {
    files
        .iter()
        .map(|f| f.strip_prefix(root).unwrap_or(f).to_string_lossy().into_owned())
        .collect()
}
