//! Time-series CSV files, JSON sidecars and mode-set files.
//!
//! CSV layout: a mandatory header row, comma-delimited, every number in its
//! shortest round-trip form. Columns are `t`, `trace`, one column per
//! observable, then `re_rho_i_j` and `im_rho_i_j` for every i <= j. Ensemble
//! results add a `<column>_stderr` after each column except `t`.

use crate::decomposition::{EffectiveModeSet, Topology};
use crate::deterministic::Diagnostics;
use crate::linalg::{sigma_x, sigma_y, sigma_z};
use crate::oracle::Trajectory;
use crate::{CMat, CVec, Error, Result, C64};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// Named operator whose expectation value gets its own column.
#[derive(Clone, Debug)]
pub struct Observable {
    pub name: String,
    pub op: CMat,
}

impl Observable {
    /// `sz`, `sx`, `sy` (d = 2 only) or `p<k>`, the population of level k.
    pub fn by_name(name: &str, d: usize) -> Result<Self> {
        let op = match name {
            "sz" | "sx" | "sy" if d != 2 => {
                return Err(Error::Validation(format!(
                    "observable {name} needs d = 2, got d = {d}"
                )));
            }
            "sz" => sigma_z(),
            "sx" => sigma_x(),
            "sy" => sigma_y(),
            _ => match name.strip_prefix('p').and_then(|k| k.parse::<usize>().ok()) {
                Some(k) if k < d => {
                    let mut m = CMat::zeros(d, d);
                    m[(k, k)] = C64::new(1.0, 0.0);
                    m
                }
                _ => return Err(Error::Validation(format!("unknown observable {name:?}"))),
            },
        };
        Ok(Self {
            name: name.to_string(),
            op,
        })
    }

    /// `sz` for qubits, nothing otherwise.
    pub fn defaults(d: usize) -> Vec<Self> {
        if d == 2 {
            vec![Self::by_name("sz", 2).unwrap()]
        } else {
            Vec::new()
        }
    }
}

/// Shortest representation that parses back to the same f64.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Parsed CSV contents.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

/// Builds the CSV table for a trajectory.
pub fn timeseries_table<'a>(traj: impl Into<Trajectory<'a>>, observables: &[Observable]) -> Table {
    let traj = traj.into();
    let values = traj.values();
    let errors = traj.errors();
    let ensemble = match traj {
        Trajectory::Ensemble(e) => Some(e),
        Trajectory::Deterministic(_) => None,
    };
    let d = values.first().map_or(0, |m| m.nrows());
    let with_err = errors.is_some();
    let mut header = vec!["t".to_string()];
    let push = |name: String, header: &mut Vec<String>| {
        if with_err {
            header.push(name.clone());
            header.push(format!("{name}_stderr"));
        } else {
            header.push(name);
        }
    };
    push("trace".into(), &mut header);
    for o in observables {
        push(o.name.clone(), &mut header);
    }
    for i in 0..d {
        for j in i..d {
            push(format!("re_rho_{i}_{j}"), &mut header);
            push(format!("im_rho_{i}_{j}"), &mut header);
        }
    }
    let obs_stats: Vec<Vec<(C64, f64)>> = match ensemble {
        Some(e) => observables.iter().map(|o| e.expectation(&o.op)).collect(),
        None => observables
            .iter()
            .map(|o| values.iter().map(|r| ((&o.op * r).trace(), 0.0)).collect())
            .collect(),
    };
    let mut rows = Vec::with_capacity(values.len());
    for (k, (&t, rho)) in traj.times().iter().zip(values).enumerate() {
        let mut row = vec![t];
        row.push(rho.trace().re);
        if let Some(e) = ensemble {
            row.push(e.trace_stderr(k));
        }
        for stats in &obs_stats {
            row.push(stats[k].0.re);
            if with_err {
                row.push(stats[k].1);
            }
        }
        for i in 0..d {
            for j in i..d {
                let z = rho[(i, j)];
                let se = errors.map(|e| e[k][(i, j)]);
                row.push(z.re);
                if let Some(se) = se {
                    row.push(se.re);
                }
                row.push(z.im);
                if let Some(se) = se {
                    row.push(se.im);
                }
            }
        }
        rows.push(row);
    }
    Table { header, rows }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Validation(format!("csv: {e}"))
}

pub fn write_table(path: &Path, table: &Table) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(&table.header).map_err(csv_error)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|&x| format_float(x)))
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timeseries<'a>(
    path: &Path,
    traj: impl Into<Trajectory<'a>>,
    observables: &[Observable],
) -> Result<()> {
    write_table(path, &timeseries_table(traj, observables))
}

pub fn read_timeseries(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let header: Vec<String> = r
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    if header.first().map(String::as_str) != Some("t") {
        return Err(Error::Validation(format!(
            "{}: header must start with t",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Validation(format!("{} row {}: {e}", path.display(), line + 2)))?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// JSON sidecar written next to every CSV file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMetadata {
    pub schema_version: u32,
    pub backend: String,
    /// RFC 3339 creation time; the only field that differs between reruns.
    pub timestamp: String,
    pub seed: Option<u64>,
    pub trajectories: Option<usize>,
    pub construction: Option<String>,
    pub diagnostics: Diagnostics,
    /// Free-form run description (configuration echo, fit summaries).
    pub extra: serde_json::Value,
}

pub fn now_rfc3339() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_else(|_| "unknown".into())
}

impl RunMetadata {
    pub fn for_trajectory<'a>(traj: impl Into<Trajectory<'a>>, extra: serde_json::Value) -> Self {
        let (backend, seed, n, construction, diagnostics) = match traj.into() {
            Trajectory::Deterministic(r) => {
                (r.backend.clone(), None, None, None, r.diagnostics.clone())
            }
            Trajectory::Ensemble(e) => (
                e.backend.clone(),
                Some(e.master_seed),
                Some(e.trajectories),
                e.construction.clone(),
                e.diagnostics.clone(),
            ),
        };
        Self {
            schema_version: SCHEMA_VERSION,
            backend,
            timestamp: now_rfc3339(),
            seed,
            trajectories: n,
            construction,
            diagnostics,
            extra,
        }
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Validation(format!("json: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

/// Writes `<stem>.csv`, `<stem>.json` and optionally a gnuplot script
/// `<stem>.gp` plotting every non-error column against t.
pub fn emit_timeseries<'a>(
    dir: &Path,
    stem: &str,
    traj: impl Into<Trajectory<'a>>,
    observables: &[Observable],
    extra: serde_json::Value,
    plot: bool,
) -> Result<()> {
    let traj = traj.into();
    fs::create_dir_all(dir)?;
    let table = timeseries_table(traj, observables);
    write_table(&dir.join(format!("{stem}.csv")), &table)?;
    write_json(
        &dir.join(format!("{stem}.json")),
        &RunMetadata::for_trajectory(traj, extra),
    )?;
    if plot {
        let mut script = format!(
            "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't'\nplot \\\n"
        );
        let cols: Vec<usize> = (1..table.header.len())
            .filter(|&k| !table.header[k].ends_with("_stderr"))
            .collect();
        for (n, k) in cols.iter().enumerate() {
            let sep = if n + 1 < cols.len() { ", \\" } else { "" };
            script.push_str(&format!(
                "  '{stem}.csv' using 1:{} with lines{sep}\n",
                k + 1
            ));
        }
        fs::write(dir.join(format!("{stem}.gp")), script)?;
    }
    Ok(())
}

fn topology_name(t: Topology) -> &'static str {
    match t {
        Topology::Star => "star",
        Topology::Chain => "chain",
        Topology::General => "general",
    }
}

/// Mode-set file: `K`, `topology` and `tolerance` header lines, then a
/// `kind,i,j,re,im` table holding the nonzero entries of E as triplets
/// followed by every kappa and eta entry.
pub fn write_modeset(path: &Path, set: &EffectiveModeSet, tolerance: f64) -> Result<()> {
    let mut out = format!(
        "K,{}\ntopology,{}\ntolerance,{}\nkind,i,j,re,im\n",
        set.len(),
        topology_name(set.topology),
        format_float(tolerance)
    );
    let row = |kind: &str, i: usize, j: usize, z: C64| {
        format!(
            "{kind},{i},{j},{},{}\n",
            format_float(z.re),
            format_float(z.im)
        )
    };
    for i in 0..set.len() {
        for j in 0..set.len() {
            if set.e[(i, j)] != C64::new(0.0, 0.0) {
                out.push_str(&row("E", i, j, set.e[(i, j)]));
            }
        }
    }
    for i in 0..set.len() {
        out.push_str(&row("kappa", i, 0, set.kappa[i]));
    }
    for i in 0..set.len() {
        out.push_str(&row("eta", i, 0, set.eta[i]));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a mode-set file back; returns the set and the recorded tolerance.
pub fn read_modeset(path: &Path) -> Result<(EffectiveModeSet, f64)> {
    let text = fs::read_to_string(path)?;
    let bad =
        |line: usize, m: &str| Error::Validation(format!("{} line {line}: {m}", path.display()));
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l));
    let mut header = |key: &str| -> Result<String> {
        let (n, l) = lines.next().ok_or_else(|| bad(0, "truncated header"))?;
        l.strip_prefix(key)
            .and_then(|r| r.strip_prefix(','))
            .map(str::to_string)
            .ok_or_else(|| bad(n, &format!("expected {key}")))
    };
    let k: usize = header("K")?
        .parse()
        .map_err(|_| bad(1, "K is not an integer"))?;
    let topology = match header("topology")?.as_str() {
        "star" => Topology::Star,
        "chain" => Topology::Chain,
        "general" => Topology::General,
        other => return Err(bad(2, &format!("unknown topology {other:?}"))),
    };
    let tolerance: f64 = header("tolerance")?
        .parse()
        .map_err(|_| bad(3, "tolerance is not a number"))?;
    header("kind")?;
    let (mut e, mut kappa, mut eta) = (CMat::zeros(k, k), CVec::zeros(k), CVec::zeros(k));
    for (n, l) in lines {
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 5 {
            return Err(bad(n, "expected kind,i,j,re,im"));
        }
        let idx = |s: &str| {
            s.parse::<usize>()
                .ok()
                .filter(|&i| i < k)
                .ok_or_else(|| bad(n, "index out of range"))
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n, "not a number"));
        let (i, j, z) = (idx(f[1])?, idx(f[2])?, C64::new(num(f[3])?, num(f[4])?));
        match f[0] {
            "E" => e[(i, j)] = z,
            "kappa" => kappa[i] = z,
            "eta" => eta[i] = z,
            other => return Err(bad(n, &format!("unknown kind {other:?}"))),
        }
    }
    Ok((EffectiveModeSet::new(e, kappa, eta, topology)?, tolerance))
}
