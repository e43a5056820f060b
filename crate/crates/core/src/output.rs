//! Plot-ready CSV files and JSON metadata.
//!
//! Numbers are written with 9 significant digits (`{:.8e}`), so identical runs
//! give byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::atom::{DensityMatrix, Level};
use crate::config::{Format, RunConfig};
use crate::error::{Error, Result};
use crate::experiments::{ScanRecord, ScanResult};
use crate::propagation::PropagationResult;
use crate::pulses::ChannelEnvelope;

pub const SCAN_HEADER: &str = "param,efficiency";
pub const ENVELOPE_HEADER: &str =
    "t_ns,abs_omega_ac,abs_omega_ab,re_omega_ac,im_omega_ac,re_omega_ab,im_omega_ab";
pub const TRAJECTORY_HEADER: &str =
    "t_ns,rho_aa,rho_bb,rho_cc,re_rho_ab,im_rho_ab,re_rho_ac,im_rho_ac,re_rho_bc,im_rho_bc";

fn row(out: &mut String, values: &[f64]) {
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        write!(out, "{v:.8e}").unwrap();
    }
    out.push('\n');
}

pub fn scan_csv(records: &[ScanRecord]) -> String {
    let mut out = format!("{SCAN_HEADER}\n");
    for r in records {
        row(&mut out, &[r.param, r.efficiency]);
    }
    out
}

/// Inverse of [`scan_csv`].
pub fn parse_scan_csv(text: &str) -> Result<Vec<ScanRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(SCAN_HEADER) {
        return Err(Error::Parse {
            path: "csv".into(),
            message: format!("expected header `{SCAN_HEADER}`"),
        });
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let bad = || Error::Parse {
                path: format!("csv line {}", k + 2),
                message: format!("bad row `{line}`"),
            };
            let (p, e) = line.split_once(',').ok_or_else(bad)?;
            Ok(ScanRecord {
                param: p.parse().map_err(|_| bad())?,
                efficiency: e.parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

pub fn envelope_csv(env: &ChannelEnvelope) -> String {
    let mut out = format!("{ENVELOPE_HEADER}\n");
    for (k, s) in env.samples().iter().enumerate() {
        let (ac, ab) = (s.omega_ac, s.omega_ab);
        row(
            &mut out,
            &[
                env.time(k),
                ac.norm(),
                ab.norm(),
                ac.re,
                ac.im,
                ab.re,
                ab.im,
            ],
        );
    }
    out
}

pub fn trajectory_csv(dt: f64, trajectory: &[DensityMatrix]) -> String {
    let mut out = format!("{TRAJECTORY_HEADER}\n");
    for (k, rho) in trajectory.iter().enumerate() {
        let (ab, ac, bc) = (
            rho.element(Level::A, Level::B),
            rho.element(Level::A, Level::C),
            rho.element(Level::B, Level::C),
        );
        row(
            &mut out,
            &[
                k as f64 * dt,
                rho.population(Level::A),
                rho.population(Level::B),
                rho.population(Level::C),
                ab.re,
                ab.im,
                ac.re,
                ac.im,
                bc.re,
                bc.im,
            ],
        );
    }
    out
}

/// What to serialize.
pub enum Results<'a> {
    Scan {
        scan: &'a ScanResult,
        /// Fits and checks derived from the scan.
        summary: Value,
    },
    Simulation {
        run: &'a PropagationResult,
        /// Probe-induced part of the exit fields, if computed.
        generated: Option<&'a PropagationResult>,
        summary: Value,
    },
}

/// Write `results` into `dir` (created if missing) and return the paths written.
///
/// Scans produce `<kind>_scan.csv`; simulations produce `entry.csv`, `exit.csv`,
/// optionally `generated.csv`, and one `rho_slice<j>.csv` per stored
/// trajectory. The JSON file echoes the full configuration.
pub fn serialize_results(
    results: &Results,
    config: &RunConfig,
    dir: &Path,
    formats: &[Format],
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(String, String)> = Vec::new();
    let csv = formats.contains(&Format::Csv);
    let stem = match results {
        Results::Scan { scan, summary } => {
            let stem = format!("{}_scan", scan.metadata.kind.name());
            if csv {
                files.push((format!("{stem}.csv"), scan_csv(&scan.records)));
            }
            if formats.contains(&Format::Json) {
                let doc = json!({
                    "config": config,
                    "metadata": scan.metadata,
                    "records": scan.records,
                    "summary": summary,
                });
                files.push((format!("{stem}.json"), pretty(&doc)));
            }
            stem
        }
        Results::Simulation {
            run,
            generated,
            summary,
        } => {
            if csv {
                files.push(("entry.csv".into(), envelope_csv(&run.entry)));
                files.push(("exit.csv".into(), envelope_csv(&run.exit)));
                if let Some(g) = generated {
                    files.push(("generated.csv".into(), envelope_csv(&g.exit)));
                }
                for (slice, trajectory) in &run.rho_snapshots {
                    files.push((
                        format!("rho_slice{slice}.csv"),
                        trajectory_csv(run.entry.dt(), trajectory),
                    ));
                }
            }
            if formats.contains(&Format::Json) {
                let doc = json!({
                    "config": config,
                    "convergence": run.convergence,
                    "samples": run.entry.len(),
                    "summary": summary,
                });
                files.push(("simulation.json".into(), pretty(&doc)));
            }
            "simulation".into()
        }
    };
    log::debug!(
        "writing {} file(s) for {stem} into {}",
        files.len(),
        dir.display()
    );
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

fn pretty(doc: &Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("metadata serializes");
    s.push('\n');
    s
}
