//! Declarative Monte Carlo experiments.
//!
//! An [`ExperimentSpec`] (usually read from a TOML file) fixes the network,
//! the parameter grid, the trial count and a master seed. [`run`] executes
//! the trials on a thread pool and returns summary tables; [`replay`] reruns
//! one trial in isolation.
//!
//! Random draws come from the seed tree
//! `master_seed → kind → trial → role` (spectrum-only kinds add the grid
//! coordinates), so results do not depend on worker count or scheduling.
//! Within a trial, the same channel, noise and signal draws are shared
//! across `m`, SNR and the two arms of the homogeneous comparison: the
//! `m`-measurement matrix is the first `m` rows of the largest draw,
//! rescaled.

pub mod config;
pub mod output;
mod runners;
pub mod stats;

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

pub use config::{
    BoundSettings, ExperimentKind, ExperimentSpec, NetworkSpec, PowerSpec, SolverSettings, SweepGrid, TailSettings,
};
pub use output::{Cell, Header, Table, TOOLKIT_VERSION};
pub use runners::{grid_points, replay, run};

use crate::error::{Error, Result};

/// Which power pattern a solve used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    /// The configured network.
    Network,
    /// Constant `γ` at the same average SNR.
    Homogeneous,
    /// The configured network, paired against [`Arm::Homogeneous`].
    Inhomogeneous,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Network => "network",
            Arm::Homogeneous => "homogeneous",
            Arm::Inhomogeneous => "inhomogeneous",
        }
    }
}

/// Coordinates of one grid point; axes the kind does not sweep are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct GridPoint {
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub snr_db: Option<f64>,
    pub d: Option<f64>,
    pub n: Option<usize>,
    pub t: Option<f64>,
    pub epsilon: Option<f64>,
}

/// Outcome of one trial at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub experiment: ExperimentKind,
    pub grid_index: usize,
    pub point: GridPoint,
    pub arm: Option<Arm>,
    pub trial: u64,
    /// Identifier of the trial's seed-tree node.
    pub seed: u64,
    pub mse: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub residual: Option<f64>,
    pub rho_max: Option<f64>,
    pub rho_min: Option<f64>,
    /// Wall time; never written to CSV.
    pub elapsed_us: u64,
}

impl TrialRecord {
    pub const COLUMNS: [&'static str; 17] = [
        "experiment",
        "grid_index",
        "m",
        "k",
        "snr_db",
        "d",
        "n",
        "t",
        "arm",
        "trial",
        "seed",
        "mse",
        "iterations",
        "converged",
        "residual",
        "rho_max",
        "rho_min",
    ];

    fn row(&self) -> Vec<Cell> {
        let p = &self.point;
        vec![
            self.experiment.as_str().into(),
            self.grid_index.into(),
            p.m.into(),
            p.k.into(),
            p.snr_db.into(),
            p.d.into(),
            p.n.into(),
            p.t.into(),
            self.arm.map(Arm::as_str).into(),
            self.trial.into(),
            Cell::Text(format!("{:016x}", self.seed)),
            self.mse.into(),
            self.iterations.into(),
            self.converged.into(),
            self.residual.into(),
            self.rho_max.into(),
            self.rho_min.into(),
        ]
    }
}

/// Tables and metadata of a finished run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub kind: ExperimentKind,
    pub spec_hash: String,
    pub master_seed: u64,
    /// The first table is the main summary.
    pub tables: Vec<Table>,
    /// Per-trial records, ordered by grid point, arm and trial. Empty for
    /// the tail kinds.
    pub records: Vec<TrialRecord>,
    /// Kind-specific scalar results.
    pub summary: serde_json::Value,
    pub solves: u64,
    pub nonconverged: u64,
    pub elapsed: Duration,
    pub workers: usize,
}

impl RunOutput {
    pub fn header(&self) -> Header {
        Header {
            version: TOOLKIT_VERSION.into(),
            kind: self.kind.as_str().into(),
            spec_hash: self.spec_hash.clone(),
            master_seed: self.master_seed,
        }
    }

    pub fn main(&self) -> &Table {
        &self.tables[0]
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn records_table(&self) -> Table {
        let mut t = Table::new("trials", &TrialRecord::COLUMNS);
        for r in &self.records {
            t.push(r.row());
        }
        t
    }

    /// Fully rendered CSV of a named table (`"trials"` for the records).
    pub fn csv(&self, name: &str) -> Option<String> {
        if name == "trials" {
            return (!self.records.is_empty()).then(|| output::render_csv(&self.header(), &self.records_table()));
        }
        self.table(name).map(|t| output::render_csv(&self.header(), t))
    }

    pub fn nonconverged_fraction(&self) -> f64 {
        if self.solves == 0 {
            0.0
        } else {
            self.nonconverged as f64 / self.solves as f64
        }
    }

    /// Fails when the non-converged fraction exceeds `threshold`.
    pub fn check_convergence(&self, threshold: f64) -> Result<()> {
        if self.nonconverged_fraction() > threshold {
            return Err(Error::NonConvergence { failed: self.nonconverged, total: self.solves, threshold });
        }
        Ok(())
    }

    /// Writes the main CSV at `path`, extra tables and per-trial records as
    /// `<stem>.<table>.csv`, and the JSON sidecar as `<stem>.json`.
    pub fn write(&self, path: &Path) -> Result<Vec<PathBuf>> {
        let header = self.header();
        let mut written = Vec::new();
        for (i, table) in self.tables.iter().enumerate() {
            let target = if i == 0 { path.to_path_buf() } else { output::sibling_path(path, &table.name, "csv") };
            output::write_text(&target, &output::render_csv(&header, table))?;
            written.push(target);
        }
        if !self.records.is_empty() {
            let target = output::sibling_path(path, "trials", "csv");
            output::write_text(&target, &output::render_csv(&header, &self.records_table()))?;
            written.push(target);
        }
        let files: Vec<String> = written
            .iter()
            .filter_map(|p| p.file_name().and_then(|s| s.to_str()).map(String::from))
            .collect();
        let sidecar = serde_json::json!({
            "version": header.version,
            "kind": header.kind,
            "spec_sha256": header.spec_hash,
            "master_seed": header.master_seed,
            "workers": self.workers,
            "elapsed_seconds": self.elapsed.as_secs_f64(),
            "solves": self.solves,
            "nonconverged": self.nonconverged,
            "files": files,
            "summary": self.summary,
        });
        let target = output::sibling_path(path, "", "json");
        output::write_text(&target, &serde_json::to_string_pretty(&sidecar)?)?;
        written.push(target);
        Ok(written)
    }
}
