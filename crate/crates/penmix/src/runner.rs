//! Parallel execution of a consistency study and its on-disk artifacts.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use penmix_core::experiments::{run_replicate, summarize, CellSummary, ExperimentConfig, ReplicateRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{to_json, write_file};
use crate::plot::{Axis, Plot, Series};
use crate::wire::{CellDoc, SummaryDoc};

pub struct StudyRun {
    /// In task order: pen, then n, then replicate.
    pub records: Vec<ReplicateRecord>,
    /// Wall-clock seconds per record, when timing was requested.
    pub seconds: Option<Vec<f64>>,
    pub cells: Vec<CellSummary>,
}

/// Runs every `(pen, n, replicate)` task on `jobs` threads (all cores when
/// `None`). Records are reduced in task order, so the result does not
/// depend on scheduling.
pub fn run_study(cfg: &ExperimentConfig, jobs: Option<usize>, timing: bool) -> Result<StudyRun> {
    cfg.validate().context("invalid experiment config")?;
    let tasks = cfg.tasks();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build()?;
    let timed: Vec<(ReplicateRecord, f64)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(p, n, r)| {
                let start = Instant::now();
                let rec = run_replicate(cfg, p, n, r);
                (rec, start.elapsed().as_secs_f64())
            })
            .collect()
    });
    let (records, secs): (Vec<_>, Vec<_>) = timed.into_iter().unzip();
    let cells = summarize(cfg, &records);
    Ok(StudyRun { records, seconds: timing.then_some(secs), cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub pen_id: usize,
    pub n: usize,
    pub replicate: usize,
    /// Empty when the fit failed.
    pub distance: Option<f64>,
    pub status: String,
    pub seconds: Option<f64>,
}

impl StudyRun {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| ReportRow {
                pen_id: r.pen_id,
                n: r.n,
                replicate: r.replicate,
                distance: (!r.distance.is_nan()).then_some(r.distance),
                status: r.status.as_str().to_string(),
                seconds: self.seconds.as_ref().map(|s| s[i]),
            })
            .collect()
    }

    pub fn summary(&self, cfg: &ExperimentConfig) -> SummaryDoc {
        let cells = self
            .cells
            .iter()
            .map(|c| {
                let mean = self.seconds.as_ref().map(|secs| {
                    let mine: Vec<f64> = self
                        .records
                        .iter()
                        .zip(secs)
                        .filter(|(r, _)| r.pen_id == c.pen_id && r.n == c.n)
                        .map(|(_, &s)| s)
                        .collect();
                    mine.iter().sum::<f64>() / mine.len().max(1) as f64
                });
                CellDoc::new(c, mean)
            })
            .collect();
        SummaryDoc { base_seed: cfg.base_seed, replicates: cfg.replicates, n_grid: cfg.n_grid.clone(), cells }
    }

    pub fn report_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in self.rows() {
            w.serialize(row)?;
        }
        if self.records.is_empty() {
            w.write_record(["pen_id", "n", "replicate", "distance", "status", "seconds"])?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    /// Median distance against `n` on log-log axes, one series per penalty.
    pub fn median_plot(&self, cfg: &ExperimentConfig) -> Plot {
        let series = cfg
            .pens
            .iter()
            .enumerate()
            .map(|(p, pen)| Series {
                label: format!("{p}: {}", pen.regime.name()),
                points: self.cells.iter().filter(|c| c.pen_id == p).map(|c| (c.n as f64, c.median)).collect(),
            })
            .collect();
        Plot {
            title: "Median distance to the true parameter".into(),
            x: Axis::log("sample size n"),
            y: Axis::log("median distance"),
            series,
        }
    }

    /// Writes `report.csv`, `summary.json` and `median_distance.svg`.
    pub fn write(&self, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
        write_file(dir, "report.csv", &self.report_csv()?)?;
        write_file(dir, "summary.json", &to_json(&self.summary(cfg))?)?;
        write_file(dir, "median_distance.svg", &self.median_plot(cfg).render())
    }
}
