use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::game::OrgProfile;
use crate::marl::{self, final_quartile_overall, Mode};
use crate::seeds;

use super::config::ExperimentConfig;
use super::output::{emit_csv, emit_svg, Chart, EventLog, MetricsRow, Series};

/// End-of-run numbers for one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: Mode,
    pub label: String,
    pub batches: usize,
    pub final_quartile_overall: f64,
    pub final_contribution: Vec<f64>,
    pub final_precision: f64,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub run_id: String,
    pub dir: PathBuf,
    pub rows: Vec<MetricsRow>,
    pub summaries: Vec<ModeSummary>,
}

impl RunArtifacts {
    pub fn summary(&self, mode: Mode) -> Option<&ModeSummary> {
        self.summaries.iter().find(|s| s.mode == mode)
    }
}

/// Organizations of a run, drawn from the `org-params` substream.
pub fn sample_orgs(cfg: &ExperimentConfig) -> Vec<OrgProfile> {
    let mut rng = seeds::substream(cfg.seed, "org-params");
    cfg.orgs.sample_orgs(cfg.num_orgs, &mut rng)
}

/// Stable identifier of (config, modes); seeds are part of the config.
pub fn run_id(cfg: &ExperimentConfig, modes: &[Mode]) -> String {
    let names: Vec<&str> = modes.iter().map(|m| m.name()).collect();
    let key = format!("{}|{}", cfg.dump(), names.join(","));
    format!("run-{:016x}", seeds::substream_seed(cfg.seed, &key))
}

/// Creates `parent/base`, or `parent/base-1`, `parent/base-2`, ... if taken.
pub fn fresh_dir(parent: &Path, base: &str) -> Result<PathBuf> {
    fs::create_dir_all(parent)?;
    for k in 0.. {
        let name = if k == 0 { base.to_string() } else { format!("{base}-{k}") };
        let dir = parent.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

/// Trains every requested mode and writes `metrics.csv`, `events.jsonl`,
/// `checkpoints/` and `payoffs.svg` under a fresh `out_dir/<run-id>`.
///
/// `modes` overrides `config.trainer.modes` when given.
pub fn cmd_run(config: &ExperimentConfig, out_dir: &Path, modes: Option<&[Mode]>) -> Result<RunArtifacts> {
    config.validate()?;
    let modes: Vec<Mode> = modes.unwrap_or(&config.trainer.modes).to_vec();
    if modes.is_empty() {
        return Err(Error::param("modes", "need at least one mode"));
    }
    let run_id = run_id(config, &modes);
    let dir = fresh_dir(out_dir, &run_id)?;
    let mut events = EventLog::create(&dir.join("events.jsonl"))?;
    events.record("config", config)?;
    events.record(
        "seeds",
        json!({
            "master": config.seed,
            "org-params": seeds::substream_seed(config.seed, "org-params"),
            "env/0": seeds::substream_seed(config.seed, "env/0"),
        }),
    )?;
    let orgs = sample_orgs(config);
    events.record("orgs", &orgs)?;

    let env_config = config.env_config();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut series = Vec::new();
    for &mode in &modes {
        events.record("mode_start", json!({"mode": mode, "label": mode.label()}))?;
        let outcome = match marl::train(&env_config, &config.trainer, mode, &orgs, config.seed, |_| {}) {
            Ok(o) => o,
            Err(e) => {
                events.record("abort", json!({"mode": mode, "cause": e.to_string()}))?;
                return Err(e);
            }
        };
        rows.extend(
            outcome
                .metrics
                .iter()
                .map(|m| MetricsRow::from_batch(&run_id, mode, config.seed, m)),
        );
        if !outcome.agents.is_empty() {
            let ck = dir.join("checkpoints");
            fs::create_dir_all(&ck)?;
            for (n, agent) in outcome.agents.iter().enumerate() {
                agent.actor.net.save(&ck.join(format!("{}-agent{n}-actor.bin", mode.name())))?;
                agent.critic.net.save(&ck.join(format!("{}-agent{n}-critic.bin", mode.name())))?;
            }
        }
        let last = outcome.metrics.last();
        let summary = ModeSummary {
            mode,
            label: mode.label().to_string(),
            batches: outcome.metrics.len(),
            final_quartile_overall: final_quartile_overall(&outcome.metrics),
            final_contribution: last.map(|m| m.contribution.clone()).unwrap_or_default(),
            final_precision: last.map_or(f64::NAN, |m| m.precision),
        };
        events.record("summary", &summary)?;
        series.push(Series::new(
            mode.label(),
            outcome
                .metrics
                .iter()
                .map(|m| (m.batch as f64, m.overall_payoff))
                .collect(),
        ));
        summaries.push(summary);
    }
    emit_csv(&rows, &dir.join("metrics.csv"))?;
    emit_svg(
        &Chart {
            title: "Overall payoff per batch".into(),
            x_label: "batch".into(),
            y_label: "overall payoff".into(),
            series,
        },
        &dir.join("payoffs.svg"),
    )?;
    events.record("done", json!({"rows": rows.len()}))?;
    Ok(RunArtifacts {
        run_id,
        dir,
        rows,
        summaries,
    })
}

pub const DEFAULT_SWEEP_ALPHAS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];
pub const DEFAULT_SWEEP_SEEDS: [u64; 3] = [0, 1, 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub alpha0: f64,
    pub seed: u64,
    pub overall_payoff: f64,
    pub run_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub mode: Mode,
    pub alphas: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Argmax α0 of each seed, in seed order.
    pub per_seed_argmax: Vec<f64>,
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub argmax_mean: f64,
    pub monotone: bool,
    /// The mean curve peaks strictly inside the α0 range.
    pub interior_max: bool,
}

#[derive(Debug, Clone)]
pub struct SweepArtifacts {
    pub dir: PathBuf,
    pub cells: Vec<SweepCell>,
    pub summary: SweepSummary,
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Aggregates cells given in (α0, seed) order.
pub fn summarize_sweep(mode: Mode, alphas: &[f64], seeds: &[u64], cells: &[SweepCell]) -> SweepSummary {
    let s = seeds.len();
    let value = |a: usize, k: usize| cells[a * s + k].overall_payoff;
    let per_seed_argmax = (0..s)
        .map(|k| {
            let curve: Vec<f64> = (0..alphas.len()).map(|a| value(a, k)).collect();
            alphas[argmax(&curve)]
        })
        .collect();
    let column = |a: usize| (0..s).map(move |k| value(a, k));
    let mean: Vec<f64> = (0..alphas.len()).map(|a| column(a).sum::<f64>() / s as f64).collect();
    let min = (0..alphas.len()).map(|a| column(a).fold(f64::INFINITY, f64::min)).collect();
    let max = (0..alphas.len()).map(|a| column(a).fold(f64::NEG_INFINITY, f64::max)).collect();
    let best = argmax(&mean);
    let up = mean.windows(2).all(|w| w[1] >= w[0]);
    let down = mean.windows(2).all(|w| w[1] <= w[0]);
    SweepSummary {
        mode,
        alphas: alphas.to_vec(),
        seeds: seeds.to_vec(),
        per_seed_argmax,
        argmax_mean: alphas[best],
        interior_max: best != 0 && best + 1 != mean.len(),
        monotone: up || down,
        mean,
        min,
        max,
    }
}

/// Runs one training run per (α0, seed) cell with the first configured
/// mode and writes `sweep.csv`, `sweep.svg` and `summary.json`.
pub fn cmd_sweep_alpha(
    config: &ExperimentConfig,
    alphas: &[f64],
    seeds: &[u64],
    out_dir: &Path,
) -> Result<SweepArtifacts> {
    config.validate()?;
    if alphas.len() < 2 {
        return Err(Error::param("alphas", "need at least two alpha0 values"));
    }
    if seeds.is_empty() {
        return Err(Error::param("seeds", "need at least one seed"));
    }
    if let Some(bad) = alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::param("alphas", format!("{bad} is not a finite value >= 0")));
    }
    let mode = config.trainer.modes[0];
    let key = format!("{}|{alphas:?}|{seeds:?}", config.dump());
    let dir = fresh_dir(
        out_dir,
        &format!("sweep-{:016x}", crate::seeds::substream_seed(config.seed, &key)),
    )?;
    let cells_dir = dir.join("cells");
    let grid: Vec<(f64, u64)> = alphas
        .iter()
        .flat_map(|&a| seeds.iter().map(move |&s| (a, s)))
        .collect();
    let cells = grid
        .par_iter()
        .map(|&(alpha0, seed)| {
            let mut cfg = config.clone();
            cfg.alpha.alpha0 = alpha0;
            cfg.seed = seed;
            cfg.validate()?;
            let run = cmd_run(&cfg, &cells_dir, Some(&[mode]))?;
            Ok(SweepCell {
                alpha0,
                seed,
                overall_payoff: run.summaries[0].final_quartile_overall,
                run_id: run.run_id,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(dir.join("sweep.csv"))?;
    w.write_record(["alpha0", "seed", "overall_payoff", "run_id"])?;
    for c in &cells {
        w.write_record([
            c.alpha0.to_string(),
            c.seed.to_string(),
            c.overall_payoff.to_string(),
            c.run_id.clone(),
        ])?;
    }
    w.flush()?;

    let summary = summarize_sweep(mode, alphas, seeds, &cells);
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    let mut mean = Series::new(format!("{} mean", mode.label()), Vec::new());
    for (i, &a) in alphas.iter().enumerate() {
        mean.points.push((a, summary.mean[i]));
        mean.band.push((a, summary.min[i], summary.max[i]));
    }
    emit_svg(
        &Chart {
            title: "Converged overall payoff vs initial intensity".into(),
            x_label: "alpha0".into(),
            y_label: "overall payoff (mean, seed range)".into(),
            series: vec![mean],
        },
        &dir.join("sweep.svg"),
    )?;
    Ok(SweepArtifacts { dir, cells, summary })
}
