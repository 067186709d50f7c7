//! On-disk artifacts of a run: per-seed CSV traces, a cross-seed
//! aggregate, sweep comparisons, and a TOML manifest carrying the config
//! snapshot, its content hash, derived parameters, and regime warnings.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use ppsl_core::metrics::RunTrace;

use crate::config::{ConditionReport, EpsilonSpec, ExperimentConfig, QualityMode};
use crate::runner::PreparedRun;

/// Fixed per-seed trace header: `round,q_1..q_m,d_total,slots,messages,
/// running_regret`.
pub fn trace_header(m: usize) -> Vec<String> {
    let mut header = vec!["round".to_string()];
    header.extend((1..=m).map(|j| format!("q_{j}")));
    header.extend(
        ["d_total", "slots", "messages", "running_regret"]
            .iter()
            .map(|s| s.to_string()),
    );
    header
}

pub fn seed_trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("trace_seed_{seed}.csv"))
}

pub fn write_seed_trace(dir: &Path, seed: u64, trace: &RunTrace, m: usize) -> Result<PathBuf> {
    let path = seed_trace_path(dir, seed);
    let mut writer =
        csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    writer.write_record(trace_header(m))?;
    for (metrics, regret) in trace.rounds().iter().zip(trace.running_regret()) {
        let mut record = vec![metrics.round.to_string()];
        record.extend(metrics.popularity.q.iter().map(|q| format!("{q}")));
        record.push(metrics.popularity.d_total.to_string());
        record.push(metrics.slots.to_string());
        record.push(metrics.total_messages.to_string());
        record.push(format!("{regret}"));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(path)
}

/// Cross-seed aggregate: per-round mean and (population) standard
/// deviation of the running regret and of the raw increments.
pub fn write_aggregate(dir: &Path, traces: &[(u64, RunTrace)]) -> Result<PathBuf> {
    let path = dir.join("aggregate.csv");
    let mut writer = csv::Writer::from_path(&path)?;
    writer.write_record([
        "round",
        "running_regret_mean",
        "running_regret_std",
        "increment_mean",
        "increment_std",
    ])?;
    let rounds = traces
        .iter()
        .map(|(_, t)| t.rounds().len())
        .min()
        .unwrap_or(0);
    let k = traces.len() as f64;
    for r in 0..rounds {
        let regrets: Vec<f64> = traces.iter().map(|(_, t)| t.running_regret()[r]).collect();
        let increments: Vec<f64> = traces
            .iter()
            .map(|(_, t)| t.rounds()[r].regret_increment)
            .collect();
        let stats = |xs: &[f64]| {
            let mean = xs.iter().sum::<f64>() / k;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / k;
            (mean, var.sqrt())
        };
        let (rm, rs) = stats(&regrets);
        let (im, is) = stats(&increments);
        writer.write_record([
            (r + 1).to_string(),
            format!("{rm}"),
            format!("{rs}"),
            format!("{im}"),
            format!("{is}"),
        ])?;
    }
    writer.flush()?;
    Ok(path)
}

/// Content address of a config: SHA-256 over its canonical TOML form.
pub fn content_hash(cfg: &ExperimentConfig) -> String {
    let canonical = cfg.to_toml();
    let digest = Sha256::digest(canonical.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

#[derive(Serialize)]
struct Manifest<'a> {
    format: &'static str,
    content_hash: String,
    complete: bool,
    conditions_all_hold: bool,
    warnings: &'a [String],
    parameters: ManifestParams,
    privacy: ManifestPrivacy,
    conditions: &'a ConditionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    results: Option<ManifestResults>,
    config: &'a ExperimentConfig,
}

#[derive(Serialize)]
struct ManifestResults {
    /// Final running regret per seed, aligned with `parameters.seeds`.
    final_running_regret: Vec<f64>,
    /// Rounds cut short by the slot cap, per seed.
    truncated_rounds: Vec<u32>,
}

#[derive(Serialize)]
struct ManifestParams {
    n: usize,
    m: usize,
    etas: Vec<f64>,
    epsilon: EpsilonSpec,
    beta: f64,
    mu: f64,
    delta: f64,
    sigma: f64,
    h: f64,
    theoretical_h: f64,
    g_value: f64,
    cap: usize,
    walk_length: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    spectral_gap: Option<f64>,
    alpha: f64,
    rounds: u32,
    seeds: Vec<u64>,
    quality_mode: QualityMode,
}

#[derive(Serialize)]
struct ManifestPrivacy {
    per_round_epsilon: EpsilonSpec,
    /// Composed loss over the whole run: rounds * epsilon.
    total_loss: EpsilonSpec,
}

/// Writes the manifest. `results = None` marks a run that has not (yet)
/// finished: partial outputs stay flagged incomplete.
pub fn write_manifest(
    dir: &Path,
    cfg: &ExperimentConfig,
    prep: &PreparedRun,
    results: Option<&[(u64, RunTrace)]>,
) -> Result<PathBuf> {
    let p = &prep.params;
    let epsilon = p.protocol.epsilon();
    let manifest = Manifest {
        format: "ppsl-manifest-v1",
        content_hash: content_hash(cfg),
        complete: results.is_some(),
        conditions_all_hold: p.conditions.all_hold(),
        warnings: &prep.warnings,
        parameters: ManifestParams {
            n: p.n,
            m: p.opts.m(),
            etas: p.opts.etas().to_vec(),
            epsilon: EpsilonSpec(epsilon),
            beta: p.protocol.beta(),
            mu: p.protocol.mu(),
            delta: p.protocol.delta(),
            sigma: p.sigma,
            h: p.h,
            theoretical_h: 16.0 * p.sigma / (1.0 - p.protocol.beta()),
            g_value: p.g_value,
            cap: p.cap,
            walk_length: prep.walk_len,
            spectral_gap: prep.spectral_gap,
            alpha: p.alpha,
            rounds: p.rounds,
            seeds: p.seeds.clone(),
            quality_mode: p.quality_mode,
        },
        privacy: ManifestPrivacy {
            per_round_epsilon: EpsilonSpec(epsilon),
            total_loss: EpsilonSpec(if p.rounds == 0 {
                0.0
            } else {
                p.rounds as f64 * epsilon
            }),
        },
        conditions: &p.conditions,
        results: results.map(|traces| ManifestResults {
            final_running_regret: traces
                .iter()
                .map(|(_, t)| t.final_regret().unwrap_or(f64::NAN))
                .collect(),
            truncated_rounds: traces
                .iter()
                .map(|(_, t)| t.rounds().iter().filter(|m| m.truncated).count() as u32)
                .collect(),
        }),
        config: cfg,
    };
    let text = toml::to_string_pretty(&manifest).context("serializing manifest")?;
    let path = dir.join("manifest.toml");
    fs::write(&path, text)?;
    Ok(path)
}

/// Runs a whole experiment and writes every artifact under `dir`. The
/// manifest goes down first flagged incomplete, then is finalized once
/// every seed's trace is on disk.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<ExperimentArtifacts> {
    fs::create_dir_all(dir)?;
    let prep = crate::runner::prepare(cfg)?;
    write_manifest(dir, cfg, &prep, None)?;
    let traces = crate::runner::run_all_seeds(&prep);
    let mut trace_paths = Vec::new();
    for (seed, trace) in &traces {
        trace_paths.push(write_seed_trace(dir, *seed, trace, prep.params.opts.m())?);
    }
    let aggregate = write_aggregate(dir, &traces)?;
    let manifest = write_manifest(dir, cfg, &prep, Some(&traces))?;
    Ok(ExperimentArtifacts {
        prep,
        traces,
        trace_paths,
        aggregate_path: aggregate,
        manifest_path: manifest,
    })
}

pub struct ExperimentArtifacts {
    pub prep: PreparedRun,
    pub traces: Vec<(u64, RunTrace)>,
    pub trace_paths: Vec<PathBuf>,
    pub aggregate_path: PathBuf,
    pub manifest_path: PathBuf,
}

/// Sweep driver: runs the base config once per axis value (shared seeds),
/// writing full artifacts per point plus a long-format comparison CSV of
/// per-round mean running regret.
pub fn run_sweep(
    base: &ExperimentConfig,
    axis: &str,
    values: &[String],
    dir: &Path,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut rows: Vec<(String, u32, f64)> = Vec::new();
    for raw in values {
        let cfg = apply_axis(base, axis, raw)?;
        let label = raw.replace('/', "_");
        let subdir = dir.join(format!("{axis}_{label}"));
        let artifacts = run_experiment(&cfg, &subdir)?;
        let k = artifacts.traces.len() as f64;
        let rounds = artifacts
            .traces
            .iter()
            .map(|(_, t)| t.rounds().len())
            .min()
            .unwrap_or(0);
        for r in 0..rounds {
            let mean = artifacts
                .traces
                .iter()
                .map(|(_, t)| t.running_regret()[r])
                .sum::<f64>()
                / k;
            rows.push((raw.clone(), (r + 1) as u32, mean));
        }
    }
    let path = dir.join("sweep.csv");
    let mut writer = csv::Writer::from_path(&path)?;
    writer.write_record(["axis", "value", "round", "running_regret_mean"])?;
    for (value, round, mean) in rows {
        writer.write_record([
            axis.to_string(),
            value,
            round.to_string(),
            format!("{mean}"),
        ])?;
    }
    writer.flush()?;
    Ok(path)
}

/// Applies one sweep value to a copy of the base config.
pub fn apply_axis(base: &ExperimentConfig, axis: &str, value: &str) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    match axis {
        "n" => {
            let n: usize = value.parse().context("n must be an integer")?;
            anyhow::ensure!(
                cfg.graph.kind != crate::config::GraphKind::EdgeList,
                "cannot sweep n over a file-backed graph"
            );
            cfg.graph.n = Some(n);
        }
        "m" => {
            let m: usize = value.parse().context("m must be an integer")?;
            anyhow::ensure!(
                cfg.options.etas.is_none(),
                "cannot sweep m when explicit etas are configured"
            );
            cfg.options.m = Some(m);
        }
        "epsilon" => {
            let eps: EpsilonSpec = value.parse().map_err(anyhow::Error::msg)?;
            cfg.protocol.epsilon = eps;
        }
        "g_choice" => {
            let g: crate::config::GChoice = value.parse().map_err(anyhow::Error::msg)?;
            cfg.dissemination.g = g;
        }
        other => anyhow::bail!("unknown sweep axis {other:?} (use n, m, epsilon, g_choice)"),
    }
    Ok(cfg)
}
