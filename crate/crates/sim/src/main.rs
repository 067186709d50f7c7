use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ppsl_core::graph::Graph;
use ppsl_sim::config::ExperimentConfig;
use ppsl_sim::{edgelist, output, runner};

#[derive(Parser)]
#[command(
    name = "ppsl",
    version,
    about = "Privacy-preserving social learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write traces, aggregate, and manifest.
    Run {
        #[command(flatten)]
        common: ConfigArgs,
        /// Override the config's seed list (comma-separated).
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Output directory (default: config's out_dir, else "out").
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a config across values of one parameter with shared seeds.
    Sweep {
        #[command(flatten)]
        common: ConfigArgs,
        /// One of: n, m, epsilon, g_choice.
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. "infinity,0.6931,0.25".
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config against the analyzed parameter regime.
    Validate {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Generate or check graph files.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Path to a TOML experiment config.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Generate a graph and write it as an edge list.
    Gen {
        /// Generator: "er" or "regular".
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        /// Edge probability (er only).
        #[arg(long)]
        p: Option<f64>,
        /// Degree (regular only).
        #[arg(long)]
        d: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate an edge-list file (connected, non-bipartite, simple).
    Check {
        #[arg(long)]
        file: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { common, seeds, out } => {
            let mut cfg = load_config(&common)?;
            if let Some(seeds) = seeds {
                cfg.run.seeds = seeds;
            }
            let dir = out
                .or_else(|| cfg.run.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let artifacts = output::run_experiment(&cfg, &dir)?;
            report_warnings(&artifacts.prep.warnings);
            for path in &artifacts.trace_paths {
                println!("wrote {}", path.display());
            }
            println!("wrote {}", artifacts.aggregate_path.display());
            println!("wrote {}", artifacts.manifest_path.display());
            if let Some((_, trace)) = artifacts.traces.first() {
                if let Some(r) = trace.final_regret() {
                    let mean: f64 = artifacts
                        .traces
                        .iter()
                        .filter_map(|(_, t)| t.final_regret())
                        .sum::<f64>()
                        / artifacts.traces.len() as f64;
                    println!("final running regret: first seed {r:.4}, mean {mean:.4}");
                }
            }
            Ok(())
        }
        Command::Sweep {
            common,
            axis,
            values,
            out,
        } => {
            let cfg = load_config(&common)?;
            let dir = out
                .or_else(|| cfg.run.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"))
                .join("sweep");
            let path = output::run_sweep(&cfg, &axis, &values, &dir)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Validate { common } => {
            let cfg = load_config(&common)?;
            let prep = runner::prepare(&cfg)?;
            let c = &prep.params.conditions;
            println!("n = {}, m = {}", prep.params.n, prep.params.opts.m());
            println!(
                "derived: delta = {:.6}, g(N) = {:.3}, h = {:.3}, cap = {}, walk_length = {}",
                prep.params.protocol.delta(),
                prep.params.g_value,
                prep.params.h,
                prep.params.cap,
                prep.walk_len,
            );
            if let Some(gap) = prep.spectral_gap {
                println!("spectral gap = {gap:.6}");
            }
            let line =
                |name: &str, ok: bool| println!("{}: {}", name, if ok { "ok" } else { "VIOLATED" });
            line("sigma >= 11", c.sigma_in_regime);
            line("6*mu <= delta^2", c.exploration_within_bias);
            line("ln N < g(N) < N", c.g_within_bounds);
            line("h = 16*sigma/(1-beta)", c.h_at_theoretical);
            line("1/2 < beta < e/(e+1)", c.beta_in_convergence_range);
            line("etas best-first", c.etas_in_canonical_order);
            report_warnings(&prep.warnings);
            Ok(())
        }
        Command::Graph { command } => match command {
            GraphCommand::Gen {
                kind,
                n,
                p,
                d,
                seed,
                out,
            } => {
                let graph = match kind.as_str() {
                    "er" => {
                        let p = p.context("--p is required for kind er")?;
                        Graph::erdos_renyi(n, p, seed)?
                    }
                    "regular" => {
                        let d = d.context("--d is required for kind regular")?;
                        Graph::random_regular(n, d, seed)?
                    }
                    other => bail!("unknown graph kind {other:?} (use er or regular)"),
                };
                edgelist::save(&out, &graph)?;
                println!(
                    "wrote {} ({} nodes, {} edges)",
                    out.display(),
                    graph.n(),
                    graph.edge_count()
                );
                Ok(())
            }
            GraphCommand::Check { file } => {
                let graph = edgelist::load(&file)?;
                println!(
                    "{}: valid ({} nodes, {} edges, min degree {})",
                    file.display(),
                    graph.n(),
                    graph.edge_count(),
                    graph.degrees().iter().min().unwrap()
                );
                Ok(())
            }
        },
    }
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig> {
    ExperimentConfig::load(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))
}

fn report_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}
