use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gtf_cli::config::{Method, RunConfig};
use gtf_cli::error::{HarnessError, Result};
use gtf_cli::experiments::{
    run_denoise, run_ssl, run_support_recovery, run_timing, solve_gtf, SslData,
};
use gtf_cli::report::ExperimentReport;
use gtf_core::graph::{component_labels, repair_connectivity, Graph};
use gtf_core::io::{read_csv_matrix, read_edge_list, read_labels_csv};
use gtf_core::kmeans::derive_seed;
use gtf_core::map::{solve_map, MapInstance, MapMethod, MapOpts};
use gtf_core::SignalMatrix;

/// Piecewise-constant graph signal estimation and its experiment harness.
#[derive(Parser)]
#[command(name = "gtf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; set values override the config file.
#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON config file (flags win over its values).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "k-max")]
    k_max: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    sigma2: Option<f64>,
    /// Target input SNR in dB (overrides sigma2 where applicable).
    #[arg(long = "input-snr-db")]
    input_snr_db: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Independent repetitions for the experiments.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long = "reweight-passes")]
    reweight_passes: Option<usize>,
    #[arg(long = "sa-restarts")]
    sa_restarts: Option<usize>,
    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write diagnostic curves as CSV next to --out.
    #[arg(long)]
    trace: bool,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.k_max {
            cfg.k_max = v;
        }
        if let Some(v) = self.method {
            cfg.method = v;
        }
        if let Some(v) = self.sigma2 {
            cfg.sigma2 = v;
            cfg.input_snr_db = None;
        }
        if let Some(v) = self.input_snr_db {
            cfg.input_snr_db = Some(v);
        }
        if let Some(v) = self.p {
            cfg.p = v;
        }
        if let Some(v) = self.q {
            cfg.q = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.seeds {
            cfg.seeds = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.reweight_passes {
            cfg.reweight_passes = v;
        }
        if let Some(v) = self.sa_restarts {
            cfg.sa_restarts = v;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a piecewise-constant signal on a graph from a signal CSV.
    SolveGtf {
        /// Edge-list file: two 0-based indices per line, '#' comments.
        #[arg(long)]
        graph: PathBuf,
        /// Signal CSV, one row per node.
        #[arg(long)]
        signal: PathBuf,
        /// Skip the first CSV row.
        #[arg(long)]
        header: bool,
        /// Bridge disconnected components with random edges instead of
        /// failing.
        #[arg(long)]
        repair: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Semi-supervised classification from partial labels.
    SolveMap {
        /// Edge-list file; omit to build a k-NN graph from --signal.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Feature CSV for k-NN graph construction.
        #[arg(long)]
        signal: Option<PathBuf>,
        /// Label CSV: one class index per row, -1 for unlabeled.
        #[arg(long)]
        labels: PathBuf,
        /// Neighbors for the k-NN graph.
        #[arg(long)]
        knn: Option<usize>,
        #[arg(long)]
        header: bool,
        #[arg(long)]
        repair: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Boundary-edge recovery ROC on planted communities.
    SupportRecovery {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Reconstruction SNR across input SNR levels.
    Denoise {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Solver wall time across edge densities.
    Timing {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Repeated-trial classification (built-in blobs or user data).
    Ssl {
        /// Feature CSV; omit to use the built-in blob dataset.
        #[arg(long)]
        signal: Option<PathBuf>,
        /// Ground-truth label CSV (one class per row).
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        header: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn load_graph(path: &Path, repair: bool, seed: u64) -> Result<Graph> {
    let (n, mut edges) = read_edge_list(path)?;
    let labels = component_labels(n, &edges);
    let components = labels.iter().max().map_or(0, |m| m + 1);
    if components > 1 {
        if repair {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xF1C));
            let added = repair_connectivity(n, &mut edges, &mut rng);
            eprintln!("graph had {components} components; added {added} repair edges");
        } else {
            return Err(HarnessError::Config(format!(
                "graph has {components} components; pass --repair to bridge them"
            )));
        }
    }
    Ok(Graph::from_edges(n, &edges)?)
}

fn emit_json(value: &serde_json::Value, out: &Option<PathBuf>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn emit_report(report: &ExperimentReport, common: &CommonArgs) -> Result<()> {
    match &common.out {
        Some(path) => {
            report.write_json(path)?;
            if common.trace {
                report.write_curves_csv(path)?;
            }
        }
        None => println!("{}", report.to_json_pretty()?),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SolveGtf { graph, signal, header, repair, common } => {
            let cfg = common.resolve()?;
            let g = load_graph(&graph, repair, cfg.seed)?;
            let data = read_csv_matrix(&signal, header)?;
            let y = SignalMatrix::new(data)?;
            let (solution, curve) = solve_gtf(&y, &g, &cfg)?;
            emit_json(&solution, &common.out)?;
            if common.trace {
                if let Some(out) = &common.out {
                    let path = out.with_extension("trace.csv");
                    std::fs::write(path, curve.to_csv())?;
                }
            }
            Ok(())
        }
        Command::SolveMap { graph, signal, labels, knn, header, repair, common } => {
            let cfg = common.resolve()?;
            let g = match (&graph, &signal) {
                (Some(path), _) => load_graph(path, repair, cfg.seed)?,
                (None, Some(features)) => {
                    let f = read_csv_matrix(features, header)?;
                    gtf_core::knn_graph(f.view(), knn.unwrap_or(cfg.knn))?
                }
                (None, None) => {
                    return Err(HarnessError::Config(
                        "solve-map needs --graph or --signal features".into(),
                    ))
                }
            };
            let observed = read_labels_csv(&labels, header)?;
            let inst = MapInstance::from_labels(
                g,
                &observed,
                cfg.num_classes,
                None,
                cfg.lambda,
                cfg.epsilon,
            )?;
            let method = match cfg.method {
                Method::Spectral => MapMethod::Spectral,
                Method::Sa => MapMethod::Sa,
            };
            let opts = MapOpts {
                spectral: cfg.spectral_opts(),
                schedule: cfg.schedule(),
                sa_restarts: cfg.sa_restarts,
            };
            let sol = solve_map(&inst, cfg.k_max, method, &opts)?;
            emit_json(&sol.to_json_value(), &common.out)
        }
        Command::SupportRecovery { common } => {
            let cfg = common.resolve()?;
            emit_report(&run_support_recovery(&cfg)?, &common)
        }
        Command::Denoise { common } => {
            let cfg = common.resolve()?;
            emit_report(&run_denoise(&cfg)?, &common)
        }
        Command::Timing { common } => {
            let cfg = common.resolve()?;
            emit_report(&run_timing(&cfg)?, &common)
        }
        Command::Ssl { signal, labels, header, common } => {
            let cfg = common.resolve()?;
            let data = match (&signal, &labels) {
                (Some(f), Some(l)) => {
                    let features = read_csv_matrix(f, header)?;
                    let raw = read_labels_csv(l, header)?;
                    let truth: Vec<usize> = raw
                        .iter()
                        .map(|&v| {
                            if v < 0 {
                                Err(HarnessError::Config(
                                    "ssl ground-truth labels must all be observed".into(),
                                ))
                            } else {
                                Ok(v as usize)
                            }
                        })
                        .collect::<Result<_>>()?;
                    Some(SslData { features, labels: truth })
                }
                (None, None) => None,
                _ => {
                    return Err(HarnessError::Config(
                        "ssl needs both --signal and --labels, or neither".into(),
                    ))
                }
            };
            emit_report(&run_ssl(&cfg, data)?, &common)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
