use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use kurasync_core::certificates::{self, CertificateContext};
use kurasync_core::dynamics;
use kurasync_core::graph::{self, Partition, WeightedNetwork};
use kurasync_core::metrics;
use kurasync_core::pipeline::connectome::{self, load_raw_dir, load_region_map};
use kurasync_core::pipeline::experiments::{self, log_grid, BrainConfig, ExampleId, Scenario};
use kurasync_core::pipeline::io::{self, write_json};
use kurasync_core::pipeline::ExperimentConfig;
use kurasync_core::tree::TreeDecomposition;
use kurasync_core::{KuraError, Result};

#[derive(Parser)]
#[command(name = "kurasync", version, about = "Cluster synchronization of Kuramoto networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check whether the stored partition is an equitable partition.
    CheckPartition {
        #[arg(long)]
        network: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
        /// Also write B, W and the tree reduction matrices as CSV into this directory.
        #[arg(long)]
        dump_decomposition: Option<PathBuf>,
    },
    /// Simulate the phase dynamics described by a run config.
    Simulate {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the averaging stability certificate.
    Certify {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Also write the gamma / epsilon tradeoff curve.
        #[arg(long)]
        tradeoff: bool,
        /// `lo:hi:n` for n log-spaced values, or a comma separated list.
        #[arg(long, requires = "tradeoff")]
        gamma_grid: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Commutation test for networks with two clusters.
    TwoCluster {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Late-time distance to the cluster manifold for scaled intra weights.
    SweepPractical {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        multipliers: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Brain-network experiment with BOLD functional connectivity.
    Brain {
        #[arg(long)]
        scenario: String,
        /// Dense region adjacency; defaults to the seeded synthetic connectome.
        #[arg(long)]
        connectome: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a region-level network from subject connectivity matrices.
    Preprocess {
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        region_map: PathBuf,
        /// `.csv` writes a dense adjacency, anything else a JSON network file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one of the built-in reference networks end to end.
    Example {
        /// 1, 2-stable or 2-unstable.
        #[arg(long)]
        id: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn load_run(network: &Path, config: &Path) -> Result<(WeightedNetwork, Partition, ExperimentConfig)> {
    let cfg = ExperimentConfig::load(config)?;
    let (net, part) = io::load_partitioned(network, cfg.partition.as_ref())?;
    let net = if cfg.intra_multiplier == 1.0 {
        net
    } else {
        net.scaled(&part, cfg.intra_multiplier, 1.0)?
    };
    Ok((net, part, cfg))
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || KuraError::InvalidConfig(format!("cannot parse gamma grid {spec:?}"));
    let grid: Vec<f64> = match spec.split(':').collect::<Vec<_>>()[..] {
        [lo, hi, n] => {
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            if !(lo > 0.0 && hi >= lo && n >= 1) {
                return Err(bad());
            }
            log_grid(lo, hi, n)
        }
        [list] => list
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?,
        _ => return Err(bad()),
    };
    if grid.is_empty() || grid.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
        return Err(bad());
    }
    Ok(grid)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::CheckPartition {
            network,
            json,
            dump_decomposition,
        } => {
            let (net, part) = io::load_partitioned(&network, None)?;
            let report = graph::check_partition(&net, &part)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!(
                    "exact: {}\ndeviation K: {:e}\ntolerance: {:e}",
                    report.is_exact, report.deviation_k, report.tolerance
                );
                if let Some(w) = report.worst_pair {
                    println!(
                        "worst pair: nodes {} and {} of cluster {} toward cluster {}",
                        w.node_i, w.node_j, w.from_cluster, w.to_cluster
                    );
                }
            }
            if let Some(dir) = dump_decomposition {
                io::dump_decomposition(&dir, &TreeDecomposition::new(&net, &part)?)?;
            }
        }
        Command::Simulate { network, config, out } => {
            let (net, part, cfg) = load_run(&network, &config)?;
            let osc = cfg.oscillator_config(&part)?;
            let record = dynamics::simulate(&osc, &net)?;
            fs::create_dir_all(&out)?;
            metrics::write_trajectory_csv(&record, create(&out.join("trajectory.csv"))?)?;
            metrics::order_parameters(&record, &part)?.write_csv(create(&out.join("order_parameters.csv"))?)?;
            fs::write(out.join("config.json"), cfg.to_json_string()? + "\n")?;
            info!("{} samples written to {}", record.len(), out.display());
        }
        Command::Certify {
            network,
            config,
            tradeoff,
            gamma_grid,
            out,
        } => {
            let (net, part, cfg) = load_run(&network, &config)?;
            let omega = cfg.frequencies.resolve(&part)?;
            let ctx = CertificateContext::new(&net, &part, &omega)?;
            fs::create_dir_all(&out)?;
            write_json(&out.join("certificate.json"), &ctx.certificate())?;
            if tradeoff {
                let g = ctx.params.gamma;
                let grid = match gamma_grid {
                    Some(spec) => parse_grid(&spec)?,
                    None => log_grid(g * 1e-3, g * 10.0, 20),
                };
                let curve = certificates::tradeoff_curve(ctx.params.rho, ctx.params.lambda2, &grid)?;
                certificates::write_tradeoff_csv(&curve, create(&out.join("tradeoff.csv"))?)?;
            }
        }
        Command::TwoCluster { network, config, out } => {
            let (net, part, cfg) = load_run(&network, &config)?;
            let omega = cfg.frequencies.resolve(&part)?;
            let report = certificates::two_cluster_test(&net, &part, &omega)?;
            fs::create_dir_all(&out)?;
            write_json(&out.join("two_cluster.json"), &report)?;
        }
        Command::SweepPractical {
            network,
            config,
            multipliers,
            out,
        } => {
            let (net, part, cfg) = load_run(&network, &config)?;
            let osc = cfg.oscillator_config(&part)?;
            let points = experiments::practical_sweep(&net, &part, &osc, &multipliers)?;
            fs::create_dir_all(&out)?;
            experiments::write_sweep_csv(&points, create(&out.join("sweep.csv"))?)?;
        }
        Command::Brain {
            scenario,
            connectome,
            seed,
            out,
        } => {
            let scenario: Scenario = scenario.parse()?;
            let net = connectome.map(|p| io::load_network(&p).map(|(n, _)| n)).transpose()?;
            let outputs = experiments::brain_experiment(&BrainConfig::new(scenario, seed), net.as_ref())?;
            experiments::write_brain_outputs(&out, &outputs)?;
        }
        Command::Preprocess { raw, region_map, out } => {
            let subjects = load_raw_dir(&raw)?;
            let map = load_region_map(&region_map)?;
            let c = connectome::preprocess_connectome(&subjects, &map)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            if out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                io::write_matrix_file(&out, c.network.adjacency())?;
            } else {
                io::save_network(&out, &c.network, None)?;
            }
            println!("{}", serde_json::to_string_pretty(&c.report())?);
        }
        Command::Example { id, out } => {
            let id: ExampleId = id.parse()?;
            experiments::run_example(id, Some(&out))?;
        }
    }
    Ok(())
}

fn fail(kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("Usage", e.to_string().trim()),
    };
    if let Ok(v) = std::env::var("KURASYNC_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    return fail("InvalidConfig", &e.to_string());
                }
            }
            _ => return fail("InvalidConfig", &format!("KURASYNC_THREADS must be a positive integer, got {v:?}")),
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
