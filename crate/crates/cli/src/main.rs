mod commands;
mod config;
mod data;
mod error;

use std::path::PathBuf;

use cdfield::likelihood::DEFAULT_TREEWIDTH_CAP;
use cdfield::mcmc::{SamplerConfig, SamplerKind};
use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::FitArgs;
use crate::error::CliResult;

/// Product-of-copulas models: simulation, exact densities and posterior sampling.
#[derive(Parser)]
#[command(name = "cdfield", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replace every column by its pseudo-observations rank/(N+1).
    Transform {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw rows from an all-clayton model.
    Simulate {
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample the posterior of the clayton parameters.
    Fit {
        model: PathBuf,
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = Sampler::Collapsed)]
        sampler: Sampler,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        /// Defaults to 20% of the iterations.
        #[arg(long)]
        burnin: Option<usize>,
        #[arg(long, default_value_t = 1)]
        thin: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        slice_width: f64,
        #[arg(long, default_value_t = 0.5)]
        rw_std: f64,
        #[arg(long, default_value_t = DEFAULT_TREEWIDTH_CAP)]
        treewidth_cap: usize,
    },
    /// Print per-row log densities and their total.
    Density {
        model: PathBuf,
        data: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TREEWIDTH_CAP)]
        treewidth_cap: usize,
    },
    /// Print the bi-directed graph, indicator domains and widths.
    Graph { model: PathBuf },
    /// Write a model file for one of the built-in structures.
    Template {
        #[command(subcommand)]
        structure: Structure,
        /// Initial value of every parameter.
        #[arg(long, default_value_t = 1.0, global = true)]
        theta: f64,
        /// Output file; standard output when absent.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Structure {
    /// Clayton factors over (U1, U2), (U2, U3), ...
    Chain {
        #[arg(long)]
        p: usize,
    },
    /// One factor per cluster and one per pair of clusters.
    ClusterPair {
        /// Cluster of each variable, e.g. 0,0,1,1,2,2
        #[arg(long, value_delimiter = ',', required = true)]
        assignment: Vec<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Sampler {
    Collapsed,
    Discrete,
    Continuous,
}

impl From<Sampler> for SamplerKind {
    fn from(s: Sampler) -> Self {
        match s {
            Sampler::Collapsed => SamplerKind::Collapsed,
            Sampler::Discrete => SamplerKind::DiscreteLatent,
            Sampler::Continuous => SamplerKind::ContinuousLatent,
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let stdout = std::io::stdout().lock();
    match cli.command {
        Command::Transform { input, out } => commands::transform(&input, &out),
        Command::Simulate { model, n, seed, out } => commands::simulate(&model, n, seed, &out),
        Command::Fit {
            model,
            data,
            sampler,
            iters,
            burnin,
            thin,
            seed,
            out,
            slice_width,
            rw_std,
            treewidth_cap,
        } => {
            let config = SamplerConfig {
                burn_in: burnin.unwrap_or(iters / 5),
                thinning: thin,
                slice_width,
                rw_std,
                treewidth_cap,
                ..SamplerConfig::new(iters, seed)
            };
            let args = FitArgs {
                model,
                data,
                sampler: sampler.into(),
                config,
                out,
            };
            commands::fit(&args, stdout)
        }
        Command::Density {
            model,
            data,
            treewidth_cap,
        } => commands::density(&model, &data, treewidth_cap, stdout),
        Command::Graph { model } => commands::graph(&model, stdout),
        Command::Template { structure, theta, out } => {
            let structure = match structure {
                Structure::Chain { p } => commands::Template::Chain { p },
                Structure::ClusterPair { assignment } => commands::Template::ClusterPair { assignment },
            };
            commands::template(&structure, theta, out.as_deref(), stdout)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
