use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use flexdiff_cli::{
    cmd_distances, cmd_gen, cmd_metrics, cmd_rewire, cmd_spectral, cmd_sweep, cmd_train, cmd_verify,
    DistanceOptions, Globals, SpectralOptions,
};
use flexdiff_core::spectral::SolverMode;
use flexdiff_core::verify::{default_alpha_grid, default_gamma_grid, VerifyOptions};
use flexdiff_core::{Error, LaplacianParams, Result};

#[derive(Parser)]
#[command(name = "flexdiff", version, about = "Parameterized graph Laplacians, spectral checks and diffusion GNNs")]
struct Cli {
    /// Seed for every random stream of the command; overrides config files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory for all outputs [default: out/<command>].
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset bundle from a JSON config.
    Gen {
        #[arg(long)]
        config: PathBuf,
    },
    /// Dump eigenpairs and edge features.
    Spectral {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Non-trivial pairs for the iterative solver.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value_t = Mode::Dense)]
        mode: Mode,
    },
    /// Diffusion and spectral distances between node pairs.
    Distances {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Node pair `i,j`; repeatable.
        #[arg(long = "pair", value_parser = parse_pair, required = true)]
        pairs: Vec<(usize, usize)>,
        /// Diffusion times, comma separated.
        #[arg(long = "t", value_delimiter = ',', default_value = "1")]
        times: Vec<f64>,
    },
    /// Check non-negativity, eigenvalue monotonicity and order preservation.
    Verify {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
        /// Triples sampled per gamma.
        #[arg(long, default_value_t = 20)]
        triples: usize,
    },
    /// Homophily metrics of a dataset bundle.
    Metrics {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Add edges to the gradient node of the spectral embedding.
    Rewire {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
    },
    /// Train one model from a JSON config.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train over a mu x gamma x seed grid.
    Sweep {
        /// Protocol JSON; defaults apply to omitted fields.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Mode {
    Dense,
    Iterative,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected i,j, got {s:?}"))?;
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn name(c: &Command) -> &'static str {
    match c {
        Command::Gen { .. } => "gen",
        Command::Spectral { .. } => "spectral",
        Command::Distances { .. } => "distances",
        Command::Verify { .. } => "verify",
        Command::Metrics { .. } => "metrics",
        Command::Rewire { .. } => "rewire",
        Command::Train { .. } => "train",
        Command::Sweep { .. } => "sweep",
    }
}

fn run(cli: Cli) -> Result<bool> {
    let globals = Globals {
        seed: cli.seed,
        out_dir: cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("out").join(name(&cli.command))),
        threads: cli.threads,
    };
    match cli.command {
        Command::Gen { config } => {
            cmd_gen(&config, &globals)?;
        }
        Command::Spectral {
            graph,
            alpha,
            gamma,
            k,
            mode,
        } => {
            let mode = match mode {
                Mode::Dense => SolverMode::Dense,
                Mode::Iterative => SolverMode::Iterative,
            };
            cmd_spectral(&graph, &SpectralOptions { alpha, gamma, k, mode }, &globals)?;
        }
        Command::Distances {
            graph,
            alpha,
            gamma,
            pairs,
            times,
        } => {
            cmd_distances(&graph, &DistanceOptions { alpha, gamma, pairs, times }, &globals)?;
        }
        Command::Verify {
            graph,
            alphas,
            gammas,
            triples,
        } => {
            let opts = VerifyOptions {
                alphas: alphas.unwrap_or_else(default_alpha_grid),
                gammas: gammas.unwrap_or_else(default_gamma_grid),
                triples,
            };
            let report = cmd_verify(&graph, &opts, &globals)?;
            println!("verify: {}", if report.pass { "pass" } else { "FAIL" });
            return Ok(report.pass);
        }
        Command::Metrics { dataset } => {
            cmd_metrics(&dataset, &globals)?;
        }
        Command::Rewire { graph, alpha, gamma } => {
            cmd_rewire(&graph, LaplacianParams::new(alpha, gamma)?, &globals)?;
        }
        Command::Train { config } => {
            let report = cmd_train(&config, &globals)?;
            eprintln!("training took {:.2}s", report.wall_time_secs);
        }
        Command::Sweep { config } => {
            let r = cmd_sweep(config.as_deref(), &globals)?;
            if r.failed_cells > 0 {
                eprintln!("{} sweep cells failed; see log.txt", r.failed_cells);
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    let out = run(cli);
    eprintln!("elapsed {:.2}s", start.elapsed().as_secs_f64());
    match out {
        Ok(true) => ExitCode::SUCCESS,
        // a failed verification is reported as a numerical failure
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Error::exit_code(&e) as u8)
        }
    }
}
