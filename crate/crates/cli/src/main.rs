//! `lpm`: direct localization solvers and the grid benchmark.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lpm_core::{LsMethod, NoiseTarget};

use crate::commands::{SolveArgs, SolveVariant};
use crate::config::{OffsetConfig, ReferenceSetting, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "lpm", version, about = "Direct position solvers for asynchronous radio localization")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: paper-hexagon (default), paper-pentagon, exact-hexagon.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Args)]
struct NoiseArgs {
    /// Noise standard deviation in metres.
    #[arg(long, conflicts_with = "variance")]
    sigma: Option<f64>,
    /// Noise variance in m².
    #[arg(long)]
    variance: Option<f64>,
    #[arg(long, value_enum)]
    noise_target: Option<TargetArg>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    x_min: Option<f64>,
    #[arg(long)]
    x_max: Option<f64>,
    #[arg(long)]
    y_min: Option<f64>,
    #[arg(long)]
    y_max: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve epochs of pseudo-ranges and print the positions as JSON.
    Solve {
        /// Epoch CSV (as written by `simulate`).
        #[arg(long, value_name = "PATH", conflicts_with = "pseudo")]
        epochs: Option<PathBuf>,
        /// One epoch of comma-separated pseudo-ranges.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        pseudo: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "sym")]
        variant: VariantArg,
        /// Reference station (1-based) or `best`.
        #[arg(long = "ref", value_name = "N|best")]
        reference: Option<ReferenceSetting>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Monte-Carlo comparison of both solvers over a grid of tag positions.
    Grid {
        #[command(flatten)]
        noise: NoiseArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        realizations: Option<usize>,
        /// Reference station (1-based), `best` or `best-observed`.
        #[arg(long = "ref", value_name = "N|best|best-observed")]
        reference: Option<ReferenceSetting>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Condition number of the noise-free system over the grid.
    Condmap {
        #[arg(long, value_enum, default_value = "sym")]
        variant: VariantArg,
        /// Reference station (1-based) for the non-symmetric map.
        #[arg(long = "ref", value_name = "N")]
        reference: Option<usize>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Write a synthetic epoch series.
    Simulate {
        #[command(flatten)]
        noise: NoiseArgs,
        /// Tag position, repeatable: `--at 3,4`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
        at: Vec<f64>,
        #[arg(long)]
        count: Option<usize>,
        /// Constant clock offset in metres.
        #[arg(long, allow_hyphen_values = true)]
        offset: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Sym,
    Nonsym,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Qr,
    Normal,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    PerRange,
    PerFilteredDiff,
}

impl From<VariantArg> for SolveVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Sym => Self::Sym,
            VariantArg::Nonsym => Self::Nonsym,
        }
    }
}

impl From<MethodArg> for LsMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Qr => Self::Qr,
            MethodArg::Normal => Self::NormalEquations,
        }
    }
}

fn base_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut config = match (&common.config, &common.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => RunConfig::preset("paper-hexagon")?,
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out = Some(out.clone());
    }
    Ok(config)
}

fn apply_noise(config: &mut RunConfig, noise: &NoiseArgs) {
    if let Some(s) = noise.sigma {
        config.set_sigma(s);
    }
    if let Some(v) = noise.variance {
        config.set_variance(v);
    }
    if let Some(t) = noise.noise_target {
        config.noise.target = match t {
            TargetArg::PerRange => NoiseTarget::PerRange,
            TargetArg::PerFilteredDiff => NoiseTarget::PerFilteredDiff,
        };
    }
}

fn apply_grid(config: &mut RunConfig, g: &GridArgs) {
    let spec = &mut config.grid;
    for (dst, src) in [
        (&mut spec.x_min, g.x_min),
        (&mut spec.x_max, g.x_max),
        (&mut spec.y_min, g.y_min),
        (&mut spec.y_max, g.y_max),
        (&mut spec.step, g.step),
    ] {
        if let Some(v) = src {
            *dst = v;
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = base_config(&cli.common)?;
    let execute = move || match cli.command {
        Command::Solve { epochs, pseudo, variant, reference, method } => commands::solve(
            &config,
            &SolveArgs { epochs, pseudo, variant: variant.into(), reference, method: method.map(Into::into) },
        ),
        Command::Grid { noise, grid, realizations, reference, method } => {
            apply_noise(&mut config, &noise);
            apply_grid(&mut config, &grid);
            if let Some(r) = realizations {
                config.bench.realizations = r;
            }
            if let Some(r) = reference {
                config.bench.reference = r;
            }
            if let Some(m) = method {
                config.bench.method = m.into();
            }
            commands::grid(&config)
        }
        Command::Condmap { variant, reference, grid } => {
            apply_grid(&mut config, &grid);
            commands::condmap(&config, variant.into(), reference)
        }
        Command::Simulate { noise, at, count, offset } => {
            apply_noise(&mut config, &noise);
            if !at.is_empty() {
                let d = config.layout.reference.len();
                if at.len() % d != 0 {
                    return Err(CliError::Validation(format!("--at needs {d} coordinates per point")));
                }
                config.simulate.trajectory = at.chunks(d).map(<[f64]>::to_vec).collect();
            }
            if let Some(c) = count {
                config.simulate.epochs_per_point = c;
            }
            if let Some(o) = offset {
                config.simulate.offset = OffsetConfig::Constant { value: o };
            }
            commands::simulate(&config)
        }
    };
    match cli.common.threads {
        Some(0) => Err(CliError::Validation("--threads must be ≥ 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Validation(format!("cannot start thread pool: {e}")))?
            .install(execute),
        None => execute(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
