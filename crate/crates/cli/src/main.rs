use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jsqps::operators::Scheme;
use jsqps::simulator::Engine;
use jsqps_cli::commands;
use jsqps_cli::config::Spacing;
use jsqps_cli::{Failure, RunConfig};
use num_complex::Complex64 as C64;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "jsqps", version, about = "Response times of two JSQ processor-sharing queues")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// First K response-time moments.
    Moments {
        #[command(flatten)]
        run: RunArgs,
        /// spectral, oracle, simulation, static-ps or static-fcfs
        #[arg(long, default_value = "spectral")]
        method: String,
    },
    /// Response-time density by numerical transform inversion.
    Density {
        #[command(flatten)]
        run: RunArgs,
        /// Also simulate and write the histogram for overlaying.
        #[arg(long)]
        overlay: bool,
    },
    /// Regenerative simulation.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Transform at one point from the truncated balance equations.
    Oracle {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        s_re: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        s_im: f64,
        /// Fixed truncation; refined automatically when absent.
        #[arg(long)]
        n_trunc: Option<usize>,
    },
    /// Moments for several tie-break probabilities.
    SweepA1 {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.25, 0.5, 0.75, 1.0])]
        values: Vec<f64>,
        /// Add simulated moments next to each row.
        #[arg(long)]
        with_sim: bool,
    },
    /// JSQ against static splitting.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Splitting probability; the utilization-balancing one when absent.
        #[arg(long)]
        p1: Option<f64>,
    },
    /// Operator cache maintenance.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Subcommand)]
enum CacheAction {
    /// Build (or validate) the cache entry for the configured grid.
    Build {
        #[command(flatten)]
        run: Box<RunArgs>,
    },
    /// Print the header and contents of a cache file.
    Inspect { path: PathBuf },
}

/// Flags override the config file, which overrides the defaults.
#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu1: Option<f64>,
    #[arg(long)]
    mu2: Option<f64>,
    #[arg(long)]
    a1: Option<f64>,
    /// Points per circle.
    #[arg(long)]
    n: Option<usize>,
    /// Outer radius.
    #[arg(long)]
    r2: Option<f64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Initial truncation of the stationary chain.
    #[arg(long)]
    n_trunc_pi: Option<usize>,
    /// Number of moments.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    t_start: Option<f64>,
    #[arg(long)]
    t_stop: Option<f64>,
    #[arg(long)]
    t_count: Option<usize>,
    #[arg(long, value_enum)]
    spacing: Option<SpacingArg>,
    #[arg(long)]
    talbot_nodes: Option<usize>,
    #[arg(long)]
    cycles: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bin_width: Option<f64>,
    #[arg(long)]
    hist_max: Option<f64>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Operator cache directory.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SchemeArg {
    Truncated,
    Collocation,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SpacingArg {
    Linear,
    Log,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum EngineArg {
    UniformDeparture,
    AttainedService,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let p = &mut cfg.params;
        set(&mut p.lambda, self.lambda);
        set(&mut p.mu1, self.mu1);
        set(&mut p.mu2, self.mu2);
        set(&mut p.a1, self.a1);
        set(&mut cfg.spectral.n, self.n);
        if self.r2.is_some() {
            cfg.spectral.r2 = self.r2;
        }
        if let Some(s) = self.scheme {
            cfg.spectral.scheme = match s {
                SchemeArg::Truncated => Scheme::Truncated,
                SchemeArg::Collocation => Scheme::Collocation,
            };
        }
        if self.n_trunc_pi.is_some() {
            cfg.spectral.n_trunc = self.n_trunc_pi;
        }
        set(&mut cfg.order, self.order);
        set(&mut cfg.tpoints.start, self.t_start);
        set(&mut cfg.tpoints.stop, self.t_stop);
        set(&mut cfg.tpoints.count, self.t_count);
        if let Some(s) = self.spacing {
            cfg.tpoints.spacing = match s {
                SpacingArg::Linear => Spacing::Linear,
                SpacingArg::Log => Spacing::Log,
            };
        }
        set(&mut cfg.talbot_nodes, self.talbot_nodes);
        set(&mut cfg.sim.cycles, self.cycles);
        set(&mut cfg.sim.seed, self.seed);
        set(&mut cfg.sim.bin_width, self.bin_width);
        set(&mut cfg.sim.hist_max, self.hist_max);
        if let Some(e) = self.engine {
            cfg.sim.engine = match e {
                EngineArg::UniformDeparture => Engine::UniformDeparture,
                EngineArg::AttainedService => Engine::AttainedService,
            };
        }
        set(&mut cfg.out_dir, self.out.clone());
        if self.cache.is_some() {
            cfg.cache_dir = self.cache.clone();
        }
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn print<T: Serialize>(value: &T) {
    let text = serde_json::to_string_pretty(value).expect("results serialize");
    // a closed pipe downstream is not a failure of the run
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Moments { run, method } => print(&commands::cmd_moments(&run.resolve()?, &method)?),
        Command::Density { run, overlay } => {
            let report = commands::cmd_density(&run.resolve()?, overlay)?;
            print(&serde_json::json!({
                "points": report.series.t.len(),
                "trapezoid_mass": report.trapezoid_mass,
                "cache": report.cache,
                "config_hash": report.config_hash,
            }));
        }
        Command::Simulate { run } => {
            let est = commands::cmd_simulate(&run.resolve()?)?;
            print(&serde_json::json!({
                "moments": est.moments,
                "ci95": est.ci95,
                "cycles": est.cycles_run,
                "batches": est.batches,
                "jobs": est.jobs,
            }));
        }
        Command::Oracle {
            run,
            s_re,
            s_im,
            n_trunc,
        } => print(&commands::cmd_oracle(&run.resolve()?, C64::new(s_re, s_im), n_trunc)?),
        Command::SweepA1 {
            run,
            values,
            with_sim,
        } => print(&commands::cmd_sweep_a1(&run.resolve()?, &values, with_sim)?),
        Command::Compare { run, p1 } => print(&commands::cmd_compare(&run.resolve()?, p1)?),
        Command::Cache { action } => match action {
            CacheAction::Build { run } => print(&commands::cmd_cache_build(&run.resolve()?)?),
            CacheAction::Inspect { path } => print(&commands::cmd_cache_inspect(&path)?),
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.to_json());
            ExitCode::FAILURE
        }
    }
}
