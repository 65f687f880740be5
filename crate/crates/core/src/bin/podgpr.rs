//! `podgpr` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use podgpr::cli::{cmd_benchmark, cmd_build, cmd_evaluate, cmd_simulate, parse_theta, Preset, RunConfig};
use podgpr::error::{Error, Result};
use podgpr::rom::RomModel;

#[derive(Parser)]
#[command(name = "podgpr", version, about = "POD-GPR reduced-order models for 2D TM scattering")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in setup: cylinder, multilayer or none.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Resolution factor applied to the preset (1 = full size).
    #[arg(long, global = true)]
    scale: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full-order solver and write snapshot files.
    Simulate {
        /// Parameter point as comma-separated values; repeat for several. Default: the training grid.
        #[arg(long)]
        theta: Vec<String>,
        /// Output directory (default: <workspace>/snapshots).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Offline stage: snapshots, POD bases and GP surrogates.
    Build {
        /// Read snapshots written by an earlier `simulate` instead of solving.
        #[arg(long)]
        reuse_snapshots: bool,
        /// Workspace directory (default: paths.workspace from the configuration).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Online stage: reduced fields at new parameter points.
    Evaluate {
        /// Model directory (default: <workspace>/model).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Parameter point; repeat for several. Default: evaluation.thetas from the configuration.
        #[arg(long)]
        theta: Vec<String>,
        /// Comma-separated query times (default: the snapshot times).
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
        /// Also solve the full-order model and write error CSVs.
        #[arg(long)]
        with_reference: bool,
        /// Output directory (default: <workspace>/evaluation).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare full-order and online wall-clock time.
    Benchmark {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        #[arg(long)]
        theta: Option<String>,
        /// Output directory for benchmark.csv (default: the workspace).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Context {
    config: Option<RunConfig>,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self> {
        let preset = cli.preset.as_deref().map(str::parse::<Preset>).transpose()?;
        let config = if cli.config.is_some() || preset.is_some() {
            Some(RunConfig::load(cli.config.as_deref(), preset, cli.scale)?)
        } else {
            if cli.scale.is_some() {
                return Err(Error::Config("--scale needs --preset or --config".into()));
            }
            None
        };
        Ok(Self { config })
    }

    fn config(&self) -> Result<&RunConfig> {
        self.config
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs --config or --preset".into()))
    }

    fn workspace(&self) -> Result<PathBuf> {
        Ok(self.config()?.paths.workspace.clone())
    }

    /// Load a model, checking it against the configuration when one was given.
    fn model(&self, dir: Option<&Path>) -> Result<RomModel> {
        let dir = match dir {
            Some(d) => d.to_path_buf(),
            None => self.workspace()?.join("model"),
        };
        let model = RomModel::load(&dir)?;
        if let Some(config) = &self.config {
            model.ensure_fresh(&config.resolve()?.solver)?;
        }
        Ok(model)
    }

    fn thetas(&self, given: &[String]) -> Result<Vec<Vec<f64>>> {
        if given.is_empty() {
            return Ok(self
                .config
                .as_ref()
                .map(|c| c.evaluation.thetas.clone())
                .unwrap_or_default());
        }
        given.iter().map(|s| parse_theta(s)).collect()
    }
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Context::new(&cli)?;
    match &cli.command {
        Command::Simulate { theta, out } => {
            let thetas = theta.iter().map(|s| parse_theta(s)).collect::<Result<Vec<_>>>()?;
            let out = match out {
                Some(o) => o.clone(),
                None => ctx.workspace()?.join("snapshots"),
            };
            for dir in cmd_simulate(ctx.config()?, &thetas, &out)? {
                println!("{}", dir.display());
            }
        }
        Command::Build { reuse_snapshots, out } => {
            let workspace = match out {
                Some(o) => o.clone(),
                None => ctx.workspace()?,
            };
            println!("{}", cmd_build(ctx.config()?, *reuse_snapshots, &workspace)?);
        }
        Command::Evaluate {
            model,
            theta,
            t,
            with_reference,
            out,
        } => {
            let rom = ctx.model(model.as_deref())?;
            let out = match (out, model) {
                (Some(o), _) => o.clone(),
                (None, Some(m)) => m.join("..").join("evaluation"),
                (None, None) => ctx.workspace()?.join("evaluation"),
            };
            let times = (!t.is_empty()).then_some(t.as_slice());
            for r in cmd_evaluate(&rom, times, &ctx.thetas(theta)?, *with_reference, &out)? {
                let flag = if r.extrapolated { " (extrapolated)" } else { "" };
                println!("theta = {:?}{flag}: {}", r.theta, r.directory.display());
                if let Some(errors) = r.errors {
                    for (name, e) in ["ez", "hx", "hy"].iter().zip(errors) {
                        if let Some((rom_err, proj)) = e {
                            println!("  {name}: POD-GPR error {rom_err:.3e}, projection error {proj:.3e}");
                        }
                    }
                }
            }
        }
        Command::Benchmark {
            model,
            trials,
            theta,
            out,
        } => {
            let rom = ctx.model(model.as_deref())?;
            let theta = theta.as_deref().map(parse_theta).transpose()?;
            let out = match (out, model) {
                (Some(o), _) => o.clone(),
                (None, Some(m)) => m.join(".."),
                (None, None) => ctx.workspace()?,
            };
            let r = cmd_benchmark(&rom, *trials, theta.as_deref(), &out)?;
            print!("{}", r.to_csv());
            println!("speedup: {:.1}x", r.speedup());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
