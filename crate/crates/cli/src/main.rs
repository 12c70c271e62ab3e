//! `conest`: simulate spectroscopic surveys, analyse them with collaborative
//! nested sampling, and report evidence, scaling and calibration results.

mod commands;
mod error;
mod io;
mod report;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use conest::RunConfig;

use error::{CliError, CliResult};

/// Environment variable capping the number of evaluation threads.
const THREADS_ENV: &str = "CONEST_THREADS";

#[derive(Parser)]
#[command(
    name = "conest",
    version,
    about = "Collaborative nested sampling for spectroscopic surveys"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a survey and write survey.csv and truth.csv.
    Generate {
        /// Number of spectra.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        survey: SurveyArgs,
    },
    /// Analyse every spectrum of a survey file.
    Run {
        #[arg(long, default_value = "survey.csv")]
        survey: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Results directory.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Count model evaluations for the first N spectra, for several N.
    Scaling {
        #[arg(long, default_value = "survey.csv")]
        survey: PathBuf,
        /// Comma-separated survey sizes.
        #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000",
              value_parser = clap::value_parser!(u64).range(1..))]
        sizes: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Analyse simulated signal-free spectra and report a Bayes factor quantile.
    CalibrateNull {
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Quantile of the null Bayes factors used as detection threshold.
        #[arg(long, default_value_t = 0.999)]
        quantile: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        survey: SurveyArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Render figures (SVG plus CSV) from result files.
    Report {
        #[arg(long, default_value = "results/summary.csv")]
        summary: PathBuf,
        /// truth.csv of the analysed survey; enables the recovery figure.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// scaling.csv; enables the scaling figure.
        #[arg(long)]
        scaling: Option<PathBuf>,
        /// null_bf.csv; overlays the signal-free Bayes factors.
        #[arg(long)]
        null: Option<PathBuf>,
        /// Bayes factor above which a line counts as detected.
        #[arg(long, default_value_t = 10.0)]
        detect_b: f64,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

/// Survey simulation settings that the data do not pin down.
#[derive(Args, Clone)]
pub struct SurveyArgs {
    /// Pixel width in nm.
    #[arg(long, default_value_t = 1.0)]
    pub pixel_width: f64,
    /// Lower bound of the observed line location in nm.
    #[arg(long, default_value_t = 620.0)]
    pub location_min: f64,
    /// Upper bound of the observed line location in nm.
    #[arg(long, default_value_t = 780.0)]
    pub location_max: f64,
}

#[derive(Args, Clone)]
pub struct RunArgs {
    /// Live points per data set.
    #[arg(long, default_value_t = 400)]
    pub nlive: usize,
    /// Stop once the remaining evidence could change ln Z by less than this.
    #[arg(long, default_value_t = 0.5)]
    pub dlogz: f64,
    #[arg(long, default_value_t = 10)]
    pub superset_attempts: usize,
    #[arg(long, default_value_t = 10)]
    pub bootstrap_rounds: usize,
    /// Analyse the survey in independent chunks of this many spectra.
    #[arg(long)]
    pub chunk_size: Option<usize>,
    /// Equal-weight posterior samples per spectrum.
    #[arg(long, default_value_t = 1000)]
    pub resample_size: usize,
    /// Draw volume shrinkage factors instead of using their expectation.
    #[arg(long)]
    pub stochastic_ladder: bool,
}

impl RunArgs {
    pub fn config(&self, seed: u64) -> CliResult<RunConfig> {
        let config = RunConfig {
            n_live: self.nlive,
            superset_attempts: self.superset_attempts,
            bootstrap_rounds: self.bootstrap_rounds,
            seed,
            convergence_dlogz: self.dlogz,
            posterior_resample_size: self.resample_size,
            chunk_size: self.chunk_size,
            stochastic_ladder: self.stochastic_ladder,
            parallel: threads()? != Some(0),
            rebuild_every: None,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Thread cap from the environment; `Some(0)` selects single-threaded mode.
fn threads() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| {
            CliError::Usage(format!(
                "{THREADS_ENV} must be a non-negative integer, got `{v}`"
            ))
        }),
        Err(_) => Ok(None),
    }
}

fn setup_threads() -> CliResult<()> {
    if let Some(n) = threads()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Runtime(e.into()))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    setup_threads()?;
    match cli.command {
        Command::Generate {
            n,
            seed,
            out,
            survey,
        } => commands::generate(n as usize, seed, &survey, &out),
        Command::Run {
            survey,
            seed,
            out,
            run,
        } => {
            let config = run.config(seed)?;
            commands::run(&survey, &config, &out)
        }
        Command::Scaling {
            survey,
            sizes,
            seed,
            out,
            run,
        } => {
            let sizes: Vec<usize> = sizes.into_iter().map(|s| s as usize).collect();
            let config = run.config(seed)?;
            commands::scaling(&survey, &sizes, &config, &out)
        }
        Command::CalibrateNull {
            n,
            seed,
            quantile,
            out,
            survey,
            run,
        } => {
            let config = run.config(seed)?;
            commands::calibrate_null(n as usize, seed, quantile, &survey, &config, &out)
        }
        Command::Report {
            summary,
            truth,
            scaling,
            null,
            detect_b,
            out,
        } => {
            if !(detect_b > 0.0) {
                return Err(CliError::Usage("--detect-b must be positive".into()));
            }
            report::report(&report::ReportInputs {
                summary,
                truth,
                scaling,
                null,
                ln_b_threshold: detect_b.ln(),
                out,
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("conest: {e}");
            e.exit_code()
        }
    }
}
