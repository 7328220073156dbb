use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rmtgrid::freeprob::{McEnsemble, Polynomial};
use rmtgrid::gridsim::Preset;
use rmtgrid::sa::LawCheckConfig;
use rmtgrid_cli::commands::{self, FreeProbOptions, SpectrumSource};
use rmtgrid_cli::config::{RunConfig, DEFAULT_MIN_RUN, DEFAULT_SEED};
use rmtgrid_cli::{CliError, CliResult, Outcome};

/// Random-matrix analytics for multichannel measurement streams.
///
/// Exit status: 0 clean / H0, 2 anomaly / H1, 1 error.
#[derive(Parser)]
#[command(name = "rmtgrid", version)]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, env = "RMTGRID_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a grid event script and write the voltage stream as CSV.
    Simulate {
        #[arg(long, value_enum, default_value_t = PresetArg::Ieee118)]
        preset: PresetArg,
        #[arg(long)]
        output: PathBuf,
    },
    /// Ring-law and M-P anomaly checks on moving windows of a stream.
    Lawcheck {
        #[arg(long)]
        input: PathBuf,
        /// JSON report path; series go to <output>.windows.csv and <output>.esd.csv.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        window: WindowArgs,
        /// Comma-separated LES indicators: count, moment-k, log-det, likelihood-ratio (msr is always on).
        #[arg(long, default_value = "msr")]
        indicator: String,
        /// Slack on the ring radii.
        #[arg(long, default_value_t = LawCheckConfig::default().delta)]
        epsilon: f64,
        /// Flagged windows in a row needed to report an anomaly.
        #[arg(long, default_value_t = DEFAULT_MIN_RUN)]
        min_run: usize,
    },
    /// Pooled U-statistic test for a covariance change across q windows.
    Ustat {
        #[arg(long)]
        input: PathBuf,
        /// JSON report path; printed to standard output when absent.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        q: usize,
        #[arg(long, default_value_t = 50)]
        ng: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Density of a polynomial in free variables against Monte-Carlo samples.
    Freeprob {
        #[arg(long, value_enum)]
        polynomial: PolynomialArg,
        /// One law for all variables, or one per variable separated by commas.
        #[arg(long, value_delimiter = ',', default_value = "semicircle")]
        laws: Vec<LawArg>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 400)]
        grid_points: usize,
        /// Distance of the evaluation line above the real axis.
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        /// Monte-Carlo matrix size.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Monte-Carlo repetitions.
        #[arg(long, default_value_t = 10)]
        reps: usize,
    },
    /// Empirical spectral distribution of an ensemble draw or a stream window with its limit law.
    Spectrum {
        /// Stream to analyze instead of an ensemble.
        #[arg(long, conflicts_with = "ensemble")]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        ensemble: Option<EnsembleArg>,
        /// Matrix size (rows for lue).
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Samples per row for lue.
        #[arg(long, default_value_t = 2000)]
        t: usize,
        /// Trailing columns of the stream to use.
        #[arg(long, default_value_t = 240)]
        window: usize,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct WindowArgs {
    #[arg(long, default_value_t = 240)]
    window: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Ieee118,
    Ieee118Fusion,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolynomialArg {
    Identity,
    Anticommutator,
    AnticommutatorPlusSquare,
}

#[derive(Clone, Copy, ValueEnum)]
enum LawArg {
    Semicircle,
    FreePoisson,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnsembleArg {
    Gue,
    Lue,
}

fn run(cli: Cli) -> CliResult<Outcome> {
    let seed = cli.seed;
    match cli.command {
        Command::Simulate { preset, output } => {
            let preset = match preset {
                PresetArg::Ieee118 => Preset::Ieee118,
                PresetArg::Ieee118Fusion => Preset::Ieee118Fusion,
            };
            let s = commands::simulate(preset, seed, &output)?;
            eprintln!("wrote {} samples x {} sensors to {}", s.samples, s.sensors, output.display());
            Ok(Outcome::Clean)
        }
        Command::Lawcheck { input, output, window, indicator, epsilon, min_run } => {
            let cfg = RunConfig {
                window_t: window.window,
                stride: window.stride,
                seed,
                indicators: RunConfig::parse_indicators(&indicator)?,
                law: LawCheckConfig { delta: epsilon, ..LawCheckConfig::default() },
                min_run,
                ..RunConfig::default()
            };
            let (r, outcome) = commands::lawcheck(&input, &cfg, &output)?;
            println!(
                "windows {} flagged {} ({:.4}) first_flag {} longest_run {} anomaly {}",
                r.windows,
                r.flagged_windows,
                r.flagged_fraction,
                r.first_flag_t_end.map_or_else(|| "none".into(), |t| t.to_string()),
                r.longest_flagged_run,
                r.anomaly
            );
            Ok(outcome)
        }
        Command::Ustat { input, output, q, ng, alpha } => {
            let cfg = RunConfig { q, n_g: ng, alpha, seed, ..RunConfig::default() };
            let (r, outcome) = commands::ustat(&input, &cfg, output.as_deref())?;
            eprintln!("R = {} threshold = {} decision {:?}", r.r_statistic, r.threshold, r.decision);
            Ok(outcome)
        }
        Command::Freeprob { polynomial, laws, output, grid_points, epsilon, n, reps } => {
            let polynomial = match polynomial {
                PolynomialArg::Identity => Polynomial::Identity,
                PolynomialArg::Anticommutator => Polynomial::Anticommutator,
                PolynomialArg::AnticommutatorPlusSquare => Polynomial::AnticommutatorPlusSquare,
            };
            let laws = laws
                .iter()
                .map(|l| match l {
                    LawArg::Semicircle => McEnsemble::Gaussian,
                    LawArg::FreePoisson => McEnsemble::Wishart,
                })
                .collect();
            let opts = FreeProbOptions { polynomial, laws, n, reps, grid_points, epsilon, seed };
            let s = commands::freeprob(&opts, &output)?;
            if !s.flagged_points.is_empty() {
                eprintln!("solver did not converge at {} grid points (interpolated): {:?}", s.flagged_points.len(), s.flagged_points);
            }
            println!("KS {}", s.ks);
            Ok(Outcome::Clean)
        }
        Command::Spectrum { input, ensemble, n, t, window, bins, output } => {
            let source = match (input, ensemble) {
                (Some(input), _) => SpectrumSource::Stream { input, window, seed },
                (None, Some(EnsembleArg::Gue)) => SpectrumSource::Gue { n, seed },
                (None, Some(EnsembleArg::Lue)) => SpectrumSource::Lue { p: n, t, seed },
                (None, None) => return Err(CliError::Config("spectrum needs --input or --ensemble".into())),
            };
            let s = commands::spectrum(&source, bins, &output)?;
            println!("sup_gap {}", s.sup_gap);
            Ok(Outcome::Clean)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(o) => ExitCode::from(o.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
