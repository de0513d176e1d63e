use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use manifold_kde::experiments::{
    bias_order_study, run_experiment, write_estimates_csv, Band, DimensionChoice, ExperimentConfig,
    OrderStudyConfig,
};
use manifold_kde::{
    load_csv, tune_with_rule, AccumulatorSpec, DensityEstimator, GeneratorKind, GeneratorSpec,
    KernelParams, RatioForm, Result, SampleCount, TuningGrid, TuningRule,
};

#[derive(Parser)]
#[command(
    name = "manifold-kde",
    version,
    about = "Boundary-corrected kernel density estimation on point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic dataset and write points.csv and labels.csv.
    Generate {
        #[command(flatten)]
        data: DataArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate every estimator at the query points (the data by default).
    Estimate {
        /// Sample coordinates, one point per line.
        #[arg(long)]
        data: PathBuf,
        /// Query coordinates; defaults to the samples themselves.
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Bandwidth. Required unless `--m auto`, which defaults it to the tuned scale.
        #[arg(long)]
        h: Option<f64>,
        /// Intrinsic dimension, or `auto` to tune it from the data.
        #[arg(long, default_value = "auto")]
        m: DimensionChoice,
        #[command(flatten)]
        est: EstimatorArgs,
        #[arg(long, default_value = "argmax")]
        rule: TuningRule,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the bandwidth/dimension tuning curve as JSON.
    Tune {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1.1)]
        base: f64,
        #[arg(long, default_value_t = -20, allow_negative_numbers = true)]
        j_min: i32,
        #[arg(long, default_value_t = 20, allow_negative_numbers = true)]
        j_max: i32,
        #[arg(long, default_value = "argmax")]
        rule: TuningRule,
        /// Also write the JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeated runs on a generator: per-point CSV, profiles and band summaries.
    Experiment {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        h: f64,
        /// Intrinsic dimension, or `auto` to tune on the first repeat.
        #[arg(long)]
        m: DimensionChoice,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        /// Clamp negative estimates to zero in the profiles.
        #[arg(long)]
        clamp_negative: bool,
        #[arg(long, default_value = "argmax")]
        rule: TuningRule,
        #[command(flatten)]
        est: EstimatorArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bias against bandwidth with fitted log-log slopes per estimator.
    OrderStudy {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated bandwidths, at least three.
        #[arg(long, value_delimiter = ',', required = true)]
        h_list: Vec<f64>,
        #[arg(long)]
        m: f64,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        /// Query points per bandwidth.
        #[arg(long, default_value_t = 32)]
        queries: usize,
        #[arg(long, default_value = "boundary")]
        band: Band,
        #[command(flatten)]
        est: EstimatorArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    kind: GeneratorKind,
    /// Number of proposals to draw; the accepted count is random.
    #[arg(long, conflicts_with = "target", required_unless_present = "target")]
    proposals: Option<usize>,
    /// Number of accepted samples to produce.
    #[arg(long)]
    target: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl DataArgs {
    fn spec(&self) -> Result<GeneratorSpec> {
        let count = match (self.proposals, self.target) {
            (Some(n), _) => SampleCount::Proposals(n),
            (None, Some(n)) => SampleCount::Target(n),
            (None, None) => unreachable!("clap requires one of the counts"),
        };
        GeneratorSpec::new(self.kind, count, self.seed)
    }
}

#[derive(Args)]
struct EstimatorArgs {
    /// Kernel sums drop terms below this weight; 0 sums every pair.
    #[arg(long, default_value_t = manifold_kde::experiments::DEFAULT_CUTOFF_EPSILON)]
    epsilon: f64,
    /// Extrapolation ratio form: `product` or `quotient`.
    #[arg(long, default_value = "product")]
    ratio: RatioForm,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Every variant already renders its source in the message.
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate { data, out } => {
            let labeled = data.spec()?.generate()?;
            let (points, labels) = labeled.save(&out)?;
            info!(
                "wrote {} samples to {} and {}",
                labeled.len(),
                points.display(),
                labels.display()
            );
        }
        Command::Estimate {
            data,
            queries,
            h,
            m,
            est,
            rule,
            out,
        } => {
            let cloud = load_csv::<f64>(&data)?;
            let (h, m) = match m {
                DimensionChoice::Fixed(m) => {
                    let h = h.ok_or_else(|| {
                        manifold_kde::Error::Domain("--h is required with a fixed --m".into())
                    })?;
                    (h, m)
                }
                DimensionChoice::Auto => {
                    let t = tune_with_rule(&cloud, &TuningGrid::default(), rule)?;
                    info!(
                        "tuned h* = {}, m = {} (rounded {})",
                        t.h_star,
                        t.m_hat,
                        t.rounded_dimension()
                    );
                    (h.unwrap_or(t.h_star), t.rounded_dimension())
                }
            };
            let queries = match queries {
                Some(path) => load_csv::<f64>(&path)?,
                None => cloud.clone(),
            };
            let estimator = DensityEstimator::new(
                &cloud,
                KernelParams::new(h, m)?,
                AccumulatorSpec::truncated(est.epsilon)?,
            )?
            .with_ratio_form(est.ratio);
            let bundles = estimator.estimate_all(&queries)?;
            write_estimates_csv(&out, &queries, &bundles)?;
            info!(
                "wrote {} estimates (h = {h}, m = {m}) to {}",
                bundles.len(),
                out.display()
            );
        }
        Command::Tune {
            data,
            base,
            j_min,
            j_max,
            rule,
            out,
        } => {
            let cloud = load_csv::<f64>(&data)?;
            let grid = TuningGrid::new(base, j_min, j_max)?;
            let result = tune_with_rule(&cloud, &grid, rule)?;
            let json = serde_json::to_string_pretty(&result)?;
            if let Some(path) = out {
                std::fs::write(&path, &json).map_err(|e| io_error(&path, e))?;
            }
            emit(&json);
        }
        Command::Experiment {
            data,
            h,
            m,
            repeats,
            bins,
            clamp_negative,
            rule,
            est,
            out,
        } => {
            let mut config = ExperimentConfig::new(data.spec()?, h, m);
            config.repeats = repeats;
            config.bins = bins;
            config.clamp_negative = clamp_negative;
            config.tuning_rule = rule;
            config.cutoff_epsilon = est.epsilon;
            config.ratio_form = est.ratio;
            config.output_dir = out;
            let report = run_experiment(&config)?;
            emit(&serde_json::to_string_pretty(&report.summary())?);
        }
        Command::OrderStudy {
            data,
            h_list,
            m,
            repeats,
            queries,
            band,
            est,
            out,
        } => {
            let mut config = OrderStudyConfig::new(data.spec()?, h_list, m, repeats);
            config.queries = queries;
            config.band = band;
            config.cutoff_epsilon = est.epsilon;
            config.ratio_form = est.ratio;
            config.output_dir = out;
            let report = bias_order_study(&config)?;
            emit(&serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

/// Prints to stdout, treating a closed pipe as success.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn io_error(path: &std::path::Path, source: std::io::Error) -> manifold_kde::Error {
    manifold_kde::Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
