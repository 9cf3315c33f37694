//! Command-line front end wiring all modules together.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data or model errors.
//! The `run` command reads an optional `key = value` config file; explicit
//! flags override file values, which override built-in defaults.

use std::error::Error as StdError;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::baseline::{self, BaselineConfig, PowerCurve};
use crate::features;
use crate::grid::{self, GridSpec, SubsetSelection, WindField};
use crate::ingest::{self, CapacityFactorSeries, PlantRegistry};
use crate::mlp::{BatchMode, MlpConfig};
use crate::pipeline::{
    self, axis_year_range, DataBundle, ExperimentConfig, SyntheticSeries,
    TrainSettings, Variant, YearRange,
};
use crate::quality::{self, QualityReport};

const DEFAULT_HIDDEN: usize = 60;
const DEFAULT_K_NEAREST: usize = 4;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

fn chain(err: &dyn StdError) -> String {
    let mut out = err.to_string();
    let mut source = err.source();
    while let Some(s) = source {
        let _ = write!(out, ": {s}");
        source = s.source();
    }
    out
}

macro_rules! data_error_from {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Data(chain(&e))
            }
        })*
    };
}

data_error_from!(
    crate::ingest::IngestError,
    crate::grid::GridError,
    crate::features::FeatureError,
    crate::mlp::MlpError,
    crate::pipeline::PipelineError,
    crate::quality::QualityError,
    crate::baseline::BaselineError
);

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "windsynth",
    version,
    about = "Synthesize and validate nationally aggregated wind power capacity factor time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic dataset (wind, plants, generation, capacity)
    Synth(SynthArgs),
    /// Compute and export the grid-point subset a variant would use
    Subset(SubsetArgs),
    /// Train a predictor on the whole provided period and save it
    Train(TrainArgs),
    /// Apply a saved predictor to a wind file and write a CF series
    Predict(PredictArgs),
    /// Compare a prediction series against observations and print metrics
    Evaluate(EvaluateArgs),
    /// Write the full quality-report bundle for a prediction series
    Report(ReportArgs),
    /// Export the assembled (unscaled) feature matrix as CSV
    DumpFeatures(DumpFeaturesArgs),
    /// Run a full experiment: subset, fold plan, train/predict, stitch, evaluate
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Seed for the scenario generator
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Number of calendar years, starting at 2010
    #[arg(long, default_value_t = 3)]
    years: usize,
    /// Number of plants to place
    #[arg(long, default_value_t = 25)]
    plants: usize,
    /// Grid width in longitude points
    #[arg(long, default_value_t = 6)]
    nlon: usize,
    /// Grid height in latitude points
    #[arg(long, default_value_t = 6)]
    nlat: usize,
    /// Grid origin longitude in degrees
    #[arg(long, default_value_t = 5.0)]
    lon0: f64,
    /// Grid origin latitude in degrees
    #[arg(long, default_value_t = 46.0)]
    lat0: f64,
    /// Longitude spacing in degrees
    #[arg(long, default_value_t = 0.625)]
    dlon: f64,
    /// Latitude spacing in degrees
    #[arg(long, default_value_t = 0.5)]
    dlat: f64,
    /// Power-curve CSV for the generating fleet (default: built-in curve)
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SubsetArgs {
    /// Wind CSV whose header defines the grid
    #[arg(long)]
    wind: PathBuf,
    /// Subsetting variant
    #[arg(long, value_parser = parse_variant)]
    variant: Variant,
    /// Plant registry CSV (required for mlm2 and mlm3)
    #[arg(long)]
    plants: Option<PathBuf>,
    /// Nearest grid points per plant for mlm2
    #[arg(long, default_value_t = DEFAULT_K_NEAREST)]
    k: usize,
    /// Selection CSV to write (index, lon, lat)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Wind CSV covering the training period
    #[arg(long)]
    wind: PathBuf,
    /// Plant registry CSV (required for mlm2 and mlm3)
    #[arg(long)]
    plants: Option<PathBuf>,
    /// Observed generation CSV (paired with --capacity)
    #[arg(long)]
    generation: Option<PathBuf>,
    /// Daily installed capacity CSV (paired with --generation)
    #[arg(long)]
    capacity: Option<PathBuf>,
    /// Observed capacity-factor CSV (alternative to generation + capacity)
    #[arg(long)]
    obs: Option<PathBuf>,
    /// Subsetting variant
    #[arg(long, value_parser = parse_variant)]
    variant: Variant,
    /// Nodes per hidden layer
    #[arg(long, default_value_t = DEFAULT_HIDDEN)]
    hidden: usize,
    /// Training seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training epochs
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    /// Gradient-descent learning rate
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    /// Batch mode: `full` or a minibatch size
    #[arg(long, default_value = "full", value_parser = parse_batch)]
    batch: BatchMode,
    /// Shuffle minibatch order each epoch
    #[arg(long, default_value_t = true, value_parser = clap::value_parser!(bool))]
    shuffle: bool,
    /// Nearest grid points per plant for mlm2
    #[arg(long, default_value_t = DEFAULT_K_NEAREST)]
    k: usize,
    /// Predictor file to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Saved predictor file
    #[arg(long)]
    model: PathBuf,
    /// Wind CSV to predict from (same grid as at training time)
    #[arg(long)]
    wind: PathBuf,
    /// Prediction CSV to write (timestamp, cf)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Observed capacity-factor CSV
    #[arg(long)]
    obs: PathBuf,
    /// Predicted capacity-factor CSV
    #[arg(long)]
    pred: PathBuf,
    /// Report JSON to write (optional)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Observed capacity-factor CSV
    #[arg(long)]
    obs: PathBuf,
    /// Predicted capacity-factor CSV
    #[arg(long)]
    pred: PathBuf,
    /// Directory for report JSON, table CSVs and plot data
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DumpFeaturesArgs {
    /// Wind CSV whose header defines the grid
    #[arg(long)]
    wind: PathBuf,
    /// Plant registry CSV (required for mlm2 and mlm3)
    #[arg(long)]
    plants: Option<PathBuf>,
    /// Subsetting variant
    #[arg(long, value_parser = parse_variant)]
    variant: Variant,
    /// Nearest grid points per plant for mlm2
    #[arg(long, default_value_t = DEFAULT_K_NEAREST)]
    k: usize,
    /// Feature CSV to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Config file with `key = value` lines; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Wind CSV [config: wind]
    #[arg(long)]
    wind: Option<PathBuf>,
    /// Plant registry CSV [config: plants]
    #[arg(long)]
    plants: Option<PathBuf>,
    /// Observed generation CSV [config: generation]
    #[arg(long)]
    generation: Option<PathBuf>,
    /// Daily installed capacity CSV [config: capacity]
    #[arg(long)]
    capacity: Option<PathBuf>,
    /// Observed capacity-factor CSV, replaces generation + capacity [config: obs]
    #[arg(long)]
    obs: Option<PathBuf>,
    /// Variant: mlm1, mlm2 or mlm3 [config: variant, default: mlm2]
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    /// Candidate hidden sizes, comma separated [config: hidden, default: 60,80]
    #[arg(long)]
    hidden: Option<String>,
    /// Experiment seed [config: seed, default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Year range as FIRST:LAST [config: years, default: whole observed years]
    #[arg(long, value_parser = parse_year_range)]
    years: Option<YearRange>,
    /// Predict-window length in years [config: block, default: 2]
    #[arg(long)]
    block: Option<usize>,
    /// Maximum folds trained in parallel [config: jobs, default: 1]
    #[arg(long)]
    jobs: Option<usize>,
    /// Training epochs [config: epochs, default: 500]
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate [config: learning_rate, default: 0.1]
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Batch mode: `full` or a minibatch size [config: batch, default: full]
    #[arg(long, value_parser = parse_batch)]
    batch: Option<BatchMode>,
    /// Shuffle minibatch order each epoch [config: shuffle, default: true]
    #[arg(long, value_parser = clap::value_parser!(bool))]
    shuffle: Option<bool>,
    /// Nearest grid points per plant for mlm2 [config: k, default: 4]
    #[arg(long)]
    k: Option<usize>,
    /// Output directory [config: out]
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::parse(s).ok_or_else(|| format!("unknown variant `{s}` (expected mlm1, mlm2 or mlm3)"))
}

fn parse_batch(s: &str) -> Result<BatchMode, String> {
    if s.eq_ignore_ascii_case("full") {
        return Ok(BatchMode::Full);
    }
    let size: usize = s
        .parse()
        .map_err(|_| format!("bad batch mode `{s}` (expected `full` or a positive size)"))?;
    if size == 0 {
        return Err("minibatch size must be positive".into());
    }
    Ok(BatchMode::Minibatch(size))
}

fn parse_hidden_list(s: &str) -> Result<Vec<usize>, String> {
    let sizes: Result<Vec<usize>, _> = s.split(',').map(|p| p.trim().parse::<usize>()).collect();
    let sizes = sizes.map_err(|_| format!("bad hidden sizes `{s}` (expected e.g. 60 or 60,80)"))?;
    if sizes.is_empty() || sizes.iter().any(|&h| h == 0) {
        return Err("hidden sizes must be positive".into());
    }
    Ok(sizes)
}

fn parse_year_range(s: &str) -> Result<YearRange, String> {
    let parse_year = |p: &str| {
        p.trim()
            .parse::<i32>()
            .map_err(|_| format!("bad year `{p}`"))
    };
    match s.split_once(':') {
        Some((a, b)) => {
            let (first, last) = (parse_year(a)?, parse_year(b)?);
            if first > last {
                return Err(format!("year range `{s}` is descending"));
            }
            Ok(YearRange::new(first, last))
        }
        None => {
            let y = parse_year(s)?;
            Ok(YearRange::new(y, y))
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn run_cli<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut argv: Vec<String> = vec!["windsynth".to_string()];
    argv.extend(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(err) => {
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    0
                }
                _ => {
                    eprint!("{err}");
                    1
                }
            };
        }
    };
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Subset(args) => cmd_subset(args),
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Report(args) => cmd_report(args),
        Command::DumpFeatures(args) => cmd_dump_features(args),
        Command::Run(args) => cmd_run(args),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {}", err.message());
            err.exit_code()
        }
    }
}

fn load_wind(path: &Path) -> Result<(GridSpec, WindField), CliError> {
    let grid = grid::sniff_wind_csv_grid(path)?;
    let field = grid::load_wind_csv(path, &grid)?;
    Ok((grid, field))
}

fn load_plants_if(path: Option<&PathBuf>) -> Result<Option<PlantRegistry>, CliError> {
    path.map(|p| ingest::parse_plants_csv(p)).transpose().map_err(Into::into)
}

fn load_observed(
    obs: Option<&PathBuf>,
    generation: Option<&PathBuf>,
    capacity: Option<&PathBuf>,
) -> Result<CapacityFactorSeries, CliError> {
    match (obs, generation, capacity) {
        (Some(obs), None, None) => Ok(ingest::parse_cf_csv(obs)?),
        (None, Some(gen), Some(cap)) => {
            let gen = ingest::parse_generation_csv(gen)?;
            let cap = ingest::parse_capacity_csv(cap)?;
            Ok(ingest::to_capacity_factors(&gen, &cap)?)
        }
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => Err(CliError::Usage(
            "pass either --obs or --generation with --capacity, not both".into(),
        )),
        _ => Err(CliError::Usage(
            "observations required: --obs, or --generation together with --capacity".into(),
        )),
    }
}

fn write_selection_csv(
    path: &Path,
    selection: &SubsetSelection,
    grid: &GridSpec,
) -> Result<(), CliError> {
    let mut out = String::from("index,lon,lat\n");
    for &idx in &selection.indices {
        let (lon, lat) = grid.point(idx);
        let _ = writeln!(out, "{idx},{lon},{lat}");
    }
    fs::write(path, out)?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    if args.years == 0 || args.plants == 0 || args.nlon == 0 || args.nlat == 0 {
        return Err(CliError::Usage(
            "--years, --plants, --nlon and --nlat must be positive".into(),
        ));
    }
    let grid = GridSpec {
        lon0: args.lon0,
        lat0: args.lat0,
        dlon: args.dlon,
        dlat: args.dlat,
        nlon: args.nlon,
        nlat: args.nlat,
    };
    if grid.dlon <= 0.0 || grid.dlat <= 0.0 {
        return Err(CliError::Usage("--dlon and --dlat must be positive".into()));
    }
    let curve = match &args.curve {
        Some(path) => PowerCurve::from_csv(path)?,
        None => PowerCurve::default_turbine(),
    };
    fs::create_dir_all(&args.out)?;

    let mut scenario = baseline::synth_scenario(args.seed, args.years, &grid, args.plants);
    if args.curve.is_some() {
        // regenerate observations with the requested curve
        let cfg = BaselineConfig {
            curve,
            ..BaselineConfig::default()
        };
        let clean = baseline::simulate_fleet(&scenario.wind, &scenario.plants, &cfg)?;
        scenario.observed = clean;
    }

    // constant daily capacity; generation = cf * capacity reproduces the CF
    // series exactly under the ingest conversion
    let total_capacity = scenario.plants.total_capacity_mw();
    let axis = scenario.observed.axis;
    let n_days = axis.len() / 24;
    let capacity = ingest::CapacitySeries {
        start_date: axis.start().date_naive(),
        values: vec![total_capacity; n_days],
    };
    let generation = ingest::GenerationSeries {
        axis,
        values: scenario
            .observed
            .values
            .iter()
            .map(|cf| cf * total_capacity)
            .collect(),
    };

    grid::write_wind_csv(args.out.join("wind.csv"), &scenario.wind)?;
    ingest::write_plants_csv(args.out.join("plants.csv"), &scenario.plants)?;
    ingest::write_generation_csv(args.out.join("generation.csv"), &generation)?;
    ingest::write_capacity_csv(args.out.join("capacity.csv"), &capacity)?;

    println!(
        "synth: seed {} | {} hours x {} grid points | {} plants ({:.1} MW) | wrote wind.csv plants.csv generation.csv capacity.csv to {}",
        args.seed,
        axis.len(),
        grid.n_points(),
        scenario.plants.len(),
        total_capacity,
        args.out.display()
    );
    Ok(())
}

fn cmd_subset(args: SubsetArgs) -> Result<(), CliError> {
    let (grid, _) = {
        // only the header is needed for the grid
        let grid = grid::sniff_wind_csv_grid(&args.wind)?;
        (grid, ())
    };
    let plants = load_plants_if(args.plants.as_ref())?;
    let cfg = ExperimentConfig {
        k_nearest: args.k,
        ..ExperimentConfig::new(args.variant, DEFAULT_HIDDEN, 0, YearRange::new(2010, 2011))
    };
    let selection = pipeline::experiment_selection(&cfg, &grid, plants.as_ref())?;
    println!(
        "{}: {} of {} grid points",
        selection.strategy.label(),
        selection.len(),
        grid.n_points()
    );
    if let Some(out) = &args.out {
        write_selection_csv(out, &selection, &grid)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let (_, wind) = load_wind(&args.wind)?;
    let plants = load_plants_if(args.plants.as_ref())?;
    let observed = load_observed(args.obs.as_ref(), args.generation.as_ref(), args.capacity.as_ref())?;
    let mlp_config = MlpConfig {
        hidden_sizes: [args.hidden; 3],
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        seed: args.seed,
        batch_mode: args.batch,
        shuffle: args.shuffle,
    };
    let (predictor, report) = pipeline::fit_predictor(
        &wind,
        plants.as_ref(),
        &observed,
        args.variant,
        args.k,
        &mlp_config,
    )?;
    pipeline::save_predictor(&predictor, &args.out)?;
    println!(
        "trained {} on {} hours ({} columns, hidden {}): final loss {:.6e}; wrote {}",
        args.variant.label(),
        observed.axis.len(),
        predictor.model.n_inputs(),
        args.hidden,
        report.final_loss(),
        args.out.display()
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    let predictor = pipeline::load_predictor(&args.model)?;
    let (_, wind) = load_wind(&args.wind)?;
    let series = pipeline::predict_series(&predictor, &wind)?;
    ingest::write_cf_csv(&args.out, &series)?;
    println!(
        "predicted {} hours ({} negative); wrote {}",
        series.axis.len(),
        series.negative_count(),
        args.out.display()
    );
    Ok(())
}

fn print_summary(report: &QualityReport) {
    println!("hours       = {}", report.n_hours);
    println!("correlation = {:.6}", report.correlation);
    println!("nmae        = {:.6}", report.nmae);
    println!("nrmse       = {:.6}", report.nrmse);
    println!(
        "variance    = {:.6} observed, {:.6} predicted",
        report.variance_observed, report.variance_predicted
    );
    println!("negatives   = {}", report.negative_predictions);
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let obs = ingest::parse_cf_csv(&args.obs)?;
    let pred = ingest::parse_cf_csv(&args.pred)?;
    let report = quality::full_report(&obs, &pred)?;
    print_summary(&report);
    if let Some(out) = &args.out {
        report.write_json(out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn write_report_bundle(report: &QualityReport, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    report.write_json(dir.join("report.json"))?;
    report.write_metrics_csv(dir.join("table3_metrics.csv"))?;
    report.write_extremes_csv(dir.join("table3_extremes.csv"))?;
    report.write_ramps_csv(dir.join("table4_ramps.csv"))?;
    report.write_plot_data(dir)?;
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    let obs = ingest::parse_cf_csv(&args.obs)?;
    let pred = ingest::parse_cf_csv(&args.pred)?;
    let report = quality::full_report(&obs, &pred)?;
    write_report_bundle(&report, &args.out)?;
    print_summary(&report);
    println!("wrote report bundle to {}", args.out.display());
    Ok(())
}

fn cmd_dump_features(args: DumpFeaturesArgs) -> Result<(), CliError> {
    let (grid, wind) = load_wind(&args.wind)?;
    let plants = load_plants_if(args.plants.as_ref())?;
    let cfg = ExperimentConfig {
        k_nearest: args.k,
        ..ExperimentConfig::new(args.variant, DEFAULT_HIDDEN, 0, YearRange::new(2010, 2011))
    };
    let selection = pipeline::experiment_selection(&cfg, &grid, plants.as_ref())?;
    let matrix = features::assemble(&wind, &selection, &wind.axis)?;

    let file = fs::File::create(&args.out)?;
    let mut w = std::io::BufWriter::new(file);
    use std::io::Write as _;
    write!(w, "timestamp")?;
    for column in &matrix.columns {
        write!(w, ",{}", column.name())?;
    }
    writeln!(w)?;
    for t in 0..matrix.n_rows() {
        write!(w, "{}", ingest::format_hour(matrix.axis.timestamp(t)))?;
        for v in matrix.data.row(t) {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    println!(
        "wrote {} rows x {} columns to {}",
        matrix.n_rows(),
        matrix.n_cols(),
        args.out.display()
    );
    Ok(())
}

/// `key = value` config file: blank lines and `#` comments allowed,
/// unknown keys rejected.
#[derive(Debug, Default)]
struct RunConfigFile {
    values: std::collections::BTreeMap<String, String>,
}

const RUN_CONFIG_KEYS: [&str; 16] = [
    "variant",
    "hidden",
    "seed",
    "years",
    "block",
    "jobs",
    "epochs",
    "learning_rate",
    "batch",
    "shuffle",
    "k",
    "wind",
    "plants",
    "generation",
    "capacity",
    "obs",
];

impl RunConfigFile {
    fn parse(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        let mut values = std::collections::BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!(
                    "{}:{}: expected `key = value`, found `{line}`",
                    path.display(),
                    i + 1
                ))
            })?;
            let key = key.trim().to_string();
            if !RUN_CONFIG_KEYS.contains(&key.as_str()) && key != "out" {
                return Err(CliError::Usage(format!(
                    "{}:{}: unknown config key `{key}`",
                    path.display(),
                    i + 1
                )));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse_with<T>(
        &self,
        key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => parse(raw)
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}"))),
        }
    }
}

struct RunPlan {
    wind: PathBuf,
    plants: Option<PathBuf>,
    generation: Option<PathBuf>,
    capacity: Option<PathBuf>,
    obs: Option<PathBuf>,
    variant: Variant,
    hidden: Vec<usize>,
    seed: u64,
    years: Option<YearRange>,
    block: usize,
    jobs: usize,
    train: TrainSettings,
    k: usize,
    out: PathBuf,
}

fn merge_run_args(args: RunArgs) -> Result<RunPlan, CliError> {
    let file = match &args.config {
        Some(path) => RunConfigFile::parse(path)?,
        None => RunConfigFile::default(),
    };
    let path_of = |s: &str| -> Result<PathBuf, String> { Ok(PathBuf::from(s)) };
    let parse_u64 = |s: &str| s.parse::<u64>().map_err(|e| e.to_string());
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| e.to_string());
    let parse_f64 = |s: &str| s.parse::<f64>().map_err(|e| e.to_string());
    let parse_bool = |s: &str| s.parse::<bool>().map_err(|e| e.to_string());

    let wind = args
        .wind
        .or(file.parse_with("wind", path_of)?)
        .ok_or_else(|| CliError::Usage("missing --wind (or `wind` in the config file)".into()))?;
    let out = args
        .out
        .or(file.parse_with("out", path_of)?)
        .ok_or_else(|| CliError::Usage("missing --out (or `out` in the config file)".into()))?;

    let defaults = TrainSettings::default();
    Ok(RunPlan {
        wind,
        plants: args.plants.or(file.parse_with("plants", path_of)?),
        generation: args.generation.or(file.parse_with("generation", path_of)?),
        capacity: args.capacity.or(file.parse_with("capacity", path_of)?),
        obs: args.obs.or(file.parse_with("obs", path_of)?),
        variant: args
            .variant
            .or(file.parse_with("variant", |s| parse_variant(s))?)
            .unwrap_or(Variant::Mlm2),
        hidden: args
            .hidden
            .as_deref()
            .map(parse_hidden_list)
            .transpose()
            .map_err(CliError::Usage)?
            .or(file.parse_with("hidden", |s| parse_hidden_list(s))?)
            .unwrap_or_else(|| vec![60, 80]),
        seed: args.seed.or(file.parse_with("seed", parse_u64)?).unwrap_or(0),
        years: args.years.or(file.parse_with("years", |s| parse_year_range(s))?),
        block: args
            .block
            .or(file.parse_with("block", parse_usize)?)
            .unwrap_or(2),
        jobs: args
            .jobs
            .or(file.parse_with("jobs", parse_usize)?)
            .unwrap_or(1)
            .max(1),
        train: TrainSettings {
            learning_rate: args
                .learning_rate
                .or(file.parse_with("learning_rate", parse_f64)?)
                .unwrap_or(defaults.learning_rate),
            epochs: args
                .epochs
                .or(file.parse_with("epochs", parse_usize)?)
                .unwrap_or(defaults.epochs),
            batch_mode: args
                .batch
                .or(file.parse_with("batch", |s| parse_batch(s))?)
                .unwrap_or(defaults.batch_mode),
            shuffle: args
                .shuffle
                .or(file.parse_with("shuffle", parse_bool)?)
                .unwrap_or(defaults.shuffle),
        },
        k: args.k.or(file.parse_with("k", parse_usize)?).unwrap_or(DEFAULT_K_NEAREST),
        out,
    })
}

fn write_folds_csv(path: &Path, synthetic: &SyntheticSeries) -> Result<(), CliError> {
    let axis = &synthetic.series.axis;
    let mut out = String::from("fold,predict_years,train_years,predict_start,predict_end\n");
    for prov in &synthetic.provenance {
        let train_years: Vec<String> = prov.train_years.iter().map(|y| y.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            prov.fold_index,
            prov.predict_years,
            train_years.join(";"),
            ingest::format_hour(axis.timestamp(prov.predict_rows.start)),
            ingest::format_hour(axis.timestamp(prov.predict_rows.end - 1)),
        );
    }
    fs::write(path, out)?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let plan = merge_run_args(args)?;
    if plan.block == 0 {
        return Err(CliError::Usage("--block must be at least 1".into()));
    }

    let (grid, wind) = load_wind(&plan.wind)?;
    let plants = load_plants_if(plan.plants.as_ref())?;
    let observed = load_observed(plan.obs.as_ref(), plan.generation.as_ref(), plan.capacity.as_ref())?;
    let years = match plan.years {
        Some(years) => years,
        None => axis_year_range(&observed.axis)?,
    };

    fs::create_dir_all(&plan.out)?;
    let bundle = DataBundle {
        wind: &wind,
        plants: plants.as_ref(),
        observed: &observed,
    };

    println!(
        "run: variant {} | years {} | block {} | candidates {:?} | seed {}",
        plan.variant.label(),
        years,
        plan.block,
        plan.hidden,
        plan.seed
    );

    let mut candidates: Vec<(String, SyntheticSeries)> = Vec::new();
    for &hidden in &plan.hidden {
        let cfg = ExperimentConfig {
            variant: plan.variant,
            hidden,
            seed: plan.seed,
            years,
            block: plan.block,
            k_nearest: plan.k,
            train: plan.train,
        };
        let label = format!("{}-h{}", plan.variant.label(), hidden);
        let synthetic = pipeline::run_experiment(&cfg, &bundle, plan.jobs)?;
        candidates.push((label, synthetic));
    }

    let period_axis = pipeline::axis_for_years(years);
    let obs_offset = observed
        .axis
        .offset_of(&period_axis)
        .ok_or_else(|| CliError::Data("observations do not cover the experiment period".into()))?;
    let obs_period = CapacityFactorSeries::new(
        period_axis,
        observed.values[obs_offset..obs_offset + period_axis.len()].to_vec(),
    );

    // table2: headline metrics for every candidate
    let mut table2 = String::from("label,hidden,nmae,nrmse,correlation\n");
    let mut scored = Vec::new();
    for ((label, synthetic), &hidden) in candidates.iter().zip(&plan.hidden) {
        let metrics = quality::summary_metrics(&obs_period.values, &synthetic.series.values)
            .map_err(|e| CliError::Data(chain(&e)))?;
        let _ = writeln!(
            table2,
            "{label},{hidden},{},{},{}",
            metrics.nmae, metrics.nrmse, metrics.correlation
        );
        println!(
            "candidate {label}: nmae {:.4}, nrmse {:.4}, correlation {:.4}",
            metrics.nmae, metrics.nrmse, metrics.correlation
        );
        scored.push((label.clone(), metrics));
    }
    fs::write(plan.out.join("table2.csv"), table2)?;

    let winner = pipeline::select_model_from_metrics(&scored)?;
    let (_, winning) = candidates
        .iter()
        .find(|(label, _)| *label == winner)
        .expect("winner comes from the candidate list");
    println!("selected {winner}");

    let selection = pipeline::experiment_selection(
        &ExperimentConfig {
            variant: plan.variant,
            hidden: plan.hidden[0],
            seed: plan.seed,
            years,
            block: plan.block,
            k_nearest: plan.k,
            train: plan.train,
        },
        &grid,
        plants.as_ref(),
    )?;
    write_selection_csv(&plan.out.join("selection.csv"), &selection, &grid)?;
    write_folds_csv(&plan.out.join("folds.csv"), winning)?;
    ingest::write_cf_csv(plan.out.join("prediction.csv"), &winning.series)?;

    let report = quality::full_report(&obs_period, &winning.series)?;
    write_report_bundle(&report, &plan.out)?;
    print_summary(&report);
    println!("wrote run outputs to {}", plan.out.display());
    Ok(())
}
