//! `angcong`: histograms, fitting, simulation and prediction for the
//! direction-dependent congestion model.
//!
//! Exit codes: 0 ok, 2 input error, 3 insufficient data, 4 numerical or
//! spec error. Settings resolve as flags, then `--config` file, then defaults.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use angcong::exec::Execution;
use angcong::pipeline::{cmd_fit, cmd_hist, cmd_predict, cmd_simulate, RunConfig, Written};
use angcong::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "angcong", version, about = "Direction-dependent travel pace from angular histograms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write demand, network and pace-by-direction histograms with rose diagrams.
    Hist(DataArgs),
    /// Fit the Fourier-feature regression and write the report, curves and model.
    Fit(FitArgs),
    /// Generate synthetic trips and a road network from a scenario file.
    Simulate(SimulateArgs),
    /// Predict pace for one or more headings from a saved model.
    Predict(PredictArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// key = value settings file; flags given here take precedence.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Run single-threaded.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct DataArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Trip CSV.
    #[arg(long, value_name = "FILE")]
    trips: Option<PathBuf>,
    /// Road network CSV.
    #[arg(long, value_name = "FILE")]
    network: Option<PathBuf>,
    /// Number of Fourier harmonics K [default: 8].
    #[arg(short = 'K', long)]
    harmonics: Option<usize>,
    /// Histogram bins [default: 32].
    #[arg(long)]
    bins: Option<usize>,
    /// Fraction of lowest paces dropped per area [default: 0.05].
    #[arg(long)]
    lower_cut: Option<f64>,
    /// Fraction of highest paces dropped per area [default: 0.10].
    #[arg(long)]
    upper_cut: Option<f64>,
    /// Road classes kept, comma separated [default: motorway,trunk,primary,secondary].
    #[arg(long, value_name = "LIST")]
    classes: Option<String>,
    /// Drop odd network harmonics [default: true].
    #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    point_symmetric: Option<bool>,
    /// Weight road orientations by segment length instead of count.
    #[arg(long)]
    length_weighted: bool,
    /// Express bearings in compass convention (0 = north, clockwise).
    #[arg(long)]
    compass: bool,
    /// Coordinates are longitude/latitude in degrees.
    #[arg(long)]
    lonlat: bool,
    /// Trips used for the demand histogram: all or filtered [default: all].
    #[arg(long, value_name = "WHICH")]
    demand_from: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Also write the design matrix to design.csv.
    #[arg(long)]
    dump_design: bool,
    /// Reconstruct curves from all terms rather than significant ones.
    #[arg(long)]
    no_mask: bool,
    /// Curve baseline: raw or min [default: raw].
    #[arg(long)]
    baseline: Option<String>,
    /// Points in the reconstructed curves [default: 256].
    #[arg(long)]
    grid_size: Option<usize>,
    /// Aliased columns: error or drop [default: error].
    #[arg(long, value_name = "POLICY")]
    aliased: Option<String>,
    /// Significance level for the report and curve mask [default: 0.05].
    #[arg(long)]
    significance: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Scenario JSON file.
    #[arg(long, value_name = "FILE")]
    scenario: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PredictArgs {
    /// model.json written by `fit`.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Headings, comma separated or repeated; `deg` or `rad` suffixes accepted.
    #[arg(long, value_name = "LIST", value_delimiter = ',', required = true, allow_hyphen_values = true)]
    theta: Vec<String>,
    /// Read unsuffixed headings as degrees.
    #[arg(long)]
    degrees: bool,
    /// Area whose histograms are used (required for multi-area models).
    #[arg(long)]
    area: Option<String>,
}

fn base_config(common: &CommonArgs) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_config_file(path)?;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if common.sequential {
        cfg.execution = Execution::Sequential;
    }
    Ok(cfg)
}

fn data_config(a: &DataArgs) -> Result<RunConfig, Error> {
    let mut cfg = base_config(&a.common)?;
    let mut set = |key: &str, v: Option<String>| v.map_or(Ok(()), |v| cfg.set(key, &v));
    set("trips", a.trips.as_ref().map(|p| p.display().to_string()))?;
    set("network", a.network.as_ref().map(|p| p.display().to_string()))?;
    set("harmonics", a.harmonics.map(|v| v.to_string()))?;
    set("bins", a.bins.map(|v| v.to_string()))?;
    set("lower_cut", a.lower_cut.map(|v| v.to_string()))?;
    set("upper_cut", a.upper_cut.map(|v| v.to_string()))?;
    set("classes", a.classes.clone())?;
    set("point_symmetric", a.point_symmetric.map(|v| v.to_string()))?;
    set("demand_from", a.demand_from.clone())?;
    set("length_weighted", a.length_weighted.then(|| "true".into()))?;
    set("compass", a.compass.then(|| "true".into()))?;
    set("lonlat", a.lonlat.then(|| "true".into()))?;
    Ok(cfg)
}

fn fit_config(a: &FitArgs) -> Result<RunConfig, Error> {
    let mut cfg = data_config(&a.data)?;
    let mut set = |key: &str, v: Option<String>| v.map_or(Ok(()), |v| cfg.set(key, &v));
    set("dump_design", a.dump_design.then(|| "true".into()))?;
    set("mask", a.no_mask.then(|| "false".into()))?;
    set("baseline", a.baseline.clone())?;
    set("grid_size", a.grid_size.map(|v| v.to_string()))?;
    set("aliased", a.aliased.clone())?;
    set("significance", a.significance.map(|v| v.to_string()))?;
    Ok(cfg)
}

fn report(written: &Written) {
    for w in &written.warnings {
        eprintln!("warning: {w}");
    }
    for f in &written.files {
        eprintln!("wrote {}", f.display());
    }
}

/// Write to stdout; a closed pipe (as with `| head`) is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut out = String::new();
    match cli.command {
        Command::Hist(a) => {
            let cfg = data_config(&a)?;
            report(&cmd_hist(&cfg)?);
        }
        Command::Fit(a) => {
            let cfg = fit_config(&a)?;
            let outcome = cmd_fit(&cfg)?;
            report(&outcome.written);
            let fit = &outcome.fit;
            let _ = writeln!(out, "Number of samples: {}", fit.n_samples);
            let _ = writeln!(out, "R²: {:.3}", fit.r_squared);
            let _ = writeln!(out, "F-statistic: {:.3}", fit.f_statistic);
            let _ = writeln!(out, "Prob(F-statistic): {:.3}", fit.prob_f);
            let _ = write!(out, "{}", outcome.signs);
        }
        Command::Simulate(a) => {
            let mut cfg = base_config(&a.common)?;
            if let Some(seed) = a.seed {
                cfg.seed = Some(seed);
            }
            report(&cmd_simulate(&cfg, &a.scenario)?);
        }
        Command::Predict(a) => {
            for (theta, pace) in cmd_predict(&a.model, &a.theta, a.degrees, a.area.as_deref())? {
                let _ = writeln!(out, "{},{}", theta.radians(), pace);
            }
        }
    }
    emit(&out);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
