//! File-level orchestration behind the command-line tool.
//!
//! Each command reads its inputs, runs the library, and writes its outputs
//! into `RunConfig::output_dir`. Every file is written to a temporary
//! sibling first and then renamed into place.

use std::collections::BTreeSet;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::circular::{bin_center, bin_index, bin_width, build_histogram_with, Angle, AngularHistogram, DEFAULT_BINS};
use crate::error::{Error, Result};
use crate::estimator::{ols_fit_with, significance_mask, AliasPolicy, FitResult, DEFAULT_LEVEL};
use crate::exec::Execution;
use crate::features::{build_pooled_design_matrix, AreaHistograms, ModelSpec, Observation};
use crate::ingest::{
    network_histogram, pace, parse_class_filter, parse_network, parse_trips, percentile_filter, trip_direction,
    write_network, write_trips, BearingConvention, CoordinateKind, FilterPolicy, Frame, RoadClass, RoadSegment,
    TripRecord, DEFAULT_AREA,
};
use crate::model::{
    expected_sign_report, reconstruct_from_fit, CurveKind, FittedModel, InfluenceCurve, SignReport, DEFAULT_GRID,
};
use crate::rose::{curve_svg, rose_svg};
use crate::synth::{manifest, simulate, SyntheticScenario};

/// Source of the demand histogram relative to the percentile filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DemandFrom {
    #[default]
    All,
    Filtered,
}

impl FromStr for DemandFrom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => Ok(DemandFrom::All),
            "filtered" => Ok(DemandFrom::Filtered),
            other => Err(Error::InvalidValue(format!("demand_from must be all or filtered, got '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Baseline {
    #[default]
    Raw,
    /// Subtract the curve minimum.
    Min,
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "raw" | "none" => Ok(Baseline::Raw),
            "min" => Ok(Baseline::Min),
            other => Err(Error::InvalidValue(format!("baseline must be raw or min, got '{other}'"))),
        }
    }
}

fn parse_alias_policy(s: &str) -> Result<AliasPolicy> {
    match s.trim() {
        "error" => Ok(AliasPolicy::Error),
        "drop" => Ok(AliasPolicy::Drop),
        other => Err(Error::InvalidValue(format!("aliased must be error or drop, got '{other}'"))),
    }
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::InvalidValue(format!("{key}: expected a boolean, got '{s}'"))),
    }
}

fn parse_num<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidValue(format!("{key}: cannot parse '{s}'")))
}

/// Settings shared by all commands.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub trips_path: Option<PathBuf>,
    pub network_path: Option<PathBuf>,
    pub harmonics: usize,
    pub bins: usize,
    pub lower_cut: f64,
    pub upper_cut: f64,
    pub class_filter: BTreeSet<RoadClass>,
    pub point_symmetric: bool,
    pub length_weighted: bool,
    pub compass: bool,
    pub lonlat: bool,
    pub demand_from: DemandFrom,
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    pub dump_design: bool,
    pub mask_curves: bool,
    pub baseline: Baseline,
    pub grid_size: usize,
    pub aliased: AliasPolicy,
    pub significance: f64,
    pub execution: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        let filter = FilterPolicy::default();
        RunConfig {
            trips_path: None,
            network_path: None,
            harmonics: 8,
            bins: DEFAULT_BINS,
            lower_cut: filter.lower_fraction(),
            upper_cut: filter.upper_fraction(),
            class_filter: RoadClass::major(),
            point_symmetric: true,
            length_weighted: false,
            compass: false,
            lonlat: false,
            demand_from: DemandFrom::All,
            output_dir: PathBuf::from("."),
            seed: None,
            dump_design: false,
            mask_curves: true,
            baseline: Baseline::Raw,
            grid_size: DEFAULT_GRID,
            aliased: AliasPolicy::Error,
            significance: DEFAULT_LEVEL,
            execution: Execution::default(),
        }
    }
}

impl RunConfig {
    /// Set one option by its config-file key. Keys are case-insensitive; dashes and underscores are
    /// interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "trips" | "trips_path" => self.trips_path = Some(PathBuf::from(v)),
            "network" | "network_path" => self.network_path = Some(PathBuf::from(v)),
            "k" | "harmonics" => self.harmonics = parse_num(&key, v)?,
            "bins" => self.bins = parse_num(&key, v)?,
            "lower_cut" => self.lower_cut = parse_num(&key, v)?,
            "upper_cut" => self.upper_cut = parse_num(&key, v)?,
            "classes" | "class_filter" => self.class_filter = parse_class_filter(v)?,
            "point_symmetric" => self.point_symmetric = parse_bool(&key, v)?,
            "length_weighted" => self.length_weighted = parse_bool(&key, v)?,
            "compass" => self.compass = parse_bool(&key, v)?,
            "lonlat" => self.lonlat = parse_bool(&key, v)?,
            "demand_from" => self.demand_from = v.parse()?,
            "out" | "output_dir" => self.output_dir = PathBuf::from(v),
            "seed" => self.seed = Some(parse_num(&key, v)?),
            "dump_design" => self.dump_design = parse_bool(&key, v)?,
            "mask" => self.mask_curves = parse_bool(&key, v)?,
            "baseline" => self.baseline = v.parse()?,
            "grid_size" => self.grid_size = parse_num(&key, v)?,
            "aliased" => self.aliased = parse_alias_policy(v)?,
            "significance" => self.significance = parse_num(&key, v)?,
            "sequential" => {
                if parse_bool(&key, v)? {
                    self.execution = Execution::Sequential;
                }
            }
            _ => return Err(Error::InvalidValue(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Apply `key = value` lines. Blank lines and `#` comments are ignored.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key = value, got '{line}'"),
            })?;
            self.set(k, v).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_config_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        self.apply_config_text(&text)
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        ModelSpec::new(self.harmonics, self.bins, self.point_symmetric)
    }

    pub fn frame(&self) -> Frame {
        Frame {
            kind: if self.lonlat { CoordinateKind::LonLat } else { CoordinateKind::Planar },
            convention: if self.compass { BearingConvention::Compass } else { BearingConvention::Math },
        }
    }

    pub fn filter_policy(&self) -> Result<FilterPolicy> {
        FilterPolicy::new(self.lower_cut, self.upper_cut)
    }

    fn validate(&self) -> Result<()> {
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(Error::InvalidValue(format!(
                "significance must lie in (0, 1), got {}",
                self.significance
            )));
        }
        if self.class_filter.is_empty() {
            return Err(Error::InvalidValue("class filter is empty".into()));
        }
        Ok(())
    }
}

/// Write `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidValue(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(format!("renaming into {}", path.display()), e)
    })
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Error::io(format!("formatting {}", path.display()), e))?;
    write_atomic(path, &buf)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::InvalidValue(format!("missing {what} file (use --{what})")))
}

/// Trips of one area with their derived directions and paces.
#[derive(Clone, Debug)]
pub struct AreaTrips {
    pub name: String,
    pub directions: Vec<Angle>,
    pub paces: Vec<f64>,
    pub segments: Vec<RoadSegment>,
}

/// Parsed inputs grouped by area, in order of first appearance in the
/// trip file.
#[derive(Clone, Debug)]
pub struct Inputs {
    pub areas: Vec<AreaTrips>,
    pub warnings: Vec<String>,
}

impl Inputs {
    pub fn trip_count(&self) -> usize {
        self.areas.iter().map(|a| a.directions.len()).sum()
    }
}

fn group_trips(trips: Vec<TripRecord>, warnings: &mut Vec<String>) -> Result<Vec<AreaTrips>> {
    let mut areas: Vec<AreaTrips> = Vec::new();
    let mut degenerate = 0usize;
    for t in trips {
        let direction = match trip_direction(&t) {
            Ok(d) => d,
            Err(Error::DegenerateTrip) => {
                degenerate += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let p = pace(&t)?;
        let slot = match areas.iter().position(|a| a.name == t.area) {
            Some(i) => i,
            None => {
                areas.push(AreaTrips {
                    name: t.area.clone(),
                    directions: Vec::new(),
                    paces: Vec::new(),
                    segments: Vec::new(),
                });
                areas.len() - 1
            }
        };
        areas[slot].directions.push(direction);
        areas[slot].paces.push(p);
    }
    if degenerate > 0 {
        warnings.push(format!("skipped {degenerate} degenerate trips (origin equals destination)"));
    }
    Ok(areas)
}

/// Assign segments to trip areas. A network without area labels is shared
/// by every area.
fn attach_network(areas: &mut [AreaTrips], segments: Vec<RoadSegment>, warnings: &mut Vec<String>) -> Result<()> {
    let (usable, zero): (Vec<RoadSegment>, Vec<RoadSegment>) = segments.into_iter().partition(|s| !s.is_zero_length());
    if !zero.is_empty() {
        warnings.push(format!("skipped {} zero-length segments", zero.len()));
    }
    let shared = usable.iter().all(|s| s.area == DEFAULT_AREA);
    for a in areas.iter_mut() {
        a.segments = if shared {
            usable.clone()
        } else {
            usable.iter().filter(|s| s.area == a.name).cloned().collect()
        };
        if a.segments.is_empty() {
            return Err(Error::EmptyInput(format!("no usable road segments for area '{}'", a.name)));
        }
    }
    Ok(())
}

/// Read and group the trip and network files named in `cfg`.
pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let frame = cfg.frame();
    let trips_path = required(&cfg.trips_path, "trips")?;
    let network_path = required(&cfg.network_path, "network")?;
    let parsed = parse_trips(open(trips_path)?, frame)?;
    let mut warnings: Vec<String> = parsed
        .rejected
        .iter()
        .map(|r| format!("{}: line {}: {}", trips_path.display(), r.line, r.reason))
        .collect();
    let mut areas = group_trips(parsed.trips, &mut warnings)?;
    if areas.is_empty() {
        return Err(Error::EmptyInput("no trips".into()));
    }
    let segments = parse_network(open(network_path)?, frame, &cfg.class_filter)?;
    attach_network(&mut areas, segments, &mut warnings)?;
    Ok(Inputs { areas, warnings })
}

fn network_of(area: &AreaTrips, cfg: &RunConfig) -> Result<AngularHistogram> {
    network_histogram(&area.segments, cfg.bins, cfg.length_weighted)
}

fn output_name(stem: &str, area: &str, multi: bool, ext: &str) -> String {
    if multi {
        let safe: String = area
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        format!("{stem}_{safe}.{ext}")
    } else {
        format!("{stem}.{ext}")
    }
}

/// Paths written by one command, in write order.
#[derive(Clone, Debug, Default)]
pub struct Written {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl Written {
    fn put(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, bytes)?;
        self.files.push(path);
        Ok(())
    }

    fn put_with<F>(&mut self, dir: &Path, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let path = dir.join(name);
        write_with(&path, f)?;
        self.files.push(path);
        Ok(())
    }
}

fn write_hist_rows(out: &mut Vec<u8>, area: &str, h: &AngularHistogram) -> std::io::Result<()> {
    use std::io::Write;
    let w = bin_width(h.bin_count());
    for (i, v) in h.values().iter().enumerate() {
        let center = bin_center(i, h.bin_count()).map_err(std::io::Error::other)?.radians();
        writeln!(out, "{area},{i},{},{},{center},{v}", i as f64 * w, (i + 1) as f64 * w)?;
    }
    Ok(())
}

/// Mean pace per direction bin: `(count, mean)`; the mean is `None` for empty bins.
pub fn pace_by_direction(directions: &[Angle], paces: &[f64], bins: usize) -> Vec<(usize, Option<f64>)> {
    let mut sums = vec![(0usize, 0.0f64); bins];
    for (d, p) in directions.iter().zip(paces) {
        let s = &mut sums[bin_index(*d, bins)];
        s.0 += 1;
        s.1 += p;
    }
    sums.into_iter()
        .map(|(n, s)| (n, (n > 0).then(|| s / n as f64)))
        .collect()
}

/// Histogram CSVs and rose diagrams for every area.
pub fn cmd_hist(cfg: &RunConfig) -> Result<Written> {
    cfg.validate()?;
    if cfg.bins == 0 {
        return Err(Error::InvalidHistogram("bin count must be at least 1".into()));
    }
    let inputs = load_inputs(cfg)?;
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    let multi = inputs.areas.len() > 1;
    let convention = cfg.frame().convention;
    let header = "area,bin,start_rad,end_rad,center_rad,value\n";
    let mut demand_csv = header.as_bytes().to_vec();
    let mut network_csv = header.as_bytes().to_vec();
    let mut pace_csv = b"area,bin,start_rad,end_rad,center_rad,count,mean_pace\n".to_vec();
    let mut written = Written {
        warnings: inputs.warnings.clone(),
        ..Written::default()
    };
    let mut roses = Vec::new();
    for a in &inputs.areas {
        let demand = build_histogram_with(&a.directions, None, cfg.bins, cfg.execution)?;
        let network = network_of(a, cfg)?;
        let by_dir = pace_by_direction(&a.directions, &a.paces, cfg.bins);
        let io = |e| Error::io("formatting histogram", e);
        write_hist_rows(&mut demand_csv, &a.name, &demand).map_err(io)?;
        write_hist_rows(&mut network_csv, &a.name, &network).map_err(io)?;
        let w = bin_width(cfg.bins);
        for (i, (n, mean)) in by_dir.iter().enumerate() {
            let center = bin_center(i, cfg.bins)?.radians();
            let mean = mean.map(|m| m.to_string()).unwrap_or_default();
            pace_csv.extend(
                format!("{},{i},{},{},{center},{n},{mean}\n", a.name, i as f64 * w, (i + 1) as f64 * w).bytes(),
            );
        }
        let pace_hist = AngularHistogram::from_values(by_dir.iter().map(|(_, m)| m.unwrap_or(0.0)).collect(), false)?;
        roses.push((output_name("demand_rose", &a.name, multi, "svg"), rose_svg(&demand, &format!("demand d(theta), area {}", a.name), convention)));
        roses.push((output_name("network_rose", &a.name, multi, "svg"), rose_svg(&network, &format!("network n(theta), area {}", a.name), convention)));
        roses.push((output_name("pace_rose", &a.name, multi, "svg"), rose_svg(&pace_hist, &format!("mean pace c(theta) [s/km], area {}", a.name), convention)));
    }
    written.put(dir, "demand_hist.csv", &demand_csv)?;
    written.put(dir, "network_hist.csv", &network_csv)?;
    written.put(dir, "pace_by_direction.csv", &pace_csv)?;
    for (name, svg) in roses {
        written.put(dir, &name, svg.as_bytes())?;
    }
    Ok(written)
}

/// Filtered observations and per-area histograms ready for fitting.
#[derive(Clone, Debug)]
pub struct PreparedFit {
    pub spec: ModelSpec,
    pub observations: Vec<Observation>,
    pub areas: Vec<AreaHistograms>,
    pub warnings: Vec<String>,
}

/// Apply the percentile filter per area and build the histograms.
pub fn prepare_fit(cfg: &RunConfig, inputs: &Inputs) -> Result<PreparedFit> {
    let spec = cfg.spec()?;
    let policy = cfg.filter_policy()?;
    let mut observations = Vec::new();
    let mut areas = Vec::with_capacity(inputs.areas.len());
    for (ai, a) in inputs.areas.iter().enumerate() {
        let indexed: Vec<(usize, f64)> = a.paces.iter().copied().enumerate().collect();
        let kept = percentile_filter(&indexed, policy)?;
        let demand = match cfg.demand_from {
            DemandFrom::All => build_histogram_with(&a.directions, None, spec.bins, cfg.execution)?,
            DemandFrom::Filtered => {
                let dirs: Vec<Angle> = kept.iter().map(|&i| a.directions[i]).collect();
                build_histogram_with(&dirs, None, spec.bins, cfg.execution)?
            }
        };
        let network = network_of(a, cfg)?;
        areas.push(AreaHistograms::new(a.name.clone(), demand, network));
        observations.extend(kept.into_iter().map(|i| Observation {
            pace: a.paces[i],
            direction: a.directions[i],
            area: ai,
        }));
    }
    Ok(PreparedFit {
        spec,
        observations,
        areas,
        warnings: inputs.warnings.clone(),
    })
}

/// Everything `cmd_fit` computed, for printing by the caller.
#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub fit: FitResult,
    pub alpha: InfluenceCurve,
    pub beta: InfluenceCurve,
    pub signs: SignReport,
    pub written: Written,
}

/// `summary.txt` body; statistics at three decimals.
pub fn summary_text(fit: &FitResult, areas: &[AreaHistograms]) -> String {
    let mut s = String::new();
    s.push_str(&format!("Number of samples: {}\n", fit.n_samples));
    s.push_str(&format!("R²: {:.3}\n", fit.r_squared));
    s.push_str(&format!("F-statistic: {:.3}\n", fit.f_statistic));
    s.push_str(&format!("Prob(F-statistic): {:.3}\n", fit.prob_f));
    s.push_str(&format!("Residual degrees of freedom: {}\n", fit.dof_residual));
    s.push_str(&format!(
        "Areas: {}\n",
        areas.iter().map(|a| a.name.as_str()).collect::<Vec<_>>().join(",")
    ));
    let aliased = fit.aliased_names();
    if !aliased.is_empty() {
        s.push_str(&format!("Aliased (fixed at 0): {}\n", aliased.join(",")));
    }
    s
}

/// Fit a prepared problem and write the report, curves and model.
pub fn fit_and_write(cfg: &RunConfig, prepared: &PreparedFit) -> Result<FitOutcome> {
    cfg.validate()?;
    let x = build_pooled_design_matrix(&prepared.observations, &prepared.areas, &prepared.spec, cfg.execution)?;
    let fit = ols_fit_with(&x, cfg.aliased)?;
    let mask = if cfg.mask_curves {
        significance_mask(&fit, cfg.significance)
    } else {
        vec![true; fit.params.len()]
    };
    let alpha = reconstruct_from_fit(&fit, &mask, CurveKind::Alpha, cfg.grid_size)?;
    let beta = reconstruct_from_fit(&fit, &mask, CurveKind::Beta, cfg.grid_size)?;
    let signs = expected_sign_report(&alpha, &beta);
    let (alpha_out, beta_out) = match cfg.baseline {
        Baseline::Raw => (alpha.clone(), beta.clone()),
        Baseline::Min => (alpha.relative_to_min(), beta.relative_to_min()),
    };
    let model = FittedModel::new(prepared.spec, &fit, prepared.areas.clone());

    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    let mut written = Written {
        warnings: prepared.warnings.clone(),
        ..Written::default()
    };
    written.put_with(dir, "fit_report.csv", |w| fit.write_report(w, cfg.significance))?;
    written.put(dir, "summary.txt", summary_text(&fit, &prepared.areas).as_bytes())?;
    written.put_with(dir, "alpha_curve.csv", |w| alpha_out.write_csv(w))?;
    written.put_with(dir, "beta_curve.csv", |w| beta_out.write_csv(w))?;
    written.put(dir, "alpha_curve.svg", curve_svg(&alpha_out, "demand influence alpha(phi) [s/km]").as_bytes())?;
    written.put(dir, "beta_curve.svg", curve_svg(&beta_out, "network influence beta(eta) [s/km]").as_bytes())?;
    written.put(dir, "signs.txt", signs.to_string().as_bytes())?;
    written.put(dir, "model.json", model.to_json()?.as_bytes())?;
    if cfg.dump_design {
        written.put_with(dir, "design.csv", |w| x.write_csv(w))?;
    }
    Ok(FitOutcome {
        fit,
        alpha,
        beta,
        signs,
        written,
    })
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    let prepared = prepare_fit(cfg, &inputs)?;
    fit_and_write(cfg, &prepared)
}

/// Generate `trips.csv`, `network.csv` and `manifest.txt` from a scenario
/// file. `cfg.seed` overrides the scenario seed.
pub fn cmd_simulate(cfg: &RunConfig, scenario_path: &Path) -> Result<Written> {
    let text = fs::read_to_string(scenario_path)
        .map_err(|e| Error::io(format!("reading {}", scenario_path.display()), e))?;
    // any defect in the scenario itself is an input error
    let mut scenario = SyntheticScenario::from_json(&text)
        .map_err(|e| Error::InvalidValue(format!("scenario {}: {e}", scenario_path.display())))?;
    if let Some(seed) = cfg.seed {
        scenario.seed = seed;
    }
    let data = simulate(&scenario, cfg.execution)?;
    let multi = scenario.areas.len() > 1;
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    let mut written = Written::default();
    if data.clamped > 0 {
        written
            .warnings
            .push(format!("{} paces clamped at the floor", data.clamped));
    }
    written.put_with(dir, "trips.csv", |w| write_trips(w, &data.trips, multi))?;
    written.put_with(dir, "network.csv", |w| write_network(w, &data.segments, multi))?;
    written.put(dir, "manifest.txt", manifest(&scenario, &data).as_bytes())?;
    Ok(written)
}

/// Parse a heading: plain numbers are radians unless `degrees` is set;
/// a `deg` or `rad` suffix always wins.
pub fn parse_theta(s: &str, degrees: bool) -> Result<Angle> {
    let t = s.trim();
    let (num, deg) = if let Some(n) = t.strip_suffix("deg") {
        (n, true)
    } else if let Some(n) = t.strip_suffix("rad") {
        (n, false)
    } else {
        (t, degrees)
    };
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::InvalidValue(format!("cannot parse direction '{s}'")))?;
    if deg {
        Angle::from_degrees(v)
    } else {
        Angle::new(v)
    }
}

/// Predicted pace for each heading, in input order.
pub fn cmd_predict(model_path: &Path, thetas: &[String], degrees: bool, area: Option<&str>) -> Result<Vec<(Angle, f64)>> {
    if thetas.is_empty() {
        return Err(Error::InvalidValue("no directions given".into()));
    }
    let text =
        fs::read_to_string(model_path).map_err(|e| Error::io(format!("reading {}", model_path.display()), e))?;
    let model = FittedModel::from_json(&text)?;
    thetas
        .iter()
        .map(|s| {
            let theta = parse_theta(s, degrees)?;
            Ok((theta, model.predict(theta, area)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_overrides_defaults() {
        let mut c = RunConfig::default();
        c.apply_config_text("# comment\nK = 4\nbins=16\nclasses = motorway, trunk\npoint-symmetric = false\ndemand_from = filtered\n")
            .unwrap();
        assert_eq!(c.harmonics, 4);
        assert_eq!(c.bins, 16);
        assert_eq!(c.class_filter.len(), 2);
        assert!(!c.point_symmetric);
        assert_eq!(c.demand_from, DemandFrom::Filtered);
        assert_eq!(c.lower_cut, 0.05);
    }

    #[test]
    fn config_errors_carry_line() {
        let mut c = RunConfig::default();
        match c.apply_config_text("bins = 8\nnope = 1\n").unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("nope"));
            }
            e => panic!("unexpected {e:?}"),
        }
        assert!(c.apply_config_text("bins 8\n").is_err());
        assert!(c.apply_config_text("bins = eight\n").is_err());
    }

    #[test]
    fn defaults_match_reference_setup() {
        let c = RunConfig::default();
        assert_eq!((c.harmonics, c.bins), (8, 32));
        assert_eq!((c.lower_cut, c.upper_cut), (0.05, 0.10));
        assert_eq!(c.class_filter, RoadClass::major());
        assert!(c.point_symmetric && !c.length_weighted && !c.compass);
        assert_eq!(c.demand_from, DemandFrom::All);
    }

    #[test]
    fn theta_parsing() {
        let a = parse_theta("90deg", true).unwrap();
        let b = parse_theta(&std::f64::consts::FRAC_PI_2.to_string(), false).unwrap();
        assert!((a.radians() - b.radians()).abs() < 1e-15);
        assert_eq!(parse_theta("90", true).unwrap(), a);
        assert_eq!(parse_theta("90deg", false).unwrap(), a);
        assert!(parse_theta("east", false).is_err());
        assert!(parse_theta("-1rad", false).unwrap().radians() > 0.0);
    }

    #[test]
    fn pace_bins() {
        let dirs = [Angle::new(0.1).unwrap(), Angle::new(0.2).unwrap(), Angle::new(3.5).unwrap()];
        let r = pace_by_direction(&dirs, &[100.0, 200.0, 50.0], 4);
        assert_eq!(r[0], (2, Some(150.0)));
        assert_eq!(r[1], (0, None));
        assert_eq!(r[2], (1, Some(50.0)));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn output_names() {
        assert_eq!(output_name("demand_rose", "x", false, "svg"), "demand_rose.svg");
        assert_eq!(output_name("demand_rose", "a b/c", true, "svg"), "demand_rose_a_b_c.svg");
    }
}
