//! Synthetic trips and paces from known coefficients.
//!
//! Paces are generated from the histograms the fitting pipeline will
//! actually see: the demand histogram of the realized trip directions (as
//! re-derived from the emitted coordinates) and the network histogram of the
//! emitted segments. A noiseless scenario therefore round-trips through the
//! CSV files and the fit exactly. The scenario's own histograms act as the
//! sampling targets.
//!
//! Every trip draws from its own ChaCha stream keyed by its global index, so
//! parallel generation reproduces the sequential sequence.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::circular::{bin_center, bin_index, bin_width, build_histogram, wrap_angle, Angle, AngularHistogram};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::{AreaHistograms, ModelSpec};
use crate::ingest::{network_histogram, trip_direction, Frame, Point, RoadClass, RoadSegment, TripRecord};
use crate::model::Coefficients;

/// Paces below this floor (s/km) are clamped.
pub const PACE_FLOOR: f64 = 1.0;

/// Side of the square study area in meters.
const AREA_SIDE_M: f64 = 10_000.0;

/// Histogram description in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistogramSpec {
    /// Raw nonnegative bin weights (normalized on load).
    Values(Vec<f64>),
    Uniform,
    /// Four equal peaks at `rotation_rad + m·π/2`.
    Grid { rotation_rad: f64 },
    /// Weighted von Mises-shaped bumps evaluated at bin centers. With
    /// `symmetric`, each bump is mirrored at `mean + π`.
    VonMises {
        components: Vec<VonMisesBump>,
        #[serde(default)]
        symmetric: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VonMisesBump {
    pub weight: f64,
    pub mean_rad: f64,
    pub kappa: f64,
}

impl HistogramSpec {
    pub fn build(&self, bins: usize) -> Result<AngularHistogram> {
        match self {
            HistogramSpec::Values(v) => {
                if v.len() != bins {
                    return Err(Error::InvalidValue(format!(
                        "histogram has {} values, expected {bins}",
                        v.len()
                    )));
                }
                AngularHistogram::from_values(v.clone(), true)
            }
            HistogramSpec::Uniform => AngularHistogram::uniform(bins),
            HistogramSpec::Grid { rotation_rad } => make_rotated_grid_network(wrap_angle(*rotation_rad)?, bins),
            HistogramSpec::VonMises { components, symmetric } => {
                if components.is_empty() {
                    return Err(Error::InvalidValue("von Mises mixture has no components".into()));
                }
                let mut values = vec![0.0; bins];
                for c in components {
                    if !(c.weight >= 0.0 && c.kappa >= 0.0) || !c.mean_rad.is_finite() {
                        return Err(Error::InvalidValue("invalid von Mises component".into()));
                    }
                    let means: &[f64] = if *symmetric { &[0.0, PI] } else { &[0.0] };
                    for (j, v) in values.iter_mut().enumerate() {
                        let x = bin_center(j, bins)?.radians();
                        for m in means {
                            // exp(κ(cos − 1)) keeps large κ finite
                            *v += c.weight * (c.kappa * ((x - c.mean_rad - m).cos() - 1.0)).exp();
                        }
                    }
                }
                AngularHistogram::from_values(values, true)
            }
        }
    }
}

/// Point-symmetric four-peak histogram: mass 1/4 in the bins containing
/// `rotation`, `rotation + π/2`, `rotation + π` and `rotation + 3π/2`.
pub fn make_rotated_grid_network(rotation: Angle, bins: usize) -> Result<AngularHistogram> {
    if bins < 2 || !bins.is_multiple_of(2) {
        return Err(Error::InvalidValue(format!("grid network needs an even bin count, got {bins}")));
    }
    let half = bins / 2;
    let mut values = vec![0.0; bins];
    for base in [bin_index(rotation, bins), bin_index(rotation.rotate(FRAC_PI_2), bins)] {
        values[base % half] += 0.25;
        values[base % half + half] += 0.25;
    }
    AngularHistogram::from_values(values, false)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaScenarioSpec {
    pub name: String,
    pub n_trips: usize,
    pub demand: HistogramSpec,
    pub network: HistogramSpec,
}

/// On-disk scenario description (JSON).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub spec: ModelSpec,
    pub gamma: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_segments")]
    pub segments_per_area: usize,
    pub areas: Vec<AreaScenarioSpec>,
}

fn default_segments() -> usize {
    2000
}

#[derive(Clone, Debug, PartialEq)]
pub struct AreaScenario {
    pub name: String,
    pub n_trips: usize,
    pub demand: AngularHistogram,
    pub network: AngularHistogram,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScenario {
    pub spec: ModelSpec,
    pub gamma: f64,
    /// `2K` demand coefficients in column order.
    pub alpha: Vec<f64>,
    /// Network coefficients in column order.
    pub beta: Vec<f64>,
    pub areas: Vec<AreaScenario>,
    pub noise_std: f64,
    pub seed: u64,
    /// Approximate number of segments emitted per area network.
    pub segments_per_area: usize,
}

impl SyntheticScenario {
    pub fn from_file(file: &ScenarioFile) -> Result<Self> {
        let areas = file
            .areas
            .iter()
            .map(|a| {
                Ok(AreaScenario {
                    name: a.name.clone(),
                    n_trips: a.n_trips,
                    demand: a.demand.build(file.spec.bins)?,
                    network: a.network.build(file.spec.bins)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let s = SyntheticScenario {
            spec: file.spec,
            gamma: file.gamma,
            alpha: file.alpha.clone(),
            beta: file.beta.clone(),
            areas,
            noise_std: file.noise_std,
            seed: file.seed,
            segments_per_area: file.segments_per_area,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if !self.spec.bins.is_multiple_of(2) {
            return Err(Error::InvalidValue("synthetic networks need an even bin count".into()));
        }
        if self.alpha.len() != self.spec.demand_columns() {
            return Err(Error::InvalidValue(format!(
                "alpha has {} values, expected {}",
                self.alpha.len(),
                self.spec.demand_columns()
            )));
        }
        if self.beta.len() != self.spec.network_columns() {
            return Err(Error::InvalidValue(format!(
                "beta has {} values, expected {}",
                self.beta.len(),
                self.spec.network_columns()
            )));
        }
        if self.areas.is_empty() {
            return Err(Error::InvalidValue("scenario has no areas".into()));
        }
        if !(self.noise_std >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidValue("noise_std must be nonnegative and gamma finite".into()));
        }
        if self.alpha.iter().chain(&self.beta).any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("non-finite coefficient".into()));
        }
        if self.segments_per_area == 0 {
            return Err(Error::InvalidValue("segments_per_area must be positive".into()));
        }
        let total = self.total_trips();
        if total <= self.spec.parameter_count() {
            return Err(Error::InvalidValue(format!(
                "{total} trips do not exceed the {} parameters",
                self.spec.parameter_count()
            )));
        }
        for a in &self.areas {
            if a.n_trips == 0 {
                return Err(Error::InvalidValue(format!("area '{}' has no trips", a.name)));
            }
            if a.demand.bin_count() != self.spec.bins || a.network.bin_count() != self.spec.bins {
                return Err(Error::InvalidValue(format!("area '{}' histogram bin count mismatch", a.name)));
            }
            a.demand.require_normalized("demand")?;
            a.network.require_normalized("network")?;
            if self.spec.network_point_symmetric && !a.network.is_point_symmetric(1e-12) {
                let (bin, opposite, difference) = a.network.point_symmetry_defect();
                return Err(Error::NotPointSymmetric { bin, opposite, difference });
            }
        }
        Ok(())
    }

    pub fn total_trips(&self) -> usize {
        self.areas.iter().map(|a| a.n_trips).sum()
    }

    pub fn true_coefficients(&self) -> Coefficients {
        Coefficients {
            gamma: self.gamma,
            names: self.spec.column_names(),
            values: self.alpha.iter().chain(&self.beta).copied().collect(),
        }
    }

    fn trip_offset(&self, area: usize) -> u64 {
        self.areas[..area].iter().map(|a| a.n_trips as u64).sum()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Trip `g`'s direction stream; noise uses the next stream up.
fn direction_stream(seed: u64, global: u64) -> ChaCha8Rng {
    stream(seed, 2 * global)
}

fn noise_stream(seed: u64, global: u64) -> ChaCha8Rng {
    stream(seed, 2 * global + 1)
}

fn draw_direction(rng: &mut ChaCha8Rng, cdf: &[f64]) -> Angle {
    let bins = cdf.len();
    let u: f64 = rng.random::<f64>() * cdf[bins - 1];
    let bin = cdf.partition_point(|c| *c <= u).min(bins - 1);
    let jitter: f64 = rng.random();
    let theta = Angle::new((bin as f64 + jitter) * bin_width(bins)).unwrap_or(Angle::ZERO);
    if bin_index(theta, bins) == bin {
        theta
    } else {
        bin_center(bin, bins).unwrap_or(theta)
    }
}

fn cdf(h: &AngularHistogram) -> Vec<f64> {
    h.values()
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// Directions for area `area` drawn by inverse CDF over bins with uniform
/// jitter inside the chosen bin.
pub fn sample_directions(scenario: &SyntheticScenario, area: usize, exec: Execution) -> Vec<Angle> {
    let a = &scenario.areas[area];
    let cdf = cdf(&a.demand);
    let offset = scenario.trip_offset(area);
    exec.map_range(a.n_trips, |i| {
        let mut rng = direction_stream(scenario.seed, offset + i as u64);
        draw_direction(&mut rng, &cdf)
    })
}

/// Paces for trips of area `area`: `γ + features·coefficients + ε`, floored
/// at [`PACE_FLOOR`]. Returns the paces and the number of clamped values.
pub fn generate_paces(
    directions: &[Angle],
    histograms: &AreaHistograms,
    scenario: &SyntheticScenario,
    area: usize,
    exec: Execution,
) -> Result<(Vec<f64>, usize)> {
    if directions.is_empty() {
        return Err(Error::EmptyInput("no directions".into()));
    }
    histograms.validate(&scenario.spec)?;
    let coeffs = scenario.true_coefficients();
    let noise = if scenario.noise_std > 0.0 {
        Some(Normal::new(0.0, scenario.noise_std).map_err(|e| Error::InvalidValue(e.to_string()))?)
    } else {
        None
    };
    let offset = scenario.trip_offset(area);
    let spec = scenario.spec;
    let centers = crate::circular::bin_centers(spec.bins);
    let raw: Vec<f64> = exec.map(directions, |i, theta| {
        let mut row = vec![0.0; spec.feature_count()];
        histograms.write_row(*theta, &spec, &centers, &mut row);
        let mean = coeffs.gamma + row.iter().zip(&coeffs.values).map(|(x, b)| x * b).sum::<f64>();
        let eps = noise.map_or(0.0, |n| n.sample(&mut noise_stream(scenario.seed, offset + i as u64)));
        mean + eps
    });
    let clamped = raw.iter().filter(|p| **p < PACE_FLOOR).count();
    Ok((raw.into_iter().map(|p| p.max(PACE_FLOOR)).collect(), clamped))
}

/// Everything produced by one simulation run.
#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub trips: Vec<TripRecord>,
    pub directions: Vec<Angle>,
    pub paces: Vec<f64>,
    /// Area index per trip.
    pub trip_area: Vec<usize>,
    /// Realized histograms, in scenario area order.
    pub areas: Vec<AreaHistograms>,
    pub segments: Vec<RoadSegment>,
    pub clamped: usize,
}

impl SyntheticData {
    pub fn observations(&self) -> Vec<crate::features::Observation> {
        self.paces
            .iter()
            .zip(&self.directions)
            .zip(&self.trip_area)
            .map(|((p, d), a)| crate::features::Observation {
                pace: *p,
                direction: *d,
                area: *a,
            })
            .collect()
    }
}

fn emit_segments(scenario: &SyntheticScenario, area: usize) -> Result<Vec<RoadSegment>> {
    let a = &scenario.areas[area];
    let bins = scenario.spec.bins;
    let half = bins / 2;
    let v = a.network.values();
    let mut rng = stream(scenario.seed ^ 0x6e65_7477_6f72_6b00, area as u64);
    let frame = Frame::default();
    let mut segments = Vec::new();
    for j in 0..half {
        let count = ((v[j] + v[j + half]) * scenario.segments_per_area as f64).round() as usize;
        let c = bin_center(j, bins)?.radians();
        for _ in 0..count {
            let p = Point::new(rng.random::<f64>() * AREA_SIDE_M, rng.random::<f64>() * AREA_SIDE_M);
            let length = 50.0 + rng.random::<f64>() * 450.0;
            let q = Point::new(p.x + length * c.cos(), p.y + length * c.sin());
            segments.push(RoadSegment {
                a: p,
                b: q,
                length_m: length,
                class: RoadClass::Primary,
                area: a.name.clone(),
                frame,
            });
        }
    }
    if segments.is_empty() {
        return Err(Error::InvalidValue(format!(
            "area '{}': network too sparse for {} segments",
            a.name, scenario.segments_per_area
        )));
    }
    Ok(segments)
}

/// Run the full generator: directions, trip geometry, realized histograms,
/// network segments and paces.
pub fn simulate(scenario: &SyntheticScenario, exec: Execution) -> Result<SyntheticData> {
    scenario.validate()?;
    let frame = Frame::default();
    let mut out = SyntheticData {
        trips: Vec::with_capacity(scenario.total_trips()),
        directions: Vec::with_capacity(scenario.total_trips()),
        paces: Vec::with_capacity(scenario.total_trips()),
        trip_area: Vec::with_capacity(scenario.total_trips()),
        areas: Vec::new(),
        segments: Vec::new(),
        clamped: 0,
    };
    for (ai, area) in scenario.areas.iter().enumerate() {
        let sampled = sample_directions(scenario, ai, exec);
        let offset = scenario.trip_offset(ai);
        // geometry shares the direction stream, after the two direction draws
        let geometry: Vec<(Point, Point, f64)> = exec.map(&sampled, |i, theta| {
            let mut rng = direction_stream(scenario.seed, offset + i as u64);
            let _: (f64, f64) = (rng.random(), rng.random());
            let distance_km = 0.5 + 4.5 * rng.random::<f64>();
            let o = Point::new(rng.random::<f64>() * AREA_SIDE_M, rng.random::<f64>() * AREA_SIDE_M);
            let r = 1000.0 * distance_km;
            let t = theta.radians();
            (o, Point::new(o.x + r * t.cos(), o.y + r * t.sin()), distance_km)
        });
        // directions exactly as ingestion will derive them
        let directions = geometry
            .iter()
            .map(|(o, d, _)| frame.bearing(*o, *d).ok_or(Error::DegenerateTrip))
            .collect::<Result<Vec<Angle>>>()?;
        let demand = build_histogram(&directions, None, scenario.spec.bins)?;
        let segments = emit_segments(scenario, ai)?;
        let network = network_histogram(&segments, scenario.spec.bins, false)?;
        let hist = AreaHistograms::new(area.name.clone(), demand, network);
        let (paces, clamped) = generate_paces(&directions, &hist, scenario, ai, exec)?;
        for (((o, d, km), theta), pace) in geometry.into_iter().zip(&directions).zip(&paces) {
            let trip = TripRecord {
                origin: o,
                destination: d,
                duration_s: pace * km,
                distance_km: km,
                area: area.name.clone(),
                frame,
            };
            debug_assert_eq!(trip_direction(&trip).ok(), Some(*theta));
            out.trips.push(trip);
        }
        out.directions.extend(directions);
        out.paces.extend(paces);
        out.trip_area.extend(std::iter::repeat_n(ai, area.n_trips));
        out.areas.push(hist);
        out.segments.extend(segments);
        out.clamped += clamped;
    }
    Ok(out)
}

/// Plain-text record of the scenario and its realized outputs.
pub fn manifest(scenario: &SyntheticScenario, data: &SyntheticData) -> String {
    let mut s = String::new();
    let spec = scenario.spec;
    let _ = writeln!(s, "# synthetic scenario manifest");
    let _ = writeln!(s, "seed = {}", scenario.seed);
    let _ = writeln!(s, "harmonics = {}", spec.harmonics);
    let _ = writeln!(s, "bins = {}", spec.bins);
    let _ = writeln!(s, "point_symmetric = {}", spec.network_point_symmetric);
    let _ = writeln!(s, "noise_std = {}", scenario.noise_std);
    let _ = writeln!(s, "n_trips = {}", scenario.total_trips());
    let _ = writeln!(s, "n_segments = {}", data.segments.len());
    let _ = writeln!(s, "clamped_paces = {}", data.clamped);
    let _ = writeln!(s, "areas = {}", scenario.areas.iter().map(|a| a.name.as_str()).collect::<Vec<_>>().join(","));
    for a in &scenario.areas {
        let _ = writeln!(s, "area.{}.n_trips = {}", a.name, a.n_trips);
    }
    let _ = writeln!(s, "gamma = {}", scenario.gamma);
    let c = scenario.true_coefficients();
    for (n, v) in c.names.iter().zip(&c.values) {
        let _ = writeln!(s, "{n} = {v}");
    }
    s
}

/// Full circle in degrees, for scenario helpers that accept degrees.
pub fn degrees_to_radians(d: f64) -> f64 {
    d / 360.0 * TAU
}
