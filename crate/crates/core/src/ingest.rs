//! Trip and road-network ingestion.
//!
//! Both inputs are small comma-separated formats with a header row. Blank
//! lines and lines starting with `#` are skipped; line numbers in
//! diagnostics are 1-based physical lines.
//!
//! Trips: `origin_x,origin_y,dest_x,dest_y,duration_s,distance_km[,area]`
//! (or `origin_lon,origin_lat,dest_lon,dest_lat,...` for geographic input).
//!
//! Network: `ax,ay,bx,by,class[,length_m][,area]`.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circular::{build_histogram, wrap_angle, Angle, AngularHistogram};
use crate::error::{Error, Result};

/// Area label used when an input file has no `area` column.
pub const DEFAULT_AREA: &str = "default";

/// Mean Earth radius in meters, for equirectangular lengths.
const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateKind {
    /// Projected x/y in meters.
    #[default]
    Planar,
    /// Longitude/latitude in degrees.
    LonLat,
}

/// How derived bearings are expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BearingConvention {
    /// 0 along +x (east), counterclockwise.
    #[default]
    Math,
    /// 0 = north, clockwise.
    Compass,
}

impl BearingConvention {
    pub fn describe(self) -> &'static str {
        match self {
            BearingConvention::Math => "math convention: 0 rad = east (+x), counterclockwise",
            BearingConvention::Compass => "compass convention: 0 rad = north, clockwise",
        }
    }
}

/// Coordinate interpretation shared by every record parsed from one file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Frame {
    pub kind: CoordinateKind,
    pub convention: BearingConvention,
}

impl Frame {
    /// Bearing from `a` to `b`, or `None` when the points coincide.
    pub fn bearing(&self, a: Point, b: Point) -> Option<Angle> {
        let (dx, dy) = self.displacement(a, b);
        if dx == 0.0 && dy == 0.0 {
            return None;
        }
        let math = dy.atan2(dx);
        let theta = match self.convention {
            BearingConvention::Math => math,
            BearingConvention::Compass => FRAC_PI_2 - math,
        };
        wrap_angle(theta).ok()
    }

    /// Distance in meters between `a` and `b`.
    pub fn distance_m(&self, a: Point, b: Point) -> f64 {
        let (dx, dy) = self.displacement(a, b);
        match self.kind {
            CoordinateKind::Planar => dx.hypot(dy),
            CoordinateKind::LonLat => dx.to_radians().hypot(dy.to_radians()) * EARTH_RADIUS_M,
        }
    }

    fn displacement(&self, a: Point, b: Point) -> (f64, f64) {
        match self.kind {
            CoordinateKind::Planar => (b.x - a.x, b.y - a.y),
            CoordinateKind::LonLat => {
                let mean_lat = (0.5 * (a.y + b.y)).to_radians();
                ((b.x - a.x) * mean_lat.cos(), b.y - a.y)
            }
        }
    }
}

/// Planar `(x, y)` in meters, or `(lon, lat)` in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TripRecord {
    pub origin: Point,
    pub destination: Point,
    pub duration_s: f64,
    pub distance_km: f64,
    pub area: String,
    pub frame: Frame,
}

impl TripRecord {
    /// Same trip driven the other way.
    pub fn reversed(&self) -> TripRecord {
        TripRecord {
            origin: self.destination,
            destination: self.origin,
            ..self.clone()
        }
    }
}

/// Straight-line bearing from origin to destination.
pub fn trip_direction(t: &TripRecord) -> Result<Angle> {
    t.frame
        .bearing(t.origin, t.destination)
        .ok_or(Error::DegenerateTrip)
}

/// Seconds per kilometer.
pub fn pace(t: &TripRecord) -> Result<f64> {
    if !(t.distance_km > 0.0) {
        return Err(Error::InvalidValue(format!(
            "distance must be positive, got {}",
            t.distance_km
        )));
    }
    Ok(t.duration_s / t.distance_km)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoadClass {
    Motorway,
    Trunk,
    Primary,
    Secondary,
    Other,
}

impl RoadClass {
    pub const ALL: [RoadClass; 5] = [
        RoadClass::Motorway,
        RoadClass::Trunk,
        RoadClass::Primary,
        RoadClass::Secondary,
        RoadClass::Other,
    ];

    /// The major-road set: motorway, trunk, primary, secondary.
    pub fn major() -> BTreeSet<RoadClass> {
        RoadClass::ALL[..4].iter().copied().collect()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RoadClass::Motorway => "motorway",
            RoadClass::Trunk => "trunk",
            RoadClass::Primary => "primary",
            RoadClass::Secondary => "secondary",
            RoadClass::Other => "other",
        }
    }
}

impl fmt::Display for RoadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoadClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        RoadClass::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == lower)
            .ok_or_else(|| Error::InvalidValue(format!("unknown road class '{s}'")))
    }
}

/// Parse a comma-separated class list such as `motorway,trunk`.
pub fn parse_class_filter(s: &str) -> Result<BTreeSet<RoadClass>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(RoadClass::from_str)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoadSegment {
    pub a: Point,
    pub b: Point,
    pub length_m: f64,
    pub class: RoadClass,
    pub area: String,
    pub frame: Frame,
}

impl RoadSegment {
    pub fn is_zero_length(&self) -> bool {
        self.length_m == 0.0 || self.frame.bearing(self.a, self.b).is_none()
    }
}

/// Both travel directions of a segment: the bearing a→b and its opposite.
pub fn segment_orientations(s: &RoadSegment) -> Result<[Angle; 2]> {
    if s.length_m == 0.0 {
        return Err(Error::ZeroLengthSegment);
    }
    let forward = s.frame.bearing(s.a, s.b).ok_or(Error::ZeroLengthSegment)?;
    Ok([forward, forward.opposite()])
}

/// Road-orientation histogram. Zero-length segments are skipped.
pub fn network_histogram(
    segments: &[RoadSegment],
    bins: usize,
    length_weighted: bool,
) -> Result<AngularHistogram> {
    let mut angles = Vec::with_capacity(2 * segments.len());
    let mut weights = Vec::with_capacity(2 * segments.len());
    for s in segments {
        let Ok(pair) = segment_orientations(s) else {
            continue;
        };
        let w = if length_weighted { s.length_m } else { 1.0 };
        for a in pair {
            angles.push(a);
            weights.push(w);
        }
    }
    if angles.is_empty() {
        return Err(Error::EmptyInput("no road segments with nonzero length".into()));
    }
    build_histogram(&angles, Some(&weights), bins)
}

/// Fractions of the lowest and highest paces to discard.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterPolicy {
    lower_fraction: f64,
    upper_fraction: f64,
}

impl FilterPolicy {
    pub fn new(lower_fraction: f64, upper_fraction: f64) -> Result<Self> {
        let ok = |x: f64| (0.0..1.0).contains(&x);
        if !ok(lower_fraction) || !ok(upper_fraction) || lower_fraction + upper_fraction >= 1.0 {
            return Err(Error::InvalidValue(format!(
                "filter fractions must lie in [0, 1) and sum below 1, got {lower_fraction} and {upper_fraction}"
            )));
        }
        Ok(FilterPolicy {
            lower_fraction,
            upper_fraction,
        })
    }

    pub fn none() -> Self {
        FilterPolicy {
            lower_fraction: 0.0,
            upper_fraction: 0.0,
        }
    }

    pub fn lower_fraction(&self) -> f64 {
        self.lower_fraction
    }

    pub fn upper_fraction(&self) -> f64 {
        self.upper_fraction
    }
}

impl Default for FilterPolicy {
    /// Bottom 5% and top 10% removed.
    fn default() -> Self {
        FilterPolicy {
            lower_fraction: 0.05,
            upper_fraction: 0.10,
        }
    }
}

/// Nearest-rank trim: sorts by pace (ties by index), drops `⌊l·N⌋` from the
/// bottom and `⌊u·N⌋` from the top. Returns retained indices in ascending order.
pub fn percentile_filter(values: &[(usize, f64)], policy: FilterPolicy) -> Result<Vec<usize>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("no samples to filter".into()));
    }
    let n = values.len();
    let low = (policy.lower_fraction * n as f64).floor() as usize;
    let high = (policy.upper_fraction * n as f64).floor() as usize;
    if low + high >= n {
        return Err(Error::FilterRemovedAll);
    }
    let mut sorted: Vec<(usize, f64)> = values.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut kept: Vec<usize> = sorted[low..n - high].iter().map(|p| p.0).collect();
    kept.sort_unstable();
    Ok(kept)
}

/// Row rejected during parsing for violating a precondition.
#[derive(Clone, Debug, PartialEq)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct ParsedTrips {
    pub trips: Vec<TripRecord>,
    pub rejected: Vec<Rejection>,
}

struct Table<R> {
    lines: std::iter::Enumerate<std::io::Lines<R>>,
    columns: HashMap<String, usize>,
    width: usize,
}

impl<R: BufRead> Table<R> {
    fn open(reader: R, what: &str) -> Result<Option<(usize, Self)>> {
        let mut lines = reader.lines().enumerate();
        for (i, line) in lines.by_ref() {
            let line = line.map_err(|e| Error::io(format!("reading {what}"), e))?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let names: Vec<String> = t
                .trim_start_matches('\u{feff}')
                .split(',')
                .map(|s| s.trim().to_ascii_lowercase())
                .collect();
            let columns = names.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
            return Ok(Some((
                i + 1,
                Table {
                    lines,
                    columns,
                    width: names.len(),
                },
            )));
        }
        Ok(None)
    }

    fn require(&self, name: &str, line: usize) -> Result<usize> {
        self.columns.get(name).copied().ok_or_else(|| Error::Parse {
            line,
            message: format!("header is missing column '{name}'"),
        })
    }

    fn next_row(&mut self, what: &str) -> Option<Result<(usize, Vec<String>)>> {
        for (i, line) in self.lines.by_ref() {
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(format!("reading {what}"), e))),
            };
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let fields: Vec<String> = t.split(',').map(|s| s.trim().to_string()).collect();
            if fields.len() != self.width {
                return Some(Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {} fields, found {}", self.width, fields.len()),
                }));
            }
            return Some(Ok((i + 1, fields)));
        }
        None
    }
}

fn number(fields: &[String], idx: usize, name: &str, line: usize) -> Result<f64> {
    let raw = &fields[idx];
    let v: f64 = raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("field '{name}': cannot parse '{raw}' as a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("field '{name}': value '{raw}' is not finite"),
        });
    }
    Ok(v)
}

fn trip_columns(kind: CoordinateKind) -> [&'static str; 6] {
    match kind {
        CoordinateKind::Planar => [
            "origin_x",
            "origin_y",
            "dest_x",
            "dest_y",
            "duration_s",
            "distance_km",
        ],
        CoordinateKind::LonLat => [
            "origin_lon",
            "origin_lat",
            "dest_lon",
            "dest_lat",
            "duration_s",
            "distance_km",
        ],
    }
}

/// Parse the trip CSV. Rows with non-positive duration or distance are
/// collected as rejections; malformed rows abort with the line number.
pub fn parse_trips<R: BufRead>(reader: R, frame: Frame) -> Result<ParsedTrips> {
    let Some((header_line, mut table)) = Table::open(reader, "trips")? else {
        return Err(Error::Parse {
            line: 1,
            message: "missing header".into(),
        });
    };
    let names = trip_columns(frame.kind);
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(names) {
        *slot = table.require(name, header_line)?;
    }
    let area_idx = table.columns.get("area").copied();

    let mut out = ParsedTrips::default();
    while let Some(row) = table.next_row("trips") {
        let (line, fields) = row?;
        let mut v = [0.0; 6];
        for k in 0..6 {
            v[k] = number(&fields, idx[k], names[k], line)?;
        }
        let [ox, oy, dx, dy, duration_s, distance_km] = v;
        if duration_s <= 0.0 {
            out.rejected.push(Rejection {
                line,
                reason: format!("non-positive duration_s {duration_s}"),
            });
            continue;
        }
        if distance_km <= 0.0 {
            out.rejected.push(Rejection {
                line,
                reason: format!("non-positive distance_km {distance_km}"),
            });
            continue;
        }
        let area = area_idx
            .map(|i| fields[i].clone())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| DEFAULT_AREA.to_string());
        out.trips.push(TripRecord {
            origin: Point::new(ox, oy),
            destination: Point::new(dx, dy),
            duration_s,
            distance_km,
            area,
            frame,
        });
    }
    Ok(out)
}

/// Parse the network CSV, keeping segments whose class is in `class_filter`.
/// Missing or empty `length_m` is computed from the endpoints.
pub fn parse_network<R: BufRead>(
    reader: R,
    frame: Frame,
    class_filter: &BTreeSet<RoadClass>,
) -> Result<Vec<RoadSegment>> {
    let Some((header_line, mut table)) = Table::open(reader, "network")? else {
        return Err(Error::Parse {
            line: 1,
            message: "missing header".into(),
        });
    };
    let names = ["ax", "ay", "bx", "by"];
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(names) {
        *slot = table.require(name, header_line)?;
    }
    let class_idx = table.require("class", header_line)?;
    let length_idx = table.columns.get("length_m").copied();
    let area_idx = table.columns.get("area").copied();

    let mut out = Vec::new();
    while let Some(row) = table.next_row("network") {
        let (line, fields) = row?;
        let mut v = [0.0; 4];
        for k in 0..4 {
            v[k] = number(&fields, idx[k], names[k], line)?;
        }
        let class: RoadClass = fields[class_idx].parse().map_err(|e: Error| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if !class_filter.contains(&class) {
            continue;
        }
        let a = Point::new(v[0], v[1]);
        let b = Point::new(v[2], v[3]);
        let length_m = match length_idx {
            Some(i) if !fields[i].is_empty() => {
                let l = number(&fields, i, "length_m", line)?;
                if l < 0.0 {
                    return Err(Error::Parse {
                        line,
                        message: format!("negative length_m {l}"),
                    });
                }
                l
            }
            _ => frame.distance_m(a, b),
        };
        let area = area_idx
            .map(|i| fields[i].clone())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| DEFAULT_AREA.to_string());
        out.push(RoadSegment {
            a,
            b,
            length_m,
            class,
            area,
            frame,
        });
    }
    Ok(out)
}

/// Serialize trips in the planar trip format, with an `area` column when
/// `with_area` is set.
pub fn write_trips<W: Write>(mut w: W, trips: &[TripRecord], with_area: bool) -> std::io::Result<()> {
    write!(w, "origin_x,origin_y,dest_x,dest_y,duration_s,distance_km")?;
    if with_area {
        write!(w, ",area")?;
    }
    writeln!(w)?;
    for t in trips {
        write!(
            w,
            "{},{},{},{},{},{}",
            t.origin.x, t.origin.y, t.destination.x, t.destination.y, t.duration_s, t.distance_km
        )?;
        if with_area {
            write!(w, ",{}", t.area)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Serialize segments in the network format (always with `length_m`).
pub fn write_network<W: Write>(
    mut w: W,
    segments: &[RoadSegment],
    with_area: bool,
) -> std::io::Result<()> {
    write!(w, "ax,ay,bx,by,class,length_m")?;
    if with_area {
        write!(w, ",area")?;
    }
    writeln!(w)?;
    for s in segments {
        write!(
            w,
            "{},{},{},{},{},{}",
            s.a.x, s.a.y, s.b.x, s.b.y, s.class, s.length_m
        )?;
        if with_area {
            write!(w, ",{}", s.area)?;
        }
        writeln!(w)?;
    }
    Ok(())
}
