//! Angles on the circle and equal-width circular histograms.
//!
//! Angles follow the mathematical convention (0 along +x, counterclockwise).
//! Bin `i` of a `B`-bin histogram covers `[i·2π/B, (i+1)·2π/B)` and is
//! represented by its center `(i + 0.5)·2π/B`.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;

/// Default number of histogram bins.
pub const DEFAULT_BINS: usize = 32;

/// An angle in radians, always in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    /// Wraps any finite value into `[0, 2π)`.
    pub fn new(radians: f64) -> Result<Self> {
        wrap_angle(radians)
    }

    pub fn from_degrees(degrees: f64) -> Result<Self> {
        wrap_angle(degrees.to_radians())
    }

    #[inline]
    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    /// `self + delta`, wrapped.
    pub fn rotate(self, delta: f64) -> Angle {
        Angle(wrap_finite(self.0 + delta))
    }

    /// The opposite direction, `self + π`.
    pub fn opposite(self) -> Angle {
        self.rotate(PI)
    }
}

impl TryFrom<f64> for Angle {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        wrap_angle(value)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[inline]
fn wrap_finite(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

pub fn wrap_angle(x: f64) -> Result<Angle> {
    if !x.is_finite() {
        return Err(Error::NonFiniteAngle(x));
    }
    Ok(Angle(wrap_finite(x)))
}

/// `a − b` wrapped into `[−π, π)`.
pub fn angular_difference(a: Angle, b: Angle) -> f64 {
    let mut r = (a.0 - b.0 + PI).rem_euclid(TAU);
    if r >= TAU {
        r -= TAU;
    }
    r - PI
}

/// Width of one bin, `2π/B`.
#[inline]
pub fn bin_width(bins: usize) -> f64 {
    TAU / bins as f64
}

pub fn bin_center(index: usize, bins: usize) -> Result<Angle> {
    if index >= bins {
        return Err(Error::BinOutOfRange { index, bins });
    }
    Ok(Angle((index as f64 + 0.5) * bin_width(bins)))
}

/// Index of the half-open bin containing `a`.
#[inline]
pub fn bin_index(a: Angle, bins: usize) -> usize {
    let i = (a.0 / bin_width(bins)).floor() as usize;
    i.min(bins - 1)
}

/// Bin centers for a `bins`-bin histogram.
pub fn bin_centers(bins: usize) -> Vec<Angle> {
    (0..bins)
        .map(|i| Angle((i as f64 + 0.5) * bin_width(bins)))
        .collect()
}

/// Frequencies over `B` equal circular bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularHistogram {
    values: Vec<f64>,
    normalized: bool,
}

impl AngularHistogram {
    /// Wraps raw bin values. With `normalize`, values are divided by their sum.
    pub fn from_values(values: Vec<f64>, normalize: bool) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidHistogram("zero bins".into()));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidHistogram(format!(
                "bin {i} has invalid value {v}"
            )));
        }
        let mut h = AngularHistogram {
            values,
            normalized: false,
        };
        if normalize {
            h.normalize()?;
        } else {
            h.normalized = (h.total() - 1.0).abs() <= 1e-12;
        }
        Ok(h)
    }

    pub fn uniform(bins: usize) -> Result<Self> {
        Self::from_values(vec![1.0; bins], true)
    }

    /// All mass in a single bin.
    pub fn delta(bin: usize, bins: usize) -> Result<Self> {
        if bin >= bins {
            return Err(Error::BinOutOfRange { index: bin, bins });
        }
        let mut values = vec![0.0; bins];
        values[bin] = 1.0;
        Self::from_values(values, false)
    }

    pub fn bin_count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::EmptyInput("histogram has zero total weight".into()));
        }
        for v in &mut self.values {
            *v /= total;
        }
        self.normalized = true;
        Ok(())
    }

    /// Value of the bin containing `a`.
    pub fn lookup(&self, a: Angle) -> f64 {
        self.values[bin_index(a, self.bin_count())]
    }

    /// Rotate the histogram by `shift` bins: `out[i] = self[(i − shift) mod B]`.
    pub fn cyclic_shift(&self, shift: isize) -> AngularHistogram {
        let b = self.bin_count() as isize;
        let values = (0..b)
            .map(|i| self.values[(i - shift).rem_euclid(b) as usize])
            .collect();
        AngularHistogram {
            values,
            normalized: self.normalized,
        }
    }

    /// Largest `|value[i] − value[i + B/2]|` and the bin pair where it occurs.
    /// Odd bin counts cannot be point-symmetric and report an infinite defect.
    pub fn point_symmetry_defect(&self) -> (usize, usize, f64) {
        let b = self.bin_count();
        if b % 2 == 1 {
            return (0, 0, f64::INFINITY);
        }
        let half = b / 2;
        (0..half)
            .map(|i| (i, i + half, (self.values[i] - self.values[i + half]).abs()))
            .fold((0, half, 0.0), |best, cur| if cur.2 > best.2 { cur } else { best })
    }

    pub fn is_point_symmetric(&self, tol: f64) -> bool {
        self.point_symmetry_defect().2 <= tol
    }

    pub(crate) fn require_normalized(&self, what: &str) -> Result<()> {
        if !self.normalized || (self.total() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidHistogram(format!("{what} histogram is not normalized")));
        }
        Ok(())
    }
}

/// Normalized histogram of `angles`, optionally weighted.
///
/// Bin sums are accumulated in input order within fixed-size chunks and the
/// chunks are merged in order, so the result is bit-identical for either
/// execution strategy.
pub fn build_histogram(
    angles: &[Angle],
    weights: Option<&[f64]>,
    bins: usize,
) -> Result<AngularHistogram> {
    build_histogram_with(angles, weights, bins, Execution::default())
}

pub fn build_histogram_with(
    angles: &[Angle],
    weights: Option<&[f64]>,
    bins: usize,
    exec: Execution,
) -> Result<AngularHistogram> {
    if bins == 0 {
        return Err(Error::InvalidHistogram("bin count must be at least 1".into()));
    }
    if angles.is_empty() {
        return Err(Error::EmptyInput("no angles to histogram".into()));
    }
    if let Some(w) = weights {
        if w.len() != angles.len() {
            return Err(Error::InvalidValue(format!(
                "{} weights for {} angles",
                w.len(),
                angles.len()
            )));
        }
        if let Some(bad) = w.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidValue(format!("invalid weight {bad}")));
        }
    }
    let counts = exec.chunked_reduce(
        angles,
        |offset, chunk| {
            let mut acc = vec![0.0; bins];
            for (k, a) in chunk.iter().enumerate() {
                let w = weights.map_or(1.0, |w| w[offset + k]);
                acc[bin_index(*a, bins)] += w;
            }
            acc
        },
        vec![0.0; bins],
        |mut acc, part| {
            for (a, p) in acc.iter_mut().zip(part) {
                *a += p;
            }
            acc
        },
    );
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyInput("total weight is zero".into()));
    }
    AngularHistogram::from_values(counts, true)
}

/// Value of the bin of `h` containing `a`.
pub fn histogram_lookup(h: &AngularHistogram, a: Angle) -> f64 {
    h.lookup(a)
}
