//! Influence curves and direction-dependent pace prediction.
//!
//! A fitted model is the intercept `γ` plus two truncated Fourier series,
//!
//! ```text
//! α(φ) = Σ_k a_ck cos kφ + a_sk sin kφ       β(η) = Σ_k b_ck cos kη + b_sk sin kη
//! ```
//!
//! Curves are reconstructed from the significant terms only; prediction
//! always uses every fitted coefficient.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::circular::{Angle, AngularHistogram};
use crate::error::{Error, Result};
use crate::estimator::{FitResult, Param, INTERCEPT};
use crate::features::{AreaHistograms, ModelSpec};

/// Default number of grid points for reconstructed curves.
pub const DEFAULT_GRID: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    /// Demand influence α(φ).
    Alpha,
    /// Network influence β(η).
    Beta,
}

impl CurveKind {
    pub fn symbol(self) -> &'static str {
        match self {
            CurveKind::Alpha => "alpha",
            CurveKind::Beta => "beta",
        }
    }
}

/// One harmonic `c·cos kφ + s·sin kφ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Harmonic {
    pub order: usize,
    pub cos: f64,
    pub sin: f64,
}

/// `(kind, is_cos, order)` for names like `a_c3` or `b_s8`.
fn parse_name(name: &str) -> Option<(CurveKind, bool, usize)> {
    let kind = if name.starts_with("a_") {
        CurveKind::Alpha
    } else if name.starts_with("b_") {
        CurveKind::Beta
    } else {
        return None;
    };
    let rest = &name[2..];
    let is_cos = match rest.as_bytes().first()? {
        b'c' => true,
        b's' => false,
        _ => return None,
    };
    let order = rest[1..].parse().ok()?;
    Some((kind, is_cos, order))
}

fn collect_harmonics(names: &[String], values: &[f64], mask: &[bool], kind: CurveKind) -> Vec<Harmonic> {
    let mut terms: Vec<Harmonic> = Vec::new();
    for ((name, value), keep) in names.iter().zip(values).zip(mask) {
        let Some((k, is_cos, order)) = parse_name(name) else {
            continue;
        };
        if k != kind || !keep {
            continue;
        }
        let slot = match terms.iter_mut().position(|h| h.order == order) {
            Some(i) => &mut terms[i],
            None => {
                terms.push(Harmonic {
                    order,
                    cos: 0.0,
                    sin: 0.0,
                });
                terms.last_mut().unwrap()
            }
        };
        if is_cos {
            slot.cos = *value;
        } else {
            slot.sin = *value;
        }
    }
    terms.sort_by_key(|h| h.order);
    terms
}

/// α(φ) or β(η) sampled on `[−π, π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceCurve {
    pub kind: CurveKind,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub significance_filtered: bool,
    terms: Vec<Harmonic>,
}

impl InfluenceCurve {
    /// Exact series value at `offset`.
    pub fn value_at(&self, offset: f64) -> f64 {
        self.terms
            .iter()
            .map(|h| {
                let (s, c) = (h.order as f64 * offset).sin_cos();
                h.cos * c + h.sin * s
            })
            .sum()
    }

    pub fn terms(&self) -> &[Harmonic] {
        &self.terms
    }

    /// `(offset, value)` of the grid maximum.
    pub fn argmax(&self) -> (f64, f64) {
        self.extreme(|a, b| a > b)
    }

    pub fn argmin(&self) -> (f64, f64) {
        self.extreme(|a, b| a < b)
    }

    fn extreme(&self, better: impl Fn(f64, f64) -> bool) -> (f64, f64) {
        let mut best = (self.grid[0], self.values[0]);
        for (g, v) in self.grid.iter().zip(&self.values) {
            if better(*v, best.1) {
                best = (*g, *v);
            }
        }
        best
    }

    /// Copy with the grid minimum subtracted, so the curve reads as the
    /// increase over its smallest value.
    pub fn relative_to_min(&self) -> InfluenceCurve {
        let min = self.argmin().1;
        InfluenceCurve {
            values: self.values.iter().map(|v| v - min).collect(),
            ..self.clone()
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "offset_rad,value")?;
        for (g, v) in self.grid.iter().zip(&self.values) {
            writeln!(w, "{g},{v}")?;
        }
        Ok(())
    }
}

/// Evaluate the masked series for `kind` on `grid_size` equally spaced
/// offsets starting at −π. `names`, `coefficients` and `mask` are aligned;
/// entries belonging to the other curve (or the intercept) are ignored.
pub fn reconstruct_curve(
    names: &[String],
    coefficients: &[f64],
    mask: &[bool],
    kind: CurveKind,
    grid_size: usize,
) -> Result<InfluenceCurve> {
    if grid_size < 8 {
        return Err(Error::InvalidValue(format!("grid size must be at least 8, got {grid_size}")));
    }
    if names.len() != coefficients.len() || names.len() != mask.len() {
        return Err(Error::InvalidValue("names, coefficients and mask differ in length".into()));
    }
    let terms = collect_harmonics(names, coefficients, mask, kind);
    let grid: Vec<f64> = (0..grid_size)
        .map(|g| -PI + g as f64 * TAU / grid_size as f64)
        .collect();
    let mut curve = InfluenceCurve {
        kind,
        grid,
        values: Vec::new(),
        significance_filtered: mask.iter().any(|m| !m),
        terms,
    };
    curve.values = curve.grid.iter().map(|&g| curve.value_at(g)).collect();
    Ok(curve)
}

/// Curve from a fit, keeping the terms selected by `mask` (aligned with `fit.params`).
pub fn reconstruct_from_fit(fit: &FitResult, mask: &[bool], kind: CurveKind, grid_size: usize) -> Result<InfluenceCurve> {
    let names: Vec<String> = fit.params.iter().map(|p| p.name.clone()).collect();
    let values: Vec<f64> = fit.params.iter().map(|p| p.coefficient).collect();
    reconstruct_curve(&names, &values, mask, kind, grid_size)
}

/// Intercept and slopes of a fitted model, in design-matrix column order.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients {
    pub gamma: f64,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl Coefficients {
    pub fn from_fit(fit: &FitResult) -> Self {
        Coefficients {
            gamma: fit.gamma(),
            names: fit.slopes().iter().map(|p| p.name.clone()).collect(),
            values: fit.slope_coefficients(),
        }
    }

    fn check(&self, spec: &ModelSpec) -> Result<()> {
        let expected = spec.column_names();
        if self.names != expected {
            return Err(Error::SpecMismatch(format!(
                "coefficients have {} columns, model shape (K={}, symmetric={}) expects {}",
                self.names.len(),
                spec.harmonics,
                spec.network_point_symmetric,
                expected.len()
            )));
        }
        Ok(())
    }
}

/// Predicted pace (s/km) for heading `theta` under histograms `d` and `n`.
pub fn predict_pace(
    theta: Angle,
    d: &AngularHistogram,
    n: &AngularHistogram,
    coefficients: &Coefficients,
    spec: &ModelSpec,
) -> Result<f64> {
    spec.validate()?;
    coefficients.check(spec)?;
    let area = AreaHistograms::new("prediction", d.clone(), n.clone());
    let features = area.features(theta, spec)?;
    Ok(coefficients.gamma
        + features
            .iter()
            .zip(&coefficients.values)
            .map(|(x, b)| x * b)
            .sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignVerdict {
    Matches,
    Contradicts,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveSummary {
    pub kind: CurveKind,
    pub at_zero: f64,
    pub verdict: SignVerdict,
    pub argmax: (f64, f64),
    pub argmin: (f64, f64),
}

/// Sign of α(0) and β(0) against the expected positive / negative values.
#[derive(Clone, Debug, PartialEq)]
pub struct SignReport {
    pub alpha: CurveSummary,
    pub beta: CurveSummary,
}

const ZERO_TOLERANCE: f64 = 1e-12;

fn summarize(curve: &InfluenceCurve, expect_positive: bool) -> CurveSummary {
    let at_zero = curve.value_at(0.0);
    let verdict = if at_zero.abs() <= ZERO_TOLERANCE {
        SignVerdict::Indeterminate
    } else if (at_zero > 0.0) == expect_positive {
        SignVerdict::Matches
    } else {
        SignVerdict::Contradicts
    };
    CurveSummary {
        kind: curve.kind,
        at_zero,
        verdict,
        argmax: curve.argmax(),
        argmin: curve.argmin(),
    }
}

pub fn expected_sign_report(alpha: &InfluenceCurve, beta: &InfluenceCurve) -> SignReport {
    SignReport {
        alpha: summarize(alpha, true),
        beta: summarize(beta, false),
    }
}

impl fmt::Display for SignReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (s, expected) in [(&self.alpha, "positive"), (&self.beta, "negative")] {
            let name = s.kind.symbol();
            let sign = if s.at_zero.abs() <= ZERO_TOLERANCE {
                "zero"
            } else if s.at_zero > 0.0 {
                "positive"
            } else {
                "negative"
            };
            let verdict = match s.verdict {
                SignVerdict::Matches => "matches expectation".to_string(),
                SignVerdict::Contradicts => format!("contradicts expectation ({expected})"),
                SignVerdict::Indeterminate => "indeterminate (zero)".to_string(),
            };
            writeln!(f, "{name}(0) = {:.6} [{sign}]: {verdict}", s.at_zero)?;
            writeln!(
                f,
                "{name} max at offset {:.6} rad ({:.6}); min at offset {:.6} rad ({:.6})",
                s.argmax.0, s.argmax.1, s.argmin.0, s.argmin.1
            )?;
        }
        Ok(())
    }
}

pub const MODEL_SCHEMA: &str = "angcong-model";
pub const MODEL_VERSION: u32 = 1;

/// Parameter as stored on disk; non-finite statistics become `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredParam {
    pub name: String,
    pub coefficient: f64,
    pub std_error: Option<f64>,
    pub t_value: Option<f64>,
    pub p_value: Option<f64>,
    pub aliased: bool,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl From<&Param> for StoredParam {
    fn from(p: &Param) -> Self {
        StoredParam {
            name: p.name.clone(),
            coefficient: p.coefficient,
            std_error: finite(p.std_error),
            t_value: finite(p.t_value),
            p_value: finite(p.p_value),
            aliased: p.aliased,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitStatistics {
    pub n_samples: usize,
    pub dof_residual: usize,
    pub r_squared: f64,
    pub f_statistic: Option<f64>,
    pub prob_f: f64,
}

/// Versioned `model.json` document: shape, coefficients, and the
/// histograms of each area so predictions can be made without refitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub schema: String,
    pub version: u32,
    pub spec: ModelSpec,
    pub columns: Vec<String>,
    pub params: Vec<StoredParam>,
    pub statistics: FitStatistics,
    pub areas: Vec<AreaHistograms>,
}

impl FittedModel {
    pub fn new(spec: ModelSpec, fit: &FitResult, areas: Vec<AreaHistograms>) -> Self {
        FittedModel {
            schema: MODEL_SCHEMA.into(),
            version: MODEL_VERSION,
            spec,
            columns: fit.slopes().iter().map(|p| p.name.clone()).collect(),
            params: fit.params.iter().map(StoredParam::from).collect(),
            statistics: FitStatistics {
                n_samples: fit.n_samples,
                dof_residual: fit.dof_residual,
                r_squared: fit.r_squared,
                f_statistic: finite(fit.f_statistic),
                prob_f: fit.prob_f,
            },
            areas,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: FittedModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != MODEL_SCHEMA || self.version != MODEL_VERSION {
            return Err(Error::SpecMismatch(format!(
                "unsupported model document {} v{}",
                self.schema, self.version
            )));
        }
        self.spec.validate()?;
        if self.columns != self.spec.column_names() {
            return Err(Error::SpecMismatch("column names do not match the model shape".into()));
        }
        if self.params.len() != self.columns.len() + 1 || self.params[0].name != INTERCEPT {
            return Err(Error::SpecMismatch("parameter list does not match columns".into()));
        }
        for (p, c) in self.params[1..].iter().zip(&self.columns) {
            if &p.name != c {
                return Err(Error::SpecMismatch(format!("parameter {} out of order", p.name)));
            }
        }
        for a in &self.areas {
            a.validate(&self.spec)?;
        }
        Ok(())
    }

    pub fn coefficients(&self) -> Coefficients {
        Coefficients {
            gamma: self.params[0].coefficient,
            names: self.columns.clone(),
            values: self.params[1..].iter().map(|p| p.coefficient).collect(),
        }
    }

    /// Area by name, or the only area when `name` is `None`.
    pub fn area(&self, name: Option<&str>) -> Result<&AreaHistograms> {
        match name {
            Some(n) => self
                .areas
                .iter()
                .find(|a| a.name == n)
                .ok_or_else(|| Error::InvalidValue(format!("model has no area '{n}'"))),
            None if self.areas.len() == 1 => Ok(&self.areas[0]),
            None => Err(Error::InvalidValue(format!(
                "model has {} areas; choose one by name",
                self.areas.len()
            ))),
        }
    }

    pub fn predict(&self, theta: Angle, area: Option<&str>) -> Result<f64> {
        let a = self.area(area)?;
        predict_pace(theta, &a.demand, &a.network, &self.coefficients(), &self.spec)
    }
}
