//! Ordinary least squares with an intercept, solved by Householder QR.
//!
//! Columns are factorized left to right. A column whose component orthogonal
//! to the already accepted columns is negligible is *aliased*: either the fit
//! fails naming it ([`AliasPolicy::Error`]) or the coefficient is pinned to
//! zero and reported without inference ([`AliasPolicy::Drop`]).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::DesignMatrix;
use crate::special::{f_p_value, t_p_value};

/// Name of the intercept parameter.
pub const INTERCEPT: &str = "gamma";

/// Default two-sided significance level.
pub const DEFAULT_LEVEL: f64 = 0.05;

/// A column is aliased when its residual after projection onto the previous
/// columns is at most this fraction of its own norm.
const ALIAS_RELATIVE: f64 = 1e-10;
/// Columns with norm below this fraction of the largest column norm are
/// treated as numerically null.
const NULL_RELATIVE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AliasPolicy {
    #[default]
    Error,
    Drop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub t_value: f64,
    pub p_value: f64,
    pub aliased: bool,
}

/// Estimated parameters (intercept first) and overall fit statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub params: Vec<Param>,
    pub r_squared: f64,
    pub f_statistic: f64,
    pub prob_f: f64,
    pub n_samples: usize,
    pub dof_residual: usize,
    pub rss: f64,
    pub tss: f64,
    fitted: Vec<f64>,
}

impl FitResult {
    pub fn gamma(&self) -> f64 {
        self.params[0].coefficient
    }

    /// Slope parameters in design-matrix column order.
    pub fn slopes(&self) -> &[Param] {
        &self.params[1..]
    }

    pub fn slope_coefficients(&self) -> Vec<f64> {
        self.slopes().iter().map(|p| p.coefficient).collect()
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    /// In-sample fitted values.
    pub fn fitted(&self) -> &[f64] {
        &self.fitted
    }

    /// Number of estimated (non-aliased) parameters, intercept included.
    pub fn rank(&self) -> usize {
        self.params.iter().filter(|p| !p.aliased).count()
    }

    pub fn aliased_names(&self) -> Vec<&str> {
        self.params
            .iter()
            .filter(|p| p.aliased)
            .map(|p| p.name.as_str())
            .collect()
    }

    /// Appendix-style coefficient table.
    pub fn write_report<W: Write>(&self, mut w: W, level: f64) -> std::io::Result<()> {
        writeln!(w, "name,coefficient,std_err,t_value,p_value,significant_5pct")?;
        let mask = significance_mask(self, level);
        for (p, sig) in self.params.iter().zip(mask) {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                p.name, p.coefficient, p.std_error, p.t_value, p.p_value, sig
            )?;
        }
        Ok(())
    }
}

/// `mask[i] = p_i < level`; the intercept is always kept. Aliased
/// parameters are never significant.
pub fn significance_mask(fit: &FitResult, level: f64) -> Vec<bool> {
    fit.params
        .iter()
        .enumerate()
        .map(|(i, p)| i == 0 || (!p.aliased && p.p_value < level))
        .collect()
}

/// OLS of `x.target()` on `[1 x]`; fails on any aliased column.
pub fn ols_fit(x: &DesignMatrix) -> Result<FitResult> {
    ols_fit_with(x, AliasPolicy::Error)
}

struct Reflector {
    start: usize,
    v: Vec<f64>,
    beta: f64,
}

impl Reflector {
    fn apply(&self, x: &mut [f64]) {
        let tail = &mut x[self.start..];
        let s: f64 = self.v.iter().zip(tail.iter()).map(|(a, b)| a * b).sum();
        let f = self.beta * s;
        for (t, v) in tail.iter_mut().zip(&self.v) {
            *t -= f * v;
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    // scaled to avoid overflow on large paces
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * x.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

pub fn ols_fit_with(x: &DesignMatrix, policy: AliasPolicy) -> Result<FitResult> {
    let n = x.rows();
    let m = x.cols();
    let y = x.target();
    if n <= m + 1 {
        return Err(Error::Underdetermined { rows: n, params: m + 1 });
    }
    if let Some(bad) = x.data().iter().chain(y).find(|v| !v.is_finite()) {
        return Err(Error::InvalidValue(format!("non-finite value {bad} in regression data")));
    }

    let mut names = Vec::with_capacity(m + 1);
    names.push(INTERCEPT.to_string());
    names.extend(x.names().iter().cloned());

    let column = |j: usize| -> Vec<f64> {
        if j == 0 {
            vec![1.0; n]
        } else {
            (0..n).map(|i| x.get(i, j - 1)).collect()
        }
    };
    let max_norm = (0..=m).map(|j| norm(&column(j))).fold(0.0, f64::max);

    let mut reflectors: Vec<Reflector> = Vec::new();
    // r_cols[c] holds column c of R (length c + 1)
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    let mut aliased = vec![false; m + 1];

    for j in 0..=m {
        let original = column(j);
        let col_norm = norm(&original);
        let mut v = original;
        for h in &reflectors {
            h.apply(&mut v);
        }
        let rank = reflectors.len();
        let tail_norm = norm(&v[rank..]);
        if col_norm <= NULL_RELATIVE * max_norm || tail_norm <= ALIAS_RELATIVE * col_norm || rank == n {
            aliased[j] = true;
            continue;
        }
        let alpha = if v[rank] > 0.0 { -tail_norm } else { tail_norm };
        let mut u = v[rank..].to_vec();
        u[0] -= alpha;
        let uu: f64 = u.iter().map(|a| a * a).sum();
        let mut r = v[..rank].to_vec();
        r.push(alpha);
        r_cols.push(r);
        reflectors.push(Reflector {
            start: rank,
            v: u,
            beta: 2.0 / uu,
        });
        kept.push(j);
    }

    if policy == AliasPolicy::Error && aliased.iter().any(|a| *a) {
        let columns = names
            .iter()
            .zip(&aliased)
            .filter(|(_, a)| **a)
            .map(|(n, _)| n.clone())
            .collect();
        return Err(Error::RankDeficient { columns });
    }

    let rank = kept.len();
    if n <= rank {
        return Err(Error::Underdetermined { rows: n, params: rank });
    }

    let mut qty = y.to_vec();
    for h in &reflectors {
        h.apply(&mut qty);
    }
    let r = |row: usize, col: usize| r_cols[col][row];

    let mut b = vec![0.0; rank];
    for i in (0..rank).rev() {
        let mut s = qty[i];
        for k in i + 1..rank {
            s -= r(i, k) * b[k];
        }
        b[i] = s / r(i, i);
    }

    // R⁻¹ by columns; diag((AᵀA)⁻¹)_i = Σ_k (R⁻¹)_{ik}²
    let mut rinv = vec![vec![0.0; rank]; rank];
    for c in 0..rank {
        rinv[c][c] = 1.0 / r(c, c);
        for i in (0..c).rev() {
            let mut s = 0.0;
            for k in i + 1..=c {
                s += r(i, k) * rinv[k][c];
            }
            rinv[i][c] = -s / r(i, i);
        }
    }
    let diag: Vec<f64> = (0..rank)
        .map(|i| rinv[i][i..].iter().map(|v| v * v).sum())
        .collect();

    let mut full = vec![0.0; m + 1];
    for (slot, &j) in kept.iter().enumerate() {
        full[j] = b[slot];
    }
    let fitted: Vec<f64> = (0..n)
        .map(|i| {
            let row = x.row(i);
            full[0] + row.iter().zip(&full[1..]).map(|(a, c)| a * c).sum::<f64>()
        })
        .collect();
    let rss: f64 = y.iter().zip(&fitted).map(|(a, f)| (a - f).powi(2)).sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let y_scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let degenerate = tss <= n as f64 * (64.0 * f64::EPSILON * y_scale).powi(2);

    let dof = n - rank;
    let slopes = rank - 1;
    let sigma2 = rss / dof as f64;

    let (r_squared, f_statistic, prob_f) = if degenerate {
        (0.0, 0.0, 1.0)
    } else {
        let r2 = (1.0 - rss / tss).clamp(0.0, 1.0);
        if slopes == 0 {
            (r2, 0.0, 1.0)
        } else if rss == 0.0 {
            (r2, f64::INFINITY, 0.0)
        } else {
            let f = (r2 / slopes as f64) / ((1.0 - r2) / dof as f64);
            (r2, f, f_p_value(f, slopes as f64, dof as f64))
        }
    };

    let mut params: Vec<Param> = names
        .into_iter()
        .map(|name| Param {
            name,
            coefficient: 0.0,
            std_error: f64::NAN,
            t_value: f64::NAN,
            p_value: f64::NAN,
            aliased: true,
        })
        .collect();
    for (slot, &j) in kept.iter().enumerate() {
        let se = (sigma2 * diag[slot]).sqrt();
        let t = b[slot] / se;
        params[j] = Param {
            coefficient: b[slot],
            std_error: se,
            t_value: t,
            p_value: t_p_value(t, dof as f64),
            aliased: false,
            ..params[j].clone()
        };
    }

    Ok(FitResult {
        params,
        r_squared,
        f_statistic,
        prob_f,
        n_samples: n,
        dof_residual: dof,
        rss,
        tss,
        fitted,
    })
}
