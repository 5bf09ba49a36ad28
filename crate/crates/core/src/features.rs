//! Fourier-weighted histogram sums that form the regression design matrix.
//!
//! For a trip heading `θ` and a histogram `h` with bin centers `c_j`, the
//! order-`k` features are
//!
//! ```text
//! Σ_j h_j · cos(k·φ_j),   Σ_j h_j · sin(k·φ_j),   φ_j = wrap(c_j − θ) ∈ [−π, π)
//! ```
//!
//! The demand histogram contributes orders `1..=K`. The network histogram
//! contributes the same orders, or only the even ones when it is
//! point-symmetric (odd orders then vanish identically).
//!
//! Column layout: `a_c1, a_s1, …, a_cK, a_sK`, then the network columns
//! `b_ck, b_sk` in ascending `k`. The intercept is added by the estimator.
//!
//! Within one area every column is a combination of `cos kθ` and `sin kθ`,
//! so demand and network columns of the same order are collinear. Pooling
//! areas with different histograms makes both identifiable.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::circular::{angular_difference, bin_centers, Angle, AngularHistogram};
use crate::error::{Error, Result};
use crate::exec::Execution;

/// Tolerance for the point-symmetry precondition on network histograms.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Shape of the regression: harmonic degree, bin count, network symmetry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub harmonics: usize,
    pub bins: usize,
    pub network_point_symmetric: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            harmonics: 8,
            bins: 32,
            network_point_symmetric: true,
        }
    }
}

impl ModelSpec {
    pub fn new(harmonics: usize, bins: usize, network_point_symmetric: bool) -> Result<Self> {
        let spec = ModelSpec {
            harmonics,
            bins,
            network_point_symmetric,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.harmonics < 1 {
            return Err(Error::SpecMismatch("harmonic degree K must be at least 1".into()));
        }
        if self.bins < 2 {
            return Err(Error::SpecMismatch("bin count must be at least 2".into()));
        }
        if self.network_point_symmetric && !self.bins.is_multiple_of(2) {
            return Err(Error::SpecMismatch(
                "point-symmetric network requires an even bin count".into(),
            ));
        }
        Ok(())
    }

    /// Orders carried by the network block.
    pub fn network_orders(&self) -> Vec<usize> {
        network_orders(self.harmonics, self.network_point_symmetric)
    }

    pub fn demand_columns(&self) -> usize {
        2 * self.harmonics
    }

    pub fn network_columns(&self) -> usize {
        2 * self.network_orders().len()
    }

    /// Design-matrix width (without intercept).
    pub fn feature_count(&self) -> usize {
        self.demand_columns() + self.network_columns()
    }

    /// Number of fitted parameters including the intercept.
    pub fn parameter_count(&self) -> usize {
        self.feature_count() + 1
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.feature_count());
        for k in 1..=self.harmonics {
            names.push(format!("a_c{k}"));
            names.push(format!("a_s{k}"));
        }
        for k in self.network_orders() {
            names.push(format!("b_c{k}"));
            names.push(format!("b_s{k}"));
        }
        names
    }
}

fn network_orders(harmonics: usize, point_symmetric: bool) -> Vec<usize> {
    if point_symmetric {
        (2..=harmonics).step_by(2).collect()
    } else {
        (1..=harmonics).collect()
    }
}

/// Writes `[Σ h cos kφ, Σ h sin kφ]` for each `k` in `orders` into `out`.
/// Summation runs over bins in ascending order.
fn fourier_sums(theta: Angle, h: &AngularHistogram, centers: &[Angle], orders: &[usize], out: &mut [f64]) {
    debug_assert_eq!(out.len(), 2 * orders.len());
    out.iter_mut().for_each(|v| *v = 0.0);
    for (value, center) in h.values().iter().zip(centers) {
        if *value == 0.0 {
            continue;
        }
        let phi = angular_difference(*center, theta);
        for (slot, &k) in out.chunks_exact_mut(2).zip(orders) {
            let (s, c) = (k as f64 * phi).sin_cos();
            slot[0] += value * c;
            slot[1] += value * s;
        }
    }
}

/// Demand block for one trip: `2K` values, cos before sin, ascending `k`.
pub fn demand_features(theta: Angle, d: &AngularHistogram, harmonics: usize) -> Result<Vec<f64>> {
    d.require_normalized("demand")?;
    let orders: Vec<usize> = (1..=harmonics).collect();
    let mut out = vec![0.0; 2 * orders.len()];
    fourier_sums(theta, d, &bin_centers(d.bin_count()), &orders, &mut out);
    Ok(out)
}

/// Network block for one trip. With `point_symmetric`, only even orders are
/// emitted and the histogram must satisfy `n[i] == n[i + B/2]`.
pub fn network_features(
    theta: Angle,
    n: &AngularHistogram,
    harmonics: usize,
    point_symmetric: bool,
) -> Result<Vec<f64>> {
    n.require_normalized("network")?;
    if point_symmetric {
        check_point_symmetric(n)?;
    }
    let orders = network_orders(harmonics, point_symmetric);
    let mut out = vec![0.0; 2 * orders.len()];
    fourier_sums(theta, n, &bin_centers(n.bin_count()), &orders, &mut out);
    Ok(out)
}

fn check_point_symmetric(n: &AngularHistogram) -> Result<()> {
    let (bin, opposite, difference) = n.point_symmetry_defect();
    if difference > SYMMETRY_TOLERANCE {
        return Err(Error::NotPointSymmetric {
            bin,
            opposite,
            difference,
        });
    }
    Ok(())
}

/// Demand and network histograms of one study area.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaHistograms {
    pub name: String,
    pub demand: AngularHistogram,
    pub network: AngularHistogram,
}

impl AreaHistograms {
    pub fn new(name: impl Into<String>, demand: AngularHistogram, network: AngularHistogram) -> Self {
        AreaHistograms {
            name: name.into(),
            demand,
            network,
        }
    }

    /// Check the histograms against `spec`.
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        for (what, h) in [("demand", &self.demand), ("network", &self.network)] {
            if h.bin_count() != spec.bins {
                return Err(Error::SpecMismatch(format!(
                    "area '{}': {what} histogram has {} bins, model expects {}",
                    self.name,
                    h.bin_count(),
                    spec.bins
                )));
            }
            h.require_normalized(what)?;
        }
        if spec.network_point_symmetric {
            check_point_symmetric(&self.network)?;
        }
        Ok(())
    }

    /// Write the full feature row for heading `theta` into `row`.
    pub(crate) fn write_row(&self, theta: Angle, spec: &ModelSpec, centers: &[Angle], row: &mut [f64]) {
        let (demand, network) = row.split_at_mut(spec.demand_columns());
        let demand_orders: Vec<usize> = (1..=spec.harmonics).collect();
        fourier_sums(theta, &self.demand, centers, &demand_orders, demand);
        fourier_sums(theta, &self.network, centers, &spec.network_orders(), network);
    }

    /// Feature row for heading `theta`, in design-matrix column order.
    pub fn features(&self, theta: Angle, spec: &ModelSpec) -> Result<Vec<f64>> {
        self.validate(spec)?;
        let mut row = vec![0.0; spec.feature_count()];
        self.write_row(theta, spec, &bin_centers(spec.bins), &mut row);
        Ok(row)
    }
}

/// One trip entering the regression.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub pace: f64,
    pub direction: Angle,
    /// Index into the area list passed alongside.
    pub area: usize,
}

/// Row-major `N × m` feature matrix with its target vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    names: Vec<String>,
    target: Vec<f64>,
}

impl DesignMatrix {
    pub fn from_rows(data: Vec<f64>, rows: usize, cols: usize, names: Vec<String>, target: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols || target.len() != rows || names.len() != cols {
            return Err(Error::InvalidValue(format!(
                "design matrix shape mismatch: {} values, {rows}×{cols}, {} targets, {} names",
                data.len(),
                target.len(),
                names.len()
            )));
        }
        Ok(DesignMatrix {
            rows,
            cols,
            data,
            names,
            target,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV dump: one column per feature plus `pace`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{},pace", self.names.join(","))?;
        for i in 0..self.rows {
            for v in self.row(i) {
                write!(w, "{v},")?;
            }
            writeln!(w, "{}", self.target[i])?;
        }
        Ok(())
    }
}

/// Design matrix for a single area.
pub fn build_design_matrix(
    trips: &[(f64, Angle)],
    d: &AngularHistogram,
    n: &AngularHistogram,
    spec: &ModelSpec,
) -> Result<DesignMatrix> {
    let area = AreaHistograms::new("default", d.clone(), n.clone());
    let obs: Vec<Observation> = trips
        .iter()
        .map(|&(pace, direction)| Observation {
            pace,
            direction,
            area: 0,
        })
        .collect();
    build_pooled_design_matrix(&obs, std::slice::from_ref(&area), spec, Execution::default())
}

/// Design matrix over trips from several areas; each row uses its own
/// area's histograms. Rows are written by index, so the result does not
/// depend on `exec`.
pub fn build_pooled_design_matrix(
    observations: &[Observation],
    areas: &[AreaHistograms],
    spec: &ModelSpec,
    exec: Execution,
) -> Result<DesignMatrix> {
    spec.validate()?;
    for a in areas {
        a.validate(spec)?;
    }
    let params = spec.parameter_count();
    if observations.len() < params {
        return Err(Error::Underdetermined {
            rows: observations.len(),
            params,
        });
    }
    if let Some(bad) = observations.iter().find(|o| o.area >= areas.len()) {
        return Err(Error::InvalidValue(format!(
            "observation refers to area {} but only {} areas were given",
            bad.area,
            areas.len()
        )));
    }
    let cols = spec.feature_count();
    let centers = bin_centers(spec.bins);
    let mut data = vec![0.0; observations.len() * cols];
    exec.fill_rows(&mut data, cols, |i, row| {
        let o = &observations[i];
        areas[o.area].write_row(o.direction, spec, &centers, row);
    });
    let target = observations.iter().map(|o| o.pace).collect();
    DesignMatrix::from_rows(data, observations.len(), cols, spec.column_names(), target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, TAU};

    fn angle(x: f64) -> Angle {
        Angle::new(x).unwrap()
    }

    /// Independent evaluation through the circular mean resultant:
    /// Σ_j h_j cos k(c_j − θ) = cos kθ·Σ h_j cos kc_j + sin kθ·Σ h_j sin kc_j.
    fn harmonic_oracle(theta: f64, h: &[f64], k: usize) -> (f64, f64) {
        let b = h.len();
        let (mut ck, mut sk) = (0.0, 0.0);
        for (j, v) in h.iter().enumerate() {
            let c = (j as f64 + 0.5) * TAU / b as f64;
            ck += v * (k as f64 * c).cos();
            sk += v * (k as f64 * c).sin();
        }
        let kt = k as f64 * theta;
        (ck * kt.cos() + sk * kt.sin(), sk * kt.cos() - ck * kt.sin())
    }

    #[test]
    fn spec_counts() {
        let s = ModelSpec::default();
        assert_eq!(s.parameter_count(), 25);
        assert_eq!(s.network_columns(), 8);
        assert_eq!(&s.column_names()[16..18], &["b_c2".to_string(), "b_s2".to_string()]);
        let asym = ModelSpec::new(8, 32, false).unwrap();
        assert_eq!(asym.parameter_count(), 33);
        let odd = ModelSpec::new(7, 32, true).unwrap();
        assert_eq!(odd.network_columns(), 6);
        assert!(ModelSpec::new(0, 32, true).is_err());
        assert!(ModelSpec::new(4, 31, true).is_err());
        assert!(ModelSpec::new(4, 31, false).is_ok());
    }

    #[test]
    fn uniform_demand_vanishes() {
        let d = AngularHistogram::uniform(32).unwrap();
        for theta in [0.0, 0.3, 2.0, 5.9] {
            let f = demand_features(angle(theta), &d, 8).unwrap();
            assert_eq!(f.len(), 16);
            assert!(f.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn delta_at_own_bin() {
        let d = AngularHistogram::delta(5, 32).unwrap();
        let theta = crate::circular::bin_center(5, 32).unwrap();
        let f = demand_features(theta, &d, 2).unwrap();
        let expected = [1.0, 0.0, 1.0, 0.0];
        for (a, b) in f.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn two_point_mass() {
        let mut v = vec![0.0; 32];
        v[0] = 0.5;
        v[8] = 0.5;
        let d = AngularHistogram::from_values(v.clone(), false).unwrap();
        let theta = crate::circular::bin_center(0, 32).unwrap();
        let f = demand_features(theta, &d, 1).unwrap();
        // brute force over bins
        let mut c = 0.0;
        let mut s = 0.0;
        for (j, w) in v.iter().enumerate() {
            let phi = (j as f64 + 0.5) * TAU / 32.0 - theta.radians();
            c += w * phi.cos();
            s += w * phi.sin();
        }
        assert!((f[0] - 0.5).abs() < 1e-15 && (f[1] - 0.5).abs() < 1e-15);
        assert!((f[0] - c).abs() < 1e-15 && (f[1] - s).abs() < 1e-15);
    }

    #[test]
    fn unnormalized_histogram_rejected() {
        let h = AngularHistogram::from_values(vec![1.0, 2.0, 3.0, 4.0], false).unwrap();
        assert!(demand_features(Angle::ZERO, &h, 2).is_err());
    }

    #[test]
    fn symmetric_network_emits_even_orders() {
        let n = AngularHistogram::from_values(
            (0..32).map(|i| 1.0 + (i % 16) as f64).collect(),
            true,
        )
        .unwrap();
        let f = network_features(angle(0.7), &n, 8, true).unwrap();
        assert_eq!(f.len(), 8);
        let full = network_features(angle(0.7), &n, 8, false).unwrap();
        assert_eq!(full.len(), 16);
        for k in (1..=7).step_by(2) {
            assert!(full[2 * (k - 1)].abs() < 1e-12);
            assert!(full[2 * (k - 1) + 1].abs() < 1e-12);
        }
        assert!((full[2] - f[0]).abs() < 1e-15);
    }

    #[test]
    fn asymmetric_network_names_pair() {
        let mut v = vec![1.0; 32];
        v[3] = 5.0;
        let n = AngularHistogram::from_values(v, true).unwrap();
        match network_features(Angle::ZERO, &n, 8, true) {
            Err(Error::NotPointSymmetric { bin, opposite, .. }) => {
                assert_eq!((bin, opposite), (3, 19));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn design_shapes() {
        let d = AngularHistogram::from_values((0..32).map(|i| (i + 1) as f64).collect(), true).unwrap();
        let n = AngularHistogram::uniform(32).unwrap();
        let trips: Vec<(f64, Angle)> = (0..100).map(|i| (100.0 + i as f64, angle(i as f64 * 0.1))).collect();
        let x = build_design_matrix(&trips, &d, &n, &ModelSpec::default()).unwrap();
        assert_eq!((x.rows(), x.cols()), (100, 24));
        assert_eq!(x.target().len(), 100);

        let few = &trips[..24];
        assert!(matches!(
            build_design_matrix(few, &d, &n, &ModelSpec::default()),
            Err(Error::Underdetermined { rows: 24, params: 25 })
        ));
    }

    #[test]
    fn uniform_histograms_give_zero_design() {
        let u = AngularHistogram::uniform(32).unwrap();
        let trips: Vec<(f64, Angle)> = (0..40).map(|i| (1.0, angle(i as f64 * 0.37))).collect();
        let x = build_design_matrix(&trips, &u, &u, &ModelSpec::default()).unwrap();
        assert!(x.max_abs() < 1e-12);
    }

    #[test]
    fn identical_directions_identical_rows() {
        let d = AngularHistogram::from_values((0..32).map(|i| ((i * 7) % 5 + 1) as f64).collect(), true).unwrap();
        let n = AngularHistogram::uniform(32).unwrap();
        let mut trips: Vec<(f64, Angle)> = (0..30).map(|i| (1.0, angle(i as f64))).collect();
        trips[3].1 = angle(FRAC_PI_2);
        trips[9].1 = angle(FRAC_PI_2);
        let x = build_design_matrix(&trips, &d, &n, &ModelSpec::default()).unwrap();
        assert_eq!(x.row(3), x.row(9));
    }

    #[test]
    fn design_csv_header() {
        let spec = ModelSpec::new(2, 4, true).unwrap();
        let u = AngularHistogram::uniform(4).unwrap();
        let trips: Vec<(f64, Angle)> = (0..8).map(|i| (2.5, angle(i as f64))).collect();
        let x = build_design_matrix(&trips, &u, &u, &spec).unwrap();
        let mut buf = Vec::new();
        x.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("a_c1,a_s1,a_c2,a_s2,b_c2,b_s2,pace\n"));
        assert_eq!(text.lines().count(), 9);
    }

    fn arb_hist(bins: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, bins).prop_map(|mut v| {
            v[0] += 0.1;
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= s);
            v
        })
    }

    proptest! {
        #[test]
        fn literal_sums_match_harmonic_form(h in arb_hist(32), theta in 0.0f64..TAU) {
            let hist = AngularHistogram::from_values(h.clone(), true).unwrap();
            let f = demand_features(angle(theta), &hist, 8).unwrap();
            for k in 1..=8 {
                let (c, s) = harmonic_oracle(theta, hist.values(), k);
                prop_assert!((f[2 * k - 2] - c).abs() < 1e-12);
                prop_assert!((f[2 * k - 1] - s).abs() < 1e-12);
            }
        }

        #[test]
        fn joint_rotation_invariance(
            hd in arb_hist(32), hn in arb_hist(16), theta in 0.0f64..TAU, shift in -40isize..40,
        ) {
            let mut nv = hn.clone();
            nv.extend_from_slice(&hn);
            let d = AngularHistogram::from_values(hd, true).unwrap();
            let n = AngularHistogram::from_values(nv, true).unwrap();
            let spec = ModelSpec::default();
            let a = AreaHistograms::new("a", d.clone(), n.clone());
            let b = AreaHistograms::new("b", d.cyclic_shift(shift), n.cyclic_shift(shift));
            let r0 = a.features(angle(theta), &spec).unwrap();
            let rotated = angle(theta).rotate(shift as f64 * TAU / 32.0);
            let r1 = b.features(rotated, &spec).unwrap();
            for (x, y) in r0.iter().zip(&r1) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn bin_permutation_with_centers_is_order_independent(h in arb_hist(16), theta in 0.0f64..TAU) {
            // reversing the bin order and the centers together leaves the sum unchanged
            let hist = AngularHistogram::from_values(h.clone(), true).unwrap();
            let centers = bin_centers(16);
            let orders: Vec<usize> = (1..=4).collect();
            let mut fwd = vec![0.0; 8];
            fourier_sums(angle(theta), &hist, &centers, &orders, &mut fwd);
            let rev_hist = AngularHistogram::from_values(h.iter().rev().copied().collect(), true).unwrap();
            let rev_centers: Vec<Angle> = centers.iter().rev().copied().collect();
            let mut rev = vec![0.0; 8];
            fourier_sums(angle(theta), &rev_hist, &rev_centers, &orders, &mut rev);
            for (x, y) in fwd.iter().zip(&rev) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn delta_feature_is_cosine_of_offset(bin in 0usize..32, theta in 0.0f64..TAU, k in 1usize..=8) {
            let d = AngularHistogram::delta(bin, 32).unwrap();
            let f = demand_features(angle(theta), &d, 8).unwrap();
            let delta = crate::circular::bin_center(bin, 32).unwrap().radians() - theta;
            prop_assert!((f[2 * k - 2] - (k as f64 * delta).cos()).abs() < 1e-12);
        }

        #[test]
        fn sequential_parallel_design_identical(thetas in prop::collection::vec(0.0f64..TAU, 30..80)) {
            let d = AngularHistogram::from_values((0..32).map(|i| (i % 5 + 1) as f64).collect(), true).unwrap();
            let n = AngularHistogram::from_values((0..32).map(|i| (i % 16 + 1) as f64).collect(), true).unwrap();
            let areas = [AreaHistograms::new("x", d, n)];
            let obs: Vec<Observation> = thetas.iter().map(|t| Observation { pace: 1.0, direction: angle(*t), area: 0 }).collect();
            let spec = ModelSpec::default();
            let a = build_pooled_design_matrix(&obs, &areas, &spec, Execution::Sequential).unwrap();
            let b = build_pooled_design_matrix(&obs, &areas, &spec, Execution::Parallel).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
