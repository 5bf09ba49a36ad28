//! Self-contained SVG rendering of rose diagrams and influence curves.
//!
//! Wedge radii scale with the square root of the bin value, so wedge area
//! is proportional to frequency. Coordinates are printed with three
//! decimals, which keeps the output byte-stable across runs.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::circular::{bin_width, AngularHistogram};
use crate::ingest::BearingConvention;
use crate::model::InfluenceCurve;

const SIZE: f64 = 400.0;
const MARGIN: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Screen position of the point at `angle` and `radius` around the center.
fn polar(angle: f64, radius: f64, convention: BearingConvention) -> (f64, f64) {
    let c = SIZE / 2.0;
    match convention {
        BearingConvention::Math => (c + radius * angle.cos(), c - radius * angle.sin()),
        BearingConvention::Compass => (c + radius * angle.sin(), c - radius * angle.cos()),
    }
}

fn header(out: &mut String, title: &str, desc: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(out, "<desc>{}</desc>", escape(desc));
    let _ = writeln!(out, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
}

/// Rose diagram of `hist`. Bin `i` spans `[i·w, (i+1)·w)` in the given
/// bearing convention; the convention is recorded in the title.
pub fn rose_svg(hist: &AngularHistogram, title: &str, convention: BearingConvention) -> String {
    let bins = hist.bin_count();
    let w = bin_width(bins);
    let r_max = SIZE / 2.0 - MARGIN;
    let v_max = hist.values().iter().copied().fold(0.0, f64::max);
    let mut out = String::new();
    header(
        &mut out,
        &format!("{title} ({})", convention.describe()),
        &format!("{bins} bins; wedge area proportional to bin value; max value {v_max}"),
    );
    for frac in [0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            out,
            r##"<circle cx="{c:.3}" cy="{c:.3}" r="{r:.3}" fill="none" stroke="#cccccc"/>"##,
            c = SIZE / 2.0,
            r = r_max * f64::sqrt(frac)
        );
    }
    for (i, &v) in hist.values().iter().enumerate() {
        if !(v > 0.0) || !(v_max > 0.0) {
            continue;
        }
        let r = r_max * (v / v_max).sqrt();
        let (a0, a1) = (i as f64 * w, (i + 1) as f64 * w);
        let (x0, y0) = polar(a0, r, convention);
        let (x1, y1) = polar(a1, r, convention);
        let c = SIZE / 2.0;
        // math angles run counterclockwise on screen, compass clockwise
        let sweep = match convention {
            BearingConvention::Math => 0,
            BearingConvention::Compass => 1,
        };
        let _ = writeln!(
            out,
            r##"<path d="M {c:.3} {c:.3} L {x0:.3} {y0:.3} A {r:.3} {r:.3} 0 0 {sweep} {x1:.3} {y1:.3} Z" fill="#4477aa" fill-opacity="0.7" stroke="#223355"><title>bin {i}: {v}</title></path>"##
        );
    }
    let (lx, ly) = polar(0.0, r_max + 15.0, convention);
    let label = match convention {
        BearingConvention::Math => "0 (E)",
        BearingConvention::Compass => "0 (N)",
    };
    let _ = writeln!(
        out,
        r#"<text x="{lx:.3}" y="{ly:.3}" font-size="12" text-anchor="middle">{label}</text>"#
    );
    out.push_str("</svg>\n");
    out
}

/// Line plot of a reconstructed curve over its `[−π, π)` grid.
pub fn curve_svg(curve: &InfluenceCurve, title: &str) -> String {
    let (lo, hi) = curve
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0) };
    let span = SIZE - 2.0 * MARGIN;
    let x = |g: f64| MARGIN + (g + PI) / (2.0 * PI) * span;
    let y = |v: f64| SIZE - MARGIN - (v - lo) / (hi - lo) * span;
    let mut out = String::new();
    let filtered = if curve.significance_filtered { "significant terms only" } else { "all terms" };
    header(
        &mut out,
        title,
        &format!("offset in radians on [-pi, pi); value range [{lo}, {hi}]; {filtered}"),
    );
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{span}" height="{span}" fill="none" stroke="#888888"/>"##
    );
    if lo < 0.0 && hi > 0.0 {
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN}" y1="{y0:.3}" x2="{x1}" y2="{y0:.3}" stroke="#bbbbbb" stroke-dasharray="4 3"/>"##,
            y0 = y(0.0),
            x1 = SIZE - MARGIN
        );
    }
    let points: Vec<String> = curve
        .grid
        .iter()
        .zip(&curve.values)
        .map(|(g, v)| format!("{:.3},{:.3}", x(*g), y(*v)))
        .collect();
    let _ = writeln!(
        out,
        r##"<polyline points="{}" fill="none" stroke="#aa3377" stroke-width="1.5"/>"##,
        points.join(" ")
    );
    for (text, tx) in [("-pi", x(-PI)), ("0", x(0.0)), ("pi", x(PI))] {
        let _ = writeln!(
            out,
            r#"<text x="{tx:.3}" y="{ty:.3}" font-size="12" text-anchor="middle">{text}</text>"#,
            ty = SIZE - MARGIN + 16.0
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{reconstruct_curve, CurveKind};

    #[test]
    fn rose_has_one_wedge_per_nonzero_bin() {
        let h = AngularHistogram::from_values(vec![1.0, 0.0, 3.0, 0.0, 2.0, 0.0, 0.0, 2.0], true).unwrap();
        let svg = rose_svg(&h, "demand", BearingConvention::Math);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<path").count(), 4);
        assert!(svg.contains("counterclockwise"));
        assert!(!svg.contains("href"));
    }

    #[test]
    fn wedge_area_tracks_value() {
        // radius ratio is sqrt of the value ratio
        let h = AngularHistogram::from_values(vec![4.0, 1.0, 0.0, 0.0], false).unwrap();
        let svg = rose_svg(&h, "t", BearingConvention::Math);
        let radii: Vec<f64> = svg
            .lines()
            .filter(|l| l.starts_with("<path"))
            .map(|l| {
                let a = l.split(" A ").nth(1).unwrap();
                a.split(' ').next().unwrap().parse().unwrap()
            })
            .collect();
        assert_eq!(radii.len(), 2);
        assert!((radii[0] / radii[1] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn compass_title_and_escaping() {
        let h = AngularHistogram::uniform(4).unwrap();
        let svg = rose_svg(&h, "a<b", BearingConvention::Compass);
        assert!(svg.contains("a&lt;b"));
        assert!(svg.contains("north, clockwise"));
    }

    #[test]
    fn curve_plot_is_deterministic() {
        let names = vec!["a_c1".to_string(), "a_s1".to_string()];
        let c = reconstruct_curve(&names, &[2.0, -1.0], &[true, true], CurveKind::Alpha, 64).unwrap();
        let a = curve_svg(&c, "alpha");
        assert_eq!(a, curve_svg(&c, "alpha"));
        assert!(a.contains("<polyline"));
        let flat = reconstruct_curve(&names, &[0.0, 0.0], &[true, true], CurveKind::Alpha, 64).unwrap();
        assert!(!curve_svg(&flat, "flat").contains("NaN"));
    }
}
