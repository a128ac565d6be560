//! Deterministic file output: CSV with 12 significant digits, LF line
//! endings, plus small SVG renderings of curves and 2-D frontiers. Golden
//! tests rely on the byte stability of everything here.

use crate::eta_solver::EtaCurve;
use crate::exponent_regions::RegionFrontier;
use crate::{Error, Result};

/// Format with 12 significant digits, plain decimal notation where
/// reasonable, `.` separator.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-5..12).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(&s)
    } else {
        format!("{x:.11e}")
    }
}

fn trim_zeros(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let t = s.trim_end_matches('0');
    t.trim_end_matches('.').to_string()
}

pub fn curve_to_csv(curve: &EtaCurve) -> String {
    let mut out = String::from("R,eta\n");
    for (r, v) in &curve.samples {
        out.push_str(&format!("{},{}\n", fmt_sig(*r), fmt_sig(*v)));
    }
    out
}

pub fn parse_curve_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "R,eta" {
                return Err(Error::InvalidArgument(format!("bad curve header `{line}`")));
            }
            continue;
        }
        let mut cols = line.split(',');
        let r: f64 = cols
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| Error::InvalidArgument(format!("bad row {i}")))?;
        let v: f64 = cols
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| Error::InvalidArgument(format!("bad row {i}")))?;
        rows.push((r, v));
    }
    Ok(rows)
}

pub fn frontier_to_csv(frontier: &RegionFrontier) -> String {
    let header: Vec<String> = (1..=frontier.k).map(|i| format!("theta_{i}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for p in &frontier.points {
        let row: Vec<String> = p.thetas.iter().map(|t| fmt_sig(*t)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_frontier_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if !line.starts_with("theta_1") {
                return Err(Error::InvalidArgument(format!(
                    "bad frontier header `{line}`"
                )));
            }
            continue;
        }
        let row = line
            .split(',')
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad value in row {i}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Per-point parametrization sidecar, pretty JSON.
pub fn frontier_sidecar_json(frontier: &RegionFrontier) -> String {
    serde_json::to_string_pretty(frontier).expect("frontier serializes")
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 56.0;

fn svg_header() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    )
}

fn axes(x_label: &str, y_label: &str, xmax: f64, ymax: f64) -> String {
    let x0 = MARGIN;
    let y0 = H - MARGIN;
    let mut s = String::new();
    s.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{}\" y2=\"{y0}\" stroke=\"black\"/>\n",
        W - MARGIN / 2.0
    ));
    s.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{}\" stroke=\"black\"/>\n",
        MARGIN / 2.0
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"14\">{x_label}</text>\n",
        W - MARGIN,
        y0 + 32.0
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"14\">{y_label}</text>\n",
        x0 - 40.0,
        MARGIN / 2.0 + 10.0
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n",
        W - MARGIN,
        y0 + 16.0,
        fmt_sig_short(xmax)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n",
        x0 - 44.0,
        MARGIN / 2.0 + 24.0,
        fmt_sig_short(ymax)
    ));
    s
}

fn fmt_sig_short(x: f64) -> String {
    format!("{x:.4}")
}

fn to_px(x: f64, y: f64, xmax: f64, ymax: f64) -> (f64, f64) {
    let px = MARGIN + (W - 1.5 * MARGIN) * (x / xmax.max(1e-12));
    let py = (H - MARGIN) - (H - 1.5 * MARGIN) * (y / ymax.max(1e-12));
    (px, py)
}

pub fn curve_to_svg(curve: &EtaCurve) -> String {
    let xmax = curve.samples.last().map(|p| p.0).unwrap_or(1.0).max(1e-9);
    let ymax = curve.saturation_value.max(1e-9) * 1.05;
    let mut s = svg_header();
    s.push_str(&axes("R", "\u{03b7}", xmax, ymax));
    let pts: Vec<String> = curve
        .samples
        .iter()
        .map(|&(x, y)| {
            let (px, py) = to_px(x, y, xmax, ymax);
            format!("{px:.2},{py:.2}")
        })
        .collect();
    s.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"teal\" stroke-width=\"2\"/>\n",
        pts.join(" ")
    ));
    s.push_str("</svg>\n");
    s
}

/// 2-D frontier plot; for K > 2 the (theta_1, theta_2) projection is drawn.
pub fn frontier_to_svg(frontier: &RegionFrontier) -> String {
    let xmax = frontier
        .points
        .iter()
        .map(|p| p.thetas[0])
        .fold(1e-9, f64::max)
        * 1.1
        + 1e-9;
    let ymax = frontier
        .points
        .iter()
        .map(|p| *p.thetas.get(1).unwrap_or(&0.0))
        .fold(1e-9, f64::max)
        * 1.05;
    let mut s = svg_header();
    s.push_str(&axes("\u{03b8}\u{2081}", "\u{03b8}\u{2082}", xmax, ymax));
    let pts: Vec<String> = frontier
        .points
        .iter()
        .map(|p| {
            let (px, py) = to_px(p.thetas[0], *p.thetas.get(1).unwrap_or(&0.0), xmax, ymax);
            format!("{px:.2},{py:.2}")
        })
        .collect();
    s.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"teal\" stroke-width=\"2\"/>\n",
        pts.join(" ")
    ));
    s.push_str("</svg>\n");
    s
}
