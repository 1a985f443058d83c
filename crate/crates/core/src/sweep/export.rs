use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CellResult, MeanShiftSurface, SweepGrid, SweepSurface};
use crate::sampler::format_17;
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 9] = ["axis1", "axis2", "h2", "h2_se", "kl", "kl_se", "log_mlr", "ess_ratio", "warnings"];
const MEAN_HEADER: [&str; 6] = ["axis1", "axis2", "shift", "shift_se", "ess_ratio", "warnings"];

/// KL colours are clipped at this quantile of the finite cell values.
pub const KL_CLIP_QUANTILE: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    H2,
    Kl,
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h2" => Ok(Channel::H2),
            "kl" => Ok(Channel::Kl),
            other => Err(Error::invalid(format!("unknown channel {other:?}; expected h2 or kl"))),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_17).unwrap_or_default()
}

fn axis_fields(grid: &SweepGrid, c: usize) -> [String; 2] {
    let (a, b) = grid.values_at(c);
    [format_17(a), opt(b)]
}

fn write_rows<T>(
    header: &[&str],
    grid: &SweepGrid,
    cells: &[CellResult<T>],
    row: impl Fn(&T) -> Vec<String>,
    blanks: usize,
) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for (c, cell) in cells.iter().enumerate() {
        let mut rec: Vec<String> = axis_fields(grid, c).into();
        match cell {
            Ok(r) => rec.extend(row(r)),
            Err(e) => {
                rec.extend(std::iter::repeat(String::new()).take(blanks));
                rec.push(format!("error: {e}"));
            }
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// One row per cell in grid order, columns as in [`CSV_HEADER`]. Numbers
/// carry 17 significant digits; missing standard errors and the second axis
/// of a one-axis grid are empty; warnings are joined by `"; "`.
pub fn surface_to_csv(surface: &SweepSurface) -> String {
    write_rows(
        &CSV_HEADER,
        &surface.grid,
        &surface.cells,
        |r| {
            vec![
                format_17(r.h2),
                opt(r.h2_se),
                format_17(r.kl),
                opt(r.kl_se),
                format_17(r.log_mlr),
                format_17(r.ess_ratio),
                r.warnings.join("; "),
            ]
        },
        6,
    )
}

pub fn mean_shift_to_csv(surface: &MeanShiftSurface) -> String {
    write_rows(
        &MEAN_HEADER,
        &surface.grid,
        &surface.cells,
        |m| vec![format_17(m.shift), opt(m.se), format_17(m.ess_ratio), m.warnings.join("; ")],
        3,
    )
}

/// Heatmap of one channel. Needs a two-axis surface.
pub fn surface_to_svg(surface: &SweepSurface, channel: Channel) -> Result<String> {
    let values: Vec<Option<f64>> = surface
        .cells
        .iter()
        .map(|c| {
            c.as_ref().ok().map(|r| match channel {
                Channel::H2 => r.h2,
                Channel::Kl => r.kl,
            })
        })
        .collect();
    let (name, clip) = match channel {
        Channel::H2 => ("H-sensitivity", None),
        Channel::Kl => ("KL-sensitivity", Some(KL_CLIP_QUANTILE)),
    };
    let title = format!("{name} ({})", surface.estimator);
    render_heatmap(&surface.grid, &values, surface.base_marker, &title, clip)
}

pub fn mean_shift_to_svg(surface: &MeanShiftSurface) -> Result<String> {
    let values: Vec<Option<f64>> = surface.cells.iter().map(|c| c.as_ref().ok().map(|m| m.shift)).collect();
    let title = format!("posterior mean shift of {}", surface.column);
    render_heatmap(&surface.grid, &values, surface.base_marker, &title, None)
}

const VIRIDIS: [(f64, f64, f64); 9] = [
    (68.0, 1.0, 84.0),
    (71.0, 44.0, 122.0),
    (59.0, 81.0, 139.0),
    (44.0, 113.0, 142.0),
    (33.0, 144.0, 141.0),
    (39.0, 173.0, 129.0),
    (92.0, 200.0, 99.0),
    (170.0, 220.0, 50.0),
    (253.0, 231.0, 37.0),
];

fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 1.0 };
    let x = t * (VIRIDIS.len() - 1) as f64;
    let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let f = x - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn label(v: f64) -> String {
    let s = format!("{v}");
    if s.len() <= 7 {
        s
    } else {
        format!("{v:.3e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_step(n: usize) -> usize {
    n.div_ceil(8).max(1)
}

const LEFT: f64 = 80.0;
const TOP: f64 = 40.0;
const PLOT: f64 = 400.0;
const BAR_X: f64 = LEFT + PLOT + 30.0;
const BAR_W: f64 = 18.0;

fn render_heatmap(
    grid: &SweepGrid,
    values: &[Option<f64>],
    marker: Option<(usize, usize)>,
    title: &str,
    clip: Option<f64>,
) -> Result<String> {
    if grid.axes().len() != 2 {
        return Err(Error::invalid("heatmaps need a two-axis sweep; export one-axis sweeps as CSV"));
    }
    let (n1, n2) = grid.shape();
    let mut finite: Vec<f64> = values.iter().flatten().copied().filter(|v| v.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let (lo, hi) = match (finite.first(), finite.last()) {
        (Some(&lo), Some(&hi)) => (lo, clip.map_or(hi, |q| quantile(&finite, q))),
        _ => (0.0, 0.0),
    };
    let scale = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
    let (cw, ch) = (PLOT / n1 as f64, PLOT / n2 as f64);
    let width = BAR_X + BAR_W + 90.0;
    let height = TOP + PLOT + 70.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    s.push_str(concat!(
        r#"<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)">"#,
        r##"<rect width="6" height="6" fill="#dddddd"/><line x1="0" y1="0" x2="0" y2="6" stroke="#777777" stroke-width="2"/>"##,
        "</pattern></defs>\n"
    ));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#, LEFT + PLOT / 2.0, TOP - 15.0, escape(title));

    let _ = writeln!(s, r#"<g class="cells">"#);
    for (c, v) in values.iter().enumerate() {
        let (i, j) = grid.coords(c);
        let x = LEFT + i as f64 * cw;
        let y = TOP + PLOT - (j + 1) as f64 * ch;
        let fill = match v {
            Some(v) => ramp(scale(*v)),
            None => "url(#hatch)".to_string(),
        };
        let _ = writeln!(s, r#"<rect x="{x:.3}" y="{y:.3}" width="{cw:.3}" height="{ch:.3}" fill="{fill}"/>"#);
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{PLOT}" height="{PLOT}" fill="none" stroke="black"/>"#);

    if let Some((i, j)) = marker {
        let cx = LEFT + (i as f64 + 0.5) * cw;
        let cy = TOP + PLOT - (j as f64 + 0.5) * ch;
        let r = 0.4 * cw.min(ch).min(20.0);
        let _ = writeln!(
            s,
            r#"<g class="base-marker" stroke="white" stroke-width="2"><line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/><line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/></g>"#,
            cx - r, cy - r, cx + r, cy + r, cx - r, cy + r, cx + r, cy - r
        );
    }

    let axes = grid.axes();
    let _ = writeln!(s, r#"<g class="ticks">"#);
    for i in (0..n1).step_by(tick_step(n1)) {
        let x = LEFT + (i as f64 + 0.5) * cw;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.3}" y1="{}" x2="{x:.3}" y2="{}" stroke="black"/><text x="{x:.3}" y="{}" text-anchor="middle">{}</text>"#,
            TOP + PLOT,
            TOP + PLOT + 5.0,
            TOP + PLOT + 18.0,
            label(axes[0].values[i])
        );
    }
    for j in (0..n2).step_by(tick_step(n2)) {
        let y = TOP + PLOT - (j as f64 + 0.5) * ch;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.3}" x2="{LEFT}" y2="{y:.3}" stroke="black"/><text x="{}" y="{:.3}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            label(axes[1].values[j])
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + PLOT / 2.0,
        TOP + PLOT + 40.0,
        escape(&axes[0].label())
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        TOP + PLOT / 2.0,
        escape(&axes[1].label())
    );

    let steps = 32;
    let _ = writeln!(s, r#"<g class="colorbar">"#);
    for k in 0..steps {
        let h = PLOT / steps as f64;
        let y = TOP + PLOT - (k + 1) as f64 * h;
        let t = (k as f64 + 0.5) / steps as f64;
        let _ = writeln!(s, r#"<rect x="{BAR_X}" y="{y:.3}" width="{BAR_W}" height="{h:.3}" fill="{}"/>"#, ramp(t));
    }
    let clipped = if clip.is_some() && finite.last().is_some_and(|&m| m > hi) { " (clipped)" } else { "" };
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}">{}{clipped}</text><text x="{}" y="{}">{}</text>"#,
        BAR_X + BAR_W + 4.0,
        TOP + 10.0,
        label(hi),
        BAR_X + BAR_W + 4.0,
        TOP + PLOT,
        label(lo)
    );
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}
