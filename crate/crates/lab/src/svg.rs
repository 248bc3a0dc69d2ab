//! Deterministic SVG rendering.
//!
//! Every renderer takes CSV text (our own schema) and produces an SVG
//! string; rendering is a pure function of the CSV bytes, so re-rendering
//! an artifact always reproduces it byte for byte. Coordinates are emitted
//! with fixed precision and series colors come from a fixed palette.

use crate::report::parse_csv;
use crate::{Error, Result};
use std::fmt::Write as _;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];
const CONVERGE_COLOR: &str = "#ff7f0e";
const DIVERGE_COLOR: &str = "#1f77b4";

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (0.001..10_000.0).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        s
    } else {
        format!("{v:.1e}")
    }
}

fn svg_open(width: f64, height: f64, title: &str, desc: Option<&str>) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n<title>{}</title>\n",
        esc(title)
    );
    if let Some(d) = desc {
        let _ = writeln!(s, "<desc>{}</desc>", esc(d));
    }
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    pub desc: Option<String>,
}

/// Generic multi-series line chart; the workhorse behind the trajectory,
/// rate, harmonic and denominator plots.
pub fn render_line_chart(chart: &LineChart) -> Result<String> {
    let (width, height) = (680.0, 440.0);
    let (ml, mr, mt, mb) = (78.0, 20.0, 44.0, 56.0);
    let (pw, ph) = (width - ml - mr, height - mt - mb);

    let tx = |v: f64| -> Result<f64> {
        if chart.log_x {
            if v <= 0.0 {
                return Err(Error::InvalidParameter("log x-axis requires positive values".into()));
            }
            Ok(v.log10())
        } else {
            Ok(v)
        }
    };
    let ty = |v: f64| -> Result<f64> {
        if chart.log_y {
            if v <= 0.0 {
                return Err(Error::InvalidParameter("log y-axis requires positive values".into()));
            }
            Ok(v.log10())
        } else {
            Ok(v)
        }
    };

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in &chart.series {
        for &(x, y) in &s.points {
            xs.push(tx(x)?);
            ys.push(ty(y)?);
        }
    }
    if xs.is_empty() {
        return Err(Error::Malformed("nothing to plot".into()));
    }
    let (mut x0, mut x1) = min_max(&xs);
    let (mut y0, mut y1) = min_max(&ys);
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad_y = 0.05 * (y1 - y0);
    y0 -= pad_y;
    y1 += pad_y;

    let px = |v: f64| ml + (v - x0) / (x1 - x0) * pw;
    let py = |v: f64| mt + ph - (v - y0) / (y1 - y0) * ph;

    let mut s = svg_open(width, height, &chart.title, chart.desc.as_deref());
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>",
        ml + pw / 2.0,
        esc(&chart.title)
    );
    // frame
    let _ = writeln!(
        s,
        "<rect x=\"{ml:.2}\" y=\"{mt:.2}\" width=\"{pw:.2}\" height=\"{ph:.2}\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>"
    );

    // ticks: 5 linear divisions or decade marks on log axes
    let x_ticks = axis_ticks(x0, x1, chart.log_x);
    for &t in &x_ticks {
        let x = px(t);
        let label = if chart.log_x { fmt_tick(10f64.powf(t)) } else { fmt_tick(t) };
        let _ = writeln!(
            s,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#ccc\" stroke-width=\"0.5\"/>",
            mt,
            mt + ph
        );
        let _ = writeln!(
            s,
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
            mt + ph + 16.0,
            esc(&label)
        );
    }
    let y_ticks = axis_ticks(y0, y1, chart.log_y);
    for &t in &y_ticks {
        let y = py(t);
        let label = if chart.log_y { fmt_tick(10f64.powf(t)) } else { fmt_tick(t) };
        let _ = writeln!(
            s,
            "<line x1=\"{ml:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#ccc\" stroke-width=\"0.5\"/>",
            ml + pw
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>",
            ml - 6.0,
            y + 4.0,
            esc(&label)
        );
    }
    // axis labels
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        ml + pw / 2.0,
        height - 14.0,
        esc(&chart.x_label)
    );
    let _ = writeln!(
        s,
        "<text x=\"18\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">{}</text>",
        mt + ph / 2.0,
        mt + ph / 2.0,
        esc(&chart.y_label)
    );

    for (i, series) in chart.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        for &(x, y) in &series.points {
            let _ = write!(path, "{:.2},{:.2} ", px(tx(x)?), py(ty(y)?));
        }
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            path.trim_end()
        );
        // legend entry
        let ly = mt + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            ml + pw - 150.0,
            ml + pw - 126.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            ml + pw - 120.0,
            ly + 4.0,
            esc(&series.name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn min_max(vs: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in vs {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

fn axis_ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        let mut ticks = Vec::new();
        let mut d = lo.ceil();
        while d <= hi {
            ticks.push(d);
            d += 1.0;
        }
        if ticks.len() < 2 {
            ticks = vec![lo, hi];
        }
        ticks
    } else {
        (0..=4).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect()
    }
}

/// Convergence-region grid: one panel per optimizer, beta2 on the x axis
/// (grid order), P on the y axis; orange plus marks a converged cell, blue
/// circle a diverged one.
pub fn render_sweep_svg(csv: &str) -> Result<String> {
    let parsed = parse_csv(csv)?;
    let vi = parsed.column("variant")?;
    let pi = parsed.column("P")?;
    let bi = parsed.column("beta2")?;
    let wi = parsed.column("verdict")?;

    let mut variants: Vec<String> = parsed.rows.iter().map(|r| r[vi].clone()).collect();
    variants.dedup();
    variants.sort();
    variants.dedup();
    let mut p_values: Vec<u32> = Vec::new();
    let mut beta2s: Vec<f64> = Vec::new();
    for r in &parsed.rows {
        let p: u32 = r[pi].parse().map_err(|_| Error::Malformed("bad P".into()))?;
        let b = parsed.f64_cell(r, bi)?;
        if !p_values.contains(&p) {
            p_values.push(p);
        }
        if !beta2s.iter().any(|&x| (x - b).abs() < 1e-12) {
            beta2s.push(b);
        }
    }
    p_values.sort_unstable();
    beta2s.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let cell = 16.0;
    let (ml, mt) = (46.0, 46.0);
    let panel_w = ml + beta2s.len() as f64 * cell + 14.0;
    let panel_h = mt + p_values.len() as f64 * cell + 40.0;
    let width = panel_w * variants.len() as f64;
    let height = panel_h + 24.0;

    let mut s = svg_open(width, height, "convergence region", parsed.config_comment());
    for (k, variant) in variants.iter().enumerate() {
        let ox = k as f64 * panel_w;
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"22\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
            ox + ml + beta2s.len() as f64 * cell / 2.0,
            esc(variant)
        );
        // y labels (P, increasing upward)
        for (r, &p) in p_values.iter().enumerate() {
            let y = mt + (p_values.len() - 1 - r) as f64 * cell + cell / 2.0;
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{p}</text>",
                ox + ml - 5.0,
                y + 3.0
            );
        }
        // x labels: first, middle, last beta2
        for idx in [0, beta2s.len() / 2, beta2s.len() - 1] {
            let x = ox + ml + idx as f64 * cell + cell / 2.0;
            let _ = writeln!(
                s,
                "<text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"middle\">{}</text>",
                mt + p_values.len() as f64 * cell + 14.0,
                fmt_tick(beta2s[idx])
            );
        }
        for row in parsed.rows.iter().filter(|r| &r[vi] == variant) {
            let p: u32 = row[pi].parse().unwrap();
            let b = parsed.f64_cell(row, bi)?;
            let ri = p_values.iter().position(|&v| v == p).unwrap();
            let ci = beta2s
                .iter()
                .position(|&v| (v - b).abs() < 1e-12)
                .unwrap();
            let cx = ox + ml + ci as f64 * cell + cell / 2.0;
            let cy = mt + (p_values.len() - 1 - ri) as f64 * cell + cell / 2.0;
            if row[wi] == "converge" {
                let d = cell * 0.32;
                let _ = writeln!(
                    s,
                    "<path d=\"M {:.2} {cy:.2} H {:.2} M {cx:.2} {:.2} V {:.2}\" stroke=\"{CONVERGE_COLOR}\" stroke-width=\"1.6\"/>",
                    cx - d,
                    cx + d,
                    cy - d,
                    cy + d
                );
            } else {
                let _ = writeln!(
                    s,
                    "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{:.2}\" fill=\"none\" stroke=\"{DIVERGE_COLOR}\" stroke-width=\"1.4\"/>",
                    cell * 0.3
                );
            }
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">beta2</text>",
            ox + ml + beta2s.len() as f64 * cell / 2.0,
            mt + p_values.len() as f64 * cell + 30.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Trajectory plot: parameter value over steps plus the per-record step
/// magnitude on a second series.
pub fn render_trajectory_svg(csv: &str) -> Result<String> {
    let parsed = parse_csv(csv)?;
    let ti = parsed.column("t")?;
    let xi = parsed.column("x")?;
    let mut xs = Vec::new();
    for r in &parsed.rows {
        let t = parsed.f64_cell(r, ti)?;
        let x = parsed.f64_cell(r, xi)?;
        xs.push((t, x));
    }
    let mut steps = Vec::new();
    for w in xs.windows(2) {
        let dv = (w[1].1 - w[0].1).abs();
        steps.push((w[1].0, dv));
    }
    render_line_chart(&LineChart {
        title: "trajectory".into(),
        x_label: "step".into(),
        y_label: "value".into(),
        log_x: false,
        log_y: false,
        series: vec![
            Series {
                name: "x".into(),
                points: xs,
            },
            Series {
                name: "|dx|".into(),
                points: steps,
            },
        ],
        desc: parsed.config_comment().map(str::to_string),
    })
}

/// Running mean of the squared gradient norm on log-log axes.
pub fn render_rate_svg(csv: &str) -> Result<String> {
    let parsed = parse_csv(csv)?;
    let ti = parsed.column("T")?;
    let yi = parsed.column("mean_grad_sq")?;
    let mut pts = Vec::new();
    for r in &parsed.rows {
        pts.push((parsed.f64_cell(r, ti)?, parsed.f64_cell(r, yi)?));
    }
    render_line_chart(&LineChart {
        title: "running mean of squared gradient norm".into(),
        x_label: "T".into(),
        y_label: "mean ||grad||^2".into(),
        log_x: true,
        log_y: true,
        series: vec![Series {
            name: "mean_grad_sq".into(),
            points: pts,
        }],
        desc: parsed.config_comment().map(str::to_string),
    })
}

/// Mean second-momentum accumulator per step, one series per optimizer.
pub fn render_denom_svg(csv: &str) -> Result<String> {
    let parsed = parse_csv(csv)?;
    let si = parsed.column("step")?;
    let mi = parsed.column("mean_second")?;
    let vi = parsed.column("variant")?;
    let mut variants: Vec<String> = parsed.rows.iter().map(|r| r[vi].clone()).collect();
    variants.sort();
    variants.dedup();
    let mut series = Vec::new();
    for v in variants {
        let mut pts = Vec::new();
        for r in parsed.rows.iter().filter(|r| r[vi] == v) {
            pts.push((parsed.f64_cell(r, si)?, parsed.f64_cell(r, mi)?));
        }
        series.push(Series { name: v, points: pts });
    }
    render_line_chart(&LineChart {
        title: "mean second-momentum accumulator".into(),
        x_label: "step".into(),
        y_label: "mean accumulator".into(),
        log_x: false,
        log_y: false,
        series,
        desc: parsed.config_comment().map(str::to_string),
    })
}

/// Absolute error of the harmonic asymptotic vs N, one series per eta,
/// log-log.
pub fn render_harmonic_svg(csv: &str) -> Result<String> {
    let parsed = parse_csv(csv)?;
    let ni = parsed.column("N")?;
    let ei = parsed.column("eta")?;
    let ai = parsed.column("abs_err")?;
    let mut etas: Vec<String> = parsed.rows.iter().map(|r| r[ei].clone()).collect();
    etas.sort();
    etas.dedup();
    let mut series = Vec::new();
    for eta in etas {
        let mut pts = Vec::new();
        for r in parsed.rows.iter().filter(|r| r[ei] == eta) {
            // Clamp exact-zero errors to a representable floor for log axes.
            let err = parsed.f64_cell(r, ai)?.max(1e-18);
            pts.push((parsed.f64_cell(r, ni)?, err));
        }
        series.push(Series {
            name: format!("eta={eta}"),
            points: pts,
        });
    }
    render_line_chart(&LineChart {
        title: "harmonic sum: asymptotic absolute error".into(),
        x_label: "N".into(),
        y_label: "abs err".into(),
        log_x: true,
        log_y: true,
        series,
        desc: parsed.config_comment().map(str::to_string),
    })
}

/// Closed-form limits vs simulation, rendered as a text table.
pub fn render_limits_svg(csv: &str) -> Result<String> {
    let parsed = parse_csv(csv)?;
    let show = [
        "problem", "P", "beta1", "beta2", "m_limit", "s_limit", "m_sim", "s_sim", "m_abs_err",
        "s_abs_err",
    ];
    let cols: Vec<usize> = show
        .iter()
        .map(|c| parsed.column(c))
        .collect::<Result<_>>()?;
    let row_h = 20.0;
    let col_w = 90.0;
    let width = col_w * show.len() as f64 + 20.0;
    let height = row_h * (parsed.rows.len() as f64 + 2.0) + 30.0;
    let mut s = svg_open(width, height, "limit comparison", parsed.config_comment());
    for (j, name) in show.iter().enumerate() {
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"26\" font-family=\"monospace\" font-size=\"12\" font-weight=\"bold\">{}</text>",
            10.0 + j as f64 * col_w,
            esc(name)
        );
    }
    for (i, row) in parsed.rows.iter().enumerate() {
        for (j, &ci) in cols.iter().enumerate() {
            let raw = &row[ci];
            let text = raw
                .parse::<f64>()
                .map(|v| {
                    if v == v.trunc() && v.abs() < 1e6 {
                        fmt_tick(v)
                    } else {
                        format!("{v:.3e}")
                    }
                })
                .unwrap_or_else(|_| raw.clone());
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\">{}</text>",
                10.0 + j as f64 * col_w,
                26.0 + (i + 1) as f64 * row_h,
                esc(&text)
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::sweep_csv;
    use crate::sweep::{CellVerdict, Verdict};

    fn sample_csv() -> String {
        let cells = vec![
            CellVerdict {
                variant: crate::optim::Variant::AcProp,
                p: 3,
                beta2: 0.1,
                beta1: 0.9,
                best_lr: Some(0.1),
                tail_error: 0.0001,
                verdict: Verdict::Converge,
            },
            CellVerdict {
                variant: crate::optim::Variant::Adam,
                p: 3,
                beta2: 0.1,
                beta1: 0.9,
                best_lr: None,
                tail_error: 0.9,
                verdict: Verdict::Diverge,
            },
        ];
        sweep_csv(&cells, 42, "{\"grid\":true}")
    }

    #[test]
    fn sweep_rendering_is_byte_stable() {
        let csv = sample_csv();
        let a = render_sweep_svg(&csv).unwrap();
        let b = render_sweep_svg(&csv).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.contains("acprop"));
        assert!(a.contains("<desc>"));
    }

    #[test]
    fn line_chart_log_axis_rejects_nonpositive() {
        let chart = LineChart {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: true,
            log_y: false,
            series: vec![Series {
                name: "s".into(),
                points: vec![(0.0, 1.0)],
            }],
            desc: None,
        };
        assert!(render_line_chart(&chart).is_err());
    }

    #[test]
    fn line_chart_renders_two_series() {
        let chart = LineChart {
            title: "demo".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: false,
            log_y: false,
            series: vec![
                Series {
                    name: "a".into(),
                    points: vec![(0.0, 1.0), (1.0, 2.0)],
                },
                Series {
                    name: "b".into(),
                    points: vec![(0.0, 2.0), (1.0, 1.0)],
                },
            ],
            desc: None,
        };
        let svg = render_line_chart(&chart).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}
