//! Chart emission: self-contained SVG files with the underlying data as a
//! CSV sibling, so anything downstream can re-render. Output is a pure
//! function of the input — byte-identical across runs.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// One named line on a chart; x is the 1-based index (episode number).
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
}

/// One bar with a deviation whisker.
#[derive(Debug, Clone)]
pub struct Bar {
    pub label: String,
    pub value: f64,
    pub std: f64,
}

const PANEL_W: f64 = 840.0;
const PANEL_H: f64 = 420.0;
const M_LEFT: f64 = 72.0;
const M_RIGHT: f64 = 200.0;
const M_TOP: f64 = 48.0;
const M_BOTTOM: f64 = 58.0;

const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#ad494a",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

/// Tick positions at a 1/2/5 × 10^k step covering [lo, hi], with the number
/// of decimals needed to print them exactly.
fn nice_ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    debug_assert!(hi > lo);
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = mag
        * if norm <= 1.0 {
            1.0
        } else if norm <= 2.0 {
            2.0
        } else if norm <= 5.0 {
            5.0
        } else {
            10.0
        };
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10().floor()) as usize
    };
    let mut ticks = Vec::new();
    let mut t = (lo / step).ceil() * step;
    while t <= hi + step * 1e-9 {
        ticks.push(if t == 0.0 { 0.0 } else { t });
        t += step;
    }
    (ticks, decimals)
}

/// Pixel mapping for one panel's plot area.
struct Frame {
    y0: f64, // panel's vertical offset in the page
    lo_x: f64,
    hi_x: f64,
    lo_y: f64,
    hi_y: f64,
}

impl Frame {
    fn px_x(&self, x: f64) -> f64 {
        M_LEFT + (x - self.lo_x) / (self.hi_x - self.lo_x) * (PANEL_W - M_LEFT - M_RIGHT)
    }

    fn px_y(&self, y: f64) -> f64 {
        self.y0 + PANEL_H - M_BOTTOM
            - (y - self.lo_y) / (self.hi_y - self.lo_y) * (PANEL_H - M_TOP - M_BOTTOM)
    }
}

fn pad_range(lo: f64, hi: f64) -> (f64, f64) {
    if lo == hi {
        let pad = lo.abs().max(1.0) * 0.1;
        (lo - pad, hi + pad)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

fn axes_and_grid(out: &mut String, f: &Frame, title: &str, x_label: &str, y_label: &str) {
    let left = M_LEFT;
    let right = PANEL_W - M_RIGHT;
    let top = f.y0 + M_TOP;
    let bottom = f.y0 + PANEL_H - M_BOTTOM;
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="15" font-weight="bold">{}</text>"#,
        px((left + right) / 2.0),
        px(f.y0 + 24.0),
        esc(title)
    );
    let (yticks, ydec) = nice_ticks(f.lo_y, f.hi_y);
    for t in &yticks {
        let y = px(f.px_y(*t));
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#dddddd"/>"##,
            px(left),
            px(right)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" font-size="11">{t:.ydec$}</text>"#,
            px(left - 7.0),
            px(f.px_y(*t) + 4.0),
        );
    }
    let _ = writeln!(
        out,
        r#"<line x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="black"/><line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#,
        l = px(left),
        r = px(right),
        t = px(top),
        b = px(bottom)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
        px((left + right) / 2.0),
        px(f.y0 + PANEL_H - 14.0),
        esc(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{x}" y="{y}" text-anchor="middle" font-size="12" transform="rotate(-90 {x} {y})">{l}</text>"#,
        x = px(left - 48.0),
        y = px((top + bottom) / 2.0),
        l = esc(y_label)
    );
}

fn line_panel(out: &mut String, y0: f64, title: &str, x_label: &str, y_label: &str, series: &[Series]) {
    let mut lo_y = f64::INFINITY;
    let mut hi_y = f64::NEG_INFINITY;
    let mut max_len = 0usize;
    for s in series {
        max_len = max_len.max(s.values.len());
        for v in &s.values {
            lo_y = lo_y.min(*v);
            hi_y = hi_y.max(*v);
        }
    }
    if max_len == 0 {
        note_panel(out, y0, title, "no data points");
        return;
    }
    let (lo_y, hi_y) = pad_range(lo_y, hi_y);
    let (lo_x, hi_x) = if max_len == 1 { (0.5, 1.5) } else { (1.0, max_len as f64) };
    let f = Frame { y0, lo_x, hi_x, lo_y, hi_y };
    axes_and_grid(out, &f, title, x_label, y_label);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if s.values.len() == 1 {
            let _ = writeln!(
                out,
                r#"<circle cx="{}" cy="{}" r="3" fill="{color}"/>"#,
                px(f.px_x(1.0)),
                px(f.px_y(s.values[0]))
            );
        } else {
            let pts: Vec<String> = s
                .values
                .iter()
                .enumerate()
                .map(|(k, v)| format!("{},{}", px(f.px_x((k + 1) as f64)), px(f.px_y(*v))))
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = y0 + M_TOP + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{x1}" y1="{y}" x2="{x2}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{tx}" y="{ty}" font-size="11">{label}</text>"#,
            x1 = px(PANEL_W - M_RIGHT + 12.0),
            x2 = px(PANEL_W - M_RIGHT + 34.0),
            y = px(ly + 4.0),
            tx = px(PANEL_W - M_RIGHT + 40.0),
            ty = px(ly + 8.0),
            label = esc(&s.label)
        );
    }
}

fn bar_panel(out: &mut String, y0: f64, title: &str, y_label: &str, bars: &[Bar]) {
    if bars.is_empty() {
        note_panel(out, y0, title, "no data points");
        return;
    }
    let mut lo_y = 0.0f64;
    let mut hi_y = f64::NEG_INFINITY;
    for b in bars {
        lo_y = lo_y.min(b.value - b.std);
        hi_y = hi_y.max(b.value + b.std).max(b.value);
    }
    let (lo_y, hi_y) = pad_range(lo_y.min(0.0), hi_y.max(0.0));
    let f = Frame { y0, lo_x: 0.0, hi_x: 1.0, lo_y, hi_y };
    axes_and_grid(out, &f, title, "", y_label);
    let span = PANEL_W - M_LEFT - M_RIGHT;
    let n = bars.len() as f64;
    let bw = (span / n * 0.6).min(60.0);
    let base = f.px_y(0.0);
    for (i, b) in bars.iter().enumerate() {
        let cx = M_LEFT + span * (i as f64 + 0.5) / n;
        let top = f.px_y(b.value);
        let (ry, rh) = if top <= base { (top, base - top) } else { (base, top - base) };
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
            px(cx - bw / 2.0),
            px(ry),
            px(bw),
            px(rh),
            PALETTE[i % PALETTE.len()]
        );
        if b.std > 0.0 {
            let wy1 = f.px_y(b.value - b.std);
            let wy2 = f.px_y(b.value + b.std);
            let _ = writeln!(
                out,
                r#"<line x1="{x}" y1="{y1}" x2="{x}" y2="{y2}" stroke="black"/><line x1="{c1}" y1="{y1}" x2="{c2}" y2="{y1}" stroke="black"/><line x1="{c1}" y1="{y2}" x2="{c2}" y2="{y2}" stroke="black"/>"#,
                x = px(cx),
                y1 = px(wy1),
                y2 = px(wy2),
                c1 = px(cx - 5.0),
                c2 = px(cx + 5.0)
            );
        }
        let lx = px(cx);
        let ly = px(y0 + PANEL_H - M_BOTTOM + 14.0);
        if bars.len() > 6 {
            let _ = writeln!(
                out,
                r#"<text x="{lx}" y="{ly}" text-anchor="end" font-size="10" transform="rotate(-30 {lx} {ly})">{}</text>"#,
                esc(&b.label)
            );
        } else {
            let _ = writeln!(
                out,
                r#"<text x="{lx}" y="{ly}" text-anchor="middle" font-size="11">{}</text>"#,
                esc(&b.label)
            );
        }
    }
}

fn note_panel(out: &mut String, y0: f64, title: &str, note: &str) {
    let _ = writeln!(
        out,
        r##"<text x="{x}" y="{ty}" text-anchor="middle" font-size="15" font-weight="bold">{t}</text><text x="{x}" y="{ny}" text-anchor="middle" font-size="13" fill="#666666">{n}</text>"##,
        x = px(PANEL_W / 2.0),
        ty = px(y0 + 24.0),
        ny = px(y0 + PANEL_H / 2.0),
        t = esc(title),
        n = esc(note)
    );
}

fn svg_document(panels: usize, body: &str) -> String {
    let h = PANEL_H * panels.max(1) as f64;
    format!(
        concat!(
            r#"<?xml version="1.0" encoding="UTF-8"?>"#,
            "\n",
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
            "\n",
            r#"<rect width="{w}" height="{h}" fill="white"/>"#,
            "\n{body}</svg>\n"
        ),
        w = PANEL_W,
        h = h,
        body = body
    )
}

/// Stacked line-chart panels (one per titled group of series).
pub fn line_chart_svg(panels: &[(String, Vec<Series>)], x_label: &str, y_label: &str) -> String {
    let mut body = String::new();
    if panels.is_empty() {
        note_panel(&mut body, 0.0, "reward curve", "no episodes logged");
        return svg_document(1, &body);
    }
    for (i, (title, series)) in panels.iter().enumerate() {
        line_panel(&mut body, PANEL_H * i as f64, title, x_label, y_label, series);
    }
    svg_document(panels.len(), &body)
}

/// A single bar-chart panel.
pub fn bar_chart_svg(title: &str, y_label: &str, bars: &[Bar]) -> String {
    let mut body = String::new();
    bar_panel(&mut body, 0.0, title, y_label, bars);
    svg_document(1, &body)
}

/// A titled placeholder explaining why a chart has no content.
pub fn note_svg(title: &str, note: &str) -> String {
    let mut body = String::new();
    note_panel(&mut body, 0.0, title, note);
    svg_document(1, &body)
}

fn write(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// `reward_curve.svg` + `reward_curve.csv` (long format: one row per point).
pub fn write_reward_curves(dir: &Path, panels: &[(String, Vec<Series>)]) -> Result<()> {
    write(
        &dir.join("reward_curve.svg"),
        &line_chart_svg(panels, "episode", "reward (moving average)"),
    )?;
    let mut csv = String::from("panel,series,episode,reward\n");
    for (title, series) in panels {
        for s in series {
            for (i, v) in s.values.iter().enumerate() {
                let _ = writeln!(csv, "{},{},{},{}", title, s.label, i + 1, v);
            }
        }
    }
    write(&dir.join("reward_curve.csv"), &csv)
}

/// `time_bars.svg` + `time_bars.csv`.
pub fn write_time_bars(dir: &Path, bars: &[Bar]) -> Result<()> {
    write(
        &dir.join("time_bars.svg"),
        &bar_chart_svg("mean navigation time", "time (s)", bars),
    )?;
    let mut csv = String::from("label,mean_time_s,std_time_s\n");
    for b in bars {
        let _ = writeln!(csv, "{},{},{}", b.label, b.value, b.std);
    }
    write(&dir.join("time_bars.csv"), &csv)
}

/// `distance_bars.svg` + `distance_bars.csv`; the goal task has no distance
/// fraction, so an empty list renders an explanatory placeholder.
pub fn write_distance_bars(dir: &Path, bars: &[Bar]) -> Result<()> {
    let svg = if bars.is_empty() {
        note_svg(
            "mean route completion",
            "distance fraction applies to the waypoint task only",
        )
    } else {
        bar_chart_svg("mean route completion", "fraction of route length", bars)
    };
    write(&dir.join("distance_bars.svg"), &svg)?;
    let mut csv = String::from("label,mean_distance_fraction,std_fraction\n");
    for b in bars {
        let _ = writeln!(csv, "{},{},{}", b.label, b.value, b.std);
    }
    write(&dir.join("distance_bars.csv"), &csv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_steps_land_on_round_values() {
        let (t, d) = nice_ticks(0.0, 100.0);
        assert_eq!(d, 0);
        assert!(t.contains(&0.0) && t.contains(&100.0), "{t:?}");
        for w in t.windows(2) {
            assert_eq!(w[1] - w[0], 20.0);
        }
        let (t, d) = nice_ticks(-0.55, 0.55);
        assert_eq!(d, 1);
        assert!(t.contains(&0.0));
        assert!(t.iter().all(|v| (-0.56..=0.56).contains(v)), "{t:?}");
    }

    #[test]
    fn flat_series_draws_a_horizontal_line() {
        let series = vec![Series { label: "flat".into(), values: vec![5.0; 4] }];
        let svg = line_chart_svg(&[("panel".into(), series)], "episode", "reward");
        let points = svg
            .lines()
            .find(|l| l.contains("polyline"))
            .and_then(|l| l.split("points=\"").nth(1))
            .and_then(|l| l.split('"').next())
            .unwrap();
        let ys: Vec<&str> = points
            .split(' ')
            .map(|p| p.split(',').nth(1).unwrap())
            .collect();
        assert_eq!(ys.len(), 4);
        assert!(ys.iter().all(|y| y == &ys[0]), "{ys:?}");
    }

    #[test]
    fn bar_heights_scale_linearly_with_value() {
        let bars = vec![
            Bar { label: "a".into(), value: 10.0, std: 0.0 },
            Bar { label: "b".into(), value: 20.0, std: 0.0 },
        ];
        let svg = bar_chart_svg("t", "y", &bars);
        let heights: Vec<f64> = svg
            .lines()
            .filter(|l| l.starts_with("<rect") && !l.contains("fill=\"white\""))
            .map(|l| {
                l.split("height=\"")
                    .nth(1)
                    .unwrap()
                    .split('"')
                    .next()
                    .unwrap()
                    .parse()
                    .unwrap()
            })
            .collect();
        assert_eq!(heights.len(), 2);
        let ratio = heights[1] / heights[0];
        assert!((ratio - 2.0).abs() < 1e-3, "ratio {ratio}");
    }

    #[test]
    fn identical_inputs_render_identical_bytes() {
        let series = vec![Series { label: "s".into(), values: vec![1.0, -3.0, 2.5] }];
        let panels = [("p".into(), series)];
        assert_eq!(
            line_chart_svg(&panels, "x", "y"),
            line_chart_svg(&panels, "x", "y")
        );
        let bars = vec![Bar { label: "a".into(), value: 3.0, std: 0.4 }];
        assert_eq!(bar_chart_svg("t", "y", &bars), bar_chart_svg("t", "y", &bars));
    }

    #[test]
    fn files_come_in_svg_and_csv_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let series = vec![
            Series { label: "a".into(), values: vec![0.0, 1.0] },
            Series { label: "b".into(), values: vec![2.0] },
        ];
        write_reward_curves(dir.path(), &[("room 1, 2d".into(), series)]).unwrap();
        let csv = fs::read_to_string(dir.path().join("reward_curve.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("panel,series,episode,reward\n"));
        assert!(dir.path().join("reward_curve.svg").exists());

        write_time_bars(
            dir.path(),
            &[Bar { label: "ddpg/mlp3".into(), value: 13.48, std: 0.46 }],
        )
        .unwrap();
        let csv = fs::read_to_string(dir.path().join("time_bars.csv")).unwrap();
        assert_eq!(csv, "label,mean_time_s,std_time_s\nddpg/mlp3,13.48,0.46\n");

        write_distance_bars(dir.path(), &[]).unwrap();
        let svg = fs::read_to_string(dir.path().join("distance_bars.svg")).unwrap();
        assert!(svg.contains("waypoint task only"));
        let csv = fs::read_to_string(dir.path().join("distance_bars.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1);
    }

    #[test]
    fn whiskers_extend_above_and_below_the_bar_top() {
        let bars = vec![Bar { label: "a".into(), value: 10.0, std: 2.0 }];
        let svg = bar_chart_svg("t", "y", &bars);
        assert!(svg.contains("<line x1"), "missing whisker lines: {svg}");
        let labels = svg.matches("text-anchor=\"middle\"").count();
        assert!(labels >= 2); // title + bar label
    }
}
