//! Minimal SVG line charts: one polyline per series with a min-max band,
//! optional dashed reference lines and a legend.

use std::fmt::Write;

pub struct Series {
    pub name: String,
    /// `(x, mean, min, max)` sorted by x.
    pub points: Vec<(f64, f64, f64, f64)>,
    /// Constant value drawn as a dashed horizontal line.
    pub reference: Option<f64>,
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    /// Fix the vertical axis to [0, 1].
    pub y_unit_range: bool,
    pub series: Vec<Series>,
}

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 560.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 410.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        return format!("{v:e}");
    }
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f < 1.5 {
        1.0
    } else if f < 3.0 {
        2.0
    } else if f < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

/// Axis range and ticks in transformed units.
fn linear_axis(lo: f64, hi: f64) -> (f64, f64, Vec<f64>) {
    let (lo, hi) = if hi - lo < 1e-12 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
    let step = nice_step(hi - lo);
    let start = (lo / step).floor() * step;
    let end = (hi / step).ceil() * step;
    let n = ((end - start) / step).round() as usize;
    let ticks = (0..=n).map(|i| start + step * i as f64).collect();
    (start, end, ticks)
}

pub fn line_chart(chart: &Chart) -> String {
    let tx = |x: f64| if chart.log_x { x.max(f64::MIN_POSITIVE).log10() } else { x };
    let xs: Vec<f64> = chart.series.iter().flat_map(|s| s.points.iter().map(|p| tx(p.0))).collect();
    let (x_lo, x_hi, x_ticks) = if xs.is_empty() {
        (0.0, 1.0, vec![0.0, 1.0])
    } else if chart.log_x {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min).floor();
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil();
        let hi = if hi <= lo { lo + 1.0 } else { hi };
        (lo, hi, (lo as i64..=hi as i64).map(|e| e as f64).collect())
    } else {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        linear_axis(lo, hi)
    };
    let (y_lo, y_hi, y_ticks) = if chart.y_unit_range {
        (0.0, 1.0, (0..=5).map(|i| i as f64 * 0.2).collect())
    } else {
        let ys: Vec<f64> = chart
            .series
            .iter()
            .flat_map(|s| s.points.iter().flat_map(|p| [p.2, p.3]).chain(s.reference))
            .collect();
        let lo = ys.iter().copied().fold(0.0, f64::min);
        let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(lo + 1e-9);
        linear_axis(lo, hi)
    };
    let px = |x: f64| LEFT + (tx(x) - x_lo) / (x_hi - x_lo) * (RIGHT - LEFT);
    let px_t = |t: f64| LEFT + (t - x_lo) / (x_hi - x_lo) * (RIGHT - LEFT);
    let py = |y: f64| BOTTOM - (y.clamp(y_lo, y_hi) - y_lo) / (y_hi - y_lo) * (BOTTOM - TOP);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, (LEFT + RIGHT) / 2.0, escape(&chart.title));
    for &t in &x_ticks {
        let x = px_t(t);
        let label = if chart.log_x { tick_label(10f64.powf(t)) } else { tick_label(t) };
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{BOTTOM}" stroke="#e0e0e0"/>"##);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, BOTTOM + 16.0, escape(&label));
    }
    for &t in &y_ticks {
        let y = py(t);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{RIGHT}" y2="{y:.2}" stroke="#e0e0e0"/>"##);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, escape(&tick_label(t)));
    }
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#, RIGHT - LEFT, BOTTOM - TOP);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (LEFT + RIGHT) / 2.0, BOTTOM + 40.0, escape(&chart.x_label));
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0:.2}" text-anchor="middle" transform="rotate(-90 20 {0:.2})">{1}</text>"#,
        (TOP + BOTTOM) / 2.0,
        escape(&chart.y_label)
    );
    for (i, series) in chart.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if series.points.len() > 1 {
            let mut band: Vec<String> = series.points.iter().map(|p| format!("{:.2},{:.2}", px(p.0), py(p.3))).collect();
            band.extend(series.points.iter().rev().map(|p| format!("{:.2},{:.2}", px(p.0), py(p.2))));
            let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, band.join(" "));
            let line: Vec<String> = series.points.iter().map(|p| format!("{:.2},{:.2}", px(p.0), py(p.1))).collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        }
        for p in &series.points {
            let (x, y) = (px(p.0), py(p.1));
            if series.points.len() == 1 {
                let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#, py(p.2), py(p.3));
            }
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
        }
        if let Some(r) = series.reference {
            let y = py(r);
            let _ = writeln!(
                s,
                r#"<line x1="{LEFT}" y1="{y:.2}" x2="{RIGHT}" y2="{y:.2}" stroke="{color}" stroke-width="1.5" stroke-dasharray="6 4"/>"#
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let dash = if series.points.is_empty() { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly:.2}" x2="{}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash}/>"#, RIGHT + 20.0, RIGHT + 44.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}">{}</text>"#, RIGHT + 50.0, ly + 4.0, escape(&series.name));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart(log_x: bool, xs: &[f64]) -> Chart {
        Chart {
            title: "t".into(),
            x_label: "x (unit)".into(),
            y_label: "y <unit>".into(),
            log_x,
            y_unit_range: false,
            series: vec![Series { name: "a&b".into(), points: xs.iter().map(|&x| (x, x, x, x)).collect(), reference: Some(0.5) }],
        }
    }

    #[test]
    fn ticks_increase_left_to_right() {
        for (log, xs) in [(false, vec![0.1, 0.35, 0.9]), (true, vec![100.0, 1000.0, 1e4])] {
            let svg = line_chart(&chart(log, &xs));
            let mut xs_ticks = Vec::new();
            for line in svg.lines().filter(|l| l.contains("text-anchor=\"middle\">") && l.contains(&format!("y=\"{}\"", BOTTOM + 16.0))) {
                let x: f64 = line.split("x=\"").nth(1).unwrap().split('"').next().unwrap().parse().unwrap();
                xs_ticks.push(x);
            }
            assert!(xs_ticks.len() >= 2);
            assert!(xs_ticks.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn text_is_escaped() {
        let svg = line_chart(&chart(false, &[1.0, 2.0]));
        assert!(svg.contains("a&amp;b") && svg.contains("y &lt;unit&gt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn tick_labels_are_compact() {
        assert_eq!(tick_label(0.2), "0.2");
        assert_eq!(tick_label(1000.0), "1000");
        assert_eq!(tick_label(100000.0), "1e5");
        assert_eq!(tick_label(0.0001), "1e-4");
    }
}
