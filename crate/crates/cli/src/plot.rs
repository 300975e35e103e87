//! Static SVG line charts straight from CSV columns.

use std::fmt::Write as _;

use crate::csvio::Table;
use crate::CliError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub x: String,
    pub y: Vec<String>,
    pub group: Option<String>,
    pub log_y: bool,
    pub title: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn column(table: &Table, name: &str) -> Result<usize, CliError> {
    table.column(name).ok_or_else(|| {
        CliError::Usage(format!(
            "column {name:?} not found; available: {}",
            table.header.join(", ")
        ))
    })
}

/// Split the requested columns into series. Unparsable and non-finite cells
/// are skipped.
pub fn collect_series(table: &Table, spec: &PlotSpec) -> Result<Vec<Series>, CliError> {
    let xi = column(table, &spec.x)?;
    let gi = match &spec.group {
        Some(g) => Some(column(table, g)?),
        None => table.column("site"),
    };
    let mut series = Vec::new();
    for name in &spec.y {
        let yi = column(table, name)?;
        let mut groups: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for row in &table.rows {
            let key = gi.map_or(String::new(), |g| row[g].clone());
            let (Ok(x), Ok(y)) = (row[xi].parse::<f64>(), row[yi].parse::<f64>()) else {
                continue;
            };
            if !x.is_finite() || !y.is_finite() {
                continue;
            }
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, pts)) => pts.push((x, y)),
                None => groups.push((key, vec![(x, y)])),
            }
        }
        for (key, points) in groups {
            let label = match gi {
                Some(g) => format!("{name} ({}={key})", table.header[g]),
                None => name.clone(),
            };
            series.push(Series { label, points });
        }
    }
    Ok(series)
}

/// Render the chart. Identical input gives identical bytes.
pub fn render_svg(table: &Table, spec: &PlotSpec) -> Result<String, CliError> {
    let series = collect_series(table, spec)?;
    if spec.log_y {
        for s in &series {
            if let Some(&(x, y)) = s.points.iter().find(|p| p.1 <= 0.0) {
                return Err(CliError::Usage(format!(
                    "log scale needs positive values, but {} is {y} at {} = {x}",
                    s.label, spec.x
                )));
            }
        }
    }
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if all.is_empty() {
        return Err(CliError::Usage("nothing to plot: no finite data in the selected columns".into()));
    }
    let ty = |y: f64| if spec.log_y { y.log10() } else { y };
    let (x_lo, x_hi) = padded_range(all.iter().map(|p| p.0));
    let (y_lo, y_hi, y_ticks) = if spec.log_y {
        let (lo, hi) = padded_range(all.iter().map(|p| p.1.log10()));
        let (lo, hi) = (lo.floor(), hi.ceil().max(lo.floor() + 1.0));
        let ticks: Vec<(f64, String)> = (lo as i32..=hi as i32).map(|k| (k as f64, format!("1e{k}"))).collect();
        (lo, hi, ticks)
    } else {
        let (lo, hi) = padded_range(all.iter().map(|p| p.1));
        let ticks = nice_ticks(lo, hi);
        let lo = lo.min(ticks.first().map_or(lo, |t| t.0));
        let hi = hi.max(ticks.last().map_or(hi, |t| t.0));
        (lo, hi, ticks)
    };
    let x_ticks = nice_ticks(x_lo, x_hi);
    let (x_lo, x_hi) = (
        x_lo.min(x_ticks.first().map_or(x_lo, |t| t.0)),
        x_hi.max(x_ticks.last().map_or(x_hi, |t| t.0)),
    );

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * pw;
    let py = |y: f64| TOP + ph - (y - y_lo) / (y_hi - y_lo) * ph;

    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    if let Some(title) = &spec.title {
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + pw / 2.0,
            escape(title)
        );
    }
    let _ = writeln!(
        w,
        r##"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#333"/>"##
    );
    for (v, label) in &x_ticks {
        let x = px(*v);
        let _ = writeln!(
            w,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"##,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 19.0
        );
    }
    for (v, label) in &y_ticks {
        let y = py(*v);
        let _ = writeln!(
            w,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT:.2}" y2="{y:.2}" stroke="#333"/><line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"##,
            LEFT - 5.0,
            LEFT + pw,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(&spec.x)
    );
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut pts = String::new();
        for &(x, y) in &s.points {
            let _ = write!(pts, "{:.2},{:.2} ", px(x), py(ty(y)));
        }
        let _ = writeln!(
            w,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.trim_end()
        );
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            w,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

/// Ticks at multiples of 1, 2 or 5 times a power of ten, about five of them.
pub fn nice_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).floor() as i64;
    let last = (hi / step).ceil() as i64;
    (first..=last)
        .map(|k| {
            let v = k as f64 * step;
            let label = format!("{v:.decimals$}");
            let label = match label.strip_prefix('-') {
                Some(rest) if rest.chars().all(|c| c == '0' || c == '.') => rest.to_string(),
                _ => label,
            };
            (v, label)
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Table {
        Table::parse("t,site,sigma_hat,rho\n0,0,1,0\n0,1,0.5,1\n1,0,2,-1\n1,1,0.7,2\n").unwrap()
    }

    fn spec(y: &[&str], log_y: bool) -> PlotSpec {
        PlotSpec {
            x: "t".into(),
            y: y.iter().map(|s| s.to_string()).collect(),
            group: None,
            log_y,
            title: Some("a < b".into()),
        }
    }

    #[test]
    fn one_series_per_site() {
        let series = collect_series(&table(), &spec(&["sigma_hat"], false)).unwrap();
        assert_eq!(series.len(), 2);
        assert_eq!(series[0].label, "sigma_hat (site=0)");
        assert_eq!(series[1].points, vec![(0.0, 0.5), (1.0, 0.7)]);
        let svg = render_svg(&table(), &spec(&["sigma_hat"], false)).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a &lt; b"));
    }

    #[test]
    fn missing_column_is_a_usage_error() {
        let err = render_svg(&table(), &spec(&["nope"], false)).unwrap_err();
        assert!(matches!(err, CliError::Usage(ref m) if m.contains("nope")));
    }

    #[test]
    fn log_scale_rejects_nonpositive() {
        assert!(matches!(render_svg(&table(), &spec(&["rho"], true)), Err(CliError::Usage(_))));
        assert!(render_svg(&table(), &spec(&["sigma_hat"], true)).is_ok());
    }

    #[test]
    fn output_is_deterministic() {
        let a = render_svg(&table(), &spec(&["sigma_hat", "rho"], false)).unwrap();
        let b = render_svg(&table(), &spec(&["sigma_hat", "rho"], false)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ticks_are_round() {
        let labels: Vec<String> = nice_ticks(0.0, 2.1).into_iter().map(|t| t.1).collect();
        assert_eq!(labels, ["0.0", "0.5", "1.0", "1.5", "2.0", "2.5"]);
        let labels: Vec<String> = nice_ticks(-3.0, 7.0).into_iter().map(|t| t.1).collect();
        assert_eq!(labels, ["-4", "-2", "0", "2", "4", "6", "8"]);
    }
}
