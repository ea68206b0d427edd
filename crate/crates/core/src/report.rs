//! SVG line charts over a [`ResultTable`].

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{Metric, ResultRow, ResultTable, Split, Status};

/// Glyph drawn where an MDAD is undetectable.
pub const BREAK_GLYPH: &str = "\u{2307}";

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no data left for chart `{0}` after filters")]
    EmptySelection(String),
    #[error("filter {key} = {value} matches nothing in the table")]
    UnknownFilterValue { key: &'static str, value: String },
    #[error("agreement-curve charts need a JSON result table with curves")]
    MissingCurves,
    #[error("invalid report spec: {0}")]
    Spec(String),
}

pub type Result<T, E = ReportError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChartKind {
    AgreementCurve,
    MdadVsN,
    MetricVsN,
    MetricVsNumSource,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChartFilters {
    pub method: Option<Vec<String>>,
    pub n: Option<Vec<usize>>,
    pub num_source: Option<Vec<usize>>,
    pub split: Option<Split>,
    /// Metric for the metric-vs-* kinds (default estimation error).
    pub metric: Option<Metric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub kind: ChartKind,
    #[serde(default)]
    pub filters: ChartFilters,
    pub output: PathBuf,
    #[serde(default)]
    pub title: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSpec {
    pub input: PathBuf,
    pub charts: Vec<ChartSpec>,
}

impl ReportSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| ReportError::Spec(e.to_string()))
    }
}

fn check_filters(table: &ResultTable, f: &ChartFilters) -> Result<()> {
    let methods: BTreeSet<&str> = table
        .rows
        .iter()
        .map(|r| r.method.as_str())
        .chain(table.curves.iter().map(|c| c.method.as_str()))
        .collect();
    let ns: BTreeSet<usize> = table
        .rows
        .iter()
        .map(|r| r.n)
        .chain(table.curves.iter().map(|c| c.n))
        .collect();
    let ks: BTreeSet<usize> = table
        .rows
        .iter()
        .map(|r| r.num_source)
        .chain(table.curves.iter().map(|c| c.num_source))
        .collect();
    for m in f.method.iter().flatten() {
        if !methods.contains(m.as_str()) {
            return Err(ReportError::UnknownFilterValue {
                key: "method",
                value: m.clone(),
            });
        }
    }
    for n in f.n.iter().flatten() {
        if !ns.contains(n) {
            return Err(ReportError::UnknownFilterValue {
                key: "n",
                value: n.to_string(),
            });
        }
    }
    for k in f.num_source.iter().flatten() {
        if !ks.contains(k) {
            return Err(ReportError::UnknownFilterValue {
                key: "num_source",
                value: k.to_string(),
            });
        }
    }
    if let Some(s) = f.split {
        if !table.rows.iter().any(|r| r.split == s) && !table.curves.iter().any(|c| c.split == s) {
            return Err(ReportError::UnknownFilterValue {
                key: "split",
                value: s.tag().into(),
            });
        }
    }
    Ok(())
}

fn keep(f: &ChartFilters, method: &str, n: usize, num_source: usize, split: Split) -> bool {
    f.method
        .as_ref()
        .is_none_or(|v| v.iter().any(|m| m == method))
        && f.n.as_ref().is_none_or(|v| v.contains(&n))
        && f.num_source
            .as_ref()
            .is_none_or(|v| v.contains(&num_source))
        && f.split.is_none_or(|s| s == split)
}

#[derive(Debug)]
struct Point {
    x: f64,
    /// `None` marks an undetectable cell.
    y: Option<f64>,
    label: Option<String>,
    ci: Option<(f64, f64)>,
}

#[derive(Debug)]
struct Series {
    name: String,
    points: Vec<Point>,
}

struct Axes {
    x_label: &'static str,
    y_label: &'static str,
    /// Explicit x ticks with labels (data values); `None` = nice ticks.
    x_ticks: Option<Vec<(f64, String)>>,
    log_x: bool,
    y_range: Option<(f64, f64)>,
}

fn row_point(r: &ResultRow, x: f64) -> Option<Point> {
    match r.status {
        Status::Failed => None,
        Status::Undetectable => Some(Point {
            x,
            y: None,
            label: Some(r.display.clone()),
            ci: None,
        }),
        Status::Ok => {
            let y = r.display.parse::<f64>().ok().or(r.value)?;
            Some(Point {
                x,
                y: Some(y),
                label: Some(r.display.clone()),
                ci: r.ci_low.zip(r.ci_high),
            })
        }
    }
}

fn row_series(table: &ResultTable, chart: &ChartSpec, metric: Metric, by_n: bool) -> Vec<Series> {
    let f = &chart.filters;
    let rows: Vec<&ResultRow> = table
        .rows
        .iter()
        .filter(|r| r.metric == metric && keep(f, &r.method, r.n, r.num_source, r.split))
        .collect();
    // series are keyed by method plus whichever grid coordinate is not on x
    let other = |r: &ResultRow| if by_n { r.num_source } else { r.n };
    let distinct_other: BTreeSet<usize> = rows.iter().map(|r| other(r)).collect();
    let distinct_split: BTreeSet<Split> = rows.iter().map(|r| r.split).collect();
    let mut keys: Vec<(String, usize, Split)> = Vec::new();
    for r in &rows {
        let key = (r.method.clone(), other(r), r.split);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(method, o, split)| {
            let mut name = method.clone();
            if distinct_other.len() > 1 {
                let _ = write!(name, " ({}={o})", if by_n { "sources" } else { "n" });
            }
            if distinct_split.len() > 1 {
                let _ = write!(name, " [{}]", split.tag());
            }
            let mut points: Vec<Point> = rows
                .iter()
                .filter(|r| r.method == method && other(r) == o && r.split == split)
                .filter_map(|r| row_point(r, if by_n { r.n } else { r.num_source } as f64))
                .collect();
            points.sort_by(|a, b| a.x.total_cmp(&b.x));
            Series { name, points }
        })
        .filter(|s| !s.points.is_empty())
        .collect()
}

fn curve_series(table: &ResultTable, chart: &ChartSpec) -> Vec<Series> {
    let f = &chart.filters;
    let curves: Vec<_> = table
        .curves
        .iter()
        .filter(|c| keep(f, &c.method, c.n, c.num_source, c.split))
        .collect();
    let ns: BTreeSet<usize> = curves.iter().map(|c| c.n).collect();
    let ks: BTreeSet<usize> = curves.iter().map(|c| c.num_source).collect();
    curves
        .iter()
        .map(|c| {
            let mut name = c.method.clone();
            if ns.len() > 1 {
                let _ = write!(name, " (n={})", c.n);
            }
            if ks.len() > 1 {
                let _ = write!(name, " (sources={})", c.num_source);
            }
            Series {
                name,
                points: c
                    .curve
                    .buckets
                    .iter()
                    .filter_map(|b| {
                        b.probability.map(|p| Point {
                            x: b.centroid,
                            y: Some(p),
                            label: None,
                            ci: None,
                        })
                    })
                    .collect(),
            }
        })
        .filter(|s| !s.points.is_empty())
        .collect()
}

fn metric_label(m: Metric) -> &'static str {
    match m {
        Metric::EstimationError => "mean estimation error (accuracy points)",
        Metric::KendallTau => "Kendall's tau",
        Metric::Mdad => "MDAD (accuracy points)",
    }
}

fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let step = tick_step(hi - lo);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let mut ticks = Vec::new();
    let mut k = (lo / step).ceil();
    while k * step <= hi + 1e-9 * step {
        let v = k * step;
        ticks.push((
            v,
            format!("{:.*}", decimals, if v.abs() < 1e-12 { 0.0 } else { v }),
        ));
        k += 1.0;
    }
    ticks
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn draw(title: &str, series: &[Series], axes: &Axes) -> String {
    let xs: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.x))
        .collect();
    let (mut x_lo, mut x_hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let tx = |x: f64| if axes.log_x { x.log10() } else { x };
    if x_lo == x_hi {
        let pad = if axes.log_x {
            x_lo * 0.5
        } else {
            1.0f64.max(x_lo.abs() * 0.1)
        };
        x_lo -= pad;
        x_hi += pad;
    }
    let (y_lo, y_hi) = axes.y_range.unwrap_or_else(|| {
        let hi = series
            .iter()
            .flat_map(|s| s.points.iter())
            .flat_map(|p| p.y.into_iter().chain(p.ci.map(|c| c.1)))
            .fold(0.0f64, f64::max);
        let lo = series
            .iter()
            .flat_map(|s| s.points.iter())
            .flat_map(|p| p.y.into_iter().chain(p.ci.map(|c| c.0)))
            .fold(0.0f64, f64::min);
        let hi = if hi <= lo { lo + 1.0 } else { hi };
        (lo, hi + 0.1 * (hi - lo))
    });
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let (txl, txh) = (tx(x_lo), tx(x_hi));
    let span = if txh > txl { txh - txl } else { 1.0 };
    let inset = 0.04 * pw;
    let sx = |x: f64| LEFT + inset + (tx(x) - txl) / span * (pw - 2.0 * inset);
    let sy = |y: f64| TOP + ph - (y - y_lo) / (y_hi - y_lo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        esc(title)
    );
    let _ = writeln!(
        s,
        r##"<g stroke="#333"><line x1="{LEFT}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{0:.2}"/></g>"##,
        TOP + ph,
        LEFT + pw
    );
    let x_ticks = axes
        .x_ticks
        .clone()
        .unwrap_or_else(|| nice_ticks(x_lo, x_hi));
    for (v, label) in &x_ticks {
        let x = sx(*v);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{0:.2}" x2="{x:.2}" y2="{1:.2}" stroke="#333"/><text class="tick" x="{x:.2}" y="{2:.2}" text-anchor="middle">{3}</text>"##,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            esc(label)
        );
    }
    for (v, label) in nice_ticks(y_lo, y_hi) {
        let y = sy(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{0:.2}" y2="{y:.2}" stroke="#ddd"/><text class="tick" x="{1:.2}" y="{2:.2}" text-anchor="end">{3}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            label
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 18.0,
        esc(axes.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0:.2}" text-anchor="middle" transform="rotate(-90 18 {0:.2})">{1}</text>"#,
        TOP + ph / 2.0,
        esc(axes.y_label)
    );

    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<g class="series" data-name="{}" stroke="{color}" fill="{color}">"#,
            esc(&ser.name)
        );
        // polyline segments broken at undetectable points
        let mut segment: Vec<String> = Vec::new();
        let flush = |segment: &mut Vec<String>, s: &mut String| {
            if segment.len() > 1 {
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke-width="1.5" points="{}"/>"#,
                    segment.join(" ")
                );
            }
            segment.clear();
        };
        for p in &ser.points {
            match p.y {
                Some(y) => segment.push(format!("{:.2},{:.2}", sx(p.x), sy(y))),
                None => flush(&mut segment, &mut s),
            }
        }
        flush(&mut segment, &mut s);
        for p in &ser.points {
            let x = sx(p.x);
            match p.y {
                Some(y) => {
                    if let Some((lo, hi)) = p.ci {
                        let _ = writeln!(
                            s,
                            r#"<g class="ci"><line x1="{x:.2}" y1="{0:.2}" x2="{x:.2}" y2="{1:.2}"/><line x1="{2:.2}" y1="{0:.2}" x2="{3:.2}" y2="{0:.2}"/><line x1="{2:.2}" y1="{1:.2}" x2="{3:.2}" y2="{1:.2}"/></g>"#,
                            sy(lo),
                            sy(hi),
                            x - 3.0,
                            x + 3.0
                        );
                    }
                    let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{:.2}" r="3"/>"#, sy(y));
                    if let Some(label) = &p.label {
                        let _ = writeln!(
                            s,
                            r#"<text class="value" stroke="none" x="{:.2}" y="{:.2}">{}</text>"#,
                            x + 5.0,
                            sy(y) - 5.0,
                            esc(label)
                        );
                    }
                }
                None => {
                    let _ = writeln!(
                        s,
                        r#"<g class="break-marker" stroke="none"><text x="{x:.2}" y="{0:.2}" font-size="16" text-anchor="middle">{BREAK_GLYPH}</text><text class="value" x="{x:.2}" y="{1:.2}" text-anchor="middle">{2}</text></g>"#,
                        TOP + 14.0,
                        TOP + 26.0 + 12.0 * i as f64,
                        esc(p.label.as_deref().unwrap_or("undetectable"))
                    );
                }
            }
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke-width="2"/><text stroke="none" x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            esc(&ser.name)
        );
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

fn data_ticks(series: &[Series]) -> Vec<(f64, String)> {
    let xs: BTreeSet<u64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.x as u64))
        .collect();
    xs.into_iter().map(|x| (x as f64, x.to_string())).collect()
}

/// Renders one chart. Output is a pure function of the table and spec.
pub fn render_chart(table: &ResultTable, chart: &ChartSpec) -> Result<String> {
    check_filters(table, &chart.filters)?;
    let kind_name = serde_json::to_value(chart.kind).expect("kind serializes");
    let kind_name = kind_name.as_str().unwrap_or_default().to_string();
    let (series, axes, default_title) = match chart.kind {
        ChartKind::AgreementCurve => {
            if table.curves.is_empty() {
                return Err(ReportError::MissingCurves);
            }
            let series = curve_series(table, chart);
            let axes = Axes {
                x_label: "accuracy difference on the full benchmark (accuracy points)",
                y_label: "probability of agreement",
                x_ticks: None,
                log_x: false,
                y_range: Some((0.0, 1.0)),
            };
            (
                series,
                axes,
                "Agreement with the full benchmark".to_string(),
            )
        }
        ChartKind::MdadVsN | ChartKind::MetricVsN => {
            let metric = if chart.kind == ChartKind::MdadVsN {
                Metric::Mdad
            } else {
                chart.filters.metric.unwrap_or(Metric::EstimationError)
            };
            let series = row_series(table, chart, metric, true);
            let xs: Vec<f64> = series
                .iter()
                .flat_map(|s| s.points.iter().map(|p| p.x))
                .collect();
            let (lo, hi) = xs
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
            let axes = Axes {
                x_label: "number of examples (n)",
                y_label: metric_label(metric),
                x_ticks: Some(data_ticks(&series)),
                log_x: lo > 0.0 && hi / lo >= 10.0,
                y_range: (metric == Metric::KendallTau).then_some((-1.0, 1.0)),
            };
            (
                series,
                axes,
                format!("{} vs. micro-benchmark size", metric.tag()),
            )
        }
        ChartKind::MetricVsNumSource => {
            let metric = chart.filters.metric.unwrap_or(Metric::EstimationError);
            let series = row_series(table, chart, metric, false);
            let axes = Axes {
                x_label: "number of source models",
                y_label: metric_label(metric),
                x_ticks: Some(data_ticks(&series)),
                log_x: false,
                y_range: (metric == Metric::KendallTau).then_some((-1.0, 1.0)),
            };
            (
                series,
                axes,
                format!("{} vs. number of source models", metric.tag()),
            )
        }
    };
    if series.is_empty() {
        return Err(ReportError::EmptySelection(kind_name));
    }
    Ok(draw(
        chart.title.as_deref().unwrap_or(&default_title),
        &series,
        &axes,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::CurveRecord;
    use crate::metaeval::{AgreementCounts, BucketSpec};

    fn row(
        method: &str,
        n: usize,
        metric: Metric,
        status: Status,
        value: Option<f64>,
    ) -> ResultRow {
        ResultRow {
            benchmark: "b".into(),
            method: method.into(),
            n,
            num_source: 10,
            split: Split::Train,
            metric,
            status,
            value,
            display: match (status, value) {
                (Status::Ok, Some(v)) => metric.display(v),
                (Status::Undetectable, _) => "undetectable".into(),
                _ => "failed".into(),
            },
            ci_low: value.map(|v| v - 0.5),
            ci_high: value.map(|v| v + 0.75),
            undetectable_fraction: None,
            trials: 3,
            detail: String::new(),
            per_trial: vec![],
        }
    }

    fn chart(kind: ChartKind) -> ChartSpec {
        ChartSpec {
            kind,
            filters: ChartFilters::default(),
            output: "x.svg".into(),
            title: None,
        }
    }

    fn value_labels(svg: &str) -> Vec<String> {
        svg.split(r#"class="value""#)
            .skip(1)
            .map(|rest| {
                let start = rest.find('>').unwrap() + 1;
                let end = rest[start..].find('<').unwrap();
                rest[start..start + end].to_string()
            })
            .collect()
    }

    #[test]
    fn single_point_with_error_bar() {
        let table = ResultTable {
            rows: vec![row(
                "random-uniform",
                10,
                Metric::Mdad,
                Status::Ok,
                Some(3.25),
            )],
            curves: vec![],
        };
        let svg = render_chart(&table, &chart(ChartKind::MdadVsN)).unwrap();
        assert_eq!(svg.matches("<circle").count(), 1);
        assert_eq!(svg.matches(r#"class="ci""#).count(), 1);
        assert_eq!(value_labels(&svg), vec!["3.5"]);
        assert!(svg.contains("accuracy points") && svg.contains("number of examples"));
    }

    #[test]
    fn undetectable_renders_a_break() {
        let table = ResultTable {
            rows: vec![
                row(
                    "random-uniform",
                    10,
                    Metric::Mdad,
                    Status::Undetectable,
                    None,
                ),
                row("random-uniform", 50, Metric::Mdad, Status::Ok, Some(4.0)),
                row("random-uniform", 100, Metric::Mdad, Status::Ok, Some(2.5)),
            ],
            curves: vec![],
        };
        let svg = render_chart(&table, &chart(ChartKind::MdadVsN)).unwrap();
        assert!(svg.contains(BREAK_GLYPH));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches("<polyline").count(), 1);
        let csv = table.to_csv();
        for label in value_labels(&svg) {
            assert!(csv.contains(&format!(",{label},")), "{label}");
        }
    }

    #[test]
    fn deterministic_and_filters_checked() {
        let table = ResultTable {
            rows: vec![
                row(
                    "random-uniform",
                    10,
                    Metric::EstimationError,
                    Status::Ok,
                    Some(4.123),
                ),
                row(
                    "anchor-points",
                    10,
                    Metric::EstimationError,
                    Status::Ok,
                    Some(3.0),
                ),
                row(
                    "anchor-points",
                    25,
                    Metric::EstimationError,
                    Status::Failed,
                    None,
                ),
            ],
            curves: vec![],
        };
        let c = chart(ChartKind::MetricVsN);
        assert_eq!(
            render_chart(&table, &c).unwrap(),
            render_chart(&table, &c).unwrap()
        );
        let mut bad = c.clone();
        bad.filters.method = Some(vec!["diversity".into()]);
        assert!(matches!(
            render_chart(&table, &bad),
            Err(ReportError::UnknownFilterValue { key: "method", .. })
        ));
        let mut tau = c.clone();
        tau.filters.metric = Some(Metric::KendallTau);
        assert!(matches!(
            render_chart(&table, &tau),
            Err(ReportError::EmptySelection(_))
        ));
        let by_k = render_chart(&table, &chart(ChartKind::MetricVsNumSource)).unwrap();
        assert!(by_k.contains("number of source models"));
    }

    #[test]
    fn agreement_chart_from_curves() {
        let mut counts = AgreementCounts::default();
        counts.record(0, false);
        counts.record(2, true);
        counts.record(3, true);
        let table = ResultTable {
            rows: vec![],
            curves: vec![CurveRecord {
                method: "diversity".into(),
                n: 10,
                num_source: 10,
                split: Split::Train,
                curve: counts.curve(&BucketSpec::default()),
            }],
        };
        let svg = render_chart(&table, &chart(ChartKind::AgreementCurve)).unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(matches!(
            render_chart(&ResultTable::default(), &chart(ChartKind::AgreementCurve)),
            Err(ReportError::MissingCurves)
        ));
    }

    #[test]
    fn spec_parses() {
        let spec = ReportSpec::from_json(
            r#"{"input":"t.json","charts":[{"kind":"mdad-vs-n","filters":{"num_source":[300]},"output":"m.svg"}]}"#,
        )
        .unwrap();
        assert_eq!(spec.charts[0].kind, ChartKind::MdadVsN);
    }
}
