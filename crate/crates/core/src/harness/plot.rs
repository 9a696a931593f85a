//! Line charts of the running averages as standalone SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::output::TRACE_HEADER;
use crate::error::{Error, Result};

/// Points drawn per series; longer series are thinned evenly.
const MAX_POINTS: usize = 2000;
const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 230.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    /// `y` at `t = 1, 2, …`
    pub values: Vec<f64>,
    pub dashed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub title: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

impl Chart {
    /// `x` over `[1, T]` and `y` over the finite data, each widened by 5%.
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let t = self.series.iter().map(|s| s.values.len()).max().unwrap_or(1).max(1) as f64;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in self.series.iter().flat_map(|s| &s.values).filter(|v| v.is_finite()) {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        let widen = |a: f64, b: f64| {
            let span = if b > a { b - a } else { a.abs().max(1.0) };
            [a - 0.05 * span, b + 0.05 * span]
        };
        (widen(1.0, t.max(2.0)), widen(lo, hi))
    }
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".to_string()
    } else if !(1e-2..1e5).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_chart(chart: &Chart) -> String {
    let ([x0, x1], [y0, y1]) = chart.bounds();
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, LEFT + pw / 2.0, escape(&chart.title));
    let _ = writeln!(s, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##);
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(s, r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{}" stroke="#ddd"/>"##, TOP + ph);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, tick_label(xv));
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, py + 4.0, tick_label(yv));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">T</text>"#, LEFT + pw / 2.0, HEIGHT - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(&chart.y_label)
    );
    for (i, series) in chart.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let n = series.values.len();
        let stride = n.div_ceil(MAX_POINTS).max(1);
        let mut pts = String::new();
        let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
        if n > 0 && idx.last() != Some(&(n - 1)) {
            idx.push(n - 1);
        }
        for k in idx {
            let v = series.values[k];
            if v.is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", sx((k + 1) as f64), sy(v));
            }
        }
        let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#, pts.trim_end());
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#, lx + 24.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 30.0, ly + 4.0, escape(&series.label));
    }
    s.push_str("</svg>\n");
    s
}

/// One trace file's running averages.
struct TraceColumns {
    avg_cost: Vec<f64>,
    avg_violation: Vec<f64>,
    bench_cost: Option<Vec<f64>>,
}

fn schema(path: &Path, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_trace(path: &Path) -> Result<TraceColumns> {
    let mut r = csv::Reader::from_path(path).map_err(|e| schema(path, e.to_string()))?;
    let headers = r.headers().map_err(|e| schema(path, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| schema(path, format!("missing column `{name}`")));
    for name in TRACE_HEADER {
        col(name)?;
    }
    let (ic, iv, ib) = (col("avg_cost")?, col("avg_violation")?, col("bench_cost")?);
    let mut out = TraceColumns {
        avg_cost: Vec::new(),
        avg_violation: Vec::new(),
        bench_cost: Some(Vec::new()),
    };
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| schema(path, e.to_string()))?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .parse()
                .map_err(|_| schema(path, format!("row {}: bad number in column {}", line + 2, headers.get(i).unwrap_or("?"))))
        };
        out.avg_cost.push(parse(ic)?);
        out.avg_violation.push(parse(iv)?);
        if rec.get(ib).unwrap_or("").is_empty() {
            out.bench_cost = None;
        } else if let Some(b) = out.bench_cost.as_mut() {
            b.push(parse(ib)?);
        }
    }
    Ok(out)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    v.sort();
    Ok(v)
}

/// `trace_tau{τ}_seed{s}.csv` → `(τ, s)`
fn parse_trace_name(name: &str) -> Option<(usize, u64)> {
    let rest = name.strip_prefix("trace_tau")?.strip_suffix(".csv")?;
    let (tau, seed) = rest.split_once("_seed")?;
    Some((tau.parse().ok()?, seed.parse().ok()?))
}

fn average(columns: &[&Vec<f64>]) -> Vec<f64> {
    let n = columns.iter().map(|c| c.len()).min().unwrap_or(0);
    (0..n).map(|i| columns.iter().map(|c| c[i]).sum::<f64>() / columns.len() as f64).collect()
}

/// Two charts per environment directory under `root`: running cost and
/// running constraint value, one series per (mode, τ) averaged over seeds,
/// plus the dynamic benchmark's running cost.
pub fn emit_plots(root: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for env_dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let env = env_dir.file_name().and_then(|n| n.to_str()).unwrap_or("env").to_string();
        // (mode, τ) → traces over seeds
        let mut groups: BTreeMap<(String, usize), Vec<(u64, TraceColumns)>> = BTreeMap::new();
        for mode_dir in sorted_entries(&env_dir)?.into_iter().filter(|p| p.is_dir()) {
            let mode = mode_dir.file_name().and_then(|n| n.to_str()).unwrap_or("mode").to_string();
            for f in sorted_entries(&mode_dir)? {
                let Some((tau, seed)) = f.file_name().and_then(|n| n.to_str()).and_then(parse_trace_name) else { continue };
                groups.entry((mode.clone(), tau)).or_default().push((seed, read_trace(&f)?));
            }
        }
        if groups.is_empty() {
            continue;
        }
        let mut cost = Chart {
            title: format!("{env}: running average cost"),
            y_label: "f̄(T)".into(),
            series: Vec::new(),
        };
        let mut vio = Chart {
            title: format!("{env}: running average constraint value"),
            y_label: "ḡ(T)".into(),
            series: Vec::new(),
        };
        let mut bench_by_seed: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for ((mode, tau), traces) in &groups {
            let label = format!("{mode}, τ={tau}");
            cost.series.push(Series {
                label: label.clone(),
                values: average(&traces.iter().map(|(_, t)| &t.avg_cost).collect::<Vec<_>>()),
                dashed: false,
            });
            vio.series.push(Series {
                label,
                values: average(&traces.iter().map(|(_, t)| &t.avg_violation).collect::<Vec<_>>()),
                dashed: false,
            });
            for (seed, t) in traces {
                if let Some(b) = &t.bench_cost {
                    bench_by_seed.entry(*seed).or_insert_with(|| running_mean(b));
                }
            }
        }
        if !bench_by_seed.is_empty() {
            cost.series.push(Series {
                label: "dynamic benchmark".into(),
                values: average(&bench_by_seed.values().collect::<Vec<_>>()),
                dashed: true,
            });
        }
        for (chart, suffix) in [(&cost, "cost"), (&vio, "violation")] {
            let p = root.join(format!("{env}_{suffix}.svg"));
            fs::write(&p, render_chart(chart)).map_err(|e| Error::io(&p, e))?;
            written.push(p);
        }
    }
    Ok(written)
}

fn running_mean(v: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            acc += x;
            acc / (i + 1) as f64
        })
        .collect()
}
