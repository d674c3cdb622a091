//! CSV tables and SVG plots. CSVs are the authoritative output; plots are
//! for reading.

use std::fmt::Write as _;
use std::path::Path;

use wppg_core::entropy::{EntropyRow, REPORT_COLUMNS};
use wppg_core::metrics::{ConfusionMatrix, Metrics, RocCurve};

use crate::error::{CliError, CliResult};

pub const METRIC_COLUMNS: [&str; 5] = ["Accuracy", "Precision", "Sensitivity", "F1_score", "Specificity"];
/// Classifier order of the per-q tables.
pub const Q_ORDER: [usize; 4] = [1, 3, 5, 7];
/// Written in place of a metric whose denominator is zero.
pub const UNDEFINED: &str = "NA";

/// The three evaluation branches, in plotting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Branch {
    Ecg,
    PpgRestored,
    PpgRaw,
}

impl Branch {
    pub const ALL: [Branch; 3] = [Branch::Ecg, Branch::PpgRestored, Branch::PpgRaw];

    /// File-name stem.
    pub fn key(self) -> &'static str {
        match self {
            Branch::Ecg => "ecg",
            Branch::PpgRestored => "ppg_restored",
            Branch::PpgRaw => "ppg_raw",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Branch::Ecg => "ECG",
            Branch::PpgRestored => "Restored PPG",
            Branch::PpgRaw => "Raw PPG",
        }
    }
}

/// `<branch>_split<s>_q<q>`, the stem of every per-model file.
pub fn stem(branch: Branch, split: u8, q: usize) -> String {
    format!("{}_split{split}_q{q}", branch.key())
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |x| format!("{x:.4}"))
}

fn row(out: &mut String, name: &str, m: &Metrics) {
    out.push_str(name);
    for v in m.columns() {
        out.push(',');
        out.push_str(&cell(v));
    }
    out.push('\n');
}

fn header(first: &str) -> String {
    format!("{first},{}\n", METRIC_COLUMNS.join(","))
}

pub const AF_CLASSES: [&str; 2] = ["NonAF", "AF"];
pub const QUALITY_CLASSES: [&str; 2] = ["Acceptable", "Corrupted"];

/// Per-class rows followed by the support-weighted average. Class 1 is
/// the positive class.
pub fn metrics_csv(classes: [&str; 2], per_class: &[Metrics; 2], weighted: &Metrics) -> String {
    let mut s = header("Class");
    row(&mut s, classes[0], &per_class[0]);
    row(&mut s, classes[1], &per_class[1]);
    row(&mut s, "Weighted Average", weighted);
    s
}

/// Weighted rows for each q that has results, in Q1, Q3, Q5, Q7 order.
pub fn q_table_csv(rows: &[(usize, Metrics)]) -> String {
    let mut s = header("Classifier");
    for q in Q_ORDER {
        if let Some((_, m)) = rows.iter().find(|(rq, _)| *rq == q) {
            row(&mut s, &format!("Q{q}"), m);
        }
    }
    s
}

/// One weighted row per branch, with the AUC appended.
pub fn comparison_csv(rows: &[(Branch, Metrics, Option<f64>)]) -> String {
    let mut s = format!("Branch,{},AUC\n", METRIC_COLUMNS.join(","));
    for (b, m, auc) in rows {
        s.push_str(b.title());
        for v in m.columns() {
            s.push(',');
            s.push_str(&cell(v));
        }
        s.push(',');
        s.push_str(&cell(*auc));
        s.push('\n');
    }
    s
}

/// Rows are actual classes, columns predicted classes.
pub fn confusion_csv(classes: [&str; 2], cm: &ConfusionMatrix) -> String {
    let [n, p] = classes;
    format!(
        "actual,predicted_{n},predicted_{p}\n{n},{},{}\n{p},{},{}\n",
        cm.tn, cm.fp, cm.fn_, cm.tp
    )
}

pub fn roc_csv(curve: &RocCurve) -> String {
    let mut s = String::from("fpr,tpr\n");
    for (x, y) in &curve.points {
        writeln!(s, "{x:.6},{y:.6}").unwrap();
    }
    s
}

pub fn entropy_csv(rows: &[EntropyRow]) -> String {
    let mut s = format!("Set,{},segments", REPORT_COLUMNS.join(","));
    for c in REPORT_COLUMNS {
        write!(s, ",undefined_{c}").unwrap();
    }
    s.push('\n');
    for r in rows {
        s.push_str(&r.name);
        for m in r.means {
            s.push(',');
            s.push_str(&m.map_or_else(|| UNDEFINED.to_string(), |v| format!("{v:.6}")));
        }
        write!(s, ",{}", r.segments).unwrap();
        for u in r.undefined {
            write!(s, ",{u}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// Training log with one row per epoch.
pub fn log_csv(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = format!("{header}\n");
    for (epoch, r) in rows.into_iter().enumerate() {
        write!(s, "{}", epoch + 1).unwrap();
        for v in r {
            write!(s, ",{v:.6}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// Reads the weighted row back from a metrics CSV written by [`metrics_csv`].
pub fn parse_weighted(csv: &str) -> Option<Metrics> {
    let line = csv.lines().find(|l| l.starts_with("Weighted Average,"))?;
    let vals: Vec<Option<f64>> = line
        .split(',')
        .skip(1)
        .map(|c| if c == UNDEFINED { Some(None) } else { c.parse().ok().map(Some) })
        .collect::<Option<_>>()?;
    let [accuracy, precision, recall, f1, specificity]: [Option<f64>; 5] = vals.try_into().ok()?;
    Some(Metrics {
        accuracy,
        precision,
        recall,
        specificity,
        f1,
    })
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    std::fs::write(path, text).map_err(CliError::io(path))
}

const PALETTE: [&str; 4] = ["#1b6ca8", "#d1495b", "#2a9d8f", "#6c757d"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// ROC curves on the unit square with a chance diagonal.
pub fn roc_svg(title: &str, curves: &[(&str, &RocCurve, f64)]) -> String {
    let (w, h, m) = (420.0, 420.0, 50.0);
    let side = w - 2.0 * m;
    let px = |x: f64| m + x * side;
    let py = |y: f64| h - m - y * side;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="25" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, esc(title)).unwrap();
    writeln!(
        s,
        r#"<rect x="{m}" y="{m}" width="{side}" height="{side}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 4"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    )
    .unwrap();
    for t in 0..=4 {
        let v = t as f64 / 4.0;
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{v:.2}</text>"#, px(v), h - m + 16.0).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"#, m - 6.0, py(v) + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">False positive rate</text>"#, w / 2.0, h - 12.0).unwrap();
    writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">True positive rate</text>"#,
        h / 2.0,
        h / 2.0
    )
    .unwrap();
    for (i, (name, curve, auc)) in curves.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = curve.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
            pts.join(" ")
        )
        .unwrap();
        let ly = py(0.0) - 12.0 - 16.0 * (curves.len() - 1 - i) as f64;
        writeln!(
            s,
            r#"<text x="{:.1}" y="{ly:.1}" text-anchor="end" fill="{colour}">{} (AUC {auc:.3})</text>"#,
            px(1.0) - 6.0,
            esc(name)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Grouped bars: one group per metric, one bar per series. Undefined
/// values leave a gap.
pub fn grouped_bar_svg(title: &str, series: &[(&str, [Option<f64>; 5])]) -> String {
    let (w, h, m) = (640.0, 380.0, 50.0);
    let plot_w = w - 2.0 * m;
    let plot_h = h - 2.0 * m - 30.0;
    let base = m + 20.0 + plot_h;
    let group_w = plot_w / METRIC_COLUMNS.len() as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="25" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, esc(title)).unwrap();
    for t in 0..=5 {
        let v = 20.0 * t as f64;
        let y = base - v / 100.0 * plot_h;
        writeln!(s, r##"<line x1="{m}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/>"##, w - m).unwrap();
        writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.0}</text>"#, m - 6.0, y + 4.0).unwrap();
    }
    for (g, name) in METRIC_COLUMNS.iter().enumerate() {
        let gx = m + g as f64 * group_w + group_w * 0.1;
        for (k, (_, vals)) in series.iter().enumerate() {
            if let Some(v) = vals[g] {
                let bh = v.clamp(0.0, 100.0) / 100.0 * plot_h;
                writeln!(
                    s,
                    r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{bh:.1}" fill="{}"/>"#,
                    gx + k as f64 * bar_w,
                    base - bh,
                    bar_w * 0.95,
                    PALETTE[k % PALETTE.len()]
                )
                .unwrap();
            }
        }
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{name}</text>"#,
            m + (g as f64 + 0.5) * group_w,
            base + 16.0
        )
        .unwrap();
    }
    writeln!(s, r#"<line x1="{m}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#, w - m).unwrap();
    for (k, (name, _)) in series.iter().enumerate() {
        let x = m + k as f64 * 150.0;
        writeln!(
            s,
            r#"<rect x="{x}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            h - 24.0,
            PALETTE[k % PALETTE.len()],
            x + 16.0,
            h - 14.0,
            esc(name)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}
