//! Minimal deterministic SVG charts for the detection timeline and the
//! confidence-window sweep.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::eval::EvalReport;
use crate::io::WindowRecord;

const W: f64 = 900.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        let span = if self.x1 > self.x0 { self.x1 - self.x0 } else { 1.0 };
        PAD + (v - self.x0) / span * (W - 2.0 * PAD)
    }

    fn y(&self, v: f64) -> f64 {
        let span = if self.y1 > self.y0 { self.y1 - self.y0 } else { 1.0 };
        H - PAD - (v - self.y0) / span * (H - 2.0 * PAD)
    }
}

fn header(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<path d="M{PAD} {PAD} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 15.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Cluster membership over time. Each macro-cluster gets its own level
/// (outliers on the bottom level); windows ending within `pre_span` seconds
/// before an onset are drawn as crosses.
pub fn timeline_svg(records: &[WindowRecord], onsets: &[f64], pre_span: f64) -> String {
    let mut levels: BTreeMap<Option<u64>, usize> = BTreeMap::new();
    for r in records {
        levels.insert(r.macro_id, 0);
    }
    for (i, v) in levels.values_mut().enumerate() {
        *v = i;
    }
    let (x0, x1) = records
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.time_sec), b.max(r.time_sec)));
    let frame = if records.is_empty() {
        Frame { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 }
    } else {
        Frame { x0: x0 / 3600.0, x1: x1 / 3600.0, y0: -0.5, y1: levels.len() as f64 - 0.5 }
    };
    let mut out = String::new();
    header(&mut out, "Online clustering timeline", "time (h)", "cluster");
    for (id, &lvl) in &levels {
        let label = id.map_or("outlier".to_string(), |m| m.to_string());
        let _ = writeln!(
            out,
            r#"<text class="level" x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
            PAD - 6.0,
            frame.y(lvl as f64) + 4.0
        );
    }
    for &o in onsets {
        let x = frame.x(o / 3600.0);
        if (PAD..=W - PAD).contains(&x) && !records.is_empty() {
            let _ = writeln!(out, r#"<line class="onset" x1="{x:.2}" y1="{PAD}" x2="{x:.2}" y2="{}" stroke="red" stroke-dasharray="4 3"/>"#, H - PAD);
        }
    }
    for r in records {
        let x = frame.x(r.time_sec / 3600.0);
        let y = frame.y(levels[&r.macro_id] as f64);
        let pre = onsets.iter().any(|&o| r.time_sec >= o - pre_span && r.time_sec < o);
        if pre {
            let _ = writeln!(
                out,
                r#"<path class="pre" d="M{:.2} {:.2} l6 6 m0 -6 l-6 6" stroke="crimson" stroke-width="1.5"/>"#,
                x - 3.0,
                y - 3.0
            );
        } else {
            let _ = writeln!(out, r#"<circle class="win" cx="{x:.2}" cy="{y:.2}" r="2.5" fill="steelblue"/>"#);
        }
    }
    out.push_str("</svg>\n");
    out
}

type Metric = Box<dyn Fn(&EvalReport) -> Option<f64>>;

/// Recall, specificity, AUC and mean lead (minutes, right scale) against k.
pub fn sweep_svg(reports: &[(usize, EvalReport)]) -> String {
    let ks: Vec<f64> = reports.iter().map(|(k, _)| *k as f64).collect();
    let x0 = ks.iter().cloned().fold(f64::INFINITY, f64::min);
    let x1 = ks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let frame = if reports.is_empty() {
        Frame { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 }
    } else {
        Frame { x0, x1, y0: 0.0, y1: 1.0 }
    };
    let lead_max = reports.iter().filter_map(|(_, r)| r.mean_lead_min).fold(3.0, f64::max);
    let series: [(&str, Metric); 4] = [
        ("recall", Box::new(|r| r.recall)),
        ("specificity", Box::new(|r| r.specificity)),
        ("auc", Box::new(|r| r.auc)),
        ("earliest (min)", Box::new(move |r| r.mean_lead_min.map(|v| v / lead_max))),
    ];
    let colors = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd"];
    let mut out = String::new();
    header(&mut out, "Metrics across confidence windows", "confidence window k", "rate / lead");
    for (i, (&k, _)) in ks.iter().zip(reports).enumerate() {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, frame.x(k), H - PAD + 16.0, reports[i].0);
    }
    for (i, (name, f)) in series.iter().enumerate() {
        let pts: Vec<String> = reports
            .iter()
            .filter_map(|(k, r)| f(r).map(|v| format!("{:.2},{:.2}", frame.x(*k as f64), frame.y(v))))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" data-name="{name}" points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            pts.join(" "),
            colors[i]
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{}">{}</text>"#,
            W - PAD - 120.0,
            PAD + 16.0 * i as f64,
            colors[i],
            escape(name)
        );
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}">lead axis max {lead_max:.2} min</text>"#, W - PAD - 120.0, PAD + 70.0);
    out.push_str("</svg>\n");
    out
}
