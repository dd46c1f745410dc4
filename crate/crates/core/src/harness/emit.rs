use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{CurvePoint, StepRecord};

pub const TRANSCRIPT_HEADER: [&str; 9] = [
    "agent",
    "problem",
    "step",
    "kind",
    "label",
    "attempt_selection",
    "attempt_value",
    "selection",
    "value",
];

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))
}

/// `problem,mean_error,n_agents,smoothed_error`, errors with six decimals.
pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let build = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record(["problem", "mean_error", "n_agents", "smoothed_error"])?;
        for c in curve {
            w.write_record([
                c.problem.to_string(),
                format!("{:.6}", c.mean_error),
                c.n_agents.to_string(),
                format!("{:.6}", c.smoothed_error),
            ])?;
        }
        Ok(())
    };
    build(&mut w).expect("writing to memory");
    finish(w).expect("csv output is utf-8")
}

pub fn parse_curve_csv(text: &str) -> Result<Vec<CurvePoint>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<CurvePoint>, _>>()
        .map_err(csv_err)
}

#[derive(Debug, Serialize, Deserialize)]
struct TranscriptRow<'a> {
    agent: usize,
    problem: usize,
    step: usize,
    kind: &'a str,
    label: &'a str,
    attempt_selection: &'a str,
    attempt_value: &'a str,
    selection: &'a str,
    value: &'a str,
}

pub fn transcript_csv<'a>(records: impl IntoIterator<Item = &'a StepRecord>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut wrote = false;
    for r in records {
        let row = TranscriptRow {
            agent: r.agent,
            problem: r.problem,
            step: r.step,
            kind: r.kind.as_str(),
            label: &r.label,
            attempt_selection: r.attempted.as_ref().map_or("", |s| s.selection.as_str()),
            attempt_value: r.attempted.as_ref().and_then(|s| s.value()).unwrap_or(""),
            selection: &r.applied.selection,
            value: r.applied.value().unwrap_or(""),
        };
        w.serialize(row).expect("writing to memory");
        wrote = true;
    }
    if !wrote {
        w.write_record(TRANSCRIPT_HEADER).expect("writing to memory");
    }
    finish(w).expect("csv output is utf-8")
}

/// A named curve for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(usize, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Error-rate-by-problem line plot with a dashed 10% mastery line.
pub fn svg_plot(series: &[Series], log_x: bool, title: &str) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (60.0, 170.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let max_x = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .max()
        .unwrap_or(1)
        .max(2) as f64;
    let fx = |x: f64| -> f64 {
        let t = if log_x { x.max(1.0).ln() / max_x.ln() } else { (x - 1.0) / (max_x - 1.0) };
        left + t * pw
    };
    let fy = |y: f64| top + (1.0 - y.clamp(0.0, 1.0)) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, left + pw / 2.0, escape(title));

    let mut ticks: Vec<f64> = Vec::new();
    if log_x {
        let mut t = 1.0;
        while t <= max_x {
            ticks.push(t);
            t *= 10.0;
        }
    } else {
        let step = (max_x / 5.0).ceil().max(1.0);
        let mut t = 1.0;
        while t <= max_x {
            ticks.push(t);
            t += step;
        }
    }
    for t in &ticks {
        let x = fx(*t);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{top}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            top + ph,
            top + ph + 16.0,
            *t as usize
        );
    }
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let y = fy(v);
        let _ = writeln!(
            out,
            r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0
        );
    }
    let y10 = fy(0.1);
    let _ = writeln!(
        out,
        r##"<line x1="{left}" y1="{y10:.1}" x2="{:.1}" y2="{y10:.1}" stroke="#444" stroke-dasharray="5,4"/>"##,
        left + pw
    );
    let _ = writeln!(
        out,
        r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>"##
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">Problem{}</text>"#,
        left + pw / 2.0,
        h - 12.0,
        if log_x { " (log scale)" } else { "" }
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(16,{:.1}) rotate(-90)" text-anchor="middle">Error rate</text>"#,
        top + ph / 2.0
    );

    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", fx(x as f64), fy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 16.0 + 20.0 * k as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::StepKind;
    use crate::model::Sai;

    #[test]
    fn curve_round_trip() {
        let curve: Vec<CurvePoint> = (1..=3)
            .map(|p| CurvePoint {
                problem: p,
                mean_error: 1.0 / p as f64,
                n_agents: 2,
                smoothed_error: 0.5,
            })
            .collect();
        let text = curve_csv(&curve);
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next().unwrap(), "problem,mean_error,n_agents,smoothed_error");
        assert_eq!(text.lines().nth(2).unwrap(), "2,0.500000,2,0.500000");
        let back = parse_curve_csv(&text).unwrap();
        assert_eq!(back.len(), 3);
        assert!((back[2].mean_error - 0.333333).abs() < 1e-9);
    }

    #[test]
    fn transcript_columns() {
        let r = StepRecord {
            agent: 0,
            problem: 1,
            step: 1,
            kind: StepKind::AttemptIncorrect,
            label: "add2".into(),
            attempted: Some(Sai::update("out1", "7")),
            applied: Sai::update("out1", "0"),
        };
        let text = transcript_csv([&r]);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRANSCRIPT_HEADER.join(","));
        assert_eq!(lines.next().unwrap(), "0,1,1,attempt-incorrect,add2,out1,7,out1,0");
        assert_eq!(transcript_csv([]).trim_end(), TRANSCRIPT_HEADER.join(","));
    }

    #[test]
    fn svg_is_well_formed() {
        let s = Series {
            name: "a<b".into(),
            points: (1..=50).map(|p| (p, 1.0 / p as f64)).collect(),
        };
        let svg = svg_plot(&[s], true, "t");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a&lt;b"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }
}
