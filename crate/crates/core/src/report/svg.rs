//! Dependency-free SVG figures. Heatmap colour depends only on the cell
//! value, so the same number looks the same in every panel.

use std::fmt::Write;
use std::str::FromStr;

use super::{AssessmentReport, ReportError};
use crate::metrics::{Matrix, Paired};
use crate::scenario::FeatureId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Panel {
    Entanglement,
    Reconstruction,
    Dynamics,
    Scenarios,
    Decoding,
}

impl Panel {
    pub const ALL: [Panel; 5] = [Panel::Entanglement, Panel::Reconstruction, Panel::Dynamics, Panel::Scenarios, Panel::Decoding];

    pub fn name(self) -> &'static str {
        match self {
            Panel::Entanglement => "entanglement",
            Panel::Reconstruction => "reconstruction",
            Panel::Dynamics => "dynamics",
            Panel::Scenarios => "scenarios",
            Panel::Decoding => "decoding",
        }
    }
}

impl FromStr for Panel {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, ReportError> {
        Panel::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| ReportError::UnknownPanel(s.to_string()))
    }
}

const CELL: f64 = 28.0;
const MARGIN: f64 = 70.0;
const GAP: f64 = 40.0;
const TITLE: f64 = 24.0;

/// Diverging palette on [-1, 1]: blue, white, red. Missing cells are grey.
pub(crate) fn colour(v: Option<f64>) -> String {
    let Some(v) = v.filter(|v| v.is_finite()) else {
        return "#d9d9d9".into();
    };
    let v = v.clamp(-1.0, 1.0);
    let (r, g, b) = if v >= 0.0 {
        (255.0, 255.0 * (1.0 - v), 255.0 * (1.0 - v))
    } else {
        (255.0 * (1.0 + v), 255.0 * (1.0 + v), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Canvas {
    body: String,
    width: f64,
    height: f64,
}

impl Canvas {
    fn new() -> Self {
        Self { body: String::new(), width: 0.0, height: 0.0 }
    }

    fn grow(&mut self, x: f64, y: f64) {
        self.width = self.width.max(x);
        self.height = self.height.max(y);
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{}</text>"#,
            escape(s)
        );
    }

    /// Draws `m` with its top-left corner at (x0, y0); returns the bottom
    /// edge.
    fn heatmap(&mut self, x0: f64, y0: f64, title: &str, view: &str, labels: &[String], m: &Matrix) -> f64 {
        self.text(x0 + MARGIN, y0 + 14.0, "start", title);
        let gx = x0 + MARGIN;
        let gy = y0 + TITLE + 6.0;
        let _ = writeln!(self.body, r#"<g class="heatmap" data-view="{view}">"#);
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let value = v.map_or_else(|| "".to_string(), |v| format!("{v}"));
                let _ = writeln!(
                    self.body,
                    r#"<rect x="{:.1}" y="{:.1}" width="{CELL}" height="{CELL}" fill="{}" data-row="{i}" data-col="{j}" data-value="{value}"/>"#,
                    gx + j as f64 * CELL,
                    gy + i as f64 * CELL,
                    colour(*v)
                );
            }
        }
        self.body.push_str("</g>\n");
        for (k, label) in labels.iter().enumerate() {
            self.text(gx - 4.0, gy + (k as f64 + 0.65) * CELL, "end", label);
            self.text(gx + (k as f64 + 0.5) * CELL, gy + labels.len() as f64 * CELL + 14.0, "middle", label);
        }
        let right = gx + labels.len().max(m.len()) as f64 * CELL + 10.0;
        let bottom = gy + labels.len().max(m.len()) as f64 * CELL + 24.0;
        self.grow(right, bottom);
        bottom
    }

    fn pair(&mut self, y0: f64, title: &str, labels: &[String], m: &Paired<Matrix>) -> f64 {
        let n = labels.len().max(m.raw.len()) as f64;
        let half = MARGIN + n * CELL + GAP;
        let a = self.heatmap(0.0, y0, &format!("{title}: raw"), "raw", labels, &m.raw);
        let b = self.heatmap(half, y0, &format!("{title}: embedded"), "embedded", labels, &m.embedded);
        a.max(b) + GAP / 2.0
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width.max(1.0),
            h = self.height.max(1.0)
        )
    }
}

fn codes(features: &[FeatureId]) -> Vec<String> {
    features.iter().map(|f| f.code().to_string()).collect()
}

const TRAJ_W: f64 = 220.0;
const TRAJ_H: f64 = 160.0;

fn dynamics(r: &AssessmentReport, c: &mut Canvas) {
    let entries = &r.dynamics.entries;
    // One scale for every polyline so raw and embedded are comparable.
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for e in entries {
        for t in [&e.trajectory.raw, &e.trajectory.embedded] {
            for (k, comp) in t.iter().take(2).enumerate() {
                for v in comp.iter().filter(|v| v.is_finite()) {
                    lo[k] = lo[k].min(*v);
                    hi[k] = hi[k].max(*v);
                }
            }
        }
    }
    let span = |k: usize| if hi[k] > lo[k] { hi[k] - lo[k] } else { 1.0 };
    let lo = lo.map(|v| if v.is_finite() { v } else { 0.0 });
    for (row, e) in entries.iter().enumerate() {
        let y0 = row as f64 * (TRAJ_H + GAP + TITLE);
        let label = match &e.patient {
            Some(p) => format!("{} / {p}", e.scenario),
            None => e.scenario.clone(),
        };
        for (col, (view, t)) in [("raw", &e.trajectory.raw), ("embedded", &e.trajectory.embedded)].into_iter().enumerate() {
            let x0 = MARGIN + col as f64 * (TRAJ_W + GAP);
            c.text(x0, y0 + 14.0, "start", &format!("{label}: {view}"));
            let gy = y0 + TITLE;
            let _ = writeln!(c.body, r#"<g transform="translate({x0:.1},{gy:.1})">"#);
            let _ = writeln!(
                c.body,
                r##"<rect width="{TRAJ_W}" height="{TRAJ_H}" fill="none" stroke="#999999"/>"##
            );
            let n = t.first().map_or(0, Vec::len);
            let point = |i: usize| {
                let px = t[0][i];
                let py = t.get(1).map_or(0.0, |c| c[i]);
                let x = (px - lo[0]) / span(0) * TRAJ_W;
                let y = TRAJ_H - (py - lo[1]) / span(1) * TRAJ_H;
                format!("{x:.2},{y:.2}")
            };
            let points: Vec<String> = (0..n).map(point).collect();
            let _ = writeln!(
                c.body,
                r##"<polyline class="trajectory" data-view="{view}" data-entry="{row}" fill="none" stroke="#1f4e99" stroke-width="0.8" points="{}"/>"##,
                points.join(" ")
            );
            c.body.push_str("</g>\n");
            c.grow(x0 + TRAJ_W + 10.0, gy + TRAJ_H + 10.0);
        }
    }
}

/// Renders one figure panel as a standalone SVG document.
pub fn render_svg(r: &AssessmentReport, panel: Panel) -> String {
    let mut c = Canvas::new();
    match panel {
        Panel::Entanglement => {
            let labels = codes(&r.entanglement.features);
            let mut y = 0.0;
            for s in &r.entanglement.scenarios {
                y = c.pair(y, &s.scenario, &labels, &s.matrices);
            }
        }
        Panel::Reconstruction => {
            c.pair(0.0, "held-out R^2", &codes(&r.reconstruction.features), &r.reconstruction.test_r2);
        }
        Panel::Dynamics => dynamics(r, &mut c),
        Panel::Scenarios => {
            c.pair(0.0, "cosine similarity", &r.scenarios.scenarios, &r.scenarios.cosine);
        }
        Panel::Decoding => {
            c.pair(0.0, "decoding AUC", &codes(&r.decoding.features), &r.decoding.auc);
        }
    }
    c.finish()
}
