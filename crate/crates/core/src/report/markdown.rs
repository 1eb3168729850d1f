use std::fmt::Write;

use super::{AssessmentReport, Thresholds, Verdict};
use crate::metrics::Matrix;
use crate::scenario::FeatureId;

fn f2(x: f64) -> String {
    format!("{x:.2}")
}

fn opt2(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), f2)
}

fn matrix_table(out: &mut String, labels: &[String], m: &Matrix) {
    let _ = writeln!(out, "| | {} |", labels.join(" | "));
    let _ = writeln!(out, "|---|{}", "---|".repeat(labels.len()));
    for (label, row) in labels.iter().zip(m) {
        let cells: Vec<String> = row.iter().map(|v| v.map_or_else(|| "-".into(), f2)).collect();
        let _ = writeln!(out, "| {label} | {} |", cells.join(" | "));
    }
    out.push('\n');
}

fn codes(features: &[FeatureId]) -> Vec<String> {
    features.iter().map(|f| f.code().to_string()).collect()
}

fn provisional(name: &str) -> &'static str {
    if Thresholds::PROVISIONAL.contains(&name) {
        " (provisional)"
    } else {
        ""
    }
}

fn verdict(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "**PASS**",
        Verdict::Fail => "**FAIL**",
        Verdict::Undetermined => "undetermined",
    }
}

/// Human-readable summary of the report.
pub fn render_markdown(r: &AssessmentReport) -> String {
    let mut out = String::new();
    let t = &r.thresholds;
    let p = &r.provenance;
    let _ = writeln!(out, "# Embedding assessment: `{}`\n", p.model_id);
    let _ = writeln!(out, "- tool version: {}", p.tool_version);
    let _ = writeln!(out, "- dataset digest: `{}`", p.dataset_digest);
    let _ = writeln!(out, "- config digest: `{}`", p.config_digest);
    for (name, seed) in &p.seeds {
        let _ = writeln!(out, "- seed `{name}`: {seed}");
    }
    out.push('\n');

    let _ = writeln!(out, "## Verdicts\n");
    let _ = writeln!(out, "| Criterion | Rule | Raw | Embedded | Verdict |");
    let _ = writeln!(out, "|---|---|---|---|---|");
    let d = &r.decoding;
    let _ = writeln!(
        out,
        "| Disentanglement | mean AUC > {} | {} | {} | {} |",
        f2(t.decoding_auc),
        f2(d.mean.raw),
        f2(d.mean.embedded),
        verdict(r.verdicts.disentanglement)
    );
    let s = &r.dynamics.mean_smoothness;
    let _ = writeln!(
        out,
        "| Temporal preservation | smoothness >= raw - {}{} | {} | {} | {} |",
        f2(t.temporal_margin),
        provisional("temporal_margin"),
        f2(s.raw),
        f2(s.embedded),
        verdict(r.verdicts.temporal_preservation)
    );
    let c = &r.scenarios.mean_off_diagonal;
    let _ = writeln!(
        out,
        "| Scenario discrimination | similarity <= raw + {}{} | {} | {} | {} |",
        f2(t.scenario_margin),
        provisional("scenario_margin"),
        opt2(c.raw),
        opt2(c.embedded),
        verdict(r.verdicts.scenario_discrimination)
    );
    out.push('\n');

    let _ = writeln!(out, "Feature codes:");
    for f in &r.entanglement.features {
        let _ = writeln!(out, "- {}: {}", f.code(), f.name());
    }
    out.push('\n');

    let e = &r.entanglement;
    let _ = writeln!(out, "## Feature entanglement\n");
    let _ = writeln!(
        out,
        "Grand mean |correlation|: raw {}, embedded {}.\n",
        f2(e.grand_mean.raw),
        f2(e.grand_mean.embedded)
    );
    let labels = codes(&e.features);
    for s in &e.scenarios {
        let _ = writeln!(out, "### {} (embedded)\n", s.scenario);
        matrix_table(&mut out, &labels, &s.matrices.embedded);
    }

    let rc = &r.reconstruction;
    let _ = writeln!(out, "## Cross-feature reconstruction\n");
    let _ = writeln!(out, "Held-out R^2, rows are sources and columns targets ({} train / {} test).\n", rc.n_train, rc.n_test);
    let labels = codes(&rc.features);
    let _ = writeln!(out, "### Raw\n");
    matrix_table(&mut out, &labels, &rc.test_r2.raw);
    let _ = writeln!(out, "### Embedded\n");
    matrix_table(&mut out, &labels, &rc.test_r2.embedded);

    let dy = &r.dynamics;
    let _ = writeln!(out, "## Temporal dynamics\n");
    let _ = writeln!(
        out,
        "Components for {:.0}% variance: raw {}, embedded {}. Smoothness: raw {}, embedded {}.\n",
        dy.variance_threshold * 100.0,
        f2(dy.mean_dimensionality.raw),
        f2(dy.mean_dimensionality.embedded),
        f2(dy.mean_smoothness.raw),
        f2(dy.mean_smoothness.embedded)
    );
    let _ = writeln!(out, "| Scenario | Patient | Dims raw | Dims emb | Smooth raw | Smooth emb |");
    let _ = writeln!(out, "|---|---|---|---|---|---|");
    for en in &dy.entries {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |",
            en.scenario,
            en.patient.as_deref().unwrap_or("(mean)"),
            en.dimensionality.raw,
            en.dimensionality.embedded,
            f2(en.smoothness.raw),
            f2(en.smoothness.embedded)
        );
    }
    out.push('\n');

    let sc = &r.scenarios;
    let _ = writeln!(out, "## Scenario similarity\n");
    let _ = writeln!(out, "### Embedded cosine similarity\n");
    matrix_table(&mut out, &sc.scenarios, &sc.cosine.embedded);

    let _ = writeln!(out, "## Feature decoding\n");
    let _ = writeln!(
        out,
        "Window {}: raw mean AUC = {} ± {}, embedded mean AUC = {} ± {}.\n",
        d.window,
        f2(d.mean.raw),
        f2(d.std.raw),
        f2(d.mean.embedded),
        f2(d.std.embedded)
    );
    if d.labels_permuted {
        let _ = writeln!(out, "Labels were permuted before fitting.\n");
    }
    matrix_table(&mut out, &codes(&d.features), &d.auc.embedded);

    let notices: Vec<&String> = e
        .notices
        .iter()
        .chain(&rc.notices)
        .chain(&dy.notices)
        .chain(&sc.notices)
        .chain(&d.notices)
        .collect();
    if !notices.is_empty() || !dy.negative_smoothness.is_empty() {
        let _ = writeln!(out, "## Notices\n");
        for n in notices {
            let _ = writeln!(out, "- {n}");
        }
        for n in &dy.negative_smoothness {
            let _ = writeln!(out, "- negative smoothness: {n}");
        }
    }
    out
}
