//! Markdown summary and static SVG figures.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::cleaning::ExclusionRule;
use crate::eval::{EvalReport, RegressionRow};
use crate::vff::Binning;

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSummary {
    pub source: String,
    pub input: usize,
    pub kept: usize,
    pub by_rule: BTreeMap<ExclusionRule, usize>,
}

pub struct ReportInputs<'a> {
    pub sentences: usize,
    pub sources: &'a [SourceSummary],
    pub binning: &'a BTreeMap<String, Binning>,
    /// Per source, frames by descending count.
    pub frame_totals: &'a BTreeMap<String, Vec<(String, u64)>>,
    /// Output of [`render_eval_markdown`], if an evaluation was run.
    pub eval: Option<&'a str>,
}

/// Fixed-precision rendering that spells out non-finite values.
pub fn num(x: f64, decimals: usize) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        let s = format!("{x:.decimals$}");
        // avoid "-0.000"
        if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
            s.trim_start_matches('-').to_string()
        } else {
            s
        }
    }
}

pub fn p_value(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        num(p, 3)
    }
}

fn regression_table(out: &mut String, rows: &[&RegressionRow]) {
    out.push_str("| dataset | frame | source | PP merged | n | slope | t | p | r² |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        let c = &r.comparison.result;
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            r.dataset,
            r.frame,
            r.source,
            if r.relabel_pp { "yes" } else { "no" },
            c.n,
            num(c.slope, 3),
            num(c.t_slope, 3),
            p_value(c.p_value),
            num(c.r2, 3)
        );
    }
}

pub fn render_eval_markdown(e: &EvalReport) -> String {
    let mut out = String::new();
    let out = &mut out;
    let sections = [
        ("frame", "Per-frame comparison with broad-coverage norms"),
        ("intransitivity", "Intransitivity with and without PP merging"),
        ("np_sc", "NP/SC bias"),
        ("dative", "Dative DO/PO bias"),
    ];
    for (analysis, title) in sections {
        let rows: Vec<&RegressionRow> = e.regressions.iter().filter(|r| r.analysis == analysis).collect();
        let bayes: Vec<_> = e.bayes.iter().filter(|b| b.analysis == analysis).collect();
        if rows.is_empty() {
            continue;
        }
        let _ = writeln!(out, "## {title}\n");
        regression_table(out, &rows);
        if !bayes.is_empty() {
            out.push_str("\n| dataset | frame | model A | model B | n | log10 BF | evidence | favours |\n");
            out.push_str("|---|---|---|---|---|---|---|---|\n");
            for b in bayes {
                let favours = match b.bayes.winner {
                    crate::stats::Winner::A => b.model_a.as_str(),
                    crate::stats::Winner::B => b.model_b.as_str(),
                    crate::stats::Winner::Neither => "neither",
                };
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} | {} | {} | {} |",
                    b.dataset,
                    b.frame,
                    b.model_a,
                    b.model_b,
                    b.n,
                    num(b.bayes.log10_bf, 3),
                    b.bayes.jeffreys_label,
                    favours
                );
            }
        }
        out.push('\n');
    }
    if !e.source_agreement.is_empty() {
        out.push_str("## Agreement between annotators\n\n| source A | source B | shared sentences | agreement |\n|---|---|---|---|\n");
        for a in &e.source_agreement {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} |",
                a.source_a,
                a.source_b,
                a.n,
                num(a.rate, 3)
            );
        }
        out.push('\n');
    }
    if !e.human.is_empty() {
        out.push_str("## Agreement with human annotation\n\n| source | verb | n | agreement |\n|---|---|---|---|\n");
        for h in &e.human {
            for v in &h.agreement.per_verb {
                let _ = writeln!(out, "| {} | {} | {} | {} |", h.source, v.verb, v.n, num(v.rate, 3));
            }
            let _ = writeln!(
                out,
                "| {} | all | {} | {} |",
                h.source,
                h.agreement.n,
                num(h.agreement.overall, 3)
            );
        }
        out.push('\n');
    }
    if !e.skipped.is_empty() {
        out.push_str("## Skipped analyses\n\n");
        for s in &e.skipped {
            let _ = writeln!(out, "- {s}");
        }
        out.push('\n');
    }
    std::mem::take(out)
}

pub fn render_markdown(inp: &ReportInputs<'_>) -> String {
    let mut out = String::from("# Verb frame frequency report\n\n");
    let _ = writeln!(out, "Sentences in corpus: {}\n", inp.sentences);

    if !inp.sources.is_empty() {
        out.push_str("## Exclusions\n\n| source | annotated | kept | excluded | percent |");
        for r in ExclusionRule::ALL {
            let _ = write!(out, " {r} |");
        }
        out.push_str("\n|---|---|---|---|---|");
        out.push_str(&"---|".repeat(ExclusionRule::ALL.len()));
        out.push('\n');
        for s in inp.sources {
            let excluded = s.input - s.kept;
            let pct = if s.input == 0 {
                0.0
            } else {
                100.0 * excluded as f64 / s.input as f64
            };
            let _ = write!(
                out,
                "| {} | {} | {} | {} | {} |",
                s.source,
                s.input,
                s.kept,
                excluded,
                num(pct, 3)
            );
            for r in ExclusionRule::ALL {
                let _ = write!(out, " {} |", s.by_rule.get(&r).copied().unwrap_or(0));
            }
            out.push('\n');
        }
        out.push('\n');
    }

    if !inp.binning.is_empty() {
        out.push_str(
            "## Low-frequency binning\n\n| source | percentile | threshold | frames binned |\n|---|---|---|---|\n",
        );
        for (s, b) in inp.binning {
            let _ = writeln!(
                out,
                "| {s} | {} | {} | {} |",
                num(b.percentile, 1),
                b.threshold,
                b.binned.len()
            );
        }
        out.push('\n');
    }

    for (source, frames) in inp.frame_totals {
        let _ = writeln!(
            out,
            "## Most frequent frames: {source}\n\n| rank | frame | count |\n|---|---|---|"
        );
        for (i, (f, c)) in frames.iter().take(10).enumerate() {
            let _ = writeln!(out, "| {} | {f} | {c} |", i + 1);
        }
        out.push('\n');
    }

    match inp.eval {
        Some(e) => out.push_str(e),
        None => out.push_str("No evaluation was run.\n"),
    }
    out
}

const W: f64 = 360.0;
const H: f64 = 300.0;
const M: f64 = 45.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

/// Scatter of (label, x, y) points with an optional fitted line.
pub fn scatter_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[(String, f64, f64)],
    fit: Option<(f64, f64)>,
) -> String {
    let (x0, x1) = range(points.iter().map(|p| p.1));
    let (y0, y1) = range(points.iter().map(|p| p.2));
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"18\" text-anchor=\"middle\">{}</text>",
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        "<line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        H - M,
        W - M,
        H - M
    );
    let _ = writeln!(
        s,
        "<line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>",
        H - M
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        W / 2.0,
        H - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        "<text x=\"12\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 12 {})\">{}</text>",
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (v, x, y) in [(x0, x0, y0), (x1, x1, y0)] {
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            sx(x),
            H - M + 14.0,
            num(v, 2)
        );
        let _ = y;
    }
    for v in [y0, y1] {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            M - 4.0,
            sy(v) + 4.0,
            num(v, 2)
        );
    }
    if let Some((slope, intercept)) = fit.filter(|(a, b)| a.is_finite() && b.is_finite()) {
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#c33\"/>",
            sx(x0),
            sy(intercept + slope * x0),
            sx(x1),
            sy(intercept + slope * x1)
        );
    }
    for (label, x, y) in points.iter().filter(|p| p.1.is_finite() && p.2.is_finite()) {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#36c\"><title>{}</title></circle>",
            sx(*x),
            sy(*y),
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Horizontal bar chart of frame counts.
pub fn bar_svg(title: &str, bars: &[(String, u64)]) -> String {
    let row = 18.0;
    let h = 40.0 + row * bars.len() as f64;
    let max = bars.iter().map(|b| b.1).max().unwrap_or(1).max(1) as f64;
    let left = 110.0;
    let span = W - left - 50.0;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{h}\" viewBox=\"0 0 {W} {h}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"18\" text-anchor=\"middle\">{}</text>",
        W / 2.0,
        escape(title)
    );
    for (i, (label, c)) in bars.iter().enumerate() {
        let y = 30.0 + row * i as f64;
        let w = *c as f64 / max * span;
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            left - 4.0,
            y + 12.0,
            escape(label)
        );
        let _ = writeln!(
            s,
            "<rect x=\"{left}\" y=\"{y:.1}\" width=\"{w:.2}\" height=\"{}\" fill=\"#36c\"/>",
            row - 4.0
        );
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.1}\">{c}</text>", left + w + 4.0, y + 12.0);
    }
    s.push_str("</svg>\n");
    s
}
