//! Output artifacts: run summaries (JSON), verification check tables, and
//! optional SVG regret charts. Every artifact embeds the config hash and
//! tool version, and all formatting is deterministic so identical runs
//! produce identical bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use waa_core::harness::{AuditReport, UniversalityVerdict};

use crate::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub tool_version: &'static str,
    pub config_hash: String,
    pub mode: &'static str,
    pub horizon: u64,
    pub pool_size: usize,
    pub loss_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_override: Option<u64>,
    pub traces: Vec<TraceSummary>,
}

#[derive(Debug, Serialize)]
pub struct TraceSummary {
    pub scenario: String,
    pub rule: String,
    pub file: String,
    pub final_learner_loss: f64,
    pub final_rule_loss: f64,
    pub final_best_expert_loss: f64,
    pub nearest_expert: usize,
    pub nearest_delta: f64,
    pub nearest_prior: f64,
    /// First round from which the running average regret stays within
    /// `2^{-level}` through the horizon.
    pub first_round_within_tolerance: Option<u64>,
    pub audit: AuditSummary,
    pub universality: UniversalitySummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampled: Option<SampledSummary>,
}

#[derive(Debug, Serialize)]
pub struct AuditSummary {
    pub all_ok: bool,
    pub min_lemma9_gap: f64,
    pub min_lemma9_round: u64,
    pub worst_lemma5_margin: f64,
    pub worst_lemma5_round: u64,
    pub worst_convexity_margin: f64,
    pub auditor_max_discrepancy: f64,
}

impl From<&AuditReport> for AuditSummary {
    fn from(r: &AuditReport) -> Self {
        Self {
            all_ok: r.all_ok(),
            min_lemma9_gap: r.min_lemma9_gap,
            min_lemma9_round: r.min_lemma9_round,
            worst_lemma5_margin: r.worst_lemma5_margin,
            worst_lemma5_round: r.worst_lemma5_round,
            worst_convexity_margin: r.worst_convexity_margin,
            auditor_max_discrepancy: r.auditor_max_discrepancy,
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum UniversalitySummary {
    Feasible {
        epsilon: f64,
        analytic_threshold: u64,
        #[serde(skip_serializing_if = "Option::is_none")]
        empirical_threshold: Option<u64>,
        delta: f64,
        constant: f64,
        covered: bool,
    },
    Infeasible {
        epsilon: f64,
        delta: f64,
        required_grid: usize,
    },
}

impl UniversalitySummary {
    pub fn from_verdict(v: &UniversalityVerdict, epsilon: f64) -> Self {
        match v {
            UniversalityVerdict::Feasible {
                analytic_threshold,
                empirical_threshold,
                delta,
                constant,
                analytic_covers_empirical,
            } => UniversalitySummary::Feasible {
                epsilon,
                analytic_threshold: *analytic_threshold,
                empirical_threshold: *empirical_threshold,
                delta: *delta,
                constant: *constant,
                covered: *analytic_covers_empirical,
            },
            UniversalityVerdict::Infeasible { delta, epsilon: e, required_grid } => {
                UniversalitySummary::Infeasible {
                    epsilon: *e,
                    delta: *delta,
                    required_grid: *required_grid,
                }
            }
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SampledSummary {
    pub seeds: usize,
    /// ε used for the threshold fraction (`2^{-m_max}`).
    pub epsilon: f64,
    /// `None` when the horizon ends before the analytic threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fraction_within_epsilon: Option<f64>,
    pub lil_n0: u64,
    /// Fraction of sampled paths inside the iterated-logarithm envelope
    /// from `lil_n0` to the horizon; `None` when the horizon is shorter
    /// than `lil_n0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lil_fraction: Option<f64>,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::resource(format!("serializing {}: {e}", path.display())))?;
    body.push('\n');
    fs::write(path, body)
        .map_err(|e| CliError::resource(format!("writing {}: {e}", path.display())))
}

// ------------------------------------------------------------- check table

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

impl CheckResult {
    pub fn gate(name: &'static str, ok: bool, detail: String) -> Self {
        Self {
            name,
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            detail,
        }
    }

    pub fn skip(name: &'static str, detail: String) -> Self {
        Self { name, status: CheckStatus::Skip, detail }
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub tool_version: &'static str,
    pub config_hash: String,
    pub mode: &'static str,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.status == CheckStatus::Fail)
    }

    /// Renders the aligned text table printed by `waa verify`.
    pub fn render(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            let status = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Skip => "skip",
            };
            out.push_str(&format!("{:width$}  {status}  {}\n", c.name, c.detail));
        }
        out
    }
}

// -------------------------------------------------------------- SVG chart

const CHART_W: f64 = 860.0;
const CHART_H: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Writes a line chart of cumulative regret against its theoretical bound
/// curve. Points are `(round, value)`; both series share the axes. Output
/// bytes are a pure function of the inputs.
pub fn write_regret_chart(
    path: &Path,
    title: &str,
    regret: &[(u64, f64)],
    bound: &[(u64, f64)],
) -> Result<(), CliError> {
    let max_n = regret.iter().chain(bound).map(|(n, _)| *n).max().unwrap_or(1) as f64;
    let mut y_min = 0.0f64;
    let mut y_max = f64::MIN;
    for (_, v) in regret.iter().chain(bound) {
        y_min = y_min.min(*v);
        y_max = y_max.max(*v);
    }
    if !(y_max > y_min) {
        y_max = y_min + 1.0;
    }
    let span = y_max - y_min;
    y_max += 0.05 * span;
    y_min -= 0.05 * span;

    let x = |n: f64| MARGIN_L + (n / max_n) * (CHART_W - MARGIN_L - MARGIN_R);
    let y = |v: f64| CHART_H - MARGIN_B - ((v - y_min) / (y_max - y_min)) * (CHART_H - MARGIN_T - MARGIN_B);
    let polyline = |pts: &[(u64, f64)]| {
        pts.iter()
            .map(|(n, v)| format!("{:.2},{:.2}", x(*n as f64), y(*v)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CHART_W}\" height=\"{CHART_H}\" \
         viewBox=\"0 0 {CHART_W} {CHART_H}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        CHART_W / 2.0,
        xml_escape(title)
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"#333\"/>\n",
        CHART_H - MARGIN_B,
        CHART_W - MARGIN_R
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"#333\"/>\n",
        CHART_H - MARGIN_B
    ));
    for i in 0..=5 {
        let n = max_n * i as f64 / 5.0;
        let v = y_min + (y_max - y_min) * i as f64 / 5.0;
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            x(n),
            CHART_H - MARGIN_B + 18.0,
            tick_label(n)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            MARGIN_L - 6.0,
            y(v) + 4.0,
            tick_label(v)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">round N</text>\n",
        (MARGIN_L + CHART_W - MARGIN_R) / 2.0,
        CHART_H - 12.0
    ));
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#d62728\" stroke-dasharray=\"6 3\" points=\"{}\"/>\n",
        polyline(bound)
    ));
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#1f77b4\" points=\"{}\"/>\n",
        polyline(regret)
    ));
    svg.push_str(&format!(
        "<text x=\"{0}\" y=\"{MARGIN_T}\" fill=\"#1f77b4\">cumulative regret</text>\n\
         <text x=\"{0}\" y=\"{1}\" fill=\"#d62728\">regret bound</text>\n",
        MARGIN_L + 10.0,
        MARGIN_T + 16.0
    ));
    svg.push_str("</svg>\n");

    fs::write(path, svg)
        .map_err(|e| CliError::resource(format!("writing {}: {e}", path.display())))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Evenly thins a per-round series to at most `cap` points, always keeping
/// the final round.
pub fn downsample(series: &[(u64, f64)], cap: usize) -> Vec<(u64, f64)> {
    if series.len() <= cap || cap < 2 {
        return series.to_vec();
    }
    let stride = series.len().div_ceil(cap - 1);
    let mut out: Vec<(u64, f64)> = series.iter().step_by(stride).copied().collect();
    let last = *series.last().expect("nonempty");
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

/// Writes with a trailing newline guard for text artifacts built manually.
pub fn write_text(path: &Path, body: &str) -> Result<(), CliError> {
    let mut f = fs::File::create(path)
        .map_err(|e| CliError::resource(format!("creating {}: {e}", path.display())))?;
    f.write_all(body.as_bytes())
        .map_err(|e| CliError::resource(format!("writing {}: {e}", path.display())))
}
