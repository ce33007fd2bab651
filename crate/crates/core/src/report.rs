//! Report rendering and the command pipelines behind the CLI.
//!
//! Numbers are written in their shortest round-trip decimal form in every
//! format, so a value read back from a text, CSV or JSON report is the same
//! `f64` that was computed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ai_service::{coverage_findings, coverage_report, CoverageEntry};
use crate::finding::{Finding, Severity};
use crate::file::{demo_factors, illustrative_finding, parse_factors, parse_scenario, ParseOptions, ScenarioFile};
use crate::lci::{assess, AssessmentResult, CharacterizationTable, TierSlot};
use crate::net_benefit::{compare, ComparisonResult};
use crate::stage::StageId;

/// Kind of environmental evaluation found in a study, from "no mention of
/// the environmental gain" (a) to a full comparison of life-cycle
/// assessments (f).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluationCategory {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl EvaluationCategory {
    pub const ALL: [EvaluationCategory; 6] = [
        EvaluationCategory::A,
        EvaluationCategory::B,
        EvaluationCategory::C,
        EvaluationCategory::D,
        EvaluationCategory::E,
        EvaluationCategory::F,
    ];

    pub fn letter(self) -> char {
        match self {
            EvaluationCategory::A => 'a',
            EvaluationCategory::B => 'b',
            EvaluationCategory::C => 'c',
            EvaluationCategory::D => 'd',
            EvaluationCategory::E => 'e',
            EvaluationCategory::F => 'f',
        }
    }

    pub fn from_letter(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| s.len() == 1 && s.starts_with(c.letter()))
    }

    pub fn description(self) -> &'static str {
        match self {
            EvaluationCategory::A => "No mention of the environmental gain",
            EvaluationCategory::B => "General mention of the environmental gain",
            EvaluationCategory::C => {
                "A few words about the environmental gain but no quantitative evaluation or only indirect estimation"
            }
            EvaluationCategory::D => "Evaluation of the energy gain without taking the AI service into account",
            EvaluationCategory::E => "Evaluation of the energy gain taking the use phase of the AI service into account",
            EvaluationCategory::F => "Comprehensive evaluation of the environmental gain (comparison of LCAs)",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation_category: Option<EvaluationCategory>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

impl ReportMeta {
    /// Reads `evaluation_category` and `notes` from a scenario's free-form
    /// `meta` map; other keys are kept in the scenario only.
    pub fn from_map(meta: &BTreeMap<String, Value>) -> Result<Self, String> {
        let evaluation_category = match meta.get("evaluation_category") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(
                EvaluationCategory::from_letter(s)
                    .ok_or_else(|| format!("evaluation category must be one of a..f, got `{s}`"))?,
            ),
            Some(other) => return Err(format!("evaluation category must be a letter a..f, got {other}")),
        };
        let notes = match meta.get("notes") {
            Some(Value::String(s)) => s.clone(),
            _ => String::new(),
        };
        Ok(ReportMeta {
            evaluation_category,
            notes,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

/// Everything a report is rendered from; the JSON format is this value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Report {
    Assessment {
        #[serde(default)]
        meta: ReportMeta,
        assessment: AssessmentResult,
    },
    Comparison {
        #[serde(default)]
        meta: ReportMeta,
        m1_assessment: AssessmentResult,
        m2_assessment: AssessmentResult,
        #[serde(flatten)]
        comparison: ComparisonResult,
    },
}

impl Report {
    pub fn assessments(&self) -> Vec<&AssessmentResult> {
        match self {
            Report::Assessment { assessment, .. } => vec![assessment],
            Report::Comparison {
                m1_assessment,
                m2_assessment,
                ..
            } => vec![m1_assessment, m2_assessment],
        }
    }
}

/// Shortest decimal string that parses back to `v`.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub const CSV_HEADER: [&str; 7] = ["scenario", "process", "stage", "tier", "category", "unit", "value"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EmitOptions {
    /// CSV only: skip rows whose value is zero.
    pub nonzero_only: bool,
}

pub fn emit_report(report: &Report, format: Format, options: EmitOptions) -> String {
    match format {
        Format::Text => render_text(report),
        Format::Csv => render_csv(report, options),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
    }
}

fn tier_label(slot: TierSlot) -> &'static str {
    match slot {
        TierSlot::Terminal => "terminal",
        TierSlot::Network => "network",
        TierSlot::DataCenter => "data_center",
        TierSlot::Unassigned => "unassigned",
    }
}

fn render_csv(report: &Report, options: EmitOptions) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("write to memory");
    for a in report.assessments() {
        for (pid, h) in &a.by_process {
            let tags = &a.processes[pid];
            for (c, cat) in a.categories.iter().enumerate() {
                if options.nonzero_only && h[c] == 0.0 {
                    continue;
                }
                w.write_record([
                    a.scenario_id.as_str(),
                    pid,
                    tags.stage.stage_id().code(),
                    tier_label(TierSlot::from(tags.tier)),
                    cat.id.as_str(),
                    cat.unit.as_str(),
                    &format_number(h[c]),
                ])
                .expect("write to memory");
            }
        }
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is UTF-8")
}

/// Left column plus one right-aligned column per category.
struct Grid {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Grid {
    fn new(first: &str, assessment: &AssessmentResult) -> Self {
        let mut header = vec![first.to_string()];
        header.extend(assessment.categories.iter().map(|c| format!("{} [{}]", c.id, c.unit)));
        Grid { header, rows: Vec::new() }
    }

    fn row(&mut self, label: impl Into<String>, values: impl IntoIterator<Item = String>) {
        let mut r = vec![label.into()];
        r.extend(values);
        self.rows.push(r);
    }

    fn render(&self, out: &mut String) {
        let n = self.header.len();
        let widths: Vec<usize> = (0..n)
            .map(|i| {
                std::iter::once(&self.header)
                    .chain(&self.rows)
                    .map(|r| r.get(i).map_or(0, |s| s.chars().count()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        for r in std::iter::once(&self.header).chain(&self.rows) {
            let mut line = String::new();
            for (i, cell) in r.iter().enumerate() {
                if i == 0 {
                    let _ = write!(line, "{cell:<w$}", w = widths[0]);
                } else {
                    let _ = write!(line, "  {cell:>w$}", w = widths[i]);
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
    }
}

fn numbers<'a>(v: impl IntoIterator<Item = f64> + 'a) -> impl Iterator<Item = String> + 'a {
    v.into_iter().map(format_number)
}

fn render_assessment(a: &AssessmentResult, out: &mut String) {
    let fu = &a.functional_unit;
    let _ = writeln!(out, "Scenario {} ({})", a.scenario_id, a.label);
    let _ = writeln!(
        out,
        "Functional unit: {} {} ({})",
        format_number(fu.quantity),
        fu.reference_flow,
        fu.description
    );
    out.push('\n');

    let mut stages = Grid::new("Stage", a);
    for stage in StageId::ALL {
        stages.row(stage.code(), numbers(a.by_stage[&stage].iter()));
    }
    stages.row("Total", numbers(a.totals.iter()));
    stages.render(out);
    out.push('\n');

    let mut tiers = Grid::new("Tier", a);
    for (slot, h) in &a.by_tier {
        tiers.row(tier_label(*slot), numbers(h.iter()));
    }
    tiers.render(out);
    out.push('\n');

    let mut ai = Grid::new("AI service", a);
    ai.row("LCA_AI", numbers(a.ai_subtotal.iter()));
    ai.render(out);
}

fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let meta = match report {
        Report::Assessment { meta, assessment } => {
            render_assessment(assessment, &mut out);
            meta
        }
        Report::Comparison {
            meta,
            m1_assessment,
            m2_assessment,
            comparison,
        } => {
            let _ = writeln!(out, "== M1 (reference) ==");
            render_assessment(m1_assessment, &mut out);
            let _ = writeln!(out, "\n== M2 (with AI service) ==");
            render_assessment(m2_assessment, &mut out);
            let _ = writeln!(out, "\n== Net effect of M2 relative to M1 ==");
            render_comparison(comparison, &mut out);
            meta
        }
    };
    if let Some(c) = meta.evaluation_category {
        let _ = writeln!(out, "\nEvaluation category ({}): {}", c.letter(), c.description());
    }
    if !meta.notes.is_empty() {
        let _ = writeln!(out, "Notes: {}", meta.notes);
    }
    let findings: Vec<&Finding> = report.assessments().into_iter().flat_map(|a| &a.findings).collect();
    if !findings.is_empty() {
        let _ = writeln!(out, "\nFindings:");
        for f in findings {
            let _ = writeln!(out, "  {f}");
        }
    }
    out
}

fn render_comparison(c: &ComparisonResult, out: &mut String) {
    let header = ["Category", "Unit", "Delta", "LCA_AI", "S", "E", "O", "Verdict"];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for (i, cat) in c.categories.iter().enumerate() {
        let mut r = vec![cat.id.clone(), cat.unit.clone()];
        r.extend(numbers([c.delta[i], c.lca_ai[i], c.s_term[i], c.e_term[i], c.o_term[i]]));
        r.push(c.verdicts.get(&cat.id).map_or("-", |v| v.label()).to_string());
        rows.push(r);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
        .collect();
    for r in &rows {
        let mut line = String::new();
        for (i, cell) in r.iter().enumerate() {
            if i < 2 || i == header.len() - 1 {
                let _ = write!(line, "{cell:<w$}  ", w = widths[i]);
            } else {
                let _ = write!(line, "{cell:>w$}  ", w = widths[i]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
}

/// Process exit status of a command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    /// Unreadable input, parse errors, unsolvable systems.
    Failure = 1,
    /// The input is well formed but fails validation.
    ValidationFailure = 2,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub strict: bool,
    pub lenient_schema: bool,
    pub format: Format,
    pub factors: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub nonzero_only: bool,
    /// Neutral band per category id; missing categories use 0.
    pub tolerances: BTreeMap<String, f64>,
}

impl RunOptions {
    fn parse_options(&self) -> ParseOptions {
        ParseOptions {
            lenient_schema: self.lenient_schema,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub status: ExitStatus,
    /// Rendered report, unless it was written to `--out`.
    pub stdout: String,
    /// One diagnostic per line.
    pub stderr: Vec<String>,
}

impl RunOutcome {
    fn fail(status: ExitStatus, stderr: Vec<String>) -> Self {
        RunOutcome {
            status,
            stdout: String::new(),
            stderr,
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("error: {}: {e}", path.display()))
}

fn load_scenario(path: &Path, options: &RunOptions) -> Result<ScenarioFile, String> {
    let bytes = read(path)?;
    parse_scenario(&bytes, options.parse_options()).map_err(|e| format!("error: {}: {e}", path.display()))
}

fn load_factors(options: &RunOptions) -> Result<(CharacterizationTable, Vec<Finding>), String> {
    match &options.factors {
        Some(path) => {
            let bytes = read(path)?;
            parse_factors(&bytes, options.parse_options()).map_err(|e| format!("error: {}: {e}", path.display()))
        }
        None => Ok((demo_factors(), vec![illustrative_finding()])),
    }
}

fn describe(path: &Path, f: &Finding) -> String {
    format!("{}: {}: {}", f.severity, path.display(), f.message)
}

/// Coverage audit of a scenario that contains AI-tagged processes.
fn audit(file: &ScenarioFile, strict: bool) -> (Option<Vec<CoverageEntry>>, Vec<Finding>) {
    if !file.scenario.processes().any(|p| p.ai_tagged) {
        return (None, Vec::new());
    }
    let report = coverage_report(&file.scenario);
    let findings = coverage_findings(&report, strict);
    (Some(report), findings)
}

fn finish(rendered: String, options: &RunOptions, mut stderr: Vec<String>) -> RunOutcome {
    match &options.out {
        Some(path) => match std::fs::write(path, rendered) {
            Ok(()) => RunOutcome {
                status: ExitStatus::Success,
                stdout: String::new(),
                stderr,
            },
            Err(e) => {
                stderr.push(format!("error: {}: {e}", path.display()));
                RunOutcome::fail(ExitStatus::Failure, stderr)
            }
        },
        None => RunOutcome {
            status: ExitStatus::Success,
            stdout: rendered,
            stderr,
        },
    }
}

#[derive(Serialize)]
struct ValidationReport<'a> {
    scenario: &'a str,
    processes: usize,
    flows: usize,
    findings: &'a [Finding],
    #[serde(skip_serializing_if = "Option::is_none")]
    coverage: Option<&'a [CoverageEntry]>,
}

/// Structural checks and, for scenarios with an AI service, the life-cycle
/// coverage audit. Any error finding gives [`ExitStatus::ValidationFailure`].
pub fn run_validate(path: &Path, options: &RunOptions) -> RunOutcome {
    let file = match load_scenario(path, options) {
        Ok(f) => f,
        Err(e) => return RunOutcome::fail(ExitStatus::Failure, vec![e]),
    };
    let mut findings = file.findings.clone();
    findings.extend(file.scenario.validate());
    let (coverage, audit_findings) = audit(&file, options.strict);
    findings.extend(audit_findings);
    let stderr: Vec<String> = findings.iter().map(|f| describe(path, f)).collect();
    let failed = findings.iter().any(Finding::is_error);

    let rendered = match options.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&ValidationReport {
                scenario: file.scenario.id(),
                processes: file.scenario.processes().count(),
                flows: file.scenario.flows().count(),
                findings: &findings,
                coverage: coverage.as_deref(),
            })
            .expect("validation report serializes");
            s.push('\n');
            s
        }
        Format::Text | Format::Csv => {
            let mut s = format!(
                "{}: {} processes, {} flows, {} errors, {} warnings\n",
                file.scenario.id(),
                file.scenario.processes().count(),
                file.scenario.flows().count(),
                findings.iter().filter(|f| f.severity == Severity::Error).count(),
                findings.iter().filter(|f| f.severity == Severity::Warning).count(),
            );
            if let Some(rows) = &coverage {
                for e in rows {
                    let _ = writeln!(s, "  {:?} {:?}: {}", e.status, e.obligation, e.label);
                }
            }
            s
        }
    };
    let mut outcome = finish(rendered, options, stderr);
    if failed && outcome.status == ExitStatus::Success {
        outcome.status = ExitStatus::ValidationFailure;
    }
    outcome
}

fn assess_file(file: &ScenarioFile, table: &CharacterizationTable, path: &Path) -> Result<AssessmentResult, String> {
    let mut result = assess(&file.scenario, table).map_err(|e| format!("error: {}: {e}", path.display()))?;
    let mut findings = file.findings.clone();
    findings.append(&mut result.findings);
    result.findings = findings;
    Ok(result)
}

pub fn run_assess(path: &Path, options: &RunOptions) -> RunOutcome {
    let (table, mut general) = match load_factors(options) {
        Ok(t) => t,
        Err(e) => return RunOutcome::fail(ExitStatus::Failure, vec![e]),
    };
    let file = match load_scenario(path, options) {
        Ok(f) => f,
        Err(e) => return RunOutcome::fail(ExitStatus::Failure, vec![e]),
    };
    let (_, audit_findings) = audit(&file, options.strict);
    let mut stderr: Vec<String> = general.drain(..).map(|f| f.to_string()).collect();
    stderr.extend(audit_findings.iter().map(|f| describe(path, f)));
    if audit_findings.iter().any(Finding::is_error) {
        return RunOutcome::fail(ExitStatus::ValidationFailure, stderr);
    }
    let mut result = match assess_file(&file, &table, path) {
        Ok(r) => r,
        Err(e) => {
            stderr.push(e);
            return RunOutcome::fail(ExitStatus::Failure, stderr);
        }
    };
    stderr.extend(result.findings.iter().map(|f| describe(path, f)));
    result.findings.extend(audit_findings);
    let report = Report::Assessment {
        meta: file.meta.clone(),
        assessment: result,
    };
    let rendered = emit_report(
        &report,
        options.format,
        EmitOptions {
            nonzero_only: options.nonzero_only,
        },
    );
    finish(rendered, options, stderr)
}

/// Assesses M1 and M2 and compares them. With `strict`, life-cycle coverage
/// gaps of M2 fail the run before anything is computed.
pub fn run_compare(m1_path: &Path, m2_path: &Path, options: &RunOptions) -> RunOutcome {
    let (table, general) = match load_factors(options) {
        Ok(t) => t,
        Err(e) => return RunOutcome::fail(ExitStatus::Failure, vec![e]),
    };
    let mut stderr: Vec<String> = general.iter().map(|f| f.to_string()).collect();
    for id in options.tolerances.keys() {
        if !table.categories().iter().any(|c| &c.id == id) {
            stderr.push(format!("error: tolerance given for unknown category `{id}`"));
            return RunOutcome::fail(ExitStatus::Failure, stderr);
        }
    }
    let (m1, m2) = std::thread::scope(|s| {
        let h1 = s.spawn(|| load_scenario(m1_path, options));
        let m2 = load_scenario(m2_path, options);
        (h1.join().expect("scenario loader panicked"), m2)
    });
    let (m1, m2) = match (m1, m2) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => {
            stderr.extend(a.err());
            stderr.extend(b.err());
            return RunOutcome::fail(ExitStatus::Failure, stderr);
        }
    };

    let (_, audit_findings) = audit(&m2, options.strict);
    stderr.extend(audit_findings.iter().map(|f| describe(m2_path, f)));
    if audit_findings.iter().any(Finding::is_error) {
        return RunOutcome::fail(ExitStatus::ValidationFailure, stderr);
    }

    let (r1, r2) = std::thread::scope(|s| {
        let h1 = s.spawn(|| assess_file(&m1, &table, m1_path));
        let r2 = assess_file(&m2, &table, m2_path);
        (h1.join().expect("assessment panicked"), r2)
    });
    let (r1, mut r2) = match (r1, r2) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => {
            stderr.extend(a.err());
            stderr.extend(b.err());
            return RunOutcome::fail(ExitStatus::Failure, stderr);
        }
    };
    stderr.extend(r1.findings.iter().map(|f| describe(m1_path, f)));
    stderr.extend(r2.findings.iter().map(|f| describe(m2_path, f)));
    r2.findings.extend(audit_findings);

    let tolerances: Vec<f64> = table
        .categories()
        .iter()
        .map(|c| options.tolerances.get(&c.id).copied().unwrap_or(0.0))
        .collect();
    let comparison = match compare(&r2, &r1, &tolerances) {
        Ok(c) => c,
        Err(e) => {
            stderr.push(format!("error: {e}"));
            return RunOutcome::fail(ExitStatus::Failure, stderr);
        }
    };
    let report = Report::Comparison {
        meta: m2.meta.clone(),
        m1_assessment: r1,
        m2_assessment: r2,
        comparison,
    };
    let rendered = emit_report(
        &report,
        options.format,
        EmitOptions {
            nonzero_only: options.nonzero_only,
        },
    );
    finish(rendered, options, stderr)
}

/// Re-renders a report saved in JSON format.
pub fn run_report(path: &Path, options: &RunOptions) -> RunOutcome {
    let bytes = match read(path) {
        Ok(b) => b,
        Err(e) => return RunOutcome::fail(ExitStatus::Failure, vec![e]),
    };
    let report: Report = match serde_json::from_slice(&bytes) {
        Ok(r) => r,
        Err(e) => {
            return RunOutcome::fail(
                ExitStatus::Failure,
                vec![format!("error: {}: not a saved report: {e}", path.display())],
            )
        }
    };
    let rendered = emit_report(
        &report,
        options.format,
        EmitOptions {
            nonzero_only: options.nonzero_only,
        },
    );
    finish(rendered, options, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_numbers_round_trip() {
        for v in [0.0, 600.0, -80.0, 0.1, 2.0408163265306123, 1e-20, 3.5e17, -0.0, 198.6768] {
            let s = format_number(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_number(600.0), "600");
        assert_eq!(format_number(-0.0), "0");
    }

    #[test]
    fn evaluation_letters() {
        assert_eq!(EvaluationCategory::from_letter("f"), Some(EvaluationCategory::F));
        assert_eq!(EvaluationCategory::from_letter("g"), None);
        assert_eq!(EvaluationCategory::from_letter("ab"), None);
        let mut m = BTreeMap::new();
        m.insert("evaluation_category".to_string(), Value::String("d".into()));
        assert_eq!(
            ReportMeta::from_map(&m).unwrap().evaluation_category,
            Some(EvaluationCategory::D)
        );
        m.insert("evaluation_category".to_string(), Value::from(3));
        assert!(ReportMeta::from_map(&m).is_err());
    }
}
