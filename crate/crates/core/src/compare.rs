//! Current vs. cloud disclosure comparison over all six runs.

use std::fmt;
use std::fmt::Write as _;

use serde::Serialize;

use crate::audit::{audit_run, AuditError, AuditReport, Category, DisclosurePolicy, Registry, Verdict};
use crate::batch;
use crate::eid::MOA_ID;
use crate::harness::RunOutput;
use crate::scenario::{Mode, UseCase};
use crate::world::{World, MIS, PEPS, SPR_GW};

const COLUMNS: [&str; 4] = [MOA_ID, MIS, SPR_GW, PEPS];

#[derive(Clone, Debug)]
pub struct Comparison {
    pub runs: Vec<RunOutput>,
    pub reports: Vec<AuditReport>,
}

impl Comparison {
    pub fn verdict(&self) -> Verdict {
        if self.reports.iter().all(|r| r.verdict == Verdict::Pass) {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn report(&self, use_case: UseCase, mode: Mode) -> Option<&AuditReport> {
        self.reports
            .iter()
            .find(|r| r.use_case == use_case && r.mode == mode)
    }

    pub fn run(&self, use_case: UseCase, mode: Mode) -> Option<&RunOutput> {
        self.runs
            .iter()
            .find(|r| r.mode == mode && r.sessions.iter().all(|s| s.use_case == use_case))
    }

    /// Machine-readable summary: one object per audited run.
    pub fn reports_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            verdict: Verdict,
            reports: &'a [AuditReport],
        }
        serde_json::to_string_pretty(&Doc {
            verdict: self.verdict(),
            reports: &self.reports,
        })
        .expect("reports serialize")
    }
}

/// Runs and audits all six combinations on copies of `world`.
pub fn compare(world: &World) -> Result<Comparison, AuditError> {
    let jobs = batch::matrix();
    let runs = batch::run_all(world, &jobs);
    let registry = Registry::from_world(world);
    let reports = batch::map(&runs, |run| {
        let use_case = run
            .sessions
            .first()
            .map(|s| s.use_case)
            .unwrap_or(UseCase::Austrian);
        audit_run(run, &registry, &DisclosurePolicy::for_run(use_case, run.mode))
    });
    let reports = reports.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Comparison { runs, reports })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RenderError {
    Missing { use_case: UseCase, mode: Mode },
}

impl fmt::Display for RenderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RenderError::Missing { use_case, mode } => {
                write!(f, "no audited run for {use_case} in {mode} mode")
            }
        }
    }
}

impl std::error::Error for RenderError {}

fn row_name(u: UseCase) -> &'static str {
    match u {
        UseCase::Austrian => "Austrian citizens",
        UseCase::Representation => "In representation",
        UseCase::Foreign => "Foreign citizens",
    }
}

/// Lines of one cell: observed personal categories, `[!]` marks a
/// violation and `[*]` an annotated divergence from the table.
fn cell(report: &AuditReport, actor: &str) -> Vec<String> {
    let Some(a) = report.actor(actor) else {
        return vec!["-".into()];
    };
    let bad: Vec<Category> = a.violations.iter().map(|v| v.category).collect();
    let mut lines: Vec<String> = a
        .observed
        .iter()
        .map(|c| {
            let mark = if bad.contains(c) {
                " [!]"
            } else if a.annotations.contains_key(c) {
                " [*]"
            } else {
                ""
            };
            format!("{}{mark}", c.label())
        })
        .collect();
    if bad.contains(&Category::Uncategorized) {
        lines.push(format!("{} [!]", Category::Uncategorized.label()));
    }
    if lines.is_empty() {
        lines.push("-".into());
    }
    lines
}

/// Text table in the layout of the disclosure comparison, built from the
/// observed categories.
pub fn render_comparison(reports: &[AuditReport]) -> Result<String, RenderError> {
    let mut rows: Vec<[Vec<String>; 6]> = Vec::new();
    for mode in Mode::ALL {
        for use_case in UseCase::ALL {
            let r = reports
                .iter()
                .find(|r| r.use_case == use_case && r.mode == mode)
                .ok_or(RenderError::Missing { use_case, mode })?;
            let approach = match mode {
                Mode::Current => "Current approach",
                Mode::Cloud => "Cloud-based approach",
            };
            rows.push([
                vec![approach.into()],
                vec![row_name(use_case).into()],
                cell(r, COLUMNS[0]),
                cell(r, COLUMNS[1]),
                cell(r, COLUMNS[2]),
                cell(r, COLUMNS[3]),
            ]);
        }
    }
    let header = ["Approach", "Use case", COLUMNS[0], COLUMNS[1], COLUMNS[2], COLUMNS[3]];
    let mut width = header.map(str::len);
    for row in &rows {
        for (i, c) in row.iter().enumerate() {
            for l in c {
                width[i] = width[i].max(l.chars().count());
            }
        }
    }
    let rule: String = {
        let mut s = String::from("+");
        for w in width {
            s.push_str(&"-".repeat(w + 2));
            s.push('+');
        }
        s
    };
    let mut out = String::new();
    let line = |out: &mut String, cells: [&str; 6]| {
        out.push('|');
        for (i, c) in cells.iter().enumerate() {
            let pad = width[i] - c.chars().count();
            let _ = write!(out, " {c}{} |", " ".repeat(pad));
        }
        out.push('\n');
    };
    out.push_str(&rule);
    out.push('\n');
    line(&mut out, header);
    out.push_str(&rule);
    out.push('\n');
    for row in &rows {
        let height = row.iter().map(Vec::len).max().unwrap_or(1);
        for k in 0..height {
            let cells: [&str; 6] = std::array::from_fn(|i| row[i].get(k).map(String::as_str).unwrap_or(""));
            line(&mut out, cells);
        }
        out.push_str(&rule);
        out.push('\n');
    }
    out.push_str("[*] allowed beyond the table cell (annotated), [!] violation\n");
    Ok(out)
}
