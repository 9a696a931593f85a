//! Re-check the queue inequalities and bounds from stored run files.

use std::fs;
use std::path::{Path, PathBuf};

use super::RunFile;
use crate::error::{Error, Result};
use crate::metrics::{lemma_checks, queue_bound, queue_bound_failures, theorem_bounds, BoundReport, LemmaReport, MeasuredRun, LEMMA_TOL};

#[derive(Clone, Debug)]
pub struct RunCheck {
    pub path: PathBuf,
    pub lemma: LemmaReport,
    pub bounds: Vec<BoundReport>,
    pub queue_bound_failures: Vec<usize>,
    pub early_reads: usize,
}

impl RunCheck {
    pub fn has_violation(&self) -> bool {
        !self.lemma.lemma1_holds()
            || !self.lemma.lemma2_holds()
            || self.bounds.iter().any(|b| b.is_violation())
            || !self.queue_bound_failures.is_empty()
            || self.early_reads > 0
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub runs: Vec<RunCheck>,
}

impl VerifyReport {
    pub fn has_violation(&self) -> bool {
        self.runs.iter().any(|r| r.has_violation())
    }
}

pub fn verify_run(path: &Path, file: &RunFile) -> Result<RunCheck> {
    file.trace.validate()?;
    let lemma = lemma_checks(&file.trace, LEMMA_TOL)?;
    let sizes = file.trace.effective_step_sizes();
    let (bounds, qfail) = match file.variations {
        Some(v) => {
            let run = MeasuredRun::from_trace(&file.trace, file.dynamic_regret, file.static_regret);
            let qfail = match queue_bound(&file.constants, &sizes) {
                Some(b) if sizes.meets_violation_conditions() => queue_bound_failures(&file.trace, b),
                _ => Vec::new(),
            };
            (theorem_bounds(&run, &file.constants, &sizes, &v), qfail)
        }
        None => (Vec::new(), Vec::new()),
    };
    Ok(RunCheck {
        path: path.to_path_buf(),
        lemma,
        bounds,
        queue_bound_failures: qfail,
        early_reads: file.trace.audit.as_ref().map_or(0, |a| a.early_reads),
    })
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect(&p, out)?;
        } else if p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("run_") && n.ends_with(".json")) {
            out.push(p);
        }
    }
    Ok(())
}

/// Every `run_*.json` below `dir`. A directory without run files is a
/// schema error: the experiment must have been run with `json` output.
pub fn verify_dir(dir: &Path) -> Result<VerifyReport> {
    let mut paths = Vec::new();
    collect(dir, &mut paths)?;
    if paths.is_empty() {
        return Err(Error::Schema {
            path: dir.to_path_buf(),
            message: "no run_*.json files; run with `json` in output.formats".into(),
        });
    }
    let mut report = VerifyReport::default();
    for p in paths {
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let file: RunFile = serde_json::from_str(&text).map_err(|e| Error::Schema {
            path: p.clone(),
            message: e.to_string(),
        })?;
        report.runs.push(verify_run(&p, &file)?);
    }
    Ok(report)
}
