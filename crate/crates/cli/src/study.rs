//! Benchmark studies with parallel cases and an on-disk reference cache.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use iga_core::verification::{
    cases, multimaterial_reference_problem, rate_summary, required_references, run_case,
    CaseReference, ErrorReport, MaterialPreset, RateSummary, ReferenceField, StudyConfig, StudyId,
    MULTIMATERIAL_REFERENCE_H,
};

use crate::output::{self, ReportJson};

/// Serialized reference solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedReference {
    pub preset: String,
    pub p: usize,
    pub h: f64,
    pub gamma_n: f64,
    pub gamma_g: f64,
    pub coefficients: Vec<f64>,
}

pub fn cache_path(dir: &Path, preset: MaterialPreset, degree: usize) -> PathBuf {
    dir.join(format!("multimaterial-{}-p{degree}.json", preset.name()))
}

/// Loads the reference from `dir` when a matching entry exists, otherwise
/// solves and stores it.
pub fn reference(
    dir: Option<&Path>,
    preset: MaterialPreset,
    degree: usize,
) -> Result<ReferenceField> {
    let problem = multimaterial_reference_problem(preset, degree)?;
    let key = |coefficients: Vec<f64>| CachedReference {
        preset: preset.name().to_string(),
        p: degree,
        h: MULTIMATERIAL_REFERENCE_H,
        gamma_n: problem.penalty.gamma_n,
        gamma_g: problem.penalty.gamma_g,
        coefficients,
    };
    if let Some(dir) = dir {
        let path = cache_path(dir, preset, degree);
        if let Ok(text) = std::fs::read_to_string(&path) {
            match serde_json::from_str::<CachedReference>(&text) {
                Ok(c)
                    if c.preset == preset.name()
                        && c.p == degree
                        && c.h == MULTIMATERIAL_REFERENCE_H
                        && c.gamma_n == problem.penalty.gamma_n
                        && c.gamma_g == problem.penalty.gamma_g =>
                {
                    match ReferenceField::from_coefficients(&problem, c.coefficients) {
                        Ok(r) => {
                            log::info!(
                                "reference {} p={degree} from {}",
                                preset.name(),
                                path.display()
                            );
                            return Ok(r);
                        }
                        Err(e) => log::warn!("ignoring cached reference {}: {e}", path.display()),
                    }
                }
                Ok(_) => log::warn!(
                    "cached reference {} is for other parameters",
                    path.display()
                ),
                Err(e) => log::warn!("ignoring cached reference {}: {e}", path.display()),
            }
        }
    }
    log::info!("solving reference {} p={degree}", preset.name());
    let r = ReferenceField::solve(&problem)?;
    if let Some(dir) = dir {
        let path = cache_path(dir, preset, degree);
        output::write_json(&path, &key(r.coefficients.clone()))
            .with_context(|| format!("cannot write reference cache {}", path.display()))?;
    }
    Ok(r)
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub reports: Vec<ErrorReport>,
    pub rates: Vec<RateSummary>,
    pub files: Vec<PathBuf>,
}

/// Runs every case of `study` (in parallel on the current rayon pool),
/// keeping the deterministic case order, and writes
/// `<study>.csv`, `<study>_rates.csv` and `<study>.json` into `out`.
pub fn run_study(
    study: StudyId,
    config: &StudyConfig,
    out: &Path,
    cache: Option<&Path>,
) -> Result<StudyOutcome> {
    let cases = cases(study, config)?;
    log::info!("{}: {} cases", study.name(), cases.len());
    let needed = required_references(&cases);
    let refs: BTreeMap<(MaterialPreset, usize), ReferenceField> = needed
        .par_iter()
        .map(|&(preset, p)| reference(cache, preset, p).map(|r| ((preset, p), r)))
        .collect::<Result<_>>()?;
    let reports: Vec<ErrorReport> = cases
        .par_iter()
        .map(|c| {
            let r = match c.reference {
                CaseReference::SelfReference(preset) => refs.get(&(preset, c.degree)),
                CaseReference::Analytic(_) => None,
            };
            let report = run_case(c, r)?;
            log::debug!(
                "{} p={} h={} {:?}: L2 {:e}",
                study.name(),
                c.degree,
                c.h,
                c.params,
                report.l2
            );
            Ok(report)
        })
        .collect::<Result<_>>()?;
    let rates = rate_summary(&reports);
    let name = study.name();
    let files = vec![
        out.join(format!("{name}.csv")),
        out.join(format!("{name}_rates.csv")),
        out.join(format!("{name}.json")),
    ];
    output::write_reports_csv(&files[0], &reports)?;
    output::write_rates_csv(&files[1], &rates)?;
    let json: Vec<ReportJson> = reports.iter().map(ReportJson::from).collect();
    output::write_json(&files[2], &json)?;
    Ok(StudyOutcome {
        reports,
        rates,
        files,
    })
}

/// Plain-text rates table for the terminal.
pub fn format_rates(rates: &[RateSummary]) -> String {
    let mut s = String::new();
    for r in rates {
        let params: Vec<String> = r.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let h_int = r.h_int.map(|h| format!(" h_int={h}")).unwrap_or_default();
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
        s.push_str(&format!(
            "{} p={}{} gamma_g={} {}: L2 rate {}, H1 rate {} over {} meshes\n",
            r.study.name(),
            r.degree,
            h_int,
            r.gamma_g,
            params.join(" "),
            fmt(r.l2_rate),
            fmt(r.h1_rate),
            r.mesh_sizes.len()
        ));
    }
    s
}
