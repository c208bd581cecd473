//! Single-problem runs from a configuration file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use iga_core::system::{condition_number, solve, SolveStatus, DENSE_LIMIT};
use iga_core::verification::{error_norms, error_order, geo_error};

use crate::config::LoadedConfig;
use crate::output;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: String,
    pub physics: String,
    pub p: usize,
    pub h: f64,
    pub integration_level: u32,
    pub gamma_n: f64,
    pub gamma_g: f64,
    pub dofs: usize,
    pub l2: Option<f64>,
    pub h1: Option<f64>,
    pub e_geo: Option<f64>,
    pub cond: Option<f64>,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Output directory: the override, then the configured one, then
/// `out/<config stem>`.
pub fn output_dir(config: &LoadedConfig, out: Option<&Path>) -> PathBuf {
    if let Some(o) = out {
        return o.to_path_buf();
    }
    if let Some(d) = &config.config.output.dir {
        return d.clone();
    }
    let stem = config
        .path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    Path::new("out").join(stem)
}

pub fn run_problem(path: &Path, out: Option<&Path>) -> Result<RunOutcome> {
    let loaded = LoadedConfig::from_file(path)?;
    let problem = loaded.problem()?;
    let exact = loaded.reference()?;
    let c = &loaded.config;
    let dir = output_dir(&loaded, out);
    let mut files = Vec::new();
    let mut log = String::new();

    let d = problem.discretize()?;
    let sys = problem.assemble(&d)?;
    writeln!(
        log,
        "config {}\nbackground {}x{} elements, h = {}, p = {}\nintegration cells {}, interface segments {}, boundary segments {}\ndofs {}, nonzeros {}",
        path.display(),
        problem.resolution.0,
        problem.resolution.1,
        d.mesh.background.h(),
        problem.degree,
        d.mesh.cells.len(),
        d.mesh.interfaces.len(),
        d.mesh.boundaries.len(),
        sys.dim(),
        sys.nnz()
    )?;
    if !d.dofs.dropped.is_empty() {
        writeln!(log, "dropped enrichment levels {}", d.dofs.dropped.len())?;
    }
    if c.output.matrix {
        let p = dir.join("matrix.mtx");
        output::write_matrix_market(&p, &sys)?;
        files.push(p);
    }
    if c.output.histogram {
        let p = dir.join("histogram.csv");
        output::write_histogram_csv(&p, &d.dofs)?;
        files.push(p);
    }
    if c.output.mesh {
        let p = dir.join("mesh.vtk");
        output::write_mesh_vtk(&p, &d.mesh)?;
        files.push(p);
        let p = dir.join("segments.vtk");
        output::write_segments_vtk(&p, &d.mesh)?;
        files.push(p);
    }

    let solved = solve(&sys)?;
    let converged = solved.status == SolveStatus::Converged;
    writeln!(
        log,
        "residual {:e} after {} refinement steps ({})",
        solved.residual,
        solved.refinement_steps,
        if converged {
            "converged"
        } else {
            "not converged"
        }
    )?;
    let cond = if c.output.condition && sys.dim() <= DENSE_LIMIT {
        Some(condition_number(&sys)?)
    } else {
        None
    };
    let field = iga_core::enrichment::EnrichedField {
        basis: &d.basis,
        mesh: &d.mesh,
        dofs: &d.dofs,
        coefficients: &solved.solution,
    };
    if c.output.field {
        let p = dir.join("field.vtk");
        output::write_field_vtk(&p, &field)?;
        files.push(p);
    }
    let (l2, h1) = match &exact {
        Some(exact) => {
            let (l2, h1) = error_norms(&field, exact, error_order(problem.degree))?;
            (Some(l2), h1)
        }
        None => (None, None),
    };
    let e_geo = match &c.exact_area {
        Some(a) => Some(geo_error(&d.mesh.cells, a.material, a.area)?),
        None => None,
    };
    let report = RunReport {
        config: path.display().to_string(),
        physics: format!("{:?}", problem.physics).to_lowercase(),
        p: problem.degree,
        h: d.mesh.background.h(),
        integration_level: problem.integration_level,
        gamma_n: problem.penalty.gamma_n,
        gamma_g: problem.penalty.gamma_g,
        dofs: sys.dim(),
        l2,
        h1,
        e_geo,
        cond,
        residual: solved.residual,
        converged,
    };
    if let Some(l2) = l2 {
        writeln!(log, "relative L2 error {l2:e}")?;
    }
    if let Some(h1) = h1 {
        writeln!(log, "relative H1 error {h1:e}")?;
    }
    if let Some(g) = e_geo {
        writeln!(log, "geometry error {g:e}")?;
    }
    if let Some(k) = cond {
        writeln!(log, "condition number {k:e}")?;
    }
    if exact.is_some() || c.exact_area.is_some() {
        let p = dir.join("report.json");
        output::write_json(&p, &report)?;
        files.push(p);
    }
    let p = dir.join("run.log");
    output::write_text(&p, &log)?;
    files.push(p);
    log::info!("{}", log.trim_end().replace('\n', "; "));
    if !converged {
        bail!(
            "solver did not converge: residual {:e} exceeds {:e}",
            solved.residual,
            iga_core::system::RESIDUAL_TOLERANCE
        );
    }
    Ok(RunOutcome {
        report,
        out_dir: dir,
        files,
    })
}
