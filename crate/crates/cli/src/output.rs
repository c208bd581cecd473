//! File formats: legacy VTK, CSV tables, JSON reports and Matrix Market.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use iga_core::cutmesh::IntegrationMesh;
use iga_core::enrichment::{EnrichedDofMap, EnrichedField};
use iga_core::system::SparseSystem;
use iga_core::verification::{ErrorReport, RateSummary};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("cannot create directory {}", dir.display()))?;
        }
    }
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn cell_block(out: &mut impl Write, mesh: &IntegrationMesh, cells: &[usize]) -> Result<usize> {
    let verts: Vec<Vec<_>> = cells.iter().map(|&c| mesh.cells[c].vertices()).collect();
    let npts: usize = verts.iter().map(Vec::len).sum();
    writeln!(out, "POINTS {npts} double")?;
    for v in verts.iter().flatten() {
        writeln!(out, "{} {} 0", v.x, v.y)?;
    }
    writeln!(out, "CELLS {} {}", verts.len(), npts + verts.len())?;
    let mut next = 0;
    for v in &verts {
        write!(out, "{}", v.len())?;
        for _ in 0..v.len() {
            write!(out, " {next}")?;
            next += 1;
        }
        writeln!(out)?;
    }
    writeln!(out, "CELL_TYPES {}", verts.len())?;
    for v in &verts {
        writeln!(out, "{}", if v.len() == 3 { 5 } else { 9 })?;
    }
    writeln!(out, "CELL_DATA {}", verts.len())?;
    writeln!(out, "SCALARS material int 1\nLOOKUP_TABLE default")?;
    for &c in cells {
        writeln!(out, "{}", mesh.cells[c].material)?;
    }
    writeln!(out, "SCALARS phase int 1\nLOOKUP_TABLE default")?;
    for &c in cells {
        writeln!(out, "{}", mesh.cells[c].phase)?;
    }
    Ok(npts)
}

/// Solution sampled at the vertices of every material cell. Vertices are
/// not shared between cells so jumps across interfaces stay visible.
pub fn write_field_vtk(path: &Path, field: &EnrichedField<'_>) -> Result<()> {
    let mesh = field.mesh;
    let cells: Vec<usize> = (0..mesh.cells.len())
        .filter(|&c| mesh.cells[c].material != 0)
        .collect();
    let mut out = create(path)?;
    writeln!(
        out,
        "# vtk DataFile Version 3.0\nsolution\nASCII\nDATASET UNSTRUCTURED_GRID"
    )?;
    let npts = cell_block(&mut out, mesh, &cells)?;
    writeln!(out, "POINT_DATA {npts}")?;
    let samples: Vec<_> = cells
        .iter()
        .flat_map(|&c| {
            mesh.cells[c]
                .vertices()
                .into_iter()
                .map(move |x| field.eval(c, x))
        })
        .collect();
    if field.dofs.components == 1 {
        writeln!(out, "SCALARS u double 1\nLOOKUP_TABLE default")?;
        for s in &samples {
            writeln!(out, "{}", s[0].value)?;
        }
        writeln!(out, "VECTORS grad_u double")?;
        for s in &samples {
            writeln!(out, "{} {} 0", s[0].gradient.x, s[0].gradient.y)?;
        }
    } else {
        writeln!(out, "VECTORS u double")?;
        for s in &samples {
            writeln!(out, "{} {} 0", s[0].value, s[1].value)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// All integration cells with material and phase indices.
pub fn write_mesh_vtk(path: &Path, mesh: &IntegrationMesh) -> Result<()> {
    let cells: Vec<usize> = (0..mesh.cells.len()).collect();
    let mut out = create(path)?;
    writeln!(
        out,
        "# vtk DataFile Version 3.0\nintegration cells\nASCII\nDATASET UNSTRUCTURED_GRID"
    )?;
    cell_block(&mut out, mesh, &cells)?;
    out.flush()?;
    Ok(())
}

/// Interface and boundary segments as polylines.
pub fn write_segments_vtk(path: &Path, mesh: &IntegrationMesh) -> Result<()> {
    let mut segs: Vec<(iga_core::Vec2, iga_core::Vec2, u32, u32)> = mesh
        .interfaces
        .iter()
        .map(|s| (s.a, s.b, s.materials.0, s.materials.1))
        .collect();
    segs.extend(mesh.boundaries.iter().map(|s| (s.a, s.b, s.material, 0)));
    let mut out = create(path)?;
    writeln!(
        out,
        "# vtk DataFile Version 3.0\nsegments\nASCII\nDATASET POLYDATA"
    )?;
    writeln!(out, "POINTS {} double", 2 * segs.len())?;
    for (a, b, _, _) in &segs {
        writeln!(out, "{} {} 0\n{} {} 0", a.x, a.y, b.x, b.y)?;
    }
    writeln!(out, "LINES {} {}", segs.len(), 3 * segs.len())?;
    for i in 0..segs.len() {
        writeln!(out, "2 {} {}", 2 * i, 2 * i + 1)?;
    }
    writeln!(out, "CELL_DATA {}", segs.len())?;
    writeln!(out, "SCALARS material_a int 1\nLOOKUP_TABLE default")?;
    for s in &segs {
        writeln!(out, "{}", s.2)?;
    }
    writeln!(out, "SCALARS material_b int 1\nLOOKUP_TABLE default")?;
    for s in &segs {
        writeln!(out, "{}", s.3)?;
    }
    out.flush()?;
    Ok(())
}

/// Matrix Market coordinate format, 1-based, all stored entries.
pub fn write_matrix_market(path: &Path, sys: &SparseSystem) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", sys.dim(), sys.dim(), sys.nnz())?;
    for i in 0..sys.dim() {
        for (j, v) in sys.row(i) {
            writeln!(out, "{} {} {v:e}", i + 1, j + 1)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `L_k` histogram as `(levels, count)` rows.
pub fn write_histogram_csv(path: &Path, dofs: &EnrichedDofMap) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["levels", "count"])?;
    for (l, n) in dofs.level_histogram() {
        w.write_record([l.to_string(), n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Parameter keys in order of first appearance.
fn param_keys<'a>(params: impl Iterator<Item = &'a Vec<(String, String)>>) -> Vec<String> {
    let mut keys: Vec<String> = Vec::new();
    for p in params {
        for (k, _) in p {
            if !keys.contains(k) {
                keys.push(k.clone());
            }
        }
    }
    keys
}

fn lookup<'a>(params: &'a [(String, String)], key: &str) -> &'a str {
    params
        .iter()
        .find(|(k, _)| k == key)
        .map_or("", |(_, v)| v.as_str())
}

/// One row per report: study, p, h, h_int, gamma_n, gamma_g, params...,
/// dofs, L2, H1, e_geo, cond, residual.
pub fn write_reports_csv(path: &Path, reports: &[ErrorReport]) -> Result<()> {
    let keys = param_keys(reports.iter().map(|r| &r.params));
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header: Vec<String> = ["study", "p", "h", "h_int", "gamma_n", "gamma_g"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(keys.iter().cloned());
    header.extend(
        ["dofs", "L2", "H1", "e_geo", "cond", "residual"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    for r in reports {
        let mut row = vec![
            r.study.name().to_string(),
            r.degree.to_string(),
            r.h.to_string(),
            opt(r.h_int),
            r.gamma_n.to_string(),
            r.gamma_g.to_string(),
        ];
        row.extend(keys.iter().map(|k| lookup(&r.params, k).to_string()));
        row.extend([
            r.dofs.to_string(),
            r.l2.to_string(),
            r.h1.to_string(),
            opt(r.e_geo),
            opt(r.condition),
            r.residual.to_string(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Fitted slopes per group; mesh sizes and mean errors are `;`-joined.
pub fn write_rates_csv(path: &Path, rates: &[RateSummary]) -> Result<()> {
    let keys = param_keys(rates.iter().map(|r| &r.params));
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header: Vec<String> = ["study", "p", "h_int", "gamma_g"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(keys.iter().cloned());
    header.extend(
        ["h", "mean_L2", "mean_H1", "L2_rate", "H1_rate"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(";")
    };
    for r in rates {
        let mut row = vec![
            r.study.name().to_string(),
            r.degree.to_string(),
            opt(r.h_int),
            r.gamma_g.to_string(),
        ];
        row.extend(keys.iter().map(|k| lookup(&r.params, k).to_string()));
        row.extend([
            join(&r.mesh_sizes),
            join(&r.mean_l2),
            join(&r.mean_h1),
            opt(r.l2_rate),
            opt(r.h1_rate),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Serializable mirror of [`ErrorReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub study: String,
    pub p: usize,
    pub h: f64,
    pub h_int: Option<f64>,
    pub gamma_n: f64,
    pub gamma_g: f64,
    pub params: Vec<(String, String)>,
    pub dofs: usize,
    pub l2: f64,
    pub h1: f64,
    pub e_geo: Option<f64>,
    pub cond: Option<f64>,
    pub residual: f64,
    pub converged: bool,
}

impl From<&ErrorReport> for ReportJson {
    fn from(r: &ErrorReport) -> Self {
        ReportJson {
            study: r.study.name().to_string(),
            p: r.degree,
            h: r.h,
            h_int: r.h_int,
            gamma_n: r.gamma_n,
            gamma_g: r.gamma_g,
            params: r.params.clone(),
            dofs: r.dofs,
            l2: r.l2,
            h1: r.h1,
            e_geo: r.e_geo,
            cond: r.condition,
            residual: r.residual,
            converged: r.converged,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}
