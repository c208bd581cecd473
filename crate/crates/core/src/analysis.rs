//! Problem definition and the solve driver.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::cutmesh::{BackgroundMesh, BoundaryTag, IntegrationMesh};
use crate::enrichment::{EnrichedDofMap, EnrichedField};
use crate::error::{Error, Result};
use crate::geometry::{LevelSet, MaterialTable, PhaseMap};
use crate::math::Vec2;
use crate::splines::TensorBSplineBasis;
use crate::system::{solve, SolveReport, SparseSystem};
use crate::weakform::{
    bulk_forms, ghost_forms, interface_forms, neumann_forms, nitsche_dirichlet_forms,
    ConstitutiveModel, ElementContribution, InterfaceMeasures, PenaltyConfig, Physics,
};

/// Vector-valued function of position (heat uses the first entry).
pub type PointFn = Arc<dyn Fn(Vec2) -> [f64; 2] + Send + Sync>;
/// Body load as a function of position and material index.
pub type BodyFn = Arc<dyn Fn(Vec2, u32) -> [f64; 2] + Send + Sync>;

pub fn constant(v: [f64; 2]) -> PointFn {
    Arc::new(move |_| v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

#[derive(Clone)]
pub struct BoundaryCondition {
    pub tag: BoundaryTag,
    pub kind: BoundaryKind,
    /// Prescribed value (Dirichlet) or traction / normal flux (Neumann).
    pub value: PointFn,
}

impl BoundaryCondition {
    pub fn dirichlet(tag: BoundaryTag, value: PointFn) -> Self {
        BoundaryCondition {
            tag,
            kind: BoundaryKind::Dirichlet,
            value,
        }
    }

    pub fn neumann(tag: BoundaryTag, value: PointFn) -> Self {
        BoundaryCondition {
            tag,
            kind: BoundaryKind::Neumann,
            value,
        }
    }
}

/// A complete immersed boundary-value problem on a uniform background grid.
#[derive(Clone)]
pub struct Problem {
    pub physics: Physics,
    pub degree: usize,
    pub domain: (Vec2, Vec2),
    pub resolution: (usize, usize),
    pub level_sets: Vec<LevelSet>,
    pub phase_map: PhaseMap,
    pub materials: MaterialTable,
    pub boundary_conditions: Vec<BoundaryCondition>,
    pub body_load: Option<BodyFn>,
    pub penalty: PenaltyConfig,
    pub integration_level: u32,
    /// Cell quadrature order; defaults to the spline degree.
    pub quadrature_order: Option<usize>,
}

impl core::fmt::Debug for Problem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Problem")
            .field("physics", &self.physics)
            .field("degree", &self.degree)
            .field("domain", &self.domain)
            .field("resolution", &self.resolution)
            .field("level_sets", &self.level_sets.len())
            .field("penalty", &self.penalty)
            .field("integration_level", &self.integration_level)
            .finish()
    }
}

/// Everything derived from the geometry before assembly.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub basis: TensorBSplineBasis,
    pub mesh: IntegrationMesh,
    pub dofs: EnrichedDofMap,
    pub models: BTreeMap<u32, ConstitutiveModel>,
}

/// Contributions grouped by term.
#[derive(Debug, Clone, Default)]
pub struct Contributions {
    pub bulk: Vec<ElementContribution>,
    pub neumann: Vec<ElementContribution>,
    pub dirichlet: Vec<ElementContribution>,
    pub interface: Vec<ElementContribution>,
    pub ghost: Vec<ElementContribution>,
}

impl Contributions {
    pub fn all(&self) -> impl Iterator<Item = &ElementContribution> {
        self.bulk
            .iter()
            .chain(&self.neumann)
            .chain(&self.dirichlet)
            .chain(&self.interface)
            .chain(&self.ghost)
    }
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.degree) {
            return Err(Error::Config(format!(
                "spline degree must be 1, 2 or 3, got {}",
                self.degree
            )));
        }
        if self.resolution.0 == 0 || self.resolution.1 == 0 {
            return Err(Error::Config(
                "background resolution must be at least 1".into(),
            ));
        }
        self.phase_map.check_against(&self.materials)?;
        if self.level_sets.len() != self.phase_map.num_level_sets() {
            return Err(Error::Config(format!(
                "{} level sets given but the phase map expects {}",
                self.level_sets.len(),
                self.phase_map.num_level_sets()
            )));
        }
        for bc in &self.boundary_conditions {
            if let BoundaryTag::LevelSet(l) = bc.tag {
                if l >= self.level_sets.len() {
                    return Err(Error::Config(format!(
                        "boundary condition refers to level set {l}, but only {} exist",
                        self.level_sets.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn background(&self) -> Result<BackgroundMesh> {
        BackgroundMesh::new(
            self.domain.0,
            self.domain.1,
            self.resolution.0,
            self.resolution.1,
        )
    }

    pub fn discretize(&self) -> Result<Discretization> {
        self.validate()?;
        let bg = self.background()?;
        let basis = TensorBSplineBasis::uniform(
            self.domain.0,
            self.domain.1,
            self.resolution.0,
            self.resolution.1,
            self.degree,
        )?;
        let mesh = IntegrationMesh::build(
            bg,
            &self.level_sets,
            &self.phase_map,
            self.integration_level,
        )?;
        let dofs = EnrichedDofMap::new(&basis, &mesh, self.physics.components())?;
        let mut models = BTreeMap::new();
        for m in self.materials.indices() {
            if let Some(mat) = self.materials.get(m) {
                models.insert(m, ConstitutiveModel::new(self.physics, mat));
            }
        }
        Ok(Discretization {
            basis,
            mesh,
            dofs,
            models,
        })
    }

    fn model<'a>(&self, d: &'a Discretization, m: u32) -> Result<&'a ConstitutiveModel> {
        d.models
            .get(&m)
            .ok_or_else(|| Error::Config(format!("material {m} is not defined")))
    }

    pub fn contributions(&self, d: &Discretization) -> Result<Contributions> {
        let mut out = Contributions::default();
        let order = self.quadrature_order.unwrap_or(self.degree);
        let h = d.mesh.background.h();
        for cell in &d.mesh.cells {
            if cell.material == 0 {
                continue;
            }
            let model = self.model(d, cell.material)?;
            let space = d.basis.element_space(cell.element);
            let material = cell.material;
            let c = match &self.body_load {
                Some(b) => {
                    let f = |x: Vec2| b(x, material);
                    bulk_forms(&space, &d.dofs, cell, model, Some(&f), order)?
                }
                None => bulk_forms(&space, &d.dofs, cell, model, None, order)?,
            };
            out.bulk.push(c);
        }
        for seg in &d.mesh.boundaries {
            let Some(bc) = self.boundary_conditions.iter().find(|b| b.tag == seg.tag) else {
                continue;
            };
            let model = self.model(d, seg.material)?;
            let space = d.basis.element_space(seg.element);
            let c = match bc.kind {
                BoundaryKind::Neumann => {
                    neumann_forms(&space, &d.dofs, seg, model, &|x| (bc.value)(x))?
                }
                BoundaryKind::Dirichlet => nitsche_dirichlet_forms(
                    &space,
                    &d.dofs,
                    seg,
                    model,
                    &|x| (bc.value)(x),
                    self.penalty.gamma_n,
                    h,
                )?,
            };
            match bc.kind {
                BoundaryKind::Neumann => out.neumann.push(c),
                BoundaryKind::Dirichlet => out.dirichlet.push(c),
            }
        }
        let mut lengths: BTreeMap<(usize, u32, u32), f64> = BTreeMap::new();
        for seg in &d.mesh.interfaces {
            *lengths
                .entry((seg.element, seg.materials.0, seg.materials.1))
                .or_insert(0.0) += seg.length();
        }
        for seg in &d.mesh.interfaces {
            let (mi, mj) = seg.materials;
            if mi == 0 || mj == 0 {
                continue;
            }
            let el = &d.mesh.elements[seg.element];
            let meas = InterfaceMeasures {
                area_i: el.material_area(mi),
                area_j: el.material_area(mj),
                length: lengths[&(seg.element, mi, mj)],
            };
            let space = d.basis.element_space(seg.element);
            out.interface.push(interface_forms(
                &space,
                &d.dofs,
                seg,
                self.model(d, mi)?,
                self.model(d, mj)?,
                &meas,
            )?);
        }
        if self.penalty.gamma_g > 0.0 {
            for gf in d.mesh.ghost_facets() {
                let plus = d.basis.element_space(gf.facet.plus);
                let minus = d.basis.element_space(gf.facet.minus);
                for pair in &gf.pairs {
                    let s = self.model(d, pair.material)?.modulus;
                    out.ghost.push(ghost_forms(
                        &plus,
                        &minus,
                        &d.dofs,
                        &gf.facet,
                        pair,
                        self.penalty.gamma_g,
                        s,
                        h,
                    ));
                }
            }
        }
        Ok(out)
    }

    pub fn assemble(&self, d: &Discretization) -> Result<SparseSystem> {
        let c = self.contributions(d)?;
        SparseSystem::assemble(d.dofs.num_dofs(), c.all())
    }

    /// Discretizes, assembles and solves.
    pub fn solve(&self) -> Result<Solution> {
        let d = self.discretize()?;
        let sys = self.assemble(&d)?;
        let report = solve(&sys)?;
        log::debug!(
            "solved {} dofs, residual {:e}, {} refinement steps",
            sys.dim(),
            report.residual,
            report.refinement_steps
        );
        Ok(Solution {
            coefficients: report.solution.clone(),
            discretization: d,
            report,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub discretization: Discretization,
    pub coefficients: Vec<f64>,
    pub report: SolveReport,
}

impl Solution {
    pub fn field(&self) -> EnrichedField<'_> {
        EnrichedField {
            basis: &self.discretization.basis,
            mesh: &self.discretization.mesh,
            dofs: &self.discretization.dofs,
            coefficients: &self.coefficients,
        }
    }
}
