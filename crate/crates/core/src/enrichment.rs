//! Generalized Heaviside enrichment.
//!
//! Every background function `B_k` receives one degree of freedom per
//! connected single-material subregion of its support. Subregions are built
//! from the element components of the integration mesh, joined across
//! facets where both sides carry the same material along a portion of
//! nonzero length.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::cutmesh::{Facet, IntegrationCell, IntegrationMesh, MatchedPair, AREA_FLOOR};
use crate::error::{Error, Result};
use crate::math::{UnionFind, Vec2};
use crate::splines::TensorBSplineBasis;

/// Connected single-material part `Omega_k^l` of a basis support.
#[derive(Debug, Clone, PartialEq)]
pub struct Subregion {
    pub material: u32,
    /// `(element, component)` pairs in ascending order.
    pub members: Vec<(usize, usize)>,
    pub area: f64,
}

impl Subregion {
    pub fn contains(&self, element: usize, component: usize) -> bool {
        self.members.binary_search(&(element, component)).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisEnrichment {
    pub basis: usize,
    /// Levels ordered by their smallest `(element, component)` member.
    pub levels: Vec<Subregion>,
}

impl BasisEnrichment {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Level containing the given element component.
    pub fn level_of(&self, element: usize, component: usize) -> Option<usize> {
        self.levels
            .iter()
            .position(|s| s.contains(element, component))
    }

    /// Indicator `phi_k^l` on an integration cell.
    pub fn indicator(&self, level: usize, cell: &IntegrationCell) -> f64 {
        match self.levels.get(level) {
            Some(s) if s.contains(cell.element, cell.component) => 1.0,
            _ => 0.0,
        }
    }
}

fn check_compatible(basis: &TensorBSplineBasis, mesh: &IntegrationMesh) -> Result<()> {
    let bg = &mesh.background;
    if basis.num_elements_x() != bg.nx || basis.num_elements_y() != bg.ny {
        return Err(Error::Config(format!(
            "basis has {}x{} elements but the background mesh {}x{}",
            basis.num_elements_x(),
            basis.num_elements_y(),
            bg.nx,
            bg.ny
        )));
    }
    Ok(())
}

/// Matched pairs of every interior facet, indexed by facet id.
pub fn all_facet_pairs(mesh: &IntegrationMesh) -> (Vec<Facet>, Vec<Vec<MatchedPair>>) {
    let facets = mesh.background.facets();
    let pairs = facets.iter().map(|f| mesh.facet_pairs(f)).collect();
    (facets, pairs)
}

/// Subregions of every basis function's support.
pub fn enumerate_subregions(
    basis: &TensorBSplineBasis,
    mesh: &IntegrationMesh,
) -> Result<Vec<BasisEnrichment>> {
    check_compatible(basis, mesh)?;
    let (facets, pairs) = all_facet_pairs(mesh);
    let bg = &mesh.background;
    let nx = bg.nx;
    let vertical = (nx - 1) * bg.ny;
    let mut out = Vec::with_capacity(basis.num_basis());
    for k in 0..basis.num_basis() {
        let support = basis.support_elements(k);
        // Nodes: non-void components of the support elements, ordered by (e, c).
        let mut nodes: Vec<(usize, usize)> = Vec::new();
        for &e in &support {
            for (c, comp) in mesh.elements[e].components.iter().enumerate() {
                if comp.material != 0 && comp.area > 0.0 {
                    nodes.push((e, c));
                }
            }
        }
        nodes.sort_unstable();
        let node_of = |e: usize, c: usize| nodes.binary_search(&(e, c)).ok();
        let mut uf = UnionFind::new(nodes.len());
        let in_support = |e: usize| support.binary_search(&e).is_ok();
        for &e in &support {
            let (ex, ey) = bg.element_multi_index(e);
            let mut ids = Vec::with_capacity(2);
            if ex + 1 < nx && in_support(e + 1) {
                ids.push(ey * (nx - 1) + ex);
            }
            if ey + 1 < bg.ny && in_support(e + nx) {
                ids.push(vertical + ey * nx + ex);
            }
            for id in ids {
                let f = &facets[id];
                for pair in &pairs[id] {
                    if let (Some(a), Some(b)) = (
                        node_of(f.plus, pair.plus_component),
                        node_of(f.minus, pair.minus_component),
                    ) {
                        uf.union(a, b);
                    }
                }
            }
        }
        let (labels, count) = uf.labels();
        let mut levels: Vec<Subregion> = (0..count)
            .map(|_| Subregion {
                material: 0,
                members: Vec::new(),
                area: 0.0,
            })
            .collect();
        for (i, &(e, c)) in nodes.iter().enumerate() {
            let comp = &mesh.elements[e].components[c];
            let s = &mut levels[labels[i]];
            s.material = comp.material;
            s.members.push((e, c));
            s.area += comp.area;
        }
        out.push(BasisEnrichment { basis: k, levels });
    }
    Ok(out)
}

/// A level removed for having (numerically) no material support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroppedLevel {
    pub basis: usize,
    pub material: u32,
    pub area: f64,
}

/// Global numbering of the enriched degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct EnrichedDofMap {
    /// Field components per scalar function (1 for heat, 2 for elasticity).
    pub components: usize,
    pub degree: usize,
    /// `offsets[k]..offsets[k + 1]`: scalar ids of the levels kept for `k`.
    offsets: Vec<usize>,
    /// `table[e][c][local]`: scalar id of local function `local` on
    /// component `c` of element `e`.
    table: Vec<Vec<Vec<Option<usize>>>>,
    pub dropped: Vec<DroppedLevel>,
}

impl EnrichedDofMap {
    /// Numbers the levels of `enrichments` by basis, then level, then field
    /// component. Levels with material area below the floor are dropped.
    pub fn build(
        basis: &TensorBSplineBasis,
        mesh: &IntegrationMesh,
        enrichments: &[BasisEnrichment],
        components: usize,
    ) -> Result<Self> {
        check_compatible(basis, mesh)?;
        if components == 0 {
            return Err(Error::Argument(
                "field must have at least one component".into(),
            ));
        }
        let h = mesh.background.h();
        let floor = AREA_FLOOR * h * h;
        let nloc = (basis.degree() + 1) * (basis.degree() + 1);
        let mut table: Vec<Vec<Vec<Option<usize>>>> = mesh
            .elements
            .iter()
            .map(|el| vec![vec![None; nloc]; el.components.len()])
            .collect();
        let mut offsets = Vec::with_capacity(enrichments.len() + 1);
        let mut dropped = Vec::new();
        let mut next = 0usize;
        for enr in enrichments {
            offsets.push(next);
            for s in &enr.levels {
                if s.area < floor {
                    dropped.push(DroppedLevel {
                        basis: enr.basis,
                        material: s.material,
                        area: s.area,
                    });
                    continue;
                }
                for &(e, c) in &s.members {
                    let local = basis.local_index(e, enr.basis).ok_or_else(|| {
                        Error::Internal(format!("element {e} outside support of {}", enr.basis))
                    })?;
                    table[e][c][local] = Some(next);
                }
                next += 1;
            }
        }
        offsets.push(next);
        if next == 0 {
            return Err(Error::Config(
                "no degrees of freedom: the material domain does not meet any basis support".into(),
            ));
        }
        if !dropped.is_empty() {
            log::debug!(
                "dropped {} enrichment levels below the area floor",
                dropped.len()
            );
        }
        Ok(EnrichedDofMap {
            components,
            degree: basis.degree(),
            offsets,
            table,
            dropped,
        })
    }

    /// Enumeration followed by numbering.
    pub fn new(
        basis: &TensorBSplineBasis,
        mesh: &IntegrationMesh,
        components: usize,
    ) -> Result<Self> {
        let enr = enumerate_subregions(basis, mesh)?;
        Self::build(basis, mesh, &enr, components)
    }

    pub fn num_scalar(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn num_dofs(&self) -> usize {
        self.num_scalar() * self.components
    }

    pub fn num_basis(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of kept levels of basis `k`.
    pub fn levels(&self, k: usize) -> usize {
        self.offsets[k + 1] - self.offsets[k]
    }

    /// Scalar id of level `l` of basis `k`.
    pub fn scalar(&self, k: usize, level: usize) -> Option<usize> {
        (level < self.levels(k)).then(|| self.offsets[k] + level)
    }

    pub fn dof(&self, scalar: usize, component: usize) -> usize {
        scalar * self.components + component
    }

    /// Scalar ids of the local functions on one element component.
    pub fn local_scalars(&self, element: usize, component: usize) -> &[Option<usize>] {
        &self.table[element][component]
    }

    /// Histogram of `L_k` as `(levels, count)` pairs.
    pub fn level_histogram(&self) -> Vec<(usize, usize)> {
        let mut h: BTreeMap<usize, usize> = BTreeMap::new();
        for k in 0..self.num_basis() {
            *h.entry(self.levels(k)).or_insert(0) += 1;
        }
        h.into_iter().collect()
    }
}

/// Value and gradient of one field component at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldSample {
    pub value: f64,
    pub gradient: Vec2,
}

/// Enriched discrete field `sum_k sum_l phi_k^l B_k u_k^l`.
#[derive(Debug, Clone, Copy)]
pub struct EnrichedField<'a> {
    pub basis: &'a TensorBSplineBasis,
    pub mesh: &'a IntegrationMesh,
    pub dofs: &'a EnrichedDofMap,
    pub coefficients: &'a [f64],
}

impl<'a> EnrichedField<'a> {
    /// Evaluates the field on integration cell `cell` at `x`. Returns one
    /// sample per field component.
    pub fn eval(&self, cell: usize, x: Vec2) -> Vec<FieldSample> {
        let c = &self.mesh.cells[cell];
        self.eval_component(c.element, c.component, x)
    }

    /// Evaluates the polynomial piece selected by an element component.
    pub fn eval_component(&self, element: usize, component: usize, x: Vec2) -> Vec<FieldSample> {
        let nc = self.dofs.components;
        let mut out = vec![FieldSample::default(); nc];
        if self.mesh.elements[element].components[component].material == 0 {
            return out;
        }
        let ev = self.basis.element_space(element).eval(x, 1);
        for (local, s) in self
            .dofs
            .local_scalars(element, component)
            .iter()
            .enumerate()
        {
            if let Some(s) = *s {
                let (v, g) = (ev.value(local), ev.gradient(local));
                for (d, o) in out.iter_mut().enumerate() {
                    let u = self.coefficients[self.dofs.dof(s, d)];
                    o.value += u * v;
                    o.gradient += g * u;
                }
            }
        }
        out
    }

    /// Locates `x` (optionally restricted to `material`) and evaluates there.
    pub fn eval_at(&self, x: Vec2, material: Option<u32>) -> Option<Vec<FieldSample>> {
        let e = self.mesh.background.locate(x)?;
        let cell = self.mesh.find_cell(e, x, material)?;
        if self.mesh.cells[cell].material == 0 {
            return None;
        }
        Some(self.eval(cell, x))
    }
}
