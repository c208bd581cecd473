//! Elemental contributions of the weak form.
//!
//! Loads follow the virtual-work convention
//! `int eps(du):sigma - int du.b - int du.t_N = 0`. Heat conduction uses the
//! flux `kappa grad(theta)` wherever elasticity uses the traction
//! `sigma . n`, so both physics share one set of kernels: every test or
//! trial function is described by its vector value, its generalized strain
//! and the corresponding generalized stress.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::cutmesh::quadrature::{gauss_legendre, segment_rule};
use crate::cutmesh::{BoundarySegment, Facet, IntegrationCell, InterfaceSegment, MatchedPair};
use crate::enrichment::EnrichedDofMap;
use crate::error::{Error, Result};
use crate::geometry::Material;
use crate::math::Vec2;
use crate::splines::{ElementEval, ElementSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Physics {
    Heat,
    Elasticity,
}

impl Physics {
    /// Field components per node.
    pub fn components(self) -> usize {
        match self {
            Physics::Heat => 1,
            Physics::Elasticity => 2,
        }
    }
}

/// Plane-strain constitutive matrix in Voigt notation (engineering shear).
pub fn plane_strain_d(young: f64, poisson: f64) -> [[f64; 3]; 3] {
    let et = young / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    [
        [et * (1.0 - poisson), et * poisson, 0.0],
        [et * poisson, et * (1.0 - poisson), 0.0],
        [0.0, 0.0, et * (1.0 - 2.0 * poisson) / 2.0],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstitutiveModel {
    pub physics: Physics,
    /// Young's modulus for elasticity, conductivity for heat.
    pub modulus: f64,
    pub d: [[f64; 3]; 3],
}

impl ConstitutiveModel {
    pub fn new(physics: Physics, m: &Material) -> Self {
        match physics {
            Physics::Heat => ConstitutiveModel {
                physics,
                modulus: m.conductivity,
                d: [
                    [m.conductivity, 0.0, 0.0],
                    [0.0, m.conductivity, 0.0],
                    [0.0, 0.0, 0.0],
                ],
            },
            Physics::Elasticity => ConstitutiveModel {
                physics,
                modulus: m.young,
                d: plane_strain_d(m.young, m.poisson),
            },
        }
    }

    fn stress(&self, strain: &[f64; 3]) -> [f64; 3] {
        let d = &self.d;
        [
            d[0][0] * strain[0] + d[0][1] * strain[1] + d[0][2] * strain[2],
            d[1][0] * strain[0] + d[1][1] * strain[1] + d[1][2] * strain[2],
            d[2][0] * strain[0] + d[2][1] * strain[1] + d[2][2] * strain[2],
        ]
    }

    /// `sigma . n` (elasticity) or `kappa grad(theta) . n` (heat).
    fn traction(&self, stress: &[f64; 3], n: Vec2) -> [f64; 2] {
        match self.physics {
            Physics::Heat => [stress[0] * n.x + stress[1] * n.y, 0.0],
            Physics::Elasticity => [
                stress[0] * n.x + stress[2] * n.y,
                stress[2] * n.x + stress[1] * n.y,
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    /// Nitsche multiplier of `E/h` (or `kappa/h`).
    pub gamma_n: f64,
    /// Ghost-penalty multiplier of `E` (or `kappa`).
    pub gamma_g: f64,
}

impl PenaltyConfig {
    pub fn new(gamma_n: f64, gamma_g: f64) -> Result<Self> {
        if !(gamma_n > 0.0) || !gamma_n.is_finite() {
            return Err(Error::Config(alloc::format!(
                "gamma_N must be positive, got {gamma_n}"
            )));
        }
        if !(gamma_g >= 0.0) || !gamma_g.is_finite() {
            return Err(Error::Config(alloc::format!(
                "gamma_G must be non-negative, got {gamma_g}"
            )));
        }
        Ok(PenaltyConfig { gamma_n, gamma_g })
    }
}

/// Matrix and load entries in global DOF numbering. Repeated indices add up.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ElementContribution {
    pub matrix: Vec<(usize, usize, f64)>,
    pub rhs: Vec<(usize, f64)>,
}

impl ElementContribution {
    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty() && self.rhs.is_empty()
    }

    pub fn append(&mut self, mut other: ElementContribution) {
        self.matrix.append(&mut other.matrix);
        self.rhs.append(&mut other.rhs);
    }

    pub fn is_finite(&self) -> bool {
        self.matrix.iter().all(|e| e.2.is_finite()) && self.rhs.iter().all(|e| e.1.is_finite())
    }
}

/// Dense block over the DOFs touched by one contribution, emitted once.
#[derive(Default)]
struct Block {
    dofs: Vec<usize>,
    k: Vec<Vec<f64>>,
    f: Vec<f64>,
    has_rhs: bool,
}

impl Block {
    fn slot(&mut self, dof: usize) -> usize {
        if let Some(i) = self.dofs.iter().position(|&d| d == dof) {
            return i;
        }
        self.dofs.push(dof);
        for row in &mut self.k {
            row.push(0.0);
        }
        self.k.push(vec![0.0; self.dofs.len()]);
        self.f.push(0.0);
        self.dofs.len() - 1
    }

    fn slots(&mut self, dofs: impl Iterator<Item = usize>) -> Vec<usize> {
        dofs.map(|d| self.slot(d)).collect()
    }

    fn add_rhs(&mut self, i: usize, v: f64) {
        self.f[i] += v;
        self.has_rhs = true;
    }

    fn finish(self) -> ElementContribution {
        let mut out = ElementContribution::default();
        for (i, row) in self.k.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                out.matrix.push((self.dofs[i], self.dofs[j], *v));
            }
        }
        if self.has_rhs {
            out.rhs = self.dofs.iter().copied().zip(self.f).collect();
        }
        out
    }
}

/// One enriched test/trial function at a point.
#[derive(Debug, Clone, Copy)]
struct DofFn {
    dof: usize,
    value: [f64; 2],
    strain: [f64; 3],
    stress: [f64; 3],
}

fn dot2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Functions active on component `comp` of element `space.element` at the
/// evaluated point.
fn dof_functions(
    ev: &ElementEval,
    dofs: &EnrichedDofMap,
    element: usize,
    comp: usize,
    model: &ConstitutiveModel,
) -> Vec<DofFn> {
    let scalars = dofs.local_scalars(element, comp);
    let mut out = Vec::with_capacity(scalars.len() * dofs.components);
    for (local, s) in scalars.iter().enumerate() {
        let Some(s) = *s else { continue };
        let v = ev.value(local);
        let g = ev.gradient(local);
        match model.physics {
            Physics::Heat => {
                let strain = [g.x, g.y, 0.0];
                out.push(DofFn {
                    dof: dofs.dof(s, 0),
                    value: [v, 0.0],
                    strain,
                    stress: model.stress(&strain),
                });
            }
            Physics::Elasticity => {
                for (i, strain) in [[g.x, 0.0, g.y], [0.0, g.y, g.x]].into_iter().enumerate() {
                    let mut value = [0.0; 2];
                    value[i] = v;
                    out.push(DofFn {
                        dof: dofs.dof(s, i),
                        value,
                        strain,
                        stress: model.stress(&strain),
                    });
                }
            }
        }
    }
    out
}

fn check_field(dofs: &EnrichedDofMap, model: &ConstitutiveModel) -> Result<()> {
    if dofs.components != model.physics.components() {
        return Err(Error::Argument(alloc::format!(
            "DOF map has {} components but the physics needs {}",
            dofs.components,
            model.physics.components()
        )));
    }
    Ok(())
}

/// Stiffness and body load of one integration cell, integrated with the
/// cell rule of order `order`.
pub fn bulk_forms(
    space: &ElementSpace,
    dofs: &EnrichedDofMap,
    cell: &IntegrationCell,
    model: &ConstitutiveModel,
    body: Option<&dyn Fn(Vec2) -> [f64; 2]>,
    order: usize,
) -> Result<ElementContribution> {
    if cell.material == 0 {
        return Ok(ElementContribution::default());
    }
    check_field(dofs, model)?;
    let mut blk = Block::default();
    for qp in cell.quadrature(order)? {
        let ev = space.eval(qp.x, 1);
        let fns = dof_functions(&ev, dofs, cell.element, cell.component, model);
        let sl = blk.slots(fns.iter().map(|f| f.dof));
        for (a, &ia) in fns.iter().zip(&sl) {
            for (b, &ib) in fns.iter().zip(&sl) {
                blk.k[ia][ib] += qp.w * dot3(&a.strain, &b.stress);
            }
        }
        if let Some(body) = body {
            let load = body(qp.x);
            for (a, &ia) in fns.iter().zip(&sl) {
                blk.add_rhs(ia, qp.w * dot2(&a.value, &load));
            }
        }
    }
    Ok(blk.finish())
}

/// Prescribed traction (or normal flux) on a boundary segment.
pub fn neumann_forms(
    space: &ElementSpace,
    dofs: &EnrichedDofMap,
    seg: &BoundarySegment,
    model: &ConstitutiveModel,
    traction: &dyn Fn(Vec2) -> [f64; 2],
) -> Result<ElementContribution> {
    if seg.length() <= 0.0 {
        return Ok(ElementContribution::default());
    }
    check_field(dofs, model)?;
    let mut blk = Block::default();
    for qp in segment_rule(seg.a, seg.b, 2 * dofs.degree + 1) {
        let ev = space.eval(qp.x, 1);
        let t = traction(qp.x);
        for a in dof_functions(&ev, dofs, seg.element, seg.component, model) {
            let i = blk.slot(a.dof);
            blk.add_rhs(i, qp.w * dot2(&a.value, &t));
        }
    }
    let mut out = blk.finish();
    out.matrix.clear();
    Ok(out)
}

/// Non-symmetric Nitsche terms enforcing `u = u_D` on a boundary segment
/// with penalty `gamma_N * E / h`.
pub fn nitsche_dirichlet_forms(
    space: &ElementSpace,
    dofs: &EnrichedDofMap,
    seg: &BoundarySegment,
    model: &ConstitutiveModel,
    prescribed: &dyn Fn(Vec2) -> [f64; 2],
    gamma_n: f64,
    h: f64,
) -> Result<ElementContribution> {
    if seg.length() <= 0.0 {
        return Ok(ElementContribution::default());
    }
    check_field(dofs, model)?;
    let gamma = gamma_n * model.modulus / h;
    let n = seg.normal;
    let mut blk = Block::default();
    for qp in segment_rule(seg.a, seg.b, 2 * dofs.degree + 1) {
        let ev = space.eval(qp.x, 1);
        let fns = dof_functions(&ev, dofs, seg.element, seg.component, model);
        let sl = blk.slots(fns.iter().map(|f| f.dof));
        let tr: Vec<[f64; 2]> = fns.iter().map(|f| model.traction(&f.stress, n)).collect();
        let ud = prescribed(qp.x);
        for ((a, ta), &ia) in fns.iter().zip(&tr).zip(&sl) {
            for ((b, tb), &ib) in fns.iter().zip(&tr).zip(&sl) {
                let v = -dot2(&a.value, tb) + dot2(ta, &b.value) + gamma * dot2(&a.value, &b.value);
                blk.k[ia][ib] += qp.w * v;
            }
            blk.add_rhs(ia, qp.w * (dot2(ta, &ud) + gamma * dot2(&a.value, &ud)));
        }
    }
    Ok(blk.finish())
}

/// Per-element measures entering the interface weights and penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceMeasures {
    /// Area of material `I` (lower index) in the element.
    pub area_i: f64,
    pub area_j: f64,
    /// Length of the `I`-`J` interface in the element.
    pub length: f64,
}

/// Weights `(w_I, w_J)` of the mean operator.
pub fn interface_weights(meas: &InterfaceMeasures, s_i: f64, s_j: f64) -> (f64, f64) {
    let a = meas.area_i / s_i;
    let b = meas.area_j / s_j;
    (a / (a + b), b / (a + b))
}

/// Interface penalty `2 S_I meas(Gamma) / (meas_I / S_I + meas_J / S_J)`.
pub fn interface_penalty(meas: &InterfaceMeasures, s_i: f64, s_j: f64) -> f64 {
    2.0 * s_i * meas.length / (meas.area_i / s_i + meas.area_j / s_j)
}

/// Non-symmetric Nitsche coupling across an interface segment between
/// materials `I < J`; the jump is `u_I - u_J` and the normal points into `J`.
pub fn interface_forms(
    space: &ElementSpace,
    dofs: &EnrichedDofMap,
    seg: &InterfaceSegment,
    model_i: &ConstitutiveModel,
    model_j: &ConstitutiveModel,
    meas: &InterfaceMeasures,
) -> Result<ElementContribution> {
    if seg.length() <= 0.0 || seg.materials.0 == 0 || seg.materials.1 == 0 {
        return Ok(ElementContribution::default());
    }
    check_field(dofs, model_i)?;
    let (wi, wj) = interface_weights(meas, model_i.modulus, model_j.modulus);
    let gamma = interface_penalty(meas, model_i.modulus, model_j.modulus);
    let n = seg.normal;
    let mut blk = Block::default();
    for qp in segment_rule(seg.a, seg.b, 2 * dofs.degree + 1) {
        let ev = space.eval(qp.x, 1);
        // (function, traction, jump sign, mean weight)
        let mut fns: Vec<(DofFn, [f64; 2], f64, f64)> = Vec::new();
        for (comp, model, sign, w) in [
            (seg.components.0, model_i, 1.0, wi),
            (seg.components.1, model_j, -1.0, wj),
        ] {
            for f in dof_functions(&ev, dofs, seg.element, comp, model) {
                let t = model.traction(&f.stress, n);
                fns.push((f, t, sign, w));
            }
        }
        let sl = blk.slots(fns.iter().map(|f| f.0.dof));
        for ((a, ta, sa, wa), &ia) in fns.iter().zip(&sl) {
            for ((b, tb, sb, wb), &ib) in fns.iter().zip(&sl) {
                let v = -sa * wb * dot2(&a.value, tb)
                    + wa * sb * dot2(ta, &b.value)
                    + gamma * sa * sb * dot2(&a.value, &b.value);
                blk.k[ia][ib] += qp.w * v;
            }
        }
    }
    Ok(blk.finish())
}

/// Jump of the `k`-th normal derivative of every function active on the
/// pair at facet point `x`, as `(scalar id, coefficient)`.
fn normal_jump(
    plus: &ElementSpace,
    minus: &ElementSpace,
    dofs: &EnrichedDofMap,
    facet: &Facet,
    pair: &MatchedPair,
    x: Vec2,
    k: usize,
) -> Vec<(usize, f64)> {
    let axis = facet.normal_axis;
    let mut out = Vec::new();
    for (space, comp, sign) in [
        (plus, pair.plus_component, 1.0),
        (minus, pair.minus_component, -1.0),
    ] {
        let ev = space.eval(x, k);
        for (local, s) in dofs.local_scalars(space.element, comp).iter().enumerate() {
            if let Some(s) = *s {
                out.push((s, sign * ev.axis_deriv(local, axis, k)));
            }
        }
    }
    out
}

/// Ghost penalty of order `k` on one matched pair:
/// `gamma_G S h^(2k-1) int [[d_n^k du]] . [[d_n^k u]]`.
#[allow(clippy::too_many_arguments)]
pub fn ghost_order_forms(
    plus: &ElementSpace,
    minus: &ElementSpace,
    dofs: &EnrichedDofMap,
    facet: &Facet,
    pair: &MatchedPair,
    scale: f64,
    h: f64,
    k: usize,
) -> ElementContribution {
    let mut blk = Block::default();
    let p = dofs.degree;
    let factor = scale * Float::powi(h, 2 * k as i32 - 1);
    let (xs, ws) = gauss_legendre(p + 1);
    for &(t0, t1) in &pair.intervals {
        let half = 0.5 * (t1 - t0);
        for (xi, wi) in xs.iter().zip(&ws) {
            let x = facet.point(t0 + half * (xi + 1.0));
            let w = wi * half * factor;
            let jump = normal_jump(plus, minus, dofs, facet, pair, x, k);
            for d in 0..dofs.components {
                let sl = blk.slots(jump.iter().map(|&(s, _)| dofs.dof(s, d)));
                for (&(_, ja), &ia) in jump.iter().zip(&sl) {
                    for (&(_, jb), &ib) in jump.iter().zip(&sl) {
                        blk.k[ia][ib] += w * ja * jb;
                    }
                }
            }
        }
    }
    blk.finish()
}

/// Ghost penalty of all orders `1..=p` on one matched pair, scaled by the
/// pair material's modulus `s`.
pub fn ghost_forms(
    plus: &ElementSpace,
    minus: &ElementSpace,
    dofs: &EnrichedDofMap,
    facet: &Facet,
    pair: &MatchedPair,
    gamma_g: f64,
    s: f64,
    h: f64,
) -> ElementContribution {
    let mut out = ElementContribution::default();
    if gamma_g == 0.0 {
        return out;
    }
    for k in 1..=dofs.degree {
        out.append(ghost_order_forms(
            plus,
            minus,
            dofs,
            facet,
            pair,
            gamma_g * s,
            h,
            k,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutmesh::{BackgroundMesh, IntegrationMesh};
    use crate::geometry::{LevelSet, PhaseMap, Shape};
    use crate::splines::TensorBSplineBasis;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn dense(n: usize, c: &ElementContribution) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; n]; n];
        for &(i, j, v) in &c.matrix {
            a[i][j] += v;
        }
        a
    }

    struct Setup {
        basis: TensorBSplineBasis,
        mesh: IntegrationMesh,
    }

    fn uncut(n: usize, p: usize) -> Setup {
        let hi = Vec2::new(n as f64, n as f64);
        let basis = TensorBSplineBasis::uniform(Vec2::ZERO, hi, n, n, p).unwrap();
        let bg = BackgroundMesh::new(Vec2::ZERO, hi, n, n).unwrap();
        let far = LevelSet::analytic(Shape::plane(Vec2::new(100.0, 0.0), Vec2::new(1.0, 0.0)));
        let pm = PhaseMap::new(1, vec![1, 0]).unwrap();
        let mesh = IntegrationMesh::build(bg, &[far], &pm, 0).unwrap();
        Setup { basis, mesh }
    }

    fn steel() -> Material {
        Material::new(10.0, 0.3, 2.0).unwrap()
    }

    #[test]
    fn plane_strain_matrix() {
        let d = plane_strain_d(10.0, 0.0);
        assert_eq!(d, [[10.0, 0.0, 0.0], [0.0, 10.0, 0.0], [0.0, 0.0, 5.0]]);
        let d = plane_strain_d(1.0, 0.25);
        let et = 1.0 / (1.25 * 0.5);
        assert_relative_eq!(d[0][0], 0.75 * et);
        assert_relative_eq!(d[0][1], 0.25 * et);
        assert_relative_eq!(d[2][2], 0.25 * et);
        assert_eq!(d[0][1], d[1][0]);
    }

    #[test]
    fn interface_weight_examples() {
        let m = InterfaceMeasures {
            area_i: 1.0,
            area_j: 1.0,
            length: 1.0,
        };
        let (wi, wj) = interface_weights(&m, 1.0, 3.0);
        assert_relative_eq!(wi, 0.75);
        assert_relative_eq!(wj, 0.25);
        let m = InterfaceMeasures {
            area_i: 0.5,
            area_j: 0.5,
            length: 1.0,
        };
        assert_relative_eq!(interface_penalty(&m, 1.0, 1.0), 2.0);
    }

    #[test]
    fn penalty_validation() {
        assert!(PenaltyConfig::new(0.0, 1.0).is_err());
        assert!(PenaltyConfig::new(1.0, -1.0).is_err());
        assert!(PenaltyConfig::new(100.0, 0.0).is_ok());
    }

    fn element_bulk(s: &Setup, physics: Physics, e: usize) -> (usize, ElementContribution) {
        let dofs = EnrichedDofMap::new(&s.basis, &s.mesh, physics.components()).unwrap();
        let model = ConstitutiveModel::new(physics, &steel());
        let body = |_: Vec2| [1.0, 0.5];
        let mut c = ElementContribution::default();
        for cell in s.mesh.element_cells(e) {
            let space = s.basis.element_space(e);
            let order = s.basis.degree();
            c.append(bulk_forms(&space, &dofs, cell, &model, Some(&body), order).unwrap());
        }
        (dofs.num_dofs(), c)
    }

    #[test]
    fn bulk_annihilates_rigid_modes() {
        for p in 1..=3 {
            let s = uncut(2, p);
            let (n, c) = element_bulk(&s, Physics::Heat, 3);
            let a = dense(n, &c);
            for row in &a {
                assert!(row.iter().sum::<f64>().abs() < 1e-12);
            }
            let (n, c) = element_bulk(&s, Physics::Elasticity, 3);
            let a = dense(n, &c);
            // Translations and the infinitesimal rotation u = (-y, x).
            let greville = |k: usize| {
                let (ix, iy) = s.basis.basis_multi_index(k);
                let g = |kv: &crate::splines::KnotVector, i: usize| {
                    kv.knots()[i + 1..i + p + 1].iter().sum::<f64>() / p as f64
                };
                Vec2::new(g(s.basis.knots_x(), ix), g(s.basis.knots_y(), iy))
            };
            let modes: Vec<Vec<f64>> = vec![
                (0..n).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect(),
                (0..n).map(|i| if i % 2 == 1 { 1.0 } else { 0.0 }).collect(),
                (0..n)
                    .map(|i| {
                        let g = greville(i / 2);
                        if i % 2 == 0 {
                            -g.y
                        } else {
                            g.x
                        }
                    })
                    .collect(),
            ];
            for m in &modes {
                for row in &a {
                    let r: f64 = row.iter().zip(m).map(|(x, y)| x * y).sum();
                    assert!(r.abs() < 1e-11, "p={p} residual {r}");
                }
            }
        }
    }

    #[test]
    fn bulk_load_sums_to_body_force_times_area() {
        for p in 1..=3 {
            let s = uncut(2, p);
            let (_, c) = element_bulk(&s, Physics::Elasticity, 0);
            let fx: f64 = c.rhs.iter().filter(|e| e.0 % 2 == 0).map(|e| e.1).sum();
            let fy: f64 = c.rhs.iter().filter(|e| e.0 % 2 == 1).map(|e| e.1).sum();
            assert_relative_eq!(fx, 1.0, max_relative = 1e-13);
            assert_relative_eq!(fy, 0.5, max_relative = 1e-13);
        }
    }

    #[test]
    fn bulk_stiffness_is_symmetric() {
        let s = uncut(2, 2);
        let (n, c) = element_bulk(&s, Physics::Elasticity, 1);
        let a = dense(n, &c);
        for i in 0..n {
            for j in 0..n {
                assert!((a[i][j] - a[j][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ghost_lower_orders_vanish_on_smooth_splines() {
        // Random coefficients on an uncut mesh: only the p-th derivative jumps.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for p in 1..=3 {
            let s = uncut(3, p);
            let dofs = EnrichedDofMap::new(&s.basis, &s.mesh, 1).unwrap();
            let u: Vec<f64> = (0..dofs.num_dofs())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let f = s.mesh.background.facets()[4];
            let pairs = s.mesh.facet_pairs(&f);
            assert_eq!(pairs.len(), 1);
            let plus = s.basis.element_space(f.plus);
            let minus = s.basis.element_space(f.minus);
            for k in 1..=p {
                let c = ghost_order_forms(&plus, &minus, &dofs, &f, &pairs[0], 1.0, 1.0, k);
                let energy: f64 = c.matrix.iter().map(|&(i, j, v)| u[i] * v * u[j]).sum();
                if k < p {
                    assert!(energy.abs() < 1e-14, "p={p} k={k} energy {energy}");
                } else {
                    assert!(energy > 1e-6);
                }
            }
        }
    }
}
