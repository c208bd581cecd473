//! Benchmark problem builders and the study driver.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

use super::{
    convergence_rate, error_norms, error_order, geo_error, AnalyticalSolution, BarLoad, BarParams,
    CylinderParams, ErrorReport, Reference,
};
use crate::analysis::{constant, BodyFn, BoundaryCondition, Discretization, PointFn, Problem};
use crate::cutmesh::{BoundaryTag, Side};
use crate::enrichment::EnrichedField;
use crate::error::{Error, Result};
use crate::geometry::{LevelSet, Material, MaterialTable, PhaseMap, Shape};
use crate::math::Vec2;
use crate::system::{condition_number, solve, DENSE_LIMIT};
use crate::weakform::{PenaltyConfig, Physics};

pub const YOUNG: f64 = 10.0;
pub const BAR_TRACTION: f64 = 5.0;
pub const BAR_BODY: f64 = 2.0;
pub const GAMMA_N: f64 = 100.0;
pub const GAMMA_N_MULTIMATERIAL: f64 = 50.0;
pub const GAMMA_G: f64 = 1e-3;

/// Sliver widths as fractions of `h`.
pub const SLIVER_FRACTIONS: [f64; 18] = [
    0.001, 0.002, 0.0035, 0.005, 0.007, 0.01, 0.015, 0.025, 0.04, 0.06, 0.08, 0.1, 0.15, 0.25, 0.4,
    0.6, 0.8, 0.9,
];
pub const SLIVER_GHOST_PENALTIES: [f64; 8] = [0.0, 1e-9, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];
pub const ROTATION_ANGLES: [f64; 8] = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0];
pub const ROTATED_BAR_MESHES: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];
pub const JUNCTION_MESHES: [f64; 5] = [0.5, 0.25, 0.125, 0.0625, 0.03125];
pub const INCLUSION_MESHES: [f64; 5] = [0.5, 0.25, 0.125, 0.0625, 0.03125];
pub const INCLUSION_GRIDS: [f64; 3] = [0.03125, 0.0078125, 0.001953125];
pub const MULTIMATERIAL_MESHES: [f64; 3] = [0.125, 0.0625, 0.03125];
pub const MULTIMATERIAL_REFERENCE_H: f64 = 0.015625;

/// Rotated bar: origin, length and width.
pub const BAR_ORIGIN: Vec2 = Vec2::new(0.0123, 0.0271);
pub const ROTATED_LENGTH: f64 = 1.0;
pub const ROTATED_WIDTH: f64 = 0.5;

/// Multi-material inclusion center.
pub const INCLUSION_CENTER: Vec2 = Vec2::new(0.0371, 0.0213);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StudyId {
    Sliver,
    RotatedBar,
    Junction,
    Inclusion,
    Multimaterial,
}

impl StudyId {
    pub const ALL: [StudyId; 5] = [
        StudyId::Sliver,
        StudyId::RotatedBar,
        StudyId::Junction,
        StudyId::Inclusion,
        StudyId::Multimaterial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyId::Sliver => "sliver",
            StudyId::RotatedBar => "rotated-bar",
            StudyId::Junction => "junction",
            StudyId::Inclusion => "inclusion",
            StudyId::Multimaterial => "multimaterial",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        StudyId::ALL
            .iter()
            .copied()
            .find(|id| id.name() == s.trim())
            .ok_or_else(|| {
                let valid: Vec<&str> = StudyId::ALL.iter().map(|i| i.name()).collect();
                Error::Argument(format!(
                    "unknown study '{s}'; valid ids: {}",
                    valid.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Junction {
    /// One interface along y.
    TwoPhase,
    /// Interfaces along x and y, left half one phase.
    ThreePhase,
    FourPhase,
    /// Four phases separated by diagonals.
    FourPhaseRotated,
}

impl Junction {
    pub const ALL: [Junction; 4] = [
        Junction::TwoPhase,
        Junction::ThreePhase,
        Junction::FourPhase,
        Junction::FourPhaseRotated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Junction::TwoPhase => "two-phase",
            Junction::ThreePhase => "three-phase",
            Junction::FourPhase => "four-phase",
            Junction::FourPhaseRotated => "four-phase-rotated",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Junction::ALL
            .iter()
            .copied()
            .find(|j| j.name() == s.trim())
            .ok_or_else(|| Error::Argument(format!("unknown junction configuration '{s}'")))
    }
}

/// Material layouts of the multi-material inclusion problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MaterialPreset {
    /// Inclusion plus four quadrants, all with unit conductivity.
    Single5,
    /// Inclusion plus four quadrants with conductivities `i / 8`.
    Multi5,
    /// As `Multi5`, with each quadrant split into three convex pieces.
    Multi13,
}

impl MaterialPreset {
    pub const ALL: [MaterialPreset; 3] = [
        MaterialPreset::Single5,
        MaterialPreset::Multi5,
        MaterialPreset::Multi13,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MaterialPreset::Single5 => "single-5",
            MaterialPreset::Multi5 => "multi-5",
            MaterialPreset::Multi13 => "multi-13",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        MaterialPreset::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| {
                Error::Argument(format!(
                    "unknown material preset '{s}'; expected single-5, multi-5 or multi-13"
                ))
            })
    }

    pub fn num_materials(self) -> u32 {
        match self {
            MaterialPreset::Single5 | MaterialPreset::Multi5 => 5,
            MaterialPreset::Multi13 => 13,
        }
    }
}

/// Parameter-grid overrides; `None` keeps the study default.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub degrees: Vec<usize>,
    pub mesh_sizes: Option<Vec<f64>>,
    pub gamma_g: Option<Vec<f64>>,
    pub h_int: Option<Vec<f64>>,
    pub load: Option<BarLoad>,
    pub slivers: Option<Vec<f64>>,
    pub angles: Option<Vec<f64>>,
    pub junctions: Option<Vec<Junction>>,
    pub presets: Option<Vec<MaterialPreset>>,
    /// Compute condition numbers (defaults on for the bar studies).
    pub condition: Option<bool>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            degrees: vec![1, 2, 3],
            mesh_sizes: None,
            gamma_g: None,
            h_int: None,
            load: None,
            slivers: None,
            angles: None,
            junctions: None,
            presets: None,
            condition: None,
        }
    }
}

/// What a case is measured against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaseReference {
    Analytic(AnalyticalSolution),
    /// Fine-mesh solve of the same preset and degree.
    SelfReference(MaterialPreset),
}

/// One run of a study.
#[derive(Debug, Clone)]
pub struct Case {
    pub study: StudyId,
    pub degree: usize,
    pub h: f64,
    pub h_int: Option<f64>,
    pub params: Vec<(String, String)>,
    pub problem: Problem,
    pub reference: CaseReference,
    /// Material and exact area for the geometric error.
    pub measure: Option<(u32, f64)>,
    pub condition: bool,
}

fn cells_for(extent: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) {
        return Err(Error::Config(format!(
            "mesh size must be positive, got {h}"
        )));
    }
    let n = Float::round(extent / h);
    if n < 1.0 || Float::abs(n * h - extent) > 1e-9 * extent {
        return Err(Error::Config(format!(
            "mesh size {h} does not divide the domain extent {extent}"
        )));
    }
    Ok(n as usize)
}

fn plane(point: Vec2, normal: Vec2) -> LevelSet {
    LevelSet::analytic(Shape::plane(point, normal))
}

fn elastic() -> Result<Material> {
    Material::new(YOUNG, 0.0, 1.0)
}

fn conductor(kappa: f64) -> Result<Material> {
    Material::new(1.0, 0.0, kappa)
}

fn zero() -> PointFn {
    constant([0.0, 0.0])
}

/// Bar body load per unit area along `axis`, for cross-section `area`.
fn bar_body(load: BarLoad, origin: Vec2, axis: Vec2, area: f64) -> Option<BodyFn> {
    if load == BarLoad::Linear {
        return None;
    }
    Some(Arc::new(move |x: Vec2, _m: u32| {
        let f = load.body(BAR_BODY, axis.dot(x - origin)) / area;
        [f * axis.x, f * axis.y]
    }))
}

/// Axis-aligned bar `[0, 3 + delta] x [0, 1]` on a 4x1 grid with `h = 1`.
pub fn sliver_problem(
    degree: usize,
    delta: f64,
    gamma_g: f64,
    load: BarLoad,
) -> Result<(Problem, AnalyticalSolution)> {
    let length = 3.0 + delta;
    let area = 1.0;
    let axis = Vec2::new(1.0, 0.0);
    let mut bcs = vec![BoundaryCondition::dirichlet(
        BoundaryTag::Side(Side::Left),
        zero(),
    )];
    if load == BarLoad::Linear {
        bcs.push(BoundaryCondition::neumann(
            BoundaryTag::LevelSet(0),
            constant([BAR_TRACTION, 0.0]),
        ));
    }
    let problem = Problem {
        physics: Physics::Elasticity,
        degree,
        domain: (Vec2::ZERO, Vec2::new(4.0, 1.0)),
        resolution: (4, 1),
        level_sets: vec![plane(Vec2::new(length, 0.0), axis)],
        phase_map: PhaseMap::new(1, vec![1, 0])?,
        materials: MaterialTable::new().with(1, elastic()?)?,
        boundary_conditions: bcs,
        body_load: bar_body(load, Vec2::ZERO, axis, area),
        penalty: PenaltyConfig::new(GAMMA_N, gamma_g)?,
        integration_level: 0,
        quadrature_order: None,
    };
    let exact = AnalyticalSolution::Bar {
        load,
        params: BarParams {
            young: YOUNG,
            area,
            length,
            traction: if load == BarLoad::Linear {
                BAR_TRACTION
            } else {
                0.0
            },
            body: BAR_BODY,
            u_d: 0.0,
        },
        origin: Vec2::ZERO,
        axis,
    };
    Ok((problem, exact))
}

fn quartic_bar(origin: Vec2, axis: Vec2, length: f64, area: f64) -> AnalyticalSolution {
    AnalyticalSolution::Bar {
        load: BarLoad::Quartic,
        params: BarParams {
            young: YOUNG,
            area,
            length,
            traction: 0.0,
            body: BAR_BODY,
            u_d: 0.0,
        },
        origin,
        axis,
    }
}

/// Bar of length 1 and width 0.5 rotated by `angle` degrees in the
/// background `[-0.5, 1.5]^2`, clamped at its start and loaded by `b0 x0^2`.
pub fn rotated_bar_problem(
    degree: usize,
    h: f64,
    angle: f64,
    gamma_g: f64,
) -> Result<(Problem, AnalyticalSolution)> {
    let n = cells_for(2.0, h)?;
    let t = angle.to_radians();
    let e = Vec2::new(Float::cos(t), Float::sin(t));
    let m = e.perp();
    let o = BAR_ORIGIN;
    let half = 0.5 * ROTATED_WIDTH;
    let level_sets = vec![
        plane(o, -e),
        plane(o + e * ROTATED_LENGTH, e),
        plane(o + m * half, m),
        plane(o - m * half, -m),
    ];
    let problem = Problem {
        physics: Physics::Elasticity,
        degree,
        domain: (Vec2::new(-0.5, -0.5), Vec2::new(1.5, 1.5)),
        resolution: (n, n),
        level_sets,
        phase_map: PhaseMap::from_fn(4, |p| u32::from(p == 0))?,
        materials: MaterialTable::new().with(1, elastic()?)?,
        boundary_conditions: vec![BoundaryCondition::dirichlet(
            BoundaryTag::LevelSet(0),
            zero(),
        )],
        body_load: bar_body(BarLoad::Quartic, o, e, ROTATED_WIDTH),
        penalty: PenaltyConfig::new(GAMMA_N, gamma_g)?,
        integration_level: 0,
        quadrature_order: None,
    };
    Ok((problem, quartic_bar(o, e, ROTATED_LENGTH, ROTATED_WIDTH)))
}

/// Junction bar `[0, 1] x [0, 0.5]` in a shifted background grid. With
/// `identical` every phase maps to material 1; otherwise each phase has its
/// own material id (all with the same properties).
pub fn junction_problem(
    config: Option<Junction>,
    degree: usize,
    h: f64,
    gamma_g: f64,
    identical: bool,
) -> Result<(Problem, AnalyticalSolution)> {
    let nx = cells_for(1.5, h)?;
    let ny = cells_for(1.0, h)?;
    let lo = Vec2::new(-0.2371, -0.2113);
    let hi = lo + Vec2::new(1.5, 1.0);
    let x = Vec2::new(1.0, 0.0);
    let y = Vec2::new(0.0, 1.0);
    let mut level_sets = vec![
        plane(Vec2::ZERO, -x),
        plane(Vec2::new(1.0, 0.0), x),
        plane(Vec2::ZERO, -y),
        plane(Vec2::new(0.0, 0.5), y),
    ];
    let c = Vec2::new(0.5, 0.25);
    let inner: Vec<LevelSet> = match config {
        None => vec![],
        Some(Junction::TwoPhase) => vec![plane(c, x)],
        Some(Junction::ThreePhase) | Some(Junction::FourPhase) => vec![plane(c, x), plane(c, y)],
        Some(Junction::FourPhaseRotated) => {
            vec![
                plane(c, Vec2::new(1.0, 1.0)),
                plane(c, Vec2::new(1.0, -1.0)),
            ]
        }
    };
    let extra = inner.len();
    level_sets.extend(inner);
    // Material of the inner phase index `q` (bits of the junction planes).
    let material = move |q: u32| -> u32 {
        if identical {
            return 1;
        }
        match config {
            Some(Junction::ThreePhase) => {
                // Left half is one phase; the right half splits along y.
                if q & 1 == 0 {
                    1
                } else {
                    2 + (q >> 1)
                }
            }
            _ => 1 + q,
        }
    };
    let phase_map = PhaseMap::from_fn(
        4 + extra,
        |p| {
            if p & 0xF != 0 {
                0
            } else {
                material(p >> 4)
            }
        },
    )?;
    let mut materials = MaterialTable::new();
    for q in 0..(1u32 << extra) {
        materials.insert(material(q), elastic()?)?;
    }
    let area = 0.5;
    let problem = Problem {
        physics: Physics::Elasticity,
        degree,
        domain: (lo, hi),
        resolution: (nx, ny),
        level_sets,
        phase_map,
        materials,
        boundary_conditions: vec![BoundaryCondition::dirichlet(
            BoundaryTag::LevelSet(0),
            zero(),
        )],
        body_load: bar_body(BarLoad::Quartic, Vec2::ZERO, x, area),
        penalty: PenaltyConfig::new(GAMMA_N, gamma_g)?,
        integration_level: 0,
        quadrature_order: None,
    };
    Ok((problem, quartic_bar(Vec2::ZERO, x, 1.0, area)))
}

/// Relative L2 distance between the identical-material junction solve and
/// the single-phase solve of the same bar.
pub fn junction_identical_difference(config: Junction, degree: usize, h: f64) -> Result<f64> {
    let (multi, _) = junction_problem(Some(config), degree, h, GAMMA_G, true)?;
    let (single, _) = junction_problem(None, degree, h, GAMMA_G, true)?;
    let a = multi.solve()?;
    let b = single.solve()?;
    let (l2, _) = error_norms(&a.field(), &b.field(), error_order(degree))?;
    Ok(l2)
}

pub const INCLUSION: CylinderParams = CylinderParams {
    theta_d: 0.375,
    q: 1.0,
    kappa_i: 1.0,
    kappa_ii: 0.125,
    radius: 0.5,
};

/// Refinement level giving sub-cells of size `h_int` in elements of size `h`.
pub fn integration_level(h: f64, h_int: f64) -> u32 {
    let l = Float::round(Float::log2(h / h_int));
    if l > 0.0 {
        l as u32
    } else {
        0
    }
}

/// Heated circular inclusion in `[-1, 1]^2` with the closed-form solution
/// prescribed on the box.
pub fn inclusion_problem(
    degree: usize,
    h: f64,
    h_int: f64,
    gamma_g: f64,
) -> Result<(Problem, AnalyticalSolution)> {
    let n = cells_for(2.0, h)?;
    let exact = AnalyticalSolution::Cylinder {
        params: INCLUSION,
        center: Vec2::ZERO,
    };
    let boundary: PointFn = Arc::new(move |x: Vec2| {
        let t = super::cylinder_solution(&INCLUSION, x.norm()).map_or(f64::NAN, |v| v.0);
        [t, 0.0]
    });
    let problem = Problem {
        physics: Physics::Heat,
        degree,
        domain: (Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0)),
        resolution: (n, n),
        level_sets: vec![LevelSet::analytic(Shape::Circle {
            center: Vec2::ZERO,
            radius: INCLUSION.radius,
        })],
        phase_map: PhaseMap::new(1, vec![1, 2])?,
        materials: MaterialTable::new()
            .with(1, conductor(INCLUSION.kappa_i)?)?
            .with(2, conductor(INCLUSION.kappa_ii)?)?,
        boundary_conditions: Side::ALL
            .iter()
            .map(|s| BoundaryCondition::dirichlet(BoundaryTag::Side(*s), boundary.clone()))
            .collect(),
        body_load: Some(Arc::new(|_x: Vec2, m: u32| {
            [if m == 1 { INCLUSION.q } else { 0.0 }, 0.0]
        })),
        penalty: PenaltyConfig::new(GAMMA_N, gamma_g)?,
        integration_level: integration_level(h, h_int),
        quadrature_order: None,
    };
    Ok((problem, exact))
}

/// Material of phase `p` in the multi-material problem. Bits: 0 `x > cx`,
/// 1 `y > cy`, 2 left of the inclusion, 3 right, 4 below, 5 above.
pub fn multimaterial_material(preset: MaterialPreset, p: u32) -> u32 {
    let quadrant = p & 3;
    let out_x = (p >> 2) & 3 != 0;
    let out_y = (p >> 4) & 3 != 0;
    if !out_x && !out_y {
        return 1;
    }
    match preset {
        MaterialPreset::Single5 | MaterialPreset::Multi5 => 2 + quadrant,
        MaterialPreset::Multi13 => {
            let kind = match (out_x, out_y) {
                (true, false) => 0,
                (false, true) => 1,
                _ => 2,
            };
            2 + 3 * quadrant + kind
        }
    }
}

/// Conductivity of `material` under `preset`.
pub fn multimaterial_conductivity(preset: MaterialPreset, material: u32) -> f64 {
    if material <= 1 || preset == MaterialPreset::Single5 {
        return 1.0;
    }
    let quadrant = match preset {
        MaterialPreset::Multi13 => (material - 2) / 3,
        _ => material - 2,
    };
    f64::from(quadrant + 1) * 0.125
}

/// Square inclusion of half-width 0.5 in a host split into quadrants, under
/// the load `sin(2 pi x) sin(2 pi y)` with `theta = 0` on the box.
pub fn multimaterial_problem(
    preset: MaterialPreset,
    degree: usize,
    h: f64,
    gamma_g: f64,
) -> Result<Problem> {
    let n = cells_for(2.0, h)?;
    let c = INCLUSION_CENTER;
    let x = Vec2::new(1.0, 0.0);
    let y = Vec2::new(0.0, 1.0);
    let level_sets = vec![
        plane(c, x),
        plane(c, y),
        plane(c - x * 0.5, -x),
        plane(c + x * 0.5, x),
        plane(c - y * 0.5, -y),
        plane(c + y * 0.5, y),
    ];
    let mut materials = MaterialTable::new();
    for m in 1..=preset.num_materials() {
        materials.insert(m, conductor(multimaterial_conductivity(preset, m))?)?;
    }
    Ok(Problem {
        physics: Physics::Heat,
        degree,
        domain: (Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0)),
        resolution: (n, n),
        level_sets,
        phase_map: PhaseMap::from_fn(6, |p| multimaterial_material(preset, p))?,
        materials,
        boundary_conditions: Side::ALL
            .iter()
            .map(|s| BoundaryCondition::dirichlet(BoundaryTag::Side(*s), zero()))
            .collect(),
        body_load: Some(Arc::new(|x: Vec2, _m: u32| {
            [Float::sin(2.0 * PI * x.x) * Float::sin(2.0 * PI * x.y), 0.0]
        })),
        penalty: PenaltyConfig::new(GAMMA_N_MULTIMATERIAL, gamma_g)?,
        integration_level: 0,
        quadrature_order: None,
    })
}

pub fn multimaterial_reference_problem(preset: MaterialPreset, degree: usize) -> Result<Problem> {
    multimaterial_problem(preset, degree, MULTIMATERIAL_REFERENCE_H, GAMMA_G)
}

/// A solved field kept around as a reference.
#[derive(Debug, Clone)]
pub struct ReferenceField {
    pub discretization: Discretization,
    pub coefficients: Vec<f64>,
}

impl ReferenceField {
    pub fn solve(problem: &Problem) -> Result<Self> {
        let s = problem.solve()?;
        Ok(ReferenceField {
            discretization: s.discretization,
            coefficients: s.coefficients,
        })
    }

    /// Rebuilds the discretization of `problem` around stored coefficients.
    pub fn from_coefficients(problem: &Problem, coefficients: Vec<f64>) -> Result<Self> {
        let d = problem.discretize()?;
        if d.dofs.num_dofs() != coefficients.len() {
            return Err(Error::Config(format!(
                "stored reference has {} coefficients but the problem has {} dofs",
                coefficients.len(),
                d.dofs.num_dofs()
            )));
        }
        Ok(ReferenceField {
            discretization: d,
            coefficients,
        })
    }

    pub fn field(&self) -> EnrichedField<'_> {
        EnrichedField {
            basis: &self.discretization.basis,
            mesh: &self.discretization.mesh,
            dofs: &self.discretization.dofs,
            coefficients: &self.coefficients,
        }
    }
}

fn fmt_param(v: f64) -> String {
    format!("{v}")
}

/// Expands a study and its overrides into cases, ordered by parameter tuple.
pub fn cases(study: StudyId, config: &StudyConfig) -> Result<Vec<Case>> {
    for &p in &config.degrees {
        if !(1..=3).contains(&p) {
            return Err(Error::Config(format!(
                "spline degree must be 1, 2 or 3, got {p}"
            )));
        }
    }
    let mut out = Vec::new();
    let list = |o: &Option<Vec<f64>>, d: &[f64]| o.clone().unwrap_or_else(|| d.to_vec());
    match study {
        StudyId::Sliver => {
            let load = config.load.unwrap_or(BarLoad::Linear);
            let slivers = list(&config.slivers, &SLIVER_FRACTIONS);
            let gammas = list(&config.gamma_g, &SLIVER_GHOST_PENALTIES);
            let cond = config.condition.unwrap_or(true);
            for &p in &config.degrees {
                for &d in &slivers {
                    for &g in &gammas {
                        let (problem, exact) = sliver_problem(p, d, g, load)?;
                        out.push(Case {
                            study,
                            degree: p,
                            h: 1.0,
                            h_int: None,
                            params: vec![
                                ("load".into(), load.name().to_string()),
                                ("delta".into(), fmt_param(d)),
                            ],
                            problem,
                            reference: CaseReference::Analytic(exact),
                            measure: None,
                            condition: cond,
                        });
                    }
                }
            }
        }
        StudyId::RotatedBar => {
            let hs = list(&config.mesh_sizes, &ROTATED_BAR_MESHES);
            let angles = list(&config.angles, &ROTATION_ANGLES);
            let gammas = list(&config.gamma_g, &[GAMMA_G]);
            let cond = config.condition.unwrap_or(true);
            for &p in &config.degrees {
                for &g in &gammas {
                    for &h in &hs {
                        for &a in &angles {
                            let (problem, exact) = rotated_bar_problem(p, h, a, g)?;
                            out.push(Case {
                                study,
                                degree: p,
                                h,
                                h_int: None,
                                params: vec![("angle".into(), fmt_param(a))],
                                problem,
                                reference: CaseReference::Analytic(exact),
                                measure: None,
                                condition: cond,
                            });
                        }
                    }
                }
            }
        }
        StudyId::Junction => {
            let hs = list(&config.mesh_sizes, &JUNCTION_MESHES);
            let gammas = list(&config.gamma_g, &[GAMMA_G]);
            let configs = config
                .junctions
                .clone()
                .unwrap_or_else(|| Junction::ALL.to_vec());
            let cond = config.condition.unwrap_or(true);
            for &j in &configs {
                for &p in &config.degrees {
                    for &g in &gammas {
                        for &h in &hs {
                            let (problem, exact) = junction_problem(Some(j), p, h, g, false)?;
                            out.push(Case {
                                study,
                                degree: p,
                                h,
                                h_int: None,
                                params: vec![("config".into(), j.name().to_string())],
                                problem,
                                reference: CaseReference::Analytic(exact),
                                measure: None,
                                condition: cond,
                            });
                        }
                    }
                }
            }
        }
        StudyId::Inclusion => {
            let hs = list(&config.mesh_sizes, &INCLUSION_MESHES);
            let grids = list(&config.h_int, &INCLUSION_GRIDS);
            let gammas = list(&config.gamma_g, &[GAMMA_G]);
            let cond = config.condition.unwrap_or(false);
            let area = PI * INCLUSION.radius * INCLUSION.radius;
            for &p in &config.degrees {
                for &g in &gammas {
                    for &hi in &grids {
                        for &h in &hs {
                            let (problem, exact) = inclusion_problem(p, h, hi, g)?;
                            out.push(Case {
                                study,
                                degree: p,
                                h,
                                h_int: Some(hi),
                                params: vec![],
                                problem,
                                reference: CaseReference::Analytic(exact),
                                measure: Some((1, area)),
                                condition: cond,
                            });
                        }
                    }
                }
            }
        }
        StudyId::Multimaterial => {
            let hs = list(&config.mesh_sizes, &MULTIMATERIAL_MESHES);
            let gammas = list(&config.gamma_g, &[GAMMA_G]);
            let presets = config
                .presets
                .clone()
                .unwrap_or_else(|| MaterialPreset::ALL.to_vec());
            let cond = config.condition.unwrap_or(false);
            for &preset in &presets {
                for &p in &config.degrees {
                    for &g in &gammas {
                        for &h in &hs {
                            out.push(Case {
                                study,
                                degree: p,
                                h,
                                h_int: None,
                                params: vec![("preset".into(), preset.name().to_string())],
                                problem: multimaterial_problem(preset, p, h, g)?,
                                reference: CaseReference::SelfReference(preset),
                                measure: None,
                                condition: cond,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Solves one case. Self-referenced cases need the matching reference.
pub fn run_case(case: &Case, reference: Option<&ReferenceField>) -> Result<ErrorReport> {
    let problem = &case.problem;
    let d = problem.discretize()?;
    let sys = problem.assemble(&d)?;
    let report = solve(&sys)?;
    let condition = if case.condition && sys.dim() <= DENSE_LIMIT {
        Some(condition_number(&sys)?)
    } else {
        None
    };
    let field = EnrichedField {
        basis: &d.basis,
        mesh: &d.mesh,
        dofs: &d.dofs,
        coefficients: &report.solution,
    };
    let order = error_order(case.degree);
    let (l2, h1) = match case.reference {
        CaseReference::Analytic(exact) => error_norms(&field, &exact, order)?,
        CaseReference::SelfReference(preset) => {
            let r = reference.ok_or_else(|| {
                Error::Config(format!(
                    "case needs the {} reference solution for p = {}",
                    preset.name(),
                    case.degree
                ))
            })?;
            let rf = r.field();
            error_norms(&field, &rf as &dyn Reference, order)?
        }
    };
    let e_geo = match case.measure {
        Some((m, v)) => Some(geo_error(&d.mesh.cells, m, v)?),
        None => None,
    };
    Ok(ErrorReport {
        study: case.study,
        degree: case.degree,
        h: case.h,
        h_int: case.h_int,
        gamma_n: problem.penalty.gamma_n,
        gamma_g: problem.penalty.gamma_g,
        params: case.params.clone(),
        dofs: sys.dim(),
        l2,
        h1: h1.ok_or(Error::ZeroReference)?,
        e_geo,
        condition,
        residual: report.residual,
        converged: report.status == crate::system::SolveStatus::Converged,
    })
}

/// Reference solves needed by `cases`, as `(preset, degree)` pairs.
pub fn required_references(cases: &[Case]) -> Vec<(MaterialPreset, usize)> {
    let mut out: Vec<(MaterialPreset, usize)> = cases
        .iter()
        .filter_map(|c| match c.reference {
            CaseReference::SelfReference(p) => Some((p, c.degree)),
            CaseReference::Analytic(_) => None,
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Runs every case of a study sequentially.
pub fn run_benchmark(study: StudyId, config: &StudyConfig) -> Result<Vec<ErrorReport>> {
    let cases = cases(study, config)?;
    let mut refs: BTreeMap<(MaterialPreset, usize), ReferenceField> = BTreeMap::new();
    for (preset, p) in required_references(&cases) {
        let problem = multimaterial_reference_problem(preset, p)?;
        refs.insert((preset, p), ReferenceField::solve(&problem)?);
    }
    cases
        .iter()
        .map(|c| {
            let r = match c.reference {
                CaseReference::SelfReference(p) => refs.get(&(p, c.degree)),
                CaseReference::Analytic(_) => None,
            };
            run_case(c, r)
        })
        .collect()
}

/// Fitted rates of one group of reports that differ only in `h` (and in the
/// rotation angle, which is averaged).
#[derive(Debug, Clone, PartialEq)]
pub struct RateSummary {
    pub study: StudyId,
    pub degree: usize,
    pub h_int: Option<f64>,
    pub gamma_g: f64,
    pub params: Vec<(String, String)>,
    pub mesh_sizes: Vec<f64>,
    pub mean_l2: Vec<f64>,
    pub mean_h1: Vec<f64>,
    pub l2_rate: Option<f64>,
    pub h1_rate: Option<f64>,
}

/// Groups reports by everything except `h` and `angle`, averages over
/// angles and fits rates where at least two mesh sizes are present.
pub fn rate_summary(reports: &[ErrorReport]) -> Vec<RateSummary> {
    type Key = (StudyId, usize, Option<u64>, u64, Vec<(String, String)>);
    let mut groups: Vec<(Key, BTreeMap<u64, (f64, f64, usize)>)> = Vec::new();
    for r in reports {
        let params: Vec<(String, String)> = r
            .params
            .iter()
            .filter(|(k, _)| k != "angle")
            .cloned()
            .collect();
        let key: Key = (
            r.study,
            r.degree,
            r.h_int.map(f64::to_bits),
            r.gamma_g.to_bits(),
            params,
        );
        let idx = match groups.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                groups.push((key, BTreeMap::new()));
                groups.len() - 1
            }
        };
        let e = groups[idx].1.entry(r.h.to_bits()).or_insert((0.0, 0.0, 0));
        e.0 += r.l2;
        e.1 += r.h1;
        e.2 += 1;
    }
    groups
        .into_iter()
        .map(|((study, degree, h_int, g, params), by_h)| {
            // Largest h first.
            let rows: Vec<(f64, f64, f64)> = by_h
                .iter()
                .rev()
                .map(|(h, (l2, h1, n))| (f64::from_bits(*h), l2 / *n as f64, h1 / *n as f64))
                .collect();
            let hs: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let l2: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let h1: Vec<f64> = rows.iter().map(|r| r.2).collect();
            RateSummary {
                study,
                degree,
                h_int: h_int.map(f64::from_bits),
                gamma_g: f64::from_bits(g),
                params,
                l2_rate: convergence_rate(&hs, &l2).ok(),
                h1_rate: convergence_rate(&hs, &h1).ok(),
                mesh_sizes: hs,
                mean_l2: l2,
                mean_h1: h1,
            }
        })
        .collect()
}
