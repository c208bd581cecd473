//! Level-set geometry: closed-form and spline level-set fields, phase
//! indices from sign vectors, and the phase-to-material map.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::math::Vec2;
use crate::splines::TensorBSplineBasis;

/// Closed-form signed distance functions.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// `n . (x - point)`, positive on the side the normal points to.
    Plane { point: Vec2, normal: Vec2 },
    /// `|x - center| - radius`, positive outside.
    Circle { center: Vec2, radius: f64 },
    /// Signed distance to a box rotated by `angle` (radians) about its
    /// center, positive outside.
    RotatedBox {
        center: Vec2,
        half_extents: Vec2,
        angle: f64,
    },
}

impl Shape {
    /// Plane through `point` whose normal is `normal` (normalized here).
    pub fn plane(point: Vec2, normal: Vec2) -> Self {
        Shape::Plane {
            point,
            normal: normal.normalized(),
        }
    }

    pub fn value(&self, x: Vec2) -> f64 {
        match *self {
            Shape::Plane { point, normal } => normal.dot(x - point),
            Shape::Circle { center, radius } => (x - center).norm() - radius,
            Shape::RotatedBox {
                center,
                half_extents,
                angle,
            } => {
                let (s, c) = (Float::sin(angle), Float::cos(angle));
                let d = x - center;
                let local = Vec2::new(c * d.x + s * d.y, -s * d.x + c * d.y);
                let q = Vec2::new(
                    Float::abs(local.x) - half_extents.x,
                    Float::abs(local.y) - half_extents.y,
                );
                let outside = Vec2::new(q.x.max(0.0), q.y.max(0.0)).norm();
                outside + q.x.max(q.y).min(0.0)
            }
        }
    }
}

/// Spline level-set field `phi(x) = sum_k B_k(x) phi^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetField {
    basis: TensorBSplineBasis,
    coefficients: Vec<f64>,
}

impl LevelSetField {
    pub fn new(basis: TensorBSplineBasis, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != basis.num_basis() {
            return Err(Error::Argument(format!(
                "level-set field has {} coefficients for {} basis functions",
                coefficients.len(),
                basis.num_basis()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Argument(
                "level-set coefficients must be finite".into(),
            ));
        }
        Ok(LevelSetField {
            basis,
            coefficients,
        })
    }

    /// Coefficients sampled from `f` at the Greville abscissae (exact
    /// interpolation for degree 1, linear reproduction for any degree).
    pub fn from_function(basis: TensorBSplineBasis, f: impl Fn(Vec2) -> f64) -> Result<Self> {
        let greville = |knots: &[f64], p: usize, i: usize| -> f64 {
            knots[i + 1..=i + p].iter().sum::<f64>() / p as f64
        };
        let p = basis.degree();
        let kx = basis.knots_x().knots().to_vec();
        let ky = basis.knots_y().knots().to_vec();
        let mut coefficients = Vec::with_capacity(basis.num_basis());
        for iy in 0..basis.num_basis_y() {
            for ix in 0..basis.num_basis_x() {
                let x = Vec2::new(greville(&kx, p, ix), greville(&ky, p, iy));
                coefficients.push(f(x));
            }
        }
        LevelSetField::new(basis, coefficients)
    }

    pub fn basis(&self) -> &TensorBSplineBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn eval(&self, x: Vec2) -> Result<f64> {
        let vals = self.basis.tensor_eval(x, 0)?;
        Ok(vals.iter().map(|v| v.value * self.coefficients[v.id]).sum())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LevelSetSource {
    Analytic(Shape),
    Field(LevelSetField),
}

/// One level-set function together with its iso-level `phi_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    pub source: LevelSetSource,
    pub iso: f64,
}

impl LevelSet {
    pub fn analytic(shape: Shape) -> Self {
        LevelSet {
            source: LevelSetSource::Analytic(shape),
            iso: 0.0,
        }
    }

    pub fn field(field: LevelSetField) -> Self {
        LevelSet {
            source: LevelSetSource::Field(field),
            iso: 0.0,
        }
    }

    pub fn with_iso(mut self, iso: f64) -> Self {
        self.iso = iso;
        self
    }

    pub fn eval(&self, x: Vec2) -> Result<f64> {
        match &self.source {
            LevelSetSource::Analytic(s) => Ok(s.value(x)),
            LevelSetSource::Field(f) => f.eval(x),
        }
    }
}

/// Moves a value within `eps` of the iso-level to `iso + eps`.
#[inline]
pub fn snap(value: f64, iso: f64, eps: f64) -> f64 {
    if Float::abs(value - iso) <= eps {
        iso + eps
    } else {
        value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseIndex {
    Phase(u32),
    /// The value of this level set lies within the snap tolerance.
    OnInterface(usize),
}

/// `P = sum_j 2^(j-1) f_j` with `f_j = [phi_j > phi_t]`.
pub fn phase_index(values: &[f64], iso: f64, eps: f64) -> PhaseIndex {
    let mut p = 0u32;
    for (j, &v) in values.iter().enumerate() {
        if Float::abs(v - iso) <= eps {
            return PhaseIndex::OnInterface(j);
        }
        if v > iso {
            p |= 1 << j;
        }
    }
    PhaseIndex::Phase(p)
}

/// Sign of `value` after snapping: values within `eps` of the iso-level
/// count as positive.
#[inline]
pub fn is_above(value: f64, iso: f64, eps: f64) -> bool {
    value >= iso - eps
}

/// Phase bits with each value compared against its own iso-level, using
/// the snapped sign of [`is_above`].
#[inline]
pub fn phase_bits(values: &[f64], isos: &[f64], eps: f64) -> u32 {
    let mut p = 0u32;
    for (j, (&v, &iso)) in values.iter().zip(isos).enumerate() {
        if is_above(v, iso, eps) {
            p |= 1 << j;
        }
    }
    p
}

/// Table from phase index to material index (0 is void).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseMap {
    num_level_sets: usize,
    map: Vec<u32>,
}

/// Hard cap on the number of level sets so that `2^n` stays small.
pub const MAX_LEVEL_SETS: usize = 16;

impl PhaseMap {
    pub fn new(num_level_sets: usize, map: Vec<u32>) -> Result<Self> {
        if num_level_sets == 0 || num_level_sets > MAX_LEVEL_SETS {
            return Err(Error::Config(format!(
                "number of level sets must be in 1..={MAX_LEVEL_SETS}, got {num_level_sets}"
            )));
        }
        if map.len() != 1 << num_level_sets {
            return Err(Error::Config(format!(
                "phase map has {} entries, {} level sets need {}",
                map.len(),
                num_level_sets,
                1usize << num_level_sets
            )));
        }
        Ok(PhaseMap {
            num_level_sets,
            map,
        })
    }

    /// Builds the table by evaluating `f` on every phase index.
    pub fn from_fn(num_level_sets: usize, f: impl Fn(u32) -> u32) -> Result<Self> {
        if num_level_sets > MAX_LEVEL_SETS {
            return Err(Error::Config(format!(
                "number of level sets must be in 1..={MAX_LEVEL_SETS}, got {num_level_sets}"
            )));
        }
        PhaseMap::new(num_level_sets, (0..1u32 << num_level_sets).map(f).collect())
    }

    pub fn num_level_sets(&self) -> usize {
        self.num_level_sets
    }

    pub fn num_phases(&self) -> usize {
        self.map.len()
    }

    pub fn material_of(&self, phase: u32) -> Result<u32> {
        self.map.get(phase as usize).copied().ok_or_else(|| {
            Error::Config(format!(
                "phase {phase} out of range for {} level sets",
                self.num_level_sets
            ))
        })
    }

    pub fn entries(&self) -> &[u32] {
        &self.map
    }

    /// Every non-void material referenced by a phase must exist in `table`.
    pub fn check_against(&self, table: &MaterialTable) -> Result<()> {
        for (phase, &m) in self.map.iter().enumerate() {
            if m != 0 && table.get(m).is_none() {
                return Err(Error::Config(format!(
                    "phase {phase} references undefined material {m}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub young: f64,
    pub poisson: f64,
    pub conductivity: f64,
}

impl Material {
    pub fn new(young: f64, poisson: f64, conductivity: f64) -> Result<Self> {
        let m = Material {
            young,
            poisson,
            conductivity,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.young > 0.0) || !self.young.is_finite() {
            return Err(Error::Config(format!(
                "Young's modulus must be positive, got {}",
                self.young
            )));
        }
        if !(self.conductivity > 0.0) || !self.conductivity.is_finite() {
            return Err(Error::Config(format!(
                "conductivity must be positive, got {}",
                self.conductivity
            )));
        }
        if !(self.poisson >= 0.0 && self.poisson < 0.5) {
            return Err(Error::Config(format!(
                "Poisson ratio must lie in [0, 0.5), got {}",
                self.poisson
            )));
        }
        Ok(())
    }
}

/// Materials by index; index 0 is reserved for void.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MaterialTable {
    materials: Vec<Option<Material>>,
}

impl MaterialTable {
    pub fn new() -> Self {
        MaterialTable {
            materials: alloc::vec![None],
        }
    }

    pub fn insert(&mut self, index: u32, material: Material) -> Result<()> {
        if index == 0 {
            return Err(Error::Config(
                "material index 0 is reserved for void".into(),
            ));
        }
        material.validate()?;
        let i = index as usize;
        if self.materials.len() <= i {
            self.materials.resize(i + 1, None);
        }
        self.materials[i] = Some(material);
        Ok(())
    }

    pub fn with(mut self, index: u32, material: Material) -> Result<Self> {
        self.insert(index, material)?;
        Ok(self)
    }

    pub fn get(&self, index: u32) -> Option<&Material> {
        self.materials.get(index as usize).and_then(|m| m.as_ref())
    }

    /// Indices of defined materials in ascending order.
    pub fn indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.materials
            .iter()
            .enumerate()
            .filter(|(_, m)| m.is_some())
            .map(|(i, _)| i as u32)
    }
}
