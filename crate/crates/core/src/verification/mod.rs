//! Analytical references, error norms, convergence rates and the benchmark
//! studies.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::cutmesh::IntegrationCell;
use crate::enrichment::{EnrichedField, FieldSample};
use crate::error::{Error, Result};
use crate::math::Vec2;

mod studies;

pub use studies::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BarLoad {
    /// Tip traction only.
    Linear,
    /// Constant body load `b0`.
    Quadratic,
    /// Body load `b0 x`.
    Cubic,
    /// Body load `b0 x^2`.
    Quartic,
}

impl BarLoad {
    pub const ALL: [BarLoad; 4] = [
        BarLoad::Linear,
        BarLoad::Quadratic,
        BarLoad::Cubic,
        BarLoad::Quartic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BarLoad::Linear => "bar-linear",
            BarLoad::Quadratic => "bar-quadratic",
            BarLoad::Cubic => "bar-cubic",
            BarLoad::Quartic => "bar-quartic",
        }
    }

    /// Accepts the full tag (`bar-linear`) or the short form (`linear`).
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        BarLoad::ALL
            .iter()
            .copied()
            .find(|l| l.name() == s || &l.name()[4..] == s)
            .ok_or_else(|| {
                Error::Argument(format!(
                    "unknown bar solution '{s}'; expected one of linear, quadratic, cubic, quartic"
                ))
            })
    }

    /// Axial body load per unit length at `x`.
    pub fn body(self, b0: f64, x: f64) -> f64 {
        match self {
            BarLoad::Linear => 0.0,
            BarLoad::Quadratic => b0,
            BarLoad::Cubic => b0 * x,
            BarLoad::Quartic => b0 * x * x,
        }
    }
}

/// Bar of length `length` and cross-section `area`, clamped at `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarParams {
    pub young: f64,
    pub area: f64,
    pub length: f64,
    /// Tip traction (linear case).
    pub traction: f64,
    /// Body-load amplitude `b0`.
    pub body: f64,
    pub u_d: f64,
}

/// Axial displacement and its derivative at `x`.
pub fn bar_solution(load: BarLoad, p: &BarParams, x: f64) -> Result<(f64, f64)> {
    let l = p.length;
    let slack = 1e-9 * l;
    if !(x >= -slack && x <= l + slack) {
        return Err(Error::Domain {
            value: x,
            lo: 0.0,
            hi: l,
        });
    }
    let ea = p.young * p.area;
    let b0 = p.body;
    let (u, du) = match load {
        BarLoad::Linear => (p.traction * x / ea, p.traction / ea),
        BarLoad::Quadratic => (b0 * (2.0 * l * x - x * x) / (2.0 * ea), b0 * (l - x) / ea),
        BarLoad::Cubic => (
            b0 * (3.0 * l * l * x - x * x * x) / (6.0 * ea),
            b0 * (l * l - x * x) / (2.0 * ea),
        ),
        BarLoad::Quartic => (
            b0 * (4.0 * l * l * l * x - x * x * x * x) / (12.0 * ea),
            b0 * (l * l * l - x * x * x) / (3.0 * ea),
        ),
    };
    Ok((p.u_d + u, du))
}

/// Heated circular inclusion of radius `radius` in an unheated matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderParams {
    pub theta_d: f64,
    pub q: f64,
    pub kappa_i: f64,
    pub kappa_ii: f64,
    pub radius: f64,
}

/// Temperature and radial derivative at distance `r` from the center.
pub fn cylinder_solution(p: &CylinderParams, r: f64) -> Result<(f64, f64)> {
    if !(r >= 0.0) {
        return Err(Error::Domain {
            value: r,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let a = p.radius;
    if r <= a {
        Ok((
            p.theta_d - p.q * r * r / (4.0 * p.kappa_i),
            -p.q * r / (2.0 * p.kappa_i),
        ))
    } else {
        Ok((
            p.theta_d
                - p.q * a * a / (4.0 * p.kappa_i)
                - p.q * a * a / (2.0 * p.kappa_ii) * Float::ln(r / a),
            -p.q * a * a / (2.0 * p.kappa_ii * r),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticalSolution {
    /// Axial bar solution `u(x0) e` with `x0 = e . (x - origin)`.
    Bar {
        load: BarLoad,
        params: BarParams,
        origin: Vec2,
        axis: Vec2,
    },
    Cylinder {
        params: CylinderParams,
        center: Vec2,
    },
}

impl AnalyticalSolution {
    pub fn components(&self) -> usize {
        match self {
            AnalyticalSolution::Bar { .. } => 2,
            AnalyticalSolution::Cylinder { .. } => 1,
        }
    }

    pub fn eval(&self, x: Vec2) -> Result<Vec<FieldSample>> {
        match *self {
            AnalyticalSolution::Bar {
                load,
                params,
                origin,
                axis,
            } => {
                let e = axis.normalized();
                let (u, du) = bar_solution(load, &params, e.dot(x - origin))?;
                Ok(vec![
                    FieldSample {
                        value: u * e.x,
                        gradient: e * (du * e.x),
                    },
                    FieldSample {
                        value: u * e.y,
                        gradient: e * (du * e.y),
                    },
                ])
            }
            AnalyticalSolution::Cylinder { params, center } => {
                let d = x - center;
                let r = d.norm();
                let (t, dt) = cylinder_solution(&params, r)?;
                let gradient = if r > 0.0 { d * (dt / r) } else { Vec2::ZERO };
                Ok(vec![FieldSample { value: t, gradient }])
            }
        }
    }
}

/// Something that can be sampled at a point of a given material.
pub trait Reference {
    fn sample(&self, x: Vec2, material: u32) -> Result<Vec<FieldSample>>;
}

impl Reference for AnalyticalSolution {
    fn sample(&self, x: Vec2, _material: u32) -> Result<Vec<FieldSample>> {
        self.eval(x)
    }
}

impl Reference for EnrichedField<'_> {
    fn sample(&self, x: Vec2, material: u32) -> Result<Vec<FieldSample>> {
        self.eval_at(x, Some(material)).ok_or_else(|| {
            Error::Argument(format!(
                "reference field has no material {material} near ({}, {})",
                x.x, x.y
            ))
        })
    }
}

/// Wraps a closure as a [`Reference`].
pub struct FnReference<F>(pub F);

impl<F> Reference for FnReference<F>
where
    F: Fn(Vec2, u32) -> Result<Vec<FieldSample>>,
{
    fn sample(&self, x: Vec2, material: u32) -> Result<Vec<FieldSample>> {
        (self.0)(x, material)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ErrorIntegrals {
    l2_num: f64,
    l2_den: f64,
    h1_num: f64,
    h1_den: f64,
}

fn error_integrals(
    field: &EnrichedField<'_>,
    reference: &dyn Reference,
    order: usize,
) -> Result<ErrorIntegrals> {
    let mut acc = ErrorIntegrals::default();
    for (ci, cell) in field.mesh.cells.iter().enumerate() {
        if cell.material == 0 {
            continue;
        }
        for q in cell.quadrature(order)? {
            let uh = field.eval(ci, q.x);
            let u = reference.sample(q.x, cell.material)?;
            if u.len() != uh.len() {
                return Err(Error::Argument(format!(
                    "reference has {} components, field has {}",
                    u.len(),
                    uh.len()
                )));
            }
            for (a, b) in uh.iter().zip(&u) {
                let dv = a.value - b.value;
                let dg = a.gradient - b.gradient;
                acc.l2_num += q.w * dv * dv;
                acc.l2_den += q.w * b.value * b.value;
                acc.h1_num += q.w * dg.dot(dg);
                acc.h1_den += q.w * b.gradient.dot(b.gradient);
            }
        }
    }
    Ok(acc)
}

fn ratio(num: f64, den: f64) -> Result<f64> {
    if !(den > 0.0) {
        return Err(Error::ZeroReference);
    }
    Ok(Float::sqrt(num / den))
}

/// Default error-norm quadrature order for a field of degree `p`.
pub fn error_order(degree: usize) -> usize {
    degree + 2
}

/// Relative L2 error over all non-void cells.
pub fn l2_error(field: &EnrichedField<'_>, reference: &dyn Reference, order: usize) -> Result<f64> {
    let acc = error_integrals(field, reference, order)?;
    ratio(acc.l2_num, acc.l2_den)
}

/// Relative H1 error semi-norm over all non-void cells.
pub fn h1_seminorm_error(
    field: &EnrichedField<'_>,
    reference: &dyn Reference,
    order: usize,
) -> Result<f64> {
    let acc = error_integrals(field, reference, order)?;
    ratio(acc.h1_num, acc.h1_den)
}

/// Both norms from one pass. The H1 entry is `None` for a reference with
/// vanishing gradient.
pub fn error_norms(
    field: &EnrichedField<'_>,
    reference: &dyn Reference,
    order: usize,
) -> Result<(f64, Option<f64>)> {
    let acc = error_integrals(field, reference, order)?;
    let l2 = ratio(acc.l2_num, acc.l2_den)?;
    let h1 = ratio(acc.h1_num, acc.h1_den).ok();
    Ok((l2, h1))
}

/// Signed relative area error `(V^h - V) / V` of `material`.
pub fn geo_error(cells: &[IntegrationCell], material: u32, exact: f64) -> Result<f64> {
    if !(exact > 0.0) {
        return Err(Error::Argument(format!(
            "reference measure must be positive, got {exact}"
        )));
    }
    let vh: f64 = cells
        .iter()
        .filter(|c| c.material == material)
        .map(|c| c.area())
        .sum();
    Ok((vh - exact) / exact)
}

/// Least-squares slope of `log(error)` against `log(h)`.
pub fn convergence_rate(h: &[f64], errors: &[f64]) -> Result<f64> {
    if h.len() != errors.len() {
        return Err(Error::Argument(format!(
            "{} mesh sizes but {} errors",
            h.len(),
            errors.len()
        )));
    }
    if h.len() < 2 {
        return Err(Error::Argument(
            "at least two data points are needed for a rate".into(),
        ));
    }
    if let Some(bad) = errors.iter().chain(h).find(|v| !(**v > 0.0)) {
        return Err(Error::Argument(format!(
            "rates need positive mesh sizes and errors, got {bad}"
        )));
    }
    let n = h.len() as f64;
    let xs: Vec<f64> = h.iter().map(|v| Float::ln(*v)).collect();
    let ys: Vec<f64> = errors.iter().map(|v| Float::ln(*v)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("mesh sizes must not all be equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Outcome of one benchmark run.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub study: StudyId,
    pub degree: usize,
    pub h: f64,
    pub h_int: Option<f64>,
    pub gamma_n: f64,
    pub gamma_g: f64,
    /// Study-specific parameters in a fixed order.
    pub params: Vec<(String, String)>,
    pub dofs: usize,
    pub l2: f64,
    pub h1: f64,
    pub e_geo: Option<f64>,
    pub condition: Option<f64>,
    pub residual: f64,
    pub converged: bool,
}

impl ErrorReport {
    pub fn param(&self, key: &str) -> Option<&str> {
        self.params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

#[cfg(test)]
mod tests;
