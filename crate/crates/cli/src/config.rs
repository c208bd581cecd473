//! JSON run configuration and its translation into an [`iga_core::analysis::Problem`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use iga_core::analysis::{BodyFn, BoundaryCondition, PointFn, Problem};
use iga_core::cutmesh::{BoundaryTag, Side};
use iga_core::geometry::{LevelSet, LevelSetField, Material, MaterialTable, PhaseMap, Shape};
use iga_core::splines::TensorBSplineBasis;
use iga_core::verification::{AnalyticalSolution, BarLoad, BarParams, CylinderParams};
use iga_core::weakform::{PenaltyConfig, Physics};
use iga_core::Vec2;

/// Parse or validation failure, anchored to a line of the source file when
/// one can be identified.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.path.display(), l, self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhysicsTag {
    Heat,
    Elasticity,
}

impl From<PhysicsTag> for Physics {
    fn from(p: PhysicsTag) -> Self {
        match p {
            PhysicsTag::Heat => Physics::Heat,
            PhysicsTag::Elasticity => Physics::Elasticity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub resolution: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LevelSetSpec {
    Plane {
        point: [f64; 2],
        normal: [f64; 2],
        #[serde(default)]
        iso: f64,
    },
    Circle {
        center: [f64; 2],
        radius: f64,
        #[serde(default)]
        iso: f64,
    },
    /// Rotated box; `angle` in degrees.
    Box {
        center: [f64; 2],
        half_extents: [f64; 2],
        #[serde(default)]
        angle: f64,
        #[serde(default)]
        iso: f64,
    },
    /// Spline field over the domain box with `(nx + p) * (ny + p)`
    /// coefficients, x fastest.
    Grid {
        degree: usize,
        resolution: [usize; 2],
        coefficients: Vec<f64>,
        #[serde(default)]
        iso: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    #[serde(default = "one")]
    pub young: f64,
    #[serde(default)]
    pub poisson: f64,
    #[serde(default = "one")]
    pub conductivity: f64,
}

fn one() -> f64 {
    1.0
}

/// Prescribed boundary value: a constant (scalar or vector) or the
/// configured reference solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueSpec {
    Scalar(f64),
    Vector([f64; 2]),
    Named(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    /// One of `left`, `right`, `bottom`, `top`.
    #[serde(default)]
    pub side: Option<String>,
    /// Zero contour of this level set where it borders void.
    #[serde(default)]
    pub level_set: Option<usize>,
    #[serde(rename = "type")]
    pub kind: BcKind,
    pub value: ValueSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LoadSpec {
    Constant {
        value: ValueSpec,
    },
    /// Constant per material; missing materials get zero.
    PerMaterial {
        values: BTreeMap<String, ValueSpec>,
    },
    /// `axis * sum_i c_i s^i` with `s = axis . (x - origin)`.
    Axial {
        origin: [f64; 2],
        axis: [f64; 2],
        coefficients: Vec<f64>,
    },
    /// `amplitude sin(2 pi fx x) sin(2 pi fy y)` in the first component.
    Sine {
        amplitude: f64,
        frequency: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReferenceSpec {
    Bar {
        /// `linear`, `quadratic`, `cubic` or `quartic`.
        load: String,
        young: f64,
        area: f64,
        length: f64,
        #[serde(default)]
        traction: f64,
        #[serde(default)]
        body: f64,
        #[serde(default)]
        u_d: f64,
        origin: [f64; 2],
        axis: [f64; 2],
    },
    Cylinder {
        theta_d: f64,
        q: f64,
        kappa_i: f64,
        kappa_ii: f64,
        radius: f64,
        center: [f64; 2],
    },
}

/// Exact area of one material, for the geometry error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactArea {
    pub material: u32,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Solution sampled on the integration mesh.
    #[serde(default = "yes")]
    pub field: bool,
    /// Integration cells and interface segments.
    #[serde(default)]
    pub mesh: bool,
    /// System matrix in Matrix Market format.
    #[serde(default)]
    pub matrix: bool,
    /// Enrichment level histogram.
    #[serde(default)]
    pub histogram: bool,
    /// Frobenius condition number in the report (small systems only).
    #[serde(default)]
    pub condition: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: None,
            field: true,
            mesh: false,
            matrix: false,
            histogram: false,
            condition: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub physics: PhysicsTag,
    pub degree: usize,
    pub domain: DomainSpec,
    pub level_sets: Vec<LevelSetSpec>,
    /// Material index per phase index; 0 is void.
    pub phases: Vec<u32>,
    /// Keyed by material index.
    pub materials: BTreeMap<String, MaterialSpec>,
    #[serde(default)]
    pub boundary_conditions: Vec<BoundarySpec>,
    #[serde(default)]
    pub body_load: Option<LoadSpec>,
    pub gamma_n: f64,
    #[serde(default)]
    pub gamma_g: f64,
    #[serde(default)]
    pub integration_level: u32,
    #[serde(default)]
    pub quadrature_order: Option<usize>,
    #[serde(default)]
    pub reference: Option<ReferenceSpec>,
    #[serde(default)]
    pub exact_area: Option<ExactArea>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// A parsed configuration together with its source, for anchoring errors.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub text: String,
    pub config: RunConfig,
}

/// Line of the first occurrence of `"key"` in `text`, 1-based.
pub fn key_line(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map(|i| i + 1)
}

/// Line of the `index`-th element of the top-level array under `key`,
/// assuming one element per line or one object per opening brace.
fn element_line(text: &str, key: &str, index: usize) -> Option<usize> {
    let start = key_line(text, key)?;
    let lines: Vec<&str> = text.lines().collect();
    let first = lines[start - 1];
    let after = &first[first.find(&format!("\"{key}\""))? + key.len() + 2..];
    // Flat array on one line.
    if after.contains('[') && after.contains(']') {
        return Some(start);
    }
    let mut depth = 0i32;
    let mut seen = 0usize;
    for (i, line) in lines.iter().enumerate().skip(start - 1) {
        let body = if i == start - 1 { after } else { line };
        for ch in body.chars() {
            match ch {
                '[' | '{' => {
                    if depth == 1 && ch == '{' {
                        if seen == index {
                            return Some(i + 1);
                        }
                        seen += 1;
                    }
                    depth += 1;
                }
                ']' | '}' => {
                    depth -= 1;
                    if depth <= 0 {
                        return Some(start);
                    }
                }
                _ => {}
            }
        }
        if depth == 1 && i > start - 1 {
            let t = line.trim().trim_end_matches(',');
            if !t.is_empty() && !t.starts_with('{') && !t.starts_with('}') {
                if seen == index {
                    return Some(i + 1);
                }
                seen += 1;
            }
        }
    }
    Some(start)
}

impl LoadedConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: None,
            message: format!("cannot read configuration: {e}"),
        })?;
        Self::from_str(path, text)
    }

    pub fn from_str(path: &Path, text: String) -> Result<Self, ConfigError> {
        let config: RunConfig = serde_json::from_str(&text).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: (e.line() > 0).then_some(e.line()),
            message: strip_position(&e.to_string()),
        })?;
        let loaded = LoadedConfig {
            path: path.to_path_buf(),
            text,
            config,
        };
        loaded.validate()?;
        Ok(loaded)
    }

    fn err(&self, line: Option<usize>, message: String) -> ConfigError {
        ConfigError {
            path: self.path.clone(),
            line,
            message,
        }
    }

    fn at_key(&self, key: &str, message: String) -> ConfigError {
        self.err(key_line(&self.text, key), message)
    }

    /// Checks that do not need the core library: sizes, references between
    /// sections and value kinds.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.config;
        if !(1..=3).contains(&c.degree) {
            return Err(self.at_key(
                "degree",
                format!("degree must be 1, 2 or 3, got {}", c.degree),
            ));
        }
        let d = &c.domain;
        if d.resolution[0] == 0 || d.resolution[1] == 0 {
            return Err(self.at_key("resolution", "resolution must be at least 1".into()));
        }
        if !(d.hi[0] > d.lo[0] && d.hi[1] > d.lo[1]) {
            return Err(self.at_key("domain", "domain box must have hi > lo".into()));
        }
        let n = c.level_sets.len();
        if n == 0 {
            return Err(self.at_key("level_sets", "at least one level set is required".into()));
        }
        if n > iga_core::geometry::MAX_LEVEL_SETS {
            return Err(self.at_key(
                "level_sets",
                format!(
                    "{n} level sets exceed the limit of {}",
                    iga_core::geometry::MAX_LEVEL_SETS
                ),
            ));
        }
        if c.phases.len() != 1 << n {
            return Err(self.at_key(
                "phases",
                format!(
                    "{n} level sets need {} phase entries, got {}",
                    1usize << n,
                    c.phases.len()
                ),
            ));
        }
        let mut materials = BTreeMap::new();
        for (key, m) in &c.materials {
            let idx: u32 = key.parse().map_err(|_| {
                self.at_key(
                    key,
                    format!("material key {key:?} is not a non-negative integer"),
                )
            })?;
            if idx == 0 {
                return Err(self.at_key(key, "material 0 is reserved for void".into()));
            }
            materials.insert(idx, m);
        }
        for (phase, &m) in c.phases.iter().enumerate() {
            if m != 0 && !materials.contains_key(&m) {
                return Err(self.err(
                    element_line(&self.text, "phases", phase),
                    format!("phase {phase} refers to undefined material {m}"),
                ));
            }
        }
        for (i, bc) in c.boundary_conditions.iter().enumerate() {
            let line = element_line(&self.text, "boundary_conditions", i);
            match (&bc.side, bc.level_set) {
                (Some(s), None) => {
                    parse_side(s).ok_or_else(|| {
                        self.err(
                            line,
                            format!("unknown side {s:?}; expected left, right, bottom or top"),
                        )
                    })?;
                }
                (None, Some(l)) if l < n => {}
                (None, Some(l)) => {
                    return Err(self.err(
                        line,
                        format!(
                            "boundary condition {i} refers to level set {l}, but only {n} exist"
                        ),
                    ))
                }
                _ => {
                    return Err(self.err(
                        line,
                        format!("boundary condition {i} needs exactly one of side or level_set"),
                    ))
                }
            }
            self.check_value(&bc.value, line)?;
        }
        if let Some(load) = &c.body_load {
            let line = key_line(&self.text, "body_load");
            match load {
                LoadSpec::Constant { value } => self.check_constant(value, line)?,
                LoadSpec::PerMaterial { values } => {
                    for (k, v) in values {
                        let m: u32 = k.parse().map_err(|_| {
                            self.err(line, format!("load key {k:?} is not a material index"))
                        })?;
                        if !materials.contains_key(&m) {
                            return Err(self.err(line, format!("load for undefined material {m}")));
                        }
                        self.check_constant(v, line)?;
                    }
                }
                LoadSpec::Axial { .. } | LoadSpec::Sine { .. } => {}
            }
        }
        if let Some(ReferenceSpec::Bar { load, .. }) = &c.reference {
            BarLoad::parse(load).map_err(|e| self.at_key("reference", e.to_string()))?;
        }
        if let Some(r) = &c.reference {
            let comps = match r {
                ReferenceSpec::Bar { .. } => 2,
                ReferenceSpec::Cylinder { .. } => 1,
            };
            if comps != Physics::from(c.physics).components() {
                return Err(self.at_key(
                    "reference",
                    "reference solution does not match the physics".into(),
                ));
            }
        }
        if !(c.gamma_n > 0.0) {
            return Err(self.at_key("gamma_n", "gamma_n must be positive".into()));
        }
        if !(c.gamma_g >= 0.0) {
            return Err(self.at_key("gamma_g", "gamma_g must be non-negative".into()));
        }
        Ok(())
    }

    fn check_constant(&self, v: &ValueSpec, line: Option<usize>) -> Result<(), ConfigError> {
        match v {
            ValueSpec::Named(s) => Err(self.err(
                line,
                format!("expected a number or a [x, y] pair, got {s:?}"),
            )),
            _ => Ok(()),
        }
    }

    fn check_value(&self, v: &ValueSpec, line: Option<usize>) -> Result<(), ConfigError> {
        match v {
            ValueSpec::Named(s) if s == "reference" => {
                if self.config.reference.is_none() {
                    return Err(
                        self.err(line, "value \"reference\" needs a reference section".into())
                    );
                }
                Ok(())
            }
            ValueSpec::Named(s) => Err(self.err(
                line,
                format!("unknown value {s:?}; expected a number, a pair or \"reference\""),
            )),
            _ => Ok(()),
        }
    }

    /// Builds the core problem. Errors from the core library are reported
    /// against the file without a line.
    pub fn problem(&self) -> Result<Problem, ConfigError> {
        let c = &self.config;
        let core_err = |e: iga_core::Error| self.err(None, e.to_string());
        let lo = vec2(c.domain.lo);
        let hi = vec2(c.domain.hi);
        let mut level_sets = Vec::with_capacity(c.level_sets.len());
        for (i, spec) in c.level_sets.iter().enumerate() {
            let ls = match spec {
                LevelSetSpec::Plane { point, normal, iso } => {
                    LevelSet::analytic(Shape::plane(vec2(*point), vec2(*normal))).with_iso(*iso)
                }
                LevelSetSpec::Circle {
                    center,
                    radius,
                    iso,
                } => LevelSet::analytic(Shape::Circle {
                    center: vec2(*center),
                    radius: *radius,
                })
                .with_iso(*iso),
                LevelSetSpec::Box {
                    center,
                    half_extents,
                    angle,
                    iso,
                } => LevelSet::analytic(Shape::RotatedBox {
                    center: vec2(*center),
                    half_extents: vec2(*half_extents),
                    angle: angle.to_radians(),
                })
                .with_iso(*iso),
                LevelSetSpec::Grid {
                    degree,
                    resolution,
                    coefficients,
                    iso,
                } => {
                    let line = element_line(&self.text, "level_sets", i);
                    let basis =
                        TensorBSplineBasis::uniform(lo, hi, resolution[0], resolution[1], *degree)
                            .map_err(|e| self.err(line, format!("level set {i}: {e}")))?;
                    let field = LevelSetField::new(basis, coefficients.clone())
                        .map_err(|e| self.err(line, format!("level set {i}: {e}")))?;
                    LevelSet::field(field).with_iso(*iso)
                }
            };
            level_sets.push(ls);
        }
        let mut materials = MaterialTable::new();
        for (key, m) in &c.materials {
            let idx: u32 = key
                .parse()
                .map_err(|_| self.at_key(key, "bad material key".into()))?;
            let mat = Material::new(m.young, m.poisson, m.conductivity)
                .map_err(|e| self.at_key(key, format!("material {idx}: {e}")))?;
            materials.insert(idx, mat).map_err(core_err)?;
        }
        let phase_map = PhaseMap::new(c.level_sets.len(), c.phases.clone())
            .map_err(|e| self.at_key("phases", e.to_string()))?;
        let exact = self.reference()?;
        let mut bcs = Vec::new();
        for bc in &c.boundary_conditions {
            let tag = match (&bc.side, bc.level_set) {
                (Some(s), _) => BoundaryTag::Side(parse_side(s).expect("validated")),
                (None, Some(l)) => BoundaryTag::LevelSet(l),
                (None, None) => unreachable!("validated"),
            };
            let value: PointFn = match &bc.value {
                ValueSpec::Named(_) => {
                    let exact = exact.expect("validated");
                    Arc::new(move |x: Vec2| match exact.eval(x) {
                        Ok(s) if s.len() == 2 => [s[0].value, s[1].value],
                        Ok(s) => [s[0].value, 0.0],
                        Err(_) => [f64::NAN, f64::NAN],
                    })
                }
                v => {
                    let v = constant(v);
                    Arc::new(move |_| v)
                }
            };
            bcs.push(match bc.kind {
                BcKind::Dirichlet => BoundaryCondition::dirichlet(tag, value),
                BcKind::Neumann => BoundaryCondition::neumann(tag, value),
            });
        }
        let penalty = PenaltyConfig::new(c.gamma_n, c.gamma_g)
            .map_err(|e| self.at_key("gamma_n", e.to_string()))?;
        let problem = Problem {
            physics: c.physics.into(),
            degree: c.degree,
            domain: (lo, hi),
            resolution: (c.domain.resolution[0], c.domain.resolution[1]),
            level_sets,
            phase_map,
            materials,
            boundary_conditions: bcs,
            body_load: c.body_load.as_ref().map(body_fn),
            penalty,
            integration_level: c.integration_level,
            quadrature_order: c.quadrature_order,
        };
        problem.validate().map_err(core_err)?;
        Ok(problem)
    }

    pub fn reference(&self) -> Result<Option<AnalyticalSolution>, ConfigError> {
        Ok(match &self.config.reference {
            None => None,
            Some(ReferenceSpec::Bar {
                load,
                young,
                area,
                length,
                traction,
                body,
                u_d,
                origin,
                axis,
            }) => Some(AnalyticalSolution::Bar {
                load: BarLoad::parse(load).map_err(|e| self.at_key("reference", e.to_string()))?,
                params: BarParams {
                    young: *young,
                    area: *area,
                    length: *length,
                    traction: *traction,
                    body: *body,
                    u_d: *u_d,
                },
                origin: vec2(*origin),
                axis: vec2(*axis),
            }),
            Some(ReferenceSpec::Cylinder {
                theta_d,
                q,
                kappa_i,
                kappa_ii,
                radius,
                center,
            }) => Some(AnalyticalSolution::Cylinder {
                params: CylinderParams {
                    theta_d: *theta_d,
                    q: *q,
                    kappa_i: *kappa_i,
                    kappa_ii: *kappa_ii,
                    radius: *radius,
                },
                center: vec2(*center),
            }),
        })
    }
}

/// serde_json appends " at line L column C"; the line is reported separately.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

fn vec2(a: [f64; 2]) -> Vec2 {
    Vec2::new(a[0], a[1])
}

pub fn parse_side(s: &str) -> Option<Side> {
    match s {
        "left" => Some(Side::Left),
        "right" => Some(Side::Right),
        "bottom" => Some(Side::Bottom),
        "top" => Some(Side::Top),
        _ => None,
    }
}

fn constant(v: &ValueSpec) -> [f64; 2] {
    match v {
        ValueSpec::Scalar(s) => [*s, 0.0],
        ValueSpec::Vector(v) => *v,
        ValueSpec::Named(_) => [0.0, 0.0],
    }
}

fn body_fn(spec: &LoadSpec) -> BodyFn {
    match spec {
        LoadSpec::Constant { value } => {
            let v = constant(value);
            Arc::new(move |_, _| v)
        }
        LoadSpec::PerMaterial { values } => {
            let table: BTreeMap<u32, [f64; 2]> = values
                .iter()
                .filter_map(|(k, v)| Some((k.parse().ok()?, constant(v))))
                .collect();
            Arc::new(move |_, m| table.get(&m).copied().unwrap_or([0.0, 0.0]))
        }
        LoadSpec::Axial {
            origin,
            axis,
            coefficients,
        } => {
            let origin = vec2(*origin);
            let axis = vec2(*axis).normalized();
            let c = coefficients.clone();
            Arc::new(move |x, _| {
                let s = axis.dot(x - origin);
                let f = c.iter().rev().fold(0.0, |acc, ci| acc * s + ci);
                [f * axis.x, f * axis.y]
            })
        }
        LoadSpec::Sine {
            amplitude,
            frequency,
        } => {
            let (a, f) = (*amplitude, *frequency);
            Arc::new(move |x, _| {
                [
                    a * (2.0 * PI * f[0] * x.x).sin() * (2.0 * PI * f[1] * x.y).sin(),
                    0.0,
                ]
            })
        }
    }
}
