//! Background mesh, conforming subdivision of cut elements, interface and
//! boundary segments, connected components, ghost facets and quadrature.
//!
//! Every background element is sampled on a uniform `2^level x 2^level`
//! grid of integration sub-cells. Blocks of sub-cells whose vertices all
//! share one phase index become axis-aligned quads (merged quadtree-style);
//! every remaining sub-cell is split into four triangles about its center,
//! and each triangle is cut sequentially by the linear interpolants of the
//! level sets in index order.

mod clip;
pub mod components;
pub mod quadrature;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::{phase_bits, LevelSet, PhaseMap};
use crate::math::{polygon_area, UnionFind, Vec2};
use clip::{EdgeTag, Poly};
use quadrature::QuadPoint;

pub use components::connected_components;

/// Relative area below which integration cells are discarded.
pub const AREA_FLOOR: f64 = 1e-12;
/// Snap tolerance relative to the element edge length.
pub const SNAP_FACTOR: f64 = 1e-8;
/// Largest supported integration refinement level.
pub const MAX_LEVEL: u32 = 12;

/// Structured grid of `nx x ny` rectangular background elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundMesh {
    pub origin: Vec2,
    pub hx: f64,
    pub hy: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn outward_normal(self) -> Vec2 {
        match self {
            Side::Left => Vec2::new(-1.0, 0.0),
            Side::Right => Vec2::new(1.0, 0.0),
            Side::Bottom => Vec2::new(0.0, -1.0),
            Side::Top => Vec2::new(0.0, 1.0),
        }
    }

    /// Coordinate axis running along the side.
    pub fn tangent_axis(self) -> usize {
        match self {
            Side::Left | Side::Right => 1,
            Side::Bottom | Side::Top => 0,
        }
    }
}

/// Interior facet between `plus` (left/below) and `minus` (right/above).
/// The facet normal points from `plus` into `minus`, i.e. along `+x` for
/// vertical facets and `+y` for horizontal ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Facet {
    pub id: usize,
    pub plus: usize,
    pub minus: usize,
    /// 0 for a vertical facet (normal `+x`), 1 for a horizontal one.
    pub normal_axis: usize,
    pub start: Vec2,
    pub length: f64,
}

impl Facet {
    pub fn normal(&self) -> Vec2 {
        if self.normal_axis == 0 {
            Vec2::new(1.0, 0.0)
        } else {
            Vec2::new(0.0, 1.0)
        }
    }

    pub fn tangent_axis(&self) -> usize {
        1 - self.normal_axis
    }

    /// Point at tangential coordinate `t` (an absolute x or y value).
    pub fn point(&self, t: f64) -> Vec2 {
        if self.normal_axis == 0 {
            Vec2::new(self.start.x, t)
        } else {
            Vec2::new(t, self.start.y)
        }
    }

    /// Tangential coordinate range of the facet.
    pub fn range(&self) -> (f64, f64) {
        let t0 = self.start.component(self.tangent_axis());
        (t0, t0 + self.length)
    }
}

impl BackgroundMesh {
    pub fn new(lo: Vec2, hi: Vec2, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Config(
                "background resolution must be at least 1".into(),
            ));
        }
        if !(hi.x > lo.x && hi.y > lo.y) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!(
                "invalid domain box ({}, {}) - ({}, {})",
                lo.x, lo.y, hi.x, hi.y
            )));
        }
        Ok(BackgroundMesh {
            origin: lo,
            hx: (hi.x - lo.x) / nx as f64,
            hy: (hi.y - lo.y) / ny as f64,
            nx,
            ny,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.nx * self.ny
    }

    pub fn element_index(&self, ex: usize, ey: usize) -> usize {
        ex + ey * self.nx
    }

    pub fn element_multi_index(&self, e: usize) -> (usize, usize) {
        (e % self.nx, e / self.nx)
    }

    fn grid_x(&self, i: usize) -> f64 {
        self.origin.x + i as f64 * self.hx
    }

    fn grid_y(&self, j: usize) -> f64 {
        self.origin.y + j as f64 * self.hy
    }

    pub fn element_bounds(&self, e: usize) -> (Vec2, Vec2) {
        let (ex, ey) = self.element_multi_index(e);
        (
            Vec2::new(self.grid_x(ex), self.grid_y(ey)),
            Vec2::new(self.grid_x(ex + 1), self.grid_y(ey + 1)),
        )
    }

    pub fn domain(&self) -> (Vec2, Vec2) {
        (
            self.origin,
            Vec2::new(self.grid_x(self.nx), self.grid_y(self.ny)),
        )
    }

    /// Element edge length used in penalty scalings.
    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    /// Smallest element edge length; the snap tolerance scales with it.
    pub fn h_min(&self) -> f64 {
        self.hx.min(self.hy)
    }

    /// Element containing `x` (points on shared edges go to the upper/right one).
    pub fn locate(&self, x: Vec2) -> Option<usize> {
        let fx = (x.x - self.origin.x) / self.hx;
        let fy = (x.y - self.origin.y) / self.hy;
        let slack = 1e-10;
        if fx < -slack || fy < -slack || fx > self.nx as f64 + slack || fy > self.ny as f64 + slack
        {
            return None;
        }
        let ex = (Float::floor(fx).max(0.0) as usize).min(self.nx - 1);
        let ey = (Float::floor(fy).max(0.0) as usize).min(self.ny - 1);
        Some(self.element_index(ex, ey))
    }

    pub fn num_interior_facets(&self) -> usize {
        (self.nx - 1) * self.ny + self.nx * (self.ny - 1)
    }

    /// Interior facets: vertical ones first (row by row), then horizontal ones.
    pub fn facets(&self) -> Vec<Facet> {
        let mut out = Vec::with_capacity(self.num_interior_facets());
        for ey in 0..self.ny {
            for ex in 0..self.nx.saturating_sub(1) {
                out.push(Facet {
                    id: out.len(),
                    plus: self.element_index(ex, ey),
                    minus: self.element_index(ex + 1, ey),
                    normal_axis: 0,
                    start: Vec2::new(self.grid_x(ex + 1), self.grid_y(ey)),
                    length: self.grid_y(ey + 1) - self.grid_y(ey),
                });
            }
        }
        for ey in 0..self.ny.saturating_sub(1) {
            for ex in 0..self.nx {
                out.push(Facet {
                    id: out.len(),
                    plus: self.element_index(ex, ey),
                    minus: self.element_index(ex, ey + 1),
                    normal_axis: 1,
                    start: Vec2::new(self.grid_x(ex), self.grid_y(ey + 1)),
                    length: self.grid_x(ex + 1) - self.grid_x(ex),
                });
            }
        }
        out
    }

    /// Neighbor of element `e` across `side`, if any.
    pub fn neighbor(&self, e: usize, side: Side) -> Option<usize> {
        let (ex, ey) = self.element_multi_index(e);
        match side {
            Side::Left if ex > 0 => Some(self.element_index(ex - 1, ey)),
            Side::Right if ex + 1 < self.nx => Some(self.element_index(ex + 1, ey)),
            Side::Bottom if ey > 0 => Some(self.element_index(ex, ey - 1)),
            Side::Top if ey + 1 < self.ny => Some(self.element_index(ex, ey + 1)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellShape {
    /// Counter-clockwise triangle.
    Triangle([Vec2; 3]),
    Quad {
        lo: Vec2,
        hi: Vec2,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationCell {
    pub shape: CellShape,
    pub element: usize,
    pub phase: u32,
    pub material: u32,
    /// Connected component within the parent element.
    pub component: usize,
}

impl IntegrationCell {
    pub fn area(&self) -> f64 {
        match self.shape {
            CellShape::Triangle(v) => 0.5 * (v[1] - v[0]).cross(v[2] - v[0]),
            CellShape::Quad { lo, hi } => (hi.x - lo.x) * (hi.y - lo.y),
        }
    }

    pub fn centroid(&self) -> Vec2 {
        match self.shape {
            CellShape::Triangle(v) => Vec2::new(
                (v[0].x + v[1].x + v[2].x) / 3.0,
                (v[0].y + v[1].y + v[2].y) / 3.0,
            ),
            CellShape::Quad { lo, hi } => lo.lerp(hi, 0.5),
        }
    }

    /// Vertices in counter-clockwise order.
    pub fn vertices(&self) -> Vec<Vec2> {
        match self.shape {
            CellShape::Triangle(v) => v.to_vec(),
            CellShape::Quad { lo, hi } => {
                vec![lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)]
            }
        }
    }

    /// Point-in-cell test with absolute slack `tol`.
    pub fn contains(&self, x: Vec2, tol: f64) -> bool {
        match self.shape {
            CellShape::Quad { lo, hi } => {
                x.x >= lo.x - tol && x.x <= hi.x + tol && x.y >= lo.y - tol && x.y <= hi.y + tol
            }
            CellShape::Triangle(v) => (0..3).all(|i| {
                let a = v[i];
                let b = v[(i + 1) % 3];
                let len = (b - a).norm();
                (b - a).cross(x - a) >= -tol * len
            }),
        }
    }

    /// Distance-like measure of how far `x` lies outside the cell (0 inside).
    pub fn outside_distance(&self, x: Vec2) -> f64 {
        match self.shape {
            CellShape::Quad { lo, hi } => {
                let dx = (lo.x - x.x).max(x.x - hi.x).max(0.0);
                let dy = (lo.y - x.y).max(x.y - hi.y).max(0.0);
                Vec2::new(dx, dy).norm()
            }
            CellShape::Triangle(v) => (0..3)
                .map(|i| {
                    let a = v[i];
                    let b = v[(i + 1) % 3];
                    -(b - a).cross(x - a) / (b - a).norm()
                })
                .fold(0.0, f64::max),
        }
    }

    /// Quadrature for approximation order `order`: symmetric triangle rules
    /// (7, 12, 25 points for orders 1 to 3) or `(order+1)^2` Gauss on quads.
    pub fn quadrature(&self, order: usize) -> Result<Vec<QuadPoint>> {
        quadrature_for_cell(self, order)
    }
}

/// Quadrature rule for a cell; see [`IntegrationCell::quadrature`].
pub fn quadrature_for_cell(cell: &IntegrationCell, order: usize) -> Result<Vec<QuadPoint>> {
    if order == 0 {
        return Err(Error::Argument(
            "quadrature order must be at least 1".into(),
        ));
    }
    match cell.shape {
        CellShape::Triangle(v) => quadrature::triangle_rule(v, order),
        CellShape::Quad { lo, hi } => Ok(quadrature::quad_rule(lo, hi, order + 1)),
    }
}

/// Piece of a material interface inside one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceSegment {
    pub a: Vec2,
    pub b: Vec2,
    pub element: usize,
    /// Ordered pair `(I, J)` with `I < J`.
    pub materials: (u32, u32),
    /// Components of side `I` and side `J` within the element.
    pub components: (usize, usize),
    /// Unit normal pointing from side `I` into side `J`.
    pub normal: Vec2,
}

impl InterfaceSegment {
    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryTag {
    /// Zero contour of a level set next to void.
    LevelSet(usize),
    /// A side of the background domain box.
    Side(Side),
}

/// Piece of the external boundary of the material domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySegment {
    pub a: Vec2,
    pub b: Vec2,
    pub element: usize,
    pub material: u32,
    pub component: usize,
    /// Outward unit normal of the material side.
    pub normal: Vec2,
    pub tag: BoundaryTag,
}

impl BoundarySegment {
    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }
}

/// Portion `[t0, t1]` of an element side occupied by one component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trace {
    pub t0: f64,
    pub t1: f64,
    pub component: usize,
    pub material: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementClass {
    Uniform(u32),
    Intersected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub material: u32,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementCut {
    pub class: ElementClass,
    pub cells: Range<usize>,
    pub components: Vec<Component>,
    /// Traces on the left, right, bottom and top sides, sorted by `t0`.
    pub sides: [Vec<Trace>; 4],
}

impl ElementCut {
    /// Distinct materials (void included) occupying positive area.
    pub fn materials(&self) -> Vec<u32> {
        let mut m: Vec<u32> = self
            .components
            .iter()
            .filter(|c| c.area > 0.0)
            .map(|c| c.material)
            .collect();
        m.sort_unstable();
        m.dedup();
        m
    }

    /// Two or more materials (counting void) meet inside the element.
    pub fn is_material_cut(&self) -> bool {
        self.materials().len() > 1
    }

    /// The element intersects the material domain.
    pub fn in_domain(&self) -> bool {
        self.components
            .iter()
            .any(|c| c.material != 0 && c.area > 0.0)
    }

    /// Total area of `material` inside the element.
    pub fn material_area(&self, material: u32) -> f64 {
        self.components
            .iter()
            .filter(|c| c.material == material)
            .map(|c| c.area)
            .sum()
    }

    pub fn side(&self, side: Side) -> &[Trace] {
        &self.sides[side.index()]
    }
}

/// Same-material component pair meeting across a facet.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPair {
    pub plus_component: usize,
    pub minus_component: usize,
    pub material: u32,
    /// Overlap of the two facet traces as tangential coordinate ranges.
    pub intervals: Vec<(f64, f64)>,
}

impl MatchedPair {
    pub fn overlap(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GhostFacet {
    pub facet: Facet,
    /// `(component, material)` of every component of the plus element.
    pub plus_components: Vec<(usize, u32)>,
    pub minus_components: Vec<(usize, u32)>,
    pub pairs: Vec<MatchedPair>,
}

/// Cells dropped below the area floor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DropStats {
    pub count: usize,
    pub area: f64,
}

/// Result of subdividing every background element.
#[derive(Debug, Clone)]
pub struct IntegrationMesh {
    pub background: BackgroundMesh,
    pub level: u32,
    pub snap_tolerance: f64,
    pub num_level_sets: usize,
    pub elements: Vec<ElementCut>,
    pub cells: Vec<IntegrationCell>,
    pub interfaces: Vec<InterfaceSegment>,
    pub boundaries: Vec<BoundarySegment>,
    pub dropped: DropStats,
}

/// Classification from corner values (`corners[c][l]`) snapped with `eps`.
pub fn classify_element(corners: &[Vec<f64>], isos: &[f64], eps: f64) -> ElementClass {
    let p0 = phase_bits(&corners[0], isos, eps);
    if corners.iter().all(|c| phase_bits(c, isos, eps) == p0) {
        ElementClass::Uniform(p0)
    } else {
        ElementClass::Intersected
    }
}

struct Context<'a> {
    level_sets: &'a [LevelSet],
    isos: Vec<f64>,
    phase_map: &'a PhaseMap,
    eps: f64,
    level: u32,
    area_floor: f64,
    merge_tol: f64,
}

impl IntegrationMesh {
    /// Subdivides every element of `background` for the given level sets.
    pub fn build(
        background: BackgroundMesh,
        level_sets: &[LevelSet],
        phase_map: &PhaseMap,
        level: u32,
    ) -> Result<Self> {
        if level_sets.len() != phase_map.num_level_sets() {
            return Err(Error::Config(format!(
                "{} level sets but the phase map is built for {}",
                level_sets.len(),
                phase_map.num_level_sets()
            )));
        }
        if level > MAX_LEVEL {
            return Err(Error::Config(format!(
                "integration refinement level {level} exceeds {MAX_LEVEL}"
            )));
        }
        let h = background.h_min();
        let ctx = Context {
            level_sets,
            isos: level_sets.iter().map(|l| l.iso).collect(),
            phase_map,
            eps: SNAP_FACTOR * h,
            level,
            area_floor: AREA_FLOOR * h * h,
            merge_tol: 1e-13 * h,
        };
        let mut mesh = IntegrationMesh {
            background,
            level,
            snap_tolerance: ctx.eps,
            num_level_sets: level_sets.len(),
            elements: Vec::with_capacity(background.num_elements()),
            cells: Vec::new(),
            interfaces: Vec::new(),
            boundaries: Vec::new(),
            dropped: DropStats::default(),
        };
        for e in 0..background.num_elements() {
            let out = process_element(&ctx, &background, e)?;
            let start = mesh.cells.len();
            mesh.cells.extend(out.cells);
            let mut cut = out.cut;
            cut.cells = start..mesh.cells.len();
            mesh.elements.push(cut);
            mesh.interfaces.extend(out.interfaces);
            mesh.boundaries.extend(out.boundaries);
            mesh.dropped.count += out.dropped.count;
            mesh.dropped.area += out.dropped.area;
        }
        if mesh.dropped.count > 0 {
            log::debug!(
                "dropped {} degenerate cells with total area {:e}",
                mesh.dropped.count,
                mesh.dropped.area
            );
        }
        Ok(mesh)
    }

    pub fn element_cells(&self, e: usize) -> &[IntegrationCell] {
        &self.cells[self.elements[e].cells.clone()]
    }

    /// Total area of cells with the given material.
    pub fn material_area(&self, material: u32) -> f64 {
        self.cells
            .iter()
            .filter(|c| c.material == material)
            .map(|c| c.area())
            .sum()
    }

    /// Elements intersecting the material domain (`K_Omega`).
    pub fn active_elements(&self) -> Vec<usize> {
        (0..self.elements.len())
            .filter(|&e| self.elements[e].in_domain())
            .collect()
    }

    pub fn interfaces_in(&self, e: usize) -> impl Iterator<Item = &InterfaceSegment> {
        self.interfaces.iter().filter(move |s| s.element == e)
    }

    /// Same-material component pairs of the two elements of `facet` whose
    /// facet traces overlap along a portion of nonzero length.
    pub fn facet_pairs(&self, facet: &Facet) -> Vec<MatchedPair> {
        let (plus_side, minus_side) = if facet.normal_axis == 0 {
            (Side::Right, Side::Left)
        } else {
            (Side::Top, Side::Bottom)
        };
        let tp = self.elements[facet.plus].side(plus_side);
        let tm = self.elements[facet.minus].side(minus_side);
        let tol = 1e-12 * facet.length;
        let mut pairs: BTreeMap<(usize, usize), MatchedPair> = BTreeMap::new();
        for a in tp {
            if a.material == 0 {
                continue;
            }
            for b in tm {
                if b.material != a.material {
                    continue;
                }
                let lo = a.t0.max(b.t0);
                let hi = a.t1.min(b.t1);
                if hi - lo > tol {
                    let entry =
                        pairs
                            .entry((a.component, b.component))
                            .or_insert_with(|| MatchedPair {
                                plus_component: a.component,
                                minus_component: b.component,
                                material: a.material,
                                intervals: Vec::new(),
                            });
                    entry.intervals.push((lo, hi));
                }
            }
        }
        pairs
            .into_values()
            .map(|mut p| {
                p.intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
                let mut merged: Vec<(f64, f64)> = Vec::with_capacity(p.intervals.len());
                for (lo, hi) in p.intervals {
                    match merged.last_mut() {
                        Some(last) if lo <= last.1 + tol => last.1 = last.1.max(hi),
                        _ => merged.push((lo, hi)),
                    }
                }
                p.intervals = merged;
                p
            })
            .collect()
    }

    /// Interior facets of `K_Omega` next to at least one element cut by a
    /// material interface or the domain boundary, with their matched pairs.
    pub fn ghost_facets(&self) -> Vec<GhostFacet> {
        let comps = |e: usize| -> Vec<(usize, u32)> {
            self.elements[e]
                .components
                .iter()
                .enumerate()
                .filter(|(_, c)| c.area > 0.0)
                .map(|(i, c)| (i, c.material))
                .collect()
        };
        self.background
            .facets()
            .into_iter()
            .filter(|f| {
                let (p, m) = (&self.elements[f.plus], &self.elements[f.minus]);
                p.in_domain() && m.in_domain() && (p.is_material_cut() || m.is_material_cut())
            })
            .map(|f| GhostFacet {
                facet: f,
                plus_components: comps(f.plus),
                minus_components: comps(f.minus),
                pairs: self.facet_pairs(&f),
            })
            .collect()
    }

    /// Locates the cell of `material` in element `e` containing `x`, falling
    /// back to the nearest such cell.
    pub fn find_cell(&self, e: usize, x: Vec2, material: Option<u32>) -> Option<usize> {
        let range = self.elements[e].cells.clone();
        let mut best: Option<(f64, usize)> = None;
        for i in range {
            let c = &self.cells[i];
            if let Some(m) = material {
                if c.material != m {
                    continue;
                }
            }
            let d = c.outside_distance(x);
            if d <= 0.0 {
                return Some(i);
            }
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| i)
    }
}

/// Identifies a straight edge of the sub-cell grid shared between pieces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EdgeKey {
    /// Horizontal unit edge from vertex `(i, j)` to `(i + 1, j)`.
    H(usize, usize),
    /// Vertical unit edge from vertex `(i, j)` to `(i, j + 1)`.
    V(usize, usize),
    /// Segment from corner `c` of sub-cell `(i, j)` to its center.
    D(usize, usize, u8),
}

struct PieceTrace {
    key: EdgeKey,
    t0: f64,
    t1: f64,
    piece: usize,
}

enum PieceGeom {
    Quad { lo: Vec2, hi: Vec2 },
    Poly(Poly),
}

struct Piece {
    geom: PieceGeom,
    phase: u32,
    material: u32,
    area: f64,
    /// Cut-level-set edges: `(level set, a, b)`.
    cut_edges: Vec<(usize, Vec2, Vec2)>,
    /// Index of the primary triangle (within the element) for polygons.
    triangle: usize,
}

struct ElementOutput {
    cut: ElementCut,
    cells: Vec<IntegrationCell>,
    interfaces: Vec<InterfaceSegment>,
    boundaries: Vec<BoundarySegment>,
    dropped: DropStats,
}

fn process_element(ctx: &Context<'_>, mesh: &BackgroundMesh, e: usize) -> Result<ElementOutput> {
    let nls = ctx.level_sets.len();
    let s = 1usize << ctx.level;
    let (lo, hi) = mesh.element_bounds(e);
    let coord_x = |i: usize| {
        if i == s {
            hi.x
        } else {
            lo.x + i as f64 * (hi.x - lo.x) / s as f64
        }
    };
    let coord_y = |j: usize| {
        if j == s {
            hi.y
        } else {
            lo.y + j as f64 * (hi.y - lo.y) / s as f64
        }
    };
    let nv = s + 1;
    let mut vals = vec![0.0; nv * nv * nls];
    let mut phases = vec![0u32; nv * nv];
    for j in 0..nv {
        for i in 0..nv {
            let x = Vec2::new(coord_x(i), coord_y(j));
            let base = (j * nv + i) * nls;
            for (l, ls) in ctx.level_sets.iter().enumerate() {
                vals[base + l] = ls.eval(x)?;
            }
            phases[j * nv + i] = phase_bits(&vals[base..base + nls], &ctx.isos, ctx.eps);
        }
    }

    // Quadtree of uniform blocks; leaves of size one that are not uniform are cut.
    let mut uniform_blocks: Vec<(usize, usize, usize, u32)> = Vec::new();
    let mut cut_cells: Vec<(usize, usize)> = Vec::new();
    let mut stack = vec![(0usize, 0usize, s)];
    while let Some((i0, j0, size)) = stack.pop() {
        let p0 = phases[j0 * nv + i0];
        let uniform = (j0..=j0 + size).all(|j| (i0..=i0 + size).all(|i| phases[j * nv + i] == p0));
        if uniform {
            uniform_blocks.push((i0, j0, size, p0));
        } else if size == 1 {
            cut_cells.push((i0, j0));
        } else {
            let h = size / 2;
            // Pushed in reverse so that blocks pop in SW, SE, NW, NE order.
            stack.push((i0 + h, j0 + h, h));
            stack.push((i0, j0 + h, h));
            stack.push((i0 + h, j0, h));
            stack.push((i0, j0, h));
        }
    }
    let class = if uniform_blocks.len() == 1 && uniform_blocks[0].2 == s {
        ElementClass::Uniform(uniform_blocks[0].3)
    } else {
        ElementClass::Intersected
    };

    let mut pieces: Vec<Piece> = Vec::new();
    let mut traces: Vec<PieceTrace> = Vec::new();
    let mut dropped = DropStats::default();

    for &(i0, j0, size, phase) in &uniform_blocks {
        let material = ctx.phase_map.material_of(phase)?;
        let plo = Vec2::new(coord_x(i0), coord_y(j0));
        let phi = Vec2::new(coord_x(i0 + size), coord_y(j0 + size));
        let id = pieces.len();
        for k in 0..size {
            let (xa, xb) = (coord_x(i0 + k), coord_x(i0 + k + 1));
            let (ya, yb) = (coord_y(j0 + k), coord_y(j0 + k + 1));
            traces.push(PieceTrace {
                key: EdgeKey::H(i0 + k, j0),
                t0: xa,
                t1: xb,
                piece: id,
            });
            traces.push(PieceTrace {
                key: EdgeKey::H(i0 + k, j0 + size),
                t0: xa,
                t1: xb,
                piece: id,
            });
            traces.push(PieceTrace {
                key: EdgeKey::V(i0, j0 + k),
                t0: ya,
                t1: yb,
                piece: id,
            });
            traces.push(PieceTrace {
                key: EdgeKey::V(i0 + size, j0 + k),
                t0: ya,
                t1: yb,
                piece: id,
            });
        }
        pieces.push(Piece {
            geom: PieceGeom::Quad { lo: plo, hi: phi },
            phase,
            material,
            area: (phi.x - plo.x) * (phi.y - plo.y),
            cut_edges: Vec::new(),
            triangle: usize::MAX,
        });
    }

    let mut center_vals = vec![0.0; nls];
    for (ci, &(i, j)) in cut_cells.iter().enumerate() {
        let corner_idx = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
        let corners: Vec<Vec2> = corner_idx
            .iter()
            .map(|&(a, b)| Vec2::new(coord_x(a), coord_y(b)))
            .collect();
        let center = Vec2::new(
            0.5 * (corners[0].x + corners[2].x),
            0.5 * (corners[0].y + corners[2].y),
        );
        for (l, ls) in ctx.level_sets.iter().enumerate() {
            center_vals[l] = ls.eval(center)?;
        }
        for t in 0..4 {
            let c0 = t;
            let c1 = (t + 1) % 4;
            let v0 = (corner_idx[c0].1 * nv + corner_idx[c0].0) * nls;
            let v1 = (corner_idx[c1].1 * nv + corner_idx[c1].0) * nls;
            let mut pvals = Vec::with_capacity(3 * nls);
            pvals.extend_from_slice(&vals[v0..v0 + nls]);
            pvals.extend_from_slice(&vals[v1..v1 + nls]);
            pvals.extend_from_slice(&center_vals);
            let tri = Poly {
                pts: vec![corners[c0], corners[c1], center],
                vals: pvals,
                tags: vec![
                    EdgeTag::Outer(t as u8),
                    EdgeTag::Diag(c1 as u8),
                    EdgeTag::Diag(c0 as u8),
                ],
                phase: 0,
            };
            let mut polys = vec![tri];
            for l in 0..nls {
                let mut next = Vec::with_capacity(polys.len() + 1);
                for p in &polys {
                    let (neg, pos) = clip::split(p, l, &ctx.isos, ctx.eps);
                    next.extend(neg);
                    next.extend(pos);
                }
                polys = next;
            }
            let triangle = ci * 4 + t;
            for mut poly in polys {
                clip::clean(&mut poly, nls, ctx.merge_tol);
                let area = poly.area();
                if area < ctx.area_floor || poly.len() < 3 {
                    log::debug!(
                        "element {e}: dropping degenerate cell of area {area:e} (phase {})",
                        poly.phase
                    );
                    dropped.count += 1;
                    dropped.area += area.max(0.0);
                    continue;
                }
                let material = ctx.phase_map.material_of(poly.phase)?;
                let id = pieces.len();
                let n = poly.len();
                let mut cut_edges = Vec::new();
                for k in 0..n {
                    let a = poly.pts[k];
                    let b = poly.pts[(k + 1) % n];
                    match poly.tags[k] {
                        EdgeTag::Outer(side) => {
                            let (key, t0, t1) = match side {
                                0 => (EdgeKey::H(i, j), a.x, b.x),
                                1 => (EdgeKey::V(i + 1, j), a.y, b.y),
                                2 => (EdgeKey::H(i, j + 1), a.x, b.x),
                                _ => (EdgeKey::V(i, j), a.y, b.y),
                            };
                            traces.push(PieceTrace {
                                key,
                                t0: t0.min(t1),
                                t1: t0.max(t1),
                                piece: id,
                            });
                        }
                        EdgeTag::Diag(c) => {
                            // Parameterized by the distance from the corner.
                            let corner = corners[c as usize];
                            let da = (a - corner).norm();
                            let db = (b - corner).norm();
                            traces.push(PieceTrace {
                                key: EdgeKey::D(i, j, c),
                                t0: da.min(db),
                                t1: da.max(db),
                                piece: id,
                            });
                        }
                        EdgeTag::Cut(l) => cut_edges.push((l as usize, a, b)),
                    }
                }
                pieces.push(Piece {
                    phase: poly.phase,
                    material,
                    area,
                    cut_edges,
                    triangle,
                    geom: PieceGeom::Poly(poly),
                });
            }
        }
    }

    // Connectivity: shared grid edges, then same-material level-set edges.
    let mut uf = UnionFind::new(pieces.len());
    let mut by_key: BTreeMap<EdgeKey, Vec<usize>> = BTreeMap::new();
    for (ti, t) in traces.iter().enumerate() {
        by_key.entry(t.key).or_default().push(ti);
    }
    let sub_len = ((hi.x - lo.x) / s as f64).min((hi.y - lo.y) / s as f64);
    let overlap_tol = 1e-12 * sub_len;
    for list in by_key.values() {
        for (ai, &a) in list.iter().enumerate() {
            for &b in &list[ai + 1..] {
                let (ta, tb) = (&traces[a], &traces[b]);
                if ta.piece == tb.piece || pieces[ta.piece].material != pieces[tb.piece].material {
                    continue;
                }
                if ta.t1.min(tb.t1) - ta.t0.max(tb.t0) > overlap_tol {
                    uf.union(ta.piece, tb.piece);
                }
            }
        }
    }
    // Partner polygon across a cut edge: same primary triangle, phase bit flipped.
    let mut by_triangle: BTreeMap<(usize, u32), usize> = BTreeMap::new();
    for (id, p) in pieces.iter().enumerate() {
        if p.triangle != usize::MAX {
            by_triangle.insert((p.triangle, p.phase), id);
        }
    }
    let partner = |id: usize, l: usize| -> Option<usize> {
        let p = &pieces[id];
        by_triangle.get(&(p.triangle, p.phase ^ (1 << l))).copied()
    };
    for id in 0..pieces.len() {
        for &(l, _, _) in &pieces[id].cut_edges {
            if let Some(q) = partner(id, l) {
                if pieces[q].material == pieces[id].material {
                    uf.union(id, q);
                }
            }
        }
    }
    let (labels, ncomp) = uf.labels();
    let mut components = vec![
        Component {
            material: 0,
            area: 0.0
        };
        ncomp
    ];
    for (id, p) in pieces.iter().enumerate() {
        components[labels[id]].material = p.material;
        components[labels[id]].area += p.area;
    }

    // Integration cells.
    let mut cells = Vec::new();
    for (id, p) in pieces.iter().enumerate() {
        let base = IntegrationCell {
            shape: CellShape::Quad { lo, hi },
            element: e,
            phase: p.phase,
            material: p.material,
            component: labels[id],
        };
        match &p.geom {
            PieceGeom::Quad { lo, hi } => cells.push(IntegrationCell {
                shape: CellShape::Quad { lo: *lo, hi: *hi },
                ..base
            }),
            PieceGeom::Poly(poly) => {
                for k in 1..poly.len() - 1 {
                    let tri = [poly.pts[0], poly.pts[k], poly.pts[k + 1]];
                    if polygon_area(&tri) <= 0.0 {
                        continue;
                    }
                    cells.push(IntegrationCell {
                        shape: CellShape::Triangle(tri),
                        ..base
                    });
                }
            }
        }
    }

    // Interfaces and level-set boundaries.
    let mut interfaces = Vec::new();
    let mut boundaries = Vec::new();
    for (id, p) in pieces.iter().enumerate() {
        if p.material == 0 {
            continue;
        }
        for &(l, a, b) in &p.cut_edges {
            let len = (b - a).norm();
            if len <= ctx.merge_tol {
                continue;
            }
            let normal = Vec2::new(b.y - a.y, a.x - b.x) * (1.0 / len);
            let other_material = ctx.phase_map.material_of(p.phase ^ (1 << l))?;
            if other_material == p.material {
                continue;
            }
            if other_material == 0 {
                boundaries.push(BoundarySegment {
                    a,
                    b,
                    element: e,
                    material: p.material,
                    component: labels[id],
                    normal,
                    tag: BoundaryTag::LevelSet(l),
                });
            } else if p.material < other_material {
                let Some(q) = partner(id, l) else {
                    log::debug!("element {e}: interface partner dropped, skipping segment");
                    continue;
                };
                interfaces.push(InterfaceSegment {
                    a,
                    b,
                    element: e,
                    materials: (p.material, other_material),
                    components: (labels[id], labels[q]),
                    normal,
                });
            }
        }
    }

    // Side traces, merged per component.
    let mut sides: [Vec<Trace>; 4] = Default::default();
    for t in &traces {
        let side = match t.key {
            EdgeKey::V(0, _) => Side::Left,
            EdgeKey::V(i, _) if i == s => Side::Right,
            EdgeKey::H(_, 0) => Side::Bottom,
            EdgeKey::H(_, j) if j == s => Side::Top,
            _ => continue,
        };
        sides[side.index()].push(Trace {
            t0: t.t0,
            t1: t.t1,
            component: labels[t.piece],
            material: pieces[t.piece].material,
        });
    }
    for list in sides.iter_mut() {
        list.sort_by(|a, b| a.t0.total_cmp(&b.t0).then(a.t1.total_cmp(&b.t1)));
        let mut merged: Vec<Trace> = Vec::with_capacity(list.len());
        for t in list.drain(..) {
            if t.t1 - t.t0 <= overlap_tol {
                continue;
            }
            match merged.last_mut() {
                Some(last) if last.component == t.component && t.t0 <= last.t1 + overlap_tol => {
                    last.t1 = last.t1.max(t.t1);
                }
                _ => merged.push(t),
            }
        }
        *list = merged;
    }

    // Box sides of the background domain bound the material domain.
    for side in Side::ALL {
        if mesh.neighbor(e, side).is_some() {
            continue;
        }
        for t in &sides[side.index()] {
            if t.material == 0 {
                continue;
            }
            let (a, b) = match side {
                Side::Left => (Vec2::new(lo.x, t.t1), Vec2::new(lo.x, t.t0)),
                Side::Right => (Vec2::new(hi.x, t.t0), Vec2::new(hi.x, t.t1)),
                Side::Bottom => (Vec2::new(t.t0, lo.y), Vec2::new(t.t1, lo.y)),
                Side::Top => (Vec2::new(t.t1, hi.y), Vec2::new(t.t0, hi.y)),
            };
            boundaries.push(BoundarySegment {
                a,
                b,
                element: e,
                material: t.material,
                component: t.component,
                normal: side.outward_normal(),
                tag: BoundaryTag::Side(side),
            });
        }
    }

    Ok(ElementOutput {
        cut: ElementCut {
            class,
            cells: 0..0,
            components,
            sides,
        },
        cells,
        interfaces,
        boundaries,
        dropped,
    })
}
