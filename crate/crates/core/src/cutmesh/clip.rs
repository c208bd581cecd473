//! Splitting of convex polygons by the linear interpolant of a level set.

use alloc::vec::Vec;

use crate::geometry::is_above;
use crate::math::Vec2;

/// Origin of a polygon edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum EdgeTag {
    /// Part of side `s` (0 bottom, 1 right, 2 top, 3 left) of a sub-cell.
    Outer(u8),
    /// Part of the segment from sub-cell corner `c` to the sub-cell center.
    Diag(u8),
    /// Part of the zero contour of level set `l`.
    Cut(u8),
}

/// Counter-clockwise convex polygon whose vertices carry all level-set values.
#[derive(Debug, Clone)]
pub(crate) struct Poly {
    pub pts: Vec<Vec2>,
    /// `vals[i * nls + l]`: level set `l` at vertex `i`.
    pub vals: Vec<f64>,
    /// `tags[i]` labels the edge from vertex `i` to vertex `i + 1`.
    pub tags: Vec<EdgeTag>,
    /// Phase bits of the level sets processed so far.
    pub phase: u32,
}

impl Poly {
    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn area(&self) -> f64 {
        crate::math::polygon_area(&self.pts)
    }

    fn push_vertex(&mut self, x: Vec2, vals: &[f64], tag: EdgeTag) {
        self.pts.push(x);
        self.vals.extend_from_slice(vals);
        self.tags.push(tag);
    }
}

/// Cut point of edge `a -> b` for level set `l`, computed from the endpoints
/// in lexicographic order so that both polygons sharing the edge obtain
/// bitwise-identical results. Values are the unperturbed ones; the snapped
/// sign only decides which edges are cut, and the parameter is clamped to
/// the edge so that a vertex on the iso-level yields a cut exactly there.
fn cut_point(
    a: Vec2,
    va: &[f64],
    b: Vec2,
    vb: &[f64],
    l: usize,
    iso: f64,
    out: &mut Vec<f64>,
) -> Vec2 {
    let swap = (b.x, b.y) < (a.x, a.y);
    let (a, va, b, vb) = if swap { (b, vb, a, va) } else { (a, va, b, vb) };
    let t = ((iso - va[l]) / (vb[l] - va[l])).clamp(0.0, 1.0);
    let x = if t == 0.0 {
        a
    } else if t == 1.0 {
        b
    } else {
        a.lerp(b, t)
    };
    out.clear();
    for k in 0..va.len() {
        if k == l {
            out.push(iso);
        } else {
            out.push(va[k] + t * (vb[k] - va[k]));
        }
    }
    x
}

/// Splits `poly` along level set `l`; returns the parts with `phi < iso`
/// and `phi > iso`, with signs snapped by `eps`.
pub(crate) fn split(poly: &Poly, l: usize, isos: &[f64], eps: f64) -> (Option<Poly>, Option<Poly>) {
    let nls = isos.len();
    let n = poly.len();
    let above = |i: usize| is_above(poly.vals[i * nls + l], isos[l], eps);
    let first = above(0);
    if (1..n).all(|i| above(i) == first) {
        let mut p = poly.clone();
        if first {
            p.phase |= 1 << l;
            return (None, Some(p));
        }
        return (Some(p), None);
    }
    let empty = |phase: u32| Poly {
        pts: Vec::with_capacity(n + 1),
        vals: Vec::with_capacity((n + 1) * nls),
        tags: Vec::with_capacity(n + 1),
        phase,
    };
    let mut neg = empty(poly.phase & !(1 << l));
    let mut pos = empty(poly.phase | (1 << l));
    let mut buf = Vec::with_capacity(nls);
    for i in 0..n {
        let j = (i + 1) % n;
        let vi = &poly.vals[i * nls..(i + 1) * nls];
        let vj = &poly.vals[j * nls..(j + 1) * nls];
        let tag = poly.tags[i];
        let (side, other) = if above(i) {
            (&mut pos, &mut neg)
        } else {
            (&mut neg, &mut pos)
        };
        side.push_vertex(poly.pts[i], vi, tag);
        if above(i) != above(j) {
            let m = cut_point(poly.pts[i], vi, poly.pts[j], vj, l, isos[l], &mut buf);
            side.push_vertex(m, &buf, EdgeTag::Cut(l as u8));
            other.push_vertex(m, &buf, tag);
        }
    }
    (Some(neg), Some(pos))
}

/// Removes vertices closer than `tol` to their predecessor (keeping the
/// outgoing tag of the survivor) and vertices on a straight line between
/// edges of the same tag.
pub(crate) fn clean(poly: &mut Poly, nls: usize, tol: f64) {
    let mut changed = true;
    while changed && poly.len() > 3 {
        changed = false;
        let n = poly.len();
        for i in 0..n {
            let prev = (i + n - 1) % n;
            if (poly.pts[i] - poly.pts[prev]).norm() <= tol {
                // Drop the zero-length edge prev -> i.
                remove_vertex(poly, prev, nls);
                changed = true;
                break;
            }
        }
    }
    changed = true;
    while changed && poly.len() > 3 {
        changed = false;
        let n = poly.len();
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let next = (i + 1) % n;
            if poly.tags[prev] == poly.tags[i] {
                let a = poly.pts[prev];
                let b = poly.pts[i];
                let c = poly.pts[next];
                let scale = (c - a).norm();
                if (b - a).cross(c - a).abs() <= tol * scale {
                    remove_vertex(poly, i, nls);
                    changed = true;
                    break;
                }
            }
        }
    }
}

fn remove_vertex(poly: &mut Poly, i: usize, nls: usize) {
    poly.pts.remove(i);
    poly.tags.remove(i);
    poly.vals.drain(i * nls..(i + 1) * nls);
}
