//! Geometric connected-component labeling of integration cells.
//!
//! This works on bare cell geometry (edges of nonzero shared length) and is
//! independent of the bookkeeping the subdivision uses to label components.

use alloc::vec::Vec;

use super::IntegrationCell;
use crate::math::{UnionFind, Vec2};

fn edges(cell: &IntegrationCell) -> Vec<(Vec2, Vec2)> {
    let v = cell.vertices();
    (0..v.len()).map(|i| (v[i], v[(i + 1) % v.len()])).collect()
}

/// Length of the common part of two segments if they are collinear.
fn shared_length(a: (Vec2, Vec2), b: (Vec2, Vec2), tol: f64) -> f64 {
    let d = a.1 - a.0;
    let len = d.norm();
    if len <= tol {
        return 0.0;
    }
    let dist0 = d.cross(b.0 - a.0).abs() / len;
    let dist1 = d.cross(b.1 - a.0).abs() / len;
    if dist0 > tol || dist1 > tol {
        return 0.0;
    }
    let u = d * (1.0 / len);
    let (s0, s1) = (u.dot(b.0 - a.0), u.dot(b.1 - a.0));
    let (lo, hi) = (s0.min(s1), s0.max(s1));
    (hi.min(len) - lo.max(0.0)).max(0.0)
}

/// Labels cells so that two cells share a label iff they have the same
/// material and are linked by a chain of cells sharing edge portions longer
/// than `tol`. Labels are dense and numbered by first occurrence.
pub fn connected_components(cells: &[IntegrationCell], tol: f64) -> (Vec<usize>, usize) {
    let all: Vec<Vec<(Vec2, Vec2)>> = cells.iter().map(edges).collect();
    let mut uf = UnionFind::new(cells.len());
    for i in 0..cells.len() {
        for j in i + 1..cells.len() {
            if cells[i].material != cells[j].material {
                continue;
            }
            let touching = all[i]
                .iter()
                .any(|&ea| all[j].iter().any(|&eb| shared_length(ea, eb, tol) > tol));
            if touching {
                uf.union(i, j);
            }
        }
    }
    uf.labels()
}
