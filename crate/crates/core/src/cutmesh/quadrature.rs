//! Gauss rules for segments, quads and triangles.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::math::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub x: Vec2,
    pub w: f64,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let pi = core::f64::consts::PI;
    for i in 0..n.div_ceil(2) {
        let mut x = Float::cos(pi * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if Float::abs(dx) < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `n`-point Gauss rule on the segment `a -> b` (weights sum to its length).
pub fn segment_rule(a: Vec2, b: Vec2, n: usize) -> Vec<QuadPoint> {
    let (t, w) = gauss_legendre(n);
    let half = 0.5 * (b - a).norm();
    t.iter()
        .zip(&w)
        .map(|(&t, &w)| QuadPoint {
            x: a.lerp(b, 0.5 * (t + 1.0)),
            w: w * half,
        })
        .collect()
}

/// Tensor Gauss rule with `n x n` points on an axis-aligned rectangle.
pub fn quad_rule(lo: Vec2, hi: Vec2, n: usize) -> Vec<QuadPoint> {
    let (t, w) = gauss_legendre(n);
    let (hx, hy) = (0.5 * (hi.x - lo.x), 0.5 * (hi.y - lo.y));
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push(QuadPoint {
                x: Vec2::new(lo.x + hx * (t[i] + 1.0), lo.y + hy * (t[j] + 1.0)),
                w: w[i] * w[j] * hx * hy,
            });
        }
    }
    out
}

/// Barycentric orbits of a fully symmetric rule; weights sum to one.
struct SymmetricRule {
    centroid: Option<f64>,
    orbit3: &'static [(f64, f64)],
    orbit6: &'static [(f64, f64, f64)],
}

// Degree 5.
const STROUD7_A1: f64 = 0.101_286_507_323_456_34; // (6 - sqrt 15) / 21
const STROUD7_A2: f64 = 0.470_142_064_105_115_1; // (6 + sqrt 15) / 21
const STROUD7_W1: f64 = 0.125_939_180_544_827_15; // (155 - sqrt 15) / 1200
const STROUD7_W2: f64 = 0.132_394_152_788_506_2; // (155 + sqrt 15) / 1200

const RULE7: SymmetricRule = SymmetricRule {
    centroid: Some(0.225),
    orbit3: &[(STROUD7_A1, STROUD7_W1), (STROUD7_A2, STROUD7_W2)],
    orbit6: &[],
};

// Degree 6.
const RULE12: SymmetricRule = SymmetricRule {
    centroid: None,
    orbit3: &[
        (0.063_089_014_491_502, 0.050_844_906_370_207),
        (0.249_286_745_170_910, 0.116_786_275_726_379),
    ],
    orbit6: &[(
        0.053_145_049_844_817,
        0.310_352_451_033_784,
        0.082_851_075_618_374,
    )],
};

// Degree 10.
const RULE25: SymmetricRule = SymmetricRule {
    centroid: Some(0.090_817_990_382_754),
    orbit3: &[
        (0.485_577_633_383_657, 0.036_725_957_756_467),
        (0.109_481_575_485_037, 0.045_321_059_435_528),
    ],
    orbit6: &[
        (
            0.141_707_219_414_880,
            0.307_939_838_764_121,
            0.072_757_916_845_420,
        ),
        (
            0.025_003_534_762_686,
            0.246_672_560_639_903,
            0.028_327_242_531_057,
        ),
        (
            0.009_540_815_400_299,
            0.066_803_251_012_200,
            0.009_421_666_963_733,
        ),
    ],
};

fn expand(rule: &SymmetricRule) -> Vec<([f64; 3], f64)> {
    let mut pts = Vec::new();
    if let Some(w) = rule.centroid {
        pts.push(([1.0 / 3.0; 3], w));
    }
    for &(a, w) in rule.orbit3 {
        let b = 1.0 - 2.0 * a;
        pts.push(([a, a, b], w));
        pts.push(([a, b, a], w));
        pts.push(([b, a, a], w));
    }
    for &(a, b, w) in rule.orbit6 {
        let c = 1.0 - a - b;
        for perm in [
            [a, b, c],
            [a, c, b],
            [b, a, c],
            [b, c, a],
            [c, a, b],
            [c, b, a],
        ] {
            pts.push((perm, w));
        }
    }
    let total: f64 = pts.iter().map(|p| p.1).sum();
    for p in pts.iter_mut() {
        p.1 /= total;
    }
    pts
}

/// Collapsed (Duffy) Gauss rule with `n x n` points on the unit triangle,
/// exact for total degree `2n - 2`.
fn collapsed(n: usize) -> Vec<([f64; 3], f64)> {
    let (t, w) = gauss_legendre(n);
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        let u = 0.5 * (t[i] + 1.0);
        for j in 0..n {
            let v = 0.5 * (t[j] + 1.0);
            // (u, v) in the unit square -> (u, (1 - u) v) in the triangle.
            let x = u;
            let y = (1.0 - u) * v;
            // Weights of the unit triangle (area 1/2) normalized to sum one.
            let weight = 0.25 * w[i] * w[j] * (1.0 - u) * 2.0;
            pts.push(([1.0 - x - y, x, y], weight));
        }
    }
    pts
}

/// Triangle rule for approximation order `order`: 7, 12 and 25 points for
/// orders 1 to 3, collapsed Gauss with `order + 2` points per direction above.
pub fn triangle_rule(v: [Vec2; 3], order: usize) -> Result<Vec<QuadPoint>> {
    let bary = match order {
        0 => {
            return Err(Error::Argument(
                "quadrature order must be at least 1".into(),
            ))
        }
        1 => expand(&RULE7),
        2 => expand(&RULE12),
        3 => expand(&RULE25),
        n => collapsed(n + 2),
    };
    let area = 0.5 * Float::abs((v[1] - v[0]).cross(v[2] - v[0]));
    Ok(bary
        .iter()
        .map(|(l, w)| QuadPoint {
            x: Vec2::new(
                l[0] * v[0].x + l[1] * v[1].x + l[2] * v[2].x,
                l[0] * v[0].y + l[1] * v[1].y + l[2] * v[2].y,
            ),
            w: w * area,
        })
        .collect())
}

/// Number of points of the triangle rule for `order`.
pub fn triangle_rule_size(order: usize) -> usize {
    match order {
        1 => 7,
        2 => 12,
        3 => 25,
        n => (n + 2) * (n + 2),
    }
}

/// Polynomial degree integrated exactly by [`triangle_rule`].
pub fn triangle_rule_degree(order: usize) -> usize {
    match order {
        1 => 5,
        2 => 6,
        3 => 10,
        n => 2 * (n + 2) - 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..=8 {
            let (t, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg + 1) as f64
                };
                let got: f64 = t.iter().zip(&w).map(|(t, w)| w * t.powi(deg as i32)).sum();
                assert!(
                    (got - exact).abs() < 1e-14,
                    "n={n} deg={deg}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn triangle_rules_exact_to_design_degree() {
        let v = [Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        for order in 1..=6 {
            let rule = triangle_rule(v, order).unwrap();
            assert_eq!(rule.len(), triangle_rule_size(order));
            let deg = triangle_rule_degree(order);
            for i in 0..=deg {
                for j in 0..=deg - i {
                    let exact = factorial(i) * factorial(j) / factorial(i + j + 2);
                    let got: f64 = rule
                        .iter()
                        .map(|q| q.w * q.x.x.powi(i as i32) * q.x.y.powi(j as i32))
                        .sum();
                    assert!(
                        (got - exact).abs() < 1e-14,
                        "order {order} monomial x^{i} y^{j}: {got} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn unit_triangle_seven_points() {
        let v = [Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        let rule = triangle_rule(v, 1).unwrap();
        assert_eq!(rule.len(), 7);
        assert_relative_eq!(
            rule.iter().map(|q| q.w).sum::<f64>(),
            0.5,
            max_relative = 1e-14
        );
        assert!(triangle_rule(v, 0).is_err());
    }

    #[test]
    fn quad_rule_area() {
        let r = quad_rule(Vec2::new(1.0, 2.0), Vec2::new(1.5, 2.25), 3);
        assert_eq!(r.len(), 9);
        assert_relative_eq!(
            r.iter().map(|q| q.w).sum::<f64>(),
            0.125,
            max_relative = 1e-14
        );
    }
}
