//! Univariate and tensor-product B-spline bases with derivative evaluation and
//! per-element Lagrange extraction.
//!
//! Knot values are physical coordinates, so parametric and physical
//! derivatives coincide. Elements are the nonempty knot spans (tensor products
//! of them in 2D). Local basis functions on an element are numbered
//! `a + b * (p + 1)` where `a` (resp. `b`) indexes the `p + 1` functions that
//! are nonzero on the element's x-span (resp. y-span).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::math::Vec2;

/// Relative slack used when deciding whether a coordinate lies inside the
/// knot range; points computed by arithmetic on the domain boundary may be off
/// by a few ulps.
const RANGE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
    /// Knot indices `i` of the nonempty spans `[knots[i], knots[i+1])`.
    spans: Vec<usize>,
}

impl KnotVector {
    /// Validates an open knot vector of the given degree.
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::Argument("degree must be at least 1".into()));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::Argument("knots must be finite".into()));
        }
        if knots.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Argument("knots must be non-decreasing".into()));
        }
        if knots.len() < 2 * (degree + 1) {
            return Err(Error::Argument(format!(
                "{} knots cannot hold {} basis functions of degree {}",
                knots.len(),
                degree + 1,
                degree
            )));
        }
        let m = knots.len();
        let open = knots[..=degree].iter().all(|&k| k == knots[0])
            && knots[m - degree - 1..].iter().all(|&k| k == knots[m - 1]);
        if !open {
            return Err(Error::Argument(
                "knot vector must repeat its end knots degree + 1 times".into(),
            ));
        }
        let spans: Vec<usize> = (degree..m - degree - 1)
            .filter(|&i| knots[i] < knots[i + 1])
            .collect();
        if spans.is_empty() {
            return Err(Error::Argument("knot vector has no nonempty span".into()));
        }
        Ok(KnotVector {
            knots,
            degree,
            spans,
        })
    }

    /// Open uniform knot vector over `[start, end]` with `elements` spans.
    pub fn open_uniform(start: f64, end: f64, elements: usize, degree: usize) -> Result<Self> {
        if elements == 0 || !(end > start) {
            return Err(Error::Argument(format!(
                "invalid uniform knot range [{start}, {end}] with {elements} elements"
            )));
        }
        let mut knots = Vec::with_capacity(elements + 2 * degree + 1);
        knots.extend(core::iter::repeat_n(start, degree));
        for i in 0..=elements {
            let t = i as f64 / elements as f64;
            knots.push(if i == elements {
                end
            } else {
                start + t * (end - start)
            });
        }
        knots.extend(core::iter::repeat_n(end, degree));
        KnotVector::new(knots, degree)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn num_elements(&self) -> usize {
        self.spans.len()
    }

    pub fn first(&self) -> f64 {
        self.knots[0]
    }

    pub fn last(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Knot index of the span that forms element `e`.
    pub fn element_span(&self, e: usize) -> usize {
        self.spans[e]
    }

    pub fn element_bounds(&self, e: usize) -> (f64, f64) {
        let s = self.spans[e];
        (self.knots[s], self.knots[s + 1])
    }

    /// Elements (indices into the span list) on which basis function `i` is nonzero.
    pub fn support_elements(&self, i: usize) -> core::ops::Range<usize> {
        // Basis i lives on spans i..=i+p.
        let lo = self.spans.partition_point(|&s| s < i);
        let hi = self.spans.partition_point(|&s| s <= i + self.degree);
        lo..hi
    }

    /// Span index `i` with `knots[i] <= xi < knots[i+1]`; the right end of
    /// the range maps to the last nonempty span.
    pub fn find_span(&self, xi: f64) -> Result<usize> {
        let e = self.find_element(xi)?;
        Ok(self.spans[e])
    }

    /// Element containing `xi` (right end maps to the last element).
    pub fn find_element(&self, xi: f64) -> Result<usize> {
        let (lo, hi) = (self.first(), self.last());
        let slack = RANGE_SLACK * (hi - lo);
        if !(xi >= lo - slack && xi <= hi + slack) {
            return Err(Error::Domain { value: xi, lo, hi });
        }
        // Last span whose left knot is <= xi.
        let pos = self.spans.partition_point(|&s| self.knots[s] <= xi);
        Ok(pos.saturating_sub(1))
    }

    /// Values and derivatives of the `p + 1` functions nonzero on `span`,
    /// evaluated from that span's polynomial pieces. `xi` may lie outside
    /// the span, which yields the polynomial extension of the span.
    ///
    /// Returns `ders[k][j]` for derivative order `k <= max_order` and local
    /// function `j`, i.e. global function `span - p + j`.
    pub fn eval_in_span(&self, span: usize, xi: f64, max_order: usize) -> Vec<Vec<f64>> {
        ders_basis_funs(span, xi, self.degree, max_order, &self.knots)
    }

    /// Cox–de Boor evaluation at `xi` with derivatives up to `max_order <= p`.
    pub fn eval_basis_and_derivs(&self, xi: f64, max_order: usize) -> Result<BasisDerivs> {
        if max_order > self.degree {
            return Err(Error::Argument(format!(
                "derivative order {max_order} exceeds degree {}",
                self.degree
            )));
        }
        let span = self.find_span(xi)?;
        Ok(BasisDerivs {
            first: span - self.degree,
            ders: self.eval_in_span(span, xi, max_order),
        })
    }
}

/// Nonzero basis values and derivatives at one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisDerivs {
    /// Global index of the first nonzero function.
    pub first: usize,
    /// `ders[k][j]`: k-th derivative of function `first + j`.
    pub ders: Vec<Vec<f64>>,
}

// Algorithm A2.3 of Piegl & Tiller.
fn ders_basis_funs(span: usize, u: f64, p: usize, n: usize, knots: &[f64]) -> Vec<Vec<f64>> {
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let mut ders = vec![vec![0.0; p + 1]; n + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let mut a = [vec![0.0; p + 1], vec![0.0; p + 1]];
    let pi = p as isize;
    for r in 0..=pi {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=(n as isize) {
            let mut d = 0.0;
            let rk = r - k;
            let pk = pi - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[(pk + 1) as usize][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk as usize];
            }
            let j1 = if rk >= -1 { 1 } else { -rk };
            let j2 = if r - 1 <= pk { k - 1 } else { pi - r };
            let mut j = j1;
            while j <= j2 {
                let ju = j as usize;
                a[s2][ju] = (a[s1][ju] - a[s1][ju - 1]) / ndu[(pk + 1) as usize][(rk + j) as usize];
                d += a[s2][ju] * ndu[(rk + j) as usize][pk as usize];
                j += 1;
            }
            if r <= pk {
                let ku = k as usize;
                a[s2][ku] = -a[s1][ku - 1] / ndu[(pk + 1) as usize][r as usize];
                d += a[s2][ku] * ndu[r as usize][pk as usize];
            }
            ders[k as usize][r as usize] = d;
            core::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = p as f64;
    for k in 1..=n {
        for v in ders[k].iter_mut() {
            *v *= factor;
        }
        factor *= (p as f64) - (k as f64);
    }
    ders
}

/// Lagrange polynomials on the Gauss–Lobatto nodes of `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeBasis1d {
    nodes: Vec<f64>,
    /// Monomial coefficients, `coeffs[j][i]` multiplies `t^i` in `L_j`.
    coeffs: Vec<Vec<f64>>,
}

impl LagrangeBasis1d {
    pub fn gauss_lobatto(degree: usize) -> Result<Self> {
        let nodes: Vec<f64> = match degree {
            1 => vec![-1.0, 1.0],
            2 => vec![-1.0, 0.0, 1.0],
            3 => {
                let c = 1.0 / Float::sqrt(5.0);
                vec![-1.0, -c, c, 1.0]
            }
            _ => {
                return Err(Error::Argument(format!(
                    "Lagrange extraction supports degrees 1 to 3, got {degree}"
                )))
            }
        };
        let n = nodes.len();
        let coeffs = (0..n)
            .map(|j| {
                let mut poly = vec![1.0];
                for (m, &tm) in nodes.iter().enumerate() {
                    if m == j {
                        continue;
                    }
                    let scale = 1.0 / (nodes[j] - tm);
                    let mut next = vec![0.0; poly.len() + 1];
                    for (i, &c) in poly.iter().enumerate() {
                        next[i + 1] += c * scale;
                        next[i] -= c * tm * scale;
                    }
                    poly = next;
                }
                poly
            })
            .collect();
        Ok(LagrangeBasis1d { nodes, coeffs })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `out[k][j]`: k-th derivative of `L_j` at `t`.
    pub fn eval(&self, t: f64, max_order: usize) -> Vec<Vec<f64>> {
        let n = self.nodes.len();
        let mut out = vec![vec![0.0; n]; max_order + 1];
        for (j, c) in self.coeffs.iter().enumerate() {
            for (k, row) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                let mut tp = 1.0;
                for i in k..c.len() {
                    let mut f = 1.0;
                    for q in 0..k {
                        f *= (i - q) as f64;
                    }
                    acc += c[i] * f * tp;
                    tp *= t;
                }
                row[j] = acc;
            }
        }
        out
    }
}

/// Univariate extraction of one element: `C[a][j] = N_a(x_j)` at the mapped
/// Gauss–Lobatto nodes, so that `N_a = sum_j C[a][j] L_j` on the element.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction1d {
    pub lo: f64,
    pub hi: f64,
    pub first: usize,
    pub matrix: Vec<Vec<f64>>,
}

impl Extraction1d {
    pub fn new(kv: &KnotVector, element: usize, lagrange: &LagrangeBasis1d) -> Result<Self> {
        let (lo, hi) = kv.element_bounds(element);
        if !(hi > lo) {
            return Err(Error::Argument(format!(
                "element {element} has an empty knot span"
            )));
        }
        let span = kv.element_span(element);
        let p = kv.degree();
        let mut matrix = vec![vec![0.0; p + 1]; p + 1];
        for (j, &t) in lagrange.nodes().iter().enumerate() {
            let x = lo + 0.5 * (t + 1.0) * (hi - lo);
            let d = kv.eval_in_span(span, x, 0);
            for a in 0..=p {
                matrix[a][j] = d[0][a];
            }
        }
        Ok(Extraction1d {
            lo,
            hi,
            first: span - p,
            matrix,
        })
    }

    /// `out[k][a]`: k-th physical derivative of local function `a` at `x`.
    fn eval(&self, lagrange: &LagrangeBasis1d, x: f64, max_order: usize) -> Vec<Vec<f64>> {
        let h = self.hi - self.lo;
        let t = 2.0 * (x - self.lo) / h - 1.0;
        let lag = lagrange.eval(t, max_order);
        let n = self.matrix.len();
        let mut out = vec![vec![0.0; n]; max_order + 1];
        let mut scale = 1.0;
        for k in 0..=max_order {
            for a in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    s += self.matrix[a][j] * lag[k][j];
                }
                out[k][a] = s * scale;
            }
            scale *= 2.0 / h;
        }
        out
    }
}

/// Values and derivatives of the `(p+1)^2` functions of one element at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementEval {
    degree: usize,
    max_order: usize,
    /// `nx[k][a]`, `ny[k][b]`: univariate factors and their derivatives.
    nx: Vec<Vec<f64>>,
    ny: Vec<Vec<f64>>,
}

impl ElementEval {
    pub fn num_local(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Mixed derivative `d^(ox+oy) / dx^ox dy^oy` of local function `local`.
    pub fn deriv(&self, local: usize, ox: usize, oy: usize) -> f64 {
        let q = self.degree + 1;
        self.nx[ox][local % q] * self.ny[oy][local / q]
    }

    pub fn value(&self, local: usize) -> f64 {
        self.deriv(local, 0, 0)
    }

    pub fn gradient(&self, local: usize) -> Vec2 {
        Vec2::new(self.deriv(local, 1, 0), self.deriv(local, 0, 1))
    }

    /// k-th derivative along the x axis (`axis == 0`) or y axis.
    pub fn axis_deriv(&self, local: usize, axis: usize, k: usize) -> f64 {
        if axis == 0 {
            self.deriv(local, k, 0)
        } else {
            self.deriv(local, 0, k)
        }
    }
}

/// Extraction-based evaluator of one element (the assembly path).
#[derive(Debug, Clone, Copy)]
pub struct ElementSpace<'a> {
    pub element: usize,
    x: &'a Extraction1d,
    y: &'a Extraction1d,
    lagrange: &'a LagrangeBasis1d,
    nbx: usize,
    degree: usize,
}

impl<'a> ElementSpace<'a> {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_local(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }

    /// Global basis id of local function `local`.
    pub fn global(&self, local: usize) -> usize {
        let q = self.degree + 1;
        (self.x.first + local % q) + (self.y.first + local / q) * self.nbx
    }

    pub fn bounds(&self) -> (Vec2, Vec2) {
        (
            Vec2::new(self.x.lo, self.y.lo),
            Vec2::new(self.x.hi, self.y.hi),
        )
    }

    /// Polynomial pieces of this element evaluated at `x`, which may lie on
    /// or beyond the element boundary.
    pub fn eval(&self, x: Vec2, max_order: usize) -> ElementEval {
        ElementEval {
            degree: self.degree,
            max_order,
            nx: self.x.eval(self.lagrange, x.x, max_order),
            ny: self.y.eval(self.lagrange, x.y, max_order),
        }
    }
}

/// Tensor-product extraction operator of one element.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionOperator {
    pub element: usize,
    /// Global basis ids of the rows, in local order.
    pub rows: Vec<usize>,
    /// Row-major `(p+1)^2 x (p+1)^2` matrix; column `i + j (p+1)` is the
    /// Lagrange function on node `(x_i, y_j)`.
    pub matrix: Vec<f64>,
    pub degree: usize,
    lo: Vec2,
    hi: Vec2,
}

impl ExtractionOperator {
    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.matrix[row * self.rows.len() + col]
    }

    /// Basis values at `x` reconstructed as `C * Lag(x)`.
    pub fn reproduce(&self, x: Vec2) -> Result<Vec<f64>> {
        let lag = LagrangeBasis1d::gauss_lobatto(self.degree)?;
        let tx = 2.0 * (x.x - self.lo.x) / (self.hi.x - self.lo.x) - 1.0;
        let ty = 2.0 * (x.y - self.lo.y) / (self.hi.y - self.lo.y) - 1.0;
        let lx = lag.eval(tx, 0);
        let ly = lag.eval(ty, 0);
        let q = self.degree + 1;
        let n = self.rows.len();
        let mut out = vec![0.0; n];
        for (r, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for c in 0..n {
                s += self.matrix[r * n + c] * lx[0][c % q] * ly[0][c / q];
            }
            *o = s;
        }
        Ok(out)
    }
}

/// One entry of [`TensorBSplineBasis::tensor_eval`].
#[derive(Debug, Clone, PartialEq)]
pub struct BasisValue {
    pub id: usize,
    pub value: f64,
    pub gradient: Vec2,
    /// `dx[k-1]` is the k-th derivative along x, `k = 1..=max_order`.
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

/// Tensor product of two open knot vectors of equal degree.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBSplineBasis {
    kx: KnotVector,
    ky: KnotVector,
    lagrange: LagrangeBasis1d,
    ext_x: Vec<Extraction1d>,
    ext_y: Vec<Extraction1d>,
}

impl TensorBSplineBasis {
    pub fn new(kx: KnotVector, ky: KnotVector) -> Result<Self> {
        if kx.degree() != ky.degree() {
            return Err(Error::Argument(format!(
                "degrees differ between directions ({} vs {})",
                kx.degree(),
                ky.degree()
            )));
        }
        let lagrange = LagrangeBasis1d::gauss_lobatto(kx.degree())?;
        let ext_x = (0..kx.num_elements())
            .map(|e| Extraction1d::new(&kx, e, &lagrange))
            .collect::<Result<Vec<_>>>()?;
        let ext_y = (0..ky.num_elements())
            .map(|e| Extraction1d::new(&ky, e, &lagrange))
            .collect::<Result<Vec<_>>>()?;
        Ok(TensorBSplineBasis {
            kx,
            ky,
            lagrange,
            ext_x,
            ext_y,
        })
    }

    /// Uniform open basis over the rectangle `[lo, hi]` with `nx x ny` elements.
    pub fn uniform(lo: Vec2, hi: Vec2, nx: usize, ny: usize, degree: usize) -> Result<Self> {
        TensorBSplineBasis::new(
            KnotVector::open_uniform(lo.x, hi.x, nx, degree)?,
            KnotVector::open_uniform(lo.y, hi.y, ny, degree)?,
        )
    }

    pub fn degree(&self) -> usize {
        self.kx.degree()
    }

    pub fn knots_x(&self) -> &KnotVector {
        &self.kx
    }

    pub fn knots_y(&self) -> &KnotVector {
        &self.ky
    }

    pub fn num_basis_x(&self) -> usize {
        self.kx.num_basis()
    }

    pub fn num_basis_y(&self) -> usize {
        self.ky.num_basis()
    }

    pub fn num_basis(&self) -> usize {
        self.kx.num_basis() * self.ky.num_basis()
    }

    pub fn basis_index(&self, ix: usize, iy: usize) -> usize {
        ix + iy * self.kx.num_basis()
    }

    pub fn basis_multi_index(&self, k: usize) -> (usize, usize) {
        (k % self.kx.num_basis(), k / self.kx.num_basis())
    }

    pub fn num_elements_x(&self) -> usize {
        self.kx.num_elements()
    }

    pub fn num_elements_y(&self) -> usize {
        self.ky.num_elements()
    }

    pub fn num_elements(&self) -> usize {
        self.kx.num_elements() * self.ky.num_elements()
    }

    pub fn element_index(&self, ex: usize, ey: usize) -> usize {
        ex + ey * self.kx.num_elements()
    }

    pub fn element_multi_index(&self, e: usize) -> (usize, usize) {
        (e % self.kx.num_elements(), e / self.kx.num_elements())
    }

    pub fn element_bounds(&self, e: usize) -> (Vec2, Vec2) {
        let (ex, ey) = self.element_multi_index(e);
        let (x0, x1) = self.kx.element_bounds(ex);
        let (y0, y1) = self.ky.element_bounds(ey);
        (Vec2::new(x0, y0), Vec2::new(x1, y1))
    }

    pub fn domain(&self) -> (Vec2, Vec2) {
        (
            Vec2::new(self.kx.first(), self.ky.first()),
            Vec2::new(self.kx.last(), self.ky.last()),
        )
    }

    pub fn find_element(&self, x: Vec2) -> Result<usize> {
        let ex = self.kx.find_element(x.x)?;
        let ey = self.ky.find_element(x.y)?;
        Ok(self.element_index(ex, ey))
    }

    /// Elements in the support of basis function `k`.
    pub fn support_elements(&self, k: usize) -> Vec<usize> {
        let (ix, iy) = self.basis_multi_index(k);
        let rx = self.kx.support_elements(ix);
        let ry = self.ky.support_elements(iy);
        let mut out = Vec::with_capacity(rx.len() * ry.len());
        for ey in ry {
            for ex in rx.clone() {
                out.push(self.element_index(ex, ey));
            }
        }
        out
    }

    /// Global ids of the element's local functions in local order.
    pub fn element_basis(&self, e: usize) -> Vec<usize> {
        let space = self.element_space(e);
        (0..space.num_local()).map(|l| space.global(l)).collect()
    }

    /// Local index of global function `k` on element `e`, if supported there.
    pub fn local_index(&self, e: usize, k: usize) -> Option<usize> {
        let (ex, ey) = self.element_multi_index(e);
        let (ix, iy) = self.basis_multi_index(k);
        let fx = self.ext_x[ex].first;
        let fy = self.ext_y[ey].first;
        let p = self.degree();
        if ix < fx || ix > fx + p || iy < fy || iy > fy + p {
            return None;
        }
        Some((ix - fx) + (iy - fy) * (p + 1))
    }

    /// Extraction-based evaluator for element `e`.
    pub fn element_space(&self, e: usize) -> ElementSpace<'_> {
        let (ex, ey) = self.element_multi_index(e);
        ElementSpace {
            element: e,
            x: &self.ext_x[ex],
            y: &self.ext_y[ey],
            lagrange: &self.lagrange,
            nbx: self.kx.num_basis(),
            degree: self.degree(),
        }
    }

    /// Direct Cox–de Boor evaluation of the element's polynomial pieces.
    pub fn eval_element_direct(&self, e: usize, x: Vec2, max_order: usize) -> ElementEval {
        let (ex, ey) = self.element_multi_index(e);
        ElementEval {
            degree: self.degree(),
            max_order,
            nx: self
                .kx
                .eval_in_span(self.kx.element_span(ex), x.x, max_order),
            ny: self
                .ky
                .eval_in_span(self.ky.element_span(ey), x.y, max_order),
        }
    }

    /// All `(p+1)^2` nonzero functions at `x` with gradients and axis
    /// derivatives up to `max_order <= p`.
    pub fn tensor_eval(&self, x: Vec2, max_order: usize) -> Result<Vec<BasisValue>> {
        let p = self.degree();
        if max_order > p {
            return Err(Error::Argument(format!(
                "derivative order {max_order} exceeds degree {p}"
            )));
        }
        let e = self.find_element(x)?;
        let ev = self.eval_element_direct(e, x, max_order.max(1));
        let space = self.element_space(e);
        Ok((0..ev.num_local())
            .map(|l| BasisValue {
                id: space.global(l),
                value: ev.value(l),
                gradient: ev.gradient(l),
                dx: (1..=max_order).map(|k| ev.deriv(l, k, 0)).collect(),
                dy: (1..=max_order).map(|k| ev.deriv(l, 0, k)).collect(),
            })
            .collect())
    }

    /// Lagrange extraction operator of element `e`.
    pub fn extraction_operator(&self, e: usize) -> Result<ExtractionOperator> {
        if e >= self.num_elements() {
            return Err(Error::Argument(format!("element {e} out of range")));
        }
        let (ex, ey) = self.element_multi_index(e);
        let cx = &self.ext_x[ex];
        let cy = &self.ext_y[ey];
        let q = self.degree() + 1;
        let n = q * q;
        let mut matrix = vec![0.0; n * n];
        for r in 0..n {
            let (a, b) = (r % q, r / q);
            for c in 0..n {
                let (i, j) = (c % q, c / q);
                matrix[r * n + c] = cx.matrix[a][i] * cy.matrix[b][j];
            }
        }
        let (lo, hi) = self.element_bounds(e);
        Ok(ExtractionOperator {
            element: e,
            rows: self.element_basis(e),
            matrix,
            degree: self.degree(),
            lo,
            hi,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn find_span_cases() {
        let kv = KnotVector::new(vec![0.0, 0.0, 1.0, 1.0], 1).unwrap();
        assert_eq!(kv.find_span(0.5).unwrap(), 1);
        let kv2 = KnotVector::new(vec![0.0, 0.0, 0.0, 1.0, 2.0, 2.0, 2.0], 2).unwrap();
        assert_eq!(kv2.find_span(2.0).unwrap(), 3);
        assert_eq!(kv2.find_span(0.0).unwrap(), 2);
        assert!(matches!(kv.find_span(1.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn knot_vector_validation() {
        assert!(KnotVector::new(vec![0.0, 1.0, 0.5, 1.0], 1).is_err());
        assert!(KnotVector::new(vec![0.0, 0.5, 1.0, 1.0], 1).is_err());
        assert!(KnotVector::new(vec![0.0, 0.0, 1.0, 1.0], 0).is_err());
        assert!(KnotVector::new(vec![0.0, 0.0, 1.0], 1).is_err());
    }

    #[test]
    fn linear_hats() {
        let kv = KnotVector::new(vec![0.0, 0.0, 1.0, 1.0], 1).unwrap();
        let d = kv.eval_basis_and_derivs(0.5, 1).unwrap();
        assert_eq!(d.first, 0);
        assert_abs_diff_eq!(d.ders[0][0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d.ders[0][1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d.ders[1][0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.ders[1][1], 1.0, epsilon = 1e-15);
        assert!(kv.eval_basis_and_derivs(0.5, 2).is_err());
    }

    #[test]
    fn quadratic_partition_and_endpoint() {
        let kv = KnotVector::open_uniform(0.0, 4.0, 4, 2).unwrap();
        for i in 0..=40 {
            let x = i as f64 * 0.1;
            let d = kv.eval_basis_and_derivs(x, 1).unwrap();
            assert_abs_diff_eq!(d.ders[0].iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(d.ders[1].iter().sum::<f64>(), 0.0, epsilon = 1e-13);
        }
        let kv = KnotVector::new(vec![0.0, 0.0, 0.0, 1.0, 2.0, 2.0, 2.0], 2).unwrap();
        let d = kv.eval_basis_and_derivs(0.0, 0).unwrap();
        assert_eq!(d.first, 0);
        assert_eq!(d.ders[0], vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn tensor_eval_hat_products() {
        let b = TensorBSplineBasis::uniform(Vec2::ZERO, Vec2::new(1.0, 1.0), 1, 1, 1).unwrap();
        let vals = b.tensor_eval(Vec2::new(0.5, 0.5), 1).unwrap();
        assert_eq!(vals.len(), 4);
        for v in &vals {
            assert_abs_diff_eq!(v.value, 0.25, epsilon = 1e-15);
        }
        assert!(b.tensor_eval(Vec2::new(1.5, 0.5), 0).is_err());
    }

    #[test]
    fn tensor_corner_interpolation() {
        let b = TensorBSplineBasis::uniform(Vec2::ZERO, Vec2::new(3.0, 2.0), 3, 2, 2).unwrap();
        let vals = b.tensor_eval(Vec2::new(3.0, 2.0), 0).unwrap();
        let corner = b.basis_index(b.num_basis_x() - 1, b.num_basis_y() - 1);
        for v in vals {
            let expect = if v.id == corner { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(v.value, expect, epsilon = 1e-15);
        }
    }

    #[test]
    fn linear_extraction_is_identity() {
        let b = TensorBSplineBasis::uniform(Vec2::ZERO, Vec2::new(2.0, 2.0), 2, 2, 1).unwrap();
        for e in 0..b.num_elements() {
            let c = b.extraction_operator(e).unwrap();
            for r in 0..c.size() {
                for col in 0..c.size() {
                    let expect = if r == col { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(c.entry(r, col), expect, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn quadratic_extraction_columns_sum_to_one() {
        let b = TensorBSplineBasis::uniform(Vec2::ZERO, Vec2::new(5.0, 5.0), 5, 5, 2).unwrap();
        let c = b.extraction_operator(b.element_index(2, 2)).unwrap();
        for col in 0..c.size() {
            let s: f64 = (0..c.size()).map(|r| c.entry(r, col)).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn lagrange_nodal_property() {
        for p in 1..=3 {
            let l = LagrangeBasis1d::gauss_lobatto(p).unwrap();
            for (i, &t) in l.nodes().iter().enumerate() {
                let v = l.eval(t, 0);
                for j in 0..=p {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(v[0][j], expect, epsilon = 1e-14);
                }
            }
        }
        assert!(LagrangeBasis1d::gauss_lobatto(4).is_err());
    }

    #[test]
    fn support_elements_cover_span_range() {
        let kv = KnotVector::open_uniform(0.0, 4.0, 4, 2).unwrap();
        assert_eq!(kv.support_elements(0), 0..1);
        assert_eq!(kv.support_elements(2), 0..3);
        assert_eq!(kv.support_elements(5), 3..4);
    }
}
