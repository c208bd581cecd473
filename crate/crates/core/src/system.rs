//! Sparse assembly, direct solve and the Frobenius condition number.
//!
//! The solver is a banded LU factorization with partial pivoting. The DOF
//! numbering of tensor-product spline spaces keeps couplings within a band
//! of roughly `(p + 1)` rows of basis functions, which keeps factorization
//! cost and fill bounded at desk scale.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::weakform::ElementContribution;

/// Default largest dimension accepted by [`condition_number`].
pub const DENSE_LIMIT: usize = 6000;
/// Relative residual required of a successful solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Square matrix in compressed row storage together with a right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    /// Sums contributions into an `n x n` system. Entries are reduced in
    /// sorted `(row, col, value)` order, so the result does not depend on the
    /// order of the input.
    pub fn assemble<'a, I>(n: usize, contributions: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a ElementContribution>,
    {
        let mut trip: Vec<(usize, usize, f64)> = Vec::new();
        let mut rhs_entries: Vec<(usize, f64)> = Vec::new();
        for c in contributions {
            for &(i, j, v) in &c.matrix {
                if i >= n || j >= n {
                    return Err(Error::Internal(format!(
                        "matrix entry ({i}, {j}) outside dimension {n}"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::Internal(format!(
                        "non-finite matrix entry at ({i}, {j})"
                    )));
                }
                trip.push((i, j, v));
            }
            for &(i, v) in &c.rhs {
                if i >= n {
                    return Err(Error::Internal(format!(
                        "load entry {i} outside dimension {n}"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::Internal(format!("non-finite load entry at {i}")));
                }
                rhs_entries.push((i, v));
            }
        }
        Ok(Self::from_triplets(n, trip, rhs_entries))
    }

    fn from_triplets(
        n: usize,
        mut trip: Vec<(usize, usize, f64)>,
        mut rhs_entries: Vec<(usize, f64)>,
    ) -> Self {
        trip.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trip {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        rhs_entries.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut rhs = vec![0.0; n];
        for (i, v) in rhs_entries {
            rhs[i] += v;
        }
        SparseSystem {
            n,
            row_ptr,
            cols,
            values,
            rhs,
        }
    }

    /// Builds a system from a dense row-major matrix (zeros are not stored).
    pub fn from_dense(a: &[Vec<f64>], rhs: Vec<f64>) -> Result<Self> {
        let n = a.len();
        if rhs.len() != n || a.iter().any(|r| r.len() != n) {
            return Err(Error::Argument(
                "dense matrix must be square and match the load".into(),
            ));
        }
        let mut trip = Vec::new();
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        let rhs_entries = rhs.into_iter().enumerate().collect();
        Ok(Self::from_triplets(n, trip, rhs_entries))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored `(column, value)` entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        a
    }

    pub fn frobenius_norm(&self) -> f64 {
        Float::sqrt(self.values.iter().map(|v| v * v).sum::<f64>())
    }

    /// Lower and upper bandwidths of the stored pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                if i > j {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    /// `alpha * A` with the same right-hand side.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut s = self.clone();
        s.values.iter_mut().for_each(|v| *v *= alpha);
        s
    }
}

/// LU factors of a banded matrix in LAPACK band layout.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    /// Column-major band storage; entry `(r, c)` sits at
    /// `c * ldab + kl + ku + r - c`.
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    /// Smallest pivot magnitude relative to the largest entry.
    pub min_pivot: f64,
}

impl BandedLu {
    pub fn factor(sys: &SparseSystem) -> Result<Self> {
        let n = sys.n;
        if n == 0 {
            return Err(Error::Argument("empty system".into()));
        }
        let (kl, ku) = sys.bandwidths();
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; n * ldab];
        let mut amax: f64 = 0.0;
        for i in 0..n {
            for (j, v) in sys.row(i) {
                ab[j * ldab + kv + i - j] = v;
                amax = amax.max(v.abs());
            }
        }
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        let mut min_pivot = f64::INFINITY;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab + kv;
            let mut jp = 0;
            let mut best = ab[col].abs();
            for i in 1..=km {
                let v = ab[col + i].abs();
                if v > best {
                    best = v;
                    jp = i;
                }
            }
            ipiv[j] = j + jp;
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::Singular(format!(
                    "zero pivot in column {j} of {n} (largest entry {amax:e})"
                )));
            }
            min_pivot = min_pivot.min(best / amax);
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                let r = j + jp;
                for c in j..=ju {
                    ab.swap(c * ldab + kv + j - c, c * ldab + kv + r - c);
                }
            }
            let piv = ab[col];
            for i in 1..=km {
                ab[col + i] /= piv;
            }
            for c in j + 1..=ju {
                let t = ab[c * ldab + kv + j - c];
                if t != 0.0 {
                    for i in 1..=km {
                        let m = ab[col + i];
                        ab[c * ldab + kv + j + i - c] -= m * t;
                    }
                }
            }
        }
        Ok(BandedLu {
            n,
            kl,
            ku,
            ldab,
            ab,
            ipiv,
            min_pivot,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ldab) = (self.n, self.kl, self.ldab);
        let kv = kl + self.ku;
        for j in 0..n {
            let l = self.ipiv[j];
            if l != j {
                b.swap(l, j);
            }
            let bj = b[j];
            if bj != 0.0 {
                let km = kl.min(n - 1 - j);
                for i in 1..=km {
                    b[j + i] -= self.ab[j * ldab + kv + i] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[j * ldab + kv];
            let bj = b[j];
            if bj != 0.0 {
                for i in 1..=kv.min(j) {
                    b[j - i] -= self.ab[j * ldab + kv - i] * bj;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Relative residual within [`RESIDUAL_TOLERANCE`].
    Converged,
    /// Factorization succeeded but the residual stayed above tolerance.
    Inaccurate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    /// `||A u - f|| / ||f||` (absolute residual when `f = 0`).
    pub residual: f64,
    pub refinement_steps: usize,
    pub status: SolveStatus,
    pub min_pivot: f64,
    pub condition: Option<f64>,
}

fn norm(v: &[f64]) -> f64 {
    Float::sqrt(v.iter().map(|x| x * x).sum::<f64>())
}

fn relative_residual(sys: &SparseSystem, u: &[f64]) -> (Vec<f64>, f64) {
    let au = sys.matvec(u);
    let r: Vec<f64> = sys.rhs.iter().zip(&au).map(|(f, a)| f - a).collect();
    let fnorm = norm(&sys.rhs);
    let scale = if fnorm > 0.0 { fnorm } else { 1.0 };
    let rel = norm(&r) / scale;
    (r, rel)
}

/// Direct solve with up to three steps of iterative refinement.
pub fn solve(sys: &SparseSystem) -> Result<SolveReport> {
    let lu = BandedLu::factor(sys)?;
    let mut u = sys.rhs.clone();
    lu.solve_in_place(&mut u);
    let (mut r, mut rel) = relative_residual(sys, &u);
    let mut steps = 0;
    while rel > 1e-14 && steps < 3 {
        lu.solve_in_place(&mut r);
        let cand: Vec<f64> = u.iter().zip(&r).map(|(a, d)| a + d).collect();
        let (r2, rel2) = relative_residual(sys, &cand);
        if !(rel2 < rel) {
            break;
        }
        u = cand;
        r = r2;
        rel = rel2;
        steps += 1;
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular("non-finite solution".into()));
    }
    let status = if rel <= RESIDUAL_TOLERANCE {
        SolveStatus::Converged
    } else {
        log::warn!("relative residual {rel:e} above tolerance");
        SolveStatus::Inaccurate
    };
    Ok(SolveReport {
        solution: u,
        residual: rel,
        refinement_steps: steps,
        status,
        min_pivot: lu.min_pivot,
        condition: None,
    })
}

/// `||A||_F * ||A^-1||_F`, with the inverse formed column by column from
/// the LU factors. Systems above `limit` are rejected.
pub fn condition_number_with_limit(sys: &SparseSystem, limit: usize) -> Result<f64> {
    if sys.n > limit {
        return Err(Error::TooLarge { n: sys.n, limit });
    }
    let lu = BandedLu::factor(sys)?;
    let mut inv_sq = 0.0;
    let mut col = vec![0.0; sys.n];
    for i in 0..sys.n {
        col.iter_mut().for_each(|x| *x = 0.0);
        col[i] = 1.0;
        lu.solve_in_place(&mut col);
        inv_sq += col.iter().map(|x| x * x).sum::<f64>();
    }
    if !inv_sq.is_finite() {
        return Err(Error::Singular("inverse overflowed".into()));
    }
    let cond = sys.frobenius_norm() * Float::sqrt(inv_sq);
    if cond > 1e15 {
        log::info!("condition number {cond:e} is only an order-of-magnitude estimate");
    }
    Ok(cond)
}

pub fn condition_number(sys: &SparseSystem) -> Result<f64> {
    condition_number_with_limit(sys, DENSE_LIMIT)
}
