//! Cubic B-spline bases on equidistant knots and second-order difference
//! penalties (P-spline convention).
//!
//! Every design row has exactly four nonzero entries in adjacent columns,
//! also outside the training domain where the basis is continued linearly
//! from the boundary. [`BasisMatrix`] stores rows in that banded form.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const DEGREE: usize = 3;

/// Default size of the location basis.
pub const DEFAULT_Q: usize = 14;
/// Default size of the scale basis.
pub const DEFAULT_P: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    num_basis: usize,
    knots: Vec<f64>,
    domain: (f64, f64),
}

impl SplineBasis {
    /// Basis whose domain is `[min(x), max(x)]`.
    pub fn fit(x: &[f64], num_basis: usize) -> Result<Self> {
        if num_basis < DEGREE + 1 {
            return Err(Error::Construction(format!("need at least 4 basis functions, got {num_basis}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Construction("non-finite input value".into()));
        }
        let mut sorted = x.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() < num_basis {
            return Err(Error::Construction(format!(
                "{} distinct values cannot support {num_basis} basis functions",
                sorted.len()
            )));
        }
        Self::on_domain(sorted[0], sorted[sorted.len() - 1], num_basis)
    }

    pub fn on_domain(lo: f64, hi: f64, num_basis: usize) -> Result<Self> {
        if num_basis < DEGREE + 1 {
            return Err(Error::Construction(format!("need at least 4 basis functions, got {num_basis}")));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Construction(format!("invalid domain [{lo}, {hi}]")));
        }
        let segments = num_basis - DEGREE;
        let h = (hi - lo) / segments as f64;
        let knots = (0..num_basis + DEGREE + 1)
            .map(|j| lo + (j as f64 - DEGREE as f64) * h)
            .collect();
        Ok(Self { num_basis, knots, domain: (lo, hi) })
    }

    pub fn num_basis(&self) -> usize {
        self.num_basis
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn segments(&self) -> usize {
        self.num_basis - DEGREE
    }

    /// Knot-span index `s` such that columns `s..s+4` are active at `x`.
    fn span(&self, x: f64) -> usize {
        let (lo, hi) = self.domain;
        let h = (hi - lo) / self.segments() as f64;
        let s = ((x - lo) / h).floor();
        if s.is_nan() || s < 0.0 {
            0
        } else {
            (s as usize).min(self.segments() - 1)
        }
    }

    /// Nonzero values of the cubic and quadratic bases on span `s` at `x`
    /// via the Cox-de Boor triangular recursion.
    fn local_basis(&self, s: usize, x: f64) -> ([f64; 4], [f64; 3]) {
        // knot index of the left end of the span
        let i = s + DEGREE;
        let t = &self.knots;
        let mut n = [0.0; 4];
        let mut left = [0.0; 4];
        let mut right = [0.0; 4];
        let mut quad = [0.0; 3];
        n[0] = 1.0;
        for j in 1..=DEGREE {
            left[j] = x - t[i + 1 - j];
            right[j] = t[i + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            n[j] = saved;
            if j == DEGREE - 1 {
                quad.copy_from_slice(&n[..3]);
            }
        }
        (n, quad)
    }

    /// Derivatives of the four active cubic basis functions on span `s`.
    fn local_derivative(&self, s: usize, quad: &[f64; 3]) -> [f64; 4] {
        let t = &self.knots;
        // quadratic B_{s+1..s+3}; B_{s} and B_{s+4} of degree 2 vanish on this span
        let b2 = |m: usize| if (1..=3).contains(&m) { quad[m - 1] } else { 0.0 };
        let mut d = [0.0; 4];
        for (r, dr) in d.iter_mut().enumerate() {
            let j = s + r;
            let a = DEGREE as f64 / (t[j + DEGREE] - t[j]);
            let b = DEGREE as f64 / (t[j + DEGREE + 1] - t[j + 1]);
            *dr = a * b2(r) - b * b2(r + 1);
        }
        d
    }

    /// Active column offset and the four basis values at `x`; linear
    /// continuation beyond the domain.
    pub fn eval(&self, x: f64) -> (usize, [f64; 4]) {
        let (lo, hi) = self.domain;
        let anchor = x.clamp(lo, hi);
        let s = self.span(anchor);
        let (vals, quad) = self.local_basis(s, anchor);
        if anchor == x {
            return (s, vals);
        }
        let d = self.local_derivative(s, &quad);
        let dx = x - anchor;
        let mut out = vals;
        for (o, dv) in out.iter_mut().zip(d) {
            *o += dv * dx;
        }
        (s, out)
    }

    pub fn design(&self, x: &[f64]) -> BasisMatrix {
        let mut start = Vec::with_capacity(x.len());
        let mut vals = Vec::with_capacity(x.len());
        for &xi in x {
            let (s, v) = self.eval(xi);
            start.push(s);
            vals.push(v);
        }
        BasisMatrix { ncols: self.num_basis, start, vals }
    }
}

/// Banded `n x r` B-spline evaluation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    ncols: usize,
    start: Vec<usize>,
    vals: Vec<[f64; 4]>,
}

impl BasisMatrix {
    pub fn nrows(&self) -> usize {
        self.start.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// `row_i . coef`
    #[inline]
    pub fn row_dot(&self, i: usize, coef: &[f64]) -> f64 {
        let s = self.start[i];
        let v = &self.vals[i];
        v[0] * coef[s] + v[1] * coef[s + 1] + v[2] * coef[s + 2] + v[3] * coef[s + 3]
    }

    /// Active column offset and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (usize, &[f64; 4]) {
        (self.start[i], &self.vals[i])
    }

    pub fn mul_vec(&self, coef: &[f64]) -> Vec<f64> {
        (0..self.nrows()).map(|i| self.row_dot(i, coef)).collect()
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            ncols: self.ncols,
            start: idx.iter().map(|&i| self.start[i]).collect(),
            vals: idx.iter().map(|&i| self.vals[i]).collect(),
        }
    }

    /// `B^T diag(w) B`
    pub fn weighted_gram(&self, w: &[f64]) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.ncols, self.ncols);
        for (i, &wi) in w.iter().enumerate() {
            let (s, v) = self.row(i);
            for a in 0..4 {
                let va = wi * v[a];
                for b in 0..4 {
                    g[(s + a, s + b)] += va * v[b];
                }
            }
        }
        g
    }

    /// `B^T (w .* r)`
    pub fn weighted_tmul(&self, w: &[f64], r: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.ncols);
        for i in 0..self.nrows() {
            let (s, v) = self.row(i);
            let c = w[i] * r[i];
            for a in 0..4 {
                out[s + a] += c * v[a];
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols);
        for i in 0..self.nrows() {
            let (s, v) = self.row(i);
            for a in 0..4 {
                m[(i, s + a)] = v[a];
            }
        }
        m
    }
}

/// Fits a basis on `x` and evaluates it at the same points.
pub fn build_basis(x: &[f64], num_basis: usize) -> Result<(SplineBasis, BasisMatrix)> {
    let basis = SplineBasis::fit(x, num_basis)?;
    let m = basis.design(x);
    Ok((basis, m))
}

/// Location (`N`, `n x q`) and scale (`Z`, `n x p`) designs for one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPair {
    pub location: BasisMatrix,
    pub scale: BasisMatrix,
}

/// The two bases a [`DesignPair`] is built from; kept to evaluate new points.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignBases {
    pub location: SplineBasis,
    pub scale: SplineBasis,
}

impl DesignBases {
    pub fn fit(cause: &[f64], q: usize, p: usize) -> Result<Self> {
        Ok(Self { location: SplineBasis::fit(cause, q)?, scale: SplineBasis::fit(cause, p)? })
    }

    pub fn design(&self, cause: &[f64]) -> Result<DesignPair> {
        let n = cause.len();
        let (q, p) = (self.location.num_basis(), self.scale.num_basis());
        if n < q || n < p {
            return Err(Error::Dimension(format!("{n} rows cannot identify q={q}, p={p}")));
        }
        Ok(self.evaluate(cause))
    }

    /// Evaluates both bases at arbitrary points, e.g. a held-out fold, with
    /// no row-count requirement.
    pub fn evaluate(&self, cause: &[f64]) -> DesignPair {
        DesignPair { location: self.location.design(cause), scale: self.scale.design(cause) }
    }
}

impl DesignPair {
    pub fn from_cause(cause: &[f64], q: usize, p: usize) -> Result<Self> {
        DesignBases::fit(cause, q, p)?.design(cause)
    }

    pub fn n(&self) -> usize {
        self.location.nrows()
    }

    pub fn q(&self) -> usize {
        self.location.ncols()
    }

    pub fn p(&self) -> usize {
        self.scale.ncols()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self { location: self.location.select_rows(idx), scale: self.scale.select_rows(idx) }
    }
}

/// Second-order difference matrix `D_r`, `(r-2) x r`.
pub fn difference_matrix(r: usize) -> Result<DMatrix<f64>> {
    if r < 3 {
        return Err(Error::Dimension(format!("difference matrix needs r >= 3, got {r}")));
    }
    let mut d = DMatrix::zeros(r - 2, r);
    for j in 0..r - 2 {
        d[(j, j)] = 1.0;
        d[(j, j + 1)] = -2.0;
        d[(j, j + 2)] = 1.0;
    }
    Ok(d)
}

/// Roughness penalties `K = D_q^T D_q` and `M = D_p^T D_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    pub k: DMatrix<f64>,
    pub m: DMatrix<f64>,
}

pub fn penalty_matrices(q: usize, p: usize) -> Result<PenaltySpec> {
    let dq = difference_matrix(q)?;
    let dp = difference_matrix(p)?;
    Ok(PenaltySpec { k: dq.transpose() * &dq, m: dp.transpose() * &dp })
}

fn quad_form(a: &DMatrix<f64>, v: &[f64]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += a[(i, j)] * v[j];
        }
        acc += v[i] * row;
    }
    acc
}

impl PenaltySpec {
    /// `psi^T K psi`
    pub fn location_penalty(&self, psi: &[f64]) -> f64 {
        quad_form(&self.k, psi)
    }

    /// `rho^T M rho`
    pub fn scale_penalty(&self, rho: &[f64]) -> f64 {
        quad_form(&self.m, rho)
    }
}
