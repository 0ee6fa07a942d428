//! Polynomial differential forms on a single reference simplex.
//!
//! A form of degree `k` on the reference `d`-simplex is stored as
//! `Σ c_{α,σ} x^α dx_σ` where `α` ranges over exponent multi-indices in the
//! `d` reference coordinates and `σ` over strictly increasing `k`-subsets of
//! `{0, …, d−1}`. Reference coordinates avoid the barycentric redundancy, so
//! every form has a unique coefficient vector.
//!
//! The reference `d`-simplex has vertices `0, e_1, …, e_d`. All traces onto
//! subsimplices are pullbacks along the affine inclusion that maps reference
//! vertices in order onto the sub-vertices in order.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolyFormError {
    #[error("form degree {degree} is not attainable on a {dim}-dimensional simplex")]
    InvalidDegree { dim: usize, degree: usize },
    #[error("operands live on simplices of different dimension ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("wedge degree {0} + {1} exceeds the simplex dimension {2}")]
    DegreeOverflow(usize, usize, usize),
    #[error("Koszul contraction needs form degree >= 1")]
    KoszulOnScalar,
    #[error("invalid basis parameters d={d}, r={r}, k={k}")]
    InvalidBasisParams { d: usize, r: usize, k: usize },
    #[error("evaluation expects {expected} vectors, got {got}")]
    WrongVectorCount { expected: usize, got: usize },
    #[error("face vertex positions {0:?} are not valid for dimension {1}")]
    InvalidFacePositions(Vec<usize>, usize),
}

/// One monomial-wedge key `x^exps dx_wedge`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Term {
    exps: Vec<u8>,
    wedge: Vec<u8>,
}

/// A polynomial differential form in reference coordinates of one simplex.
#[derive(Debug, Clone)]
pub struct PolyForm {
    dim: usize,
    degree: usize,
    terms: BTreeMap<Term, f64>,
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Strictly increasing `k`-subsets of `{0, …, d−1}` in lexicographic order.
pub fn increasing_subsets(d: usize, k: usize) -> Vec<Vec<u8>> {
    if k > d {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(binomial(d, k));
    let mut current: Vec<u8> = (0..k as u8).collect();
    loop {
        out.push(current.clone());
        // advance to the next subset
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] < (d - k + i) as u8 {
                current[i] += 1;
                for j in i + 1..k {
                    current[j] = current[j - 1] + 1;
                }
                break;
            }
        }
        if k == 0 {
            return out;
        }
    }
}

/// All exponent multi-indices over `d` variables with total degree <= r,
/// graded lexicographic order.
pub fn multi_indices(d: usize, r: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for total in 0..=r {
        append_indices_exact(d, total, &mut Vec::new(), &mut out);
    }
    out
}

/// Multi-indices with total degree exactly `r`.
pub fn multi_indices_exact(d: usize, r: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    append_indices_exact(d, r, &mut Vec::new(), &mut out);
    out
}

fn append_indices_exact(d: usize, total: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if d == 0 {
        if total == 0 {
            out.push(prefix.clone());
        }
        return;
    }
    if prefix.len() == d - 1 {
        if total <= u8::MAX as usize {
            prefix.push(total as u8);
            out.push(prefix.clone());
            prefix.pop();
        }
        return;
    }
    for e in (0..=total).rev() {
        prefix.push(e as u8);
        append_indices_exact(d, total - e, prefix, out);
        prefix.pop();
    }
}

/// Sign and sorted result of inserting `idx` into the increasing list `wedge`.
/// Returns `None` when `idx` already occurs (the wedge vanishes).
fn insert_into_wedge(wedge: &[u8], idx: u8) -> Option<(i32, Vec<u8>)> {
    let pos = wedge.partition_point(|&w| w < idx);
    if pos < wedge.len() && wedge[pos] == idx {
        return None;
    }
    let mut out = Vec::with_capacity(wedge.len() + 1);
    out.extend_from_slice(&wedge[..pos]);
    out.push(idx);
    out.extend_from_slice(&wedge[pos..]);
    let sign = if pos % 2 == 0 { 1 } else { -1 };
    Some((sign, out))
}

/// Sign of merging two disjoint increasing lists into one increasing list.
/// Counts the inversions of the concatenation `a ++ b`.
fn merge_wedges(a: &[u8], b: &[u8]) -> Option<(i32, Vec<u8>)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut inversions = 0usize;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        if a[i] == b[j] {
            return None;
        }
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            // b[j] jumps over the remaining entries of a
            inversions += a.len() - i;
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    let sign = if inversions % 2 == 0 { 1 } else { -1 };
    Some((sign, out))
}

impl PolyForm {
    pub fn zero(dim: usize, degree: usize) -> Self {
        PolyForm {
            dim,
            degree,
            terms: BTreeMap::new(),
        }
    }

    /// The constant function `value` as a 0-form.
    pub fn constant(dim: usize, value: f64) -> Self {
        let mut f = PolyForm::zero(dim, 0);
        f.add_term(vec![0; dim], Vec::new(), value);
        f
    }

    /// The coordinate function `x_i` as a 0-form.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        assert!(i < dim);
        let mut exps = vec![0u8; dim];
        exps[i] = 1;
        let mut f = PolyForm::zero(dim, 0);
        f.add_term(exps, Vec::new(), 1.0);
        f
    }

    /// The constant 1-form `dx_i`.
    pub fn dx(dim: usize, i: usize) -> Self {
        assert!(i < dim);
        let mut f = PolyForm::zero(dim, 1);
        f.add_term(vec![0; dim], vec![i as u8], 1.0);
        f
    }

    /// Single term `c · x^exps dx_wedge`; `wedge` must be strictly increasing.
    pub fn monomial(dim: usize, exps: Vec<u8>, wedge: Vec<u8>, c: f64) -> Self {
        assert_eq!(exps.len(), dim);
        assert!(wedge.windows(2).all(|w| w[0] < w[1]));
        assert!(wedge.iter().all(|&w| (w as usize) < dim));
        let mut f = PolyForm::zero(dim, wedge.len());
        f.add_term(exps, wedge, c);
        f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest total polynomial degree among the stored terms.
    pub fn poly_degree(&self) -> usize {
        self.terms
            .keys()
            .map(|t| t.exps.iter().map(|&e| e as usize).sum())
            .max()
            .unwrap_or(0)
    }

    fn add_term(&mut self, exps: Vec<u8>, wedge: Vec<u8>, c: f64) {
        if c == 0.0 {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(Term { exps, wedge }) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if *e.get() == 0.0 {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = PolyForm::zero(self.dim, self.degree);
        if c == 0.0 {
            return out;
        }
        for (t, &v) in &self.terms {
            out.terms.insert(t.clone(), c * v);
        }
        out
    }

    pub fn add(&self, other: &PolyForm) -> Self {
        assert_eq!(self.dim, other.dim);
        assert_eq!(self.degree, other.degree);
        let mut out = self.clone();
        for (t, &v) in &other.terms {
            out.add_term(t.exps.clone(), t.wedge.clone(), v);
        }
        out
    }

    pub fn sub(&self, other: &PolyForm) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Drop terms whose coefficient is below `tol` in absolute value.
    pub fn pruned(&self, tol: f64) -> Self {
        let mut out = PolyForm::zero(self.dim, self.degree);
        for (t, &v) in &self.terms {
            if v.abs() > tol {
                out.terms.insert(t.clone(), v);
            }
        }
        out
    }

    /// Maximum absolute coefficient.
    pub fn coeff_max(&self) -> f64 {
        self.terms.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Exterior product. Degrees add; anticommutative with sign `(-1)^{k l}`.
    pub fn wedge(&self, other: &PolyForm) -> Result<PolyForm, PolyFormError> {
        if self.dim != other.dim {
            return Err(PolyFormError::DimensionMismatch(self.dim, other.dim));
        }
        if self.degree + other.degree > self.dim {
            // wedge above top degree is identically zero; callers that ask
            // for it get the zero form rather than an error
            return Ok(PolyForm::zero(self.dim, self.degree + other.degree));
        }
        let mut out = PolyForm::zero(self.dim, self.degree + other.degree);
        for (ta, &ca) in &self.terms {
            for (tb, &cb) in &other.terms {
                if let Some((sign, wedge)) = merge_wedges(&ta.wedge, &tb.wedge) {
                    let exps: Vec<u8> = ta
                        .exps
                        .iter()
                        .zip(&tb.exps)
                        .map(|(&a, &b)| a + b)
                        .collect();
                    out.add_term(exps, wedge, sign as f64 * ca * cb);
                }
            }
        }
        Ok(out)
    }

    /// Exterior derivative. On top-degree forms this is the zero form of
    /// degree `k+1` by convention.
    pub fn exterior_derivative(&self) -> PolyForm {
        let mut out = PolyForm::zero(self.dim, self.degree + 1);
        if self.degree >= self.dim {
            return out;
        }
        for (t, &c) in &self.terms {
            for i in 0..self.dim {
                let e = t.exps[i];
                if e == 0 {
                    continue;
                }
                if let Some((sign, wedge)) = insert_into_wedge(&t.wedge, i as u8) {
                    let mut exps = t.exps.clone();
                    exps[i] -= 1;
                    out.add_term(exps, wedge, sign as f64 * c * e as f64);
                }
            }
        }
        out
    }

    /// Koszul contraction with the position vector field `Σ x_i ∂_i`.
    pub fn koszul(&self) -> Result<PolyForm, PolyFormError> {
        if self.degree == 0 {
            return Err(PolyFormError::KoszulOnScalar);
        }
        let mut out = PolyForm::zero(self.dim, self.degree - 1);
        for (t, &c) in &self.terms {
            for (l, &idx) in t.wedge.iter().enumerate() {
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                let mut exps = t.exps.clone();
                exps[idx as usize] += 1;
                let mut wedge = t.wedge.clone();
                wedge.remove(l);
                out.add_term(exps, wedge, sign * c);
            }
        }
        Ok(out)
    }

    /// Partial derivative of every coefficient function with respect to
    /// reference coordinate `i` (the wedge parts are untouched).
    pub fn coeff_derivative(&self, i: usize) -> PolyForm {
        let mut out = PolyForm::zero(self.dim, self.degree);
        for (t, &c) in &self.terms {
            let e = t.exps[i];
            if e == 0 {
                continue;
            }
            let mut exps = t.exps.clone();
            exps[i] -= 1;
            out.add_term(exps, t.wedge.clone(), c * e as f64);
        }
        out
    }

    /// Pullback along the affine map `z ↦ A z + b` from `R^m` (m = A.ncols())
    /// into this form's `R^dim`. Exact: polynomial composition plus constant
    /// linear substitution of the coframe.
    pub fn pullback_affine(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> PolyForm {
        assert_eq!(a.nrows(), self.dim);
        assert_eq!(b.len(), self.dim);
        let m = a.ncols();
        // affine coordinate functions x_i ∘ map as 0-forms on R^m
        let coord_pullbacks: Vec<PolyForm> = (0..self.dim)
            .map(|i| {
                let mut f = PolyForm::constant(m, b[i]);
                for j in 0..m {
                    f = f.add(&PolyForm::coordinate(m, j).scale(a[(i, j)]));
                }
                f
            })
            .collect();
        // pullbacks of the 1-forms dx_i
        let dx_pullbacks: Vec<PolyForm> = (0..self.dim)
            .map(|i| {
                let mut f = PolyForm::zero(m, 1);
                for j in 0..m {
                    if a[(i, j)] != 0.0 {
                        f.add_term(
                            vec![0; m],
                            vec![j as u8],
                            a[(i, j)],
                        );
                    }
                }
                f
            })
            .collect();
        let mut out = PolyForm::zero(m, self.degree);
        for (t, &c) in &self.terms {
            let mut factor = PolyForm::constant(m, c);
            for i in 0..self.dim {
                for _ in 0..t.exps[i] {
                    factor = factor.wedge(&coord_pullbacks[i]).expect("0-form wedge");
                }
            }
            let mut form = factor;
            for &idx in &t.wedge {
                form = form
                    .wedge(&dx_pullbacks[idx as usize])
                    .expect("degree within bounds");
            }
            out = out.add(&form);
        }
        out
    }

    /// Trace onto the face spanned by reference vertices at `positions`
    /// (strictly increasing positions within `0..=dim`). The result lives on
    /// the reference simplex of dimension `positions.len() - 1`.
    pub fn trace_to_face(&self, positions: &[usize]) -> Result<PolyForm, PolyFormError> {
        if positions.is_empty()
            || positions.windows(2).any(|w| w[0] >= w[1])
            || *positions.last().unwrap() > self.dim
        {
            return Err(PolyFormError::InvalidFacePositions(
                positions.to_vec(),
                self.dim,
            ));
        }
        let m = positions.len() - 1;
        // reference vertex p: origin for p = 0, e_p otherwise
        let vertex = |p: usize| -> DVector<f64> {
            let mut v = DVector::zeros(self.dim);
            if p > 0 {
                v[p - 1] = 1.0;
            }
            v
        };
        let base = vertex(positions[0]);
        let mut a = DMatrix::zeros(self.dim, m);
        for l in 0..m {
            let col = vertex(positions[l + 1]) - &base;
            a.set_column(l, &col);
        }
        Ok(self.pullback_affine(&a, &base))
    }

    /// Multilinear evaluation at a reference point against `k` vectors.
    pub fn evaluate(&self, point: &[f64], vectors: &[Vec<f64>]) -> Result<f64, PolyFormError> {
        if vectors.len() != self.degree {
            return Err(PolyFormError::WrongVectorCount {
                expected: self.degree,
                got: vectors.len(),
            });
        }
        assert_eq!(point.len(), self.dim);
        let k = self.degree;
        let mut total = 0.0;
        for (t, &c) in &self.terms {
            let mono = monomial_value(&t.exps, point);
            if mono == 0.0 {
                continue;
            }
            // det of the k×k matrix with entries vectors[b][σ_a]
            let det = match k {
                0 => 1.0,
                _ => {
                    let m = DMatrix::from_fn(k, k, |a_row, b_col| {
                        vectors[b_col][t.wedge[a_row] as usize]
                    });
                    m.determinant()
                }
            };
            total += c * mono * det;
        }
        Ok(total)
    }

    /// Coefficient functions per increasing wedge subset (lexicographic
    /// order over `increasing_subsets(dim, degree)`), evaluated at `point`.
    pub fn component_values(&self, point: &[f64]) -> Vec<f64> {
        let subsets = increasing_subsets(self.dim, self.degree);
        let mut out = vec![0.0; subsets.len()];
        for (t, &c) in &self.terms {
            let mono = monomial_value(&t.exps, point);
            if mono == 0.0 {
                continue;
            }
            let pos = subsets
                .binary_search(&t.wedge)
                .expect("wedge subset is canonical");
            out[pos] += c * mono;
        }
        out
    }

    /// Coefficient of the single term `x^exps dx_wedge` (zero if absent).
    pub fn coefficient(&self, exps: &[u8], wedge: &[u8]) -> f64 {
        self.terms
            .get(&Term {
                exps: exps.to_vec(),
                wedge: wedge.to_vec(),
            })
            .copied()
            .unwrap_or(0.0)
    }

    /// Coefficient vector with respect to the monomial-wedge basis of all
    /// forms of polynomial degree <= r (the order of [`basis_full`]).
    pub fn coefficient_vector(&self, r: usize) -> DVector<f64> {
        let alphas = multi_indices(self.dim, r);
        let sigmas = increasing_subsets(self.dim, self.degree);
        let mut v = DVector::zeros(alphas.len() * sigmas.len());
        for (t, &c) in &self.terms {
            let ai = alphas
                .iter()
                .position(|a| a == &t.exps)
                .expect("degree bound exceeded");
            let si = sigmas
                .binary_search(&t.wedge)
                .expect("wedge subset is canonical");
            v[ai * sigmas.len() + si] = c;
        }
        v
    }
}

fn monomial_value(exps: &[u8], point: &[f64]) -> f64 {
    let mut acc = 1.0;
    for (i, &e) in exps.iter().enumerate() {
        for _ in 0..e {
            acc *= point[i];
        }
    }
    acc
}

/// Dimension of the space of polynomial k-forms of degree <= r on a
/// d-simplex.
pub fn dim_full(d: usize, r: usize, k: usize) -> usize {
    if k > d {
        return 0;
    }
    binomial(d + r, d) * binomial(d, k)
}

/// Dimension of the trimmed space of degree r >= 1 on a d-simplex.
pub fn dim_trimmed(d: usize, r: usize, k: usize) -> usize {
    if k > d || r == 0 {
        return 0;
    }
    binomial(r + k - 1, k) * binomial(d + r, d - k)
}

/// Monomial-wedge basis of the full space: all `x^α dx_σ` with `|α| <= r`.
pub fn basis_full(d: usize, r: usize, k: usize) -> Result<Vec<PolyForm>, PolyFormError> {
    if k > d {
        return Err(PolyFormError::InvalidBasisParams { d, r, k });
    }
    let alphas = multi_indices(d, r);
    let sigmas = increasing_subsets(d, k);
    let mut out = Vec::with_capacity(alphas.len() * sigmas.len());
    for alpha in &alphas {
        for sigma in &sigmas {
            out.push(PolyForm::monomial(d, alpha.clone(), sigma.clone(), 1.0));
        }
    }
    Ok(out)
}

/// Basis of the trimmed space `P_{r-1}Λ^k + κ P_{r-1}Λ^{k+1}`, extracted from
/// the generating set by Gram-Schmidt selection with a fixed processing
/// order, so repeated runs produce the same basis.
pub fn basis_trimmed(d: usize, r: usize, k: usize) -> Result<Vec<PolyForm>, PolyFormError> {
    if k > d || r == 0 {
        return Err(PolyFormError::InvalidBasisParams { d, r, k });
    }
    let mut generators = basis_full(d, r - 1, k)?;
    if k + 1 <= d {
        for g in basis_full(d, r - 1, k + 1)? {
            generators.push(g.koszul().expect("degree k+1 >= 1"));
        }
    }
    let expected = dim_trimmed(d, r, k);
    let mut kept: Vec<PolyForm> = Vec::with_capacity(expected);
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(expected);
    for g in generators {
        let v = g.coefficient_vector(r);
        let norm0 = v.norm();
        if norm0 == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for q in &ortho {
            let proj = q.dot(&w);
            w -= q * proj;
        }
        // re-orthogonalize once; plain Gram-Schmidt loses digits
        for q in &ortho {
            let proj = q.dot(&w);
            w -= q * proj;
        }
        if w.norm() > 1e-8 * norm0 {
            let wn = w.norm();
            ortho.push(w / wn);
            kept.push(g);
        }
    }
    assert_eq!(
        kept.len(),
        expected,
        "trimmed basis selection produced {} of {} expected members (d={d}, r={r}, k={k})",
        kept.len(),
        expected
    );
    Ok(kept)
}

/// Chart of one simplex: the affine map from reference coordinates onto the
/// physical vertices (in canonical increasing-id order).
#[derive(Debug, Clone)]
pub struct SimplexChart {
    pub simplex: usize,
    /// n × d matrix of edge vectors from the first vertex.
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl SimplexChart {
    pub fn from_vertices(simplex: usize, coords: &[DVector<f64>]) -> Self {
        let n = coords[0].len();
        let d = coords.len() - 1;
        let offset = coords[0].clone();
        let mut matrix = DMatrix::zeros(n, d);
        for j in 0..d {
            matrix.set_column(j, &(&coords[j + 1] - &offset));
        }
        SimplexChart {
            simplex,
            matrix,
            offset,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ref_dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Physical point of a reference point.
    pub fn map_point(&self, x: &[f64]) -> DVector<f64> {
        let xv = DVector::from_column_slice(x);
        &self.matrix * xv + &self.offset
    }

    /// Signed determinant; only meaningful for full-dimensional simplices.
    pub fn det(&self) -> f64 {
        assert_eq!(self.ref_dim(), self.ambient_dim());
        self.matrix.clone().determinant()
    }

    /// d-dimensional volume of the simplex.
    pub fn volume(&self) -> f64 {
        let d = self.ref_dim();
        let gram = self.matrix.transpose() * &self.matrix;
        let det = gram.determinant().max(0.0);
        det.sqrt() / factorial(d) as f64
    }

    /// Pull a reference form on a cell into ambient coordinates. Only valid
    /// for full-dimensional simplices (invertible chart).
    pub fn push_to_ambient(&self, form: &PolyForm) -> PolyForm {
        assert_eq!(self.ref_dim(), self.ambient_dim());
        let inv = self
            .matrix
            .clone()
            .try_inverse()
            .expect("chart is invertible");
        let b = -&inv * &self.offset;
        form.pullback_affine(&inv, &b)
    }

    /// Pull an ambient-coordinate form back to reference coordinates.
    pub fn pull_to_reference(&self, ambient_form: &PolyForm) -> PolyForm {
        ambient_form.pullback_affine(&self.matrix, &self.offset)
    }
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product::<usize>().max(1)
}

/// k-th compound matrix: entry `(σ, τ)` is `det A[σ, τ]` over increasing
/// k-subsets σ of the rows and τ of the columns, lexicographic order.
pub fn compound_matrix(a: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let rows = increasing_subsets(a.nrows(), k);
    let cols = increasing_subsets(a.ncols(), k);
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        if k == 0 {
            return 1.0;
        }
        let m = DMatrix::from_fn(k, k, |p, q| a[(rows[i][p] as usize, cols[j][q] as usize)]);
        m.determinant()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_form(rng: &mut impl Rng, d: usize, r: usize, k: usize) -> PolyForm {
        let mut f = PolyForm::zero(d, k);
        for b in basis_full(d, r, k).unwrap() {
            f = f.add(&b.scale(rng.gen_range(-1.0..1.0)));
        }
        f
    }

    #[test]
    fn wedge_of_coordinate_one_forms() {
        let dx1 = PolyForm::dx(2, 0);
        let dx2 = PolyForm::dx(2, 1);
        let w = dx1.wedge(&dx2).unwrap();
        assert_eq!(w.coefficient(&[0, 0], &[0, 1]), 1.0);
        let w2 = dx2.wedge(&dx1).unwrap();
        assert_eq!(w2.coefficient(&[0, 0], &[0, 1]), -1.0);
    }

    #[test]
    fn wedge_with_polynomial_coefficients() {
        // (x0 dx0) ∧ (x1 dx1) = x0 x1 dx01
        let a = PolyForm::monomial(2, vec![1, 0], vec![0], 1.0);
        let b = PolyForm::monomial(2, vec![0, 1], vec![1], 1.0);
        let w = a.wedge(&b).unwrap();
        assert_eq!(w.coefficient(&[1, 1], &[0, 1]), 1.0);
    }

    #[test]
    fn exterior_derivative_basics() {
        let x0 = PolyForm::coordinate(2, 0);
        let d = x0.exterior_derivative();
        assert_eq!(d.coefficient(&[0, 0], &[0]), 1.0);

        // d(x0 dx1) = dx0 ∧ dx1
        let f = PolyForm::monomial(2, vec![1, 0], vec![1], 1.0);
        let df = f.exterior_derivative();
        assert_eq!(df.coefficient(&[0, 0], &[0, 1]), 1.0);

        // d∘d = 0 on x0·x1
        let g = PolyForm::monomial(2, vec![1, 1], vec![], 1.0);
        let ddg = g.exterior_derivative().exterior_derivative();
        assert!(ddg.is_zero());
    }

    #[test]
    fn koszul_basics() {
        let k1 = PolyForm::dx(2, 0).koszul().unwrap();
        assert_eq!(k1.coefficient(&[1, 0], &[]), 1.0);

        // κ(dx01) = x0 dx1 − x1 dx0
        let dx01 = PolyForm::monomial(2, vec![0, 0], vec![0, 1], 1.0);
        let k = dx01.koszul().unwrap();
        assert_eq!(k.coefficient(&[1, 0], &[1]), 1.0);
        assert_eq!(k.coefficient(&[0, 1], &[0]), -1.0);

        // κ∘κ = 0
        assert!(k.koszul().unwrap().is_zero());
    }

    #[test]
    fn koszul_homotopy_on_homogeneous_forms() {
        // (dκ + κd) = (p + k)·id on homogeneous forms of polynomial degree p
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let d = rng.gen_range(2..=3usize);
            let k = rng.gen_range(1..=d);
            let p = rng.gen_range(0..=3usize);
            let mut f = PolyForm::zero(d, k);
            for alpha in multi_indices_exact(d, p) {
                for sigma in increasing_subsets(d, k) {
                    f = f.add(&PolyForm::monomial(
                        d,
                        alpha.clone(),
                        sigma,
                        rng.gen_range(-1.0..1.0),
                    ));
                }
            }
            let kd = if k < d {
                f.exterior_derivative().koszul().unwrap()
            } else {
                // d vanishes on top-degree forms
                PolyForm::zero(d, k)
            };
            let lhs = f.koszul().unwrap().exterior_derivative().add(&kd);
            let rhs = f.scale((p + k) as f64);
            let diff = lhs.sub(&rhs);
            assert!(diff.coeff_max() <= 1e-12 * (1.0 + rhs.coeff_max()));
        }
    }

    #[test]
    fn leibniz_rule_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let d = rng.gen_range(2..=3usize);
            let ka = rng.gen_range(0..=d - 1);
            let kb = rng.gen_range(0..=d - 1 - 0);
            let a = random_form(&mut rng, d, 2, ka);
            let b = random_form(&mut rng, d, 2, kb);
            let lhs = a.wedge(&b).unwrap().exterior_derivative();
            let sign = if ka % 2 == 0 { 1.0 } else { -1.0 };
            let rhs = a
                .exterior_derivative()
                .wedge(&b)
                .unwrap()
                .add(&a.wedge(&b.exterior_derivative()).unwrap().scale(sign));
            let diff = lhs.sub(&rhs);
            assert!(diff.coeff_max() <= 1e-12 * (1.0 + lhs.coeff_max()));
        }
    }

    #[test]
    fn graded_anticommutativity_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let d = rng.gen_range(2..=3usize);
            let ka = rng.gen_range(0..=d);
            let kb = rng.gen_range(0..=d - ka.min(d));
            let a = random_form(&mut rng, d, 2, ka);
            let b = random_form(&mut rng, d, 2, kb);
            let sign = if (ka * kb) % 2 == 0 { 1.0 } else { -1.0 };
            let diff = a
                .wedge(&b)
                .unwrap()
                .sub(&b.wedge(&a).unwrap().scale(sign));
            assert!(diff.coeff_max() <= 1e-13 * (1.0 + a.coeff_max() * b.coeff_max()));
        }
    }

    #[test]
    fn trace_of_normal_one_form_vanishes() {
        // tr of dx1 from the triangle to the edge x1 = 0 (vertices 0, 1)
        let dx1 = PolyForm::dx(2, 1);
        let tr = dx1.trace_to_face(&[0, 1]).unwrap();
        assert!(tr.is_zero());
        // tr of the 0-form x0 onto that edge is the 1D coordinate
        let x0 = PolyForm::coordinate(2, 0);
        let tr0 = x0.trace_to_face(&[0, 1]).unwrap();
        assert_eq!(tr0.coefficient(&[1], &[]), 1.0);
    }

    #[test]
    fn trace_functoriality_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let d = 3;
            let k = rng.gen_range(0..=1usize);
            let a = random_form(&mut rng, d, 3, k);
            // faces: G ⊆ F ⊆ S with |F| = 3 vertices, |G| = 2
            let f_pos: Vec<usize> = {
                let mut all: Vec<usize> = (0..=d).collect();
                all.shuffle(&mut rng);
                let mut v = all[..3].to_vec();
                v.sort_unstable();
                v
            };
            let g_in_f: Vec<usize> = {
                let mut idx: Vec<usize> = (0..3).collect();
                idx.shuffle(&mut rng);
                let mut v = idx[..2].to_vec();
                v.sort_unstable();
                v
            };
            let g_pos: Vec<usize> = g_in_f.iter().map(|&i| f_pos[i]).collect();
            let via = a
                .trace_to_face(&f_pos)
                .unwrap()
                .trace_to_face(&g_in_f)
                .unwrap();
            let direct = a.trace_to_face(&g_pos).unwrap();
            let diff = via.sub(&direct);
            assert!(diff.coeff_max() <= 1e-13 * (1.0 + direct.coeff_max()));
        }
    }

    #[test]
    fn trace_commutes_with_exterior_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let a = random_form(&mut rng, 3, 3, 1);
            let f_pos = vec![0, 2, 3];
            let lhs = a.exterior_derivative().trace_to_face(&f_pos).unwrap();
            let rhs = a.trace_to_face(&f_pos).unwrap().exterior_derivative();
            let diff = lhs.sub(&rhs);
            assert!(diff.coeff_max() <= 1e-12 * (1.0 + lhs.coeff_max()));
        }
    }

    #[test]
    fn evaluation_examples() {
        let dx0 = PolyForm::dx(2, 0);
        let e0 = vec![1.0, 0.0];
        let e1 = vec![0.0, 1.0];
        assert_eq!(dx0.evaluate(&[0.3, 0.3], &[e0.clone()]).unwrap(), 1.0);

        let dx01 = PolyForm::monomial(2, vec![0, 0], vec![0, 1], 1.0);
        assert_eq!(
            dx01.evaluate(&[0.0, 0.0], &[e0.clone(), e1.clone()]).unwrap(),
            1.0
        );
        assert_eq!(
            dx01.evaluate(&[0.0, 0.0], &[e1.clone(), e0.clone()]).unwrap(),
            -1.0
        );

        // (x0 dx1)(at (0.5, 0.25), e1) = 0.5
        let f = PolyForm::monomial(2, vec![1, 0], vec![1], 1.0);
        assert_relative_eq!(f.evaluate(&[0.5, 0.25], &[e1]).unwrap(), 0.5);
    }

    #[test]
    fn basis_sizes_match_counting_formulas() {
        assert_eq!(basis_full(2, 1, 0).unwrap().len(), 3);
        assert_eq!(basis_full(2, 1, 1).unwrap().len(), 6);
        assert_eq!(basis_full(3, 2, 1).unwrap().len(), 30);
        for d in 1..=3usize {
            for k in 0..=d {
                for r in 0..=4usize {
                    assert_eq!(basis_full(d, r, k).unwrap().len(), dim_full(d, r, k));
                    if r >= 1 {
                        assert_eq!(
                            basis_trimmed(d, r, k).unwrap().len(),
                            dim_trimmed(d, r, k)
                        );
                    }
                }
            }
        }
    }

    /// Numeric rank of the evaluation matrix of a set of forms at random
    /// points and vector tuples; independent check of linear independence.
    fn evaluation_rank(forms: &[PolyForm]) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let d = forms[0].dim();
        let k = forms[0].degree();
        let samples = forms.len() * 2 + 8;
        let mut m = DMatrix::zeros(samples, forms.len());
        for row in 0..samples {
            let p: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            let vs: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            for (col, f) in forms.iter().enumerate() {
                m[(row, col)] = f.evaluate(&p, &vs).unwrap();
            }
        }
        m.svd(false, false)
            .singular_values
            .iter()
            .filter(|&&s| s > 1e-9)
            .count()
    }

    #[test]
    fn basis_full_rank_oracle() {
        let b = basis_full(2, 1, 1).unwrap();
        assert_eq!(evaluation_rank(&b), 6);
        let b = basis_full(3, 2, 1).unwrap();
        assert_eq!(evaluation_rank(&b), 30);
    }

    #[test]
    fn basis_trimmed_rank_oracle() {
        let b = basis_trimmed(2, 1, 1).unwrap();
        assert_eq!(evaluation_rank(&b), 3);
        let b = basis_trimmed(3, 1, 1).unwrap();
        assert_eq!(evaluation_rank(&b), 6);
        let b = basis_trimmed(3, 1, 2).unwrap();
        assert_eq!(evaluation_rank(&b), 4);
    }

    #[test]
    fn trimmed_zero_forms_span_full_space() {
        // trimmed 0-form space coincides with the full space
        for d in 1..=3usize {
            for r in 1..=3usize {
                assert_eq!(dim_trimmed(d, r, 0), dim_full(d, r, 0));
                let trimmed = basis_trimmed(d, r, 0).unwrap();
                // every monomial must be representable: check via least squares
                let cols: Vec<DVector<f64>> =
                    trimmed.iter().map(|f| f.coefficient_vector(r)).collect();
                let a = DMatrix::from_columns(&cols);
                for target in basis_full(d, r, 0).unwrap() {
                    let b = target.coefficient_vector(r);
                    let sol = a.clone().svd(true, true).solve(&b, 1e-12).unwrap();
                    let res = (&a * sol - &b).norm();
                    assert!(res <= 1e-10, "residual {res}");
                }
            }
        }
    }

    #[test]
    fn trimmed_sits_between_consecutive_full_spaces() {
        // P_{r-1} ⊆ span(trimmed r) ⊆ P_r, checked via least squares
        for (d, r, k) in [(2usize, 2usize, 1usize), (3, 2, 1), (3, 2, 2), (2, 3, 1)] {
            let trimmed = basis_trimmed(d, r, k).unwrap();
            let cols: Vec<DVector<f64>> =
                trimmed.iter().map(|f| f.coefficient_vector(r)).collect();
            let a = DMatrix::from_columns(&cols);
            for target in basis_full(d, r - 1, k).unwrap() {
                let b = target.coefficient_vector(r);
                let sol = a.clone().svd(true, true).solve(&b, 1e-12).unwrap();
                assert!((&a * sol - &b).norm() <= 1e-10);
            }
            for f in &trimmed {
                assert!(f.poly_degree() <= r);
            }
        }
    }

    #[test]
    fn pullback_respects_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let a1 = DMatrix::from_fn(3, 2, |_, _| rng.gen_range(-1.0..1.0));
            let b1 = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let a2 = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
            let b2 = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            let f = random_form(&mut rng, 3, 2, 1);
            let step = f.pullback_affine(&a1, &b1).pullback_affine(&a2, &b2);
            let direct = f.pullback_affine(&(&a1 * &a2), &(&a1 * &b2 + &b1));
            let diff = step.sub(&direct);
            assert!(diff.coeff_max() <= 1e-12 * (1.0 + direct.coeff_max()));
        }
    }
}
