//! Integration on simplices and error norms.
//!
//! Scalar rules are Grundmann-Möller simplex rules of odd degree, verified
//! against the closed-form monomial integrals
//! `∫_Δ x^α dx = Πα_i! / (|α|+d)!` at construction. Nodes are stored in
//! barycentric coordinates with weights normalized to sum to one, so an
//! integral over the reference simplex is `vol(Δ_d) · Σ w_i f(x_i)`.
//!
//! Integrals of polynomial forms over their own simplex dimension are done
//! analytically from the coefficients, so degree-of-freedom evaluations
//! carry no quadrature error at all.
//!
//! All pointwise norms of k-forms use the Euclidean metric on the ambient
//! coefficient tuple.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::fields::FormField;
use crate::mesh::SimplicialComplex;
use crate::polyform::{
    compound_matrix, factorial, multi_indices, PolyForm, SimplexChart,
};

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error("unsupported rule dimension {0} (supported: 1, 2, 3)")]
    UnsupportedDim(usize),
    #[error("unsupported exactness order {0} (max 14)")]
    UnsupportedOrder(usize),
    #[error("rule verification failed for monomial {0:?}: got {1}, want {2}")]
    Verification(Vec<u8>, f64, f64),
    #[error("form degree {form} does not match simplex dimension {simplex}")]
    DegreeMismatch { form: usize, simplex: usize },
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub dim: usize,
    pub exactness_order: usize,
    /// barycentric coordinates, length dim+1 each
    pub nodes: Vec<Vec<f64>>,
    /// normalized weights, sum = 1
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Reference cartesian coordinates of the nodes (drop λ_0).
    pub fn cartesian_node(&self, i: usize) -> &[f64] {
        &self.nodes[i][1..]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫_Δ f dx ≈ vol(Δ) Σ w_i f(x_i)` over the reference simplex.
    pub fn integrate_reference<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        let vol = 1.0 / factorial(self.dim) as f64;
        let mut acc = 0.0;
        for (node, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(&node[1..]);
        }
        vol * acc
    }
}

/// Exact `∫_Δ x^α dx` over the reference d-simplex.
pub fn reference_monomial_integral(alpha: &[u8]) -> f64 {
    let d = alpha.len();
    let total: usize = alpha.iter().map(|&a| a as usize).sum();
    let mut num = 1.0;
    for &a in alpha {
        num *= factorial(a as usize) as f64;
    }
    let mut den = 1.0;
    for j in 1..=(total + d) {
        den *= j as f64;
    }
    num / den
}

fn build_grundmann_moeller(dim: usize, order: usize) -> Result<QuadratureRule, QuadratureError> {
    if !(1..=3).contains(&dim) {
        return Err(QuadratureError::UnsupportedDim(dim));
    }
    if order > 14 {
        return Err(QuadratureError::UnsupportedOrder(order));
    }
    let s = order / 2; // degree 2s+1 >= order
    let degree = 2 * s + 1;
    let n = dim;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for i in 0..=s {
        let base = (degree + n - 2 * i) as f64;
        let w = (-1.0f64).powi(i as i32) * 0.5f64.powi(2 * s as i32) * base.powi(degree as i32)
            / (factorial(i) as f64 * factorial(degree + n - i) as f64);
        for beta in partitions(n + 1, s - i) {
            let node: Vec<f64> = beta.iter().map(|&b| (2 * b + 1) as f64 / base).collect();
            nodes.push(node);
            weights.push(w);
        }
    }
    // the raw weights sum to vol(Δ_n) = 1/n!; normalize so the sum is 1
    // exactly, absorbing the cancellation drift of the alternating series
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    let rule = QuadratureRule {
        dim,
        exactness_order: degree,
        nodes,
        weights,
    };
    verify_rule(&rule)?;
    Ok(rule)
}

/// Multi-indices with `parts` entries summing to `total`.
fn partitions(parts: usize, total: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(parts);
    fn rec(parts: usize, total: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == parts - 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in 0..=total {
            prefix.push(e);
            rec(parts, total - e, prefix, out);
            prefix.pop();
        }
    }
    rec(parts, total, &mut prefix, &mut out);
    out
}

fn verify_rule(rule: &QuadratureRule) -> Result<(), QuadratureError> {
    for alpha in multi_indices(rule.dim, rule.exactness_order) {
        let got = rule.integrate_reference(|x| {
            let mut acc = 1.0;
            for (i, &a) in alpha.iter().enumerate() {
                for _ in 0..a {
                    acc *= x[i];
                }
            }
            acc
        });
        let want = reference_monomial_integral(&alpha);
        if (got - want).abs() > 1e-13 * want.abs().max(1.0) {
            return Err(QuadratureError::Verification(alpha, got, want));
        }
    }
    let wsum: f64 = rule.weights.iter().sum();
    if (wsum - 1.0).abs() > 1e-13 {
        return Err(QuadratureError::Verification(vec![], wsum, 1.0));
    }
    Ok(())
}

/// Cached rule lookup.
pub fn simplex_rule(dim: usize, order: usize) -> Result<Arc<QuadratureRule>, QuadratureError> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    if let Some(rule) = guard.get(&(dim, order)) {
        return Ok(rule.clone());
    }
    let rule = Arc::new(build_grundmann_moeller(dim, order)?);
    guard.insert((dim, order), rule.clone());
    Ok(rule)
}

/// Default exactness order for computations in a degree-r space.
pub fn default_order(r: usize) -> usize {
    2 * r + 4
}

/// Exact integral of a polynomial top-degree form over the reference
/// simplex with its canonical orientation: the coefficient of
/// `dx_0 ∧ … ∧ dx_{d−1}` integrated monomial by monomial.
pub fn integrate_reference_top(form: &PolyForm) -> f64 {
    let d = form.dim();
    assert_eq!(form.degree(), d);
    if d == 0 {
        return form.component_values(&[])[0];
    }
    let full: Vec<u8> = (0..d as u8).collect();
    let mut acc = 0.0;
    for alpha in multi_indices(d, form.poly_degree()) {
        let c = form.coefficient(&alpha, &full);
        if c != 0.0 {
            acc += c * reference_monomial_integral(&alpha);
        }
    }
    acc
}

/// `∫_S ω` for a polynomial form given in the reference coordinates of the
/// simplex `S` with `deg ω = dim S`. Cells are integrated with their
/// positive (Lebesgue) orientation; lower-dimensional simplices with the
/// canonical orientation induced by increasing vertex ids.
pub fn integrate_form(
    complex: &SimplicialComplex,
    simplex: usize,
    form: &PolyForm,
) -> Result<f64, QuadratureError> {
    let d = complex.simplex(simplex).dim;
    if form.degree() != d {
        return Err(QuadratureError::DegreeMismatch {
            form: form.degree(),
            simplex: d,
        });
    }
    let mut value = integrate_reference_top(form);
    if d == complex.ambient_dim() {
        value *= complex.cell_sign(simplex);
    }
    Ok(value)
}

/// `∫_S ω` for an ambient field over a k-simplex with k = deg ω: pull the
/// components back through the chart and integrate the single reference
/// component by quadrature.
pub fn integrate_field(
    complex: &SimplicialComplex,
    simplex: usize,
    field: &dyn FormField,
    order: usize,
) -> Result<f64, QuadratureError> {
    let d = complex.simplex(simplex).dim;
    if field.form_degree() != d {
        return Err(QuadratureError::DegreeMismatch {
            form: field.form_degree(),
            simplex: d,
        });
    }
    let chart = complex.chart(simplex);
    if d == 0 {
        return Ok(field.value(simplex, chart.offset.as_slice())[0]);
    }
    let rule = simplex_rule(d, order)?;
    // single reference component: Σ_σ amb_σ(p) · det A[σ, 0..d]
    let comp = compound_matrix(&chart.matrix, d); // C(n,d) × 1
    let alpha0 = vec![0usize; complex.ambient_dim()];
    let mut value = rule.integrate_reference(|x| {
        let p = chart.map_point(x);
        let amb = field.components(simplex, p.as_slice(), &alpha0);
        amb.iter()
            .zip(comp.column(0).iter())
            .map(|(a, c)| a * c)
            .sum()
    });
    if d == complex.ambient_dim() {
        value *= complex.cell_sign(simplex);
    }
    Ok(value)
}

/// Pointwise transfer from reference components to ambient components of a
/// form on a cell: `amb = C · ref` with `C = compound_k(A^{-1})ᵀ`.
pub fn ambient_component_matrix(chart: &SimplexChart, k: usize) -> DMatrix<f64> {
    let inv = chart
        .matrix
        .clone()
        .try_inverse()
        .expect("cell charts are invertible");
    compound_matrix(&inv, k).transpose()
}

/// `∫_T ⟨a, b⟩ dx` of two reference forms on a full-dimensional cell, with
/// the Euclidean coefficient metric in ambient coordinates.
pub fn inner_product_l2(
    a: &PolyForm,
    b: &PolyForm,
    chart: &SimplexChart,
    order: usize,
) -> Result<f64, QuadratureError> {
    assert_eq!(a.degree(), b.degree());
    let d = chart.ref_dim();
    let c = ambient_component_matrix(chart, a.degree());
    let g = c.transpose() * &c;
    let rule = simplex_rule(d, order)?;
    let jac = chart.det().abs();
    Ok(jac
        * rule.integrate_reference(|x| {
            let av = DVector::from_vec(a.component_values(x));
            let bv = DVector::from_vec(b.component_values(x));
            (av.transpose() * &g * bv)[(0, 0)]
        }))
}

/// Mass matrix of a list of reference forms on one cell.
pub fn mass_matrix(
    basis: &[PolyForm],
    chart: &SimplexChart,
    order: usize,
) -> Result<DMatrix<f64>, QuadratureError> {
    let d = chart.ref_dim();
    let k = basis.first().map(|f| f.degree()).unwrap_or(0);
    let c = ambient_component_matrix(chart, k);
    let g = c.transpose() * &c;
    let rule = simplex_rule(d, order)?;
    let jac = chart.det().abs();
    let m = basis.len();
    let mut out = DMatrix::zeros(m, m);
    // tabulate components once per node
    for (node, w) in rule.nodes.iter().zip(&rule.weights) {
        let x = &node[1..];
        let vals: Vec<DVector<f64>> = basis
            .iter()
            .map(|f| DVector::from_vec(f.component_values(x)))
            .collect();
        let gvals: Vec<DVector<f64>> = vals.iter().map(|v| &g * v).collect();
        for i in 0..m {
            for j in i..m {
                let t = vals[i].dot(&gvals[j]) * w;
                out[(i, j)] += t;
            }
        }
    }
    let scale = jac / factorial(d) as f64;
    for i in 0..m {
        for j in i..m {
            out[(i, j)] *= scale;
            out[(j, i)] = out[(i, j)];
        }
    }
    Ok(out)
}

/// Right-hand side `∫_T ⟨field, b_i⟩ dx` against a list of reference forms.
pub fn field_moments(
    field: &dyn FormField,
    cell: usize,
    basis: &[PolyForm],
    chart: &SimplexChart,
    order: usize,
) -> Result<DVector<f64>, QuadratureError> {
    let d = chart.ref_dim();
    let k = basis.first().map(|f| f.degree()).unwrap_or(0);
    let c = ambient_component_matrix(chart, k);
    let rule = simplex_rule(d, order)?;
    let jac = chart.det().abs();
    let alpha0 = vec![0usize; chart.ambient_dim()];
    let mut out = DVector::zeros(basis.len());
    for (node, w) in rule.nodes.iter().zip(&rule.weights) {
        let x = &node[1..];
        let p = chart.map_point(x);
        let fv = DVector::from_vec(field.components(cell, p.as_slice(), &alpha0));
        let cf = c.transpose() * fv; // ⟨field, C·ref⟩ = (Cᵀ field)·ref
        for (i, b) in basis.iter().enumerate() {
            let bv = DVector::from_vec(b.component_values(x));
            out[i] += w * cf.dot(&bv);
        }
    }
    Ok(out * (jac / factorial(d) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LpExp {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "inf")]
    Inf,
}

impl LpExp {
    pub fn label(&self) -> &'static str {
        match self {
            LpExp::One => "1",
            LpExp::Two => "2",
            LpExp::Inf => "inf",
        }
    }
}

/// Order of the fixed dense node set used for maximum norms.
const INF_NODE_ORDER: usize = 10;

/// Cellwise difference `field − fe` where `fe` yields the ambient-coordinate
/// polynomial of the finite element part per cell. Either side may be a zero
/// provider.
pub struct ErrorIntegrand<'a> {
    pub complex: &'a SimplicialComplex,
    pub field: &'a dyn FormField,
    /// ambient-coordinate polynomial per cell
    pub fe_ambient: &'a dyn Fn(usize) -> PolyForm,
    pub order: usize,
}

impl ErrorIntegrand<'_> {
    fn diff_components(
        &self,
        cell: usize,
        fe: &PolyForm,
        p: &[f64],
        alpha: &[usize],
    ) -> Vec<f64> {
        let f = self.field.components(cell, p, alpha);
        let mut form = fe.clone();
        for (i, &a) in alpha.iter().enumerate() {
            for _ in 0..a {
                form = form.coeff_derivative(i);
            }
        }
        let g = form.component_values(p);
        f.iter().zip(&g).map(|(a, b)| a - b).collect()
    }

    /// L^p norm over the given cells (p-appropriate accumulation).
    pub fn lp_norm(&self, cells: &[usize], p: LpExp) -> Result<f64, QuadratureError> {
        let per_cell = self.cellwise_lp(cells, p)?;
        Ok(accumulate(&per_cell, p))
    }

    pub fn cellwise_lp(&self, cells: &[usize], p: LpExp) -> Result<Vec<f64>, QuadratureError> {
        let alpha0 = vec![0usize; self.complex.ambient_dim()];
        cells
            .iter()
            .map(|&cell| self.cell_alpha_norm(cell, &alpha0, p))
            .collect()
    }

    /// Integer-order seminorm: sum over |alpha| = m of the L^p norms of the
    /// componentwise alpha-derivatives.
    pub fn sobolev_seminorm(
        &self,
        cells: &[usize],
        m: usize,
        p: LpExp,
    ) -> Result<f64, QuadratureError> {
        if m == 0 {
            return self.lp_norm(cells, p);
        }
        let n = self.complex.ambient_dim();
        let mut total = 0.0;
        for alpha in crate::polyform::multi_indices_exact(n, m) {
            let alpha: Vec<usize> = alpha.iter().map(|&a| a as usize).collect();
            let per_cell: Vec<f64> = cells
                .iter()
                .map(|&cell| self.cell_alpha_norm(cell, &alpha, p))
                .collect::<Result<_, _>>()?;
            total += accumulate(&per_cell, p);
        }
        Ok(total)
    }

    /// Per-cell seminorm values (sum over |alpha| = m per cell).
    pub fn cellwise_sobolev(
        &self,
        cells: &[usize],
        m: usize,
        p: LpExp,
    ) -> Result<Vec<f64>, QuadratureError> {
        if m == 0 {
            return self.cellwise_lp(cells, p);
        }
        let n = self.complex.ambient_dim();
        let mut out = vec![0.0; cells.len()];
        for alpha in crate::polyform::multi_indices_exact(n, m) {
            let alpha: Vec<usize> = alpha.iter().map(|&a| a as usize).collect();
            for (slot, &cell) in cells.iter().enumerate() {
                out[slot] += self.cell_alpha_norm(cell, &alpha, p)?;
            }
        }
        Ok(out)
    }

    fn cell_alpha_norm(
        &self,
        cell: usize,
        alpha: &[usize],
        p: LpExp,
    ) -> Result<f64, QuadratureError> {
        let chart = self.complex.chart(cell);
        let d = chart.ref_dim();
        let fe = (self.fe_ambient)(cell);
        let jac = chart.det().abs();
        match p {
            LpExp::Inf => {
                let rule = simplex_rule(d, INF_NODE_ORDER)?;
                let mut best: f64 = 0.0;
                for node in &rule.nodes {
                    let pt = chart.map_point(&node[1..]);
                    let diff = self.diff_components(cell, &fe, pt.as_slice(), alpha);
                    let mag = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
                    best = best.max(mag);
                }
                Ok(best)
            }
            LpExp::One => {
                let rule = simplex_rule(d, self.order)?;
                Ok(jac
                    * rule.integrate_reference(|x| {
                        let pt = chart.map_point(x);
                        let diff = self.diff_components(cell, &fe, pt.as_slice(), alpha);
                        diff.iter().map(|v| v * v).sum::<f64>().sqrt()
                    }))
            }
            LpExp::Two => {
                let rule = simplex_rule(d, self.order)?;
                let sq = jac
                    * rule.integrate_reference(|x| {
                        let pt = chart.map_point(x);
                        let diff = self.diff_components(cell, &fe, pt.as_slice(), alpha);
                        diff.iter().map(|v| v * v).sum::<f64>()
                    });
                Ok(sq.max(0.0).sqrt())
            }
        }
    }
}

/// Combine per-cell norm values into the norm over the union.
pub fn accumulate(per_cell: &[f64], p: LpExp) -> f64 {
    match p {
        LpExp::One => per_cell.iter().sum(),
        LpExp::Two => per_cell.iter().map(|v| v * v).sum::<f64>().sqrt(),
        LpExp::Inf => per_cell.iter().fold(0.0, |a, &b| a.max(b)),
    }
}

/// Positive-weight averaging nodes on the ball of radius `radius` around
/// `center`: midpoint shells in the radius, uniform angles. Weights sum to
/// one. Used as the fixed averaging measure for Taylor smoothing.
pub fn ball_average_nodes(center: &DVector<f64>, radius: f64) -> (Vec<DVector<f64>>, Vec<f64>) {
    let dim = center.len();
    let n_r = 6;
    let n_theta = 12;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    match dim {
        2 => {
            for i in 0..n_r {
                let r = (i as f64 + 0.5) / n_r as f64;
                for j in 0..n_theta {
                    let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n_theta as f64;
                    let p = DVector::from_vec(vec![
                        center[0] + radius * r * th.cos(),
                        center[1] + radius * r * th.sin(),
                    ]);
                    nodes.push(p);
                    weights.push(r);
                }
            }
        }
        3 => {
            let n_u = 6;
            for i in 0..n_r {
                let r = (i as f64 + 0.5) / n_r as f64;
                for l in 0..n_u {
                    let u: f64 = -1.0 + 2.0 * (l as f64 + 0.5) / n_u as f64;
                    let s = (1.0 - u * u).sqrt();
                    for j in 0..n_theta {
                        let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n_theta as f64;
                        let p = DVector::from_vec(vec![
                            center[0] + radius * r * s * th.cos(),
                            center[1] + radius * r * s * th.sin(),
                            center[2] + radius * r * u,
                        ]);
                        nodes.push(p);
                        weights.push(r * r);
                    }
                }
            }
        }
        other => panic!("ball nodes only in 2D/3D, got {other}"),
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    (nodes, weights)
}
