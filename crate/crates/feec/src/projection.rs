//! Cellwise local projections and the weighted-averaging global projection.
//!
//! The global operator evaluates every degree of freedom on cellwise
//! polynomial projections of the input field and averages the values over
//! the cells containing the degree of freedom's home simplex:
//!
//! ```text
//!     ω ↦ Σ_{S ∉ boundary, i}  Σ_{T ⊇ S}  c(S,T) · φ*_{S,i}(P_T ω|_T) · φ_{S,i}
//! ```
//!
//! Uniform weights give the Ern-Guermond operator; putting all weight on the
//! representative cell of each simplex gives a Clément-style operator that is
//! nevertheless a projection.
//!
//! Two local backends are provided. The L² backend solves the local mass
//! system and is defined for merely integrable fields. The Taylor backend
//! averages the componentwise Taylor expansion over a ball inside the cell
//! with a polynomial bump weight; it needs derivatives but commutes with the
//! exterior derivative, exactly in exact arithmetic, because differentiating
//! a Taylor polynomial in its evaluation point drops the expansion degree by
//! one. For the trimmed family the Taylor backend projects at degree r+1 and
//! then applies the canonical interpolation onto the trimmed space.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::fespace::{FEFunction, FESpace, FESpaceError, Family};
use crate::fields::FormField;
use crate::mesh::{BoundarySubcomplex, Representatives, SimplicialComplex};
use crate::polyform::{basis_trimmed, binomial, increasing_subsets, multi_indices, PolyForm, PolyFormError};
use crate::quadrature::{
    ball_average_nodes, default_order, field_moments, integrate_form, mass_matrix,
    QuadratureError,
};

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("field provides derivatives up to order {available}, but the backend needs {needed}")]
    MissingDerivatives { needed: usize, available: usize },
    #[error("local mass matrix on cell {cell} is singular")]
    SingularMass { cell: usize },
    #[error("weights for simplex {simplex} sum to {sum}, expected 1")]
    WeightSum { simplex: usize, sum: f64 },
    #[error("negative weight {value} for simplex {simplex} in cell {cell}")]
    NegativeWeight {
        simplex: usize,
        cell: usize,
        value: f64,
    },
    #[error("local interpolation system on cell {cell} is not square ({rows} x {cols})")]
    InterpolationShape {
        cell: usize,
        rows: usize,
        cols: usize,
    },
    #[error(transparent)]
    Space(#[from] FESpaceError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Form(#[from] PolyFormError),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
}

/// Local projection backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    L2,
    Taylor,
}

impl Backend {
    pub fn label(&self) -> &'static str {
        match self {
            Backend::L2 => "l2",
            Backend::Taylor => "taylor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    /// uniform over the cells containing the simplex
    Eg,
    /// all weight on the representative cell
    Clement,
    /// caller-supplied weights
    Custom,
}

impl WeightKind {
    pub fn label(&self) -> &'static str {
        match self {
            WeightKind::Eg => "eg",
            WeightKind::Clement => "clement",
            WeightKind::Custom => "custom",
        }
    }
}

/// Nonnegative weights `c(S,T)` over the cells containing each simplex,
/// summing to one per simplex.
#[derive(Debug, Clone)]
pub struct WeightScheme {
    pub kind: WeightKind,
    weights: HashMap<(usize, usize), f64>,
}

impl WeightScheme {
    pub fn weight(&self, simplex: usize, cell: usize) -> f64 {
        self.weights.get(&(simplex, cell)).copied().unwrap_or(0.0)
    }
}

pub fn make_weights(
    kind: WeightKind,
    complex: &SimplicialComplex,
    boundary: &BoundarySubcomplex,
    custom: Option<HashMap<(usize, usize), f64>>,
) -> Result<WeightScheme, ProjectionError> {
    let n = complex.ambient_dim();
    let mut weights = HashMap::new();
    match kind {
        WeightKind::Eg => {
            for s in 0..complex.num_simplices() {
                let star = complex.cells_containing(s);
                let w = 1.0 / star.len() as f64;
                for &t in star {
                    weights.insert((s, t), w);
                }
            }
        }
        WeightKind::Clement => {
            let reps = complex.choose_representatives(boundary)?;
            return clement_weights(complex, &reps);
        }
        WeightKind::Custom => {
            weights = custom.unwrap_or_default();
        }
    }
    let _ = n;
    validate_weights(&weights, complex)?;
    Ok(WeightScheme { kind, weights })
}

/// Clément weights from precomputed representatives.
pub fn clement_weights(
    complex: &SimplicialComplex,
    reps: &Representatives,
) -> Result<WeightScheme, ProjectionError> {
    let n = complex.ambient_dim();
    let mut weights = HashMap::new();
    for s in 0..complex.num_simplices() {
        if complex.simplex(s).dim == n {
            weights.insert((s, s), 1.0);
        } else {
            let (_, t) = reps.facet_and_cell[s].expect("representative exists");
            weights.insert((s, t), 1.0);
        }
    }
    validate_weights(&weights, complex)?;
    Ok(WeightScheme {
        kind: WeightKind::Clement,
        weights,
    })
}

fn validate_weights(
    weights: &HashMap<(usize, usize), f64>,
    complex: &SimplicialComplex,
) -> Result<(), ProjectionError> {
    for s in 0..complex.num_simplices() {
        let mut sum = 0.0;
        for &t in complex.cells_containing(s) {
            let w = weights.get(&(s, t)).copied().unwrap_or(0.0);
            if w < 0.0 {
                return Err(ProjectionError::NegativeWeight {
                    simplex: s,
                    cell: t,
                    value: w,
                });
            }
            sum += w;
        }
        if (sum - 1.0).abs() > 1e-14 {
            return Err(ProjectionError::WeightSum { simplex: s, sum });
        }
    }
    Ok(())
}

/// Piecewise polynomial data without continuity requirements, one form per
/// cell in the cell's reference coordinates.
#[derive(Debug, Clone)]
pub struct BrokenField {
    pub form_degree: usize,
    pub forms: BTreeMap<usize, PolyForm>,
}

/// L²-orthogonal projection of a field onto the local space of one cell.
pub fn local_project_l2(
    space: &FESpace,
    cell: usize,
    field: &dyn FormField,
) -> Result<PolyForm, ProjectionError> {
    let chart = space.complex().chart(cell);
    let order = default_order(space.degree());
    let basis = space.local_basis();
    let m = mass_matrix(basis, &chart, order)?;
    let b = field_moments(field, cell, basis, &chart, order)?;
    let chol = m
        .cholesky()
        .ok_or(ProjectionError::SingularMass { cell })?;
    let coeffs = chol.solve(&b);
    let mut out = PolyForm::zero(chart.ref_dim(), space.form_degree());
    for (j, bf) in basis.iter().enumerate() {
        out = out.add(&bf.scale(coeffs[j]));
    }
    Ok(out)
}

/// Averaged Taylor polynomial of a field over the scaled inscribed ball of
/// a cell, componentwise, in ambient coordinates. Positive averaging weights
/// proportional to the polynomial bump `(1 − |z|²)⁴` on the ball.
pub fn averaged_taylor(
    complex: &SimplicialComplex,
    cell: usize,
    field: &dyn FormField,
    degree: usize,
    form_degree: usize,
) -> Result<PolyForm, ProjectionError> {
    if field.max_derivative_order() < degree {
        return Err(ProjectionError::MissingDerivatives {
            needed: degree,
            available: field.max_derivative_order(),
        });
    }
    let n = complex.ambient_dim();
    let (center, radius) = inscribed_ball(complex, cell);
    let radius = 0.9 * radius;
    let (nodes, base_weights) = ball_average_nodes(&center, radius);
    let mut weights: Vec<f64> = nodes
        .iter()
        .zip(&base_weights)
        .map(|(z, &w)| {
            let t = ((z - &center).norm() / radius).powi(2);
            w * (1.0 - t).max(0.0).powi(4)
        })
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }

    let sigmas = increasing_subsets(n, form_degree);
    let alphas = multi_indices(n, degree);
    let mut out = PolyForm::zero(n, form_degree);
    for (z, w) in nodes.iter().zip(&weights) {
        for alpha in &alphas {
            let alpha_usize: Vec<usize> = alpha.iter().map(|&a| a as usize).collect();
            let derivs = field.components(cell, z.as_slice(), &alpha_usize);
            let mut alpha_factorial = 1.0;
            for &a in alpha {
                for j in 1..=a as usize {
                    alpha_factorial *= j as f64;
                }
            }
            for (si, sigma) in sigmas.iter().enumerate() {
                let coef = w * derivs[si] / alpha_factorial;
                if coef == 0.0 {
                    continue;
                }
                expand_shifted_monomial(&mut out, alpha, z.as_slice(), sigma, coef);
            }
        }
    }
    Ok(out)
}

/// Accumulate `coef · Π_i (p_i − z_i)^{α_i} dx_sigma` into `out`.
fn expand_shifted_monomial(out: &mut PolyForm, alpha: &[u8], z: &[f64], sigma: &[u8], coef: f64) {
    let n = alpha.len();
    let mut b = vec![0u8; n];
    loop {
        let mut c = coef;
        for i in 0..n {
            c *= binomial(alpha[i] as usize, b[i] as usize) as f64
                * (-z[i]).powi((alpha[i] - b[i]) as i32);
        }
        *out = out.add(&PolyForm::monomial(n, b.clone(), sigma.to_vec(), c));
        // advance the mixed-radix counter over all b <= alpha
        let mut i = 0;
        loop {
            if i == n {
                return;
            }
            if b[i] < alpha[i] {
                b[i] += 1;
                break;
            }
            b[i] = 0;
            i += 1;
        }
    }
}

/// Incenter and inradius of a cell.
pub fn inscribed_ball(complex: &SimplicialComplex, cell: usize) -> (DVector<f64>, f64) {
    let n = complex.ambient_dim();
    let coords = complex.vertex_coords(cell);
    let volume = complex.volume(cell);
    let mut facet_areas = Vec::with_capacity(coords.len());
    for omit in 0..coords.len() {
        let sub: Vec<DVector<f64>> = coords
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != omit)
            .map(|(_, v)| v.clone())
            .collect();
        facet_areas.push(crate::polyform::SimplexChart::from_vertices(0, &sub).volume());
    }
    let total: f64 = facet_areas.iter().sum();
    let mut center = DVector::zeros(n);
    for (v, &a) in coords.iter().zip(&facet_areas) {
        center += v * a;
    }
    center /= total;
    let radius = n as f64 * volume / total;
    (center, radius)
}

/// Canonical interpolation onto the trimmed space of degree `r` on one cell:
/// apply all trimmed-family degrees of freedom of the cell and reconstruct.
/// Defined on polynomial inputs of degree up to r+1; reproduces trimmed
/// members and preserves the exterior derivative of full degree-r forms.
pub fn trimming_interpolation(
    complex: &SimplicialComplex,
    cell: usize,
    r: usize,
    k: usize,
    a: &PolyForm,
) -> Result<PolyForm, ProjectionError> {
    let n = complex.ambient_dim();
    let basis = basis_trimmed(n, r, k)?;
    // trimmed degrees of freedom of every subsimplex of the cell
    let mut dofs: Vec<(usize, PolyForm)> = Vec::new();
    for s in complex.all_subsimplices(cell) {
        let m = complex.simplex(s).dim;
        if k > m || r + k < m + 1 {
            continue;
        }
        for w in crate::polyform::basis_full(m, r + k - m - 1, m - k)? {
            dofs.push((s, w));
        }
    }
    if dofs.len() != basis.len() {
        return Err(ProjectionError::InterpolationShape {
            cell,
            rows: dofs.len(),
            cols: basis.len(),
        });
    }
    let apply = |target: &PolyForm, s: usize, w: &PolyForm| -> Result<f64, ProjectionError> {
        let pos = crate::mesh::face_positions(complex, s, cell);
        let tr = target.trace_to_face(&pos)?;
        let integrand = w.wedge(&tr)?;
        Ok(integrate_form(complex, s, &integrand)?)
    };
    let nb = basis.len();
    let mut d = DMatrix::zeros(nb, nb);
    let mut rhs = DVector::zeros(nb);
    for (ri, (s, w)) in dofs.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            d[(ri, j)] = apply(b, *s, w)?;
        }
        rhs[ri] = apply(a, *s, w)?;
    }
    let coeffs = d
        .lu()
        .solve(&rhs)
        .ok_or(ProjectionError::SingularMass { cell })?;
    let mut out = PolyForm::zero(n, k);
    for (j, b) in basis.iter().enumerate() {
        out = out.add(&b.scale(coeffs[j]));
    }
    Ok(out)
}

/// Local projection of the Taylor backend, in the reference coordinates of
/// the cell. For the full family this is the degree-r averaged Taylor
/// polynomial; for the trimmed family the degree-(r+1) averaged Taylor
/// polynomial followed by the canonical interpolation onto the trimmed
/// space.
pub fn local_project_taylor(
    space: &FESpace,
    cell: usize,
    field: &dyn FormField,
) -> Result<PolyForm, ProjectionError> {
    let complex = space.complex();
    let chart = complex.chart(cell);
    let k = space.form_degree();
    let r = space.degree();
    match space.family() {
        Family::Full => {
            let ambient = averaged_taylor(complex, cell, field, r, k)?;
            Ok(chart.pull_to_reference(&ambient))
        }
        Family::Trimmed => {
            let ambient = averaged_taylor(complex, cell, field, r + 1, k)?;
            let reference = chart.pull_to_reference(&ambient);
            trimming_interpolation(complex, cell, r, k, &reference)
        }
    }
}

/// The operator paired with the Taylor backend on derivative data, chosen so
/// that `d ∘ P_T = Q_T ∘ d`: one Taylor degree less for the full family, and
/// for the trimmed family the canonical trimmed interpolation composed with
/// the degree-r Taylor average of the derivative.
pub fn taylor_derivative_companion(
    space: &FESpace,
    cell: usize,
    dfield: &dyn FormField,
) -> Result<PolyForm, ProjectionError> {
    let complex = space.complex();
    let chart = complex.chart(cell);
    let n = complex.ambient_dim();
    let k = space.form_degree();
    let r = space.degree();
    if k + 1 > n {
        return Ok(PolyForm::zero(n, k + 1));
    }
    match space.family() {
        Family::Full => {
            let ambient = averaged_taylor(complex, cell, dfield, r - 1, k + 1)?;
            Ok(chart.pull_to_reference(&ambient))
        }
        Family::Trimmed => {
            let ambient = averaged_taylor(complex, cell, dfield, r, k + 1)?;
            let reference = chart.pull_to_reference(&ambient);
            trimming_interpolation(complex, cell, r, k + 1, &reference)
        }
    }
}

pub fn local_project(
    space: &FESpace,
    cell: usize,
    field: &dyn FormField,
    backend: Backend,
) -> Result<PolyForm, ProjectionError> {
    match backend {
        Backend::L2 => local_project_l2(space, cell, field),
        Backend::Taylor => local_project_taylor(space, cell, field),
    }
}

/// All cellwise projections of a field.
pub fn broken_projection(
    space: &FESpace,
    field: &dyn FormField,
    backend: Backend,
) -> Result<BrokenField, ProjectionError> {
    let mut forms = BTreeMap::new();
    for &cell in space.complex().cell_ids() {
        forms.insert(cell, local_project(space, cell, field, backend)?);
    }
    Ok(BrokenField {
        form_degree: space.form_degree(),
        forms,
    })
}

/// The averaging-based projection onto the conforming space: every active
/// degree of freedom gets the weighted average of its evaluations on the
/// neighboring local projections; masked degrees of freedom stay zero.
pub fn project(
    space: &FESpace,
    field: &dyn FormField,
    weights: &WeightScheme,
    backend: Backend,
) -> Result<FEFunction, ProjectionError> {
    let broken = broken_projection(space, field, backend)?;
    average_broken(space, &broken, weights)
}

/// The averaging step alone, applied to an existing broken field.
pub fn average_broken(
    space: &FESpace,
    broken: &BrokenField,
    weights: &WeightScheme,
) -> Result<FEFunction, ProjectionError> {
    let mut u = FEFunction::zero(space);
    for (&cell, form) in &broken.forms {
        for (g, val) in space.dof_values_on_cell(cell, form)? {
            if let Some(a) = space.active_of(g) {
                let (s, _) = space.dof_home(g);
                let w = weights.weight(s, cell);
                if w != 0.0 {
                    u.coeffs[a] += w * val;
                }
            }
        }
    }
    Ok(u)
}

/// View a finite element function as a field; per-cell ambient polynomials
/// are precomputed, so evaluation respects the cellwise smoothness.
/// Derivative forms are memoized per (cell, multi-index) since the Taylor
/// backend requests the same derivatives at many nodes.
pub struct FEFieldView {
    ambient_dim: usize,
    form_degree: usize,
    forms: BTreeMap<usize, PolyForm>,
    derived: std::cell::RefCell<HashMap<(usize, Vec<usize>), PolyForm>>,
}

impl FEFieldView {
    pub fn new(space: &FESpace, u: &FEFunction) -> Self {
        let forms = space
            .complex()
            .cell_ids()
            .iter()
            .map(|&t| (t, space.reconstruct_ambient(u, t)))
            .collect();
        FEFieldView {
            ambient_dim: space.complex().ambient_dim(),
            form_degree: space.form_degree(),
            forms,
            derived: std::cell::RefCell::new(HashMap::new()),
        }
    }

    pub fn ambient_form(&self, cell: usize) -> &PolyForm {
        &self.forms[&cell]
    }
}

impl FormField for FEFieldView {
    fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }
    fn form_degree(&self) -> usize {
        self.form_degree
    }
    fn max_derivative_order(&self) -> usize {
        usize::MAX
    }
    fn components(&self, cell: usize, p: &[f64], alpha: &[usize]) -> Vec<f64> {
        if alpha.iter().all(|&a| a == 0) {
            return self.forms[&cell].component_values(p);
        }
        let key = (cell, alpha.to_vec());
        if let Some(form) = self.derived.borrow().get(&key) {
            return form.component_values(p);
        }
        let mut form = self.forms[&cell].clone();
        for (i, &a) in alpha.iter().enumerate() {
            for _ in 0..a {
                form = form.coeff_derivative(i);
            }
        }
        let vals = form.component_values(p);
        self.derived.borrow_mut().insert(key, form);
        vals
    }
}
