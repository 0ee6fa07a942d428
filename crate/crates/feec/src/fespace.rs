//! Global conforming finite element spaces of polynomial differential forms.
//!
//! Both families are supported: the full spaces of degree r (family A) and
//! the trimmed spaces of degree r (family B). Degrees of freedom attached to
//! a simplex `S` of dimension `m` are the functionals
//!
//! ```text
//!     ω ↦ ∫_S η ∧ tr_S ω
//! ```
//!
//! with weight forms `η` running over a fixed basis of the dual weight
//! space: trimmed of degree `r+k−m` for family A, full of degree `r+k−m−1`
//! for family B. The number of such functionals per simplex equals the
//! dimension of the trace-free subspace the simplex contributes, so the
//! functionals of all subsimplices of a cell are unisolvent on the local
//! space. Global shape functions are realized cell by cell through the
//! inverse of the local evaluation matrix; single-valuedness across shared
//! simplices then holds because matching degrees of freedom pin down the
//! traces, and the test suite checks exactly that.
//!
//! A boundary subcomplex masks its degrees of freedom: coefficient vectors
//! run over the active (unmasked) ones only.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::mesh::{face_positions, BoundarySubcomplex, SimplicialComplex};
use crate::polyform::{basis_full, basis_trimmed, dim_full, dim_trimmed, PolyForm, PolyFormError};
use crate::quadrature::{integrate_form, QuadratureError};

#[derive(Debug, Error)]
pub enum FESpaceError {
    #[error("polynomial degree must be at least 1")]
    DegreeTooSmall,
    #[error("form degree {k} out of range for ambient dimension {n}")]
    FormDegreeOutOfRange { k: usize, n: usize },
    #[error("local evaluation matrix on cell {cell} is singular or ill-conditioned (cond {cond:.3e})")]
    SingularLocalMatrix { cell: usize, cond: f64 },
    #[error("degree-of-freedom bookkeeping mismatch on cell {cell}: {rows} functionals vs local dimension {dim}")]
    CountMismatch { cell: usize, rows: usize, dim: usize },
    #[error("simplex {simplex} does not carry a degree of freedom with index {index}")]
    NoSuchDof { simplex: usize, index: usize },
    #[error("degree of freedom lives on simplex {simplex} outside cell {cell}")]
    DofOutsideCell { simplex: usize, cell: usize },
    #[error("(simplex {simplex}, index {index}) is masked by the boundary subcomplex")]
    MaskedDof { simplex: usize, index: usize },
    #[error("point {0:?} lies outside the cell")]
    PointOutsideCell(Vec<f64>),
    #[error(transparent)]
    Form(#[from] PolyFormError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// The two families of finite element spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// full polynomial forms of degree <= r
    Full,
    /// trimmed forms of degree r
    Trimmed,
}

impl Family {
    pub fn label(&self) -> &'static str {
        match self {
            Family::Full => "P",
            Family::Trimmed => "Pminus",
        }
    }
}

impl serde::Serialize for Family {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> serde::Deserialize<'de> for Family {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        match text.as_str() {
            "P" => Ok(Family::Full),
            "Pminus" => Ok(Family::Trimmed),
            other => Err(serde::de::Error::custom(format!(
                "unknown family {other:?} (expected \"P\" or \"Pminus\")"
            ))),
        }
    }
}

/// One degree of freedom: `ω ↦ ∫_S weight ∧ tr_S ω`.
#[derive(Debug, Clone)]
pub struct DofFunctional {
    pub simplex: usize,
    pub index: usize,
    /// weight form in the reference coordinates of the home simplex
    pub weight: PolyForm,
}

/// Coefficients over the active degrees of freedom of a space.
#[derive(Debug, Clone)]
pub struct FEFunction {
    pub coeffs: DVector<f64>,
}

impl FEFunction {
    pub fn zero(space: &FESpace) -> Self {
        FEFunction {
            coeffs: DVector::zeros(space.num_active_dofs()),
        }
    }
}

#[derive(Debug)]
pub struct FESpace {
    complex: Arc<SimplicialComplex>,
    family: Family,
    degree: usize,
    form_degree: usize,
    boundary: BoundarySubcomplex,
    /// weight basis per simplex dimension (empty when the dimension carries
    /// no degrees of freedom)
    weight_bases: Vec<Vec<PolyForm>>,
    /// reference basis of the local space on a cell
    local_basis: Vec<PolyForm>,
    /// global dof table: (simplex, local index)
    dofs: Vec<(usize, usize)>,
    dof_offset: Vec<usize>,
    dof_count: Vec<usize>,
    active_index: Vec<Option<usize>>,
    num_active: usize,
    /// per cell (in cell-id order): global dof ids in local row order
    cell_dofs: Vec<Vec<usize>>,
    /// per cell: columns are dual-basis coefficients over `local_basis`
    dual_coeffs: Vec<DMatrix<f64>>,
    /// per cell: condition number of the local evaluation matrix
    cond: Vec<f64>,
}

/// Family normalization: 0-forms live in the full family, top-degree forms
/// in the trimmed family; the underlying spaces coincide, so a request for
/// the other family converts degree-faithfully.
pub fn normalize_family(family: Family, r: usize, k: usize, n: usize) -> (Family, usize) {
    match (family, k) {
        (Family::Trimmed, 0) => {
            log::debug!("trimmed 0-forms coincide with the full family; normalizing");
            (Family::Full, r)
        }
        (Family::Full, k) if k == n => {
            log::debug!("full top-degree forms coincide with the trimmed family; normalizing");
            (Family::Trimmed, r + 1)
        }
        _ => (family, r),
    }
}

/// Number of degrees of freedom a simplex of dimension `m` carries.
pub fn dof_count(family: Family, m: usize, k: usize, r: usize) -> usize {
    if k > m || r + k < m + 1 {
        return 0;
    }
    let s = r + k - m;
    match family {
        Family::Full => dim_trimmed(m, s, m - k),
        Family::Trimmed => dim_full(m, s - 1, m - k),
    }
}

fn weight_basis(family: Family, m: usize, k: usize, r: usize) -> Vec<PolyForm> {
    if k > m || r + k < m + 1 {
        return Vec::new();
    }
    let s = r + k - m;
    let raw = match family {
        Family::Full => basis_trimmed(m, s, m - k).expect("valid weight parameters"),
        Family::Trimmed => basis_full(m, s - 1, m - k).expect("valid weight parameters"),
    };
    orthonormalize_on_reference(raw)
}

/// Replace a basis by an L²-orthonormal one on the reference simplex (a
/// deterministic triangular change of basis within the same span). Keeps the
/// local evaluation matrices well-conditioned at higher degrees, where raw
/// monomial bases are nearly dependent.
fn orthonormalize_on_reference(basis: Vec<PolyForm>) -> Vec<PolyForm> {
    let Some(first) = basis.first() else {
        return basis;
    };
    let d = first.dim();
    if d == 0 {
        return basis;
    }
    let max_degree = basis.iter().map(|f| f.poly_degree()).max().unwrap_or(0);
    let chart = crate::polyform::SimplexChart {
        simplex: 0,
        matrix: DMatrix::identity(d, d),
        offset: DVector::zeros(d),
    };
    let order = (2 * max_degree + 2).min(14);
    let gram = crate::quadrature::mass_matrix(&basis, &chart, order)
        .expect("reference Gram matrix");
    let Some(chol) = gram.cholesky() else {
        return basis;
    };
    let l = chol.l();
    let Some(linv_t) = l.transpose().try_inverse() else {
        return basis;
    };
    (0..basis.len())
        .map(|j| {
            let mut f = PolyForm::zero(d, first.degree());
            for (i, b) in basis.iter().enumerate() {
                let c = linv_t[(i, j)];
                if c != 0.0 {
                    f = f.add(&b.scale(c));
                }
            }
            f
        })
        .collect()
}

const COND_LIMIT: f64 = 1e12;

impl FESpace {
    pub fn build(
        complex: Arc<SimplicialComplex>,
        family: Family,
        r: usize,
        k: usize,
        boundary: BoundarySubcomplex,
    ) -> Result<FESpace, FESpaceError> {
        let n = complex.ambient_dim();
        if r == 0 {
            return Err(FESpaceError::DegreeTooSmall);
        }
        if k > n {
            return Err(FESpaceError::FormDegreeOutOfRange { k, n });
        }
        let (family, r) = normalize_family(family, r, k, n);

        let weight_bases: Vec<Vec<PolyForm>> = (0..=n)
            .map(|m| weight_basis(family, m, k, r))
            .collect();
        let local_basis = orthonormalize_on_reference(match family {
            Family::Full => basis_full(n, r, k)?,
            Family::Trimmed => basis_trimmed(n, r, k)?,
        });

        // global dof enumeration, simplex-id order
        let mut dofs = Vec::new();
        let mut dof_offset = vec![0usize; complex.num_simplices()];
        let mut dof_count_per = vec![0usize; complex.num_simplices()];
        for s in 0..complex.num_simplices() {
            let m = complex.simplex(s).dim;
            let count = weight_bases[m].len();
            dof_offset[s] = dofs.len();
            dof_count_per[s] = count;
            for i in 0..count {
                dofs.push((s, i));
            }
        }
        let mut active_index = vec![None; dofs.len()];
        let mut num_active = 0;
        for (g, &(s, _)) in dofs.iter().enumerate() {
            if !boundary.contains(s) {
                active_index[g] = Some(num_active);
                num_active += 1;
            }
        }

        let mut space = FESpace {
            complex,
            family,
            degree: r,
            form_degree: k,
            boundary,
            weight_bases,
            local_basis,
            dofs,
            dof_offset,
            dof_count: dof_count_per,
            active_index,
            num_active,
            cell_dofs: Vec::new(),
            dual_coeffs: Vec::new(),
            cond: Vec::new(),
        };
        space.assemble_duals()?;
        Ok(space)
    }

    fn assemble_duals(&mut self) -> Result<(), FESpaceError> {
        let cells: Vec<usize> = self.complex.cell_ids().to_vec();
        for &cell in &cells {
            let mut rows = Vec::new();
            for s in self.complex.all_subsimplices(cell) {
                for i in 0..self.dof_count[s] {
                    rows.push(self.dof_offset[s] + i);
                }
            }
            let nb = self.local_basis.len();
            if rows.len() != nb {
                return Err(FESpaceError::CountMismatch {
                    cell,
                    rows: rows.len(),
                    dim: nb,
                });
            }
            let mut d = DMatrix::zeros(nb, nb);
            for (ri, &g) in rows.iter().enumerate() {
                let (s, i) = self.dofs[g];
                let dof = DofFunctional {
                    simplex: s,
                    index: i,
                    weight: self.weight_bases[self.complex.simplex(s).dim][i].clone(),
                };
                for (j, b) in self.local_basis.iter().enumerate() {
                    d[(ri, j)] = self.apply_dof_raw(&dof, cell, b)?;
                }
            }
            let svd = d.clone().svd(false, false);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
            if !cond.is_finite() || cond > COND_LIMIT {
                return Err(FESpaceError::SingularLocalMatrix { cell, cond });
            }
            log::debug!("cell {cell}: local dof matrix condition {cond:.3e}");
            let mut inv = d
                .clone()
                .try_inverse()
                .ok_or(FESpaceError::SingularLocalMatrix { cell, cond })?;
            // one Newton step sharpens the inverse to working precision
            let residual = DMatrix::identity(nb, nb) - &d * &inv;
            inv = &inv + &inv * residual;
            self.cell_dofs.push(rows);
            self.dual_coeffs.push(inv);
            self.cond.push(cond);
        }
        Ok(())
    }

    pub fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn form_degree(&self) -> usize {
        self.form_degree
    }

    pub fn boundary(&self) -> &BoundarySubcomplex {
        &self.boundary
    }

    pub fn local_basis(&self) -> &[PolyForm] {
        &self.local_basis
    }

    pub fn num_dofs(&self) -> usize {
        self.dofs.len()
    }

    pub fn num_active_dofs(&self) -> usize {
        self.num_active
    }

    pub fn dof_home(&self, g: usize) -> (usize, usize) {
        self.dofs[g]
    }

    pub fn global_dof_id(&self, simplex: usize, index: usize) -> Result<usize, FESpaceError> {
        if index >= self.dof_count[simplex] {
            return Err(FESpaceError::NoSuchDof { simplex, index });
        }
        Ok(self.dof_offset[simplex] + index)
    }

    pub fn active_of(&self, g: usize) -> Option<usize> {
        self.active_index[g]
    }

    pub fn is_active(&self, g: usize) -> bool {
        self.active_index[g].is_some()
    }

    /// Condition number of the local evaluation matrix of a cell.
    pub fn condition_number(&self, cell: usize) -> f64 {
        self.cond[self.cell_pos(cell)]
    }

    fn cell_pos(&self, cell: usize) -> usize {
        self.complex
            .cell_ids()
            .binary_search(&cell)
            .expect("valid cell id")
    }

    /// The functionals attached to one simplex (empty below the form degree).
    pub fn dof_functionals(&self, simplex: usize) -> Vec<DofFunctional> {
        let m = self.complex.simplex(simplex).dim;
        self.weight_bases[m]
            .iter()
            .enumerate()
            .map(|(i, w)| DofFunctional {
                simplex,
                index: i,
                weight: w.clone(),
            })
            .collect()
    }

    fn apply_dof_raw(
        &self,
        dof: &DofFunctional,
        cell: usize,
        a: &PolyForm,
    ) -> Result<f64, FESpaceError> {
        let pos = face_positions(&self.complex, dof.simplex, cell);
        let tr = a.trace_to_face(&pos)?;
        let integrand = dof.weight.wedge(&tr)?;
        Ok(integrate_form(&self.complex, dof.simplex, &integrand)?)
    }

    /// Apply a degree of freedom to a polynomial form given in the reference
    /// coordinates of `cell`; the home simplex must be a subsimplex.
    pub fn apply_dof(
        &self,
        dof: &DofFunctional,
        cell: usize,
        a: &PolyForm,
    ) -> Result<f64, FESpaceError> {
        if !self.complex.is_subsimplex(dof.simplex, cell) {
            return Err(FESpaceError::DofOutsideCell {
                simplex: dof.simplex,
                cell,
            });
        }
        self.apply_dof_raw(dof, cell, a)
    }

    /// Global dof ids seen by a cell, in the local row order.
    pub fn cell_dof_ids(&self, cell: usize) -> &[usize] {
        &self.cell_dofs[self.cell_pos(cell)]
    }

    /// The dual form of `(simplex, index)` on a cell, `None` when the home
    /// simplex is not contained in the cell.
    pub fn dual_form(&self, cell: usize, simplex: usize, index: usize) -> Option<PolyForm> {
        if index >= self.dof_count[simplex] {
            return None;
        }
        let g = self.dof_offset[simplex] + index;
        let pos = self.cell_pos(cell);
        let q = self.cell_dofs[pos].iter().position(|&h| h == g)?;
        let coeffs = self.dual_coeffs[pos].column(q);
        let mut out = PolyForm::zero(self.complex.ambient_dim(), self.form_degree);
        for (j, b) in self.local_basis.iter().enumerate() {
            out = out.add(&b.scale(coeffs[j]));
        }
        Some(out)
    }

    /// All dual forms of a cell with their global dof ids.
    pub fn local_dual_basis(&self, cell: usize) -> Vec<(usize, PolyForm)> {
        let pos = self.cell_pos(cell);
        self.cell_dofs[pos]
            .iter()
            .enumerate()
            .map(|(q, &g)| {
                let coeffs = self.dual_coeffs[pos].column(q);
                let mut out = PolyForm::zero(self.complex.ambient_dim(), self.form_degree);
                for (j, b) in self.local_basis.iter().enumerate() {
                    out = out.add(&b.scale(coeffs[j]));
                }
                (g, out)
            })
            .collect()
    }

    /// Coefficient vector of a global shape function (unit vector at the
    /// active position of `(simplex, index)`).
    pub fn global_shape_function(
        &self,
        simplex: usize,
        index: usize,
    ) -> Result<FEFunction, FESpaceError> {
        let g = self.global_dof_id(simplex, index)?;
        let Some(a) = self.active_index[g] else {
            return Err(FESpaceError::MaskedDof { simplex, index });
        };
        let mut u = FEFunction::zero(self);
        u.coeffs[a] = 1.0;
        Ok(u)
    }

    /// Cellwise polynomial of a coefficient vector, in the reference
    /// coordinates of the cell. Masked degrees of freedom contribute zero.
    pub fn reconstruct(&self, u: &FEFunction, cell: usize) -> PolyForm {
        let pos = self.cell_pos(cell);
        let rows = &self.cell_dofs[pos];
        let mut local = DVector::zeros(rows.len());
        for (q, &g) in rows.iter().enumerate() {
            if let Some(a) = self.active_index[g] {
                local[q] = u.coeffs[a];
            }
        }
        let basis_coeffs = &self.dual_coeffs[pos] * local;
        let mut out = PolyForm::zero(self.complex.ambient_dim(), self.form_degree);
        for (j, b) in self.local_basis.iter().enumerate() {
            if basis_coeffs[j] != 0.0 {
                out = out.add(&b.scale(basis_coeffs[j]));
            }
        }
        out
    }

    /// Cellwise polynomial in ambient coordinates.
    pub fn reconstruct_ambient(&self, u: &FEFunction, cell: usize) -> PolyForm {
        let chart = self.complex.chart(cell);
        chart.push_to_ambient(&self.reconstruct(u, cell))
    }

    /// Ambient component tuple of the finite element function at a reference
    /// point of the cell.
    pub fn evaluate(
        &self,
        u: &FEFunction,
        cell: usize,
        ref_point: &[f64],
    ) -> Result<Vec<f64>, FESpaceError> {
        let lambda0 = 1.0 - ref_point.iter().sum::<f64>();
        if ref_point.iter().any(|&x| x < -1e-10) || lambda0 < -1e-10 {
            return Err(FESpaceError::PointOutsideCell(ref_point.to_vec()));
        }
        let chart = self.complex.chart(cell);
        let amb = self.reconstruct_ambient(u, cell);
        let p = chart.map_point(ref_point);
        Ok(amb.component_values(p.as_slice()))
    }

    /// Degrees of freedom of a cellwise polynomial: the canonical
    /// interpolation coefficients seen from one cell.
    pub fn dof_values_on_cell(
        &self,
        cell: usize,
        a: &PolyForm,
    ) -> Result<Vec<(usize, f64)>, FESpaceError> {
        let pos = self.cell_pos(cell);
        let mut out = Vec::new();
        for &g in &self.cell_dofs[pos] {
            let (s, i) = self.dofs[g];
            let dof = DofFunctional {
                simplex: s,
                index: i,
                weight: self.weight_bases[self.complex.simplex(s).dim][i].clone(),
            };
            out.push((g, self.apply_dof_raw(&dof, cell, a)?));
        }
        Ok(out)
    }

    /// Interpolate a member of the space given per cell in reference
    /// coordinates, by evaluating every active degree of freedom on its
    /// lowest-id containing cell (single-valuedness across cells is the
    /// conformity property).
    pub fn interpolate_cellwise(
        &self,
        forms: &HashMap<usize, PolyForm>,
    ) -> Result<FEFunction, FESpaceError> {
        let mut u = FEFunction::zero(self);
        for (g, &(s, i)) in self.dofs.iter().enumerate() {
            let Some(a) = self.active_index[g] else {
                continue;
            };
            let cell = self.complex.cells_containing(s)[0];
            let dof = DofFunctional {
                simplex: s,
                index: i,
                weight: self.weight_bases[self.complex.simplex(s).dim][i].clone(),
            };
            u.coeffs[a] = self.apply_dof_raw(&dof, cell, &forms[&cell])?;
        }
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn single_triangle() -> Arc<SimplicialComplex> {
        Arc::new(
            SimplicialComplex::build(
                vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![0, 1, 2]],
            )
            .unwrap(),
        )
    }

    fn single_tet() -> Arc<SimplicialComplex> {
        Arc::new(
            SimplicialComplex::build(
                vec![
                    vec![0.0, 0.0, 0.0],
                    vec![1.0, 0.0, 0.0],
                    vec![0.0, 1.0, 0.0],
                    vec![0.0, 0.0, 1.0],
                ],
                vec![vec![0, 1, 2, 3]],
            )
            .unwrap(),
        )
    }

    #[test]
    fn whitney_space_on_triangle_has_edge_dofs_only() {
        let c = single_triangle();
        let sp = FESpace::build(
            c.clone(),
            Family::Trimmed,
            1,
            1,
            BoundarySubcomplex::empty(),
        )
        .unwrap();
        assert_eq!(sp.num_dofs(), 3);
        for g in 0..sp.num_dofs() {
            let (s, _) = sp.dof_home(g);
            assert_eq!(c.simplex(s).dim, 1);
        }
    }

    #[test]
    fn lowest_order_scalar_space_has_vertex_dofs() {
        let c = Arc::new(mesh::unit_square_2());
        let sp = FESpace::build(c, Family::Full, 1, 0, BoundarySubcomplex::empty()).unwrap();
        assert_eq!(sp.num_dofs(), 4);
    }

    #[test]
    fn face_space_on_tet() {
        let c = single_tet();
        let sp = FESpace::build(c, Family::Trimmed, 1, 2, BoundarySubcomplex::empty()).unwrap();
        assert_eq!(sp.num_dofs(), 4);
    }

    #[test]
    fn dof_counts_match_trace_free_dimensions() {
        // a vertex with k=1 carries nothing; an edge at (B, r=1, k=1) one
        assert_eq!(dof_count(Family::Trimmed, 0, 1, 1), 0);
        assert_eq!(dof_count(Family::Trimmed, 1, 1, 1), 1);
        // quadratic scalar edge bubble
        assert_eq!(dof_count(Family::Full, 1, 0, 2), 1);
        // per-cell sums equal the local dimension (unisolvence bookkeeping)
        for n in 2..=3usize {
            for k in 0..=n {
                for r in 1..=3usize {
                    for family in [Family::Full, Family::Trimmed] {
                        let (fam, rr) = normalize_family(family, r, k, n);
                        let total: usize = (0..=n)
                            .map(|m| {
                                crate::polyform::binomial(n + 1, m + 1)
                                    * dof_count(fam, m, k, rr)
                            })
                            .sum();
                        let dim = match fam {
                            Family::Full => dim_full(n, rr, k),
                            Family::Trimmed => dim_trimmed(n, rr, k),
                        };
                        assert_eq!(total, dim, "family {fam:?} r={rr} k={k} n={n}");
                    }
                }
            }
        }
    }

    #[test]
    fn whitney_duals_are_the_edge_forms() {
        let c = single_triangle();
        let sp = FESpace::build(
            c.clone(),
            Family::Trimmed,
            1,
            1,
            BoundarySubcomplex::empty(),
        )
        .unwrap();
        let t = c.cell_ids()[0];
        // the dual of each edge dof integrates to one over its own edge and
        // zero over the others
        for (g, psi) in sp.local_dual_basis(t) {
            let (s, _) = sp.dof_home(g);
            for &e in c.simplices_of_dim(1) {
                let pos = mesh::face_positions(&c, e, t);
                let tr = psi.trace_to_face(&pos).unwrap();
                let val = integrate_form(&c, e, &tr).unwrap();
                let want = if e == s { 1.0 } else { 0.0 };
                assert_relative_eq!(val, want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn hat_functions_evaluate_to_kronecker_at_vertices() {
        let c = Arc::new(mesh::unit_square_2());
        let sp =
            FESpace::build(c.clone(), Family::Full, 1, 0, BoundarySubcomplex::empty()).unwrap();
        let v0 = c.id_of(&[0]).unwrap();
        let u = sp.global_shape_function(v0, 0).unwrap();
        for &cell in c.cell_ids() {
            // vertex 0 sits at the reference origin of both triangles
            let vals = sp.evaluate(&u, cell, &[0.0, 0.0]).unwrap();
            assert_relative_eq!(vals[0], 1.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn local_biorthogonality_residual() {
        let c = Arc::new(mesh::unit_cube_kuhn_6());
        let sp = FESpace::build(
            c.clone(),
            Family::Trimmed,
            2,
            1,
            BoundarySubcomplex::empty(),
        )
        .unwrap();
        for &cell in c.cell_ids() {
            for (g, psi) in sp.local_dual_basis(cell) {
                for (h, &(s2, _)) in sp.dofs.iter().enumerate() {
                    if !c.is_subsimplex(s2, cell) {
                        continue;
                    }
                    let (s2, i2) = sp.dof_home(h);
                    let dof = DofFunctional {
                        simplex: s2,
                        index: i2,
                        weight: sp.weight_bases[c.simplex(s2).dim][i2].clone(),
                    };
                    let val = sp.apply_dof(&dof, cell, &psi).unwrap();
                    let want = if g == h { 1.0 } else { 0.0 };
                    assert!(
                        (val - want).abs() <= 1e-10,
                        "dual pairing off by {}",
                        (val - want).abs()
                    );
                }
            }
        }
    }

    #[test]
    fn reconstruction_reproduces_space_members() {
        // random coefficients, then interpolate the reconstruction: identity
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = Arc::new(mesh::unit_square_2().refine_uniform().unwrap());
        for (family, r, k) in [
            (Family::Full, 1, 0),
            (Family::Full, 2, 0),
            (Family::Full, 1, 1),
            (Family::Trimmed, 1, 1),
            (Family::Trimmed, 2, 1),
            (Family::Trimmed, 1, 2),
        ] {
            let sp =
                FESpace::build(c.clone(), family, r, k, BoundarySubcomplex::empty()).unwrap();
            let mut u = FEFunction::zero(&sp);
            for v in u.coeffs.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let forms: HashMap<usize, PolyForm> = c
                .cell_ids()
                .iter()
                .map(|&t| (t, sp.reconstruct(&u, t)))
                .collect();
            let u2 = sp.interpolate_cellwise(&forms).unwrap();
            let err = (&u.coeffs - &u2.coeffs).amax();
            assert!(err <= 1e-9, "{family:?} r={r} k={k}: coeff error {err}");
        }
    }

    #[test]
    fn traces_agree_across_shared_facets() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = Arc::new(mesh::unit_square_2().refine_uniform().unwrap());
        let sp = FESpace::build(
            c.clone(),
            Family::Trimmed,
            2,
            1,
            BoundarySubcomplex::empty(),
        )
        .unwrap();
        let mut u = FEFunction::zero(&sp);
        for v in u.coeffs.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        for &f in c.simplices_of_dim(1) {
            let cells = c.cells_containing(f);
            if cells.len() != 2 {
                continue;
            }
            let a = sp
                .reconstruct(&u, cells[0])
                .trace_to_face(&mesh::face_positions(&c, f, cells[0]))
                .unwrap();
            let b = sp
                .reconstruct(&u, cells[1])
                .trace_to_face(&mesh::face_positions(&c, f, cells[1]))
                .unwrap();
            let diff = a.sub(&b);
            assert!(diff.coeff_max() <= 1e-10, "jump {}", diff.coeff_max());
        }
    }

    #[test]
    fn masked_dofs_do_not_contribute() {
        let c = Arc::new(mesh::unit_square_2());
        let bottom = c.boundary_subcomplex(|x| x[1].abs() < 1e-12);
        let sp = FESpace::build(c.clone(), Family::Full, 1, 0, bottom).unwrap();
        assert_eq!(sp.num_dofs(), 4);
        assert_eq!(sp.num_active_dofs(), 2);
        // any member of the masked space vanishes on the masked edge
        let mut u = FEFunction::zero(&sp);
        u.coeffs[0] = 1.0;
        u.coeffs[1] = 1.0;
        let e = c.id_of(&[0, 1]).unwrap();
        let t = c.cells_containing(e)[0];
        let tr = sp
            .reconstruct(&u, t)
            .trace_to_face(&mesh::face_positions(&c, e, t))
            .unwrap();
        assert!(tr.coeff_max() <= 1e-12);
    }

    #[test]
    fn family_normalization_is_degree_faithful() {
        assert_eq!(
            normalize_family(Family::Trimmed, 2, 0, 2),
            (Family::Full, 2)
        );
        assert_eq!(
            normalize_family(Family::Full, 2, 2, 2),
            (Family::Trimmed, 3)
        );
        assert_eq!(
            normalize_family(Family::Trimmed, 1, 1, 2),
            (Family::Trimmed, 1)
        );
    }

    #[test]
    fn requesting_degree_zero_fails() {
        let c = single_triangle();
        assert!(matches!(
            FESpace::build(c, Family::Full, 0, 0, BoundarySubcomplex::empty()),
            Err(FESpaceError::DegreeTooSmall)
        ));
    }
}
