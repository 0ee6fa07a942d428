//! Error measurement and convergence experiments.
//!
//! Everything here reduces to a handful of ingredients: cellwise error norms
//! of `field − finite element function`, least-squares slopes of log error
//! against log mesh size over refinement sequences, and the two
//! best-approximation quantities
//!
//! ```text
//!   E₂(ω)²    = min over the conforming space of ‖ω−ω_h‖² + Σ_T h_T²‖dω−dω_h‖²
//!   e_{2,T}²  = the same minimum over the unconstrained local space on T
//! ```
//!
//! The square sum of the local errors can never exceed the global one, and
//! for closed fields the two stay comparable; both facts are exercised by
//! the acceptance suite.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fespace::{FEFunction, FESpace, FESpaceError, Family};
use crate::fields::{ExteriorDerivativeField, FormField};
use crate::mesh::{BoundarySubcomplex, MeshError, SimplicialComplex};
use crate::polyform::PolyForm;
use crate::projection::{make_weights, project, Backend, ProjectionError, WeightKind};
use crate::quadrature::{
    default_order, field_moments, mass_matrix, ErrorIntegrand, LpExp, QuadratureError,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("a convergence study needs at least {needed} levels, got {got}")]
    TooFewLevels { needed: usize, got: usize },
    #[error("mesh sizes must decrease strictly across levels")]
    NonMonotoneLevels,
    #[error("field does not provide derivatives of order {0}")]
    MissingDerivatives(usize),
    #[error("global normal-equation system is singular")]
    SingularSystem,
    #[error(transparent)]
    Space(#[from] FESpaceError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Form(#[from] crate::polyform::PolyFormError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A Sobolev-seminorm request: s-th derivatives measured in L^p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub s: usize,
    pub p: LpExp,
}

impl NormSpec {
    pub fn l2() -> Self {
        NormSpec { s: 0, p: LpExp::Two }
    }

    pub fn label(&self) -> String {
        format!("W{},{}", self.s, self.p.label())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub norms: Vec<(NormSpec, f64)>,
    #[serde(skip)]
    pub per_cell: Vec<(NormSpec, Vec<f64>)>,
}

/// Norms of `field − u` over the whole mesh, cellwise and aggregated.
pub fn error_report(
    space: &FESpace,
    u: &FEFunction,
    field: &dyn FormField,
    norms: &[NormSpec],
) -> Result<ErrorReport, AnalysisError> {
    let complex = space.complex();
    let cells: Vec<usize> = complex.cell_ids().to_vec();
    let ambient: BTreeMap<usize, PolyForm> = cells
        .iter()
        .map(|&t| (t, space.reconstruct_ambient(u, t)))
        .collect();
    let fe = |t: usize| ambient[&t].clone();
    let ctx = ErrorIntegrand {
        complex,
        field,
        fe_ambient: &fe,
        order: default_order(space.degree()) + 2,
    };
    let mut out = ErrorReport {
        norms: Vec::new(),
        per_cell: Vec::new(),
    };
    for &ns in norms {
        if ns.s > 0 && field.max_derivative_order() < ns.s {
            return Err(AnalysisError::MissingDerivatives(ns.s));
        }
        let global = ctx.sobolev_seminorm(&cells, ns.s, ns.p)?;
        let per_cell = ctx.cellwise_sobolev(&cells, ns.s, ns.p)?;
        out.norms.push((ns, global));
        out.per_cell.push((ns, per_cell));
    }
    Ok(out)
}

/// Least-squares slope of log(err) against log(h) over the given window.
pub fn fit_slope(h: &[f64], err: &[f64]) -> f64 {
    assert_eq!(h.len(), err.len());
    let xs: Vec<f64> = h.iter().map(|&v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|&v| v.max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - xbar) * (y - ybar);
        den += (x - xbar) * (x - xbar);
    }
    num / den
}

/// Slope from the last three levels (preasymptotic levels are discarded
/// deterministically).
pub fn tail_slope(h: &[f64], err: &[f64]) -> f64 {
    let start = h.len().saturating_sub(3);
    fit_slope(&h[start..], &err[start..])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub family: Family,
    pub r: usize,
    pub k: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelRecord {
    pub level: usize,
    pub h_max: f64,
    pub num_cells: usize,
    pub errors: Vec<(NormSpec, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub space: SpaceSpec,
    pub weights: String,
    pub backend: String,
    pub field: String,
    pub levels: Vec<LevelRecord>,
    /// slope per requested norm, fitted on the last three levels
    pub slopes: Vec<(NormSpec, f64)>,
}

impl ConvergenceReport {
    pub fn slope_for(&self, ns: NormSpec) -> Option<f64> {
        self.slopes.iter().find(|(m, _)| *m == ns).map(|(_, s)| *s)
    }

    /// One CSV row per (level, norm): level,h_max,norm,space,weights,backend,value,slope
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "level,h_max,norm,space,weights,backend,value,slope")?;
        let space = format!(
            "{}_r{}_k{}",
            self.space.family.label(),
            self.space.r,
            self.space.k
        );
        for lvl in &self.levels {
            for (ns, value) in &lvl.errors {
                let slope = self
                    .slope_for(*ns)
                    .map(|s| format!("{s:.6}"))
                    .unwrap_or_default();
                writeln!(
                    w,
                    "{},{:.12},{},{},{},{},{:.12e},{}",
                    lvl.level,
                    lvl.h_max,
                    ns.label(),
                    space,
                    self.weights,
                    self.backend,
                    value,
                    slope
                )?;
            }
        }
        Ok(())
    }
}

/// Refinement sequence starting from a base mesh.
pub fn refinement_sequence(
    base: &SimplicialComplex,
    levels: usize,
) -> Result<Vec<Arc<SimplicialComplex>>, MeshError> {
    let mut out = vec![Arc::new(base.clone())];
    for _ in 1..levels {
        let next = out.last().unwrap().refine_uniform()?;
        out.push(Arc::new(next));
    }
    Ok(out)
}

/// Projection errors across a refinement sequence with fitted slopes.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    meshes: &[Arc<SimplicialComplex>],
    spec: SpaceSpec,
    boundary_selector: &dyn Fn(&SimplicialComplex) -> BoundarySubcomplex,
    field: &dyn FormField,
    field_name: &str,
    weights: WeightKind,
    backend: Backend,
    norms: &[NormSpec],
) -> Result<ConvergenceReport, AnalysisError> {
    if meshes.len() < 3 {
        return Err(AnalysisError::TooFewLevels {
            needed: 3,
            got: meshes.len(),
        });
    }
    let mut levels = Vec::new();
    let mut prev_h = f64::INFINITY;
    for (level, complex) in meshes.iter().enumerate() {
        let h = complex.h_max();
        if h >= prev_h {
            return Err(AnalysisError::NonMonotoneLevels);
        }
        prev_h = h;
        let boundary = boundary_selector(complex);
        let space = FESpace::build(complex.clone(), spec.family, spec.r, spec.k, boundary)?;
        let w = make_weights(weights, complex, space.boundary(), None)?;
        let u = project(&space, field, &w, backend)?;
        let report = error_report(&space, &u, field, norms)?;
        levels.push(LevelRecord {
            level,
            h_max: h,
            num_cells: complex.cell_ids().len(),
            errors: report.norms,
        });
    }
    let hs: Vec<f64> = levels.iter().map(|l| l.h_max).collect();
    let slopes = norms
        .iter()
        .map(|&ns| {
            let errs: Vec<f64> = levels
                .iter()
                .map(|l| l.errors.iter().find(|(m, _)| *m == ns).unwrap().1)
                .collect();
            (ns, tail_slope(&hs, &errs))
        })
        .collect();
    Ok(ConvergenceReport {
        space: spec,
        weights: weights.label().to_string(),
        backend: backend.label().to_string(),
        field: field_name.to_string(),
        levels,
        slopes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BestApproxResult {
    /// weighted global best-approximation error
    pub e2: f64,
    /// per-cell unconstrained errors
    pub per_cell: Vec<f64>,
    /// E₂ / sqrt(Σ e_T²)
    pub ratio: f64,
    #[serde(skip)]
    pub minimizer: FEFunction,
}

/// Weighted L² distance of `field` to the finite element function:
/// `(‖ω−u‖² + Σ_T h_T² ‖dω−du‖²)^{1/2}`.
pub fn graph_distance(
    space: &FESpace,
    u: &FEFunction,
    field: &dyn FormField,
    dfield: &dyn FormField,
) -> Result<f64, AnalysisError> {
    let complex = space.complex();
    let cells: Vec<usize> = complex.cell_ids().to_vec();
    let order = default_order(space.degree()) + 2;
    let ambient: BTreeMap<usize, PolyForm> = cells
        .iter()
        .map(|&t| (t, space.reconstruct_ambient(u, t)))
        .collect();
    let fe0 = |t: usize| ambient[&t].clone();
    let ctx0 = ErrorIntegrand {
        complex,
        field,
        fe_ambient: &fe0,
        order,
    };
    let err0 = ctx0.cellwise_lp(&cells, LpExp::Two)?;
    let fe1 = |t: usize| ambient[&t].exterior_derivative();
    let ctx1 = ErrorIntegrand {
        complex,
        field: dfield,
        fe_ambient: &fe1,
        order,
    };
    let err1 = ctx1.cellwise_lp(&cells, LpExp::Two)?;
    let mut total = 0.0;
    for ((e0, e1), &t) in err0.iter().zip(&err1).zip(&cells) {
        let h = complex.diameter(t);
        total += e0 * e0 + h * h * e1 * e1;
    }
    Ok(total.sqrt())
}

/// Minimize the weighted graph distance over the active coefficients by
/// solving the normal equations, and compare against the per-cell
/// unconstrained minima.
pub fn global_best_approx(
    space: &FESpace,
    field: &dyn FormField,
) -> Result<BestApproxResult, AnalysisError> {
    let complex = space.complex();
    let dfield = ExteriorDerivativeField::new(field);
    let order = default_order(space.degree()) + 2;
    let na = space.num_active_dofs();
    let mut a = DMatrix::zeros(na, na);
    let mut b = DVector::zeros(na);
    for &cell in complex.cell_ids() {
        let chart = complex.chart(cell);
        let h = complex.diameter(cell);
        let duals = space.local_dual_basis(cell);
        let forms: Vec<PolyForm> = duals.iter().map(|(_, f)| f.clone()).collect();
        let dforms: Vec<PolyForm> = forms.iter().map(|f| f.exterior_derivative()).collect();
        let m0 = mass_matrix(&forms, &chart, order)?;
        let m1 = mass_matrix(&dforms, &chart, order)?;
        let r0 = field_moments(field, cell, &forms, &chart, order)?;
        let r1 = field_moments(&dfield, cell, &dforms, &chart, order)?;
        let slots: Vec<Option<usize>> = duals.iter().map(|(g, _)| space.active_of(*g)).collect();
        for (qi, &si) in slots.iter().enumerate() {
            let Some(ai) = si else { continue };
            b[ai] += r0[qi] + h * h * r1[qi];
            for (qj, &sj) in slots.iter().enumerate() {
                let Some(aj) = sj else { continue };
                a[(ai, aj)] += m0[(qi, qj)] + h * h * m1[(qi, qj)];
            }
        }
    }
    let sol = a
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&b))
        .or_else(|| a.lu().solve(&b))
        .ok_or(AnalysisError::SingularSystem)?;
    let minimizer = FEFunction { coeffs: sol };
    let e2 = graph_distance(space, &minimizer, field, &dfield)?;
    let per_cell = local_best_errors(space, field)?;
    let local_rss = per_cell.iter().map(|e| e * e).sum::<f64>().sqrt();
    let ratio = if local_rss > 1e-12 { e2 / local_rss } else { 1.0 };
    Ok(BestApproxResult {
        e2,
        per_cell,
        ratio,
        minimizer,
    })
}

/// Per-cell unconstrained best-approximation errors in the weighted graph
/// norm (no continuity, no boundary conditions).
pub fn local_best_errors(
    space: &FESpace,
    field: &dyn FormField,
) -> Result<Vec<f64>, AnalysisError> {
    let complex = space.complex();
    let dfield = ExteriorDerivativeField::new(field);
    let order = default_order(space.degree()) + 2;
    let basis = space.local_basis();
    let dbasis: Vec<PolyForm> = basis.iter().map(|f| f.exterior_derivative()).collect();
    let mut out = Vec::new();
    for &cell in complex.cell_ids() {
        let chart = complex.chart(cell);
        let h = complex.diameter(cell);
        let m0 = mass_matrix(basis, &chart, order)?;
        let m1 = mass_matrix(&dbasis, &chart, order)?;
        let r0 = field_moments(field, cell, basis, &chart, order)?;
        let r1 = field_moments(&dfield, cell, &dbasis, &chart, order)?;
        let a = &m0 + &m1 * (h * h);
        let b = r0 + r1 * (h * h);
        let sol = a
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&b))
            .or_else(|| a.lu().solve(&b))
            .ok_or(AnalysisError::SingularSystem)?;
        let mut best = PolyForm::zero(complex.ambient_dim(), space.form_degree());
        for (j, bf) in basis.iter().enumerate() {
            best = best.add(&bf.scale(sol[j]));
        }
        let ambient = chart.push_to_ambient(&best);
        let dambient = ambient.exterior_derivative();
        let fe0 = |_t: usize| ambient.clone();
        let ctx0 = ErrorIntegrand {
            complex,
            field,
            fe_ambient: &fe0,
            order,
        };
        let e0 = ctx0.cellwise_lp(&[cell], LpExp::Two)?[0];
        let fe1 = |_t: usize| dambient.clone();
        let ctx1 = ErrorIntegrand {
            complex,
            field: &dfield,
            fe_ambient: &fe1,
            order,
        };
        let e1 = ctx1.cellwise_lp(&[cell], LpExp::Two)?[0];
        out.push((e0 * e0 + h * h * e1 * e1).sqrt());
    }
    Ok(out)
}

/// Cells sharing at least a vertex with the given cell (including itself).
pub fn cell_neighborhood(complex: &SimplicialComplex, cell: usize) -> Vec<usize> {
    let mut out = std::collections::BTreeSet::new();
    for v in complex.subsimplices(cell, 0).expect("cells have vertices") {
        for &t in complex.cells_containing(v) {
            out.insert(t);
        }
    }
    out.into_iter().collect()
}

/// Largest cellwise ratio `‖𝒫ω‖_{L²(T)} / Σ_{T'∩T≠∅} ‖ω‖_{L²(T')}`: the
/// measured local stability constant of the projection in L².
pub fn patch_stability_ratio(
    space: &FESpace,
    u: &FEFunction,
    field: &dyn FormField,
) -> Result<f64, AnalysisError> {
    let complex = space.complex();
    let cells: Vec<usize> = complex.cell_ids().to_vec();
    let order = default_order(space.degree()) + 2;
    // ‖𝒫ω‖ per cell: field = 0 against the reconstruction
    let ambient: BTreeMap<usize, PolyForm> = cells
        .iter()
        .map(|&t| (t, space.reconstruct_ambient(u, t)))
        .collect();
    let zero = crate::fields::ZeroField {
        dim: complex.ambient_dim(),
        degree: space.form_degree(),
    };
    let fe = |t: usize| ambient[&t].clone();
    let ctx_pu = ErrorIntegrand {
        complex,
        field: &zero,
        fe_ambient: &fe,
        order,
    };
    let pu_norms = ctx_pu.cellwise_lp(&cells, LpExp::Two)?;
    // ‖ω‖ per cell
    let zero_fe = |_t: usize| PolyForm::zero(complex.ambient_dim(), space.form_degree());
    let ctx_om = ErrorIntegrand {
        complex,
        field,
        fe_ambient: &zero_fe,
        order,
    };
    let om_norms = ctx_om.cellwise_lp(&cells, LpExp::Two)?;
    let index_of: BTreeMap<usize, usize> =
        cells.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let mut worst: f64 = 0.0;
    for (i, &t) in cells.iter().enumerate() {
        let denom: f64 = cell_neighborhood(complex, t)
            .into_iter()
            .map(|t2| om_norms[index_of[&t2]])
            .sum();
        if denom > 1e-13 {
            worst = worst.max(pu_norms[i] / denom);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct BrokenBhLevel {
    pub level: usize,
    pub h_max: f64,
    /// ‖ω − 𝒫ω‖ in L²
    pub conforming_error: f64,
    /// (Σ_T e_{2,T}²)^{1/2}
    pub broken_error: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BrokenBhReport {
    pub levels: Vec<BrokenBhLevel>,
    /// slope of the conforming error over the last three levels
    pub slope: f64,
}

/// Conforming-versus-broken comparison across refinements: the conforming
/// projection error and the root square sum of the per-cell unconstrained
/// best errors, with their ratio per level.
#[allow(clippy::too_many_arguments)]
pub fn broken_bh_study(
    meshes: &[Arc<SimplicialComplex>],
    spec: SpaceSpec,
    field: &dyn FormField,
    weights: WeightKind,
    backend: Backend,
) -> Result<BrokenBhReport, AnalysisError> {
    if meshes.len() < 3 {
        return Err(AnalysisError::TooFewLevels {
            needed: 3,
            got: meshes.len(),
        });
    }
    let mut levels = Vec::new();
    for (level, complex) in meshes.iter().enumerate() {
        let space = FESpace::build(
            complex.clone(),
            spec.family,
            spec.r,
            spec.k,
            BoundarySubcomplex::empty(),
        )?;
        let w = make_weights(weights, complex, space.boundary(), None)?;
        let u = project(&space, field, &w, backend)?;
        let report = error_report(&space, &u, field, &[NormSpec::l2()])?;
        let conforming_error = report.norms[0].1;
        let per_cell = local_best_errors(&space, field)?;
        let broken_error = per_cell.iter().map(|e| e * e).sum::<f64>().sqrt();
        let ratio = if broken_error > 1e-13 {
            conforming_error / broken_error
        } else {
            1.0
        };
        levels.push(BrokenBhLevel {
            level,
            h_max: complex.h_max(),
            conforming_error,
            broken_error,
            ratio,
        });
    }
    let hs: Vec<f64> = levels.iter().map(|l| l.h_max).collect();
    let errs: Vec<f64> = levels.iter().map(|l| l.conforming_error).collect();
    Ok(BrokenBhReport {
        slope: tail_slope(&hs, &errs),
        levels,
    })
}

/// Residual of the weak integration-by-parts identity for a finite element
/// function against one smooth test form `η` (a polynomial vanishing on the
/// part of the domain boundary away from the masked region):
/// `∫ u ∧ dη − (−1)^{k+1} ∫ du ∧ η`, evaluated cellwise. For members of the
/// masked space the residual reduces to the boundary pairing on the masked
/// part, which vanishes.
pub fn weak_boundary_residual(
    space: &FESpace,
    u: &FEFunction,
    eta: &PolyForm,
) -> Result<f64, AnalysisError> {
    let complex = space.complex();
    let n = complex.ambient_dim();
    let k = space.form_degree();
    assert_eq!(eta.degree(), n - k - 1);
    let sign = if (k + 1) % 2 == 0 { 1.0 } else { -1.0 };
    let deta = eta.exterior_derivative();
    let mut residual = 0.0;
    for &cell in complex.cell_ids() {
        let chart = complex.chart(cell);
        let local = space.reconstruct_ambient(u, cell);
        let dlocal = local.exterior_derivative();
        // both terms are top-degree ambient forms; pull to reference and
        // integrate with the positive orientation
        let t1 = chart.pull_to_reference(&local.wedge(&deta)?);
        let t2 = chart.pull_to_reference(&dlocal.wedge(eta)?);
        let s = complex.cell_sign(cell);
        residual += s
            * (crate::quadrature::integrate_reference_top(&t1)
                - sign * crate::quadrature::integrate_reference_top(&t2));
    }
    Ok(residual)
}

pub fn write_csv_file(report: &ConvergenceReport, path: &std::path::Path) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    report.write_csv(&mut f)
}
