//! Vector-calculus façade over the differential-form machinery.
//!
//! Named spaces map onto (family, form degree) pairs:
//!
//! | name     | family  | k   | proxy semantics           |
//! |----------|---------|-----|---------------------------|
//! | Lagrange | full    | 0   | scalar                    |
//! | Ned2     | full    | 1   | tangential vector (curl)  |
//! | Ned1     | trimmed | 1   | tangential vector (curl)  |
//! | BDM      | full    | n−1 | flux vector (div)         |
//! | RT       | trimmed | n−1 | flux vector (div)         |
//!
//! Degrees follow the convention in which the trimmed space of degree r is
//! spanned by forms of polynomial degree at most r (so the lowest order is
//! r = 1); some texts index the same spaces with a shift of one.
//!
//! Vectors become 1-forms through `u ↦ Σ u_i dx_i` and flux (n−1)-forms
//! through the contraction of the volume form, so the exterior derivative
//! realizes grad, curl, and div. The curl-type names exist in 3D; in 2D the
//! flux and tangential families differ by a rotation and only Lagrange, BDM,
//! and RT are exposed.

use std::sync::Arc;

use thiserror::Error;

use crate::analysis::{error_report, AnalysisError, ErrorReport, NormSpec};
use crate::fespace::{FEFunction, FESpace, FESpaceError, Family};
use crate::fields::FormField;
use crate::mesh::{BoundarySubcomplex, SimplicialComplex};
use crate::projection::{project, Backend, ProjectionError, WeightScheme};

#[derive(Debug, Error)]
pub enum VecProxyError {
    #[error("unknown named space {0:?}")]
    UnknownName(String),
    #[error("space {name} is not available in ambient dimension {n}")]
    DimensionMismatch { name: String, n: usize },
    #[error("proxy kind does not match the form degree")]
    KindMismatch,
    #[error(transparent)]
    Space(#[from] FESpaceError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

pub const SPACE_NAMES: [&str; 5] = ["BDM", "Lagrange", "Ned1", "Ned2", "RT"];

/// Family and form degree of a named space in ambient dimension `n`.
pub fn named_space_params(name: &str, n: usize) -> Result<(Family, usize), VecProxyError> {
    let params = match name {
        "Lagrange" => (Family::Full, 0),
        "Ned2" => (Family::Full, 1),
        "Ned1" => (Family::Trimmed, 1),
        "BDM" => (Family::Full, n - 1),
        "RT" => (Family::Trimmed, n - 1),
        other => return Err(VecProxyError::UnknownName(other.to_string())),
    };
    if n == 2 && matches!(name, "Ned1" | "Ned2") {
        return Err(VecProxyError::DimensionMismatch {
            name: name.to_string(),
            n,
        });
    }
    Ok(params)
}

pub fn named_space(
    name: &str,
    complex: Arc<SimplicialComplex>,
    r: usize,
    boundary: BoundarySubcomplex,
) -> Result<FESpace, VecProxyError> {
    let (family, k) = named_space_params(name, complex.ambient_dim())?;
    Ok(FESpace::build(complex, family, r, k, boundary)?)
}

/// How a vector-analysis object is encoded as a differential form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxyKind {
    /// scalar function as a 0-form
    Scalar,
    /// vector field as a 1-form, `u ↦ Σ u_i dx_i`
    VectorTangential,
    /// vector field as an (n−1)-form via the flux identification
    VectorFlux,
    /// scalar density as a top-degree form
    Density,
}

impl ProxyKind {
    pub fn form_degree(&self, n: usize) -> usize {
        match self {
            ProxyKind::Scalar => 0,
            ProxyKind::VectorTangential => 1,
            ProxyKind::VectorFlux => n - 1,
            ProxyKind::Density => n,
        }
    }
}

/// Form components of a vector under the flux identification. In 3D:
/// `u ↦ u_x dx₁∧dx₂... ` concretely `(u_x, u_y, u_z) ↦ u_x dy∧dz − u_y dx∧dz
/// + u_z dx∧dy`; in 2D: `(u_x, u_y) ↦ −u_y dx + u_x dy`, so that the
/// exterior derivative is the divergence times the volume form.
pub fn vector_to_flux_components(u: &[f64]) -> Vec<f64> {
    match u.len() {
        2 => vec![-u[1], u[0]],
        3 => vec![u[2], -u[1], u[0]],
        _ => panic!("flux identification needs 2 or 3 components"),
    }
}

/// Inverse of [`vector_to_flux_components`].
pub fn flux_components_to_vector(c: &[f64]) -> Vec<f64> {
    match c.len() {
        2 => vec![c[1], -c[0]],
        3 => vec![c[2], -c[1], c[0]],
        _ => panic!("flux identification needs 2 or 3 components"),
    }
}

/// In 3D the 2-form components (lexicographic: dx∧dy, dx∧dz, dy∧dz) of a
/// vector identify back through the same signed permutation either way.
pub fn vector_to_2form_components(u: &[f64]) -> Vec<f64> {
    assert_eq!(u.len(), 3);
    // dx∧dy ← u_z, dx∧dz ← −u_y, dy∧dz ← u_x
    vec![u[2], -u[1], u[0]]
}

/// A vector-analysis field backed by componentwise closures with exact
/// derivatives; the form representation follows the proxy kind.
pub struct VectorProxyField {
    pub kind: ProxyKind,
    n: usize,
    /// per vector component: ∂^alpha evaluator
    components: Vec<Box<dyn Fn(&[f64], &[usize]) -> f64 + Send + Sync>>,
    max_order: usize,
}

impl VectorProxyField {
    pub fn new(
        kind: ProxyKind,
        n: usize,
        components: Vec<Box<dyn Fn(&[f64], &[usize]) -> f64 + Send + Sync>>,
        max_order: usize,
    ) -> Self {
        VectorProxyField {
            kind,
            n,
            components,
            max_order,
        }
    }

    /// The raw vector (or scalar) value, before the form identification.
    pub fn vector_value(&self, p: &[f64]) -> Vec<f64> {
        let alpha = vec![0usize; self.n];
        self.components.iter().map(|f| f(p, &alpha)).collect()
    }
}

impl FormField for VectorProxyField {
    fn ambient_dim(&self) -> usize {
        self.n
    }

    fn form_degree(&self) -> usize {
        self.kind.form_degree(self.n)
    }

    fn max_derivative_order(&self) -> usize {
        self.max_order
    }

    fn components(&self, _cell: usize, p: &[f64], alpha: &[usize]) -> Vec<f64> {
        let raw: Vec<f64> = self.components.iter().map(|f| f(p, alpha)).collect();
        match self.kind {
            ProxyKind::Scalar | ProxyKind::Density => raw,
            ProxyKind::VectorTangential => raw,
            ProxyKind::VectorFlux => vector_to_flux_components(&raw),
        }
    }
}

/// Project a field into a named space and measure the requested error norms.
pub fn projection_named(
    name: &str,
    complex: Arc<SimplicialComplex>,
    r: usize,
    boundary: BoundarySubcomplex,
    field: &dyn FormField,
    weights: &WeightScheme,
    backend: Backend,
    norms: &[NormSpec],
) -> Result<(FEFunction, ErrorReport), VecProxyError> {
    let space = named_space(name, complex, r, boundary)?;
    let u = project(&space, field, weights, backend)?;
    let report = error_report(&space, &u, field, norms)?;
    Ok((u, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ExteriorDerivativeField;
    use crate::mesh;
    use approx::assert_relative_eq;

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
    fn named_space_dimensions_on_a_tet() {
        let c = single_tet();
        let ned1 = named_space("Ned1", c.clone(), 1, BoundarySubcomplex::empty()).unwrap();
        assert_eq!(ned1.num_dofs(), 6); // one per edge
        let rt = named_space("RT", c.clone(), 1, BoundarySubcomplex::empty()).unwrap();
        assert_eq!(rt.num_dofs(), 4); // one per face
        let lag = named_space("Lagrange", c.clone(), 1, BoundarySubcomplex::empty()).unwrap();
        assert_eq!(lag.num_dofs(), 4); // one per vertex
        let ned2 = named_space("Ned2", c.clone(), 1, BoundarySubcomplex::empty()).unwrap();
        assert_eq!(ned2.num_dofs(), 12); // two per edge
        let bdm = named_space("BDM", c, 1, BoundarySubcomplex::empty()).unwrap();
        assert_eq!(bdm.num_dofs(), 12); // three per face
    }

    #[test]
    fn curl_names_are_rejected_in_2d() {
        let c = Arc::new(mesh::unit_square_2());
        assert!(matches!(
            named_space("Ned1", c.clone(), 1, BoundarySubcomplex::empty()),
            Err(VecProxyError::DimensionMismatch { .. })
        ));
        assert!(named_space("RT", c, 1, BoundarySubcomplex::empty()).is_ok());
    }

    fn polynomial_vector_3d() -> VectorProxyField {
        // u = (y z, x², x y) with handwritten derivatives
        let comps: Vec<Box<dyn Fn(&[f64], &[usize]) -> f64 + Send + Sync>> = vec![
            Box::new(|p: &[f64], a: &[usize]| match a {
                [0, 0, 0] => p[1] * p[2],
                [0, 1, 0] => p[2],
                [0, 0, 1] => p[1],
                [0, 1, 1] => 1.0,
                _ => 0.0,
            }),
            Box::new(|p: &[f64], a: &[usize]| match a {
                [0, 0, 0] => p[0] * p[0],
                [1, 0, 0] => 2.0 * p[0],
                [2, 0, 0] => 2.0,
                _ => 0.0,
            }),
            Box::new(|p: &[f64], a: &[usize]| match a {
                [0, 0, 0] => p[0] * p[1],
                [1, 0, 0] => p[1],
                [0, 1, 0] => p[0],
                [1, 1, 0] => 1.0,
                _ => 0.0,
            }),
        ];
        VectorProxyField::new(ProxyKind::VectorTangential, 3, comps, 4)
    }

    #[test]
    fn exterior_derivative_of_tangential_proxy_is_curl() {
        let u = polynomial_vector_3d();
        let du = ExteriorDerivativeField::new(&u);
        // curl u = (∂y(xy) − ∂z(x²), ∂z(yz) − ∂x(xy), ∂x(x²) − ∂y(yz))
        //        = (x, y − y, 2x − z) = (x, 0, 2x − z)
        for p in [[0.2, 0.3, 0.5], [0.9, 0.1, 0.4]] {
            let c2 = du.value(0, &p); // components (dxy, dxz, dyz)
            let curl = [p[0], 0.0, 2.0 * p[0] - p[2]];
            // 2-form components identify as (curl_z, −curl_y, curl_x)
            let expected = vector_to_2form_components(&curl);
            for i in 0..3 {
                assert_relative_eq!(c2[i], expected[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn exterior_derivative_of_flux_proxy_is_divergence() {
        let comps: Vec<Box<dyn Fn(&[f64], &[usize]) -> f64 + Send + Sync>> = vec![
            Box::new(|p: &[f64], a: &[usize]| match a {
                [0, 0, 0] => p[0] * p[0],
                [1, 0, 0] => 2.0 * p[0],
                [2, 0, 0] => 2.0,
                _ => 0.0,
            }),
            Box::new(|p: &[f64], a: &[usize]| match a {
                [0, 0, 0] => p[1] * p[2],
                [0, 1, 0] => p[2],
                [0, 0, 1] => p[1],
                [0, 1, 1] => 1.0,
                _ => 0.0,
            }),
            Box::new(|p: &[f64], a: &[usize]| match a {
                [0, 0, 0] => p[2],
                [0, 0, 1] => 1.0,
                _ => 0.0,
            }),
        ];
        let u = VectorProxyField::new(ProxyKind::VectorFlux, 3, comps, 4);
        let du = ExteriorDerivativeField::new(&u);
        for p in [[0.2, 0.3, 0.5], [0.7, 0.6, 0.1]] {
            let div = 2.0 * p[0] + p[2] + 1.0;
            let val = du.value(0, &p);
            assert_relative_eq!(val[0], div, epsilon = 1e-12);
        }
    }

    #[test]
    fn gradient_proxy_square_commutes_in_2d() {
        // scalar φ = x²y; dφ as a 1-form equals (grad φ)·dx
        let comps: Vec<Box<dyn Fn(&[f64], &[usize]) -> f64 + Send + Sync>> =
            vec![Box::new(|p: &[f64], a: &[usize]| match a {
                [0, 0] => p[0] * p[0] * p[1],
                [1, 0] => 2.0 * p[0] * p[1],
                [0, 1] => p[0] * p[0],
                [1, 1] => 2.0 * p[0],
                [2, 0] => 2.0 * p[1],
                [2, 1] => 2.0,
                _ => 0.0,
            })];
        let phi = VectorProxyField::new(ProxyKind::Scalar, 2, comps, 4);
        let dphi = ExteriorDerivativeField::new(&phi);
        for p in [[0.2, 0.7], [0.5, 0.5]] {
            let grad = [2.0 * p[0] * p[1], p[0] * p[0]];
            let val = dphi.value(0, &p);
            assert_relative_eq!(val[0], grad[0], epsilon = 1e-13);
            assert_relative_eq!(val[1], grad[1], epsilon = 1e-13);
        }
    }

    #[test]
    fn flux_round_trip_is_identity() {
        for u in [[1.0, -2.0, 0.5], [0.0, 3.0, 4.0]] {
            let c = vector_to_flux_components(&u);
            let back = flux_components_to_vector(&c);
            assert_eq!(back, u.to_vec());
        }
        let u2 = [0.7, -0.3];
        assert_eq!(flux_components_to_vector(&vector_to_flux_components(&u2)), u2.to_vec());
    }
}
