//! Analytic differential-form fields with exact derivatives of any order.
//!
//! A field reports its components with respect to the ambient coordinate
//! coframe `dx_σ`, ordered over the increasing k-subsets of `{0,…,n−1}`
//! (the order of [`crate::polyform::increasing_subsets`]). Derivative
//! requests pass an exponent multi-index, so integer-order seminorms and
//! Taylor expansions get exact values rather than finite differences.
//!
//! The `cell` argument is a locality hint: piecewise fields may be smooth
//! only per subdomain, and evaluation points are always strictly inside a
//! cell, so the hint never straddles a kink.

use crate::polyform::{binomial, increasing_subsets};

pub trait FormField {
    fn ambient_dim(&self) -> usize;
    fn form_degree(&self) -> usize;
    /// Highest derivative order the field can produce exactly.
    fn max_derivative_order(&self) -> usize;
    /// `∂^alpha` of every component at `p`; `alpha.len() == ambient_dim`.
    fn components(&self, cell: usize, p: &[f64], alpha: &[usize]) -> Vec<f64>;

    fn value(&self, cell: usize, p: &[f64]) -> Vec<f64> {
        self.components(cell, p, &vec![0; self.ambient_dim()])
    }
}

/// Exterior derivative of a field, computed from the component derivatives:
/// `(dω)_τ = Σ_l (−1)^l ∂_{τ_l} ω_{τ∖τ_l}`.
pub struct ExteriorDerivativeField<'a> {
    inner: &'a dyn FormField,
    subsets_k: Vec<Vec<u8>>,
    subsets_k1: Vec<Vec<u8>>,
}

impl<'a> ExteriorDerivativeField<'a> {
    pub fn new(inner: &'a dyn FormField) -> Self {
        let n = inner.ambient_dim();
        let k = inner.form_degree();
        ExteriorDerivativeField {
            inner,
            subsets_k: increasing_subsets(n, k),
            subsets_k1: increasing_subsets(n, k + 1),
        }
    }
}

impl FormField for ExteriorDerivativeField<'_> {
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }

    fn form_degree(&self) -> usize {
        self.inner.form_degree() + 1
    }

    fn max_derivative_order(&self) -> usize {
        self.inner.max_derivative_order().saturating_sub(1)
    }

    fn components(&self, cell: usize, p: &[f64], alpha: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.subsets_k1.len()];
        for (ti, tau) in self.subsets_k1.iter().enumerate() {
            for (l, &i) in tau.iter().enumerate() {
                let mut sigma = tau.clone();
                sigma.remove(l);
                let si = self
                    .subsets_k
                    .binary_search(&sigma)
                    .expect("subset is canonical");
                let mut a = alpha.to_vec();
                a[i as usize] += 1;
                let vals = self.inner.components(cell, p, &a);
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                out[ti] += sign * vals[si];
            }
        }
        out
    }
}

/// A field that is identically zero; handy as the reference side of norms.
pub struct ZeroField {
    pub dim: usize,
    pub degree: usize,
}

impl FormField for ZeroField {
    fn ambient_dim(&self) -> usize {
        self.dim
    }
    fn form_degree(&self) -> usize {
        self.degree
    }
    fn max_derivative_order(&self) -> usize {
        usize::MAX
    }
    fn components(&self, _cell: usize, _p: &[f64], _alpha: &[usize]) -> Vec<f64> {
        vec![0.0; binomial(self.dim, self.degree)]
    }
}

/// One-dimensional factor with closed-form derivatives of all orders.
#[derive(Debug, Clone)]
pub enum Atom {
    /// `sin(freq·t + phase)`; the m-th derivative shifts the phase by m·π/2.
    Sin { freq: f64, phase: f64 },
    /// polynomial with coefficients in increasing degree
    Poly(Vec<f64>),
    /// constant 1 regardless of t
    One,
}

impl Atom {
    pub fn cos(freq: f64) -> Atom {
        Atom::Sin {
            freq,
            phase: std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn sin(freq: f64) -> Atom {
        Atom::Sin { freq, phase: 0.0 }
    }

    fn deriv(&self, order: usize, t: f64) -> f64 {
        match self {
            Atom::One => {
                if order == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Atom::Sin { freq, phase } => {
                freq.powi(order as i32)
                    * (freq * t + phase + order as f64 * std::f64::consts::FRAC_PI_2).sin()
            }
            Atom::Poly(coeffs) => {
                let mut acc = 0.0;
                for (deg, &c) in coeffs.iter().enumerate().skip(order) {
                    let mut fall = 1.0;
                    for j in 0..order {
                        fall *= (deg - j) as f64;
                    }
                    acc += c * fall * t.powi((deg - order) as i32);
                }
                acc
            }
        }
    }
}

/// Sum of separable products `coef · Π_i atom_i(x_i)`; one such sum per
/// component.
#[derive(Debug, Clone)]
pub struct SeparableField {
    pub dim: usize,
    pub degree: usize,
    /// per component: list of (coefficient, one atom per coordinate)
    pub components: Vec<Vec<(f64, Vec<Atom>)>>,
}

impl FormField for SeparableField {
    fn ambient_dim(&self) -> usize {
        self.dim
    }
    fn form_degree(&self) -> usize {
        self.degree
    }
    fn max_derivative_order(&self) -> usize {
        usize::MAX
    }
    fn components(&self, _cell: usize, p: &[f64], alpha: &[usize]) -> Vec<f64> {
        self.components
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .map(|(c, atoms)| {
                        let mut acc = *c;
                        for (i, atom) in atoms.iter().enumerate() {
                            acc *= atom.deriv(alpha[i], p[i]);
                        }
                        acc
                    })
                    .sum()
            })
            .collect()
    }
}

/// Scalar `g(y−x)·h(x+y)` in 2D, with a possibly different `g` on each side
/// of the line `y = x`. Covers fields that are smooth on each half but only
/// Lipschitz across the diagonal.
#[derive(Debug, Clone)]
pub struct DiagonalKinkScalar {
    pub g_plus: Atom,
    pub g_minus: Atom,
    pub h: Atom,
}

impl FormField for DiagonalKinkScalar {
    fn ambient_dim(&self) -> usize {
        2
    }
    fn form_degree(&self) -> usize {
        0
    }
    fn max_derivative_order(&self) -> usize {
        usize::MAX
    }
    fn components(&self, _cell: usize, p: &[f64], alpha: &[usize]) -> Vec<f64> {
        let s = p[1] - p[0];
        let t = p[0] + p[1];
        let g = if s >= 0.0 { &self.g_plus } else { &self.g_minus };
        // ∂_x = ∂_t − ∂_s, ∂_y = ∂_t + ∂_s on g(s)h(t)
        let (a, b) = (alpha[0], alpha[1]);
        let mut acc = 0.0;
        for i in 0..=a {
            for j in 0..=b {
                let sign = if (a - i) % 2 == 0 { 1.0 } else { -1.0 };
                let c = (binomial(a, i) * binomial(b, j)) as f64;
                acc += sign * c * g.deriv(a - i + b - j, s) * self.h.deriv(i + j, t);
            }
        }
        vec![acc]
    }
}

/// Scalar `g(x)·h(y)` with a different `g` on each side of `x = split`; a
/// kink on a vertical line that uniform refinements of the two-triangle
/// square never align with.
#[derive(Debug, Clone)]
pub struct VerticalKinkScalar {
    pub split: f64,
    pub g_left: Atom,
    pub g_right: Atom,
    pub h: Atom,
}

impl FormField for VerticalKinkScalar {
    fn ambient_dim(&self) -> usize {
        2
    }
    fn form_degree(&self) -> usize {
        0
    }
    fn max_derivative_order(&self) -> usize {
        usize::MAX
    }
    fn components(&self, _cell: usize, p: &[f64], alpha: &[usize]) -> Vec<f64> {
        let g = if p[0] >= self.split {
            &self.g_right
        } else {
            &self.g_left
        };
        vec![g.deriv(alpha[0], p[0] - self.split) * self.h.deriv(alpha[1], p[1])]
    }
}

/// The closed, non-exact angular 1-form around `center`:
/// `(−(y−c_y) dx + (x−c_x) dy) / |p−c|²`. Its components are the real and
/// imaginary part of `i/conj(w)` for `w = (x−c_x) + i(y−c_y)`, so every
/// derivative has a closed form.
#[derive(Debug, Clone)]
pub struct WhirlForm {
    pub center: [f64; 2],
}

impl FormField for WhirlForm {
    fn ambient_dim(&self) -> usize {
        2
    }
    fn form_degree(&self) -> usize {
        1
    }
    fn max_derivative_order(&self) -> usize {
        usize::MAX
    }
    fn components(&self, _cell: usize, p: &[f64], alpha: &[usize]) -> Vec<f64> {
        let wx = p[0] - self.center[0];
        let wy = p[1] - self.center[1];
        // f(x, y) = i / conj(w); ∂_x^a ∂_y^b f = i (−1)^{a+b} (a+b)! (−i)^b / conj(w)^{a+b+1}
        let (a, b) = (alpha[0], alpha[1]);
        let m = a + b;
        let mut fact = 1.0;
        for j in 1..=m {
            fact *= j as f64;
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        // complex arithmetic with (re, im) pairs
        let conj_w = (wx, -wy);
        let mut denom = (1.0, 0.0);
        for _ in 0..=m {
            denom = cmul(denom, conj_w);
        }
        let inv = cinv(denom);
        let mut val = cmul((0.0, sign * fact), inv); // i·(−1)^m·m! / conj(w)^{m+1}
        for _ in 0..b {
            val = cmul(val, (0.0, -1.0)); // times (−i)
        }
        vec![val.0, val.1]
    }
}

fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn cinv(a: (f64, f64)) -> (f64, f64) {
    let d = a.0 * a.0 + a.1 * a.1;
    (a.0 / d, -a.1 / d)
}

fn scalar(dim: usize, atoms: Vec<Atom>) -> SeparableField {
    SeparableField {
        dim,
        degree: 0,
        components: vec![vec![(1.0, atoms)]],
    }
}

const PI: f64 = std::f64::consts::PI;

/// Catalog of named analytic fields used by experiments and tests.
pub fn field_by_name(name: &str) -> Option<Box<dyn FormField + Send + Sync>> {
    Some(match name {
        // scalars
        "sin_scalar_2d" => Box::new(scalar(2, vec![Atom::sin(PI), Atom::sin(PI)])),
        "smooth_scalar_2d" => Box::new(scalar(2, vec![Atom::sin(PI), Atom::cos(2.0)])),
        "sin_scalar_3d" => Box::new(scalar(
            3,
            vec![Atom::sin(PI), Atom::sin(PI), Atom::sin(PI)],
        )),
        // generic smooth 1-form on the square; tangential part vanishes on y = 0
        "smooth_1form_2d" => Box::new(SeparableField {
            dim: 2,
            degree: 1,
            components: vec![
                vec![(1.0, vec![Atom::sin(PI), Atom::sin(PI)])],
                vec![(1.0, vec![Atom::cos(PI), Atom::cos(PI)])],
            ],
        }),
        // nonzero tangential trace on every boundary side
        "violating_1form_2d" => Box::new(SeparableField {
            dim: 2,
            degree: 1,
            components: vec![
                vec![(1.0, vec![Atom::One, Atom::cos(PI)])],
                vec![(0.5, vec![Atom::sin(1.0), Atom::One])],
            ],
        }),
        // d(sin(πx)·sin(2y)): closed and exact
        "closed_1form_2d" => Box::new(SeparableField {
            dim: 2,
            degree: 1,
            components: vec![
                vec![(PI, vec![Atom::cos(PI), Atom::sin(2.0)])],
                vec![(2.0, vec![Atom::sin(PI), Atom::cos(2.0)])],
            ],
        }),
        // closed but not exact on the punctured square
        "whirl_1form_2d" => Box::new(WhirlForm {
            center: [0.5, 0.5],
        }),
        // |s|-type kink along the diagonal y = x: g(s) = ±(s − s²) per side
        "kinked_scalar_2d" => Box::new(DiagonalKinkScalar {
            g_plus: Atom::Poly(vec![0.0, 1.0, -1.0]),
            g_minus: Atom::Poly(vec![0.0, -1.0, -1.0]),
            h: Atom::cos(1.0),
        }),
        // same profile but kinked along x = 0.4, never a mesh line
        "kinked_unaligned_2d" => Box::new(VerticalKinkScalar {
            split: 0.4,
            g_left: Atom::Poly(vec![0.0, -1.0, -1.0]),
            g_right: Atom::Poly(vec![0.0, 1.0, -1.0]),
            h: Atom::cos(1.0),
        }),
        "smooth_1form_3d" => Box::new(SeparableField {
            dim: 3,
            degree: 1,
            components: vec![
                vec![(1.0, vec![Atom::sin(PI), Atom::sin(PI), Atom::cos(1.0)])],
                vec![(1.0, vec![Atom::cos(1.0), Atom::sin(PI), Atom::sin(PI)])],
                vec![(1.0, vec![Atom::sin(PI), Atom::cos(1.0), Atom::sin(PI)])],
            ],
        }),
        "smooth_2form_3d" => Box::new(SeparableField {
            dim: 3,
            degree: 2,
            components: vec![
                vec![(1.0, vec![Atom::sin(PI), Atom::cos(1.0), Atom::sin(1.0)])],
                vec![(1.0, vec![Atom::cos(1.0), Atom::sin(PI), Atom::One])],
                vec![(1.0, vec![Atom::One, Atom::sin(1.0), Atom::cos(PI)])],
            ],
        }),
        _ => return None,
    })
}

pub const FIELD_NAMES: [&str; 11] = [
    "closed_1form_2d",
    "kinked_scalar_2d",
    "kinked_unaligned_2d",
    "sin_scalar_2d",
    "sin_scalar_3d",
    "smooth_1form_2d",
    "smooth_1form_3d",
    "smooth_2form_3d",
    "smooth_scalar_2d",
    "violating_1form_2d",
    "whirl_1form_2d",
];

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn finite_difference(
        f: &dyn FormField,
        p: &[f64],
        alpha_base: &[usize],
        var: usize,
        comp: usize,
    ) -> f64 {
        let h = 1e-5;
        let mut pp = p.to_vec();
        pp[var] += h;
        let mut pm = p.to_vec();
        pm[var] -= h;
        let up = f.components(0, &pp, alpha_base)[comp];
        let um = f.components(0, &pm, alpha_base)[comp];
        (up - um) / (2.0 * h)
    }

    #[test]
    fn separable_derivatives_match_finite_differences() {
        let f = field_by_name("smooth_1form_2d").unwrap();
        let p = [0.3, 0.7];
        for comp in 0..2 {
            for var in 0..2 {
                let mut alpha = vec![0, 0];
                alpha[var] = 1;
                let exact = f.components(0, &p, &alpha)[comp];
                let approx = finite_difference(f.as_ref(), &p, &[0, 0], var, comp);
                assert_relative_eq!(exact, approx, epsilon = 1e-8, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn whirl_is_closed_and_matches_finite_differences() {
        let f = WhirlForm { center: [0.5, 0.5] };
        let p = [0.9, 0.8];
        // value: (−(y−cy), x−cx)/r²
        let v = f.value(0, &p);
        let (dx, dy) = (p[0] - 0.5, p[1] - 0.5);
        let r2 = dx * dx + dy * dy;
        assert_relative_eq!(v[0], -dy / r2, epsilon = 1e-12);
        assert_relative_eq!(v[1], dx / r2, epsilon = 1e-12);
        for comp in 0..2 {
            for var in 0..2 {
                let mut alpha = vec![0, 0];
                alpha[var] = 1;
                let exact = f.components(0, &p, &alpha)[comp];
                let approx = finite_difference(&f, &p, &[0, 0], var, comp);
                assert_relative_eq!(exact, approx, epsilon = 1e-6, max_relative = 1e-6);
            }
        }
        // dω = ∂_x ω_y − ∂_y ω_x = 0
        let d = ExteriorDerivativeField::new(&f);
        let val = d.value(0, &p);
        assert!(val[0].abs() < 1e-10);
    }

    #[test]
    fn exterior_derivative_of_exact_form_vanishes() {
        let f = field_by_name("closed_1form_2d").unwrap();
        let d = ExteriorDerivativeField::new(f.as_ref());
        for p in [[0.1, 0.2], [0.8, 0.3], [0.4, 0.9]] {
            assert!(d.value(0, &p)[0].abs() < 1e-12);
        }
    }

    #[test]
    fn kinked_scalar_is_continuous_but_kinked() {
        let f = field_by_name("kinked_scalar_2d").unwrap();
        let above = f.value(0, &[0.5, 0.5 + 1e-12])[0];
        let below = f.value(0, &[0.5, 0.5 - 1e-12])[0];
        assert!((above - below).abs() < 1e-9);
        // first derivative jumps across the diagonal
        let da = f.components(0, &[0.5, 0.5 + 1e-12], &[1, 0])[0];
        let db = f.components(0, &[0.5, 0.5 - 1e-12], &[1, 0])[0];
        assert!((da - db).abs() > 0.5);
    }

    #[test]
    fn second_derivatives_match_finite_differences() {
        let f = field_by_name("smooth_scalar_2d").unwrap();
        let p = [0.35, 0.6];
        let exact = f.components(0, &p, &[1, 1])[0];
        let approx = finite_difference(f.as_ref(), &p, &[0, 1], 0, 0);
        assert_relative_eq!(exact, approx, epsilon = 1e-7, max_relative = 1e-6);
    }
}
