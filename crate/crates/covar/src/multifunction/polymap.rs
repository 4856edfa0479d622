//! Polynomial maps (componentwise degree <= 3) and convex piecewise-linear
//! functions.
//!
//! Smooth catalog nodes carry their values as explicit polynomials so that
//! the Jacobian and Hessian come from the coefficients; problem files stay
//! self-contained and no differentiation of opaque code happens anywhere.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_DEGREE: u32 = 3;

/// A single term `coeff * prod_i x_i^e_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    fn eval(&self, x: &DVector<f64>) -> f64 {
        let mut v = self.coeff;
        for (i, &e) in self.exponents.iter().enumerate() {
            for _ in 0..e {
                v *= x[i];
            }
        }
        v
    }

    /// Partial derivative with respect to coordinate `i`.
    fn diff(&self, i: usize) -> Option<Monomial> {
        let e = self.exponents[i];
        if e == 0 {
            return None;
        }
        let mut exps = self.exponents.clone();
        exps[i] = e - 1;
        Some(Monomial { coeff: self.coeff * e as f64, exponents: exps })
    }
}

/// Scalar polynomial in `input_dim` variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    pub input_dim: usize,
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(input_dim: usize, terms: Vec<Monomial>) -> Result<Self> {
        for t in &terms {
            if t.exponents.len() != input_dim {
                return Err(Error::DimensionError {
                    field: "polynomial term".into(),
                    message: format!(
                        "term has {} exponents, expected {}",
                        t.exponents.len(),
                        input_dim
                    ),
                });
            }
            if t.degree() > MAX_DEGREE {
                return Err(Error::DomainError(format!(
                    "monomial degree {} exceeds the catalog maximum {}",
                    t.degree(),
                    MAX_DEGREE
                )));
            }
        }
        Ok(Polynomial { input_dim, terms })
    }

    pub fn constant(input_dim: usize, c: f64) -> Self {
        Polynomial { input_dim, terms: vec![Monomial { coeff: c, exponents: vec![0; input_dim] }] }
    }

    pub fn linear(coeffs: &DVector<f64>, c0: f64) -> Self {
        let n = coeffs.len();
        let mut terms = vec![Monomial { coeff: c0, exponents: vec![0; n] }];
        for i in 0..n {
            if coeffs[i] != 0.0 {
                let mut e = vec![0; n];
                e[i] = 1;
                terms.push(Monomial { coeff: coeffs[i], exponents: e });
            }
        }
        Polynomial { input_dim: n, terms }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn diff(&self, i: usize) -> Polynomial {
        Polynomial {
            input_dim: self.input_dim,
            terms: self.terms.iter().filter_map(|t| t.diff(i)).collect(),
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.input_dim, |i, _| self.diff(i).eval(x))
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.input_dim, self.input_dim, |i, j| self.diff(i).diff(j).eval(x))
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.degree()).max().unwrap_or(0)
    }

    /// Quadratic form `1/2 x'Qx + r'x + c`.
    pub fn quadratic(q: &DMatrix<f64>, r: &DVector<f64>, c: f64) -> Self {
        let n = r.len();
        assert_eq!(q.nrows(), n);
        let mut terms = vec![Monomial { coeff: c, exponents: vec![0; n] }];
        for i in 0..n {
            if r[i] != 0.0 {
                let mut e = vec![0; n];
                e[i] = 1;
                terms.push(Monomial { coeff: r[i], exponents: e });
            }
        }
        for i in 0..n {
            for j in i..n {
                let coeff = if i == j { 0.5 * q[(i, i)] } else { 0.5 * (q[(i, j)] + q[(j, i)]) };
                if coeff != 0.0 {
                    let mut e = vec![0; n];
                    e[i] += 1;
                    e[j] += 1;
                    terms.push(Monomial { coeff, exponents: e });
                }
            }
        }
        Polynomial { input_dim: n, terms }
    }
}

/// Vector-valued polynomial map.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMap {
    pub input_dim: usize,
    pub components: Vec<Polynomial>,
}

impl PolyMap {
    pub fn new(components: Vec<Polynomial>) -> Result<Self> {
        let input_dim = components.first().map(|c| c.input_dim).unwrap_or(0);
        for c in &components {
            if c.input_dim != input_dim {
                return Err(Error::DimensionError {
                    field: "polynomial map".into(),
                    message: "components disagree on the input dimension".into(),
                });
            }
        }
        Ok(PolyMap { input_dim, components })
    }

    /// Affine map `x -> Ax + b`.
    pub fn affine(a: &DMatrix<f64>, b: &DVector<f64>) -> Self {
        assert_eq!(a.nrows(), b.len());
        let components = (0..a.nrows())
            .map(|i| Polynomial::linear(&a.row(i).transpose(), b[i]))
            .collect();
        PolyMap { input_dim: a.ncols(), components }
    }

    pub fn constant(input_dim: usize, v: &DVector<f64>) -> Self {
        let components = v.iter().map(|&c| Polynomial::constant(input_dim, c)).collect();
        PolyMap { input_dim, components }
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.output_dim(), |i, _| self.components[i].eval(x))
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.output_dim(), self.input_dim, |i, j| {
            self.components[i].diff(j).eval(x)
        })
    }

    pub fn degree(&self) -> u32 {
        self.components.iter().map(|c| c.degree()).max().unwrap_or(0)
    }

    /// When the map is affine, recover `(A, b)`.
    pub fn as_affine(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        if self.degree() > 1 {
            return None;
        }
        let zero = DVector::zeros(self.input_dim);
        let b = self.eval(&zero);
        let a = self.jacobian(&zero);
        Some((a, b))
    }
}

/// Convex piecewise-linear function `g(x) = max_i (a_i·x + b_i)`.
#[derive(Debug, Clone)]
pub struct CplFunction {
    pub input_dim: usize,
    pub pieces: Vec<(DVector<f64>, f64)>,
}

impl CplFunction {
    pub fn new(pieces: Vec<(DVector<f64>, f64)>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::DomainError("piecewise-linear max needs at least one piece".into()));
        }
        let input_dim = pieces[0].0.len();
        for (a, _) in &pieces {
            if a.len() != input_dim {
                return Err(Error::DimensionError {
                    field: "piecewise-linear pieces".into(),
                    message: "slope dimensions disagree".into(),
                });
            }
        }
        Ok(CplFunction { input_dim, pieces })
    }

    /// `|x|` in one variable, as max(x, -x).
    pub fn abs_1d() -> Self {
        CplFunction {
            input_dim: 1,
            pieces: vec![
                (DVector::from_column_slice(&[1.0]), 0.0),
                (DVector::from_column_slice(&[-1.0]), 0.0),
            ],
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.pieces
            .iter()
            .map(|(a, b)| a.dot(x) + b)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn active_indices(&self, x: &DVector<f64>, tolerance: f64) -> Vec<usize> {
        let v = self.eval(x);
        self.pieces
            .iter()
            .enumerate()
            .filter(|(_, (a, b))| (a.dot(x) + b - v).abs() <= tolerance)
            .map(|(i, _)| i)
            .collect()
    }

    /// Convex subdifferential `conv{a_i : i active}` as a polyhedron.
    pub fn subdifferential(&self, x: &DVector<f64>) -> crate::geometry::PolyhedralSet {
        let act = self.active_indices(x, 1e-9);
        let vertices: Vec<DVector<f64>> = act.iter().map(|&i| self.pieces[i].0.clone()).collect();
        crate::geometry::PolyhedralSet::from_vrep(
            self.input_dim,
            &crate::geometry::VRep { vertices, rays: vec![], lineality: vec![] },
        )
    }

    /// Graph of the subgradient map `x -> ∂g(x)` as a finite union of
    /// polyhedra in `(x, s)` coordinates: for each nonempty activity pattern
    /// `I`, the cell where exactly the pieces in `I` attain the max crossed
    /// with `conv{a_i : i in I}`.
    pub fn subgradient_graph_pieces(&self) -> Vec<crate::geometry::PolyhedralSet> {
        use crate::geometry::{PolyhedralSet, VRep};
        let n = self.input_dim;
        let k = self.pieces.len();
        let mut out = Vec::new();
        for mask in 1u32..(1 << k) {
            let active: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
            // Region: pieces in `active` are all equal and dominate the rest.
            let mut rows = Vec::new();
            let mut offs = Vec::new();
            let (a0, b0) = (&self.pieces[active[0]].0, self.pieces[active[0]].1);
            for &i in active.iter().skip(1) {
                let (ai, bi) = (&self.pieces[i].0, self.pieces[i].1);
                rows.push(a0 - ai);
                offs.push(bi - b0);
                rows.push(ai - a0);
                offs.push(b0 - bi);
            }
            for i in 0..k {
                if !active.contains(&i) {
                    let (ai, bi) = (&self.pieces[i].0, self.pieces[i].1);
                    rows.push(ai - a0);
                    offs.push(b0 - bi);
                }
            }
            let region = PolyhedralSet::new(n, rows, offs);
            if region.is_empty() {
                continue;
            }
            let hull = PolyhedralSet::from_vrep(
                n,
                &VRep {
                    vertices: active.iter().map(|&i| self.pieces[i].0.clone()).collect(),
                    rays: vec![],
                    lineality: vec![],
                },
            );
            out.push(region.product(&hull));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(entries: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(entries)
    }

    #[test]
    fn quadratic_gradient_and_hessian() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 4.0]);
        let p = Polynomial::quadratic(&q, &v(&[0.0, 0.0]), 0.0);
        let x = v(&[1.0, -1.0]);
        let g = p.gradient(&x);
        let expect = &q * &x;
        assert!((g - expect).norm() < 1e-12);
        assert!((p.hessian(&x) - q).norm() < 1e-12);
    }

    #[test]
    fn cubic_jacobian() {
        // f(x) = x^3, f'(2) = 12
        let p = Polynomial::new(1, vec![Monomial { coeff: 1.0, exponents: vec![3] }]).unwrap();
        assert!((p.diff(0).eval(&v(&[2.0])) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn degree_cap_enforced() {
        assert!(Polynomial::new(1, vec![Monomial { coeff: 1.0, exponents: vec![4] }]).is_err());
    }

    #[test]
    fn affine_round_trip() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = v(&[5.0, 6.0]);
        let m = PolyMap::affine(&a, &b);
        let (a2, b2) = m.as_affine().unwrap();
        assert!((a2 - a).norm() < 1e-12);
        assert!((b2 - b).norm() < 1e-12);
    }

    #[test]
    fn abs_subdifferential() {
        let g = CplFunction::abs_1d();
        let s0 = g.subdifferential(&v(&[0.0]));
        assert!(s0.contains(&v(&[-1.0]), 1e-9));
        assert!(s0.contains(&v(&[0.3]), 1e-9));
        assert!(!s0.contains(&v(&[1.1]), 1e-9));
        let s1 = g.subdifferential(&v(&[2.0]));
        assert!(s1.contains(&v(&[1.0]), 1e-9));
        assert!(!s1.contains(&v(&[0.9]), 1e-9));
    }

    #[test]
    fn abs_subgradient_graph_pieces() {
        let g = CplFunction::abs_1d();
        let pieces = g.subgradient_graph_pieces();
        // Three activity patterns: x>0, x<0, and the kink at 0.
        assert_eq!(pieces.len(), 3);
        let on_graph = |x: f64, s: f64| {
            pieces.iter().any(|p| p.contains(&v(&[x, s]), 1e-9))
        };
        assert!(on_graph(1.0, 1.0));
        assert!(on_graph(-1.0, -1.0));
        assert!(on_graph(0.0, 0.5));
        assert!(!on_graph(1.0, -1.0));
        assert!(!on_graph(0.0, 1.5));
    }
}
