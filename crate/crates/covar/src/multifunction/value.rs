//! Set values produced by evaluating multifunction nodes: finite unions of
//! convex polyhedra (points, boxes, polytopes, and cones are all special
//! cases).

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{set_excess, PolyhedralSet, VRep};
use crate::tol;

#[derive(Debug, Clone)]
pub struct SetValue {
    dim: usize,
    pieces: Vec<PolyhedralSet>,
    /// Exact representative when the value is a known singleton; avoids
    /// round-tripping points through the generator conversion.
    exact_point: Option<DVector<f64>>,
}

impl SetValue {
    pub fn new(dim: usize, pieces: Vec<PolyhedralSet>) -> Self {
        let pieces = pieces.into_iter().filter(|p| !p.is_empty()).collect();
        SetValue { dim, pieces, exact_point: None }
    }

    pub fn empty(dim: usize) -> Self {
        SetValue { dim, pieces: vec![], exact_point: None }
    }

    pub fn point(p: &DVector<f64>) -> Self {
        SetValue {
            dim: p.len(),
            pieces: vec![PolyhedralSet::singleton(p)],
            exact_point: Some(p.clone()),
        }
    }

    pub fn box_value(lo: &DVector<f64>, hi: &DVector<f64>) -> Self {
        let exact_point =
            if (hi - lo).norm() <= 1e-15 { Some(lo.clone()) } else { None };
        SetValue { dim: lo.len(), pieces: vec![PolyhedralSet::box_set(lo, hi)], exact_point }
    }

    pub fn from_set(p: PolyhedralSet) -> Self {
        SetValue::new(p.dim(), vec![p])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> &[PolyhedralSet] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn is_singleton(&self) -> Option<DVector<f64>> {
        if let Some(p) = &self.exact_point {
            return Some(p.clone());
        }
        if self.pieces.is_empty() || !self.is_bounded() {
            return None;
        }
        let verts = self.vertices();
        if verts.len() == 1 {
            Some(verts[0].clone())
        } else {
            None
        }
    }

    pub fn contains(&self, y: &DVector<f64>, tolerance: f64) -> bool {
        if let Some(p) = &self.exact_point {
            return (y - p).norm() <= tolerance;
        }
        self.pieces.iter().any(|p| p.contains(y, tolerance))
    }

    pub fn distance(&self, y: &DVector<f64>) -> Result<f64> {
        if let Some(p) = &self.exact_point {
            return Ok((y - p).norm());
        }
        if self.pieces.is_empty() {
            return Err(Error::EmptySet("distance to an empty value".into()));
        }
        let mut best = f64::INFINITY;
        for p in &self.pieces {
            best = best.min(p.distance(y)?);
        }
        Ok(best)
    }

    pub fn is_bounded(&self) -> bool {
        self.pieces.iter().all(|p| p.is_bounded())
    }

    /// All vertices across pieces.
    pub fn vertices(&self) -> Vec<DVector<f64>> {
        if let Some(p) = &self.exact_point {
            return vec![p.clone()];
        }
        let mut out = Vec::new();
        for p in &self.pieces {
            for v in p.vertices() {
                if !out.iter().any(|o: &DVector<f64>| (o - v).norm() <= 1e-9) {
                    out.push(v.clone());
                }
            }
        }
        crate::geometry::dd::sort_vectors(&mut out);
        out
    }

    /// `sup{‖y‖ : y ∈ value}`; infinite for unbounded values.
    pub fn sup_norm(&self) -> f64 {
        if let Some(p) = &self.exact_point {
            return p.norm();
        }
        if self.pieces.is_empty() {
            return 0.0;
        }
        if !self.is_bounded() {
            return f64::INFINITY;
        }
        self.vertices().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn minkowski_sum(&self, other: &SetValue) -> SetValue {
        assert_eq!(self.dim, other.dim);
        if self.is_empty() || other.is_empty() {
            return SetValue::empty(self.dim);
        }
        if let Some(p) = &other.exact_point {
            return self.translate(p);
        }
        if let Some(p) = &self.exact_point {
            return other.translate(p);
        }
        let mut pieces = Vec::new();
        for a in &self.pieces {
            for b in &other.pieces {
                pieces.push(a.minkowski_sum(b));
            }
        }
        SetValue::new(self.dim, pieces)
    }

    pub fn scale(&self, lambda: f64) -> SetValue {
        let mut out = SetValue::new(self.dim, self.pieces.iter().map(|p| p.scale(lambda)).collect());
        out.exact_point = self.exact_point.as_ref().map(|p| p * lambda);
        out
    }

    pub fn negate(&self) -> SetValue {
        self.scale(-1.0)
    }

    pub fn translate(&self, v: &DVector<f64>) -> SetValue {
        let mut out =
            SetValue::new(self.dim, self.pieces.iter().map(|p| p.translate(v)).collect());
        out.exact_point = self.exact_point.as_ref().map(|p| p + v);
        out
    }

    pub fn intersect(&self, other: &SetValue) -> SetValue {
        assert_eq!(self.dim, other.dim);
        if let Some(p) = &self.exact_point {
            return if other.contains(p, crate::tol::TAU_MEM) {
                self.clone()
            } else {
                SetValue::empty(self.dim)
            };
        }
        if let Some(p) = &other.exact_point {
            return if self.contains(p, crate::tol::TAU_MEM) {
                other.clone()
            } else {
                SetValue::empty(self.dim)
            };
        }
        let mut pieces = Vec::new();
        for a in &self.pieces {
            for b in &other.pieces {
                pieces.push(a.intersect(b));
            }
        }
        SetValue::new(self.dim, pieces)
    }

    pub fn intersect_set(&self, other: &PolyhedralSet) -> SetValue {
        SetValue::new(self.dim, self.pieces.iter().map(|p| p.intersect(other)).collect())
    }

    pub fn union(&self, other: &SetValue) -> SetValue {
        assert_eq!(self.dim, other.dim);
        let mut pieces = self.pieces.clone();
        pieces.extend(other.pieces.iter().cloned());
        SetValue::new(self.dim, pieces)
    }

    /// Excess `e(self, other) = sup_{s ∈ self} dist(s, other)`.
    pub fn excess_over(&self, other: &SetValue) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptySet("excess of an empty value".into()));
        }
        if other.is_empty() {
            return Ok(f64::INFINITY);
        }
        if let Some(p) = &self.exact_point {
            return other.distance(p);
        }
        let mut worst: f64 = 0.0;
        for a in &self.pieces {
            if other.pieces.len() == 1 {
                worst = worst.max(set_excess(a, &other.pieces[0])?);
            } else {
                if !a.is_bounded() {
                    return Err(Error::Unbounded("excess requires a bounded first argument".into()));
                }
                for vtx in a.vertices() {
                    worst = worst.max(other.distance(vtx)?);
                }
            }
        }
        Ok(worst)
    }

    /// Representative points of every face of every piece (relative
    /// interiors), used to enumerate the finitely many coderivative
    /// configurations of a polyhedral value.
    pub fn face_representatives(&self) -> Result<Vec<DVector<f64>>> {
        let mut out: Vec<DVector<f64>> = Vec::new();
        for p in &self.pieces {
            for f in p.faces()? {
                if !out.iter().any(|o| (o - &f.relint_point).norm() <= 1e-9) {
                    out.push(f.relint_point.clone());
                }
            }
        }
        crate::geometry::dd::sort_vectors(&mut out);
        Ok(out)
    }

    /// Membership residual, `<= 0` within tolerance means membership.
    pub fn residual(&self, y: &DVector<f64>) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.residual(y))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_membership(&self, y: &DVector<f64>) -> Result<()> {
        if self.contains(y, tol::TAU_MEM * 10.0) {
            Ok(())
        } else {
            let d = self.distance(y).unwrap_or(f64::INFINITY);
            Err(Error::OffGraph(d))
        }
    }

    /// Bounding box radius around a center, infinite when unbounded.
    pub fn radius_about(&self, center: &DVector<f64>) -> f64 {
        if !self.is_bounded() {
            return f64::INFINITY;
        }
        self.vertices().iter().map(|v| (v - center).norm()).fold(0.0, f64::max)
    }

    pub fn from_vertices(dim: usize, vertices: Vec<DVector<f64>>) -> Self {
        SetValue::from_set(PolyhedralSet::from_vrep(
            dim,
            &VRep { vertices, rays: vec![], lineality: vec![] },
        ))
    }
}
