//! Polyhedral convex cones.
//!
//! The inequality representation `{x : row·x <= 0}` is canonical; generators
//! are derived on demand through double description and cached. Polars swap
//! the two representations, so they are cheap once generators exist.

use nalgebra::DVector;
use once_cell::sync::OnceCell;
use std::collections::BTreeSet;

use super::dd::{self, ConeGenerators};
use crate::error::{Error, Result};
use crate::tol;

#[derive(Debug, Clone)]
pub struct PolyhedralCone {
    dim: usize,
    rows: Vec<DVector<f64>>,
    gens: OnceCell<ConeGenerators>,
}

/// A closed face of a cone, tagged with the maximal set of defining rows
/// active on it.
#[derive(Debug, Clone)]
pub struct ConeFace {
    pub cone: PolyhedralCone,
    /// Indices into the parent's irredundant row list, maximal for this face.
    pub active: BTreeSet<usize>,
    pub dim: usize,
}

impl PolyhedralCone {
    pub fn from_rows(dim: usize, rows: Vec<DVector<f64>>) -> Self {
        for r in &rows {
            assert_eq!(r.len(), dim, "row dimension mismatch");
        }
        PolyhedralCone { dim, rows, gens: OnceCell::new() }
    }

    /// Cone spanned by the given rays plus the span of `lineality`.
    pub fn from_generators(
        dim: usize,
        rays: Vec<DVector<f64>>,
        lineality: Vec<DVector<f64>>,
    ) -> Self {
        let mut unit_rays = Vec::new();
        for r in rays {
            let n = r.norm();
            if n > tol::TAU_MEM {
                unit_rays.push(r / n);
            }
        }
        let gens = ConeGenerators { dim, lineality, rays: unit_rays };
        let rows = dd::rows_from_generators(dim, &gens);
        PolyhedralCone { dim, rows, gens: OnceCell::new() }
    }

    pub fn full_space(dim: usize) -> Self {
        PolyhedralCone::from_rows(dim, Vec::new())
    }

    pub fn zero(dim: usize) -> Self {
        let mut rows = Vec::new();
        for i in 0..dim {
            let e = DVector::from_fn(dim, |j, _| if i == j { 1.0 } else { 0.0 });
            rows.push(e.clone());
            rows.push(-e);
        }
        PolyhedralCone::from_rows(dim, rows)
    }

    /// Nonnegative orthant `R^dim_+`.
    pub fn nonnegative_orthant(dim: usize) -> Self {
        let rows = (0..dim)
            .map(|i| DVector::from_fn(dim, |j, _| if i == j { -1.0 } else { 0.0 }))
            .collect();
        PolyhedralCone::from_rows(dim, rows)
    }

    /// Nonpositive orthant `R^dim_-`.
    pub fn nonpositive_orthant(dim: usize) -> Self {
        let rows = (0..dim)
            .map(|i| DVector::from_fn(dim, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
        PolyhedralCone::from_rows(dim, rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[DVector<f64>] {
        &self.rows
    }

    pub fn generators(&self) -> &ConeGenerators {
        self.gens.get_or_init(|| dd::cone_generators(self.dim, &self.rows))
    }

    pub fn contains(&self, x: &DVector<f64>, tolerance: f64) -> bool {
        let scale = x.norm().max(1.0);
        self.rows.iter().all(|r| r.dot(x) <= tolerance * scale)
    }

    pub fn is_trivial(&self) -> bool {
        self.generators().is_trivial()
    }

    pub fn is_full_space(&self) -> bool {
        self.generators().lineality.len() == self.dim
    }

    /// Linear dimension of the cone (dimension of its span).
    pub fn linear_dim(&self) -> usize {
        let g = self.generators();
        let mut vs: Vec<DVector<f64>> = g.lineality.clone();
        vs.extend(g.rays.iter().cloned());
        rank_of(&vs)
    }

    pub fn lineality_dim(&self) -> usize {
        self.generators().lineality.len()
    }

    /// Polar cone `{v : <v, k> <= 0 for all k in self}`.
    pub fn polar(&self) -> PolyhedralCone {
        let rows = self.generators().signed_generators();
        let p = PolyhedralCone::from_rows(self.dim, rows);
        // The polar's generators are exactly our irredundant rows; deriving
        // them from scratch keeps both representations canonical.
        let _ = p.generators();
        p
    }

    pub fn intersect(&self, other: &PolyhedralCone) -> PolyhedralCone {
        assert_eq!(self.dim, other.dim);
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        PolyhedralCone::from_rows(self.dim, rows)
    }

    /// Intersect with the hyperplane `{x : a·x = 0}`.
    pub fn intersect_hyperplane(&self, a: &DVector<f64>) -> PolyhedralCone {
        let mut rows = self.rows.clone();
        rows.push(a.clone());
        rows.push(-a);
        PolyhedralCone::from_rows(self.dim, rows)
    }

    pub fn negate(&self) -> PolyhedralCone {
        PolyhedralCone::from_rows(self.dim, self.rows.iter().map(|r| -r).collect())
    }

    /// Minkowski difference `self - other = self + (-other)` as a cone sum.
    pub fn minkowski_sum(&self, other: &PolyhedralCone) -> PolyhedralCone {
        assert_eq!(self.dim, other.dim);
        let g1 = self.generators();
        let g2 = other.generators();
        let mut rays = g1.rays.clone();
        rays.extend(g2.rays.iter().cloned());
        let mut lin = g1.lineality.clone();
        lin.extend(g2.lineality.iter().cloned());
        PolyhedralCone::from_generators(self.dim, rays, lin)
    }

    /// Irredundant inequality rows recovered from the generator form.
    pub fn canonical_rows(&self) -> Vec<DVector<f64>> {
        dd::rows_from_generators(self.dim, self.generators())
    }

    /// All closed faces ordered by dimension.
    ///
    /// Faces are intersections of facets; for cones with a nontrivial
    /// lineality space every face contains it, so the enumeration returns the
    /// face lattice of the pointed quotient with the lineality re-attached.
    pub fn faces(&self) -> Result<Vec<ConeFace>> {
        if self.dim > tol::FACE_DIM_CAP {
            return Err(Error::DimensionCapExceeded { dim: self.dim, cap: tol::FACE_DIM_CAP });
        }
        let rows = self.canonical_rows();
        // Pair-encoded equality rows both vanish on any face; enumerating
        // subsets of up to 2^|rows| is acceptable at the capped scale.
        if rows.len() > 20 {
            return Err(Error::DimensionCapExceeded { dim: rows.len(), cap: 20 });
        }
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        let mut out: Vec<ConeFace> = Vec::new();
        for mask in 0..(1u32 << rows.len()) {
            let mut face_rows = rows.clone();
            for (i, row) in rows.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    face_rows.push(-row);
                }
            }
            let face = PolyhedralCone::from_rows(self.dim, face_rows);
            let gens = face.generators();
            let mut all = gens.signed_generators();
            if all.is_empty() {
                all.push(DVector::zeros(self.dim));
            }
            let active: BTreeSet<usize> = (0..rows.len())
                .filter(|&i| all.iter().all(|g| rows[i].dot(g).abs() <= 1e-7))
                .collect();
            let key: Vec<usize> = active.iter().cloned().collect();
            if seen.insert(key) {
                let fdim = face.linear_dim();
                out.push(ConeFace { cone: face, active, dim: fdim });
            }
        }
        out.sort_by(|a, b| {
            a.dim.cmp(&b.dim).then_with(|| {
                a.active.iter().cloned().collect::<Vec<_>>().cmp(&b.active.iter().cloned().collect())
            })
        });
        Ok(out)
    }
}

fn rank_of(vs: &[DVector<f64>]) -> usize {
    if vs.is_empty() {
        return 0;
    }
    let dim = vs[0].len();
    let m = nalgebra::DMatrix::from_fn(vs.len(), dim, |i, j| vs[i][j]);
    m.rank(1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(entries: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(entries)
    }

    #[test]
    fn polar_of_nonnegative_orthant_is_nonpositive() {
        let k = PolyhedralCone::nonnegative_orthant(2);
        let p = k.polar();
        assert!(p.contains(&v(&[-1.0, -2.0]), 1e-9));
        assert!(!p.contains(&v(&[0.5, -1.0]), 1e-9));
    }

    #[test]
    fn polar_of_zero_is_full_space() {
        let k = PolyhedralCone::zero(3);
        let p = k.polar();
        assert!(p.is_full_space());
    }

    #[test]
    fn polar_matches_double_description_example() {
        // cone{(1,1),(1,0)} has polar cone{(0,-1),(-1,1)}.
        let k = PolyhedralCone::from_generators(2, vec![v(&[1.0, 1.0]), v(&[1.0, 0.0])], vec![]);
        let p = k.polar();
        assert!(p.contains(&v(&[0.0, -1.0]), 1e-9));
        assert!(p.contains(&v(&[-1.0, 1.0]), 1e-9));
        assert!(!p.contains(&v(&[0.1, 0.0]), 1e-9));
        let gens = p.generators();
        assert_eq!(gens.rays.len(), 2);
    }

    #[test]
    fn polar_involution() {
        let k = PolyhedralCone::from_generators(
            3,
            vec![v(&[1.0, 0.0, 0.0]), v(&[1.0, 1.0, 0.0]), v(&[0.0, 0.0, 1.0])],
            vec![],
        );
        let kk = k.polar().polar();
        for r in &k.generators().rays {
            assert!(kk.contains(r, 1e-8));
        }
        for r in &kk.generators().rays {
            assert!(k.contains(r, 1e-8));
        }
    }

    #[test]
    fn orthant_face_count() {
        let k = PolyhedralCone::nonnegative_orthant(2);
        let faces = k.faces().unwrap();
        assert_eq!(faces.len(), 4);
        assert_eq!(faces[0].dim, 0);
        assert_eq!(faces[3].dim, 2);
    }

    #[test]
    fn zero_cone_single_face() {
        let k = PolyhedralCone::zero(2);
        let faces = k.faces().unwrap();
        assert_eq!(faces.len(), 1);
        assert_eq!(faces[0].dim, 0);
    }

    #[test]
    fn faces_of_reduced_generator_cone() {
        // cone{(1,0),(1,1),(0,1)} is the nonnegative quadrant; the middle
        // generator is redundant and must not create extra faces.
        let k = PolyhedralCone::from_generators(
            2,
            vec![v(&[1.0, 0.0]), v(&[1.0, 1.0]), v(&[0.0, 1.0])],
            vec![],
        );
        let faces = k.faces().unwrap();
        assert_eq!(faces.len(), 4);
    }

    #[test]
    fn halfplane_faces_contain_lineality() {
        // {x : x1 <= 0} in R^2: faces are the boundary line and the halfplane.
        let k = PolyhedralCone::from_rows(2, vec![v(&[1.0, 0.0])]);
        let faces = k.faces().unwrap();
        assert_eq!(faces.len(), 2);
        assert_eq!(faces[0].dim, 1);
        assert_eq!(faces[1].dim, 2);
    }
}
