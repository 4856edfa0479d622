//! Inequality-represented convex polyhedra `{z : A z <= b}`.
//!
//! The generator (vertex/ray/lineality) form is derived on demand through
//! homogenization and cached. Distances are exact Euclidean projections
//! computed by active-set enumeration, which is affordable at desk scale and
//! avoids an iterative QP solver.

use nalgebra::{DMatrix, DVector};
use once_cell::sync::OnceCell;
use std::collections::BTreeSet;

use super::dd::{self, lex_cmp, ConeGenerators};
use crate::error::{Error, Result};
use crate::tol;

/// Generator form of a polyhedron.
#[derive(Debug, Clone, Default)]
pub struct VRep {
    pub vertices: Vec<DVector<f64>>,
    pub rays: Vec<DVector<f64>>,
    pub lineality: Vec<DVector<f64>>,
}

impl VRep {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_bounded(&self) -> bool {
        self.rays.is_empty() && self.lineality.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct PolyhedralSet {
    dim: usize,
    rows: Vec<DVector<f64>>,
    offsets: Vec<f64>,
    vrep: OnceCell<VRep>,
}

/// A closed face of a polyhedron with its maximal active row set and a
/// relative-interior representative.
#[derive(Debug, Clone)]
pub struct SetFace {
    pub set: PolyhedralSet,
    pub active: BTreeSet<usize>,
    pub relint_point: DVector<f64>,
    pub dim: usize,
}

impl PolyhedralSet {
    pub fn new(dim: usize, rows: Vec<DVector<f64>>, offsets: Vec<f64>) -> Self {
        assert_eq!(rows.len(), offsets.len(), "row/offset count mismatch");
        let mut nrows = Vec::new();
        let mut noffs = Vec::new();
        for (r, &b) in rows.iter().zip(offsets.iter()) {
            assert_eq!(r.len(), dim, "row dimension mismatch");
            let n = r.norm();
            if n <= tol::TAU_MEM {
                // 0·z <= b: trivially true or an explicit empty marker.
                if b < -tol::TAU_MEM {
                    return Self::empty(dim);
                }
                continue;
            }
            let scaled = r / n;
            let bs = b / n;
            let dup = nrows
                .iter()
                .zip(noffs.iter())
                .any(|(rr, bb): (&DVector<f64>, &f64)| (rr - &scaled).norm() <= 1e-12 && (bb - bs).abs() <= 1e-12);
            if !dup {
                nrows.push(scaled);
                noffs.push(bs);
            }
        }
        PolyhedralSet { dim, rows: nrows, offsets: noffs, vrep: OnceCell::new() }
    }

    pub fn from_matrix(a: &DMatrix<f64>, b: &DVector<f64>) -> Self {
        assert_eq!(a.nrows(), b.len());
        let rows = (0..a.nrows()).map(|i| a.row(i).transpose()).collect();
        PolyhedralSet::new(a.ncols(), rows, b.iter().cloned().collect())
    }

    pub fn full_space(dim: usize) -> Self {
        PolyhedralSet::new(dim, Vec::new(), Vec::new())
    }

    pub fn empty(dim: usize) -> Self {
        let mut s =
            PolyhedralSet { dim, rows: Vec::new(), offsets: Vec::new(), vrep: OnceCell::new() };
        s.rows.push(DVector::zeros(dim));
        s.offsets.push(-1.0);
        s
    }

    pub fn singleton(p: &DVector<f64>) -> Self {
        let dim = p.len();
        let mut rows = Vec::new();
        let mut offs = Vec::new();
        for i in 0..dim {
            let e = DVector::from_fn(dim, |j, _| if i == j { 1.0 } else { 0.0 });
            rows.push(e.clone());
            offs.push(p[i]);
            rows.push(-e);
            offs.push(-p[i]);
        }
        PolyhedralSet::new(dim, rows, offs)
    }

    pub fn box_set(lo: &DVector<f64>, hi: &DVector<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        let dim = lo.len();
        let mut rows = Vec::new();
        let mut offs = Vec::new();
        for i in 0..dim {
            let e = DVector::from_fn(dim, |j, _| if i == j { 1.0 } else { 0.0 });
            rows.push(e.clone());
            offs.push(hi[i]);
            rows.push(-e);
            offs.push(-lo[i]);
        }
        PolyhedralSet::new(dim, rows, offs)
    }

    /// `{z : z_i <= 0}` for every coordinate.
    pub fn nonpositive_orthant(dim: usize) -> Self {
        let rows: Vec<DVector<f64>> = (0..dim)
            .map(|i| DVector::from_fn(dim, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
        PolyhedralSet::new(dim, rows, vec![0.0; dim])
    }

    pub fn from_cone(cone: &super::cone::PolyhedralCone) -> Self {
        PolyhedralSet::new(
            cone.dim(),
            cone.rows().to_vec(),
            vec![0.0; cone.rows().len()],
        )
    }

    pub fn from_vrep(dim: usize, vrep: &VRep) -> Self {
        if vrep.vertices.is_empty() {
            return Self::empty(dim);
        }
        // Homogenize with the scale coordinate last.
        let mut rays = Vec::new();
        for v in &vrep.vertices {
            rays.push(lift(v, 1.0));
        }
        for r in &vrep.rays {
            rays.push(lift(r, 0.0));
        }
        let lin: Vec<DVector<f64>> = vrep.lineality.iter().map(|l| lift(l, 0.0)).collect();
        let gens = ConeGenerators { dim: dim + 1, lineality: lin, rays };
        let hrows = dd::rows_from_generators(dim + 1, &gens);
        let mut rows = Vec::new();
        let mut offs = Vec::new();
        for hr in hrows {
            let a = DVector::from_fn(dim, |i, _| hr[i]);
            let beta = hr[dim];
            if a.norm() <= tol::TAU_MEM {
                continue; // the inequality t >= 0 itself
            }
            rows.push(a);
            offs.push(-beta);
        }
        PolyhedralSet::new(dim, rows, offs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[DVector<f64>] {
        &self.rows
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Largest constraint violation at `z` (`<= 0` means membership).
    pub fn residual(&self, z: &DVector<f64>) -> f64 {
        self.rows
            .iter()
            .zip(self.offsets.iter())
            .map(|(r, &b)| r.dot(z) - b)
            .fold(f64::NEG_INFINITY, f64::max)
            .max(f64::NEG_INFINITY)
    }

    pub fn contains(&self, z: &DVector<f64>, tolerance: f64) -> bool {
        if self.rows.is_empty() {
            return true;
        }
        self.residual(z) <= tolerance
    }

    pub fn vrep(&self) -> &VRep {
        self.vrep.get_or_init(|| {
            let mut hom_rows: Vec<DVector<f64>> = Vec::new();
            for (r, &b) in self.rows.iter().zip(self.offsets.iter()) {
                let mut h = DVector::zeros(self.dim + 1);
                for i in 0..self.dim {
                    h[i] = r[i];
                }
                h[self.dim] = -b;
                hom_rows.push(h);
            }
            let mut t_row = DVector::zeros(self.dim + 1);
            t_row[self.dim] = -1.0;
            hom_rows.push(t_row);
            let gens = dd::cone_generators(self.dim + 1, &hom_rows);
            let mut vertices = Vec::new();
            let mut rays = Vec::new();
            for g in &gens.rays {
                let t = g[self.dim];
                if t > 1e-9 {
                    vertices.push(DVector::from_fn(self.dim, |i, _| g[i] / t));
                } else {
                    let r = DVector::from_fn(self.dim, |i, _| g[i]);
                    if r.norm() > tol::TAU_MEM {
                        rays.push(r.normalize());
                    }
                }
            }
            let lineality: Vec<DVector<f64>> = gens
                .lineality
                .iter()
                .map(|l| DVector::from_fn(self.dim, |i, _| l[i]))
                .filter(|l| l.norm() > tol::TAU_MEM)
                .collect();
            dd::sort_vectors(&mut vertices);
            dd::sort_vectors(&mut rays);
            VRep { vertices, rays, lineality }
        })
    }

    pub fn is_empty(&self) -> bool {
        self.vrep().is_empty()
    }

    pub fn is_bounded(&self) -> bool {
        self.vrep().is_bounded()
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vrep().vertices
    }

    /// A point of the relative interior: vertex centroid pushed along rays.
    pub fn relint_point(&self) -> Option<DVector<f64>> {
        let v = self.vrep();
        if v.vertices.is_empty() {
            return None;
        }
        let mut p = DVector::zeros(self.dim);
        for vert in &v.vertices {
            p += vert;
        }
        p /= v.vertices.len() as f64;
        for r in &v.rays {
            p += r * 0.5;
        }
        Some(p)
    }

    pub fn intersect(&self, other: &PolyhedralSet) -> PolyhedralSet {
        assert_eq!(self.dim, other.dim);
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        let mut offs = self.offsets.clone();
        offs.extend(other.offsets.iter().cloned());
        PolyhedralSet::new(self.dim, rows, offs)
    }

    pub fn translate(&self, v: &DVector<f64>) -> PolyhedralSet {
        let offs = self
            .offsets
            .iter()
            .zip(self.rows.iter())
            .map(|(&b, r)| b + r.dot(v))
            .collect();
        PolyhedralSet::new(self.dim, self.rows.clone(), offs)
    }

    pub fn scale(&self, lambda: f64) -> PolyhedralSet {
        if lambda == 0.0 {
            return PolyhedralSet::singleton(&DVector::zeros(self.dim));
        }
        let rows = self.rows.iter().map(|r| r / lambda).collect();
        PolyhedralSet::new(self.dim, rows, self.offsets.clone())
    }

    pub fn negate(&self) -> PolyhedralSet {
        self.scale(-1.0)
    }

    pub fn minkowski_sum(&self, other: &PolyhedralSet) -> PolyhedralSet {
        assert_eq!(self.dim, other.dim);
        let v1 = self.vrep();
        let v2 = other.vrep();
        if v1.is_empty() || v2.is_empty() {
            return PolyhedralSet::empty(self.dim);
        }
        let mut vertices = Vec::new();
        for a in &v1.vertices {
            for b in &v2.vertices {
                vertices.push(a + b);
            }
        }
        let mut rays = v1.rays.clone();
        rays.extend(v2.rays.iter().cloned());
        let mut lineality = v1.lineality.clone();
        lineality.extend(v2.lineality.iter().cloned());
        PolyhedralSet::from_vrep(self.dim, &VRep { vertices, rays, lineality })
    }

    /// Image under the coordinate projection keeping `coords` (in order).
    pub fn project(&self, coords: &[usize]) -> PolyhedralSet {
        let v = self.vrep();
        if v.is_empty() {
            return PolyhedralSet::empty(coords.len());
        }
        let pick = |x: &DVector<f64>| DVector::from_fn(coords.len(), |i, _| x[coords[i]]);
        let vr = VRep {
            vertices: v.vertices.iter().map(pick).collect(),
            rays: v.rays.iter().map(pick).filter(|r| r.norm() > tol::TAU_MEM).collect(),
            lineality: v.lineality.iter().map(pick).filter(|l| l.norm() > tol::TAU_MEM).collect(),
        };
        PolyhedralSet::from_vrep(coords.len(), &vr)
    }

    /// Image under a linear map `z -> M z`.
    pub fn linear_image(&self, m: &DMatrix<f64>) -> PolyhedralSet {
        assert_eq!(m.ncols(), self.dim);
        let v = self.vrep();
        if v.is_empty() {
            return PolyhedralSet::empty(m.nrows());
        }
        let map = |x: &DVector<f64>| m * x;
        let vr = VRep {
            vertices: v.vertices.iter().map(map).collect(),
            rays: v.rays.iter().map(map).filter(|r| r.norm() > tol::TAU_MEM).collect(),
            lineality: v.lineality.iter().map(map).filter(|l| l.norm() > tol::TAU_MEM).collect(),
        };
        PolyhedralSet::from_vrep(m.nrows(), &vr)
    }

    /// Fix the coordinates listed in `idx` to `values`, producing the slice
    /// polyhedron over the remaining (free) coordinates in their original
    /// order.
    pub fn fix_coords(&self, idx: &[usize], values: &DVector<f64>) -> PolyhedralSet {
        assert_eq!(idx.len(), values.len());
        let fixed: BTreeSet<usize> = idx.iter().cloned().collect();
        let free: Vec<usize> = (0..self.dim).filter(|i| !fixed.contains(i)).collect();
        let mut rows = Vec::new();
        let mut offs = Vec::new();
        for (r, &b) in self.rows.iter().zip(self.offsets.iter()) {
            let mut shift = 0.0;
            for (k, &i) in idx.iter().enumerate() {
                shift += r[i] * values[k];
            }
            rows.push(DVector::from_fn(free.len(), |i, _| r[free[i]]));
            offs.push(b - shift);
        }
        PolyhedralSet::new(free.len(), rows, offs)
    }

    /// Euclidean distance and the (unique) projection point.
    ///
    /// Enumerates full-rank active subsets and certifies the projection by
    /// its KKT system; exact up to linear-solve accuracy.
    pub fn project_point(&self, p: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        if self.contains(p, tol::TAU_MEM) {
            return Ok((0.0, p.clone()));
        }
        if self.is_empty() {
            return Err(Error::EmptySet("distance to an empty set".into()));
        }
        let m = self.rows.len();
        let d = self.dim;
        if m > 26 {
            return Err(Error::DimensionCapExceeded { dim: m, cap: 26 });
        }
        let mut best: Option<(f64, DVector<f64>)> = None;
        let mut stack: Vec<Vec<usize>> = vec![vec![]];
        // Enumerate subsets of size <= d in lexicographic order.
        while let Some(subset) = stack.pop() {
            if let Some(cand) = self.kkt_candidate(p, &subset) {
                let dist = (p - &cand).norm();
                match &best {
                    Some((bd, _)) if *bd <= dist + 1e-12 => {}
                    _ => best = Some((dist, cand)),
                }
            }
            if subset.len() < d {
                let start = subset.last().map(|&i| i + 1).unwrap_or(0);
                for nxt in start..m {
                    let mut s = subset.clone();
                    s.push(nxt);
                    stack.push(s);
                }
            }
        }
        best.ok_or_else(|| Error::EmptySet("no KKT-certified projection found".into()))
    }

    fn kkt_candidate(&self, p: &DVector<f64>, subset: &[usize]) -> Option<DVector<f64>> {
        let k = subset.len();
        if k == 0 {
            return None; // unconstrained case handled by the membership fast path
        }
        let a = DMatrix::from_fn(k, self.dim, |i, j| self.rows[subset[i]][j]);
        let b = DVector::from_fn(k, |i, _| self.offsets[subset[i]]);
        let gram = &a * a.transpose();
        let rhs = &a * p - b;
        let chol = gram.clone().cholesky();
        let lambda = match chol {
            Some(c) => c.solve(&rhs),
            None => return None, // rank-deficient subset; a full-rank one certifies the same face
        };
        if lambda.iter().any(|&l| l < -1e-9) {
            return None;
        }
        let z = p - a.transpose() * &lambda;
        if self.contains(&z, 1e-7) {
            Some(z)
        } else {
            None
        }
    }

    pub fn distance(&self, p: &DVector<f64>) -> Result<f64> {
        Ok(self.project_point(p)?.0)
    }

    /// All closed faces with relative-interior representatives.
    pub fn faces(&self) -> Result<Vec<SetFace>> {
        if self.dim > tol::FACE_DIM_CAP {
            return Err(Error::DimensionCapExceeded { dim: self.dim, cap: tol::FACE_DIM_CAP });
        }
        if self.is_empty() {
            return Ok(Vec::new());
        }
        let rows = &self.rows;
        if rows.len() > 20 {
            return Err(Error::DimensionCapExceeded { dim: rows.len(), cap: 20 });
        }
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        let mut out = Vec::new();
        for mask in 0..(1u32 << rows.len()) {
            let mut frows = rows.clone();
            let mut foffs = self.offsets.clone();
            for i in 0..rows.len() {
                if mask & (1 << i) != 0 {
                    frows.push(-&rows[i]);
                    foffs.push(-self.offsets[i]);
                }
            }
            let face = PolyhedralSet::new(self.dim, frows, foffs);
            let Some(rp) = face.relint_point() else { continue };
            let active: BTreeSet<usize> = (0..rows.len())
                .filter(|&i| {
                    face.vrep().vertices.iter().all(|v| (rows[i].dot(v) - self.offsets[i]).abs() <= 1e-7)
                        && face.vrep().rays.iter().all(|r| rows[i].dot(r).abs() <= 1e-7)
                        && face.vrep().lineality.iter().all(|l| rows[i].dot(l).abs() <= 1e-7)
                })
                .collect();
            let key: Vec<usize> = active.iter().cloned().collect();
            if seen.insert(key) {
                let fdim = affine_dim(face.vrep());
                out.push(SetFace { set: face, active, relint_point: rp, dim: fdim });
            }
        }
        out.sort_by(|a, b| {
            a.dim.cmp(&b.dim).then_with(|| lex_cmp(&a.relint_point, &b.relint_point))
        });
        Ok(out)
    }

    /// Cartesian product: `self x other`.
    pub fn product(&self, other: &PolyhedralSet) -> PolyhedralSet {
        let dim = self.dim + other.dim;
        let mut rows = Vec::new();
        let mut offs = Vec::new();
        for (r, &b) in self.rows.iter().zip(self.offsets.iter()) {
            let mut row = DVector::zeros(dim);
            for i in 0..self.dim {
                row[i] = r[i];
            }
            rows.push(row);
            offs.push(b);
        }
        for (r, &b) in other.rows.iter().zip(other.offsets.iter()) {
            let mut row = DVector::zeros(dim);
            for i in 0..other.dim {
                row[self.dim + i] = r[i];
            }
            rows.push(row);
            offs.push(b);
        }
        PolyhedralSet::new(dim, rows, offs)
    }
}

fn affine_dim(vrep: &VRep) -> usize {
    if vrep.vertices.is_empty() {
        return 0;
    }
    let base = &vrep.vertices[0];
    let mut dirs: Vec<DVector<f64>> = vrep.vertices.iter().skip(1).map(|v| v - base).collect();
    dirs.extend(vrep.rays.iter().cloned());
    dirs.extend(vrep.lineality.iter().cloned());
    if dirs.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(dirs.len(), base.len(), |i, j| dirs[i][j]);
    m.rank(1e-9)
}

fn lift(v: &DVector<f64>, t: f64) -> DVector<f64> {
    let mut out = DVector::zeros(v.len() + 1);
    for i in 0..v.len() {
        out[i] = v[i];
    }
    out[v.len()] = t;
    out
}

/// Excess `e(S1, S2) = sup_{s in S1} dist(s, S2)`, exact over vertices.
pub fn set_excess(s1: &PolyhedralSet, s2: &PolyhedralSet) -> Result<f64> {
    let v1 = s1.vrep();
    if v1.is_empty() {
        return Err(Error::EmptySet("excess of an empty set".into()));
    }
    if !v1.is_bounded() {
        return Err(Error::Unbounded("excess requires a bounded first argument".into()));
    }
    let mut worst: f64 = 0.0;
    for v in &v1.vertices {
        worst = worst.max(s2.distance(v)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(entries: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(entries)
    }

    #[test]
    fn unit_box_vertices() {
        let b = PolyhedralSet::box_set(&v(&[0.0, 0.0]), &v(&[1.0, 1.0]));
        let vr = b.vrep();
        assert_eq!(vr.vertices.len(), 4);
        assert!(vr.is_bounded());
    }

    #[test]
    fn empty_set_detected() {
        let s = PolyhedralSet::new(1, vec![v(&[1.0]), v(&[-1.0])], vec![0.0, -1.0]);
        assert!(s.is_empty());
    }

    #[test]
    fn distance_to_nonpositive_orthant() {
        let c = PolyhedralSet::nonpositive_orthant(2);
        let (d, proj) = c.project_point(&v(&[1.0, 1.0])).unwrap();
        assert!((d - 2.0_f64.sqrt()).abs() < 1e-9);
        assert!(proj.norm() < 1e-9);
    }

    #[test]
    fn distance_inside_is_zero() {
        let c = PolyhedralSet::nonpositive_orthant(2);
        assert_eq!(c.distance(&v(&[-0.5, -0.2])).unwrap(), 0.0);
    }

    #[test]
    fn projection_onto_affine_face() {
        // Simplex {z >= 0, z1 + z2 <= 1}; project (1,1) onto it.
        let s = PolyhedralSet::new(
            2,
            vec![v(&[-1.0, 0.0]), v(&[0.0, -1.0]), v(&[1.0, 1.0])],
            vec![0.0, 0.0, 1.0],
        );
        let (d, p) = s.project_point(&v(&[1.0, 1.0])).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-9 && (p[1] - 0.5).abs() < 1e-9);
        assert!((d - (0.5_f64).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn interval_excess() {
        let a = PolyhedralSet::box_set(&v(&[0.0]), &v(&[2.0]));
        let b = PolyhedralSet::box_set(&v(&[0.0]), &v(&[1.0]));
        assert!((set_excess(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        assert!(set_excess(&a, &a).unwrap() < 1e-12);
    }

    #[test]
    fn minkowski_sum_of_intervals() {
        let a = PolyhedralSet::box_set(&v(&[0.0]), &v(&[1.0]));
        let b = PolyhedralSet::box_set(&v(&[1.0]), &v(&[2.0]));
        let s = a.minkowski_sum(&b);
        assert!(s.contains(&v(&[1.0]), 1e-9));
        assert!(s.contains(&v(&[3.0]), 1e-9));
        assert!(!s.contains(&v(&[0.9]), 1e-9));
        assert!(!s.contains(&v(&[3.1]), 1e-9));
    }

    #[test]
    fn vrep_roundtrip_triangle() {
        let s = PolyhedralSet::new(
            2,
            vec![v(&[-1.0, 0.0]), v(&[0.0, -1.0]), v(&[1.0, 1.0])],
            vec![0.0, 0.0, 1.0],
        );
        let back = PolyhedralSet::from_vrep(2, s.vrep());
        for p in [v(&[0.0, 0.0]), v(&[0.3, 0.3]), v(&[1.0, 0.0])] {
            assert_eq!(s.contains(&p, 1e-9), back.contains(&p, 1e-9));
        }
        assert!(!back.contains(&v(&[0.6, 0.6]), 1e-9));
    }

    #[test]
    fn projection_of_product() {
        let a = PolyhedralSet::box_set(&v(&[0.0]), &v(&[1.0]));
        let b = PolyhedralSet::box_set(&v(&[2.0]), &v(&[3.0]));
        let prod = a.product(&b);
        let pr = prod.project(&[1]);
        assert!(pr.contains(&v(&[2.5]), 1e-9));
        assert!(!pr.contains(&v(&[1.5]), 1e-9));
    }

    #[test]
    fn faces_of_interval() {
        let s = PolyhedralSet::box_set(&v(&[0.0]), &v(&[1.0]));
        let faces = s.faces().unwrap();
        // Two endpoints and the interval itself.
        assert_eq!(faces.len(), 3);
        assert_eq!(faces.iter().filter(|f| f.dim == 0).count(), 2);
    }

    #[test]
    fn unbounded_vrep_has_rays() {
        let s = PolyhedralSet::new(2, vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])], vec![0.0, 0.0]);
        let vr = s.vrep();
        assert_eq!(vr.vertices.len(), 1);
        assert!(!vr.is_bounded());
    }
}
