//! Normal cones, critical cones, and the coderivative of polyhedral
//! normal-cone maps.
//!
//! For a convex polyhedron the regular and limiting normal cones coincide and
//! equal the conic hull of the active constraint rows. The coderivative of
//! the map `z -> N(z; C)` at a graph point `(z, v)` is assembled from ordered
//! face pairs `F2 ⊆ F1` of the critical cone `T_C(z) ∩ v^⊥`: its value at `u`
//! is the union of the polars `(F1 - F2)°` over the pairs with `-u ∈ F1 - F2`.
//!
//! The module also computes limiting normal cones to finite unions of convex
//! polyhedra by stratifying the local tangent arrangement; this is the exact
//! construction behind piecewise-linear graphs.

use nalgebra::DVector;

use super::cone::PolyhedralCone;
use super::dd::DDState;
use super::set::PolyhedralSet;
use crate::error::{Error, Result};
use crate::tol;

/// Limiting normal cone to a convex polyhedron at a member point.
pub fn normal_cone(c: &PolyhedralSet, z: &DVector<f64>) -> Result<PolyhedralCone> {
    if c.is_empty() {
        return Err(Error::EmptySet("normal cone of an empty set".into()));
    }
    let res = c.residual(z);
    if res > tol::TAU_MEM {
        return Err(Error::PointNotInSet { dist: res, tol: tol::TAU_MEM });
    }
    let active: Vec<DVector<f64>> = c
        .rows()
        .iter()
        .zip(c.offsets().iter())
        .filter(|(r, &b)| (r.dot(z) - b).abs() <= tol::TAU_MEM.max(1e-9 * b.abs().max(1.0)))
        .map(|(r, _)| r.clone())
        .collect();
    Ok(PolyhedralCone::from_generators(c.dim(), active, Vec::new()))
}

/// Tangent cone to a convex polyhedron at a member point.
pub fn tangent_cone(c: &PolyhedralSet, z: &DVector<f64>) -> Result<PolyhedralCone> {
    let res = c.residual(z);
    if res > tol::TAU_MEM {
        return Err(Error::PointNotInSet { dist: res, tol: tol::TAU_MEM });
    }
    let active: Vec<DVector<f64>> = c
        .rows()
        .iter()
        .zip(c.offsets().iter())
        .filter(|(r, &b)| (r.dot(z) - b).abs() <= tol::TAU_MEM.max(1e-9 * b.abs().max(1.0)))
        .map(|(r, _)| r.clone())
        .collect();
    Ok(PolyhedralCone::from_rows(c.dim(), active))
}

/// Critical cone `T_C(z) ∩ v^⊥` for a normal pair `(z, v)`.
pub fn critical_cone(
    c: &PolyhedralSet,
    z: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<PolyhedralCone> {
    let n = normal_cone(c, z)?;
    if !n.contains(v, 1e-7) {
        let proj = PolyhedralSet::from_cone(&n).distance(v).unwrap_or(f64::INFINITY);
        return Err(Error::NotANormalPair(proj));
    }
    Ok(tangent_cone(c, z)?.intersect_hyperplane(v))
}

/// One admissible face pair of a critical cone with the resulting
/// coderivative piece.
#[derive(Debug, Clone)]
pub struct FacePair {
    /// Larger face `F1` of the critical cone.
    pub f1: PolyhedralCone,
    /// Face `F2` of `F1` (verified by active-set inclusion).
    pub f2: PolyhedralCone,
    /// `F1 - F2` as a cone.
    pub difference: PolyhedralCone,
    /// `(F1 - F2)°`, the value piece contributed by this pair.
    pub polar: PolyhedralCone,
}

/// All ordered face pairs `(F1, F2)` with `F2 ⊆ F1` of the critical cone.
pub fn critical_face_pairs(
    c: &PolyhedralSet,
    z: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<Vec<FacePair>> {
    let critical = critical_cone(c, z, v)?;
    let faces = critical.faces()?;
    let mut pairs = Vec::new();
    for f1 in &faces {
        for f2 in &faces {
            // F2 is a face of F1 exactly when its maximal active set contains F1's.
            if !f2.active.is_superset(&f1.active) {
                continue;
            }
            let difference = f1.cone.minkowski_sum(&f2.cone.negate());
            let polar = difference.polar();
            pairs.push(FacePair {
                f1: f1.cone.clone(),
                f2: f2.cone.clone(),
                difference,
                polar,
            });
        }
    }
    Ok(pairs)
}

/// Value of `D*N(·;C)(z, v)(u)` as a finite union of polyhedra.
pub fn coderivative_normal_cone_map(
    c: &PolyhedralSet,
    z: &DVector<f64>,
    v: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<Vec<PolyhedralSet>> {
    let pairs = critical_face_pairs(c, z, v)?;
    let minus_u = -u;
    let mut pieces: Vec<PolyhedralSet> = Vec::new();
    for p in &pairs {
        if p.difference.contains(&minus_u, 1e-7) {
            pieces.push(PolyhedralSet::from_cone(&p.polar));
        }
    }
    Ok(prune_inclusions(pieces))
}

/// Graph of the coderivative mapping `u -> D*N(·;C)(z,v)(u)` as a union of
/// polyhedral cones in `(u, x*)` coordinates.
pub fn normal_cone_map_coderivative_graph(
    c: &PolyhedralSet,
    z: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<Vec<PolyhedralCone>> {
    let d = c.dim();
    let pairs = critical_face_pairs(c, z, v)?;
    let mut cones = Vec::new();
    for p in &pairs {
        let mut rows: Vec<DVector<f64>> = Vec::new();
        // -u in F1 - F2: every H-row h of the difference gives h·(-u) <= 0.
        for h in p.difference.canonical_rows() {
            let mut row = DVector::zeros(2 * d);
            for i in 0..d {
                row[i] = -h[i];
            }
            rows.push(row);
        }
        // x* in (F1 - F2)°: rows are the difference's generators.
        for g in p.difference.generators().signed_generators() {
            let mut row = DVector::zeros(2 * d);
            for i in 0..d {
                row[d + i] = g[i];
            }
            rows.push(row);
        }
        cones.push(PolyhedralCone::from_rows(2 * d, rows));
    }
    Ok(cones)
}

/// Drop union members contained in another member.
pub fn prune_inclusions(pieces: Vec<PolyhedralSet>) -> Vec<PolyhedralSet> {
    let mut keep: Vec<PolyhedralSet> = Vec::new();
    'outer: for (i, p) in pieces.iter().enumerate() {
        if p.is_empty() {
            continue;
        }
        for (j, q) in pieces.iter().enumerate() {
            if i == j {
                continue;
            }
            if includes(q, p) && (!includes(p, q) || j < i) {
                continue 'outer;
            }
        }
        keep.push(p.clone());
    }
    if keep.is_empty() && !pieces.is_empty() {
        keep.push(pieces[0].clone());
    }
    keep
}

/// Sampled-generator inclusion test `inner ⊆ outer`.
fn includes(outer: &PolyhedralSet, inner: &PolyhedralSet) -> bool {
    let v = inner.vrep();
    if v.is_empty() {
        return true;
    }
    let scale = 1e-7;
    v.vertices.iter().all(|p| outer.contains(p, scale))
        && v.rays.iter().all(|r| {
            let probe = &v.vertices[0] + r * 1e4;
            outer.contains(&probe, 1e-3)
        })
        && v.lineality.iter().all(|l| {
            let p1 = &v.vertices[0] + l * 1e4;
            let p2 = &v.vertices[0] - l * 1e4;
            outer.contains(&p1, 1e-3) && outer.contains(&p2, 1e-3)
        })
}

/// Limiting normal cone to the union of convex polyhedra at `w`, as a finite
/// union of convex polyhedral cones.
///
/// The local geometry is the union of the tangent cones of the pieces
/// containing `w`; the hyperplane arrangement spanned by their facets is
/// enumerated cell by cell, and every cell contributes the intersection of
/// the regular normal cones of the pieces active on it.
pub fn limiting_normal_cone_union(
    pieces: &[PolyhedralSet],
    w: &DVector<f64>,
) -> Result<Vec<PolyhedralCone>> {
    let dim = w.len();
    let local: Vec<&PolyhedralSet> =
        pieces.iter().filter(|p| p.contains(w, tol::TAU_MEM)).collect();
    if local.is_empty() {
        let best = pieces
            .iter()
            .filter_map(|p| p.distance(w).ok())
            .fold(f64::INFINITY, f64::min);
        return Err(Error::PointNotInSet { dist: best, tol: tol::TAU_MEM });
    }
    let tangents: Vec<PolyhedralCone> =
        local.iter().map(|p| tangent_cone(p, w)).collect::<Result<_>>()?;

    // Unique hyperplane normals across all tangent rows.
    let mut normals: Vec<DVector<f64>> = Vec::new();
    for t in &tangents {
        for r in t.rows() {
            let n = r.norm();
            if n <= tol::TAU_MEM {
                continue;
            }
            let u = r / n;
            if !normals.iter().any(|m| (m - &u).norm() <= 1e-9 || (m + &u).norm() <= 1e-9) {
                normals.push(u);
            }
        }
    }
    if normals.len() > 16 {
        return Err(Error::DimensionCapExceeded { dim: normals.len(), cap: 16 });
    }

    let cells = enumerate_cells(dim, &normals);
    let mut out: Vec<PolyhedralCone> = Vec::new();
    for point in cells {
        let sigma: Vec<usize> = (0..tangents.len())
            .filter(|&k| tangents[k].contains(&point, 1e-7))
            .collect();
        if sigma.is_empty() {
            continue;
        }
        // Regular normal cone of the union on this cell: intersection of the
        // pieces' normal cones at the representative point.
        let mut inter: Option<PolyhedralCone> = None;
        for &k in &sigma {
            let active: Vec<DVector<f64>> = tangents[k]
                .rows()
                .iter()
                .filter(|r| r.dot(&point).abs() <= 1e-7 * point.norm().max(1.0))
                .cloned()
                .collect();
            let nk = PolyhedralCone::from_generators(dim, active, Vec::new());
            inter = Some(match inter {
                None => nk,
                Some(acc) => acc.intersect(&nk),
            });
        }
        let cone = inter.unwrap();
        if !out.iter().any(|c| cone_eq(c, &cone)) {
            out.push(cone);
        }
    }
    Ok(out)
}

/// Representative points of all nonempty relatively open cells of a central
/// hyperplane arrangement.
fn enumerate_cells(dim: usize, normals: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut points = Vec::new();
    let state = DDState::full_space(dim);
    descend(dim, normals, 0, state, &mut Vec::new(), &mut points);
    points
}

fn descend(
    dim: usize,
    normals: &[DVector<f64>],
    level: usize,
    state: DDState,
    strict: &mut Vec<(usize, f64)>,
    out: &mut Vec<DVector<f64>>,
) {
    if level == normals.len() {
        // Find a representative satisfying every strict sign.
        for salt in 0..64u64 {
            let p = state.generic_relint_point(salt);
            let ok = strict
                .iter()
                .all(|&(i, s)| s * normals[i].dot(&p) > 1e-9 * p.norm().max(1.0));
            if ok || strict.is_empty() {
                out.push(p);
                return;
            }
        }
        // The closed cell supports all strict signs individually (checked on
        // the way down), so a joint witness exists; exhausting the salt
        // budget means the cell is numerically degenerate. Skip it.
        return;
    }
    let a = &normals[level];
    // Zero branch: on the hyperplane.
    {
        let mut st = state.clone();
        st.insert(a);
        st.insert(&(-a));
        descend(dim, normals, level + 1, st, strict, out);
    }
    // Strictly negative branch: a·x < 0.
    {
        let mut st = state.clone();
        st.insert(a);
        if !st.contained_in_hyperplane(a) {
            strict.push((level, -1.0));
            descend(dim, normals, level + 1, st, strict, out);
            strict.pop();
        }
    }
    // Strictly positive branch: a·x > 0.
    {
        let mut st = state.clone();
        st.insert(&(-a));
        if !st.contained_in_hyperplane(a) {
            strict.push((level, 1.0));
            descend(dim, normals, level + 1, st, strict, out);
            strict.pop();
        }
    }
}

fn cone_eq(a: &PolyhedralCone, b: &PolyhedralCone) -> bool {
    let ga = a.generators().signed_generators();
    let gb = b.generators().signed_generators();
    ga.iter().all(|g| b.contains(g, 1e-7))
        && gb.iter().all(|g| a.contains(g, 1e-7))
        && a.lineality_dim() == b.lineality_dim()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(entries: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(entries)
    }

    #[test]
    fn normal_cone_at_orthant_corner() {
        let c = PolyhedralSet::nonpositive_orthant(2);
        let n = normal_cone(&c, &v(&[0.0, 0.0])).unwrap();
        assert!(n.contains(&v(&[1.0, 0.0]), 1e-9));
        assert!(n.contains(&v(&[0.0, 1.0]), 1e-9));
        assert!(n.contains(&v(&[2.0, 3.0]), 1e-9));
        assert!(!n.contains(&v(&[-0.1, 0.5]), 1e-9));
    }

    #[test]
    fn normal_cone_interior_is_trivial() {
        let c = PolyhedralSet::nonpositive_orthant(2);
        let n = normal_cone(&c, &v(&[-1.0, -1.0])).unwrap();
        assert!(n.is_trivial());
    }

    #[test]
    fn normal_cone_rejects_outside_point() {
        let c = PolyhedralSet::nonpositive_orthant(2);
        assert!(normal_cone(&c, &v(&[0.5, 0.0])).is_err());
    }

    #[test]
    fn normal_cone_simplex_vertex() {
        // C = {z : z1 + z2 <= 1, -z1 <= 0, -z2 <= 0}, z = (1,0):
        // generated by (1,1) and (0,-1).
        let c = PolyhedralSet::new(
            2,
            vec![v(&[1.0, 1.0]), v(&[-1.0, 0.0]), v(&[0.0, -1.0])],
            vec![1.0, 0.0, 0.0],
        );
        let n = normal_cone(&c, &v(&[1.0, 0.0])).unwrap();
        assert!(n.contains(&v(&[1.0, 1.0]), 1e-9));
        assert!(n.contains(&v(&[0.0, -1.0]), 1e-9));
        assert!(n.contains(&v(&[1.0, 0.0]), 1e-9));
        assert!(!n.contains(&v(&[-1.0, 0.0]), 1e-9));
        assert!(!n.contains(&v(&[0.0, 1.0]), 1e-9));
    }

    #[test]
    fn coderivative_one_dimensional_complementarity() {
        // C = R_-, graph point (0, 0).
        let c = PolyhedralSet::nonpositive_orthant(1);
        let z = v(&[0.0]);
        let nv = v(&[0.0]);
        // u < 0 -> {0}
        let val = coderivative_normal_cone_map(&c, &z, &nv, &v(&[-1.0])).unwrap();
        assert!(val.iter().all(|p| p.contains(&v(&[0.0]), 1e-9)));
        assert!(!val.iter().any(|p| p.contains(&v(&[0.5]), 1e-9)));
        assert!(!val.iter().any(|p| p.contains(&v(&[-0.5]), 1e-9)));
        // u = 0 -> R
        let val = coderivative_normal_cone_map(&c, &z, &nv, &v(&[0.0])).unwrap();
        assert!(val.iter().any(|p| p.contains(&v(&[5.0]), 1e-9)));
        assert!(val.iter().any(|p| p.contains(&v(&[-5.0]), 1e-9)));
        // u > 0 -> R_+
        let val = coderivative_normal_cone_map(&c, &z, &nv, &v(&[1.0])).unwrap();
        assert!(val.iter().any(|p| p.contains(&v(&[5.0]), 1e-9)));
        assert!(!val.iter().any(|p| p.contains(&v(&[-0.5]), 1e-9)));
    }

    #[test]
    fn coderivative_interior_point_is_trivial() {
        // (z, v) = (-1, 0): the graph is locally a line, D* is {0} unless u
        // pairs with nothing.
        let c = PolyhedralSet::nonpositive_orthant(1);
        let val =
            coderivative_normal_cone_map(&c, &v(&[-1.0]), &v(&[0.0]), &v(&[1.0])).unwrap();
        for p in &val {
            assert!(p.contains(&v(&[0.0]), 1e-9));
            assert!(!p.contains(&v(&[0.3]), 1e-9));
        }
        // For u = 0 the value is {0} too.
        let val =
            coderivative_normal_cone_map(&c, &v(&[-1.0]), &v(&[0.0]), &v(&[0.0])).unwrap();
        for p in &val {
            assert!(!p.contains(&v(&[0.3]), 1e-9));
        }
    }

    #[test]
    fn rejects_non_normal_pair() {
        let c = PolyhedralSet::nonpositive_orthant(1);
        assert!(matches!(
            coderivative_normal_cone_map(&c, &v(&[0.0]), &v(&[-1.0]), &v(&[0.0])),
            Err(Error::NotANormalPair(_))
        ));
    }

    #[test]
    fn union_normal_cone_absolute_value_graph() {
        // gph |x| = {(x, x) : x >= 0} ∪ {(x, -x) : x <= 0}.
        let right = PolyhedralSet::new(
            2,
            vec![v(&[1.0, -1.0]), v(&[-1.0, 1.0]), v(&[-1.0, 0.0])],
            vec![0.0, 0.0, 0.0],
        );
        let left = PolyhedralSet::new(
            2,
            vec![v(&[1.0, 1.0]), v(&[-1.0, -1.0]), v(&[1.0, 0.0])],
            vec![0.0, 0.0, 0.0],
        );
        let cones = limiting_normal_cone_union(&[right, left], &v(&[0.0, 0.0])).unwrap();
        // Expected: the two branch normal lines plus the corner cone
        // {(a,b) : b <= -|a|}.
        let probe_line1 = v(&[1.0, -1.0]);
        let probe_line2 = v(&[1.0, 1.0]);
        let probe_corner = v(&[0.0, -1.0]);
        let bad = v(&[0.0, 1.0]);
        assert!(cones.iter().any(|c| c.contains(&probe_line1, 1e-7)));
        assert!(cones.iter().any(|c| c.contains(&(-probe_line1.clone()), 1e-7)));
        assert!(cones.iter().any(|c| c.contains(&probe_line2, 1e-7)));
        assert!(cones.iter().any(|c| c.contains(&probe_corner, 1e-7)));
        assert!(!cones.iter().any(|c| c.contains(&bad, 1e-7)));
    }

    #[test]
    fn union_normal_cone_single_piece_matches_convex() {
        let c = PolyhedralSet::nonpositive_orthant(2);
        let cones = limiting_normal_cone_union(
            std::slice::from_ref(&c),
            &v(&[0.0, -0.0]),
        )
        .unwrap();
        let convex = normal_cone(&c, &v(&[0.0, 0.0])).unwrap();
        for g in convex.generators().signed_generators() {
            assert!(cones.iter().any(|k| k.contains(&g, 1e-7)));
        }
        for k in &cones {
            for g in k.generators().signed_generators() {
                assert!(convex.contains(&g, 1e-7));
            }
        }
    }
}
