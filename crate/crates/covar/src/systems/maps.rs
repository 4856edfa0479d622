//! Evaluable solution maps for oracle cross-checks.
//!
//! These wrappers expose the constraint map `F(x)` and the variational
//! solution map `S(x)` as sampled multifunctions so the empirical estimators
//! can probe them directly; values (and preimages, where noted) are exact
//! polyhedral computations on the instance data.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::multifunction::{IntegrandExpr, SetValue};
use crate::oracle::FnMultimap;
use crate::geometry::PolyhedralSet;

use super::constraint::ConstraintSystemSpec;
use super::variational::{GPlacement, VariationalSystemSpec};

/// Aggregate the scenarios of an all-affine integrand into `(A, b)` with
/// `E[Φ](w) = A w + b`.
fn aggregate_affine(
    spec_nodes: &[IntegrandExpr],
    weights: &[f64],
    in_dim: usize,
    out_dim: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let mut a = DMatrix::zeros(out_dim, in_dim);
    let mut b = DVector::zeros(out_dim);
    for (node, &w) in spec_nodes.iter().zip(weights.iter()) {
        match node {
            IntegrandExpr::Affine { a: ai, b: bi } => {
                a += ai * w;
                b += bi * w;
            }
            _ => {
                return Err(Error::PathUnavailable(
                    "solution-map sampling needs affine scenarios".into(),
                ))
            }
        }
    }
    Ok((a, b))
}

/// The feasible-set map `F(x) = {z : E[Φ](x,z) ∈ K, (x,z) ∈ O}` for
/// all-affine scenarios, as an evaluable multifunction of `x`.
pub fn constraint_solution_map(spec: &ConstraintSystemSpec) -> Result<FnMultimap> {
    spec.validate()?;
    let weights: Vec<f64> = spec.model.atoms.iter().map(|a| a.weight).collect();
    let (a, b) = aggregate_affine(
        spec.phi.nodes(),
        &weights,
        spec.nx + spec.nz,
        spec.phi.output_dim(),
    )?;
    let ax = a.columns(0, spec.nx).into_owned();
    let az = a.columns(spec.nx, spec.nz).into_owned();
    let k = spec.k_set.clone();
    let o = spec.o_set.clone();
    let (nx, nz) = (spec.nx, spec.nz);
    let f = move |x: &DVector<f64>| -> Result<SetValue> {
        // K-rows composed with the affine map, in z.
        let shift = &ax * x + &b;
        let mut rows = Vec::new();
        let mut offs = Vec::new();
        for (kr, &kb) in k.rows().iter().zip(k.offsets().iter()) {
            rows.push(az.transpose() * kr);
            offs.push(kb - kr.dot(&shift));
        }
        let feas = PolyhedralSet::new(nz, rows, offs);
        let o_slice = o.fix_coords(&(0..nx).collect::<Vec<_>>(), x);
        Ok(SetValue::from_set(feas.intersect(&o_slice)))
    };
    Ok(FnMultimap { in_dim: nx, out_dim: nz, f: Box::new(f), pre: None })
}

/// The solution map `S(x) = {z : 0 ∈ E[Φ](x,z) + G(z)}` for all-affine
/// scenarios and `G` either affine or a normal-cone map, with an exact
/// preimage for the metric-regularity oracle.
pub fn variational_solution_map(spec: &VariationalSystemSpec) -> Result<FnMultimap> {
    spec.validate()?;
    if spec.g_placement != GPlacement::ZOnly {
        return Err(Error::PathUnavailable(
            "solution-map sampling needs G = G(z)".into(),
        ));
    }
    let weights: Vec<f64> = spec.model.atoms.iter().map(|a| a.weight).collect();
    let (a, b) = aggregate_affine(
        spec.phi.nodes(),
        &weights,
        spec.nx + spec.nz,
        spec.phi.output_dim(),
    )?;
    let mut ax = a.columns(0, spec.nx).into_owned();
    let mut az = a.columns(spec.nx, spec.nz).into_owned();
    let mut b = b;
    let (nx, nz) = (spec.nx, spec.nz);

    let cone_set: Option<PolyhedralSet> = match &spec.g_node {
        IntegrandExpr::NormalConeMap { c } => Some(c.clone()),
        IntegrandExpr::Affine { a: ga, b: gb } => {
            // Fold an affine G into the expectation: 0 = (E[Φ] + G)(x,z).
            az += ga;
            b += gb;
            let _ = &mut ax;
            None
        }
        _ => {
            return Err(Error::PathUnavailable(
                "solution-map sampling supports affine or normal-cone G".into(),
            ))
        }
    };

    match cone_set {
        None => {
            // S(x) = {z : Ax x + Az z + b = 0}: an affine preimage.
            let f = {
                let (ax, az, b) = (ax.clone(), az.clone(), b.clone());
                move |x: &DVector<f64>| -> Result<SetValue> {
                    let rhs = -(&ax * x + &b);
                    let mut rows = Vec::new();
                    let mut offs = Vec::new();
                    for i in 0..az.nrows() {
                        let r = az.row(i).transpose();
                        rows.push(r.clone());
                        offs.push(rhs[i]);
                        rows.push(-r);
                        offs.push(-rhs[i]);
                    }
                    Ok(SetValue::from_set(PolyhedralSet::new(nz, rows, offs)))
                }
            };
            let pre = move |z: &DVector<f64>| -> SetValue {
                let rhs = -(&az * z + &b);
                let mut rows = Vec::new();
                let mut offs = Vec::new();
                for i in 0..ax.nrows() {
                    let r = ax.row(i).transpose();
                    rows.push(r.clone());
                    offs.push(rhs[i]);
                    rows.push(-r);
                    offs.push(-rhs[i]);
                }
                SetValue::from_set(PolyhedralSet::new(nx, rows, offs))
            };
            Ok(FnMultimap { in_dim: nx, out_dim: nz, f: Box::new(f), pre: Some(Box::new(pre)) })
        }
        Some(c) => {
            // S(x) = ⋃ over faces F of C: {z ∈ F : -(Ax x + Az z + b) ∈ N_F}.
            let faces = c.faces()?;
            let mut branch_data = Vec::new();
            for face in &faces {
                let ncone = crate::geometry::PolyhedralCone::from_generators(
                    nz,
                    face.active
                        .iter()
                        .map(|&i| c.rows()[i].clone())
                        .collect(),
                    Vec::new(),
                );
                branch_data.push((face.set.clone(), ncone.rows().to_vec()));
            }
            let f = {
                let (ax, az, b) = (ax.clone(), az.clone(), b.clone());
                let branch_data = branch_data.clone();
                move |x: &DVector<f64>| -> Result<SetValue> {
                    let shift = &ax * x + &b;
                    let mut pieces = Vec::new();
                    for (face_set, ncone_rows) in &branch_data {
                        let mut rows: Vec<DVector<f64>> = face_set.rows().to_vec();
                        let mut offs: Vec<f64> = face_set.offsets().to_vec();
                        // -(Az z + shift) ∈ N_F: every H-row h of N_F gives
                        // h·(-(Az z + shift)) <= 0.
                        for h in ncone_rows {
                            rows.push(az.transpose() * (-h.clone()));
                            offs.push(h.dot(&shift));
                        }
                        pieces.push(PolyhedralSet::new(nz, rows, offs));
                    }
                    Ok(SetValue::new(nz, pieces))
                }
            };
            let c_pre = c.clone();
            let pre = move |z: &DVector<f64>| -> SetValue {
                if !c_pre.contains(z, 1e-9) {
                    return SetValue::empty(nx);
                }
                let ncone = match crate::geometry::normal_cone(&c_pre, z) {
                    Ok(n) => n,
                    Err(_) => return SetValue::empty(nx),
                };
                let shift = &az * z + &b;
                let mut rows = Vec::new();
                let mut offs = Vec::new();
                for h in ncone.rows() {
                    rows.push(ax.transpose() * (-h.clone()));
                    offs.push(h.dot(&shift));
                }
                SetValue::from_set(PolyhedralSet::new(nx, rows, offs))
            };
            Ok(FnMultimap { in_dim: nx, out_dim: nz, f: Box::new(f), pre: Some(Box::new(pre)) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Evaluable;
    use crate::stochastic::{RandomIntegrand, ScenarioModel};

    fn v(entries: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(entries)
    }

    #[test]
    fn complementarity_solution_map_values() {
        // E[Φ](x,z) = x + z, G = N(·; R_-): S(x) = {-max(x, 0)}.
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let phi = RandomIntegrand::new(vec![IntegrandExpr::affine(a, v(&[0.0]))]).unwrap();
        let spec = VariationalSystemSpec {
            phi,
            nx: 1,
            nz: 1,
            g_node: IntegrandExpr::NormalConeMap {
                c: PolyhedralSet::nonpositive_orthant(1),
            },
            g_placement: GPlacement::ZOnly,
            model: ScenarioModel::uniform(1),
        };
        let map = variational_solution_map(&spec).unwrap();
        let s1 = map.eval(&v(&[1.0])).unwrap();
        assert!(s1.contains(&v(&[-1.0]), 1e-9));
        assert!(!s1.contains(&v(&[0.0]), 1e-9));
        assert!(!s1.contains(&v(&[-0.5]), 1e-9));
        let sm = map.eval(&v(&[-1.0])).unwrap();
        assert!(sm.contains(&v(&[0.0]), 1e-9));
        assert!(!sm.contains(&v(&[-1.0]), 1e-9));
        // Preimage of z = 0.5 > 0 is empty (values stay nonpositive).
        let pre = map.preimage(&v(&[0.5])).unwrap();
        assert!(pre.is_empty());
        // Preimage of z = -2 is {2}.
        let pre = map.preimage(&v(&[-2.0])).unwrap();
        assert!(pre.contains(&v(&[2.0]), 1e-9));
        assert!(!pre.contains(&v(&[1.0]), 1e-9));
    }

    #[test]
    fn affine_feasible_set_map() {
        // F(x) = {z : x + z <= 0} with O the full plane.
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let phi = RandomIntegrand::new(vec![IntegrandExpr::affine(a, v(&[0.0]))]).unwrap();
        let spec = ConstraintSystemSpec {
            phi,
            nx: 1,
            nz: 1,
            k_set: PolyhedralSet::nonpositive_orthant(1),
            o_set: PolyhedralSet::full_space(2),
            model: ScenarioModel::uniform(1),
        };
        let map = constraint_solution_map(&spec).unwrap();
        let f1 = map.eval(&v(&[1.0])).unwrap();
        assert!(f1.contains(&v(&[-1.0]), 1e-9));
        assert!(f1.contains(&v(&[-5.0]), 1e-9));
        assert!(!f1.contains(&v(&[-0.5]), 1e-9));
    }
}
