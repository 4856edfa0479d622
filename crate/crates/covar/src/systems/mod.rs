//! Assembled system pipelines: stochastic constraint systems, variational
//! systems, truncated variants, stationary-point maps, and MPEC optimality
//! checks.
//!
//! Each pipeline wires the lower modules together in the same shape: verify
//! the standing assumptions (or route through truncation), enumerate the
//! intermediate value points and extreme selections, gate on the
//! qualification / adjoint conditions, and only then emit a coderivative
//! upper estimate as a homogeneous map ready for certification. No estimate
//! is ever emitted past a failed gate; the assumptions log names every
//! hypothesis together with its status.

pub mod constraint;
pub mod maps;
pub mod mpec;
pub mod stationary;
pub mod variational;

pub use constraint::{
    constraint_certify, constraint_coderivative, semilinear_multiplier_decomposition,
    ConstraintSystemSpec, MultiplierDecomposition,
};
pub use maps::{constraint_solution_map, variational_solution_map};
pub use mpec::{mpec_check, MpecCost, MpecReport, MpecSpec};
pub use stationary::{
    stationary_map_coderivative, stationary_metric_regularity, ScalarIntegrand, StationaryMapSpec,
    StationaryPsi,
};
pub use variational::{
    truncated_constraint_pathway, truncated_variational_pathway, variational_certify,
    variational_coderivative, GPlacement, VariationalSystemSpec,
};

use nalgebra::DVector;

use crate::geometry::{HomogeneousMap, PolyhedralCone};

/// An emitted coderivative estimate for a solution map `z* -> x*`, together
/// with the hypothesis log accumulated while assembling it.
#[derive(Debug, Clone)]
pub struct SystemEstimate {
    /// `D_est : z* -> {x* : (x*, -z*) ∈ RHS}`; always an upper estimate.
    pub map: HomogeneousMap,
    pub assumptions_log: Vec<String>,
    /// Rule identifiers backing the estimate.
    pub references: Vec<String>,
}

impl SystemEstimate {
    /// Value of the estimate at one `z*`.
    pub fn value(&self, zstar: &DVector<f64>) -> crate::multifunction::CoderivativeSet {
        crate::multifunction::CoderivativeSet::new(
            self.map.output_dim(),
            self.map.value(zstar),
            false,
        )
    }
}

/// Project a cone onto a subset of coordinates (generator image).
pub(crate) fn project_cone(cone: &PolyhedralCone, keep: &[usize]) -> PolyhedralCone {
    let gens = cone.generators();
    let pick = |v: &DVector<f64>| DVector::from_fn(keep.len(), |i, _| v[keep[i]]);
    PolyhedralCone::from_generators(
        keep.len(),
        gens.rays.iter().map(&pick).collect(),
        gens.lineality.iter().map(&pick).collect(),
    )
}

/// The constant map `y* -> cone` (free input crossed with a fixed cone).
pub(crate) fn const_value_map(input_dim: usize, value: &PolyhedralCone) -> HomogeneousMap {
    let n = value.dim();
    let rows = value
        .rows()
        .iter()
        .map(|r| {
            let mut row = DVector::zeros(input_dim + n);
            for i in 0..n {
                row[input_dim + i] = r[i];
            }
            row
        })
        .collect();
    HomogeneousMap::Cones {
        input_dim,
        output_dim: n,
        pieces: vec![PolyhedralCone::from_rows(input_dim + n, rows)],
    }
}

/// Embed a map's output into a larger space at the given coordinates, zeroing
/// the rest (exact for maps of the form `Φ(z)` viewed over `(x, z)`).
pub(crate) fn embed_output(
    map: &HomogeneousMap,
    total_out: usize,
    at: &[usize],
) -> HomogeneousMap {
    let m = map.input_dim();
    let n = map.output_dim();
    assert_eq!(at.len(), n);
    let pieces = map
        .graph_pieces()
        .into_iter()
        .map(|p| {
            let total = m + total_out;
            let mut rows: Vec<DVector<f64>> = p
                .rows()
                .iter()
                .map(|r| {
                    let mut row = DVector::zeros(total);
                    for i in 0..m {
                        row[i] = r[i];
                    }
                    for i in 0..n {
                        row[m + at[i]] = r[m + i];
                    }
                    row
                })
                .collect();
            let embedded: std::collections::BTreeSet<usize> = at.iter().cloned().collect();
            for i in 0..total_out {
                if !embedded.contains(&i) {
                    let mut e = DVector::zeros(total);
                    e[m + i] = 1.0;
                    rows.push(e.clone());
                    rows.push(-e);
                }
            }
            PolyhedralCone::from_rows(total, rows)
        })
        .collect();
    HomogeneousMap::Cones { input_dim: m, output_dim: total_out, pieces }
}

/// Turn the union `U ⊆ {(s_x, s_z)} = {(x*, -z*)}` of right-hand-side values
/// into the system estimate map `z* -> {x* : (x*, -z*) ∈ U}`.
pub(crate) fn rhs_union_to_system_map(
    nx: usize,
    nz: usize,
    pieces: Vec<PolyhedralCone>,
) -> HomogeneousMap {
    let mapped = pieces
        .into_iter()
        .map(|p| {
            let rows = p
                .rows()
                .iter()
                .map(|r| {
                    DVector::from_fn(nz + nx, |i, _| {
                        if i < nz {
                            // z*-slot: coefficient of -z* in the s_z part
                            -r[nx + i]
                        } else {
                            r[i - nz]
                        }
                    })
                })
                .collect();
            PolyhedralCone::from_rows(nz + nx, rows)
        })
        .collect();
    HomogeneousMap::Cones { input_dim: nz, output_dim: nx, pieces: mapped }
}

/// Restrict a map's input to a cone and project its graph pieces onto the
/// output coordinates: the union of values over all admissible inputs.
pub(crate) fn values_over_cone(
    map: &HomogeneousMap,
    input_cone: Option<&PolyhedralCone>,
) -> Vec<PolyhedralCone> {
    let m = map.input_dim();
    let n = map.output_dim();
    let keep: Vec<usize> = (m..m + n).collect();
    map.graph_pieces()
        .into_iter()
        .map(|p| {
            let restricted = match input_cone {
                Some(c) => {
                    let lifted =
                        crate::geometry::lift_cone(c, m + n, &(0..m).collect::<Vec<_>>());
                    p.intersect(&lifted)
                }
                None => p,
            };
            project_cone(&restricted, &keep)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn v(entries: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(entries)
    }

    #[test]
    fn const_map_ignores_input() {
        let cone = PolyhedralCone::nonnegative_orthant(1);
        let m = const_value_map(2, &cone);
        let val = m.value(&v(&[5.0, -3.0]));
        assert!(val.iter().any(|p| p.contains(&v(&[2.0]), 1e-9)));
        assert!(!val.iter().any(|p| p.contains(&v(&[-2.0]), 1e-9)));
    }

    #[test]
    fn embed_output_zeroes_other_coordinates() {
        let inner = HomogeneousMap::Linear { matrix: DMatrix::identity(1, 1) };
        let lifted = embed_output(&inner, 2, &[1]);
        let val = lifted.value(&v(&[3.0]));
        assert!(val.iter().any(|p| p.contains(&v(&[0.0, 3.0]), 1e-9)));
        assert!(!val.iter().any(|p| p.contains(&v(&[1.0, 3.0]), 1e-9)));
    }

    #[test]
    fn values_over_cone_projects_union() {
        // Map y -> {y} restricted to y >= 0: values = R_+.
        let m = HomogeneousMap::Linear { matrix: DMatrix::identity(1, 1) };
        let cone = PolyhedralCone::nonnegative_orthant(1);
        let vals = values_over_cone(&m, Some(&cone));
        assert!(vals.iter().any(|c| c.contains(&v(&[1.0]), 1e-9)));
        assert!(!vals.iter().any(|c| c.contains(&v(&[-1.0]), 1e-9)));
    }
}
