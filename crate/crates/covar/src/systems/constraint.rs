//! Stochastic constraint systems `F(x) = {z : E[Φ](x,z) ∩ K ≠ ∅, (x,z) ∈ O}`.
//!
//! The coderivative upper estimate is assembled per intermediate value
//! `ȳ ∈ E[Φ](x̄,z̄) ∩ K` and per selection representative: the integrated
//! per-scenario coderivative map, summed with the normal cone to `O`, with
//! the dual variable ranging over the whole normal cone `N(ȳ; K)` (handled
//! exactly by restricting and projecting the joint polyhedral graph, not by
//! sampling dual directions). Both qualification conditions are checked
//! before anything is emitted.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{lift_cone, normal_cone, PolyhedralCone, PolyhedralSet};
use crate::multifunction::IntegrandExpr;
use crate::stochastic::{
    check_standing, expected_coderivative_map, expected_map, selection_set, RandomIntegrand,
    ScenarioModel,
};
use crate::tol;
use crate::wellposedness::{
    lipschitz_certify, metric_regularity_certify, qualification_check, Certificate,
    ImplicationQuery, Property, QualificationResult, Verdict,
};

use super::{const_value_map, rhs_union_to_system_map, values_over_cone, SystemEstimate};

#[derive(Debug, Clone)]
pub struct ConstraintSystemSpec {
    /// Random integrand over the joint `(x, z)` input.
    pub phi: RandomIntegrand,
    pub nx: usize,
    pub nz: usize,
    /// Target set `K` in the value space of `Φ`.
    pub k_set: PolyhedralSet,
    /// Joint constraint set `O ⊆ R^{nx+nz}` (the graph of `G` when the
    /// system has the stochastic-programming form).
    pub o_set: PolyhedralSet,
    pub model: ScenarioModel,
}

impl ConstraintSystemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.phi.input_dim() != self.nx + self.nz {
            return Err(Error::DimensionError {
                field: "constraint system".into(),
                message: "integrand input must match nx + nz".into(),
            });
        }
        if self.k_set.dim() != self.phi.output_dim() {
            return Err(Error::DimensionError {
                field: "constraint system".into(),
                message: "K must live in the integrand's value space".into(),
            });
        }
        if self.o_set.dim() != self.nx + self.nz {
            return Err(Error::DimensionError {
                field: "constraint system".into(),
                message: "O must live in the (x, z) space".into(),
            });
        }
        Ok(())
    }

    pub fn joint(&self, x: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.nx + self.nz);
        for i in 0..self.nx {
            out[i] = x[i];
        }
        for i in 0..self.nz {
            out[self.nx + i] = z[i];
        }
        out
    }
}

/// Intermediate data produced while assembling a constraint estimate.
pub(crate) struct ConstraintAssembly {
    pub log: Vec<String>,
    pub pieces: Vec<PolyhedralCone>,
}

/// Assemble the coderivative upper estimate of the constraint system at
/// `(x̄, z̄)`; the standing assumptions may be replaced by a localized report
/// from the truncated pathway.
pub(crate) fn assemble_constraint_estimate(
    spec: &ConstraintSystemSpec,
    xbar: &DVector<f64>,
    zbar: &DVector<f64>,
    localized_standing: Option<&str>,
) -> Result<ConstraintAssembly> {
    spec.validate()?;
    let xz = spec.joint(xbar, zbar);
    let mut log: Vec<String> = Vec::new();

    // Graph membership.
    if !spec.o_set.contains(&xz, tol::TAU_MEM * 10.0) {
        return Err(Error::OffGraph(spec.o_set.residual(&xz)));
    }
    let e = expected_map(&spec.phi, &spec.model, &xz)?;
    let inter = e.intersect_set(&spec.k_set);
    if inter.is_empty() {
        return Err(Error::OffGraph(f64::INFINITY));
    }

    // Standing assumptions, unless a localized (truncation) report stands in.
    match localized_standing {
        Some(note) => log.push(note.to_string()),
        None => {
            let standing = check_standing(&spec.phi, &spec.model, &xz, 0.25, 0)?;
            if !standing.bound_holds {
                return Err(Error::StandingAssumptionViolation(
                    "scenario values are unbounded near the point; use the truncated pathway"
                        .into(),
                ));
            }
            if !standing.convexity_holds {
                return Err(Error::StandingAssumptionViolation(
                    "a nonatomic-flagged atom has nonconvex values".into(),
                ));
            }
            log.push(format!(
                "standing assumptions verified on a sampled ball (integral bound {:.6})",
                standing.integral_kappa
            ));
        }
    }
    log.push(
        "inner semicompactness of the selection map declared from bounded scenario values \
         (recorded as an assumption)"
            .into(),
    );

    let n_o = normal_cone(&spec.o_set, &xz)?;
    let m_dim = spec.phi.output_dim();
    let nxz = spec.nx + spec.nz;

    let ybars = inter.face_representatives()?;
    log.push(format!(
        "{} intermediate value point(s) enumerated in E[Φ] ∩ K",
        ybars.len()
    ));

    let mut pieces: Vec<PolyhedralCone> = Vec::new();
    let mut selections_total = 0usize;
    for ybar in &ybars {
        let n_k = normal_cone(&spec.k_set, ybar)?;
        let sels = selection_set(&spec.phi, &spec.model, &xz, ybar)?.representatives()?;
        selections_total += sels.len();
        for sel in &sels {
            let integral = expected_coderivative_map(&spec.phi, &spec.model, &xz, sel)?;

            // First qualification condition:
            // [0 ∈ ∫D*Φ(y*), y* ∈ N(ȳ;K)] ⇒ y* = 0.
            let qc1 = ImplicationQuery {
                dim: m_dim + nxz,
                fixed: vec![
                    lift_cone(&n_k, m_dim + nxz, &(0..m_dim).collect::<Vec<_>>()),
                    lift_cone(
                        &PolyhedralCone::zero(nxz),
                        m_dim + nxz,
                        &(m_dim..m_dim + nxz).collect::<Vec<_>>(),
                    ),
                ],
                groups: vec![integral.map.graph_pieces()],
                norm_block: 0..m_dim,
            };
            if let QualificationResult::Fails { witness } = qualification_check(&qc1) {
                return Err(Error::QualificationFailed {
                    witness: witness.iter().cloned().collect(),
                });
            }

            // Second qualification condition:
            // ⋃_{y* ∈ N_K} ∫D*Φ(y*) ∩ (-N(O)) = {0}.
            let qc2 = ImplicationQuery {
                dim: m_dim + nxz,
                fixed: vec![
                    lift_cone(&n_k, m_dim + nxz, &(0..m_dim).collect::<Vec<_>>()),
                    lift_cone(
                        &n_o.negate(),
                        m_dim + nxz,
                        &(m_dim..m_dim + nxz).collect::<Vec<_>>(),
                    ),
                ],
                groups: vec![integral.map.graph_pieces()],
                norm_block: m_dim..m_dim + nxz,
            };
            if let QualificationResult::Fails { witness } = qualification_check(&qc2) {
                return Err(Error::QualificationFailed {
                    witness: witness.iter().cloned().collect(),
                });
            }

            let est = integral.map.sum(&const_value_map(m_dim, &n_o));
            pieces.extend(values_over_cone(&est, Some(&n_k)));
        }
    }
    log.push(format!("{} selection representative(s) enumerated", selections_total));
    log.push("both qualification conditions verified for every configuration".into());
    log.push("estimate is a calculus upper bound (exact = false)".into());
    Ok(ConstraintAssembly { log, pieces })
}

/// Coderivative upper estimate of the constraint system as a homogeneous map
/// `z* -> {x*}` plus the assumptions log (Lipschitz-like and metric
/// regularity both certify against it).
pub fn constraint_coderivative(
    spec: &ConstraintSystemSpec,
    xbar: &DVector<f64>,
    zbar: &DVector<f64>,
) -> Result<SystemEstimate> {
    let asm = assemble_constraint_estimate(spec, xbar, zbar, None)?;
    Ok(SystemEstimate {
        map: rhs_union_to_system_map(spec.nx, spec.nz, asm.pieces),
        assumptions_log: asm.log,
        references: vec![
            "constraint-coderivative-estimate".into(),
            "selection-union-rule".into(),
        ],
    })
}

#[derive(Debug, Clone, Default)]
pub struct ConstraintCertifyOptions {
    /// Run the stochastic-programming hypotheses (convexity in z, strict
    /// feasibility, graph regularity) instead of the raw qualification route.
    pub require_slater: bool,
}

/// Certify a well-posedness property of the constraint system.
///
/// Gate failures (standing assumptions, qualification conditions, missing
/// strict feasibility) surface as `inconclusive` verdicts with the failed
/// hypothesis named in the log; a certificate is never fabricated from a
/// failed gate.
pub fn constraint_certify(
    spec: &ConstraintSystemSpec,
    xbar: &DVector<f64>,
    zbar: &DVector<f64>,
    property: Property,
    opts: &ConstraintCertifyOptions,
) -> Certificate {
    let mut pre_log: Vec<String> = Vec::new();
    if opts.require_slater {
        match slater_check(spec, xbar, zbar) {
            Ok(report) => pre_log.extend(report),
            Err(e) => {
                return inconclusive(property, format!("strict-feasibility gate failed: {e}"));
            }
        }
    }
    let est = match constraint_coderivative(spec, xbar, zbar) {
        Ok(est) => est,
        Err(e) => return inconclusive(property, format!("estimate gate failed: {e}")),
    };
    let mut cert = match property {
        Property::LipschitzLike => lipschitz_certify(&est.map, false),
        Property::MetricRegularity => metric_regularity_certify(&est.map, false),
    };
    let mut log = pre_log;
    log.extend(est.assumptions_log);
    log.extend(cert.assumptions_log.drain(..));
    cert.assumptions_log = log;
    cert.references.extend(est.references);
    cert
}

fn inconclusive(property: Property, reason: String) -> Certificate {
    Certificate {
        property,
        verdict: Verdict::Inconclusive,
        bound: None,
        bound_interval: None,
        bound_relation: "<=",
        witness: None,
        assumptions_log: vec![reason],
        references: vec!["hypothesis-gate".into()],
    }
}

/// Verify the strict-feasibility (Slater-type) hypothesis for constraint
/// systems in stochastic-programming form: `K` must be the nonpositive
/// orthant, the expected constraints affine in `z`, and a point
/// `z0 ∈ G(x̄)` must satisfy every expected constraint strictly.
fn slater_check(
    spec: &ConstraintSystemSpec,
    xbar: &DVector<f64>,
    zbar: &DVector<f64>,
) -> Result<Vec<String>> {
    let mut log = Vec::new();
    let m_dim = spec.phi.output_dim();
    // K = R^m_-.
    let orthant = PolyhedralSet::nonpositive_orthant(m_dim);
    let probe_points = [DVector::from_element(m_dim, -1.0), DVector::from_element(m_dim, -7.5)];
    let same = probe_points.iter().all(|p| spec.k_set.contains(p, 1e-9) == orthant.contains(p, 1e-9))
        && spec.k_set.contains(&DVector::zeros(m_dim), 1e-9)
        && !spec.k_set.contains(&DVector::from_element(m_dim, 0.1), 1e-9);
    if !same {
        return Err(Error::AssumptionUnverifiable(
            "the strict-feasibility route needs K to be the nonpositive orthant".into(),
        ));
    }

    // Expected constraint values must be affine in z: probe the expected map.
    let xz = spec.joint(xbar, zbar);
    let base = expected_map(&spec.phi, &spec.model, &xz)?
        .is_singleton()
        .ok_or_else(|| {
            Error::AssumptionUnverifiable(
                "the strict-feasibility route needs single-valued expected constraints".into(),
            )
        })?;
    // E g(x̄, z) = A z + c: recover A by probing coordinate directions, then
    // validate affinity on a couple of off-axis probes.
    let nz = spec.nz;
    let mut a = nalgebra::DMatrix::zeros(m_dim, nz);
    for j in 0..nz {
        let mut zp = zbar.clone();
        zp[j] += 1.0;
        let val = expected_map(&spec.phi, &spec.model, &spec.joint(xbar, &zp))?
            .is_singleton()
            .ok_or(Error::NotSingleValued)?;
        for i in 0..m_dim {
            a[(i, j)] = val[i] - base[i];
        }
    }
    let c = &base - &a * zbar;
    for probe in [0.5, -1.25] {
        let zp = zbar.add_scalar(probe);
        let val = expected_map(&spec.phi, &spec.model, &spec.joint(xbar, &zp))?
            .is_singleton()
            .ok_or(Error::NotSingleValued)?;
        if ((&a * &zp + &c) - val).norm() > 1e-7 {
            return Err(Error::AssumptionUnverifiable(
                "expected constraints are not affine in z near the point".into(),
            ));
        }
    }

    // Feasible region in z at x̄ and the strict margin LP over (z, eps).
    let gx = spec.o_set.fix_coords(&(0..spec.nx).collect::<Vec<_>>(), xbar);
    let mut rows = Vec::new();
    let mut offs = Vec::new();
    for (r, &b) in gx.rows().iter().zip(gx.offsets().iter()) {
        let mut row = DVector::zeros(nz + 1);
        for i in 0..nz {
            row[i] = r[i];
        }
        rows.push(row);
        offs.push(b);
    }
    for i in 0..m_dim {
        // a_i z + eps <= -c_i
        let mut row = DVector::zeros(nz + 1);
        for j in 0..nz {
            row[j] = a[(i, j)];
        }
        row[nz] = 1.0;
        rows.push(row);
        offs.push(-c[i]);
    }
    // Cap eps so the margin polytope has vertices.
    let mut cap = DVector::zeros(nz + 1);
    cap[nz] = 1.0;
    rows.push(cap);
    offs.push(1.0e3);
    let margin = PolyhedralSet::new(nz + 1, rows, offs);
    let best = margin
        .vertices()
        .iter()
        .map(|v| v[nz])
        .fold(f64::NEG_INFINITY, f64::max);
    if !(best > 1e-7) {
        return Err(Error::AssumptionUnverifiable(format!(
            "no strictly feasible point: best margin {best:.3e}"
        )));
    }
    let active: Vec<usize> = (0..m_dim)
        .filter(|&i| (a.row(i).transpose().dot(zbar) + c[i]).abs() <= 1e-7)
        .collect();
    log.push(format!(
        "strict feasibility verified with margin {best:.6e}; active constraint indices {:?} \
         (active-index reading of the equality hypothesis)",
        active
    ));
    log.push("graph regularity granted: the joint constraint set is a convex polyhedron".into());
    log.push(
        "constraint graph is Lipschitz-continuous as a polyhedral convex multifunction".into(),
    );
    Ok(log)
}

/// One multiplier decomposition of an estimate element for systems with
/// affine expected constraints:
/// complementarity `λ_i · E g_i(x̄, z̄) = 0`, the z-identity
/// `z* + v* = Σ λ_i ā_i`, and the x-identity pinning `x* + u*` to the
/// x-block of the integrated scalarized subdifferential. Residuals are
/// computed against the independently assembled estimate map.
#[derive(Debug, Clone)]
pub struct MultiplierDecomposition {
    pub lambda: Vec<f64>,
    pub x_star: DVector<f64>,
    pub z_star: DVector<f64>,
    pub u_star: DVector<f64>,
    pub v_star: DVector<f64>,
    pub complementarity_residual: f64,
    pub z_identity_residual: f64,
    pub x_identity_residual: f64,
    /// Distance from `x*` to the emitted estimate's value at the paired
    /// dual argument; checks the decomposition against the projected map.
    pub membership_residual: f64,
}

/// Enumerate multiplier decompositions of the emitted estimate for a
/// constraint system with affine-in-(x,z) scenarios, one per active
/// constraint generator and normal-cone generator of `O`.
pub fn semilinear_multiplier_decomposition(
    spec: &ConstraintSystemSpec,
    xbar: &DVector<f64>,
    zbar: &DVector<f64>,
) -> Result<Vec<MultiplierDecomposition>> {
    spec.validate()?;
    let est = constraint_coderivative(spec, xbar, zbar)?;
    let xz = spec.joint(xbar, zbar);
    let m_dim = spec.phi.output_dim();
    let (nx, nz) = (spec.nx, spec.nz);

    let ebar = expected_map(&spec.phi, &spec.model, &xz)?
        .is_singleton()
        .ok_or(Error::NotSingleValued)?;
    // Weighted Jacobian blocks of the scenarios at the point.
    let mut jx = nalgebra::DMatrix::zeros(m_dim, nx);
    let mut jz = nalgebra::DMatrix::zeros(m_dim, nz);
    for (node, atom) in spec.phi.nodes().iter().zip(spec.model.atoms.iter()) {
        let jac = match node {
            IntegrandExpr::Affine { a, .. } => a.clone(),
            IntegrandExpr::Smooth { map } => map.jacobian(&xz),
            _ => {
                return Err(Error::PathUnavailable(
                    "multiplier decomposition needs single-valued smooth scenarios".into(),
                ))
            }
        };
        jx += jac.view((0, 0), (m_dim, nx)) * atom.weight;
        jz += jac.view((0, nx), (m_dim, nz)) * atom.weight;
    }

    let n_k = normal_cone(&spec.k_set, &ebar)?;
    let n_o = normal_cone(&spec.o_set, &xz)?;
    let mut lambdas: Vec<DVector<f64>> = n_k.generators().signed_generators();
    if lambdas.len() > 1 {
        let combined = lambdas.iter().fold(DVector::zeros(m_dim), |acc, g| acc + g);
        lambdas.push(combined);
    }
    lambdas.push(DVector::zeros(m_dim));
    let mut nus: Vec<DVector<f64>> = n_o.generators().signed_generators();
    nus.push(DVector::zeros(nx + nz));

    let mut out = Vec::new();
    for lam in &lambdas {
        for nu in &nus {
            let xi_x = jx.transpose() * lam;
            let xi_z = jz.transpose() * lam;
            let nu_x = DVector::from_fn(nx, |i, _| nu[i]);
            let nu_z = DVector::from_fn(nz, |i, _| nu[nx + i]);
            // Estimate element (x*, s_z) with s_z = -z*' for the map input z*'.
            let x_star = &xi_x + &nu_x;
            let s_z = &xi_z + &nu_z;
            let zstar_input = -&s_z;
            // Decomposition identities under the report convention
            // z* := s_z, v* := -nu_z, u* := -nu_x.
            let z_star = s_z.clone();
            let v_star = -&nu_z;
            let u_star = -&nu_x;
            let comp: f64 = lam
                .iter()
                .enumerate()
                .map(|(i, l)| (l * ebar[i]).abs())
                .fold(0.0, f64::max);
            let z_res = (&z_star + &v_star - &xi_z).norm();
            let x_res = (&x_star + &u_star - &xi_x).norm();
            let value = est.value(&zstar_input);
            let membership = if value.is_empty() {
                f64::INFINITY
            } else {
                value.distance(&x_star).unwrap_or(f64::INFINITY)
            };
            out.push(MultiplierDecomposition {
                lambda: lam.iter().cloned().collect(),
                x_star,
                z_star,
                u_star,
                v_star,
                complementarity_residual: comp,
                z_identity_residual: z_res,
                x_identity_residual: x_res,
                membership_residual: membership,
            });
        }
    }
    Ok(out)
}
