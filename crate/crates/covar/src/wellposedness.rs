//! The certification core.
//!
//! Lipschitz-like stability is certified through the coderivative criterion
//! (`D*F(x,y)(0) = {0}`, with the exact bound `lip F = ‖D*F‖`), metric
//! regularity through the kernel criterion (`ker D*F = {0}` with the bound
//! from the inverse map's outer norm). Both checks run on polyhedral
//! homogeneous maps, so every verdict is a finite computation: slices at
//! zero, kernels, outer norms over sphere faces.
//!
//! "Inconclusive" is a first-class verdict: a failed check on an upper
//! estimate never refutes the underlying property, and a passed check on an
//! estimate certifies it (the criteria are sufficient in that direction).
//! The engine computes both `‖D‖` and `‖D‖⁻¹`-style bounds and reports them
//! side by side without asserting any product identity between them.

use nalgebra::DVector;
use serde::Serialize;

use crate::geometry::{sphere_feasibility, HomogeneousMap, PolyhedralCone};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    LipschitzLike,
    MetricRegularity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Refuted,
    Inconclusive,
}

/// Outcome record of a well-posedness check.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub property: Property,
    pub verdict: Verdict,
    /// The reported modulus bound (lip or reg). For inexact inputs this is a
    /// one-sided bound; `bound_relation` records the direction.
    pub bound: Option<f64>,
    /// Enclosure of the true ℓ₂ modulus when the bound came from an
    /// ℓ∞-sphere computation.
    pub bound_interval: Option<(f64, f64)>,
    /// "=" when the bound is exact, "<=" when it is an upper bound from an
    /// estimate.
    pub bound_relation: &'static str,
    pub witness: Option<Vec<f64>>,
    pub assumptions_log: Vec<String>,
    /// Identifiers of the certification rules applied, in order.
    pub references: Vec<String>,
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().cloned().collect()
}

/// Certify the Lipschitz-like property from a coderivative map (or an upper
/// estimate of one, `exact = false`).
pub fn lipschitz_certify(d: &HomogeneousMap, exact: bool) -> Certificate {
    let mut log = Vec::new();
    let mut refs = vec!["coderivative-criterion".to_string()];
    log.push(format!(
        "coderivative input treated as {}",
        if exact { "exact" } else { "upper estimate (sufficient direction only)" }
    ));
    let trivial = d.zero_value_trivial();
    if trivial {
        let on = d.outer_norm();
        refs.push("outer-norm-bound".into());
        log.push("D(0) = {0}: zero-dual slice is trivial".into());
        if !exact {
            log.push("bound is an upper bound for the true modulus".into());
        }
        Certificate {
            property: Property::LipschitzLike,
            verdict: Verdict::Certified,
            bound: Some(on.value),
            bound_interval: Some(on.l2_interval),
            bound_relation: if exact && on.exact_l2 { "=" } else { "<=" },
            witness: None,
            assumptions_log: log,
            references: refs,
        }
    } else {
        let witness = d.zero_value_witness().map(|w| to_vec(&w));
        log.push("D(0) contains a nonzero element".into());
        if exact {
            Certificate {
                property: Property::LipschitzLike,
                verdict: Verdict::Refuted,
                bound: Some(f64::INFINITY),
                bound_interval: None,
                bound_relation: "=",
                witness,
                assumptions_log: log,
                references: refs,
            }
        } else {
            log.push(
                "criterion failed on an upper estimate: no refutation can be drawn".into(),
            );
            Certificate {
                property: Property::LipschitzLike,
                verdict: Verdict::Inconclusive,
                bound: None,
                bound_interval: None,
                bound_relation: "<=",
                witness,
                assumptions_log: log,
                references: refs,
            }
        }
    }
}

/// Certify metric regularity from a coderivative map via the kernel
/// criterion.
pub fn metric_regularity_certify(d: &HomogeneousMap, exact: bool) -> Certificate {
    let mut log = Vec::new();
    let mut refs = vec!["kernel-criterion".to_string()];
    log.push(format!(
        "coderivative input treated as {}",
        if exact { "exact" } else { "upper estimate (sufficient direction only)" }
    ));
    let forward = d.outer_norm();
    log.push(format!(
        "forward outer norm ‖D‖ = {:.12e}; reciprocal {:.12e} (reported, not asserted)",
        forward.value,
        1.0 / forward.value
    ));
    if d.kernel_trivial() {
        let inv = d.swap().outer_norm();
        refs.push("inverse-outer-norm-bound".into());
        log.push("ker D = {0}: no unit dual reaches zero".into());
        Certificate {
            property: Property::MetricRegularity,
            verdict: Verdict::Certified,
            bound: Some(inv.value),
            bound_interval: Some(inv.l2_interval),
            bound_relation: if exact && inv.exact_l2 { "=" } else { "<=" },
            witness: None,
            assumptions_log: log,
            references: refs,
        }
    } else {
        let witness = d.kernel_witness().map(|w| to_vec(&w));
        log.push("ker D contains a nonzero dual vector".into());
        if exact {
            Certificate {
                property: Property::MetricRegularity,
                verdict: Verdict::Refuted,
                bound: Some(f64::INFINITY),
                bound_interval: None,
                bound_relation: "=",
                witness,
                assumptions_log: log,
                references: refs,
            }
        } else {
            log.push(
                "criterion failed on an upper estimate: no refutation can be drawn".into(),
            );
            Certificate {
                property: Property::MetricRegularity,
                verdict: Verdict::Inconclusive,
                bound: None,
                bound_interval: None,
                bound_relation: "<=",
                witness,
                assumptions_log: log,
                references: refs,
            }
        }
    }
}

/// A dual-side nondegeneracy implication: no unit vector in the designated
/// block may satisfy all memberships simultaneously.
///
/// Memberships are a conjunction of fixed cones plus, for each group, one
/// alternative out of a finite union. The query holds when every combination
/// is infeasible on every face of the unit sphere.
#[derive(Debug, Clone)]
pub struct ImplicationQuery {
    pub dim: usize,
    pub fixed: Vec<PolyhedralCone>,
    pub groups: Vec<Vec<PolyhedralCone>>,
    pub norm_block: std::ops::Range<usize>,
}

#[derive(Debug, Clone)]
pub enum QualificationResult {
    Holds,
    Fails { witness: DVector<f64> },
}

impl QualificationResult {
    pub fn holds(&self) -> bool {
        matches!(self, QualificationResult::Holds)
    }
}

/// Search for a unit-norm violator of the implication template.
pub fn qualification_check(q: &ImplicationQuery) -> QualificationResult {
    let mut chosen: Vec<usize> = vec![0; q.groups.len()];
    loop {
        let mut cones = q.fixed.clone();
        for (g, &c) in q.groups.iter().zip(chosen.iter()) {
            cones.push(g[c].clone());
        }
        if let Some(w) = sphere_feasibility(q.dim, &cones, q.norm_block.clone()) {
            return QualificationResult::Fails { witness: w };
        }
        // Advance the mixed-radix counter over group choices.
        let mut i = 0;
        loop {
            if i == q.groups.len() {
                return QualificationResult::Holds;
            }
            chosen[i] += 1;
            if chosen[i] < q.groups[i].len() {
                break;
            }
            chosen[i] = 0;
            i += 1;
        }
    }
}

/// The adjoint generalized equation `0 ∈ Σ_k Term_k(y*)` restricted to unit
/// duals. Terms are positively homogeneous polyhedral maps sharing input and
/// output dimensions.
#[derive(Debug, Clone)]
pub struct AdjointEquation {
    pub dual_dim: usize,
    pub value_dim: usize,
    pub terms: Vec<HomogeneousMap>,
}

#[derive(Debug, Clone)]
pub enum AdjointOutcome {
    TrivialOnly,
    Nontrivial { witness: DVector<f64> },
}

impl AdjointOutcome {
    pub fn trivial_only(&self) -> bool {
        matches!(self, AdjointOutcome::TrivialOnly)
    }
}

/// Decide whether the adjoint equation admits a nontrivial solution.
///
/// Feasibility runs over joint variables `(y*, a_1, ..., a_k)` with
/// `(y*, a_k)` in a graph piece of each term and `Σ a_k = 0`, normalized by
/// `‖y*‖∞ = 1`; the first witness in deterministic face order is returned.
pub fn adjoint_solve(eq: &AdjointEquation) -> AdjointOutcome {
    let m = eq.dual_dim;
    let n = eq.value_dim;
    let k = eq.terms.len();
    let total = m + k * n;

    // Σ a_k = 0 as paired rows.
    let mut sum_rows = Vec::new();
    for i in 0..n {
        let mut row = DVector::zeros(total);
        for t in 0..k {
            row[m + t * n + i] = 1.0;
        }
        sum_rows.push(row.clone());
        sum_rows.push(-row);
    }
    let fixed = vec![PolyhedralCone::from_rows(total, sum_rows)];

    let groups: Vec<Vec<PolyhedralCone>> = eq
        .terms
        .iter()
        .enumerate()
        .map(|(t, term)| {
            term.graph_pieces()
                .into_iter()
                .map(|p| {
                    // Embed the (y*, a) piece at coordinates (0..m, block t).
                    let at: Vec<usize> =
                        (0..m).chain(m + t * n..m + (t + 1) * n).collect();
                    crate::geometry::lift_cone(&p, total, &at)
                })
                .collect()
        })
        .collect();

    let q = ImplicationQuery { dim: total, fixed, groups, norm_block: 0..m };
    match qualification_check(&q) {
        QualificationResult::Holds => AdjointOutcome::TrivialOnly,
        QualificationResult::Fails { witness } => {
            let ystar = DVector::from_fn(m, |i, _| witness[i]);
            AdjointOutcome::Nontrivial { witness: ystar }
        }
    }
}
