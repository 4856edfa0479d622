//! Finite scenario models and expected-integral multifunctions.
//!
//! A scenario model is a finite weighted atom list; expected values are
//! weighted Minkowski sums, selection sets are transportation-style polytopes
//! over per-scenario values, and the integrable Lipschitz properties are
//! checked atomwise with explicit evidence objects.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{HomogeneousMap, PolyhedralSet};
use crate::multifunction::{CoderivativeSet, GraphPoint, IntegrandExpr, SetValue};
use crate::oracle::Evaluable;
use crate::tol;

/// One scenario atom.
#[derive(Debug, Clone)]
pub struct Atom {
    pub id: String,
    pub weight: f64,
    /// Marks atoms discretizing the nonatomic part of the measure, which
    /// activates the convexity requirement of the standing assumptions.
    pub nonatomic: bool,
}

/// Finite weighted atom list standing in for the measure space.
#[derive(Debug, Clone)]
pub struct ScenarioModel {
    pub atoms: Vec<Atom>,
}

impl ScenarioModel {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for a in &atoms {
            if !(a.weight > 0.0 && a.weight.is_finite()) {
                return Err(Error::DomainError(format!(
                    "atom `{}` has nonpositive or nonfinite weight {}",
                    a.id, a.weight
                )));
            }
            if !seen.insert(a.id.clone()) {
                return Err(Error::DomainError(format!("duplicate atom id `{}`", a.id)));
            }
        }
        if atoms.is_empty() {
            return Err(Error::DomainError("scenario model needs at least one atom".into()));
        }
        Ok(ScenarioModel { atoms })
    }

    pub fn uniform(n: usize) -> Self {
        let atoms = (0..n)
            .map(|i| Atom { id: format!("s{}", i + 1), weight: 1.0 / n as f64, nonatomic: false })
            .collect();
        ScenarioModel { atoms }
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Scenario-indexed integrand: one catalog node per atom, shared dimensions.
#[derive(Debug, Clone)]
pub struct RandomIntegrand {
    nodes: Vec<IntegrandExpr>,
}

impl RandomIntegrand {
    pub fn new(nodes: Vec<IntegrandExpr>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::DomainError("random integrand needs at least one node".into()));
        }
        let (di, dout) = (nodes[0].input_dim(), nodes[0].output_dim());
        for n in &nodes {
            if n.input_dim() != di || n.output_dim() != dout {
                return Err(Error::DimensionError {
                    field: "random integrand".into(),
                    message: "scenario nodes disagree on dimensions".into(),
                });
            }
        }
        Ok(RandomIntegrand { nodes })
    }

    /// The same deterministic node in every scenario.
    pub fn constant(node: IntegrandExpr, scenarios: usize) -> Self {
        RandomIntegrand { nodes: vec![node; scenarios] }
    }

    pub fn nodes(&self) -> &[IntegrandExpr] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &IntegrandExpr {
        &self.nodes[i]
    }

    pub fn input_dim(&self) -> usize {
        self.nodes[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.nodes[0].output_dim()
    }
}

/// `E[Φ](x) = Σ w_i Φ_i(x)` as a set value.
pub fn expected_map(
    phi: &RandomIntegrand,
    m: &ScenarioModel,
    x: &DVector<f64>,
) -> Result<SetValue> {
    check_alignment(phi, m)?;
    let mut acc: Option<SetValue> = None;
    for (node, atom) in phi.nodes.iter().zip(m.atoms.iter()) {
        let v = node.evaluate(x)?.scale(atom.weight);
        if v.is_empty() {
            return Err(Error::DomainError(format!(
                "scenario `{}` has an empty value at the query point",
                atom.id
            )));
        }
        acc = Some(match acc {
            None => v,
            Some(s) => s.minkowski_sum(&v),
        });
    }
    Ok(acc.unwrap())
}

fn check_alignment(phi: &RandomIntegrand, m: &ScenarioModel) -> Result<()> {
    if phi.nodes.len() != m.atoms.len() {
        return Err(Error::DimensionError {
            field: "scenario model".into(),
            message: format!(
                "integrand has {} scenarios, model has {} atoms",
                phi.nodes.len(),
                m.atoms.len()
            ),
        });
    }
    Ok(())
}

/// The expected map as an evaluable multifunction for the oracles.
pub struct ExpectedMapFn<'a> {
    pub phi: &'a RandomIntegrand,
    pub model: &'a ScenarioModel,
}

impl Evaluable for ExpectedMapFn<'_> {
    fn input_dim(&self) -> usize {
        self.phi.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.phi.output_dim()
    }

    fn eval(&self, x: &DVector<f64>) -> Result<SetValue> {
        expected_map(self.phi, self.model, x)
    }

    fn preimage(&self, y: &DVector<f64>) -> Option<SetValue> {
        // Exact when every scenario is a plain affine map.
        let mut a_sum = nalgebra::DMatrix::zeros(self.output_dim(), self.input_dim());
        let mut b_sum = DVector::zeros(self.output_dim());
        for (node, atom) in self.phi.nodes.iter().zip(self.model.atoms.iter()) {
            match node {
                IntegrandExpr::Affine { a, b } => {
                    a_sum += a * atom.weight;
                    b_sum += b * atom.weight;
                }
                _ => return None,
            }
        }
        IntegrandExpr::Affine { a: a_sum, b: b_sum }.preimage(y)
    }
}

/// One integrable selection: a value choice per atom.
#[derive(Debug, Clone)]
pub struct Selection {
    pub per_atom: Vec<DVector<f64>>,
}

/// The selection set `{𝓎 : 𝓎(t_i) ∈ Φ_i(x), Σ w_i 𝓎(t_i) = y}` with
/// enumerators for its extreme points and face representatives.
pub struct SelectionSet {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    dim_y: usize,
    atoms: usize,
    polytope: PolyhedralSet,
}

impl SelectionSet {
    fn unpack(&self, stacked: &DVector<f64>) -> Selection {
        let per_atom = (0..self.atoms)
            .map(|k| DVector::from_fn(self.dim_y, |i, _| stacked[k * self.dim_y + i]))
            .collect();
        Selection { per_atom }
    }

    /// Extreme selections (vertices of the selection polytope).
    pub fn extreme(&self) -> Vec<Selection> {
        self.polytope.vertices().iter().map(|v| self.unpack(v)).collect()
    }

    /// Relative-interior representatives of every face of the polytope;
    /// a finite cover of all coderivative configurations along selections.
    pub fn representatives(&self) -> Result<Vec<Selection>> {
        let mut out = Vec::new();
        for f in self.polytope.faces()? {
            out.push(self.unpack(&f.relint_point));
        }
        Ok(out)
    }

    pub fn contains(&self, s: &Selection, tolerance: f64) -> bool {
        let mut stacked = DVector::zeros(self.atoms * self.dim_y);
        for (k, v) in s.per_atom.iter().enumerate() {
            for i in 0..self.dim_y {
                stacked[k * self.dim_y + i] = v[i];
            }
        }
        self.polytope.contains(&stacked, tolerance)
    }

    pub fn is_empty(&self) -> bool {
        self.polytope.is_empty()
    }
}

/// Build the selection set at `(x, y)`.
///
/// Inner semicompactness of the selection map is recorded as satisfied
/// whenever every scenario value at `x` is bounded; the flag is surfaced so
/// downstream certificates can log it as an assumption.
pub fn selection_set(
    phi: &RandomIntegrand,
    m: &ScenarioModel,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<SelectionSet> {
    check_alignment(phi, m)?;
    let e = expected_map(phi, m, x)?;
    let dist = e.distance(y).unwrap_or(f64::INFINITY);
    if dist > 1e-7 {
        return Err(Error::NotInExpectedValue(dist));
    }
    let dim_y = phi.output_dim();
    let atoms = m.len();
    // Stack the per-atom values; each must lie in its (convexified) value
    // set and the weighted sum is pinned to y.
    let mut block: Option<PolyhedralSet> = None;
    for (node, _atom) in phi.nodes.iter().zip(m.atoms.iter()) {
        let val = node.evaluate(x)?;
        let hull = match val.pieces() {
            [single] => single.clone(),
            pieces => {
                // Union values enter through their convex hull; extreme
                // selections below stay inside actual pieces.
                let mut vertices = Vec::new();
                let mut rays = Vec::new();
                let mut lineality = Vec::new();
                for p in pieces {
                    let vr = p.vrep();
                    vertices.extend(vr.vertices.iter().cloned());
                    rays.extend(vr.rays.iter().cloned());
                    lineality.extend(vr.lineality.iter().cloned());
                }
                PolyhedralSet::from_vrep(
                    dim_y,
                    &crate::geometry::VRep { vertices, rays, lineality },
                )
            }
        };
        block = Some(match block {
            None => hull,
            Some(b) => b.product(&hull),
        });
    }
    let mut polytope = block.unwrap();
    let total = atoms * dim_y;
    let mut rows = Vec::new();
    let mut offs = Vec::new();
    for i in 0..dim_y {
        let mut row = DVector::zeros(total);
        for (k, atom) in m.atoms.iter().enumerate() {
            row[k * dim_y + i] = atom.weight;
        }
        rows.push(row.clone());
        offs.push(y[i]);
        rows.push(-row);
        offs.push(-y[i]);
    }
    polytope = polytope.intersect(&PolyhedralSet::new(total, rows, offs));
    if polytope.is_empty() {
        return Err(Error::NotInExpectedValue(dist.max(tol::TAU_MEM)));
    }
    Ok(SelectionSet { x: x.clone(), y: y.clone(), dim_y, atoms, polytope })
}

/// Integrated coderivative `Σ w_i D*Φ_i(x, 𝓎(t_i))(·)` as a homogeneous map.
///
/// This is the finite-scenario integral of per-scenario coderivatives along a
/// fixed selection; it is an upper estimate for the coderivative of the
/// expected map and is therefore tagged `exact = false`.
pub fn expected_coderivative_map(
    phi: &RandomIntegrand,
    m: &ScenarioModel,
    x: &DVector<f64>,
    selection: &Selection,
) -> Result<crate::multifunction::CoderivativeMap> {
    check_alignment(phi, m)?;
    if selection.per_atom.len() != m.len() {
        return Err(Error::SelectionInfeasible("selection length mismatch".into()));
    }
    let mut acc: Option<HomogeneousMap> = None;
    for (k, (node, atom)) in phi.nodes.iter().zip(m.atoms.iter()).enumerate() {
        let yk = &selection.per_atom[k];
        let val = node.evaluate(x)?;
        if !val.contains(yk, 1e-7) {
            return Err(Error::SelectionInfeasible(format!(
                "selection value for atom `{}` is outside the scenario value set",
                atom.id
            )));
        }
        let cm = node.coderivative_map(&GraphPoint::new(x.clone(), yk.clone()))?;
        let scaled = cm.map.scale_output(atom.weight);
        acc = Some(match acc {
            None => scaled,
            Some(s) => s.sum(&scaled),
        });
    }
    Ok(crate::multifunction::CoderivativeMap { map: acc.unwrap(), exact: false })
}

/// Value form of [`expected_coderivative_map`] at one dual vector.
pub fn expected_coderivative(
    phi: &RandomIntegrand,
    m: &ScenarioModel,
    x: &DVector<f64>,
    selection: &Selection,
    ystar: &DVector<f64>,
) -> Result<CoderivativeSet> {
    Ok(expected_coderivative_map(phi, m, x, selection)?.value(ystar))
}

/// Per-atom standing-assumption report.
#[derive(Debug, Clone)]
pub struct AtomStanding {
    pub id: String,
    pub convex: bool,
    /// Estimated value bound `κ(t)` over the sampled ball; infinite for
    /// unbounded values.
    pub kappa: f64,
}

#[derive(Debug, Clone)]
pub struct StandingReport {
    pub per_atom: Vec<AtomStanding>,
    /// Convexity on the nonatomic-flagged atoms.
    pub convexity_holds: bool,
    /// The uniform bound `Φ_t(x) ⊆ κ(t)B` over the sampled ball.
    pub bound_holds: bool,
    /// `Σ w_i κ(t_i)`, finite iff `bound_holds`.
    pub integral_kappa: f64,
    /// Set when the bound fails: the truncated pathway is the remedy.
    pub suggest_truncation: bool,
}

/// Verify the standing assumptions on a sampled ball around `center`.
pub fn check_standing(
    phi: &RandomIntegrand,
    m: &ScenarioModel,
    center: &DVector<f64>,
    rho: f64,
    seed: u64,
) -> Result<StandingReport> {
    check_alignment(phi, m)?;
    if rho <= 0.0 {
        return Err(Error::DomainError("standing-assumption radius must be positive".into()));
    }
    let dirs = crate::oracle::unit_directions(center.len(), 32, seed);
    let mut per_atom = Vec::new();
    let mut convexity_holds = true;
    let mut bound_holds = true;
    let mut integral = 0.0;
    for (node, atom) in phi.nodes.iter().zip(m.atoms.iter()) {
        let convex = node.convex_valued();
        if atom.nonatomic && !convex {
            convexity_holds = false;
        }
        let mut kappa: f64 = 0.0;
        for d in &dirs {
            for t in [0.0, rho * 0.5, rho] {
                let x = center + d * t;
                match node.evaluate(&x) {
                    Ok(v) => kappa = kappa.max(v.sup_norm()),
                    Err(_) => {}
                }
            }
        }
        if !kappa.is_finite() {
            bound_holds = false;
        }
        integral += atom.weight * kappa;
        per_atom.push(AtomStanding { id: atom.id.clone(), convex, kappa });
    }
    Ok(StandingReport {
        per_atom,
        convexity_holds,
        bound_holds,
        integral_kappa: integral,
        suggest_truncation: !bound_holds,
    })
}

/// Which integrable Lipschitz property is being checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LipschitzKind {
    /// Two-point inclusion `Φ_t(x) ⊆ Φ_t(x') + ℓ(t)‖x - x'‖B`.
    Locally,
    /// Coderivative bound `sup{‖x*‖ : x* ∈ D*Φ_t(·)(y*)} <= ℓ(t)‖y*‖`.
    Quasi,
    /// Windowed inclusion with the value ball `B_γ(𝓎(t))`.
    LipschitzLike,
}

#[derive(Debug, Clone)]
pub struct LipschitzWitness {
    pub atom: String,
    pub point: DVector<f64>,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct AtomModulus {
    pub id: String,
    pub modulus: f64,
}

#[derive(Debug, Clone)]
pub struct LipschitzEvidence {
    pub kind: LipschitzKind,
    pub eta: f64,
    pub gamma: f64,
    pub per_atom: Vec<AtomModulus>,
    pub holds: bool,
    pub witness: Option<LipschitzWitness>,
    /// `Σ w_i ℓ(t_i)`; the integrability of the modulus.
    pub weighted_modulus: f64,
}

#[derive(Debug, Clone)]
pub struct LipschitzCheckOptions {
    pub eta: f64,
    pub gamma: f64,
    pub resolution: usize,
    pub seed: u64,
}

impl Default for LipschitzCheckOptions {
    fn default() -> Self {
        LipschitzCheckOptions { eta: 0.1, gamma: 0.5, resolution: 11, seed: 0 }
    }
}

/// Check one of the integrable Lipschitz properties of `Φ` around a graph
/// point of the expected map with a chosen selection.
pub fn lipschitz_property_check(
    phi: &RandomIntegrand,
    m: &ScenarioModel,
    x: &DVector<f64>,
    selection: &Selection,
    kind: LipschitzKind,
    opts: &LipschitzCheckOptions,
) -> Result<LipschitzEvidence> {
    check_alignment(phi, m)?;
    let mut per_atom = Vec::new();
    let mut witness: Option<LipschitzWitness> = None;
    let mut weighted = 0.0;
    for (k, (node, atom)) in phi.nodes.iter().zip(m.atoms.iter()).enumerate() {
        let yk = &selection.per_atom[k];
        let modulus = match kind {
            LipschitzKind::Quasi => quasi_modulus(node, atom, x, yk, opts, &mut witness)?,
            LipschitzKind::Locally => {
                pair_modulus(node, atom, x, None, opts, &mut witness)?
            }
            LipschitzKind::LipschitzLike => {
                pair_modulus(node, atom, x, Some(yk), opts, &mut witness)?
            }
        };
        weighted += atom.weight * modulus;
        per_atom.push(AtomModulus { id: atom.id.clone(), modulus });
    }
    let holds = per_atom.iter().all(|a| a.modulus.is_finite()) && witness.is_none();
    Ok(LipschitzEvidence {
        kind,
        eta: opts.eta,
        gamma: opts.gamma,
        per_atom,
        holds,
        witness,
        weighted_modulus: weighted,
    })
}

/// Quasi-Lipschitz modulus of one scenario: the largest coderivative outer
/// norm over sampled graph points near `(x, y_k)`.
fn quasi_modulus(
    node: &IntegrandExpr,
    atom: &Atom,
    x: &DVector<f64>,
    yk: &DVector<f64>,
    opts: &LipschitzCheckOptions,
    witness: &mut Option<LipschitzWitness>,
) -> Result<f64> {
    let dirs = crate::oracle::unit_directions(x.len(), 8, opts.seed);
    let mut points = vec![x.clone()];
    for d in &dirs {
        points.push(x + d * (opts.eta * 0.5));
    }
    let mut modulus: f64 = 0.0;
    for px in &points {
        let val = match node.evaluate(px) {
            Ok(v) if !v.is_empty() => v,
            _ => continue,
        };
        // Graph values near the selection point: face representatives
        // within eta.
        let mut ys = vec![];
        if val.contains(yk, 1e-7) {
            ys.push(yk.clone());
        }
        for rep in val.face_representatives()? {
            if (&rep - yk).norm() <= opts.eta {
                ys.push(rep);
            }
        }
        for y in &ys {
            let cm = node.coderivative_map(&GraphPoint::new(px.clone(), y.clone()))?;
            let on = cm.map.outer_norm();
            if !on.value.is_finite() {
                if witness.is_none() {
                    *witness = Some(LipschitzWitness {
                        atom: atom.id.clone(),
                        point: px.clone(),
                        detail: "coderivative outer norm is unbounded (nonzero value at y* = 0)"
                            .into(),
                    });
                }
                return Ok(f64::INFINITY);
            }
            modulus = modulus.max(on.l2_interval.1.max(on.value));
        }
    }
    Ok(modulus)
}

/// Sampled excess-ratio modulus for the two-point inclusions, optionally
/// windowed by the value ball around the selection value.
fn pair_modulus(
    node: &IntegrandExpr,
    atom: &Atom,
    x: &DVector<f64>,
    window_center: Option<&DVector<f64>>,
    opts: &LipschitzCheckOptions,
    witness: &mut Option<LipschitzWitness>,
) -> Result<f64> {
    let dirs = crate::oracle::unit_directions(x.len(), 24, opts.seed ^ 7);
    let window = window_center.map(|c| {
        SetValue::box_value(&c.add_scalar(-opts.gamma), &c.add_scalar(opts.gamma))
    });
    let steps: Vec<f64> = (1..=opts.resolution.min(11))
        .map(|i| opts.eta * i as f64 / opts.resolution.min(11) as f64)
        .collect();
    let mut modulus: f64 = 0.0;
    for d in &dirs {
        for &s in &steps {
            let u = x + d * s;
            let v = x - d * (s * 0.5);
            for (a, b) in [(&u, x), (x, &u), (&u, &v)] {
                let (Ok(fa), Ok(fb)) = (node.evaluate(a), node.evaluate(b)) else { continue };
                if fa.is_empty() || fb.is_empty() {
                    continue;
                }
                let fa = match &window {
                    Some(w) => fa.intersect(w),
                    None => fa,
                };
                if fa.is_empty() {
                    continue;
                }
                let e = match fa.excess_over(&fb) {
                    Ok(e) => e,
                    Err(_) => {
                        if witness.is_none() {
                            *witness = Some(LipschitzWitness {
                                atom: atom.id.clone(),
                                point: a.clone(),
                                detail: "unbounded value set defeats the excess bound".into(),
                            });
                        }
                        return Ok(f64::INFINITY);
                    }
                };
                let dist = (a - b).norm();
                if dist > 1e-12 {
                    modulus = modulus.max(e / dist);
                }
            }
        }
    }
    Ok(modulus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multifunction::PolyMap;
    use nalgebra::DMatrix;

    fn v(entries: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(entries)
    }

    fn box_node(center: f64, radius: f64) -> IntegrandExpr {
        IntegrandExpr::BoxValued {
            center: PolyMap::constant(1, &v(&[center])),
            radius: PolyMap::constant(1, &v(&[radius])),
        }
    }

    #[test]
    fn expected_interval_halves() {
        // weights 1/2, 1/2; [0,1] and [1,2] -> [1/2, 3/2]
        let phi = RandomIntegrand::new(vec![box_node(0.5, 0.5), box_node(1.5, 0.5)]).unwrap();
        let m = ScenarioModel::uniform(2);
        let e = expected_map(&phi, &m, &v(&[0.0])).unwrap();
        assert!(e.contains(&v(&[0.5]), 1e-9) && e.contains(&v(&[1.5]), 1e-9));
        assert!(!e.contains(&v(&[0.49]), 1e-9));
    }

    #[test]
    fn expected_affine_singletons() {
        let a1 = DMatrix::from_row_slice(1, 1, &[1.0]);
        let a2 = DMatrix::from_row_slice(1, 1, &[3.0]);
        let phi = RandomIntegrand::new(vec![
            IntegrandExpr::affine(a1, v(&[0.0])),
            IntegrandExpr::affine(a2, v(&[0.0])),
        ])
        .unwrap();
        let m = ScenarioModel::uniform(2);
        let e = expected_map(&phi, &m, &v(&[2.0])).unwrap();
        // (1/2·1 + 1/2·3)·2 = 4
        assert_eq!(e.is_singleton().unwrap(), v(&[4.0]));
    }

    #[test]
    fn selection_extremes_of_two_intervals() {
        // Φ1 = Φ2 = [0,1], weights 1/2, y = 1/2 -> extreme selections (0,1), (1,0).
        let phi = RandomIntegrand::new(vec![box_node(0.5, 0.5), box_node(0.5, 0.5)]).unwrap();
        let m = ScenarioModel::uniform(2);
        let s = selection_set(&phi, &m, &v(&[0.0]), &v(&[0.5])).unwrap();
        let ext = s.extreme();
        assert_eq!(ext.len(), 2);
        let mut pairs: Vec<(f64, f64)> =
            ext.iter().map(|e| (e.per_atom[0][0], e.per_atom[1][0])).collect();
        pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((pairs[0].0 - 0.0).abs() < 1e-9 && (pairs[0].1 - 1.0).abs() < 1e-9);
        assert!((pairs[1].0 - 1.0).abs() < 1e-9 && (pairs[1].1 - 0.0).abs() < 1e-9);
    }

    #[test]
    fn selection_weighted_sum_reproduces_y() {
        let phi = RandomIntegrand::new(vec![box_node(0.5, 0.5), box_node(1.5, 0.5)]).unwrap();
        let m = ScenarioModel::uniform(2);
        let y = v(&[1.1]);
        let s = selection_set(&phi, &m, &v(&[0.0]), &y).unwrap();
        for sel in s.extreme() {
            let sum: f64 = sel
                .per_atom
                .iter()
                .zip(m.atoms.iter())
                .map(|(yv, a)| a.weight * yv[0])
                .sum();
            assert!((sum - 1.1).abs() < 1e-9);
        }
    }

    #[test]
    fn selection_rejects_outside_value() {
        let phi = RandomIntegrand::new(vec![box_node(0.5, 0.5), box_node(1.5, 0.5)]).unwrap();
        let m = ScenarioModel::uniform(2);
        assert!(matches!(
            selection_set(&phi, &m, &v(&[0.0]), &v(&[2.0])),
            Err(Error::NotInExpectedValue(_))
        ));
    }

    #[test]
    fn singleton_scenarios_have_unique_selection() {
        let phi = RandomIntegrand::new(vec![
            IntegrandExpr::affine(DMatrix::identity(1, 1), v(&[0.0])),
            IntegrandExpr::affine(DMatrix::identity(1, 1), v(&[1.0])),
        ])
        .unwrap();
        let m = ScenarioModel::uniform(2);
        let x = v(&[1.0]);
        let e = expected_map(&phi, &m, &x).unwrap().is_singleton().unwrap();
        let s = selection_set(&phi, &m, &x, &e).unwrap();
        assert_eq!(s.extreme().len(), 1);
    }

    #[test]
    fn expected_coderivative_of_affine_scenarios() {
        let a1 = DMatrix::from_row_slice(1, 1, &[1.0]);
        let a2 = DMatrix::from_row_slice(1, 1, &[3.0]);
        let phi = RandomIntegrand::new(vec![
            IntegrandExpr::affine(a1, v(&[0.0])),
            IntegrandExpr::affine(a2, v(&[0.0])),
        ])
        .unwrap();
        let m = ScenarioModel::uniform(2);
        let x = v(&[2.0]);
        let sel = Selection { per_atom: vec![v(&[2.0]), v(&[6.0])] };
        let d = expected_coderivative(&phi, &m, &x, &sel, &v(&[1.0])).unwrap();
        assert!(!d.exact);
        assert!(d.contains(&v(&[2.0]), 1e-9));
        assert!(!d.contains(&v(&[2.1]), 1e-9));
    }

    #[test]
    fn expected_coderivative_zero_dual_quasi() {
        let phi = RandomIntegrand::new(vec![
            IntegrandExpr::affine(DMatrix::identity(1, 1), v(&[0.0])),
            IntegrandExpr::affine(DMatrix::from_row_slice(1, 1, &[2.0]), v(&[0.0])),
        ])
        .unwrap();
        let m = ScenarioModel::uniform(2);
        let sel = Selection { per_atom: vec![v(&[0.0]), v(&[0.0])] };
        let d = expected_coderivative(&phi, &m, &v(&[0.0]), &sel, &v(&[0.0])).unwrap();
        assert!(d.contains(&v(&[0.0]), 1e-9));
        assert!(!d.contains(&v(&[0.1]), 1e-9));
    }

    #[test]
    fn standing_report_bounded_boxes() {
        let phi = RandomIntegrand::new(vec![box_node(0.0, 1.0), box_node(1.0, 1.0)]).unwrap();
        let m = ScenarioModel::uniform(2);
        let r = check_standing(&phi, &m, &v(&[0.0]), 0.5, 1).unwrap();
        assert!(r.bound_holds && r.convexity_holds);
        assert!(r.integral_kappa.is_finite());
        assert!(!r.suggest_truncation);
    }

    #[test]
    fn standing_report_flags_cones() {
        let phi = RandomIntegrand::new(vec![IntegrandExpr::NormalConeMap {
            c: PolyhedralSet::nonpositive_orthant(1),
        }])
        .unwrap();
        let m = ScenarioModel::uniform(1);
        let r = check_standing(&phi, &m, &v(&[0.0]), 0.5, 1).unwrap();
        assert!(!r.bound_holds);
        assert!(r.suggest_truncation);
    }

    #[test]
    fn standing_affine_kappa_close_to_exact() {
        // ‖Ax + b‖ over B_1(0) with ‖A‖ = 2, ‖b‖ = 1: exact kappa = 3.
        let a = DMatrix::from_row_slice(1, 1, &[2.0]);
        let phi =
            RandomIntegrand::new(vec![IntegrandExpr::affine(a, v(&[1.0]))]).unwrap();
        let m = ScenarioModel::uniform(1);
        let r = check_standing(&phi, &m, &v(&[0.0]), 1.0, 1).unwrap();
        assert!(r.per_atom[0].kappa <= 3.0 + 1e-9);
        assert!(r.per_atom[0].kappa >= 3.0 - 0.05);
    }

    #[test]
    fn quasi_check_affine_holds() {
        let a1 = DMatrix::from_row_slice(1, 1, &[1.0]);
        let a2 = DMatrix::from_row_slice(1, 1, &[-2.0]);
        let phi = RandomIntegrand::new(vec![
            IntegrandExpr::affine(a1, v(&[0.0])),
            IntegrandExpr::affine(a2, v(&[0.0])),
        ])
        .unwrap();
        let m = ScenarioModel::uniform(2);
        let sel = Selection { per_atom: vec![v(&[0.0]), v(&[0.0])] };
        let ev = lipschitz_property_check(
            &phi,
            &m,
            &v(&[0.0]),
            &sel,
            LipschitzKind::Quasi,
            &LipschitzCheckOptions::default(),
        )
        .unwrap();
        assert!(ev.holds);
        assert!((ev.per_atom[0].modulus - 1.0).abs() < 1e-9);
        assert!((ev.per_atom[1].modulus - 2.0).abs() < 1e-9);
    }

    #[test]
    fn quasi_check_normal_cone_fails() {
        let phi = RandomIntegrand::new(vec![IntegrandExpr::NormalConeMap {
            c: PolyhedralSet::nonpositive_orthant(1),
        }])
        .unwrap();
        let m = ScenarioModel::uniform(1);
        let sel = Selection { per_atom: vec![v(&[0.0])] };
        let ev = lipschitz_property_check(
            &phi,
            &m,
            &v(&[0.0]),
            &sel,
            LipschitzKind::Quasi,
            &LipschitzCheckOptions::default(),
        )
        .unwrap();
        assert!(!ev.holds);
        assert!(ev.witness.is_some());
    }

    #[test]
    fn locally_check_box_with_lipschitz_payload() {
        // center(x) = x (Lip 1), radius = 1 (Lip 0): modulus ~ 1.
        let node = IntegrandExpr::BoxValued {
            center: PolyMap::affine(&DMatrix::identity(1, 1), &v(&[0.0])),
            radius: PolyMap::constant(1, &v(&[1.0])),
        };
        let phi = RandomIntegrand::new(vec![node]).unwrap();
        let m = ScenarioModel::uniform(1);
        let sel = Selection { per_atom: vec![v(&[0.0])] };
        let ev = lipschitz_property_check(
            &phi,
            &m,
            &v(&[0.0]),
            &sel,
            LipschitzKind::Locally,
            &LipschitzCheckOptions::default(),
        )
        .unwrap();
        assert!(ev.holds);
        assert!(ev.per_atom[0].modulus <= 1.0 + 0.05);
        assert!(ev.per_atom[0].modulus >= 0.9);
    }
}
