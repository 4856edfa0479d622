//! Expression trees over a closed catalog of structured multifunctions with
//! exact per-node coderivative rules.
//!
//! Every node evaluates to a finite union of convex polyhedra, and its
//! limiting coderivative at a graph point is produced as a positively
//! homogeneous polyhedral mapping (see [`crate::geometry::HomogeneousMap`]).
//! Leaf nodes (affine, smooth polynomial, polyhedral graphs, normal-cone
//! maps, subgradient maps) get exact limiting constructions; `Sum` and the
//! smooth-plus composition return calculus upper estimates tagged
//! `exact = false`, and downstream certificates built from inexact sets stay
//! sufficient-condition verdicts.

pub mod polymap;
pub mod value;

pub use polymap::{CplFunction, Monomial, PolyMap, Polynomial};
pub use value::SetValue;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{
    self, HomogeneousMap, PolyhedralCone, PolyhedralSet,
};
use crate::tol;

/// A point on (or near) the graph of a multifunction.
#[derive(Debug, Clone)]
pub struct GraphPoint {
    pub input: DVector<f64>,
    pub value: DVector<f64>,
}

impl GraphPoint {
    pub fn new(input: DVector<f64>, value: DVector<f64>) -> Self {
        GraphPoint { input, value }
    }
}

/// Finite union of polyhedra in the dual input space, the value of a
/// coderivative (or of an integrated/summed upper estimate).
#[derive(Debug, Clone)]
pub struct CoderivativeSet {
    pub dim: usize,
    pub pieces: Vec<PolyhedralSet>,
    pub exact: bool,
}

impl CoderivativeSet {
    pub fn new(dim: usize, pieces: Vec<PolyhedralSet>, exact: bool) -> Self {
        let pieces = geometry::prune_inclusions(
            pieces.into_iter().filter(|p| !p.is_empty()).collect(),
        );
        CoderivativeSet { dim, pieces, exact }
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn contains(&self, xstar: &DVector<f64>, tolerance: f64) -> bool {
        self.pieces.iter().any(|p| p.contains(xstar, tolerance))
    }

    pub fn distance(&self, xstar: &DVector<f64>) -> Result<f64> {
        let mut best = f64::INFINITY;
        for p in &self.pieces {
            best = best.min(p.distance(xstar)?);
        }
        Ok(best)
    }

    pub fn to_value(&self) -> SetValue {
        SetValue::new(self.dim, self.pieces.clone())
    }
}

/// The coderivative of a node at a graph point, as a homogeneous map plus the
/// exactness tag of the construction that produced it.
#[derive(Debug, Clone)]
pub struct CoderivativeMap {
    pub map: HomogeneousMap,
    pub exact: bool,
}

impl CoderivativeMap {
    pub fn value(&self, ystar: &DVector<f64>) -> CoderivativeSet {
        CoderivativeSet::new(self.map.output_dim(), self.map.value(ystar), self.exact)
    }
}

/// Expression tree over the closed node catalog.
#[derive(Debug, Clone)]
pub enum IntegrandExpr {
    /// `x -> {Ax + b}`.
    Affine { a: DMatrix<f64>, b: DVector<f64> },
    /// Single-valued polynomial map (degree <= 3 componentwise).
    Smooth { map: PolyMap },
    /// Multifunction given by its graph, a finite union of convex polyhedra
    /// in `(input, output)` coordinates.
    PolyhedralGraph { input_dim: usize, output_dim: usize, pieces: Vec<PolyhedralSet> },
    /// `z -> N(z; C)` for a convex polyhedron `C`.
    NormalConeMap { c: PolyhedralSet },
    /// `x -> [center(x) - radius(x), center(x) + radius(x)]` componentwise.
    BoxValued { center: PolyMap, radius: PolyMap },
    /// Pointwise Minkowski sum of two nodes over the same input.
    Sum(Box<IntegrandExpr>, Box<IntegrandExpr>),
    /// `(x, z) -> f(x) + H(z)` with a smooth `f` and a catalog node `H`.
    SmoothPlus { smooth: PolyMap, inner: Box<IntegrandExpr> },
    /// `x -> ∂g(x)` for a convex piecewise-linear `g`.
    IndicatorSubgradient { g: CplFunction },
}

impl IntegrandExpr {
    pub fn affine(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        assert_eq!(a.nrows(), b.len());
        IntegrandExpr::Affine { a, b }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            IntegrandExpr::Affine { a, .. } => a.ncols(),
            IntegrandExpr::Smooth { map } => map.input_dim,
            IntegrandExpr::PolyhedralGraph { input_dim, .. } => *input_dim,
            IntegrandExpr::NormalConeMap { c } => c.dim(),
            IntegrandExpr::BoxValued { center, .. } => center.input_dim,
            IntegrandExpr::Sum(l, _) => l.input_dim(),
            IntegrandExpr::SmoothPlus { smooth, inner } => smooth.input_dim + inner.input_dim(),
            IntegrandExpr::IndicatorSubgradient { g } => g.input_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            IntegrandExpr::Affine { a, .. } => a.nrows(),
            IntegrandExpr::Smooth { map } => map.output_dim(),
            IntegrandExpr::PolyhedralGraph { output_dim, .. } => *output_dim,
            IntegrandExpr::NormalConeMap { c } => c.dim(),
            IntegrandExpr::BoxValued { center, .. } => center.output_dim(),
            IntegrandExpr::Sum(l, _) => l.output_dim(),
            IntegrandExpr::SmoothPlus { smooth, .. } => smooth.output_dim(),
            IntegrandExpr::IndicatorSubgradient { g } => g.input_dim,
        }
    }

    /// Set value at a point of the node's domain.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<SetValue> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionError {
                field: "evaluate input".into(),
                message: format!("got dimension {}, expected {}", x.len(), self.input_dim()),
            });
        }
        match self {
            IntegrandExpr::Affine { a, b } => Ok(SetValue::point(&(a * x + b))),
            IntegrandExpr::Smooth { map } => Ok(SetValue::point(&map.eval(x))),
            IntegrandExpr::PolyhedralGraph { input_dim, pieces, .. } => {
                let idx: Vec<usize> = (0..*input_dim).collect();
                let slices: Vec<PolyhedralSet> =
                    pieces.iter().map(|p| p.fix_coords(&idx, x)).collect();
                let v = SetValue::new(self.output_dim(), slices);
                if v.is_empty() {
                    return Err(Error::DomainError(
                        "point outside the domain of the polyhedral graph".into(),
                    ));
                }
                Ok(v)
            }
            IntegrandExpr::NormalConeMap { c } => {
                if !c.contains(x, tol::TAU_MEM * 10.0) {
                    return Ok(SetValue::empty(c.dim()));
                }
                let n = geometry::normal_cone(c, x)?;
                Ok(SetValue::from_set(PolyhedralSet::from_cone(&n)))
            }
            IntegrandExpr::BoxValued { center, radius } => {
                let c = center.eval(x);
                let r = radius.eval(x);
                if r.iter().any(|&ri| ri < -tol::TAU_MEM) {
                    return Err(Error::DomainError("box radius is negative".into()));
                }
                Ok(SetValue::box_value(&(&c - &r), &(&c + &r)))
            }
            IntegrandExpr::Sum(l, r) => Ok(l.evaluate(x)?.minkowski_sum(&r.evaluate(x)?)),
            IntegrandExpr::SmoothPlus { smooth, inner } => {
                let nx = smooth.input_dim;
                let xs = DVector::from_fn(nx, |i, _| x[i]);
                let zs = DVector::from_fn(x.len() - nx, |i, _| x[nx + i]);
                let f = smooth.eval(&xs);
                Ok(inner.evaluate(&zs)?.translate(&f))
            }
            IntegrandExpr::IndicatorSubgradient { g } => {
                Ok(SetValue::from_set(g.subdifferential(x)))
            }
        }
    }

    /// Verify `(x, y)` lies on the graph within tolerance.
    pub fn check_graph_point(&self, p: &GraphPoint) -> Result<()> {
        let v = self.evaluate(&p.input)?;
        if v.is_empty() {
            return Err(Error::OffGraph(f64::INFINITY));
        }
        v.check_membership(&p.value)
    }

    /// The limiting coderivative at a graph point as a homogeneous map
    /// `y* -> D*Φ(x, y)(y*)`.
    pub fn coderivative_map(&self, p: &GraphPoint) -> Result<CoderivativeMap> {
        self.check_graph_point(p)?;
        self.coderivative_map_unchecked(p)
    }

    fn coderivative_map_unchecked(&self, p: &GraphPoint) -> Result<CoderivativeMap> {
        match self {
            IntegrandExpr::Affine { a, .. } => Ok(CoderivativeMap {
                map: HomogeneousMap::Linear { matrix: a.transpose() },
                exact: true,
            }),
            IntegrandExpr::Smooth { map } => Ok(CoderivativeMap {
                map: HomogeneousMap::Linear { matrix: map.jacobian(&p.input).transpose() },
                exact: true,
            }),
            IntegrandExpr::PolyhedralGraph { input_dim, output_dim, pieces } => {
                let w = stack(&p.input, &p.value);
                let cones = geometry::limiting_normal_cone_union(pieces, &w)?;
                Ok(CoderivativeMap {
                    map: graph_normals_to_map(*input_dim, *output_dim, &cones),
                    exact: true,
                })
            }
            IntegrandExpr::NormalConeMap { c } => {
                let pieces =
                    geometry::normal_cone_map_coderivative_graph(c, &p.input, &p.value)?;
                Ok(CoderivativeMap {
                    map: HomogeneousMap::Cones {
                        input_dim: c.dim(),
                        output_dim: c.dim(),
                        pieces,
                    },
                    exact: true,
                })
            }
            IntegrandExpr::BoxValued { center, radius } => {
                let (Some((ac, bc)), Some((ar, br))) = (center.as_affine(), radius.as_affine())
                else {
                    return Err(Error::DomainError(
                        "coderivative of a box node needs affine center and radius".into(),
                    ));
                };
                // Componentwise |y_i - c_i(x)| <= r_i(x): one convex graph.
                let n = self.input_dim();
                let m = self.output_dim();
                let mut rows = Vec::new();
                let mut offs = Vec::new();
                for i in 0..m {
                    // y_i - c_i(x) - r_i(x) <= 0
                    let mut row = DVector::zeros(n + m);
                    for j in 0..n {
                        row[j] = -ac[(i, j)] - ar[(i, j)];
                    }
                    row[n + i] = 1.0;
                    rows.push(row);
                    offs.push(bc[i] + br[i]);
                    // -y_i + c_i(x) - r_i(x) <= 0
                    let mut row = DVector::zeros(n + m);
                    for j in 0..n {
                        row[j] = ac[(i, j)] - ar[(i, j)];
                    }
                    row[n + i] = -1.0;
                    rows.push(row);
                    offs.push(-bc[i] + br[i]);
                }
                let graph = PolyhedralSet::new(n + m, rows, offs);
                IntegrandExpr::PolyhedralGraph {
                    input_dim: n,
                    output_dim: m,
                    pieces: vec![graph],
                }
                .coderivative_map_unchecked(p)
            }
            IntegrandExpr::Sum(l, r) => sum_coderivative(l, r, p),
            IntegrandExpr::SmoothPlus { smooth, inner } => {
                let nx = smooth.input_dim;
                let nz = inner.input_dim();
                let m = smooth.output_dim();
                let xs = DVector::from_fn(nx, |i, _| p.input[i]);
                let zs = DVector::from_fn(nz, |i, _| p.input[nx + i]);
                let jac_t = smooth.jacobian(&xs).transpose();
                let inner_point = GraphPoint::new(zs, &p.value - smooth.eval(&xs));
                let inner_map = inner.coderivative_map(&inner_point)?;
                // Pieces over (y*, x*, z*): x* = J(x)^T y* and z* from the
                // inner coderivative; the smooth summand shears the graph
                // without changing normals otherwise.
                let mut pieces = Vec::new();
                for piece in inner_map.map.graph_pieces() {
                    let total = m + nx + nz;
                    let mut rows = Vec::new();
                    for row in piece.rows() {
                        let mut nr = DVector::zeros(total);
                        for i in 0..m {
                            nr[i] = row[i];
                        }
                        for i in 0..nz {
                            nr[m + nx + i] = row[m + i];
                        }
                        rows.push(nr);
                    }
                    for i in 0..nx {
                        let mut nr = DVector::zeros(total);
                        for k in 0..m {
                            nr[k] = -jac_t[(i, k)];
                        }
                        nr[m + i] = 1.0;
                        rows.push(nr.clone());
                        rows.push(-nr);
                    }
                    pieces.push(PolyhedralCone::from_rows(total, rows));
                }
                Ok(CoderivativeMap {
                    map: HomogeneousMap::Cones {
                        input_dim: m,
                        output_dim: nx + nz,
                        pieces,
                    },
                    exact: false,
                })
            }
            IntegrandExpr::IndicatorSubgradient { g } => {
                let pieces = g.subgradient_graph_pieces();
                IntegrandExpr::PolyhedralGraph {
                    input_dim: g.input_dim,
                    output_dim: g.input_dim,
                    pieces,
                }
                .coderivative_map_unchecked(p)
            }
        }
    }

    /// `D*Φ(x, y)(y*)` as a set.
    pub fn coderivative(&self, p: &GraphPoint, ystar: &DVector<f64>) -> Result<CoderivativeSet> {
        Ok(self.coderivative_map(p)?.value(ystar))
    }

    /// True when the node is single-valued with a smooth (polynomial) value.
    pub fn is_smooth_single_valued(&self) -> bool {
        matches!(self, IntegrandExpr::Affine { .. } | IntegrandExpr::Smooth { .. })
    }

    /// Whether every value of the node is convex (by construction).
    pub fn convex_valued(&self) -> bool {
        match self {
            IntegrandExpr::Affine { .. }
            | IntegrandExpr::Smooth { .. }
            | IntegrandExpr::NormalConeMap { .. }
            | IntegrandExpr::BoxValued { .. }
            | IntegrandExpr::IndicatorSubgradient { .. } => true,
            IntegrandExpr::PolyhedralGraph { pieces, .. } => pieces.len() == 1,
            IntegrandExpr::Sum(l, r) => l.convex_valued() && r.convex_valued(),
            IntegrandExpr::SmoothPlus { inner, .. } => inner.convex_valued(),
        }
    }
}

fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() + b.len());
    for i in 0..a.len() {
        out[i] = a[i];
    }
    for i in 0..b.len() {
        out[a.len() + i] = b[i];
    }
    out
}

/// Convert limiting normal cones of a graph (in `(ξ, η)` dual coordinates)
/// into the coderivative map pieces over `(y*, x*)`:
/// `x* ∈ D*F(y*)` iff `(x*, -y*)` is a graph normal.
fn graph_normals_to_map(
    input_dim: usize,
    output_dim: usize,
    cones: &[PolyhedralCone],
) -> HomogeneousMap {
    let pieces = cones
        .iter()
        .map(|c| {
            let rows = c
                .rows()
                .iter()
                .map(|r| {
                    DVector::from_fn(input_dim + output_dim, |i, _| {
                        if i < output_dim {
                            // y*-slot: coefficient of -y* in the η part
                            -r[input_dim + i]
                        } else {
                            r[i - output_dim]
                        }
                    })
                })
                .collect();
            PolyhedralCone::from_rows(input_dim + output_dim, rows)
        })
        .collect();
    HomogeneousMap::Cones { input_dim: output_dim, output_dim: input_dim, pieces }
}

/// Upper estimate for the coderivative of a pointwise sum.
///
/// With a smooth single-valued summand the graph is a shear of the other
/// node's graph and the familiar `∇f(x)*y* + D*H(x, y - f(x))(y*)` formula
/// applies. Otherwise the finitely many splittings `y = y1 + y2` are
/// enumerated over the faces of the splitting polytope.
fn sum_coderivative(
    l: &IntegrandExpr,
    r: &IntegrandExpr,
    p: &GraphPoint,
) -> Result<CoderivativeMap> {
    let (smooth, other, flipped) = if l.is_smooth_single_valued() {
        (l, r, false)
    } else if r.is_smooth_single_valued() {
        (r, l, true)
    } else {
        let _ = flippedless_guard();
        return sum_coderivative_split(l, r, p);
    };
    let _ = flipped;
    let fval = smooth
        .evaluate(&p.input)?
        .is_singleton()
        .ok_or(Error::NotSingleValued)?;
    let smap = smooth.coderivative_map_unchecked(p)?;
    let other_point = GraphPoint::new(p.input.clone(), &p.value - &fval);
    let omap = other.coderivative_map(&other_point)?;
    Ok(CoderivativeMap { map: smap.map.sum(&omap.map), exact: false })
}

fn flippedless_guard() {}

fn sum_coderivative_split(
    l: &IntegrandExpr,
    r: &IntegrandExpr,
    p: &GraphPoint,
) -> Result<CoderivativeMap> {
    let m = l.output_dim();
    let v1 = l.evaluate(&p.input)?;
    let v2 = r.evaluate(&p.input)?;
    let mut maps: Vec<HomogeneousMap> = Vec::new();
    for p1 in v1.pieces() {
        for p2 in v2.pieces() {
            // Splitting polytope {(y1, y2) : y1 ∈ P1, y2 ∈ P2, y1 + y2 = y}.
            let mut split = p1.product(p2);
            let mut rows = Vec::new();
            let mut offs = Vec::new();
            for i in 0..m {
                let mut row = DVector::zeros(2 * m);
                row[i] = 1.0;
                row[m + i] = 1.0;
                rows.push(row.clone());
                offs.push(p.value[i]);
                rows.push(-row);
                offs.push(-p.value[i]);
            }
            split = split.intersect(&PolyhedralSet::new(2 * m, rows, offs));
            if split.is_empty() {
                continue;
            }
            for face in split.faces()? {
                let y1 = DVector::from_fn(m, |i, _| face.relint_point[i]);
                let y2 = DVector::from_fn(m, |i, _| face.relint_point[m + i]);
                let m1 = l.coderivative_map(&GraphPoint::new(p.input.clone(), y1))?;
                let m2 = r.coderivative_map(&GraphPoint::new(p.input.clone(), y2))?;
                maps.push(m1.map.sum(&m2.map));
            }
        }
    }
    if maps.is_empty() {
        return Err(Error::OffGraph(f64::INFINITY));
    }
    Ok(CoderivativeMap { map: union_maps(l.output_dim(), l.input_dim(), &maps), exact: false })
}

/// Union of homogeneous maps as one cone-union map.
pub fn union_maps(input_dim: usize, output_dim: usize, maps: &[HomogeneousMap]) -> HomogeneousMap {
    let mut pieces = Vec::new();
    for m in maps {
        pieces.extend(m.graph_pieces());
    }
    HomogeneousMap::Cones { input_dim, output_dim, pieces }
}

/// Scalarized subdifferential `∂<y*, Φ>(x)` for a single-valued Lipschitz
/// node, computed through the scalar function's own graph (an independent
/// route from the vector-graph coderivative).
pub fn scalarized_subdifferential(
    node: &IntegrandExpr,
    x: &DVector<f64>,
    ystar: &DVector<f64>,
) -> Result<CoderivativeSet> {
    let value = node.evaluate(x)?;
    let Some(y) = value.is_singleton() else {
        return Err(Error::NotSingleValued);
    };
    match node {
        IntegrandExpr::Affine { a, .. } => Ok(CoderivativeSet::new(
            a.ncols(),
            vec![PolyhedralSet::singleton(&(a.transpose() * ystar))],
            true,
        )),
        IntegrandExpr::Smooth { map } => Ok(CoderivativeSet::new(
            map.input_dim,
            vec![PolyhedralSet::singleton(&(map.jacobian(x).transpose() * ystar))],
            true,
        )),
        IntegrandExpr::PolyhedralGraph { input_dim, output_dim, pieces } => {
            let n = *input_dim;
            let m = *output_dim;
            // Graph of g(x) = <y*, F(x)> via the linear image (x, y) -> (x, <y*, y>).
            let mut tmap = DMatrix::zeros(n + 1, n + m);
            for i in 0..n {
                tmap[(i, i)] = 1.0;
            }
            for j in 0..m {
                tmap[(n, n + j)] = ystar[j];
            }
            let scalar_pieces: Vec<PolyhedralSet> =
                pieces.iter().map(|p| p.linear_image(&tmap)).collect();
            let w = stack(x, &DVector::from_column_slice(&[ystar.dot(&y)]));
            let cones = geometry::limiting_normal_cone_union(&scalar_pieces, &w)?;
            // ∂g(x) = {v : (v, -1) ∈ N(gph g)}.
            let mut out = Vec::new();
            for c in cones {
                let mut rows = Vec::new();
                let mut offs = Vec::new();
                for r in c.rows() {
                    rows.push(DVector::from_fn(n, |i, _| r[i]));
                    offs.push(r[n]);
                }
                let piece = PolyhedralSet::new(n, rows, offs);
                if !piece.is_empty() {
                    out.push(piece);
                }
            }
            Ok(CoderivativeSet::new(n, out, true))
        }
        _ => Err(Error::NotSingleValued),
    }
}

/// Scalar functions admitted by second-order queries.
#[derive(Debug, Clone)]
pub enum CatalogScalarFn {
    /// Twice continuously differentiable polynomial.
    Smooth(Polynomial),
    /// Convex piecewise-linear max of affine pieces.
    CplMax(CplFunction),
    /// Indicator of a convex polyhedron.
    Indicator(PolyhedralSet),
}

/// Query for `∂²f(x, x*)(v*) = (D*∂f)(x, x*)(v*)`.
#[derive(Debug, Clone)]
pub struct SecondOrderQuery {
    pub f: CatalogScalarFn,
    pub x: DVector<f64>,
    pub xstar: DVector<f64>,
    pub vstar: DVector<f64>,
}

pub fn second_order_subdifferential(q: &SecondOrderQuery) -> Result<CoderivativeSet> {
    match &q.f {
        CatalogScalarFn::Smooth(p) => {
            let grad = p.gradient(&q.x);
            let mismatch = (&grad - &q.xstar).norm();
            if mismatch > 1e-7 {
                return Err(Error::SubgradientMismatch(mismatch));
            }
            let h = p.hessian(&q.x);
            Ok(CoderivativeSet::new(
                p.input_dim,
                vec![PolyhedralSet::singleton(&(h.transpose() * &q.vstar))],
                true,
            ))
        }
        CatalogScalarFn::CplMax(g) => {
            let sub = g.subdifferential(&q.x);
            if !sub.contains(&q.xstar, 1e-7) {
                let d = sub.distance(&q.xstar).unwrap_or(f64::INFINITY);
                return Err(Error::SubgradientMismatch(d));
            }
            let node = IntegrandExpr::IndicatorSubgradient { g: g.clone() };
            node.coderivative(&GraphPoint::new(q.x.clone(), q.xstar.clone()), &q.vstar)
        }
        CatalogScalarFn::Indicator(c) => {
            let pieces = geometry::coderivative_normal_cone_map(c, &q.x, &q.xstar, &q.vstar)?;
            Ok(CoderivativeSet::new(c.dim(), pieces, true))
        }
    }
}

/// Functions of `(x, z)` admitted by the partial-subdifferential operation.
#[derive(Debug, Clone)]
pub enum BivariateFn {
    /// Smooth polynomial in the joint variables.
    Smooth { poly: Polynomial, nx: usize },
    /// Max of affine functions of the joint variables (jointly convex).
    MaxAffine { g: CplFunction, nx: usize },
}

/// Partial subdifferential `∂_z g(x, z)` together with the projection of the
/// full subdifferential onto the z-slot, for the inclusion check
/// `proj_z ∂g(x, z) ⊆ ∂_z g(x, z)`.
pub fn partial_sub_z(
    g: &BivariateFn,
    x: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<(SetValue, SetValue)> {
    match g {
        BivariateFn::Smooth { poly, nx } => {
            let joint = stack(x, z);
            let nz = z.len();
            // Convexity in z near the point: z-block Hessian must stay PSD.
            for probe in convexity_probes(&joint, *nx, nz) {
                let h = poly.hessian(&probe);
                let hz = h.view((*nx, *nx), (nz, nz)).into_owned();
                let eig = hz.symmetric_eigen();
                if eig.eigenvalues.iter().any(|&e| e < -1e-8) {
                    return Err(Error::NotConvexInZ(format!(
                        "z-Hessian has eigenvalue {:.3e} at a nearby sample",
                        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
                    )));
                }
            }
            let grad = poly.gradient(&joint);
            let gz = DVector::from_fn(nz, |i, _| grad[nx + i]);
            let point = SetValue::point(&gz);
            Ok((point.clone(), point))
        }
        BivariateFn::MaxAffine { g, nx } => {
            let joint = stack(x, z);
            let nz = z.len();
            let act = g.active_indices(&joint, 1e-9);
            let zparts: Vec<DVector<f64>> = act
                .iter()
                .map(|&i| DVector::from_fn(nz, |k, _| g.pieces[i].0[nx + k]))
                .collect();
            let partial = SetValue::from_vertices(nz, zparts);
            let full = g.subdifferential(&joint);
            let proj = SetValue::from_set(full.project(&(*nx..*nx + nz).collect::<Vec<_>>()));
            Ok((partial, proj))
        }
    }
}

fn convexity_probes(center: &DVector<f64>, nx: usize, nz: usize) -> Vec<DVector<f64>> {
    let mut out = vec![center.clone()];
    let h = 1e-3;
    for i in 0..nz {
        let mut p = center.clone();
        p[nx + i] += h;
        out.push(p);
        let mut p = center.clone();
        p[nx + i] -= h;
        out.push(p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(entries: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(entries)
    }

    fn abs_graph_node() -> IntegrandExpr {
        // gph |x| as two polyhedral pieces.
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
        IntegrandExpr::PolyhedralGraph { input_dim: 1, output_dim: 1, pieces: vec![right, left] }
    }

    #[test]
    fn affine_evaluate_and_coderivative() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let node = IntegrandExpr::affine(a, v(&[0.0, 0.0]));
        let x = v(&[1.0, 2.0]);
        let val = node.evaluate(&x).unwrap();
        assert_eq!(val.is_singleton().unwrap(), v(&[2.0, 6.0]));
        let p = GraphPoint::new(x, v(&[2.0, 6.0]));
        let d = node.coderivative(&p, &v(&[1.0, 1.0])).unwrap();
        assert!(d.exact);
        assert!(d.contains(&v(&[2.0, 3.0]), 1e-9));
        assert!(!d.contains(&v(&[2.0, 3.1]), 1e-9));
    }

    #[test]
    fn box_evaluate() {
        let node = IntegrandExpr::BoxValued {
            center: PolyMap::affine(&DMatrix::identity(1, 1), &v(&[0.0])),
            radius: PolyMap::constant(1, &v(&[1.0])),
        };
        let val = node.evaluate(&v(&[0.0])).unwrap();
        assert!(val.contains(&v(&[-1.0]), 1e-9) && val.contains(&v(&[1.0]), 1e-9));
        assert!(!val.contains(&v(&[1.1]), 1e-9));
    }

    #[test]
    fn interval_sum_evaluate() {
        let c1 = IntegrandExpr::BoxValued {
            center: PolyMap::constant(1, &v(&[0.5])),
            radius: PolyMap::constant(1, &v(&[0.5])),
        };
        let c2 = IntegrandExpr::BoxValued {
            center: PolyMap::constant(1, &v(&[1.5])),
            radius: PolyMap::constant(1, &v(&[0.5])),
        };
        let s = IntegrandExpr::Sum(Box::new(c1), Box::new(c2));
        let val = s.evaluate(&v(&[0.0])).unwrap();
        assert!(val.contains(&v(&[1.0]), 1e-9) && val.contains(&v(&[3.0]), 1e-9));
        assert!(!val.contains(&v(&[0.9]), 1e-9));
    }

    #[test]
    fn normal_cone_map_coderivative_matches_face_pairs() {
        let node = IntegrandExpr::NormalConeMap { c: PolyhedralSet::nonpositive_orthant(1) };
        let p = GraphPoint::new(v(&[0.0]), v(&[0.0]));
        // y* = 1 -> R_+
        let d = node.coderivative(&p, &v(&[1.0])).unwrap();
        assert!(d.contains(&v(&[3.0]), 1e-7));
        assert!(!d.contains(&v(&[-0.5]), 1e-7));
        // y* = 0 -> R
        let d = node.coderivative(&p, &v(&[0.0])).unwrap();
        assert!(d.contains(&v(&[3.0]), 1e-7) && d.contains(&v(&[-3.0]), 1e-7));
        // y* = -1 -> {0}
        let d = node.coderivative(&p, &v(&[-1.0])).unwrap();
        assert!(d.contains(&v(&[0.0]), 1e-7));
        assert!(!d.contains(&v(&[0.5]), 1e-7));
    }

    #[test]
    fn scalarization_identity_on_abs() {
        let node = abs_graph_node();
        // y* = 1 at x = 0: ∂|x|(0) = [-1, 1].
        let s = scalarized_subdifferential(&node, &v(&[0.0]), &v(&[1.0])).unwrap();
        assert!(s.contains(&v(&[-1.0]), 1e-7) && s.contains(&v(&[1.0]), 1e-7));
        assert!(s.contains(&v(&[0.2]), 1e-7));
        assert!(!s.contains(&v(&[1.2]), 1e-7));
        // The coderivative route agrees.
        let d = node
            .coderivative(&GraphPoint::new(v(&[0.0]), v(&[0.0])), &v(&[1.0]))
            .unwrap();
        for probe in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            assert_eq!(d.contains(&v(&[probe]), 1e-7), s.contains(&v(&[probe]), 1e-7));
        }
    }

    #[test]
    fn scalarization_negative_dual_on_abs() {
        // ∂(-|·|)(0) in the limiting sense is {-1, 1}.
        let node = abs_graph_node();
        let s = scalarized_subdifferential(&node, &v(&[0.0]), &v(&[-1.0])).unwrap();
        assert!(s.contains(&v(&[-1.0]), 1e-7) && s.contains(&v(&[1.0]), 1e-7));
        assert!(!s.contains(&v(&[0.0]), 1e-7));
        let d = node
            .coderivative(&GraphPoint::new(v(&[0.0]), v(&[0.0])), &v(&[-1.0]))
            .unwrap();
        assert!(d.contains(&v(&[1.0]), 1e-7) && d.contains(&v(&[-1.0]), 1e-7));
        assert!(!d.contains(&v(&[0.0]), 1e-7));
    }

    #[test]
    fn sum_with_smooth_summand_is_shear() {
        // Φ(z) = 2z + N(z; R_-) at the corner (0, 0).
        let aff = IntegrandExpr::affine(DMatrix::from_row_slice(1, 1, &[2.0]), v(&[0.0]));
        let cone = IntegrandExpr::NormalConeMap { c: PolyhedralSet::nonpositive_orthant(1) };
        let node = IntegrandExpr::Sum(Box::new(aff), Box::new(cone));
        let p = GraphPoint::new(v(&[0.0]), v(&[0.0]));
        let d = node.coderivative(&p, &v(&[1.0])).unwrap();
        assert!(!d.exact);
        // 2·1 + D*N(0,0)(1) = 2 + R_+ = [2, ∞).
        assert!(d.contains(&v(&[2.0]), 1e-7) && d.contains(&v(&[10.0]), 1e-7));
        assert!(!d.contains(&v(&[1.5]), 1e-7));
    }

    #[test]
    fn second_order_quadratic() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let f = Polynomial::quadratic(&q, &v(&[0.0, 0.0]), 0.0);
        let x = v(&[1.0, 1.0]);
        let query = SecondOrderQuery {
            f: CatalogScalarFn::Smooth(f),
            xstar: &q * &x,
            x,
            vstar: v(&[1.0, 1.0]),
        };
        let d = second_order_subdifferential(&query).unwrap();
        assert!(d.contains(&v(&[2.0, 4.0]), 1e-9));
    }

    #[test]
    fn second_order_indicator() {
        // f = indicator of R_-, (x, x*) = (0, 0), v* = 0 -> R.
        let query = SecondOrderQuery {
            f: CatalogScalarFn::Indicator(PolyhedralSet::nonpositive_orthant(1)),
            x: v(&[0.0]),
            xstar: v(&[0.0]),
            vstar: v(&[0.0]),
        };
        let d = second_order_subdifferential(&query).unwrap();
        assert!(d.contains(&v(&[7.0]), 1e-7) && d.contains(&v(&[-7.0]), 1e-7));
    }

    #[test]
    fn second_order_abs_smooth_region() {
        let query = SecondOrderQuery {
            f: CatalogScalarFn::CplMax(CplFunction::abs_1d()),
            x: v(&[1.0]),
            xstar: v(&[1.0]),
            vstar: v(&[5.0]),
        };
        let d = second_order_subdifferential(&query).unwrap();
        assert!(d.contains(&v(&[0.0]), 1e-7));
        assert!(!d.contains(&v(&[0.5]), 1e-7));
    }

    #[test]
    fn second_order_rejects_bad_subgradient() {
        let query = SecondOrderQuery {
            f: CatalogScalarFn::CplMax(CplFunction::abs_1d()),
            x: v(&[1.0]),
            xstar: v(&[0.2]),
            vstar: v(&[1.0]),
        };
        assert!(matches!(
            second_order_subdifferential(&query),
            Err(Error::SubgradientMismatch(_))
        ));
    }

    #[test]
    fn partial_sub_bilinear() {
        // g(x, z) = x z at (2, 3): ∂_z g = {2}.
        let poly = Polynomial::new(
            2,
            vec![Monomial { coeff: 1.0, exponents: vec![1, 1] }],
        )
        .unwrap();
        let (partial, proj) =
            partial_sub_z(&BivariateFn::Smooth { poly, nx: 1 }, &v(&[2.0]), &v(&[3.0])).unwrap();
        assert!(partial.contains(&v(&[2.0]), 1e-9));
        assert!(proj.contains(&v(&[2.0]), 1e-9));
    }

    #[test]
    fn partial_sub_max_affine() {
        // g(x, z) = max(z - x, 0) at (0, 0): ∂_z g = [0, 1].
        let g = CplFunction::new(vec![
            (v(&[-1.0, 1.0]), 0.0),
            (v(&[0.0, 0.0]), 0.0),
        ])
        .unwrap();
        let (partial, proj) =
            partial_sub_z(&BivariateFn::MaxAffine { g, nx: 1 }, &v(&[0.0]), &v(&[0.0])).unwrap();
        assert!(partial.contains(&v(&[0.0]), 1e-9) && partial.contains(&v(&[1.0]), 1e-9));
        assert!(!partial.contains(&v(&[1.1]), 1e-9));
        // proj_z ∂g ⊆ ∂_z g.
        for vtx in proj.vertices() {
            assert!(partial.contains(&vtx, 1e-7));
        }
    }

    #[test]
    fn graph_point_validation() {
        let node = IntegrandExpr::affine(DMatrix::identity(2, 2), v(&[0.0, 0.0]));
        let bad = GraphPoint::new(v(&[1.0, 1.0]), v(&[1.0, 2.0]));
        assert!(matches!(node.coderivative_map(&bad), Err(Error::OffGraph(_))));
    }
}
