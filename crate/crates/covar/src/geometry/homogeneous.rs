//! Positively homogeneous polyhedral mappings and their outer norms.
//!
//! A mapping `H : y -> H(y) ⊆ R^n` appears here either as the adjoint of a
//! linear map (`H(y) = {M y}`) or as a finite union of polyhedral cones in
//! the joint `(y, x)` space whose slice at `y` is the value. Coderivatives of
//! every catalog node land in one of the two forms.
//!
//! The outer norm `‖H‖ = sup{‖x‖ : x ∈ H(y), ‖y‖ <= 1}` is exact (spectral)
//! in the linear case. In the cone case the engine computes the exact value
//! over the ℓ∞ unit ball by enumerating cube faces, and reports the
//! ℓ₂-equivalence interval next to it; unboundedness is detected exactly from
//! the slice at `y = 0`.

use nalgebra::{DMatrix, DVector};

use super::cone::PolyhedralCone;
use super::dd::lex_cmp;
use super::set::PolyhedralSet;

#[derive(Debug, Clone)]
pub enum HomogeneousMap {
    /// `H(y) = {matrix · y}`.
    Linear { matrix: DMatrix<f64> },
    /// Union of polyhedral cones in `(y, x)` coordinates.
    Cones { input_dim: usize, output_dim: usize, pieces: Vec<PolyhedralCone> },
}

/// Result of an outer-norm computation.
#[derive(Debug, Clone)]
pub struct OuterNorm {
    /// The reported bound; `f64::INFINITY` when some value set is unbounded.
    pub value: f64,
    /// Exact value over the ℓ∞ unit ball, when that route was taken.
    pub linf_value: Option<f64>,
    /// Enclosure of the true ℓ₂ outer norm.
    pub l2_interval: (f64, f64),
    /// True when `value` is the exact ℓ₂ outer norm.
    pub exact_l2: bool,
}

impl OuterNorm {
    fn infinite() -> Self {
        OuterNorm {
            value: f64::INFINITY,
            linf_value: None,
            l2_interval: (f64::INFINITY, f64::INFINITY),
            exact_l2: true,
        }
    }
}

impl HomogeneousMap {
    pub fn zero(input_dim: usize, output_dim: usize) -> Self {
        HomogeneousMap::Linear { matrix: DMatrix::zeros(output_dim, input_dim) }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            HomogeneousMap::Linear { matrix } => matrix.ncols(),
            HomogeneousMap::Cones { input_dim, .. } => *input_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            HomogeneousMap::Linear { matrix } => matrix.nrows(),
            HomogeneousMap::Cones { output_dim, .. } => *output_dim,
        }
    }

    /// Joint-space cone pieces of the graph `{(y, x) : x ∈ H(y)}`.
    pub fn graph_pieces(&self) -> Vec<PolyhedralCone> {
        match self {
            HomogeneousMap::Linear { matrix } => {
                let (n, m) = (matrix.nrows(), matrix.ncols());
                let mut rows = Vec::new();
                for i in 0..n {
                    let mut row = DVector::zeros(m + n);
                    for j in 0..m {
                        row[j] = -matrix[(i, j)];
                    }
                    row[m + i] = 1.0;
                    rows.push(row.clone());
                    rows.push(-row);
                }
                vec![PolyhedralCone::from_rows(m + n, rows)]
            }
            HomogeneousMap::Cones { pieces, .. } => pieces.clone(),
        }
    }

    /// Value `H(y)` as a finite union of polyhedra in the output space.
    pub fn value(&self, y: &DVector<f64>) -> Vec<PolyhedralSet> {
        match self {
            HomogeneousMap::Linear { matrix } => {
                vec![PolyhedralSet::singleton(&(matrix * y))]
            }
            HomogeneousMap::Cones { input_dim, output_dim, pieces } => {
                let m = *input_dim;
                let n = *output_dim;
                let mut out = Vec::new();
                for piece in pieces {
                    let mut rows = Vec::new();
                    let mut offs = Vec::new();
                    for r in piece.rows() {
                        let ry = DVector::from_fn(m, |i, _| r[i]);
                        let rx = DVector::from_fn(n, |i, _| r[m + i]);
                        rows.push(rx);
                        offs.push(-ry.dot(y));
                    }
                    let p = PolyhedralSet::new(n, rows, offs);
                    if !p.is_empty() {
                        out.push(p);
                    }
                }
                super::normal::prune_inclusions(out)
            }
        }
    }

    /// The slice `H(0)` as a cone in the output space.
    pub fn zero_slice_pieces(&self) -> Vec<PolyhedralCone> {
        match self {
            HomogeneousMap::Linear { matrix } => vec![PolyhedralCone::zero(matrix.nrows())],
            HomogeneousMap::Cones { input_dim, output_dim, pieces } => {
                let m = *input_dim;
                let n = *output_dim;
                pieces
                    .iter()
                    .map(|piece| {
                        // (0, x) ∈ piece reduces each row to its x-part, and the
                        // y-part must be forced to zero via explicit equalities.
                        let mut rows: Vec<DVector<f64>> = piece
                            .rows()
                            .iter()
                            .map(|r| DVector::from_fn(n, |i, _| r[m + i]))
                            .collect();
                        rows.retain(|r| r.norm() > 1e-12);
                        let mut joint_rows = piece.rows().to_vec();
                        for i in 0..m {
                            let mut e = DVector::zeros(m + n);
                            e[i] = 1.0;
                            joint_rows.push(e.clone());
                            joint_rows.push(-e);
                        }
                        let joint = PolyhedralCone::from_rows(m + n, joint_rows);
                        let gens = joint.generators();
                        let proj = |v: &DVector<f64>| DVector::from_fn(n, |i, _| v[m + i]);
                        PolyhedralCone::from_generators(
                            n,
                            gens.rays.iter().map(&proj).collect(),
                            gens.lineality.iter().map(&proj).collect(),
                        )
                    })
                    .collect()
            }
        }
    }

    /// Does `H(0) = {0}` hold?
    pub fn zero_value_trivial(&self) -> bool {
        self.zero_slice_pieces().iter().all(|c| c.is_trivial())
    }

    /// A nonzero element of `H(0)` when one exists (lexicographically first
    /// ray over the pieces).
    pub fn zero_value_witness(&self) -> Option<DVector<f64>> {
        let mut candidates: Vec<DVector<f64>> = Vec::new();
        for piece in self.zero_slice_pieces() {
            candidates.extend(piece.generators().signed_generators());
        }
        candidates.retain(|g| g.norm() > 1e-9);
        candidates.sort_by(lex_cmp);
        candidates.into_iter().next()
    }

    /// Kernel `{y : 0 ∈ H(y)}` pieces in the input space.
    pub fn kernel_pieces(&self) -> Vec<PolyhedralCone> {
        self.swap().zero_slice_pieces()
    }

    pub fn kernel_trivial(&self) -> bool {
        self.kernel_pieces().iter().all(|c| c.is_trivial())
    }

    pub fn kernel_witness(&self) -> Option<DVector<f64>> {
        self.swap().zero_value_witness()
    }

    /// The inverse mapping `x -> {y : x ∈ H(y)}`.
    pub fn swap(&self) -> HomogeneousMap {
        match self {
            HomogeneousMap::Linear { matrix } => {
                let m = matrix;
                if m.is_square() {
                    if let Some(inv) = m.clone().try_inverse() {
                        return HomogeneousMap::Linear { matrix: inv };
                    }
                }
                let cones = self.graph_pieces();
                HomogeneousMap::Cones {
                    input_dim: m.ncols(),
                    output_dim: m.nrows(),
                    pieces: cones,
                }
                .swap()
            }
            HomogeneousMap::Cones { input_dim, output_dim, pieces } => {
                let (m, n) = (*input_dim, *output_dim);
                let swapped = pieces
                    .iter()
                    .map(|p| {
                        let rows = p
                            .rows()
                            .iter()
                            .map(|r| {
                                DVector::from_fn(m + n, |i, _| {
                                    if i < n {
                                        r[m + i]
                                    } else {
                                        r[i - n]
                                    }
                                })
                            })
                            .collect();
                        PolyhedralCone::from_rows(m + n, rows)
                    })
                    .collect();
                HomogeneousMap::Cones { input_dim: n, output_dim: m, pieces: swapped }
            }
        }
    }

    /// Positive scaling of values: `y -> w · H(y)`, `w > 0`.
    pub fn scale_output(&self, w: f64) -> HomogeneousMap {
        assert!(w > 0.0, "scaling weight must be positive");
        match self {
            HomogeneousMap::Linear { matrix } => HomogeneousMap::Linear { matrix: matrix * w },
            HomogeneousMap::Cones { input_dim, output_dim, pieces } => {
                let (m, n) = (*input_dim, *output_dim);
                let scaled = pieces
                    .iter()
                    .map(|p| {
                        let rows = p
                            .rows()
                            .iter()
                            .map(|r| {
                                DVector::from_fn(m + n, |i, _| {
                                    if i < m {
                                        r[i]
                                    } else {
                                        r[i] / w
                                    }
                                })
                            })
                            .collect();
                        PolyhedralCone::from_rows(m + n, rows)
                    })
                    .collect();
                HomogeneousMap::Cones { input_dim: m, output_dim: n, pieces: scaled }
            }
        }
    }

    /// Pointwise Minkowski sum `y -> H1(y) + H2(y)`.
    pub fn sum(&self, other: &HomogeneousMap) -> HomogeneousMap {
        assert_eq!(self.input_dim(), other.input_dim());
        assert_eq!(self.output_dim(), other.output_dim());
        if let (HomogeneousMap::Linear { matrix: a }, HomogeneousMap::Linear { matrix: b }) =
            (self, other)
        {
            return HomogeneousMap::Linear { matrix: a + b };
        }
        let m = self.input_dim();
        let n = self.output_dim();
        let p1 = self.graph_pieces();
        let p2 = other.graph_pieces();
        let mut pieces = Vec::new();
        for a in &p1 {
            for b in &p2 {
                // Joint cone over (y, x1, x2), then the image under
                // (y, x1, x2) -> (y, x1 + x2).
                let total = m + 2 * n;
                let mut rows = Vec::new();
                for r in a.rows() {
                    let mut row = DVector::zeros(total);
                    for i in 0..m + n {
                        row[i] = r[i];
                    }
                    rows.push(row);
                }
                for r in b.rows() {
                    let mut row = DVector::zeros(total);
                    for i in 0..m {
                        row[i] = r[i];
                    }
                    for i in 0..n {
                        row[m + n + i] = r[m + i];
                    }
                    rows.push(row);
                }
                let joint = PolyhedralCone::from_rows(total, rows);
                let gens = joint.generators();
                let img = |v: &DVector<f64>| {
                    DVector::from_fn(m + n, |i, _| {
                        if i < m {
                            v[i]
                        } else {
                            v[i] + v[i + n]
                        }
                    })
                };
                pieces.push(PolyhedralCone::from_generators(
                    m + n,
                    gens.rays.iter().map(&img).collect(),
                    gens.lineality.iter().map(&img).collect(),
                ));
            }
        }
        HomogeneousMap::Cones { input_dim: m, output_dim: n, pieces }
    }

    /// Post-compose values with a linear map: `y -> J · H(y)`.
    pub fn map_output(&self, j: &DMatrix<f64>) -> HomogeneousMap {
        assert_eq!(j.ncols(), self.output_dim());
        match self {
            HomogeneousMap::Linear { matrix } => HomogeneousMap::Linear { matrix: j * matrix },
            HomogeneousMap::Cones { input_dim, output_dim, pieces } => {
                let (m, n) = (*input_dim, *output_dim);
                let n2 = j.nrows();
                let mapped = pieces
                    .iter()
                    .map(|p| {
                        let gens = p.generators();
                        let img = |v: &DVector<f64>| {
                            let y = DVector::from_fn(m, |i, _| v[i]);
                            let x = DVector::from_fn(n, |i, _| v[m + i]);
                            let jx = j * x;
                            let mut out = DVector::zeros(m + n2);
                            for i in 0..m {
                                out[i] = y[i];
                            }
                            for i in 0..n2 {
                                out[m + i] = jx[i];
                            }
                            out
                        };
                        PolyhedralCone::from_generators(
                            m + n2,
                            gens.rays.iter().map(&img).collect(),
                            gens.lineality.iter().map(&img).collect(),
                        )
                    })
                    .collect();
                HomogeneousMap::Cones { input_dim: m, output_dim: n2, pieces: mapped }
            }
        }
    }

    /// Outer norm; exact spectral value for linear maps, exact ℓ∞ value with
    /// an ℓ₂ enclosure otherwise.
    pub fn outer_norm(&self) -> OuterNorm {
        match self {
            HomogeneousMap::Linear { matrix } => {
                let sigma = spectral_norm(matrix);
                OuterNorm {
                    value: sigma,
                    linf_value: None,
                    l2_interval: (sigma, sigma),
                    exact_l2: true,
                }
            }
            HomogeneousMap::Cones { input_dim, output_dim, pieces } => {
                if !self.zero_value_trivial() {
                    return OuterNorm::infinite();
                }
                let m = *input_dim;
                let n = *output_dim;
                let mut best: f64 = 0.0;
                for piece in pieces {
                    for k in 0..m {
                        for sign in [1.0, -1.0] {
                            let poly = cube_face_polyhedron(piece, m, n, k, sign);
                            let vr = poly.vrep();
                            for vtx in &vr.vertices {
                                let xinf = (0..n)
                                    .map(|i| vtx[m + i].abs())
                                    .fold(0.0_f64, f64::max);
                                best = best.max(xinf);
                            }
                        }
                    }
                }
                OuterNorm {
                    value: best,
                    linf_value: Some(best),
                    l2_interval: (best / (m as f64).sqrt(), best * (n as f64).sqrt()),
                    exact_l2: false,
                }
            }
        }
    }
}

/// `{(y, x) ∈ piece : y_k = sign, |y_j| <= 1}` — one face of the dual cube.
fn cube_face_polyhedron(
    piece: &PolyhedralCone,
    m: usize,
    n: usize,
    k: usize,
    sign: f64,
) -> PolyhedralSet {
    let total = m + n;
    let mut rows: Vec<DVector<f64>> = piece.rows().to_vec();
    let mut offs = vec![0.0; rows.len()];
    for j in 0..m {
        let mut e = DVector::zeros(total);
        e[j] = 1.0;
        if j == k {
            rows.push(e.clone());
            offs.push(sign);
            rows.push(-e);
            offs.push(-sign);
        } else {
            rows.push(e.clone());
            offs.push(1.0);
            rows.push(-e);
            offs.push(1.0);
        }
    }
    PolyhedralSet::new(total, rows, offs)
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max)
}

pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Embed a cone over coordinates `at` into a `total`-dimensional space.
pub fn lift_cone(cone: &PolyhedralCone, total: usize, at: &[usize]) -> PolyhedralCone {
    assert_eq!(cone.dim(), at.len());
    let rows = cone
        .rows()
        .iter()
        .map(|r| {
            let mut row = DVector::zeros(total);
            for (i, &pos) in at.iter().enumerate() {
                row[pos] = r[i];
            }
            row
        })
        .collect();
    PolyhedralCone::from_rows(total, rows)
}

/// Searches for a point on the ℓ∞ unit sphere of the designated block that
/// lies in every listed cone. Returns the first witness in deterministic
/// face order, or `None` when the system is infeasible on every face.
pub fn sphere_feasibility(
    dim: usize,
    cones: &[PolyhedralCone],
    block: std::ops::Range<usize>,
) -> Option<DVector<f64>> {
    let mut rows: Vec<DVector<f64>> = Vec::new();
    for c in cones {
        assert_eq!(c.dim(), dim);
        rows.extend(c.rows().iter().cloned());
    }
    for k in block.clone() {
        for sign in [1.0, -1.0] {
            let mut frows = rows.clone();
            let mut foffs = vec![0.0; frows.len()];
            for j in block.clone() {
                let mut e = DVector::zeros(dim);
                e[j] = 1.0;
                if j == k {
                    frows.push(e.clone());
                    foffs.push(sign);
                    frows.push(-e);
                    foffs.push(-sign);
                } else {
                    frows.push(e.clone());
                    foffs.push(1.0);
                    frows.push(-e);
                    foffs.push(1.0);
                }
            }
            let poly = PolyhedralSet::new(dim, frows, foffs);
            let vr = poly.vrep();
            if !vr.vertices.is_empty() {
                let mut vs = vr.vertices.clone();
                vs.sort_by(lex_cmp);
                return Some(vs[0].clone());
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(entries: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(entries)
    }

    #[test]
    fn linear_outer_norm_is_spectral() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let h = HomogeneousMap::Linear { matrix: m };
        let on = h.outer_norm();
        assert!((on.value - 3.0).abs() < 1e-12);
        assert!(on.exact_l2);
    }

    #[test]
    fn zero_map_outer_norm() {
        let h = HomogeneousMap::zero(2, 2);
        assert_eq!(h.outer_norm().value, 0.0);
    }

    #[test]
    fn nonzero_ray_at_origin_gives_infinity() {
        // Graph containing {0} x R_+ in (y, x) coordinates.
        let piece = PolyhedralCone::from_generators(2, vec![v(&[0.0, 1.0])], vec![]);
        let h = HomogeneousMap::Cones { input_dim: 1, output_dim: 1, pieces: vec![piece] };
        assert!(h.outer_norm().value.is_infinite());
    }

    #[test]
    fn cone_outer_norm_matches_linear_on_graph() {
        // Graph of x = 2y as a cone union; ℓ∞ value is 2.
        let m = DMatrix::from_row_slice(1, 1, &[2.0]);
        let lin = HomogeneousMap::Linear { matrix: m };
        let cones = HomogeneousMap::Cones {
            input_dim: 1,
            output_dim: 1,
            pieces: lin.graph_pieces(),
        };
        let on = cones.outer_norm();
        assert!((on.value - 2.0).abs() < 1e-9);
        assert!(on.l2_interval.0 <= 2.0 && 2.0 <= on.l2_interval.1);
    }

    #[test]
    fn kernel_of_rank_deficient_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let h = HomogeneousMap::Cones {
            input_dim: 2,
            output_dim: 2,
            pieces: HomogeneousMap::Linear { matrix: m }.graph_pieces(),
        };
        assert!(!h.kernel_trivial());
        let w = h.kernel_witness().unwrap();
        assert!(w[0].abs() < 1e-9 && w[1].abs() > 0.5);
    }

    #[test]
    fn sum_of_linear_maps() {
        let a = HomogeneousMap::Linear { matrix: DMatrix::from_row_slice(1, 1, &[2.0]) };
        let b = HomogeneousMap::Linear { matrix: DMatrix::from_row_slice(1, 1, &[3.0]) };
        let s = a.sum(&b);
        let val = s.value(&v(&[1.0]));
        assert!(val.iter().any(|p| p.contains(&v(&[5.0]), 1e-9)));
    }

    #[test]
    fn cone_sum_with_linear() {
        // H1(y) = {y}, H2(y) = R_+ for every y (graph piece = all (y, x >= 0)).
        let h1 = HomogeneousMap::Linear { matrix: DMatrix::identity(1, 1) };
        let piece = PolyhedralCone::from_rows(2, vec![v(&[0.0, -1.0])]);
        let h2 = HomogeneousMap::Cones { input_dim: 1, output_dim: 1, pieces: vec![piece] };
        let s = h1.sum(&h2);
        let val = s.value(&v(&[2.0]));
        assert!(val.iter().any(|p| p.contains(&v(&[2.0]), 1e-7)));
        assert!(val.iter().any(|p| p.contains(&v(&[7.0]), 1e-7)));
        assert!(!val.iter().any(|p| p.contains(&v(&[1.0]), 1e-7)));
    }

    #[test]
    fn sphere_feasibility_finds_kernel_vector() {
        // Cone: {(y, x) : x = 0} — any unit y works, first face returns y = 1.
        let piece = PolyhedralCone::from_rows(2, vec![v(&[0.0, 1.0]), v(&[0.0, -1.0])]);
        let w = sphere_feasibility(2, &[piece], 0..1).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sphere_feasibility_infeasible_when_blocked() {
        // Require y = 0 while asking for a unit y.
        let piece = PolyhedralCone::from_rows(1, vec![v(&[1.0]), v(&[-1.0])]);
        assert!(sphere_feasibility(1, &[piece], 0..1).is_none());
    }
}
