//! Double-description conversion for polyhedral cones.
//!
//! Converts between the inequality form `{x : a_i·x <= 0}` and the generator
//! form `lin(L) + cone(R)` of a polyhedral cone. The incremental algorithm
//! inserts one inequality at a time, maintaining a lineality basis and a
//! minimal ray list with per-ray zero sets over the processed rows.
//!
//! Scale: desk-size cones (dimension <= ~12, a few dozen rows). Inequalities
//! are processed in input order, combinations are deduplicated by direction,
//! and the output is canonically sorted, so the conversion is deterministic.

use nalgebra::DVector;

/// Tolerance for sign classification of inner products against unit rows.
const DD_TOL: f64 = 1e-9;

/// Maximum number of rows trackable in a zero-set bitmask.
const MAX_ROWS: usize = 128;

/// Generator form of a polyhedral cone: `lin(lineality) + cone(rays)`.
#[derive(Debug, Clone)]
pub struct ConeGenerators {
    pub dim: usize,
    /// Basis of the lineality space (mutually independent, unit norm).
    pub lineality: Vec<DVector<f64>>,
    /// Extreme rays modulo lineality, unit norm.
    pub rays: Vec<DVector<f64>>,
}

impl ConeGenerators {
    pub fn trivial(dim: usize) -> Self {
        ConeGenerators { dim, lineality: Vec::new(), rays: Vec::new() }
    }

    pub fn is_trivial(&self) -> bool {
        self.lineality.is_empty() && self.rays.is_empty()
    }

    /// All generators: rays plus both signs of each lineality vector.
    pub fn signed_generators(&self) -> Vec<DVector<f64>> {
        let mut out = self.rays.clone();
        for l in &self.lineality {
            out.push(l.clone());
            out.push(-l.clone());
        }
        out
    }
}

#[derive(Clone)]
struct Ray {
    v: DVector<f64>,
    zero: u128,
}

fn normalize(v: &DVector<f64>) -> Option<DVector<f64>> {
    let n = v.norm();
    if n <= DD_TOL {
        None
    } else {
        Some(v / n)
    }
}

/// Incremental double-description state: the generator form of the cone cut
/// out by the rows inserted so far.
#[derive(Clone)]
pub struct DDState {
    dim: usize,
    processed: usize,
    lineality: Vec<DVector<f64>>,
    rays: Vec<Ray>,
}

impl DDState {
    /// Start from the whole space.
    pub fn full_space(dim: usize) -> Self {
        let lineality = (0..dim)
            .map(|i| DVector::from_fn(dim, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
        DDState { dim, processed: 0, lineality, rays: Vec::new() }
    }

    pub fn is_trivial(&self) -> bool {
        self.lineality.is_empty() && self.rays.is_empty()
    }

    /// True when every point of the current cone satisfies `a·x = 0`.
    pub fn contained_in_hyperplane(&self, a: &DVector<f64>) -> bool {
        self.lineality.iter().all(|l| a.dot(l).abs() <= DD_TOL)
            && self.rays.iter().all(|r| a.dot(&r.v).abs() <= DD_TOL)
    }

    /// Insert the inequality `a·x <= 0` (rows of near-zero norm are skipped).
    pub fn insert(&mut self, a: &DVector<f64>) {
        let Some(a) = normalize(a) else { return };
        let j = self.processed;
        assert!(j < MAX_ROWS, "double description supports at most {MAX_ROWS} rows");
        self.processed += 1;

        let lin_dots: Vec<f64> = self.lineality.iter().map(|l| a.dot(l)).collect();
        let pivot = lin_dots
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > DD_TOL)
            .max_by(|(i1, c1), (i2, c2)| {
                c1.abs().partial_cmp(&c2.abs()).unwrap().then(i2.cmp(i1))
            })
            .map(|(i, _)| i);

        if let Some(p) = pivot {
            // The new inequality cuts the lineality space: one basis vector
            // leaves the lineality and becomes a ray on the feasible side;
            // everything else is projected onto the hyperplane {a·x = 0}.
            let l0 = self.lineality.remove(p);
            let c0 = a.dot(&l0);
            for l in self.lineality.iter_mut() {
                let c = a.dot(l);
                let projected = &*l - &l0 * (c / c0);
                *l = normalize(&projected).expect("lineality projection degenerated");
            }
            for r in self.rays.iter_mut() {
                let c = a.dot(&r.v);
                let projected = &r.v - &l0 * (c / c0);
                r.v = normalize(&projected).expect("ray projection degenerated");
                r.zero |= 1 << j;
            }
            let r0 = if c0 > 0.0 { -&l0 } else { l0.clone() };
            let mut zero = 0u128;
            for bit in 0..j {
                zero |= 1 << bit;
            }
            self.rays.push(Ray { v: normalize(&r0).unwrap(), zero });
            return;
        }

        // Lineality is orthogonal to `a`: classic ray step.
        let dots: Vec<f64> = self.rays.iter().map(|r| a.dot(&r.v)).collect();
        let mut neg: Vec<usize> = Vec::new();
        let mut pos: Vec<usize> = Vec::new();
        for (i, d) in dots.iter().enumerate() {
            if *d > DD_TOL {
                pos.push(i);
            } else if *d < -DD_TOL {
                neg.push(i);
            }
        }
        if pos.is_empty() {
            for (i, r) in self.rays.iter_mut().enumerate() {
                if dots[i].abs() <= DD_TOL {
                    r.zero |= 1 << j;
                }
            }
            return;
        }

        let mut combos: Vec<Ray> = Vec::new();
        for &ip in &pos {
            for &inn in &neg {
                let common = self.rays[ip].zero & self.rays[inn].zero;
                if !adjacent(&self.rays, ip, inn, common) {
                    continue;
                }
                let w = &self.rays[inn].v * dots[ip] - &self.rays[ip].v * dots[inn];
                if let Some(w) = normalize(&w) {
                    let zero = common | (1 << j);
                    if !combos.iter().any(|c| (&c.v - &w).norm() <= 1e-7) {
                        combos.push(Ray { v: w, zero });
                    }
                }
            }
        }

        let mut keep: Vec<Ray> = Vec::new();
        for (i, r) in self.rays.drain(..).enumerate() {
            if dots[i] > DD_TOL {
                continue;
            }
            let mut r = r;
            if dots[i].abs() <= DD_TOL {
                r.zero |= 1 << j;
            }
            keep.push(r);
        }
        keep.extend(combos);
        self.rays = keep;
    }

    /// Extract the generator form, canonically sorted.
    pub fn generators(&self) -> ConeGenerators {
        let mut out_rays: Vec<DVector<f64>> = self.rays.iter().map(|r| r.v.clone()).collect();
        sort_vectors(&mut out_rays);
        let mut lin = orthonormalize(&self.lineality);
        sort_vectors(&mut lin);
        ConeGenerators { dim: self.dim, lineality: lin, rays: out_rays }
    }

    /// A deterministic point of the relative interior of the current cone.
    ///
    /// Built from the ray sum plus a pseudo-generic lineality combination;
    /// `salt` varies the combination when a caller needs to retry.
    pub fn generic_relint_point(&self, salt: u64) -> DVector<f64> {
        let mut p = DVector::zeros(self.dim);
        for r in &self.rays {
            p += &r.v;
        }
        let mut state = salt.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        for l in &self.lineality {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let c = ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0;
            p += l * (0.25 + 0.5 * c.abs()) * c.signum();
        }
        p
    }
}

/// Compute the generators of `{x : row·x <= 0 for each row}`.
pub fn cone_generators(dim: usize, rows: &[DVector<f64>]) -> ConeGenerators {
    let mut state = DDState::full_space(dim);
    for r in rows {
        state.insert(r);
    }
    state.generators()
}

/// Combinatorial adjacency test: two rays are adjacent iff no third ray's
/// zero set contains the intersection of theirs.
fn adjacent(rays: &[Ray], ip: usize, inn: usize, common: u128) -> bool {
    for (k, r) in rays.iter().enumerate() {
        if k == ip || k == inn {
            continue;
        }
        if r.zero & common == common {
            return false;
        }
    }
    true
}

fn orthonormalize(vs: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        for b in &basis {
            let c = w.dot(b);
            w -= b * c;
        }
        if let Some(w) = normalize(&w) {
            basis.push(w);
        }
    }
    basis
}

/// Lexicographic sort; rays keep their orientation, so this is a pure
/// ordering for reproducibility.
pub fn sort_vectors(vs: &mut [DVector<f64>]) {
    vs.sort_by(|a, b| lex_cmp(a, b));
}

pub fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// H-representation rows of the cone spanned by the given generators:
/// the rays of the polar cone plus both signs of its lineality basis.
pub fn rows_from_generators(dim: usize, gens: &ConeGenerators) -> Vec<DVector<f64>> {
    // The polar of lin(L) + cone(R) is {v : R v <= 0, L v = 0}.
    let mut polar_rows: Vec<DVector<f64>> = gens.rays.clone();
    for l in &gens.lineality {
        polar_rows.push(l.clone());
        polar_rows.push(-l.clone());
    }
    let polar = cone_generators(dim, &polar_rows);
    polar.signed_generators()
}
