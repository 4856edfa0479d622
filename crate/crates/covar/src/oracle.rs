//! Brute-force, definition-level reference implementations.
//!
//! Everything here works from the defining inequalities and limits — sampled
//! pairs for Lipschitz moduli, discretized limsup tests for normal cones,
//! graph sampling for coderivatives, selection enumeration for expected maps.
//! These are test instruments: grids are budget-capped, estimates are seeded
//! and bitwise deterministic, and trends over shrinking radii are reported,
//! never extrapolated.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::multifunction::{IntegrandExpr, SetValue};
use crate::tol;

/// Sampling specification shared by the empirical estimators.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub center: DVector<f64>,
    pub radius: f64,
    /// Points per axis; also scales the direction nets.
    pub resolution: usize,
    pub seed: u64,
}

impl GridSpec {
    pub fn new(center: DVector<f64>, radius: f64, resolution: usize, seed: u64) -> Result<Self> {
        if resolution < 3 {
            return Err(Error::DomainError("grid resolution must be at least 3".into()));
        }
        if radius <= 0.0 {
            return Err(Error::DomainError("grid radius must be positive".into()));
        }
        Ok(GridSpec { center, radius, resolution, seed })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.resolution - 1) as f64
    }
}

/// An empirical modulus estimate with its trend over shrinking radii.
/// The divergence flag compares the smallest-radius estimate against the
/// largest-radius one; estimates that blow up like `1/ρ` cross the 10x
/// threshold over the sampled four halvings.
#[derive(Debug, Clone)]
pub struct EmpiricalEstimate {
    pub value: f64,
    /// `(radius, estimate)` pairs, largest radius first.
    pub trend: Vec<(f64, f64)>,
    pub diverging: bool,
}

impl EmpiricalEstimate {
    fn from_trend(trend: Vec<(f64, f64)>) -> Self {
        let first = trend.first().map(|&(_, e)| e).unwrap_or(0.0);
        let last = trend.last().map(|&(_, e)| e).unwrap_or(0.0);
        let diverging = !last.is_finite() || (first.is_finite() && last > 10.0 * first.max(1e-12));
        EmpiricalEstimate { value: last, trend, diverging }
    }
}

/// Anything the oracles can sample: a multifunction with evaluable values and
/// an optional exact preimage.
pub trait Evaluable: Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval(&self, x: &DVector<f64>) -> Result<SetValue>;
    /// Exact preimage `F^{-1}(y)` when the structure admits one.
    fn preimage(&self, _y: &DVector<f64>) -> Option<SetValue> {
        None
    }

    /// Exact `dist(u, F^{-1}(y))` when computable faster than the polyhedral
    /// projection; infinity when the preimage is empty.
    fn preimage_distance(&self, _u: &DVector<f64>, _y: &DVector<f64>) -> Option<f64> {
        None
    }
}

impl Evaluable for IntegrandExpr {
    fn input_dim(&self) -> usize {
        IntegrandExpr::input_dim(self)
    }

    fn output_dim(&self) -> usize {
        IntegrandExpr::output_dim(self)
    }

    fn eval(&self, x: &DVector<f64>) -> Result<SetValue> {
        self.evaluate(x)
    }

    fn preimage_distance(&self, u: &DVector<f64>, y: &DVector<f64>) -> Option<f64> {
        match self {
            IntegrandExpr::Affine { a, b } => {
                // dist(u, {x : Ax = y - b}) via the minimum-norm correction.
                let residual = a * u - (y - b);
                let svd = a.clone().svd(true, true);
                let delta = svd.solve(&residual, 1e-12).ok()?;
                // Consistency check: inconsistent systems have empty preimages.
                if (a * &delta - &residual).norm() > 1e-7 * residual.norm().max(1.0) {
                    return Some(f64::INFINITY);
                }
                Some(delta.norm())
            }
            _ => None,
        }
    }

    fn preimage(&self, y: &DVector<f64>) -> Option<SetValue> {
        match self {
            IntegrandExpr::Affine { a, b } => {
                let rhs = y - b;
                let mut rows = Vec::new();
                let mut offs = Vec::new();
                for i in 0..a.nrows() {
                    let r = a.row(i).transpose();
                    rows.push(r.clone());
                    offs.push(rhs[i]);
                    rows.push(-r);
                    offs.push(-rhs[i]);
                }
                Some(SetValue::from_set(crate::geometry::PolyhedralSet::new(
                    a.ncols(),
                    rows,
                    offs,
                )))
            }
            IntegrandExpr::PolyhedralGraph { input_dim, output_dim, pieces } => {
                let idx: Vec<usize> = (*input_dim..*input_dim + *output_dim).collect();
                let slices = pieces.iter().map(|p| p.fix_coords(&idx, y)).collect();
                Some(SetValue::new(*input_dim, slices))
            }
            _ => None,
        }
    }
}

/// A multifunction given by closures, used to wrap solution maps assembled in
/// tests and examples.
pub struct FnMultimap {
    pub in_dim: usize,
    pub out_dim: usize,
    pub f: Box<dyn Fn(&DVector<f64>) -> Result<SetValue> + Sync>,
    pub pre: Option<Box<dyn Fn(&DVector<f64>) -> SetValue + Sync>>,
}

impl Evaluable for FnMultimap {
    fn input_dim(&self) -> usize {
        self.in_dim
    }

    fn output_dim(&self) -> usize {
        self.out_dim
    }

    fn eval(&self, x: &DVector<f64>) -> Result<SetValue> {
        (self.f)(x)
    }

    fn preimage(&self, y: &DVector<f64>) -> Option<SetValue> {
        self.pre.as_ref().map(|p| p(y))
    }
}

/// Deterministic quasi-uniform unit directions: signed axes, sign diagonals,
/// then a seeded Gaussian fill; the estimators refine the best one locally.
pub fn unit_directions(dim: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for i in 0..dim {
        for s in [1.0, -1.0] {
            out.push(DVector::from_fn(dim, |j, _| if i == j { s } else { 0.0 }));
        }
    }
    if dim <= 6 && dim > 1 {
        let corners = 1usize << dim;
        for mask in 0..corners {
            let d = DVector::from_fn(dim, |j, _| if mask & (1 << j) != 0 { 1.0 } else { -1.0 });
            out.push(d.normalize());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < count {
        let d = DVector::from_fn(dim, |_, _| {
            let u1: f64 = rng.gen_range(1e-12..1.0f64);
            let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            (-2.0 * u1.ln()).sqrt() * u2.cos()
        });
        let n = d.norm();
        if n > 1e-9 {
            out.push(d / n);
        }
    }
    out.truncate(count);
    out
}

fn direction_budget(dim: usize, resolution: usize) -> usize {
    let base = resolution * 4 * dim.max(1);
    base.clamp(64, 512)
}

/// Empirical Lipschitz-like modulus at a graph point:
/// `max excess(F(u) ∩ V, F(v)) / ‖u - v‖` over sampled pairs near the point,
/// with the value window `V` fixed at the grid radius and the pair radius
/// shrinking through `{r, r/2, r/4}`.
pub fn empirical_lip(
    f: &dyn Evaluable,
    p: &crate::multifunction::GraphPoint,
    g: &GridSpec,
) -> Result<EmpiricalEstimate> {
    let dim = f.input_dim();
    let window = SetValue::box_value(
        &p.value.add_scalar(-g.radius),
        &p.value.add_scalar(g.radius),
    );
    let dirs = unit_directions(dim, direction_budget(dim, g.resolution), g.seed);
    budget_check(dirs.len() * 12)?;

    let pair_ratio = |u: &DVector<f64>, v: &DVector<f64>| -> Option<f64> {
        let fu = f.eval(u).ok()?;
        let fv = f.eval(v).ok()?;
        if fv.is_empty() {
            return None;
        }
        let clipped = fu.intersect(&window);
        if clipped.is_empty() {
            return None; // empty intersection: pair skipped
        }
        let e = clipped.excess_over(&fv).ok()?;
        let d = (u - v).norm();
        if d < 1e-12 {
            None
        } else {
            Some(e / d)
        }
    };

    let ratio_along = |d: &DVector<f64>, rho: f64| -> f64 {
        let h = rho / (g.resolution.min(9)) as f64;
        let steps = [h, rho * 0.25, rho * 0.5, rho];
        let mut best: f64 = 0.0;
        for &s in &steps {
            let u = &p.input + d * s;
            let v = &p.input - d * (s * 0.5);
            for (a, b) in [(&u, &p.input), (&p.input, &u), (&u, &v), (&v, &u)] {
                if let Some(r) = pair_ratio(a, b) {
                    best = best.max(r);
                }
            }
        }
        best
    };

    let mut trend = Vec::new();
    for k in 0..5 {
        let rho = g.radius / (1 << k) as f64;
        let mut scored: Vec<(f64, usize)> =
            dirs.iter().enumerate().map(|(i, d)| (ratio_along(d, rho), i)).collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let mut best = scored.first().map(|&(r, _)| r).unwrap_or(0.0);
        // Greedy refinement restarted from the top net directions.
        for (rank, &(_, i)) in scored.iter().take(3).enumerate() {
            let mut dir = dirs[i].clone();
            let mut step = 0.4;
            let mut rng =
                ChaCha8Rng::seed_from_u64(g.seed ^ (0x5eed + k as u64 + 31 * rank as u64));
            for _ in 0..70 {
                let delta = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0f64));
                let cand = (&dir + delta * step).normalize();
                let r = ratio_along(&cand, rho);
                if r > best {
                    best = r;
                    dir = cand;
                } else {
                    step *= 0.93;
                }
            }
        }
        trend.push((rho, best));
    }
    Ok(EmpiricalEstimate::from_trend(trend))
}

/// Empirical metric-regularity modulus:
/// `max dist(u, F^{-1}(v)) / dist(v, F(u))` over sampled `(u, v)` pairs.
pub fn empirical_reg(
    f: &dyn Evaluable,
    p: &crate::multifunction::GraphPoint,
    g: &GridSpec,
) -> Result<EmpiricalEstimate> {
    let in_dim = f.input_dim();
    let out_dim = f.output_dim();
    let out_dirs = unit_directions(out_dim, direction_budget(out_dim, g.resolution), g.seed);
    let in_dirs = unit_directions(in_dim, 6, g.seed ^ 1);
    budget_check(out_dirs.len() * in_dirs.len())?;

    // A shared candidate cloud for grid inversion when no exact preimage is
    // available; evaluated once.
    let inversion_cloud: Vec<(DVector<f64>, SetValue)> = {
        let probe = f.preimage(&p.value);
        if probe.is_some() {
            Vec::new()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(g.seed ^ 0xbeef);
            let mut cloud = Vec::new();
            for _ in 0..(g.resolution * g.resolution * 4).min(2000) {
                let cand = DVector::from_fn(in_dim, |_, _| rng.gen_range(-1.0..1.0f64))
                    * (2.0 * g.radius)
                    + &p.input;
                if let Ok(val) = f.eval(&cand) {
                    if !val.is_empty() {
                        cloud.push((cand, val));
                    }
                }
            }
            cloud
        }
    };

    // Preimage distance: exact when available, grid inversion otherwise.
    let preimage_dist = |u: &DVector<f64>, v: &DVector<f64>, rho: f64| -> f64 {
        if let Some(d) = f.preimage_distance(u, v) {
            return d;
        }
        if let Some(pre) = f.preimage(v) {
            if pre.is_empty() {
                return f64::INFINITY;
            }
            return pre.distance(u).unwrap_or(f64::INFINITY);
        }
        let tol_hit = 2.0 * rho / g.resolution as f64;
        let mut best = f64::INFINITY;
        for (cand, val) in &inversion_cloud {
            if val.distance(v).map(|d| d <= tol_hit).unwrap_or(false) {
                best = best.min((u - cand).norm());
            }
        }
        best
    };

    let ratio_for = |du: &DVector<f64>, dv: &DVector<f64>, su: f64, sv: f64| -> Option<f64> {
        let u = &p.input + du * su;
        let v = &p.value + dv * sv;
        let fu = f.eval(&u).ok()?;
        if fu.is_empty() {
            return None;
        }
        let denom = fu.distance(&v).ok()?;
        if denom <= 1e-12 {
            return None;
        }
        Some(preimage_dist(&u, &v, sv.abs().max(su.abs())) / denom)
    };

    let score = |dv: &DVector<f64>, rho: f64| -> f64 {
        let mut best: f64 = 0.0;
        for du in &in_dirs {
            for (su, sv) in [(0.0, rho), (rho * 0.5, rho), (rho, rho * 0.5), (0.0, rho * 0.25)] {
                if let Some(r) = ratio_for(du, dv, su, sv) {
                    best = best.max(r);
                    if best.is_infinite() {
                        return best;
                    }
                }
            }
        }
        best
    };

    let mut trend = Vec::new();
    for k in 0..5 {
        let rho = g.radius / (1 << k) as f64;
        let mut scored: Vec<(f64, usize)> =
            out_dirs.iter().enumerate().map(|(i, d)| (score(d, rho), i)).collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let mut best = scored.first().map(|&(r, _)| r).unwrap_or(0.0);
        if best.is_finite() {
            for (rank, &(_, i)) in scored.iter().take(3).enumerate() {
                let mut dir = out_dirs[i].clone();
                let mut step = 0.4;
                let mut rng =
                    ChaCha8Rng::seed_from_u64(g.seed ^ (0x4e9u64 + k as u64 + 31 * rank as u64));
                for _ in 0..70 {
                    let delta = DVector::from_fn(out_dim, |_, _| rng.gen_range(-1.0..1.0f64));
                    let cand = (&dir + delta * step).normalize();
                    let r = score(&cand, rho);
                    if r > best {
                        best = r;
                        dir = cand;
                    } else {
                        step *= 0.93;
                    }
                }
            }
        }
        trend.push((rho, best));
    }
    Ok(EmpiricalEstimate::from_trend(trend))
}

/// Discretized regular-normal test followed by the outer-limit union over
/// nearby base points: returns accepted unit directions.
pub fn empirical_normal_cone(
    member: &dyn Fn(&DVector<f64>) -> bool,
    x: &DVector<f64>,
    g: &GridSpec,
) -> Result<Vec<DVector<f64>>> {
    let dim = x.len();
    let dirs = unit_directions(dim, direction_budget(dim, g.resolution).min(1500), g.seed);
    let samples = member_samples(member, x, g)?;
    let bases: Vec<&DVector<f64>> =
        samples.iter().filter(|s| (*s - x).norm() <= g.radius / 3.0).collect();
    let mut accepted: Vec<DVector<f64>> = Vec::new();
    for d in &dirs {
        let mut ok_any = false;
        'base: for &b in &bases {
            for tier in [g.radius, g.radius / 3.0] {
                let mut ok = true;
                for s in &samples {
                    let diff = s - b;
                    let n = diff.norm();
                    if n <= 1e-12 || n > tier {
                        continue;
                    }
                    if d.dot(&diff) / n > tol::LIMSUP_THRESHOLD {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    ok_any = true;
                    break 'base;
                }
            }
        }
        if ok_any {
            accepted.push(d.clone());
        }
    }
    Ok(accepted)
}

fn member_samples(
    member: &dyn Fn(&DVector<f64>) -> bool,
    x: &DVector<f64>,
    g: &GridSpec,
) -> Result<Vec<DVector<f64>>> {
    let dim = x.len();
    let res = g.resolution.min(41);
    let total = res.pow(dim as u32);
    budget_check(total)?;
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        let p = DVector::from_fn(dim, |i, _| {
            x[i] - g.radius + 2.0 * g.radius * idx[i] as f64 / (res - 1) as f64
        });
        if member(&p) {
            out.push(p);
        }
        let mut i = 0;
        loop {
            if i == dim {
                return Ok(out);
            }
            idx[i] += 1;
            if idx[i] < res {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Sampled limiting coderivative: grid of candidate `x*` values accepted when
/// `(x*, -y*)` passes the discretized regular-normal test at some graph
/// sample near the base point.
pub fn empirical_coderivative(
    f: &dyn Evaluable,
    p: &crate::multifunction::GraphPoint,
    ystar: &DVector<f64>,
    g: &GridSpec,
    window: f64,
) -> Result<Vec<DVector<f64>>> {
    let in_dim = f.input_dim();
    let graph = graph_samples(f, p, g)?;
    let mut near: Vec<usize> = (0..graph.len())
        .filter(|&i| {
            let (u, w) = &graph[i];
            (u - &p.input).norm().max((w - &p.value).norm()) <= g.radius / 2.0
        })
        .collect();
    near.sort_by(|&a, &b| {
        let da = (&graph[a].0 - &p.input).norm() + (&graph[a].1 - &p.value).norm();
        let db = (&graph[b].0 - &p.input).norm() + (&graph[b].1 - &p.value).norm();
        da.partial_cmp(&db).unwrap().then(a.cmp(&b))
    });
    near.truncate(600);

    // Two-tier radii approximate the vanishing-neighborhood limit of the
    // regular-normal test; neighbor lists are shared across candidates.
    let tiers = [g.radius / 2.0, g.radius / 4.0];
    let mut neighbor_lists: Vec<Vec<(usize, f64)>> = Vec::with_capacity(near.len());
    for &gi in &near {
        let (u0, w0) = &graph[gi];
        let mut list = Vec::new();
        for (j, (u, w)) in graph.iter().enumerate() {
            let du = u - u0;
            let dw = w - w0;
            let n = (du.norm_squared() + dw.norm_squared()).sqrt();
            if n > 1e-12 && n <= tiers[0] {
                list.push((j, n));
            }
        }
        neighbor_lists.push(list);
    }

    let res = g.resolution.min(33);
    budget_check(res.pow(in_dim as u32) * near.len().max(1))?;
    let mut accepted = Vec::new();
    let mut idx = vec![0usize; in_dim];
    let min_neighbors = in_dim + ystar.len();
    loop {
        let xstar = DVector::from_fn(in_dim, |i, _| {
            -window + 2.0 * window * idx[i] as f64 / (res - 1) as f64
        });
        let nrm = (xstar.norm_squared() + ystar.norm_squared()).sqrt().max(1e-9);
        'points: for (bi, &gi) in near.iter().enumerate() {
            let (u0, w0) = &graph[gi];
            for tier in tiers {
                let mut ok = true;
                let mut neighbors = 0usize;
                for &(j, n) in &neighbor_lists[bi] {
                    if n > tier {
                        continue;
                    }
                    neighbors += 1;
                    let (u, w) = &graph[j];
                    let inner = xstar.dot(u) - xstar.dot(u0) - (ystar.dot(w) - ystar.dot(w0));
                    if inner / (n * nrm) > tol::LIMSUP_THRESHOLD {
                        ok = false;
                        break;
                    }
                }
                // A test with too few neighbors is vacuous, not evidence.
                if ok && neighbors >= min_neighbors {
                    accepted.push(xstar.clone());
                    break 'points;
                }
            }
        }
        let mut i = 0;
        loop {
            if i == in_dim {
                return Ok(accepted);
            }
            idx[i] += 1;
            if idx[i] < res {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Sample graph points of `f` around `p`: inputs on a grid, values on a
/// regular grid over each piece clipped to a window around the base value.
pub fn graph_samples(
    f: &dyn Evaluable,
    p: &crate::multifunction::GraphPoint,
    g: &GridSpec,
) -> Result<Vec<(DVector<f64>, DVector<f64>)>> {
    let in_dim = f.input_dim();
    let res = g.resolution.min(21);
    budget_check(res.pow(in_dim as u32) * 40)?;
    let wlo = p.value.add_scalar(-2.0 * g.radius);
    let whi = p.value.add_scalar(2.0 * g.radius);
    let wbox = crate::geometry::PolyhedralSet::box_set(&wlo, &whi);
    // Value spacing comparable to the input grid keeps the normal test
    // balanced across both blocks.
    let spacing = (g.radius / 6.0).max(1e-9);
    let vres = ((4.0 * g.radius / spacing).ceil() as usize + 1).min(25);

    let mut out: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
    let mut idx = vec![0usize; in_dim];
    loop {
        let u = DVector::from_fn(in_dim, |i, _| {
            p.input[i] - g.radius + 2.0 * g.radius * idx[i] as f64 / (res - 1) as f64
        });
        if let Ok(val) = f.eval(&u) {
            for piece in val.pieces() {
                let clipped = piece.intersect(&wbox);
                if clipped.is_empty() {
                    continue;
                }
                let cv = crate::multifunction::SetValue::from_set(clipped);
                let mut push = |w: DVector<f64>| {
                    if !out
                        .iter()
                        .rev()
                        .take(64)
                        .any(|(uu, ww)| uu == &u && (ww - &w).norm() <= 1e-10)
                    {
                        out.push((u.clone(), w));
                    }
                };
                for w in cv.vertices() {
                    push(w);
                }
                if let Ok(points) = dense_value_grid(&cv, vres) {
                    for w in points {
                        push(w);
                    }
                }
            }
        }
        let mut i = 0;
        loop {
            if i == in_dim {
                return Ok(out);
            }
            idx[i] += 1;
            if idx[i] < res {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Direct enumeration of discretized selections of a finite scenario family:
/// the set of weighted sums, as a point cloud.
pub fn brute_expected_map(
    values: &[(f64, SetValue)],
    per_set_resolution: usize,
) -> Result<Vec<DVector<f64>>> {
    if values.is_empty() {
        return Ok(Vec::new());
    }
    if values.len() > 3 {
        return Err(Error::DomainError(
            "brute-force expected map supports at most 3 atoms".into(),
        ));
    }
    let dim = values[0].1.dim();
    let mut grids: Vec<Vec<DVector<f64>>> = Vec::new();
    for (_, v) in values {
        let samples = dense_value_grid(v, per_set_resolution)?;
        if samples.is_empty() {
            return Err(Error::EmptySet("scenario value set is empty".into()));
        }
        grids.push(samples);
    }
    let total: usize = grids.iter().map(|g| g.len()).product();
    budget_check(total)?;
    let mut out = Vec::new();
    let mut idx = vec![0usize; grids.len()];
    loop {
        let mut sum = DVector::zeros(dim);
        for (k, g) in grids.iter().enumerate() {
            sum += &g[idx[k]] * values[k].0;
        }
        out.push(sum);
        let mut i = 0;
        loop {
            if i == grids.len() {
                return Ok(out);
            }
            idx[i] += 1;
            if idx[i] < grids[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Dense grid over a bounded set value (bounding box filtered by membership).
pub fn dense_value_grid(v: &SetValue, resolution: usize) -> Result<Vec<DVector<f64>>> {
    if !v.is_bounded() {
        return Err(Error::Unbounded("dense grid over an unbounded value".into()));
    }
    let verts = v.vertices();
    if verts.is_empty() {
        return Ok(Vec::new());
    }
    let dim = v.dim();
    if verts.len() == 1 {
        return Ok(verts);
    }
    let lo =
        DVector::from_fn(dim, |i, _| verts.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min));
    let hi = DVector::from_fn(dim, |i, _| {
        verts.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max)
    });
    let res = resolution.max(2);
    budget_check(res.pow(dim as u32))?;
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        let p = DVector::from_fn(dim, |i, _| {
            lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / (res - 1) as f64
        });
        if v.contains(&p, 1e-9) {
            out.push(p);
        }
        let mut i = 0;
        loop {
            if i == dim {
                return Ok(out);
            }
            idx[i] += 1;
            if idx[i] < res {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

fn budget_check(requested: usize) -> Result<()> {
    if requested > tol::GRID_BUDGET {
        Err(Error::GridBudgetExceeded { requested, cap: tol::GRID_BUDGET })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PolyhedralSet;
    use crate::multifunction::GraphPoint;
    use nalgebra::DMatrix;

    fn v(entries: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(entries)
    }

    #[test]
    fn lip_of_diagonal_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let node = IntegrandExpr::affine(a, v(&[0.0, 0.0]));
        let p = GraphPoint::new(v(&[0.0, 0.0]), v(&[0.0, 0.0]));
        let g = GridSpec::new(v(&[0.0, 0.0]), 0.5, 21, 7).unwrap();
        let est = empirical_lip(&node, &p, &g).unwrap();
        assert!((est.value - 3.0).abs() < 3.0 * 0.02, "estimate {} vs 3", est.value);
        assert!(!est.diverging);
    }

    #[test]
    fn lip_of_constant_set_is_zero() {
        let node = IntegrandExpr::BoxValued {
            center: crate::multifunction::PolyMap::constant(1, &v(&[0.0])),
            radius: crate::multifunction::PolyMap::constant(1, &v(&[1.0])),
        };
        let p = GraphPoint::new(v(&[0.0]), v(&[0.0]));
        let g = GridSpec::new(v(&[0.0]), 0.5, 11, 3).unwrap();
        let est = empirical_lip(&node, &p, &g).unwrap();
        assert!(est.value < 1e-9);
    }

    #[test]
    fn lip_of_normal_cone_map_diverges() {
        let node = IntegrandExpr::NormalConeMap { c: PolyhedralSet::nonpositive_orthant(1) };
        let p = GraphPoint::new(v(&[0.0]), v(&[0.0]));
        let g = GridSpec::new(v(&[0.0]), 0.5, 21, 11).unwrap();
        let est = empirical_lip(&node, &p, &g).unwrap();
        assert!(est.diverging || est.value > 50.0, "trend {:?}", est.trend);
    }

    #[test]
    fn reg_of_identity_is_one() {
        let node = IntegrandExpr::affine(DMatrix::identity(2, 2), v(&[0.0, 0.0]));
        let p = GraphPoint::new(v(&[0.0, 0.0]), v(&[0.0, 0.0]));
        let g = GridSpec::new(v(&[0.0, 0.0]), 0.5, 15, 5).unwrap();
        let est = empirical_reg(&node, &p, &g).unwrap();
        assert!((est.value - 1.0).abs() < 0.1, "estimate {}", est.value);
    }

    #[test]
    fn reg_of_invertible_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 0.5]);
        let sigma_min = crate::geometry::smallest_singular_value(&a);
        let node = IntegrandExpr::affine(a, v(&[0.0, 0.0]));
        let p = GraphPoint::new(v(&[0.0, 0.0]), v(&[0.0, 0.0]));
        let g = GridSpec::new(v(&[0.0, 0.0]), 0.5, 21, 9).unwrap();
        let est = empirical_reg(&node, &p, &g).unwrap();
        let expect = 1.0 / sigma_min;
        assert!(
            (est.value - expect).abs() <= 0.1 * expect,
            "estimate {} vs {}",
            est.value,
            expect
        );
    }

    #[test]
    fn normal_cone_of_orthant_sampled() {
        let member = |p: &DVector<f64>| p[0] <= 1e-12 && p[1] <= 1e-12;
        let g = GridSpec::new(v(&[0.0, 0.0]), 0.5, 15, 3).unwrap();
        let dirs = empirical_normal_cone(&member, &v(&[0.0, 0.0]), &g).unwrap();
        assert!(!dirs.is_empty());
        for d in &dirs {
            assert!(d[0] >= -0.05 && d[1] >= -0.05, "bad direction {:?}", d);
        }
        assert!(dirs.iter().any(|d| (d - v(&[1.0, 1.0]).normalize()).norm() < 0.3));
    }

    #[test]
    fn coderivative_of_linear_map_sampled() {
        let a = DMatrix::from_row_slice(1, 1, &[2.0]);
        let node = IntegrandExpr::affine(a, v(&[0.0]));
        let p = GraphPoint::new(v(&[0.0]), v(&[0.0]));
        let g = GridSpec::new(v(&[0.0]), 0.5, 21, 3).unwrap();
        let pts = empirical_coderivative(&node, &p, &v(&[1.0]), &g, 3.0).unwrap();
        assert!(!pts.is_empty());
        let spacing = 2.0 * 3.0 / 32.0;
        for x in &pts {
            assert!((x[0] - 2.0).abs() <= 2.0 * spacing, "sample {:?}", x);
        }
    }

    #[test]
    fn brute_expected_interval_sum() {
        let a = SetValue::box_value(&v(&[0.0]), &v(&[1.0]));
        let b = SetValue::box_value(&v(&[1.0]), &v(&[2.0]));
        let cloud = brute_expected_map(&[(0.5, a), (0.5, b)], 11).unwrap();
        let lo = cloud.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let hi = cloud.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        assert!((lo - 0.5).abs() < 1e-9 && (hi - 1.5).abs() < 1e-9);
    }

    #[test]
    fn determinism_of_estimates() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let node = IntegrandExpr::affine(a, v(&[0.0, 0.0]));
        let p = GraphPoint::new(v(&[0.0, 0.0]), v(&[0.0, 0.0]));
        let g = GridSpec::new(v(&[0.0, 0.0]), 0.5, 15, 42).unwrap();
        let e1 = empirical_lip(&node, &p, &g).unwrap();
        let e2 = empirical_lip(&node, &p, &g).unwrap();
        assert_eq!(e1.value.to_bits(), e2.value.to_bits());
        for (a, b) in e1.trend.iter().zip(e2.trend.iter()) {
            assert_eq!(a.1.to_bits(), b.1.to_bits());
        }
    }
}
