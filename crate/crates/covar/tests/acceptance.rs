//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Every expected value is either computed by an independent oracle inside
//! this file (Jacobi spectra, definitional sampling, brute-force enumeration)
//! or verified against the defining inequalities; tolerances are pinned in
//! the assertions.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use covar::geometry::{coderivative_normal_cone_map, PolyhedralSet};
use covar::multifunction::{GraphPoint, IntegrandExpr, PolyMap, Polynomial, Monomial};
use covar::oracle::{
    empirical_coderivative, empirical_lip, empirical_reg, Evaluable, GridSpec,
};
use covar::stochastic::{
    expected_coderivative_map, lipschitz_property_check, selection_set, Atom, ExpectedMapFn,
    LipschitzCheckOptions, LipschitzKind, RandomIntegrand, ScenarioModel, Selection,
};
use covar::systems::{
    constraint_certify, mpec_check, semilinear_multiplier_decomposition,
    variational_certify, variational_solution_map, ConstraintSystemSpec, GPlacement, MpecCost,
    MpecSpec, VariationalSystemSpec,
};
use covar::systems::constraint::ConstraintCertifyOptions;
use covar::wellposedness::{
    lipschitz_certify, metric_regularity_certify, Property, Verdict,
};

fn v(entries: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(entries)
}

/// Independent spectral oracle: cyclic Jacobi on the symmetric matrix
/// `A^T A`; singular values are the square roots of its eigenvalues.
fn jacobi_singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s = a.transpose() * a;
    let n = s.nrows();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += s[(p, q)] * s[(p, q)];
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if s[(p, q)].abs() < 1e-18 {
                    continue;
                }
                let theta = 0.5 * (s[(q, q)] - s[(p, p)]) / s[(p, q)];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let skp = s[(k, p)];
                    let skq = s[(k, q)];
                    s[(k, p)] = c * skp - sn * skq;
                    s[(k, q)] = sn * skp + c * skq;
                }
                for k in 0..n {
                    let spk = s[(p, k)];
                    let sqk = s[(q, k)];
                    s[(p, k)] = c * spk - sn * sqk;
                    s[(q, k)] = sn * spk + c * sqk;
                }
            }
        }
    }
    let mut out: Vec<f64> = (0..n).map(|i| s[(i, i)].max(0.0).sqrt()).collect();
    out.sort_by(|a, b| b.partial_cmp(a).unwrap());
    out
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-2.0..2.0f64))
}

#[test]
fn criterion_01_linear_lipschitz_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..25 {
        let n = rng.gen_range(1..=4usize);
        let m = rng.gen_range(1..=4usize);
        let a = random_matrix(&mut rng, m, n);
        let sigma = jacobi_singular_values(&a)[0];
        let node = IntegrandExpr::affine(a.clone(), DVector::zeros(m));
        let p = GraphPoint::new(DVector::zeros(n), DVector::zeros(m));
        let cm = node.coderivative_map(&p).expect("graph point");
        let cert = lipschitz_certify(&cm.map, true);
        assert_eq!(cert.verdict, Verdict::Certified, "trial {trial}");
        let bound = cert.bound.unwrap();
        assert!(
            (bound - sigma).abs() <= 1e-9,
            "trial {trial}: certified {bound} vs spectral {sigma}"
        );
        // Spacing 0.01 over radius 0.5 -> 101 points per axis.
        let g = GridSpec::new(DVector::zeros(n), 0.5, 101, 1000 + trial).unwrap();
        let emp = empirical_lip(&node, &p, &g).unwrap();
        assert!(
            (emp.value - sigma).abs() <= 0.05 * sigma.max(1e-12),
            "trial {trial}: empirical {} vs spectral {sigma}",
            emp.value
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "runtime {elapsed:?} exceeds 10 s");
    println!(
        "criterion 01: PASS — 25 random linear systems, certified lip = spectral norm \
         within 1e-9, empirical within 5%, {:.2?} total",
        elapsed
    );
}

#[test]
fn criterion_02_metric_regularity_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut done = 0;
    while done < 25 {
        let n = rng.gen_range(1..=4usize);
        let a = random_matrix(&mut rng, n, n);
        let svs = jacobi_singular_values(&a);
        let sigma_min = *svs.last().unwrap();
        if sigma_min < 0.15 {
            continue; // keep the instances comfortably invertible
        }
        done += 1;
        let node = IntegrandExpr::affine(a.clone(), DVector::zeros(n));
        let p = GraphPoint::new(DVector::zeros(n), DVector::zeros(n));
        let cm = node.coderivative_map(&p).unwrap();
        let cert = metric_regularity_certify(&cm.map, true);
        assert_eq!(cert.verdict, Verdict::Certified);
        let bound = cert.bound.unwrap();
        assert!(
            (bound - 1.0 / sigma_min).abs() <= 1e-9 * (1.0 / sigma_min).max(1.0),
            "certified reg {bound} vs 1/sigma_min {}",
            1.0 / sigma_min
        );
        let g = GridSpec::new(DVector::zeros(n), 0.5, 41, 2000 + done).unwrap();
        let emp = empirical_reg(&node, &p, &g).unwrap();
        assert!(
            (emp.value - 1.0 / sigma_min).abs() <= 0.10 / sigma_min,
            "empirical reg {} vs {}",
            emp.value,
            1.0 / sigma_min
        );
    }
    println!(
        "criterion 02: PASS — certified reg = 1/sigma_min within 1e-9 on 25 invertible \
         systems, empirical within 10%"
    );
}

/// Hausdorff check between an empirical point cloud and an analytic union of
/// polyhedra, both restricted to a window.
fn hausdorff_ok(
    empirical: &[DVector<f64>],
    analytic: &[PolyhedralSet],
    window: f64,
    tolerance: f64,
) -> bool {
    // Empirical -> analytic.
    for e in empirical {
        let d = analytic
            .iter()
            .filter_map(|p| p.distance(e).ok())
            .fold(f64::INFINITY, f64::min);
        if d > tolerance {
            return false;
        }
    }
    // Analytic (sampled inside the window) -> empirical.
    let dim = empirical.first().map(|e| e.len()).unwrap_or(1);
    let window_box = PolyhedralSet::box_set(
        &DVector::from_element(dim, -window),
        &DVector::from_element(dim, window),
    );
    for p in analytic {
        let clipped = p.intersect(&window_box);
        if clipped.is_empty() {
            continue;
        }
        let samples = covar::oracle::dense_value_grid(
            &covar::multifunction::SetValue::from_set(clipped),
            9,
        )
        .unwrap();
        for s in samples {
            let d = empirical.iter().map(|e| (e - &s).norm()).fold(f64::INFINITY, f64::min);
            if d > tolerance {
                return false;
            }
        }
    }
    true
}

#[test]
fn criterion_03_polyhedral_coderivative_oracle_equivalence() {
    let start = Instant::now();
    // Instance list: (set, base z, normal v, dual probes).
    let one_d = (
        PolyhedralSet::nonpositive_orthant(1),
        v(&[0.0]),
        v(&[0.0]),
        vec![v(&[-1.0]), v(&[-0.5]), v(&[0.0]), v(&[0.5]), v(&[1.0])],
    );
    let orthant = (
        PolyhedralSet::nonpositive_orthant(2),
        v(&[0.0, 0.0]),
        v(&[0.0, 0.0]),
        vec![v(&[1.0, 0.0]), v(&[0.0, -1.0]), v(&[1.0, 1.0]), v(&[-1.0, 1.0])],
    );
    let halfplane = (
        PolyhedralSet::new(2, vec![v(&[1.0, 1.0])], vec![1.0]),
        v(&[1.0, 0.0]),
        v(&[0.0, 0.0]),
        vec![v(&[1.0, 1.0]), v(&[1.0, -1.0]), v(&[0.5, 0.5])],
    );
    let wedge = (
        PolyhedralSet::new(2, vec![v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[1.0, 1.0])], vec![
            0.0, 0.0, 1.0,
        ]),
        v(&[0.0, 0.0]),
        v(&[1.0, 0.0]),
        vec![v(&[0.0, 1.0]), v(&[1.0, 0.0]), v(&[-1.0, -1.0])],
    );

    for (idx, (c, z, nv, duals)) in [one_d, orthant, halfplane, wedge].into_iter().enumerate() {
        let node = IntegrandExpr::NormalConeMap { c: c.clone() };
        let p = GraphPoint::new(z.clone(), nv.clone());
        let dim = z.len();
        let res = if dim == 1 { 41 } else { 13 };
        let window = 2.0;
        let g = GridSpec::new(z.clone(), 1.0, res, 300 + idx as u64).unwrap();
        let spacing = 2.0 * window / (g.resolution.min(33) - 1) as f64;
        for ystar in &duals {
            let analytic = coderivative_normal_cone_map(&c, &z, &nv, ystar).unwrap();
            let empirical = empirical_coderivative(&node, &p, ystar, &g, window).unwrap();
            assert!(
                !empirical.is_empty() || analytic.iter().all(|a| a.is_empty()),
                "instance {idx}: empty empirical set at y* = {ystar:?}"
            );
            assert!(
                hausdorff_ok(&empirical, &analytic, window, 2.0 * spacing),
                "instance {idx}: Hausdorff mismatch at y* = {ystar:?}"
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "runtime {elapsed:?} exceeds 60 s");
    println!(
        "criterion 03: PASS — face-pair coderivatives match the graph-sampling oracle \
         within 2x grid spacing on 4 instances, {:.2?} total",
        elapsed
    );
}

fn random_scalar_node(rng: &mut ChaCha8Rng) -> IntegrandExpr {
    if rng.gen_bool(0.5) {
        IntegrandExpr::affine(
            DMatrix::from_row_slice(1, 1, &[rng.gen_range(-2.0..2.0f64)]),
            v(&[rng.gen_range(-0.5..0.5f64)]),
        )
    } else {
        // Box widths stay above the oracle's sampling neighborhood so the
        // endpoint strata are resolved at grid scale.
        let slope = rng.gen_range(-1.5..1.5f64);
        let radius = rng.gen_range(0.35..0.8f64);
        IntegrandExpr::BoxValued {
            center: PolyMap::affine(&DMatrix::from_row_slice(1, 1, &[slope]), &v(&[0.0])),
            radius: PolyMap::constant(1, &v(&[radius])),
        }
    }
}

#[test]
fn criterion_04_leibniz_inclusion() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut violations = 0usize;
    for trial in 0..10 {
        let phi =
            RandomIntegrand::new(vec![random_scalar_node(&mut rng), random_scalar_node(&mut rng)])
                .unwrap();
        let w1 = rng.gen_range(0.2..0.8f64);
        let model = ScenarioModel::new(vec![
            Atom { id: "a1".into(), weight: w1, nonatomic: false },
            Atom { id: "a2".into(), weight: 1.0 - w1, nonatomic: false },
        ])
        .unwrap();
        let x = v(&[0.0]);
        let e = covar::stochastic::expected_map(&phi, &model, &x).unwrap();
        let ybar = e.vertices().into_iter().next().unwrap();
        let p = GraphPoint::new(x.clone(), ybar.clone());
        let g = GridSpec::new(x.clone(), 0.4, 15, 4000 + trial).unwrap();
        let map_fn = ExpectedMapFn { phi: &phi, model: &model };

        // Analytic union over extreme selections.
        let sels = selection_set(&phi, &model, &x, &ybar).unwrap().extreme();
        let maps: Vec<_> = sels
            .iter()
            .map(|s| expected_coderivative_map(&phi, &model, &x, s).unwrap())
            .collect();

        let spacing = 2.0 * 3.0 / (g.resolution.min(33) - 1) as f64;
        for k in 0..20 {
            let ystar = v(&[-2.0 + 4.0 * k as f64 / 19.0]);
            let empirical = empirical_coderivative(&map_fn, &p, &ystar, &g, 3.0).unwrap();
            let analytic: Vec<PolyhedralSet> = maps
                .iter()
                .flat_map(|m| m.value(&ystar).pieces.clone())
                .collect();
            for e in &empirical {
                let d = analytic
                    .iter()
                    .filter_map(|pc| pc.distance(e).ok())
                    .fold(f64::INFINITY, f64::min);
                if d > 2.0 * spacing {
                    violations += 1;
                }
            }
        }
    }
    assert_eq!(violations, 0, "{violations} inclusion violations");
    println!(
        "criterion 04: PASS — empirical expected-map coderivatives inside the selection \
         union on 10 instances x 20 duals, zero violations"
    );
}

#[test]
fn criterion_05_lipschitz_evidence_end_to_end() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut passing = 0usize;
    let mut failing = 0usize;
    for trial in 0..6 {
        let phi =
            RandomIntegrand::new(vec![random_scalar_node(&mut rng), random_scalar_node(&mut rng)])
                .unwrap();
        let model = ScenarioModel::uniform(2);
        let x = v(&[0.0]);
        let e = covar::stochastic::expected_map(&phi, &model, &x).unwrap();
        let ybar = e.vertices().into_iter().next().unwrap();
        let sel = selection_set(&phi, &model, &x, &ybar).unwrap().extreme().remove(0);
        let ev = lipschitz_property_check(
            &phi,
            &model,
            &x,
            &sel,
            LipschitzKind::Quasi,
            &LipschitzCheckOptions::default(),
        )
        .unwrap();
        // Box coderivatives need affine payloads; all instances here qualify.
        assert!(ev.holds, "trial {trial}: quasi evidence unexpectedly fails");
        passing += 1;
        let map_fn = ExpectedMapFn { phi: &phi, model: &model };
        let p = GraphPoint::new(x.clone(), ybar.clone());
        let g = GridSpec::new(x.clone(), 0.4, 15, 5000 + trial).unwrap();
        let emp = empirical_lip(&map_fn, &p, &g).unwrap();
        assert!(
            !emp.diverging && emp.value.is_finite(),
            "trial {trial}: quasi-verified instance has diverging empirical lip {:?}",
            emp.trend
        );
    }
    // Unbounded-coderivative instance: a normal-cone scenario.
    {
        let phi = RandomIntegrand::new(vec![
            IntegrandExpr::affine(DMatrix::identity(1, 1), v(&[0.0])),
            IntegrandExpr::NormalConeMap { c: PolyhedralSet::nonpositive_orthant(1) },
        ])
        .unwrap();
        let model = ScenarioModel::uniform(2);
        let x = v(&[0.0]);
        let sel = Selection { per_atom: vec![v(&[0.0]), v(&[0.0])] };
        let ev = lipschitz_property_check(
            &phi,
            &model,
            &x,
            &sel,
            LipschitzKind::Quasi,
            &LipschitzCheckOptions::default(),
        )
        .unwrap();
        assert!(!ev.holds && ev.witness.is_some(), "expected an unbounded witness");
        // Either the empirical lip of E[Φ] diverges or certification refuses.
        let map_fn = ExpectedMapFn { phi: &phi, model: &model };
        let p = GraphPoint::new(x.clone(), v(&[0.0]));
        let g = GridSpec::new(x.clone(), 0.4, 15, 5050).unwrap();
        let emp = empirical_lip(&map_fn, &p, &g).unwrap();
        let integrated = expected_coderivative_map(&phi, &model, &x, &sel).unwrap();
        let cert = lipschitz_certify(&integrated.map, false);
        let refused = cert.verdict != Verdict::Certified;
        assert!(
            emp.diverging || refused,
            "neither diverging empirical lip nor a certificate refusal"
        );
        failing += 1;
    }
    println!(
        "criterion 05: PASS — {passing} quasi-verified instances have finite empirical \
         lip; {failing} unbounded-witness instance triggers divergence or refusal"
    );
}

/// The two-scenario, two-decision-variable semilinear instance with a strict
/// interior point; `boundary` pins the second decision coordinate so the
/// strict point disappears.
fn semilinear_instance(boundary: bool) -> (ConstraintSystemSpec, DVector<f64>, DVector<f64>) {
    let phi = RandomIntegrand::new(vec![
        IntegrandExpr::affine(
            DMatrix::from_row_slice(2, 3, &[-1.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
            v(&[-1.0, -1.0]),
        ),
        IntegrandExpr::affine(
            DMatrix::from_row_slice(2, 3, &[0.5, 1.0, 2.0, 0.0, 0.0, 1.0]),
            v(&[-1.0, -1.0]),
        ),
    ])
    .unwrap();
    let mut o_rows = vec![v(&[-1.0, -1.0, 0.0]), v(&[0.0, 0.0, -1.0])];
    let mut o_offs = vec![2.0, 2.0];
    if boundary {
        // Force z2 >= 1, pinning the active constraint with no slack.
        o_rows.push(v(&[0.0, 0.0, -1.0]));
        o_offs.push(-1.0);
    }
    let spec = ConstraintSystemSpec {
        phi,
        nx: 1,
        nz: 2,
        k_set: PolyhedralSet::nonpositive_orthant(2),
        o_set: PolyhedralSet::new(3, o_rows, o_offs),
        model: ScenarioModel::uniform(2),
    };
    (spec, v(&[0.0]), v(&[0.0, 1.0]))
}

#[test]
fn criterion_06_semilinear_certification_and_multipliers() {
    let (spec, xbar, zbar) = semilinear_instance(false);
    let opts = ConstraintCertifyOptions { require_slater: true };
    let cert = constraint_certify(&spec, &xbar, &zbar, Property::LipschitzLike, &opts);
    assert_eq!(cert.verdict, Verdict::Certified, "log: {:?}", cert.assumptions_log);

    let decomps = semilinear_multiplier_decomposition(&spec, &xbar, &zbar).unwrap();
    assert!(!decomps.is_empty());
    for d in &decomps {
        assert!(d.complementarity_residual <= 1e-8, "complementarity {d:?}");
        assert!(d.z_identity_residual <= 1e-8, "z identity {d:?}");
        assert!(d.x_identity_residual <= 1e-8, "x identity {d:?}");
        assert!(d.membership_residual <= 1e-8, "estimate membership {d:?}");
    }

    let (bspec, bx, bz) = semilinear_instance(true);
    let bcert = constraint_certify(&bspec, &bx, &bz, Property::LipschitzLike, &opts);
    assert_eq!(
        bcert.verdict,
        Verdict::Inconclusive,
        "boundary variant log: {:?}",
        bcert.assumptions_log
    );
    println!(
        "criterion 06: PASS — semilinear system certified Lipschitz-like with multiplier \
         residuals <= 1e-8 ({} decompositions); boundary variant is inconclusive",
        decomps.len()
    );
}

fn stochastic_vi_spec() -> VariationalSystemSpec {
    let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
    VariationalSystemSpec {
        phi: RandomIntegrand::new(vec![
            IntegrandExpr::affine(a.clone(), v(&[0.0])),
            IntegrandExpr::affine(a, v(&[0.0])),
        ])
        .unwrap(),
        nx: 1,
        nz: 1,
        g_node: IntegrandExpr::NormalConeMap { c: PolyhedralSet::nonpositive_orthant(1) },
        g_placement: GPlacement::ZOnly,
        model: ScenarioModel::uniform(2),
    }
}

#[test]
fn criterion_07_variational_failure_mode() {
    let spec = stochastic_vi_spec();
    let xbar = v(&[0.0]);
    let zbar = v(&[0.0]);
    let cert =
        variational_certify(&spec, &xbar, &zbar, Property::MetricRegularity).unwrap();
    assert_ne!(cert.verdict, Verdict::Certified, "log: {:?}", cert.assumptions_log);

    let map = variational_solution_map(&spec).unwrap();
    let p = GraphPoint::new(xbar.clone(), zbar.clone());
    let g = GridSpec::new(xbar, 0.5, 15, 707).unwrap();
    let emp = empirical_reg(&map, &p, &g).unwrap();
    assert!(emp.diverging, "expected diverging empirical reg, trend {:?}", emp.trend);
    println!(
        "criterion 07: PASS — metric regularity not certified for the stochastic VI and \
         empirical reg diverges across radius halvings"
    );
}

fn mpec_toy() -> MpecSpec {
    let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
    let s = VariationalSystemSpec {
        phi: RandomIntegrand::new(vec![IntegrandExpr::affine(a, v(&[0.0]))]).unwrap(),
        nx: 1,
        nz: 1,
        g_node: IntegrandExpr::affine(DMatrix::zeros(1, 1), v(&[0.0])),
        g_placement: GPlacement::ZOnly,
        model: ScenarioModel::uniform(1),
    };
    let cost = Polynomial::new(
        2,
        vec![
            Monomial { coeff: 1.0, exponents: vec![2, 0] },
            Monomial { coeff: -2.0, exponents: vec![1, 0] },
            Monomial { coeff: 1.0, exponents: vec![0, 0] },
            Monomial { coeff: 1.0, exponents: vec![0, 2] },
        ],
    )
    .unwrap();
    MpecSpec { cost: MpecCost::Smooth(cost), s, c_set: PolyhedralSet::full_space(1) }
}

/// Brute-force verification of the toy optimum: grid scan plus refinement of
/// the reduced one-dimensional cost.
fn toy_optimum() -> f64 {
    let reduced = |x: f64| (x - 1.0) * (x - 1.0) + x * x;
    let mut best = (f64::INFINITY, 0.0);
    let mut lo = -2.0;
    let mut hi = 2.0;
    for _ in 0..6 {
        let n = 200;
        for i in 0..=n {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            let f = reduced(x);
            if f < best.0 {
                best = (f, x);
            }
        }
        let width = (hi - lo) / 10.0;
        lo = best.1 - width;
        hi = best.1 + width;
    }
    best.1
}

#[test]
fn criterion_08_mpec_residual() {
    let spec = mpec_toy();
    let xopt = toy_optimum();
    assert!((xopt - 0.5).abs() < 1e-6, "brute-force optimum {xopt}");
    let report = mpec_check(&spec, &v(&[xopt]), &v(&[-xopt])).unwrap();
    assert!(report.residual <= 1e-8, "residual at the optimum: {}", report.residual);

    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for k in 0..10 {
        let delta = if rng.gen_bool(0.5) { 0.1 } else { -0.1 };
        let x = xopt + delta;
        let z = -x; // stay on the solution map
        let r = mpec_check(&spec, &v(&[x]), &v(&[z])).unwrap();
        assert!(
            r.residual >= 1e-2,
            "perturbation {k}: residual {} below 1e-2",
            r.residual
        );
    }
    println!(
        "criterion 08: PASS — residual <= 1e-8 at the brute-force optimum and >= 1e-2 at \
         10 feasible perturbations of size 0.1"
    );
}

#[test]
fn criterion_09_report_determinism() {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/problems/stochastic_vi.covar"
    ))
    .unwrap();
    let opts = covar::cli::RunOptions {
        command: covar::cli::Command::Estimate,
        property: None,
        grid: Some(11),
        radius: Some(0.5),
        seed: Some(42),
    };
    let (r1, c1) = covar::cli::run(&text, &opts);
    let (r2, c2) = covar::cli::run(&text, &opts);
    assert_eq!(c1, c2);
    assert_eq!(r1.to_json(), r2.to_json(), "estimate reports differ between reruns");

    let copts = covar::cli::RunOptions {
        command: covar::cli::Command::Certify,
        property: Some(Property::LipschitzLike),
        grid: None,
        radius: None,
        seed: None,
    };
    let (r3, _) = covar::cli::run(&text, &copts);
    let (r4, _) = covar::cli::run(&text, &copts);
    assert_eq!(r3.to_json(), r4.to_json(), "certify reports differ between reruns");
    println!("criterion 09: PASS — byte-identical JSON reports across reruns");
}
