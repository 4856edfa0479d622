use covar::geometry::*;
use covar::multifunction::*;
use covar::oracle::*;
use nalgebra::DVector;
fn v(e: &[f64]) -> DVector<f64> { DVector::from_column_slice(e) }

#[test]
fn dbg_orthant_dual() {
    let c = PolyhedralSet::nonpositive_orthant(2);
    let z = v(&[0.0, 0.0]);
    let nv = v(&[0.0, 0.0]);
    let ystar = v(&[0.0, -1.0]);
    let analytic = coderivative_normal_cone_map(&c, &z, &nv, &ystar).unwrap();
    println!("analytic pieces: {}", analytic.len());
    for p in &analytic {
        let vr = p.vrep();
        println!("  piece verts {:?} rays {:?} lin {:?}",
            vr.vertices.iter().map(|x| (x[0], x[1])).collect::<Vec<_>>(),
            vr.rays.iter().map(|x| (x[0], x[1])).collect::<Vec<_>>(),
            vr.lineality.iter().map(|x| (x[0], x[1])).collect::<Vec<_>>());
    }
    let node = IntegrandExpr::NormalConeMap { c: c.clone() };
    let p = GraphPoint::new(z.clone(), nv.clone());
    let g = GridSpec::new(z.clone(), 1.0, 13, 301).unwrap();
    let emp = empirical_coderivative(&node, &p, &ystar, &g, 2.0).unwrap();
    println!("empirical count: {}", emp.len());
    let spacing = 2.0 * 2.0 / 12.0;
    for e in &emp {
        let d = analytic.iter().filter_map(|pc| pc.distance(e).ok()).fold(f64::INFINITY, f64::min);
        if d > 2.0 * spacing { println!("SPURIOUS empirical ({}, {}) dist {}", e[0], e[1], d); }
    }
    let wbox = PolyhedralSet::box_set(&v(&[-2.0,-2.0]), &v(&[2.0,2.0]));
    for pc in &analytic {
        let clipped = pc.intersect(&wbox);
        if clipped.is_empty() { continue; }
        let samples = dense_value_grid(&SetValue::from_set(clipped), 9).unwrap();
        for s in samples {
            let d = emp.iter().map(|e| (e - &s).norm()).fold(f64::INFINITY, f64::min);
            if d > 2.0 * spacing { println!("MISSED analytic ({}, {}) dist {}", s[0], s[1], d); }
        }
    }
}
