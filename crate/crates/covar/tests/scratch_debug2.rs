use covar::geometry::*;
use covar::multifunction::*;
use covar::oracle::*;
use nalgebra::DVector;
fn v(e: &[f64]) -> DVector<f64> { DVector::from_column_slice(e) }

#[test]
fn dbg_wedge_dual() {
    let c = PolyhedralSet::new(2, vec![v(&[1.0,0.0]), v(&[0.0,1.0]), v(&[1.0,1.0])], vec![0.0,0.0,1.0]);
    let z = v(&[0.0, 0.0]);
    let nv = v(&[1.0, 0.0]);
    let ystar = v(&[-1.0, -1.0]);
    let analytic = coderivative_normal_cone_map(&c, &z, &nv, &ystar).unwrap();
    println!("analytic pieces: {}", analytic.len());
    let node = IntegrandExpr::NormalConeMap { c: c.clone() };
    let p = GraphPoint::new(z.clone(), nv.clone());
    let g = GridSpec::new(z.clone(), 1.0, 13, 303).unwrap();
    let graph = graph_samples(&node, &p, &g).unwrap();
    println!("graph samples: {}", graph.len());
    let emp = empirical_coderivative(&node, &p, &ystar, &g, 2.0).unwrap();
    println!("empirical count: {}", emp.len());
    for e in emp.iter().take(6) { println!("  emp ({}, {})", e[0], e[1]); }
    // find accepting base for first empirical point
    if let Some(xstar) = emp.first() {
        let near: Vec<usize> = (0..graph.len()).filter(|&i| {
            let (u, w) = &graph[i];
            (u - &p.input).norm().max((w - &p.value).norm()) <= g.radius / 2.0
        }).collect();
        let nrm = (xstar.norm_squared() + ystar.norm_squared()).sqrt();
        let tiers = [g.radius / 2.0, g.radius / 4.0];
        'outer: for &gi in &near {
            let (u0, w0) = &graph[gi];
            for tier in tiers {
                let mut ok = true;
                let mut cnt = 0;
                for (u, w) in &graph {
                    let du = u - u0; let dw = w - w0;
                    let n = (du.norm_squared() + dw.norm_squared()).sqrt();
                    if n <= 1e-12 || n > tier { continue; }
                    cnt += 1;
                    if (xstar.dot(&du) - ystar.dot(&dw)) / (n * nrm) > 0.02 { ok = false; break; }
                }
                if ok {
                    println!("ACCEPT base u0=({:.3},{:.3}) w0=({:.3},{:.3}) tier={} nbrs={}", u0[0], u0[1], w0[0], w0[1], tier, cnt);
                    break 'outer;
                }
            }
        }
    }
}
