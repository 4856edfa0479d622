//! Lowering parsed problem files into engine specifications.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::PolyhedralSet;
use crate::multifunction::{
    CplFunction, IntegrandExpr, Monomial, PolyMap, Polynomial,
};
use crate::stochastic::{Atom, RandomIntegrand, ScenarioModel};
use crate::systems::{
    ConstraintSystemSpec, GPlacement, MpecCost, MpecSpec, ScalarIntegrand, StationaryMapSpec,
    StationaryPsi, VariationalSystemSpec,
};

use super::parse::{
    ProblemFile, RawCost, RawNode, RawNodeKind, RawPoly, RawPsi, RawSet, RawVars, SystemKind,
};

/// A lowered problem ready to run.
pub enum BuiltProblem {
    Constraint(ConstraintSystemSpec),
    Variational(VariationalSystemSpec),
    Stationary(StationaryMapSpec),
    Mpec(MpecSpec),
}

pub struct Built {
    pub problem: BuiltProblem,
    pub x: DVector<f64>,
    pub z: DVector<f64>,
}

fn var_index(name: &str, vars: RawVars, nx: usize, nz: usize) -> Result<usize> {
    let (block, idx_str) = name.split_at(1);
    let idx: usize = idx_str.parse().map_err(|_| Error::SchemaError {
        line: 0,
        message: format!("bad variable `{name}`"),
    })?;
    if idx == 0 {
        return Err(Error::SchemaError {
            line: 0,
            message: format!("variables are 1-based: `{name}`"),
        });
    }
    let i = idx - 1;
    match (vars, block) {
        (RawVars::X, "x") if i < nx => Ok(i),
        (RawVars::Z, "z") if i < nz => Ok(i),
        (RawVars::XZ, "x") if i < nx => Ok(i),
        (RawVars::XZ, "z") if i < nz => Ok(nx + i),
        _ => Err(Error::DimensionError {
            field: "polynomial".into(),
            message: format!(
                "variable `{name}` is out of range for a node over `{}`",
                vars.as_str()
            ),
        }),
    }
}

fn vars_dim(vars: RawVars, nx: usize, nz: usize) -> usize {
    match vars {
        RawVars::X => nx,
        RawVars::Z => nz,
        RawVars::XZ => nx + nz,
    }
}

fn build_polynomial(
    terms: &[super::parse::RawTerm],
    vars: RawVars,
    nx: usize,
    nz: usize,
) -> Result<Polynomial> {
    let dim = vars_dim(vars, nx, nz);
    let mut monomials = Vec::new();
    for t in terms {
        let mut exps = vec![0u32; dim];
        for (name, e) in &t.factors {
            exps[var_index(name, vars, nx, nz)?] += e;
        }
        monomials.push(Monomial { coeff: t.coeff, exponents: exps });
    }
    Polynomial::new(dim, monomials)
}

fn build_polymap(poly: &RawPoly, vars: RawVars, nx: usize, nz: usize) -> Result<PolyMap> {
    let comps: Vec<Polynomial> = poly
        .components
        .iter()
        .map(|c| build_polynomial(c, vars, nx, nz))
        .collect::<Result<_>>()?;
    PolyMap::new(comps)
}

fn build_set(raw: &RawSet) -> PolyhedralSet {
    let rows: Vec<DVector<f64>> =
        raw.rows.iter().map(|(a, _)| DVector::from_column_slice(a)).collect();
    let offs: Vec<f64> = raw.rows.iter().map(|(_, b)| *b).collect();
    PolyhedralSet::new(raw.dim, rows, offs)
}

fn lookup_set<'a>(pf: &'a ProblemFile, name: &str, expect_dim: usize) -> Result<&'a RawSet> {
    let raw = pf.sets.get(name).ok_or_else(|| Error::SchemaError {
        line: 0,
        message: format!("set `{name}` is not declared"),
    })?;
    if raw.dim != expect_dim {
        return Err(Error::DimensionError {
            field: format!("set {name}"),
            message: format!("dimension {} does not match the expected {expect_dim}", raw.dim),
        });
    }
    Ok(raw)
}

/// Build a catalog node over its own variable space.
fn build_node(pf: &ProblemFile, raw: &RawNode, nx: usize, nz: usize) -> Result<IntegrandExpr> {
    let in_dim = vars_dim(raw.vars, nx, nz);
    match &raw.kind {
        RawNodeKind::Affine { a, b } => {
            let rows = a.len();
            let cols = a.first().map(|r| r.len()).unwrap_or(0);
            if cols != in_dim {
                return Err(Error::DimensionError {
                    field: "matrix A".into(),
                    message: format!("{cols} columns vs node input {in_dim}"),
                });
            }
            if b.len() != rows {
                return Err(Error::DimensionError {
                    field: "vector b".into(),
                    message: format!("length {} vs {} matrix rows", b.len(), rows),
                });
            }
            let m = DMatrix::from_fn(rows, cols, |i, j| a[i][j]);
            Ok(IntegrandExpr::affine(m, DVector::from_column_slice(b)))
        }
        RawNodeKind::Smooth { map } => {
            Ok(IntegrandExpr::Smooth { map: build_polymap(map, raw.vars, nx, nz)? })
        }
        RawNodeKind::Box { center, radius } => Ok(IntegrandExpr::BoxValued {
            center: build_polymap(center, raw.vars, nx, nz)?,
            radius: build_polymap(radius, raw.vars, nx, nz)?,
        }),
        RawNodeKind::NormalCone { set } => {
            let raw_set = lookup_set(pf, set, in_dim)?;
            Ok(IntegrandExpr::NormalConeMap { c: build_set(raw_set) })
        }
        RawNodeKind::Graph { out, pieces } => {
            let gdim = in_dim + out;
            let mut built = Vec::new();
            for name in pieces {
                built.push(build_set(lookup_set(pf, name, gdim)?));
            }
            Ok(IntegrandExpr::PolyhedralGraph {
                input_dim: in_dim,
                output_dim: *out,
                pieces: built,
            })
        }
        RawNodeKind::Sum(l, r) => {
            let mut lc = (**l).clone();
            let mut rc = (**r).clone();
            lc.vars = raw.vars;
            rc.vars = raw.vars;
            Ok(IntegrandExpr::Sum(
                Box::new(build_node(pf, &lc, nx, nz)?),
                Box::new(build_node(pf, &rc, nx, nz)?),
            ))
        }
        RawNodeKind::SmoothPlus { smooth, inner } => {
            if raw.vars != RawVars::XZ {
                return Err(Error::SchemaError {
                    line: 0,
                    message: "smooth-plus nodes are over (x, z): smooth part of x, inner of z"
                        .into(),
                });
            }
            let mut ic = (**inner).clone();
            ic.vars = RawVars::Z;
            Ok(IntegrandExpr::SmoothPlus {
                smooth: build_polymap(smooth, RawVars::X, nx, nz)?,
                inner: Box::new(build_node(pf, &ic, nx, nz)?),
            })
        }
        RawNodeKind::IndicatorSubgradient { pieces } => {
            let built: Vec<(DVector<f64>, f64)> = pieces
                .iter()
                .map(|(a, b)| {
                    if a.len() != in_dim {
                        Err(Error::DimensionError {
                            field: "subgradient pieces".into(),
                            message: format!("slope length {} vs input {in_dim}", a.len()),
                        })
                    } else {
                        Ok((DVector::from_column_slice(a), *b))
                    }
                })
                .collect::<Result<_>>()?;
            Ok(IntegrandExpr::IndicatorSubgradient { g: CplFunction::new(built)? })
        }
    }
}

/// Lift a node over `x` or `z` alone to the joint `(x, z)` input; only
/// single-valued payloads (affine, smooth, box) extend losslessly.
fn lift_to_joint(node: IntegrandExpr, vars: RawVars, nx: usize, nz: usize) -> Result<IntegrandExpr> {
    if vars == RawVars::XZ {
        return Ok(node);
    }
    let embed = |m: &DMatrix<f64>| -> DMatrix<f64> {
        let rows = m.nrows();
        let mut out = DMatrix::zeros(rows, nx + nz);
        match vars {
            RawVars::X => {
                out.view_mut((0, 0), (rows, nx)).copy_from(m);
            }
            RawVars::Z => {
                out.view_mut((0, nx), (rows, nz)).copy_from(m);
            }
            RawVars::XZ => unreachable!(),
        }
        out
    };
    let lift_poly = |p: &PolyMap| -> Result<PolyMap> {
        let comps = p
            .components
            .iter()
            .map(|c| {
                let terms = c
                    .terms
                    .iter()
                    .map(|t| {
                        let mut exps = vec![0u32; nx + nz];
                        for (i, &e) in t.exponents.iter().enumerate() {
                            let at = match vars {
                                RawVars::X => i,
                                RawVars::Z => nx + i,
                                RawVars::XZ => unreachable!(),
                            };
                            exps[at] = e;
                        }
                        Monomial { coeff: t.coeff, exponents: exps }
                    })
                    .collect();
                Polynomial::new(nx + nz, terms)
            })
            .collect::<Result<Vec<_>>>()?;
        PolyMap::new(comps)
    };
    match node {
        IntegrandExpr::Affine { a, b } => Ok(IntegrandExpr::Affine { a: embed(&a), b }),
        IntegrandExpr::Smooth { map } => Ok(IntegrandExpr::Smooth { map: lift_poly(&map)? }),
        IntegrandExpr::BoxValued { center, radius } => Ok(IntegrandExpr::BoxValued {
            center: lift_poly(&center)?,
            radius: lift_poly(&radius)?,
        }),
        _ => Err(Error::SchemaError {
            line: 0,
            message: "set-valued scenario nodes must be declared over vars xz".into(),
        }),
    }
}

fn build_model(pf: &ProblemFile) -> Result<ScenarioModel> {
    ScenarioModel::new(
        pf.scenarios
            .iter()
            .map(|s| Atom { id: s.id.clone(), weight: s.weight, nonatomic: s.nonatomic })
            .collect(),
    )
}

fn build_integrand(pf: &ProblemFile, nx: usize, nz: usize) -> Result<RandomIntegrand> {
    let mut nodes = Vec::new();
    for sc in &pf.scenarios {
        let raw = sc.node.as_ref().ok_or_else(|| Error::SchemaError {
            line: 0,
            message: format!("scenario `{}` needs a node payload for this system kind", sc.id),
        })?;
        let node = build_node(pf, raw, nx, nz)?;
        nodes.push(lift_to_joint(node, raw.vars, nx, nz)?);
    }
    RandomIntegrand::new(nodes)
}

/// Lower a parsed problem file into an engine specification.
pub fn build(pf: &ProblemFile) -> Result<Built> {
    let nx = pf.x.len();
    let nz = pf.z.len();
    let x = DVector::from_column_slice(&pf.x);
    let z = DVector::from_column_slice(&pf.z);
    let model = build_model(pf)?;

    let problem = match pf.kind {
        SystemKind::Constraint => {
            let phi = build_integrand(pf, nx, nz)?;
            let m_dim = phi.output_dim();
            let k_set = build_set(lookup_set(pf, "K", m_dim)?);
            let o_set = match pf.sets.get("O") {
                Some(_) => build_set(lookup_set(pf, "O", nx + nz)?),
                None => PolyhedralSet::full_space(nx + nz),
            };
            let spec = ConstraintSystemSpec { phi, nx, nz, k_set, o_set, model };
            spec.validate()?;
            BuiltProblem::Constraint(spec)
        }
        SystemKind::Variational => {
            let phi = build_integrand(pf, nx, nz)?;
            let graw = pf.g_node.as_ref().ok_or_else(|| Error::SchemaError {
                line: 0,
                message: "variational systems need a `gnode` block".into(),
            })?;
            let g_node = build_node(pf, graw, nx, nz)?;
            let g_placement = match graw.vars {
                RawVars::Z => GPlacement::ZOnly,
                RawVars::XZ => GPlacement::Joint,
                RawVars::X => {
                    return Err(Error::SchemaError {
                        line: 0,
                        message: "gnode vars must be z or xz".into(),
                    })
                }
            };
            let spec = VariationalSystemSpec { phi, nx, nz, g_node, g_placement, model };
            spec.validate()?;
            BuiltProblem::Variational(spec)
        }
        SystemKind::Stationary => {
            let mut per_scenario = Vec::new();
            for sc in &pf.scenarios {
                let obj = sc.objective.as_ref().ok_or_else(|| Error::SchemaError {
                    line: 0,
                    message: format!("scenario `{}` needs an `objective` payload", sc.id),
                })?;
                per_scenario.push(build_polynomial(&obj.components[0], RawVars::XZ, nx, nz)?);
            }
            let psi = match pf.psi.as_ref() {
                Some(RawPsi::Smooth(p)) => StationaryPsi::Smooth(build_polynomial(
                    &p.components[0],
                    RawVars::XZ,
                    nx,
                    nz,
                )?),
                Some(RawPsi::Indicator(name)) => {
                    StationaryPsi::IndicatorZ(build_set(lookup_set(pf, name, nz)?))
                }
                None => {
                    return Err(Error::SchemaError {
                        line: 0,
                        message: "stationary systems need a `psi` block".into(),
                    })
                }
            };
            BuiltProblem::Stationary(StationaryMapSpec {
                f: ScalarIntegrand { per_scenario },
                psi,
                nx,
                nz,
                model,
            })
        }
        SystemKind::Mpec => {
            let phi = build_integrand(pf, nx, nz)?;
            let graw = pf.g_node.as_ref().ok_or_else(|| Error::SchemaError {
                line: 0,
                message: "mpec systems need a `gnode` block for the equilibrium map".into(),
            })?;
            let g_node = build_node(pf, graw, nx, nz)?;
            let g_placement = match graw.vars {
                RawVars::Z => GPlacement::ZOnly,
                _ => GPlacement::Joint,
            };
            let s = VariationalSystemSpec { phi, nx, nz, g_node, g_placement, model };
            s.validate()?;
            let cost = match pf.cost.as_ref() {
                Some(RawCost::Smooth(p)) => {
                    MpecCost::Smooth(build_polynomial(&p.components[0], RawVars::XZ, nx, nz)?)
                }
                Some(RawCost::PiecewiseLinear(pieces)) => {
                    let built: Vec<(DVector<f64>, f64)> = pieces
                        .iter()
                        .map(|(a, b)| (DVector::from_column_slice(a), *b))
                        .collect();
                    MpecCost::PiecewiseLinear(CplFunction::new(built)?)
                }
                None => {
                    return Err(Error::SchemaError {
                        line: 0,
                        message: "mpec systems need a `cost` block".into(),
                    })
                }
            };
            let c_set = match pf.sets.get("C") {
                Some(raw) => {
                    if raw.dim != nx {
                        return Err(Error::DimensionError {
                            field: "set C".into(),
                            message: "C must live in the x space".into(),
                        });
                    }
                    build_set(raw)
                }
                None => PolyhedralSet::full_space(nx),
            };
            BuiltProblem::Mpec(MpecSpec { cost, s, c_set })
        }
    };
    Ok(Built { problem, x, z })
}
