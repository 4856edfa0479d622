//! Problem-file parsing and serialization.
//!
//! The format is line-oriented and human-writable: whitespace-separated
//! tokens, `#` comments, explicit row counts on every block so no terminator
//! lines are needed. Smooth payloads use a small polynomial grammar
//! (componentwise, degree <= 3) so files stay self-contained.
//!
//! ```text
//! covar 1
//! kind variational
//! seed 7
//! point x 0.0
//! point z 0.0
//! option eta 0.1
//! set Kneg dim 1 rows 1
//!   1 <= 0
//! scenario s1 weight 0.5
//!   node affine vars xz out 1
//!   matrix A 1 2
//!     1 1
//!   vector b 1
//!     0
//! gnode vars z
//!   node normal-cone of Kneg
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Constraint,
    Variational,
    Stationary,
    Mpec,
}

impl SystemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SystemKind::Constraint => "constraint",
            SystemKind::Variational => "variational",
            SystemKind::Stationary => "stationary",
            SystemKind::Mpec => "mpec",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawVars {
    X,
    Z,
    XZ,
}

impl RawVars {
    pub fn as_str(&self) -> &'static str {
        match self {
            RawVars::X => "x",
            RawVars::Z => "z",
            RawVars::XZ => "xz",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSet {
    pub dim: usize,
    /// Rows `a · v <= b`.
    pub rows: Vec<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTerm {
    pub coeff: f64,
    /// `(variable name, exponent)` factors.
    pub factors: Vec<(String, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawPoly {
    pub out: usize,
    pub components: Vec<Vec<RawTerm>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawNodeKind {
    Affine { a: Vec<Vec<f64>>, b: Vec<f64> },
    Smooth { map: RawPoly },
    Box { center: RawPoly, radius: RawPoly },
    NormalCone { set: String },
    Graph { out: usize, pieces: Vec<String> },
    Sum(Box<RawNode>, Box<RawNode>),
    SmoothPlus { smooth: RawPoly, inner: Box<RawNode> },
    IndicatorSubgradient { pieces: Vec<(Vec<f64>, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawNode {
    pub vars: RawVars,
    pub kind: RawNodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawScenario {
    pub id: String,
    pub weight: f64,
    pub nonatomic: bool,
    pub node: Option<RawNode>,
    /// Scalar objective for stationary systems.
    pub objective: Option<RawPoly>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawPsi {
    Smooth(RawPoly),
    Indicator(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawCost {
    Smooth(RawPoly),
    PiecewiseLinear(Vec<(Vec<f64>, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub version: u32,
    pub kind: SystemKind,
    pub seed: u64,
    pub options: BTreeMap<String, f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub sets: BTreeMap<String, RawSet>,
    pub scenarios: Vec<RawScenario>,
    pub g_node: Option<RawNode>,
    pub psi: Option<RawPsi>,
    pub cost: Option<RawCost>,
}

struct Cursor<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .filter_map(|(i, raw)| {
                let stripped = match raw.find('#') {
                    Some(p) => &raw[..p],
                    None => raw,
                };
                let toks: Vec<&str> = stripped.split_whitespace().collect();
                if toks.is_empty() {
                    None
                } else {
                    Some((i + 1, toks))
                }
            })
            .collect();
        Cursor { lines, pos: 0 }
    }

    fn peek(&self) -> Option<&(usize, Vec<&'a str>)> {
        self.lines.get(self.pos)
    }

    fn next(&mut self) -> Option<(usize, Vec<&'a str>)> {
        let item = self.lines.get(self.pos).cloned();
        if item.is_some() {
            self.pos += 1;
        }
        item
    }

    fn line_no(&self) -> usize {
        self.lines
            .get(self.pos.min(self.lines.len().saturating_sub(1)))
            .map(|(n, _)| *n)
            .unwrap_or(0)
    }
}

fn schema_err(line: usize, message: impl Into<String>) -> Error {
    Error::SchemaError { line, message: message.into() }
}

fn parse_f64(line: usize, tok: &str, what: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| schema_err(line, format!("expected a number for {what}, got `{tok}`")))
}

fn parse_usize(line: usize, tok: &str, what: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| schema_err(line, format!("expected a count for {what}, got `{tok}`")))
}

fn parse_vars(line: usize, tok: &str) -> Result<RawVars> {
    match tok {
        "x" => Ok(RawVars::X),
        "z" => Ok(RawVars::Z),
        "xz" => Ok(RawVars::XZ),
        other => Err(schema_err(line, format!("unknown variable tag `{other}` (x, z, xz)"))),
    }
}

/// Parse a problem file from text.
pub fn parse(text: &str) -> Result<ProblemFile> {
    let mut cur = Cursor::new(text);
    let (line, header) =
        cur.next().ok_or_else(|| schema_err(0, "empty problem file"))?;
    if header.len() != 2 || header[0] != "covar" {
        return Err(schema_err(line, "problem files start with `covar <version>`"));
    }
    let version = parse_usize(line, header[1], "version")? as u32;
    if version != 1 {
        return Err(schema_err(line, format!("unsupported version {version}")));
    }

    let mut kind: Option<SystemKind> = None;
    let mut seed = 0u64;
    let mut options = BTreeMap::new();
    let mut x: Option<Vec<f64>> = None;
    let mut z: Option<Vec<f64>> = None;
    let mut sets = BTreeMap::new();
    let mut scenarios = Vec::new();
    let mut g_node = None;
    let mut psi = None;
    let mut cost = None;

    while let Some((line, toks)) = cur.next() {
        match toks[0] {
            "kind" => {
                let k = match toks.get(1).copied() {
                    Some("constraint") => SystemKind::Constraint,
                    Some("variational") => SystemKind::Variational,
                    Some("stationary") => SystemKind::Stationary,
                    Some("mpec") => SystemKind::Mpec,
                    other => {
                        return Err(schema_err(
                            line,
                            format!(
                                "unknown system kind {:?} (constraint, variational, stationary, mpec)",
                                other
                            ),
                        ))
                    }
                };
                kind = Some(k);
            }
            "seed" => {
                seed = toks
                    .get(1)
                    .and_then(|t| t.parse::<u64>().ok())
                    .ok_or_else(|| schema_err(line, "seed needs an unsigned integer"))?;
            }
            "option" => {
                if toks.len() != 3 {
                    return Err(schema_err(line, "option lines are `option <name> <value>`"));
                }
                options.insert(toks[1].to_string(), parse_f64(line, toks[2], toks[1])?);
            }
            "point" => {
                let vals: Vec<f64> = toks[2..]
                    .iter()
                    .map(|t| parse_f64(line, t, "point entry"))
                    .collect::<Result<_>>()?;
                match toks.get(1).copied() {
                    Some("x") => x = Some(vals),
                    Some("z") => z = Some(vals),
                    _ => return Err(schema_err(line, "points are `point x ...` or `point z ...`")),
                }
            }
            "set" => {
                if toks.len() != 6 || toks[2] != "dim" || toks[4] != "rows" {
                    return Err(schema_err(
                        line,
                        "set headers are `set <name> dim <d> rows <r>`",
                    ));
                }
                let name = toks[1].to_string();
                let dim = parse_usize(line, toks[3], "set dimension")?;
                let nrows = parse_usize(line, toks[5], "set row count")?;
                let mut rows = Vec::new();
                for _ in 0..nrows {
                    let (rline, rtoks) = cur
                        .next()
                        .ok_or_else(|| schema_err(line, "missing set rows"))?;
                    let sep = rtoks
                        .iter()
                        .position(|&t| t == "<=")
                        .ok_or_else(|| schema_err(rline, "set rows are `a1 .. an <= b`"))?;
                    if sep != dim || rtoks.len() != dim + 2 {
                        return Err(Error::DimensionError {
                            field: format!("set {name}"),
                            message: format!(
                                "row on line {rline} has {} coefficients, expected {dim}",
                                sep
                            ),
                        });
                    }
                    let coeffs: Vec<f64> = rtoks[..dim]
                        .iter()
                        .map(|t| parse_f64(rline, t, "row coefficient"))
                        .collect::<Result<_>>()?;
                    let b = parse_f64(rline, rtoks[dim + 1], "row offset")?;
                    rows.push((coeffs, b));
                }
                sets.insert(name, RawSet { dim, rows });
            }
            "scenario" => {
                if toks.len() < 4 || toks[2] != "weight" {
                    return Err(schema_err(
                        line,
                        "scenario headers are `scenario <id> weight <w> [nonatomic]`",
                    ));
                }
                let id = toks[1].to_string();
                let weight = parse_f64(line, toks[3], "weight")?;
                let nonatomic = toks.get(4) == Some(&"nonatomic");
                // Payload: either a node block or a scalar objective.
                match cur.peek().map(|(_, t)| t[0]) {
                    Some("node") => {
                        let node = parse_node(&mut cur)?;
                        scenarios.push(RawScenario {
                            id,
                            weight,
                            nonatomic,
                            node: Some(node),
                            objective: None,
                        });
                    }
                    Some("objective") => {
                        let (oline, otoks) = cur.next().unwrap();
                        if otoks.len() != 2 || otoks[0] != "objective" {
                            return Err(schema_err(oline, "objective headers are `objective <terms>`"));
                        }
                        let nterms = parse_usize(oline, otoks[1], "objective term count")?;
                        let poly = parse_poly_body(&mut cur, 1, nterms.max(1))?;
                        scenarios.push(RawScenario {
                            id,
                            weight,
                            nonatomic,
                            node: None,
                            objective: Some(poly),
                        });
                    }
                    _ => {
                        return Err(schema_err(
                            cur.line_no(),
                            "scenario payloads start with `node ...` or `objective <n>`",
                        ))
                    }
                }
            }
            "gnode" => {
                if toks.len() != 3 || toks[1] != "vars" {
                    return Err(schema_err(line, "gnode headers are `gnode vars <z|xz>`"));
                }
                let vars = parse_vars(line, toks[2])?;
                let mut node = parse_node(&mut cur)?;
                node.vars = vars;
                g_node = Some(node);
            }
            "psi" => match toks.get(1).copied() {
                Some("smooth") => {
                    if toks.len() != 3 {
                        return Err(schema_err(line, "psi headers are `psi smooth <terms>`"));
                    }
                    let nterms = parse_usize(line, toks[2], "psi term count")?;
                    psi = Some(RawPsi::Smooth(parse_poly_body(&mut cur, 1, nterms.max(1))?));
                }
                Some("indicator") => {
                    if toks.len() != 4 || toks[2] != "of" {
                        return Err(schema_err(line, "indicator psi is `psi indicator of <set>`"));
                    }
                    psi = Some(RawPsi::Indicator(toks[3].to_string()));
                }
                _ => return Err(schema_err(line, "psi is `psi smooth <n>` or `psi indicator of <set>`")),
            },
            "cost" => match toks.get(1).copied() {
                Some("smooth") => {
                    if toks.len() != 3 {
                        return Err(schema_err(line, "cost headers are `cost smooth <terms>`"));
                    }
                    let nterms = parse_usize(line, toks[2], "cost term count")?;
                    cost = Some(RawCost::Smooth(parse_poly_body(&mut cur, 1, nterms.max(1))?));
                }
                Some("piecewise-linear") => {
                    if toks.len() != 3 {
                        return Err(schema_err(
                            line,
                            "cost headers are `cost piecewise-linear <pieces>`",
                        ));
                    }
                    let k = parse_usize(line, toks[2], "piece count")?;
                    let mut pieces = Vec::new();
                    for _ in 0..k {
                        let (pline, ptoks) = cur
                            .next()
                            .ok_or_else(|| schema_err(line, "missing cost pieces"))?;
                        if ptoks.len() < 2 {
                            return Err(schema_err(pline, "cost pieces are `a1 .. an b`"));
                        }
                        let coeffs: Vec<f64> = ptoks[..ptoks.len() - 1]
                            .iter()
                            .map(|t| parse_f64(pline, t, "piece slope"))
                            .collect::<Result<_>>()?;
                        let b = parse_f64(pline, ptoks[ptoks.len() - 1], "piece offset")?;
                        pieces.push((coeffs, b));
                    }
                    cost = Some(RawCost::PiecewiseLinear(pieces));
                }
                _ => {
                    return Err(schema_err(
                        line,
                        "cost is `cost smooth <n>` or `cost piecewise-linear <k>`",
                    ))
                }
            },
            other => {
                return Err(schema_err(line, format!("unknown directive `{other}`")));
            }
        }
    }

    let kind = kind.ok_or_else(|| schema_err(0, "missing `kind` directive"))?;
    let x = x.ok_or_else(|| schema_err(0, "missing `point x` directive"))?;
    let z = z.ok_or_else(|| schema_err(0, "missing `point z` directive"))?;
    if scenarios.is_empty() {
        return Err(schema_err(0, "at least one scenario is required"));
    }
    Ok(ProblemFile {
        version,
        kind,
        seed,
        options,
        x,
        z,
        sets,
        scenarios,
        g_node,
        psi,
        cost,
    })
}

const NODE_KINDS: &str =
    "affine, smooth, box, normal-cone, graph, sum, smooth-plus, indicator-subgradient";

fn parse_node(cur: &mut Cursor<'_>) -> Result<RawNode> {
    let (line, toks) = cur
        .next()
        .ok_or_else(|| schema_err(0, "expected a node block"))?;
    if toks[0] != "node" {
        return Err(schema_err(line, format!("expected `node <kind>` ({NODE_KINDS})")));
    }
    // Optional `vars <v>` tail on any node header; default xz.
    let mut vars = RawVars::XZ;
    let mut rest: Vec<&str> = toks[1..].to_vec();
    if let Some(pos) = rest.iter().position(|&t| t == "vars") {
        let tag = rest
            .get(pos + 1)
            .ok_or_else(|| schema_err(line, "`vars` needs a tag"))?;
        vars = parse_vars(line, tag)?;
        rest.drain(pos..pos + 2);
    }
    let kind_tok = rest
        .first()
        .copied()
        .ok_or_else(|| schema_err(line, format!("node kind missing ({NODE_KINDS})")))?;
    let kind = match kind_tok {
        "affine" => {
            let a = parse_matrix(cur, "A")?;
            let b = parse_vector(cur, "b")?;
            RawNodeKind::Affine { a, b }
        }
        "smooth" => {
            let out = parse_usize(line, rest.get(2).copied().unwrap_or("?"), "output dim")
                .or_else(|_| {
                    rest.iter()
                        .position(|&t| t == "out")
                        .and_then(|p| rest.get(p + 1))
                        .ok_or_else(|| schema_err(line, "smooth nodes need `out <m>`"))
                        .and_then(|t| parse_usize(line, t, "output dim"))
                })?;
            let map = parse_poly(cur, out)?;
            RawNodeKind::Smooth { map }
        }
        "box" => {
            let out = rest
                .iter()
                .position(|&t| t == "out")
                .and_then(|p| rest.get(p + 1))
                .ok_or_else(|| schema_err(line, "box nodes need `out <m>`"))
                .and_then(|t| parse_usize(line, t, "output dim"))?;
            let center = parse_poly(cur, out)?;
            let radius = parse_poly(cur, out)?;
            RawNodeKind::Box { center, radius }
        }
        "normal-cone" => {
            let set = rest
                .iter()
                .position(|&t| t == "of")
                .and_then(|p| rest.get(p + 1))
                .ok_or_else(|| schema_err(line, "normal-cone nodes are `node normal-cone of <set>`"))?
                .to_string();
            RawNodeKind::NormalCone { set }
        }
        "graph" => {
            let out = rest
                .iter()
                .position(|&t| t == "out")
                .and_then(|p| rest.get(p + 1))
                .ok_or_else(|| schema_err(line, "graph nodes need `out <m>`"))
                .and_then(|t| parse_usize(line, t, "output dim"))?;
            let of = rest
                .iter()
                .position(|&t| t == "of")
                .ok_or_else(|| schema_err(line, "graph nodes are `node graph out <m> of <sets...>`"))?;
            let pieces: Vec<String> = rest[of + 1..]
                .iter()
                .filter(|&&t| t != "out")
                .take_while(|&&t| t.parse::<usize>().is_err())
                .map(|t| t.to_string())
                .collect();
            if pieces.is_empty() {
                return Err(schema_err(line, "graph nodes need at least one named set piece"));
            }
            RawNodeKind::Graph { out, pieces }
        }
        "sum" => {
            let left = parse_node(cur)?;
            let right = parse_node(cur)?;
            RawNodeKind::Sum(Box::new(left), Box::new(right))
        }
        "smooth-plus" => {
            let out = rest
                .iter()
                .position(|&t| t == "out")
                .and_then(|p| rest.get(p + 1))
                .ok_or_else(|| schema_err(line, "smooth-plus nodes need `out <m>`"))
                .and_then(|t| parse_usize(line, t, "output dim"))?;
            let smooth = parse_poly(cur, out)?;
            let inner = parse_node(cur)?;
            RawNodeKind::SmoothPlus { smooth, inner: Box::new(inner) }
        }
        "indicator-subgradient" => {
            let k = rest
                .iter()
                .position(|&t| t == "pieces")
                .and_then(|p| rest.get(p + 1))
                .ok_or_else(|| schema_err(line, "indicator-subgradient nodes need `pieces <k>`"))
                .and_then(|t| parse_usize(line, t, "piece count"))?;
            let mut pieces = Vec::new();
            for _ in 0..k {
                let (pline, ptoks) = cur
                    .next()
                    .ok_or_else(|| schema_err(line, "missing subgradient pieces"))?;
                if ptoks.len() < 2 {
                    return Err(schema_err(pline, "pieces are `a1 .. an b`"));
                }
                let coeffs: Vec<f64> = ptoks[..ptoks.len() - 1]
                    .iter()
                    .map(|t| parse_f64(pline, t, "piece slope"))
                    .collect::<Result<_>>()?;
                let b = parse_f64(pline, ptoks[ptoks.len() - 1], "piece offset")?;
                pieces.push((coeffs, b));
            }
            RawNodeKind::IndicatorSubgradient { pieces }
        }
        other => {
            return Err(schema_err(
                line,
                format!("unknown node kind `{other}`; the catalog is: {NODE_KINDS}"),
            ))
        }
    };
    Ok(RawNode { vars, kind })
}

fn parse_matrix(cur: &mut Cursor<'_>, name: &str) -> Result<Vec<Vec<f64>>> {
    let (line, toks) = cur.next().ok_or_else(|| schema_err(0, "expected a matrix block"))?;
    if toks.len() != 4 || toks[0] != "matrix" {
        return Err(schema_err(line, format!("expected `matrix {name} <rows> <cols>`")));
    }
    let rows = parse_usize(line, toks[2], "matrix rows")?;
    let cols = parse_usize(line, toks[3], "matrix cols")?;
    let mut out = Vec::new();
    for _ in 0..rows {
        let (rline, rtoks) = cur.next().ok_or_else(|| schema_err(line, "missing matrix rows"))?;
        if rtoks.len() != cols {
            return Err(Error::DimensionError {
                field: format!("matrix {name}"),
                message: format!("row on line {rline} has {} entries, expected {cols}", rtoks.len()),
            });
        }
        out.push(
            rtoks
                .iter()
                .map(|t| parse_f64(rline, t, "matrix entry"))
                .collect::<Result<_>>()?,
        );
    }
    Ok(out)
}

fn parse_vector(cur: &mut Cursor<'_>, name: &str) -> Result<Vec<f64>> {
    let (line, toks) = cur.next().ok_or_else(|| schema_err(0, "expected a vector block"))?;
    if toks.len() != 3 || toks[0] != "vector" {
        return Err(schema_err(line, format!("expected `vector {name} <n>`")));
    }
    let n = parse_usize(line, toks[2], "vector length")?;
    let (vline, vtoks) = cur.next().ok_or_else(|| schema_err(line, "missing vector entries"))?;
    if vtoks.len() != n {
        return Err(Error::DimensionError {
            field: format!("vector {name}"),
            message: format!("line {vline} has {} entries, expected {n}", vtoks.len()),
        });
    }
    vtoks.iter().map(|t| parse_f64(vline, t, "vector entry")).collect()
}

fn parse_poly(cur: &mut Cursor<'_>, out: usize) -> Result<RawPoly> {
    let (line, toks) = cur.next().ok_or_else(|| schema_err(0, "expected a poly block"))?;
    if toks.len() != 3 || toks[0] != "poly" {
        return Err(schema_err(line, "expected `poly <name> <components>`"));
    }
    let m = parse_usize(line, toks[2], "component count")?;
    if m != out {
        return Err(Error::DimensionError {
            field: format!("poly {}", toks[1]),
            message: format!("{m} components declared, node output is {out}"),
        });
    }
    parse_poly_body(cur, m, m)
}

/// `components` expression lines `y<i> = <terms>`.
fn parse_poly_body(cur: &mut Cursor<'_>, components: usize, _hint: usize) -> Result<RawPoly> {
    let mut comps = Vec::new();
    for i in 0..components {
        let (line, toks) = cur
            .next()
            .ok_or_else(|| schema_err(0, "missing polynomial components"))?;
        if toks.len() < 3 || toks[1] != "=" || toks[0] != format!("y{}", i + 1) {
            return Err(schema_err(
                line,
                format!("polynomial components are `y{} = <expression>`", i + 1),
            ));
        }
        comps.push(parse_expression(line, &toks[2..].join(" "))?);
    }
    Ok(RawPoly { out: components, components: comps })
}

/// `c * v1^e1 * v2 ... + ...`; `*` is optional between factors.
fn parse_expression(line: usize, expr: &str) -> Result<Vec<RawTerm>> {
    let cleaned = expr.replace('*', " ");
    // Split into signed terms.
    let mut terms: Vec<(f64, String)> = Vec::new();
    let mut sign = 1.0;
    let mut current = String::new();
    for tok in cleaned.split_whitespace() {
        match tok {
            "+" | "-" => {
                if !current.trim().is_empty() {
                    terms.push((sign, current.clone()));
                }
                current.clear();
                sign = if tok == "-" { -1.0 } else { 1.0 };
            }
            _ => {
                current.push(' ');
                current.push_str(tok);
            }
        }
    }
    if !current.trim().is_empty() {
        terms.push((sign, current));
    }
    if terms.is_empty() {
        return Ok(vec![RawTerm { coeff: 0.0, factors: vec![] }]);
    }
    let mut out = Vec::new();
    for (sign, body) in terms {
        let mut coeff = sign;
        let mut factors: Vec<(String, u32)> = Vec::new();
        for factor in body.split_whitespace() {
            if let Ok(c) = factor.parse::<f64>() {
                coeff *= c;
                continue;
            }
            let (name, exp) = match factor.find('^') {
                Some(p) => {
                    let e = factor[p + 1..].parse::<u32>().map_err(|_| {
                        schema_err(line, format!("bad exponent in factor `{factor}`"))
                    })?;
                    (factor[..p].to_string(), e)
                }
                None => (factor.to_string(), 1),
            };
            if !(name.starts_with('x') || name.starts_with('z'))
                || name[1..].parse::<usize>().is_err()
            {
                return Err(schema_err(
                    line,
                    format!("unknown variable `{name}` (use x1.., z1..)"),
                ));
            }
            factors.push((name, exp));
        }
        out.push(RawTerm { coeff, factors });
    }
    Ok(out)
}

/// Serialize a problem back to the text format; `parse(serialize(p)) == p`.
pub fn serialize(p: &ProblemFile) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "covar {}", p.version);
    let _ = writeln!(s, "kind {}", p.kind.as_str());
    let _ = writeln!(s, "seed {}", p.seed);
    let _ = writeln!(s, "point x {}", join_f64(&p.x));
    let _ = writeln!(s, "point z {}", join_f64(&p.z));
    for (k, v) in &p.options {
        let _ = writeln!(s, "option {} {}", k, fmt_f64(*v));
    }
    for (name, set) in &p.sets {
        let _ = writeln!(s, "set {} dim {} rows {}", name, set.dim, set.rows.len());
        for (coeffs, b) in &set.rows {
            let _ = writeln!(s, "  {} <= {}", join_f64(coeffs), fmt_f64(*b));
        }
    }
    for sc in &p.scenarios {
        let tag = if sc.nonatomic { " nonatomic" } else { "" };
        let _ = writeln!(s, "scenario {} weight {}{}", sc.id, fmt_f64(sc.weight), tag);
        if let Some(node) = &sc.node {
            write_node(&mut s, node, 1);
        }
        if let Some(obj) = &sc.objective {
            let _ = writeln!(s, "  objective {}", obj.components[0].len().max(1));
            write_poly_body(&mut s, obj, 1);
        }
    }
    if let Some(g) = &p.g_node {
        let _ = writeln!(s, "gnode vars {}", g.vars.as_str());
        write_node(&mut s, g, 1);
    }
    match &p.psi {
        Some(RawPsi::Smooth(poly)) => {
            let _ = writeln!(s, "psi smooth {}", poly.components[0].len().max(1));
            write_poly_body(&mut s, poly, 0);
        }
        Some(RawPsi::Indicator(name)) => {
            let _ = writeln!(s, "psi indicator of {name}");
        }
        None => {}
    }
    match &p.cost {
        Some(RawCost::Smooth(poly)) => {
            let _ = writeln!(s, "cost smooth {}", poly.components[0].len().max(1));
            write_poly_body(&mut s, poly, 0);
        }
        Some(RawCost::PiecewiseLinear(pieces)) => {
            let _ = writeln!(s, "cost piecewise-linear {}", pieces.len());
            for (a, b) in pieces {
                let _ = writeln!(s, "  {} {}", join_f64(a), fmt_f64(*b));
            }
        }
        None => {}
    }
    s
}

fn indent(n: usize) -> String {
    "  ".repeat(n)
}

fn write_node(s: &mut String, node: &RawNode, depth: usize) {
    let pad = indent(depth);
    match &node.kind {
        RawNodeKind::Affine { a, b } => {
            let _ = writeln!(s, "{pad}node affine vars {}", node.vars.as_str());
            let cols = a.first().map(|r| r.len()).unwrap_or(0);
            let _ = writeln!(s, "{pad}matrix A {} {}", a.len(), cols);
            for row in a {
                let _ = writeln!(s, "{pad}  {}", join_f64(row));
            }
            let _ = writeln!(s, "{pad}vector b {}", b.len());
            let _ = writeln!(s, "{pad}  {}", join_f64(b));
        }
        RawNodeKind::Smooth { map } => {
            let _ = writeln!(s, "{pad}node smooth vars {} out {}", node.vars.as_str(), map.out);
            let _ = writeln!(s, "{pad}poly map {}", map.out);
            write_poly_body(s, map, depth);
        }
        RawNodeKind::Box { center, radius } => {
            let _ = writeln!(s, "{pad}node box vars {} out {}", node.vars.as_str(), center.out);
            let _ = writeln!(s, "{pad}poly center {}", center.out);
            write_poly_body(s, center, depth);
            let _ = writeln!(s, "{pad}poly radius {}", radius.out);
            write_poly_body(s, radius, depth);
        }
        RawNodeKind::NormalCone { set } => {
            let _ = writeln!(s, "{pad}node normal-cone of {} vars {}", set, node.vars.as_str());
        }
        RawNodeKind::Graph { out, pieces } => {
            let _ = writeln!(
                s,
                "{pad}node graph vars {} out {} of {}",
                node.vars.as_str(),
                out,
                pieces.join(" ")
            );
        }
        RawNodeKind::Sum(l, r) => {
            let _ = writeln!(s, "{pad}node sum vars {}", node.vars.as_str());
            write_node(s, l, depth + 1);
            write_node(s, r, depth + 1);
        }
        RawNodeKind::SmoothPlus { smooth, inner } => {
            let _ = writeln!(
                s,
                "{pad}node smooth-plus vars {} out {}",
                node.vars.as_str(),
                smooth.out
            );
            let _ = writeln!(s, "{pad}poly smooth {}", smooth.out);
            write_poly_body(s, smooth, depth);
            write_node(s, inner, depth + 1);
        }
        RawNodeKind::IndicatorSubgradient { pieces } => {
            let _ = writeln!(
                s,
                "{pad}node indicator-subgradient vars {} pieces {}",
                node.vars.as_str(),
                pieces.len()
            );
            for (a, b) in pieces {
                let _ = writeln!(s, "{pad}  {} {}", join_f64(a), fmt_f64(*b));
            }
        }
    }
}

fn write_poly_body(s: &mut String, poly: &RawPoly, depth: usize) {
    let pad = indent(depth + 1);
    for (i, comp) in poly.components.iter().enumerate() {
        let mut expr = String::new();
        if comp.is_empty() || (comp.len() == 1 && comp[0].factors.is_empty() && comp[0].coeff == 0.0)
        {
            expr.push('0');
        } else {
            for (k, term) in comp.iter().enumerate() {
                let sign = if term.coeff < 0.0 { "-" } else { "+" };
                if k > 0 || term.coeff < 0.0 {
                    let _ = write!(expr, " {sign} ");
                }
                let _ = write!(expr, "{}", fmt_f64(term.coeff.abs()));
                for (name, e) in &term.factors {
                    if *e == 1 {
                        let _ = write!(expr, " {name}");
                    } else {
                        let _ = write!(expr, " {name}^{e}");
                    }
                }
            }
        }
        let _ = writeln!(s, "{pad}y{} = {}", i + 1, expr.trim());
    }
}

fn fmt_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn join_f64(vs: &[f64]) -> String {
    vs.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(" ")
}
