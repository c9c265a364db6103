//! From a traced configuration to a point of the bar complex.

use num::complex::Complex64 as C;
use num::{BigInt, BigRational, One, Signed, Zero};

use super::roots::{critical_points_normalized, log_h, CriticalSet};
use super::trace::{Field, Separatrix, Tracer};
use super::tree::{LabelledTreeNum, Node};
use super::{Configuration, Tolerances};
use crate::cacti_core::{decompose_point, CactusCell, CactusPoint, Permutation};
use crate::error::{Error, Result};
use crate::metatree::{BarCell, BarPoint, Input, Mask, NestedTree, WeightVector};

type Q = BigRational;

/// Denominator used when rounding lengths and levels to rationals.
const DENOM: i64 = 1_000_000;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceDiagnostics {
    pub separatrices: usize,
    pub total_steps: usize,
    /// Largest `|arg h - θ|` along any traced line.
    pub max_phase_residual: f64,
    /// Largest `|p|` at an accepted critical point (normalised coordinates).
    pub critical_residual: f64,
    /// Distance of the extracted point from the walls of its cell.
    pub clearance: f64,
}

/// Critical points, separatrices and the labelled tree of a configuration.
#[derive(Clone, Debug)]
pub struct FlowTrace {
    /// Critical points in the configuration's coordinates.
    pub critical: CriticalSet,
    pub separatrices: Vec<Separatrix>,
    pub ray: Separatrix,
    /// The tree after the quotient relations; vertex positions in the
    /// configuration's coordinates.
    pub tree: LabelledTreeNum,
    pub diagnostics: TraceDiagnostics,
}

#[derive(Clone, Debug)]
pub struct TraceResult {
    pub flow: FlowTrace,
    /// The cactus of the whole tree, before splitting by levels.
    pub cactus: CactusPoint,
    pub point: BarPoint,
    pub cell: BarCell,
}

/// Traces every separatrix and the distinguished ray.
pub fn trace_flow(cfg: &Configuration, w: &WeightVector, tol: &Tolerances) -> Result<FlowTrace> {
    cfg.check_weights(w)?;
    let norm = cfg.normalized(tol)?;
    let a = w.to_f64();
    let crit_n = critical_points_normalized(&norm.points, &a, tol)?;
    let field = Field { z: &norm.points, a: &a };
    let to_original = |z: C| norm.denormalize(z);
    let tracer = Tracer::new(field, &crit_n, tol, &to_original);
    let mut seps = Vec::new();
    for j in 0..crit_n.points.len() {
        for d in 0..crit_n.points[j].order {
            seps.push(tracer.separatrix(j, d)?);
        }
    }
    let ray = tracer.distinguished_ray()?;
    let mut tree = LabelledTreeNum::build(cfg.k(), &crit_n, &seps, &ray).normalize(tol.f_cluster);
    for b in &mut tree.black {
        b.z = norm.denormalize(b.z);
    }
    let mut critical = crit_n.clone();
    for p in &mut critical.points {
        p.z = norm.denormalize(p.z);
        let l = log_h(cfg.points(), &a, p.z);
        p.log_abs_h = l.re;
        p.arg_h = l.im;
    }
    critical.log_max = critical.points.iter().map(|c| c.log_abs_h).fold(f64::NEG_INFINITY, f64::max);
    let diagnostics = TraceDiagnostics {
        separatrices: seps.len(),
        total_steps: seps.iter().chain([&ray]).map(|s| s.steps).sum(),
        max_phase_residual: seps.iter().chain([&ray]).map(|s| s.max_residual).fold(0.0, f64::max),
        critical_residual: crit_n.residual,
        clearance: f64::INFINITY,
    };
    Ok(FlowTrace { critical, separatrices: seps, ray, tree, diagnostics })
}

/// The labelled tree of a configuration.
pub fn build_labelled_tree(cfg: &Configuration, w: &WeightVector, tol: &Tolerances) -> Result<LabelledTreeNum> {
    Ok(trace_flow(cfg, w, tol)?.tree)
}

/// Unit tangent at `z_i` (1-based) of the first level line of `arg h = 0`
/// reaching `z_i` when scanning anticlockwise from the distinguished ray.
pub fn theta_angle(cfg: &Configuration, w: &WeightVector, i: usize, tol: &Tolerances) -> Result<C> {
    if i == 0 || i > cfg.k() {
        return Err(Error::LetterOutOfRange { letter: i, k: cfg.k() });
    }
    let tree = trace_flow(cfg, w, tol)?.tree;
    let base = &tree.base;
    if base.white == i - 1 {
        return Ok(base.tangent);
    }
    if base.critical.is_none() {
        let g = tree.edges[base.edge].g;
        if base.offset < 1e-9 || g - base.offset < 1e-9 {
            return Err(Error::AmbiguousFirstHit(i));
        }
    }
    let (_, e, _) = tree
        .contour()
        .into_iter()
        .find(|&(w, _, _)| w == i - 1)
        .ok_or_else(|| Error::Verification(format!("walk never reaches z_{i}")))?;
    Ok(C::from_polar(1.0, tree.edges[e].in_angle))
}

fn rational(x: f64) -> Q {
    Q::new(BigInt::from((x * DENOM as f64).round() as i64), BigInt::from(DENOM))
}

/// Rounds arc lengths so every lobe sums to exactly one; the largest arc of
/// each lobe absorbs the rounding.
fn rationalize(letters: &[usize], lengths: &[f64], k: usize) -> Vec<Q> {
    let mut n: Vec<i64> = lengths.iter().map(|&x| (x * DENOM as f64).round() as i64).collect();
    for lobe in 1..=k {
        let pos: Vec<usize> = (0..letters.len()).filter(|&p| letters[p] == lobe).collect();
        let sum: i64 = pos.iter().map(|&p| n[p]).sum();
        if let Some(&big) = pos.iter().max_by(|&&p, &&q| lengths[p].total_cmp(&lengths[q])) {
            n[big] += DENOM - sum;
        }
    }
    n.into_iter().map(|x| Q::new(BigInt::from(x), BigInt::from(DENOM))).collect()
}

/// Nested components of the tree by level: `(leaf mask, λ)` for each
/// non-root vertex.
fn level_sets(tree: &LabelledTreeNum, f_tol: f64) -> Vec<(Mask, f64)> {
    let mut out = Vec::new();
    let blacks: Vec<usize> = (0..tree.black.len()).collect();
    split_level(tree, &blacks, f_tol, &mut out);
    out
}

fn split_level(tree: &LabelledTreeNum, blacks: &[usize], f_tol: f64, out: &mut Vec<(Mask, f64)>) {
    let top = blacks.iter().map(|&b| tree.black[b].f).fold(0.0, f64::max);
    let rest: Vec<usize> = blacks.iter().copied().filter(|&b| tree.black[b].f < top * (1.0 - f_tol)).collect();
    // components of rest ∪ whites under edges leaving `rest`
    let nb = tree.black.len();
    let mut parent: Vec<usize> = (0..nb + tree.k).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for x in &tree.edges {
        if !rest.contains(&x.source) {
            continue;
        }
        let t = match x.target {
            Node::Black(c) => c,
            Node::White(i) => nb + i,
        };
        let (u, v) = (find(&mut parent, x.source), find(&mut parent, t));
        parent[u] = v;
    }
    let mut roots: Vec<usize> = rest.iter().map(|&b| find(&mut parent, b)).collect();
    roots.sort_unstable();
    roots.dedup();
    for r in roots {
        let members: Vec<usize> = rest.iter().copied().filter(|&b| find(&mut parent, b) == r).collect();
        let mask = (0..tree.k).filter(|&i| find(&mut parent, nb + i) == r).fold(0, |m, i| m | (1 << i));
        let fmax = members.iter().map(|&b| tree.black[b].f).fold(0.0, f64::max);
        out.push((mask, fmax / top));
        split_level(tree, &members, f_tol, out);
    }
}

fn leaves(m: Mask) -> Vec<usize> {
    (0..32).filter(|b| m & (1 << b) != 0).map(|b| b + 1).collect()
}

/// Splits a point whose letters are the leaves of vertex `v`, in increasing
/// order, into the labels of `v` and its descendants.
fn split_point(tree: &NestedTree, v: usize, p: &CactusPoint, out: &mut [Option<CactusPoint>]) -> Result<bool> {
    let inputs = tree.inputs(v);
    let own = leaves(tree.vertex(v));
    let mut images = vec![0; own.len()];
    let mut next = 1;
    let mut arities = Vec::with_capacity(inputs.len());
    for &x in &inputs {
        let block = leaves(tree.input_mask(x));
        arities.push(block.len());
        for l in block {
            images[own.iter().position(|&o| o == l).unwrap()] = next;
            next += 1;
        }
    }
    let perm = Permutation::new(images)?;
    let relabelled = CactusPoint::new(p.cell().relabel(&perm)?, p.coords().to_vec())?;
    let Some((outer, inners)) = decompose_point(&relabelled, &arities)? else { return Ok(false) };
    out[v] = Some(outer);
    for (&x, q) in inputs.iter().zip(&inners) {
        if let Input::Vertex(c) = x {
            if !split_point(tree, c, q, out)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The point of the bar complex carried by a configuration with weights.
pub fn extract_cell(cfg: &Configuration, w: &WeightVector, tol: &Tolerances) -> Result<TraceResult> {
    let mut flow = trace_flow(cfg, w, tol)?;
    let tree = &flow.tree;
    let k = cfg.k();
    if tree.base.critical.is_some() {
        return Err(Error::BoundaryProximity { clearance: 0.0 });
    }
    tree.check_invariants(1e-9).map_err(Error::Verification)?;
    let arcs = tree.contour();
    let letters: Vec<usize> = arcs.iter().map(|&(w, _, _)| w + 1).collect();
    let lengths: Vec<f64> = arcs.iter().map(|&(_, _, l)| l).collect();
    let levels = level_sets(tree, tol.f_cluster);
    let mut clearance = lengths.iter().copied().fold(f64::INFINITY, f64::min);
    for &(_, l) in &levels {
        clearance = clearance.min(l).min(1.0 - l);
    }
    flow.diagnostics.clearance = clearance;
    if clearance < tol.boundary {
        return Err(Error::BoundaryProximity { clearance });
    }
    let cell = CactusCell::new(k, &letters)?;
    let coords = rationalize(&letters, &lengths, k);
    if coords.iter().any(|t| !t.is_positive()) {
        return Err(Error::BoundaryProximity { clearance });
    }
    let cactus = CactusPoint::new(cell, coords)?;
    let masks: Vec<Mask> = levels.iter().map(|&(m, _)| m).collect();
    let nested = NestedTree::new(k, &masks)?;
    let mut pts: Vec<Option<CactusPoint>> = vec![None; nested.len()];
    if !split_point(&nested, 0, &cactus, &mut pts)? {
        return Err(Error::BoundaryProximity { clearance });
    }
    let pts: Vec<CactusPoint> = pts.into_iter().map(|p| p.expect("every vertex labelled")).collect();
    let mut lambdas = vec![Q::one(); nested.len()];
    for &(m, l) in &levels {
        let v = nested.index_of(m).expect("level set is a vertex");
        let q = rational(l);
        lambdas[v] = if q.is_zero() { Q::new(BigInt::one(), BigInt::from(DENOM)) } else { q };
    }
    let labels: Vec<CactusCell> = pts.iter().map(|p| p.cell().clone()).collect();
    let bar = BarCell::new(nested, labels)?;
    let point = BarPoint::new(bar.clone(), pts, lambdas)?;
    Ok(TraceResult { flow, cactus, point, cell: bar })
}

#[cfg(test)]
/// Coordinates of a point as floats, for comparisons.
pub(crate) fn coords_f64(p: &CactusPoint) -> Vec<f64> {
    use num::ToPrimitive;
    p.coords().iter().map(|t| t.to_f64().unwrap()).collect()
}
