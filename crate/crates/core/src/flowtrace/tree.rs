//! Labelled trees: black vertices are critical points, white vertices the
//! points `z_i`, edges the descending separatrices.

use std::f64::consts::PI;
use std::fmt;

use num::complex::Complex64 as C;

use super::roots::CriticalSet;
use super::trace::{Separatrix, Terminal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Black(usize),
    /// 0-based index of `z_i`.
    White(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeEdge {
    pub source: usize,
    pub target: Node,
    /// Angle of the edge at its source.
    pub out_angle: f64,
    /// Angle at its target, pointing back along the edge.
    pub in_angle: f64,
    /// `g_i(e)` for an edge into a white vertex; zero otherwise.
    pub g: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlackVertex {
    pub z: C,
    pub order: usize,
    pub f: f64,
}

/// Landing point of the distinguished ray: a sector of a white vertex, and
/// the offset into it in units of a full turn.
#[derive(Clone, Debug, PartialEq)]
pub struct BasePoint {
    pub white: usize,
    /// The edge opening the sector; the sector runs anticlockwise from it.
    pub edge: usize,
    pub offset: f64,
    pub tangent: C,
    /// Critical point the ray ran into, if any; the base then continues
    /// along the next edge anticlockwise.
    pub critical: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelledTreeNum {
    pub k: usize,
    pub black: Vec<BlackVertex>,
    pub edges: Vec<TreeEdge>,
    /// Incident edges of each black vertex, anticlockwise.
    pub black_order: Vec<Vec<usize>>,
    /// Incoming edges of each white vertex, anticlockwise.
    pub white_order: Vec<Vec<usize>>,
    pub base: BasePoint,
}

fn turn(from: f64, to: f64) -> f64 {
    (to - from).rem_euclid(2.0 * PI) / (2.0 * PI)
}

/// Index of the last angle not exceeding `x`, cyclically.
fn sector_of(angles: &[f64], x: f64) -> usize {
    let mut best = angles.len() - 1;
    let mut best_gap = f64::INFINITY;
    for (r, &a) in angles.iter().enumerate() {
        let gap = (x - a).rem_euclid(2.0 * PI);
        if gap < best_gap {
            best_gap = gap;
            best = r;
        }
    }
    best
}

impl LabelledTreeNum {
    pub fn build(k: usize, crit: &CriticalSet, seps: &[Separatrix], ray: &Separatrix) -> Self {
        let black: Vec<BlackVertex> = crit
            .points
            .iter()
            .enumerate()
            .map(|(j, c)| BlackVertex { z: c.z, order: c.order, f: crit.f(j) })
            .collect();
        let edges: Vec<TreeEdge> = seps
            .iter()
            .map(|s| TreeEdge {
                source: s.source.expect("separatrix from a critical point"),
                target: match s.terminal {
                    Terminal::Zero(i) => Node::White(i),
                    Terminal::Critical(j) => Node::Black(j),
                },
                out_angle: s.start_angle,
                in_angle: s.terminal_angle,
                g: 0.0,
            })
            .collect();
        let mut black_order = vec![Vec::new(); black.len()];
        for (b, order) in black_order.iter_mut().enumerate() {
            let mut inc: Vec<(f64, usize)> = Vec::new();
            for (e, x) in edges.iter().enumerate() {
                if x.source == b {
                    inc.push((x.out_angle, e));
                }
                if x.target == Node::Black(b) {
                    inc.push((x.in_angle, e));
                }
            }
            inc.sort_by(|p, q| p.0.total_cmp(&q.0));
            *order = inc.into_iter().map(|(_, e)| e).collect();
        }
        let mut white_order = vec![Vec::new(); k];
        for (i, order) in white_order.iter_mut().enumerate() {
            let mut inc: Vec<(f64, usize)> =
                edges.iter().enumerate().filter(|(_, x)| x.target == Node::White(i)).map(|(e, x)| (x.in_angle, e)).collect();
            inc.sort_by(|p, q| p.0.total_cmp(&q.0));
            *order = inc.into_iter().map(|(_, e)| e).collect();
        }
        let mut tree = LabelledTreeNum {
            k,
            black,
            edges,
            black_order,
            white_order,
            base: BasePoint { white: 0, edge: 0, offset: 0.0, tangent: C::new(1.0, 0.0), critical: None },
        };
        for i in 0..k {
            let order = tree.white_order[i].clone();
            let n = order.len();
            for r in 0..n {
                let g = if n == 1 {
                    1.0
                } else {
                    turn(tree.edges[order[r]].in_angle, tree.edges[order[(r + 1) % n]].in_angle)
                };
                tree.edges[order[r]].g = g;
            }
        }
        tree.base = tree.locate_base(ray);
        tree
    }

    fn locate_base(&self, ray: &Separatrix) -> BasePoint {
        match ray.terminal {
            Terminal::Zero(i) => {
                let order = &self.white_order[i];
                let angles: Vec<f64> = order.iter().map(|&e| self.edges[e].in_angle).collect();
                let r = sector_of(&angles, ray.terminal_angle);
                BasePoint {
                    white: i,
                    edge: order[r],
                    offset: turn(angles[r], ray.terminal_angle).min(self.edges[order[r]].g),
                    tangent: ray.terminal_tangent(),
                    critical: None,
                }
            }
            Terminal::Critical(c) => {
                // continue along the next edge anticlockwise, which is outgoing
                let order = &self.black_order[c];
                let angles: Vec<f64> = order.iter().map(|&e| self.angle_at(e, Node::Black(c))).collect();
                let r = (sector_of(&angles, ray.terminal_angle) + 1) % order.len();
                let (white, edge) = self.descend_rightmost(order[r]);
                BasePoint {
                    white,
                    edge,
                    offset: 0.0,
                    tangent: C::from_polar(1.0, self.edges[edge].in_angle),
                    critical: Some(c),
                }
            }
        }
    }

    /// Follows `e` downwards, taking the next edge anticlockwise at each black vertex.
    fn descend_rightmost(&self, mut e: usize) -> (usize, usize) {
        loop {
            match self.edges[e].target {
                Node::White(i) => return (i, e),
                Node::Black(c) => e = self.next_after(Node::Black(c), e),
            }
        }
    }

    fn angle_at(&self, e: usize, v: Node) -> f64 {
        let x = &self.edges[e];
        if x.target == v {
            x.in_angle
        } else {
            x.out_angle
        }
    }

    pub fn order(&self, v: Node) -> &[usize] {
        match v {
            Node::Black(b) => &self.black_order[b],
            Node::White(i) => &self.white_order[i],
        }
    }

    /// The edge after `e` in the cyclic order at `v`.
    pub fn next_after(&self, v: Node, e: usize) -> usize {
        let o = self.order(v);
        let p = o.iter().position(|&x| x == e).expect("edge incident to vertex");
        o[(p + 1) % o.len()]
    }

    fn other_end(&self, e: usize, v: Node) -> Node {
        let x = &self.edges[e];
        if x.target == v {
            Node::Black(x.source)
        } else {
            x.target
        }
    }

    /// Arcs `(white, opening edge, length)` met walking round the tree
    /// anticlockwise from the base point; the base arc is split in two.
    pub fn contour(&self) -> Vec<(usize, usize, f64)> {
        let b = &self.base;
        let mut out = vec![(b.white, b.edge, self.edges[b.edge].g - b.offset)];
        let (mut v, mut e) = (Node::White(b.white), b.edge);
        let limit = 4 * (self.edges.len() + 1);
        for _ in 0..limit {
            let next = self.next_after(v, e);
            let w = self.other_end(next, v);
            if let Node::White(i) = w {
                if i == b.white && next == b.edge {
                    out.push((b.white, b.edge, b.offset));
                    return out;
                }
                out.push((i, next, self.edges[next].g));
            }
            v = w;
            e = next;
        }
        out
    }

    /// Checks the defining properties of an admissible labelled tree.
    pub fn check_invariants(&self, tol: f64) -> std::result::Result<(), String> {
        let nb = self.black.len();
        let k = self.k;
        if nb + 1 > k {
            return Err(format!("{nb} black vertices for {k} white vertices"));
        }
        if self.edges.len() != nb + k - 1 {
            return Err(format!("{} edges, expected |B| + k - 1 = {}", self.edges.len(), nb + k - 1));
        }
        // connected; with |E| = |V| - 1 this also rules out cycles
        let mut parent: Vec<usize> = (0..nb + k).collect();
        fn find(p: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while p[r] != r {
                r = p[r];
            }
            p[i] = r;
            r
        }
        let id = |v: Node| match v {
            Node::Black(b) => b,
            Node::White(i) => nb + i,
        };
        for x in &self.edges {
            let (a, b) = (find(&mut parent, x.source), find(&mut parent, id(x.target)));
            if a == b {
                return Err("the tree has a cycle".into());
            }
            parent[a] = b;
        }
        let root = find(&mut parent, 0);
        if (0..nb + k).any(|v| find(&mut parent, v) != root) {
            return Err("the tree is disconnected".into());
        }
        let fmax = self.black.iter().map(|b| b.f).fold(0.0, f64::max);
        if (fmax - 1.0).abs() > tol {
            return Err(format!("max f = {fmax}"));
        }
        for x in &self.edges {
            if let Node::Black(t) = x.target {
                if self.black[t].f > self.black[x.source].f * (1.0 + tol) {
                    return Err(format!("f increases along an edge into black vertex {t}"));
                }
            }
        }
        for (b, order) in self.black_order.iter().enumerate() {
            let outgoing = order.iter().filter(|&&e| self.edges[e].source == b).count();
            if outgoing < 2 {
                return Err(format!("black vertex {b} has {outgoing} outgoing edges"));
            }
            let n = order.len();
            for r in 0..n {
                let (e1, e2) = (order[r], order[(r + 1) % n]);
                if n > 1 && e1 != e2 && self.edges[e1].source != b && self.edges[e2].source != b {
                    return Err(format!("black vertex {b} is the target of two adjacent edges"));
                }
            }
        }
        for (i, order) in self.white_order.iter().enumerate() {
            if order.is_empty() {
                return Err(format!("white vertex {} has no edges", i + 1));
            }
            let s: f64 = order.iter().map(|&e| self.edges[e].g).sum();
            if (s - 1.0).abs() > tol {
                return Err(format!("g labels at white vertex {} sum to {s}", i + 1));
            }
        }
        Ok(())
    }

    /// Applies the quotient relations at tolerance `tol`: equal-level black
    /// edges collapse and zero angle labels are resolved.
    pub fn normalize(&self, tol: f64) -> LabelledTreeNum {
        let mut t = self.clone();
        while t.collapse_equal_levels(tol) || t.resolve_zero_angle(tol) {}
        t
    }

    fn same_level(&self, b: usize, c: usize, tol: f64) -> bool {
        (self.black[b].f - self.black[c].f).abs() <= tol
    }

    fn collapse_equal_levels(&mut self, tol: f64) -> bool {
        let Some(e) = (0..self.edges.len()).find(|&e| match self.edges[e].target {
            Node::Black(c) => self.same_level(self.edges[e].source, c, tol),
            Node::White(_) => false,
        }) else {
            return false;
        };
        let b = self.edges[e].source;
        let Node::Black(c) = self.edges[e].target else { unreachable!() };
        let oc = &self.black_order[c];
        let p = oc.iter().position(|&x| x == e).unwrap();
        let inserted: Vec<usize> = (1..oc.len()).map(|d| oc[(p + d) % oc.len()]).collect();
        let ob = &self.black_order[b];
        let q = ob.iter().position(|&x| x == e).unwrap();
        let mut merged = ob[..q].to_vec();
        merged.extend(inserted);
        merged.extend_from_slice(&ob[q + 1..]);
        self.black_order[b] = merged;
        self.black_order[c].clear();
        for x in &mut self.edges {
            if x.source == c {
                x.source = b;
            }
            if x.target == Node::Black(c) {
                x.target = Node::Black(b);
            }
        }
        if self.base.critical == Some(c) {
            self.base.critical = Some(b);
        }
        self.remove_edge(e);
        self.remove_black(c);
        true
    }

    fn resolve_zero_angle(&mut self, tol: f64) -> bool {
        for i in 0..self.k {
            let order = self.white_order[i].clone();
            if order.len() < 2 {
                continue;
            }
            for r in 0..order.len() {
                let e = order[r];
                if self.edges[e].g > tol {
                    continue;
                }
                let e2 = order[(r + 1) % order.len()];
                let (b, b2) = (self.edges[e].source, self.edges[e2].source);
                if b == b2 {
                    continue;
                }
                let base_on = |t: &Self, x: usize| t.base.white == i && t.base.edge == x;
                if self.same_level(b, b2, tol) {
                    // merge b2 into b; e and e2 become one edge
                    let ob = self.black_order[b].clone();
                    let ob2 = self.black_order[b2].clone();
                    let pb = ob.iter().position(|&x| x == e).unwrap();
                    let pb2 = ob2.iter().position(|&x| x == e2).unwrap();
                    let mut merged = vec![e2];
                    merged.extend((1..ob.len()).map(|d| ob[(pb + d) % ob.len()]));
                    merged.extend((1..ob2.len()).map(|d| ob2[(pb2 + d) % ob2.len()]));
                    self.black_order[b] = merged;
                    self.black_order[b2].clear();
                    for x in &mut self.edges {
                        if x.source == b2 {
                            x.source = b;
                        }
                        if x.target == Node::Black(b2) {
                            x.target = Node::Black(b);
                        }
                    }
                    if base_on(self, e) {
                        self.base.edge = e2;
                        self.base.offset = 0.0;
                    }
                    if self.base.critical == Some(b2) {
                        self.base.critical = Some(b);
                    }
                    self.remove_edge(e);
                    self.remove_black(b2);
                } else if self.black[b2].f < self.black[b].f {
                    // e is redirected to b2, next to e2
                    self.white_order[i].retain(|&x| x != e);
                    self.edges[e].target = Node::Black(b2);
                    self.edges[e].g = 0.0;
                    let o = &mut self.black_order[b2];
                    let p = o.iter().position(|&x| x == e2).unwrap();
                    o.insert(p + 1, e);
                    if base_on(self, e) {
                        self.base.edge = e2;
                        self.base.offset = 0.0;
                    }
                } else {
                    // e2 is redirected to b, just before e; e takes its label
                    self.white_order[i].retain(|&x| x != e2);
                    self.edges[e].g = self.edges[e2].g;
                    self.edges[e2].target = Node::Black(b);
                    self.edges[e2].g = 0.0;
                    let o = &mut self.black_order[b];
                    let p = o.iter().position(|&x| x == e).unwrap();
                    o.insert(p, e2);
                    if base_on(self, e2) {
                        self.base.edge = e;
                    }
                }
                return true;
            }
        }
        false
    }

    fn remove_edge(&mut self, e: usize) {
        self.edges.remove(e);
        let fix = |o: &mut Vec<usize>| {
            o.retain(|&x| x != e);
            for x in o.iter_mut() {
                if *x > e {
                    *x -= 1;
                }
            }
        };
        self.black_order.iter_mut().for_each(fix);
        self.white_order.iter_mut().for_each(fix);
        if self.base.edge > e {
            self.base.edge -= 1;
        }
    }

    fn remove_black(&mut self, c: usize) {
        self.black.remove(c);
        self.black_order.remove(c);
        if let Some(x) = &mut self.base.critical {
            if *x > c {
                *x -= 1;
            }
        }
        for x in &mut self.edges {
            if x.source > c {
                x.source -= 1;
            }
            if let Node::Black(t) = &mut x.target {
                if *t > c {
                    *t -= 1;
                }
            }
        }
    }
}

impl fmt::Display for LabelledTreeNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (b, v) in self.black.iter().enumerate() {
            writeln!(f, "black b{b} at {:.6}{:+.6}i order {} f={:.9}", v.z.re, v.z.im, v.order, v.f)?;
        }
        for (e, x) in self.edges.iter().enumerate() {
            match x.target {
                Node::White(i) => writeln!(f, "edge e{e}: b{} -> v{} g={:.9}", x.source, i + 1, x.g)?,
                Node::Black(c) => writeln!(f, "edge e{e}: b{} -> b{c}", x.source)?,
            }
        }
        write!(
            f,
            "base on v{} after e{} offset={:.9} tangent={:.6}{:+.6}i",
            self.base.white + 1,
            self.base.edge,
            self.base.offset,
            self.base.tangent.re,
            self.base.tangent.im
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(source: usize, target: Node, g: f64) -> TreeEdge {
        TreeEdge { source, target, out_angle: 0.0, in_angle: 0.0, g }
    }

    fn bv(f: f64) -> BlackVertex {
        BlackVertex { z: C::new(0.0, 0.0), order: 2, f }
    }

    /// b0 -> v1, b0 -> b1, b1 -> v2, b1 -> v3.
    fn chain_tree(f1: f64) -> LabelledTreeNum {
        LabelledTreeNum {
            k: 3,
            black: vec![bv(1.0), bv(f1)],
            edges: vec![
                edge(0, Node::White(0), 1.0),
                edge(0, Node::Black(1), 0.0),
                edge(1, Node::White(1), 1.0),
                edge(1, Node::White(2), 1.0),
            ],
            black_order: vec![vec![0, 1], vec![1, 2, 3]],
            white_order: vec![vec![0], vec![2], vec![3]],
            base: BasePoint { white: 0, edge: 0, offset: 0.5, tangent: C::new(1.0, 0.0), critical: None },
        }
    }

    #[test]
    fn invariants_and_contour() {
        let t = chain_tree(0.5);
        t.check_invariants(1e-9).unwrap();
        let arcs: Vec<(usize, f64)> = t.contour().iter().map(|&(w, _, l)| (w, l)).collect();
        assert_eq!(arcs, [(0, 0.5), (1, 1.0), (2, 1.0), (0, 0.5)]);
        let mut bad = t.clone();
        bad.black[0].f = 0.9;
        assert!(bad.check_invariants(1e-9).is_err());
    }

    #[test]
    fn equal_levels_collapse() {
        let t = chain_tree(1.0).normalize(1e-9);
        assert_eq!(t.black.len(), 1);
        assert_eq!(t.edges.len(), 3);
        assert_eq!(t.black_order[0].len(), 3);
        t.check_invariants(1e-9).unwrap();
        let arcs: Vec<usize> = t.contour().iter().map(|&(w, _, _)| w).collect();
        assert_eq!(arcs, [0, 1, 2, 0]);
    }

    #[test]
    fn generic_tree_unchanged() {
        let t = chain_tree(0.5);
        assert_eq!(t.normalize(1e-9), t);
    }

    /// b0 -> v1, b0 -> v2 (g = 0), b1 -> v2, b1 -> v3.
    fn zero_angle_tree(f1: f64) -> LabelledTreeNum {
        LabelledTreeNum {
            k: 3,
            black: vec![bv(1.0), bv(f1)],
            edges: vec![
                edge(0, Node::White(0), 1.0),
                edge(0, Node::White(1), 0.0),
                edge(1, Node::White(1), 1.0),
                edge(1, Node::White(2), 1.0),
            ],
            black_order: vec![vec![0, 1], vec![2, 3]],
            white_order: vec![vec![0], vec![1, 2], vec![3]],
            base: BasePoint { white: 0, edge: 0, offset: 0.5, tangent: C::new(1.0, 0.0), critical: None },
        }
    }

    #[test]
    fn zero_angle_retargets_to_lower_vertex() {
        let t = zero_angle_tree(0.5).normalize(1e-9);
        assert_eq!(t.edges[1].target, Node::Black(1));
        assert_eq!(t.white_order[1], vec![2]);
        assert_eq!(t.black_order[1], vec![2, 1, 3]);
        t.check_invariants(1e-9).unwrap();
    }

    #[test]
    fn zero_angle_merges_equal_levels() {
        let t = zero_angle_tree(1.0).normalize(1e-9);
        assert_eq!(t.black.len(), 1);
        assert_eq!(t.edges.len(), 3);
        t.check_invariants(1e-9).unwrap();
    }
}
