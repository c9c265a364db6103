//! Nested trees decorated by cacti cells.
//!
//! A nested tree on `k` leaves is a laminar family of subsets of `{1..k}`,
//! each of size at least two, containing the root `{1..k}`. The inputs of a
//! vertex are its child vertices and the leaves directly under it, ordered
//! by least element; the label of a vertex is a cacti cell whose lobe `j`
//! is input `j`.
//!
//! * A bar cell (open moduli space) labels every vertex; each internal edge
//!   carries a scale `λ ∈ (0,1)`.
//! * An FM cell additionally marks each internal edge as `I₁` (scale in
//!   `(0,1]`, one dimension) or `I₀` (scale zero, a boundary stratum).
//!
//! Orientation: factors are listed in depth-first order, and for each
//! vertex the edge to its parent (when `I₁`) comes before its label.
//! The bar complex is the quotient of the FM complex by cells with an `I₀` edge.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num::{BigRational, One, Signed};
use rayon::prelude::*;

use crate::cacti_core::{self, CactusCell, CactusPoint, Permutation};
use crate::error::{Error, Result};

pub type Mask = u32;
pub const MAX_LEAVES: usize = 31;
/// Default bound on materialised cell listings.
pub const DEFAULT_CELL_LIMIT: u64 = 2_000_000;

fn bit(leaf: usize) -> Mask {
    1 << (leaf - 1)
}

fn min_leaf(m: Mask) -> usize {
    m.trailing_zeros() as usize + 1
}

fn leaves(m: Mask) -> impl Iterator<Item = usize> {
    (0..32).filter(move |b| m & (1 << b) != 0).map(|b| b + 1)
}

fn full(k: usize) -> Mask {
    ((1u64 << k) - 1) as Mask
}

/// An input of a vertex.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Input {
    Leaf(usize),
    /// Index of a child vertex.
    Vertex(usize),
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct NestedTree {
    k: usize,
    /// Depth-first preorder, root first, children by least element.
    vertices: Vec<Mask>,
    parent: Vec<usize>,
}

impl NestedTree {
    /// Validates a family of subsets (as bitmasks, leaf `j` is bit `j-1`);
    /// the root is added if absent.
    pub fn new(k: usize, subsets: &[Mask]) -> Result<Self> {
        if !(2..=MAX_LEAVES).contains(&k) {
            return Err(Error::InvalidTree(format!("arity {k} outside 2..={MAX_LEAVES}")));
        }
        let root = full(k);
        let mut set: Vec<Mask> = subsets.to_vec();
        set.push(root);
        set.sort_unstable();
        set.dedup();
        for &s in &set {
            if s & !root != 0 {
                return Err(Error::InvalidTree(format!("subset {} exceeds {k} leaves", mask_name(s, k))));
            }
            if s.count_ones() < 2 {
                return Err(Error::InvalidTree(format!("subset {} has fewer than two leaves", mask_name(s, k))));
            }
        }
        for (i, &a) in set.iter().enumerate() {
            for &b in &set[i + 1..] {
                let c = a & b;
                if c != 0 && c != a && c != b {
                    return Err(Error::InvalidTree(format!(
                        "subsets {} and {} overlap without nesting",
                        mask_name(a, k),
                        mask_name(b, k)
                    )));
                }
            }
        }
        Ok(Self::canonical(k, &set))
    }

    /// Depth-first layout of a laminar family that contains the root.
    fn canonical(k: usize, set: &[Mask]) -> Self {
        let mut vertices = Vec::with_capacity(set.len());
        let mut parent = Vec::with_capacity(set.len());
        fn visit(v: Mask, p: usize, set: &[Mask], vertices: &mut Vec<Mask>, parent: &mut Vec<usize>) {
            let me = vertices.len();
            vertices.push(v);
            parent.push(p);
            let mut kids: Vec<Mask> = set
                .iter()
                .copied()
                .filter(|&s| s != v && s & v == s)
                .filter(|&s| !set.iter().any(|&t| t != v && t != s && t & v == t && s & t == s))
                .collect();
            kids.sort_by_key(|&s| s.trailing_zeros());
            for c in kids {
                visit(c, me, set, vertices, parent);
            }
        }
        visit(full(k), 0, set, &mut vertices, &mut parent);
        NestedTree { k, vertices, parent }
    }

    /// The tree with the root only.
    pub fn corolla(k: usize) -> Result<Self> {
        Self::new(k, &[])
    }

    pub fn from_sets(k: usize, sets: &[Vec<usize>]) -> Result<Self> {
        let mut masks = Vec::with_capacity(sets.len());
        for s in sets {
            let mut m = 0;
            for &l in s {
                if l == 0 || l > k {
                    return Err(Error::LetterOutOfRange { letter: l, k });
                }
                m |= bit(l);
            }
            masks.push(m);
        }
        Self::new(k, &masks)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn vertices(&self) -> &[Mask] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Mask {
        self.vertices[i]
    }

    pub fn index_of(&self, m: Mask) -> Option<usize> {
        self.vertices.iter().position(|&v| v == m)
    }

    /// Parent index; `None` for the root.
    pub fn parent(&self, i: usize) -> Option<usize> {
        (i != 0).then(|| self.parent[i])
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (1..self.len()).filter(|&j| self.parent[j] == i).collect()
    }

    /// Inputs of vertex `i` ordered by least element.
    pub fn inputs(&self, i: usize) -> Vec<Input> {
        let kids = self.children(i);
        let covered = kids.iter().fold(0, |acc, &j| acc | self.vertices[j]);
        let mut out: Vec<(usize, Input)> = kids.into_iter().map(|j| (min_leaf(self.vertices[j]), Input::Vertex(j))).collect();
        out.extend(leaves(self.vertices[i] & !covered).map(|l| (l, Input::Leaf(l))));
        out.sort_by_key(|&(m, _)| m);
        out.into_iter().map(|(_, x)| x).collect()
    }

    pub fn input_mask(&self, x: Input) -> Mask {
        match x {
            Input::Leaf(l) => bit(l),
            Input::Vertex(j) => self.vertices[j],
        }
    }

    pub fn valence(&self, i: usize) -> usize {
        self.inputs(i).len()
    }

    /// Number of internal edges.
    pub fn edge_count(&self) -> usize {
        self.len() - 1
    }

    /// Bracket form, e.g. `1(23)`; leaves print as `{10}` when `k > 9`.
    pub fn render(&self, marker: &dyn Fn(usize) -> Option<bool>) -> String {
        let mut s = String::new();
        self.render_into(0, marker, &mut s);
        s
    }

    fn render_into(&self, i: usize, marker: &dyn Fn(usize) -> Option<bool>, s: &mut String) {
        for x in self.inputs(i) {
            match x {
                Input::Leaf(l) if self.k <= 9 => s.push_str(&l.to_string()),
                Input::Leaf(l) => s.push_str(&format!("{{{l}}}")),
                Input::Vertex(j) => {
                    s.push('(');
                    self.render_into(j, marker, s);
                    s.push(')');
                    if let Some(b) = marker(j) {
                        s.push_str(if b { "[1]" } else { "[0]" });
                    }
                }
            }
        }
    }

    /// Parses the bracket form; returns the tree and any `[0]`/`[1]` markers by subset.
    pub fn parse_with_markers(s: &str) -> Result<(NestedTree, HashMap<Mask, bool>)> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut pos = 0;
        let mut subsets = Vec::new();
        let mut markers = HashMap::new();
        fn seq(
            chars: &[char],
            pos: &mut usize,
            subsets: &mut Vec<Mask>,
            markers: &mut HashMap<Mask, bool>,
            k: &mut usize,
        ) -> Result<Mask> {
            let mut m: Mask = 0;
            while *pos < chars.len() && chars[*pos] != ')' {
                let c = chars[*pos];
                let part = if c == '(' {
                    *pos += 1;
                    let inner = seq(chars, pos, subsets, markers, k)?;
                    if *pos >= chars.len() || chars[*pos] != ')' {
                        return Err(Error::Parse("unbalanced parenthesis".into()));
                    }
                    *pos += 1;
                    subsets.push(inner);
                    if *pos + 2 < chars.len() + 1 && chars.get(*pos) == Some(&'[') {
                        let b = match (chars.get(*pos + 1), chars.get(*pos + 2)) {
                            (Some('0'), Some(']')) => false,
                            (Some('1'), Some(']')) => true,
                            _ => return Err(Error::Parse("edge marker must be [0] or [1]".into())),
                        };
                        markers.insert(inner, b);
                        *pos += 3;
                    }
                    inner
                } else if c == '{' {
                    let end = chars[*pos..].iter().position(|&c| c == '}').ok_or_else(|| Error::Parse("unclosed brace".into()))?;
                    let text: String = chars[*pos + 1..*pos + end].iter().collect();
                    *pos += end + 1;
                    let l: usize = text.parse().map_err(|_| Error::Parse(format!("bad leaf {text:?}")))?;
                    leaf_mask(l, k)?
                } else if let Some(d) = c.to_digit(10) {
                    *pos += 1;
                    leaf_mask(d as usize, k)?
                } else {
                    return Err(Error::Parse(format!("unexpected character {c:?}")));
                };
                if m & part != 0 {
                    return Err(Error::Parse("leaf repeated".into()));
                }
                m |= part;
            }
            Ok(m)
        }
        fn leaf_mask(l: usize, k: &mut usize) -> Result<Mask> {
            if l == 0 || l > MAX_LEAVES {
                return Err(Error::Parse(format!("leaf {l} out of range")));
            }
            *k = (*k).max(l);
            Ok(bit(l))
        }
        let mut k = 0;
        let root = seq(&chars, &mut pos, &mut subsets, &mut markers, &mut k)?;
        if pos != chars.len() {
            return Err(Error::Parse("unbalanced parenthesis".into()));
        }
        if root != full(k) {
            return Err(Error::Parse(format!("leaves are not exactly 1..{k}")));
        }
        Ok((NestedTree::new(k, &subsets)?, markers))
    }

    pub fn parse(s: &str) -> Result<NestedTree> {
        Ok(Self::parse_with_markers(s)?.0)
    }

    /// Image of the family under a leaf permutation.
    pub fn relabel(&self, perm: &Permutation) -> Result<NestedTree> {
        if perm.len() != self.k {
            return Err(Error::ArityMismatch { expected: self.k, found: perm.len() });
        }
        let masks: Vec<Mask> = self.vertices.iter().map(|&m| map_mask(m, perm)).collect();
        Ok(Self::canonical(self.k, &masks))
    }
}

impl fmt::Display for NestedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&|_| None))
    }
}

fn map_mask(m: Mask, perm: &Permutation) -> Mask {
    leaves(m).fold(0, |acc, l| acc | bit(perm.apply(l)))
}

/// `{23}` or `{10,11}`.
pub fn mask_name(m: Mask, k: usize) -> String {
    let ls: Vec<String> = leaves(m).map(|l| l.to_string()).collect();
    if k <= 9 {
        format!("{{{}}}", ls.concat())
    } else {
        format!("{{{}}}", ls.join(","))
    }
}

/// All laminar families on `mask` that contain `mask`.
fn families(mask: Mask) -> Vec<Vec<Mask>> {
    let mut out = Vec::new();
    for partition in set_partitions(mask) {
        if partition.len() < 2 {
            continue;
        }
        let mut acc: Vec<Vec<Mask>> = vec![vec![mask]];
        for &block in &partition {
            if block.count_ones() < 2 {
                continue;
            }
            let sub = families(block);
            acc = acc.iter().flat_map(|a| sub.iter().map(move |s| a.iter().chain(s).copied().collect())).collect();
        }
        out.extend(acc);
    }
    out
}

fn set_partitions(mask: Mask) -> Vec<Vec<Mask>> {
    if mask == 0 {
        return vec![vec![]];
    }
    let first = mask & mask.wrapping_neg();
    let rest = mask & !first;
    let mut out = Vec::new();
    // every subset of `rest` joins `first`
    let mut sub = rest;
    loop {
        let block = first | sub;
        for mut p in set_partitions(rest & !sub) {
            p.push(block);
            out.push(p);
        }
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & rest;
    }
    out
}

/// Every nested tree on `k` leaves, sorted.
pub fn enumerate_nested_trees(k: usize) -> Result<Vec<NestedTree>> {
    if !(2..=10).contains(&k) {
        return Err(Error::ResourceLimit(format!("nested trees are enumerated for 2 <= k <= 10, not {k}")));
    }
    let mut out: Vec<NestedTree> = families(full(k)).into_iter().map(|f| NestedTree::canonical(k, &f)).collect();
    out.sort();
    out.dedup();
    Ok(out)
}

// ---------------------------------------------------------------------------
// Cells

/// Cacti cells of every arity up to a bound.
#[derive(Clone, Debug)]
pub struct CactiCatalog {
    by_arity: Vec<Vec<CactusCell>>,
}

impl CactiCatalog {
    pub fn new(max_arity: usize) -> Result<Self> {
        let mut by_arity = vec![Vec::new()];
        for r in 1..=max_arity {
            by_arity.push(cacti_core::enumerate_cells(r)?.into_iter().flatten().collect());
        }
        Ok(CactiCatalog { by_arity })
    }

    pub fn cells(&self, arity: usize) -> &[CactusCell] {
        &self.by_arity[arity]
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct FmCell {
    tree: NestedTree,
    labels: Vec<CactusCell>,
    /// `i1[v]` for the edge from `v` to its parent; `false` at the root.
    i1: Vec<bool>,
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct BarCell {
    tree: NestedTree,
    labels: Vec<CactusCell>,
}

fn check_labels(tree: &NestedTree, labels: &[CactusCell]) -> Result<()> {
    if labels.len() != tree.len() {
        return Err(Error::ArityMismatch { expected: tree.len(), found: labels.len() });
    }
    for (i, l) in labels.iter().enumerate() {
        let v = tree.valence(i);
        if l.k() != v {
            return Err(Error::ArityMismatch { expected: v, found: l.k() });
        }
    }
    Ok(())
}

impl BarCell {
    /// Labels in the tree's depth-first order.
    pub fn new(tree: NestedTree, labels: Vec<CactusCell>) -> Result<Self> {
        check_labels(&tree, &labels)?;
        Ok(BarCell { tree, labels })
    }

    pub fn tree(&self) -> &NestedTree {
        &self.tree
    }

    pub fn labels(&self) -> &[CactusCell] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.tree.k()
    }

    pub fn dim(&self) -> usize {
        self.labels.iter().map(|l| l.dim()).sum::<usize>() + self.tree.edge_count()
    }

    /// The FM cell with every internal edge in `I₁`.
    pub fn to_fm(&self) -> FmCell {
        let mut i1 = vec![true; self.tree.len()];
        i1[0] = false;
        FmCell { tree: self.tree.clone(), labels: self.labels.clone(), i1 }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let (tree, markers, labels) = parse_cell_text(s)?;
        if !markers.is_empty() {
            return Err(Error::Parse("bar cells carry no edge markers".into()));
        }
        BarCell::new(tree, labels)
    }
}

impl FmCell {
    /// `i1` is indexed like the tree's vertices; the root entry is ignored.
    pub fn new(tree: NestedTree, labels: Vec<CactusCell>, mut i1: Vec<bool>) -> Result<Self> {
        check_labels(&tree, &labels)?;
        if i1.len() != tree.len() {
            return Err(Error::ArityMismatch { expected: tree.len(), found: i1.len() });
        }
        i1[0] = false;
        Ok(FmCell { tree, labels, i1 })
    }

    pub fn tree(&self) -> &NestedTree {
        &self.tree
    }

    pub fn labels(&self) -> &[CactusCell] {
        &self.labels
    }

    pub fn i1(&self) -> &[bool] {
        &self.i1
    }

    pub fn k(&self) -> usize {
        self.tree.k()
    }

    pub fn dim(&self) -> usize {
        self.labels.iter().map(|l| l.dim()).sum::<usize>() + self.i1.iter().filter(|&&b| b).count()
    }

    /// `Some` when every internal edge is in `I₁`.
    pub fn to_bar(&self) -> Option<BarCell> {
        self.i1[1..]
            .iter()
            .all(|&b| b)
            .then(|| BarCell { tree: self.tree.clone(), labels: self.labels.clone() })
    }

    pub fn parse(s: &str) -> Result<Self> {
        let (tree, markers, labels) = parse_cell_text(s)?;
        let mut i1 = vec![false; tree.len()];
        for i in 1..tree.len() {
            i1[i] = *markers
                .get(&tree.vertex(i))
                .ok_or_else(|| Error::Parse(format!("edge above {} has no marker", mask_name(tree.vertex(i), tree.k()))))?;
        }
        FmCell::new(tree, labels, i1)
    }
}

fn write_cell(f: &mut fmt::Formatter<'_>, tree: &NestedTree, labels: &[CactusCell], i1: Option<&[bool]>) -> fmt::Result {
    let marker = |j: usize| i1.map(|v| v[j]);
    write!(f, "{} : ", tree.render(&marker))?;
    for (i, l) in labels.iter().enumerate() {
        if i > 0 {
            f.write_str(" ; ")?;
        }
        if i == 0 {
            write!(f, "root={l}")?;
        } else {
            write!(f, "v{}={l}", mask_name(tree.vertex(i), tree.k()))?;
        }
    }
    Ok(())
}

impl fmt::Display for BarCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_cell(f, &self.tree, &self.labels, None)
    }
}

impl fmt::Display for FmCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_cell(f, &self.tree, &self.labels, Some(&self.i1))
    }
}

type ParsedCell = (NestedTree, HashMap<Mask, bool>, Vec<CactusCell>);

fn parse_cell_text(s: &str) -> Result<ParsedCell> {
    let (tree_text, labels_text) = s.split_once(':').ok_or_else(|| Error::Parse("missing ':' after the tree".into()))?;
    let (tree, markers) = NestedTree::parse_with_markers(tree_text)?;
    let mut labels: Vec<Option<CactusCell>> = vec![None; tree.len()];
    for part in labels_text.split(';') {
        let (name, word) = part.split_once('=').ok_or_else(|| Error::Parse(format!("bad label {part:?}")))?;
        let name = name.trim();
        let idx = if name == "root" {
            0
        } else {
            let inner = name
                .strip_prefix("v{")
                .and_then(|r| r.strip_suffix('}'))
                .ok_or_else(|| Error::Parse(format!("bad vertex name {name:?}")))?;
            let ls: Vec<usize> = if inner.contains(',') {
                inner.split(',').map(|x| x.trim().parse::<usize>()).collect::<std::result::Result<_, _>>()
            } else {
                inner.chars().map(|c| c.to_string().parse::<usize>()).collect::<std::result::Result<_, _>>()
            }
            .map_err(|_| Error::Parse(format!("bad vertex name {name:?}")))?;
            let m = ls.iter().fold(0, |acc, &l| acc | bit(l.max(1)));
            tree.index_of(m).ok_or_else(|| Error::Parse(format!("{name} is not a vertex")))?
        };
        let arity = tree.valence(idx);
        labels[idx] = Some(CactusCell::parse_with_arity(word.trim(), arity)?);
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::Parse(format!("vertex {} has no label", mask_name(tree.vertex(i), tree.k())))))
        .collect::<Result<Vec<_>>>()?;
    Ok((tree, markers, labels))
}

// ---------------------------------------------------------------------------
// Enumeration and counting

fn check_k(k: usize) -> Result<()> {
    if !(2..=MAX_LEAVES).contains(&k) {
        return Err(Error::InvalidTree(format!("arity {k} outside 2..={MAX_LEAVES}")));
    }
    Ok(())
}

fn poly_mul(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Per-tree dimension distributions of bar and FM cells, from the cacti
/// counts of each valence.
fn count_cells_by_tree(k: usize, fm: bool) -> Result<Vec<u64>> {
    check_k(k)?;
    if k > 8 {
        return Err(Error::ResourceLimit(format!("counting metatree cells for k = {k} exceeds the bound 8")));
    }
    let cacti_counts: Vec<Vec<u64>> = (0..=k).map(|r| if r == 0 { vec![] } else { cacti_core::count_cells(r).unwrap() }).collect();
    let mut total = vec![0u64; 2 * k - 2];
    for tree in enumerate_nested_trees(k)? {
        let mut dist = vec![1u64];
        for i in 0..tree.len() {
            dist = poly_mul(&dist, &cacti_counts[tree.valence(i)]);
        }
        let edge = if fm { [1u64, 1] } else { [0u64, 1] };
        for _ in 0..tree.edge_count() {
            dist = poly_mul(&dist, &edge);
        }
        for (d, c) in dist.into_iter().enumerate() {
            if c > 0 {
                total[d] += c;
            }
        }
    }
    while total.last() == Some(&0) {
        total.pop();
    }
    Ok(total)
}

/// Bar cells per dimension.
pub fn count_bar_cells(k: usize) -> Result<Vec<u64>> {
    count_cells_by_tree(k, false)
}

/// FM cells per dimension.
pub fn count_fm_cells(k: usize) -> Result<Vec<u64>> {
    count_cells_by_tree(k, true)
}

fn for_each_labelling(tree: &NestedTree, catalog: &CactiCatalog, f: &mut dyn FnMut(Vec<CactusCell>)) {
    let choices: Vec<&[CactusCell]> = (0..tree.len()).map(|i| catalog.cells(tree.valence(i))).collect();
    let mut idx = vec![0usize; tree.len()];
    loop {
        f(idx.iter().zip(&choices).map(|(&i, c)| c[i].clone()).collect());
        let mut p = tree.len();
        loop {
            if p == 0 {
                return;
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < choices[p].len() {
                break;
            }
            idx[p] = 0;
        }
    }
}

fn check_limit(counts: &[u64], limit: u64, what: &str, k: usize) -> Result<()> {
    let total: u64 = counts.iter().sum();
    if total > limit {
        return Err(Error::ResourceLimit(format!("{what}({k}) has {total} cells, limit is {limit}")));
    }
    Ok(())
}

/// Bar cells grouped by dimension, trees in sorted order, labels lexicographic.
pub fn enumerate_bar_cells_with_limit(k: usize, limit: u64) -> Result<Vec<Vec<BarCell>>> {
    let counts = count_bar_cells(k)?;
    check_limit(&counts, limit, "bar", k)?;
    let catalog = CactiCatalog::new(k)?;
    let trees = enumerate_nested_trees(k)?;
    let parts: Vec<Vec<BarCell>> = trees
        .par_iter()
        .map(|t| {
            let mut out = Vec::new();
            for_each_labelling(t, &catalog, &mut |labels| out.push(BarCell { tree: t.clone(), labels }));
            out
        })
        .collect();
    let mut by_dim = vec![Vec::new(); counts.len()];
    for c in parts.into_iter().flatten() {
        let d = c.dim();
        by_dim[d].push(c);
    }
    Ok(by_dim)
}

pub fn enumerate_bar_cells(k: usize) -> Result<Vec<Vec<BarCell>>> {
    enumerate_bar_cells_with_limit(k, DEFAULT_CELL_LIMIT)
}

/// FM cells grouped by dimension; per tree and labelling the edge markings
/// run through all subsets with `I₁` edges counted in binary.
pub fn enumerate_fm_cells_with_limit(k: usize, limit: u64) -> Result<Vec<Vec<FmCell>>> {
    let counts = count_fm_cells(k)?;
    check_limit(&counts, limit, "FM", k)?;
    let catalog = CactiCatalog::new(k)?;
    let trees = enumerate_nested_trees(k)?;
    let parts: Vec<Vec<FmCell>> = trees
        .par_iter()
        .map(|t| {
            let mut out = Vec::new();
            let e = t.edge_count();
            for_each_labelling(t, &catalog, &mut |labels| {
                for bits in 0u32..(1 << e) {
                    let mut i1 = vec![false; t.len()];
                    for (j, flag) in i1.iter_mut().enumerate().skip(1) {
                        *flag = bits & (1 << (j - 1)) != 0;
                    }
                    out.push(FmCell { tree: t.clone(), labels: labels.clone(), i1 });
                }
            });
            out
        })
        .collect();
    let mut by_dim = vec![Vec::new(); counts.len()];
    for c in parts.into_iter().flatten() {
        let d = c.dim();
        by_dim[d].push(c);
    }
    Ok(by_dim)
}

pub fn enumerate_fm_cells(k: usize) -> Result<Vec<Vec<FmCell>>> {
    enumerate_fm_cells_with_limit(k, DEFAULT_CELL_LIMIT)
}

// ---------------------------------------------------------------------------
// Signed chains and orientation

/// Integer combination of cells without zero coefficients.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SignedChain<C: Ord> {
    terms: BTreeMap<C, i64>,
}

impl<C: Ord> Default for SignedChain<C> {
    fn default() -> Self {
        SignedChain { terms: BTreeMap::new() }
    }
}

impl<C: Ord + Clone> SignedChain<C> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, c: C, coeff: i64) {
        if coeff == 0 {
            return;
        }
        let e = self.terms.entry(c.clone()).or_insert(0);
        *e += coeff;
        if *e == 0 {
            self.terms.remove(&c);
        }
    }

    pub fn add_chain(&mut self, other: &SignedChain<C>, scale: i64) {
        for (c, &v) in &other.terms {
            self.add(c.clone(), v * scale);
        }
    }

    pub fn coeff(&self, c: &C) -> i64 {
        self.terms.get(c).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&C, i64)> {
        self.terms.iter().map(|(c, &v)| (c, v))
    }

    pub fn into_terms(self) -> Vec<(i64, C)> {
        self.terms.into_iter().map(|(c, v)| (v, c)).collect()
    }
}

impl<C: Ord + Clone> FromIterator<(i64, C)> for SignedChain<C> {
    fn from_iter<I: IntoIterator<Item = (i64, C)>>(iter: I) -> Self {
        let mut s = SignedChain::new();
        for (v, c) in iter {
            s.add(c, v);
        }
        s
    }
}

impl<C: Ord + fmt::Display> fmt::Display for SignedChain<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (c, v)) in self.terms.iter().enumerate() {
            let sign = if *v < 0 { "-" } else if i > 0 { "+" } else { "" };
            let mag = v.abs();
            if i > 0 {
                f.write_str(" ")?;
            }
            if mag == 1 {
                write!(f, "{sign}[{c}]")?;
            } else {
                write!(f, "{sign}{mag}[{c}]")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Factor {
    Edge(Mask),
    Label(Mask),
}

fn factor_list(tree: &NestedTree, labels: &[CactusCell], i1: &[bool]) -> Vec<(Factor, usize)> {
    let mut out = Vec::with_capacity(2 * tree.len());
    for i in 0..tree.len() {
        if i1[i] {
            out.push((Factor::Edge(tree.vertex(i)), 1));
        }
        out.push((Factor::Label(tree.vertex(i)), labels[i].dim()));
    }
    out
}

fn parity_sign(p: usize) -> i64 {
    if p % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Sign of reordering graded factors from `current` into `target` order.
fn koszul(current: &[(Factor, usize)], target: &[(Factor, usize)]) -> i64 {
    let pos: Vec<usize> = current
        .iter()
        .map(|(f, _)| target.iter().position(|(g, _)| g == f).expect("factor present in both orders"))
        .collect();
    let mut parity = 0;
    for a in 0..current.len() {
        for b in a + 1..current.len() {
            if pos[a] > pos[b] {
                parity += current[a].1 * current[b].1;
            }
        }
    }
    parity_sign(parity)
}

fn prefix_dim(list: &[(Factor, usize)], f: Factor) -> usize {
    list.iter().take_while(|(g, _)| *g != f).map(|(_, d)| d).sum()
}

/// Rebuilds a cell from per-mask data on a new family.
fn rebuild(k: usize, masks: &[Mask], labels: &HashMap<Mask, CactusCell>, i1: &HashMap<Mask, bool>) -> FmCell {
    let tree = NestedTree::canonical(k, masks);
    let labels = tree.vertices.iter().map(|m| labels[m].clone()).collect();
    let flags = tree.vertices.iter().enumerate().map(|(i, m)| i != 0 && i1[m]).collect();
    FmCell { tree, labels, i1: flags }
}

/// Contraction of the edge above vertex `v`: the labels of `v` and its
/// parent are replaced by each cell of their composite. Signs relative to
/// the face `λ_v = 1` of the edge factor.
fn contract_edge(c: &FmCell, v: usize) -> Vec<(i64, FmCell)> {
    let tree = &c.tree;
    let u = tree.parent(v).expect("non-root");
    let u_inputs = tree.inputs(u);
    let slot = u_inputs.iter().position(|&x| x == Input::Vertex(v)).unwrap() + 1;
    let v_inputs = tree.inputs(v);
    // lobe order of the composite, as least leaves of the inputs
    let mut lobe_min: Vec<usize> = Vec::new();
    for (j, &x) in u_inputs.iter().enumerate() {
        if j + 1 == slot {
            lobe_min.extend(v_inputs.iter().map(|&y| min_leaf(tree.input_mask(y))));
        } else {
            lobe_min.push(min_leaf(tree.input_mask(x)));
        }
    }
    let mut sorted = lobe_min.clone();
    sorted.sort_unstable();
    let rho = Permutation::new(lobe_min.iter().map(|m| sorted.iter().position(|s| s == m).unwrap() + 1).collect())
        .expect("distinct least leaves");

    let factors = factor_list(tree, &c.labels, &c.i1);
    let mu = tree.vertex(u);
    let mv = tree.vertex(v);
    let edge_sign = parity_sign(prefix_dim(&factors, Factor::Edge(mv)));
    // drop the edge, then move Label(v) next to Label(u)
    let without: Vec<(Factor, usize)> = factors.iter().copied().filter(|(f, _)| *f != Factor::Edge(mv)).collect();
    let iu = without.iter().position(|(f, _)| *f == Factor::Label(mu)).unwrap();
    let iv = without.iter().position(|(f, _)| *f == Factor::Label(mv)).unwrap();
    let dv = c.labels[v].dim();
    let between: usize = without[iu + 1..iv].iter().map(|(_, d)| d).sum();
    let move_sign = parity_sign(dv * between);
    let merged: Vec<(Factor, usize)> = without
        .iter()
        .filter(|(f, _)| *f != Factor::Label(mv))
        .map(|&(f, d)| if f == Factor::Label(mu) { (f, d + dv) } else { (f, d) })
        .collect();

    let masks: Vec<Mask> = tree.vertices.iter().copied().filter(|&m| m != mv).collect();
    let mut label_map: HashMap<Mask, CactusCell> = HashMap::new();
    let mut i1_map: HashMap<Mask, bool> = HashMap::new();
    for (i, &m) in tree.vertices.iter().enumerate() {
        if m != mv {
            label_map.insert(m, c.labels[i].clone());
            i1_map.insert(m, c.i1[i]);
        }
    }
    let mut out = Vec::new();
    for (s_f, f) in cacti_core::compose_signed(&c.labels[u], slot, &c.labels[v]).expect("valid slot") {
        let relabeled = f.relabel(&rho).expect("arity matches");
        let s_r = f.relabel_sign(&rho);
        label_map.insert(mu, relabeled);
        let cell = rebuild(tree.k, &masks, &label_map, &i1_map);
        let target = factor_list(&cell.tree, &cell.labels, &cell.i1);
        let sign = edge_sign * move_sign * s_f * s_r * koszul(&merged, &target);
        out.push((sign, cell));
    }
    out
}

/// Boundary of an FM cell: cacti faces at vertices, contraction of `I₁`
/// edges (`λ → 1`) and their move to `I₀` (`λ → 0`).
pub fn fm_differential(c: &FmCell) -> SignedChain<FmCell> {
    let mut out = SignedChain::new();
    let factors = factor_list(&c.tree, &c.labels, &c.i1);
    for (i, label) in c.labels.iter().enumerate() {
        let pre = parity_sign(prefix_dim(&factors, Factor::Label(c.tree.vertex(i))));
        for (s, face) in label.boundary() {
            let mut cell = c.clone();
            cell.labels[i] = face;
            out.add(cell, pre * s);
        }
    }
    for v in 1..c.tree.len() {
        if !c.i1[v] {
            continue;
        }
        let pre = parity_sign(prefix_dim(&factors, Factor::Edge(c.tree.vertex(v))));
        let mut cell = c.clone();
        cell.i1[v] = false;
        out.add(cell, -pre);
        for (s, cell) in contract_edge(c, v) {
            out.add(cell, s);
        }
    }
    out
}

/// Boundary in the open moduli space: faces and edge contractions.
pub fn bar_differential(c: &BarCell) -> SignedChain<BarCell> {
    fm_differential(&c.to_fm()).into_terms().into_iter().filter_map(|(s, f)| f.to_bar().map(|b| (s, b))).collect()
}

/// Grafts `b` into leaf `slot` of `a`; the new edge is in `I₀`.
/// Returns the orientation sign of the product `a × b` in the result.
pub fn fm_compose(a: &FmCell, slot: usize, b: &FmCell) -> Result<(i64, FmCell)> {
    let (k, l) = (a.k(), b.k());
    if slot == 0 || slot > k {
        return Err(Error::ArityMismatch { expected: k, found: slot });
    }
    let n = k + l - 1;
    if n > MAX_LEAVES {
        return Err(Error::ResourceLimit(format!("arity {n} exceeds {MAX_LEAVES}")));
    }
    let block: Mask = (full(l)) << (slot - 1);
    let map_a = |m: Mask| -> Mask {
        leaves(m).fold(0, |acc, j| {
            acc | if j < slot {
                bit(j)
            } else if j == slot {
                block
            } else {
                bit(j + l - 1)
            }
        })
    };
    let map_b = |m: Mask| m << (slot - 1);
    let mut masks = Vec::new();
    let mut labels = HashMap::new();
    let mut i1 = HashMap::new();
    let mut current = Vec::new();
    for (i, &m) in a.tree.vertices.iter().enumerate() {
        let mm = map_a(m);
        masks.push(mm);
        labels.insert(mm, a.labels[i].clone());
        i1.insert(mm, a.i1[i]);
    }
    for (f, d) in factor_list(&a.tree, &a.labels, &a.i1) {
        current.push((remap_factor(f, &map_a), d));
    }
    for (i, &m) in b.tree.vertices.iter().enumerate() {
        let mm = map_b(m);
        masks.push(mm);
        labels.insert(mm, b.labels[i].clone());
        i1.insert(mm, if i == 0 { false } else { b.i1[i] });
    }
    for (f, d) in factor_list(&b.tree, &b.labels, &b.i1) {
        current.push((remap_factor(f, &map_b), d));
    }
    let cell = rebuild(n, &masks, &labels, &i1);
    let target = factor_list(&cell.tree, &cell.labels, &cell.i1);
    Ok((koszul(&current, &target), cell))
}

fn remap_factor(f: Factor, map: &dyn Fn(Mask) -> Mask) -> Factor {
    match f {
        Factor::Edge(m) => Factor::Edge(map(m)),
        Factor::Label(m) => Factor::Label(map(m)),
    }
}

/// Leaf relabelling with its orientation sign: vertex labels are relabelled
/// by the induced permutation of their inputs.
pub fn relabel_fm_signed(c: &FmCell, perm: &Permutation) -> Result<(i64, FmCell)> {
    if perm.len() != c.k() {
        return Err(Error::ArityMismatch { expected: c.k(), found: perm.len() });
    }
    let tree = &c.tree;
    let mut masks = Vec::new();
    let mut labels = HashMap::new();
    let mut i1 = HashMap::new();
    let mut sign = 1;
    for i in 0..tree.len() {
        let mm = map_mask(tree.vertex(i), perm);
        let images: Vec<usize> = tree.inputs(i).iter().map(|&x| min_leaf(map_mask(tree.input_mask(x), perm))).collect();
        let mut sorted = images.clone();
        sorted.sort_unstable();
        let rho = Permutation::new(images.iter().map(|m| sorted.iter().position(|s| s == m).unwrap() + 1).collect())?;
        sign *= c.labels[i].relabel_sign(&rho);
        masks.push(mm);
        labels.insert(mm, c.labels[i].relabel(&rho)?);
        i1.insert(mm, c.i1[i]);
    }
    let current: Vec<(Factor, usize)> = factor_list(tree, &c.labels, &c.i1)
        .into_iter()
        .map(|(f, d)| (remap_factor(f, &|m| map_mask(m, perm)), d))
        .collect();
    let cell = rebuild(c.k(), &masks, &labels, &i1);
    let target = factor_list(&cell.tree, &cell.labels, &cell.i1);
    Ok((sign * koszul(&current, &target), cell))
}

pub fn relabel_fm(c: &FmCell, perm: &Permutation) -> Result<FmCell> {
    Ok(relabel_fm_signed(c, perm)?.1)
}

pub fn relabel_bar(c: &BarCell, perm: &Permutation) -> Result<BarCell> {
    Ok(relabel_fm(&c.to_fm(), perm)?.to_bar().expect("markers preserved"))
}

// ---------------------------------------------------------------------------
// Two-level form

/// An FM cell as an `I₀` tree whose vertices carry bar cells.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TwoLevelCell {
    pub outer: NestedTree,
    /// One bar cell per outer vertex, in the outer depth-first order; its
    /// leaves are the inputs of that outer vertex.
    pub inner: Vec<BarCell>,
}

impl FmCell {
    pub fn to_two_level(&self) -> TwoLevelCell {
        let tree = &self.tree;
        let outer_masks: Vec<Mask> = (0..tree.len()).filter(|&i| !self.i1[i]).map(|i| tree.vertex(i)).collect();
        let outer = NestedTree::canonical(tree.k, &outer_masks);
        // nearest outer vertex at or above each vertex
        let mut owner = vec![0usize; tree.len()];
        for i in 1..tree.len() {
            owner[i] = if self.i1[i] { owner[tree.parent[i]] } else { i };
        }
        let mut inner = Vec::with_capacity(outer.len());
        for oi in 0..outer.len() {
            let om = outer.vertex(oi);
            let oinputs: Vec<Mask> = outer.inputs(oi).iter().map(|&x| outer.input_mask(x)).collect();
            let r = oinputs.len();
            let top = tree.index_of(om).unwrap();
            let members: Vec<usize> = (0..tree.len()).filter(|&i| owner[i] == top).collect();
            let masks: Vec<Mask> = members
                .iter()
                .map(|&i| {
                    let m = tree.vertex(i);
                    oinputs.iter().enumerate().filter(|(_, &x)| x & m == x).fold(0, |acc, (j, _)| acc | bit(j + 1))
                })
                .collect();
            let t = NestedTree::canonical(r, &masks);
            let labels = t
                .vertices
                .iter()
                .map(|m| self.labels[members[masks.iter().position(|x| x == m).unwrap()]].clone())
                .collect();
            inner.push(BarCell { tree: t, labels });
        }
        TwoLevelCell { outer, inner }
    }

    pub fn from_two_level(t: &TwoLevelCell) -> Result<FmCell> {
        if t.inner.len() != t.outer.len() {
            return Err(Error::ArityMismatch { expected: t.outer.len(), found: t.inner.len() });
        }
        let mut masks = Vec::new();
        let mut labels = HashMap::new();
        let mut i1 = HashMap::new();
        for (oi, bar) in t.inner.iter().enumerate() {
            let oinputs: Vec<Mask> = t.outer.inputs(oi).iter().map(|&x| t.outer.input_mask(x)).collect();
            if bar.k() != oinputs.len() {
                return Err(Error::ArityMismatch { expected: oinputs.len(), found: bar.k() });
            }
            for (j, &m) in bar.tree.vertices.iter().enumerate() {
                let big = leaves(m).fold(0, |acc, r| acc | oinputs[r - 1]);
                masks.push(big);
                labels.insert(big, bar.labels[j].clone());
                i1.insert(big, j != 0);
            }
        }
        Ok(rebuild(t.outer.k, &masks, &labels, &i1))
    }
}

// ---------------------------------------------------------------------------
// Points and weights

type Q = BigRational;

/// A point of an open bar cell.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BarPoint {
    pub cell: BarCell,
    pub vertex_points: Vec<CactusPoint>,
    /// `λ` per vertex in depth-first order; the root entry is one.
    pub edge_coords: Vec<Q>,
}

impl BarPoint {
    pub fn new(cell: BarCell, vertex_points: Vec<CactusPoint>, edge_coords: Vec<Q>) -> Result<Self> {
        let n = cell.tree.len();
        if vertex_points.len() != n || edge_coords.len() != n {
            return Err(Error::ArityMismatch { expected: n, found: vertex_points.len().min(edge_coords.len()) });
        }
        for (p, l) in vertex_points.iter().zip(&cell.labels) {
            if p.cell() != l {
                return Err(Error::InvalidCoordinates(format!("point of {} labels vertex {l}", p.cell())));
            }
        }
        for (i, x) in edge_coords.iter().enumerate() {
            let ok = if i == 0 { x.is_one() } else { x.is_positive() && *x <= Q::one() };
            if !ok {
                return Err(Error::InvalidCoordinates(format!("edge coordinate {x} outside (0,1]")));
            }
        }
        Ok(BarPoint { cell, vertex_points, edge_coords })
    }
}

impl fmt::Display for BarPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.cell)?;
        for (i, p) in self.vertex_points.iter().enumerate() {
            let name =
                if i == 0 { "root".to_string() } else { format!("v{}", mask_name(self.cell.tree.vertex(i), self.cell.k())) };
            write!(f, "  {name}: {p}")?;
            if i > 0 {
                write!(f, " lambda={}", self.edge_coords[i])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Positive rationals summing to one.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WeightVector {
    weights: Vec<Q>,
}

impl WeightVector {
    pub fn new(weights: Vec<Q>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_positive()) {
            return Err(Error::InvalidCoordinates("weights must be positive".into()));
        }
        let s: Q = weights.iter().sum();
        if !s.is_one() {
            return Err(Error::InvalidCoordinates(format!("weights sum to {s}")));
        }
        Ok(WeightVector { weights })
    }

    pub fn uniform(k: usize) -> Self {
        WeightVector { weights: vec![Q::new(1.into(), (k as i64).into()); k] }
    }

    pub fn weights(&self) -> &[Q] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_f64(&self) -> Vec<f64> {
        use num::ToPrimitive;
        self.weights.iter().map(|w| w.to_f64().unwrap()).collect()
    }
}

/// `(a_1, .., a_i b_1, .., a_i b_l, .., a_k)`.
pub fn simplex_compose(a: &WeightVector, slot: usize, b: &WeightVector) -> Result<WeightVector> {
    if slot == 0 || slot > a.len() {
        return Err(Error::ArityMismatch { expected: a.len(), found: slot });
    }
    let ai = &a.weights[slot - 1];
    let mut w: Vec<Q> = a.weights[..slot - 1].to_vec();
    w.extend(b.weights.iter().map(|x| ai * x));
    w.extend(a.weights[slot..].iter().cloned());
    Ok(WeightVector { weights: w })
}
