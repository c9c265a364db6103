//! Spineless cacti cells.
//!
//! A cell of `Cact(k)` is a word over `1..=k` that uses every letter, has no
//! adjacent repeats and avoids the pattern `a..b..a..b`. Its dimension is
//! `len - k`, and lobe `j` carries a simplex of dimension `count(j) - 1`.
//! A point of the open cell gives every letter occurrence a positive length,
//! the lengths of each lobe summing to one; the cactus path runs through the
//! arcs in word order.
//!
//! Orientation of a cell: local coordinates are the lengths of all
//! occurrences except the first one of each lobe, lobes in increasing order.

use std::fmt;

use num::{BigInt, BigRational, One, Signed, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type Q = BigRational;

/// Letters are stored in a `u32` bitmask during enumeration.
pub const MAX_ARITY: usize = 31;
/// Default bound on the number of cells a listing may materialise.
pub const DEFAULT_CELL_LIMIT: u64 = 2_000_000;

/// A word over `1..=k`, stored with `u8` letters.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct SurjWord {
    k: usize,
    letters: Vec<u8>,
}

impl SurjWord {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn letters(&self) -> &[u8] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

/// A cell of the cacti complex. Ordered lexicographically by letters.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct CactusCell {
    word: SurjWord,
    multidegree: Vec<u8>,
}

fn multidegree_of(k: usize, letters: &[u8]) -> Vec<u8> {
    let mut m = vec![0u8; k];
    for &l in letters {
        m[l as usize - 1] += 1;
    }
    for x in m.iter_mut() {
        *x -= 1;
    }
    m
}

/// First occurrence of `x..y..x..y` in scan order, as 0-based positions.
fn find_interleaving(letters: &[u8], k: usize) -> Option<(usize, usize, usize, usize)> {
    let mut occ: Vec<Vec<usize>> = vec![Vec::new(); k + 1];
    for (p, &l) in letters.iter().enumerate() {
        occ[l as usize].push(p);
    }
    for c in 0..letters.len() {
        let x = letters[c] as usize;
        let a = occ[x][0];
        if a >= c {
            continue;
        }
        for d in c + 1..letters.len() {
            let y = letters[d] as usize;
            if y == x {
                continue;
            }
            // first occurrence of y after a
            let i = occ[y].partition_point(|&q| q <= a);
            if i < occ[y].len() && occ[y][i] < c {
                return Some((a, occ[y][i], c, d));
            }
        }
    }
    None
}

impl CactusCell {
    /// Validates `letters` (1-based) as a cell of arity `k`.
    pub fn new(k: usize, letters: &[usize]) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::EmptyWord);
        }
        if k == 0 || k > MAX_ARITY {
            return Err(Error::ResourceLimit(format!("arity {k} outside 1..={MAX_ARITY}")));
        }
        for &l in letters {
            if l == 0 || l > k {
                return Err(Error::LetterOutOfRange { letter: l, k });
            }
        }
        for p in 0..letters.len() - 1 {
            if letters[p] == letters[p + 1] {
                return Err(Error::AdjacentRepeat { letter: letters[p], pos: p + 1 });
            }
        }
        let mut seen = vec![false; k + 1];
        for &l in letters {
            seen[l] = true;
        }
        if let Some(missing) = (1..=k).find(|&j| !seen[j]) {
            return Err(Error::NotSurjective { missing });
        }
        let bytes: Vec<u8> = letters.iter().map(|&l| l as u8).collect();
        if let Some((a, b, c, d)) = find_interleaving(&bytes, k) {
            return Err(Error::ComplexityViolation { positions: (a + 1, b + 1, c + 1, d + 1) });
        }
        Ok(Self::from_raw(k, bytes))
    }

    /// Trusted constructor for words already known to be valid.
    pub(crate) fn from_raw(k: usize, letters: Vec<u8>) -> Self {
        debug_assert!(!letters.is_empty());
        let multidegree = multidegree_of(k, &letters);
        CactusCell { word: SurjWord { k, letters }, multidegree }
    }

    /// Parses `"1,2,1"` or the compact form `"121"`; the arity is the largest letter.
    pub fn parse(s: &str) -> Result<Self> {
        let letters = parse_letters(s)?;
        let k = letters.iter().copied().max().unwrap_or(0);
        Self::new(k, &letters)
    }

    pub fn parse_with_arity(s: &str, k: usize) -> Result<Self> {
        Self::new(k, &parse_letters(s)?)
    }

    /// The single cell of arity one.
    pub fn unit() -> Self {
        Self::from_raw(1, vec![1])
    }

    /// The identity-ordered 0-cell `12..k`.
    pub fn identity(k: usize) -> Self {
        Self::from_raw(k, (1..=k as u8).collect())
    }

    pub fn word(&self) -> &SurjWord {
        &self.word
    }

    pub fn letters(&self) -> &[u8] {
        &self.word.letters
    }

    pub fn letter(&self, pos: usize) -> usize {
        self.word.letters[pos] as usize
    }

    pub fn k(&self) -> usize {
        self.word.k
    }

    pub fn len(&self) -> usize {
        self.word.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.len() - self.k()
    }

    pub fn multidegree(&self) -> &[u8] {
        &self.multidegree
    }

    /// Positions (0-based) of lobe `j`, in order.
    pub fn occurrences(&self, j: usize) -> Vec<usize> {
        self.letters().iter().enumerate().filter(|(_, &l)| l as usize == j).map(|(p, _)| p).collect()
    }

    /// Deletes occurrence `occurrence` (0-based) of lobe `lobe`.
    pub fn face(&self, lobe: usize, occurrence: usize) -> Result<CactusCell> {
        if lobe == 0 || lobe > self.k() {
            return Err(Error::LetterOutOfRange { letter: lobe, k: self.k() });
        }
        let m = self.multidegree[lobe - 1] as usize;
        if m == 0 {
            return Err(Error::FaceUndefined { lobe });
        }
        if occurrence > m {
            return Err(Error::OccurrenceOutOfRange { lobe, occurrence });
        }
        let pos = self.occurrences(lobe)[occurrence];
        let mut letters = self.letters().to_vec();
        letters.remove(pos);
        // Neighbours of a repeated lobe never coincide: x j x with j elsewhere interleaves.
        debug_assert!(pos == 0 || pos >= letters.len() || letters[pos - 1] != letters[pos]);
        Ok(Self::from_raw(self.k(), letters))
    }

    /// Sign of the face `(lobe, occurrence)` in the cellular boundary.
    pub fn face_sign(&self, lobe: usize, occurrence: usize) -> i64 {
        let before: usize = self.multidegree[..lobe - 1].iter().map(|&m| m as usize).sum();
        if (before + occurrence) % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// All codimension-one faces with signs, lobes ascending then occurrences.
    pub fn boundary(&self) -> Vec<(i64, CactusCell)> {
        let mut out = Vec::with_capacity(self.dim() + self.k());
        for j in 1..=self.k() {
            let m = self.multidegree[j - 1] as usize;
            if m == 0 {
                continue;
            }
            for i in 0..=m {
                out.push((self.face_sign(j, i), self.face(j, i).expect("face of repeated lobe")));
            }
        }
        out
    }

    /// Letterwise image under `perm`.
    pub fn relabel(&self, perm: &Permutation) -> Result<CactusCell> {
        if perm.len() != self.k() {
            return Err(Error::ArityMismatch { expected: self.k(), found: perm.len() });
        }
        let letters = self.letters().iter().map(|&l| perm.apply(l as usize) as u8).collect();
        Ok(Self::from_raw(self.k(), letters))
    }

    /// Orientation sign of `relabel` on chains: the Koszul sign of permuting
    /// lobe coordinate blocks into the new lobe order.
    pub fn relabel_sign(&self, perm: &Permutation) -> i64 {
        let k = self.k();
        let mut parity = 0usize;
        for a in 0..k {
            for b in a + 1..k {
                if perm.apply(a + 1) > perm.apply(b + 1) {
                    parity += self.multidegree[a] as usize * self.multidegree[b] as usize;
                }
            }
        }
        if parity % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// Concatenation with `g` shifted by `k`.
    pub fn star(&self, g: &CactusCell) -> CactusCell {
        let k = self.k();
        let mut letters = self.letters().to_vec();
        letters.extend(g.letters().iter().map(|&l| l + k as u8));
        Self::from_raw(k + g.k(), letters)
    }

    /// Comma-separated text form, valid for every arity.
    pub fn to_comma_string(&self) -> String {
        self.letters().iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")
    }
}

impl fmt::Display for CactusCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.k() <= 9 {
            for &l in self.letters() {
                write!(f, "{l}")?;
            }
            Ok(())
        } else {
            f.write_str(&self.to_comma_string())
        }
    }
}

fn parse_letters(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::EmptyWord);
    }
    if s.contains(',') {
        s.split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad letter {t:?}"))))
            .collect()
    } else {
        s.chars()
            .map(|c| c.to_digit(10).map(|d| d as usize).ok_or_else(|| Error::Parse(format!("bad letter {c:?}"))))
            .collect()
    }
}

/// A bijection of `{1..n}` given by its images.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut hit = vec![false; n + 1];
        for &x in &images {
            if x == 0 || x > n || hit[x] {
                return Err(Error::NotAPermutation(format!("{images:?}")));
            }
            hit[x] = true;
        }
        Ok(Permutation { images })
    }

    pub fn identity(n: usize) -> Self {
        Permutation { images: (1..=n).collect() }
    }

    /// The transposition of `a` and `b` in `S_n`.
    pub fn transposition(n: usize, a: usize, b: usize) -> Self {
        let mut p = Self::identity(n);
        p.images.swap(a - 1, b - 1);
        p
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn apply(&self, i: usize) -> usize {
        self.images[i - 1]
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        Permutation { images: other.images.iter().map(|&i| self.apply(i)).collect() }
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (i, &x) in self.images.iter().enumerate() {
            inv[x - 1] = i + 1;
        }
        Permutation { images: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &x)| x == i + 1)
    }

    /// All permutations of `{1..n}` in lexicographic order.
    pub fn all(n: usize) -> Vec<Permutation> {
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (1..=n).collect();
        loop {
            out.push(Permutation { images: cur.clone() });
            // next lexicographic permutation
            let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else { break };
            let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
            cur.swap(i - 1, j);
            cur[i..].reverse();
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Enumeration

#[derive(Clone, Copy)]
struct DsState {
    /// after[x]: letters y with `x..y` already in the word.
    after: [u32; MAX_ARITY + 1],
    /// Letters whose next occurrence would close `x..y..x..y`.
    forbid: u32,
    seen: u32,
    last: u8,
    len: usize,
}

impl DsState {
    fn new() -> Self {
        DsState { after: [0; MAX_ARITY + 1], forbid: 0, seen: 0, last: 0, len: 0 }
    }

    fn allows(&self, z: usize) -> bool {
        z as u8 != self.last && self.forbid & (1 << z) == 0
    }

    fn push(&self, z: usize) -> DsState {
        let mut s = *self;
        s.forbid |= self.after[z];
        let mut rest = self.seen & !(1 << z);
        while rest != 0 {
            let x = rest.trailing_zeros() as usize;
            s.after[x] |= 1 << z;
            rest &= rest - 1;
        }
        s.seen |= 1 << z;
        s.last = z as u8;
        s.len += 1;
        s
    }
}

fn full_mask(k: usize) -> u32 {
    ((1u64 << (k + 1)) - 2) as u32
}

fn dfs_all(k: usize, word: &mut Vec<u8>, st: &DsState, visit: &mut dyn FnMut(&[u8])) {
    if st.seen == full_mask(k) {
        visit(word);
    }
    let unseen = k - st.seen.count_ones() as usize;
    for z in 1..=k {
        if !st.allows(z) {
            continue;
        }
        let new_unseen = unseen - usize::from(st.seen & (1 << z) == 0);
        if st.len + 1 + new_unseen > 2 * k - 1 {
            continue;
        }
        word.push(z as u8);
        dfs_all(k, word, &st.push(z), visit);
        word.pop();
    }
}

/// Words whose letters first appear in the order `1, 2, .., k`. Every
/// `S_k`-orbit of cells contains exactly one of them.
fn dfs_normal(k: usize, st: &DsState, counts: &mut [u64]) {
    let nseen = st.seen.count_ones() as usize;
    if nseen == k {
        counts[st.len - k] += 1;
    }
    let top = (nseen + 1).min(k);
    for z in 1..=top {
        if !st.allows(z) {
            continue;
        }
        let new_unseen = k - nseen - usize::from(z == nseen + 1);
        if st.len + 1 + new_unseen > 2 * k - 1 {
            continue;
        }
        dfs_normal(k, &st.push(z), counts);
    }
}

fn check_arity(k: usize) -> Result<()> {
    if k == 0 || k > MAX_ARITY {
        return Err(Error::ResourceLimit(format!("arity {k} outside 1..={MAX_ARITY}")));
    }
    Ok(())
}

/// Cells per dimension of `Cact(k)`, counted over one representative per
/// `S_k`-orbit. Runs comfortably up to `k = 10`.
pub fn count_cells(k: usize) -> Result<Vec<u64>> {
    check_arity(k)?;
    if k > 12 {
        return Err(Error::ResourceLimit(format!("counting cells for k = {k} exceeds the bound 12")));
    }
    let mut counts = vec![0u64; k];
    dfs_normal(k, &DsState::new(), &mut counts);
    let fact: u64 = (1..=k as u64).product();
    Ok(counts.into_iter().map(|c| c * fact).collect())
}

/// Visits every cell word of arity `k` in lexicographic order.
pub fn for_each_cell_word(k: usize, mut visit: impl FnMut(&[u8])) -> Result<()> {
    check_arity(k)?;
    let mut word = Vec::with_capacity(2 * k);
    dfs_all(k, &mut word, &DsState::new(), &mut visit);
    Ok(())
}

/// All cells of `Cact(k)` grouped by dimension, each group lexicographically
/// sorted. Fails if the total exceeds `limit`.
pub fn enumerate_cells_with_limit(k: usize, limit: u64) -> Result<Vec<Vec<CactusCell>>> {
    let total: u64 = count_cells(k)?.iter().sum();
    if total > limit {
        return Err(Error::ResourceLimit(format!("Cact({k}) has {total} cells, limit is {limit}")));
    }
    let prefixes: Vec<Vec<u8>> = if k == 1 {
        vec![vec![]]
    } else {
        (1..=k as u8).flat_map(|a| (1..=k as u8).filter(move |&b| b != a).map(move |b| vec![a, b])).collect()
    };
    let parts: Vec<Vec<CactusCell>> = prefixes
        .par_iter()
        .map(|prefix| {
            let mut st = DsState::new();
            for &z in prefix {
                st = st.push(z as usize);
            }
            let mut out = Vec::new();
            let mut word = prefix.clone();
            dfs_all(k, &mut word, &st, &mut |w| out.push(CactusCell::from_raw(k, w.to_vec())));
            out
        })
        .collect();
    let mut by_dim: Vec<Vec<CactusCell>> = vec![Vec::new(); k];
    for c in parts.into_iter().flatten() {
        let d = c.dim();
        by_dim[d].push(c);
    }
    Ok(by_dim)
}

pub fn enumerate_cells(k: usize) -> Result<Vec<Vec<CactusCell>>> {
    enumerate_cells_with_limit(k, DEFAULT_CELL_LIMIT)
}

// ---------------------------------------------------------------------------
// Decomposition and composition

/// The cell-level inverse of the structure map: `f ↦ (outer; inner_1..inner_k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub outer: CactusCell,
    pub inner: Vec<CactusCell>,
    /// Per position of the decomposed word: index of its run in `outer`.
    pub outer_pos: Vec<usize>,
    /// Per position: (block, index of its run in that block's inner word).
    pub inner_pos: Vec<(usize, usize)>,
}

impl Decomposition {
    /// Dimensions add, so the open cell of `f` maps onto an open product cell.
    pub fn is_top(&self, f: &CactusCell) -> bool {
        f.dim() == self.outer.dim() + self.inner.iter().map(|c| c.dim()).sum::<usize>()
    }
}

fn block_offsets(arities: &[usize]) -> Vec<usize> {
    let mut off = Vec::with_capacity(arities.len() + 1);
    let mut acc = 0;
    off.push(0);
    for &n in arities {
        acc += n;
        off.push(acc);
    }
    off
}

/// Collapses blocks; `None` unless every collapsed word is a valid cell.
pub fn decompose_any(f: &CactusCell, arities: &[usize]) -> Result<Option<Decomposition>> {
    let total: usize = arities.iter().sum();
    if total != f.k() {
        return Err(Error::ArityMismatch { expected: f.k(), found: total });
    }
    if arities.iter().any(|&n| n == 0) {
        return Err(Error::ArityMismatch { expected: f.k(), found: 0 });
    }
    let off = block_offsets(arities);
    let mut block_of = vec![0usize; f.k() + 1];
    for (j, w) in off.windows(2).enumerate() {
        for l in w[0] + 1..=w[1] {
            block_of[l] = j;
        }
    }
    let mut outer: Vec<usize> = Vec::new();
    let mut outer_pos = Vec::with_capacity(f.len());
    let mut inner: Vec<Vec<usize>> = vec![Vec::new(); arities.len()];
    let mut inner_pos = Vec::with_capacity(f.len());
    for &l in f.letters() {
        let l = l as usize;
        let b = block_of[l];
        if outer.last() != Some(&(b + 1)) {
            outer.push(b + 1);
        }
        outer_pos.push(outer.len() - 1);
        let local = l - off[b];
        if inner[b].last() != Some(&local) {
            inner[b].push(local);
        }
        inner_pos.push((b, inner[b].len() - 1));
    }
    let Ok(outer) = CactusCell::new(arities.len(), &outer) else { return Ok(None) };
    let mut inner_cells = Vec::with_capacity(arities.len());
    for (b, w) in inner.iter().enumerate() {
        match CactusCell::new(arities[b], w) {
            Ok(c) => inner_cells.push(c),
            Err(_) => return Ok(None),
        }
    }
    Ok(Some(Decomposition { outer, inner: inner_cells, outer_pos, inner_pos }))
}

/// Whether `f` meets the image of the structure map for these arities.
pub fn in_image(f: &CactusCell, arities: &[usize]) -> Result<bool> {
    Ok(decompose_any(f, arities)?.is_some())
}

/// Decomposition of a top cell of the image: `Some` exactly when the collapsed
/// words are cells and `dim f = dim outer + Σ dim inner`.
pub fn decompose(f: &CactusCell, arities: &[usize]) -> Result<Option<Decomposition>> {
    Ok(decompose_any(f, arities)?.filter(|d| d.is_top(f)))
}

/// Arities `(1,..,n at slot i,..,1)` of a partial composition.
pub fn partial_arities(k: usize, slot: usize, n: usize) -> Vec<usize> {
    (1..=k).map(|j| if j == slot { n } else { 1 }).collect()
}

/// All cells `f` with `decompose(f) = (g; 1,..,h,..,1)`.
///
/// The occurrences of `slot` in `g` are replaced by consecutive pieces of
/// `h` that share their boundary letters; the other letters shift up.
pub fn compose(g: &CactusCell, slot: usize, h: &CactusCell) -> Result<Vec<CactusCell>> {
    let k = g.k();
    if slot == 0 || slot > k {
        return Err(Error::LetterOutOfRange { letter: slot, k });
    }
    let n = h.k();
    if k + n - 1 > MAX_ARITY {
        return Err(Error::ResourceLimit(format!("arity {} exceeds {MAX_ARITY}", k + n - 1)));
    }
    let r = g.multidegree()[slot - 1] as usize + 1;
    let hl: Vec<u8> = h.letters().iter().map(|&l| l + (slot - 1) as u8).collect();
    let len = hl.len();
    let mut out = Vec::new();
    let mut cuts = vec![0usize; r + 1];
    cuts[r] = len - 1;
    fn rec(
        depth: usize,
        r: usize,
        cuts: &mut Vec<usize>,
        g: &CactusCell,
        slot: usize,
        n: usize,
        hl: &[u8],
        out: &mut Vec<CactusCell>,
    ) {
        if depth == r {
            let mut word: Vec<u8> = Vec::with_capacity(g.len() + hl.len());
            let mut piece = 0;
            for &l in g.letters() {
                let l = l as usize;
                if l == slot {
                    word.extend_from_slice(&hl[cuts[piece]..=cuts[piece + 1]]);
                    piece += 1;
                } else if l > slot {
                    word.push((l + n - 1) as u8);
                } else {
                    word.push(l as u8);
                }
            }
            let k = g.k() + n - 1;
            if find_interleaving(&word, k).is_none() {
                out.push(CactusCell::from_raw(k, word));
            }
            return;
        }
        let lo = cuts[depth - 1];
        for c in lo..hl.len() {
            cuts[depth] = c;
            rec(depth + 1, r, cuts, g, slot, n, hl, out);
        }
    }
    rec(1, r, &mut cuts, g, slot, n, &hl, &mut out);
    out.sort();
    out.dedup();
    Ok(out)
}

/// Local coordinate index sets: per lobe, the positions after the first.
fn local_positions(f: &CactusCell) -> Vec<(usize, usize)> {
    // (position, first position of its lobe)
    let mut first = vec![usize::MAX; f.k() + 1];
    for (p, &l) in f.letters().iter().enumerate() {
        if first[l as usize] == usize::MAX {
            first[l as usize] = p;
        }
    }
    let mut out = Vec::with_capacity(f.dim());
    for j in 1..=f.k() {
        for p in f.occurrences(j).into_iter().skip(1) {
            out.push((p, first[j]));
        }
    }
    out
}

fn det_sign(mut m: Vec<Vec<i128>>) -> i64 {
    // Fraction-free Bareiss elimination.
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut sign = 1i64;
    let mut prev = 1i128;
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| m[r][c] != 0) else { return 0 };
        if p != c {
            m.swap(p, c);
            sign = -sign;
        }
        for r in c + 1..n {
            for cc in c + 1..n {
                m[r][cc] = (m[r][cc] * m[c][c] - m[r][c] * m[c][cc]) / prev;
            }
            m[r][c] = 0;
        }
        prev = m[c][c];
    }
    sign * m[n - 1][n - 1].signum() as i64
}

/// Orientation sign of the structure map on the open cell of `f`, relative
/// to the product orientation `outer × inner_1 × .. × inner_k`.
pub fn composition_sign(f: &CactusCell, d: &Decomposition) -> i64 {
    let cols = local_positions(f);
    let mut rows: Vec<Vec<bool>> = Vec::with_capacity(f.dim());
    let class_rows = |cell: &CactusCell, member: &dyn Fn(usize, usize) -> bool, rows: &mut Vec<Vec<bool>>| {
        for (q, _) in local_positions(cell) {
            rows.push((0..f.len()).map(|p| member(p, q)).collect());
        }
    };
    class_rows(&d.outer, &|p, q| d.outer_pos[p] == q, &mut rows);
    for (b, inner) in d.inner.iter().enumerate() {
        class_rows(inner, &|p, q| d.inner_pos[p] == (b, q), &mut rows);
    }
    debug_assert_eq!(rows.len(), cols.len());
    let m: Vec<Vec<i128>> = rows
        .iter()
        .map(|row| cols.iter().map(|&(p, p0)| i128::from(row[p]) - i128::from(row[p0])).collect())
        .collect();
    let s = det_sign(m);
    debug_assert!(s != 0, "structure map degenerate on top cell {f}");
    s
}

/// Partial composition on cellular chains: `Σ ± f` over `compose(g, slot, h)`.
pub fn compose_signed(g: &CactusCell, slot: usize, h: &CactusCell) -> Result<Vec<(i64, CactusCell)>> {
    let arities = partial_arities(g.k(), slot, h.k());
    compose(g, slot, h)?
        .into_iter()
        .map(|f| {
            let d = decompose(&f, &arities)?.expect("composite decomposes");
            Ok((composition_sign(&f, &d), f))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Points

/// A point of a closed cell: one nonnegative length per letter position.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CactusPoint {
    cell: CactusCell,
    coords: Vec<Q>,
}

impl CactusPoint {
    pub fn new(cell: CactusCell, coords: Vec<Q>) -> Result<Self> {
        if coords.len() != cell.len() {
            return Err(Error::InvalidCoordinates(format!(
                "{} coordinates for a word of length {}",
                coords.len(),
                cell.len()
            )));
        }
        if coords.iter().any(|t| t.is_negative()) {
            return Err(Error::InvalidCoordinates("negative coordinate".into()));
        }
        let mut sums = vec![Q::zero(); cell.k()];
        for (p, t) in coords.iter().enumerate() {
            sums[cell.letter(p) - 1] += t;
        }
        if let Some(j) = sums.iter().position(|s| !s.is_one()) {
            return Err(Error::InvalidCoordinates(format!("lobe {} has total length {}", j + 1, sums[j])));
        }
        Ok(CactusPoint { cell, coords })
    }

    /// Point with every arc of lobe `j` of length `1/count(j)`.
    pub fn barycenter(cell: &CactusCell) -> Self {
        let coords = cell
            .letters()
            .iter()
            .map(|&l| Q::new(BigInt::one(), BigInt::from(cell.multidegree()[l as usize - 1] as i64 + 1)))
            .collect();
        CactusPoint { cell: cell.clone(), coords }
    }

    pub fn cell(&self) -> &CactusCell {
        &self.cell
    }

    pub fn coords(&self) -> &[Q] {
        &self.coords
    }

    pub fn is_interior(&self) -> bool {
        self.coords.iter().all(|t| t.is_positive())
    }

    /// The arcs `(lobe, length)` of the cactus path, in order.
    pub fn arcs(&self) -> Vec<(usize, Q)> {
        self.cell.letters().iter().map(|&l| l as usize).zip(self.coords.iter().cloned()).collect()
    }
}

impl fmt::Display for CactusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c: Vec<String> = self.coords.iter().map(|t| t.to_string()).collect();
        write!(f, "{} ({})", self.cell, c.join(","))
    }
}

/// Breakpoints `y_0 = 0 < .. < y_N = k` of the cactus path and the lobe
/// traversed on each segment.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CactusPath {
    pub breakpoints: Vec<Q>,
    pub lobes: Vec<usize>,
}

impl CactusPath {
    /// Position on each lobe (arc length from the lobe's start) at time `s`.
    pub fn eval(&self, s: &Q) -> Vec<Q> {
        let k = self.lobes.iter().copied().max().unwrap_or(0);
        let mut pos = vec![Q::zero(); k];
        for (r, &l) in self.lobes.iter().enumerate() {
            let (a, b) = (&self.breakpoints[r], &self.breakpoints[r + 1]);
            if s >= b {
                pos[l - 1] += b - a;
            } else if s > a {
                pos[l - 1] += s - a;
            }
        }
        pos
    }
}

pub fn cactus_path(p: &CactusPoint) -> CactusPath {
    let mut breakpoints = Vec::with_capacity(p.coords.len() + 1);
    let mut acc = Q::zero();
    breakpoints.push(acc.clone());
    for t in &p.coords {
        acc += t;
        breakpoints.push(acc.clone());
    }
    CactusPath { breakpoints, lobes: p.cell.letters().iter().map(|&l| l as usize).collect() }
}

/// The structure map on interior points: outer arcs of lobe `j` are dilated
/// by the arity of inner `j` and read off along that inner path.
pub fn compose_points(x: &CactusPoint, inners: &[CactusPoint]) -> Result<CactusPoint> {
    let k = x.cell.k();
    if inners.len() != k {
        return Err(Error::ArityMismatch { expected: k, found: inners.len() });
    }
    if !x.is_interior() || inners.iter().any(|p| !p.is_interior()) {
        return Err(Error::DegenerateCoordinate("zero coordinate in an input".into()));
    }
    let arities: Vec<usize> = inners.iter().map(|p| p.cell.k()).collect();
    let off = block_offsets(&arities);
    // Per inner: index of current segment and length already consumed in it.
    let mut seg = vec![0usize; k];
    let mut used: Vec<Q> = vec![Q::zero(); k];
    let mut letters: Vec<usize> = Vec::new();
    let mut coords: Vec<Q> = Vec::new();
    for (p, t) in x.coords.iter().enumerate() {
        let j = x.cell.letter(p) - 1;
        let inner = &inners[j];
        let mut remaining = t * Q::from_integer(BigInt::from(arities[j]));
        while remaining.is_positive() {
            let s = seg[j];
            let avail = &inner.coords[s] - &used[j];
            let take = if avail <= remaining { avail.clone() } else { remaining.clone() };
            let letter = off[j] + inner.cell.letter(s);
            if letters.last() == Some(&letter) {
                *coords.last_mut().unwrap() += &take;
            } else {
                letters.push(letter);
                coords.push(take.clone());
            }
            remaining -= &take;
            if take == avail {
                seg[j] += 1;
                used[j] = Q::zero();
            } else {
                used[j] += &take;
            }
        }
    }
    let total = off[k];
    let cell = CactusCell::new(total, &letters).map_err(|e| Error::DegenerateCoordinate(e.to_string()))?;
    if cell.dim() != x.cell.dim() + inners.iter().map(|p| p.cell.dim()).sum::<usize>() {
        return Err(Error::DegenerateCoordinate(format!("output {cell} lies on a lower-dimensional cell")));
    }
    CactusPoint::new(cell, coords)
}

/// Inverse of [`compose_points`] on top cells of the image:
/// outer lengths are `(1/n_j) Σ t` over each run, inner lengths `Σ t`.
pub fn decompose_point(p: &CactusPoint, arities: &[usize]) -> Result<Option<(CactusPoint, Vec<CactusPoint>)>> {
    let Some(d) = decompose(&p.cell, arities)? else { return Ok(None) };
    let mut outer = vec![Q::zero(); d.outer.len()];
    let mut inner: Vec<Vec<Q>> = d.inner.iter().map(|c| vec![Q::zero(); c.len()]).collect();
    for (pos, t) in p.coords.iter().enumerate() {
        outer[d.outer_pos[pos]] += t;
        let (b, q) = d.inner_pos[pos];
        inner[b][q] += t;
    }
    for (r, o) in outer.iter_mut().enumerate() {
        let n = arities[d.outer.letter(r) - 1];
        *o /= Q::from_integer(BigInt::from(n));
    }
    let outer = CactusPoint::new(d.outer.clone(), outer)?;
    let inners = d
        .inner
        .iter()
        .zip(inner)
        .map(|(c, t)| CactusPoint::new(c.clone(), t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Some((outer, inners)))
}

/// Cyclic arcs with the first and last arcs merged when they share a lobe,
/// plus the offset of the base point inside the first cyclic arc.
fn cyclic_arcs(p: &CactusPoint) -> (Vec<(usize, Q)>, Q) {
    let mut arcs = p.arcs();
    if arcs.len() > 1 && arcs[0].0 == arcs[arcs.len() - 1].0 {
        let (_, last) = arcs.pop().unwrap();
        arcs[0].1 += &last;
        (arcs, last)
    } else {
        (arcs, Q::zero())
    }
}

/// Cuts the cyclic path at absolute position `pos` (relative to the start
/// of the first cyclic arc). A cut on an arc boundary starts with the arc
/// about to be traversed.
fn cut_cyclic(k: usize, arcs: &[(usize, Q)], pos: &Q) -> Result<CactusPoint> {
    let mut start = Q::zero();
    for (a, (_, len)) in arcs.iter().enumerate() {
        let end = &start + len;
        if *pos < end {
            let into = pos - &start;
            let mut letters = vec![arcs[a].0];
            let mut coords = vec![len - &into];
            for (l, t) in arcs[a + 1..].iter().chain(arcs[..a].iter()) {
                letters.push(*l);
                coords.push(t.clone());
            }
            if into.is_positive() {
                letters.push(arcs[a].0);
                coords.push(into);
            }
            let cell = CactusCell::new(k, &letters)?;
            return CactusPoint::new(cell, coords);
        }
        start = end;
    }
    unreachable!("cut position beyond the path length")
}

/// Moves the base point forward by arc length `s` along the cactus path.
pub fn basepoint_shift(p: &CactusPoint, s: &Q) -> Result<CactusPoint> {
    let k = p.cell.k();
    let kq = Q::from_integer(BigInt::from(k));
    let (arcs, base) = cyclic_arcs(p);
    let mut pos = base + s;
    pos = &pos - (&pos / &kq).floor() * &kq;
    cut_cyclic(k, &arcs, &pos)
}

/// The representative of the base-point circle whose base point is the first
/// point of lobe 2 reached after lobe 1.
pub fn canonical_section(p: &CactusPoint) -> Result<CactusPoint> {
    let k = p.cell.k();
    if k < 2 {
        return Err(Error::ArityMismatch { expected: 2, found: k });
    }
    let (arcs, _) = cyclic_arcs(p);
    let n = arcs.len();
    let mut start = Q::zero();
    for a in 0..n {
        if arcs[a].0 == 2 {
            let prev = (1..n).map(|d| arcs[(a + n - d) % n].0).find(|&l| l <= 2).unwrap();
            if prev == 1 {
                return cut_cyclic(k, &arcs, &start);
            }
        }
        start += &arcs[a].1;
    }
    unreachable!("lobes 1 and 2 alternate at least once around the path")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn c(s: &str) -> CactusCell {
        CactusCell::parse(s).unwrap()
    }

    fn q(n: i64, d: i64) -> Q {
        Q::new(n.into(), d.into())
    }

    fn pt(s: &str, coords: &[(i64, i64)]) -> CactusPoint {
        CactusPoint::new(c(s), coords.iter().map(|&(n, d)| q(n, d)).collect()).unwrap()
    }

    /// Brute force: every word over 1..k of length ≤ 2k-1, filtered by the
    /// three defining conditions checked naively.
    fn brute_cells(k: usize) -> BTreeSet<Vec<u8>> {
        let mut out = BTreeSet::new();
        let mut word = Vec::new();
        fn naive_ok(w: &[u8], k: usize) -> bool {
            if w.windows(2).any(|p| p[0] == p[1]) {
                return false;
            }
            if (1..=k as u8).any(|j| !w.contains(&j)) {
                return false;
            }
            let n = w.len();
            for a in 0..n {
                for b in a + 1..n {
                    for cc in b + 1..n {
                        for d in cc + 1..n {
                            if w[a] == w[cc] && w[b] == w[d] && w[a] != w[b] {
                                return false;
                            }
                        }
                    }
                }
            }
            true
        }
        fn rec(k: usize, word: &mut Vec<u8>, out: &mut BTreeSet<Vec<u8>>) {
            if naive_ok(word, k) {
                out.insert(word.clone());
            }
            if word.len() == 2 * k - 1 {
                return;
            }
            for z in 1..=k as u8 {
                word.push(z);
                rec(k, word, out);
                word.pop();
            }
        }
        rec(k, &mut word, &mut out);
        out
    }

    #[test]
    fn validate_examples() {
        assert_eq!(CactusCell::parse_with_arity("1,2,1", 2).unwrap().dim(), 1);
        assert_eq!(CactusCell::parse_with_arity("1", 1).unwrap().dim(), 0);
        assert_eq!(
            CactusCell::parse_with_arity("1,2,1,2", 2),
            Err(Error::ComplexityViolation { positions: (1, 2, 3, 4) })
        );
        assert_eq!(CactusCell::parse_with_arity("1,1,2", 2), Err(Error::AdjacentRepeat { letter: 1, pos: 1 }));
        assert_eq!(CactusCell::parse_with_arity("1,2", 3), Err(Error::NotSurjective { missing: 3 }));
        assert_eq!(CactusCell::parse_with_arity("", 3), Err(Error::EmptyWord));
        assert_eq!(c("1213").multidegree(), &[1, 0, 0]);
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for k in 1..=4 {
            let listed: Vec<Vec<u8>> =
                enumerate_cells(k).unwrap().into_iter().flatten().map(|c| c.letters().to_vec()).collect();
            let brute: Vec<Vec<u8>> = brute_cells(k).into_iter().collect();
            let mut sorted = listed.clone();
            sorted.sort();
            assert_eq!(sorted, brute, "k={k}");
        }
    }

    #[test]
    fn enumeration_counts() {
        let dims = |k| enumerate_cells(k).unwrap().iter().map(|v| v.len() as u64).collect::<Vec<_>>();
        assert_eq!(dims(2), vec![2, 2]);
        assert_eq!(dims(3), vec![6, 18, 12]);
        assert_eq!(dims(4), vec![24, 144, 240, 120]);
        let k2: Vec<String> = enumerate_cells(2).unwrap().into_iter().flatten().map(|c| c.to_string()).collect();
        assert_eq!(k2, ["12", "21", "121", "212"]);
        for k in 1..=6 {
            assert_eq!(count_cells(k).unwrap(), dims(k), "k={k}");
        }
    }

    #[test]
    fn enumeration_is_sorted_within_dims() {
        for group in enumerate_cells(5).unwrap() {
            assert!(group.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn resource_limit() {
        assert!(matches!(enumerate_cells_with_limit(5, 100), Err(Error::ResourceLimit(_))));
        assert!(matches!(count_cells(40), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn face_examples() {
        assert_eq!(c("121").face(1, 0).unwrap(), c("21"));
        assert_eq!(c("121").face(1, 1).unwrap(), c("12"));
        assert_eq!(c("1231").face(1, 1).unwrap(), c("123"));
        assert_eq!(c("121").face(2, 0), Err(Error::FaceUndefined { lobe: 2 }));
        let b: Vec<(i64, String)> = c("121").boundary().into_iter().map(|(s, f)| (s, f.to_string())).collect();
        assert_eq!(b, [(1, "21".to_string()), (-1, "12".to_string())]);
    }

    #[test]
    fn boundary_squares_to_zero() {
        for k in 1..=5 {
            for cell in enumerate_cells(k).unwrap().into_iter().flatten() {
                let mut acc: std::collections::BTreeMap<CactusCell, i64> = Default::default();
                for (s, f) in cell.boundary() {
                    for (s2, g) in f.boundary() {
                        *acc.entry(g).or_default() += s * s2;
                    }
                }
                assert!(acc.values().all(|&v| v == 0), "d² ≠ 0 on {cell}");
            }
        }
    }

    #[test]
    fn semisimplicial_identities() {
        for cell in enumerate_cells(4).unwrap().into_iter().flatten() {
            for j in 1..=4 {
                let m = cell.multidegree()[j - 1] as usize;
                for i in 0..=m {
                    for i2 in i + 1..=m {
                        if m < 2 {
                            continue;
                        }
                        let lhs = cell.face(j, i2).unwrap().face(j, i).unwrap();
                        let rhs = cell.face(j, i).unwrap().face(j, i2 - 1).unwrap();
                        assert_eq!(lhs, rhs);
                    }
                }
                for j2 in j + 1..=4 {
                    let m2 = cell.multidegree()[j2 - 1] as usize;
                    if m == 0 || m2 == 0 {
                        continue;
                    }
                    for i in 0..=m {
                        for i2 in 0..=m2 {
                            let lhs = cell.face(j, i).unwrap().face(j2, i2).unwrap();
                            let rhs = cell.face(j2, i2).unwrap().face(j, i).unwrap();
                            assert_eq!(lhs, rhs);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn relabel_examples_and_free_action() {
        assert_eq!(c("123").relabel(&Permutation::identity(3)).unwrap(), c("123"));
        assert_eq!(c("121").relabel(&Permutation::transposition(2, 1, 2)).unwrap(), c("212"));
        let cyc = Permutation::new(vec![2, 3, 1]).unwrap();
        assert_eq!(c("1213").relabel(&cyc).unwrap(), c("2321"));
        assert!(matches!(c("12").relabel(&cyc), Err(Error::ArityMismatch { .. })));
        let perms = Permutation::all(4);
        assert_eq!(perms.len(), 24);
        for cell in enumerate_cells(4).unwrap().into_iter().flatten() {
            let orbit: BTreeSet<CactusCell> = perms.iter().map(|p| cell.relabel(p).unwrap()).collect();
            assert_eq!(orbit.len(), 24);
        }
    }

    #[test]
    fn relabel_commutes_with_boundary() {
        let perms = Permutation::all(3);
        for cell in enumerate_cells(3).unwrap().into_iter().flatten() {
            for p in &perms {
                let s = cell.relabel_sign(p);
                let mut lhs: std::collections::BTreeMap<CactusCell, i64> = Default::default();
                for (e, f) in cell.relabel(p).unwrap().boundary() {
                    *lhs.entry(f).or_default() += s * e;
                }
                let mut rhs: std::collections::BTreeMap<CactusCell, i64> = Default::default();
                for (e, f) in cell.boundary() {
                    *rhs.entry(f.relabel(p).unwrap()).or_default() += e * f.relabel_sign(p);
                }
                lhs.retain(|_, v| *v != 0);
                rhs.retain(|_, v| *v != 0);
                assert_eq!(lhs, rhs, "{cell} under {:?}", p.images());
            }
        }
    }

    #[test]
    fn star_examples() {
        assert_eq!(c("12").star(&c("12")), c("1234"));
        assert_eq!(c("121").star(&c("1")), c("1213"));
        let l = c("12").star(&c("21")).star(&c("1"));
        let r = c("12").star(&c("21").star(&c("1")));
        assert_eq!(l, r);
        assert_eq!(l, c("12435"));
    }

    #[test]
    fn decompose_examples() {
        let d = decompose(&c("123"), &[2, 1]).unwrap().unwrap();
        assert_eq!((d.outer, d.inner), (c("12"), vec![c("12"), c("1")]));
        let d = decompose(&c("1231"), &[1, 2]).unwrap().unwrap();
        assert_eq!((d.outer, d.inner), (c("121"), vec![c("1"), c("12")]));
        let d = decompose(&c("1213"), &[2, 1]).unwrap().unwrap();
        assert_eq!((d.outer, d.inner), (c("12"), vec![c("121"), c("1")]));
        // In the image, but only through a lower-dimensional product cell.
        assert!(in_image(&c("132"), &[2, 1]).unwrap());
        assert_eq!(decompose(&c("132"), &[2, 1]).unwrap(), None);
        // 2 1 2 3 2 collapses to 1 2 1 2 at the outer level.
        assert_eq!(decompose(&c("21232"), &[1, 1, 1]).unwrap().map(|d| d.outer), Some(c("21232")));
        assert_eq!(decompose(&c("13231"), &[2, 1]).unwrap(), None);
        assert!(matches!(decompose(&c("123"), &[2, 2]), Err(Error::ArityMismatch { .. })));
    }

    /// Oracle: all cells of arity `kg + kh - 1` grouped by their
    /// decomposition `(g; 1,..,h,..,1)` for a fixed slot.
    fn compose_by_filter(kg: usize, kh: usize, slot: usize) -> std::collections::BTreeMap<(CactusCell, CactusCell), Vec<CactusCell>> {
        let arities = partial_arities(kg, slot, kh);
        let mut out: std::collections::BTreeMap<(CactusCell, CactusCell), Vec<CactusCell>> = Default::default();
        for f in enumerate_cells(kg + kh - 1).unwrap().into_iter().flatten() {
            if let Some(d) = decompose(&f, &arities).unwrap() {
                out.entry((d.outer, d.inner[slot - 1].clone())).or_default().push(f);
            }
        }
        for v in out.values_mut() {
            v.sort();
        }
        out
    }

    #[test]
    fn compose_examples() {
        assert_eq!(compose(&c("12"), 1, &c("12")).unwrap(), vec![c("123")]);
        assert_eq!(compose(&c("21"), 1, &c("12")).unwrap(), vec![c("312")]);
        assert_eq!(compose(&c("121"), 2, &c("12")).unwrap(), vec![c("1231")]);
    }

    #[test]
    fn compose_matches_filter_oracle() {
        for kg in 1..=3 {
            for kh in 1..=3 {
                if kg + kh - 1 > 5 {
                    continue;
                }
                for slot in 1..=kg {
                    let oracle = compose_by_filter(kg, kh, slot);
                    for g in enumerate_cells(kg).unwrap().into_iter().flatten() {
                        for h in enumerate_cells(kh).unwrap().into_iter().flatten() {
                            let got = compose(&g, slot, &h).unwrap();
                            let want = oracle.get(&(g.clone(), h.clone())).cloned().unwrap_or_default();
                            assert_eq!(got, want, "{g} o{slot} {h}");
                            for f in &got {
                                assert_eq!(f.dim(), g.dim() + h.dim());
                            }
                        }
                    }
                }
            }
        }
    }

    type Chain = std::collections::BTreeMap<CactusCell, i64>;

    fn add(acc: &mut Chain, s: i64, f: CactusCell) {
        *acc.entry(f).or_default() += s;
    }

    fn clean(mut c: Chain) -> Chain {
        c.retain(|_, v| *v != 0);
        c
    }

    #[test]
    fn signed_compose_is_a_chain_map() {
        // d(g o_i h) = dg o_i h + (-1)^{|g|} g o_i dh
        for kg in 1..=3 {
            for kh in 1..=3 {
                for g in enumerate_cells(kg).unwrap().into_iter().flatten() {
                    for h in enumerate_cells(kh).unwrap().into_iter().flatten() {
                        for slot in 1..=kg {
                            let mut lhs = Chain::new();
                            for (s, f) in compose_signed(&g, slot, &h).unwrap() {
                                for (e, x) in f.boundary() {
                                    add(&mut lhs, s * e, x);
                                }
                            }
                            let mut rhs = Chain::new();
                            for (e, dg) in g.boundary() {
                                for (s, f) in compose_signed(&dg, slot, &h).unwrap() {
                                    add(&mut rhs, e * s, f);
                                }
                            }
                            let sg = if g.dim() % 2 == 0 { 1 } else { -1 };
                            for (e, dh) in h.boundary() {
                                for (s, f) in compose_signed(&g, slot, &dh).unwrap() {
                                    add(&mut rhs, sg * e * s, f);
                                }
                            }
                            assert_eq!(clean(lhs), clean(rhs), "{g} o{slot} {h}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn partial_compositions_commute_as_sets() {
        // (x o_i y) o_{j+n-1} z = (x o_j z) o_i y for i < j
        let cells = |k| enumerate_cells(k).unwrap().into_iter().flatten().collect::<Vec<_>>();
        for x in cells(2).into_iter().chain(cells(3)) {
            for y in cells(2) {
                for z in cells(2) {
                    let k = x.k();
                    for i in 1..=k {
                        for j in i + 1..=k {
                            let n = y.k();
                            let mut lhs = BTreeSet::new();
                            for a in compose(&x, i, &y).unwrap() {
                                lhs.extend(compose(&a, j + n - 1, &z).unwrap());
                            }
                            let mut rhs = BTreeSet::new();
                            for a in compose(&x, j, &z).unwrap() {
                                rhs.extend(compose(&a, i, &y).unwrap());
                            }
                            assert_eq!(lhs, rhs, "{x} {i} {j} {y} {z}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn path_examples() {
        let p = cactus_path(&pt("12", &[(1, 1), (1, 1)]));
        assert_eq!(p.breakpoints, vec![q(0, 1), q(1, 1), q(2, 1)]);
        assert_eq!(p.lobes, vec![1, 2]);
        let p = cactus_path(&pt("121", &[(1, 2), (1, 1), (1, 2)]));
        assert_eq!(p.breakpoints, vec![q(0, 1), q(1, 2), q(3, 2), q(2, 1)]);
        let p = cactus_path(&pt("1213", &[(1, 4), (1, 1), (3, 4), (1, 1)]));
        assert_eq!(p.breakpoints, vec![q(0, 1), q(1, 4), q(5, 4), q(2, 1), q(3, 1)]);
        assert_eq!(p.eval(&q(3, 2)), vec![q(1, 2), q(1, 1), q(0, 1)]);
    }

    #[test]
    fn compose_points_examples() {
        let out = compose_points(&pt("12", &[(1, 1), (1, 1)]), &[pt("12", &[(1, 1), (1, 1)]), pt("1", &[(1, 1)])]);
        assert_eq!(out.unwrap(), pt("123", &[(1, 1), (1, 1), (1, 1)]));
        let out = compose_points(&pt("121", &[(1, 2), (1, 1), (1, 2)]), &[pt("1", &[(1, 1)]), pt("12", &[(1, 1), (1, 1)])]);
        assert_eq!(out.unwrap(), pt("1231", &[(1, 2), (1, 1), (1, 1), (1, 2)]));
        // identity inners
        let x = pt("2131", &[(1, 1), (1, 3), (1, 1), (2, 3)]);
        let ids = vec![pt("1", &[(1, 1)]); 3];
        assert_eq!(compose_points(&x, &ids).unwrap(), x);
        // 121 with the dilated arc ending on an inner breakpoint
        let degenerate = compose_points(&pt("121", &[(1, 2), (1, 1), (1, 2)]), &[pt("12", &[(1, 1), (1, 1)]), pt("1", &[(1, 1)])]);
        assert!(matches!(degenerate, Err(Error::DegenerateCoordinate(_))));
    }

    #[test]
    fn shift_orbit_on_two_lobes() {
        let p = pt("12", &[(1, 1), (1, 1)]);
        let names: Vec<String> = [(0, 1), (1, 2), (1, 1), (3, 2)]
            .iter()
            .map(|&(n, d)| basepoint_shift(&p, &q(n, d)).unwrap().cell().to_string())
            .collect();
        assert_eq!(names, ["12", "121", "21", "212"]);
        assert_eq!(basepoint_shift(&p, &q(1, 2)).unwrap(), pt("121", &[(1, 2), (1, 1), (1, 2)]));
        assert_eq!(basepoint_shift(&p, &q(0, 1)).unwrap(), p);
        let s = canonical_section(&pt("212", &[(1, 4), (1, 1), (3, 4)])).unwrap();
        assert_eq!(s, pt("21", &[(1, 1), (1, 1)]));
    }

    fn arb_point(max_k: usize) -> impl Strategy<Value = CactusPoint> {
        (2..=max_k, any::<u64>(), proptest::collection::vec(1u32..20, 16)).prop_map(|(k, pick, w)| {
            let cells: Vec<CactusCell> = enumerate_cells(k).unwrap().into_iter().flatten().collect();
            let cell = cells[(pick % cells.len() as u64) as usize].clone();
            let mut coords = vec![Q::zero(); cell.len()];
            for j in 1..=k {
                let occ = cell.occurrences(j);
                let tot: u32 = occ.iter().map(|&p| w[p]).sum();
                for &p in &occ {
                    coords[p] = Q::new(w[p].into(), tot.into());
                }
            }
            CactusPoint::new(cell, coords).unwrap()
        })
    }

    proptest! {
        #[test]
        fn shift_is_an_action(p in arb_point(4), a in 0u32..40, b in 0u32..40) {
            let k = p.cell().k() as i64;
            let sa = Q::new(a.into(), 10.into());
            let sb = Q::new(b.into(), 10.into());
            let lhs = basepoint_shift(&basepoint_shift(&p, &sa).unwrap(), &sb).unwrap();
            let mut tot = &sa + &sb;
            let kq = Q::from_integer(k.into());
            tot = &tot - (&tot / &kq).floor() * &kq;
            prop_assert_eq!(&lhs, &basepoint_shift(&p, &tot).unwrap());
            prop_assert_eq!(&basepoint_shift(&p, &kq).unwrap(), &basepoint_shift(&p, &Q::zero()).unwrap());
        }

        #[test]
        fn section_is_shift_invariant_and_idempotent(p in arb_point(4), a in 0u32..40) {
            let s = canonical_section(&p).unwrap();
            prop_assert_eq!(&canonical_section(&s).unwrap(), &s);
            let shifted = basepoint_shift(&p, &Q::new(a.into(), 10.into())).unwrap();
            prop_assert_eq!(&canonical_section(&shifted).unwrap(), &s);
        }

        #[test]
        fn decompose_inverts_compose_points(x in arb_point(3), y in arb_point(3), slot in 1usize..=3) {
            let k = x.cell().k();
            let slot = (slot - 1) % k + 1;
            let mut inners = vec![CactusPoint::barycenter(&CactusCell::unit()); k];
            inners[slot - 1] = y.clone();
            match compose_points(&x, &inners) {
                Ok(f) => {
                    let arities: Vec<usize> = inners.iter().map(|p| p.cell().k()).collect();
                    let (o, ins) = decompose_point(&f, &arities).unwrap().unwrap();
                    prop_assert_eq!(&o, &x);
                    prop_assert_eq!(&ins, &inners);
                    let cells = compose(x.cell(), slot, y.cell()).unwrap();
                    prop_assert!(cells.contains(f.cell()));
                }
                Err(Error::DegenerateCoordinate(_)) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }

        #[test]
        fn dims_behave(p in arb_point(5), perm_seed in any::<u64>()) {
            let cell = p.cell();
            let perms = Permutation::all(cell.k());
            let perm = &perms[(perm_seed % perms.len() as u64) as usize];
            prop_assert_eq!(cell.relabel(perm).unwrap().dim(), cell.dim());
            for (_, f) in cell.boundary() {
                prop_assert_eq!(f.dim() + 1, cell.dim());
            }
            prop_assert_eq!(cell.star(cell).dim(), 2 * cell.dim());
        }
    }
}
