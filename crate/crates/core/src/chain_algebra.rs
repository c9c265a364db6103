//! Integer chain complexes: sparse boundary matrices, Smith normal form,
//! integral homology and the `d∘d = 0` check.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::Hash;

use num::{BigInt, Integer, One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Dense residual blocks larger than this many entries are refused.
pub const MAX_DENSE_ENTRIES: usize = 16_000_000;

/// Sparse integer matrix in coordinate form, sorted by `(row, col)`,
/// without zeros or duplicates.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, i64)>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, entries: Vec::new() }
    }

    /// Sums duplicate coordinates and drops zeros.
    pub fn from_triplets(rows: usize, cols: usize, triplets: impl IntoIterator<Item = (usize, usize, i64)>) -> Result<Self> {
        let mut acc: HashMap<(usize, usize), i64> = HashMap::new();
        for (r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::Parse(format!("entry ({r}, {c}) outside a {rows}x{cols} matrix")));
            }
            let e = acc.entry((r, c)).or_insert(0);
            *e = e.checked_add(v).ok_or_else(|| Error::ResourceLimit("i64 overflow in matrix entry".into()))?;
        }
        let mut entries: Vec<(usize, usize, i64)> = acc.into_iter().filter(|&(_, v)| v != 0).map(|((r, c), v)| (r, c, v)).collect();
        entries.sort_unstable();
        Ok(IntMatrix { rows, cols, entries })
    }

    pub fn from_dense(data: &[Vec<i64>]) -> Self {
        let rows = data.len();
        let cols = data.first().map_or(0, |r| r.len());
        let entries = data
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().enumerate().filter(|(_, &v)| v != 0).map(move |(c, &v)| (r, c, v)))
            .collect();
        IntMatrix { rows, cols, entries }
    }

    pub fn to_dense(&self) -> Vec<Vec<i64>> {
        let mut d = vec![vec![0; self.cols]; self.rows];
        for &(r, c, v) in &self.entries {
            d[r][c] = v;
        }
        d
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, i64)] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.entries.binary_search_by(|&(a, b, _)| (a, b).cmp(&(r, c))).map_or(0, |i| self.entries[i].2)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut entries: Vec<_> = self.entries.iter().map(|&(r, c, v)| (c, r, v)).collect();
        entries.sort_unstable();
        IntMatrix { rows: self.cols, cols: self.rows, entries }
    }

    /// `self · other`, exact, failing on i64 overflow.
    pub fn mul(&self, other: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != other.rows {
            return Err(Error::ArityMismatch { expected: self.cols, found: other.rows });
        }
        let mut by_row: Vec<Vec<(usize, i64)>> = vec![Vec::new(); other.rows];
        for &(r, c, v) in &other.entries {
            by_row[r].push((c, v));
        }
        let mut acc: HashMap<(usize, usize), i128> = HashMap::new();
        for &(r, k, a) in &self.entries {
            for &(c, b) in &by_row[k] {
                *acc.entry((r, c)).or_insert(0) += a as i128 * b as i128;
            }
        }
        let mut trip = Vec::with_capacity(acc.len());
        for ((r, c), v) in acc {
            let v = i64::try_from(v).map_err(|_| Error::ResourceLimit("i64 overflow in product".into()))?;
            trip.push((r, c, v));
        }
        IntMatrix::from_triplets(self.rows, other.cols, trip)
    }

    /// Text form: a `shape ROWS COLS` line, then one `row col value` line per
    /// nonzero entry, 0-based.
    pub fn to_text(&self) -> String {
        let mut s = format!("shape {} {}\n", self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            s.push_str(&format!("{r} {c} {v}\n"));
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<IntMatrix> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("missing shape line".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 || h[0] != "shape" {
            return Err(Error::Parse(format!("bad shape line {header:?}")));
        }
        let num = |t: &str| t.parse::<usize>().map_err(|_| Error::Parse(format!("bad integer {t:?}")));
        let (rows, cols) = (num(h[1])?, num(h[2])?);
        let mut trip = Vec::new();
        for l in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("bad entry line {l:?}")));
            }
            let v = f[2].parse::<i64>().map_err(|_| Error::Parse(format!("bad value {:?}", f[2])))?;
            trip.push((num(f[0])?, num(f[1])?, v));
        }
        IntMatrix::from_triplets(rows, cols, trip)
    }
}

/// A bounded chain complex `C_top -> .. -> C_0` with named cells.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedComplex {
    labels: Vec<Vec<String>>,
    /// `boundaries[d - 1]` is `∂_d : C_d -> C_{d-1}`, shape `n_{d-1} × n_d`.
    boundaries: Vec<IntMatrix>,
}

impl GradedComplex {
    pub fn new(labels: Vec<Vec<String>>, boundaries: Vec<IntMatrix>) -> Result<Self> {
        let top = labels.len().saturating_sub(1);
        if boundaries.len() != top {
            return Err(Error::ArityMismatch { expected: top, found: boundaries.len() });
        }
        for (i, b) in boundaries.iter().enumerate() {
            let d = i + 1;
            if b.rows() != labels[d - 1].len() || b.cols() != labels[d].len() {
                return Err(Error::Parse(format!(
                    "boundary {d} has shape {}x{}, expected {}x{}",
                    b.rows(),
                    b.cols(),
                    labels[d - 1].len(),
                    labels[d].len()
                )));
            }
        }
        Ok(GradedComplex { labels, boundaries })
    }

    /// Builds the complex from cells grouped by dimension and a signed
    /// boundary function. Faces must lie in the previous group.
    pub fn from_cells<C, F>(cells: &[Vec<C>], boundary: F) -> Result<Self>
    where
        C: Eq + Hash + fmt::Display + Sync + Send,
        F: Fn(&C) -> Vec<(i64, C)> + Sync,
    {
        let labels: Vec<Vec<String>> = cells.iter().map(|g| g.iter().map(|c| c.to_string()).collect()).collect();
        let mut boundaries = Vec::new();
        for d in 1..cells.len() {
            let index: HashMap<&C, usize> = cells[d - 1].iter().enumerate().map(|(i, c)| (c, i)).collect();
            let cols: Vec<Result<Vec<(usize, usize, i64)>>> = cells[d]
                .par_iter()
                .enumerate()
                .map(|(j, c)| {
                    boundary(c)
                        .into_iter()
                        .map(|(s, f)| {
                            let i = *index
                                .get(&f)
                                .ok_or_else(|| Error::Verification(format!("face {f} of {c} is not a listed cell")))?;
                            Ok((i, j, s))
                        })
                        .collect()
                })
                .collect();
            let mut trip = Vec::new();
            for col in cols {
                trip.extend(col?);
            }
            boundaries.push(IntMatrix::from_triplets(cells[d - 1].len(), cells[d].len(), trip)?);
        }
        GradedComplex::new(labels, boundaries)
    }

    pub fn top_dim(&self) -> usize {
        self.labels.len().saturating_sub(1)
    }

    pub fn n(&self, d: usize) -> usize {
        self.labels.get(d).map_or(0, |l| l.len())
    }

    pub fn counts(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.len()).collect()
    }

    pub fn labels(&self, d: usize) -> &[String] {
        self.labels.get(d).map_or(&[], |l| l.as_slice())
    }

    /// `∂_d`, a zero matrix outside `1..=top`.
    pub fn boundary(&self, d: usize) -> IntMatrix {
        if d >= 1 && d <= self.boundaries.len() {
            self.boundaries[d - 1].clone()
        } else {
            IntMatrix::zeros(if d == 0 { 0 } else { self.n(d - 1) }, self.n(d))
        }
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.labels.iter().enumerate().map(|(d, l)| if d % 2 == 0 { l.len() as i64 } else { -(l.len() as i64) }).sum()
    }
}

/// Outcome of checking `∂_{d-1} ∘ ∂_d = 0` in every degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum D2Report {
    Ok,
    Failure { degree: usize, cell: String, face: String, value: i64 },
}

impl fmt::Display for D2Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            D2Report::Ok => write!(f, "d^2 = 0"),
            D2Report::Failure { degree, cell, face, value } => {
                write!(f, "d^2 != 0 in degree {degree}: coefficient {value} of {face} in dd({cell})")
            }
        }
    }
}

pub fn verify_d2(c: &GradedComplex) -> Result<D2Report> {
    for d in 2..=c.top_dim() {
        let comp = c.boundary(d - 1).mul(&c.boundary(d))?;
        // first nonzero entry in column order
        if let Some(&(r, col, v)) = comp.entries().iter().min_by_key(|&&(r, c, _)| (c, r)) {
            return Ok(D2Report::Failure {
                degree: d,
                cell: c.labels(d)[col].clone(),
                face: c.labels(d - 2)[r].clone(),
                value: v,
            });
        }
    }
    Ok(D2Report::Ok)
}

// ---------------------------------------------------------------------------
// Smith normal form

/// Dense matrix of big integers, row-major.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BigMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<BigInt>,
}

impl BigMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BigMatrix { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    pub fn from_int(m: &IntMatrix) -> Self {
        let mut b = Self::zeros(m.rows(), m.cols());
        for &(r, c, v) in m.entries() {
            b.data[r * m.cols() + c] = BigInt::from(v);
        }
        b
    }

    pub fn at(&self, r: usize, c: usize) -> &BigInt {
        &self.data[r * self.cols + c]
    }

    fn at_mut(&mut self, r: usize, c: usize) -> &mut BigInt {
        &mut self.data[r * self.cols + c]
    }

    pub fn mul(&self, o: &BigMatrix) -> BigMatrix {
        assert_eq!(self.cols, o.rows);
        let mut out = BigMatrix::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = o.at(k, j);
                    if !b.is_zero() {
                        *out.at_mut(i, j) += a * b;
                    }
                }
            }
        }
        out
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for c in 0..self.cols {
                self.data.swap(a * self.cols + c, b * self.cols + c);
            }
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for r in 0..self.rows {
                self.data.swap(r * self.cols + a, r * self.cols + b);
            }
        }
    }

    /// row[dst] += q · row[src]
    fn add_row(&mut self, dst: usize, src: usize, q: &BigInt) {
        for c in 0..self.cols {
            let v = self.at(src, c) * q;
            if !v.is_zero() {
                *self.at_mut(dst, c) += v;
            }
        }
    }

    /// col[dst] += q · col[src]
    fn add_col(&mut self, dst: usize, src: usize, q: &BigInt) {
        for r in 0..self.rows {
            let v = self.at(r, src) * q;
            if !v.is_zero() {
                *self.at_mut(r, dst) += v;
            }
        }
    }

    fn negate_row(&mut self, r: usize) {
        for c in 0..self.cols {
            let v = -std::mem::take(self.at_mut(r, c));
            *self.at_mut(r, c) = v;
        }
    }
}

/// `U · A · V = D` with `D` diagonal, diagonal entries `d_1 | d_2 | ..`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snf {
    /// Nonzero diagonal entries, positive, each dividing the next.
    pub invariant_factors: Vec<BigInt>,
    pub u: Option<BigMatrix>,
    pub v: Option<BigMatrix>,
}

impl Snf {
    pub fn rank(&self) -> usize {
        self.invariant_factors.len()
    }
}

/// Dense Smith normal form by repeated minimum-modulus pivoting.
pub fn smith_normal_form(a: &BigMatrix, with_transforms: bool) -> Snf {
    let mut m = a.clone();
    let (rows, cols) = (m.rows, m.cols);
    let mut u = with_transforms.then(|| BigMatrix::identity(rows));
    let mut v = with_transforms.then(|| BigMatrix::identity(cols));
    let mut diag = Vec::new();
    for t in 0..rows.min(cols) {
        // global minimum-modulus pivot in the trailing block
        let mut best: Option<(usize, usize)> = None;
        for r in t..rows {
            for c in t..cols {
                let x = m.at(r, c);
                if !x.is_zero() && best.is_none_or(|(br, bc)| x.abs() < m.at(br, bc).abs()) {
                    best = Some((r, c));
                }
            }
        }
        let Some((pr, pc)) = best else { break };
        m.swap_rows(t, pr);
        m.swap_cols(t, pc);
        if let Some(u) = u.as_mut() {
            u.swap_rows(t, pr);
        }
        if let Some(v) = v.as_mut() {
            v.swap_cols(t, pc);
        }
        loop {
            let p = m.at(t, t).clone();
            let mut clean = true;
            for r in t + 1..rows {
                if m.at(r, t).is_zero() {
                    continue;
                }
                let q = -m.at(r, t).div_floor(&p);
                m.add_row(r, t, &q);
                if let Some(u) = u.as_mut() {
                    u.add_row(r, t, &q);
                }
                clean &= m.at(r, t).is_zero();
            }
            for c in t + 1..cols {
                if m.at(t, c).is_zero() {
                    continue;
                }
                let q = -m.at(t, c).div_floor(&p);
                m.add_col(c, t, &q);
                if let Some(v) = v.as_mut() {
                    v.add_col(c, t, &q);
                }
                clean &= m.at(t, c).is_zero();
            }
            if !clean {
                // a smaller remainder sits in row t or column t: move it to the pivot
                let mut best = (t, t);
                for r in t + 1..rows {
                    if !m.at(r, t).is_zero() && m.at(r, t).abs() < m.at(best.0, best.1).abs() {
                        best = (r, t);
                    }
                }
                for c in t + 1..cols {
                    if !m.at(t, c).is_zero() && m.at(t, c).abs() < m.at(best.0, best.1).abs() {
                        best = (t, c);
                    }
                }
                if best.0 != t {
                    m.swap_rows(t, best.0);
                    if let Some(u) = u.as_mut() {
                        u.swap_rows(t, best.0);
                    }
                } else if best.1 != t {
                    m.swap_cols(t, best.1);
                    if let Some(v) = v.as_mut() {
                        v.swap_cols(t, best.1);
                    }
                }
                continue;
            }
            // divisibility of the trailing block
            let bad = (t + 1..rows).find(|&r| (t + 1..cols).any(|c| !m.at(r, c).is_multiple_of(&p)));
            if let Some(r) = bad {
                m.add_row(t, r, &BigInt::one());
                if let Some(u) = u.as_mut() {
                    u.add_row(t, r, &BigInt::one());
                }
                continue;
            }
            break;
        }
        if m.at(t, t).is_negative() {
            m.negate_row(t);
            if let Some(u) = u.as_mut() {
                u.negate_row(t);
            }
        }
        diag.push(m.at(t, t).clone());
    }
    Snf { invariant_factors: diag, u, v }
}

// ---------------------------------------------------------------------------
// Sparse elimination

/// Nonzero invariant factors of a sparse matrix. Unit pivots are eliminated
/// sparsely; the remaining block goes through the dense Smith form.
pub fn invariant_factors(m: &IntMatrix) -> Result<Vec<BigInt>> {
    let mut rows: Vec<HashMap<usize, i64>> = vec![HashMap::new(); m.rows()];
    let mut cols: Vec<HashSet<usize>> = vec![HashSet::new(); m.cols()];
    for &(r, c, v) in m.entries() {
        rows[r].insert(c, v);
        cols[c].insert(r);
    }
    let mut unit_pivots = 0usize;
    let mut overflow = false;
    'passes: loop {
        let mut order: Vec<usize> = (0..cols.len()).filter(|&c| !cols[c].is_empty()).collect();
        order.sort_by_key(|&c| cols[c].len());
        let mut progress = false;
        for c in order {
            if cols[c].is_empty() {
                continue;
            }
            // Markowitz choice among unit entries of the column
            let Some(pr) = cols[c]
                .iter()
                .copied()
                .filter(|&r| rows[r][&c].abs() == 1)
                .min_by_key(|&r| (rows[r].len(), r))
            else {
                continue;
            };
            let pv = rows[pr][&c];
            let pivot_row: Vec<(usize, i64)> = rows[pr].iter().map(|(&cc, &v)| (cc, v)).collect();
            let others: Vec<usize> = cols[c].iter().copied().filter(|&r| r != pr).collect();
            for r in others {
                let factor = rows[r][&c] * pv;
                for &(cc, v) in &pivot_row {
                    let Some(delta) = factor.checked_mul(v) else {
                        overflow = true;
                        break 'passes;
                    };
                    let cur = rows[r].get(&cc).copied().unwrap_or(0);
                    let Some(new) = cur.checked_sub(delta) else {
                        overflow = true;
                        break 'passes;
                    };
                    if new == 0 {
                        rows[r].remove(&cc);
                        cols[cc].remove(&r);
                    } else {
                        rows[r].insert(cc, new);
                        cols[cc].insert(r);
                    }
                }
            }
            for &(cc, _) in &pivot_row {
                cols[cc].remove(&pr);
            }
            rows[pr].clear();
            unit_pivots += 1;
            progress = true;
        }
        if !progress {
            break;
        }
    }
    // An interrupted row update leaves the sparse state inconsistent, so on
    // overflow the whole matrix is redone in big integers.
    let residual = if overflow {
        unit_pivots = 0;
        let b = BigMatrix::from_int(m);
        check_dense(b.rows, b.cols)?;
        b
    } else {
        let live_rows: Vec<usize> = (0..rows.len()).filter(|&r| !rows[r].is_empty()).collect();
        let live_cols: Vec<usize> = (0..cols.len()).filter(|&c| !cols[c].is_empty()).collect();
        check_dense(live_rows.len(), live_cols.len())?;
        let col_index: HashMap<usize, usize> = live_cols.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut b = BigMatrix::zeros(live_rows.len(), live_cols.len());
        for (i, &r) in live_rows.iter().enumerate() {
            for (&c, &v) in &rows[r] {
                *b.at_mut(i, col_index[&c]) = BigInt::from(v);
            }
        }
        b
    };
    let snf = smith_normal_form(&residual, false);
    let mut out = vec![BigInt::one(); unit_pivots];
    out.extend(snf.invariant_factors);
    out.sort();
    Ok(out)
}

fn check_dense(r: usize, c: usize) -> Result<()> {
    if r.saturating_mul(c) > MAX_DENSE_ENTRIES {
        return Err(Error::ResourceLimit(format!("dense residual block {r}x{c} too large")));
    }
    Ok(())
}

/// Rank over `Z/p` for a prime `p < 2^32`.
pub fn rank_mod_p(m: &IntMatrix, p: u64) -> usize {
    let reduce = |v: i64| v.rem_euclid(p as i64) as u64;
    let mut rows: Vec<Vec<(usize, u64)>> = vec![Vec::new(); m.rows()];
    for &(r, c, v) in m.entries() {
        let x = reduce(v);
        if x != 0 {
            rows[r].push((c, x));
        }
    }
    let inv = |a: u64| -> u64 {
        let (mut b, mut e, mut acc) = (a % p, p - 2, 1u64);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * b % p;
            }
            b = b * b % p;
            e >>= 1;
        }
        acc
    };
    // pivot rows keyed by leading column, normalised to leading 1
    let mut pivots: HashMap<usize, Vec<(usize, u64)>> = HashMap::new();
    for mut row in rows {
        row.sort_unstable();
        while let Some(&(lead, a)) = row.first() {
            match pivots.get(&lead) {
                None => {
                    let ia = inv(a);
                    let norm = row.iter().map(|&(c, v)| (c, v * ia % p)).collect();
                    pivots.insert(lead, norm);
                    break;
                }
                Some(prow) => {
                    // row -= a · prow
                    let mut merged = Vec::with_capacity(row.len() + prow.len());
                    let (mut i, mut j) = (0, 0);
                    while i < row.len() || j < prow.len() {
                        let take_row = j >= prow.len() || (i < row.len() && row[i].0 < prow[j].0);
                        let take_p = i >= row.len() || (j < prow.len() && prow[j].0 < row[i].0);
                        if take_row {
                            merged.push(row[i]);
                            i += 1;
                        } else if take_p {
                            merged.push((prow[j].0, (p - a * prow[j].1 % p) % p));
                            j += 1;
                        } else {
                            let v = (row[i].1 + p - a * prow[j].1 % p) % p;
                            if v != 0 {
                                merged.push((row[i].0, v));
                            }
                            i += 1;
                            j += 1;
                        }
                    }
                    row = merged;
                }
            }
        }
    }
    pivots.len()
}

pub const RANK_PRIME: u64 = 2_147_483_647;

// ---------------------------------------------------------------------------
// Homology

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Homology {
    pub betti: Vec<usize>,
    /// Invariant factors greater than one, per degree.
    pub torsion: Vec<Vec<BigInt>>,
}

impl Homology {
    pub fn is_torsion_free(&self) -> bool {
        self.torsion.iter().all(|t| t.is_empty())
    }

    /// `betti 1,3,2; torsion none`
    pub fn summary(&self) -> String {
        let b: Vec<String> = self.betti.iter().map(|x| x.to_string()).collect();
        let t = if self.is_torsion_free() {
            "none".to_string()
        } else {
            let parts: Vec<String> = self
                .torsion
                .iter()
                .enumerate()
                .filter(|(_, t)| !t.is_empty())
                .map(|(d, t)| format!("H{d}:{}", t.iter().map(|x| format!("Z/{x}")).collect::<Vec<_>>().join("+")))
                .collect();
            parts.join(" ")
        };
        format!("betti {}; torsion {}", b.join(","), t)
    }
}

impl fmt::Display for Homology {
    /// `H0=Z H1=Z^3+Z/2 H2=0`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (d, &b) in self.betti.iter().enumerate() {
            let mut parts = Vec::new();
            match b {
                0 => {}
                1 => parts.push("Z".to_string()),
                _ => parts.push(format!("Z^{b}")),
            }
            for t in &self.torsion[d] {
                parts.push(format!("Z/{t}"));
            }
            if parts.is_empty() {
                parts.push("0".into());
            }
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "H{d}={}", parts.join("+"))?;
        }
        Ok(())
    }
}

/// Integral homology in every degree `0..=top`.
pub fn homology(c: &GradedComplex) -> Result<Homology> {
    let top = c.top_dim();
    let factors: Vec<Vec<BigInt>> = (0..=top + 1)
        .into_par_iter()
        .map(|d| if d == 0 || d > top { Ok(Vec::new()) } else { invariant_factors(&c.boundary(d)) })
        .collect::<Result<_>>()?;
    let mut betti = Vec::with_capacity(top + 1);
    let mut torsion = Vec::with_capacity(top + 1);
    for d in 0..=top {
        let rank_out = factors[d].len();
        let rank_in = factors[d + 1].len();
        betti.push(c.n(d) - rank_out - rank_in);
        torsion.push(factors[d + 1].iter().filter(|x| !x.is_one()).cloned().collect());
    }
    Ok(Homology { betti, torsion })
}

/// Betti numbers over `Z/p`, cheaper than the integral computation.
pub fn betti_mod_p(c: &GradedComplex, p: u64) -> Vec<usize> {
    let top = c.top_dim();
    let ranks: Vec<usize> =
        (0..=top + 1).into_par_iter().map(|d| if d == 0 || d > top { 0 } else { rank_mod_p(&c.boundary(d), p) }).collect();
    (0..=top).map(|d| c.n(d) - ranks[d] - ranks[d + 1]).collect()
}

/// Small helper for tests and callers holding dense data.
pub fn to_i64(x: &BigInt) -> Option<i64> {
    x.to_i64()
}
