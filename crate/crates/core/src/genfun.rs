//! Exact bivariate counting series `Σ q[m][k] t^m x^k`, truncated at
//! `t^M x^K`.
//!
//! * `P`: cacti cells, `k!·[t^m x^k] P` cells of dimension `m` in `Cact(k)`.
//! * `o`: cells of the open moduli space, as bar cells.
//! * `F`: cells of the Fulton-MacPherson space.
//!
//! `o` and `F` come from the tree grammars `o = P̃(x + t·o)` and
//! `F = o(x + F)` with `P̃ = P - x`. The printed identities they are often
//! quoted with are evaluated separately in [`printed_form_diagnostics`].

use std::fmt;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

type Q = BigRational;

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BiSeries {
    m: usize,
    k: usize,
    c: Vec<Q>,
}

impl BiSeries {
    pub fn zero(m: usize, k: usize) -> Self {
        BiSeries { m, k, c: vec![Q::zero(); (m + 1) * (k + 1)] }
    }

    pub fn one(m: usize, k: usize) -> Self {
        Self::monomial(m, k, 0, 0, Q::one())
    }

    pub fn x(m: usize, k: usize) -> Self {
        Self::monomial(m, k, 0, 1, Q::one())
    }

    pub fn t(m: usize, k: usize) -> Self {
        Self::monomial(m, k, 1, 0, Q::one())
    }

    /// `coeff · t^tdeg x^xdeg`, zero if beyond the truncation.
    pub fn monomial(m: usize, k: usize, tdeg: usize, xdeg: usize, coeff: Q) -> Self {
        let mut s = Self::zero(m, k);
        if tdeg <= m && xdeg <= k {
            s.set(tdeg, xdeg, coeff);
        }
        s
    }

    pub fn t_order(&self) -> usize {
        self.m
    }

    pub fn x_order(&self) -> usize {
        self.k
    }

    fn idx(&self, tdeg: usize, xdeg: usize) -> usize {
        tdeg * (self.k + 1) + xdeg
    }

    pub fn coeff(&self, tdeg: usize, xdeg: usize) -> Q {
        if tdeg <= self.m && xdeg <= self.k {
            self.c[self.idx(tdeg, xdeg)].clone()
        } else {
            Q::zero()
        }
    }

    fn at(&self, tdeg: usize, xdeg: usize) -> &Q {
        &self.c[self.idx(tdeg, xdeg)]
    }

    pub fn set(&mut self, tdeg: usize, xdeg: usize, v: Q) {
        let i = self.idx(tdeg, xdeg);
        self.c[i] = v;
    }

    /// The coefficient of `x^xdeg` as a polynomial in `t`, low degree first.
    pub fn x_coeff(&self, xdeg: usize) -> Vec<Q> {
        (0..=self.m).map(|t| self.coeff(t, xdeg)).collect()
    }

    /// Re-truncates, padding with zeros if the new orders are larger.
    pub fn truncate(&self, m: usize, k: usize) -> Self {
        let mut s = Self::zero(m, k);
        for t in 0..=m.min(self.m) {
            for x in 0..=k.min(self.k) {
                s.set(t, x, self.at(t, x).clone());
            }
        }
        s
    }

    fn check_orders(&self, o: &BiSeries) {
        assert_eq!((self.m, self.k), (o.m, o.k), "series truncation orders differ");
    }

    pub fn add(&self, o: &BiSeries) -> BiSeries {
        self.check_orders(o);
        BiSeries { m: self.m, k: self.k, c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, o: &BiSeries) -> BiSeries {
        self.check_orders(o);
        BiSeries { m: self.m, k: self.k, c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect() }
    }

    pub fn neg(&self) -> BiSeries {
        BiSeries { m: self.m, k: self.k, c: self.c.iter().map(|a| -a).collect() }
    }

    pub fn scale(&self, s: &Q) -> BiSeries {
        BiSeries { m: self.m, k: self.k, c: self.c.iter().map(|a| a * s).collect() }
    }

    fn nonzero_terms(&self) -> Vec<(usize, usize, &Q)> {
        let mut out = Vec::new();
        for t in 0..=self.m {
            for x in 0..=self.k {
                let v = self.at(t, x);
                if !v.is_zero() {
                    out.push((t, x, v));
                }
            }
        }
        out
    }

    pub fn mul(&self, o: &BiSeries) -> BiSeries {
        self.check_orders(o);
        let mut out = Self::zero(self.m, self.k);
        let a = self.nonzero_terms();
        let b = o.nonzero_terms();
        for &(t1, x1, u) in &a {
            for &(t2, x2, v) in &b {
                if t1 + t2 <= self.m && x1 + x2 <= self.k {
                    let i = out.idx(t1 + t2, x1 + x2);
                    out.c[i] += u * v;
                }
            }
        }
        out
    }

    /// Multiplication by `t`, dropping the top row.
    pub fn mul_t(&self) -> BiSeries {
        let mut out = Self::zero(self.m, self.k);
        for t in 0..self.m {
            for x in 0..=self.k {
                out.set(t + 1, x, self.at(t, x).clone());
            }
        }
        out
    }

    /// Exact division by `t`; the `t^0` row must vanish. The result has
    /// truncation order `M - 1` in `t`.
    pub fn div_t(&self) -> Result<BiSeries> {
        if let Some(x) = (0..=self.k).find(|&x| !self.at(0, x).is_zero()) {
            return Err(Error::BadConstantTerm(format!("t^0 x^{x} coefficient {} blocks division by t", self.at(0, x))));
        }
        let mut out = Self::zero(self.m.saturating_sub(1), self.k);
        for t in 1..=self.m {
            for x in 0..=self.k {
                out.set(t - 1, x, self.at(t, x).clone());
            }
        }
        Ok(out)
    }

    /// Multiplicative inverse; needs a nonzero constant term.
    pub fn inv(&self) -> Result<BiSeries> {
        let c0 = self.at(0, 0).clone();
        if c0.is_zero() {
            return Err(Error::BadConstantTerm("0".into()));
        }
        let terms = self.nonzero_terms();
        let mut r = Self::zero(self.m, self.k);
        let inv0 = c0.recip();
        for t in 0..=self.m {
            for x in 0..=self.k {
                let mut acc = if t == 0 && x == 0 { Q::one() } else { Q::zero() };
                for &(p, q, s) in &terms {
                    if (p, q) != (0, 0) && p <= t && q <= x {
                        acc -= s * r.at(t - p, x - q);
                    }
                }
                r.set(t, x, acc * &inv0);
            }
        }
        Ok(r)
    }

    /// Square root with constant term one.
    pub fn sqrt(&self) -> Result<BiSeries> {
        if !self.at(0, 0).is_one() {
            return Err(Error::BadConstantTerm(self.at(0, 0).to_string()));
        }
        let mut r = Self::zero(self.m, self.k);
        for t in 0..=self.m {
            for x in 0..=self.k {
                if t == 0 && x == 0 {
                    r.set(0, 0, Q::one());
                    continue;
                }
                // 2 r_00 r_tx = s_tx - Σ r_pq r_{t-p,x-q} over interior splits
                let mut acc = self.at(t, x).clone();
                for p in 0..=t {
                    for q in 0..=x {
                        if (p, q) == (0, 0) || (p, q) == (t, x) {
                            continue;
                        }
                        let a = r.at(p, q);
                        if !a.is_zero() {
                            acc -= a * r.at(t - p, x - q);
                        }
                    }
                }
                r.set(t, x, acc / Q::from_integer(2.into()));
            }
        }
        Ok(r)
    }

    /// Square root when the constant term is the square of a positive rational.
    pub fn sqrt_scaled(&self) -> Result<BiSeries> {
        let c0 = self.at(0, 0).clone();
        let root = rational_sqrt(&c0).ok_or_else(|| Error::BadConstantTerm(c0.to_string()))?;
        Ok(self.scale(&c0.recip()).sqrt()?.scale(&root))
    }

    /// Substitutes `inner` for the first variable of `outer`:
    /// `Σ_j a_j(t) y^j ↦ Σ_j a_j(t) inner^j`.
    pub fn compose_x(outer: &BiSeries, inner: &BiSeries) -> Result<BiSeries> {
        outer.check_orders(inner);
        if (0..=inner.m).any(|t| !inner.at(t, 0).is_zero()) {
            return Err(Error::ValuationViolation);
        }
        let (m, k) = (outer.m, outer.k);
        let coeff_series = |j: usize| {
            let mut a = BiSeries::zero(m, k);
            for t in 0..=m {
                a.set(t, 0, outer.at(t, j).clone());
            }
            a
        };
        let mut acc = coeff_series(k);
        for j in (0..k).rev() {
            acc = acc.mul(inner).add(&coeff_series(j));
        }
        Ok(acc)
    }

    /// `[x^k]` evaluated at `t = value`, for every `k`. Exact only when the
    /// series is polynomial in `t` within each `x`-degree.
    pub fn eval_t(&self, value: &Q) -> Vec<Q> {
        (0..=self.k)
            .map(|x| {
                let mut acc = Q::zero();
                let mut pw = Q::one();
                for t in 0..=self.m {
                    acc += self.at(t, x) * &pw;
                    pw *= value;
                }
                acc
            })
            .collect()
    }

    /// `k!·[x^k]` per `t`-degree, trailing zeros removed.
    pub fn cell_counts(&self, xdeg: usize) -> Vec<BigInt> {
        let fact: BigInt = (1..=xdeg as u64).map(BigInt::from).product();
        let mut v: Vec<BigInt> = self
            .x_coeff(xdeg)
            .iter()
            .map(|q| {
                let z = q * Q::from_integer(fact.clone());
                debug_assert!(z.is_integer());
                z.to_integer()
            })
            .collect();
        while v.last().is_some_and(|x| x.is_zero()) {
            v.pop();
        }
        v
    }

    /// `x^4: 1 + 6t + 10t^2 + 5t^3`
    pub fn format_x_coeff(&self, xdeg: usize) -> String {
        format!("x^{xdeg}: {}", format_t_poly(&self.x_coeff(xdeg)))
    }

    /// Lines `k m numerator denominator` for every nonzero coefficient.
    pub fn to_table(&self) -> String {
        let mut s = String::from("k m numerator denominator\n");
        for x in 0..=self.k {
            for t in 0..=self.m {
                let v = self.at(t, x);
                if !v.is_zero() {
                    s.push_str(&format!("{x} {t} {} {}\n", v.numer(), v.denom()));
                }
            }
        }
        s
    }
}

impl fmt::Display for BiSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for x in 0..=self.k {
            if self.x_coeff(x).iter().any(|q| !q.is_zero()) {
                writeln!(f, "{}", self.format_x_coeff(x))?;
            }
        }
        Ok(())
    }
}

fn rational_sqrt(q: &Q) -> Option<Q> {
    if q.is_negative() || q.is_zero() {
        return None;
    }
    let n = q.numer().sqrt();
    let d = q.denom().sqrt();
    (&n * &n == *q.numer() && &d * &d == *q.denom()).then(|| Q::new(n, d))
}

/// `1 + 6t + 10t^2 + 5t^3`; rationals print as `a/b`.
pub fn format_t_poly(p: &[Q]) -> String {
    let mut out = String::new();
    for (d, c) in p.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let mag = c.abs();
        let mono = match d {
            0 => mag.to_string(),
            _ => {
                let var = if d == 1 { "t".to_string() } else { format!("t^{d}") };
                if mag.is_one() {
                    var
                } else if mag.is_integer() {
                    format!("{mag}{var}")
                } else {
                    format!("({mag}){var}")
                }
            }
        };
        if out.is_empty() {
            if c.is_negative() {
                out.push('-');
            }
        } else {
            out.push_str(if c.is_negative() { " - " } else { " + " });
        }
        out.push_str(&mono);
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

/// Solves `S = f(S)` one `x`-degree at a time. `[x^k] f(S)` must depend
/// only on `[x^j] S` for `j < k`.
pub fn solve_fixed_point(m: usize, k: usize, f: impl Fn(&BiSeries) -> Result<BiSeries>) -> Result<BiSeries> {
    let mut s = BiSeries::zero(m, k);
    for x in 0..=k {
        let next = f(&s)?;
        for t in 0..=m {
            s.set(t, x, next.coeff(t, x));
        }
    }
    Ok(s)
}

/// `P = (1 - x - sqrt((1-x)^2 - 4xt)) / 2t`.
pub fn p_series_closed(m: usize, k: usize) -> Result<BiSeries> {
    let (m1, k1) = (m + 1, k);
    let one = BiSeries::one(m1, k1);
    let x = BiSeries::x(m1, k1);
    let t = BiSeries::t(m1, k1);
    let omx = one.sub(&x);
    let four = Q::from_integer(4.into());
    let disc = omx.mul(&omx).sub(&x.mul(&t).scale(&four));
    let num = omx.sub(&disc.sqrt()?);
    Ok(num.div_t()?.scale(&Q::new(1.into(), 2.into())).truncate(m, k))
}

/// `W = x / (1 - tP)`, `P = W / (1 - W)`.
pub fn p_series_grammar(m: usize, k: usize) -> Result<BiSeries> {
    let one = BiSeries::one(m, k);
    let x = BiSeries::x(m, k);
    solve_fixed_point(m, k, |p| {
        let w = x.mul(&one.sub(&p.mul_t()).inv()?);
        Ok(w.mul(&one.sub(&w).inv()?))
    })
}

/// The cacti series, computed in closed form and by its grammar; the two must agree.
pub fn p_series(m: usize, k: usize) -> Result<BiSeries> {
    let a = p_series_closed(m, k)?;
    let b = p_series_grammar(m, k)?;
    for x in 0..=k {
        for t in 0..=m {
            if a.coeff(t, x) != b.coeff(t, x) {
                return Err(Error::InternalDisagreement { x_degree: x, t_degree: t });
            }
        }
    }
    Ok(a)
}

/// `P̃ = P - x`.
pub fn p_tilde(m: usize, k: usize) -> Result<BiSeries> {
    Ok(p_series(m, k)?.sub(&BiSeries::x(m, k)))
}

/// Open moduli cells: `o = P̃(x + t·o)`.
pub fn o_series(m: usize, k: usize) -> Result<BiSeries> {
    let pt = p_tilde(m, k)?;
    let x = BiSeries::x(m, k);
    solve_fixed_point(m, k, |o| BiSeries::compose_x(&pt, &x.add(&o.mul_t())))
}

/// Fulton-MacPherson cells: `F = o(x + F)`.
pub fn f_series(m: usize, k: usize) -> Result<BiSeries> {
    let o = o_series(m, k)?;
    let x = BiSeries::x(m, k);
    solve_fixed_point(m, k, |f| BiSeries::compose_x(&o, &x.add(f)))
}

/// First `(k, m)` where `k!·[t^m x^k]` differs from the enumerated count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub k: usize,
    pub m: usize,
    pub series: BigInt,
    pub enumerated: u64,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k={} m={}: series {} vs enumerated {}", self.k, self.m, self.series, self.enumerated)
    }
}

/// Compares `k!·[x^k]` with `counts[k]` (per dimension) for every listed `k`.
pub fn compare_with_enumeration(s: &BiSeries, counts: &[(usize, Vec<u64>)]) -> Option<Mismatch> {
    for (k, by_dim) in counts {
        let series = s.cell_counts(*k);
        let len = series.len().max(by_dim.len());
        for m in 0..len {
            let a = series.get(m).cloned().unwrap_or_default();
            let b = by_dim.get(m).copied().unwrap_or(0);
            if a != BigInt::from(b) {
                return Some(Mismatch { k: *k, m, series: a, enumerated: b });
            }
        }
    }
    None
}

/// Expansions of the printed identities next to the grammar solutions.
#[derive(Clone, Debug)]
pub struct PrintedFormDiagnostics {
    /// Solution of `o = P̃(x) + P̃(t·o)`.
    pub quad1: BiSeries,
    pub o: BiSeries,
    /// First `(x-degree, t-degree)` where the two differ.
    pub quad1_first_difference: Option<(usize, usize)>,
    /// `t^K (o(F/t) + o - F)` with the grammar `o` and `F`, at `t`-order `M + K`.
    pub ofm_residual: BiSeries,
    pub ofm_residual_vanishes: bool,
    /// `[x^3]` of `F` implied by the printed identity, which forces `[x^3] F = [x^3] o`.
    pub ofm_implied_x3: Vec<Q>,
    pub f_x3: Vec<Q>,
    /// Expansion of the printed closed form for `o`, when it is a power series.
    pub count_open: std::result::Result<BiSeries, String>,
    pub count_open_first_difference: Option<(usize, usize)>,
}

fn first_difference(a: &BiSeries, b: &BiSeries) -> Option<(usize, usize)> {
    for x in 0..=a.k.min(b.k) {
        for t in 0..=a.m.min(b.m) {
            if a.coeff(t, x) != b.coeff(t, x) {
                return Some((x, t));
            }
        }
    }
    None
}

/// The printed closed form
/// `o = -(2t + sqrt((2t + (2t+3)f + 1)^2 - (f^2-1)((2t+3)^2-1)) + (2t+3)f + 1) / (t((2t+3)^2-1))`
/// with `f = sqrt((x-1)^2 - 4tx) + x + 2tx - 2`.
pub fn count_open_closed_form(m: usize, k: usize) -> Result<BiSeries> {
    let (m1, k1) = (m + 1, k);
    let one = BiSeries::one(m1, k1);
    let x = BiSeries::x(m1, k1);
    let t = BiSeries::t(m1, k1);
    let n = |v: i64| Q::from_integer(v.into());
    let xm1 = x.sub(&one);
    let f = xm1.mul(&xm1).sub(&x.mul(&t).scale(&n(4))).sqrt()?.add(&x).add(&x.mul(&t).scale(&n(2))).sub(&one.scale(&n(2)));
    let a = t.scale(&n(2)).add(&one.scale(&n(3))); // 2t + 3
    let a2m1 = a.mul(&a).sub(&one); // (2t+3)^2 - 1
    let two_t = t.scale(&n(2));
    let inner = two_t.add(&a.mul(&f)).add(&one);
    let disc = inner.mul(&inner).sub(&f.mul(&f).sub(&one).mul(&a2m1));
    let num = two_t.add(&disc.sqrt_scaled()?).add(&a.mul(&f)).add(&one).neg();
    let q = num.div_t()?;
    let den = a2m1.truncate(m, k);
    Ok(q.truncate(m, k).mul(&den.inv()?))
}

pub fn printed_form_diagnostics(m: usize, k: usize) -> Result<PrintedFormDiagnostics> {
    let pt = p_tilde(m, k)?;
    let quad1 = solve_fixed_point(m, k, |o| Ok(pt.add(&BiSeries::compose_x(&pt, &o.mul_t())?)))?;
    let o = o_series(m, k)?;
    let f = f_series(m, k)?;
    // t^K o(F/t) = Σ o_{s,j} t^{s + K - j} F^j
    let big_m = m + k;
    let fb = f.truncate(big_m, k);
    let mut lhs = BiSeries::zero(big_m, k);
    let mut fpow = BiSeries::one(big_m, k);
    for j in 0..=k {
        for s in 0..=m {
            let c = o.coeff(s, j);
            if c.is_zero() || s + k < j {
                continue;
            }
            let shift = s + k - j;
            if shift > big_m {
                continue;
            }
            let mut term = fpow.scale(&c);
            for _ in 0..shift {
                term = term.mul_t();
            }
            lhs = lhs.add(&term);
        }
        fpow = fpow.mul(&fb);
    }
    let mut rest = o.truncate(big_m, k).sub(&fb);
    for _ in 0..k {
        rest = rest.mul_t();
    }
    let residual = lhs.add(&rest);
    // Only coefficients whose t-exponent stays within the original range are reliable.
    let ofm_residual_vanishes = (0..=k).all(|xd| (0..=m).all(|t| residual.coeff(t + k, xd).is_zero()));
    let count_open = count_open_closed_form(m, k).map_err(|e| e.to_string());
    let count_open_first_difference = count_open.as_ref().ok().and_then(|c| first_difference(c, &o));
    Ok(PrintedFormDiagnostics {
        quad1_first_difference: first_difference(&quad1, &o),
        ofm_implied_x3: o.x_coeff(3),
        f_x3: f.x_coeff(3),
        quad1,
        o,
        ofm_residual: residual,
        ofm_residual_vanishes,
        count_open,
        count_open_first_difference,
    })
}

impl fmt::Display for PrintedFormDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k3 = 3.min(self.o.x_order());
        writeln!(f, "quad1 printed form  [x^{k3}] {}", format_t_poly(&self.quad1.x_coeff(k3)))?;
        writeln!(f, "grammar o           [x^{k3}] {}", format_t_poly(&self.o.x_coeff(k3)))?;
        match self.quad1_first_difference {
            Some((x, t)) => writeln!(f, "quad1 disagrees with enumeration first at x^{x} t^{t}")?,
            None => writeln!(f, "quad1 agrees to truncation")?,
        }
        writeln!(f, "ofm printed form    [x^3] {}", format_t_poly(&self.ofm_implied_x3))?;
        writeln!(f, "grammar F           [x^3] {}", format_t_poly(&self.f_x3))?;
        writeln!(f, "ofm residual vanishes: {}", self.ofm_residual_vanishes)?;
        match (&self.count_open, self.count_open_first_difference) {
            (Err(e), _) => writeln!(f, "count-open closed form: not a power series ({e})")?,
            (Ok(c), None) => writeln!(f, "count-open closed form agrees; [x^3] {}", format_t_poly(&c.x_coeff(k3)))?,
            (Ok(c), Some((x, t))) => writeln!(
                f,
                "count-open closed form [x^{k3}] {}; differs first at x^{x} t^{t}",
                format_t_poly(&c.x_coeff(k3))
            )?,
        }
        Ok(())
    }
}

/// Integer counts `k!·[x^k]` as `u64`, for callers comparing with enumerators.
pub fn counts_u64(s: &BiSeries, k: usize) -> Vec<u64> {
    s.cell_counts(k).iter().map(|x| x.to_u64().expect("count fits in u64")).collect()
}

/// `k!` as a big integer.
pub fn factorial(k: usize) -> BigInt {
    (1..=k as u64).map(BigInt::from).product()
}

/// Whether every coefficient times `k!` is an integer.
pub fn has_factorial_integrality(s: &BiSeries) -> bool {
    (0..=s.k).all(|x| {
        let f = Q::from_integer(factorial(x));
        s.x_coeff(x).iter().all(|q| (q * &f).is_integer())
    })
}

/// Greatest `t`-degree with a nonzero coefficient at `x^k`.
pub fn t_degree(s: &BiSeries, k: usize) -> Option<usize> {
    (0..=s.m).rev().find(|&t| !s.coeff(t, k).is_zero())
}
