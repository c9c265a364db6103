//! Invariant suites behind `operad-cells verify`.

use num::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::cacti_core::{count_cells, enumerate_cells};
use crate::chain_algebra::{homology, verify_d2, D2Report, GradedComplex};
use crate::error::{Error, Result};
use crate::flowtrace::{extract_cell, trace_flow, weights_from_f64, Configuration, Tolerances};
use crate::genfun::{counts_u64, f_series, o_series, p_series};
use crate::metatree::{
    bar_differential, enumerate_bar_cells_with_limit, enumerate_fm_cells, enumerate_fm_cells_with_limit, fm_compose, fm_differential,
    FmCell, SignedChain,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    All,
    Signs,
    Counts,
    Homology,
    Flow,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

pub struct Options {
    pub k_min: usize,
    pub k_max: usize,
    pub samples: usize,
    pub seed: u64,
    pub limit: u64,
}

fn check(suite: &'static str, name: String, passed: bool, detail: String) -> Check {
    Check { suite, name, passed, detail }
}

fn d2_check(name: String, cx: &GradedComplex) -> Result<Check> {
    Ok(match verify_d2(cx)? {
        D2Report::Ok => check("signs", name, true, format!("cells {:?}", cx.counts())),
        other => check("signs", name, false, format!("{other:?}")),
    })
}

/// Coefficients of `∏_{j<k} (1 + j t)`.
pub fn config_space_betti(k: usize) -> Vec<u64> {
    let mut p = vec![1u64];
    for j in 1..k as u64 {
        let mut next = vec![0u64; p.len() + 1];
        for (d, &c) in p.iter().enumerate() {
            next[d] += c;
            next[d + 1] += c * j;
        }
        p = next;
    }
    p
}

fn compose_chain(a: &SignedChain<FmCell>, slot: usize, b: &SignedChain<FmCell>) -> Result<SignedChain<FmCell>> {
    let mut out = SignedChain::new();
    for (x, s) in a.iter() {
        for (y, t) in b.iter() {
            let (e, z) = fm_compose(x, slot, y)?;
            out.add(z, s * t * e);
        }
    }
    Ok(out)
}

/// `d(a ∘_i b) = da ∘_i b + (-1)^{|a|} a ∘_i db` on every pair of cells.
pub fn leibniz_failures(ka: usize, kb: usize) -> Result<(usize, Vec<String>)> {
    let all = |k: usize| -> Result<Vec<FmCell>> { Ok(enumerate_fm_cells(k)?.into_iter().flatten().collect()) };
    let (xs, ys) = (all(ka)?, all(kb)?);
    let mut checked = 0;
    let mut bad = Vec::new();
    for a in &xs {
        let one_a: SignedChain<FmCell> = [(1, a.clone())].into_iter().collect();
        for b in &ys {
            let one_b: SignedChain<FmCell> = [(1, b.clone())].into_iter().collect();
            for slot in 1..=ka {
                let (s, ab) = fm_compose(a, slot, b)?;
                let mut lhs = SignedChain::new();
                lhs.add_chain(&fm_differential(&ab), s);
                let mut rhs = compose_chain(&fm_differential(a), slot, &one_b)?;
                let sa = if a.dim() % 2 == 0 { 1 } else { -1 };
                rhs.add_chain(&compose_chain(&one_a, slot, &fm_differential(b))?, sa);
                checked += 1;
                if lhs != rhs {
                    bad.push(format!("{a} o{slot} {b}"));
                }
            }
        }
    }
    Ok((checked, bad))
}

fn signs(o: &Options) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for k in o.k_min..=o.k_max.min(6) {
        let cells = enumerate_cells(k)?;
        out.push(d2_check(format!("d2 cacti k={k}"), &GradedComplex::from_cells(&cells, |c| c.boundary())?)?);
    }
    for k in o.k_min..=o.k_max.min(5) {
        let cells = enumerate_bar_cells_with_limit(k, o.limit)?;
        out.push(d2_check(format!("d2 bar k={k}"), &GradedComplex::from_cells(&cells, |c| bar_differential(c).into_terms())?)?);
    }
    for k in o.k_min..=o.k_max.min(4) {
        let cells = enumerate_fm_cells_with_limit(k, o.limit)?;
        out.push(d2_check(format!("d2 fm k={k}"), &GradedComplex::from_cells(&cells, |c| fm_differential(c).into_terms())?)?);
    }
    for ka in 2..=o.k_max {
        for kb in 2..=o.k_max {
            if ka + kb - 1 > o.k_max.min(4) {
                continue;
            }
            let (n, bad) = leibniz_failures(ka, kb)?;
            let detail = if bad.is_empty() { format!("{n} compositions") } else { format!("{} of {n} fail, first {}", bad.len(), bad[0]) };
            out.push(check("signs", format!("chain map fm {ka}x{kb}"), bad.is_empty(), detail));
        }
    }
    Ok(out)
}

fn counts(o: &Options) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let kk = o.k_max;
    let (p, os, fs) = (p_series(kk, kk)?, o_series(2 * kk, kk)?, f_series(2 * kk, kk)?);
    let trim = |mut v: Vec<u64>| {
        while v.last() == Some(&0) {
            v.pop();
        }
        v
    };
    for k in o.k_min..=kk.min(7) {
        let got = trim(count_cells(k)?);
        let want = trim(counts_u64(&p, k));
        out.push(check("counts", format!("cacti k={k}"), got == want, format!("{got:?} vs series {want:?}")));
    }
    for k in o.k_min..=kk.min(5) {
        let bar: Vec<u64> = enumerate_bar_cells_with_limit(k, o.limit)?.iter().map(|v| v.len() as u64).collect();
        let (got, want) = (trim(bar), trim(counts_u64(&os, k)));
        out.push(check("counts", format!("bar k={k}"), got == want, format!("{got:?} vs series {want:?}")));
        let fm: Vec<u64> = enumerate_fm_cells_with_limit(k, o.limit)?.iter().map(|v| v.len() as u64).collect();
        let (got, want) = (trim(fm), trim(counts_u64(&fs, k)));
        out.push(check("counts", format!("fm k={k}"), got == want, format!("{got:?} vs series {want:?}")));
    }
    Ok(out)
}

fn homology_suite(o: &Options) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let compare = |name: String, h: crate::chain_algebra::Homology, k: usize| {
        let want = config_space_betti(k);
        let mut got: Vec<u64> = h.betti.iter().map(|&b| b as u64).collect();
        got.resize(got.len().max(want.len()), 0);
        let mut w = want.clone();
        w.resize(got.len(), 0);
        check("homology", name, got == w && h.is_torsion_free(), h.summary())
    };
    for k in o.k_min..=o.k_max.min(5) {
        let cells = enumerate_cells(k)?;
        let h = homology(&GradedComplex::from_cells(&cells, |c| c.boundary())?)?;
        out.push(compare(format!("cacti k={k}"), h, k));
    }
    for k in o.k_min..=o.k_max.min(4) {
        let cells = enumerate_fm_cells_with_limit(k, o.limit)?;
        let h = homology(&GradedComplex::from_cells(&cells, |c| fm_differential(c).into_terms())?)?;
        out.push(compare(format!("fm k={k}"), h, k));
    }
    for k in o.k_min..=o.k_max.min(7) {
        let c = count_cells(k)?;
        let chi: BigInt = c.iter().enumerate().map(|(d, &n)| if d % 2 == 0 { BigInt::from(n) } else { -BigInt::from(n) }).sum();
        out.push(check("homology", format!("euler cacti k={k}"), chi == BigInt::from(0), format!("chi = {chi}")));
    }
    Ok(out)
}

/// Random configuration with points in the unit square, pairwise at least 0.05 apart.
pub fn random_configuration(rng: &mut ChaCha8Rng, k: usize) -> (Configuration, Vec<f64>) {
    loop {
        let pts: Vec<num::complex::Complex64> =
            (0..k).map(|_| num::complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
        let ok = (0..k).all(|i| (i + 1..k).all(|j| (pts[i] - pts[j]).norm() > 0.05));
        if ok {
            if let Ok(c) = Configuration::new(pts) {
                return (c, w);
            }
        }
    }
}

fn flow(o: &Options) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    for k in o.k_min..=o.k_max.min(6) {
        let (mut bad, mut boundary, mut first) = (0, 0, String::new());
        for _ in 0..o.samples {
            let (cfg, w) = random_configuration(&mut rng, k);
            let w = weights_from_f64(&w)?;
            let inv = trace_flow(&cfg, &w, &tol).and_then(|f| f.tree.check_invariants(1e-9).map_err(Error::Verification));
            if let Err(e) = inv {
                bad += 1;
                if first.is_empty() {
                    first = e.to_string();
                }
                continue;
            }
            match extract_cell(&cfg, &w, &tol) {
                Ok(_) => {}
                Err(Error::BoundaryProximity { .. }) => boundary += 1,
                Err(e) => {
                    bad += 1;
                    if first.is_empty() {
                        first = e.to_string();
                    }
                }
            }
        }
        let detail = format!(
            "{} samples, {bad} failures, boundary proximity rate {:.4}{}",
            o.samples,
            boundary as f64 / o.samples.max(1) as f64,
            if first.is_empty() { String::new() } else { format!(", first: {first}") }
        );
        out.push(check("flow", format!("invariants k={k}"), bad == 0, detail));
    }
    Ok(out)
}

pub fn run(suite: Suite, o: &Options) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    if matches!(suite, Suite::All | Suite::Signs) {
        out.extend(signs(o)?);
    }
    if matches!(suite, Suite::All | Suite::Counts) {
        out.extend(counts(o)?);
    }
    if matches!(suite, Suite::All | Suite::Homology) {
        out.extend(homology_suite(o)?);
    }
    if matches!(suite, Suite::All | Suite::Flow) {
        out.extend(flow(o)?);
    }
    Ok(out)
}

/// One JSON object summarising a run.
pub fn summary_json(checks: &[Check]) -> String {
    let passed = checks.iter().filter(|c| c.passed).count();
    json!({
        "passed": passed,
        "failed": checks.len() - passed,
        "checks": checks.iter().map(|c| json!({
            "suite": c.suite, "name": c.name, "passed": c.passed, "detail": c.detail,
        })).collect::<Vec<_>>(),
    })
    .to_string()
}
