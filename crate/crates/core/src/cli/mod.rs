//! The `operad-cells` command line.
//!
//! Exit codes: 0 success, 1 validation error, 2 resource limit,
//! 3 verification failure.

pub mod catalog;
pub mod draw;
pub mod verify;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use num::complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cacti_core::enumerate_cells;
use crate::chain_algebra::{homology, verify_d2, D2Report, GradedComplex};
use crate::error::{Error, Result};
use crate::flowtrace::{extract_cell, trace_flow, weights_from_f64, Configuration, Tolerances, TraceInput};
use crate::genfun::{compare_with_enumeration, f_series, o_series, p_series, printed_form_diagnostics, BiSeries};
use crate::metatree::{bar_differential, enumerate_bar_cells_with_limit, enumerate_fm_cells_with_limit, fm_differential, DEFAULT_CELL_LIMIT};
use catalog::{load_cached, Catalog, CellKind};

#[derive(Parser, Debug)]
#[command(name = "operad-cells", version, about = "Cells of cacti, open moduli and Fulton-MacPherson complexes")]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Refuse enumerations with more cells than this.
    #[arg(long = "limit-cells", global = true, default_value_t = DEFAULT_CELL_LIMIT)]
    pub limit_cells: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SeriesKind {
    /// Cacti cells.
    #[value(name = "P")]
    P,
    /// Open moduli bar cells.
    #[value(name = "o")]
    O,
    /// Fulton-MacPherson cells.
    #[value(name = "F")]
    F,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Enumerate cells into a catalog and print counts by dimension.
    Enumerate {
        #[arg(long, value_enum)]
        kind: CellKind,
        #[arg(long)]
        k: usize,
        /// Catalog file to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check d^2 = 0 and print integral homology.
    Homology {
        #[arg(long, value_enum)]
        kind: CellKind,
        #[arg(long)]
        k: usize,
    },
    /// Print a counting series to orders M (in t) and K (in x).
    Series {
        #[arg(value_enum)]
        which: SeriesKind,
        /// `M,K`.
        #[arg(long, default_value = "6,6")]
        orders: String,
        /// Also print the coefficient table.
        #[arg(long)]
        table: bool,
    },
    /// Trace the flow of a weighted configuration and print its cell.
    Trace {
        /// Record `k; x1,y1; ...; a1,...,ak`, or a file holding one.
        input: String,
        /// Weights overriding those in the record, comma separated.
        #[arg(long)]
        weights: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Clearance below which a point counts as on a cell wall.
        #[arg(long)]
        tol: Option<f64>,
        /// Perturb and retry this many times when the point is near a wall.
        #[arg(long, default_value_t = 0)]
        retry: usize,
    },
    /// Draw a cactus (word, optionally with --coords) or a bar/FM cell as SVG.
    Draw {
        spec: String,
        #[arg(long)]
        coords: Option<String>,
        #[arg(long, default_value_t = 30.0)]
        radius: f64,
        #[arg(long = "font-size", default_value_t = 14.0)]
        font_size: f64,
        #[arg(long = "no-base")]
        no_base: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run invariant suites; exit 3 if any check fails.
    Verify {
        #[arg(value_enum, default_value = "all")]
        suite: verify::Suite,
        /// Largest arity, or a range `lo..hi`.
        #[arg(long, default_value = "2..4")]
        k: String,
        /// Random configurations per arity for the flow suite.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s.split_once(',').ok_or_else(|| Error::Parse(format!("expected M,K, got {s:?}")))?;
    let n = |x: &str| x.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad order {x:?}")));
    Ok((n(a)?, n(b)?))
}

fn parse_k_range(s: &str) -> Result<(usize, usize)> {
    let n = |x: &str| x.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad arity {x:?}")));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (n(a)?, n(b.trim_start_matches('='))?),
        None => (2, n(s)?),
    };
    if lo < 2 || hi < lo {
        return Err(Error::Parse(format!("bad arity range {s:?}")));
    }
    Ok((lo, hi))
}

/// Comma-separated decimals or fractions `p/q`.
fn parse_floats(s: &str) -> Result<Vec<f64>> {
    let one = |x: &str| -> Option<f64> {
        match x.split_once('/') {
            Some((p, q)) => Some(p.trim().parse::<f64>().ok()? / q.trim().parse::<f64>().ok()?),
            None => x.trim().parse().ok(),
        }
    };
    s.split(',').map(|x| one(x).filter(|v| v.is_finite()).ok_or_else(|| Error::Parse(format!("bad number {x:?}")))).collect()
}

fn get_catalog(kind: CellKind, k: usize, limit: u64) -> Result<Catalog> {
    if let Some(c) = load_cached(kind, k) {
        return Ok(c);
    }
    let cat = Catalog::enumerate(kind, k, limit)?;
    if let Some(p) = catalog::cache_path(kind, k) {
        cat.write(&p)?;
    }
    Ok(cat)
}

fn homology_cmd(kind: CellKind, k: usize, limit: u64, out: &mut dyn Write) -> Result<i32> {
    let cx = match kind {
        CellKind::Cacti => GradedComplex::from_cells(&enumerate_cells(k)?, |c| c.boundary())?,
        CellKind::Bar => GradedComplex::from_cells(&enumerate_bar_cells_with_limit(k, limit)?, |c| bar_differential(c).into_terms())?,
        CellKind::Fm => GradedComplex::from_cells(&enumerate_fm_cells_with_limit(k, limit)?, |c| fm_differential(c).into_terms())?,
    };
    writeln!(out, "cells {:?}", cx.counts())?;
    match verify_d2(&cx)? {
        D2Report::Ok => writeln!(out, "d^2 = 0")?,
        other => return Err(Error::Verification(format!("d^2 != 0: {other:?}"))),
    }
    let h = homology(&cx)?;
    writeln!(out, "{h}")?;
    writeln!(out, "{}", h.summary())?;
    Ok(0)
}

fn series_cmd(which: SeriesKind, orders: &str, table: bool, out: &mut dyn Write) -> Result<i32> {
    let (m, k) = parse_pair(orders)?;
    let (s, kind): (BiSeries, CellKind) = match which {
        SeriesKind::P => (p_series(m, k)?, CellKind::Cacti),
        SeriesKind::O => (o_series(m, k)?, CellKind::Bar),
        SeriesKind::F => (f_series(m, k)?, CellKind::Fm),
    };
    write!(out, "{s}")?;
    if table {
        write!(out, "{}", s.to_table())?;
    }
    let cached: Vec<(usize, Vec<u64>)> = (2..=k).filter_map(|j| load_cached(kind, j).map(|c| (j, c.counts()))).collect();
    if !cached.is_empty() {
        let ks: Vec<String> = cached.iter().map(|(j, _)| j.to_string()).collect();
        match compare_with_enumeration(&s, &cached) {
            None => writeln!(out, "enumeration agrees for k = {}", ks.join(","))?,
            Some(mm) => writeln!(out, "enumeration MISMATCH: {mm}")?,
        }
    }
    if which == SeriesKind::O && k >= 3 {
        let d = printed_form_diagnostics(m.max(3), k)?;
        if let Some((x, t)) = d.quad1_first_difference {
            writeln!(out, "note: the printed quadratic identity for o differs from enumeration first at x^{x} t^{t}")?;
        }
    }
    Ok(0)
}

fn load_trace_input(input: &str, weights: Option<&str>) -> Result<TraceInput> {
    let text = if input.contains(';') { input.to_string() } else { std::fs::read_to_string(input)? };
    let record = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .ok_or_else(|| Error::Parse("no configuration record".into()))?;
    let mut t = TraceInput::parse(record)?;
    if let Some(w) = weights {
        let w = parse_floats(w)?;
        if w.len() != t.config.k() {
            return Err(Error::ArityMismatch { expected: t.config.k(), found: w.len() });
        }
        t.weights = weights_from_f64(&w)?;
    }
    Ok(t)
}

fn trace_cmd(input: &str, weights: Option<&str>, seed: u64, tol: Option<f64>, retry: usize, out: &mut dyn Write) -> Result<i32> {
    let t = load_trace_input(input, weights)?;
    let mut tols = Tolerances::default();
    if let Some(b) = tol {
        tols.boundary = b;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = t.config.clone();
    let scale = {
        let pts = cfg.points();
        let mean: C = pts.iter().sum::<C>() / pts.len() as f64;
        pts.iter().map(|z| (z - mean).norm()).fold(0.0, f64::max)
    };
    let mut attempt = 0;
    loop {
        let flow = trace_flow(&cfg, &t.weights, &tols)?;
        writeln!(out, "configuration {}", TraceInput { config: cfg.clone(), weights: t.weights.clone() })?;
        for (j, p) in flow.critical.points.iter().enumerate() {
            writeln!(
                out,
                "critical b{j} at {:.10}{:+.10}i multiplicity {} f={:.9}",
                p.z.re,
                p.z.im,
                p.multiplicity(),
                flow.critical.f(j)
            )?;
        }
        writeln!(out, "{}", flow.tree)?;
        match extract_cell(&cfg, &t.weights, &tols) {
            Ok(r) => {
                writeln!(out, "cactus {}", r.cactus)?;
                writeln!(out, "cell {}", r.cell)?;
                write!(out, "point {}", r.point)?;
                let d = &r.flow.diagnostics;
                writeln!(
                    out,
                    "diagnostics separatrices={} steps={} phase_residual={:.2e} critical_residual={:.2e} clearance={:.3e}",
                    d.separatrices, d.total_steps, d.max_phase_residual, d.critical_residual, d.clearance
                )?;
                return Ok(0);
            }
            Err(Error::BoundaryProximity { clearance }) if attempt < retry => {
                attempt += 1;
                let eps = 1e-7 * scale;
                let moved: Vec<C> =
                    cfg.points().iter().map(|z| z + C::new(rng.gen_range(-eps..eps), rng.gen_range(-eps..eps))).collect();
                writeln!(out, "retry {attempt}: clearance {clearance:.3e}, perturbing by up to {eps:.1e}")?;
                cfg = Configuration::new(moved)?;
            }
            Err(e) => return Err(e),
        }
    }
}

fn verify_cmd(suite: verify::Suite, k: &str, samples: usize, seed: u64, limit: u64, out: &mut dyn Write) -> Result<i32> {
    let (k_min, k_max) = parse_k_range(k)?;
    let checks = verify::run(suite, &verify::Options { k_min, k_max, samples, seed, limit })?;
    for c in &checks {
        writeln!(out, "{} {} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.suite, c.name, c.detail)?;
    }
    writeln!(out, "{}", verify::summary_json(&checks))?;
    Ok(if checks.iter().all(|c| c.passed) { 0 } else { 3 })
}

/// Runs one command, writing its report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    if let Some(j) = cli.jobs {
        // the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
    let limit = cli.limit_cells;
    match cli.command {
        Command::Enumerate { kind, k, out: path } => {
            let cat = get_catalog(kind, k, limit)?;
            writeln!(out, "{}", cat.counts_line())?;
            writeln!(out, "total {} sha256 {}", cat.records.len(), cat.hash())?;
            if let Some(p) = path {
                cat.write(&p)?;
                writeln!(out, "wrote {}", p.display())?;
            }
            Ok(0)
        }
        Command::Homology { kind, k } => homology_cmd(kind, k, limit, out),
        Command::Series { which, orders, table } => series_cmd(which, &orders, table, out),
        Command::Trace { input, weights, seed, tol, retry } => trace_cmd(&input, weights.as_deref(), seed, tol, retry, out),
        Command::Draw { spec, coords, radius, font_size, no_base, out: path } => {
            let coords = coords.as_deref().map(parse_floats).transpose()?;
            let spec = draw::DrawingSpec::parse(&spec, coords.as_deref())?;
            let svg = draw::render(&spec, &draw::Style { radius, font_size, base_marker: !no_base });
            match path {
                Some(p) => {
                    std::fs::write(&p, svg)?;
                    writeln!(out, "wrote {}", p.display())?;
                }
                None => out.write_all(svg.as_bytes())?,
            }
            Ok(0)
        }
        Command::Verify { suite, k, samples, seed } => verify_cmd(suite, &k, samples, seed, limit, out),
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn run_from_env() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    // buffer the whole report so output order never depends on worker timing
    let mut buf = Vec::new();
    let result = run(cli, &mut buf);
    let _ = std::io::stdout().write_all(&buf);
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
