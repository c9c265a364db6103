//! Line-oriented cell catalogs with a content hash in the header.
//!
//! ```text
//! operad-cells-catalog 1
//! kind bar
//! k 3
//! generator operad-cells 0.1.0
//! records 84
//! sha256 <hex of the record lines>
//! bar<TAB>1(23) : root=12 ; v{23}=12<TAB>0
//! ...
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::cacti_core::{enumerate_cells_with_limit, CactusCell};
use crate::error::{Error, Result};
use crate::metatree::{enumerate_bar_cells_with_limit, enumerate_fm_cells_with_limit, BarCell, FmCell};

pub const SCHEMA: u32 = 1;
pub const GENERATOR: &str = concat!("operad-cells ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum CellKind {
    Cacti,
    Bar,
    Fm,
}

impl CellKind {
    pub fn name(self) -> &'static str {
        match self {
            CellKind::Cacti => "cacti",
            CellKind::Bar => "bar",
            CellKind::Fm => "fm",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "cacti" => Ok(CellKind::Cacti),
            "bar" => Ok(CellKind::Bar),
            "fm" => Ok(CellKind::Fm),
            _ => Err(Error::Parse(format!("unknown cell kind {s:?}"))),
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Record {
    pub dim: usize,
    pub text: String,
}

/// Records are kept sorted by `(dim, text)`, the order the hash covers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Catalog {
    pub kind: CellKind,
    pub k: usize,
    pub generator: String,
    pub records: Vec<Record>,
}

fn record_line(kind: CellKind, r: &Record) -> String {
    format!("{}\t{}\t{}\n", kind.name(), r.text, r.dim)
}

impl Catalog {
    pub fn new(kind: CellKind, k: usize, mut records: Vec<Record>) -> Self {
        records.sort();
        Catalog { kind, k, generator: GENERATOR.to_string(), records }
    }

    pub fn enumerate(kind: CellKind, k: usize, limit: u64) -> Result<Self> {
        fn collect<C: fmt::Display>(by_dim: Vec<Vec<C>>, text: impl Fn(&C) -> String) -> Vec<Record> {
            by_dim
                .into_iter()
                .enumerate()
                .flat_map(|(dim, cells)| cells.into_iter().map(|c| Record { dim, text: text(&c) }).collect::<Vec<_>>())
                .collect()
        }
        let records = match kind {
            CellKind::Cacti => collect(enumerate_cells_with_limit(k, limit)?, |c: &CactusCell| c.to_comma_string()),
            CellKind::Bar => collect(enumerate_bar_cells_with_limit(k, limit)?, |c: &BarCell| c.to_string()),
            CellKind::Fm => collect(enumerate_fm_cells_with_limit(k, limit)?, |c: &FmCell| c.to_string()),
        };
        Ok(Catalog::new(kind, k, records))
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for r in &self.records {
            h.update(record_line(self.kind, r).as_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Cells per dimension, trailing zeros dropped.
    pub fn counts(&self) -> Vec<u64> {
        let top = self.records.iter().map(|r| r.dim + 1).max().unwrap_or(0);
        let mut out = vec![0u64; top];
        for r in &self.records {
            out[r.dim] += 1;
        }
        out
    }

    /// `"0:6 1:18 2:12"`.
    pub fn counts_line(&self) -> String {
        self.counts().iter().enumerate().map(|(d, n)| format!("{d}:{n}")).collect::<Vec<_>>().join(" ")
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "operad-cells-catalog {SCHEMA}\nkind {}\nk {}\ngenerator {}\nrecords {}\nsha256 {}\n",
            self.kind,
            self.k,
            self.generator,
            self.records.len(),
            self.hash()
        );
        for r in &self.records {
            s.push_str(&record_line(self.kind, r));
        }
        s
    }

    /// Parses and validates a catalog: header fields, hash, and every record
    /// reparsed as a cell of the stated kind, arity and dimension.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut field = |name: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("catalog ends before {name}")))?;
            line.strip_prefix(name)
                .and_then(|v| v.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| Error::Parse(format!("expected {name:?}, found {line:?}")))
        };
        let schema = field("operad-cells-catalog")?;
        if schema != SCHEMA.to_string() {
            return Err(Error::Parse(format!("catalog schema {schema}, expected {SCHEMA}")));
        }
        let kind = CellKind::from_name(&field("kind")?)?;
        let k: usize = field("k")?.parse().map_err(|_| Error::Parse("bad k".into()))?;
        let generator = field("generator")?;
        let n: usize = field("records")?.parse().map_err(|_| Error::Parse("bad record count".into()))?;
        let hash = field("sha256")?;
        let mut records = Vec::with_capacity(n);
        for line in lines {
            let mut parts = line.split('\t');
            let (Some(kn), Some(t), Some(d), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse(format!("bad record {line:?}")));
            };
            if kn != kind.name() {
                return Err(Error::Parse(format!("record of kind {kn} in a {kind} catalog")));
            }
            let dim: usize = d.parse().map_err(|_| Error::Parse(format!("bad dimension in {line:?}")))?;
            let (ck, cd) = match kind {
                CellKind::Cacti => {
                    let c = CactusCell::parse(t)?;
                    (c.k(), c.dim())
                }
                CellKind::Bar => {
                    let c = BarCell::parse(t)?;
                    (c.k(), c.dim())
                }
                CellKind::Fm => {
                    let c = FmCell::parse(t)?;
                    (c.k(), c.dim())
                }
            };
            if ck != k || cd != dim {
                return Err(Error::Verification(format!("record {t} has k={ck} dim={cd}, listed as k={k} dim={dim}")));
            }
            records.push(Record { dim, text: t.to_string() });
        }
        if records.len() != n {
            return Err(Error::Verification(format!("{} records, header says {n}", records.len())));
        }
        if !records.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Verification("records are not in canonical order".into()));
        }
        let cat = Catalog { kind, k, generator, records };
        if cat.hash() != hash {
            return Err(Error::Verification(format!("content hash {} does not match header {hash}", cat.hash())));
        }
        Ok(cat)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        // write then rename so a concurrent reader never sees a partial file
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_text())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Catalog::parse(&std::fs::read_to_string(path)?)
    }
}

/// Cache location for `(kind, k)` under `OPERAD_CELLS_CACHE`, keyed by the
/// generator version.
pub fn cache_path(kind: CellKind, k: usize) -> Option<PathBuf> {
    let dir = std::env::var_os("OPERAD_CELLS_CACHE")?;
    Some(PathBuf::from(dir).join(format!("{}-k{k}-v{}.catalog", kind.name(), env!("CARGO_PKG_VERSION"))))
}

/// A cached catalog if present and valid.
pub fn load_cached(kind: CellKind, k: usize) -> Option<Catalog> {
    let cat = Catalog::read(&cache_path(kind, k)?).ok()?;
    (cat.kind == kind && cat.k == k && cat.generator == GENERATOR).then_some(cat)
}
