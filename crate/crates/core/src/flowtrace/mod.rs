//! Numerical realisation of the flow of `h(z) = ∏ (z - z_i)^{a_i}`: critical
//! points, separatrices, the labelled tree of a configuration and its bar cell.
//!
//! All tracing happens in normalised coordinates (mean zero, unit norm);
//! outputs are mapped back. Positive rescaling and translation leave every
//! label unchanged, so the base angle only sees rotations.

mod extract;
mod roots;
mod trace;
mod tree;

use std::fmt;

use num::complex::Complex64 as C;
use num::ToPrimitive;

use crate::error::{Error, Result};
use crate::metatree::WeightVector;

pub use extract::{build_labelled_tree, extract_cell, theta_angle, trace_flow, FlowTrace, TraceDiagnostics, TraceResult};
pub use roots::{aberth, critical_points, p_coefficients, CriticalPoint, CriticalSet};
pub use trace::{Separatrix, Terminal};
pub use tree::{BasePoint, BlackVertex, LabelledTreeNum, Node, TreeEdge};

/// Tracing tolerances; lengths are in normalised coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances {
    /// Minimum pairwise distance of the points.
    pub separation: f64,
    /// Radius below which roots of `p` form one critical point.
    pub cluster: f64,
    /// Zero capture radius as a fraction of `min(a_i · spacing, distance to Crit)`.
    pub zero_capture: f64,
    pub critical_capture: f64,
    /// Step length as a fraction of the distance to the nearest singular point.
    pub step: f64,
    /// Bound on `|Im L - θ|` after correction.
    pub corrector: f64,
    pub max_steps: usize,
    /// First point of a separatrix, as a fraction of the distance to the nearest other singular point.
    pub start_offset: f64,
    /// Start of the distinguished ray on the positive real axis.
    pub ray_radius: f64,
    /// Relative tolerance for equal `f` levels.
    pub f_cluster: f64,
    /// Distance to a cell wall below which extraction refuses to decide.
    pub boundary: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            separation: 1e-8,
            cluster: 1e-7,
            zero_capture: 0.05,
            critical_capture: 1e-7,
            step: 0.05,
            corrector: 1e-13,
            max_steps: 200_000,
            start_offset: 1e-3,
            ray_radius: 1e7,
            f_cluster: 1e-9,
            boundary: 1e-6,
        }
    }
}

/// Pairwise distinct points `z_1..z_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    points: Vec<C>,
}

/// A configuration translated to mean zero and scaled to unit norm.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Normalized {
    pub points: Vec<C>,
    pub mean: C,
    pub scale: f64,
}

impl Normalized {
    pub fn denormalize(&self, z: C) -> C {
        z * self.scale + self.mean
    }
}

impl Configuration {
    pub fn new(points: Vec<C>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidCoordinates(format!("{} points; at least 2 are needed", points.len())));
        }
        if points.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidCoordinates("non-finite point".into()));
        }
        let cfg = Configuration { points };
        cfg.normalized(&Tolerances::default())?;
        Ok(cfg)
    }

    pub fn points(&self) -> &[C] {
        &self.points
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub(crate) fn normalized(&self, tol: &Tolerances) -> Result<Normalized> {
        let k = self.points.len() as f64;
        let mean: C = self.points.iter().sum::<C>() / k;
        let scale = self.points.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>().sqrt();
        if scale == 0.0 {
            return Err(Error::InvalidCoordinates("all points coincide".into()));
        }
        let points: Vec<C> = self.points.iter().map(|z| (z - mean) / scale).collect();
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let d = (points[i] - points[j]).norm();
                if d < tol.separation {
                    return Err(Error::InvalidCoordinates(format!(
                        "points {} and {} are {d:.3e} apart after normalisation",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Normalized { points, mean, scale })
    }

    pub(crate) fn check_weights(&self, w: &WeightVector) -> Result<()> {
        if w.len() != self.k() {
            return Err(Error::ArityMismatch { expected: self.k(), found: w.len() });
        }
        Ok(())
    }

    /// `λ z + μ`.
    pub fn affine(&self, lambda: C, mu: C) -> Result<Self> {
        Configuration::new(self.points.iter().map(|z| z * lambda + mu).collect())
    }

    /// `z'_{π(i)} = z_i`.
    pub fn permute(&self, perm: &crate::cacti_core::Permutation) -> Result<Self> {
        let mut out = vec![C::new(0.0, 0.0); self.k()];
        for (i, &z) in self.points.iter().enumerate() {
            out[perm.apply(i + 1) - 1] = z;
        }
        Configuration::new(out)
    }
}

/// A configuration with weights, as in the text record
/// `k; z_1re,z_1im; ...; a_1,...,a_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceInput {
    pub config: Configuration,
    pub weights: WeightVector,
}

impl TraceInput {
    pub fn parse(s: &str) -> Result<Self> {
        let fields: Vec<&str> = s.trim().split(';').map(str::trim).collect();
        let k: usize = fields
            .first()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| Error::Parse("record must start with k".into()))?;
        if fields.len() != k + 2 {
            return Err(Error::Parse(format!("expected {} fields for k = {k}, found {}", k + 2, fields.len())));
        }
        let num = |x: &str| -> Result<f64> { x.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number {x:?}"))) };
        let mut points = Vec::with_capacity(k);
        for f in &fields[1..=k] {
            let (re, im) = f.split_once(',').ok_or_else(|| Error::Parse(format!("bad point {f:?}")))?;
            points.push(C::new(num(re)?, num(im)?));
        }
        let weights: Vec<f64> = fields[k + 1].split(',').map(num).collect::<Result<_>>()?;
        if weights.len() != k {
            return Err(Error::Parse(format!("{} weights for k = {k}", weights.len())));
        }
        Ok(TraceInput { config: Configuration::new(points)?, weights: weights_from_f64(&weights)? })
    }
}

impl fmt::Display for TraceInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.config.k())?;
        for z in self.config.points() {
            write!(f, "; {},{}", z.re, z.im)?;
        }
        let w: Vec<String> = self.weights.weights().iter().map(|x| x.to_f64().unwrap().to_string()).collect();
        write!(f, "; {}", w.join(","))
    }
}

/// Positive weights, rescaled to sum to one and stored as exact rationals.
pub fn weights_from_f64(w: &[f64]) -> Result<WeightVector> {
    if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidCoordinates("weights must be positive".into()));
    }
    let s: f64 = w.iter().sum();
    let mut q: Vec<num::BigRational> = w.iter().map(|&x| num::BigRational::from_float(x / s).unwrap()).collect();
    let total: num::BigRational = q.iter().sum();
    let last = q.len() - 1;
    q[last] = &q[last] + (num::BigRational::from_integer(1.into()) - total);
    WeightVector::new(q)
}
