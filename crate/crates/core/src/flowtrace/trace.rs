//! Level lines of `arg h`, followed in the direction of decreasing `|h|`.
//!
//! Along `dz/ds = -1/L'(z)` with `L = log h`, `Re L` drops at unit rate and
//! `Im L` is constant; a Newton corrector along `-i/L'` removes drift in
//! `Im L`, whose value is continued incrementally so no branch cut is crossed.

use std::f64::consts::PI;

use num::complex::Complex64 as C;

use super::roots::CriticalSet;
use super::Tolerances;
use crate::error::{Error, Result};

/// `L'`, its derivatives and increments of `Im L`, in normalised coordinates.
#[derive(Clone, Debug)]
pub(crate) struct Field<'a> {
    pub z: &'a [C],
    pub a: &'a [f64],
}

impl Field<'_> {
    pub fn dlog(&self, x: C) -> C {
        self.z.iter().zip(self.a).map(|(&zi, &ai)| ai / (x - zi)).sum()
    }

    pub fn log_abs(&self, x: C) -> f64 {
        self.z.iter().zip(self.a).map(|(&zi, &ai)| ai * (x - zi).norm().ln()).sum()
    }

    /// `Im L(to) - Im L(from)` along a short segment.
    pub fn arg_increment(&self, from: C, to: C) -> f64 {
        self.z.iter().zip(self.a).map(|(&zi, &ai)| ai * ((to - zi) / (from - zi)).arg()).sum()
    }

    /// `L^{(m)}(b) / m!`, the leading Taylor coefficient at a critical point of order `m`.
    pub fn leading_coefficient(&self, b: C, m: usize) -> C {
        let s: C = self.z.iter().zip(self.a).map(|(&zi, &ai)| ai / (b - zi).powi(m as i32)).sum();
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        s * sign / m as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Terminal {
    /// Zero `z_i`, 0-based.
    Zero(usize),
    /// Index into the critical set.
    Critical(usize),
}

#[derive(Clone, Debug)]
pub struct Separatrix {
    /// Source critical point; `None` for the distinguished ray from infinity.
    pub source: Option<usize>,
    pub direction: usize,
    /// Angle of the outgoing direction at the source.
    pub start_angle: f64,
    /// Samples in the configuration's own coordinates.
    pub samples: Vec<C>,
    pub terminal: Terminal,
    /// Direction from the terminal vertex along which the line arrives.
    pub terminal_angle: f64,
    pub steps: usize,
    /// Largest `|Im L - θ|` after correction.
    pub max_residual: f64,
}

impl Separatrix {
    pub fn terminal_tangent(&self) -> C {
        C::from_polar(1.0, self.terminal_angle)
    }
}

pub(crate) struct Tracer<'a> {
    pub field: Field<'a>,
    pub crit: &'a CriticalSet,
    pub tol: &'a Tolerances,
    /// Capture radius per zero.
    pub zero_radius: Vec<f64>,
    pub to_original: &'a dyn Fn(C) -> C,
}

impl<'a> Tracer<'a> {
    pub fn new(field: Field<'a>, crit: &'a CriticalSet, tol: &'a Tolerances, to_original: &'a dyn Fn(C) -> C) -> Self {
        let zero_radius = (0..field.z.len())
            .map(|i| {
                let zi = field.z[i];
                let dz = field
                    .z
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &zj)| (zj - zi).norm())
                    .fold(f64::INFINITY, f64::min);
                let dc = crit.points.iter().map(|c| (c.z - zi).norm()).fold(f64::INFINITY, f64::min);
                tol.zero_capture * (field.a[i] * dz).min(dc)
            })
            .collect();
        Tracer { field, crit, tol, zero_radius, to_original }
    }

    fn nearest_singular(&self, x: C) -> f64 {
        let dz = self.field.z.iter().map(|&zi| (x - zi).norm()).fold(f64::INFINITY, f64::min);
        let dc = self.crit.points.iter().map(|c| (x - c.z).norm()).fold(f64::INFINITY, f64::min);
        dz.min(dc)
    }

    fn captured(&self, x: C, source: Option<usize>) -> Option<Terminal> {
        for (i, &zi) in self.field.z.iter().enumerate() {
            if (x - zi).norm() < self.zero_radius[i] {
                return Some(Terminal::Zero(i));
            }
        }
        for (j, c) in self.crit.points.iter().enumerate() {
            if Some(j) != source && (x - c.z).norm() < self.tol.critical_capture {
                return Some(Terminal::Critical(j));
            }
        }
        None
    }

    /// Limit direction at `z_i` of the level line through `x`.
    fn terminal_angle_at_zero(&self, i: usize, x: C) -> f64 {
        let zi = self.field.z[i];
        let ai = self.field.a[i];
        let mut phi = (x - zi).arg();
        for (l, (&zl, &al)) in self.field.z.iter().zip(self.field.a).enumerate() {
            if l != i {
                phi += al / ai * ((x - zl) / (zi - zl)).arg();
            }
        }
        phi.rem_euclid(2.0 * PI)
    }

    /// Follows the level line `Im L = theta` from `x` (whose tracked phase is
    /// `phase`) until capture.
    pub fn run(&self, mut x: C, mut phase: f64, theta: f64, source: Option<usize>, direction: usize, start_angle: f64) -> Result<Separatrix> {
        let f = &self.field;
        let mut samples = vec![(self.to_original)(x)];
        let mut steps = 0;
        let mut max_residual: f64 = 0.0;
        let mut last_log = f.log_abs(x);
        let rhs = |z: C| -> C { -C::new(1.0, 0.0) / f.dlog(z) };
        loop {
            if let Some(t) = self.captured(x, source) {
                let terminal_angle = match t {
                    Terminal::Zero(i) => self.terminal_angle_at_zero(i, x),
                    Terminal::Critical(j) => (x - self.crit.points[j].z).arg().rem_euclid(2.0 * PI),
                };
                return Ok(Separatrix {
                    source,
                    direction,
                    start_angle,
                    samples,
                    terminal: t,
                    terminal_angle,
                    steps,
                    max_residual,
                });
            }
            steps += 1;
            if steps > self.tol.max_steps {
                return Err(Error::StepLimit(self.tol.max_steps));
            }
            let v = rhs(x);
            let ds = self.tol.step * self.nearest_singular(x) / v.norm();
            let k1 = v;
            let k2 = rhs(x + k1 * (ds / 2.0));
            let k3 = rhs(x + k2 * (ds / 2.0));
            let k4 = rhs(x + k3 * ds);
            let mut y = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (ds / 6.0);
            let mut p = phase + f.arg_increment(x, y);
            for _ in 0..4 {
                let delta = p - theta;
                if delta.abs() < self.tol.corrector {
                    break;
                }
                let y2 = y - C::new(0.0, delta) / f.dlog(y);
                p += f.arg_increment(y, y2);
                y = y2;
            }
            max_residual = max_residual.max((p - theta).abs());
            let now = f.log_abs(y);
            if now >= last_log {
                return Err(Error::IllConditioned(format!("|h| failed to decrease along a level line at step {steps}")));
            }
            last_log = now;
            x = y;
            phase = p;
            samples.push((self.to_original)(x));
        }
    }

    /// Descending directions at critical point `j`, anticlockwise from angle 0.
    pub fn out_angles(&self, j: usize) -> Vec<f64> {
        let b = &self.crit.points[j];
        let m = b.order;
        let c = self.field.leading_coefficient(b.z, m);
        let mut angles: Vec<f64> =
            (0..m).map(|d| ((PI + 2.0 * PI * d as f64 - c.arg()) / m as f64).rem_euclid(2.0 * PI)).collect();
        angles.sort_by(f64::total_cmp);
        angles
    }

    /// The `d`-th outgoing separatrix of critical point `j`.
    pub fn separatrix(&self, j: usize, d: usize) -> Result<Separatrix> {
        let angles = self.out_angles(j);
        if d >= angles.len() {
            return Err(Error::InvalidCoordinates(format!(
                "direction {d} at a critical point with {} outgoing lines",
                angles.len()
            )));
        }
        let b = self.crit.points[j].z;
        let dist = self
            .field
            .z
            .iter()
            .map(|&zi| (b - zi).norm())
            .chain(self.crit.points.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, c)| (c.z - b).norm()))
            .fold(f64::INFINITY, f64::min);
        let eps = self.tol.start_offset * dist;
        let x = b + C::from_polar(eps, angles[d]);
        let theta = self.crit.points[j].arg_h;
        let phase = theta + self.field.arg_increment(b, x);
        self.run(x, phase, theta, Some(j), d, angles[d])
    }

    /// The level line `arg h = 0` asymptotic to direction `1` at infinity.
    pub fn distinguished_ray(&self) -> Result<Separatrix> {
        let r = self.tol.ray_radius;
        let mut y = 0.0;
        let im_l = |y: f64| -> f64 {
            let x = C::new(r, y);
            self.field.z.iter().zip(self.field.a).map(|(&zi, &ai)| ai * (x - zi).arg()).sum()
        };
        for _ in 0..50 {
            let x = C::new(r, y);
            let g = im_l(y);
            let dg = self.field.dlog(x).re;
            let dy = g / dg;
            y -= dy;
            if dy.abs() < 1e-15 * r {
                break;
            }
        }
        let x = C::new(r, y);
        let phase = im_l(y);
        self.run(x, phase, 0.0, None, 0, 0.0)
    }
}
