//! Critical points of `h(z) = ∏ (z - z_i)^{a_i}`: roots of
//! `p(z) = Σ a_i ∏_{j≠i} (z - z_j)`.

use num::complex::Complex64 as C;
use num::Zero;

use super::{Configuration, Tolerances};
use crate::error::{Error, Result};
use crate::metatree::WeightVector;

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalPoint {
    pub z: C,
    /// `m`: the point is a root of `p` of multiplicity `m - 1`.
    pub order: usize,
    /// `log |h(z)|`.
    pub log_abs_h: f64,
    /// `arg h(z)` on the principal branch of each factor.
    pub arg_h: f64,
}

impl CriticalPoint {
    pub fn multiplicity(&self) -> usize {
        self.order - 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalSet {
    pub points: Vec<CriticalPoint>,
    /// `log M` with `M = max |h|` over the critical points.
    pub log_max: f64,
    /// Largest `|p(root)|` after clustering, relative to the configuration scale.
    pub residual: f64,
}

impl CriticalSet {
    /// `f(b) = |h(b)| / M`.
    pub fn f(&self, i: usize) -> f64 {
        (self.points[i].log_abs_h - self.log_max).exp()
    }
}

/// Coefficients of `p`, constant term first; monic of degree `k - 1`.
pub fn p_coefficients(z: &[C], a: &[f64]) -> Vec<C> {
    let k = z.len();
    let mut out = vec![C::zero(); k];
    for i in 0..k {
        let mut poly = vec![C::new(a[i], 0.0)];
        for (j, &zj) in z.iter().enumerate() {
            if j == i {
                continue;
            }
            let mut next = vec![C::zero(); poly.len() + 1];
            for (d, &c) in poly.iter().enumerate() {
                next[d + 1] += c;
                next[d] -= c * zj;
            }
            poly = next;
        }
        for (d, c) in poly.into_iter().enumerate() {
            out[d] += c;
        }
    }
    out
}

fn horner(coeffs: &[C], z: C) -> C {
    coeffs.iter().rev().fold(C::zero(), |acc, &c| acc * z + c)
}

fn derivative(coeffs: &[C]) -> Vec<C> {
    coeffs.iter().enumerate().skip(1).map(|(d, &c)| c * d as f64).collect()
}

/// Simultaneous Ehrlich–Aberth iteration.
pub fn aberth(coeffs: &[C]) -> Vec<C> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return vec![];
    }
    let lead = coeffs[n];
    let monic: Vec<C> = coeffs.iter().map(|&c| c / lead).collect();
    let d = derivative(&monic);
    let radius = 1.0 + monic[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut roots: Vec<C> =
        (0..n).map(|j| C::from_polar(0.5 * radius, 2.0 * std::f64::consts::PI * (j as f64 + 0.25) / n as f64)).collect();
    for _ in 0..500 {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let z = roots[i];
            let pz = horner(&monic, z);
            if pz.is_zero() {
                continue;
            }
            let ratio = pz / horner(&d, z);
            let s: C = (0..n).filter(|&j| j != i).map(|j| C::new(1.0, 0.0) / (z - roots[j])).sum();
            let step = ratio / (C::new(1.0, 0.0) - ratio * s);
            if step.is_finite() {
                roots[i] = z - step;
                worst = worst.max(step.norm() / (1.0 + z.norm()));
            }
        }
        if worst < 1e-16 {
            break;
        }
    }
    roots
}

fn newton(coeffs: &[C], mut z: C) -> C {
    let d = derivative(coeffs);
    for _ in 0..50 {
        let dz = horner(coeffs, z) / horner(&d, z);
        if !dz.is_finite() {
            break;
        }
        z -= dz;
        if dz.norm() < 1e-17 * (1.0 + z.norm()) {
            break;
        }
    }
    z
}

pub(crate) fn log_h(z: &[C], a: &[f64], x: C) -> C {
    z.iter().zip(a).map(|(&zi, &ai)| (x - zi).ln() * ai).sum()
}

/// Roots of `p` in normalised coordinates, clustered into critical points.
pub(crate) fn critical_points_normalized(z: &[C], a: &[f64], tol: &Tolerances) -> Result<CriticalSet> {
    let coeffs = p_coefficients(z, a);
    let raw = aberth(&coeffs);
    // single-linkage groups at a loose radius, then a multiplicity test
    let loose = 1e-4;
    let n = raw.len();
    let mut group: Vec<usize> = (0..n).collect();
    fn find(g: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while g[r] != r {
            r = g[r];
        }
        g[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (raw[i] - raw[j]).norm() < loose {
                let (a, b) = (find(&mut group, i), find(&mut group, j));
                group[a.max(b)] = a.min(b);
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut seen: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut group, i);
        match seen[r] {
            Some(c) => clusters[c].push(i),
            None => {
                seen[r] = Some(clusters.len());
                clusters.push(vec![i]);
            }
        }
    }
    let mut points = Vec::new();
    for cl in clusters {
        let s = cl.len();
        if s == 1 {
            points.push((newton(&coeffs, raw[cl[0]]), 2));
            continue;
        }
        let centroid: C = cl.iter().map(|&i| raw[i]).sum::<C>() / s as f64;
        let mut dj = coeffs.clone();
        for _ in 0..s - 1 {
            dj = derivative(&dj);
        }
        let c = newton(&dj, centroid);
        // Taylor coefficients p^{(j)}(c)/j! for j < s vanish at a root of multiplicity s
        let mut deriv = coeffs.clone();
        let mut fact = 1.0;
        let mut multiple = true;
        for j in 0..s {
            if j > 0 {
                fact *= j as f64;
            }
            if horner(&deriv, c).norm() / fact > 1e-11 {
                multiple = false;
            }
            deriv = derivative(&deriv);
        }
        if multiple {
            points.push((c, s + 1));
            continue;
        }
        let raw = &raw;
        let min_gap = cl
            .iter()
            .flat_map(|&i| cl.iter().filter(move |&&j| j > i).map(move |&j| (raw[i] - raw[j]).norm()))
            .fold(f64::INFINITY, f64::min);
        if min_gap < tol.cluster * 100.0 {
            return Err(Error::IllConditioned(format!(
                "{s} roots of p within {min_gap:.3e} neither separate nor form a multiple root"
            )));
        }
        for &i in &cl {
            points.push((newton(&coeffs, raw[i]), 2));
        }
    }
    let total: usize = points.iter().map(|(_, m)| m - 1).sum();
    if total != z.len() - 1 {
        return Err(Error::IllConditioned(format!("multiplicities sum to {total}, expected {}", z.len() - 1)));
    }
    let residual = points.iter().map(|(c, _)| horner(&coeffs, *c).norm()).fold(0.0, f64::max);
    let mut out: Vec<CriticalPoint> = points
        .into_iter()
        .map(|(c, m)| {
            let l = log_h(z, a, c);
            CriticalPoint { z: c, order: m, log_abs_h: l.re, arg_h: l.im }
        })
        .collect();
    out.sort_by(|x, y| x.z.re.total_cmp(&y.z.re).then(x.z.im.total_cmp(&y.z.im)));
    let log_max = out.iter().map(|c| c.log_abs_h).fold(f64::NEG_INFINITY, f64::max);
    Ok(CriticalSet { points: out, log_max, residual })
}

/// Critical points in the configuration's own coordinates.
pub fn critical_points(cfg: &Configuration, w: &WeightVector, tol: &Tolerances) -> Result<CriticalSet> {
    cfg.check_weights(w)?;
    let norm = cfg.normalized(tol)?;
    let a = w.to_f64();
    let mut set = critical_points_normalized(&norm.points, &a, tol)?;
    for p in &mut set.points {
        p.z = norm.denormalize(p.z);
        let l = log_h(cfg.points(), &a, p.z);
        p.log_abs_h = l.re;
        p.arg_h = l.im;
    }
    set.log_max = set.points.iter().map(|c| c.log_abs_h).fold(f64::NEG_INFINITY, f64::max);
    Ok(set)
}
