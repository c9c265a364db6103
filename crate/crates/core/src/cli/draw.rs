//! SVG drawings of cacti and of decorated nested trees.
//!
//! A cactus is laid out as a chain of tangent circles of equal radius: the
//! walk starts at the bottom of the first lobe and runs anticlockwise; a new
//! lobe is attached externally at the point where the walk leaves the
//! current one. The base point is drawn slightly past the start of the
//! first arc, on the first lobe.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num::complex::Complex64 as C;
use num::ToPrimitive;

use crate::cacti_core::{CactusCell, CactusPoint};
use crate::error::{Error, Result};
use crate::metatree::{mask_name, BarCell, FmCell, Input, NestedTree};

/// Largest arity the layout accepts.
pub const MAX_DRAW_K: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct Style {
    pub radius: f64,
    pub font_size: f64,
    pub base_marker: bool,
}

impl Default for Style {
    fn default() -> Self {
        Style { radius: 30.0, font_size: 14.0, base_marker: true }
    }
}

/// What to draw.
#[derive(Clone, Debug, PartialEq)]
pub enum DrawingSpec {
    Cactus(CactusPoint),
    Bar(BarCell),
    Fm(FmCell),
}

impl DrawingSpec {
    /// A word, optionally with lengths, or a bar / FM cell in text form.
    pub fn parse(text: &str, coords: Option<&[f64]>) -> Result<Self> {
        let spec = if text.contains(':') {
            if text.contains('[') {
                DrawingSpec::Fm(FmCell::parse(text)?)
            } else {
                DrawingSpec::Bar(BarCell::parse(text)?)
            }
        } else {
            let cell = CactusCell::parse(text)?;
            match coords {
                None => DrawingSpec::Cactus(CactusPoint::barycenter(&cell)),
                Some(c) => {
                    let q = c
                        .iter()
                        .map(|&x| num::BigRational::from_float(x).ok_or_else(|| Error::InvalidCoordinates(format!("{x}"))))
                        .collect::<Result<Vec<_>>>()?;
                    DrawingSpec::Cactus(CactusPoint::new(cell, q)?)
                }
            }
        };
        if spec.k() > MAX_DRAW_K {
            return Err(Error::InvalidCoordinates(format!("arity {} beyond the drawing limit {MAX_DRAW_K}", spec.k())));
        }
        Ok(spec)
    }

    fn k(&self) -> usize {
        match self {
            DrawingSpec::Cactus(p) => p.cell().k(),
            DrawingSpec::Bar(c) => c.k(),
            DrawingSpec::Fm(c) => c.k(),
        }
    }
}

struct Lobe {
    center: C,
    entry_angle: f64,
}

/// Circle centres for each lobe and the base point, with the first lobe
/// centred at the origin.
fn layout(p: &CactusPoint, r: f64) -> (Vec<Lobe>, C) {
    let cell = p.cell();
    let k = cell.k();
    let mut lobes: Vec<Option<Lobe>> = (0..k).map(|_| None).collect();
    let mut used = vec![0.0f64; k];
    let at = |l: &Lobe, s: f64| l.center + C::from_polar(r, l.entry_angle + 2.0 * PI * s);
    let mut prev: Option<usize> = None;
    for (pos, t) in p.coords().iter().enumerate() {
        let j = cell.letter(pos) - 1;
        if lobes[j].is_none() {
            lobes[j] = Some(match prev {
                None => Lobe { center: C::new(0.0, 0.0), entry_angle: -PI / 2.0 },
                Some(i) => {
                    let host = lobes[i].as_ref().unwrap();
                    let q = at(host, used[i]);
                    let out = (q - host.center) / r;
                    Lobe { center: q + out * r, entry_angle: (-out).arg() }
                }
            });
        }
        used[j] += t.to_f64().unwrap();
        prev = Some(j);
    }
    let lobes: Vec<Lobe> = lobes.into_iter().map(|l| l.expect("surjective word")).collect();
    let first = cell.letter(0) - 1;
    let nudge = (p.coords()[0].to_f64().unwrap() * 0.1).min(0.03);
    let base = at(&lobes[first], nudge);
    (lobes, base)
}

struct Svg {
    body: String,
    min: C,
    max: C,
}

impl Svg {
    fn new() -> Self {
        Svg { body: String::new(), min: C::new(f64::INFINITY, f64::INFINITY), max: C::new(f64::NEG_INFINITY, f64::NEG_INFINITY) }
    }

    fn extend(&mut self, z: C, pad: f64) {
        self.min = C::new(self.min.re.min(z.re - pad), self.min.im.min(z.im - pad));
        self.max = C::new(self.max.re.max(z.re + pad), self.max.im.max(z.im + pad));
    }

    /// Screen coordinates flip the imaginary axis.
    fn circle(&mut self, c: C, r: f64, class: &str) {
        self.extend(c, r);
        writeln!(self.body, r#"  <circle class="{class}" cx="{:.3}" cy="{:.3}" r="{:.3}"/>"#, c.re, -c.im, r).unwrap();
    }

    fn text(&mut self, c: C, size: f64, s: &str) {
        self.extend(c, size);
        writeln!(
            self.body,
            r#"  <text x="{:.3}" y="{:.3}" font-size="{size}" text-anchor="middle" dominant-baseline="central">{}</text>"#,
            c.re,
            -c.im,
            escape(s)
        )
        .unwrap();
    }

    fn line(&mut self, a: C, b: C, class: &str) {
        self.extend(a, 0.0);
        self.extend(b, 0.0);
        writeln!(self.body, r#"  <line class="{class}" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#, a.re, -a.im, b.re, -b.im)
            .unwrap();
    }

    fn finish(self) -> String {
        let pad = 10.0;
        let (x0, y0) = (self.min.re - pad, -self.max.im - pad);
        let (w, h) = (self.max.re - self.min.re + 2.0 * pad, self.max.im - self.min.im + 2.0 * pad);
        format!(
            concat!(
                r#"<?xml version="1.0" encoding="UTF-8"?>"#,
                "\n",
                r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.3} {:.3} {:.3} {:.3}" width="{:.0}" height="{:.0}">"#,
                "\n",
                r#"  <style>.lobe{{fill:none;stroke:black;stroke-width:1.5}} .base{{fill:black}} .edge{{stroke:gray;stroke-width:1.5}} .i0{{stroke-dasharray:4 3}}</style>"#,
                "\n{}</svg>\n"
            ),
            x0, y0, w, h, w, h, self.body
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Draws one cactus at `offset`, labelling lobe `j` by `names[j]`; returns
/// the lobe centres.
fn draw_cactus(svg: &mut Svg, p: &CactusPoint, names: &[String], offset: C, style: &Style) -> Vec<C> {
    let (lobes, base) = layout(p, style.radius);
    for (l, name) in lobes.iter().zip(names) {
        svg.circle(l.center + offset, style.radius, "lobe");
        svg.text(l.center + offset, style.font_size, name);
    }
    if style.base_marker {
        svg.circle(base + offset, style.radius * 0.1, "base");
    }
    lobes.iter().map(|l| l.center + offset).collect()
}

fn cactus_extent(p: &CactusPoint, r: f64) -> (C, C) {
    let (lobes, _) = layout(p, r);
    let lo = lobes.iter().fold(C::new(f64::INFINITY, f64::INFINITY), |m, l| C::new(m.re.min(l.center.re - r), m.im.min(l.center.im - r)));
    let hi = lobes
        .iter()
        .fold(C::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |m, l| C::new(m.re.max(l.center.re + r), m.im.max(l.center.im + r)));
    (lo, hi)
}

/// Clusters for the vertices of a nested tree, one column per depth, joined
/// by an edge from each child cluster to the lobe of the parent it fills.
fn draw_tree(tree: &NestedTree, labels: &[CactusCell], i1: Option<&[bool]>, style: &Style) -> String {
    let mut svg = Svg::new();
    let k = tree.k();
    let n = tree.len();
    let mut depth = vec![0usize; n];
    for v in 1..n {
        depth[v] = depth[tree.parent(v).unwrap()] + 1;
    }
    let points: Vec<CactusPoint> = labels.iter().map(CactusPoint::barycenter).collect();
    let extents: Vec<(C, C)> = points.iter().map(|p| cactus_extent(p, style.radius)).collect();
    let col_width = extents.iter().map(|(lo, hi)| hi.re - lo.re).fold(0.0, f64::max) + 4.0 * style.radius;
    let mut next_y = vec![0.0f64; n + 1];
    let mut offsets = vec![C::new(0.0, 0.0); n];
    for v in 0..n {
        let (lo, hi) = extents[v];
        let d = depth[v];
        let y = next_y[d];
        offsets[v] = C::new(d as f64 * col_width - lo.re, y - hi.im);
        next_y[d] = y - (hi.im - lo.im) - 2.0 * style.radius;
    }
    let mut centres: Vec<Vec<C>> = Vec::with_capacity(n);
    for v in 0..n {
        let names: Vec<String> = tree
            .inputs(v)
            .into_iter()
            .map(|x| match x {
                Input::Leaf(l) => l.to_string(),
                Input::Vertex(c) => mask_name(tree.vertex(c), k),
            })
            .collect();
        centres.push(draw_cactus(&mut svg, &points[v], &names, offsets[v], style));
    }
    for v in 0..n {
        for (j, x) in tree.inputs(v).into_iter().enumerate() {
            if let Input::Vertex(c) = x {
                let class = match i1 {
                    Some(m) if !m[c] => "edge i0",
                    _ => "edge",
                };
                let target = centres[c][0];
                let from = centres[v][j];
                let dir = (target - from) / (target - from).norm();
                svg.line(from + dir * style.radius, target - dir * style.radius, class);
            }
        }
    }
    svg.finish()
}

pub fn render(spec: &DrawingSpec, style: &Style) -> String {
    match spec {
        DrawingSpec::Cactus(p) => {
            let mut svg = Svg::new();
            let names: Vec<String> = (1..=p.cell().k()).map(|j| j.to_string()).collect();
            draw_cactus(&mut svg, p, &names, C::new(0.0, 0.0), style);
            svg.finish()
        }
        DrawingSpec::Bar(c) => draw_tree(c.tree(), c.labels(), None, style),
        DrawingSpec::Fm(c) => draw_tree(c.tree(), c.labels(), Some(c.i1()), style),
    }
}
