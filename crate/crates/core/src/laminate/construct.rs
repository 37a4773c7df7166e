//! Sawtooth realizations of per-cell convex decompositions.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;

use crate::convexify::ConvexDecomposition;
use crate::error::{Error, Result};
use crate::types::{dist, norm, Mesh, PLField};

/// A laminate field with bookkeeping about where it came from.
#[derive(Clone, Debug, Serialize)]
pub struct Laminate {
    pub field: PLField,
    /// Cell of the source field containing each laminate cell.
    pub parent: Vec<usize>,
    /// Laminate cells where the cutoff, not the sawtooth, is active.
    pub in_band: Vec<bool>,
    /// Largest gradient added by the cutoff (amplitude / cutoff width); 0 in 1D.
    pub cutoff_excess: f64,
    pub band_measure: f64,
}

const CERT_TOL: f64 = 1e-8;

/// Drops zero weights and checks `Σα = 1`, `Σαξ = ∇u|cell`.
fn checked_parts(cell: usize, grad: &[f64], d: &ConvexDecomposition) -> Result<Vec<(f64, Vec<f64>)>> {
    if d.weights.len() != d.points.len() || d.weights.is_empty() {
        return Err(Error::Certificate { cell, reason: "weights and points differ in length".into() });
    }
    if d.weights.iter().any(|a| !(*a >= -CERT_TOL)) {
        return Err(Error::Certificate { cell, reason: "negative weight".into() });
    }
    let total: f64 = d.weights.iter().sum();
    let bary = d.barycenter();
    let scale = 1.0 + norm(grad) + d.points.iter().map(|p| norm(p)).fold(0.0, f64::max);
    if (total - 1.0).abs() > CERT_TOL || bary.len() != grad.len() || dist(&bary, grad) > CERT_TOL * scale {
        return Err(Error::Certificate {
            cell,
            reason: format!("weights sum to {total}, barycenter {bary:?} vs gradient {grad:?}"),
        });
    }
    Ok(d.weights.iter().zip(&d.points).filter(|(a, _)| **a > 0.0).map(|(a, p)| (*a, p.clone())).collect())
}

fn check_count(u: &PLField, decomps: &[ConvexDecomposition], n: usize) -> Result<()> {
    if decomps.len() != u.mesh().num_cells() {
        return Err(Error::InvalidArgument(format!(
            "{} decompositions for {} cells",
            decomps.len(),
            u.mesh().num_cells()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one tooth per cell".into()));
    }
    Ok(())
}

/// One-dimensional laminate: every cell is split into `n` periods, and each
/// period into sub-intervals of lengths proportional to the weights, carrying
/// the decomposition slopes in certificate order.
///
/// Values at cell and period endpoints are those of `u`, so the boundary data
/// is preserved exactly.
pub fn laminate_1d(u: &PLField, decomps: &[ConvexDecomposition], n: usize) -> Result<Laminate> {
    if u.mesh().dim() != 1 {
        return Err(Error::InvalidArgument("laminate_1d needs a one-dimensional field".into()));
    }
    check_count(u, decomps, n)?;
    let mesh = u.mesh();
    let mut order: Vec<usize> = (0..mesh.num_cells()).collect();
    order.sort_by(|&a, &b| mesh.vertex(mesh.cell(a)[0])[0].total_cmp(&mesh.vertex(mesh.cell(b)[0])[0]));

    let mut xs = Vec::new();
    let mut vs = Vec::new();
    let mut parent = Vec::new();
    for &c in &order {
        let cell = mesh.cell(c);
        let (mut i0, mut i1) = (cell[0], cell[1]);
        if mesh.vertex(i0)[0] > mesh.vertex(i1)[0] {
            std::mem::swap(&mut i0, &mut i1);
        }
        let (x0, x1) = (mesh.vertex(i0)[0], mesh.vertex(i1)[0]);
        let (u0, u1) = (u.nodal()[i0], u.nodal()[i1]);
        let parts = checked_parts(c, &u.gradient(c)?, &decomps[c])?;
        if xs.last() != Some(&x0) {
            xs.push(x0);
            vs.push(u0);
        }
        if parts.len() == 1 {
            xs.push(x1);
            vs.push(u1);
            parent.push(c);
            continue;
        }
        let w = x1 - x0;
        for k in 0..n {
            let mut cum = 0.0;
            let mut v = *vs.last().unwrap();
            let mut xprev = *xs.last().unwrap();
            for (j, (alpha, p)) in parts.iter().enumerate() {
                cum += alpha;
                let (x, value) = if j + 1 == parts.len() {
                    if k + 1 == n {
                        (x1, u1)
                    } else {
                        let t = (k + 1) as f64 / n as f64;
                        (x0 + w * t, u0 + (u1 - u0) * t)
                    }
                } else {
                    let x = x0 + w * (k as f64 + cum) / n as f64;
                    (x, v + p[0] * (x - xprev))
                };
                if x > xprev {
                    xs.push(x);
                    vs.push(value);
                    parent.push(c);
                    xprev = x;
                    v = value;
                }
            }
        }
    }
    let m = Arc::new(Mesh::interval_from_points(xs)?);
    let cells = m.num_cells();
    Ok(Laminate {
        field: PLField::new(m, vs)?,
        parent,
        in_band: vec![false; cells],
        cutoff_excess: 0.0,
        band_measure: 0.0,
    })
}

#[derive(Clone, Copy, Debug)]
struct Affine {
    a: [f64; 2],
    b: f64,
}

impl Affine {
    fn eval(&self, p: [f64; 2]) -> f64 {
        self.a[0] * p[0] + self.a[1] * p[1] + self.b
    }

    fn minus(&self, o: &Affine) -> Affine {
        Affine { a: [self.a[0] - o.a[0], self.a[1] - o.a[1]], b: self.b - o.b }
    }
}

/// Keeps the part of a convex polygon where `h ≤ 0`.
fn clip(poly: &[[f64; 2]], h: &Affine) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (hp, hq) = (h.eval(p), h.eval(q));
        if hp <= 0.0 {
            out.push(p);
        }
        if (hp < 0.0 && hq > 0.0) || (hp > 0.0 && hq < 0.0) {
            let t = hp / (hp - hq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

fn area(poly: &[[f64; 2]]) -> f64 {
    let mut s = 0.0;
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        s += p[0] * q[1] - p[1] * q[0];
    }
    0.5 * s.abs()
}

struct Saw {
    e: [f64; 2],
    period: f64,
    a1: f64,
    rise: f64,
    fall: f64,
}

impl Saw {
    fn t(&self, p: [f64; 2]) -> f64 {
        self.e[0] * p[0] + self.e[1] * p[1]
    }

    fn eval(&self, p: [f64; 2]) -> f64 {
        let tau = self.t(p).rem_euclid(self.period);
        let split = self.a1 * self.period;
        if tau < split {
            self.rise * tau
        } else {
            self.rise * split - self.fall * (tau - split)
        }
    }

    /// Affine piece on the strip starting at `t0`.
    fn piece(&self, t0: f64, rising: bool) -> Affine {
        let k = (t0 / self.period).round();
        let base = k * self.period;
        if rising {
            Affine { a: [self.rise * self.e[0], self.rise * self.e[1]], b: -self.rise * base }
        } else {
            let split = base + self.a1 * self.period;
            Affine {
                a: [-self.fall * self.e[0], -self.fall * self.e[1]],
                b: self.rise * self.a1 * self.period + self.fall * split,
            }
        }
    }
}

/// Two-dimensional simple laminate.
///
/// Inside each cell with a two-point decomposition `α₁ξ₁ + α₂ξ₂`, the field
/// becomes `u + min(w, (A/δ)·dist(·, ∂cell))`, where `w ≥ 0` is the sawtooth
/// of period `1/n` along `e = (ξ₁ − ξ₂)/|ξ₁ − ξ₂|` with slopes `ξᵢ − ∇u` and
/// height `A = α₁α₂|ξ₁ − ξ₂|/n`. The result is piecewise linear on a
/// sub-mesh of convex pieces, vanishes on cell boundaries, and has gradient
/// `ξ₁` or `ξ₂` wherever the cutoff is inactive.
pub fn laminate_nd(u: &PLField, decomps: &[ConvexDecomposition], n: usize, cutoff_delta: f64) -> Result<Laminate> {
    let mesh = u.mesh();
    if mesh.dim() != 2 {
        return Err(Error::InvalidArgument("laminate_nd needs a two-dimensional field".into()));
    }
    check_count(u, decomps, n)?;
    if !(cutoff_delta > 0.0) {
        return Err(Error::InvalidArgument("cutoff_delta must be positive".into()));
    }

    let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for cell in mesh.cells() {
        for k in 0..3 {
            let (a, b) = (cell[(k + 1) % 3], cell[(k + 2) % 3]);
            *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let boundary_edge = |a: usize, b: usize| edge_count.get(&(a.min(b), a.max(b))) == Some(&1);

    let mut vertices: Vec<Vec<f64>> = mesh.vertices().to_vec();
    let mut values: Vec<f64> = u.nodal().to_vec();
    let mut boundary: BTreeSet<usize> = mesh.boundary_vertices().iter().copied().collect();
    let mut cells = Vec::new();
    let mut parent = Vec::new();
    let mut in_band = Vec::new();
    let mut cutoff_excess: f64 = 0.0;
    let mut band_measure = 0.0;

    for c in 0..mesh.num_cells() {
        let grad = u.gradient(c)?;
        let parts = checked_parts(c, &grad, &decomps[c])?;
        if parts.len() > 2 {
            return Err(Error::Unsupported(format!(
                "cell {c} has a {}-point decomposition; only simple laminates are built in 2D, \
                 nested lamination would be needed",
                parts.len()
            )));
        }
        let ids = mesh.cell(c).to_vec();
        if parts.len() == 1 || dist(&parts[0].1, &parts[1].1) == 0.0 {
            cells.push(ids);
            parent.push(c);
            in_band.push(false);
            continue;
        }
        let (a1, x1) = (&parts[0].0, &parts[0].1);
        let (a2, x2) = (&parts[1].0, &parts[1].1);
        let d = dist(x1, x2);
        let e = [(x1[0] - x2[0]) / d, (x1[1] - x2[1]) / d];
        let period = 1.0 / n as f64;
        let saw = Saw { e, period, a1: *a1, rise: a2 * d, fall: a1 * d };
        let amp = a1 * a2 * d * period;
        let slope = amp / cutoff_delta;
        cutoff_excess = cutoff_excess.max(slope);

        let corner: Vec<[f64; 2]> = ids.iter().map(|&v| [mesh.vertex(v)[0], mesh.vertex(v)[1]]).collect();
        let tri_area = area(&corner);
        let diam = mesh.cell_diameter(c);
        // Inward distance to the edge opposite corner k, scaled by the cutoff slope.
        let caps: Vec<Affine> = (0..3)
            .map(|k| {
                let (p, q, r) = (corner[(k + 1) % 3], corner[(k + 2) % 3], corner[k]);
                let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
                let mut nrm = [-(q[1] - p[1]) / len, (q[0] - p[0]) / len];
                if nrm[0] * (r[0] - p[0]) + nrm[1] * (r[1] - p[1]) < 0.0 {
                    nrm = [-nrm[0], -nrm[1]];
                }
                Affine { a: [slope * nrm[0], slope * nrm[1]], b: -slope * (nrm[0] * p[0] + nrm[1] * p[1]) }
            })
            .collect();

        let ts: Vec<f64> = corner.iter().map(|p| saw.t(*p)).collect();
        let (tmin, tmax) = ts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(*t), b.max(*t)));
        let mut breaks = vec![tmin];
        let k0 = (tmin / period).floor() as i64;
        let k1 = (tmax / period).ceil() as i64;
        for k in k0..=k1 {
            for t in [k as f64 * period, (k as f64 + a1) * period] {
                if t > tmin && t < tmax {
                    breaks.push(t);
                }
            }
        }
        breaks.push(tmax);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        let lam_value = |p: [f64; 2]| -> Result<f64> {
            let lam = mesh.barycentric(c, &p)?;
            Ok(ids.iter().zip(&lam).map(|(&v, l)| u.nodal()[v] * l).sum())
        };
        let mut local: Vec<(usize, [f64; 2])> = Vec::new();
        let snap = 1e-12 * diam;
        for w in breaks.windows(2) {
            let (ta, tb) = (w[0], w[1]);
            let mid_tau = (0.5 * (ta + tb)).rem_euclid(period);
            let rising = mid_tau < a1 * period;
            let base = ((0.5 * (ta + tb)) / period).floor() * period;
            let piece = saw.piece(base, rising);
            let lower = Affine { a: [-e[0], -e[1]], b: ta };
            let upper = Affine { a: e, b: -tb };
            let strip = clip(&clip(&corner, &lower), &upper);
            if area(&strip) <= 1e-14 * tri_area {
                continue;
            }
            let funcs = [piece, caps[0], caps[1], caps[2]];
            for j in 0..4 {
                let mut region = strip.clone();
                for k in 0..4 {
                    if k != j && !region.is_empty() {
                        region = clip(&region, &funcs[j].minus(&funcs[k]));
                    }
                }
                region.dedup_by(|p, q| (p[0] - q[0]).hypot(p[1] - q[1]) <= snap);
                while region.len() > 1 && {
                    let (p, q) = (region[0], region[region.len() - 1]);
                    (p[0] - q[0]).hypot(p[1] - q[1]) <= snap
                } {
                    region.pop();
                }
                if region.len() < 3 || area(&region) <= 1e-14 * tri_area {
                    continue;
                }
                let mut vid = Vec::with_capacity(region.len());
                for p in &region {
                    if let Some(k) = (0..3).find(|&k| (p[0] - corner[k][0]).hypot(p[1] - corner[k][1]) <= snap) {
                        vid.push(ids[k]);
                        continue;
                    }
                    if let Some(&(id, _)) = local.iter().find(|(_, q)| (p[0] - q[0]).hypot(p[1] - q[1]) <= snap) {
                        vid.push(id);
                        continue;
                    }
                    let on_edge = (0..3).find(|&k| caps[k].eval(*p) <= snap * slope);
                    let value = match on_edge {
                        Some(k) => {
                            // On a cell edge the cutoff vanishes; interpolate along the edge.
                            let (ia, ib) = ((k + 1) % 3, (k + 2) % 3);
                            let (pa, pb) = (corner[ia], corner[ib]);
                            let len2 = (pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2);
                            let s = ((p[0] - pa[0]) * (pb[0] - pa[0]) + (p[1] - pa[1]) * (pb[1] - pa[1])) / len2;
                            let (ua, ub) = (u.nodal()[ids[ia]], u.nodal()[ids[ib]]);
                            ua + s * (ub - ua)
                        }
                        None => {
                            let cap = caps.iter().map(|g| g.eval(*p)).fold(f64::INFINITY, f64::min);
                            lam_value(*p)? + saw.eval(*p).min(cap)
                        }
                    };
                    let id = vertices.len();
                    vertices.push(p.to_vec());
                    values.push(value);
                    if let Some(k) = on_edge {
                        if boundary_edge(ids[(k + 1) % 3], ids[(k + 2) % 3]) {
                            boundary.insert(id);
                        }
                    }
                    local.push((id, *p));
                    vid.push(id);
                }
                let band = j != 0;
                for t in 1..vid.len() - 1 {
                    let tri = [region[0], region[t], region[t + 1]];
                    let a = area(&tri);
                    if a <= 1e-15 * tri_area {
                        continue;
                    }
                    cells.push(vec![vid[0], vid[t], vid[t + 1]]);
                    parent.push(c);
                    in_band.push(band);
                    if band {
                        band_measure += a;
                    }
                }
            }
        }
    }
    let m = Arc::new(Mesh::new(2, vertices, cells, boundary.into_iter().collect())?);
    Ok(Laminate { field: PLField::new(m, values)?, parent, in_band, cutoff_excess, band_measure })
}
