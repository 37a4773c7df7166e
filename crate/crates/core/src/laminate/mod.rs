//! Explicit approximating sequences: laminates that realize the relaxed
//! energy in the weak-* sense, and refinement ladders for strong recovery.

mod construct;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::detachment::construct_phi;
use crate::energy::{energy, relaxed_energy, XiPolicy};
use crate::error::{Error, Result};
use crate::lagrangian::{Flags, Lagrangian};
use crate::types::{norm, Mesh, PLField};

pub use construct::{laminate_1d, laminate_nd, Laminate};

/// Knobs shared by the sequence pipelines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceOptions {
    /// Width of the 2D cutoff band.
    pub cutoff_delta: f64,
    /// Tolerance for `|E[f](uₙ) − target|` at the last index.
    pub energy_tol: f64,
    /// Exponents `p` of the reported `W^{1,p}` distances.
    pub p_values: Vec<f64>,
    /// Declared gradient bound; defaults to the largest certificate point
    /// plus the cutoff excess.
    pub grad_bound: Option<f64>,
}

impl Default for SequenceOptions {
    fn default() -> Self {
        Self { cutoff_delta: 0.05, energy_tol: 1e-6, p_values: vec![1.0, 2.0], grad_bound: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceRow {
    pub n: usize,
    pub sup_norm_dist: f64,
    pub grad_sup: f64,
    pub energy_f: f64,
    /// One entry per requested `p`, in order.
    pub w1p_dist: Vec<f64>,
    pub cutoff_excess: f64,
    pub band_measure: f64,
}

/// Energies of the auxiliary integrand `g` used in the strong-recovery proof.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxDiagnostics {
    /// Either `f + Φ(ξ) + √(1+|ξ|²)` or `f + |ξ|^p`.
    pub description: String,
    pub thresholds: Vec<f64>,
    pub energies: Vec<f64>,
    pub target: f64,
    /// `∫√(1+|∇uₙ|²)` per index and for `u`.
    pub length_energies: Vec<f64>,
    pub length_target: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub rows: Vec<SequenceRow>,
    pub p_values: Vec<f64>,
    pub energy_target: f64,
    pub energy_tol: f64,
    pub grad_bound: f64,
    pub weak_star_ok: bool,
    pub energy_converged: bool,
    pub strong_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux: Option<AuxDiagnostics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakStarVerdict {
    pub ok: bool,
    pub sup_dist: Vec<f64>,
    pub grad_sup: Vec<f64>,
    pub decay_ok: bool,
    pub bound_ok: bool,
    pub bound: f64,
}

/// Last value at most a quarter of the first, and non-increasing over the
/// second half of the sequence.
fn decays(values: &[f64]) -> bool {
    let (Some(first), Some(last)) = (values.first(), values.last()) else {
        return false;
    };
    let tail = &values[values.len() / 2..];
    *last <= first / 4.0 && tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300)
}

/// `‖v − u‖_∞` over the vertices of both meshes.
fn sup_distance(v: &PLField, u: &PLField) -> Result<f64> {
    let mut m: f64 = 0.0;
    for (p, val) in v.mesh().vertices().iter().zip(v.nodal()) {
        m = m.max((val - u.value_at(p)?).abs());
    }
    for (p, val) in u.mesh().vertices().iter().zip(u.nodal()) {
        m = m.max((v.value_at(p)? - val).abs());
    }
    Ok(m)
}

// Degree-3 Gauss rule on [0, 1] and the degree-2 edge-midpoint rule on triangles.
fn quadrature(mesh: &Mesh, c: usize) -> Vec<(Vec<f64>, f64)> {
    let cell = mesh.cell(c);
    let meas = mesh.cell_measure(c);
    if mesh.dim() == 1 {
        let (a, b) = (mesh.vertex(cell[0])[0], mesh.vertex(cell[1])[0]);
        let r = 0.5 / 3f64.sqrt();
        return [0.5 - r, 0.5 + r].iter().map(|t| (vec![a + t * (b - a)], 0.5 * meas)).collect();
    }
    let v: Vec<&[f64]> = cell.iter().map(|&i| mesh.vertex(i)).collect();
    (0..3)
        .map(|k| {
            let (p, q) = (v[k], v[(k + 1) % 3]);
            ((0..2).map(|a| 0.5 * (p[a] + q[a])).collect(), meas / 3.0)
        })
        .collect()
}

/// `‖v − u‖_{W^{1,p}}` for each `p`, assuming `v`'s mesh refines `u`'s.
fn w1p_distances(v: &PLField, u: &PLField, ps: &[f64]) -> Result<Vec<f64>> {
    let mut sums = vec![0.0; ps.len()];
    let mesh = v.mesh();
    for c in 0..mesh.num_cells() {
        let bary = mesh.barycenter(c);
        let uc =
            u.mesh().locate(&bary).ok_or_else(|| Error::InvalidArgument("fields live on different domains".into()))?;
        let gv = v.gradient(c)?;
        let gu = u.gradient(uc)?;
        let gd = norm(&gv.iter().zip(&gu).map(|(a, b)| a - b).collect::<Vec<_>>());
        let meas = mesh.cell_measure(c);
        let q = quadrature(mesh, c);
        for (k, p) in ps.iter().enumerate() {
            let mut s = meas * gd.powf(*p);
            for (pt, w) in &q {
                s += w * (v.value_in_cell(c, pt)? - u.value_in_cell(uc, pt)?).abs().powf(*p);
            }
            sums[k] += s;
        }
    }
    Ok(sums.iter().zip(ps).map(|(s, p)| s.powf(1.0 / p)).collect())
}

/// Checks `‖uₙ − u‖_∞ → 0` (as a decaying trend) and `sup ‖∇uₙ‖_∞ ≤ bound`.
pub fn verify_weak_star(fields: &[PLField], u: &PLField, bound: f64) -> Result<WeakStarVerdict> {
    let mut sup_dist = Vec::with_capacity(fields.len());
    let mut grad_sup = Vec::with_capacity(fields.len());
    for v in fields {
        sup_dist.push(sup_distance(v, u)?);
        grad_sup.push(v.grad_sup()?);
    }
    let decay_ok = decays(&sup_dist);
    let bound_ok = !grad_sup.is_empty() && grad_sup.iter().all(|g| *g <= bound * (1.0 + 1e-12));
    Ok(WeakStarVerdict { ok: decay_ok && bound_ok, sup_dist, grad_sup, decay_ok, bound_ok, bound })
}

fn row(n: usize, v: &PLField, u: &PLField, f: &Lagrangian, ps: &[f64], excess: f64, band: f64) -> Result<SequenceRow> {
    Ok(SequenceRow {
        n,
        sup_norm_dist: sup_distance(v, u)?,
        grad_sup: v.grad_sup()?,
        energy_f: energy(f, v)?.total,
        w1p_dist: w1p_distances(v, u, ps)?,
        cutoff_excess: excess,
        band_measure: band,
    })
}

/// Laminate ladder realizing `E[f**](u)`: certificates from the relaxed
/// energy, one laminate per `n`, energies evaluated exactly on the laminate
/// meshes.
pub fn relaxation_sequence(
    f: &Lagrangian,
    u: &PLField,
    schedule: &[usize],
    policy: &XiPolicy,
    opts: &SequenceOptions,
) -> Result<(Vec<PLField>, SequenceReport)> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("empty schedule".into()));
    }
    let relaxed = relaxed_energy(f, u, policy)?;
    let laminates: Vec<Laminate> = crate::par::try_map_slice(schedule, |&n| match u.mesh().dim() {
        1 => laminate_1d(u, &relaxed.certificates, n),
        2 => laminate_nd(u, &relaxed.certificates, n, opts.cutoff_delta),
        d => Err(Error::Unsupported(format!("laminates in dimension {d}"))),
    })?;
    let rows: Vec<SequenceRow> = crate::par::try_map_range(schedule.len(), |i| {
        let l = &laminates[i];
        row(schedule[i], &l.field, u, f, &opts.p_values, l.cutoff_excess, l.band_measure)
    })?;
    let max_point = relaxed.certificates.iter().flat_map(|c| c.points.iter().map(|p| norm(p))).fold(0.0, f64::max);
    let max_excess = laminates.iter().map(|l| l.cutoff_excess).fold(0.0, f64::max);
    let grad_bound = opts.grad_bound.unwrap_or(max_point + max_excess);
    let fields: Vec<PLField> = laminates.into_iter().map(|l| l.field).collect();
    let weak = verify_weak_star(&fields, u, grad_bound)?;
    let last = rows.last().unwrap();
    let energy_converged = (last.energy_f - relaxed.total).abs() <= opts.energy_tol;
    let strong_ok = !opts.p_values.is_empty() && decays(&rows.iter().map(|r| r.w1p_dist[0]).collect::<Vec<_>>());
    let report = SequenceReport {
        rows,
        p_values: opts.p_values.clone(),
        energy_target: relaxed.total,
        energy_tol: opts.energy_tol,
        grad_bound,
        weak_star_ok: weak.ok,
        energy_converged,
        strong_ok,
        aux: None,
    };
    Ok((fields, report))
}

/// Exact average of a 1D piecewise-linear field over `[a, b]`.
fn window_average(u: &PLField, a: f64, b: f64) -> Result<f64> {
    let mesh = u.mesh();
    let mut pts = vec![a];
    pts.extend(mesh.vertices().iter().map(|v| v[0]).filter(|x| *x > a && *x < b));
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    let mut s = 0.0;
    for w in pts.windows(2) {
        s += 0.5 * (w[1] - w[0]) * (u.value_at(&[w[0]])? + u.value_at(&[w[1]])?);
    }
    Ok(s / (b - a))
}

/// `n`-th member of the recovery ladder: in 1D, `u` averaged over windows of
/// half-width `h_min/(4n)` (clipped to Ω, boundary values kept) and sampled
/// on a mesh refined `n` times with the kinks resolved; in 2D, `u` itself on
/// a mesh refined `n` times.
fn recovery_member(u: &PLField, n: usize) -> Result<PLField> {
    let mesh = u.mesh();
    if mesh.dim() == 2 {
        return refine_2d(u, n);
    }
    let mut xs: Vec<f64> = mesh.vertices().iter().map(|v| v[0]).collect();
    xs.sort_by(f64::total_cmp);
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let hmin = xs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let eps = hmin / (4.0 * n as f64);
    let mut pts = Vec::new();
    for w in xs.windows(2) {
        for k in 0..n {
            pts.push(w[0] + (w[1] - w[0]) * k as f64 / n as f64);
        }
    }
    pts.push(hi);
    for &x in &xs[1..xs.len() - 1] {
        for s in [-1.0, -0.5, 0.5, 1.0] {
            pts.push(x + s * eps);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (hi - lo));
    let values: Vec<f64> = pts
        .iter()
        .map(|&x| {
            if x == lo || x == hi {
                u.value_at(&[x])
            } else {
                window_average(u, (x - eps).max(lo), (x + eps).min(hi))
            }
        })
        .collect::<Result<_>>()?;
    PLField::new(Arc::new(Mesh::interval_from_points(pts)?), values)
}

fn refine_2d(u: &PLField, n: usize) -> Result<PLField> {
    let mesh = u.mesh();
    let mut vertices = Vec::new();
    let mut values = Vec::new();
    let mut cells = Vec::new();
    let mut boundary = Vec::new();
    for c in 0..mesh.num_cells() {
        let ids = mesh.cell(c);
        let p: Vec<&[f64]> = ids.iter().map(|&i| mesh.vertex(i)).collect();
        let on_bdry = |i: usize| mesh.is_boundary(ids[i]);
        let base = vertices.len();
        // Row-major lattice of barycentric points (i, j, n - i - j).
        let at = |i: usize, j: usize| base + i * (n + 1) - i * i.saturating_sub(1) / 2 + j;
        for i in 0..=n {
            for j in 0..=n - i {
                let (l1, l2) = (i as f64 / n as f64, j as f64 / n as f64);
                let l0 = 1.0 - l1 - l2;
                let x: Vec<f64> = (0..2).map(|a| l0 * p[0][a] + l1 * p[1][a] + l2 * p[2][a]).collect();
                let val = l0 * u.nodal()[ids[0]] + l1 * u.nodal()[ids[1]] + l2 * u.nodal()[ids[2]];
                let id = vertices.len();
                // A lattice point is on ∂Ω when it lies on a cell edge whose
                // endpoints are both boundary vertices.
                let edge_bdry = (i == 0 && on_bdry(0) && on_bdry(2))
                    || (j == 0 && on_bdry(0) && on_bdry(1))
                    || (i + j == n && on_bdry(1) && on_bdry(2));
                if edge_bdry {
                    boundary.push(id);
                }
                debug_assert_eq!(id, at(i, j));
                vertices.push(x);
                values.push(val);
            }
        }
        for i in 0..n {
            for j in 0..n - i {
                cells.push(vec![at(i, j), at(i + 1, j), at(i, j + 1)]);
                if i + j + 1 < n {
                    cells.push(vec![at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
                }
            }
        }
    }
    PLField::new(Arc::new(Mesh::new(2, vertices, cells, boundary)?), values)
}

/// Strong-recovery ladder for fields that do not touch the detachment set.
///
/// Refuses with [`Error::DetachedCells`] when `f` and `f**` differ at some
/// cell's `(u(x_c), ∇u)`. Otherwise every certificate is trivial and the
/// sequence is a smoothing/refinement ladder of `u`; the report also tracks
/// the auxiliary integrand `f + Φ + √(1+|ξ|²)` (p = 1) or `f + |ξ|^p`.
pub fn strong_recovery_sequence(
    f: &Lagrangian,
    u: &PLField,
    p: f64,
    schedule: &[usize],
    policy: &XiPolicy,
    opts: &SequenceOptions,
) -> Result<(Vec<PLField>, SequenceReport)> {
    if schedule.is_empty() || schedule.contains(&0) {
        return Err(Error::InvalidArgument("schedule must be non-empty and positive".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("need p ≥ 1, got {p}")));
    }
    let raw = energy(f, u)?;
    let relaxed = relaxed_energy(f, u, policy)?;
    let tol = crate::convexify::default_tol(u.mesh().dim());
    let detached: Vec<usize> = (0..raw.per_cell.len())
        .filter(|&c| {
            let meas = u.mesh().cell_measure(c);
            let (r, e) = (raw.per_cell[c] / meas, relaxed.per_cell[c] / meas);
            r - e > tol * (1.0 + r.abs())
        })
        .collect();
    if !detached.is_empty() {
        return Err(Error::DetachedCells { cells: detached });
    }

    let fields: Vec<PLField> = crate::par::try_map_slice(schedule, |&n| recovery_member(u, n))?;
    let mut ps = opts.p_values.clone();
    if !ps.contains(&p) {
        ps.insert(0, p);
    }
    let rows: Vec<SequenceRow> =
        crate::par::try_map_range(schedule.len(), |i| row(schedule[i], &fields[i], u, f, &ps, 0.0, 0.0))?;
    let grad_bound = opts.grad_bound.unwrap_or(u.grad_sup()?);
    let weak = verify_weak_star(&fields, u, grad_bound)?;
    let pi = ps.iter().position(|q| *q == p).unwrap();
    let dists: Vec<f64> = rows.iter().map(|r| r.w1p_dist[pi]).collect();
    let noise = 1e-12 * (1.0 + u.max_abs() + grad_bound);
    let strong_ok = dists.iter().all(|d| *d <= noise) || decays(&dists);
    let energy_converged = (rows.last().unwrap().energy_f - raw.total).abs() <= opts.energy_tol;

    let (g, description, thresholds) = if p == 1.0 {
        let mut samples = Vec::new();
        for v in &fields {
            let w = 1.0 / fields.len() as f64;
            for c in 0..v.mesh().num_cells() {
                samples.push((v.gradient(c)?, w * v.mesh().cell_measure(c)));
            }
        }
        let phi = construct_phi(&samples, 30);
        let thresholds = phi.thresholds.clone();
        let g = Lagrangian::sum(vec![f.clone(), phi.lagrangian(), length_lagrangian()]);
        (g, "f + Phi(xi) + sqrt(1+|xi|^2)".to_string(), thresholds)
    } else {
        let power =
            Lagrangian::new("power", vec![p], Flags::new(true, true, false, false), move |_, _, xi| norm(xi).powf(p));
        (Lagrangian::sum(vec![f.clone(), power]), format!("f + |xi|^{p}"), Vec::new())
    };
    let length = length_lagrangian();
    let energies: Vec<f64> = fields.iter().map(|v| energy(&g, v).map(|e| e.total)).collect::<Result<_>>()?;
    let length_energies: Vec<f64> =
        fields.iter().map(|v| energy(&length, v).map(|e| e.total)).collect::<Result<_>>()?;
    let target = energy(&g, u)?.total;
    let length_target = energy(&length, u)?.total;
    let gaps: Vec<f64> = energies.iter().map(|e| (e - target).abs()).collect();
    let converged = gaps.iter().all(|d| *d <= opts.energy_tol) || decays(&gaps);
    let aux = AuxDiagnostics { description, thresholds, energies, target, length_energies, length_target, converged };

    let report = SequenceReport {
        rows,
        p_values: ps,
        energy_target: raw.total,
        energy_tol: opts.energy_tol,
        grad_bound,
        weak_star_ok: weak.ok,
        energy_converged,
        strong_ok,
        aux: Some(aux),
    };
    Ok((fields, report))
}

fn length_lagrangian() -> Lagrangian {
    Lagrangian::new("length", vec![], Flags::new(true, true, true, false), |_, _, xi| {
        (1.0 + xi.iter().map(|v| v * v).sum::<f64>()).sqrt()
    })
}
