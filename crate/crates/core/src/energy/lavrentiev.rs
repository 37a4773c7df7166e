//! Gradient-constrained discrete minimization in 1D.
//!
//! The unknowns are the cell slopes `sᵢ`. Nodal values follow from the left
//! boundary value, and the right boundary value becomes the linear constraint
//! `Σ hᵢ sᵢ = b − a`. Together with `|sᵢ| ≤ L` the admissible set is a box cut
//! by a hyperplane, whose `h`-weighted projection is a one-parameter clip.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::Lagrangian;
use crate::types::{Extended, Mesh, PLField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Gradient bounds; the unconstrained problem is always added.
    pub l_ladder: Vec<f64>,
    pub starts: usize,
    pub max_iters: usize,
    /// Stop once a step changes the energy by less than `rel_tol · (1 + E)`.
    pub rel_tol: f64,
    pub seed: u64,
    /// Amplitude of the uniform slope perturbation for random starts.
    pub perturbation: f64,
    /// Exponents `α` of deterministic profiles `φ + (b − a)(t^α − t)`, with
    /// `t` the normalized position. Each profile yields two starts, its nodal
    /// interpolant and its midpoint-matched reconstruction; random starts fill
    /// the remaining slots.
    pub profiles: Vec<f64>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            l_ladder: vec![2.0, 5.0, 10.0],
            starts: 8,
            max_iters: 20_000,
            rel_tol: 1e-13,
            seed: 7,
            perturbation: 1.0,
            profiles: vec![0.5, 1.0 / 3.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub start: usize,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub mesh_index: usize,
    pub mesh_h: f64,
    /// `None` for the unconstrained problem.
    pub l: Option<f64>,
    /// Best energy over the starts; `None` when no admissible field exists.
    pub inf_estimate: Option<f64>,
    pub runs: Vec<RunRecord>,
    /// Nodal values of the best run.
    #[serde(skip)]
    pub best_nodal: Vec<f64>,
}

impl ScanPoint {
    pub fn all_converged(&self) -> bool {
        self.runs.iter().all(|r| r.converged)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub points: Vec<ScanPoint>,
    /// Best unconstrained estimate over all meshes.
    pub unconstrained_inf: f64,
    pub largest_l: Option<f64>,
    /// Best estimate at the largest bound over all meshes.
    pub constrained_inf_at_largest_l: Option<f64>,
    pub gap_lower_bound: f64,
    /// Constrained minus unconstrained estimate on the finest mesh, per bound.
    pub finest_margins: Vec<(f64, Option<f64>)>,
    /// Estimates are non-increasing in `L` on every mesh (up to `1e-9` relative).
    pub monotone_in_l: bool,
}

impl GapReport {
    /// Rows `mesh_h,L,inf_estimate`, with `inf` for the unconstrained bound
    /// and for infeasible problems.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mesh_h,L,inf_estimate\n");
        for p in &self.points {
            let l = p.l.map_or("inf".to_string(), crate::io::fmt_f64);
            let v = p.inf_estimate.map_or("inf".to_string(), crate::io::fmt_f64);
            out.push_str(&format!("{},{},{}\n", crate::io::fmt_f64(p.mesh_h), l, v));
        }
        out
    }
}

struct Problem<'a> {
    f: &'a Lagrangian,
    x: Vec<f64>,
    h: Vec<f64>,
    a: f64,
    rise: f64,
    bound: f64,
}

impl Problem<'_> {
    fn nodal(&self, s: &[f64]) -> Vec<f64> {
        let mut u = Vec::with_capacity(s.len() + 1);
        u.push(self.a);
        for (si, hi) in s.iter().zip(&self.h) {
            let last = *u.last().unwrap();
            u.push(last + si * hi);
        }
        u
    }

    fn eval(&self, i: usize, u: f64, xi: f64) -> f64 {
        let xm = 0.5 * (self.x[i] + self.x[i + 1]);
        match self.f.eval(&[xm], u, &[xi]) {
            Ok(Extended::Finite(v)) => v,
            _ => f64::INFINITY,
        }
    }

    fn energy(&self, s: &[f64]) -> f64 {
        let u = self.nodal(s);
        (0..s.len()).map(|i| self.h[i] * self.eval(i, 0.5 * (u[i] + u[i + 1]), s[i])).sum()
    }

    // Chain rule: the midpoint value of cell i depends on s_k for k < i with
    // weight h_k and on s_i with weight h_i / 2.
    fn gradient(&self, s: &[f64]) -> Vec<f64> {
        let u = self.nodal(s);
        let n = s.len();
        let mut du = vec![0.0; n];
        let mut dxi = vec![0.0; n];
        for i in 0..n {
            let um = 0.5 * (u[i] + u[i + 1]);
            let eu = 1e-6 * (1.0 + um.abs());
            let ex = 1e-6 * (1.0 + s[i].abs());
            du[i] = self.h[i] * (self.eval(i, um + eu, s[i]) - self.eval(i, um - eu, s[i])) / (2.0 * eu);
            dxi[i] = self.h[i] * (self.eval(i, um, s[i] + ex) - self.eval(i, um, s[i] - ex)) / (2.0 * ex);
        }
        let mut g = vec![0.0; n];
        let mut tail = 0.0;
        for k in (0..n).rev() {
            g[k] = dxi[k] + self.h[k] * (tail + 0.5 * du[k]);
            tail += du[k];
        }
        g
    }

    fn feasible(&self) -> bool {
        self.rise.abs() <= self.bound * self.h.iter().sum::<f64>() * (1.0 + 1e-12)
    }

    /// `h`-weighted projection onto `{|sᵢ| ≤ L, Σ hᵢsᵢ = rise}`.
    fn project(&self, z: &[f64]) -> Vec<f64> {
        let l = self.bound;
        let total: f64 = self.h.iter().sum();
        if l.is_infinite() {
            let lambda = (z.iter().zip(&self.h).map(|(a, b)| a * b).sum::<f64>() - self.rise) / total;
            return z.iter().map(|v| v - lambda).collect();
        }
        let mass = |lambda: f64| -> f64 { z.iter().zip(&self.h).map(|(v, h)| h * (v - lambda).clamp(-l, l)).sum() };
        let (zmin, zmax) = z.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let (mut lo, mut hi) = (zmin - l, zmax + l);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mass(mid) > self.rise {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
                break;
            }
        }
        let lambda = 0.5 * (lo + hi);
        let mut s: Vec<f64> = z.iter().map(|v| (v - lambda).clamp(-l, l)).collect();
        // Put the bisection residual on the unsaturated cell with the most room.
        let resid = self.rise - s.iter().zip(&self.h).map(|(a, b)| a * b).sum::<f64>();
        if let Some(k) = (0..s.len())
            .filter(|&k| (s[k] + resid / self.h[k]).abs() <= l)
            .max_by(|&a, &b| self.h[a].total_cmp(&self.h[b]))
        {
            s[k] += resid / self.h[k];
        }
        s
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.h).map(|((x, y), h)| h * x * y).sum()
    }

    /// Projected gradient descent with a Barzilai–Borwein trial step and
    /// Armijo backtracking.
    fn descend(&self, s0: Vec<f64>, cfg: &ScanConfig) -> (Vec<f64>, f64, usize, bool) {
        let mut s = self.project(&s0);
        let mut e = self.energy(&s);
        if !e.is_finite() {
            return (s, e, 0, false);
        }
        let mut g = self.gradient(&s);
        let mut t = 1.0 / (1.0 + self.inner(&g, &g).sqrt() / self.h.iter().sum::<f64>());
        let mut stalls = 0;
        for it in 0..cfg.max_iters {
            // Descent direction in the h-weighted metric is -g_k / h_k.
            let d: Vec<f64> = g.iter().zip(&self.h).map(|(gk, hk)| -gk / hk).collect();
            let mut step = t;
            let mut accepted = None;
            for _ in 0..80 {
                let trial: Vec<f64> = s.iter().zip(&d).map(|(a, b)| a + step * b).collect();
                let trial = self.project(&trial);
                let et = self.energy(&trial);
                let decrease: f64 = g.iter().zip(&trial).zip(&s).map(|((gk, a), b)| gk * (a - b)).sum();
                if et.is_finite() && et <= e + 1e-4 * decrease {
                    accepted = Some((trial, et));
                    break;
                }
                step *= 0.5;
            }
            let Some((next, en)) = accepted else {
                return (s, e, it, true);
            };
            let change = e - en;
            let gn = self.gradient(&next);
            let ds: Vec<f64> = next.iter().zip(&s).map(|(a, b)| a - b).collect();
            let dg: Vec<f64> = gn.iter().zip(&g).zip(&self.h).map(|((a, b), h)| (a - b) / h).collect();
            let sy = self.inner(&ds, &dg);
            t = if sy > 0.0 { (self.inner(&ds, &ds) / sy).clamp(1e-12, 1e12) } else { 2.0 * step };
            s = next;
            e = en;
            g = gn;
            if change <= cfg.rel_tol * (1.0 + e.abs()) {
                stalls += 1;
                if stalls >= 20 {
                    return (s, e, it + 1, true);
                }
            } else {
                stalls = 0;
            }
        }
        (s, e, cfg.max_iters, false)
    }
}

/// Nodal values whose cell-midpoint averages reproduce `profile` at the cell
/// midpoints, which is what the midpoint rule sees. The last cell absorbs the
/// mismatch with the right boundary value.
fn midpoint_matched(x: &[f64], a: f64, b: f64, profile: impl Fn(f64) -> Result<f64>) -> Result<Vec<f64>> {
    let n = x.len() - 1;
    let mut u = Vec::with_capacity(n + 1);
    u.push(a);
    for i in 0..n - 1 {
        let mid = profile(0.5 * (x[i] + x[i + 1]))?;
        u.push(2.0 * mid - u[i]);
    }
    u.push(b);
    Ok(u)
}

fn mix_seed(seed: u64, mesh: usize, start: usize) -> u64 {
    seed ^ (mesh as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (start as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Minimizes the midpoint energy of `f` over continuous piecewise-linear
/// fields with the boundary values of `phi`, on every mesh of the ladder,
/// with and without the bound `|u'| ≤ L` per cell.
///
/// Each problem is run from `cfg.starts` starting points: power-law profiles
/// with the boundary values of `phi` (see [`ScanConfig::profiles`]), then
/// random slope perturbations of the interpolant of `phi`. Results are estimates, not
/// certified minima.
pub fn lavrentiev_scan(f: &Lagrangian, phi: &PLField, meshes: &[Arc<Mesh>], cfg: &ScanConfig) -> Result<GapReport> {
    if phi.mesh().dim() != 1 || meshes.iter().any(|m| m.dim() != 1) {
        return Err(Error::Unsupported("gap scans are implemented for one-dimensional domains".into()));
    }
    if meshes.is_empty() || cfg.starts == 0 {
        return Err(Error::InvalidArgument("need at least one mesh and one start".into()));
    }
    if cfg.l_ladder.iter().any(|l| !(*l > 0.0) || l.is_infinite()) {
        return Err(Error::InvalidArgument("gradient bounds must be positive and finite".into()));
    }
    let mut bounds: Vec<Option<f64>> = cfg.l_ladder.iter().copied().map(Some).collect();
    bounds.push(None);

    let mut jobs = Vec::new();
    for (mi, mesh) in meshes.iter().enumerate() {
        for (bi, _) in bounds.iter().enumerate() {
            for st in 0..cfg.starts {
                jobs.push((mi, bi, st, mesh.clone()));
            }
        }
    }
    let outcomes = crate::par::try_map_range(jobs.len(), |j| -> Result<Option<(RunRecord, Vec<f64>)>> {
        let (mi, bi, st, ref mesh) = jobs[j];
        let x: Vec<f64> = mesh.vertices().iter().map(|v| v[0]).collect();
        let init: Vec<f64> = x.iter().map(|xi| phi.value_at(&[*xi])).collect::<Result<_>>()?;
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let n = h.len();
        let problem = Problem {
            f,
            x: x.clone(),
            h: h.clone(),
            a: init[0],
            rise: init[n] - init[0],
            bound: bounds[bi].unwrap_or(f64::INFINITY),
        };
        if !problem.feasible() {
            return Ok(None);
        }
        let rise = init[n] - init[0];
        let (x0, len) = (x[0], x[n] - x[0]);
        let np = cfg.profiles.len();
        let start: Vec<f64> = if st < 2 * np {
            let alpha = cfg.profiles[st % np];
            let profile = |xv: f64| -> Result<f64> {
                let t = (xv - x0) / len;
                Ok(phi.value_at(&[xv])? + rise * (t.powf(alpha) - t))
            };
            if st < np {
                x.iter().map(|&xv| profile(xv)).collect::<Result<_>>()?
            } else {
                midpoint_matched(&x, init[0], init[n], profile)?
            }
        } else {
            init.clone()
        };
        let mut s0: Vec<f64> = (0..n).map(|i| (start[i + 1] - start[i]) / h[i]).collect();
        if st >= 2 * np {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, mi, st));
            let amp = cfg.perturbation * (1.0 + s0.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            for v in &mut s0 {
                *v += amp * rng.gen_range(-1.0..=1.0);
            }
        }
        let (s, e, iterations, converged) = problem.descend(s0, cfg);
        Ok(Some((RunRecord { start: st, energy: e, iterations, converged }, problem.nodal(&s))))
    })?;

    let mut points = Vec::new();
    let mut it = outcomes.into_iter();
    for (mi, mesh) in meshes.iter().enumerate() {
        for l in &bounds {
            let mut runs = Vec::new();
            let mut best: Option<(f64, Vec<f64>)> = None;
            for _ in 0..cfg.starts {
                if let Some((rec, nodal)) = it.next().flatten() {
                    if rec.energy.is_finite() && best.as_ref().is_none_or(|(b, _)| rec.energy < *b) {
                        best = Some((rec.energy, nodal));
                    }
                    runs.push(rec);
                }
            }
            let (inf_estimate, best_nodal) = match best {
                Some((e, u)) => (Some(e), u),
                None => (None, Vec::new()),
            };
            points.push(ScanPoint {
                mesh_index: mi,
                mesh_h: mesh.max_cell_diameter(),
                l: *l,
                inf_estimate,
                runs,
                best_nodal,
            });
        }
    }

    let best_over_meshes = |l: Option<f64>| -> Option<f64> {
        points.iter().filter(|p| p.l == l).filter_map(|p| p.inf_estimate).reduce(f64::min)
    };
    let unconstrained_inf = best_over_meshes(None).unwrap_or(f64::INFINITY);
    let largest_l = cfg.l_ladder.iter().copied().reduce(f64::max);
    let constrained_inf_at_largest_l = largest_l.and_then(|l| best_over_meshes(Some(l)));
    let gap_lower_bound = constrained_inf_at_largest_l.map_or(0.0, |c| (c - unconstrained_inf).max(0.0));

    let finest = meshes.len() - 1;
    let finest_unconstrained =
        points.iter().find(|p| p.mesh_index == finest && p.l.is_none()).and_then(|p| p.inf_estimate);
    let finest_margins = cfg
        .l_ladder
        .iter()
        .map(|&l| {
            let c = points.iter().find(|p| p.mesh_index == finest && p.l == Some(l)).and_then(|p| p.inf_estimate);
            (l, c.zip(finest_unconstrained).map(|(c, u)| c - u))
        })
        .collect();

    let mut monotone_in_l = true;
    for mi in 0..meshes.len() {
        let mut row: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| p.mesh_index == mi)
            .filter_map(|p| p.inf_estimate.map(|e| (p.l.unwrap_or(f64::INFINITY), e)))
            .collect();
        row.sort_by(|a, b| a.0.total_cmp(&b.0));
        if row.windows(2).any(|w| w[1].1 > w[0].1 + 1e-9 * (1.0 + w[0].1.abs())) {
            monotone_in_l = false;
        }
    }

    Ok(GapReport {
        points,
        unconstrained_inf,
        largest_l,
        constrained_inf_at_largest_l,
        gap_lower_bound,
        finest_margins,
        monotone_in_l,
    })
}
