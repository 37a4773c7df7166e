//! Non-autonomous integrands: the moving essential infimum
//! `g_ε⁻(x, u, ξ) = ess inf_{y ∈ Ω ∩ B_ε(x)} g(y, u, ξ)` and numeric checks of
//! the growth conditions built on it.

use serde::{Deserialize, Serialize};

use crate::convexify::{envelope, TOL_1D};
use crate::detachment::Phi;
use crate::error::{Error, Result};
use crate::lagrangian::Lagrangian;
use crate::types::{dist, norm, Extended, Mesh, SampledSlice, SliceContext, XiGrid};

/// Sampled moving infimum on the barycenters of an x-mesh.
///
/// The infimum over the ball is replaced by a minimum over the mesh
/// barycenters inside it, so the values are upper bounds of the true
/// essential infimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssInfField {
    pub epsilon: f64,
    /// Barycenters of the x-mesh cells.
    pub x_points: Vec<Vec<f64>>,
    pub u_probes: Vec<f64>,
    pub grid: XiGrid,
    /// `values[ix][iu][node]`.
    pub values: Vec<Vec<Vec<Extended>>>,
    /// Indices of the barycenters sampled for each x point.
    pub samples: Vec<Vec<usize>>,
}

impl EssInfField {
    pub fn slice(&self, ix: usize, iu: usize) -> Result<SampledSlice> {
        SampledSlice::new(
            self.grid.clone(),
            self.values[ix][iu].clone(),
            SliceContext::new(self.x_points[ix].clone(), self.u_probes[iu]),
        )
    }
}

fn sample_slice(f: &Lagrangian, grid: &XiGrid, x: &[f64], u: f64) -> Result<Vec<Extended>> {
    Ok(SampledSlice::sample(f, grid, x, u)?.values().to_vec())
}

fn ball_samples(points: &[Vec<f64>], eps: f64) -> Result<Vec<Vec<usize>>> {
    points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let s: Vec<usize> = (0..points.len()).filter(|&j| j == i || dist(&points[j], x) <= eps).collect();
            if s.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "no barycenter other than x_{i} within ε = {eps}; ε is below the mesh resolution"
                )));
            }
            Ok(s)
        })
        .collect()
}

fn min_ext(a: Extended, b: Extended) -> Extended {
    match (a, b) {
        (Extended::Finite(x), Extended::Finite(y)) => Extended::Finite(x.min(y)),
        (Extended::Finite(x), _) | (_, Extended::Finite(x)) => Extended::Finite(x),
        _ => Extended::Infinite,
    }
}

fn min_over(rows: &[&Vec<Extended>]) -> Vec<Extended> {
    let mut out = rows[0].clone();
    for r in &rows[1..] {
        for (o, v) in out.iter_mut().zip(r.iter()) {
            *o = min_ext(*o, *v);
        }
    }
    out
}

/// Moving infimum of `f` over balls of radius `eps` around each barycenter
/// of `x_mesh`, for every state probe and ξ-node.
pub fn moving_essinf(f: &Lagrangian, eps: f64, x_mesh: &Mesh, u_probes: &[f64], grid: &XiGrid) -> Result<EssInfField> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
    }
    let x_points: Vec<Vec<f64>> = (0..x_mesh.num_cells()).map(|c| x_mesh.barycenter(c)).collect();
    let samples = ball_samples(&x_points, eps)?;
    // Raw slices per (barycenter, probe), shared by all balls.
    let nu = u_probes.len();
    let raw: Vec<Vec<Extended>> =
        crate::par::try_map_range(x_points.len() * nu, |k| sample_slice(f, grid, &x_points[k / nu], u_probes[k % nu]))?;
    let values = (0..x_points.len())
        .map(|ix| {
            (0..nu).map(|iu| min_over(&samples[ix].iter().map(|&j| &raw[j * nu + iu]).collect::<Vec<_>>())).collect()
        })
        .collect();
    Ok(EssInfField { epsilon: eps, x_points, u_probes: u_probes.to_vec(), grid: grid.clone(), values, samples })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma32Report {
    pub epsilon: f64,
    pub max_discrepancy: f64,
    pub tol: f64,
    pub passed: bool,
    /// `(x index, u index, node)` of the largest discrepancy.
    pub worst: Option<(usize, usize, usize)>,
    /// `((f**)_ε⁻)** ≤ (f**)_ε⁻ ≤ f** ≤ f` held at every probe (within `tol`).
    pub chain_ok: bool,
}

fn env_values(slice: &SampledSlice) -> Result<Vec<Extended>> {
    Ok(envelope(slice)?.values().to_vec())
}

fn ext_le(a: Extended, b: Extended, tol: f64) -> bool {
    match (a, b) {
        (_, Extended::Infinite) => true,
        (Extended::Infinite, Extended::Finite(_)) => false,
        (Extended::Finite(x), Extended::Finite(y)) => x <= y + tol * (1.0 + y.abs()),
    }
}

/// Compares `(f_ε⁻)**` with `((f**)_ε⁻)**` on the same samples and grid.
pub fn verify_lemma32(
    f: &Lagrangian,
    eps: f64,
    x_mesh: &Mesh,
    u_probes: &[f64],
    grid: &XiGrid,
    tol: f64,
) -> Result<Lemma32Report> {
    let route_a_field = moving_essinf(f, eps, x_mesh, u_probes, grid)?;
    let nu = u_probes.len();
    let nx = route_a_field.x_points.len();
    let ctx = |ix: usize, iu: usize| SliceContext::new(route_a_field.x_points[ix].clone(), u_probes[iu]);

    // f and f** at every barycenter and probe.
    let pairs = crate::par::try_map_range(nx * nu, |k| -> Result<(Vec<Extended>, Vec<Extended>)> {
        let s = SampledSlice::sample(f, grid, &route_a_field.x_points[k / nu], u_probes[k % nu])?;
        Ok((s.values().to_vec(), env_values(&s)?))
    })?;

    let per_probe = crate::par::try_map_range(nx * nu, |k| -> Result<(f64, usize, bool)> {
        let (ix, iu) = (k / nu, k % nu);
        let a = env_values(&route_a_field.slice(ix, iu)?)?;
        let rows: Vec<&Vec<Extended>> = route_a_field.samples[ix].iter().map(|&j| &pairs[j * nu + iu].1).collect();
        let inner = min_over(&rows);
        let b = env_values(&SampledSlice::new(grid.clone(), inner.clone(), ctx(ix, iu))?)?;
        let mut worst = (0.0f64, 0usize);
        let mut chain = true;
        for node in 0..grid.len() {
            let d = match (a[node], b[node]) {
                (Extended::Finite(x), Extended::Finite(y)) => (x - y).abs(),
                (Extended::Infinite, Extended::Infinite) => 0.0,
                _ => f64::INFINITY,
            };
            if d > worst.0 {
                worst = (d, node);
            }
            let (fx, fenv) = (pairs[k].0[node], pairs[k].1[node]);
            chain &= ext_le(b[node], inner[node], tol) && ext_le(inner[node], fenv, tol) && ext_le(fenv, fx, tol);
        }
        Ok((worst.0, worst.1, chain))
    })?;

    let mut max_discrepancy = 0.0f64;
    let mut worst = None;
    for (k, (d, node, _)) in per_probe.iter().enumerate() {
        if *d > max_discrepancy || worst.is_none() {
            max_discrepancy = max_discrepancy.max(*d);
            worst = Some((k / nu, k % nu, *node));
        }
    }
    Ok(Lemma32Report {
        epsilon: eps,
        max_discrepancy,
        tol,
        passed: max_discrepancy <= tol,
        worst,
        chain_ok: per_probe.iter().all(|p| p.2),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct H1Row {
    pub epsilon: f64,
    pub x: Vec<f64>,
    pub u: f64,
    pub xi: Vec<f64>,
    pub g: f64,
    /// `(g_ε⁻)**` at the probe.
    pub relaxed_inf: f64,
    pub guard: bool,
    pub ratio: f64,
    /// `f**(x, u, ξ) / (1 + (g_ε⁻)**)`, the same ratio with the relaxed numerator.
    pub ratio_relaxed: f64,
}

/// Numeric evidence for (H1); never a proof.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct H1Report {
    /// Largest guarded ratio, an estimate of `C_L`.
    pub c_estimate: f64,
    /// Largest guarded ratio with `f**` as numerator.
    pub c_estimate_relaxed: f64,
    pub threshold: f64,
    pub guarded_probes: usize,
    /// Guarded rows whose ratio exceeds the threshold.
    pub violations: Vec<H1Row>,
    /// `ratio_relaxed ≤ ratio` at every guarded probe.
    pub shadow_ok: bool,
    pub rows: Vec<H1Row>,
}

impl H1Report {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,x,u,xi,g,relaxed_inf,guard,ratio,ratio_relaxed\n");
        let join = |v: &[f64]| v.iter().map(|a| crate::io::fmt_f64(*a)).collect::<Vec<_>>().join(" ");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                crate::io::fmt_f64(r.epsilon),
                join(&r.x),
                crate::io::fmt_f64(r.u),
                join(&r.xi),
                crate::io::fmt_f64(r.g),
                crate::io::fmt_f64(r.relaxed_inf),
                r.guard,
                crate::io::fmt_f64(r.ratio),
                crate::io::fmt_f64(r.ratio_relaxed),
            ));
        }
        out
    }
}

/// Estimates `C_L` in `g ≤ C_L (1 + (g_ε⁻)**)` over the probes where
/// `(g_ε⁻)** ≤ L₂/ε^N`.
pub fn check_h1(
    f: &Lagrangian,
    l: (f64, f64),
    eps_ladder: &[f64],
    x_mesh: &Mesh,
    u_probes: &[f64],
    grid: &XiGrid,
    threshold: f64,
) -> Result<H1Report> {
    if let Some(u) = u_probes.iter().find(|u| u.abs() > l.0) {
        return Err(Error::InvalidArgument(format!("state probe {u} lies outside [-{}, {}]", l.0, l.0)));
    }
    let n = x_mesh.dim() as i32;
    let mut rows = Vec::new();
    for &eps in eps_ladder {
        let field = moving_essinf(f, eps, x_mesh, u_probes, grid)?;
        let nu = u_probes.len();
        let chunk = crate::par::try_map_range(field.x_points.len() * nu, |k| -> Result<Vec<H1Row>> {
            let (ix, iu) = (k / nu, k % nu);
            let x = &field.x_points[ix];
            let u = u_probes[iu];
            let relaxed_inf = env_values(&field.slice(ix, iu)?)?;
            let own = SampledSlice::sample(f, grid, x, u)?;
            let own_env = env_values(&own)?;
            let mut out = Vec::new();
            for node in 0..grid.len() {
                let (Extended::Finite(g), Extended::Finite(den)) = (own.value(node), relaxed_inf[node]) else {
                    continue;
                };
                let fenv = own_env[node].finite().unwrap_or(g);
                out.push(H1Row {
                    epsilon: eps,
                    x: x.clone(),
                    u,
                    xi: grid.node(node),
                    g,
                    relaxed_inf: den,
                    guard: den <= l.1 / eps.powi(n),
                    ratio: g / (1.0 + den),
                    ratio_relaxed: fenv / (1.0 + den),
                });
            }
            Ok(out)
        })?;
        rows.extend(chunk.into_iter().flatten());
    }
    let guarded: Vec<&H1Row> = rows.iter().filter(|r| r.guard).collect();
    let c_estimate = guarded.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let c_estimate_relaxed = guarded.iter().map(|r| r.ratio_relaxed).fold(0.0, f64::max);
    let shadow_ok = guarded.iter().all(|r| r.ratio_relaxed <= r.ratio + TOL_1D * (1.0 + r.ratio.abs()));
    let violations = guarded.iter().filter(|r| r.ratio > threshold).map(|r| (*r).clone()).collect();
    Ok(H1Report {
        c_estimate,
        c_estimate_relaxed,
        threshold,
        guarded_probes: guarded.len(),
        violations,
        shadow_ok,
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum H2Status {
    Holds,
    Fails,
    /// One-dimensional domains do not need (H2).
    NotRequired,
    /// `p ≥ N`: no Sobolev exponent, the growth bound is vacuous.
    Vacuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct H2Report {
    pub status: H2Status,
    pub dim: usize,
    pub p: f64,
    pub p_star: Option<f64>,
    pub theta_conjugate: f64,
    /// `p*/θ'`.
    pub exponent: Option<f64>,
    pub note: String,
    /// `(x, u, f(x, u, 0), a(x)|u|^exponent)` at failing probes.
    pub failures: Vec<(Vec<f64>, f64, f64, f64)>,
    pub checked: usize,
}

/// Checks `g(x, u, 0) ≤ a(x)|u|^{p*/θ'}` at the given `(x, a(x))` samples and
/// state probes with `|u| > u0`. `theta = ∞` means `θ' = 1`.
pub fn check_h2(
    f: &Lagrangian,
    dim: usize,
    p: f64,
    theta: f64,
    a_samples: &[(Vec<f64>, f64)],
    u_probes: &[f64],
    u0: f64,
) -> Result<H2Report> {
    if !(p >= 1.0) || !(theta >= 1.0) {
        return Err(Error::InvalidArgument(format!("need p ≥ 1 and θ ≥ 1, got p={p}, θ={theta}")));
    }
    let theta_conjugate = if theta.is_infinite() {
        1.0
    } else if theta == 1.0 {
        f64::INFINITY
    } else {
        theta / (theta - 1.0)
    };
    let mut report = H2Report {
        status: H2Status::Holds,
        dim,
        p,
        p_star: None,
        theta_conjugate,
        exponent: None,
        note: String::new(),
        failures: Vec::new(),
        checked: 0,
    };
    if dim == 1 {
        report.status = H2Status::NotRequired;
        report.note = "not required: the domain is one-dimensional".into();
        return Ok(report);
    }
    let nd = dim as f64;
    if p >= nd {
        report.status = H2Status::Vacuous;
        report.note = format!("p = {p} ≥ N = {dim}: no Sobolev exponent p*, the growth constraint is vacuous");
        return Ok(report);
    }
    let p_star = nd * p / (nd - p);
    let exponent = p_star / theta_conjugate;
    report.p_star = Some(p_star);
    report.exponent = Some(exponent);
    let zero = vec![0.0; dim];
    for (x, a) in a_samples {
        for &u in u_probes {
            if u.abs() <= u0 {
                return Err(Error::InvalidArgument(format!("state probe {u} is not beyond u0 = {u0}")));
            }
            let lhs = f.eval(x, u, &zero).map_err(|reason| Error::Evaluation { node: vec![], reason })?.to_f64();
            let rhs = a * u.abs().powf(exponent);
            report.checked += 1;
            if !(lhs <= rhs * (1.0 + 1e-12)) {
                report.failures.push((x.clone(), u, lhs, rhs));
            }
        }
    }
    if !report.failures.is_empty() {
        report.status = H2Status::Fails;
    }
    report.note = format!("p* = {p_star}, θ' = {theta_conjugate}, bound a(x)|u|^{exponent}");
    Ok(report)
}

/// Largest violation of `(g_ε⁻)** ≥ (f_ε⁻)** + Φ(ξ) + √(1+|ξ|²)` with
/// `g = f + Φ + √(1+|·|²)`, over all probes and nodes (0 when it holds).
pub fn aux_preservation_gap(
    f: &Lagrangian,
    phi: &Phi,
    eps: f64,
    x_mesh: &Mesh,
    u_probes: &[f64],
    grid: &XiGrid,
) -> Result<f64> {
    let g = Lagrangian::sum(vec![
        f.clone(),
        phi.lagrangian(),
        Lagrangian::new("length", vec![], crate::lagrangian::Flags::new(true, true, true, false), |_, _, xi| {
            (1.0 + xi.iter().map(|v| v * v).sum::<f64>()).sqrt()
        }),
    ]);
    let fe = moving_essinf(f, eps, x_mesh, u_probes, grid)?;
    let ge = moving_essinf(&g, eps, x_mesh, u_probes, grid)?;
    let mut worst = 0.0f64;
    for ix in 0..fe.x_points.len() {
        for iu in 0..u_probes.len() {
            let a = env_values(&ge.slice(ix, iu)?)?;
            let b = env_values(&fe.slice(ix, iu)?)?;
            for node in 0..grid.len() {
                if let (Extended::Finite(gv), Extended::Finite(fv)) = (a[node], b[node]) {
                    let xi = grid.node(node);
                    let rhs = fv + phi.eval(&xi) + (1.0 + norm(&xi).powi(2)).sqrt();
                    worst = worst.max(rhs - gv);
                }
            }
        }
    }
    Ok(worst)
}
