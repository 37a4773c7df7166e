use serde::{Deserialize, Serialize};

use super::{check_boundary_equality, detachment_set};
use crate::convexify::{default_tol, envelope, envelope_at_points, restricted_bipolar};
use crate::error::{Error, Result};
use crate::lagrangian::Lagrangian;
use crate::types::{norm, Extended, SampledSlice, XiGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Components,
    Boundary,
    Superlinear,
}

impl std::str::FromStr for Route {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "components" => Ok(Route::Components),
            "boundary" => Ok(Route::Boundary),
            "superlinear" => Ok(Route::Superlinear),
            _ => Err(Error::InvalidArgument(format!("unknown route `{s}` (components, boundary, superlinear)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Holds {
    Yes,
    No,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub x: Vec<f64>,
    pub u: f64,
}

/// Search parameters for [`check_condition_k`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionKSearch {
    pub route: Route,
    /// Radius of the search box; candidate `K'` never exceed it.
    pub k_max: f64,
    pub xi_dim: usize,
    /// Upper bound on the ξ-grid spacing.
    pub spacing: f64,
    /// Spatial probes (only the first is used for autonomous `f`).
    pub x_probes: Vec<Vec<f64>>,
    /// Number of equispaced state probes in the interval (one for state-free `f`).
    pub u_count: usize,
    pub tol: f64,
}

impl ConditionKSearch {
    pub fn new(route: Route, xi_dim: usize, k_max: f64) -> Self {
        Self {
            route,
            k_max,
            xi_dim,
            spacing: if xi_dim == 1 { 0.05 } else { 0.25 },
            x_probes: vec![vec![0.5]],
            u_count: 3,
            tol: default_tol(xi_dim),
        }
    }
}

/// Direct comparison of `(f̃_{K'})**` with `f**` on the nodes of `B_K`.
///
/// Values agree when `|a − b| ≤ tol · max(|a|, |b|)`, so that tiny but
/// strictly positive gaps such as `e^{-K'}` against `0` are not absorbed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub k_prime: f64,
    pub passed: bool,
    pub max_abs_diff: f64,
    pub max_rel_diff: f64,
    pub failing_probe: Option<Probe>,
    pub failing_node: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionKVerdict {
    pub holds: Holds,
    pub k: f64,
    pub k_prime: Option<f64>,
    pub route: Route,
    pub witness: String,
    pub probes: Vec<Probe>,
    pub validation: Option<Validation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperlinearityCertificate {
    pub certified: bool,
    pub slopes: Vec<f64>,
    /// `R(s)` per slope: beyond it `f ≥ s|ξ| + s` at every node of every slice.
    pub radii: Vec<Option<f64>>,
    pub failing_slope: Option<f64>,
}

impl SuperlinearityCertificate {
    pub fn radius(&self, slope: f64) -> Option<f64> {
        self.slopes.iter().position(|s| *s == slope).and_then(|k| self.radii[k])
    }
}

/// Radius `R(s)` past which every node of every slice satisfies
/// `f ≥ s|ξ| + s`: the largest violating norm plus one grid spacing.
pub fn superlinearity_certificate(slices: &[SampledSlice], slopes: &[f64]) -> SuperlinearityCertificate {
    let mut radii = Vec::with_capacity(slopes.len());
    let mut failing_slope = None;
    for &s in slopes {
        let mut r = 0.0f64;
        let mut ok = true;
        for slice in slices {
            let grid = slice.grid();
            let worst = slice
                .finite_nodes()
                .filter_map(|(i, v)| {
                    let n = norm(&grid.node(i));
                    (v < s * n + s).then_some(n)
                })
                .fold(None, |acc: Option<f64>, n| Some(acc.map_or(n, |a| a.max(n))));
            if let Some(w) = worst {
                let cand = w + grid.max_spacing();
                if cand >= grid.bbox().inner_radius() {
                    ok = false;
                }
                r = r.max(cand);
            }
        }
        if ok {
            radii.push(Some(r));
        } else {
            radii.push(None);
            failing_slope.get_or_insert(s);
        }
    }
    SuperlinearityCertificate { certified: failing_slope.is_none(), slopes: slopes.to_vec(), radii, failing_slope }
}

/// Search slice on `[-k_max, k_max]^N` and a reference slice on the doubled
/// box with the same spacing.
struct ProbeData {
    probe: Probe,
    search: SampledSlice,
    reference: SampledSlice,
}

fn grids(search: &ConditionKSearch) -> Result<(XiGrid, XiGrid)> {
    let half = ((search.k_max / search.spacing) - 1e-9).ceil().max(1.0) as usize;
    let s = XiGrid::centered(search.xi_dim, search.k_max, 2 * half + 1)?;
    let r = XiGrid::centered(search.xi_dim, 2.0 * search.k_max, 4 * half + 1)?;
    Ok((s, r))
}

fn probe_set(f: &Lagrangian, interval: (f64, f64), search: &ConditionKSearch) -> Result<Vec<Probe>> {
    let xs: Vec<Vec<f64>> = match (f.flags().autonomous, search.x_probes.first()) {
        (_, None) => return Err(Error::InvalidArgument("no spatial probe given".into())),
        (true, Some(x)) => vec![x.clone()],
        (false, Some(_)) => search.x_probes.clone(),
    };
    let (lo, hi) = interval;
    let us: Vec<f64> = if f.flags().state_free || search.u_count <= 1 || lo == hi {
        vec![0.5 * (lo + hi)]
    } else {
        (0..search.u_count).map(|k| lo + (hi - lo) * k as f64 / (search.u_count - 1) as f64).collect()
    };
    Ok(xs.iter().flat_map(|x| us.iter().map(move |&u| Probe { x: x.clone(), u })).collect())
}

fn probe_data(f: &Lagrangian, probes: &[Probe], search: &ConditionKSearch) -> Result<Vec<ProbeData>> {
    let (sg, rg) = grids(search)?;
    probes
        .iter()
        .map(|p| {
            Ok(ProbeData {
                probe: p.clone(),
                search: SampledSlice::sample(f, &sg, &p.x, p.u)?,
                reference: SampledSlice::sample(f, &rg, &p.x, p.u)?,
            })
        })
        .collect()
}

fn agree(a: Extended, b: Extended, tol: f64) -> (bool, f64, f64) {
    match (a, b) {
        (Extended::Finite(a), Extended::Finite(b)) => {
            let d = (a - b).abs();
            let scale = a.abs().max(b.abs());
            let rel = if d == 0.0 { 0.0 } else { d / scale };
            (d <= tol * scale, d, rel)
        }
        (Extended::Infinite, Extended::Infinite) => (true, 0.0, 0.0),
        _ => (false, f64::INFINITY, f64::INFINITY),
    }
}

fn validate_with(data: &[ProbeData], k: f64, k_prime: f64, tol: f64) -> Result<Validation> {
    let mut out = Validation {
        k_prime,
        passed: true,
        max_abs_diff: 0.0,
        max_rel_diff: 0.0,
        failing_probe: None,
        failing_node: None,
    };
    for d in data {
        let grid = d.search.grid();
        let ball: Vec<Vec<f64>> =
            (0..grid.len()).map(|i| grid.node(i)).filter(|p| norm(p) <= k * (1.0 + 1e-12)).collect();
        if ball.is_empty() {
            return Err(Error::InvalidArgument(format!("B_{k} contains no grid node")));
        }
        let restricted = envelope_at_points(&d.search.restrict_to_ball(k_prime), &ball)?;
        let full = envelope_at_points(&d.reference, &ball)?;
        for ((a, b), p) in restricted.iter().zip(&full).zip(&ball) {
            let (ok, abs, rel) = agree(*a, *b, tol);
            out.max_abs_diff = out.max_abs_diff.max(abs);
            out.max_rel_diff = out.max_rel_diff.max(rel);
            if !ok && out.passed {
                out.passed = false;
                out.failing_probe = Some(d.probe.clone());
                out.failing_node = Some(p.clone());
            }
        }
    }
    Ok(out)
}

/// Directly compares `(f̃_{K'})**` with `f**` on `B_K` at every probe.
pub fn validate_k_prime(
    f: &Lagrangian,
    probes: &[Probe],
    k: f64,
    k_prime: f64,
    search: &ConditionKSearch,
) -> Result<Validation> {
    if k_prime > search.k_max * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("K' = {k_prime} exceeds the search radius {}", search.k_max)));
    }
    let data = probe_data(f, probes, search)?;
    validate_with(&data, k, k_prime, search.tol)
}

enum Candidate {
    Found(f64, String),
    None(String),
}

fn components_route(data: &[ProbeData], k: f64, tol: f64) -> Result<Candidate> {
    let mut m = 0.0f64;
    let mut limited = false;
    for d in data {
        let env = envelope(&d.search)?;
        let rep = detachment_set(&d.search, &env, tol)?;
        m = m.max(rep.max_diameter);
        limited |= rep.boundary_limited;
    }
    let h = data[0].search.grid().max_spacing();
    let note = if limited { " (some component reaches the search box)" } else { "" };
    Ok(Candidate::Found(k + m + h, format!("components: max detachment diameter M = {m}{note}; K' = K + M + h")))
}

fn boundary_route(data: &[ProbeData], k: f64, k_max: f64, tol: f64) -> Result<Candidate> {
    let envs = data.iter().map(|d| envelope(&d.search)).collect::<Result<Vec<_>>>()?;
    let h = data[0].search.grid().max_spacing();
    let mut r = k;
    while r <= k_max - 0.5 * h {
        let mut all = true;
        for (d, e) in data.iter().zip(&envs) {
            if !check_boundary_equality(&d.search, e, r, tol)? {
                all = false;
                break;
            }
        }
        if all {
            return Ok(Candidate::Found(r, format!("boundary: f = f** on the annulus around |xi| = {r}")));
        }
        r += h;
    }
    Ok(Candidate::None(format!("boundary: no radius in [{k}, {k_max}] with annulus equality")))
}

fn superlinear_route(data: &[ProbeData], k: f64) -> Result<Candidate> {
    let rho = k + 1.0;
    let mut m = 0.0f64;
    for d in data {
        let env = restricted_bipolar(&d.search, rho)?;
        let grid = d.search.grid();
        for i in 0..grid.len() {
            if norm(&grid.node(i)) <= rho * (1.0 + 1e-12) {
                match env.value(i) {
                    Extended::Finite(v) => m = m.max(v),
                    Extended::Infinite => {
                        return Ok(Candidate::None(format!(
                            "superlinear: restricted envelope at rho' = {rho} is infinite inside B_{rho}"
                        )))
                    }
                }
            }
        }
    }
    let slices: Vec<SampledSlice> = data.iter().map(|d| d.search.clone()).collect();
    let cert = superlinearity_certificate(&slices, &[m + 1.0]);
    match cert.radii[0] {
        Some(r) => Ok(Candidate::Found(
            rho.max(r),
            format!("superlinear: M = {m} on B_{rho}; f >= (M+1)|xi| + M + 1 beyond R = {r}; K' = max(rho', R)"),
        )),
        None => {
            Ok(Candidate::None(format!("superlinear: no radius inside the search box with f >= {}(|xi| + 1)", m + 1.0)))
        }
    }
}

/// Decides condition (K) at radius `K` for states in `interval`, at the probed points.
///
/// A `Yes` is always backed by a passing [`Validation`]; `No` only reports a
/// failed direct comparison at the route's candidate `K'`.
pub fn check_condition_k(
    f: &Lagrangian,
    interval: (f64, f64),
    k: f64,
    search: &ConditionKSearch,
) -> Result<ConditionKVerdict> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("K must be positive, got {k}")));
    }
    if search.k_max < k {
        return Err(Error::InvalidArgument(format!("K_max = {} is below K = {k}", search.k_max)));
    }
    if interval.0 > interval.1 {
        return Err(Error::InvalidArgument(format!("empty state interval [{}, {}]", interval.0, interval.1)));
    }
    let probes = probe_set(f, interval, search)?;
    let data = probe_data(f, &probes, search)?;
    let candidate = match search.route {
        Route::Components => components_route(&data, k, search.tol)?,
        Route::Boundary => boundary_route(&data, k, search.k_max, search.tol)?,
        Route::Superlinear => superlinear_route(&data, k)?,
    };
    let mut verdict = ConditionKVerdict {
        holds: Holds::Inconclusive,
        k,
        k_prime: None,
        route: search.route,
        witness: String::new(),
        probes,
        validation: None,
    };
    match candidate {
        Candidate::None(why) => verdict.witness = why,
        Candidate::Found(kp, why) if kp > search.k_max * (1.0 + 1e-12) => {
            verdict.witness = format!("{why}; candidate K' = {kp} exceeds the search radius {}", search.k_max);
        }
        Candidate::Found(kp, why) => {
            let v = validate_with(&data, k, kp, search.tol)?;
            verdict.holds = if v.passed { Holds::Yes } else { Holds::No };
            verdict.k_prime = Some(kp);
            verdict.witness = why;
            verdict.validation = Some(v);
        }
    }
    Ok(verdict)
}
