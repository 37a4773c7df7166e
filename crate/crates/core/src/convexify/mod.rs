//! Convex envelopes (bipolars) of sampled slices.
//!
//! 1D slices use the lower convex chain of the finite points; higher
//! dimensions run a supporting-facet search per node (see [`simplex`]). Both
//! routes exclude sentinel nodes from the point cloud entirely.

mod chain;
mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::Lagrangian;
use crate::types::{dist, norm, Extended, SampledSlice, XiGrid};
use chain::Segment;
use simplex::{LpSolution, PointCloud};

/// Default tolerance for 1D envelope comparisons.
pub const TOL_1D: f64 = 1e-9;
/// Default tolerance for 2D envelope comparisons.
pub const TOL_2D: f64 = 1e-7;

/// Relative gap below which `f(ξ) - f**(ξ)` counts as equality when picking
/// the trivial certificate. Purely relative so that envelopes of tiny values
/// (e.g. `e^{-50}`) keep their non-trivial decompositions.
const TRIVIAL_REL: f64 = 1e-12;

pub fn default_tol(dim: usize) -> f64 {
    if dim <= 1 {
        TOL_1D
    } else {
        TOL_2D
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeMethod {
    Chain1d,
    LowerHullNd,
}

/// Convex combination `Σ αᵢ ξᵢ` of grid nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexDecomposition {
    pub weights: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    /// Linear grid indices of `points`; empty when the decomposition is the
    /// trivial one at an off-grid point.
    pub nodes: Vec<usize>,
    /// `Σ αᵢ f(ξᵢ)`.
    pub value: f64,
}

impl ConvexDecomposition {
    fn trivial(node: usize, point: Vec<f64>, value: f64) -> Self {
        Self { weights: vec![1.0], points: vec![point], nodes: vec![node], value }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_trivial(&self) -> bool {
        self.weights.len() == 1
    }

    /// `Σ αᵢ ξᵢ`.
    pub fn barycenter(&self) -> Vec<f64> {
        let dim = self.points.first().map_or(0, |p| p.len());
        let mut out = vec![0.0; dim];
        for (a, p) in self.weights.iter().zip(&self.points) {
            for (o, x) in out.iter_mut().zip(p) {
                *o += a * x;
            }
        }
        out
    }
}

/// Affine map `ℓ(ξ) = ⟨slope, ξ⟩ + offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub slope: Vec<f64>,
    pub offset: f64,
}

impl AffineMap {
    pub fn eval(&self, xi: &[f64]) -> f64 {
        self.slope.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>() + self.offset
    }
}

/// Envelope values on a grid with per-node certificates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeResult {
    source: SampledSlice,
    env_values: Vec<Extended>,
    certificates: Vec<Option<ConvexDecomposition>>,
    method: EnvelopeMethod,
    /// All finite lifted points lie on one hyperplane; the envelope is the
    /// affine interpolant.
    pub degenerate: bool,
    pub warnings: Vec<String>,
}

impl EnvelopeResult {
    pub fn grid(&self) -> &XiGrid {
        self.source.grid()
    }

    pub fn source(&self) -> &SampledSlice {
        &self.source
    }

    pub fn values(&self) -> &[Extended] {
        &self.env_values
    }

    pub fn value(&self, linear: usize) -> Extended {
        self.env_values[linear]
    }

    pub fn certificates(&self) -> &[Option<ConvexDecomposition>] {
        &self.certificates
    }

    pub fn certificate(&self, linear: usize) -> Option<&ConvexDecomposition> {
        self.certificates[linear].as_ref()
    }

    pub fn method(&self) -> EnvelopeMethod {
        self.method
    }

    /// The envelope values as a slice over the same grid and context.
    pub fn as_slice(&self) -> SampledSlice {
        SampledSlice::new(self.grid().clone(), self.env_values.clone(), self.source.context().clone())
            .expect("envelope values are nonnegative")
    }

    /// Envelope value at an arbitrary point of the grid box.
    pub fn value_at(&self, xi: &[f64]) -> Result<Extended> {
        match decompose(self, xi) {
            Ok(d) => Ok(Extended::Finite(d.value)),
            Err(Error::OutsideFiniteRegion { .. }) => Ok(Extended::Infinite),
            Err(e) => Err(e),
        }
    }
}

/// Lower hull of the finite points of a 1D slice.
struct Hull1d {
    xs: Vec<f64>,
    ys: Vec<f64>,
    nodes: Vec<usize>,
}

impl Hull1d {
    fn new(slice: &SampledSlice) -> Self {
        let grid = slice.grid();
        let pts: Vec<(usize, (f64, f64))> = slice.finite_nodes().map(|(i, v)| (i, (grid.node(i)[0], v))).collect();
        let raw: Vec<(f64, f64)> = pts.iter().map(|p| p.1).collect();
        let hull = chain::lower_hull(&raw);
        Self {
            xs: hull.iter().map(|&k| raw[k].0).collect(),
            ys: hull.iter().map(|&k| raw[k].1).collect(),
            nodes: hull.iter().map(|&k| pts[k].0).collect(),
        }
    }

    fn decompose(&self, x: f64) -> Option<ConvexDecomposition> {
        match chain::locate(&self.xs, x) {
            Segment::Outside => None,
            Segment::Vertex(k) => Some(ConvexDecomposition::trivial(self.nodes[k], vec![self.xs[k]], self.ys[k])),
            Segment::Between(k, t) => {
                let (a, b) = (1.0 - t, t);
                Some(ConvexDecomposition {
                    weights: vec![a, b],
                    points: vec![vec![self.xs[k]], vec![self.xs[k + 1]]],
                    nodes: vec![self.nodes[k], self.nodes[k + 1]],
                    value: a * self.ys[k] + b * self.ys[k + 1],
                })
            }
        }
    }

    fn slope(&self, k: usize) -> f64 {
        (self.ys[k + 1] - self.ys[k]) / (self.xs[k + 1] - self.xs[k])
    }

    /// Supporting line at `x`; at a hull vertex the midpoint of the
    /// subdifferential is used.
    fn minorant(&self, x: f64) -> Option<AffineMap> {
        let slope = match chain::locate(&self.xs, x) {
            Segment::Outside => return None,
            Segment::Between(k, _) => self.slope(k),
            Segment::Vertex(k) => {
                let last = self.xs.len() - 1;
                match (k > 0, k < last) {
                    (true, true) => 0.5 * (self.slope(k - 1) + self.slope(k)),
                    (true, false) => self.slope(k - 1),
                    (false, true) => self.slope(k),
                    (false, false) => 0.0,
                }
            }
        };
        let value = self.decompose(x)?.value;
        Some(AffineMap { slope: vec![slope], offset: value - slope * x })
    }
}

fn is_trivial_gap(value: f64, env: f64) -> bool {
    value - env <= TRIVIAL_REL * value.abs()
}

/// Envelope of a slice, dispatching on dimension.
pub fn envelope(slice: &SampledSlice) -> Result<EnvelopeResult> {
    if slice.grid().dim() == 1 {
        envelope_1d(slice)
    } else {
        envelope_nd(slice)
    }
}

/// Lower convex chain of the finite points, evaluated at every node.
pub fn envelope_1d(slice: &SampledSlice) -> Result<EnvelopeResult> {
    let grid = slice.grid();
    if grid.dim() != 1 {
        return Err(Error::InvalidArgument(format!("envelope_1d needs a 1D slice, got N={}", grid.dim())));
    }
    if slice.finite_count() == 0 {
        return Err(Error::Envelope("every node carries the sentinel".into()));
    }
    let hull = Hull1d::new(slice);
    let mut env_values = Vec::with_capacity(grid.len());
    let mut certificates = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let x = grid.node(i)[0];
        match hull.decompose(x) {
            None => {
                env_values.push(Extended::Infinite);
                certificates.push(None);
            }
            Some(d) => {
                let env = match slice.value(i) {
                    Extended::Finite(v) => d.value.min(v),
                    Extended::Infinite => d.value,
                };
                env_values.push(Extended::Finite(env));
                let cert = match slice.value(i) {
                    Extended::Finite(v) if is_trivial_gap(v, env) => ConvexDecomposition::trivial(i, vec![x], v),
                    _ => d,
                };
                certificates.push(Some(cert));
            }
        }
    }
    let degenerate = hull.xs.len() <= 2
        && slice.finite_nodes().all(|(i, v)| {
            hull.decompose(grid.node(i)[0]).is_some_and(|d| (d.value - v).abs() <= TOL_1D * v.abs().max(1.0))
        });
    Ok(EnvelopeResult {
        source: slice.clone(),
        env_values,
        certificates,
        method: EnvelopeMethod::Chain1d,
        degenerate,
        warnings: Vec::new(),
    })
}

fn build_cloud(slice: &SampledSlice) -> PointCloud {
    let grid = slice.grid();
    let mut cloud = PointCloud::new(grid.dim());
    for (i, v) in slice.finite_nodes() {
        cloud.push(i, &grid.node(i), v);
    }
    cloud
}

/// Rank of the affine hull of the cloud's points.
fn affine_rank(cloud: &PointCloud, dim: usize) -> usize {
    if cloud.len() == 0 {
        return 0;
    }
    let p0 = cloud.point(0).to_vec();
    let mut m = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    for j in 1..cloud.len() {
        let d: Vec<f64> = cloud.point(j).iter().zip(&p0).map(|(a, b)| a - b).collect();
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] += d[r] * d[c];
            }
        }
    }
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    m.rank(1e-10 * scale)
}

/// Starting basis `{node} ∪ {one finite face neighbour per axis}`.
fn trivial_basis(slice: &SampledSlice, cloud: &PointCloud, node: usize) -> Option<Vec<usize>> {
    let grid = slice.grid();
    let mut basis = vec![cloud.position(node)?];
    let multi = grid.multi_index(node);
    let mut stride = 1;
    for a in 0..grid.dim() {
        let up = (multi[a] + 1 < grid.counts()[a]).then(|| node + stride);
        let down = (multi[a] > 0).then(|| node - stride);
        let pick = [up, down].into_iter().flatten().find_map(|n| cloud.position(n))?;
        basis.push(pick);
        stride *= grid.counts()[a];
    }
    Some(basis)
}

fn solution_to_decomposition(sol: &LpSolution, cloud: &PointCloud) -> ConvexDecomposition {
    ConvexDecomposition {
        weights: sol.weights.iter().map(|w| w.1).collect(),
        points: sol.weights.iter().map(|w| cloud.point(w.0).to_vec()).collect(),
        nodes: sol.weights.iter().map(|w| cloud.id(w.0)).collect(),
        value: sol.value,
    }
}

/// Height of the lower hull of the lifted cloud `{(node, value)}` above every
/// node, with barycentric certificates from the supporting facet.
pub fn envelope_nd(slice: &SampledSlice) -> Result<EnvelopeResult> {
    let grid = slice.grid();
    let dim = grid.dim();
    let cloud = build_cloud(slice);
    if cloud.len() == 0 {
        return Err(Error::Envelope("every node carries the sentinel".into()));
    }
    let mut warnings = Vec::new();
    let rank = affine_rank(&cloud, dim);
    if rank < dim {
        warnings.push(format!(
            "finite nodes span an affine subspace of dimension {rank} < {dim}; envelope computed within it"
        ));
    }

    // Rows along axis 0 are processed sequentially with warm starts, rows in
    // parallel; the result does not depend on the schedule.
    let row_len = grid.counts()[0];
    let rows = grid.len() / row_len;
    let per_row = crate::par::map_range(rows, |r| {
        let mut out = Vec::with_capacity(row_len);
        let mut prev: Option<Vec<usize>> = None;
        for k in 0..row_len {
            let i = r * row_len + k;
            let xi = grid.node(i);
            let own = match slice.value(i) {
                Extended::Finite(_) => trivial_basis(slice, &cloud, i),
                Extended::Infinite => None,
            };
            let warm: Vec<&[usize]> = [prev.as_deref(), own.as_deref()].into_iter().flatten().collect();
            let sol = simplex::solve(&cloud, &xi, &warm);
            if let Some(s) = &sol {
                if s.weights.iter().all(|w| w.0 < cloud.len()) && !s.redundant_rows {
                    prev = Some(s.basis.clone());
                }
            }
            out.push((i, xi, sol));
        }
        out
    });

    let mut env_values = vec![Extended::Infinite; grid.len()];
    let mut certificates = vec![None; grid.len()];
    let mut first_plane: Option<Vec<f64>> = None;
    let mut unconverged = 0usize;
    for (i, xi, sol) in per_row.into_iter().flatten() {
        let Some(sol) = sol else { continue };
        if !sol.converged {
            unconverged += 1;
        }
        if first_plane.is_none() {
            first_plane = Some(sol.plane.clone());
        }
        let (env, cert) = match slice.value(i) {
            Extended::Finite(v) => {
                let env = sol.value.min(v);
                if is_trivial_gap(v, env) {
                    (env, ConvexDecomposition::trivial(i, xi, v))
                } else {
                    (env, solution_to_decomposition(&sol, &cloud))
                }
            }
            Extended::Infinite => (sol.value, solution_to_decomposition(&sol, &cloud)),
        };
        env_values[i] = Extended::Finite(env);
        certificates[i] = Some(cert);
    }
    if unconverged > 0 {
        warnings.push(format!("{unconverged} node solves hit the iteration cap"));
    }
    let degenerate = first_plane.is_some_and(|plane| {
        slice.finite_nodes().all(|(i, v)| {
            let xi = grid.node(i);
            let l = xi.iter().zip(&plane).map(|(a, b)| a * b).sum::<f64>() + plane[dim];
            (v - l).abs() <= TOL_2D * v.abs().max(1.0)
        })
    });
    Ok(EnvelopeResult {
        source: slice.clone(),
        env_values,
        certificates,
        method: EnvelopeMethod::LowerHullNd,
        degenerate,
        warnings,
    })
}

/// Envelope of the slice restricted to the closed ball `B_K`.
pub fn restricted_bipolar(slice: &SampledSlice, radius: f64) -> Result<EnvelopeResult> {
    let grid = slice.grid();
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let restricted = slice.restrict_to_ball(radius);
    if restricted.finite_count() == 0 {
        return Err(Error::Envelope(format!("no finite node inside B_{radius}")));
    }
    let mut env = envelope(&restricted)?;
    if grid.bbox().inner_radius() < radius * (1.0 - 1e-12) {
        env.warnings.push(format!(
            "grid box (inner radius {}) does not contain B_{radius}; nodes outside the box are treated as +inf",
            grid.bbox().inner_radius()
        ));
    }
    Ok(env)
}

fn node_at(grid: &XiGrid, xi: &[f64]) -> Option<usize> {
    let i = grid.nearest(xi);
    (dist(&grid.node(i), xi) <= 1e-12 * grid.max_spacing()).then_some(i)
}

/// Envelope value and decomposition at an arbitrary point of the slice's box.
///
/// Cheaper than [`envelope`] when only one point is needed.
pub fn envelope_at(slice: &SampledSlice, xi: &[f64]) -> Result<(f64, ConvexDecomposition)> {
    let grid = slice.grid();
    if xi.len() != grid.dim() || !grid.bbox().contains(xi) {
        return Err(Error::OutsideFiniteRegion { point: xi.to_vec() });
    }
    let at_node = node_at(grid, xi);
    let d = if grid.dim() == 1 {
        Hull1d::new(slice).decompose(xi[0])
    } else {
        let cloud = build_cloud(slice);
        let own = at_node.and_then(|i| trivial_basis(slice, &cloud, i));
        let warm: Vec<&[usize]> = own.as_deref().into_iter().collect();
        simplex::solve(&cloud, xi, &warm).map(|s| solution_to_decomposition(&s, &cloud))
    };
    let d = d.ok_or_else(|| Error::OutsideFiniteRegion { point: xi.to_vec() })?;
    if let Some(i) = at_node {
        if let Extended::Finite(v) = slice.value(i) {
            if is_trivial_gap(v, d.value.min(v)) {
                return Ok((v.min(d.value), ConvexDecomposition::trivial(i, grid.node(i), v)));
            }
        }
    }
    Ok((d.value, d))
}

/// Envelope values of `slice` at arbitrary points of its box; points outside
/// the convex span of the finite nodes get the sentinel.
pub fn envelope_at_points(slice: &SampledSlice, points: &[Vec<f64>]) -> Result<Vec<Extended>> {
    let grid = slice.grid();
    if let Some(p) = points.iter().find(|p| p.len() != grid.dim() || !grid.bbox().contains(p)) {
        return Err(Error::OutsideFiniteRegion { point: p.clone() });
    }
    if slice.finite_count() == 0 {
        return Ok(vec![Extended::Infinite; points.len()]);
    }
    let own = |p: &[f64]| node_at(grid, p).and_then(|i| slice.value(i).finite());
    if grid.dim() == 1 {
        let hull = Hull1d::new(slice);
        return Ok(points
            .iter()
            .map(|p| match hull.decompose(p[0]) {
                None => Extended::Infinite,
                Some(d) => Extended::Finite(own(p).map_or(d.value, |v| v.min(d.value))),
            })
            .collect());
    }
    let cloud = build_cloud(slice);
    Ok(crate::par::map_slice(points, |p| {
        let basis = node_at(grid, p).and_then(|i| trivial_basis(slice, &cloud, i));
        let warm: Vec<&[usize]> = basis.as_deref().into_iter().collect();
        match simplex::solve(&cloud, p, &warm) {
            None => Extended::Infinite,
            Some(sol) => Extended::Finite(own(p).map_or(sol.value, |v| v.min(sol.value))),
        }
    }))
}

/// Convex-combination certificate at `xi`: `Σαᵢξᵢ = ξ` and `Σαᵢf(ξᵢ) = f**(ξ)`.
pub fn decompose(env: &EnvelopeResult, xi: &[f64]) -> Result<ConvexDecomposition> {
    let grid = env.grid();
    if xi.len() != grid.dim() || !grid.bbox().contains(xi) {
        return Err(Error::OutsideFiniteRegion { point: xi.to_vec() });
    }
    if let Some(i) = node_at(grid, xi) {
        return env.certificate(i).cloned().ok_or_else(|| Error::OutsideFiniteRegion { point: xi.to_vec() });
    }
    envelope_at(env.source(), xi).map(|(_, d)| d)
}

/// Best affine minorant at `xi0`: `ℓ ≤ f` at every finite node and
/// `ℓ(ξ₀) = f**(ξ₀)`.
pub fn best_affine_minorant(slice: &SampledSlice, xi0: &[f64]) -> Result<AffineMap> {
    let grid = slice.grid();
    if xi0.len() != grid.dim() || !grid.bbox().contains(xi0) {
        return Err(Error::OutsideFiniteRegion { point: xi0.to_vec() });
    }
    if grid.dim() == 1 {
        return Hull1d::new(slice).minorant(xi0[0]).ok_or_else(|| Error::OutsideFiniteRegion { point: xi0.to_vec() });
    }
    let cloud = build_cloud(slice);
    let sol = simplex::solve(&cloud, xi0, &[]).ok_or_else(|| Error::OutsideFiniteRegion { point: xi0.to_vec() })?;
    let dim = grid.dim();
    Ok(AffineMap { slope: sol.plane[..dim].to_vec(), offset: sol.plane[dim] })
}

/// Sampling policy for envelope ladders: a centered cube with spacing ≤ `spacing`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPolicy {
    pub dim: usize,
    pub spacing: f64,
}

impl GridPolicy {
    pub fn grid(&self, radius: f64) -> Result<XiGrid> {
        XiGrid::centered_with_spacing(self.dim, radius, self.spacing)
    }
}

/// Outcome of a restricted-bipolar ladder.
#[derive(Clone, Debug, Serialize)]
pub struct BipolarLimit {
    pub stabilized: bool,
    pub k_star: f64,
    pub env: EnvelopeResult,
    /// Restricted envelope values on the probe window, one row per ladder entry.
    pub window_values: Vec<Vec<f64>>,
    pub window_nodes: Vec<usize>,
}

/// Restricted bipolars `(f̃_K)**` along an increasing ladder of radii,
/// compared on the probe window `|ξ| ≤ window`.
///
/// Values must be non-increasing along the ladder (within `tol`); the first
/// radius whose successor changes nothing beyond `tol` is reported as `k_star`.
pub fn bipolar_limit(
    f: &Lagrangian,
    x: &[f64],
    u: f64,
    ladder: &[f64],
    policy: GridPolicy,
    window: f64,
    tol: f64,
) -> Result<BipolarLimit> {
    if ladder.is_empty() {
        return Err(Error::InvalidArgument("empty ladder".into()));
    }
    if ladder.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("ladder must be strictly increasing".into()));
    }
    if window > ladder[0] {
        return Err(Error::InvalidArgument(format!("probe window {window} exceeds the first radius {}", ladder[0])));
    }
    let kmax = *ladder.last().expect("non-empty ladder");
    let slice = SampledSlice::sample(f, &policy.grid(kmax)?, x, u)?;
    let grid = slice.grid();
    let window_nodes: Vec<usize> = (0..grid.len()).filter(|&i| norm(&grid.node(i)) <= window * (1.0 + 1e-12)).collect();
    if window_nodes.is_empty() {
        return Err(Error::InvalidArgument("probe window contains no grid node".into()));
    }
    let envs = crate::par::map_slice(ladder, |&k| restricted_bipolar(&slice, k));
    let envs: Vec<EnvelopeResult> = envs.into_iter().collect::<Result<_>>()?;
    let mut window_values = Vec::with_capacity(envs.len());
    for (k, env) in ladder.iter().zip(&envs) {
        let row = window_nodes
            .iter()
            .map(|&i| {
                env.value(i)
                    .finite()
                    .ok_or_else(|| Error::Envelope(format!("restricted envelope at K={k} is infinite on the window")))
            })
            .collect::<Result<Vec<f64>>>()?;
        window_values.push(row);
    }
    for w in 0..ladder.len().saturating_sub(1) {
        for (j, (a, b)) in window_values[w].iter().zip(&window_values[w + 1]).enumerate() {
            if *b > *a + tol {
                return Err(Error::NonMonotone(format!(
                    "value at node {} rises from {a} (K={}) to {b} (K={})",
                    window_nodes[j],
                    ladder[w],
                    ladder[w + 1]
                )));
            }
        }
    }
    let stable_at = (0..ladder.len().saturating_sub(1))
        .find(|&w| window_values[w].iter().zip(&window_values[w + 1]).all(|(a, b)| (a - b).abs() <= tol));
    let (stabilized, idx) = match stable_at {
        Some(w) => (true, w),
        None => (false, ladder.len() - 1),
    };
    Ok(BipolarLimit {
        stabilized,
        k_star: ladder[idx],
        env: envs.into_iter().nth(idx).expect("index within ladder"),
        window_values,
        window_nodes,
    })
}
