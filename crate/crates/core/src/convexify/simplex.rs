//! Supporting-facet search for the lower hull of a lifted point cloud.
//!
//! At a target `ξ₀` the envelope value is the optimum of
//!
//! ```text
//! min Σ αⱼ f(ξⱼ)   s.t.  Σ αⱼ ξⱼ = ξ₀,  Σ αⱼ = 1,  α ≥ 0,
//! ```
//!
//! a linear program with `N + 1` rows. An optimal basis is a lower facet of
//! the lifted cloud containing `ξ₀`; its primal weights are the barycentric
//! certificate and its dual is the supporting affine minorant. The solver is a
//! dense revised simplex with two phases, most-negative pricing (smallest
//! index on ties) and a switch to Bland's rule after a run of degenerate
//! pivots.

use nalgebra::{DMatrix, DVector};

/// Finite lifted points `(ξⱼ, f(ξⱼ))`.
#[derive(Clone, Debug)]
pub(crate) struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    costs: Vec<f64>,
    /// Caller-side identifier of each point (grid linear index).
    ids: Vec<usize>,
}

impl PointCloud {
    pub(crate) fn new(dim: usize) -> Self {
        Self { dim, coords: Vec::new(), costs: Vec::new(), ids: Vec::new() }
    }

    pub(crate) fn push(&mut self, id: usize, xi: &[f64], cost: f64) {
        debug_assert_eq!(xi.len(), self.dim);
        self.coords.extend_from_slice(xi);
        self.costs.push(cost);
        self.ids.push(id);
    }

    pub(crate) fn len(&self) -> usize {
        self.costs.len()
    }

    pub(crate) fn point(&self, j: usize) -> &[f64] {
        &self.coords[j * self.dim..(j + 1) * self.dim]
    }

    pub(crate) fn cost(&self, j: usize) -> f64 {
        self.costs[j]
    }

    pub(crate) fn id(&self, j: usize) -> usize {
        self.ids[j]
    }

    /// Position of caller id `id`, if present.
    pub(crate) fn position(&self, id: usize) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }
}

#[derive(Clone, Debug)]
pub(crate) struct LpSolution {
    pub value: f64,
    /// `(cloud index, weight)` for basic points with positive weight, sorted by index.
    pub weights: Vec<(usize, f64)>,
    /// Supporting plane `(ζ₁..ζ_N, c)`: `ℓ(ξ) = ⟨ζ, ξ⟩ + c`.
    pub plane: Vec<f64>,
    /// Final basis (cloud indices; artificial columns are `>= len`).
    pub basis: Vec<usize>,
    /// False when the iteration cap was hit.
    pub converged: bool,
    /// True when an artificial column stayed basic (points do not span ℝᴺ).
    pub redundant_rows: bool,
}

const PRICE_REL: f64 = 1e-12;
const PRICE_ABS: f64 = 1e-300;
const FEAS_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 32;

struct Lp<'a> {
    cloud: &'a PointCloud,
    m: usize,
    sign: Vec<f64>,
    rhs: DVector<f64>,
}

enum Phase {
    One,
    Two,
}

impl<'a> Lp<'a> {
    fn new(cloud: &'a PointCloud, target: &[f64]) -> Self {
        let m = cloud.dim + 1;
        let mut b: Vec<f64> = target.to_vec();
        b.push(1.0);
        let sign: Vec<f64> = b.iter().map(|v| if *v < 0.0 { -1.0 } else { 1.0 }).collect();
        let rhs = DVector::from_iterator(m, b.iter().zip(&sign).map(|(v, s)| v * s));
        Self { cloud, m, sign, rhs }
    }

    fn n(&self) -> usize {
        self.cloud.len()
    }

    /// Column of the sign-adjusted constraint matrix.
    fn column(&self, j: usize) -> DVector<f64> {
        if j >= self.n() {
            let mut e = DVector::zeros(self.m);
            e[j - self.n()] = 1.0;
            return e;
        }
        let p = self.cloud.point(j);
        DVector::from_fn(self.m, |r, _| if r < self.cloud.dim { p[r] * self.sign[r] } else { self.sign[r] })
    }

    fn cost(&self, j: usize, phase: &Phase) -> f64 {
        match phase {
            Phase::One => {
                if j >= self.n() {
                    1.0
                } else {
                    0.0
                }
            }
            Phase::Two => {
                if j >= self.n() {
                    0.0
                } else {
                    self.cloud.cost(j)
                }
            }
        }
    }

    fn inverse(&self, basis: &[usize]) -> Option<DMatrix<f64>> {
        let mut b = DMatrix::zeros(self.m, self.m);
        for (k, &j) in basis.iter().enumerate() {
            b.set_column(k, &self.column(j));
        }
        b.try_inverse()
    }

    /// Runs simplex iterations from a primal-feasible basis. Returns the final
    /// inverse and whether optimality was reached before the cap.
    fn iterate(&self, basis: &mut [usize], phase: &Phase) -> Option<(DMatrix<f64>, bool)> {
        let n = self.n();
        let cap = 200 + 20 * n;
        let mut in_basis = vec![false; n];
        for &j in basis.iter() {
            if j < n {
                in_basis[j] = true;
            }
        }
        let mut degenerate_run = 0usize;
        for _ in 0..cap {
            let binv = self.inverse(basis)?;
            let xb = &binv * &self.rhs;
            let cb = DVector::from_iterator(self.m, basis.iter().map(|&j| self.cost(j, phase)));
            let y_adj = binv.transpose() * cb;
            // dual in original row orientation
            let y: Vec<f64> = (0..self.m).map(|r| y_adj[r] * self.sign[r]).collect();
            let bland = degenerate_run >= DEGENERATE_RUN;

            let mut entering: Option<(usize, f64)> = None;
            for j in 0..n {
                if in_basis[j] {
                    continue;
                }
                let p = self.cloud.point(j);
                let plane_j = p.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() + y[self.m - 1];
                let c = self.cost(j, phase);
                let d = c - plane_j;
                let thr = PRICE_REL * (c.abs() + plane_j.abs()) + PRICE_ABS;
                if d < -thr {
                    if bland {
                        entering = Some((j, d));
                        break;
                    }
                    match entering {
                        Some((_, best)) if d >= best => {}
                        _ => entering = Some((j, d)),
                    }
                }
            }
            let Some((j, _)) = entering else {
                return Some((binv, true));
            };

            let w = &binv * self.column(j);
            let wmax = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let piv = 1e-12 * wmax.max(1e-300);
            let mut leave: Option<(usize, f64)> = None;
            for k in 0..self.m {
                if w[k] > piv {
                    let theta = xb[k].max(0.0) / w[k];
                    match leave {
                        Some((kk, t)) if theta > t || (theta == t && basis[k] >= basis[kk]) => {}
                        _ => leave = Some((k, theta)),
                    }
                }
            }
            let (k, theta) = leave?;
            if theta <= 1e-15 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            if basis[k] < n {
                in_basis[basis[k]] = false;
            }
            basis[k] = j;
            in_basis[j] = true;
        }
        let binv = self.inverse(basis)?;
        Some((binv, false))
    }

    fn feasible_warm(&self, basis: &[usize]) -> bool {
        if basis.len() != self.m || basis.iter().any(|&j| j >= self.n()) {
            return false;
        }
        let mut sorted = basis.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.m {
            return false;
        }
        match self.inverse(basis) {
            Some(binv) => (&binv * &self.rhs).iter().all(|v| *v >= -1e-12),
            None => false,
        }
    }

    fn solve(&self, warm: &[&[usize]]) -> Option<LpSolution> {
        let n = self.n();
        if n == 0 {
            return None;
        }
        let mut basis: Vec<usize> = match warm.iter().find(|b| self.feasible_warm(b)) {
            Some(b) => b.to_vec(),
            None => {
                let mut basis: Vec<usize> = (n..n + self.m).collect();
                let (binv, _) = self.iterate(&mut basis, &Phase::One)?;
                let xb = &binv * &self.rhs;
                let infeas: f64 = basis.iter().zip(xb.iter()).filter(|(&j, _)| j >= n).map(|(_, v)| v.max(0.0)).sum();
                if infeas > FEAS_TOL {
                    return None;
                }
                self.drive_out_artificials(&mut basis);
                basis
            }
        };
        let (binv, converged) = self.iterate(&mut basis, &Phase::Two)?;
        let xb = &binv * &self.rhs;
        let cb = DVector::from_iterator(self.m, basis.iter().map(|&j| self.cost(j, &Phase::Two)));
        let y_adj = binv.transpose() * cb;
        let plane: Vec<f64> = (0..self.m).map(|r| y_adj[r] * self.sign[r]).collect();

        let mut weights: Vec<(usize, f64)> =
            basis.iter().zip(xb.iter()).filter(|(&j, &x)| j < n && x > 0.0).map(|(&j, &x)| (j, x)).collect();
        weights.sort_by_key(|w| w.0);
        let total: f64 = weights.iter().map(|w| w.1).sum();
        if total > 0.0 {
            for w in &mut weights {
                w.1 /= total;
            }
        }
        let value = weights.iter().map(|&(j, a)| a * self.cloud.cost(j)).sum();
        let redundant_rows = basis.iter().any(|&j| j >= n);
        Some(LpSolution { value, weights, plane, basis, converged, redundant_rows })
    }

    fn drive_out_artificials(&self, basis: &mut [usize]) {
        let n = self.n();
        for k in 0..self.m {
            if basis[k] < n {
                continue;
            }
            let Some(binv) = self.inverse(basis) else { return };
            let row = binv.row(k).clone_owned();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..n {
                if basis.contains(&j) {
                    continue;
                }
                let v = (&row * self.column(j))[0].abs();
                if v > 1e-9 && best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                basis[k] = j;
            }
        }
    }
}

/// Minimises `Σ αⱼ f(ξⱼ)` over convex combinations hitting `target`.
/// Returns `None` when `target` is outside the convex hull of the cloud.
pub(crate) fn solve(cloud: &PointCloud, target: &[f64], warm: &[&[usize]]) -> Option<LpSolution> {
    Lp::new(cloud, target).solve(warm)
}
