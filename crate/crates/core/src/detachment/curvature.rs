use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{Flags, Lagrangian};
use crate::types::norm;

/// θ values at or below this count as zero.
const THETA_ZERO: f64 = 1e-6;

fn eval(f: &Lagrangian, x: &[f64], u: f64, xi: &[f64]) -> Result<f64> {
    match f.eval(x, u, xi) {
        Ok(v) => v.finite().ok_or_else(|| Error::InvalidArgument(format!("f is infinite at {xi:?}"))),
        Err(reason) => Err(Error::Evaluation { node: Vec::new(), reason }),
    }
}

fn hessian(f: &Lagrangian, x: &[f64], u: f64, xi: &[f64], h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let n = xi.len();
    let at = |shift: &[(usize, f64)]| {
        let mut p = xi.to_vec();
        for &(k, d) in shift {
            p[k] += d;
        }
        eval(f, x, u, &p)
    };
    let f0 = at(&[])?;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = (at(&[(i, h)])? - 2.0 * f0 + at(&[(i, -h)])?) / (h * h);
        for j in 0..i {
            let v = (at(&[(i, h), (j, h)])? - at(&[(i, h), (j, -h)])? - at(&[(i, -h), (j, h)])?
                + at(&[(i, -h), (j, -h)])?)
                / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite second differences at {xi:?}")));
    }
    Ok(m)
}

fn eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev = match m.nrows() {
        1 => vec![m[(0, 0)]],
        2 => {
            let (a, b, c) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
            let mid = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            vec![mid - rad, mid + rad]
        }
        _ => m.clone().symmetric_eigen().eigenvalues.iter().copied().collect(),
    };
    ev.sort_by(f64::total_cmp);
    ev
}

fn min_eig_unchecked(f: &Lagrangian, x: &[f64], u: f64, xi: &[f64], h: f64) -> Result<f64> {
    Ok(eigenvalues(&hessian(f, x, u, xi, h)?)[0])
}

fn require_c2(f: &Lagrangian) -> Result<()> {
    if !f.flags().twice_differentiable {
        return Err(Error::InvalidArgument(format!("{} is not flagged twice differentiable", f.name())));
    }
    Ok(())
}

/// Ascending eigenvalues of the central-difference Hessian in ξ.
pub fn hessian_eigenvalues(f: &Lagrangian, x: &[f64], u: f64, xi: &[f64], h: f64) -> Result<Vec<f64>> {
    require_c2(f)?;
    Ok(eigenvalues(&hessian(f, x, u, xi, h)?))
}

/// `λ[f](ξ)`: smallest eigenvalue of the central-difference Hessian.
pub fn hessian_min_eig(f: &Lagrangian, x: &[f64], u: f64, xi: &[f64], h: f64) -> Result<f64> {
    require_c2(f)?;
    min_eig_unchecked(f, x, u, xi, h)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaProfile {
    pub radii: Vec<f64>,
    pub theta: Vec<f64>,
    /// Least-squares slope of `log θ` against `log r` over the upper half of
    /// the radii where `θ > 0`; `None` when fewer than two such radii exist.
    pub growth_fit: Option<f64>,
}

impl ThetaProfile {
    pub fn is_zero(&self) -> bool {
        self.theta.iter().all(|t| *t <= THETA_ZERO)
    }
}

fn directions(dim: usize, angular: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..angular.max(1))
            .map(|k| {
                let t = 2.0 * PI * k as f64 / angular.max(1) as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let mut out = Vec::new();
            for a in 0..dim {
                for s in [1.0, -1.0] {
                    let mut v = vec![0.0; dim];
                    v[a] = s;
                    out.push(v);
                }
            }
            let diag = 1.0 / (dim as f64).sqrt();
            for mask in 0..(1usize << dim) {
                out.push((0..dim).map(|a| if mask >> a & 1 == 1 { -diag } else { diag }).collect());
            }
            out
        }
    }
}

fn log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `θ(r) = max over sampled directions of (λ[f](r·d))⁻`.
///
/// `f` only needs to be C² on the sampled spheres.
pub fn theta_profile(
    f: &Lagrangian,
    dim: usize,
    radii: &[f64],
    angular: usize,
    h: f64,
    x: &[f64],
    u: f64,
) -> Result<ThetaProfile> {
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidArgument("radii must be positive".into()));
    }
    let dirs = directions(dim, angular);
    let theta = crate::par::try_map_range(radii.len(), |k| {
        let r = radii[k];
        let mut worst = 0.0f64;
        for d in &dirs {
            let xi: Vec<f64> = d.iter().map(|c| r * c).collect();
            worst = worst.max(-min_eig_unchecked(f, x, u, &xi, h)?);
        }
        Ok::<f64, Error>(worst)
    })?;
    let upper: Vec<(f64, f64)> = radii
        .iter()
        .zip(&theta)
        .skip(radii.len() / 2)
        .filter(|(_, t)| **t > THETA_ZERO)
        .map(|(r, t)| (r.ln(), t.ln()))
        .collect();
    Ok(ThetaProfile { radii: radii.to_vec(), theta, growth_fit: log_slope(&upper) })
}

/// Radial profile `γ` of `g₁(ξ) = γ(|ξ|)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gamma {
    /// `a r³ + b r⁴ + c r⁵` on `[0, 1]`, `r^p` beyond.
    Quintic { p: f64, a: f64, b: f64, c: f64 },
    /// `γ'' = θ` (piecewise linear on `knots`, zero past the last knot) with
    /// `γ(0) = γ'(0) = 0`; `first`/`value` hold `γ'`/`γ` at the knots.
    Integrated { knots: Vec<f64>, second: Vec<f64>, first: Vec<f64>, value: Vec<f64> },
}

impl Gamma {
    pub fn quintic(p: f64) -> Result<Self> {
        let m = Matrix3::new(1.0, 1.0, 1.0, 3.0, 4.0, 5.0, 6.0, 12.0, 20.0);
        let rhs = Vector3::new(1.0, p, p * (p - 1.0));
        let sol = m.lu().solve(&rhs).ok_or_else(|| Error::InvalidArgument("singular quintic system".into()))?;
        Ok(Gamma::Quintic { p, a: sol[0], b: sol[1], c: sol[2] })
    }

    fn integrated(knots: Vec<f64>, second: Vec<f64>) -> Self {
        let mut first = vec![0.0; knots.len()];
        let mut value = vec![0.0; knots.len()];
        for k in 1..knots.len() {
            let dr = knots[k] - knots[k - 1];
            let (s0, s1) = (second[k - 1], second[k]);
            first[k] = first[k - 1] + 0.5 * dr * (s0 + s1);
            value[k] = value[k - 1] + first[k - 1] * dr + dr * dr * (s0 / 3.0 + s1 / 6.0);
        }
        Gamma::Integrated { knots, second, first, value }
    }

    /// `(γ, γ', γ'')` at `r ≥ 0`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        match self {
            Gamma::Quintic { p, a, b, c } => {
                if r >= 1.0 {
                    (r.powf(*p), p * r.powf(p - 1.0), p * (p - 1.0) * r.powf(p - 2.0))
                } else {
                    let r2 = r * r;
                    (
                        r2 * r * (a + r * (b + r * c)),
                        r2 * (3.0 * a + r * (4.0 * b + 5.0 * c * r)),
                        r * (6.0 * a + r * (12.0 * b + 20.0 * c * r)),
                    )
                }
            }
            Gamma::Integrated { knots, second, first, value } => {
                let last = knots.len() - 1;
                if r >= knots[last] {
                    let d = r - knots[last];
                    return (value[last] + first[last] * d, first[last], 0.0);
                }
                let k = knots.partition_point(|t| *t <= r).saturating_sub(1).min(last - 1);
                let dr = knots[k + 1] - knots[k];
                let t = r - knots[k];
                let slope = (second[k + 1] - second[k]) / dr;
                let s = second[k] + slope * t;
                let g1 = first[k] + second[k] * t + 0.5 * slope * t * t;
                let g0 = value[k] + first[k] * t + 0.5 * second[k] * t * t + slope * t * t * t / 6.0;
                (g0, g1, s)
            }
        }
    }

    pub fn lagrangian(&self) -> Lagrangian {
        let g = self.clone();
        Lagrangian::new("gamma_radial", Vec::new(), Flags::new(true, true, true, false), move |_, _, xi| {
            g.eval(norm(xi)).0.max(0.0)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionOptions {
    /// Half-width of the box on which `λ[g]` is sampled at the end.
    pub check_radius: f64,
    /// Sample points per axis for the final convexity check.
    pub check_points: usize,
    /// Slack on the growth-exponent hypothesis.
    pub fit_tol: f64,
    pub h: f64,
    pub x: Vec<f64>,
    pub u: f64,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        Self { check_radius: 3.0, check_points: 121, fit_tol: 0.25, h: 1e-3, x: vec![0.0], u: 0.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Correction {
    pub p: f64,
    /// `θ ≡ 0` at every sampled radius: `g = f`.
    pub convex_input: bool,
    pub gamma: Option<Gamma>,
    pub m: f64,
    pub r: f64,
    /// `k` in `g₂(ξ) = k(√(1+|ξ|²) − 1)` when a linear-growth term is needed.
    pub g2_scale: Option<f64>,
    /// Smallest sampled `λ[g]` on the check box.
    pub min_lambda: f64,
    #[serde(skip)]
    pub g: Lagrangian,
}

fn check_points(dim: usize, radius: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let n = per_axis.max(2);
    let axis: Vec<f64> = (0..n).map(|k| -radius + 2.0 * radius * k as f64 / (n - 1) as f64).collect();
    let mut pts = vec![Vec::new()];
    for _ in 0..dim {
        pts = pts.into_iter().flat_map(|p| axis.iter().map(move |a| [p.clone(), vec![*a]].concat())).collect();
    }
    pts
}

fn min_lambda(f: &Lagrangian, pts: &[Vec<f64>], opts: &CorrectionOptions) -> Result<f64> {
    let vals = crate::par::try_map_range(pts.len(), |k| min_eig_unchecked(f, &opts.x, opts.u, &pts[k], opts.h))?;
    Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
}

/// Builds a convex `g = f + M g₁ (+ g₂)` from the curvature defect profile.
pub fn convexifying_correction(
    f: &Lagrangian,
    dim: usize,
    p: f64,
    profile: &ThetaProfile,
    opts: &CorrectionOptions,
) -> Result<Correction> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p must be at least 1, got {p}")));
    }
    let box_pts = check_points(dim, opts.check_radius, opts.check_points);
    if profile.is_zero() {
        let min_lambda = min_lambda(f, &box_pts, opts)?;
        return Ok(Correction {
            p,
            convex_input: true,
            gamma: None,
            m: 0.0,
            r: 0.0,
            g2_scale: None,
            min_lambda,
            g: f.clone(),
        });
    }
    if let Some(fit) = profile.growth_fit {
        if fit > p - 2.0 + opts.fit_tol {
            return Err(Error::Hypothesis(format!(
                "theta grows like r^{fit:.3}, faster than the allowed r^{}",
                p - 2.0
            )));
        }
        if p == 1.0 && fit >= -1.0 {
            return Err(Error::Hypothesis(format!(
                "theta decays like r^{fit:.3}; its integral over [0, inf) diverges"
            )));
        }
    }
    let pairs: Vec<(f64, f64)> = profile.radii.iter().copied().zip(profile.theta.iter().copied()).collect();
    let (gamma, m, r) = if p > 1.0 {
        let gamma = Gamma::quintic(p)?;
        let c = p * (p - 1.0).min(1.0);
        let r = 2.0;
        let m = pairs
            .iter()
            .filter(|(rad, _)| *rad >= r)
            .map(|(rad, t)| t / (c * rad.powf(p - 2.0)))
            .fold(1.0f64, f64::max);
        (gamma, m, r)
    } else {
        let mut knots = vec![0.0];
        let mut second = vec![pairs.first().map_or(0.0, |q| q.1)];
        for (rad, t) in &pairs {
            if *rad > *knots.last().expect("non-empty") {
                knots.push(*rad);
                second.push(*t);
            }
        }
        let gamma = Gamma::integrated(knots.clone(), second.clone());
        let r = knots
            .iter()
            .copied()
            .find(|&k| k >= 2.0 && gamma.eval(k).1 > 0.0)
            .unwrap_or(*knots.last().expect("non-empty"));
        let m = knots
            .iter()
            .zip(&second)
            .filter(|(k, _)| **k > r)
            .map(|(k, s)| k * s / gamma.eval(*k).1)
            .fold(1.0f64, f64::max);
        (gamma, m, r)
    };
    let fm = Lagrangian::sum(vec![f.clone(), gamma.lagrangian().scaled(m)]);
    let ball: Vec<Vec<f64>> =
        check_points(dim, r, opts.check_points).into_iter().filter(|q| norm(q) <= r * (1.0 + 1e-12)).collect();
    let inner = min_lambda(&fm, &ball, opts)?;
    let (g, g2_scale) = if inner < 0.0 {
        let k = 1.1 * (-inner) * (1.0 + r * r).powf(1.5);
        let g2 = Lagrangian::new("linear_growth", vec![k], Flags::new(true, true, true, false), move |_, _, xi| {
            k * ((1.0 + xi.iter().map(|v| v * v).sum::<f64>()).sqrt() - 1.0)
        });
        (Lagrangian::sum(vec![fm, g2]), Some(k))
    } else {
        (fm, None)
    };
    let min_lambda = min_lambda(&g, &box_pts, opts)?;
    Ok(Correction { p, convex_input: false, gamma: Some(gamma), m, r, g2_scale, min_lambda, g })
}
