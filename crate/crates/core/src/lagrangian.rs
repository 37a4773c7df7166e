//! Integrands `f(x, u, ξ)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::types::{dist, Extended, SampledSlice};

type EvalFn = dyn Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync;

/// Capability flags of a Lagrangian.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    /// No dependence on `x`.
    pub autonomous: bool,
    /// No dependence on `u`.
    pub state_free: bool,
    pub twice_differentiable: bool,
    pub envelope_known: bool,
}

impl Flags {
    pub const fn new(autonomous: bool, state_free: bool, twice_differentiable: bool, envelope_known: bool) -> Self {
        Self { autonomous, state_free, twice_differentiable, envelope_known }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LagrangianKind {
    Builtin { name: String, params: Vec<f64> },
    Tabulated { source: String },
    Composite { parts: Vec<String> },
}

/// An integrand evaluator with capability flags.
///
/// Evaluators return `f64::INFINITY` for `+∞`; [`Lagrangian::eval`] turns that
/// into the [`Extended::Infinite`] sentinel and rejects NaN and negative values.
#[derive(Clone)]
pub struct Lagrangian {
    kind: LagrangianKind,
    flags: Flags,
    eval: Arc<EvalFn>,
}

impl fmt::Debug for Lagrangian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lagrangian").field("kind", &self.kind).field("flags", &self.flags).finish()
    }
}

impl Lagrangian {
    pub fn new(
        name: impl Into<String>,
        params: Vec<f64>,
        flags: Flags,
        eval: impl Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { kind: LagrangianKind::Builtin { name: name.into(), params }, flags, eval: Arc::new(eval) }
    }

    /// Lagrangian defined by a sampled slice: the tabulated value at grid
    /// nodes, `+∞` everywhere else.
    pub fn tabulated(slice: SampledSlice, source: impl Into<String>) -> Self {
        let grid = slice.grid().clone();
        let tol = 1e-9 * grid.max_spacing();
        let eval = move |_: &[f64], _: f64, xi: &[f64]| {
            if !grid.bbox().contains(xi) {
                return f64::INFINITY;
            }
            let i = grid.nearest(xi);
            if dist(&grid.node(i), xi) <= tol {
                slice.value(i).to_f64()
            } else {
                f64::INFINITY
            }
        };
        Self {
            kind: LagrangianKind::Tabulated { source: source.into() },
            flags: Flags::new(true, true, false, false),
            eval: Arc::new(eval),
        }
    }

    /// Pointwise sum of the given Lagrangians.
    pub fn sum(parts: Vec<Lagrangian>) -> Self {
        let flags = Flags {
            autonomous: parts.iter().all(|p| p.flags.autonomous),
            state_free: parts.iter().all(|p| p.flags.state_free),
            twice_differentiable: parts.iter().all(|p| p.flags.twice_differentiable),
            envelope_known: false,
        };
        let names = parts.iter().map(|p| p.name().to_string()).collect();
        let evals: Vec<Arc<EvalFn>> = parts.into_iter().map(|p| p.eval).collect();
        let eval = move |x: &[f64], u: f64, xi: &[f64]| evals.iter().map(|e| e(x, u, xi)).sum();
        Self { kind: LagrangianKind::Composite { parts: names }, flags, eval: Arc::new(eval) }
    }

    /// `k · self`, for `k ≥ 0`.
    pub fn scaled(&self, k: f64) -> Self {
        let inner = self.eval.clone();
        let eval = move |x: &[f64], u: f64, xi: &[f64]| {
            let v = inner(x, u, xi);
            if k == 0.0 && v.is_finite() {
                0.0
            } else {
                k * v
            }
        };
        Self {
            kind: LagrangianKind::Composite { parts: vec![format!("{k}*{}", self.name())] },
            flags: Flags { envelope_known: false, ..self.flags },
            eval: Arc::new(eval),
        }
    }

    pub fn kind(&self) -> &LagrangianKind {
        &self.kind
    }

    pub fn flags(&self) -> Flags {
        self.flags
    }

    pub fn name(&self) -> &str {
        match &self.kind {
            LagrangianKind::Builtin { name, .. } => name,
            LagrangianKind::Tabulated { source } => source,
            LagrangianKind::Composite { .. } => "composite",
        }
    }

    pub fn eval(&self, x: &[f64], u: f64, xi: &[f64]) -> Result<Extended, String> {
        let v = (self.eval)(x, u, xi);
        if v.is_nan() {
            return Err(format!("NaN at x={x:?}, u={u}, xi={xi:?}"));
        }
        if v < 0.0 {
            return Err(format!("negative value {v} at x={x:?}, u={u}, xi={xi:?}"));
        }
        Ok(Extended::from_f64(v).expect("non-negative non-NaN value"))
    }

    /// Raw evaluation; `+∞` is returned as `f64::INFINITY`.
    pub fn eval_f64(&self, x: &[f64], u: f64, xi: &[f64]) -> f64 {
        (self.eval)(x, u, xi)
    }

    /// Checks `f(x, u, ξ) = f(x', u, ξ)` over pairs of sample points.
    pub fn probe_autonomous(&self, xs: &[Vec<f64>], us: &[f64], xis: &[Vec<f64>], tol: f64) -> bool {
        let Some(x0) = xs.first() else { return true };
        us.iter().all(|&u| {
            xis.iter().all(|xi| {
                let a = self.eval_f64(x0, u, xi);
                xs.iter().all(|x| {
                    let b = self.eval_f64(x, u, xi);
                    (a == b) || (a - b).abs() <= tol * a.abs().max(1.0)
                })
            })
        })
    }
}
