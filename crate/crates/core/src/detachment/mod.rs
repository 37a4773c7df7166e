//! Detachment sets `{f** < f}`, condition (K) decisions and the convexifying
//! corrections used by the strong-recovery results.

mod condition;
mod curvature;
mod phi;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::convexify::EnvelopeResult;
use crate::error::{Error, Result};
use crate::types::{dist, norm, Extended, SampledSlice};

pub use condition::{
    check_condition_k, superlinearity_certificate, validate_k_prime, ConditionKSearch, ConditionKVerdict, Holds, Probe,
    Route, SuperlinearityCertificate, Validation,
};
pub use curvature::{
    convexifying_correction, hessian_eigenvalues, hessian_min_eig, theta_profile, Correction, CorrectionOptions, Gamma,
    ThetaProfile,
};
pub use phi::{construct_phi, Phi};

/// One face-connected component of the detachment mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    /// Sorted multi-indices of the member nodes.
    pub nodes: Vec<Vec<usize>>,
    pub diameter: f64,
    pub touches_boundary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetachmentReport {
    pub mask: Vec<bool>,
    pub components: Vec<Component>,
    pub max_diameter: f64,
    /// Some component reaches the grid boundary, so its true extent (and
    /// `max_diameter`) is only a lower bound.
    pub boundary_limited: bool,
    pub tol: f64,
}

impl DetachmentReport {
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn detached_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

fn same_grid(slice: &SampledSlice, env: &EnvelopeResult) -> Result<()> {
    if slice.grid() != env.grid() {
        return Err(Error::GridMismatch("slice and envelope live on different grids".into()));
    }
    Ok(())
}

fn gap(v: Extended, e: Extended) -> Option<f64> {
    match (v, e) {
        (Extended::Finite(a), Extended::Finite(b)) => Some(a - b),
        (Extended::Infinite, Extended::Finite(_)) => Some(f64::INFINITY),
        _ => None,
    }
}

/// Nodes where `f − f** > tol`, grouped into face-connected components.
pub fn detachment_set(slice: &SampledSlice, env: &EnvelopeResult, tol: f64) -> Result<DetachmentReport> {
    same_grid(slice, env)?;
    let grid = slice.grid();
    let mask: Vec<bool> = (0..grid.len()).map(|i| gap(slice.value(i), env.value(i)).is_some_and(|g| g > tol)).collect();

    let mut seen = vec![false; grid.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for start in 0..grid.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            members.push(i);
            for j in grid.neighbors(i) {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }

    let components = crate::par::map_slice(&groups, |members| {
        let pts: Vec<Vec<f64>> = members.iter().map(|&i| grid.node(i)).collect();
        let mut diameter = 0.0f64;
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                diameter = diameter.max(dist(&pts[a], &pts[b]));
            }
        }
        Component {
            nodes: members.iter().map(|&i| grid.multi_index(i)).collect(),
            diameter,
            touches_boundary: members.iter().any(|&i| grid.on_boundary(i)),
        }
    });
    let max_diameter = components.iter().map(|c| c.diameter).fold(0.0, f64::max);
    let boundary_limited = components.iter().any(|c| c.touches_boundary);
    Ok(DetachmentReport { mask, components, max_diameter, boundary_limited, tol })
}

/// Nodes whose norm lies within half a grid spacing of `radius`.
pub fn annulus_nodes(slice: &SampledSlice, radius: f64) -> Vec<usize> {
    let grid = slice.grid();
    let half = 0.5 * grid.max_spacing() * (1.0 + 1e-9);
    (0..grid.len()).filter(|&i| (norm(&grid.node(i)) - radius).abs() <= half).collect()
}

/// Whether `|f − f**| ≤ tol` on every node of the discrete annulus around `∂B_K`.
pub fn check_boundary_equality(slice: &SampledSlice, env: &EnvelopeResult, radius: f64, tol: f64) -> Result<bool> {
    same_grid(slice, env)?;
    let ring = annulus_nodes(slice, radius);
    if ring.is_empty() {
        return Err(Error::InvalidArgument(format!("no grid node within half a spacing of |xi| = {radius}")));
    }
    Ok(ring.iter().all(|&i| match (slice.value(i), env.value(i)) {
        (Extended::Finite(a), Extended::Finite(b)) => (a - b).abs() <= tol,
        (Extended::Infinite, Extended::Infinite) => true,
        _ => false,
    }))
}
