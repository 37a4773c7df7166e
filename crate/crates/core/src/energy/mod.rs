//! Discrete energies `∫ f(x, u, ∇u)` on piecewise-linear fields, and the
//! gradient-constrained minimization scans used to look for Lavrentiev gaps.

mod lavrentiev;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::convexify::{envelope_at, ConvexDecomposition};
use crate::error::{Error, Result};
use crate::lagrangian::Lagrangian;
use crate::types::{Extended, PLField, SampledSlice, XiGrid};

pub use lavrentiev::{lavrentiev_scan, GapReport, RunRecord, ScanConfig, ScanPoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    Midpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeMode {
    /// The integrand is `f` itself.
    Raw,
    /// The integrand is `f**(x, u, ·)`, recomputed per cell.
    Pointwise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub per_cell: Vec<f64>,
    pub quadrature: Quadrature,
    pub envelope_mode: EnvelopeMode,
    /// Per-cell decompositions of `∇u|cell`; empty for raw energies.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub certificates: Vec<ConvexDecomposition>,
}

/// Box `[-radius, radius]^N` sampled with `count` nodes per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiPolicy {
    pub radius: f64,
    pub count: usize,
}

impl XiPolicy {
    pub fn new(radius: f64, count: usize) -> Self {
        Self { radius, count }
    }

    pub fn grid(&self, dim: usize) -> Result<XiGrid> {
        XiGrid::centered(dim, self.radius, self.count)
    }
}

struct CellData {
    x: Vec<f64>,
    u: f64,
    grad: Vec<f64>,
    measure: f64,
}

fn cell_data(u: &PLField) -> Result<Vec<CellData>> {
    let mesh = u.mesh();
    (0..mesh.num_cells())
        .map(|c| {
            Ok(CellData {
                x: mesh.barycenter(c),
                u: u.barycenter_value(c),
                grad: u.gradient(c)?,
                measure: mesh.cell_measure(c),
            })
        })
        .collect()
}

fn total_of(per_cell: &[f64]) -> f64 {
    per_cell.iter().sum()
}

fn eval_cell(f: &Lagrangian, cell: usize, d: &CellData) -> Result<f64> {
    match f.eval(&d.x, d.u, &d.grad) {
        Ok(Extended::Finite(v)) => Ok(d.measure * v),
        Ok(Extended::Infinite) => Err(Error::InfiniteOnCell { cell }),
        Err(reason) => Err(Error::Evaluation { node: vec![cell], reason }),
    }
}

/// `E[f](u)` with the midpoint rule on every cell.
///
/// The gradient is constant per cell, so the rule is exact whenever
/// `x ↦ f(x, u(x), ∇u)` is affine on each cell.
pub fn energy(f: &Lagrangian, u: &PLField) -> Result<EnergyBreakdown> {
    let cells = cell_data(u)?;
    let per_cell = crate::par::try_map_range(cells.len(), |c| eval_cell(f, c, &cells[c]))?;
    Ok(EnergyBreakdown {
        total: total_of(&per_cell),
        per_cell,
        quadrature: Quadrature::Midpoint,
        envelope_mode: EnvelopeMode::Raw,
        certificates: Vec::new(),
    })
}

// Cells sharing a key share a slice: autonomous integrands ignore x, state-free
// ones ignore u.
fn slice_key(f: &Lagrangian, d: &CellData) -> Vec<u64> {
    let flags = f.flags();
    let mut key = Vec::new();
    if !flags.autonomous {
        key.extend(d.x.iter().map(|v| v.to_bits()));
    }
    if !flags.state_free {
        key.push(d.u.to_bits());
    }
    key
}

/// `E[f**](u)`: per cell, the envelope of the slice `f(x_c, u(x_c), ·)` on the
/// policy box (plus the cell gradient itself as a sample), evaluated at the
/// cell gradient.
///
/// The returned breakdown carries the per-cell decompositions of the
/// gradients, which the laminate constructions consume.
pub fn relaxed_energy(f: &Lagrangian, u: &PLField, policy: &XiPolicy) -> Result<EnergyBreakdown> {
    let cells = cell_data(u)?;
    let grid = policy.grid(u.mesh().dim())?;
    for (c, d) in cells.iter().enumerate() {
        if !grid.bbox().contains(&d.grad) {
            return Err(Error::GradientOutsideBox { cell: c, gradient: d.grad.clone() });
        }
    }

    let mut slot_of_key: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    let mut representative = Vec::new();
    let slot: Vec<usize> = cells
        .iter()
        .enumerate()
        .map(|(c, d)| {
            *slot_of_key.entry(slice_key(f, d)).or_insert_with(|| {
                representative.push(c);
                representative.len() - 1
            })
        })
        .collect();
    let slices: Vec<SampledSlice> = crate::par::try_map_range(representative.len(), |s| {
        let d = &cells[representative[s]];
        SampledSlice::sample(f, &grid, &d.x, d.u)
    })?;

    // The cell gradient is added to the sample set: the envelope of the
    // augmented slice at that point is min(hull value, f(∇u)).
    let results = crate::par::try_map_range(cells.len(), |c| {
        let d = &cells[c];
        let own = match f.eval(&d.x, d.u, &d.grad) {
            Ok(v) => v.finite(),
            Err(reason) => return Err(Error::Evaluation { node: vec![c], reason }),
        };
        let hull = match envelope_at(&slices[slot[c]], &d.grad) {
            Ok(r) => Some(r),
            Err(Error::OutsideFiniteRegion { .. }) => None,
            Err(e) => return Err(e),
        };
        match (hull, own) {
            (Some((v, cert)), Some(o)) if v <= o => Ok((d.measure * v, cert)),
            (Some((v, cert)), None) => Ok((d.measure * v, cert)),
            (_, Some(o)) => Ok((
                d.measure * o,
                ConvexDecomposition { weights: vec![1.0], points: vec![d.grad.clone()], nodes: Vec::new(), value: o },
            )),
            (None, None) => Err(Error::InfiniteOnCell { cell: c }),
        }
    })?;
    let (per_cell, certificates): (Vec<f64>, Vec<ConvexDecomposition>) = results.into_iter().unzip();
    Ok(EnergyBreakdown {
        total: total_of(&per_cell),
        per_cell,
        quadrature: Quadrature::Midpoint,
        envelope_mode: EnvelopeMode::Pointwise,
        certificates,
    })
}
