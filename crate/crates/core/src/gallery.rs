//! Built-in Lagrangians with known envelopes and behaviours.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{Flags, Lagrangian};
use crate::types::{norm, BoxDomain, Extended, SampledSlice, SliceContext, XiGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    ConditionKHolds,
    ConditionKFails,
    Superlinear,
    BoundedDetachment,
    H1Candidate,
    GapExample,
    Convex,
    NonAutonomous,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("tag serializes");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

type EnvelopeFn = dyn Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct GalleryEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub lagrangian: Lagrangian,
    /// Dimension of ξ the entry is defined for (`None`: any).
    pub xi_dim: Option<usize>,
    analytic_envelope: Option<Arc<EnvelopeFn>>,
    pub tags: Vec<Tag>,
    /// Tabulated slice for entries that only exist as point data.
    pub table: Option<SampledSlice>,
}

impl fmt::Debug for GalleryEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GalleryEntry")
            .field("name", &self.name)
            .field("tags", &self.tags)
            .field("envelope_known", &self.analytic_envelope.is_some())
            .finish()
    }
}

impl GalleryEntry {
    pub fn has_envelope(&self) -> bool {
        self.analytic_envelope.is_some()
    }

    pub fn envelope(&self, x: &[f64], u: f64, xi: &[f64]) -> Option<f64> {
        self.analytic_envelope.as_ref().map(|e| e(x, u, xi))
    }

    pub fn has_tag(&self, tag: Tag) -> bool {
        self.tags.contains(&tag)
    }

    /// One-line summary used by `gallery list`.
    pub fn summary(&self) -> String {
        let tags: Vec<String> = self.tags.iter().map(|t| t.to_string()).collect();
        format!("{:<22} [{}] {}", self.name, tags.join(","), self.description)
    }
}

/// Names accepted by [`builtin`].
pub const NAMES: &[&str] = &[
    "exp_decay",
    "power_state",
    "halfline",
    "spike_cloud",
    "sin_product",
    "shifted_wells",
    "double_well",
    "double_well_state",
    "mania",
    "quadratic",
    "quadratic_state",
    "abs",
    "zero",
    "one",
    "weighted_double_well",
    "jump_double_well",
    "sin_line",
    "cos_line",
    "radial_quartic",
    "cos_quadratic",
    "sin_linear",
];

fn entry(
    name: &'static str,
    description: &'static str,
    flags: Flags,
    xi_dim: Option<usize>,
    tags: Vec<Tag>,
    f: impl Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync + 'static,
    env: Option<Arc<EnvelopeFn>>,
) -> GalleryEntry {
    let flags = Flags { envelope_known: env.is_some(), ..flags };
    GalleryEntry {
        name,
        description,
        lagrangian: Lagrangian::new(name, Vec::new(), flags, f),
        xi_dim,
        analytic_envelope: env,
        tags,
        table: None,
    }
}

fn double_well_env(xi: &[f64]) -> f64 {
    let r2: f64 = xi.iter().map(|v| v * v).sum();
    if r2 <= 1.0 {
        0.0
    } else {
        (r2 - 1.0).powi(2)
    }
}

/// Points `(0,0)` and `(n,1)`, `n = 0..=n_max`, on the lattice
/// `[0, n_max] × [0, 1]` with `ξ₂`-spacing `1/2`; `+∞` elsewhere.
pub fn spike_cloud_slice(n_max: usize) -> Result<SampledSlice> {
    let grid = XiGrid::new(BoxDomain::new(vec![0.0, 0.0], vec![n_max as f64, 1.0])?, vec![n_max + 1, 3])?;
    let values = (0..grid.len())
        .map(|i| {
            let m = grid.multi_index(i);
            match (m[0], m[1]) {
                (0, 0) => Extended::Finite(0.0),
                (n, 2) => Extended::Finite((n * n) as f64 + 1.0),
                _ => Extended::Infinite,
            }
        })
        .collect();
    SampledSlice::new(grid, values, SliceContext::new(vec![0.0], 0.0))
}

/// Looks up a gallery entry by name.
pub fn builtin(name: &str, params: &[f64]) -> Result<GalleryEntry> {
    let auto_free = Flags::new(true, true, true, false);
    let e = match name {
        "exp_decay" => entry(
            "exp_decay",
            "exp(-|xi|); envelope 0, restricted envelope exp(-K) on B_K",
            Flags::new(true, true, false, false),
            None,
            vec![Tag::ConditionKFails],
            |_, _, xi| (-norm(xi)).exp(),
            Some(Arc::new(|_, _, _| 0.0)),
        ),
        "power_state" => entry(
            "power_state",
            "(|xi|+1)^|u|; envelope f for |u|>=1 and 1 for |u|<1",
            Flags::new(true, false, false, false),
            None,
            vec![],
            |_, u, xi| (norm(xi) + 1.0).powf(u.abs()),
            Some(Arc::new(|_, u, xi| if u.abs() >= 1.0 { (norm(xi) + 1.0).powf(u.abs()) } else { 1.0 })),
        ),
        "halfline" => entry(
            "halfline",
            "xi^2 for xi<1, 0 otherwise; envelope xi^2 for xi<=0, 0 otherwise",
            Flags::new(true, true, false, false),
            Some(1),
            vec![],
            |_, _, xi| if xi[0] < 1.0 { xi[0] * xi[0] } else { 0.0 },
            Some(Arc::new(|_, _, xi| if xi[0] <= 0.0 { xi[0] * xi[0] } else { 0.0 })),
        ),
        "spike_cloud" => {
            let n_max = params.first().map_or(40, |p| p.max(1.0) as usize);
            let slice = spike_cloud_slice(n_max)?;
            GalleryEntry {
                name: "spike_cloud",
                description: "f(0,0)=0, f(n,1)=n^2+1, +inf elsewhere (tabulated)",
                lagrangian: Lagrangian::tabulated(slice.clone(), "spike_cloud"),
                xi_dim: Some(2),
                analytic_envelope: None,
                tags: vec![Tag::Superlinear, Tag::ConditionKFails],
                table: Some(slice),
            }
        }
        "sin_product" => entry(
            "sin_product",
            "(1+sin xi1)(1+sin xi2); envelope 0, bounded detachment components",
            auto_free,
            Some(2),
            vec![Tag::BoundedDetachment, Tag::ConditionKHolds],
            |_, _, xi| (1.0 + xi[0].sin()) * (1.0 + xi[1].sin()),
            Some(Arc::new(|_, _, _| 0.0)),
        ),
        "shifted_wells" => entry(
            "shifted_wells",
            "(|xi1|-1)^2 + xi2^2; superlinear, detachment contains the line xi1=0",
            Flags::new(true, true, false, false),
            Some(2),
            vec![Tag::Superlinear, Tag::ConditionKHolds],
            |_, _, xi| (xi[0].abs() - 1.0).powi(2) + xi[1] * xi[1],
            Some(Arc::new(|_, _, xi| {
                let a = xi[0].abs();
                (if a <= 1.0 { 0.0 } else { (a - 1.0).powi(2) }) + xi[1] * xi[1]
            })),
        ),
        "double_well" => entry(
            "double_well",
            "(|xi|^2-1)^2; envelope 0 on the unit ball",
            auto_free,
            None,
            vec![Tag::Superlinear, Tag::BoundedDetachment, Tag::ConditionKHolds],
            |_, _, xi| (xi.iter().map(|v| v * v).sum::<f64>() - 1.0).powi(2),
            Some(Arc::new(|_, _, xi| double_well_env(xi))),
        ),
        "double_well_state" => entry(
            "double_well_state",
            "(|xi|^2-1)^2 + u^2",
            Flags::new(true, false, true, false),
            None,
            vec![Tag::Superlinear, Tag::BoundedDetachment, Tag::ConditionKHolds],
            |_, u, xi| (xi.iter().map(|v| v * v).sum::<f64>() - 1.0).powi(2) + u * u,
            Some(Arc::new(|_, u, xi| double_well_env(xi) + u * u)),
        ),
        "mania" => entry(
            "mania",
            "(u^3-x)^2 xi^6 on (0,1); Lavrentiev gap example",
            Flags::new(false, false, true, false),
            Some(1),
            vec![Tag::GapExample, Tag::NonAutonomous, Tag::Convex],
            |x, u, xi| (u * u * u - x[0]).powi(2) * xi[0].powi(6),
            Some(Arc::new(|x, u, xi| (u * u * u - x[0]).powi(2) * xi[0].powi(6))),
        ),
        "quadratic" => entry(
            "quadratic",
            "|xi|^2",
            auto_free,
            None,
            vec![Tag::Convex, Tag::Superlinear, Tag::ConditionKHolds],
            |_, _, xi| xi.iter().map(|v| v * v).sum(),
            Some(Arc::new(|_, _, xi| xi.iter().map(|v| v * v).sum())),
        ),
        "quadratic_state" => entry(
            "quadratic_state",
            "|xi|^2 + u^2 (convex control for gap scans)",
            Flags::new(true, false, true, false),
            None,
            vec![Tag::Convex, Tag::Superlinear, Tag::ConditionKHolds, Tag::H1Candidate],
            |_, u, xi| xi.iter().map(|v| v * v).sum::<f64>() + u * u,
            Some(Arc::new(|_, u, xi| xi.iter().map(|v| v * v).sum::<f64>() + u * u)),
        ),
        "abs" => entry(
            "abs",
            "|xi|",
            Flags::new(true, true, false, false),
            None,
            vec![Tag::Convex],
            |_, _, xi| norm(xi),
            Some(Arc::new(|_, _, xi| norm(xi))),
        ),
        "zero" => {
            entry("zero", "f = 0", auto_free, None, vec![Tag::Convex], |_, _, _| 0.0, Some(Arc::new(|_, _, _| 0.0)))
        }
        "one" => {
            entry("one", "f = 1", auto_free, None, vec![Tag::Convex], |_, _, _| 1.0, Some(Arc::new(|_, _, _| 1.0)))
        }
        "weighted_double_well" => entry(
            "weighted_double_well",
            "(1+x1)(xi^2-1)^2 on (0,1)",
            Flags::new(false, true, true, false),
            Some(1),
            vec![Tag::NonAutonomous, Tag::H1Candidate, Tag::BoundedDetachment],
            |x, _, xi| (1.0 + x[0]) * (xi[0] * xi[0] - 1.0).powi(2),
            Some(Arc::new(|x, _, xi| (1.0 + x[0]) * double_well_env(xi))),
        ),
        "jump_double_well" => entry(
            "jump_double_well",
            "(xi^2-1)^2 + x1*1{xi>0} on (0,1)",
            Flags::new(false, true, false, false),
            Some(1),
            vec![Tag::NonAutonomous],
            |x, _, xi| (xi[0] * xi[0] - 1.0).powi(2) + if xi[0] > 0.0 { x[0] } else { 0.0 },
            None,
        ),
        "sin_line" => entry(
            "sin_line",
            "1 + sin(xi)",
            auto_free,
            Some(1),
            vec![Tag::BoundedDetachment],
            |_, _, xi| 1.0 + xi[0].sin(),
            Some(Arc::new(|_, _, _| 0.0)),
        ),
        "cos_line" => entry(
            "cos_line",
            "1 + cos(xi)",
            auto_free,
            Some(1),
            vec![Tag::BoundedDetachment],
            |_, _, xi| 1.0 + xi[0].cos(),
            Some(Arc::new(|_, _, _| 0.0)),
        ),
        "radial_quartic" => entry(
            "radial_quartic",
            "|xi|^4",
            auto_free,
            None,
            vec![Tag::Convex, Tag::Superlinear],
            |_, _, xi| xi.iter().map(|v| v * v).sum::<f64>().powi(2),
            Some(Arc::new(|_, _, xi| xi.iter().map(|v| v * v).sum::<f64>().powi(2))),
        ),
        "cos_quadratic" => entry(
            "cos_quadratic",
            "1 + cos(xi1) + |xi|^2 (uniformly convex)",
            auto_free,
            None,
            vec![Tag::Convex, Tag::Superlinear],
            |_, _, xi| 1.0 + xi[0].cos() + xi.iter().map(|v| v * v).sum::<f64>(),
            Some(Arc::new(|_, _, xi| 1.0 + xi[0].cos() + xi.iter().map(|v| v * v).sum::<f64>())),
        ),
        "sin_linear" => entry(
            "sin_linear",
            "sin(xi) + 2|xi|; curvature defect does not decay",
            Flags::new(true, true, false, false),
            Some(1),
            vec![],
            |_, _, xi| xi[0].sin() + 2.0 * xi[0].abs(),
            None,
        ),
        _ => {
            return Err(Error::UnknownEntry { name: name.to_string(), known: NAMES.join(", ") });
        }
    };
    Ok(e)
}

/// Every gallery entry with default parameters.
pub fn list() -> Vec<GalleryEntry> {
    NAMES.iter().map(|n| builtin(n, &[]).expect("known name")).collect()
}

/// Lagrangian of a named entry.
pub fn lagrangian(name: &str) -> Result<Lagrangian> {
    builtin(name, &[]).map(|e| e.lagrangian)
}

/// Box `[-4π, 4π]²` used by the sin-product checks.
pub fn sin_product_box() -> Result<BoxDomain> {
    BoxDomain::centered(2, 4.0 * PI)
}
