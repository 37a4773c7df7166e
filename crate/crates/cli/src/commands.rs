//! Subcommand bodies. Each returns the printed report, the files to write and
//! a pass/fail verdict for `--assert`.

use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use relaxkit::convexify::{default_tol, envelope, restricted_bipolar, TOL_1D};
use relaxkit::detachment::{check_condition_k, detachment_set, ConditionKSearch, Holds, Route};
use relaxkit::energy::{energy, lavrentiev_scan, relaxed_energy, ScanConfig, XiPolicy};
use relaxkit::gallery::{self, GalleryEntry};
use relaxkit::io::{
    certificates_to_json, envelope_to_csv, field_on_mesh_from_csv, field_to_csv, slice_from_csv, to_json,
};
use relaxkit::laminate::{relaxation_sequence, strong_recovery_sequence, SequenceOptions, SequenceReport};
use relaxkit::nonauto::{check_h1, check_h2, verify_lemma32, H2Status};
use relaxkit::{BoxDomain, Error, Mesh, PLField, Result, SampledSlice, XiGrid};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub struct Outcome {
    pub report: String,
    pub files: Vec<(String, Vec<u8>)>,
    pub verdict: bool,
    pub verdict_name: &'static str,
}

impl Outcome {
    fn new(report: String, verdict_name: &'static str, verdict: bool) -> Self {
        Self { report, files: Vec::new(), verdict, verdict_name }
    }

    fn file(mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        self.files.push((name.into(), bytes.into()));
        self
    }

    /// Writes the report itself under `name` too.
    fn with_report(self, name: &str) -> Self {
        let mut text = self.report.clone();
        text.push('\n');
        self.file(name, text)
    }
}

fn entry(name: &str, params: &[f64]) -> Result<GalleryEntry> {
    gallery::builtin(name, params)
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct SliceArgs {
    /// Gallery entry to sample.
    #[arg(long, conflicts_with = "input")]
    pub gallery: Option<String>,
    /// Gallery parameters.
    #[arg(long, value_delimiter = ',')]
    pub param: Vec<f64>,
    /// Grid CSV slice file instead of a gallery entry.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Spatial point of the slice.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub x: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub u: f64,
    /// Dimension of ξ.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Half-width of the ξ box.
    #[arg(long, default_value_t = 4.0)]
    pub radius: f64,
    /// Nodes per axis.
    #[arg(long, default_value_t = 161)]
    pub nodes: usize,
    /// Restrict to the ball of this radius before convexifying.
    #[arg(long)]
    pub restrict: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
}

fn load_slice(a: &SliceArgs) -> Result<SampledSlice> {
    if let Some(path) = &a.input {
        return slice_from_csv(&std::fs::read_to_string(path)?);
    }
    let name = a.gallery.as_deref().ok_or_else(|| Error::InvalidArgument("need --gallery or --input".into()))?;
    let e = entry(name, &a.param)?;
    if let Some(table) = e.table {
        return Ok(table);
    }
    let grid = XiGrid::centered(a.dim, a.radius, a.nodes)?;
    SampledSlice::sample(&e.lagrangian, &grid, &a.x, a.u)
}

pub fn envelope_cmd(a: &SliceArgs) -> Result<Outcome> {
    let slice = load_slice(a)?;
    let env = match a.restrict {
        Some(k) => restricted_bipolar(&slice, k)?,
        None => envelope(&slice)?,
    };
    let finite = env.values().iter().filter(|v| v.is_finite()).count();
    let min = env.values().iter().filter_map(|v| v.finite()).fold(f64::INFINITY, f64::min);
    let report = json!({
        "method": env.method(),
        "nodes": env.values().len(),
        "finite_nodes": finite,
        "min": min,
        "restrict": a.restrict,
    });
    Ok(Outcome::new(to_json(&report)?, "envelope", true)
        .file("envelope.csv", envelope_to_csv(&env))
        .file("certificates.json", certificates_to_json(&env)?))
}

pub fn detach(a: &SliceArgs) -> Result<Outcome> {
    let slice = load_slice(a)?;
    let env = envelope(&slice)?;
    let rep = detachment_set(&slice, &env, a.tol.unwrap_or(default_tol(slice.grid().dim())))?;
    let verdict = !rep.boundary_limited;
    Ok(Outcome::new(to_json(&rep)?, "detachment components bounded inside the box", verdict)
        .with_report("detachment.json"))
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct CondkArgs {
    #[arg(long)]
    pub gallery: String,
    #[arg(long, value_delimiter = ',')]
    pub param: Vec<f64>,
    #[arg(long = "K")]
    pub k: f64,
    /// Search radius; defaults to max(20, 4K).
    #[arg(long = "k-max")]
    pub k_max: Option<f64>,
    #[arg(long, default_value = "components")]
    pub route: String,
    /// Dimension of ξ; defaults to the entry's own.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long = "u-min", default_value_t = -1.0)]
    pub u_min: f64,
    #[arg(long = "u-max", default_value_t = 1.0)]
    pub u_max: f64,
    #[arg(long, value_delimiter = ',')]
    pub x: Vec<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
}

pub fn condk(a: &CondkArgs) -> Result<Outcome> {
    let e = entry(&a.gallery, &a.param)?;
    let dim = a.dim.or(e.xi_dim).unwrap_or(1);
    let route: Route = a.route.parse()?;
    let mut search = ConditionKSearch::new(route, dim, a.k_max.unwrap_or((4.0 * a.k).max(20.0)));
    if let Some(h) = a.spacing {
        search.spacing = h;
    }
    if let Some(t) = a.tol {
        search.tol = t;
    }
    if !a.x.is_empty() {
        search.x_probes = vec![a.x.clone()];
    }
    let v = check_condition_k(&e.lagrangian, (a.u_min, a.u_max), a.k, &search)?;
    let verdict = v.holds == Holds::Yes;
    Ok(Outcome::new(to_json(&v)?, "condition (K) holds", verdict).with_report("condk.json"))
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct FieldArgs {
    #[arg(long)]
    pub gallery: String,
    #[arg(long, value_delimiter = ',')]
    pub param: Vec<f64>,
    /// Field: zero, linear, quadratic, sine, a constant, or a field CSV path.
    #[arg(long, default_value = "zero")]
    pub u: String,
    /// Spatial dimension of the unit-box domain.
    #[arg(long = "x-dim", default_value_t = 1)]
    pub x_dim: usize,
    /// Cells per axis.
    #[arg(long, default_value_t = 4)]
    pub cells: usize,
    #[arg(long = "xi-radius", default_value_t = 2.0)]
    pub xi_radius: f64,
    #[arg(long = "xi-count", default_value_t = 81)]
    pub xi_count: usize,
}

impl FieldArgs {
    fn mesh(&self) -> Result<Arc<Mesh>> {
        match self.x_dim {
            1 => Ok(Arc::new(Mesh::interval(0.0, 1.0, self.cells)?)),
            2 => {
                Ok(Arc::new(Mesh::rectangle(&BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0])?, self.cells, self.cells)?))
            }
            d => Err(Error::InvalidArgument(format!("x-dim must be 1 or 2, got {d}"))),
        }
    }

    fn field(&self) -> Result<PLField> {
        let mesh = self.mesh()?;
        let g: Box<dyn Fn(&[f64]) -> f64> = match self.u.as_str() {
            "zero" => Box::new(|_| 0.0),
            "linear" => Box::new(|p| p[0]),
            "quadratic" => Box::new(|p| p[0] * p[0]),
            "sine" => Box::new(|p| (std::f64::consts::PI * p[0]).sin()),
            s => match s.parse::<f64>() {
                Ok(c) => Box::new(move |_| c),
                Err(_) => return field_on_mesh_from_csv(&std::fs::read_to_string(s)?, mesh),
            },
        };
        PLField::interpolate(mesh, g)
    }

    fn policy(&self) -> XiPolicy {
        XiPolicy::new(self.xi_radius, self.xi_count)
    }
}

pub fn relax(a: &FieldArgs) -> Result<Outcome> {
    let f = entry(&a.gallery, &a.param)?.lagrangian;
    let u = a.field()?;
    let raw = energy(&f, &u)?;
    let relaxed = relaxed_energy(&f, &u, &a.policy())?;
    let verdict = relaxed.total <= raw.total + TOL_1D * (1.0 + raw.total.abs());
    let report = json!({ "raw": raw.total, "relaxed": relaxed.total });
    Ok(Outcome::new(to_json(&report)?, "relaxed energy below raw energy", verdict)
        .file("raw.json", to_json(&raw)? + "\n")
        .file("relaxed.json", to_json(&relaxed)? + "\n"))
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SequenceArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    /// Laminate indices.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    pub n: Vec<usize>,
    #[arg(long = "cutoff-delta", default_value_t = 0.05)]
    pub cutoff_delta: f64,
    #[arg(long = "energy-tol", default_value_t = 1e-6)]
    pub energy_tol: f64,
}

fn sequence_outcome(fields: &[PLField], rep: &SequenceReport, name: &'static str, verdict: bool) -> Result<Outcome> {
    let mut out = Outcome::new(to_json(rep)?, name, verdict).with_report("report.json");
    for (field, row) in fields.iter().zip(&rep.rows) {
        out = out.file(format!("fields/u_n{}.csv", row.n), field_to_csv(field));
    }
    Ok(out)
}

pub fn sequence(a: &SequenceArgs) -> Result<Outcome> {
    let f = entry(&a.field.gallery, &a.field.param)?.lagrangian;
    let u = a.field.field()?;
    let opts = SequenceOptions { cutoff_delta: a.cutoff_delta, energy_tol: a.energy_tol, ..SequenceOptions::default() };
    let (fields, rep) = relaxation_sequence(&f, &u, &a.n, &a.field.policy(), &opts)?;
    let verdict = rep.weak_star_ok && rep.energy_converged;
    sequence_outcome(&fields, &rep, "weak-* convergence with relaxed energy", verdict)
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct RecoverArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    pub n: Vec<usize>,
    /// Sobolev exponent of the strong convergence.
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long = "energy-tol", default_value_t = 1e-6)]
    pub energy_tol: f64,
}

pub fn recover(a: &RecoverArgs) -> Result<Outcome> {
    let f = entry(&a.field.gallery, &a.field.param)?.lagrangian;
    let u = a.field.field()?;
    let opts = SequenceOptions { energy_tol: a.energy_tol, p_values: vec![a.p], ..SequenceOptions::default() };
    let (fields, rep) = strong_recovery_sequence(&f, &u, a.p, &a.n, &a.field.policy(), &opts)?;
    let verdict = rep.strong_ok && rep.energy_converged;
    sequence_outcome(&fields, &rep, "strong convergence with energy", verdict)
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct GapArgs {
    #[arg(long, default_value = "mania")]
    pub gallery: String,
    #[arg(long, value_delimiter = ',')]
    pub param: Vec<f64>,
    /// Cell counts of the meshes of (0, 1).
    #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
    pub cells: Vec<usize>,
    /// Mesh grading exponent (1 = uniform).
    #[arg(long, default_value_t = 3.0)]
    pub grading: f64,
    /// Boundary value at 0.
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    /// Boundary value at 1.
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    /// Gradient bounds L.
    #[arg(long = "l-ladder", value_delimiter = ',', default_value = "2,5,10")]
    pub l_ladder: Vec<f64>,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long = "max-iters", default_value_t = 20000)]
    pub max_iters: usize,
}

pub fn gap(a: &GapArgs) -> Result<Outcome> {
    let f = entry(&a.gallery, &a.param)?.lagrangian;
    let phi = PLField::new(Arc::new(Mesh::interval(0.0, 1.0, 1)?), vec![a.a, a.b])?;
    let meshes = a
        .cells
        .iter()
        .map(|&n| {
            if a.grading == 1.0 { Mesh::interval(0.0, 1.0, n) } else { Mesh::graded_interval(0.0, 1.0, n, a.grading) }
                .map(Arc::new)
        })
        .collect::<Result<Vec<_>>>()?;
    let cfg = ScanConfig {
        l_ladder: a.l_ladder.clone(),
        starts: a.starts,
        seed: a.seed,
        max_iters: a.max_iters,
        ..ScanConfig::default()
    };
    let rep = lavrentiev_scan(&f, &phi, &meshes, &cfg)?;
    let verdict = rep.monotone_in_l && rep.points.iter().all(|p| p.all_converged());
    Ok(Outcome::new(to_json(&rep)?, "scan converged and monotone in L", verdict)
        .with_report("gap.json")
        .file("gap.csv", rep.to_csv()))
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct NonautoArgs {
    #[arg(long)]
    pub gallery: String,
    #[arg(long, value_delimiter = ',')]
    pub param: Vec<f64>,
    /// Cells of the x-mesh of (0, 1).
    #[arg(long, default_value_t = 20)]
    pub cells: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.4,0.2,0.1")]
    pub eps: Vec<f64>,
    /// State probes.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub u: Vec<f64>,
    #[arg(long = "xi-radius", default_value_t = 2.0)]
    pub xi_radius: f64,
    #[arg(long = "xi-count", default_value_t = 81)]
    pub xi_count: usize,
}

impl NonautoArgs {
    fn setup(&self) -> Result<(relaxkit::Lagrangian, Mesh, XiGrid)> {
        Ok((
            entry(&self.gallery, &self.param)?.lagrangian,
            Mesh::interval(0.0, 1.0, self.cells)?,
            XiGrid::centered(1, self.xi_radius, self.xi_count)?,
        ))
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct H1Args {
    #[command(flatten)]
    pub common: NonautoArgs,
    /// State bound L₁; defaults to the largest probe.
    #[arg(long)]
    pub l1: Option<f64>,
    /// Guard level L₂.
    #[arg(long, default_value_t = 10.0)]
    pub l2: f64,
    /// Ratio above which a guarded probe is a violation.
    #[arg(long, default_value_t = 10.0)]
    pub threshold: f64,
}

pub fn h1check(a: &H1Args) -> Result<Outcome> {
    let c = &a.common;
    let (f, mesh, grid) = c.setup()?;
    let l1 = a.l1.unwrap_or_else(|| c.u.iter().map(|u| u.abs()).fold(0.0, f64::max));
    let rep = check_h1(&f, (l1, a.l2), &c.eps, &mesh, &c.u, &grid, a.threshold)?;
    let summary = json!({
        "c_estimate": rep.c_estimate,
        "c_estimate_relaxed": rep.c_estimate_relaxed,
        "threshold": rep.threshold,
        "guarded_probes": rep.guarded_probes,
        "violations": rep.violations.len(),
        "shadow_ok": rep.shadow_ok,
    });
    let verdict = rep.violations.is_empty() && rep.guarded_probes > 0;
    Ok(Outcome::new(to_json(&summary)?, "H1 ratio bounded", verdict)
        .file("h1.json", to_json(&rep)? + "\n")
        .file("h1.csv", rep.to_csv()))
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct H2Args {
    #[arg(long)]
    pub gallery: String,
    #[arg(long, value_delimiter = ',')]
    pub param: Vec<f64>,
    /// Spatial dimension N of the unit-box domain.
    #[arg(long = "x-dim", default_value_t = 2)]
    pub x_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Integrability exponent θ (`inf` allowed).
    #[arg(long, default_value_t = f64::INFINITY)]
    pub theta: f64,
    /// Constant coefficient a(x).
    #[arg(long = "a", default_value_t = 1.0)]
    pub a_coef: f64,
    /// Sample points per axis.
    #[arg(long, default_value_t = 3)]
    pub samples: usize,
    #[arg(long, value_delimiter = ',', default_value = "2,5,10")]
    pub u: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub u0: f64,
}

pub fn h2check(a: &H2Args) -> Result<Outcome> {
    let f = entry(&a.gallery, &a.param)?.lagrangian;
    if a.x_dim == 0 || a.samples == 0 {
        return Err(Error::InvalidArgument("x-dim and samples must be positive".into()));
    }
    let axis: Vec<f64> = (0..a.samples).map(|i| (i as f64 + 0.5) / a.samples as f64).collect();
    let mut points: Vec<Vec<f64>> = vec![vec![]];
    for _ in 0..a.x_dim {
        points = points.into_iter().flat_map(|p| axis.iter().map(move |&c| [p.clone(), vec![c]].concat())).collect();
    }
    let samples: Vec<(Vec<f64>, f64)> = points.into_iter().map(|p| (p, a.a_coef)).collect();
    let rep = check_h2(&f, a.x_dim, a.p, a.theta, &samples, &a.u, a.u0)?;
    let verdict = rep.status != H2Status::Fails;
    Ok(Outcome::new(to_json(&rep)?, "H2 growth bound", verdict).with_report("h2.json"))
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct Lemma32Args {
    #[command(flatten)]
    pub common: NonautoArgs,
    #[arg(long, default_value_t = 2.0 * TOL_1D)]
    pub tol: f64,
}

pub fn lemma32(a: &Lemma32Args) -> Result<Outcome> {
    let c = &a.common;
    let (f, mesh, grid) = c.setup()?;
    let reports =
        c.eps.iter().map(|&e| verify_lemma32(&f, e, &mesh, &c.u, &grid, a.tol)).collect::<Result<Vec<_>>>()?;
    let verdict = reports.iter().all(|r| r.passed && r.chain_ok);
    Ok(Outcome::new(to_json(&reports)?, "two routes agree", verdict).with_report("lemma32.json"))
}

pub fn gallery_list() -> Result<Outcome> {
    let lines: Vec<String> = gallery::list().iter().map(|e| e.summary()).collect();
    Ok(Outcome::new(lines.join("\n"), "gallery", true))
}
