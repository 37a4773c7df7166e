//! Grids, slices, meshes and piecewise-linear fields.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lagrangian::Lagrangian;

/// A nonnegative value or the `+inf` sentinel.
///
/// `+inf` is never stored as an IEEE infinity; comparisons and serialization go
/// through this enum so they stay deterministic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    /// Converts a raw float, mapping `+inf` to the sentinel. NaN and `-inf`
    /// are rejected.
    pub fn from_f64(v: f64) -> Option<Self> {
        if v.is_nan() || v == f64::NEG_INFINITY {
            None
        } else if v == f64::INFINITY {
            Some(Extended::Infinite)
        } else {
            Some(Extended::Finite(v))
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn is_infinite(self) -> bool {
        !self.is_finite()
    }

    /// Finite value or `f64::INFINITY`, for arithmetic that tolerates it.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn add(self, other: Extended) -> Extended {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a + b),
            _ => Extended::Infinite,
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v:.16e}"),
            Extended::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => s.serialize_f64(*v),
            Extended::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct ExtVisitor;
        impl Visitor<'_> for ExtVisitor {
            type Value = Extended;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or the string \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Extended, E> {
                Ok(Extended::Finite(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Extended, E> {
                Ok(Extended::Finite(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Extended, E> {
                Ok(Extended::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Extended, E> {
                if v == "inf" {
                    Ok(Extended::Infinite)
                } else {
                    Err(E::custom(format!("unexpected token `{v}`")))
                }
            }
        }
        d.deserialize_any(ExtVisitor)
    }
}

/// Axis-aligned closed box `[lo, hi]` in ℝᴺ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::InvalidBox("dimension must be at least 1".into()));
        }
        if lo.len() != hi.len() {
            return Err(Error::InvalidBox(format!("lo has {} coordinates, hi has {}", lo.len(), hi.len())));
        }
        for (i, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !a.is_finite() || !b.is_finite() || a >= b {
                return Err(Error::InvalidBox(format!("axis {i}: need lo < hi, got [{a}, {b}]")));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The cube `[-r, r]ᴺ`.
    pub fn centered(dim: usize, r: f64) -> Result<Self> {
        Self::new(vec![-r; dim], vec![r; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| *a <= *x && *x <= *b)
    }

    /// Radius of the largest centered ball inside the box (0 if the origin is outside).
    pub fn inner_radius(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| if *a <= 0.0 && *b >= 0.0 { (-a).min(*b) } else { 0.0 })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn measure(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }
}

/// Regular lattice over a closed box; axis 0 varies fastest in linear order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiGrid {
    bbox: BoxDomain,
    counts: Vec<usize>,
}

impl XiGrid {
    pub fn new(bbox: BoxDomain, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != bbox.dim() {
            return Err(Error::InvalidGrid(format!("{} counts for a {}-dimensional box", counts.len(), bbox.dim())));
        }
        if let Some(c) = counts.iter().find(|&&c| c < 2) {
            return Err(Error::InvalidGrid(format!("every axis needs at least 2 nodes, got {c}")));
        }
        Ok(Self { bbox, counts })
    }

    /// Cube `[-r, r]ᴺ` with the given per-axis count.
    pub fn centered(dim: usize, r: f64, count: usize) -> Result<Self> {
        Self::new(BoxDomain::centered(dim, r)?, vec![count; dim])
    }

    /// Cube `[-r, r]ᴺ` with spacing at most `h`.
    pub fn centered_with_spacing(dim: usize, r: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        let count = ((2.0 * r / h) - 1e-9).ceil() as usize + 1;
        Self::centered(dim, r, count.max(2))
    }

    pub fn bbox(&self) -> &BoxDomain {
        &self.bbox
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> Vec<f64> {
        (0..self.dim()).map(|a| (self.bbox.hi[a] - self.bbox.lo[a]) / (self.counts[a] - 1) as f64).collect()
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing().into_iter().fold(0.0, f64::max)
    }

    /// Coordinate of lattice index `i` along `axis`; endpoints are exact.
    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        let (lo, hi, c) = (self.bbox.lo[axis], self.bbox.hi[axis], self.counts[axis]);
        if i == 0 {
            lo
        } else if i + 1 == c {
            hi
        } else {
            lo + (hi - lo) * (i as f64) / ((c - 1) as f64)
        }
    }

    pub fn multi_index(&self, mut linear: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.dim());
        for &c in &self.counts {
            out.push(linear % c);
            linear /= c;
        }
        out
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for a in (0..self.dim()).rev() {
            idx = idx * self.counts[a] + multi[a];
        }
        idx
    }

    pub fn node_multi(&self, multi: &[usize]) -> Vec<f64> {
        multi.iter().enumerate().map(|(a, &i)| self.axis_coord(a, i)).collect()
    }

    pub fn node(&self, linear: usize) -> Vec<f64> {
        self.node_multi(&self.multi_index(linear))
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Face neighbours (2N-connectivity) in increasing linear order.
    pub fn neighbors(&self, linear: usize) -> Vec<usize> {
        let m = self.multi_index(linear);
        let mut out = Vec::with_capacity(2 * self.dim());
        let mut stride = 1;
        for a in 0..self.dim() {
            if m[a] > 0 {
                out.push(linear - stride);
            }
            if m[a] + 1 < self.counts[a] {
                out.push(linear + stride);
            }
            stride *= self.counts[a];
        }
        out.sort_unstable();
        out
    }

    pub fn on_boundary(&self, linear: usize) -> bool {
        self.multi_index(linear).iter().zip(&self.counts).any(|(&i, &c)| i == 0 || i + 1 == c)
    }

    /// Linear index of the node nearest to `p` (clamped to the box).
    pub fn nearest(&self, p: &[f64]) -> usize {
        let multi: Vec<usize> = (0..self.dim())
            .map(|a| {
                let h = (self.bbox.hi[a] - self.bbox.lo[a]) / (self.counts[a] - 1) as f64;
                let t = ((p[a] - self.bbox.lo[a]) / h).round();
                t.clamp(0.0, (self.counts[a] - 1) as f64) as usize
            })
            .collect();
        self.linear_index(&multi)
    }
}

/// Fixed `(x, u)` at which a slice was sampled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceContext {
    pub x: Vec<f64>,
    pub u: f64,
}

impl SliceContext {
    pub fn new(x: Vec<f64>, u: f64) -> Self {
        Self { x, u }
    }
}

/// Values of `f(x, u, ·)` on every node of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledSlice {
    grid: XiGrid,
    values: Vec<Extended>,
    context: SliceContext,
}

impl SampledSlice {
    pub fn new(grid: XiGrid, values: Vec<Extended>, context: SliceContext) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!("{} values for a grid of {} nodes", values.len(), grid.len())));
        }
        for (i, v) in values.iter().enumerate() {
            if let Extended::Finite(x) = v {
                if !(x.is_finite() && *x >= 0.0) {
                    return Err(Error::Evaluation {
                        node: grid.multi_index(i),
                        reason: format!("value {x} is not a nonnegative real"),
                    });
                }
            }
        }
        Ok(Self { grid, values, context })
    }

    /// Samples `f(x, u, ·)` on every grid node.
    pub fn sample(f: &Lagrangian, grid: &XiGrid, x: &[f64], u: f64) -> Result<Self> {
        let values = crate::par::try_map_range(grid.len(), |i| {
            let xi = grid.node(i);
            f.eval(x, u, &xi).map_err(|reason| Error::Evaluation { node: grid.multi_index(i), reason })
        })?;
        Self::new(grid.clone(), values, SliceContext::new(x.to_vec(), u))
    }

    pub fn grid(&self) -> &XiGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Extended] {
        &self.values
    }

    pub fn value(&self, linear: usize) -> Extended {
        self.values[linear]
    }

    pub fn context(&self) -> &SliceContext {
        &self.context
    }

    /// `(linear index, value)` for every finite node.
    pub fn finite_nodes(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().filter_map(|(i, v)| v.finite().map(|x| (i, x)))
    }

    pub fn finite_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_finite()).count()
    }

    /// Largest finite value (0 when none).
    pub fn finite_max(&self) -> f64 {
        self.finite_nodes().map(|(_, v)| v).fold(0.0, f64::max)
    }

    /// Keeps values on nodes with `|ξ| ≤ radius` and puts the sentinel elsewhere.
    pub fn restrict_to_ball(&self, radius: f64) -> SampledSlice {
        let cutoff = radius * (1.0 + 1e-12) + 1e-12;
        self.restrict_with(|_, xi| norm(xi) <= cutoff)
    }

    /// Keeps values where `mask[i]` holds.
    pub fn restrict_to_mask(&self, mask: &[bool]) -> Result<SampledSlice> {
        if mask.len() != self.values.len() {
            return Err(Error::GridMismatch(format!("mask of length {} for {} nodes", mask.len(), self.values.len())));
        }
        Ok(self.restrict_with(|i, _| mask[i]))
    }

    fn restrict_with(&self, keep: impl Fn(usize, &[f64]) -> bool) -> SampledSlice {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| if keep(i, &self.grid.node(i)) { *v } else { Extended::Infinite })
            .collect();
        SampledSlice { grid: self.grid.clone(), values, context: self.context.clone() }
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Simplicial mesh: intervals in 1D, triangles in 2D.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    cells: Vec<Vec<usize>>,
    boundary: Vec<usize>,
}

impl Mesh {
    /// Builds a mesh, checking that every cell is a non-degenerate simplex.
    /// `boundary` lists the vertex indices lying on ∂Ω.
    pub fn new(dim: usize, vertices: Vec<Vec<f64>>, cells: Vec<Vec<usize>>, mut boundary: Vec<usize>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMesh("dimension must be positive".into()));
        }
        if let Some((i, v)) = vertices.iter().enumerate().find(|(_, v)| v.len() != dim) {
            return Err(Error::InvalidMesh(format!("vertex {i} has {} coordinates", v.len())));
        }
        for (c, cell) in cells.iter().enumerate() {
            if cell.len() != dim + 1 {
                return Err(Error::InvalidMesh(format!("cell {c} has {} vertices", cell.len())));
            }
            if let Some(&v) = cell.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("cell {c} references missing vertex {v}")));
            }
        }
        boundary.sort_unstable();
        boundary.dedup();
        if let Some(&b) = boundary.iter().find(|&&b| b >= vertices.len()) {
            return Err(Error::InvalidMesh(format!("boundary vertex {b} does not exist")));
        }
        let mesh = Self { dim, vertices, cells, boundary };
        for c in 0..mesh.cells.len() {
            if !(mesh.cell_measure(c) > 0.0) {
                return Err(Error::DegenerateCell { cell: c, reason: "zero measure".into() });
            }
        }
        Ok(mesh)
    }

    /// Uniform mesh of `[a, b]` with `n` cells.
    pub fn interval(a: f64, b: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMesh("need at least one cell".into()));
        }
        let pts = (0..=n).map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 }).collect();
        Self::interval_from_points(pts)
    }

    /// Mesh of `[a, b]` with nodes `a + (b - a)(i/n)^grading`, refined near `a`.
    pub fn graded_interval(a: f64, b: f64, n: usize, grading: f64) -> Result<Self> {
        if n == 0 || !(grading >= 1.0) {
            return Err(Error::InvalidMesh(format!("need n ≥ 1 and grading ≥ 1, got n={n}, grading={grading}")));
        }
        let pts = (0..=n).map(|i| if i == n { b } else { a + (b - a) * (i as f64 / n as f64).powf(grading) }).collect();
        Self::interval_from_points(pts)
    }

    /// 1D mesh through strictly increasing points.
    pub fn interval_from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidMesh("need at least two points".into()));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidMesh("points must be strictly increasing".into()));
        }
        let n = points.len() - 1;
        let vertices = points.into_iter().map(|p| vec![p]).collect();
        let cells = (0..n).map(|i| vec![i, i + 1]).collect();
        Self::new(1, vertices, cells, vec![0, n])
    }

    /// Structured triangulation of a 2D box with `nx × ny` squares, each cut
    /// along its lower-left to upper-right diagonal.
    pub fn rectangle(bbox: &BoxDomain, nx: usize, ny: usize) -> Result<Self> {
        if bbox.dim() != 2 || nx == 0 || ny == 0 {
            return Err(Error::InvalidMesh("rectangle meshes need a 2D box and positive counts".into()));
        }
        let coord =
            |lo: f64, hi: f64, n: usize, i: usize| if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 };
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut boundary = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                if i == 0 || j == 0 || i == nx || j == ny {
                    boundary.push(vertices.len());
                }
                vertices.push(vec![coord(bbox.lo()[0], bbox.hi()[0], nx, i), coord(bbox.lo()[1], bbox.hi()[1], ny, j)]);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut cells = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                cells.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        Self::new(2, vertices, cells, boundary)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i]
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary.binary_search(&v).is_ok()
    }

    /// Edge vectors `v_k - v_0` of a cell, one row per k.
    fn edge_matrix(&self, c: usize) -> DMatrix<f64> {
        let cell = &self.cells[c];
        let v0 = &self.vertices[cell[0]];
        DMatrix::from_fn(self.dim, self.dim, |r, col| self.vertices[cell[r + 1]][col] - v0[col])
    }

    pub fn cell_measure(&self, c: usize) -> f64 {
        if self.dim == 1 {
            let cell = &self.cells[c];
            return (self.vertices[cell[1]][0] - self.vertices[cell[0]][0]).abs();
        }
        let fact: f64 = (1..=self.dim).map(|k| k as f64).product();
        self.edge_matrix(c).determinant().abs() / fact
    }

    pub fn total_measure(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_measure(c)).sum()
    }

    pub fn barycenter(&self, c: usize) -> Vec<f64> {
        let cell = &self.cells[c];
        let k = cell.len() as f64;
        (0..self.dim).map(|a| cell.iter().map(|&v| self.vertices[v][a]).sum::<f64>() / k).collect()
    }

    /// Longest edge of a cell.
    pub fn cell_diameter(&self, c: usize) -> f64 {
        let cell = &self.cells[c];
        let mut d: f64 = 0.0;
        for i in 0..cell.len() {
            for j in i + 1..cell.len() {
                d = d.max(dist(&self.vertices[cell[i]], &self.vertices[cell[j]]));
            }
        }
        d
    }

    pub fn max_cell_diameter(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_diameter(c)).fold(0.0, f64::max)
    }

    /// Barycentric coordinates of `p` with respect to cell `c`.
    pub fn barycentric(&self, c: usize, p: &[f64]) -> Result<Vec<f64>> {
        let cell = &self.cells[c];
        let v0 = &self.vertices[cell[0]];
        if self.dim == 1 {
            let x0 = v0[0];
            let x1 = self.vertices[cell[1]][0];
            let t = (p[0] - x0) / (x1 - x0);
            return Ok(vec![1.0 - t, t]);
        }
        let m = self.edge_matrix(c).transpose();
        let rhs = DVector::from_fn(self.dim, |a, _| p[a] - v0[a]);
        let lam = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::DegenerateCell { cell: c, reason: "singular edge matrix".into() })?;
        let mut out = Vec::with_capacity(self.dim + 1);
        out.push(1.0 - lam.iter().sum::<f64>());
        out.extend(lam.iter().copied());
        Ok(out)
    }

    /// Index of a cell containing `p`, if any.
    pub fn locate(&self, p: &[f64]) -> Option<usize> {
        const EPS: f64 = 1e-12;
        if self.dim == 1 {
            // cells of generated 1D meshes are sorted; fall back to a scan otherwise
            let x = p[0];
            let sorted = self.cells.windows(2).all(|w| self.vertices[w[0][1]][0] <= self.vertices[w[1][0]][0]);
            if sorted {
                let idx = self.cells.partition_point(|cell| self.vertices[cell[1]][0] < x);
                let c = idx.min(self.cells.len() - 1);
                let (a, b) = (self.vertices[self.cells[c][0]][0], self.vertices[self.cells[c][1]][0]);
                let tol = EPS * (b - a).abs().max(1.0);
                if x >= a.min(b) - tol && x <= a.max(b) + tol {
                    return Some(c);
                }
                return None;
            }
        }
        (0..self.num_cells())
            .find(|&c| self.barycentric(c, p).map(|lam| lam.iter().all(|&l| l >= -1e-10)).unwrap_or(false))
    }
}

/// Continuous piecewise-linear scalar field given by its nodal values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PLField {
    mesh: Arc<Mesh>,
    nodal: Vec<f64>,
}

impl PLField {
    pub fn new(mesh: Arc<Mesh>, nodal: Vec<f64>) -> Result<Self> {
        if nodal.len() != mesh.num_vertices() {
            return Err(Error::InvalidMesh(format!(
                "{} nodal values for {} vertices",
                nodal.len(),
                mesh.num_vertices()
            )));
        }
        if let Some(i) = nodal.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("nodal value at vertex {i} is not finite")));
        }
        Ok(Self { mesh, nodal })
    }

    /// Nodal interpolant of `g`.
    pub fn interpolate(mesh: Arc<Mesh>, g: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let nodal = mesh.vertices().iter().map(|v| g(v)).collect();
        Self::new(mesh, nodal)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn nodal(&self) -> &[f64] {
        &self.nodal
    }

    /// Exact gradient of the linear interpolant on `cell`.
    pub fn gradient(&self, cell: usize) -> Result<Vec<f64>> {
        if cell >= self.mesh.num_cells() {
            return Err(Error::InvalidArgument(format!("cell {cell} out of range")));
        }
        let verts = self.mesh.cell(cell);
        if self.mesh.dim() == 1 {
            let (x0, x1) = (self.mesh.vertex(verts[0])[0], self.mesh.vertex(verts[1])[0]);
            if x0 == x1 {
                return Err(Error::DegenerateCell { cell, reason: "zero length".into() });
            }
            return Ok(vec![(self.nodal[verts[1]] - self.nodal[verts[0]]) / (x1 - x0)]);
        }
        let m = self.mesh.edge_matrix(cell);
        let rhs = DVector::from_fn(self.mesh.dim(), |r, _| self.nodal[verts[r + 1]] - self.nodal[verts[0]]);
        let g =
            m.lu().solve(&rhs).ok_or_else(|| Error::DegenerateCell { cell, reason: "singular edge matrix".into() })?;
        Ok(g.iter().copied().collect())
    }

    /// Field value at the barycenter of `cell`.
    pub fn barycenter_value(&self, cell: usize) -> f64 {
        let verts = self.mesh.cell(cell);
        verts.iter().map(|&v| self.nodal[v]).sum::<f64>() / verts.len() as f64
    }

    pub fn value_in_cell(&self, cell: usize, p: &[f64]) -> Result<f64> {
        let lam = self.mesh.barycentric(cell, p)?;
        Ok(self.mesh.cell(cell).iter().zip(&lam).map(|(&v, l)| self.nodal[v] * l).sum())
    }

    pub fn value_at(&self, p: &[f64]) -> Result<f64> {
        let c =
            self.mesh.locate(p).ok_or_else(|| Error::InvalidArgument(format!("point {p:?} is outside the mesh")))?;
        self.value_in_cell(c, p)
    }

    pub fn max_abs(&self) -> f64 {
        self.nodal.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max_c |∇u|_c` over all cells.
    pub fn grad_sup(&self) -> Result<f64> {
        let mut m: f64 = 0.0;
        for c in 0..self.mesh.num_cells() {
            m = m.max(norm(&self.gradient(c)?));
        }
        Ok(m)
    }
}
