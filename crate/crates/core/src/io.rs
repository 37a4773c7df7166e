//! File formats: grid CSV, certificate sidecars, field CSV and JSON with
//! 17 significant digits. Every writer goes through [`write_atomic`].

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::convexify::EnvelopeResult;
use crate::error::{Error, Result};
use crate::types::{BoxDomain, Extended, Mesh, PLField, SampledSlice, SliceContext, XiGrid};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_ext(v: Extended) -> String {
    match v {
        Extended::Finite(x) => fmt_f64(x),
        Extended::Infinite => "inf".to_string(),
    }
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::Io(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::from(e)
    })
}

struct SigDigits;

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        if !value.is_finite() {
            return writer.write_all(b"null");
        }
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact JSON with every float printed to 17 significant digits;
/// non-finite floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = to_json(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// Grid CSV text of a slice.
pub fn slice_to_csv(slice: &SampledSlice) -> String {
    grid_csv(slice.grid(), slice.values(), slice.context())
}

/// Grid CSV text of envelope values.
pub fn envelope_to_csv(env: &EnvelopeResult) -> String {
    grid_csv(env.grid(), env.values(), env.source().context())
}

fn grid_csv(grid: &XiGrid, values: &[Extended], ctx: &SliceContext) -> String {
    let counts: Vec<String> = grid.counts().iter().map(|c| c.to_string()).collect();
    let mut out = format!(
        "# xi_grid N={} counts={} lo={} hi={}\n# context x={} u={}\n",
        grid.dim(),
        counts.join(","),
        join_f64(grid.bbox().lo()),
        join_f64(grid.bbox().hi()),
        join_f64(&ctx.x),
        fmt_f64(ctx.u)
    );
    for (i, v) in values.iter().enumerate() {
        for m in grid.multi_index(i) {
            out.push_str(&m.to_string());
            out.push(',');
        }
        out.push_str(&fmt_ext(*v));
        out.push('\n');
    }
    out
}

fn header_fields(line: &str) -> BTreeMap<String, String> {
    line.split_whitespace().filter_map(|tok| tok.split_once('=')).map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|t| !t.is_empty())
        .map(|t| t.trim().parse::<T>().map_err(|_| Error::Parse(format!("bad {what} entry `{t}`"))))
        .collect()
}

fn parse_value(tok: &str) -> Result<Extended> {
    let tok = tok.trim();
    if tok == "inf" {
        return Ok(Extended::Infinite);
    }
    let v: f64 = tok.parse().map_err(|_| Error::Parse(format!("bad value `{tok}`")))?;
    Extended::from_f64(v).ok_or_else(|| Error::Parse(format!("value `{tok}` is not representable")))
}

/// Parses a grid CSV produced by [`slice_to_csv`] (the context line is optional).
pub fn slice_from_csv(text: &str) -> Result<SampledSlice> {
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| Error::Parse("empty grid file".into()))?;
    let rest = head.strip_prefix("# xi_grid").ok_or_else(|| Error::Parse("missing `# xi_grid` header".into()))?;
    let h = header_fields(rest);
    let get = |k: &str| h.get(k).ok_or_else(|| Error::Parse(format!("header lacks `{k}=`")));
    let n: usize = get("N")?.parse().map_err(|_| Error::Parse("bad N".into()))?;
    let counts: Vec<usize> = parse_list(get("counts")?, "counts")?;
    let lo: Vec<f64> = parse_list(get("lo")?, "lo")?;
    let hi: Vec<f64> = parse_list(get("hi")?, "hi")?;
    if counts.len() != n || lo.len() != n || hi.len() != n {
        return Err(Error::Parse(format!("header lists do not have length N={n}")));
    }
    let grid = XiGrid::new(BoxDomain::new(lo, hi)?, counts)?;
    let mut ctx = SliceContext::new(vec![0.0], 0.0);
    let mut values = vec![None; grid.len()];
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix("# context") {
            let f = header_fields(c);
            if let Some(x) = f.get("x") {
                ctx.x = parse_list(x, "x")?;
            }
            if let Some(u) = f.get("u") {
                ctx.u = u.parse().map_err(|_| Error::Parse("bad context u".into()))?;
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split(',').collect();
        if toks.len() != n + 1 {
            return Err(Error::Parse(format!("row {}: expected {} fields, got {}", lineno + 2, n + 1, toks.len())));
        }
        let multi: Vec<usize> = toks[..n]
            .iter()
            .map(|t| t.trim().parse().map_err(|_| Error::Parse(format!("row {}: bad index `{t}`", lineno + 2))))
            .collect::<Result<_>>()?;
        if multi.iter().zip(grid.counts()).any(|(m, c)| m >= c) {
            return Err(Error::Parse(format!("row {}: index {multi:?} out of range", lineno + 2)));
        }
        values[grid.linear_index(&multi)] = Some(parse_value(toks[n])?);
    }
    let values: Vec<Extended> = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::Parse(format!("node {:?} has no row", grid.multi_index(i)))))
        .collect::<Result<_>>()?;
    SampledSlice::new(grid, values, ctx)
}

#[derive(Serialize, Deserialize)]
struct CertEntry {
    weights: Vec<f64>,
    points: Vec<Vec<f64>>,
}

/// Certificate sidecar `{node_index: {"weights": [...], "points": [[...]]}}`.
pub fn certificates_to_json(env: &EnvelopeResult) -> Result<String> {
    let map: BTreeMap<usize, CertEntry> = env
        .certificates()
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            c.as_ref().map(|c| (i, CertEntry { weights: c.weights.clone(), points: c.points.clone() }))
        })
        .collect();
    to_json(&map)
}

/// Reads a sidecar back as `(node, weights, points)` triples.
pub fn certificates_from_json(text: &str) -> Result<Vec<(usize, Vec<f64>, Vec<Vec<f64>>)>> {
    let map: BTreeMap<usize, CertEntry> = serde_json::from_str(text)?;
    Ok(map.into_iter().map(|(i, c)| (i, c.weights, c.points)).collect())
}

/// Field CSV: `vertex_index,x...,value` rows.
pub fn field_to_csv(u: &PLField) -> String {
    let mesh = u.mesh();
    let mut out = String::from("# pl_field dim=");
    out.push_str(&mesh.dim().to_string());
    out.push('\n');
    for (i, (p, v)) in mesh.vertices().iter().zip(u.nodal()).enumerate() {
        out.push_str(&format!("{i},{},{}\n", join_f64(p), fmt_f64(*v)));
    }
    out
}

/// Parses `vertex_index,x...,value` rows into `(points, values)`.
pub fn field_points_from_csv(text: &str) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut rows: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split(',').collect();
        if toks.len() < 3 {
            return Err(Error::Parse(format!("row {}: expected index, coordinates and value", lineno + 1)));
        }
        let idx: usize = toks[0].trim().parse().map_err(|_| Error::Parse(format!("row {}: bad index", lineno + 1)))?;
        let nums: Vec<f64> = toks[1..]
            .iter()
            .map(|t| t.trim().parse().map_err(|_| Error::Parse(format!("row {}: bad number `{t}`", lineno + 1))))
            .collect::<Result<_>>()?;
        let (value, coords) = nums.split_last().expect("at least two numbers");
        rows.push((idx, coords.to_vec(), *value));
    }
    rows.sort_by_key(|r| r.0);
    if rows.iter().enumerate().any(|(k, r)| r.0 != k) {
        return Err(Error::Parse("vertex indices must be 0..n without gaps".into()));
    }
    let dim = rows.first().map_or(0, |r| r.1.len());
    if rows.iter().any(|r| r.1.len() != dim) {
        return Err(Error::Parse("rows have differing coordinate counts".into()));
    }
    Ok(rows.into_iter().map(|r| (r.1, r.2)).unzip())
}

/// Reads a 1D field CSV; the mesh is rebuilt from the sorted vertices.
pub fn field_1d_from_csv(text: &str) -> Result<PLField> {
    let (pts, vals) = field_points_from_csv(text)?;
    if pts.first().is_none_or(|p| p.len() != 1) {
        return Err(Error::Parse("a 1D field needs one coordinate per row".into()));
    }
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]));
    let mesh = Mesh::interval_from_points(order.iter().map(|&k| pts[k][0]).collect())?;
    PLField::new(Arc::new(mesh), order.iter().map(|&k| vals[k]).collect())
}

/// Reads a field CSV whose vertices are those of `mesh`, in order.
pub fn field_on_mesh_from_csv(text: &str, mesh: Arc<Mesh>) -> Result<PLField> {
    let (pts, vals) = field_points_from_csv(text)?;
    if pts.len() != mesh.num_vertices() {
        return Err(Error::Parse(format!("{} rows for a mesh with {} vertices", pts.len(), mesh.num_vertices())));
    }
    PLField::new(mesh, vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convexify::envelope;

    fn slice() -> SampledSlice {
        let grid = XiGrid::centered(2, 1.0, 3).unwrap();
        let mut values: Vec<Extended> = (0..9).map(|i| Extended::Finite(0.1 * i as f64)).collect();
        values[4] = Extended::Infinite;
        SampledSlice::new(grid, values, SliceContext::new(vec![0.25], -1.5)).unwrap()
    }

    #[test]
    fn grid_csv_round_trip() {
        let s = slice();
        let text = slice_to_csv(&s);
        assert!(text.starts_with("# xi_grid N=2 counts=3,3 lo="));
        assert!(text.contains(",inf\n"));
        assert_eq!(slice_from_csv(&text).unwrap(), s);
    }

    #[test]
    fn missing_rows_are_rejected() {
        let text = slice_to_csv(&slice());
        let cut: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(matches!(slice_from_csv(&cut), Err(Error::Parse(_))));
    }

    #[test]
    fn certificates_round_trip() {
        let env = envelope(&slice()).unwrap();
        let back = certificates_from_json(&certificates_to_json(&env).unwrap()).unwrap();
        let n = env.certificates().iter().filter(|c| c.is_some()).count();
        assert_eq!(back.len(), n);
        for (i, w, p) in back {
            let c = env.certificate(i).unwrap();
            assert_eq!(w, c.weights);
            assert_eq!(p, c.points);
        }
    }

    #[test]
    fn json_uses_seventeen_digits() {
        let s = to_json(&vec![0.1f64, 1.0 / 3.0]).unwrap();
        assert_eq!(s, "[1.0000000000000001e-1,3.3333333333333331e-1]");
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![0.1, 1.0 / 3.0]);
    }

    #[test]
    fn field_round_trip_and_atomic_write() {
        let mesh = Arc::new(Mesh::interval(0.0, 1.0, 4).unwrap());
        let u = PLField::interpolate(mesh, |x| x[0] * x[0]).unwrap();
        let dir = std::env::temp_dir().join(format!("relaxkit-io-{}", std::process::id()));
        let path = dir.join("u.csv");
        write_atomic(&path, field_to_csv(&u).as_bytes()).unwrap();
        let back = field_1d_from_csv(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back.nodal(), u.nodal());
        assert_eq!(back.mesh().vertices(), u.mesh().vertices());
        fs::remove_dir_all(dir).unwrap();
    }
}
