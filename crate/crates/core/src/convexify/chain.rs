//! Lower convex chain of a 1D point set (Andrew's monotone chain, lower half).

/// Lower hull of points sorted by strictly increasing `x`. Collinear interior
/// points are dropped. Returns indices into `pts`.
pub(crate) fn lower_hull(pts: &[(f64, f64)]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(pts.len());
    for (i, p) in pts.iter().enumerate() {
        while hull.len() >= 2 {
            let a = pts[hull[hull.len() - 2]];
            let b = pts[hull[hull.len() - 1]];
            if cross(a, b, *p) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

fn cross(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Location of `x` relative to the hull vertices `hx` (sorted).
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Segment {
    /// `x` coincides with hull vertex `k`.
    Vertex(usize),
    /// `x` lies strictly between vertices `k` and `k + 1`.
    Between(usize, f64),
    Outside,
}

pub(crate) fn locate(hx: &[f64], x: f64) -> Segment {
    if hx.is_empty() || x < hx[0] || x > hx[hx.len() - 1] {
        return Segment::Outside;
    }
    let k = hx.partition_point(|&v| v < x);
    if k < hx.len() && hx[k] == x {
        return Segment::Vertex(k);
    }
    let t = (x - hx[k - 1]) / (hx[k] - hx[k - 1]);
    Segment::Between(k - 1, t)
}
