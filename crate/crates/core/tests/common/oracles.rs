use densemark::delaunay::delaunay;

pub type P = [i64; 2];

pub fn orient(a: P, b: P, c: P) -> i128 {
    let (ax, ay) = ((b[0] - a[0]) as i128, (b[1] - a[1]) as i128);
    let (bx, by) = ((c[0] - a[0]) as i128, (c[1] - a[1]) as i128);
    ax * by - ay * bx
}

/// Positive when `d` lies strictly inside the circle through CCW `a, b, c`.
pub fn in_circle(a: P, b: P, c: P, d: P) -> i128 {
    let row = |p: P| {
        let (x, y) = ((p[0] - d[0]) as i128, (p[1] - d[1]) as i128);
        (x, y, x * x + y * y)
    };
    let (ax, ay, a2) = row(a);
    let (bx, by, b2) = row(b);
    let (cx, cy, c2) = row(c);
    ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx)
}

/// Strict convex hull (no collinear vertices), CCW.
pub fn hull(points: &[P]) -> Vec<P> {
    let mut p = points.to_vec();
    p.sort();
    let mut h: Vec<P> = Vec::new();
    for pass in 0..2 {
        let start = h.len();
        for &q in &p {
            while h.len() >= start + 2 && orient(h[h.len() - 2], h[h.len() - 1], q) <= 0 {
                h.pop();
            }
            h.push(q);
        }
        h.pop();
        if pass == 0 {
            p.reverse();
        }
    }
    h
}

pub fn on_segment(a: P, b: P, p: P) -> bool {
    orient(a, b, p) == 0
        && a[0].min(b[0]) <= p[0]
        && p[0] <= a[0].max(b[0])
        && a[1].min(b[1]) <= p[1]
        && p[1] <= a[1].max(b[1])
}

/// Brute-force verification of a triangulation of integer points.
pub fn check_delaunay(points: &[P]) -> Result<(), String> {
    let fp: Vec<[f64; 2]> = points.iter().map(|p| [p[0] as f64, p[1] as f64]).collect();
    let t = delaunay(&fp).map_err(|e| e.to_string())?;
    for tri in &t.triangles {
        let [a, b, c] = tri.map(|i| points[i]);
        if orient(a, b, c) <= 0 {
            return Err(format!("triangle {tri:?} is not strictly CCW"));
        }
        for (k, &d) in points.iter().enumerate() {
            if !tri.contains(&k) && in_circle(a, b, c, d) > 0 {
                return Err(format!("point {k} inside circumcircle of {tri:?}"));
            }
        }
    }
    let h = hull(points);
    let hull_area: i128 = (0..h.len()).map(|i| orient([0, 0], h[i], h[(i + 1) % h.len()])).sum();
    let tri_area: i128 = t.triangles.iter().map(|tri| orient(points[tri[0]], points[tri[1]], points[tri[2]])).sum();
    if tri_area != hull_area {
        return Err(format!("triangles cover area {tri_area}, hull has {hull_area}"));
    }
    let boundary = points.iter().filter(|&&p| (0..h.len()).any(|i| on_segment(h[i], h[(i + 1) % h.len()], p))).count();
    let expected = 2 * points.len() - 2 - boundary;
    if t.triangles.len() != expected {
        return Err(format!("{} triangles, Euler count gives {expected}", t.triangles.len()));
    }
    Ok(())
}

/// Straightforward NME: mean point distance over sqrt(h * w) of the
/// ground-truth (x, y) extent.
pub fn naive_nme(pred: &[[f64; 3]], gt: &[[f64; 3]], dims: usize) -> f64 {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in gt {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let d = ((x1 - x0) * (y1 - y0)).sqrt();
    let mut sum = 0.0;
    for i in 0..gt.len() {
        let mut s = 0.0;
        for k in 0..dims {
            s += (pred[i][k] - gt[i][k]) * (pred[i][k] - gt[i][k]);
        }
        sum += s.sqrt();
    }
    sum / gt.len() as f64 / d
}
