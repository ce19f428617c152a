//! 2-D Delaunay triangulation: a lexicographic sweep builds an initial
//! triangulation which Lawson edge flips then make Delaunay.
//!
//! Orientation and in-circle tests use adaptive exact predicates. Among
//! cocircular configurations the diagonal touching the lowest point index is
//! kept, so the output is unique for any input.

use std::collections::HashMap;

use robust::Coord;

use crate::error::{Error, Result};
use crate::geom::Uv;

/// A point in the sampling plane.
pub type Point2 = Uv;

/// Triangles index into `points`; each is counter-clockwise, rotated so its
/// lowest index comes first, and the list is sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Triangulation {
    pub points: Vec<Point2>,
    pub triangles: Vec<[usize; 3]>,
}

pub(crate) fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    robust::orient2d(coord(a), coord(b), coord(c))
}

/// Positive when `d` lies strictly inside the circle through CCW `a, b, c`.
pub(crate) fn in_circle(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    robust::incircle(coord(a), coord(b), coord(c), coord(d))
}

fn coord(p: Point2) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

pub fn delaunay(points: &[Point2]) -> Result<Triangulation> {
    if points.len() < 3 {
        return Err(Error::Geometry(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(i) = points.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(Error::Geometry(format!("point {i} is not finite")));
    }
    let mut mesh = sweep(points)?;
    mesh.legalize();
    let mut triangles: Vec<[usize; 3]> = mesh.triangles.into_iter().map(canonical).collect();
    triangles.sort_unstable();
    Ok(Triangulation { points: points.to_vec(), triangles })
}

fn canonical(t: [usize; 3]) -> [usize; 3] {
    let k = (0..3).min_by_key(|&k| t[k]).unwrap();
    [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
}

struct Mesh<'a> {
    points: &'a [Point2],
    triangles: Vec<[usize; 3]>,
    /// Directed edge `(a, b)` -> triangle having it in CCW order.
    edges: HashMap<(usize, usize), usize>,
}

impl<'a> Mesh<'a> {
    fn push(&mut self, t: [usize; 3]) {
        let id = self.triangles.len();
        self.triangles.push(t);
        self.link(id);
    }

    fn link(&mut self, id: usize) {
        let [a, b, c] = self.triangles[id];
        for e in [(a, b), (b, c), (c, a)] {
            self.edges.insert(e, id);
        }
    }

    fn unlink(&mut self, id: usize) {
        let [a, b, c] = self.triangles[id];
        for e in [(a, b), (b, c), (c, a)] {
            self.edges.remove(&e);
        }
    }

    fn ccw(&self, a: usize, b: usize, c: usize) -> [usize; 3] {
        if orient(self.points[a], self.points[b], self.points[c]) > 0.0 {
            [a, b, c]
        } else {
            [a, c, b]
        }
    }

    fn legalize(&mut self) {
        let mut stack: Vec<(usize, usize)> = self.edges.keys().filter(|(a, b)| a < b).copied().collect();
        stack.sort_unstable();
        while let Some((a, b)) = stack.pop() {
            let (Some(&t1), Some(&t2)) = (self.edges.get(&(a, b)), self.edges.get(&(b, a))) else {
                continue;
            };
            let c = third(self.triangles[t1], a, b);
            let d = third(self.triangles[t2], b, a);
            let p = self.points;
            let s = in_circle(p[a], p[b], p[c], p[d]);
            let tie_flip = s == 0.0 && {
                let lowest = a.min(b).min(c).min(d);
                lowest == c || lowest == d
            };
            if s > 0.0 || tie_flip {
                self.unlink(t1);
                self.unlink(t2);
                self.triangles[t1] = [a, d, c];
                self.triangles[t2] = [d, b, c];
                self.link(t1);
                self.link(t2);
                stack.extend([(a, d), (d, b), (b, c), (c, a)]);
            }
        }
    }
}

fn third(t: [usize; 3], a: usize, b: usize) -> usize {
    *t.iter().find(|&&v| v != a && v != b).expect("triangle has three distinct vertices")
}

fn sweep(points: &[Point2]) -> Result<Mesh<'_>> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        let (p, q) = (points[i], points[j]);
        p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])).then(i.cmp(&j))
    });
    if let Some(w) = order.windows(2).find(|w| points[w[0]] == points[w[1]]) {
        return Err(Error::Geometry(format!("duplicate points {} and {}", w[0], w[1])));
    }
    let (s0, s1) = (order[0], order[1]);
    let k = (2..order.len())
        .find(|&k| orient(points[s0], points[s1], points[order[k]]) != 0.0)
        .ok_or_else(|| Error::Geometry("all points are collinear".into()))?;
    let apex = order[k];

    let mut mesh = Mesh { points, triangles: Vec::new(), edges: HashMap::new() };
    for w in order[..k].windows(2) {
        let t = mesh.ccw(w[0], w[1], apex);
        mesh.push(t);
    }
    let mut hull: Vec<usize> = if orient(points[s0], points[s1], points[apex]) > 0.0 {
        order[..=k].to_vec()
    } else {
        std::iter::once(s0).chain(std::iter::once(apex)).chain(order[1..k].iter().rev().copied()).collect()
    };

    for &p in &order[k + 1..] {
        let m = hull.len();
        let visible: Vec<bool> =
            (0..m).map(|i| orient(points[hull[i]], points[hull[(i + 1) % m]], points[p]) < 0.0).collect();
        let start = (0..m)
            .find(|&i| visible[i] && !visible[(i + m - 1) % m])
            .expect("a point outside the hull sees at least one edge");
        let mut i = start;
        let mut run = 0;
        while visible[i] {
            let (a, b) = (hull[i], hull[(i + 1) % m]);
            mesh.push([b, a, p]);
            i = (i + 1) % m;
            run += 1;
        }
        // hull[start] .. hull[start + run] become hull[start], p, hull[start + run]
        let mut next = Vec::with_capacity(m - run + 2);
        let mut j = (start + run) % m;
        loop {
            next.push(hull[j]);
            if j == start {
                break;
            }
            j = (j + 1) % m;
        }
        next.push(p);
        hull = next;
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_triangle() {
        let t = delaunay(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(t.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let t = delaunay(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(t.triangles, vec![[0, 2, 1]]);
    }

    #[test]
    fn square_uses_diagonal_from_lowest_index() {
        let t = delaunay(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert_eq!(t.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        // relabelled square: lowest index sits on the other diagonal
        let t = delaunay(&[[1.0, 0.0], [0.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(t.triangles, vec![[0, 2, 1], [0, 3, 2]]);
    }

    #[test]
    fn grid_cells_split_through_lowest_corner() {
        let grid: Vec<Point2> = (0..9).map(|i| [(i % 3) as f64, (i / 3) as f64]).collect();
        let t = delaunay(&grid).unwrap();
        assert_eq!(t.triangles.len(), 8);
        for tri in &t.triangles {
            // every cell split by the diagonal through its lowest-index corner
            let lowest = tri[0];
            assert!(tri.iter().all(|&v| v >= lowest));
        }
        assert!(t.triangles.contains(&[0, 1, 4]) && t.triangles.contains(&[0, 4, 3]));
    }

    #[test]
    fn cocircular_octagon_is_a_fan_from_lowest_index() {
        // integer points on the circle of radius 5
        let pts: Vec<Point2> =
            [[5.0, 0.0], [4.0, 3.0], [3.0, 4.0], [0.0, 5.0], [-3.0, 4.0], [-4.0, 3.0], [-5.0, 0.0], [0.0, -5.0]]
                .to_vec();
        let t = delaunay(&pts).unwrap();
        assert_eq!(t.triangles.len(), 6);
        assert!(t.triangles.iter().all(|tri| tri[0] == 0), "{:?}", t.triangles);
    }

    #[test]
    fn collinear_prefix_is_fanned() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [1.5, 1.0]];
        let t = delaunay(&pts).unwrap();
        assert_eq!(t.triangles.len(), 3);
    }

    #[test]
    fn errors() {
        assert!(matches!(delaunay(&[[0.0, 0.0], [1.0, 1.0]]), Err(Error::Geometry(_))));
        assert!(matches!(delaunay(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]), Err(Error::Geometry(_))));
        assert!(matches!(delaunay(&[[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]), Err(Error::Geometry(_))));
        assert!(delaunay(&[[0.0, 0.0], [1.0, 0.0], [f64::NAN, 1.0]]).is_err());
    }
}
