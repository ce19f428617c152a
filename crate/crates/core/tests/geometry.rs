mod common;

use densemark::delaunay::delaunay;
use densemark::geom::{extract_landmarks, Sampling, UvPositionMap};
use densemark::kdtree::KdTree;
use proptest::prelude::*;

use common::oracles::{check_delaunay, orient, P};

fn point_set() -> impl Strategy<Value = Vec<P>> {
    proptest::collection::btree_set((0i64..1000, 0i64..1000), 3..=200).prop_filter_map("collinear", |s| {
        let pts: Vec<P> = s.into_iter().map(|(x, y)| [x, y]).collect();
        pts[2..].iter().any(|&c| orient(pts[0], pts[1], c) != 0).then_some(pts)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn delaunay_has_empty_circumcircles(points in point_set()) {
        prop_assert_eq!(check_delaunay(&points), Ok(()));
    }

    #[test]
    fn kdtree_matches_linear_scan(
        points in proptest::collection::vec((0u8..20, 0u8..20), 1..300),
        queries in proptest::collection::vec((-0.2f64..1.2, -0.2f64..1.2), 1..20),
    ) {
        let pts: Vec<[f64; 2]> = points.iter().map(|&(x, y)| [x as f64 / 19.0, y as f64 / 19.0]).collect();
        let tree = KdTree::new(&pts);
        for &(qx, qy) in &queries {
            let d2 = |p: &[f64; 2]| (p[0] - qx).powi(2) + (p[1] - qy).powi(2);
            let mut best = 0;
            for (i, p) in pts.iter().enumerate() {
                if d2(p) < d2(&pts[best]) {
                    best = i;
                }
            }
            prop_assert_eq!(tree.nearest([qx, qy]).0, best);
        }
    }
}

#[test]
fn lattice_with_many_cocircular_quads() {
    let pts: Vec<P> = (0..12).flat_map(|y| (0..12).map(move |x| [x * 7, y * 7])).collect();
    check_delaunay(&pts).unwrap();
}

#[test]
fn square_tie_uses_diagonal_through_lowest_index() {
    let t = delaunay(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
    assert_eq!(t.triangles, vec![[0, 1, 2], [0, 2, 3]]);
    // vertex 0 at (1, 0): the diagonal runs (1, 0)-(0, 1)
    let t = delaunay(&[[1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]).unwrap();
    assert_eq!(t.triangles, vec![[0, 1, 2], [0, 2, 3]]);
    // vertex 0 at (1, 1): the diagonal runs (1, 1)-(0, 0)
    let t = delaunay(&[[1.0, 1.0], [0.0, 1.0], [1.0, 0.0], [0.0, 0.0]]).unwrap();
    assert_eq!(t.triangles, vec![[0, 1, 3], [0, 3, 2]]);
}

#[test]
fn mirror_table_of_dense_set_is_an_involution() {
    let keys = common::keys520();
    let uv = common::template().mesh.uv();
    assert_eq!(keys.len(), 520);
    for (i, &j) in keys.mirror().iter().enumerate() {
        assert_eq!(keys.mirror()[j], i);
        let (a, b) = (uv[keys.indices()[i]], uv[keys.indices()[j]]);
        assert!((a[0] + b[0] - 1.0).abs() < 0.02 && (a[1] - b[1]).abs() < 0.02, "{i} <-> {j}: {a:?} {b:?}");
    }
}

#[test]
fn nearest_lookup_rounds_half_up() {
    let map = UvPositionMap::from_fn(5, 5, |r, c| [c as f64, r as f64, 0.0]).unwrap();
    // u = 0.125 -> col 0.5 -> 1, v = 0.375 -> row 1.5 -> 2
    assert_eq!(map.lookup([0.125, 0.375], Sampling::Nearest).unwrap(), [1.0, 2.0, 0.0]);
    assert_eq!(map.lookup([0.125, 0.375], Sampling::Bilinear).unwrap(), [0.5, 1.5, 0.0]);
}

#[test]
fn masked_keypoint_reports_ordinal_and_vertex() {
    let t = common::template();
    let map = UvPositionMap::constant(8, 8, [0.0; 3]).unwrap().with_mask(vec![false; 64]).unwrap();
    let err = extract_landmarks(&map, &t.mesh, &t.landmarks68, Sampling::Nearest).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("keypoint 0") && msg.contains(&format!("vertex {}", t.landmarks68.indices()[0])), "{msg}");
}
