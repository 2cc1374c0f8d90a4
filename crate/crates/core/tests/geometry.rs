use std::collections::BTreeSet;
use std::f64::consts::PI;

use cellbalance_core::hexgrid::{neighbor_offset, triangle_area, HexLayout, Point, ScopeRule, TriangleId, WEDGES};
use cellbalance_core::rng::Stream;
use proptest::prelude::*;

/// Random connected cluster of `n` cells grown from the origin.
fn cluster(n: usize, seed: u64, side: f64) -> Vec<Point> {
    let mut rng = Stream::new(seed);
    let mut cells: Vec<(i64, i64)> = vec![(0, 0)];
    // Axial steps matching neighbor_offset's wedges.
    let steps = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];
    while cells.len() < n {
        let (q, r) = cells[rng.below(cells.len())];
        let (dq, dr) = steps[rng.below(6)];
        let c = (q + dq, r + dr);
        if !cells.contains(&c) {
            cells.push(c);
        }
    }
    let e0 = neighbor_offset(side, 0);
    let e1 = neighbor_offset(side, 1);
    cells
        .iter()
        .map(|&(q, r)| Point::new(q as f64 * e0.x + r as f64 * e1.x, q as f64 * e0.y + r as f64 * e1.y))
        .collect()
}

fn rotate(p: Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    Point::new(c * p.x - s * p.y, s * p.x + c * p.y)
}

fn set(ts: &[TriangleId]) -> BTreeSet<TriangleId> {
    ts.iter().copied().collect()
}

#[test]
fn cluster_steps_are_lattice_neighbors() {
    let layout = HexLayout::new(&cluster(12, 5, 1.0), 1.0).unwrap();
    let links: usize = (0..layout.n_hex()).map(|h| layout.neighbors(h).unwrap().len()).sum();
    assert!(links >= 2 * (layout.n_hex() - 1), "cluster must be connected");
}

#[test]
fn wedge_offsets_point_across_edges() {
    for w in 0..WEDGES {
        let o = neighbor_offset(1.0, w);
        assert!((o.distance(Point::new(0.0, 0.0)) - 3f64.sqrt()).abs() < 1e-12);
        let angle = o.y.atan2(o.x).to_degrees().rem_euclid(360.0);
        assert!((angle - (30.0 + 60.0 * w as f64)).abs() < 1e-9);
    }
}

#[test]
fn wnl2_scope_lists() {
    let l = HexLayout::preset("wnl2").unwrap();
    let centre = l.scopes(0, ScopeRule::default()).unwrap();
    assert_eq!(centre.scope0.len(), 12);
    assert_eq!(centre.scope1.len(), 12);
    for hex in 1..7 {
        let s = l.scopes(hex, ScopeRule::default()).unwrap();
        assert_eq!((s.scope0.len(), s.scope1.len()), (6, 6));
        let ring = l
            .scopes(
                hex,
                ScopeRule {
                    include_second_ring: true,
                },
            )
            .unwrap();
        assert_eq!((ring.scope0.len(), ring.scope1.len()), (9, 9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scope_sizes_and_symmetry(n in 1usize..14, seed in any::<u64>()) {
        let l = HexLayout::new(&cluster(n, seed, 1.0), 1.0).unwrap();
        for b in 0..l.n_hex() {
            let nb = l.neighbors(b).unwrap().to_vec();
            let s = l.scopes(b, ScopeRule::default()).unwrap();
            prop_assert_eq!(s.scope0.len(), 2 * nb.len());
            prop_assert_eq!(s.scope1.len(), 2 * nb.len());
            prop_assert!(s.scope0.iter().all(|t| t.hex == b && matches!(t.sub(), 1 | 2)));
            prop_assert!(s.scope1.iter().all(|t| t.hex != b && matches!(t.sub(), 1 | 2)));

            let mut facing_b = BTreeSet::new();
            for &m in &nb {
                let w = l.shared_wedge(m, b).unwrap().unwrap();
                let other = l.scopes(m, ScopeRule::default()).unwrap();
                facing_b.extend(other.scope0.into_iter().filter(|t| t.wedge() == w));
            }
            prop_assert_eq!(set(&s.scope1), facing_b);
        }
    }

    #[test]
    fn translation_changes_nothing(n in 1usize..10, seed in any::<u64>(), dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
        let centers = cluster(n, seed, 1.0);
        let moved: Vec<Point> = centers.iter().map(|p| Point::new(p.x + dx, p.y + dy)).collect();
        let a = HexLayout::new(&centers, 1.0).unwrap();
        let b = HexLayout::new(&moved, 1.0).unwrap();
        for h in 0..a.n_hex() {
            prop_assert_eq!(a.neighbors(h).unwrap(), b.neighbors(h).unwrap());
            prop_assert_eq!(a.scopes(h, ScopeRule::default()).unwrap(), b.scopes(h, ScopeRule::default()).unwrap());
        }
        for t in a.triangle_ids() {
            let (ca, cb) = (a.triangle_centroid(t).unwrap(), b.triangle_centroid(t).unwrap());
            prop_assert!((ca.x + dx - cb.x).abs() < 1e-9 && (ca.y + dy - cb.y).abs() < 1e-9);
        }
    }

    #[test]
    fn sixty_degree_rotation_shifts_wedges(n in 1usize..10, seed in any::<u64>(), turns in 1usize..6) {
        let centers = cluster(n, seed, 1.0);
        let angle = turns as f64 * PI / 3.0;
        let rotated: Vec<Point> = centers.iter().map(|&p| rotate(p, angle)).collect();
        let a = HexLayout::new(&centers, 1.0).unwrap();
        let b = HexLayout::new(&rotated, 1.0).unwrap();
        let shift = |t: &TriangleId| TriangleId::from_parts(t.hex, (t.wedge() + turns) % WEDGES, t.sub());
        for rule in [ScopeRule::default(), ScopeRule { include_second_ring: true }] {
            for h in 0..a.n_hex() {
                prop_assert_eq!(a.neighbors(h).unwrap(), b.neighbors(h).unwrap());
                let (sa, sb) = (a.scopes(h, rule).unwrap(), b.scopes(h, rule).unwrap());
                prop_assert_eq!(sa.scope0.iter().map(shift).collect::<BTreeSet<_>>(), set(&sb.scope0));
                prop_assert_eq!(sa.scope1.iter().map(shift).collect::<BTreeSet<_>>(), set(&sb.scope1));
            }
        }
    }

    #[test]
    fn triangles_have_equal_area(side in 0.1f64..10.0, n in 1usize..6, seed in any::<u64>()) {
        let l = HexLayout::new(&cluster(n, seed, side), side).unwrap();
        let hex_area = 1.5 * 3f64.sqrt() * side * side;
        for t in l.triangle_ids() {
            let a = triangle_area(&l.triangle_vertices(t).unwrap());
            prop_assert!((a - hex_area / 24.0).abs() < 1e-9 * hex_area);
        }
    }

    #[test]
    fn overlapping_centres_are_rejected(seed in any::<u64>(), frac in 0.0f64..0.999) {
        let mut rng = Stream::new(seed);
        let angle = rng.uniform() * 2.0 * PI;
        let d = frac * 3f64.sqrt();
        let centers = [Point::new(0.0, 0.0), Point::new(d * angle.cos(), d * angle.sin())];
        prop_assert!(HexLayout::new(&centers, 1.0).is_err());
    }
}
