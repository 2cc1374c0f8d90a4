//! Hexagonal cells split into 24 triangular microcells.
//!
//! Hexagons are flat-topped: vertex `k` sits at angle `60k` degrees and
//! circumradius `a` from the center, so neighbors lie at `30 + 60k` degrees,
//! `sqrt(3) a` away. Wedge `w` is the triangle (center, vertex `w`, vertex
//! `w + 1`); joining the midpoints of its sides yields four sub-triangles:
//!
//! * sub 0: the apex touching the hexagon center,
//! * sub 1: the boundary triangle at vertex `w`,
//! * sub 2: the boundary triangle at vertex `w + 1`,
//! * sub 3: the inverted middle triangle.
//!
//! A microcell's local index is `4 w + sub`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRIANGLES_PER_HEX: usize = 24;
pub const WEDGES: usize = 6;
/// Relative tolerance, in units of the side length, for adjacency tests.
pub const ADJACENCY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn midpoint(self, other: Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

/// One microcell: hexagon index plus local index `0..24`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TriangleId {
    pub hex: usize,
    pub local: usize,
}

impl TriangleId {
    pub fn new(hex: usize, local: usize) -> Result<Self> {
        if local >= TRIANGLES_PER_HEX {
            return Err(Error::IndexOutOfRange {
                what: "triangle",
                index: local,
                limit: TRIANGLES_PER_HEX,
            });
        }
        Ok(Self { hex, local })
    }

    pub fn from_parts(hex: usize, wedge: usize, sub: usize) -> Self {
        debug_assert!(wedge < WEDGES && sub < 4);
        Self {
            hex,
            local: 4 * wedge + sub,
        }
    }

    /// Position in a flat per-microcell vector (`24 * hex + local`).
    pub fn flat(self) -> usize {
        TRIANGLES_PER_HEX * self.hex + self.local
    }

    pub fn from_flat(index: usize) -> Self {
        Self {
            hex: index / TRIANGLES_PER_HEX,
            local: index % TRIANGLES_PER_HEX,
        }
    }

    pub fn wedge(self) -> usize {
        self.local / 4
    }

    pub fn sub(self) -> usize {
        self.local % 4
    }
}

impl fmt::Display for TriangleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.hex, self.local)
    }
}

/// Which triangles of a shared wedge can change hands.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeRule {
    /// Also admit the middle (sub 3) triangle of each shared wedge.
    pub include_second_ring: bool,
}

impl ScopeRule {
    fn subs(self) -> &'static [usize] {
        if self.include_second_ring {
            &[1, 2, 3]
        } else {
            &[1, 2]
        }
    }
}

/// Border microcells of one hexagon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScopeSet {
    pub owner: usize,
    /// The owner's own triangles on edges shared with a neighbor.
    pub scope0: Vec<TriangleId>,
    /// Neighbors' triangles on edges shared with the owner.
    pub scope1: Vec<TriangleId>,
}

/// On-disk layout description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutFile {
    pub side: f64,
    pub centers: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct HexLayout {
    side: f64,
    centers: Vec<Point>,
    /// Sorted neighbor lists.
    neighbors: Vec<Vec<usize>>,
    /// Vertices of every microcell, indexed by `TriangleId::flat`.
    triangles: Vec<[Point; 3]>,
}

impl HexLayout {
    pub fn new(centers: &[Point], side: f64) -> Result<Self> {
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidLayout(format!("side must be positive, got {side}")));
        }
        if centers.is_empty() {
            return Err(Error::InvalidLayout("no hexagon centers".into()));
        }
        if let Some(i) = centers.iter().position(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::InvalidLayout(format!("center {i} is not finite")));
        }

        let spacing = 3f64.sqrt() * side;
        let tol = ADJACENCY_TOL * side;
        let mut neighbors = vec![Vec::new(); centers.len()];
        for a in 0..centers.len() {
            for b in a + 1..centers.len() {
                let d = centers[a].distance(centers[b]);
                if d < spacing - tol {
                    return Err(Error::Overlap {
                        a,
                        b,
                        distance: d,
                        min: spacing,
                    });
                }
                if (d - spacing).abs() <= tol {
                    neighbors[a].push(b);
                    neighbors[b].push(a);
                }
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }

        let triangles = centers
            .iter()
            .flat_map(|&c| (0..TRIANGLES_PER_HEX).map(move |local| triangle_vertices(c, side, local)))
            .collect();

        Ok(Self {
            side,
            centers: centers.to_vec(),
            neighbors,
            triangles,
        })
    }

    pub fn from_file(file: &LayoutFile) -> Result<Self> {
        let centers: Vec<Point> = file.centers.iter().map(|&[x, y]| Point::new(x, y)).collect();
        Self::new(&centers, file.side)
    }

    pub fn to_file(&self) -> LayoutFile {
        LayoutFile {
            side: self.side,
            centers: self.centers.iter().map(|p| [p.x, p.y]).collect(),
        }
    }

    /// Looks up a named preset (`wnl1` or `wnl2`).
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "wnl1" => Some(preset_wnl1()),
            "wnl2" => Some(preset_wnl2()),
            _ => None,
        }
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn n_hex(&self) -> usize {
        self.centers.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.centers.len() * TRIANGLES_PER_HEX
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn center(&self, hex: usize) -> Result<Point> {
        self.check_hex(hex)?;
        Ok(self.centers[hex])
    }

    /// Iterates every microcell in flat order.
    pub fn triangle_ids(&self) -> impl Iterator<Item = TriangleId> {
        (0..self.n_triangles()).map(TriangleId::from_flat)
    }

    pub fn neighbors(&self, hex: usize) -> Result<&[usize]> {
        self.check_hex(hex)?;
        Ok(&self.neighbors[hex])
    }

    pub fn triangle_vertices(&self, t: TriangleId) -> Result<[Point; 3]> {
        self.check_triangle(t)?;
        Ok(self.triangles[t.flat()])
    }

    pub fn triangle_centroid(&self, t: TriangleId) -> Result<Point> {
        let [a, b, c] = self.triangle_vertices(t)?;
        Ok(Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0))
    }

    /// Wedge of `hex` whose outer edge faces `other`, if the two are adjacent.
    pub fn shared_wedge(&self, hex: usize, other: usize) -> Result<Option<usize>> {
        self.check_hex(other)?;
        if !self.neighbors(hex)?.contains(&other) {
            return Ok(None);
        }
        let (from, to) = (self.centers[hex], self.centers[other]);
        let angle = (to.y - from.y).atan2(to.x - from.x).to_degrees();
        let wedge = ((angle - 30.0) / 60.0).round().rem_euclid(WEDGES as f64) as usize;
        Ok(Some(wedge % WEDGES))
    }

    pub fn scopes(&self, hex: usize, rule: ScopeRule) -> Result<ScopeSet> {
        let mut scope0 = Vec::new();
        let mut scope1 = Vec::new();
        for &m in self.neighbors(hex)? {
            let own = self.shared_wedge(hex, m)?.expect("neighbors share a wedge");
            let theirs = self.shared_wedge(m, hex)?.expect("adjacency is symmetric");
            scope0.extend(rule.subs().iter().map(|&s| TriangleId::from_parts(hex, own, s)));
            scope1.extend(rule.subs().iter().map(|&s| TriangleId::from_parts(m, theirs, s)));
        }
        Ok(ScopeSet {
            owner: hex,
            scope0,
            scope1,
        })
    }

    fn check_hex(&self, hex: usize) -> Result<()> {
        if hex >= self.centers.len() {
            return Err(Error::IndexOutOfRange {
                what: "hexagon",
                index: hex,
                limit: self.centers.len(),
            });
        }
        Ok(())
    }

    fn check_triangle(&self, t: TriangleId) -> Result<()> {
        self.check_hex(t.hex)?;
        if t.local >= TRIANGLES_PER_HEX {
            return Err(Error::IndexOutOfRange {
                what: "triangle",
                index: t.local,
                limit: TRIANGLES_PER_HEX,
            });
        }
        Ok(())
    }
}

fn hex_vertex(center: Point, side: f64, k: usize) -> Point {
    let theta = (60.0 * (k % WEDGES) as f64).to_radians();
    Point::new(center.x + side * theta.cos(), center.y + side * theta.sin())
}

fn triangle_vertices(center: Point, side: f64, local: usize) -> [Point; 3] {
    let (wedge, sub) = (local / 4, local % 4);
    let v0 = hex_vertex(center, side, wedge);
    let v1 = hex_vertex(center, side, wedge + 1);
    let m0 = center.midpoint(v0);
    let m1 = center.midpoint(v1);
    let edge = v0.midpoint(v1);
    match sub {
        0 => [center, m0, m1],
        1 => [m0, v0, edge],
        2 => [edge, v1, m1],
        _ => [m0, edge, m1],
    }
}

/// Center offset of the neighbor across wedge `w`'s edge, for side `a`.
pub fn neighbor_offset(side: f64, wedge: usize) -> Point {
    let theta = (30.0 + 60.0 * (wedge % WEDGES) as f64).to_radians();
    let r = 3f64.sqrt() * side;
    Point::new(r * theta.cos(), r * theta.sin())
}

/// Three mutually adjacent cells.
pub fn preset_wnl1() -> HexLayout {
    let o = Point::new(0.0, 0.0);
    let centers = [o, neighbor_offset(1.0, 0), neighbor_offset(1.0, 1)];
    HexLayout::new(&centers, 1.0).expect("preset is valid")
}

/// A central cell surrounded by a ring of six (the center is index 0).
pub fn preset_wnl2() -> HexLayout {
    let mut centers = vec![Point::new(0.0, 0.0)];
    centers.extend((0..WEDGES).map(|w| neighbor_offset(1.0, w)));
    HexLayout::new(&centers, 1.0).expect("preset is valid")
}

fn polygon_area(p: &[Point]) -> f64 {
    let n = p.len();
    0.5 * (0..n)
        .map(|i| p[i].x * p[(i + 1) % n].y - p[(i + 1) % n].x * p[i].y)
        .sum::<f64>()
        .abs()
}

pub fn triangle_area(v: &[Point; 3]) -> f64 {
    polygon_area(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single() -> HexLayout {
        HexLayout::new(&[Point::new(0.0, 0.0)], 1.0).unwrap()
    }

    #[test]
    fn single_hexagon_has_no_neighbors() {
        let l = single();
        assert_eq!(l.n_hex(), 1);
        assert_eq!(l.n_triangles(), 24);
        assert!(l.neighbors(0).unwrap().is_empty());
        let s = l.scopes(0, ScopeRule::default()).unwrap();
        assert!(s.scope0.is_empty() && s.scope1.is_empty());
    }

    #[test]
    fn presets_have_expected_adjacency() {
        let l = preset_wnl1();
        assert_eq!(l.neighbors(0).unwrap(), &[1, 2]);
        for h in 0..3 {
            assert_eq!(l.neighbors(h).unwrap().len(), 2);
        }
        let l = preset_wnl2();
        assert_eq!(l.neighbors(0).unwrap(), &[1, 2, 3, 4, 5, 6]);
        for h in 1..7 {
            assert_eq!(l.neighbors(h).unwrap().len(), 3, "ring hex {h}");
        }
    }

    #[test]
    fn scope_sizes() {
        let rule = ScopeRule::default();
        let l = preset_wnl1();
        for h in 0..3 {
            let s = l.scopes(h, rule).unwrap();
            assert_eq!(s.scope1.len(), 4);
            assert_eq!(s.scope0.len(), 4);
        }
        let l = preset_wnl2();
        assert_eq!(l.scopes(0, rule).unwrap().scope1.len(), 12);
        for h in 1..7 {
            assert_eq!(l.scopes(h, rule).unwrap().scope1.len(), 6);
        }
        let wide = ScopeRule {
            include_second_ring: true,
        };
        assert_eq!(l.scopes(0, wide).unwrap().scope1.len(), 18);
    }

    #[test]
    fn apex_centroid_is_vertex_mean() {
        let l = single();
        let t = TriangleId::from_parts(0, 0, 0);
        let v = l.triangle_vertices(t).unwrap();
        let c = l.triangle_centroid(t).unwrap();
        // center (0,0), midpoints (0.5,0) and (0.25, sqrt(3)/4)
        assert!((v[0].x).abs() < 1e-15 && (v[0].y).abs() < 1e-15);
        assert!((c.x - 0.25).abs() < 1e-12);
        assert!((c.y - 3f64.sqrt() / 12.0).abs() < 1e-12);
    }

    #[test]
    fn centroids_average_to_center() {
        let l = HexLayout::new(&[Point::new(3.0, -2.0)], 2.0).unwrap();
        let (sx, sy) = l.triangle_ids().fold((0.0, 0.0), |(sx, sy), t| {
            let c = l.triangle_centroid(t).unwrap();
            (sx + c.x, sy + c.y)
        });
        assert!((sx / 24.0 - 3.0).abs() < 1e-12);
        assert!((sy / 24.0 + 2.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_centroids_farther_than_apex() {
        let l = single();
        let o = Point::new(0.0, 0.0);
        for w in 0..WEDGES {
            let d = |s| {
                l.triangle_centroid(TriangleId::from_parts(0, w, s))
                    .unwrap()
                    .distance(o)
            };
            assert!(d(1) > d(0));
            assert!(d(2) > d(0));
        }
    }

    #[test]
    fn triangles_tile_the_hexagon() {
        let l = HexLayout::new(&[Point::new(0.5, 0.25)], 1.7).unwrap();
        let total: f64 = l
            .triangle_ids()
            .map(|t| triangle_area(&l.triangle_vertices(t).unwrap()))
            .sum();
        let hex = 1.5 * 3f64.sqrt() * 1.7 * 1.7;
        assert!(((total - hex) / hex).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_geometry() {
        let close = [Point::new(0.0, 0.0), Point::new(1.0, 0.0)];
        assert!(matches!(HexLayout::new(&close, 1.0), Err(Error::Overlap { .. })));
        assert!(HexLayout::new(&[], 1.0).is_err());
        assert!(HexLayout::new(&[Point::new(0.0, 0.0)], 0.0).is_err());
        assert!(HexLayout::new(&[Point::new(f64::NAN, 0.0)], 1.0).is_err());
    }

    #[test]
    fn out_of_range_indices() {
        let l = preset_wnl1();
        assert!(l.neighbors(3).is_err());
        assert!(l.scopes(5, ScopeRule::default()).is_err());
        assert!(l.triangle_centroid(TriangleId { hex: 0, local: 24 }).is_err());
        assert!(TriangleId::new(0, 24).is_err());
    }

    #[test]
    fn scope_triangles_share_an_edge_across_the_border() {
        let l = preset_wnl2();
        for hex in 0..l.n_hex() {
            let s = l.scopes(hex, ScopeRule::default()).unwrap();
            for own in &s.scope0 {
                let a = l.triangle_vertices(*own).unwrap();
                let partners = s
                    .scope1
                    .iter()
                    .filter(|t| {
                        let b = l.triangle_vertices(**t).unwrap();
                        a.iter().filter(|p| b.iter().any(|q| p.distance(*q) < 1e-9)).count() == 2
                    })
                    .count();
                assert_eq!(partners, 1, "{own}");
            }
        }
    }

    #[test]
    fn layout_file_round_trip() {
        let l = preset_wnl2();
        let back = HexLayout::from_file(&l.to_file()).unwrap();
        assert_eq!(back.centers(), l.centers());
    }
}
