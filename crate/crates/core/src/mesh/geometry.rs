use super::{signed_area, Point2};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeGeometry {
    pub start: Point2,
    pub end: Point2,
    pub length: f64,
    /// Unit outward normal.
    pub normal: Point2,
    /// Unit tangent, counter-clockwise along the element boundary.
    pub tangent: Point2,
    pub midpoint: Point2,
}

impl EdgeGeometry {
    fn new(start: Point2, end: Point2) -> Self {
        let d = end - start;
        let length = d.norm();
        let tangent = d / length;
        Self {
            start,
            end,
            length,
            normal: tangent.rot_cw(),
            tangent,
            midpoint: (start + end) * 0.5,
        }
    }

    /// Point at parameter `t` in `[0, 1]`.
    pub fn at(&self, t: f64) -> Point2 {
        self.start + (self.end - self.start) * t
    }
}

/// Geometric data of one polygonal element with counter-clockwise vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementGeometry {
    pub vertices: Vec<Point2>,
    pub area: f64,
    pub centroid: Point2,
    pub diameter: f64,
    /// Edge `i` runs from vertex `i` to vertex `i + 1`.
    pub edges: Vec<EdgeGeometry>,
}

impl ElementGeometry {
    pub fn from_points(vertices: Vec<Point2>) -> Self {
        let n = vertices.len();
        let area = signed_area(&vertices);
        let o = vertices[0];
        let mut c = Point2::default();
        for i in 0..n {
            let (p, q) = (vertices[i] - o, vertices[(i + 1) % n] - o);
            c += (p + q) * p.cross(q);
        }
        let centroid = o + c / (6.0 * area);
        let mut diameter: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                diameter = diameter.max(vertices[i].dist(vertices[j]));
            }
        }
        let edges = (0..n)
            .map(|i| EdgeGeometry::new(vertices[i], vertices[(i + 1) % n]))
            .collect();
        Self {
            vertices,
            area,
            centroid,
            diameter,
            edges,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Scaled coordinates `((x - x_E) / h_E, (y - y_E) / h_E)`.
    pub fn scaled(&self, p: Point2) -> Point2 {
        (p - self.centroid) / self.diameter
    }

    pub fn fan(&self) -> Result<SubTriangulation> {
        fan_triangulate(&self.vertices)
    }
}

/// Where the fan of a [`SubTriangulation`] is rooted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FanAnchor {
    /// Local polygon vertex index.
    Vertex(usize),
    /// An interior point (the centroid, or the centroid of the kernel),
    /// used when no vertex fan is free of degenerate triangles.
    Interior(Point2),
}

/// A segment of the sub-triangulation with a fixed unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubEdge {
    pub start: Point2,
    pub end: Point2,
    pub length: f64,
    pub normal: Point2,
}

impl SubEdge {
    fn new(start: Point2, end: Point2) -> Self {
        let d = end - start;
        let length = d.norm();
        Self {
            start,
            end,
            length,
            normal: d.rot_cw() / length,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubTriangle {
    /// Counter-clockwise.
    pub vertices: [Point2; 3],
    /// `edges[k]` is the sub-edge opposite `vertices[k]`.
    pub edges: [usize; 3],
    /// `+1` when the sub-edge normal points out of this triangle.
    pub signs: [f64; 3],
    pub area: f64,
}

impl SubTriangle {
    pub fn centroid(&self) -> Point2 {
        (self.vertices[0] + self.vertices[1] + self.vertices[2]) / 3.0
    }

    /// Whether `p` lies in the closed triangle, up to a relative tolerance.
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        let scale = 2.0 * self.area;
        (0..3).all(|k| {
            let a = self.vertices[(k + 1) % 3];
            let b = self.vertices[(k + 2) % 3];
            (b - a).cross(p - a) >= -tol * scale
        })
    }
}

/// Fan sub-triangulation of a polygon.
///
/// Sub-edges `0..n` are the polygon edges in order, with outward normals;
/// interior sub-edges follow. For a vertex anchor `V_a` the interior edges are
/// `(V_a, V_{a+j})` for `j = 2..n-2`; for an interior anchor `x` they
/// are `(x, V_j)` for every vertex. Interior normals are the clockwise rotation
/// of the direction away from the anchor.
#[derive(Clone, Debug, PartialEq)]
pub struct SubTriangulation {
    pub anchor: FanAnchor,
    pub triangles: Vec<SubTriangle>,
    pub edges: Vec<SubEdge>,
    pub n_boundary: usize,
}

impl SubTriangulation {
    pub fn n_interior(&self) -> usize {
        self.edges.len() - self.n_boundary
    }

    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|t| t.area).sum()
    }

    /// Index of a triangle containing `p`.
    pub fn locate(&self, p: Point2) -> Option<usize> {
        self.triangles.iter().position(|t| t.contains(p, 1e-12))
    }
}

fn triangle(vertices: [Point2; 3], edges: [usize; 3], signs: [f64; 3]) -> SubTriangle {
    let area = 0.5 * (vertices[1] - vertices[0]).cross(vertices[2] - vertices[0]);
    SubTriangle {
        vertices,
        edges,
        signs,
        area,
    }
}

fn vertex_fan(points: &[Point2], a: usize) -> SubTriangulation {
    let n = points.len();
    let v = |k: usize| points[(a + k) % n];
    let mut edges: Vec<SubEdge> = (0..n)
        .map(|i| SubEdge::new(points[i], points[(i + 1) % n]))
        .collect();
    for j in 2..n - 1 {
        edges.push(SubEdge::new(v(0), v(j)));
    }
    let interior = |j: usize| n + j - 2;
    let triangles = (1..n - 1)
        .map(|i| {
            let opposite_anchor = (a + i) % n;
            let (e1, s1) = if i == n - 2 {
                ((a + n - 1) % n, 1.0)
            } else {
                (interior(i + 1), -1.0)
            };
            let e2 = if i == 1 { a } else { interior(i) };
            triangle(
                [v(0), v(i), v(i + 1)],
                [opposite_anchor, e1, e2],
                [1.0, s1, 1.0],
            )
        })
        .collect();
    SubTriangulation {
        anchor: FanAnchor::Vertex(a),
        triangles,
        edges,
        n_boundary: n,
    }
}

fn interior_fan(points: &[Point2], centroid: Point2) -> SubTriangulation {
    let n = points.len();
    let mut edges: Vec<SubEdge> = (0..n)
        .map(|i| SubEdge::new(points[i], points[(i + 1) % n]))
        .collect();
    for p in points {
        edges.push(SubEdge::new(centroid, *p));
    }
    let triangles = (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            triangle(
                [centroid, points[i], points[j]],
                [i, n + j, n + i],
                [1.0, -1.0, 1.0],
            )
        })
        .collect();
    SubTriangulation {
        anchor: FanAnchor::Interior(centroid),
        triangles,
        edges,
        n_boundary: n,
    }
}

/// Fan sub-triangulation of a counter-clockwise polygon.
///
/// Tries each vertex as the anchor in turn, starting from vertex 0, and falls
/// back to a fan around an interior point (the centroid, or the centroid of
/// the kernel when the centroid does not see the whole boundary) if every
/// vertex fan has a triangle of (numerically) non-positive area.
pub fn fan_triangulate(points: &[Point2]) -> Result<SubTriangulation> {
    let area = signed_area(points);
    let tol = 1e-10 * area;
    let ok = |s: &SubTriangulation| s.triangles.iter().all(|t| t.area > tol);
    for a in 0..points.len() {
        let s = vertex_fan(points, a);
        if ok(&s) {
            return Ok(s);
        }
    }
    // hanging nodes next to a reflex corner can rule out every vertex
    let center = super::refinement_center(points).map_err(|_| Error::Element {
        cell: usize::MAX,
        reason: "polygon is not star-shaped".into(),
    })?;
    let s = interior_fan(points, center);
    if ok(&s) {
        log::debug!("interior fan used for a {}-gon", points.len());
        return Ok(s);
    }
    Err(Error::Element {
        cell: usize::MAX,
        reason: "polygon has no fan sub-triangulation without degenerate triangles".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn small_cell_far_from_origin() {
        let o = Point2::new(1234.5, -987.25);
        let h = 1e-3;
        let pts: Vec<Point2> = [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (0.0, 1.0)]
            .iter()
            .map(|&(x, y)| o + Point2::new(x, y) * h)
            .collect();
        let g = ElementGeometry::from_points(pts);
        assert_relative_eq!(g.area, 2.0 * h * h, max_relative = 1e-12);
        let c = g.scaled(o + Point2::new(1.0, 0.5) * h);
        assert!(c.norm() < 1e-12, "{c:?}");
    }

    fn square() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    fn regular(n: usize) -> Vec<Point2> {
        (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                Point2::new(t.cos(), t.sin())
            })
            .collect()
    }

    #[test]
    fn unit_square_geometry() {
        let g = ElementGeometry::from_points(square());
        assert_relative_eq!(g.area, 1.0);
        assert_relative_eq!(g.centroid.x, 0.5);
        assert_relative_eq!(g.centroid.y, 0.5);
        assert_relative_eq!(g.diameter, 2f64.sqrt());
        assert_eq!(g.edges[0].normal, Point2::new(0.0, -1.0));
        assert_eq!(g.edges[1].normal, Point2::new(1.0, 0.0));
    }

    #[test]
    fn right_triangle_geometry() {
        let g = ElementGeometry::from_points(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ]);
        assert_relative_eq!(g.area, 0.5);
        assert_relative_eq!(g.centroid.x, 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(g.centroid.y, 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(g.diameter, 2f64.sqrt());
    }

    #[test]
    fn regular_pentagon_area() {
        let g = ElementGeometry::from_points(regular(5));
        assert_relative_eq!(g.area, 2.5 * (2.0 * PI / 5.0).sin(), epsilon = 1e-14);
        assert_relative_eq!(g.area, 2.37764, epsilon = 1e-5);
    }

    #[test]
    fn closed_polygon_normal_sum_vanishes() {
        let g = ElementGeometry::from_points(regular(7));
        let s = g
            .edges
            .iter()
            .fold(Point2::default(), |acc, e| acc + e.normal * e.length);
        assert!(s.norm() < 1e-14);
        for e in &g.edges {
            assert!(e.normal.dot(e.tangent).abs() < 1e-15);
            assert!(e.length <= g.diameter);
        }
    }

    #[test]
    fn fan_counts() {
        for (n, tris, interior) in [(3, 1, 0), (4, 2, 1), (5, 3, 2)] {
            let s = fan_triangulate(&regular(n)).unwrap();
            assert_eq!(s.anchor, FanAnchor::Vertex(0));
            assert_eq!(s.triangles.len(), tris);
            assert_eq!(s.n_interior(), interior);
            assert_relative_eq!(s.area(), signed_area(&regular(n)), epsilon = 1e-14);
        }
    }

    // Every triangle's sign-weighted sub-edge normals must be its outward ones.
    fn audit_incidence(s: &SubTriangulation) {
        for t in &s.triangles {
            assert!(t.area > 0.0);
            for k in 0..3 {
                let a = t.vertices[(k + 1) % 3];
                let b = t.vertices[(k + 2) % 3];
                let e = &s.edges[t.edges[k]];
                let outward = (b - a).rot_cw() / (b - a).norm();
                assert!((e.normal * t.signs[k] - outward).norm() < 1e-14);
                let same = (e.start.dist(a) < 1e-14 && e.end.dist(b) < 1e-14)
                    || (e.start.dist(b) < 1e-14 && e.end.dist(a) < 1e-14);
                assert!(same);
            }
        }
    }

    #[test]
    fn fan_incidence_is_consistent() {
        for n in 3..9 {
            audit_incidence(&fan_triangulate(&regular(n)).unwrap());
        }
    }

    #[test]
    fn collinear_anchor_is_skipped() {
        // square with a hanging vertex on the bottom edge
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let s = fan_triangulate(&pts).unwrap();
        assert_eq!(s.anchor, FanAnchor::Vertex(1));
        audit_incidence(&s);
    }

    #[test]
    fn kernel_fallback_with_hanging_nodes() {
        // L-shape whose reflex corner has hanging nodes on both incident
        // sides and whose centroid lies outside the kernel
        let c = [
            (2.0, 0.0),
            (8.0, 0.0),
            (8.0, 4.0),
            (8.0, 8.0),
            (7.0, 8.0),
            (6.0, 8.0),
            (6.0, 7.0),
            (6.0, 6.0),
            (6.0, 4.0),
            (4.0, 4.0),
            (2.0, 4.0),
            (2.0, 2.0),
            (2.0, 1.0),
        ];
        let pts: Vec<Point2> = c
            .iter()
            .map(|&(x, y)| Point2::new(x / 24.0, y / 24.0))
            .collect();
        let s = fan_triangulate(&pts).unwrap();
        let FanAnchor::Interior(k) = s.anchor else {
            panic!("{:?}", s.anchor)
        };
        assert!(k.x > 6.0 / 24.0 && k.y < 4.0 / 24.0);
        assert_relative_eq!(s.area(), signed_area(&pts), epsilon = 1e-15);
        audit_incidence(&s);
    }

    #[test]
    fn centroid_fallback() {
        // A cross: no vertex sees the whole polygon, the centre does.
        let c = [
            (1.0, 0.0),
            (2.0, 0.0),
            (2.0, 1.0),
            (3.0, 1.0),
            (3.0, 2.0),
            (2.0, 2.0),
            (2.0, 3.0),
            (1.0, 3.0),
            (1.0, 2.0),
            (0.0, 2.0),
            (0.0, 1.0),
            (1.0, 1.0),
        ];
        let pts: Vec<Point2> = c.iter().map(|&(x, y)| Point2::new(x, y)).collect();
        let s = fan_triangulate(&pts).unwrap();
        assert!(matches!(s.anchor, FanAnchor::Interior(_)));
        assert_eq!(s.triangles.len(), 12);
        assert_eq!(s.n_interior(), 12);
        assert_relative_eq!(s.area(), 5.0, epsilon = 1e-13);
        audit_incidence(&s);
    }

    #[test]
    fn locate_finds_containing_triangle() {
        let s = fan_triangulate(&square()).unwrap();
        let t = s.locate(Point2::new(0.9, 0.1)).unwrap();
        assert!(s.triangles[t].contains(Point2::new(0.9, 0.1), 0.0));
        assert!(s.locate(Point2::new(1.5, 0.5)).is_none());
    }
}
