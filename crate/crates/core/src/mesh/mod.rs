//! Polygonal meshes.
//!
//! A [`PolygonalMesh`] stores vertex coordinates and counter-clockwise cell
//! vertex lists, and derives the edge list, the per-cell oriented edge table
//! and the boundary flags. Hanging nodes are plain collinear polygon vertices,
//! so every edge is shared by at most two cells and matches on both sides.

mod generate;
mod geometry;
mod io;
mod refine;
mod regularity;

use std::collections::HashMap;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

pub use generate::{generate_nonconvex_mesh, generate_rect_mesh, generate_square_mesh, Rect};
pub use geometry::{
    fan_triangulate, EdgeGeometry, ElementGeometry, FanAnchor, SubEdge, SubTriangle,
    SubTriangulation,
};
pub use io::{load_mesh, mesh_from_json, mesh_to_json, save_mesh};
pub use refine::{refine_cells, refinement_center};
pub use regularity::{is_collinear_vertex, regularity_report, RegularityReport};

/// A point (or vector) in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Self) -> f64 {
        (self - other).norm()
    }

    /// Rotation by 90 degrees clockwise: `(x, y) -> (y, -x)`.
    pub fn rot_cw(self) -> Self {
        Self::new(self.y, -self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point2 {
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Point2 {
    type Output = Self;
    fn div(self, s: f64) -> Self {
        Self::new(self.x / s, self.y / s)
    }
}

impl Neg for Point2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Signed area of a closed polygon (shoelace formula), positive when CCW.
/// Coordinates are taken relative to the first vertex, so small cells far
/// from the origin keep their relative accuracy.
pub fn signed_area(points: &[Point2]) -> f64 {
    let Some(&o) = points.first() else { return 0.0 };
    let n = points.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += (points[i] - o).cross(points[(i + 1) % n] - o);
    }
    0.5 * acc
}

/// A mesh edge between `vertices[0] < vertices[1]`.
///
/// The global normal is the clockwise rotation of `vertices[1] - vertices[0]`.
/// It points out of `left` (the cell whose counter-clockwise boundary runs from
/// `vertices[0]` to `vertices[1]`) and into `right`. On the boundary exactly one
/// of the two sides is present.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub left: Option<usize>,
    pub right: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.left.is_none() || self.right.is_none()
    }

    /// The cells on either side, `left` first.
    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.left.iter().chain(self.right.iter()).copied()
    }
}

/// Local edge `i` of a cell (from its vertex `i` to vertex `i + 1`) as a
/// global edge index plus the sign relating the global normal to the cell's
/// outward normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedEdge {
    pub edge: usize,
    pub sign: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolygonalMesh {
    vertices: Vec<Point2>,
    cells: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    cell_edges: Vec<Vec<OrientedEdge>>,
    boundary_vertex: Vec<bool>,
}

impl PolygonalMesh {
    /// Builds the topology from raw vertex coordinates and cell index lists.
    ///
    /// Clockwise cells are reversed. Cells with fewer than three vertices,
    /// repeated vertices, self-intersections or vanishing area are rejected,
    /// as are edges with more than two incident cells.
    pub fn new(vertices: Vec<Point2>, cells: Vec<Vec<usize>>) -> Result<Self> {
        build_topology(vertices, cells)
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Point2 {
        self.vertices[i]
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn cell_edges(&self, c: usize) -> &[OrientedEdge] {
        &self.cell_edges[c]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn cell_points(&self, c: usize) -> Vec<Point2> {
        self.cells[c].iter().map(|&v| self.vertices[v]).collect()
    }

    /// Unit global normal of edge `e` (see [`Edge`]).
    pub fn edge_normal(&self, e: usize) -> Point2 {
        let [a, b] = self.edges[e].vertices;
        let d = self.vertices[b] - self.vertices[a];
        d.rot_cw() / d.norm()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        self.vertices[a].dist(self.vertices[b])
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        signed_area(&self.cell_points(c))
    }

    /// Sum of all cell areas.
    pub fn total_area(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_area(c)).sum()
    }

    pub fn element_geometry(&self, c: usize) -> ElementGeometry {
        ElementGeometry::from_points(self.cell_points(c))
    }

    /// Largest element diameter.
    pub fn max_diameter(&self) -> f64 {
        (0..self.n_cells())
            .map(|c| self.element_geometry(c).diameter)
            .fold(0.0, f64::max)
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| self.edges[e].is_boundary())
    }

    /// Cells sharing an edge with `c`.
    pub fn neighbors(&self, c: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.cell_edges[c]
            .iter()
            .flat_map(|oe| self.edges[oe.edge].cells())
            .filter(|&other| other != c)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = (p2 - p1).cross(q1 - p1);
    let d2 = (p2 - p1).cross(q2 - p1);
    let d3 = (q2 - q1).cross(p1 - q1);
    let d4 = (q2 - q1).cross(p2 - q1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on_segment = |a: Point2, b: Point2, p: Point2, d: f64| {
        d == 0.0
            && p.x >= a.x.min(b.x)
            && p.x <= a.x.max(b.x)
            && p.y >= a.y.min(b.y)
            && p.y <= a.y.max(b.y)
    };
    on_segment(p1, p2, q1, d1)
        || on_segment(p1, p2, q2, d2)
        || on_segment(q1, q2, p1, d3)
        || on_segment(q1, q2, p2, d4)
}

fn is_simple(points: &[Point2]) -> bool {
    let n = points.len();
    for i in 0..n {
        for j in (i + 1)..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(
                points[i],
                points[(i + 1) % n],
                points[j],
                points[(j + 1) % n],
            ) {
                return false;
            }
        }
    }
    true
}

/// See [`PolygonalMesh::new`].
pub fn build_topology(vertices: Vec<Point2>, mut cells: Vec<Vec<usize>>) -> Result<PolygonalMesh> {
    let nv = vertices.len();
    if let Some(i) = vertices.iter().position(|p| !p.is_finite()) {
        return Err(Error::MeshFormat(format!(
            "vertex {i} has non-finite coordinates"
        )));
    }
    for (c, cell) in cells.iter_mut().enumerate() {
        if cell.len() < 3 {
            return Err(Error::DegenerateCell {
                cell: c,
                reason: format!("{} vertices", cell.len()),
            });
        }
        if let Some(&index) = cell.iter().find(|&&v| v >= nv) {
            return Err(Error::IndexOutOfRange {
                cell: c,
                index,
                n_vertices: nv,
            });
        }
        let mut sorted = cell.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DegenerateCell {
                cell: c,
                reason: "repeated vertex".into(),
            });
        }
        let pts: Vec<Point2> = cell.iter().map(|&v| vertices[v]).collect();
        let area = signed_area(&pts);
        let scale = pts
            .iter()
            .flat_map(|a| pts.iter().map(move |b| a.dist(*b)))
            .fold(0.0, f64::max);
        if area.abs() <= 1e-14 * scale * scale {
            return Err(Error::DegenerateCell {
                cell: c,
                reason: format!("area {area:e}"),
            });
        }
        if !is_simple(&pts) {
            return Err(Error::DegenerateCell {
                cell: c,
                reason: "self-intersecting boundary".into(),
            });
        }
        if area < 0.0 {
            cell.reverse();
        }
    }

    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut cell_edges = Vec::with_capacity(cells.len());
    for (c, cell) in cells.iter().enumerate() {
        let n = cell.len();
        let mut local = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = (cell[i], cell[(i + 1) % n]);
            let key = (a.min(b), a.max(b));
            let forward = a < b;
            let e = *edge_index.entry(key).or_insert_with(|| {
                edges.push(Edge {
                    vertices: [key.0, key.1],
                    left: None,
                    right: None,
                });
                edges.len() - 1
            });
            let slot = if forward {
                &mut edges[e].left
            } else {
                &mut edges[e].right
            };
            if slot.is_some() {
                return Err(Error::NonManifoldEdge(key.0, key.1));
            }
            *slot = Some(c);
            local.push(OrientedEdge {
                edge: e,
                sign: if forward { 1.0 } else { -1.0 },
            });
        }
        cell_edges.push(local);
    }

    let mut boundary_vertex = vec![false; nv];
    for e in &edges {
        if e.is_boundary() {
            boundary_vertex[e.vertices[0]] = true;
            boundary_vertex[e.vertices[1]] = true;
        }
    }

    Ok(PolygonalMesh {
        vertices,
        cells,
        edges,
        cell_edges,
        boundary_vertex,
    })
}
