use std::collections::HashSet;

use super::{Point2, PolygonalMesh};

/// Whether `p` continues the straight segment `prev -> p -> next`.
pub fn is_collinear_vertex(prev: Point2, p: Point2, next: Point2) -> bool {
    let (a, b) = (p - prev, next - p);
    a.cross(b).abs() <= 1e-12 * a.norm() * b.norm() && a.dot(b) > 0.0
}

/// Shape-regularity indicators of a mesh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularityReport {
    /// Minimum over cells of shortest edge / diameter.
    pub min_edge_ratio: f64,
    /// Minimum over all fan triangles of `4 sqrt(3) |T| / sum of squared sides`
    /// (1 for an equilateral triangle).
    pub min_triangle_quality: f64,
    /// Number of vertices lying in the interior of a straight side of some cell.
    pub hanging_nodes: usize,
}

pub fn regularity_report(mesh: &PolygonalMesh) -> RegularityReport {
    let mut min_edge_ratio = f64::INFINITY;
    let mut min_triangle_quality = f64::INFINITY;
    let mut hanging = HashSet::new();
    for c in 0..mesh.n_cells() {
        let g = mesh.element_geometry(c);
        let shortest = g
            .edges
            .iter()
            .map(|e| e.length)
            .fold(f64::INFINITY, f64::min);
        min_edge_ratio = min_edge_ratio.min(shortest / g.diameter);
        if let Ok(fan) = g.fan() {
            for t in &fan.triangles {
                let [a, b, d] = t.vertices;
                let sq = (b - a).dot(b - a) + (d - b).dot(d - b) + (a - d).dot(a - d);
                min_triangle_quality = min_triangle_quality.min(4.0 * 3f64.sqrt() * t.area / sq);
            }
        } else {
            min_triangle_quality = 0.0;
        }
        let cell = mesh.cell(c);
        let n = cell.len();
        for (k, &v) in cell.iter().enumerate() {
            let p = g.vertices[k];
            if is_collinear_vertex(g.vertices[(k + n - 1) % n], p, g.vertices[(k + 1) % n]) {
                hanging.insert(v);
            }
        }
    }
    RegularityReport {
        min_edge_ratio,
        min_triangle_quality,
        hanging_nodes: hanging.len(),
    }
}
