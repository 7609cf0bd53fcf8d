use std::collections::HashMap;

use super::geometry::ElementGeometry;
use super::regularity::is_collinear_vertex;
use super::{build_topology, signed_area, Point2, PolygonalMesh};
use crate::error::{Error, Result};

/// Clips a convex polygon to the half-plane left of the line `a -> b`.
fn clip(poly: &[Point2], a: Point2, b: Point2) -> Vec<Point2> {
    let side = |p: Point2| (b - a).cross(p - a);
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let (sp, sq) = (side(p), side(q));
        if sp >= 0.0 {
            out.push(p);
        }
        if (sp > 0.0 && sq < 0.0) || (sp < 0.0 && sq > 0.0) {
            out.push(p + (q - p) * (sp / (sp - sq)));
        }
    }
    out
}

fn sees_boundary(points: &[Point2], c: Point2, area: f64) -> bool {
    let n = points.len();
    (0..n).all(|i| (points[i] - c).cross(points[(i + 1) % n] - c) > 1e-10 * area)
}

/// Interior point that every sub-cell of a refined polygon is joined to.
///
/// The centroid when it sees the whole boundary, otherwise the centroid of
/// the polygon's kernel (for an L-shaped cell the plain centroid lies outside
/// the kernel and the resulting pieces would overlap).
pub fn refinement_center(points: &[Point2]) -> Result<Point2> {
    let g = ElementGeometry::from_points(points.to_vec());
    if sees_boundary(points, g.centroid, g.area) {
        return Ok(g.centroid);
    }
    let (mut lo, mut hi) = (points[0], points[0]);
    for p in points {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let mut kernel = vec![lo, Point2::new(hi.x, lo.y), hi, Point2::new(lo.x, hi.y)];
    let n = points.len();
    for i in 0..n {
        kernel = clip(&kernel, points[i], points[(i + 1) % n]);
        if kernel.len() < 3 {
            break;
        }
    }
    if kernel.len() >= 3 && signed_area(&kernel) > 1e-12 * g.area {
        let c = ElementGeometry::from_points(kernel).centroid;
        if sees_boundary(points, c, g.area) {
            return Ok(c);
        }
    }
    Err(Error::Element {
        cell: usize::MAX,
        reason: "cell is not star-shaped and cannot be refined".into(),
    })
}

/// Local indices of the vertices where the boundary turns.
fn corners(points: &[Point2]) -> Vec<usize> {
    let n = points.len();
    (0..n)
        .filter(|&k| !is_collinear_vertex(points[(k + n - 1) % n], points[k], points[(k + 1) % n]))
        .collect()
}

/// Splits every marked cell into one sub-cell per corner by joining a centre
/// point to one split point on each straight side.
///
/// A side that already carries hanging vertices is split at the one nearest
/// its midpoint; otherwise a new midpoint is created and also inserted into
/// the neighbour across, where it becomes a hanging vertex. Cells keep their
/// position in the cell list, with children replacing their parent in place.
pub fn refine_cells(mesh: &PolygonalMesh, marked: &[usize]) -> Result<PolygonalMesh> {
    let nc = mesh.n_cells();
    let mut is_marked = vec![false; nc];
    for &c in marked {
        if c >= nc {
            return Err(Error::InvalidParameter(format!(
                "marked cell {c} out of range"
            )));
        }
        is_marked[c] = true;
    }

    let mut vertices = mesh.vertices().to_vec();
    let mut edge_midpoint: HashMap<usize, usize> = HashMap::new();
    // a side is split at an existing local vertex or at the new midpoint of
    // the mesh edge leaving local vertex `k`
    enum Split {
        Existing(usize),
        Midpoint(usize),
    }
    let mut plans: HashMap<usize, (Vec<usize>, Vec<Split>, usize)> = HashMap::new();

    for c in (0..nc).filter(|&c| is_marked[c]) {
        let pts = mesh.cell_points(c);
        let n = pts.len();
        let cs = corners(&pts);
        let center = refinement_center(&pts).map_err(|_| Error::Element {
            cell: c,
            reason: "cell is not star-shaped and cannot be refined".into(),
        })?;
        let mut splits = Vec::with_capacity(cs.len());
        for (k, &a) in cs.iter().enumerate() {
            let b = cs[(k + 1) % cs.len()];
            let steps = (b + n - a) % n;
            let steps = if steps == 0 { n } else { steps };
            if steps == 1 {
                let e = mesh.cell_edges(c)[a].edge;
                edge_midpoint.entry(e).or_insert_with(|| {
                    let [p, q] = mesh.edges()[e].vertices;
                    vertices.push((mesh.vertex(p) + mesh.vertex(q)) * 0.5);
                    vertices.len() - 1
                });
                splits.push(Split::Midpoint(a));
            } else {
                let mid = (pts[a] + pts[b]) * 0.5;
                let best = (1..steps)
                    .map(|s| (a + s) % n)
                    .min_by(|&i, &j| pts[i].dist(mid).total_cmp(&pts[j].dist(mid)))
                    .unwrap();
                splits.push(Split::Existing(best));
            }
        }
        vertices.push(center);
        plans.insert(c, (cs, splits, vertices.len() - 1));
    }

    let domain_area = mesh.total_area();
    let mut cells = Vec::with_capacity(nc + 3 * marked.len());
    for c in 0..nc {
        let cell = mesh.cell(c);
        let n = cell.len();
        // boundary with new midpoints; `position[k]` = index of local vertex k
        let mut boundary = Vec::with_capacity(2 * n);
        let mut position = Vec::with_capacity(n);
        for (&v, oe) in cell.iter().zip(mesh.cell_edges(c)) {
            position.push(boundary.len());
            boundary.push(v);
            if let Some(&m) = edge_midpoint.get(&oe.edge) {
                boundary.push(m);
            }
        }
        let Some((cs, splits, center)) = plans.get(&c) else {
            cells.push(boundary);
            continue;
        };
        let split_pos: Vec<usize> = splits
            .iter()
            .map(|s| match *s {
                Split::Existing(k) => position[k],
                Split::Midpoint(k) => position[k] + 1,
            })
            .collect();
        let len = boundary.len();
        for k in 0..cs.len() {
            let from = split_pos[(k + cs.len() - 1) % cs.len()];
            let to = split_pos[k];
            let mut child = vec![*center];
            let mut i = from;
            loop {
                child.push(boundary[i]);
                if i == to {
                    break;
                }
                i = (i + 1) % len;
            }
            let pts: Vec<Point2> = child.iter().map(|&v| vertices[v]).collect();
            let area = signed_area(&pts);
            let limit = 1e-14 * domain_area;
            if area < limit {
                return Err(Error::RefinementDegenerate { area, limit });
            }
            cells.push(child);
        }
    }
    build_topology(vertices, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_nonconvex_mesh, generate_square_mesh, regularity_report, Rect};
    use approx::assert_relative_eq;

    fn euler_ok(m: &PolygonalMesh) {
        // planar, simply connected: V - E + F = 1 (without the outer face)
        assert_eq!(
            m.n_vertices() as i64 - m.n_edges() as i64 + m.n_cells() as i64,
            1
        );
    }

    #[test]
    fn single_square_into_four() {
        let m = generate_square_mesh(1, Rect::unit()).unwrap();
        let r = refine_cells(&m, &[0]).unwrap();
        assert_eq!(r.n_cells(), 4);
        assert_eq!(r.n_vertices(), 9);
        for c in 0..4 {
            assert_eq!(r.cell(c).len(), 4);
            assert!(r
                .cell(c)
                .iter()
                .any(|&v| r.vertex(v) == Point2::new(0.5, 0.5)));
            assert_relative_eq!(r.cell_area(c), 0.25, epsilon = 1e-15);
        }
        euler_ok(&r);
    }

    #[test]
    fn heptagon_into_seven() {
        let pts: Vec<Point2> = (0..7)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 7.0;
                Point2::new(t.cos(), t.sin())
            })
            .collect();
        let m = PolygonalMesh::new(pts, vec![(0..7).collect()]).unwrap();
        let r = refine_cells(&m, &[0]).unwrap();
        assert_eq!(r.n_cells(), 7);
        assert_relative_eq!(r.total_area(), m.total_area(), epsilon = 1e-14);
        euler_ok(&r);
    }

    #[test]
    fn neighbours_gain_hanging_vertices() {
        let m = generate_square_mesh(2, Rect::unit()).unwrap();
        let r = refine_cells(&m, &[0]).unwrap();
        assert_eq!(r.n_cells(), 7);
        // 9 old vertices + 4 midpoints + 1 centre
        assert_eq!(r.n_vertices(), 14);
        euler_ok(&r);
        assert_eq!(r.cell(4).len(), 5);
        assert_eq!(r.cell(5).len(), 5);
        assert_eq!(r.cell(6).len(), 4);
        assert_eq!(regularity_report(&r).hanging_nodes, 2);
        assert_relative_eq!(r.total_area(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn existing_hanging_vertex_is_reused() {
        let m = generate_square_mesh(2, Rect::unit()).unwrap();
        let r1 = refine_cells(&m, &[0]).unwrap();
        // cell 4 is the old bottom-right square with a hanging vertex at (0.5, 0.25)
        let nv = r1.n_vertices();
        let r2 = refine_cells(&r1, &[4]).unwrap();
        // three new midpoints and one centre, the hanging vertex is reused
        assert_eq!(r2.n_vertices(), nv + 4);
        assert_relative_eq!(r2.total_area(), 1.0, epsilon = 1e-14);
        euler_ok(&r2);
        assert_eq!(regularity_report(&r2).hanging_nodes, 2);
    }

    #[test]
    fn l_shaped_cells_refine_into_simple_pieces() {
        let m = generate_nonconvex_mesh(2).unwrap();
        let all: Vec<usize> = (0..m.n_cells()).collect();
        let r = refine_cells(&m, &all).unwrap();
        assert_eq!(r.n_cells(), 6 * m.n_cells());
        assert_relative_eq!(r.total_area(), 1.0, epsilon = 1e-13);
        euler_ok(&r);
        for c in 0..r.n_cells() {
            assert!(r.element_geometry(c).fan().is_ok());
        }
    }

    #[test]
    fn kernel_center_of_l_shape() {
        let pts: Vec<Point2> = [
            (0.0, 0.0),
            (0.25, 0.0),
            (0.25, 0.5),
            (0.75, 0.5),
            (0.75, 1.0),
            (0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y)| Point2::new(x, y))
        .collect();
        let c = refinement_center(&pts).unwrap();
        assert_relative_eq!(c.x, 0.125, epsilon = 1e-14);
        assert_relative_eq!(c.y, 0.75, epsilon = 1e-14);
    }

    #[test]
    fn repeated_local_refinement_stays_valid() {
        let mut m = generate_square_mesh(2, Rect::unit()).unwrap();
        for _ in 0..6 {
            // refine the cell containing the corner (1, 1)
            let c = (0..m.n_cells())
                .find(|&c| {
                    m.cell(c)
                        .iter()
                        .any(|&v| m.vertex(v) == Point2::new(1.0, 1.0))
                })
                .unwrap();
            let old = m.vertices().to_vec();
            m = refine_cells(&m, &[c]).unwrap();
            assert_eq!(&m.vertices()[..old.len()], &old[..]);
            euler_ok(&m);
        }
        assert_relative_eq!(m.total_area(), 1.0, epsilon = 1e-13);
        let rep = regularity_report(&m);
        assert!(rep.min_edge_ratio > 0.0 && rep.min_edge_ratio <= 1.0);
    }

    #[test]
    fn out_of_range_mark_rejected() {
        let m = generate_square_mesh(1, Rect::unit()).unwrap();
        assert!(refine_cells(&m, &[3]).is_err());
    }
}
