use std::collections::HashMap;

use super::{build_topology, Point2, PolygonalMesh};
use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn unit() -> Self {
        Self {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    fn map(&self, s: f64, t: f64) -> Point2 {
        Point2::new(
            self.x0 + s * (self.x1 - self.x0),
            self.y0 + t * (self.y1 - self.y0),
        )
    }
}

/// `n x n` congruent rectangles, numbered row by row from the bottom.
pub fn generate_square_mesh(n: usize, domain: Rect) -> Result<PolygonalMesh> {
    generate_rect_mesh(n, n, domain)
}

/// `nx x ny` congruent rectangles.
pub fn generate_rect_mesh(nx: usize, ny: usize, domain: Rect) -> Result<PolygonalMesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidParameter(
            "mesh needs at least one cell per side".into(),
        ));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(domain.map(i as f64 / nx as f64, j as f64 / ny as f64));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    build_topology(vertices, cells)
}

/// Non-convex mesh of the unit square with `2 n^2` L-shaped hexagons.
///
/// Every grid square `[i, i+1] x [j, j+1]` (in units of `1/n`) is cut by a
/// staircase: a vertical step at `x = i + b` on the lower half and at
/// `x = i + t` on the upper half, joined horizontally at `y = j + 1/2`.
/// The offsets alternate between 1/4 and 3/4 from row to row so that the two
/// halves are congruent and the cuts of neighbouring rows line up.
pub fn generate_nonconvex_mesh(n: usize) -> Result<PolygonalMesh> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "mesh needs at least one cell per side".into(),
        ));
    }
    let offset = |j: usize| if j.is_multiple_of(2) { 0.25 } else { 0.75 };
    // coordinates in quarter units keep the vertex lookup exact
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut vertices = Vec::new();
    let scale = 1.0 / (4 * n) as f64;
    let mut vid = |qx: usize, qy: usize| -> usize {
        *index.entry((qx, qy)).or_insert_with(|| {
            vertices.push(Point2::new(qx as f64 * scale, qy as f64 * scale));
            vertices.len() - 1
        })
    };
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        let b = (offset(j) * 4.0) as usize;
        let t = (offset(j + 1) * 4.0) as usize;
        for i in 0..n {
            let (x, y) = (4 * i, 4 * j);
            let left = [
                (x, y),
                (x + b, y),
                (x + b, y + 2),
                (x + t, y + 2),
                (x + t, y + 4),
                (x, y + 4),
            ];
            let right = [
                (x + b, y),
                (x + 4, y),
                (x + 4, y + 4),
                (x + t, y + 4),
                (x + t, y + 2),
                (x + b, y + 2),
            ];
            cells.push(left.iter().map(|&(a, c)| vid(a, c)).collect());
            cells.push(right.iter().map(|&(a, c)| vid(a, c)).collect());
        }
    }
    build_topology(vertices, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reflex_count(m: &PolygonalMesh, c: usize) -> usize {
        let p = m.cell_points(c);
        let n = p.len();
        (0..n)
            .filter(|&k| {
                let prev = p[(k + n - 1) % n];
                let next = p[(k + 1) % n];
                (p[k] - prev).cross(next - p[k]) < -1e-14
            })
            .count()
    }

    #[test]
    fn square_mesh_counts() {
        assert_eq!(generate_square_mesh(1, Rect::unit()).unwrap().n_cells(), 1);
        let m = generate_square_mesh(2, Rect::unit()).unwrap();
        assert_eq!(m.n_cells(), 4);
        assert_eq!(m.vertex(4), Point2::new(0.5, 0.5));
        assert_eq!(
            generate_square_mesh(128, Rect::unit()).unwrap().n_cells(),
            16384
        );
    }

    #[test]
    fn rect_mesh_tiles_domain() {
        let d = Rect {
            x0: -1.0,
            x1: 2.0,
            y0: 0.5,
            y1: 1.0,
        };
        let m = generate_rect_mesh(3, 5, d).unwrap();
        assert_eq!(m.n_cells(), 15);
        assert_relative_eq!(m.total_area(), d.area(), epsilon = 1e-14);
    }

    #[test]
    fn nonconvex_mesh_structure() {
        let m = generate_nonconvex_mesh(2).unwrap();
        assert_eq!(m.n_cells(), 8);
        for n in [1, 2, 3, 4] {
            let m = generate_nonconvex_mesh(n).unwrap();
            assert_eq!(m.n_cells(), 2 * n * n);
            assert_relative_eq!(m.total_area(), 1.0, epsilon = 1e-13);
            for c in 0..m.n_cells() {
                assert_eq!(m.cell(c).len(), 6);
                assert_eq!(reflex_count(&m, c), 1, "cell {c} of n={n}");
                assert_relative_eq!(m.cell_area(c), 0.5 / (n * n) as f64, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn nonconvex_mesh_has_no_hanging_vertices() {
        let m = generate_nonconvex_mesh(4).unwrap();
        let r = super::super::regularity_report(&m);
        assert_eq!(r.hanging_nodes, 0);
    }

    #[test]
    fn zero_cells_rejected() {
        assert!(generate_square_mesh(0, Rect::unit()).is_err());
        assert!(generate_nonconvex_mesh(0).is_err());
    }
}
