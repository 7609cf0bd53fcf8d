//! Piecewise constant `κ⁻¹` rasters for the high-contrast benchmarks.
//!
//! Text format: a header line `nx ny`, then `ny` rows of `nx` positive
//! values. The first row is the bottom of the domain (smallest `y`).

use std::path::Path;
use std::sync::Arc;

use crate::assembly::InversePermeability;
use crate::error::{Error, Result};
use crate::mesh::{Point2, Rect};

#[derive(Clone, Debug, PartialEq)]
pub struct KappaRaster {
    pub nx: usize,
    pub ny: usize,
    /// Row-major from the bottom row up.
    pub values: Vec<f64>,
    pub domain: Rect,
}

impl KappaRaster {
    /// Raster over the unit square from `f(i, j)`, with `j = 0` the bottom row.
    pub fn from_fn(nx: usize, ny: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let values = (0..ny)
            .flat_map(|j| (0..nx).map(move |i| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        Self::new(nx, ny, values)
    }

    pub fn new(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Raster("grid must have at least one cell".into()));
        }
        if values.len() != nx * ny {
            return Err(Error::Raster(format!(
                "expected {} values, found {}",
                nx * ny,
                values.len()
            )));
        }
        if let Some((k, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::Raster(format!(
                "value {v} at row {}, column {} is not positive",
                k / nx,
                k % nx
            )));
        }
        Ok(Self {
            nx,
            ny,
            values,
            domain: Rect::unit(),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Raster("empty file".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Raster(format!("bad header '{header}'")))
            })
            .collect::<Result<_>>()?;
        let [nx, ny] = dims[..] else {
            return Err(Error::Raster(format!(
                "header must be 'nx ny', got '{header}'"
            )));
        };
        let mut values = Vec::with_capacity(nx * ny);
        let mut rows = 0;
        for (r, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|_| Error::Raster(format!("bad number '{t}' in row {r}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != nx {
                return Err(Error::Raster(format!(
                    "row {r} has {} values, expected {nx}",
                    row.len()
                )));
            }
            values.extend(row);
            rows += 1;
        }
        if rows != ny {
            return Err(Error::Raster(format!("found {rows} rows, expected {ny}")));
        }
        Self::new(nx, ny, values)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.nx, self.ny);
        for row in self.values.chunks(self.nx) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_text())?)
    }

    /// Raster value of the pixel containing `p`; points outside are clamped.
    pub fn value_at(&self, p: Point2) -> f64 {
        let d = &self.domain;
        let index = |t: f64, n: usize| ((t * n as f64).floor().max(0.0) as usize).min(n - 1);
        let i = index((p.x - d.x0) / (d.x1 - d.x0), self.nx);
        let j = index((p.y - d.y0) / (d.y1 - d.y0), self.ny);
        self.values[j * self.nx + i]
    }

    /// `κ⁻¹` sampled at element centroids.
    pub fn kappa_field(&self) -> InversePermeability {
        let r = self.clone();
        InversePermeability::Function(Arc::new(move |p| r.value_at(p)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_lookup() {
        let r = KappaRaster::parse("2 2\n1 1e6\n1e6 1\n").unwrap();
        assert_eq!(r.value_at(Point2::new(0.25, 0.25)), 1.0);
        assert_eq!(r.value_at(Point2::new(0.75, 0.25)), 1e6);
        assert_eq!(r.value_at(Point2::new(0.25, 0.75)), 1e6);
        assert_eq!(r.value_at(Point2::new(1.0, 1.0)), 1.0);
        let InversePermeability::Function(f) = r.kappa_field() else {
            panic!()
        };
        assert_eq!(1.0 / f(Point2::new(0.7, 0.1)), 1e-6);
        assert_eq!(KappaRaster::parse(&r.to_text()).unwrap(), r);
    }

    #[test]
    fn uniform_raster() {
        let r = KappaRaster::from_fn(3, 5, |_, _| 1.0).unwrap();
        assert!((0..20).all(|k| r.value_at(Point2::new(k as f64 / 19.0, 0.3)) == 1.0));
    }

    #[test]
    fn malformed_rasters() {
        for bad in [
            "",
            "2\n1 1\n",
            "2 2\n1 1\n1\n",
            "2 2\n1 1\n",
            "2 1\n1 0\n",
            "1 1\n-3\n",
            "1 1\nx\n",
            "1 1\n1\n1\n",
        ] {
            assert!(
                matches!(KappaRaster::parse(bad), Err(Error::Raster(_))),
                "{bad:?}"
            );
        }
        assert!(KappaRaster::parse("1 2\n1e6\n1\n").is_ok());
    }
}
