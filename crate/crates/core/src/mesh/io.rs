use std::fmt::Write as _;
use std::path::Path;

use serde_json::Value;

use super::{build_topology, Point2, PolygonalMesh};
use crate::error::{Error, Result};

/// Serializes vertices and cells as `{"vertices": [[x, y], ...], "cells": [[i, ...], ...]}`
/// with 17 significant digits.
pub fn mesh_to_json(mesh: &PolygonalMesh) -> String {
    let mut s = String::from("{\n  \"vertices\": [\n");
    for (i, p) in mesh.vertices().iter().enumerate() {
        let sep = if i + 1 < mesh.n_vertices() { "," } else { "" };
        let _ = writeln!(s, "    [{:.16e}, {:.16e}]{sep}", p.x, p.y);
    }
    s.push_str("  ],\n  \"cells\": [\n");
    for (c, cell) in mesh.cells().iter().enumerate() {
        let sep = if c + 1 < mesh.n_cells() { "," } else { "" };
        let ids: Vec<String> = cell.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "    [{}]{sep}", ids.join(", "));
    }
    s.push_str("  ]\n}\n");
    s
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::MeshFormat(msg.into())
}

pub fn mesh_from_json(text: &str) -> Result<PolygonalMesh> {
    let doc: Value = serde_json::from_str(text)?;
    let verts = doc
        .get("vertices")
        .and_then(Value::as_array)
        .ok_or_else(|| format_err("missing \"vertices\" array"))?;
    let vertices = verts
        .iter()
        .enumerate()
        .map(|(i, v)| match v.as_array().map(Vec::as_slice) {
            Some([x, y]) => match (x.as_f64(), y.as_f64()) {
                (Some(x), Some(y)) => Ok(Point2::new(x, y)),
                _ => Err(format_err(format!(
                    "vertex {i}: coordinates must be numbers"
                ))),
            },
            _ => Err(format_err(format!("vertex {i}: expected [x, y]"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let cells = doc
        .get("cells")
        .and_then(Value::as_array)
        .ok_or_else(|| format_err("missing \"cells\" array"))?
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            cell.as_array()
                .ok_or_else(|| format_err(format!("cell {c}: expected an index array")))?
                .iter()
                .map(|i| {
                    i.as_u64()
                        .map(|i| i as usize)
                        .ok_or_else(|| format_err(format!("cell {c}: bad vertex index {i}")))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    build_topology(vertices, cells)
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<PolygonalMesh> {
    mesh_from_json(&std::fs::read_to_string(path)?)
}

pub fn save_mesh(mesh: &PolygonalMesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, mesh_to_json(mesh))?;
    Ok(())
}
