//! Terrain export for external plotting.
//!
//! Two files per terrain: a JSON descriptor and a binary heightfield. The
//! binary layout is little-endian: the ASCII magic `GBTF`, `u16` rows, `u16`
//! cols, then `rows * cols` `f32` heights in row-major order. Rows run along
//! `y` (from `y_min`), columns along `x` (from `x_min`), so each row is a
//! side-view profile.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Difficulty, Geometry, TerrainField, TerrainKind};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GBTF";
pub const HEADER_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainDescriptor {
    pub kind: TerrainKind,
    pub difficulty: Option<Difficulty>,
    pub seed: u64,
    pub near_edge_x: f64,
    pub far_edge_x: f64,
    pub deck_bounds: Option<(f64, f64)>,
    pub friction: f64,
    pub cell: f64,
    pub x_min: f64,
    pub y_min: f64,
    pub rows: usize,
    pub cols: usize,
    pub geometry: Geometry,
    /// File name of the binary heightfield, relative to the descriptor.
    pub heightfield: String,
}

pub fn descriptor(field: &TerrainField, heightfield: &str) -> TerrainDescriptor {
    let (rows, cols) = field.shape();
    let e = field.extent();
    TerrainDescriptor {
        kind: field.kind,
        difficulty: field.difficulty,
        seed: field.seed,
        near_edge_x: field.near_edge_x,
        far_edge_x: field.far_edge_x,
        deck_bounds: field.deck_bounds,
        friction: field.friction,
        cell: field.cell(),
        x_min: e.x_min,
        y_min: e.y_min,
        rows,
        cols,
        geometry: field.geometry,
        heightfield: heightfield.to_string(),
    }
}

/// Encode the binary heightfield.
pub fn encode_heightfield(field: &TerrainField) -> Result<Vec<u8>> {
    let (rows, cols) = field.shape();
    let (r, c) = match (u16::try_from(rows), u16::try_from(cols)) {
        (Ok(r), Ok(c)) => (r, c),
        _ => {
            return Err(Error::Domain(format!(
                "heightfield {rows}x{cols} exceeds the u16 header"
            )))
        }
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * rows * cols);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&r.to_le_bytes());
    out.extend_from_slice(&c.to_le_bytes());
    for &h in field.nodes() {
        out.extend_from_slice(&(h as f32).to_le_bytes());
    }
    Ok(out)
}

/// Decode a binary heightfield into `(rows, cols, heights)`.
pub fn decode_heightfield(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<f32>), String> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err("bad magic".into());
    }
    let rows = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
    let cols = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * rows * cols {
        return Err(format!(
            "payload of {} bytes does not match {rows}x{cols}",
            body.len()
        ));
    }
    let heights = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok((rows, cols, heights))
}

/// Write `<stem>.json` and `<stem>.gbtf` into `dir`; returns both paths.
pub fn export(field: &TerrainField, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bin_name = format!("{stem}.gbtf");
    let bin_path = dir.join(&bin_name);
    let json_path = dir.join(format!("{stem}.json"));
    fs::write(&bin_path, encode_heightfield(field)?).map_err(|e| Error::io(&bin_path, e))?;
    let desc = serde_json::to_string_pretty(&descriptor(field, &bin_name))?;
    fs::write(&json_path, desc).map_err(|e| Error::io(&json_path, e))?;
    Ok((json_path, bin_path))
}

/// Load an exported terrain back into a field (heights at `f32` precision).
pub fn import(json_path: &Path) -> Result<TerrainField> {
    let text = fs::read_to_string(json_path).map_err(|e| Error::io(json_path, e))?;
    let desc: TerrainDescriptor = serde_json::from_str(&text)?;
    let bin_path = json_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&desc.heightfield);
    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let (rows, cols, heights) =
        decode_heightfield(&bytes).map_err(|m| Error::format(&bin_path, m))?;
    if rows != desc.rows || cols != desc.cols {
        return Err(Error::format(&bin_path, "shape disagrees with descriptor"));
    }
    let x_zero = (-desc.x_min / desc.cell).round() as usize;
    let y_zero = (-desc.y_min / desc.cell).round() as usize;
    let mut field = TerrainField::from_nodes(
        heights.into_iter().map(f64::from).collect(),
        cols,
        rows,
        desc.cell,
        x_zero,
        y_zero,
        desc.kind,
    )?;
    field.difficulty = desc.difficulty;
    field.seed = desc.seed;
    field.near_edge_x = desc.near_edge_x;
    field.far_edge_x = desc.far_edge_x;
    field.deck_bounds = desc.deck_bounds;
    field.friction = desc.friction;
    field.geometry = desc.geometry;
    Ok(field)
}
