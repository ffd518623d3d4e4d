//! Field serialization: little-endian row-major `f64` payload plus a JSON
//! sidecar describing the lattice.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};

pub const FIELD_FORMAT: &str = "f64-le-row-major";

/// Contents of the JSON sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub format: String,
    pub data: String,
    pub dims: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub spacing: f64,
    pub components: usize,
    pub constrained: bool,
    pub constraint_tol: f64,
}

/// Writes `<stem>.bin` and `<stem>.json`; returns the sidecar path.
pub fn write_field(field: &GridField, stem: &Path) -> Result<PathBuf> {
    let bin = stem.with_extension("bin");
    let json = stem.with_extension("json");
    let mut bytes = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&bin, bytes)?;
    let grid = field.grid();
    let sidecar = FieldSidecar {
        format: FIELD_FORMAT.into(),
        data: bin.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        dims: grid.dims().to_vec(),
        lower: grid.lower().to_vec(),
        upper: grid.upper(),
        spacing: grid.spacing(),
        components: field.components(),
        constrained: field.is_constrained(),
        constraint_tol: field.constraint_tol(),
    };
    fs::write(&json, serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(json)
}

/// Reads a field from its sidecar path.
pub fn read_field(sidecar_path: &Path) -> Result<GridField> {
    let sidecar: FieldSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path)?)?;
    if sidecar.format != FIELD_FORMAT {
        return Err(Error::Shape(format!("unsupported field format {}", sidecar.format)));
    }
    let bin = sidecar_path.parent().unwrap_or(Path::new(".")).join(&sidecar.data);
    let bytes = fs::read(&bin)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Shape("field payload is not a whole number of f64 values".into()));
    }
    let values: Vec<f64> =
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    let grid = Grid::new(sidecar.dims, sidecar.lower, sidecar.spacing)?;
    let field = GridField::new(grid, sidecar.components, values)?;
    if sidecar.constrained {
        field.into_constrained(sidecar.constraint_tol)
    } else {
        Ok(field)
    }
}
