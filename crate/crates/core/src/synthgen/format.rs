//! SCF1 grid file format.
//!
//! Layout: 4-byte magic `SCF1`, u32 little-endian manifest length, UTF-8 JSON
//! manifest, then the embedding payload as little-endian f32 in row-major
//! (content, style, view, dim) order. Also the import path for externally
//! produced embedding grids (`provenance: "imported"`).

use super::{EmbeddingGrid, Provenance};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const GRID_MAGIC: &[u8; 4] = b"SCF1";
pub const GRID_VERSION: u32 = 1;

/// JSON header of an SCF1 file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridManifest {
    pub version: u32,
    pub n_contents: usize,
    pub n_styles: usize,
    pub n_views: usize,
    pub embed_dim: usize,
    pub noise_sigma: f64,
    pub provenance: String,
    pub seed: u64,
}

/// Serialize a grid to SCF1 bytes.
pub fn write_grid_bytes(grid: &EmbeddingGrid) -> Vec<u8> {
    let manifest = GridManifest {
        version: GRID_VERSION,
        n_contents: grid.n_contents,
        n_styles: grid.n_styles,
        n_views: grid.n_views,
        embed_dim: grid.embed_dim,
        noise_sigma: grid.noise_sigma,
        provenance: grid.provenance.as_str().to_string(),
        seed: grid.seed,
    };
    let manifest_json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(8 + manifest_json.len() + grid.payload().len() * 4);
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&(manifest_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&manifest_json);
    for v in grid.payload() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_grid(grid: &EmbeddingGrid, path: &Path) -> Result<()> {
    fs::write(path, write_grid_bytes(grid))?;
    Ok(())
}

/// Parse and validate SCF1 bytes. Every failure names the offending field.
pub fn read_grid_bytes(bytes: &[u8]) -> Result<EmbeddingGrid> {
    if bytes.len() < 4 || &bytes[..4] != GRID_MAGIC {
        return Err(Error::format(
            "magic",
            format!("expected {:?} at offset 0", std::str::from_utf8(GRID_MAGIC).unwrap()),
        ));
    }
    if bytes.len() < 8 {
        return Err(Error::format("manifest_len", "file truncated before manifest length"));
    }
    let manifest_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if bytes.len() < 8 + manifest_len {
        return Err(Error::format(
            "manifest_len",
            format!(
                "manifest length {manifest_len} exceeds remaining {} bytes",
                bytes.len() - 8
            ),
        ));
    }
    let manifest: GridManifest = serde_json::from_slice(&bytes[8..8 + manifest_len])
        .map_err(|e| Error::format("manifest", e.to_string()))?;
    if manifest.version != GRID_VERSION {
        return Err(Error::format(
            "version",
            format!("unsupported version {}, expected {GRID_VERSION}", manifest.version),
        ));
    }
    for (field, value) in [
        ("n_contents", manifest.n_contents),
        ("n_styles", manifest.n_styles),
        ("n_views", manifest.n_views),
        ("embed_dim", manifest.embed_dim),
    ] {
        if value == 0 {
            return Err(Error::format(field, "must be >= 1"));
        }
    }
    if !(manifest.noise_sigma >= 0.0) || !manifest.noise_sigma.is_finite() {
        return Err(Error::format(
            "noise_sigma",
            format!("must be finite and >= 0, got {}", manifest.noise_sigma),
        ));
    }
    let provenance = Provenance::parse(&manifest.provenance)?;

    let payload_bytes = &bytes[8 + manifest_len..];
    let expected_floats =
        manifest.n_contents * manifest.n_styles * manifest.n_views * manifest.embed_dim;
    if payload_bytes.len() != expected_floats * 4 {
        return Err(Error::format(
            "payload",
            format!(
                "expected {} bytes ({expected_floats} floats) for manifest dims, found {}",
                expected_floats * 4,
                payload_bytes.len()
            ),
        ));
    }
    let mut z = Vec::with_capacity(expected_floats);
    for chunk in payload_bytes.chunks_exact(4) {
        z.push(f32::from_le_bytes(chunk.try_into().unwrap()));
    }
    EmbeddingGrid::from_parts(
        z,
        manifest.n_contents,
        manifest.n_styles,
        manifest.n_views,
        manifest.embed_dim,
        manifest.noise_sigma,
        provenance,
        manifest.seed,
    )
}

pub fn read_grid(path: &Path) -> Result<EmbeddingGrid> {
    let bytes = fs::read(path)?;
    read_grid_bytes(&bytes)
}
