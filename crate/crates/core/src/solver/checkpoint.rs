//! Checkpoint files.
//!
//! Layout (version 1):
//!
//! ```text
//! KHESS-CKPT 1\n
//! <one line of JSON metadata>\n
//! <binary payload: little-endian f64>
//! ```
//!
//! The metadata holds the problem, the grid description, the continuation
//! state and free-form extras. The payload holds the node radii of a radial
//! grid (if any) followed by the field values (NaN at unused lattice nodes).
//! Counts of both are recorded in the metadata.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::continuation::ContinuationReport;
use super::field::Field;
use super::grid::{AnnularGrid, CartesianGrid, RadialGrid};
use super::problem::{Problem, SolveConfig};

pub const MAGIC: &str = "KHESS-CKPT";
pub const VERSION: u32 = 1;

/// How to rebuild the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GridSpec {
    /// Radii are stored in the payload.
    Radial { nodes: usize },
    Cartesian { h: f64, outer_radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u32,
    pub problem: Problem,
    pub grid: GridSpec,
    pub values: usize,
    /// Index of the next continuation stage.
    pub next_stage: usize,
    pub config: Option<SolveConfig>,
    pub report: Option<ContinuationReport>,
    #[serde(default)]
    pub extra: serde_json::Value,
}

/// A loaded checkpoint.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub field: Field,
}

/// Writes `field` and continuation state to `path` (via a temporary file).
pub fn save(
    path: &Path,
    field: &Field,
    next_stage: usize,
    config: Option<&SolveConfig>,
    report: Option<&ContinuationReport>,
    extra: serde_json::Value,
) -> Result<()> {
    let (spec, radii): (GridSpec, &[f64]) = match field.grid.as_ref() {
        AnnularGrid::Radial(g) => (GridSpec::Radial { nodes: g.len() }, &g.radii),
        AnnularGrid::Cartesian(g) => (
            GridSpec::Cartesian {
                h: g.h,
                outer_radius: g.outer_radius,
            },
            &[],
        ),
    };
    let meta = CheckpointMeta {
        version: VERSION,
        problem: field.problem.clone(),
        grid: spec,
        values: field.values.len(),
        next_stage,
        config: config.cloned(),
        report: report.cloned(),
        extra,
    };
    let json = serde_json::to_string(&meta).map_err(|e| Error::Format(e.to_string()))?;
    let mut buf = Vec::with_capacity(64 + json.len() + 8 * (radii.len() + field.values.len()));
    writeln!(buf, "{MAGIC} {VERSION}")?;
    buf.extend_from_slice(json.as_bytes());
    buf.push(b'\n');
    for v in radii.iter().chain(&field.values) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &buf)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a checkpoint and rebuilds its grid and field.
pub fn load(path: &Path) -> Result<Checkpoint> {
    let file = fs::File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(Error::Format("not a checkpoint file".into()));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format("missing checkpoint version".into()))?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let mut json = String::new();
    reader.read_line(&mut json)?;
    let meta: CheckpointMeta = serde_json::from_str(json.trim_end()).map_err(|e| Error::Format(e.to_string()))?;
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    let radial_nodes = match meta.grid {
        GridSpec::Radial { nodes } => nodes,
        GridSpec::Cartesian { .. } => 0,
    };
    let expected = 8 * (radial_nodes + meta.values);
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let floats: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let problem = meta.problem.rebuild()?;
    let domain = problem.domain.clone();
    let grid = match meta.grid {
        GridSpec::Radial { nodes } => AnnularGrid::Radial(RadialGrid::from_radii(problem.n, floats[..nodes].to_vec())?),
        GridSpec::Cartesian { h, outer_radius } => {
            AnnularGrid::Cartesian(CartesianGrid::build(problem.n, h, outer_radius, &domain)?)
        }
    };
    let values = floats[radial_nodes..].to_vec();
    let field = Field::from_values(Arc::new(grid), problem, values)?;
    Ok(Checkpoint { meta, field })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedforms::ProblemParams;
    use crate::subsolution::ConvexDomain;

    #[test]
    fn radial_round_trip_is_bitwise() {
        let p = ProblemParams::new(3, 1, 1.0, 2.5, 0.013, 77.7).unwrap();
        let dom = ConvexDomain::ball(vec![0.0; 3], 1.0).unwrap();
        let prob = Problem::exterior(p, dom, None).unwrap();
        let grid = Arc::new(AnnularGrid::Radial(RadialGrid::geometric(3, 1.0, 77.7, 123).unwrap()));
        let field = Field::initial(grid, prob).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        save(&path, &field, 3, None, None, serde_json::json!({"note": "x"})).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back.meta.next_stage, 3);
        assert_eq!(back.field.problem, field.problem);
        for (a, b) in back.field.values.iter().zip(&field.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.ckpt");
        std::fs::write(&path, b"hello\n").unwrap();
        assert!(matches!(load(&path), Err(Error::Format(_))));
    }
}
