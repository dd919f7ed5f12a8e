//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"CKIN1\0"
//! u32 dim, u32 cells[dim], u32 velocity nodes (0 for density fields)
//! f64 extent[dim], f64 time, f64 eps
//! f64 payload[..]
//! ```
//!
//! Kinetic payloads hold `f1` then `f2`, each space-major and
//! velocity-minor. Density payloads hold `ρ1`, `ρ2` and `S` in that order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::SpatialGrid;
use crate::kinetic::{KineticState, KineticSystem};
use crate::macroscopic::MacroState;

pub const MAGIC: &[u8; 6] = b"CKIN1\0";

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub dim: u32,
    pub cells: Vec<u32>,
    pub velocity_nodes: u32,
    pub extent: Vec<f64>,
    pub time: f64,
    pub eps: f64,
    pub payload: Vec<f64>,
}

impl Snapshot {
    pub fn kinetic(system: &KineticSystem, state: &KineticState) -> Self {
        let mut payload = state.f[0].clone();
        payload.extend_from_slice(&state.f[1]);
        Self::on_grid(system.grid(), system.velocities().len() as u32, state.time, state.eps, payload)
    }

    /// `ρ1`, `ρ2`, `S`; `eps` is recorded as 0.
    pub fn densities(grid: &SpatialGrid, state: &MacroState) -> Self {
        let mut payload = state.rho[0].clone();
        payload.extend_from_slice(&state.rho[1]);
        payload.extend_from_slice(&state.chem.s);
        Self::on_grid(grid, 0, state.time, 0.0, payload)
    }

    pub fn on_grid(grid: &SpatialGrid, velocity_nodes: u32, time: f64, eps: f64, payload: Vec<f64>) -> Self {
        Self {
            dim: grid.dim() as u32,
            cells: grid.cells().iter().map(|c| *c as u32).collect(),
            velocity_nodes,
            extent: grid.extent().to_vec(),
            time,
            eps,
            payload,
        }
    }

    /// Values per field: cells times velocity nodes (or cells alone).
    pub fn field_len(&self) -> usize {
        let n: usize = self.cells.iter().map(|c| *c as usize).product();
        n * (self.velocity_nodes as usize).max(1)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * self.payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.dim.to_le_bytes());
        for c in &self.cells {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend_from_slice(&self.velocity_nodes.to_le_bytes());
        for e in &self.extent {
            out.extend_from_slice(&e.to_le_bytes());
        }
        out.extend_from_slice(&self.time.to_le_bytes());
        out.extend_from_slice(&self.eps.to_le_bytes());
        for x in &self.payload {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic).map_err(|_| Error::Format("file too short for magic".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let dim = read_u32(&mut r)?;
        if dim != 1 && dim != 2 {
            return Err(Error::Format(format!("dimension {dim} is not 1 or 2")));
        }
        let cells = (0..dim).map(|_| read_u32(&mut r)).collect::<Result<Vec<_>>>()?;
        let velocity_nodes = read_u32(&mut r)?;
        let extent = (0..dim).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        let time = read_f64(&mut r)?;
        let eps = read_f64(&mut r)?;
        if r.len() % 8 != 0 {
            return Err(Error::Format("payload is not a whole number of f64 values".into()));
        }
        let payload: Vec<f64> = r
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let snap = Self {
            dim,
            cells,
            velocity_nodes,
            extent,
            time,
            eps,
            payload,
        };
        let len = snap.field_len();
        if len == 0 || snap.payload.len() % len != 0 {
            return Err(Error::Format(format!(
                "payload of {} values is not a multiple of the field size {len}",
                snap.payload.len()
            )));
        }
        Ok(snap)
    }
}

fn read_u32(r: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut &[u8]) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| Error::Format("truncated header".into()))?;
    Ok(f64::from_le_bytes(b))
}

pub fn write_snapshot(snapshot: &Snapshot, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&snapshot.to_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    Snapshot::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let grid = SpatialGrid::line(2.0, 128).unwrap();
        let s = Snapshot::on_grid(&grid, 16, 0.5, 0.25, vec![0.0; 2 * 128 * 16]);
        let b = s.to_bytes();
        assert_eq!(&b[..6], b"CKIN1\0");
        assert_eq!(u32::from_le_bytes(b[6..10].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[10..14].try_into().unwrap()), 128);
        assert_eq!(u32::from_le_bytes(b[14..18].try_into().unwrap()), 16);
        assert_eq!(f64::from_le_bytes(b[18..26].try_into().unwrap()), 2.0);
        assert_eq!(f64::from_le_bytes(b[26..34].try_into().unwrap()), 0.5);
        assert_eq!(f64::from_le_bytes(b[34..42].try_into().unwrap()), 0.25);
        assert_eq!(b.len() - 42, 2 * 128 * 16 * 8);
    }

    #[test]
    fn rejects_corrupt_input() {
        let grid = SpatialGrid::line(2.0, 8).unwrap();
        let b = Snapshot::on_grid(&grid, 0, 0.0, 0.0, vec![1.0; 8]).to_bytes();
        assert!(Snapshot::from_bytes(&b[..4]).is_err());
        assert!(Snapshot::from_bytes(&b[..b.len() - 3]).is_err());
        assert!(Snapshot::from_bytes(&b[..b.len() - 8]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(Snapshot::from_bytes(&bad).is_err());
        assert!(Snapshot::from_bytes(&b).is_ok());
    }
}
