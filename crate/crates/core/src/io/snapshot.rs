//! `LLMF` binary field snapshots.
//!
//! Layout (all little-endian):
//!
//! | offset | size | content                          |
//! |--------|------|----------------------------------|
//! | 0      | 4    | magic `b"LLMF"`                  |
//! | 4      | 4    | version, `u32` = 1               |
//! | 8      | 12   | `nx, ny, nz` as `u32`            |
//! | 20     | 24   | spacing `hx, hy, hz` as `f64`    |
//! | 44     | 8    | time, `f64`                      |
//! | 52     | ...  | `3 nx ny nz` values, `f64`       |
//!
//! The payload holds interior cells only, x fastest, with the three
//! components of a cell stored together.

use std::path::Path;

use thiserror::Error;

use crate::grid::{GridSpec, VectorField3};

pub const MAGIC: [u8; 4] = *b"LLMF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 52;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SnapshotError {
    #[error("not a field snapshot (bad magic)")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error("snapshot is {found} bytes, expected {expected}")]
    Length { expected: usize, found: usize },
    #[error("snapshot header describes an impossibly large field")]
    Overflow,
    #[error("snapshot shape {dims:?} / {spacing:?} does not match the grid")]
    Shape { dims: [u32; 3], spacing: [f64; 3] },
    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for SnapshotError {
    fn from(e: std::io::Error) -> Self {
        SnapshotError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub dims: [u32; 3],
    pub spacing: [f64; 3],
    pub time: f64,
    /// `3 nx ny nz` values, x fastest, component-interleaved.
    pub data: Vec<f64>,
}

/// Payload length in bytes for `dims`, or `None` on overflow.
pub fn payload_len(dims: [u32; 3]) -> Option<usize> {
    dims.iter().try_fold(24usize, |acc, &d| acc.checked_mul(d as usize))
}

impl FieldSnapshot {
    pub fn from_field(m: &VectorField3, time: f64) -> Self {
        let g = m.grid();
        let data = m.interior_values().into_iter().flatten().collect();
        Self { dims: g.n().map(|n| n as u32), spacing: g.h(), time, data }
    }

    /// Rebuilds the field on `grid`, which must have the snapshot's cell
    /// counts and spacing.
    pub fn to_field(&self, grid: GridSpec) -> Result<VectorField3, SnapshotError> {
        let shape_err = || SnapshotError::Shape { dims: self.dims, spacing: self.spacing };
        if grid.n().map(|n| n as u32) != self.dims || grid.h() != self.spacing {
            return Err(shape_err());
        }
        let values: Vec<[f64; 3]> = self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        VectorField3::from_interior(grid, &values).ok_or_else(shape_err)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for d in self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for h in self.spacing {
            out.extend_from_slice(&h.to_le_bytes());
        }
        out.extend_from_slice(&self.time.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, SnapshotError> {
        if bytes.len() < 8 {
            return Err(if bytes.len() >= 4 && bytes[..4] != MAGIC {
                SnapshotError::BadMagic
            } else {
                SnapshotError::Length { expected: HEADER_LEN, found: bytes.len() }
            });
        }
        if bytes[..4] != MAGIC {
            return Err(SnapshotError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(SnapshotError::Version(version));
        }
        if bytes.len() < HEADER_LEN {
            return Err(SnapshotError::Length { expected: HEADER_LEN, found: bytes.len() });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let dims = [u32_at(8), u32_at(12), u32_at(16)];
        let spacing = [f64_at(20), f64_at(28), f64_at(36)];
        let time = f64_at(44);
        let expected = payload_len(dims).and_then(|p| p.checked_add(HEADER_LEN)).ok_or(SnapshotError::Overflow)?;
        if bytes.len() != expected {
            return Err(SnapshotError::Length { expected, found: bytes.len() });
        }
        let data = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { dims, spacing, time, data })
    }

    /// Equality of every stored bit, so NaN payloads compare equal to themselves.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        self.dims == other.dims
            && bits(&self.spacing) == bits(&other.spacing)
            && self.time.to_bits() == other.time.to_bits()
            && bits(&self.data) == bits(&other.data)
    }
}

pub fn write_snapshot(snap: &FieldSnapshot, path: &Path) -> Result<(), SnapshotError> {
    super::output::write_atomic(path, &snap.encode())?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<FieldSnapshot, SnapshotError> {
    FieldSnapshot::decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FieldSnapshot {
        FieldSnapshot { dims: [2, 1, 1], spacing: [0.5, 1.0, 1.0], time: 0.25, data: vec![1.0, 0.0, -0.0, f64::NAN, 2.5, 1e-300] }
    }

    #[test]
    fn encode_decode_is_bitwise() {
        let s = sample();
        let bytes = s.encode();
        assert_eq!(bytes.len(), HEADER_LEN + 48);
        assert!(FieldSnapshot::decode(&bytes).unwrap().bitwise_eq(&s));
    }

    #[test]
    fn rejects_bad_headers() {
        let mut bytes = sample().encode();
        assert_eq!(FieldSnapshot::decode(&bytes[..bytes.len() - 1]), Err(SnapshotError::Length { expected: 100, found: 99 }));
        assert!(matches!(FieldSnapshot::decode(&bytes[..30]), Err(SnapshotError::Length { .. })));
        bytes[4] = 2;
        assert_eq!(FieldSnapshot::decode(&bytes), Err(SnapshotError::Version(2)));
        bytes[0] = b'X';
        assert_eq!(FieldSnapshot::decode(&bytes), Err(SnapshotError::BadMagic));
    }

    #[test]
    fn huge_dims_do_not_allocate() {
        let mut bytes = sample().encode();
        bytes[8..20].copy_from_slice(&[0xff; 12]);
        assert!(matches!(FieldSnapshot::decode(&bytes), Err(SnapshotError::Overflow | SnapshotError::Length { .. })));
    }
}
