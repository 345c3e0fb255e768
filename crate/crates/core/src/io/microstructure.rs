//! Voxel microstructure files.
//!
//! A text header followed by phase indices in x1-fastest order:
//!
//! ```text
//! SDVOX 1
//! cells 64 64 1
//! lengths 1 1 1
//! encoding ascii
//! data
//! 0 0 1 ...
//! ```
//!
//! With `encoding binary` the line `data` is followed by exactly
//! `N1·N2·N3` raw bytes.

use std::io::Write;
use std::path::Path;

use super::{file_err, IoError};
use crate::grid::GridSpec;

pub const MAGIC: &str = "SDVOX";
pub const VERSION: u32 = 1;

/// Per-voxel phase indices on a periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid {
    pub grid: GridSpec,
    pub phases: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Encoding {
    #[default]
    Ascii,
    Binary,
}

impl PhaseGrid {
    pub fn new(grid: GridSpec, phases: Vec<u8>) -> Result<Self, IoError> {
        if phases.len() != grid.len() {
            return Err(IoError::Format(format!(
                "{} phase indices for a grid of {} voxels",
                phases.len(),
                grid.len()
            )));
        }
        Ok(PhaseGrid { grid, phases })
    }

    pub fn uniform(grid: GridSpec, phase: u8) -> Self {
        let n = grid.len();
        PhaseGrid { grid, phases: vec![phase; n] }
    }

    pub fn phase_count(&self) -> usize {
        self.phases.iter().copied().max().map_or(0, |m| m as usize + 1)
    }

    /// Voxel fraction of `phase`.
    pub fn fraction(&self, phase: u8) -> f64 {
        self.phases.iter().filter(|&&p| p == phase).count() as f64 / self.phases.len() as f64
    }

    /// Fails if some voxel refers to a phase beyond a table of `entries`.
    pub fn check_table(&self, entries: usize) -> Result<(), IoError> {
        match self.phases.iter().find(|&&p| p as usize >= entries) {
            Some(p) => Err(IoError::Format(format!(
                "phase index {p} has no entry in a table of {entries} phases"
            ))),
            None => Ok(()),
        }
    }

    pub fn to_bytes(&self, encoding: Encoding) -> Vec<u8> {
        let [n1, n2, n3] = self.grid.cells();
        let [l1, l2, l3] = self.grid.lengths();
        let enc = match encoding {
            Encoding::Ascii => "ascii",
            Encoding::Binary => "binary",
        };
        let mut out = format!(
            "{MAGIC} {VERSION}\ncells {n1} {n2} {n3}\nlengths {l1:?} {l2:?} {l3:?}\nencoding {enc}\ndata\n"
        )
        .into_bytes();
        match encoding {
            Encoding::Binary => out.extend_from_slice(&self.phases),
            Encoding::Ascii => {
                for row in self.phases.chunks(n1) {
                    let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
                    out.extend_from_slice(line.join(" ").as_bytes());
                    out.push(b'\n');
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IoError> {
        let bad = |m: String| IoError::Format(m);
        let mut pos = 0;
        let mut next_line = || -> Result<String, IoError> {
            let rest = &bytes[pos..];
            let end = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| bad("header ended before the data line".into()))?;
            pos += end + 1;
            std::str::from_utf8(&rest[..end])
                .map(|s| s.trim().to_string())
                .map_err(|_| bad("header is not valid UTF-8".into()))
        };
        let first = next_line()?;
        let mut it = first.split_whitespace();
        if it.next() != Some(MAGIC) {
            return Err(bad(format!("missing {MAGIC} tag")));
        }
        match it.next().map(str::parse::<u32>) {
            Some(Ok(VERSION)) => {}
            _ => return Err(bad(format!("unsupported version line '{first}'"))),
        }
        let (mut cells, mut lengths, mut encoding) = (None, None, Encoding::Ascii);
        loop {
            let line = next_line()?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut words = line.split_whitespace();
            let key = words.next().unwrap_or_default();
            let vals: Vec<&str> = words.collect();
            match key {
                "cells" => {
                    let v: Result<Vec<usize>, _> = vals.iter().map(|s| s.parse()).collect();
                    match v {
                        Ok(v) if v.len() == 3 => cells = Some([v[0], v[1], v[2]]),
                        _ => return Err(bad(format!("bad cells line '{line}'"))),
                    }
                }
                "lengths" => {
                    let v: Result<Vec<f64>, _> = vals.iter().map(|s| s.parse()).collect();
                    match v {
                        Ok(v) if v.len() == 3 => lengths = Some([v[0], v[1], v[2]]),
                        _ => return Err(bad(format!("bad lengths line '{line}'"))),
                    }
                }
                "encoding" => {
                    encoding = match vals.first().copied() {
                        Some("ascii") => Encoding::Ascii,
                        Some("binary") => Encoding::Binary,
                        _ => return Err(bad(format!("bad encoding line '{line}'"))),
                    }
                }
                "data" => break,
                other => return Err(bad(format!("unknown header key '{other}'"))),
            }
        }
        let cells = cells.ok_or_else(|| bad("missing cells line".into()))?;
        let lengths = lengths.unwrap_or([1.0; 3]);
        let grid = GridSpec::new(cells, lengths).map_err(|e| bad(e.to_string()))?;
        let body = &bytes[pos..];
        let phases = match encoding {
            Encoding::Binary => {
                if body.len() != grid.len() {
                    return Err(bad(format!(
                        "binary section holds {} bytes, expected {}",
                        body.len(),
                        grid.len()
                    )));
                }
                body.to_vec()
            }
            Encoding::Ascii => {
                let text = std::str::from_utf8(body).map_err(|_| bad("data is not valid UTF-8".into()))?;
                let v: Result<Vec<u8>, _> = text.split_whitespace().map(str::parse::<u8>).collect();
                let v = v.map_err(|e| bad(format!("bad phase index: {e}")))?;
                if v.len() != grid.len() {
                    return Err(bad(format!("{} phase indices, expected {}", v.len(), grid.len())));
                }
                v
            }
        };
        PhaseGrid::new(grid, phases)
    }
}

pub fn load_microstructure(path: &Path) -> Result<PhaseGrid, IoError> {
    let bytes = std::fs::read(path).map_err(file_err(path))?;
    PhaseGrid::from_bytes(&bytes)
}

pub fn write_microstructure(micro: &PhaseGrid, path: &Path, encoding: Encoding) -> Result<(), IoError> {
    let mut f = std::fs::File::create(path).map_err(file_err(path))?;
    f.write_all(&micro.to_bytes(encoding)).map_err(file_err(path))
}
