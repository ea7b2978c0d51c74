use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use torus_geometry::{Grid, Vector};

use crate::{Section, SectionError};

const MAGIC: &[u8; 4] = b"SECT";

/// Flat on-disk layout: resolution header and row-major node values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectionFile {
    pub resolution: Vec<usize>,
    pub values: Vec<f64>,
}

impl From<&Section> for SectionFile {
    fn from(s: &Section) -> Self {
        let values = s.values().iter().flat_map(|v| v.as_slice().to_vec()).collect();
        SectionFile { resolution: s.grid().resolution().to_vec(), values }
    }
}

impl TryFrom<SectionFile> for Section {
    type Error = SectionError;

    fn try_from(file: SectionFile) -> Result<Self, SectionError> {
        let grid = Grid::new(&file.resolution).map_err(|e| SectionError::Format(e.to_string()))?;
        let d = grid.dim();
        if file.values.len() != grid.len() * d {
            return Err(SectionError::Length { expected: grid.len() * d, got: file.values.len() });
        }
        let values = file.values.chunks_exact(d).map(Vector::from_slice).collect();
        Section::from_values(grid, values)
    }
}

/// `SECT`, axis count and resolutions as little-endian `u64`, then values as
/// little-endian `f64`.
pub fn write_binary(s: &Section, mut w: impl Write) -> Result<(), SectionError> {
    w.write_all(MAGIC)?;
    let res = s.grid().resolution();
    w.write_all(&(res.len() as u64).to_le_bytes())?;
    for &n in res {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for v in s.values() {
        for x in v.as_slice() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary(mut r: impl Read) -> Result<Section, SectionError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SectionError::Format("bad magic".into()));
    }
    let mut word = [0u8; 8];
    let mut next_u64 = |r: &mut dyn Read| -> Result<u64, SectionError> {
        r.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let axes = next_u64(&mut r)? as usize;
    if axes == 0 || axes > torus_geometry::MAX_DIM {
        return Err(SectionError::Format(format!("{axes} axes")));
    }
    let resolution = (0..axes).map(|_| next_u64(&mut r).map(|n| n as usize)).collect::<Result<Vec<_>, _>>()?;
    let count: usize = resolution.iter().product::<usize>() * axes;
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    let values = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
    Section::try_from(SectionFile { resolution, values })
}
