//! Versioned binary checkpoints for ensembles, bit-exact on round trip.

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

use super::{EnsembleModel, MvnnArchitecture, MvnnParams};

const MAGIC: &[u8; 8] = b"PEMVNN\0\0";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not an ensemble checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

pub fn save_ensemble<W: Write>(mut w: W, ensemble: &EnsembleModel) -> Result<(), CheckpointError> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    let arch = &ensemble.arch;
    w.write_u32::<LittleEndian>(arch.input_dim as u32)?;
    w.write_u32::<LittleEndian>(arch.hidden_widths.len() as u32)?;
    for &width in &arch.hidden_widths {
        w.write_u32::<LittleEndian>(width as u32)?;
    }
    for &t in &arch.cutoffs {
        w.write_u64::<LittleEndian>(t.to_bits())?;
    }
    for &c in &arch.capacity {
        w.write_u64::<LittleEndian>(c.to_bits())?;
    }
    w.write_u32::<LittleEndian>(ensemble.members.len() as u32)?;
    for member in &ensemble.members {
        for matrix in &member.weights {
            for &v in matrix.data() {
                w.write_u64::<LittleEndian>(v.to_bits())?;
            }
        }
        for bias in &member.biases {
            for &v in bias {
                w.write_u64::<LittleEndian>(v.to_bits())?;
            }
        }
    }
    Ok(())
}

pub fn load_ensemble<R: Read>(mut r: R) -> Result<EnsembleModel, CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let input_dim = r.read_u32::<LittleEndian>()? as usize;
    let num_hidden = r.read_u32::<LittleEndian>()? as usize;
    let mut hidden_widths = Vec::with_capacity(num_hidden);
    for _ in 0..num_hidden {
        hidden_widths.push(r.read_u32::<LittleEndian>()? as usize);
    }
    let mut cutoffs = Vec::with_capacity(num_hidden);
    for _ in 0..num_hidden {
        cutoffs.push(f64::from_bits(r.read_u64::<LittleEndian>()?));
    }
    let mut capacity = Vec::with_capacity(input_dim);
    for _ in 0..input_dim {
        capacity.push(f64::from_bits(r.read_u64::<LittleEndian>()?));
    }
    let arch = MvnnArchitecture::new(input_dim, hidden_widths, cutoffs, capacity)
        .map_err(|e| CheckpointError::Malformed(e.to_string()))?;

    let num_members = r.read_u32::<LittleEndian>()? as usize;
    let mut members = Vec::with_capacity(num_members);
    for _ in 0..num_members {
        let mut params = MvnnParams::zeros(&arch);
        for matrix in &mut params.weights {
            for v in matrix.data_mut() {
                *v = f64::from_bits(r.read_u64::<LittleEndian>()?);
            }
        }
        for bias in &mut params.biases {
            for v in bias.iter_mut() {
                *v = f64::from_bits(r.read_u64::<LittleEndian>()?);
            }
        }
        members.push(params);
    }
    Ok(EnsembleModel { arch, members })
}

pub fn save_ensemble_to_path<P: AsRef<Path>>(
    path: P,
    ensemble: &EnsembleModel,
) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    save_ensemble(&mut w, ensemble)?;
    w.flush()?;
    Ok(())
}

pub fn load_ensemble_from_path<P: AsRef<Path>>(path: P) -> Result<EnsembleModel, CheckpointError> {
    load_ensemble(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let arch = MvnnArchitecture::default_for(25);
        let ensemble = EnsembleModel::initialize(arch, 3, 9);
        let mut buf = Vec::new();
        save_ensemble(&mut buf, &ensemble).unwrap();
        let back = load_ensemble(buf.as_slice()).unwrap();
        assert_eq!(ensemble.arch, back.arch);
        assert_eq!(ensemble.members.len(), back.members.len());
        for (a, b) in ensemble.members.iter().zip(&back.members) {
            for (x, y) in a.values().zip(b.values()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        // Serialized bytes are stable too.
        let mut buf2 = Vec::new();
        save_ensemble(&mut buf2, &back).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(
            load_ensemble(&b"not a checkpoint"[..]),
            Err(CheckpointError::BadMagic)
        ));
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&99u32.to_le_bytes());
        assert!(matches!(
            load_ensemble(buf.as_slice()),
            Err(CheckpointError::UnsupportedVersion(99))
        ));
    }
}
