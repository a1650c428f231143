//! Binary eigenvector cache: little-endian header (magic, N, count), the
//! eigenvalues, then interleaved re/im amplitudes per vector.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::engine::StateVector;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"VQPHEIG1";

pub fn write_eigen_cache(path: &Path, eigenvalues: &[f64], states: &[StateVector]) -> Result<()> {
    if eigenvalues.len() != states.len() {
        return Err(Error::DimensionMismatch { expected: eigenvalues.len(), actual: states.len() });
    }
    let qubits = states.first().map_or(0, StateVector::qubits);
    if states.iter().any(|s| s.qubits() != qubits) {
        return Err(Error::InvalidInput("cached states differ in qubit count".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(qubits as u64).to_le_bytes())?;
    w.write_all(&(states.len() as u64).to_le_bytes())?;
    for e in eigenvalues {
        w.write_all(&e.to_le_bytes())?;
    }
    for s in states {
        for a in s.amplitudes() {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_eigen_cache(path: &Path) -> Result<(Vec<f64>, Vec<StateVector>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::InvalidInput(format!("{} is not an eigenvector cache", path.display())));
    }
    let qubits = read_u64(&mut r)? as usize;
    let count = read_u64(&mut r)? as usize;
    if qubits > crate::lattice::MAX_SITES {
        return Err(Error::InvalidInput(format!("cache header claims {qubits} qubits")));
    }
    let eigenvalues = (0..count).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let mut states = Vec::with_capacity(count);
    for _ in 0..count {
        let amps = (0..1usize << qubits)
            .map(|_| Ok(Complex64::new(read_f64(&mut r)?, read_f64(&mut r)?)))
            .collect::<Result<Vec<_>>>()?;
        states.push(StateVector::from_amplitudes(qubits, amps)?);
    }
    Ok((eigenvalues, states))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
