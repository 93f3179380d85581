//! Binary model container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "SSDL"            4 bytes
//! version           u32
//! D, A, W, L_A, L_D each as: rows u64, cols u64, rows*cols f64 (row-major)
//! method            u32 (0 = SS-DG-DL, 1 = DG-DL)
//! n_train           u64
//! trace length      u64, then that many f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::prelude::*;

use super::{Method, TrainedModel};
use crate::error::{Error, Result};
use crate::model::{Dictionary, LinearClassifier, SparseCodes};

pub const CONTAINER_MAGIC: [u8; 4] = *b"SSDL";
pub const CONTAINER_VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> Error {
    Error::Container(e.to_string())
}

fn write_matrix<W: Write>(out: &mut W, m: ArrayView2<f64>) -> std::io::Result<()> {
    out.write_all(&(m.nrows() as u64).to_le_bytes())?;
    out.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for v in m.iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf).map_err(io_err)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf).map_err(io_err)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64s<R: Read>(input: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![
        0u8;
        count
            .checked_mul(8)
            .ok_or_else(|| Error::Container("size overflow".into()))?
    ];
    input.read_exact(&mut bytes).map_err(io_err)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn read_matrix<R: Read>(input: &mut R) -> Result<Array2<f64>> {
    let rows = read_u64(input)? as usize;
    let cols = read_u64(input)? as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Container(format!("matrix {rows}x{cols} too large")))?;
    let data = read_f64s(input, count)?;
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Container(e.to_string()))
}

impl TrainedModel {
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        let mut body = || -> std::io::Result<()> {
            out.write_all(&CONTAINER_MAGIC)?;
            out.write_all(&CONTAINER_VERSION.to_le_bytes())?;
            write_matrix(out, self.dictionary.atoms())?;
            write_matrix(out, self.codes.matrix())?;
            write_matrix(out, self.classifier.weights())?;
            write_matrix(out, self.l_a.view())?;
            write_matrix(out, self.l_d.view())?;
            let tag: u32 = match self.method {
                Method::SsDgDl => 0,
                Method::DgDl => 1,
            };
            out.write_all(&tag.to_le_bytes())?;
            out.write_all(&(self.codes.n_train() as u64).to_le_bytes())?;
            out.write_all(&(self.objective_trace.len() as u64).to_le_bytes())?;
            for v in &self.objective_trace {
                out.write_all(&v.to_le_bytes())?;
            }
            Ok(())
        };
        body().map_err(io_err)
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic).map_err(io_err)?;
        if magic != CONTAINER_MAGIC {
            return Err(Error::Container(format!("bad magic {magic:?}")));
        }
        let version = read_u32(input)?;
        if version != CONTAINER_VERSION {
            return Err(Error::Container(format!("unsupported version {version}")));
        }
        let d = read_matrix(input)?;
        let a = read_matrix(input)?;
        let w = read_matrix(input)?;
        let l_a = read_matrix(input)?;
        let l_d = read_matrix(input)?;
        let method = match read_u32(input)? {
            0 => Method::SsDgDl,
            1 => Method::DgDl,
            other => return Err(Error::Container(format!("unknown method tag {other}"))),
        };
        let n_train = read_u64(input)? as usize;
        let trace_len = read_u64(input)? as usize;
        let objective_trace = read_f64s(input, trace_len)?;

        let p = d.ncols();
        let n_samples = a.ncols();
        if a.nrows() != p
            || w.ncols() != p
            || l_a.dim() != (n_samples, n_samples)
            || l_d.dim() != (d.nrows(), d.nrows())
        {
            return Err(Error::Container("inconsistent matrix shapes".into()));
        }
        Ok(Self {
            method,
            dictionary: Dictionary::new(d)?,
            codes: SparseCodes::new(a, n_train)?,
            classifier: LinearClassifier::new(w)?,
            l_a,
            l_d,
            objective_trace,
            rounds: Vec::new(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_to(&mut out)?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file))
    }
}
