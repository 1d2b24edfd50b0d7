//! JEMB embedding transport format.
//!
//! Little-endian: magic `JEMB`, u32 version = 1, u32 d, u32 record count;
//! per record: u16 id length, UTF-8 id bytes, u32 row count, then
//! `rows x d` float32 values row-major. Record order is sorted by id.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::wire;

const MAGIC: &[u8; 4] = b"JEMB";
const VERSION: u32 = 1;
const FORMAT: &'static str = "JEMB";

/// Write an id -> matrix map. Every matrix must have `d` columns.
pub fn write_embedding_file(
    map: &BTreeMap<String, Matrix>,
    d: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_embeddings(map, d, &mut w)?;
    w.flush()?;
    Ok(())
}

pub(crate) fn write_embeddings(
    map: &BTreeMap<String, Matrix>,
    d: usize,
    w: &mut impl Write,
) -> Result<()> {
    wire::write_magic(w, MAGIC)?;
    wire::write_u32(w, VERSION)?;
    wire::write_u32(w, d as u32)?;
    wire::write_u32(w, map.len() as u32)?;
    for (id, matrix) in map {
        if matrix.cols() != d {
            return Err(Error::Dimension { expected: d, got: matrix.cols() });
        }
        let id_bytes = id.as_bytes();
        if id_bytes.len() > u16::MAX as usize {
            return Err(Error::format(FORMAT, format!("id too long ({} bytes)", id_bytes.len())));
        }
        wire::write_u16(w, id_bytes.len() as u16)?;
        w.write_all(id_bytes)?;
        wire::write_u32(w, matrix.rows() as u32)?;
        for v in matrix.data() {
            wire::write_f32(w, *v as f32)?;
        }
    }
    Ok(())
}

/// Read a JEMB file into `(d, id -> matrix)`.
pub fn read_embedding_file(path: impl AsRef<Path>) -> Result<(usize, BTreeMap<String, Matrix>)> {
    let mut r = BufReader::new(File::open(path)?);
    read_embeddings(&mut r)
}

pub(crate) fn read_embeddings(r: &mut impl Read) -> Result<(usize, BTreeMap<String, Matrix>)> {
    wire::expect_magic(r, MAGIC, FORMAT)?;
    let version = wire::read_u32(r, FORMAT)?;
    if version != VERSION {
        return Err(Error::format(FORMAT, format!("unsupported version {version}")));
    }
    let d = wire::read_u32(r, FORMAT)? as usize;
    let count = wire::read_u32(r, FORMAT)? as usize;
    let mut map = BTreeMap::new();
    for _ in 0..count {
        let id_len = wire::read_u16(r, FORMAT)? as usize;
        let id = wire::read_string(r, id_len, FORMAT)?;
        let rows = wire::read_u32(r, FORMAT)? as usize;
        let mut data = Vec::with_capacity(rows * d);
        for _ in 0..rows * d {
            data.push(f64::from(wire::read_f32(r, FORMAT)?));
        }
        let matrix = Matrix::from_vec(rows, d, data)?;
        if map.insert(id.clone(), matrix).is_some() {
            return Err(Error::format(FORMAT, format!("duplicate record id {id:?}")));
        }
    }
    wire::expect_eof(r, FORMAT)?;
    Ok((d, map))
}
