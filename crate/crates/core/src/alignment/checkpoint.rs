//! JPRJ checkpoint format.
//!
//! Little-endian: magic `JPRJ`, u32 version = 1, u32 d, then `W_doc`,
//! `b_doc`, `W_tup`, `b_tup` as float32 row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::ProjectionModel;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::wire;

const MAGIC: &[u8; 4] = b"JPRJ";
const VERSION: u32 = 1;
const FORMAT: &'static str = "JPRJ";

pub fn save_model(model: &ProjectionModel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub(crate) fn write_model(model: &ProjectionModel, w: &mut impl Write) -> Result<()> {
    wire::write_magic(w, MAGIC)?;
    wire::write_u32(w, VERSION)?;
    wire::write_u32(w, model.dim() as u32)?;
    for v in model
        .w_doc
        .data()
        .iter()
        .chain(&model.b_doc)
        .chain(model.w_tup.data())
        .chain(&model.b_tup)
    {
        wire::write_f32(w, *v as f32)?;
    }
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ProjectionModel> {
    let mut r = BufReader::new(File::open(path)?);
    read_model(&mut r)
}

pub(crate) fn read_model(r: &mut impl Read) -> Result<ProjectionModel> {
    wire::expect_magic(r, MAGIC, FORMAT)?;
    let version = wire::read_u32(r, FORMAT)?;
    if version != VERSION {
        return Err(Error::format(FORMAT, format!("unsupported version {version}")));
    }
    let d = wire::read_u32(r, FORMAT)? as usize;
    let mut tensor = |len: usize| -> Result<Vec<f64>> {
        (0..len).map(|_| wire::read_f32(r, FORMAT).map(f64::from)).collect()
    };
    let w_doc = Matrix::from_vec(d, d, tensor(d * d)?)?;
    let b_doc = tensor(d)?;
    let w_tup = Matrix::from_vec(d, d, tensor(d * d)?)?;
    let b_tup = tensor(d)?;
    wire::expect_eof(r, FORMAT)?;
    ProjectionModel::from_parts(w_doc, b_doc, w_tup, b_tup)
}

/// FNV-1a checksum over the serialized model, used to pair an attention
/// index with the projection model it was built from.
pub fn model_checksum(model: &ProjectionModel) -> u64 {
    let mut bytes = Vec::new();
    write_model(model, &mut bytes).expect("in-memory write cannot fail");
    crate::encoders::fnv1a64(&bytes)
}
