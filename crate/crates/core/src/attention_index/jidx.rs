//! JIDX index format.
//!
//! Little-endian: magic `JIDX`, u32 version = 1, u32 d, u32 d' (= 4d), then
//! the two stores (`V_D` with d'-wide centroids, `V_T` with d-wide): u32 key
//! count; per key u32 attribute index, u32 centroid count, centroids float32
//! row-major. Finally the tuple assignment table: u32 entry count, per entry
//! u16 id length, id bytes, u32 key, u32 centroid ordinal. Build metadata is
//! in-memory only.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{AttentionIndex, IndexMetadata, VectorStore};
use crate::error::{Error, Result};
use crate::wire;

const MAGIC: &[u8; 4] = b"JIDX";
const VERSION: u32 = 1;
const FORMAT: &'static str = "JIDX";

pub fn save_index(index: &AttentionIndex, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_index(index, &mut w)?;
    w.flush()?;
    Ok(())
}

pub(crate) fn write_index(index: &AttentionIndex, w: &mut impl Write) -> Result<()> {
    wire::write_magic(w, MAGIC)?;
    wire::write_u32(w, VERSION)?;
    wire::write_u32(w, index.dim as u32)?;
    wire::write_u32(w, (4 * index.dim) as u32)?;
    for (store, width) in [(&index.v_doc, 4 * index.dim), (&index.v_tup, index.dim)] {
        wire::write_u32(w, store.centroids.len() as u32)?;
        for (key, centroids) in &store.centroids {
            wire::write_u32(w, *key as u32)?;
            wire::write_u32(w, centroids.len() as u32)?;
            for centroid in centroids {
                if centroid.len() != width {
                    return Err(Error::Dimension { expected: width, got: centroid.len() });
                }
                for v in centroid {
                    wire::write_f32(w, *v as f32)?;
                }
            }
        }
    }
    let entry_count: usize = index.assignments.values().map(Vec::len).sum();
    wire::write_u32(w, entry_count as u32)?;
    for (id, assigned) in &index.assignments {
        for (key, ordinal) in assigned {
            let bytes = id.as_bytes();
            if bytes.len() > u16::MAX as usize {
                return Err(Error::format(FORMAT, format!("tuple id too long ({} bytes)", bytes.len())));
            }
            wire::write_u16(w, bytes.len() as u16)?;
            w.write_all(bytes)?;
            wire::write_u32(w, *key as u32)?;
            wire::write_u32(w, *ordinal as u32)?;
        }
    }
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<AttentionIndex> {
    let mut r = BufReader::new(File::open(path)?);
    read_index(&mut r)
}

pub(crate) fn read_index(r: &mut impl Read) -> Result<AttentionIndex> {
    wire::expect_magic(r, MAGIC, FORMAT)?;
    let version = wire::read_u32(r, FORMAT)?;
    if version != VERSION {
        return Err(Error::format(FORMAT, format!("unsupported version {version}")));
    }
    let dim = wire::read_u32(r, FORMAT)? as usize;
    let flat_dim = wire::read_u32(r, FORMAT)? as usize;
    if flat_dim != 4 * dim {
        return Err(Error::format(FORMAT, format!("d' = {flat_dim} does not equal 4 x d = {}", 4 * dim)));
    }
    let mut read_store = |width: usize| -> Result<VectorStore> {
        let key_count = wire::read_u32(r, FORMAT)? as usize;
        let mut centroids = BTreeMap::new();
        for _ in 0..key_count {
            let key = wire::read_u32(r, FORMAT)? as usize;
            let count = wire::read_u32(r, FORMAT)? as usize;
            let mut list = Vec::with_capacity(count);
            for _ in 0..count {
                let mut centroid = Vec::with_capacity(width);
                for _ in 0..width {
                    centroid.push(f64::from(wire::read_f32(r, FORMAT)?));
                }
                list.push(centroid);
            }
            if centroids.insert(key, list).is_some() {
                return Err(Error::format(FORMAT, format!("duplicate store key {key}")));
            }
        }
        Ok(VectorStore { centroids })
    };
    let v_doc = read_store(flat_dim)?;
    let v_tup = read_store(dim)?;
    let entry_count = wire::read_u32(r, FORMAT)? as usize;
    let mut assignments: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    for _ in 0..entry_count {
        let id_len = wire::read_u16(r, FORMAT)? as usize;
        let id = wire::read_string(r, id_len, FORMAT)?;
        let key = wire::read_u32(r, FORMAT)? as usize;
        let ordinal = wire::read_u32(r, FORMAT)? as usize;
        assignments.entry(id).or_default().push((key, ordinal));
    }
    wire::expect_eof(r, FORMAT)?;
    Ok(AttentionIndex { dim, v_doc, v_tup, assignments, metadata: IndexMetadata::default() })
}
