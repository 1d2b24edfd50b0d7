//! Little-endian read/write helpers shared by the binary file formats.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub(crate) fn write_magic(w: &mut impl Write, magic: &[u8; 4]) -> Result<()> {
    w.write_all(magic)?;
    Ok(())
}

pub(crate) fn expect_magic(r: &mut impl Read, magic: &[u8; 4], format: &'static str) -> Result<()> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::format(format, "file truncated before magic"))?;
    if &buf != magic {
        return Err(Error::format(format, format!("bad magic {buf:?}")));
    }
    Ok(())
}

pub(crate) fn write_u16(w: &mut impl Write, v: u16) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_f32(w: &mut impl Write, v: f32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn read_u16(r: &mut impl Read, format: &'static str) -> Result<u16> {
    let mut buf = [0u8; 2];
    r.read_exact(&mut buf).map_err(|_| Error::format(format, "truncated u16"))?;
    Ok(u16::from_le_bytes(buf))
}

pub(crate) fn read_u32(r: &mut impl Read, format: &'static str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|_| Error::format(format, "truncated u32"))?;
    Ok(u32::from_le_bytes(buf))
}

pub(crate) fn read_f32(r: &mut impl Read, format: &'static str) -> Result<f32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|_| Error::format(format, "truncated f32"))?;
    Ok(f32::from_le_bytes(buf))
}

pub(crate) fn read_string(r: &mut impl Read, len: usize, format: &'static str) -> Result<String> {
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(|_| Error::format(format, "truncated string"))?;
    String::from_utf8(buf).map_err(|_| Error::format(format, "invalid UTF-8 id"))
}

/// Fails if any bytes remain; catches truncated-then-padded or concatenated files.
pub(crate) fn expect_eof(r: &mut impl Read, format: &'static str) -> Result<()> {
    let mut buf = [0u8; 1];
    match r.read(&mut buf)? {
        0 => Ok(()),
        _ => Err(Error::format(format, "trailing data after payload")),
    }
}
