//! Raw sample dumps. Layout: the 5 bytes `RCLB1`, then LEB128 varints d,
//! |V|, |E|; then per sample a varint count k followed by k varint open-edge
//! indices in ascending order.

use std::io::{Read, Write};

use super::McError;

pub const DUMP_MAGIC: &[u8; 5] = b"RCLB1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DumpHeader {
    pub dim: u64,
    pub n_vertices: u64,
    pub n_edges: u64,
}

fn put_varint<W: Write>(w: &mut W, mut v: u64) -> std::io::Result<()> {
    let mut buf = [0u8; 10];
    let mut k = 0;
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            buf[k] = byte;
            k += 1;
            break;
        }
        buf[k] = byte | 0x80;
        k += 1;
    }
    w.write_all(&buf[..k])
}

fn get_varint(bytes: &[u8], pos: &mut usize) -> Result<u64, McError> {
    let mut v = 0u64;
    let mut shift = 0;
    loop {
        let b = *bytes.get(*pos).ok_or_else(|| McError::Io("truncated varint".into()))?;
        *pos += 1;
        if shift >= 64 {
            return Err(McError::Io("varint overflow".into()));
        }
        v |= u64::from(b & 0x7f) << shift;
        if b & 0x80 == 0 {
            return Ok(v);
        }
        shift += 7;
    }
}

pub struct DumpWriter<W: Write> {
    inner: W,
    n_edges: u64,
}

impl<W: Write> DumpWriter<W> {
    pub fn new(mut inner: W, header: DumpHeader) -> Result<Self, McError> {
        let io = |e: std::io::Error| McError::Io(e.to_string());
        inner.write_all(DUMP_MAGIC).map_err(io)?;
        for v in [header.dim, header.n_vertices, header.n_edges] {
            put_varint(&mut inner, v).map_err(io)?;
        }
        Ok(Self { inner, n_edges: header.n_edges })
    }

    pub fn write_sample(&mut self, open: &[u32]) -> Result<(), McError> {
        let io = |e: std::io::Error| McError::Io(e.to_string());
        if open.windows(2).any(|w| w[0] >= w[1]) || open.last().is_some_and(|&e| u64::from(e) >= self.n_edges) {
            return Err(McError::Io("open edges must be ascending and in range".into()));
        }
        put_varint(&mut self.inner, open.len() as u64).map_err(io)?;
        for &e in open {
            put_varint(&mut self.inner, u64::from(e)).map_err(io)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, McError> {
        self.inner.flush().map_err(|e| McError::Io(e.to_string()))?;
        Ok(self.inner)
    }
}

pub fn read_dump<R: Read>(mut r: R) -> Result<(DumpHeader, Vec<Vec<u32>>), McError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| McError::Io(e.to_string()))?;
    if bytes.len() < 5 || &bytes[..5] != DUMP_MAGIC {
        return Err(McError::Io("bad magic".into()));
    }
    let mut pos = 5;
    let header = DumpHeader {
        dim: get_varint(&bytes, &mut pos)?,
        n_vertices: get_varint(&bytes, &mut pos)?,
        n_edges: get_varint(&bytes, &mut pos)?,
    };
    let mut samples = Vec::new();
    while pos < bytes.len() {
        let k = get_varint(&bytes, &mut pos)?;
        let mut s = Vec::with_capacity(k as usize);
        for _ in 0..k {
            let e = get_varint(&bytes, &mut pos)?;
            if e >= header.n_edges {
                return Err(McError::Io(format!("edge index {e} out of range")));
            }
            s.push(e as u32);
        }
        samples.push(s);
    }
    Ok((header, samples))
}
