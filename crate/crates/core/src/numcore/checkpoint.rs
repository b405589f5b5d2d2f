//! Binary checkpoint format.
//!
//! ```text
//! magic     "STFC1"
//! version   u32
//! n_meta    u32, then n_meta × (key: str, value: str)
//! n_params  u32, then n_params × (name: str, ndim: u32, dims: ndim × u32, values: f64…)
//! ```
//!
//! `str` is a u32 byte length followed by UTF-8 bytes. All integers and floats
//! are little-endian.

use std::io::{Read, Write};

use super::{NumError, Tensor};

pub const MAGIC: &[u8; 5] = b"STFC1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub meta: Vec<(String, String)>,
    pub params: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), NumError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        write_u32(&mut w, self.meta.len())?;
        for (k, v) in &self.meta {
            write_str(&mut w, k)?;
            write_str(&mut w, v)?;
        }
        write_u32(&mut w, self.params.len())?;
        for (name, t) in &self.params {
            write_str(&mut w, name)?;
            write_u32(&mut w, 2)?;
            write_u32(&mut w, t.rows())?;
            write_u32(&mut w, t.cols())?;
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, NumError> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NumError::Format("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(NumError::Format(format!("unsupported version {version}")));
        }
        let n_meta = read_u32(&mut r)?;
        let mut meta = Vec::with_capacity(n_meta as usize);
        for _ in 0..n_meta {
            meta.push((read_str(&mut r)?, read_str(&mut r)?));
        }
        let n_params = read_u32(&mut r)?;
        let mut params = Vec::with_capacity(n_params as usize);
        for _ in 0..n_params {
            let name = read_str(&mut r)?;
            let ndim = read_u32(&mut r)?;
            let dims = (0..ndim)
                .map(|_| read_u32(&mut r).map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let (rows, cols) = match dims.as_slice() {
                [n] => (1, *n),
                [r, c] => (*r, *c),
                _ => return Err(NumError::Format(format!("{name}: unsupported rank {ndim}"))),
            };
            let mut data = Vec::with_capacity(rows * cols);
            let mut buf = [0u8; 8];
            for _ in 0..rows * cols {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            params.push((name, Tensor::new(rows, cols, data)?));
        }
        Ok(Self { meta, params })
    }
}

fn write_u32<W: Write>(w: &mut W, n: usize) -> Result<(), NumError> {
    let n = u32::try_from(n).map_err(|_| NumError::Format(format!("{n} exceeds u32")))?;
    w.write_all(&n.to_le_bytes())?;
    Ok(())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<(), NumError> {
    write_u32(w, s.len())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NumError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_str<R: Read>(r: &mut R) -> Result<String, NumError> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| NumError::Format(e.to_string()))
}
