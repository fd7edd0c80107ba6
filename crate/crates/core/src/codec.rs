//! Little-endian binary framing shared by every on-disk format.
//!
//! Each file starts with a 4-byte magic and a format-version byte. Tensors
//! are written as `ndim: u8`, `dims: u32 × ndim`, then `f32` values.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const FORMAT_VERSION: u8 = 1;

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 4]) -> Self {
        let mut buf = Vec::with_capacity(1024);
        buf.extend_from_slice(magic);
        buf.push(FORMAT_VERSION);
        Self { buf }
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32s(&mut self, values: &[f32]) {
        self.buf.reserve(values.len() * 4);
        for v in values {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn str(&mut self, s: &str) {
        self.u16(s.len() as u16);
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn shape(&mut self, shape: &[usize]) {
        self.u8(shape.len() as u8);
        for &d in shape {
            self.u32(d as u32);
        }
    }

    pub fn tensor(&mut self, t: &Tensor) {
        self.shape(t.shape());
        self.f32s(t.data());
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    file: PathBuf,
}

impl<'a> Reader<'a> {
    /// Checks magic and version, positioning the reader after them.
    pub fn open(buf: &'a [u8], magic: &[u8; 4], file: impl Into<PathBuf>) -> Result<Self> {
        let mut r = Self {
            buf,
            pos: 0,
            file: file.into(),
        };
        let found = r.take(4)?;
        if found != magic {
            return Err(r.error(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(found),
                String::from_utf8_lossy(magic)
            )));
        }
        let version = r.u8()?;
        if version != FORMAT_VERSION {
            return Err(r.error(format!(
                "format version {version} not supported (expected {FORMAT_VERSION})"
            )));
        }
        Ok(r)
    }

    pub fn error(&self, reason: impl Into<String>) -> Error {
        Error::format(
            &self.file,
            format!("offset {}: {}", self.pos, reason.into()),
        )
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.error(format!("truncated: need {n} more bytes")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(
            n.checked_mul(4)
                .ok_or_else(|| self.error("length overflow"))?,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.u16()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.error("invalid utf-8 string"))
    }

    pub fn shape(&mut self) -> Result<Vec<usize>> {
        let n = self.u8()? as usize;
        (0..n).map(|_| self.u32().map(|d| d as usize)).collect()
    }

    pub fn tensor(&mut self) -> Result<Tensor> {
        let shape = self.shape()?;
        let n = shape.iter().product();
        let data = self.f32s(n)?;
        Tensor::new(shape, data).map_err(|e| self.error(e.to_string()))
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        self.take(n)
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.error(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_magic_version_and_truncation() {
        let mut w = Writer::new(b"TEST");
        w.u32(7);
        let bytes = w.finish();
        assert!(Reader::open(&bytes, b"XXXX", "f").is_err());
        let mut bad = bytes.clone();
        bad[4] = 99;
        assert!(Reader::open(&bad, b"TEST", "f").is_err());
        let mut r = Reader::open(&bytes[..7], b"TEST", "f").unwrap();
        assert!(r.u32().is_err());
    }
}
