//! Little-endian binary containers with a magic tag, a format version and a
//! trailing SHA-256 of everything before it. Truncated or corrupted files are
//! rejected before any field is decoded.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Result, VhnError};

pub const DIGEST_LEN: usize = 32;

pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 8], version: u32) -> Self {
        let mut w = Writer { buf: Vec::new() };
        w.buf.extend_from_slice(magic);
        w.u32(version);
        w
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

    pub fn f64s(&mut self, vs: &[f64]) {
        self.buf.reserve(vs.len() * 8);
        for v in vs {
            self.f64(*v);
        }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.buf.extend_from_slice(b);
    }

    pub fn str(&mut self, s: &str) {
        self.bytes(s.as_bytes());
    }

    pub fn finish(mut self) -> Vec<u8> {
        let digest = Sha256::digest(&self.buf);
        self.buf.extend_from_slice(&digest);
        self.buf
    }

    /// Write through a temporary sibling and rename, so readers never see a
    /// half-written file.
    pub fn write_to(self, path: &Path) -> Result<()> {
        let bytes = self.finish();
        write_atomic(path, &bytes)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| VhnError::io(dir, e))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| VhnError::io(path, e))?;
    fs::rename(&tmp, path).map_err(|e| VhnError::io(path, e))
}

#[derive(Debug)]
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    /// Check the digest, magic and version and position after the header.
    pub fn open(data: &'a [u8], path: &'a Path, magic: &[u8; 8], version: u32) -> Result<Self> {
        if data.len() < magic.len() + 4 + DIGEST_LEN {
            return Err(VhnError::format(path, "file is truncated"));
        }
        let (body, digest) = data.split_at(data.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(VhnError::format(path, "checksum mismatch"));
        }
        if &body[..8] != magic {
            return Err(VhnError::format(path, "wrong file type"));
        }
        let mut r = Reader { data: body, pos: 8, path };
        let found = r.u32()?;
        if found != version {
            return Err(VhnError::format(path, format!("unsupported version {found} (expected {version})")));
        }
        Ok(r)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(VhnError::format(self.path, "unexpected end of data"));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| VhnError::format(self.path, "length overflows"))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| VhnError::format(self.path, "length overflows"))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.usize()?;
        self.take(n)
    }

    pub fn str(&mut self) -> Result<String> {
        let b = self.bytes()?;
        String::from_utf8(b.to_vec()).map_err(|_| VhnError::format(self.path, "invalid UTF-8 string"))
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(VhnError::format(self.path, "trailing bytes"));
        }
        Ok(())
    }
}

/// Lowercase hex SHA-256 of `parts`, each length-prefixed so that
/// concatenation is unambiguous.
pub fn content_hash(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAGIC: &[u8; 8] = b"VHNTEST\0";

    fn sample() -> Vec<u8> {
        let mut w = Writer::new(MAGIC, 3);
        w.u64(42);
        w.str("hello");
        w.f64s(&[1.5, -0.0, f64::MIN_POSITIVE]);
        w.finish()
    }

    #[test]
    fn round_trip() {
        let data = sample();
        let p = Path::new("x");
        let mut r = Reader::open(&data, p, MAGIC, 3).unwrap();
        assert_eq!(r.u64().unwrap(), 42);
        assert_eq!(r.str().unwrap(), "hello");
        let v = r.f64s(3).unwrap();
        assert_eq!(v[2], f64::MIN_POSITIVE);
        assert!(v[1].is_sign_negative());
        r.finish().unwrap();
    }

    #[test]
    fn corruption_and_version_are_detected() {
        let p = Path::new("x");
        let mut data = sample();
        assert!(Reader::open(&data, p, MAGIC, 4).is_err());
        assert!(Reader::open(&data, p, b"OTHER\0\0\0", 3).is_err());
        data[14] ^= 1;
        assert!(Reader::open(&data, p, MAGIC, 3).unwrap_err().to_string().contains("checksum"));
        assert!(Reader::open(&data[..20], p, MAGIC, 3).is_err());
    }

    #[test]
    fn content_hash_separates_parts() {
        assert_ne!(content_hash(&[b"ab", b"c"]), content_hash(&[b"a", b"bc"]));
        assert_eq!(content_hash(&[b"x"]).len(), 64);
    }
}
