//! "PGVT" named-tensor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"PGVT" | version u32 | entry count u32 |
//!   per entry: name len u16 | UTF-8 name | rank u8 | extents u32 × rank | f32 payload
//! ```

use std::fs;
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PGVT";
pub const VERSION: u32 = 1;

/// Ordered list of named tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TensorFile {
    pub entries: Vec<(String, Tensor)>,
}

impl TensorFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.entries.push((name.into(), tensor));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Like [`get`](Self::get) but reports the missing entry against `origin`.
    pub fn require(&self, name: &str, origin: &str) -> Result<&Tensor> {
        self.get(name).ok_or_else(|| Error::Format {
            path: origin.to_string(),
            detail: format!("missing entry '{name}'"),
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let payload: usize = self.entries.iter().map(|(_, t)| t.len() * 4 + 64).sum();
        let mut out = Vec::with_capacity(12 + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, t) in &self.entries {
            let name_len = u16::try_from(name.len())
                .map_err(|_| Error::shape("container", format!("name too long: {name}")))?;
            let rank = u8::try_from(t.rank())
                .map_err(|_| Error::shape("container", format!("rank too large for {name}")))?;
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(rank);
            for &d in t.shape() {
                let d = u32::try_from(d)
                    .map_err(|_| Error::shape("container", format!("extent too large for {name}")))?;
                out.extend_from_slice(&d.to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Parses a container; `origin` names the source in error messages.
    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<Self> {
        let fail = |detail: String| Error::Format {
            path: origin.to_string(),
            detail,
        };
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4).ok_or_else(|| fail("truncated header".into()))?;
        if magic != MAGIC {
            return Err(fail(format!("bad magic {magic:?}")));
        }
        let version = r.u32().ok_or_else(|| fail("truncated header".into()))?;
        if version != VERSION {
            return Err(fail(format!("unsupported version {version}")));
        }
        let count = r.u32().ok_or_else(|| fail("truncated header".into()))?;
        let mut entries = Vec::with_capacity(count as usize);
        for i in 0..count {
            let truncated = || fail(format!("truncated entry {i}"));
            let name_len = r.u16().ok_or_else(truncated)? as usize;
            let name = std::str::from_utf8(r.take(name_len).ok_or_else(truncated)?)
                .map_err(|_| fail(format!("entry {i} name is not UTF-8")))?
                .to_string();
            let rank = r.take(1).ok_or_else(truncated)?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32().ok_or_else(truncated)? as usize);
            }
            let len: usize = shape.iter().product();
            let raw = r.take(len * 4).ok_or_else(truncated)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let tensor = Tensor::new(shape, data).map_err(|e| fail(format!("entry '{name}': {e}")))?;
            entries.push((name, tensor));
        }
        if r.pos != bytes.len() {
            return Err(fail(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { entries })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Packs UTF-8 text into a rank-1 tensor of byte values.
pub fn text_tensor(text: &str) -> Tensor {
    let mut data: Vec<f32> = text.bytes().map(f32::from).collect();
    if data.is_empty() {
        data.push(0.0);
    }
    let len = data.len();
    Tensor::new(vec![len], data).expect("rank-1 text tensor")
}

pub fn tensor_text(t: &Tensor) -> Option<String> {
    let bytes: Vec<u8> = t
        .data()
        .iter()
        .filter(|&&v| v != 0.0)
        .map(|&v| v as u8)
        .collect();
    String::from_utf8(bytes).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_exact() {
        let mut f = TensorFile::new();
        f.push("ab", Tensor::new(vec![2], vec![1.0, -2.5]).unwrap());
        let b = f.to_bytes().unwrap();
        assert_eq!(&b[0..4], b"PGVT");
        assert_eq!(&b[4..8], &1u32.to_le_bytes());
        assert_eq!(&b[8..12], &1u32.to_le_bytes());
        assert_eq!(&b[12..14], &2u16.to_le_bytes());
        assert_eq!(&b[14..16], b"ab");
        assert_eq!(b[16], 1);
        assert_eq!(&b[17..21], &2u32.to_le_bytes());
        assert_eq!(&b[21..25], &1.0f32.to_le_bytes());
        assert_eq!(&b[25..29], &(-2.5f32).to_le_bytes());
        assert_eq!(b.len(), 29);
    }

    #[test]
    fn wrong_magic_and_version_are_format_errors() {
        let f = TensorFile::new();
        let mut b = f.to_bytes().unwrap();
        b[0] = b'X';
        assert!(matches!(TensorFile::from_bytes(&b, "x"), Err(Error::Format { .. })));
        let mut b = f.to_bytes().unwrap();
        b[4] = 9;
        assert!(matches!(TensorFile::from_bytes(&b, "x"), Err(Error::Format { .. })));
        assert!(TensorFile::from_bytes(b"PG", "x").is_err());
    }

    #[test]
    fn text_round_trip() {
        let t = text_tensor("stage=contrast\nstep=12\n");
        assert_eq!(tensor_text(&t).unwrap(), "stage=contrast\nstep=12\n");
    }

    proptest! {
        #[test]
        fn bytes_round_trip(
            shapes in prop::collection::vec(prop::collection::vec(1usize..4, 1..4), 0..4),
            seed in any::<u32>(),
        ) {
            let mut f = TensorFile::new();
            for (i, shape) in shapes.iter().enumerate() {
                let len: usize = shape.iter().product();
                let data = (0..len).map(|j| f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add(j as u32) & 0x7f7f_ffff)).collect();
                f.push(format!("t{i}"), Tensor::new(shape.clone(), data).unwrap());
            }
            let back = TensorFile::from_bytes(&f.to_bytes().unwrap(), "mem").unwrap();
            prop_assert_eq!(back.to_bytes().unwrap(), f.to_bytes().unwrap());
        }
    }
}
