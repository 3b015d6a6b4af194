//! GHM1 binary container: named, typed, shaped sections in one file.
//!
//! Layout (all little-endian):
//! - magic `b"GHM1"`, version `u32`
//! - section count `u32`
//! - per section: name length `u16` + UTF-8 name, dtype `u8`
//!   (0 = f32, 1 = f64, 2 = u8), ndim `u8`, dims `u64 * ndim`,
//!   payload offset `u64`, payload byte length `u64`
//! - row-major payloads at the stated offsets.

use crate::{GhmError, Result};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"GHM1";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum SectionData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U8(Vec<u8>),
}

impl SectionData {
    fn dtype_code(&self) -> u8 {
        match self {
            SectionData::F32(_) => 0,
            SectionData::F64(_) => 1,
            SectionData::U8(_) => 2,
        }
    }

    fn elem_size(&self) -> usize {
        match self {
            SectionData::F32(_) => 4,
            SectionData::F64(_) => 8,
            SectionData::U8(_) => 1,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SectionData::F32(v) => v.len(),
            SectionData::F64(v) => v.len(),
            SectionData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn byte_len(&self) -> usize {
        self.len() * self.elem_size()
    }

    fn write_payload<W: Write>(&self, w: &mut W) -> Result<()> {
        match self {
            SectionData::F32(v) => {
                for x in v {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            SectionData::F64(v) => {
                for x in v {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            SectionData::U8(v) => w.write_all(v)?,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub shape: Vec<usize>,
    pub data: SectionData,
}

impl Section {
    pub fn f64(shape: Vec<usize>, data: Vec<f64>) -> Self {
        Section { shape, data: SectionData::F64(data) }
    }

    pub fn f32(shape: Vec<usize>, data: Vec<f32>) -> Self {
        Section { shape, data: SectionData::F32(data) }
    }

    pub fn u8(shape: Vec<usize>, data: Vec<u8>) -> Self {
        Section { shape, data: SectionData::U8(data) }
    }

    /// Scalar f64 convenience section.
    pub fn scalar(value: f64) -> Self {
        Section::f64(vec![1], vec![value])
    }

    pub fn as_f64(&self) -> Result<&[f64]> {
        match &self.data {
            SectionData::F64(v) => Ok(v),
            _ => Err(GhmError::Format("section is not f64".into())),
        }
    }

    pub fn as_f32(&self) -> Result<&[f32]> {
        match &self.data {
            SectionData::F32(v) => Ok(v),
            _ => Err(GhmError::Format("section is not f32".into())),
        }
    }

    pub fn as_u8(&self) -> Result<&[u8]> {
        match &self.data {
            SectionData::U8(v) => Ok(v),
            _ => Err(GhmError::Format("section is not u8".into())),
        }
    }

    pub fn scalar_value(&self) -> Result<f64> {
        let v = self.as_f64()?;
        if v.len() != 1 {
            return Err(GhmError::Format("expected scalar section".into()));
        }
        Ok(v[0])
    }
}

/// An in-memory GHM1 container keyed by section name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ghm1File {
    sections: BTreeMap<String, Section>,
}

impl Ghm1File {
    pub fn new() -> Self {
        Ghm1File::default()
    }

    pub fn insert(&mut self, name: &str, section: Section) {
        self.sections.insert(name.to_string(), section);
    }

    pub fn get(&self, name: &str) -> Result<&Section> {
        self.sections
            .get(name)
            .ok_or_else(|| GhmError::Format(format!("missing section '{name}'")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(|s| s.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        // Header size first, so payload offsets can be laid out back to back.
        let mut header_len = 4 + 4 + 4;
        for (name, sec) in &self.sections {
            if name.len() > u16::MAX as usize {
                return Err(GhmError::Format("section name too long".into()));
            }
            let declared: usize = sec.shape.iter().product();
            if declared != sec.data.len() {
                return Err(GhmError::Format(format!(
                    "section '{}' shape {:?} does not match {} elements",
                    name,
                    sec.shape,
                    sec.data.len()
                )));
            }
            header_len += 2 + name.len() + 1 + 1 + 8 * sec.shape.len() + 8 + 8;
        }

        let mut out = Vec::with_capacity(header_len);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());

        let mut offset = header_len as u64;
        for (name, sec) in &self.sections {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(sec.data.dtype_code());
            out.push(sec.shape.len() as u8);
            for &d in &sec.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            out.extend_from_slice(&offset.to_le_bytes());
            out.extend_from_slice(&(sec.data.byte_len() as u64).to_le_bytes());
            offset += sec.data.byte_len() as u64;
        }
        debug_assert_eq!(out.len(), header_len);
        for sec in self.sections.values() {
            sec.data.write_payload(&mut out)?;
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(GhmError::Format("bad magic, not a GHM1 file".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(GhmError::Format(format!("unsupported GHM1 version {version}")));
        }
        let n = cur.u32()? as usize;

        struct Entry {
            name: String,
            dtype: u8,
            shape: Vec<usize>,
            offset: usize,
            nbytes: usize,
        }
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let name_len = cur.u16()? as usize;
            let name = String::from_utf8(cur.take(name_len)?.to_vec())
                .map_err(|_| GhmError::Format("non-UTF8 section name".into()))?;
            let dtype = cur.u8()?;
            let ndim = cur.u8()? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(cur.u64()? as usize);
            }
            let offset = cur.u64()? as usize;
            let nbytes = cur.u64()? as usize;
            entries.push(Entry { name, dtype, shape, offset, nbytes });
        }

        // Offsets must not overlap each other or the header.
        let header_end = cur.pos;
        let mut spans: Vec<(usize, usize, &str)> = entries
            .iter()
            .map(|e| (e.offset, e.offset + e.nbytes, e.name.as_str()))
            .collect();
        spans.sort();
        let mut prev_end = header_end;
        for (start, end, name) in spans {
            if start < prev_end {
                return Err(GhmError::Format(format!("section '{name}' overlaps preceding data")));
            }
            if end > bytes.len() {
                return Err(GhmError::Format(format!("section '{name}' extends past end of file")));
            }
            prev_end = end;
        }

        let mut file = Ghm1File::new();
        for e in entries {
            let elem_size = match e.dtype {
                0 => 4,
                1 => 8,
                2 => 1,
                other => return Err(GhmError::Format(format!("unknown dtype code {other}"))),
            };
            let n_elems: usize = e.shape.iter().product();
            if n_elems * elem_size != e.nbytes {
                return Err(GhmError::Format(format!(
                    "section '{}' declared shape {:?} does not match payload size {}",
                    e.name, e.shape, e.nbytes
                )));
            }
            let payload = &bytes[e.offset..e.offset + e.nbytes];
            let data = match e.dtype {
                0 => SectionData::F32(
                    payload
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                        .collect(),
                ),
                1 => SectionData::F64(
                    payload
                        .chunks_exact(8)
                        .map(|c| {
                            f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]])
                        })
                        .collect(),
                ),
                _ => SectionData::U8(payload.to_vec()),
            };
            file.insert(&e.name, Section { shape: e.shape, data });
        }
        Ok(file)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(GhmError::Format("truncated GHM1 file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]))
    }
}
