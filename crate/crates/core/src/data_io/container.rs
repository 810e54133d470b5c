//! Self-describing little-endian tensor container.
//!
//! Layout: magic (4 bytes), version u32, record count u32, then per record
//! name length u16, UTF-8 name, dtype u8, rank u8, dims u32×rank, payload.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const VERSION: u32 = 1;
pub const DATASET_MAGIC: [u8; 4] = *b"GFDS";
pub const CHECKPOINT_MAGIC: [u8; 4] = *b"GFCK";

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    F32(Vec<f32>),
    U32(Vec<u32>),
    U8(Vec<u8>),
}

impl Payload {
    pub fn code(&self) -> u8 {
        match self {
            Payload::F32(_) => 0,
            Payload::U32(_) => 1,
            Payload::U8(_) => 2,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Payload::F32(v) => v.len(),
            Payload::U32(v) => v.len(),
            Payload::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub name: String,
    pub dims: Vec<usize>,
    pub payload: Payload,
}

impl Record {
    pub fn f32(name: impl Into<String>, dims: &[usize], data: Vec<f32>) -> Self {
        Self { name: name.into(), dims: dims.to_vec(), payload: Payload::F32(data) }
    }

    pub fn u32(name: impl Into<String>, data: Vec<u32>) -> Self {
        Self { name: name.into(), dims: vec![data.len()], payload: Payload::U32(data) }
    }

    /// UTF-8 text stored as a rank-1 byte record.
    pub fn text(name: impl Into<String>, text: &str) -> Self {
        let bytes = text.as_bytes().to_vec();
        Self { name: name.into(), dims: vec![bytes.len()], payload: Payload::U8(bytes) }
    }

    pub fn as_f32(&self) -> Result<&[f32]> {
        match &self.payload {
            Payload::F32(v) => Ok(v),
            _ => Err(Error::CorruptContainer(format!("record {:?} is not f32", self.name))),
        }
    }

    pub fn as_u32(&self) -> Result<&[u32]> {
        match &self.payload {
            Payload::U32(v) => Ok(v),
            _ => Err(Error::CorruptContainer(format!("record {:?} is not u32", self.name))),
        }
    }

    pub fn as_text(&self) -> Result<&str> {
        match &self.payload {
            Payload::U8(v) => std::str::from_utf8(v).map_err(|_| Error::CorruptContainer(format!("record {:?} is not UTF-8", self.name))),
            _ => Err(Error::CorruptContainer(format!("record {:?} is not text", self.name))),
        }
    }
}

pub fn encode_container(magic: &[u8; 4], records: &[Record]) -> Result<Vec<u8>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in records {
        if !seen.insert(r.name.as_str()) {
            return Err(Error::DuplicateName(r.name.clone()));
        }
        let name = r.name.as_bytes();
        let count: usize = r.dims.iter().product();
        if name.len() > u16::MAX as usize || r.dims.len() > u8::MAX as usize || count != r.payload.len() {
            return Err(Error::CorruptContainer(format!("record {:?} has inconsistent header", r.name)));
        }
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.push(r.payload.code());
        out.push(r.dims.len() as u8);
        for d in &r.dims {
            let d = u32::try_from(*d).map_err(|_| Error::CorruptContainer(format!("dimension {d} too large")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        match &r.payload {
            Payload::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Payload::U32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Payload::U8(v) => out.extend_from_slice(v),
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        let end = end.ok_or_else(|| Error::CorruptContainer(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_container(bytes: &[u8], magic: &[u8; 4]) -> Result<Vec<Record>> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    let found = c.take(4).map_err(|_| Error::CorruptContainer("file shorter than header".into()))?;
    if found != magic {
        return Err(Error::FormatMismatch {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(found).into_owned(),
        });
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::CorruptContainer(format!("unsupported version {version}")));
    }
    let count = c.u32()? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    let mut seen = HashSet::new();
    for _ in 0..count {
        let n = c.u16()? as usize;
        let name = std::str::from_utf8(c.take(n)?).map_err(|_| Error::CorruptContainer("record name is not UTF-8".into()))?.to_string();
        if !seen.insert(name.clone()) {
            return Err(Error::DuplicateName(name));
        }
        let code = c.u8()?;
        let rank = c.u8()? as usize;
        let dims = (0..rank).map(|_| c.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let len = dims.iter().try_fold(1usize, |a, d| a.checked_mul(*d)).ok_or_else(|| Error::CorruptContainer("dimension overflow".into()))?;
        let width = match code {
            0 | 1 => 4,
            2 => 1,
            _ => return Err(Error::CorruptContainer(format!("unknown dtype {code} in {name:?}"))),
        };
        let raw = c.take(len.checked_mul(width).ok_or_else(|| Error::CorruptContainer("payload overflow".into()))?)?;
        let payload = match code {
            0 => Payload::F32(raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect()),
            1 => Payload::U32(raw.chunks_exact(4).map(|b| u32::from_le_bytes(b.try_into().unwrap())).collect()),
            _ => Payload::U8(raw.to_vec()),
        };
        records.push(Record { name, dims, payload });
    }
    if c.pos != bytes.len() {
        return Err(Error::CorruptContainer(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    Ok(records)
}

/// Write to a sibling temporary file, then rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| Error::Config(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_container(path: &Path, magic: &[u8; 4], records: &[Record]) -> Result<()> {
    write_atomic(path, &encode_container(magic, records)?)
}

pub fn read_container(path: &Path, magic: &[u8; 4]) -> Result<Vec<Record>> {
    decode_container(&fs::read(path)?, magic)
}

/// Look up a record by name.
pub fn find<'a>(records: &'a [Record], name: &str) -> Result<&'a Record> {
    records.iter().find(|r| r.name == name).ok_or_else(|| Error::MissingRecord(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Record> {
        vec![
            Record::f32("a", &[2, 3], vec![1.0, -2.5, 3.25, f32::MIN_POSITIVE, 0.0, -0.0]),
            Record::u32("meta", vec![7, u32::MAX]),
            Record::text("note", "key=value"),
        ]
    }

    #[test]
    fn round_trip() {
        let bytes = encode_container(&DATASET_MAGIC, &sample()).unwrap();
        assert_eq!(&bytes[..4], &[0x47, 0x46, 0x44, 0x53]);
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        let back = decode_container(&bytes, &DATASET_MAGIC).unwrap();
        assert_eq!(back, sample());
        assert_eq!(encode_container(&DATASET_MAGIC, &back).unwrap(), bytes);
    }

    #[test]
    fn rejects_bad_input() {
        let bytes = encode_container(&DATASET_MAGIC, &sample()).unwrap();
        assert!(matches!(decode_container(&bytes, &CHECKPOINT_MAGIC), Err(Error::FormatMismatch { .. })));
        assert!(matches!(decode_container(&bytes[..bytes.len() - 1], &DATASET_MAGIC), Err(Error::CorruptContainer(_))));
        let dup = vec![Record::u32("x", vec![1]), Record::u32("x", vec![2])];
        assert!(matches!(encode_container(&DATASET_MAGIC, &dup), Err(Error::DuplicateName(_))));
        assert!(matches!(find(&sample(), "nope"), Err(Error::MissingRecord(_))));
    }
}
