//! The `.pma` feature archive.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "PMA1" | version u16 (=1) | dims u32 | frame_period_us u32 | entry_count u64
//! index: entry_count x { id_len u16 | id utf-8 | frame_count u32 | byte_offset u64 }
//! payload: f32 row-major frame data of every entry, concatenated
//! ```
//!
//! `byte_offset` is relative to the start of the payload. Entries are written
//! sorted by stimulus id, so the same entry set always yields the same bytes.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{FeatioError, FeatureMatrix, Result};

pub const ARCHIVE_MAGIC: [u8; 4] = *b"PMA1";
pub const ARCHIVE_VERSION: u16 = 1;

const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureArchive {
    dims: usize,
    frame_period_us: u32,
    entries: HashMap<String, FeatureMatrix>,
}

impl FeatureArchive {
    /// Validates the archive invariants over `entries`.
    pub fn from_entries(entries: impl IntoIterator<Item = FeatureMatrix>) -> Result<Self> {
        let mut map = HashMap::new();
        let mut shape: Option<(usize, u32)> = None;
        for m in entries {
            let (dims, period) = *shape.get_or_insert((m.dims(), m.frame_period_us()));
            if m.dims() != dims {
                return Err(FeatioError::InconsistentDims {
                    id: m.stimulus_id().to_string(),
                    expected: dims,
                    found: m.dims(),
                });
            }
            if m.frame_period_us() != period {
                return Err(FeatioError::InconsistentFramePeriod {
                    id: m.stimulus_id().to_string(),
                    expected: period,
                    found: m.frame_period_us(),
                });
            }
            let id = m.stimulus_id().to_string();
            if map.insert(id.clone(), m).is_some() {
                return Err(FeatioError::DuplicateId(id));
            }
        }
        let (dims, frame_period_us) = shape.ok_or(FeatioError::EmptyArchive)?;
        Ok(FeatureArchive {
            dims,
            frame_period_us,
            entries: map,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn frame_period_us(&self) -> u32 {
        self.frame_period_us
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, stimulus_id: &str) -> bool {
        self.entries.contains_key(stimulus_id)
    }

    pub fn get_entry(&self, stimulus_id: &str) -> Result<&FeatureMatrix> {
        self.entries
            .get(stimulus_id)
            .ok_or_else(|| FeatioError::UnknownId(stimulus_id.to_string()))
    }

    /// Stimulus ids in sorted order.
    pub fn ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        ids.sort_unstable();
        ids
    }

    /// Serializes to the on-disk layout.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let ids = self.ids();
        let payload_len: usize = self.entries.values().map(|m| m.data().len() * 4).sum();
        let mut out = Vec::with_capacity(HEADER_LEN + ids.len() * 32 + payload_len);
        out.extend_from_slice(&ARCHIVE_MAGIC);
        out.extend_from_slice(&ARCHIVE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims as u32).to_le_bytes());
        out.extend_from_slice(&self.frame_period_us.to_le_bytes());
        out.extend_from_slice(&(ids.len() as u64).to_le_bytes());

        let mut offset = 0u64;
        for id in &ids {
            let m = &self.entries[*id];
            let id_len = u16::try_from(id.len()).map_err(|_| FeatioError::InvalidMatrix {
                id: id.to_string(),
                reason: "id longer than 65535 bytes".into(),
            })?;
            let frames = u32::try_from(m.frames()).map_err(|_| FeatioError::InvalidMatrix {
                id: id.to_string(),
                reason: "more than u32::MAX frames".into(),
            })?;
            out.extend_from_slice(&id_len.to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            out.extend_from_slice(&frames.to_le_bytes());
            out.extend_from_slice(&offset.to_le_bytes());
            offset += (m.data().len() * 4) as u64;
        }
        for id in &ids {
            for v in self.entries[*id].data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
        if magic != ARCHIVE_MAGIC {
            return Err(FeatioError::BadMagic(magic));
        }
        let version = cur.u16("version")?;
        if version != ARCHIVE_VERSION {
            return Err(FeatioError::UnsupportedVersion(version));
        }
        let dims = cur.u32("dims")? as usize;
        let frame_period_us = cur.u32("frame period")?;
        let count = cur.u64("entry count")?;
        if dims == 0 {
            return Err(FeatioError::Corrupt("dims is zero".into()));
        }

        let mut index = Vec::new();
        for i in 0..count {
            let id_len = cur.u16("index record")? as usize;
            let id = std::str::from_utf8(cur.take(id_len, "index record")?)
                .map_err(|_| FeatioError::Corrupt(format!("index record {i} id is not UTF-8")))?
                .to_string();
            let frames = cur.u32("index record")? as usize;
            let offset = cur.u64("index record")?;
            index.push((id, frames, offset));
        }

        let payload = &bytes[cur.pos..];
        let entries = index.into_iter().map(|(id, frames, offset)| {
            let len = frames
                .checked_mul(dims)
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| FeatioError::Corrupt(format!("entry {id:?} size overflows")))?;
            let start = usize::try_from(offset).unwrap_or(usize::MAX);
            let blob = start
                .checked_add(len)
                .and_then(|end| payload.get(start..end))
                .ok_or_else(|| {
                    FeatioError::Truncated(format!(
                        "entry {id:?} needs bytes {start}..{} of a {}-byte payload",
                        start.saturating_add(len),
                        payload.len()
                    ))
                })?;
            let data = blob
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            FeatureMatrix::new(id, dims, frame_period_us, data)
                .map_err(|e| FeatioError::Corrupt(e.to_string()))
        });
        let entries: Vec<FeatureMatrix> = entries.collect::<Result<_>>()?;
        FeatureArchive::from_entries(entries).map_err(|e| match e {
            FeatioError::EmptyArchive => FeatioError::Corrupt("archive has no entries".into()),
            FeatioError::DuplicateId(id) => FeatioError::Corrupt(format!("duplicate id {id:?}")),
            other => other,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let slice = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| FeatioError::Truncated(format!("file ends inside {what}")))?;
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Writes `entries` to `path`. Fails before touching the file if the entries
/// violate the archive invariants.
pub fn write_archive(entries: impl IntoIterator<Item = FeatureMatrix>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = FeatureArchive::from_entries(entries)?.to_bytes()?;
    let io_err = |source| FeatioError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    w.write_all(&bytes).map_err(io_err)?;
    w.flush().map_err(io_err)
}

pub fn read_archive(path: impl AsRef<Path>) -> Result<FeatureArchive> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| FeatioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    FeatureArchive::from_bytes(&bytes)
}
