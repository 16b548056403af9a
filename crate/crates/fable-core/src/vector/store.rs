//! On-disk vector store.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! offset 0   magic            4 bytes  "FBVX"
//!        4   version          u32      (currently 1)
//!        8   dimension        u32
//!        12  count            u64
//!        20  key table        count records:
//!              doc_len   u16
//!              doc_id    doc_len bytes UTF-8
//!              node_len  u16
//!              node_id   node_len bytes UTF-8
//!              granularity u8  (0 = internal, 1 = leaf)
//!        ..  vectors          count * dimension * f32
//! ```
//!
//! Vectors are fixed-width; the key table is length-prefixed. Loading
//! re-validates norms and key uniqueness.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Granularity, NodeEmbedding, NodeKey, VectorIndex};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FBVX";
pub const VECTOR_STORE_VERSION: u32 = 1;

pub fn save(index: &VectorIndex, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    out.write_all(MAGIC)?;
    out.write_all(&VECTOR_STORE_VERSION.to_le_bytes())?;
    out.write_all(&(index.dimension() as u32).to_le_bytes())?;
    out.write_all(&(index.len() as u64).to_le_bytes())?;
    for entry in index.entries() {
        write_str(&mut out, &entry.key.doc_id)?;
        write_str(&mut out, &entry.key.node_id)?;
        let tag: u8 = match entry.granularity {
            Granularity::Internal => 0,
            Granularity::Leaf => 1,
        };
        out.write_all(&[tag])?;
    }
    for entry in index.entries() {
        for value in &entry.vector {
            out.write_all(&value.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<VectorIndex> {
    let file = File::open(path)?;
    let mut input = BufReader::new(file);

    let mut magic = [0u8; 4];
    read_exact(&mut input, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Malformed(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut input, "version")?;
    if version != VECTOR_STORE_VERSION {
        return Err(Error::VersionMismatch { found: version, supported: VECTOR_STORE_VERSION });
    }
    let dimension = read_u32(&mut input, "dimension")? as usize;
    let count = read_u64(&mut input, "count")? as usize;
    if dimension == 0 {
        return Err(Error::Malformed("zero dimension".into()));
    }

    let mut keys = Vec::with_capacity(count);
    for _ in 0..count {
        let doc_id = read_str(&mut input)?;
        let node_id = read_str(&mut input)?;
        let mut tag = [0u8; 1];
        read_exact(&mut input, &mut tag, "granularity")?;
        let granularity = match tag[0] {
            0 => Granularity::Internal,
            1 => Granularity::Leaf,
            other => return Err(Error::Malformed(format!("bad granularity tag {other}"))),
        };
        keys.push((NodeKey::new(doc_id, node_id), granularity));
    }

    let mut index = VectorIndex::new(dimension);
    let mut buf = vec![0u8; dimension * 4];
    for (key, granularity) in keys {
        read_exact(&mut input, &mut buf, "vector data")?;
        let vector: Vec<f32> = buf
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        index.insert(NodeEmbedding::new(key, granularity, vector)?)?;
    }
    let mut trailer = [0u8; 1];
    if input.read(&mut trailer)? != 0 {
        return Err(Error::Malformed("trailing bytes after vector data".into()));
    }
    Ok(index)
}

fn write_str(out: &mut impl Write, s: &str) -> Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| Error::InvalidInput(format!("identifier too long: {} bytes", s.len())))?;
    out.write_all(&len.to_le_bytes())?;
    out.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str(input: &mut impl Read) -> Result<String> {
    let mut len = [0u8; 2];
    read_exact(input, &mut len, "string length")?;
    let len = u16::from_le_bytes(len) as usize;
    let mut buf = vec![0u8; len];
    read_exact(input, &mut buf, "string data")?;
    String::from_utf8(buf).map_err(|e| Error::Malformed(format!("non-utf8 identifier: {e}")))
}

fn read_u32(input: &mut impl Read, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(input, &mut buf, what)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(input: &mut impl Read, what: &str) -> Result<u64> {
    let mut buf = [0u8; 8];
    read_exact(input, &mut buf, what)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_exact(input: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    input
        .read_exact(buf)
        .map_err(|e| Error::Malformed(format!("truncated store while reading {what}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::HashEmbedder;
    use crate::vector::Embedder;

    fn sample_index() -> VectorIndex {
        let embedder = HashEmbedder::new(16);
        let mut index = VectorIndex::new(16);
        for i in 0..10 {
            let v = embedder.embed(&format!("text number {i}")).unwrap();
            let granularity = if i % 3 == 0 { Granularity::Internal } else { Granularity::Leaf };
            index
                .insert(
                    NodeEmbedding::new(
                        NodeKey::new(format!("d{:02}", i % 3), format!("n{i:04}")),
                        granularity,
                        v,
                    )
                    .unwrap(),
                )
                .unwrap();
        }
        index
    }

    #[test]
    fn round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.bin");
        let index = sample_index();
        save(&index, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(index, loaded);
    }

    #[test]
    fn bad_magic_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.bin");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(load(&path), Err(Error::Malformed(_))));
    }

    #[test]
    fn wrong_version_is_version_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.bin");
        save(&sample_index(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 9;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load(&path), Err(Error::VersionMismatch { found: 9, .. })));
    }

    #[test]
    fn truncated_file_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.bin");
        save(&sample_index(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
        assert!(matches!(load(&path), Err(Error::Malformed(_))));
    }

    #[test]
    fn save_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.bin");
        let b = dir.path().join("b.bin");
        save(&sample_index(), &a).unwrap();
        save(&sample_index(), &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}
