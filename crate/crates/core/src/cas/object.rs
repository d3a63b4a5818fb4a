use alloc::string::String;
use alloc::vec::Vec;

use super::{CasError, Cid};
use crate::codec::{DecodeError, Reader, Writer};

/// Maximum data payload of a single object (256 KiB).
pub const CHUNK_SIZE: usize = 262_144;

const OBJECT_VERSION: u8 = 0x01;
const COMMIT_MARKER: u8 = 0x02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub cid: Cid,
    /// Data bytes reachable through the link (leaf payload length).
    pub total_size: u64,
}

/// A DAG node: opaque data plus ordered links.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CasObject {
    pub data: Vec<u8>,
    pub links: Vec<Link>,
}

impl CasObject {
    pub fn leaf(data: Vec<u8>) -> Self {
        Self {
            data,
            links: Vec::new(),
        }
    }

    pub fn branch(links: Vec<Link>) -> Self {
        Self {
            data: Vec::new(),
            links,
        }
    }

    /// `0x01 ‖ u32 len(data) ‖ data ‖ u32 link_count ‖ (multihash ‖ u64 size)*`.
    pub fn encode(&self) -> Result<Vec<u8>, CasError> {
        if self.data.len() > CHUNK_SIZE {
            return Err(CasError::OversizeData(self.data.len()));
        }
        let mut w = Writer::with_capacity(9 + self.data.len() + self.links.len() * 42);
        w.u8(OBJECT_VERSION)
            .u32(self.data.len() as u32)
            .bytes(&self.data)
            .u32(u32::try_from(self.links.len()).expect("link count fits u32"));
        for link in &self.links {
            w.bytes(link.cid.multihash()).u64(link.total_size);
        }
        Ok(w.finish())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CasError> {
        let mut r = Reader::new(bytes);
        let version = r.u8("object version")?;
        if version != OBJECT_VERSION {
            return Err(DecodeError::Version(version).into());
        }
        let len = r.u32("data length")? as usize;
        if len > CHUNK_SIZE {
            return Err(CasError::OversizeData(len));
        }
        let data = r.take(len, "data")?.to_vec();
        let count = r.u32("link count")? as usize;
        let mut links = Vec::with_capacity(count.min(r.remaining() / 42));
        for _ in 0..count {
            let cid = Cid::from_multihash(r.take(34, "link multihash")?)?;
            links.push(Link {
                cid,
                total_size: r.u64("link size")?,
            });
        }
        r.finish()?;
        Ok(Self { data, links })
    }

    pub fn cid(&self) -> Result<Cid, CasError> {
        Ok(Cid::of_bytes(&self.encode()?))
    }

    pub fn is_leaf(&self) -> bool {
        self.links.is_empty()
    }
}

/// Cid over the canonical object bytes.
pub fn cid_of(object: &CasObject) -> Result<Cid, CasError> {
    object.cid()
}

/// Version-history node linking a content root and an optional parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitObject {
    pub root: Cid,
    pub parent: Option<Cid>,
    pub timestamp: u64,
    pub metadata: String,
}

impl CommitObject {
    /// Data is `0x02 ‖ u64 timestamp ‖ u32 len ‖ metadata`; links are
    /// `[root, parent?]`.
    pub fn to_object(&self) -> CasObject {
        let mut w = Writer::new();
        w.u8(COMMIT_MARKER)
            .u64(self.timestamp)
            .u32(self.metadata.len() as u32)
            .bytes(self.metadata.as_bytes());
        let mut links = alloc::vec![Link {
            cid: self.root,
            total_size: 0,
        }];
        if let Some(parent) = self.parent {
            links.push(Link {
                cid: parent,
                total_size: 0,
            });
        }
        CasObject {
            data: w.finish(),
            links,
        }
    }

    /// Parses a commit; `None` when the object does not have commit shape.
    pub fn from_object(object: &CasObject) -> Option<Self> {
        if !(1..=2).contains(&object.links.len()) {
            return None;
        }
        let mut r = Reader::new(&object.data);
        if r.u8("commit marker").ok()? != COMMIT_MARKER {
            return None;
        }
        let timestamp = r.u64("timestamp").ok()?;
        let len = r.u32("metadata length").ok()? as usize;
        let metadata = String::from_utf8(r.take(len, "metadata").ok()?.to_vec()).ok()?;
        r.finish().ok()?;
        if object.links.iter().any(|l| l.total_size != 0) {
            return None;
        }
        Some(Self {
            root: object.links[0].cid,
            parent: object.links.get(1).map(|l| l.cid),
            timestamp,
            metadata,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    // Golden values computed with an independent sha256 + base58 script.
    const EMPTY_OBJECT_CID: &str = "QmZTaKqnjLmycvSvEG1dkzfdiz11CbCxaTtJe3ry3eZ94W";
    const PATTERN_1KIB_CID: &str = "QmTbZThVhdXFdTc1HehLA7NoMfdAhxgdEpY1tySbYZ6z5C";

    #[test]
    fn golden_empty_object() {
        let empty = CasObject::default();
        assert_eq!(empty.encode().unwrap(), [1, 0, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(cid_of(&empty).unwrap().to_string(), EMPTY_OBJECT_CID);
    }

    #[test]
    fn golden_pattern_leaf() {
        let data: Vec<u8> = (0..1024u32).map(|i| (i % 256) as u8).collect();
        assert_eq!(cid_of(&CasObject::leaf(data)).unwrap().to_string(), PATTERN_1KIB_CID);
    }

    #[test]
    fn one_bit_changes_cid() {
        let a = CasObject::leaf(alloc::vec![0u8; 64]);
        let mut b = a.clone();
        b.data[10] ^= 1;
        assert_eq!(cid_of(&a).unwrap(), cid_of(&a.clone()).unwrap());
        assert_ne!(cid_of(&a).unwrap(), cid_of(&b).unwrap());
    }

    #[test]
    fn oversize_rejected() {
        let big = CasObject::leaf(alloc::vec![0u8; CHUNK_SIZE + 1]);
        assert_eq!(cid_of(&big), Err(CasError::OversizeData(CHUNK_SIZE + 1)));
        assert!(cid_of(&CasObject::leaf(alloc::vec![0u8; CHUNK_SIZE])).is_ok());
    }

    #[test]
    fn decode_inverts_encode() {
        let leaf = CasObject::leaf(b"abc".to_vec());
        let root = CasObject::branch(alloc::vec![Link {
            cid: cid_of(&leaf).unwrap(),
            total_size: 3
        }]);
        for obj in [leaf, root] {
            assert_eq!(CasObject::decode(&obj.encode().unwrap()).unwrap(), obj);
        }
        assert!(CasObject::decode(&[1, 0, 0, 0]).is_err());
        assert!(CasObject::decode(&[2, 0, 0, 0, 0, 0, 0, 0, 0]).is_err());
    }

    #[test]
    fn commit_shape() {
        let root = Cid::of_bytes(b"r");
        let c = CommitObject {
            root,
            parent: None,
            timestamp: 9,
            metadata: "v1".to_string(),
        };
        let obj = c.to_object();
        assert_eq!(CommitObject::from_object(&obj), Some(c));
        assert_eq!(CommitObject::from_object(&CasObject::leaf(b"\x02".to_vec())), None);
    }
}
