use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{CasError, CasObject, Cid, CommitObject, Link, CHUNK_SIZE};

/// Default garbage-collection TTL: 30 simulated days.
pub const DEFAULT_TTL_SECS: u64 = 30 * 24 * 3600;

/// Raw object storage keyed by Cid. Hash verification is the store's job.
pub trait Backend {
    fn read(&self, cid: &Cid) -> Result<Option<Vec<u8>>, CasError>;
    fn write(&mut self, cid: &Cid, bytes: &[u8]) -> Result<(), CasError>;
    fn delete(&mut self, cid: &Cid) -> Result<(), CasError>;
}

/// In-memory backend with an optional byte capacity.
#[derive(Debug, Clone, Default)]
pub struct MemoryBackend {
    objects: BTreeMap<Cid, Vec<u8>>,
    capacity: Option<u64>,
    used: u64,
}

impl MemoryBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bytes: u64) -> Self {
        Self {
            capacity: Some(bytes),
            ..Self::default()
        }
    }

    /// Raw access for fault injection.
    pub fn raw_mut(&mut self, cid: &Cid) -> Option<&mut Vec<u8>> {
        self.objects.get_mut(cid)
    }
}

impl Backend for MemoryBackend {
    fn read(&self, cid: &Cid) -> Result<Option<Vec<u8>>, CasError> {
        Ok(self.objects.get(cid).cloned())
    }

    fn write(&mut self, cid: &Cid, bytes: &[u8]) -> Result<(), CasError> {
        if self.objects.contains_key(cid) {
            return Ok(());
        }
        let needed = bytes.len() as u64;
        if let Some(cap) = self.capacity {
            let available = cap.saturating_sub(self.used);
            if needed > available {
                return Err(CasError::StorageFull { needed, available });
            }
        }
        self.used += needed;
        self.objects.insert(*cid, bytes.to_vec());
        Ok(())
    }

    fn delete(&mut self, cid: &Cid) -> Result<(), CasError> {
        if let Some(bytes) = self.objects.remove(cid) {
            self.used -= bytes.len() as u64;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryMeta {
    /// Serialized object length.
    pub size: u64,
    pub links: Vec<Cid>,
    pub last_access: u64,
}

/// Everything the store knows besides the object bytes; persisted as a
/// sidecar by disk-backed stores.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreIndex {
    pub entries: BTreeMap<Cid, EntryMeta>,
    pub pin_roots: BTreeSet<Cid>,
    pub submitted_bytes: u64,
    pub unique_data_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreEntry {
    pub bytes: Vec<u8>,
    pub pinned: bool,
    pub last_access: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreStats {
    pub entries: u64,
    pub total_bytes: u64,
    pub pinned_bytes: u64,
    pub dedup_savings: u64,
}

/// Content-addressed store over a [`Backend`], with a simulated clock for
/// access times.
#[derive(Debug, Clone)]
pub struct Store<B> {
    backend: B,
    index: StoreIndex,
    now: u64,
}

impl<B: Backend + Default> Default for Store<B> {
    fn default() -> Self {
        Self::new(B::default())
    }
}

impl<B: Backend> Store<B> {
    pub fn new(backend: B) -> Self {
        Self::with_index(backend, StoreIndex::default())
    }

    pub fn with_index(backend: B, index: StoreIndex) -> Self {
        Self {
            backend,
            index,
            now: 0,
        }
    }

    pub fn index(&self) -> &StoreIndex {
        &self.index
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn backend_mut(&mut self) -> &mut B {
        &mut self.backend
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn set_clock(&mut self, now: u64) {
        self.now = now;
    }

    pub fn len(&self) -> usize {
        self.index.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.entries.is_empty()
    }

    pub fn contains(&self, cid: &Cid) -> bool {
        self.index.entries.contains_key(cid)
    }

    /// Stores one object; returns its Cid and whether it was new.
    pub fn put_object(&mut self, object: &CasObject) -> Result<(Cid, bool), CasError> {
        let bytes = object.encode()?;
        let cid = Cid::of_bytes(&bytes);
        if let Some(meta) = self.index.entries.get_mut(&cid) {
            meta.last_access = self.now;
            return Ok((cid, false));
        }
        self.backend.write(&cid, &bytes)?;
        self.index.entries.insert(
            cid,
            EntryMeta {
                size: bytes.len() as u64,
                links: object.links.iter().map(|l| l.cid).collect(),
                last_access: self.now,
            },
        );
        Ok((cid, true))
    }

    /// Chunks `bytes` into 256 KiB leaves (plus a linking root when more than
    /// one chunk is needed) and returns the root Cid.
    pub fn put_file(&mut self, bytes: &[u8]) -> Result<Cid, CasError> {
        self.index.submitted_bytes += bytes.len() as u64;
        if bytes.len() <= CHUNK_SIZE {
            return self.put_leaf(bytes);
        }
        let mut links = Vec::with_capacity(bytes.len().div_ceil(CHUNK_SIZE));
        for chunk in bytes.chunks(CHUNK_SIZE) {
            links.push(Link {
                cid: self.put_leaf(chunk)?,
                total_size: chunk.len() as u64,
            });
        }
        Ok(self.put_object(&CasObject::branch(links))?.0)
    }

    fn put_leaf(&mut self, chunk: &[u8]) -> Result<Cid, CasError> {
        let (cid, fresh) = self.put_object(&CasObject::leaf(chunk.to_vec()))?;
        if fresh {
            self.index.unique_data_bytes += chunk.len() as u64;
        }
        Ok(cid)
    }

    /// Reads, hash-verifies and decodes one object, refreshing its access time.
    pub fn get_object(&mut self, cid: &Cid) -> Result<CasObject, CasError> {
        let meta = self
            .index
            .entries
            .get_mut(cid)
            .ok_or(CasError::NotFound(*cid))?;
        let bytes = self
            .backend
            .read(cid)?
            .ok_or(CasError::NotFound(*cid))?;
        if Cid::of_bytes(&bytes) != *cid {
            return Err(CasError::Corrupted(*cid));
        }
        meta.last_access = self.now;
        CasObject::decode(&bytes).map_err(|_| CasError::Corrupted(*cid))
    }

    /// Reassembles a file from its root.
    pub fn get_file(&mut self, root: &Cid) -> Result<Vec<u8>, CasError> {
        let object = self.get_object(root)?;
        if object.links.is_empty() {
            return Ok(object.data);
        }
        if !object.data.is_empty() {
            return Err(CasError::NotAFile(*root));
        }
        let total: u64 = object.links.iter().map(|l| l.total_size).sum();
        let mut out = Vec::with_capacity(usize::try_from(total).unwrap_or(0));
        for link in &object.links {
            let leaf = self.get_object(&link.cid)?;
            if !leaf.links.is_empty() {
                return Err(CasError::NotAFile(*root));
            }
            if leaf.data.len() as u64 != link.total_size {
                return Err(CasError::Corrupted(*root));
            }
            out.extend_from_slice(&leaf.data);
        }
        Ok(out)
    }

    /// Records a new version of `root`, linked to `parent` when given.
    pub fn commit(
        &mut self,
        root: &Cid,
        parent: Option<&Cid>,
        metadata: &str,
        timestamp: u64,
    ) -> Result<Cid, CasError> {
        if !self.contains(root) {
            return Err(CasError::NotFound(*root));
        }
        if let Some(parent) = parent {
            self.read_commit(parent)?;
        }
        let commit = CommitObject {
            root: *root,
            parent: parent.copied(),
            timestamp,
            metadata: String::from(metadata),
        };
        Ok(self.put_object(&commit.to_object())?.0)
    }

    pub fn read_commit(&mut self, cid: &Cid) -> Result<CommitObject, CasError> {
        let object = self.get_object(cid)?;
        CommitObject::from_object(&object).ok_or(CasError::NotACommit(*cid))
    }

    /// Commit chain from `head` back to genesis, newest first.
    pub fn history(&mut self, head: &Cid) -> Result<Vec<Cid>, CasError> {
        let mut out = Vec::new();
        let mut cursor = Some(*head);
        while let Some(cid) = cursor {
            let commit = self.read_commit(&cid)?;
            out.push(cid);
            cursor = commit.parent;
            if out.len() > self.index.entries.len() {
                // a parent chain longer than the store is a cycle
                return Err(CasError::Corrupted(cid));
            }
        }
        Ok(out)
    }

    fn closure(&self, roots: impl IntoIterator<Item = Cid>) -> Result<BTreeSet<Cid>, CasError> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<Cid> = roots.into_iter().collect();
        while let Some(cid) = stack.pop() {
            if !seen.insert(cid) {
                continue;
            }
            let meta = self.index.entries.get(&cid).ok_or(CasError::NotFound(cid))?;
            stack.extend(meta.links.iter().copied());
        }
        Ok(seen)
    }

    /// Marks `root` and everything it links to as immune to gc.
    pub fn pin(&mut self, root: &Cid) -> Result<(), CasError> {
        self.closure([*root])?;
        self.index.pin_roots.insert(*root);
        Ok(())
    }

    /// Drops `root` as a pin root. Objects still reachable from other pin
    /// roots stay pinned; nothing is deleted here.
    pub fn unpin(&mut self, root: &Cid) -> Result<(), CasError> {
        if !self.contains(root) {
            return Err(CasError::NotFound(*root));
        }
        self.index.pin_roots.remove(root);
        Ok(())
    }

    /// Every object reachable from a pin root.
    pub fn pinned_set(&self) -> BTreeSet<Cid> {
        let mut out = BTreeSet::new();
        for root in &self.index.pin_roots {
            if let Ok(reach) = self.closure([*root]) {
                out.extend(reach);
            }
        }
        out
    }

    pub fn is_pinned(&self, cid: &Cid) -> bool {
        self.pinned_set().contains(cid)
    }

    pub fn entry(&self, cid: &Cid) -> Result<StoreEntry, CasError> {
        let meta = self.index.entries.get(cid).ok_or(CasError::NotFound(*cid))?;
        Ok(StoreEntry {
            bytes: self.backend.read(cid)?.ok_or(CasError::NotFound(*cid))?,
            pinned: self.is_pinned(cid),
            last_access: meta.last_access,
        })
    }

    /// Evicts every unpinned object idle for longer than `ttl`.
    pub fn gc(&mut self, ttl: u64) -> Result<Vec<Cid>, CasError> {
        let pinned = self.pinned_set();
        let now = self.now;
        let evict: Vec<Cid> = self
            .index
            .entries
            .iter()
            .filter(|(cid, meta)| !pinned.contains(cid) && now.saturating_sub(meta.last_access) > ttl)
            .map(|(cid, _)| *cid)
            .collect();
        for cid in &evict {
            self.backend.delete(cid)?;
            self.index.entries.remove(cid);
        }
        Ok(evict)
    }

    pub fn stats(&self) -> StoreStats {
        let pinned = self.pinned_set();
        let mut stats = StoreStats {
            dedup_savings: self
                .index
                .submitted_bytes
                .saturating_sub(self.index.unique_data_bytes),
            ..StoreStats::default()
        };
        for (cid, meta) in &self.index.entries {
            stats.entries += 1;
            stats.total_bytes += meta.size;
            if pinned.contains(cid) {
                stats.pinned_bytes += meta.size;
            }
        }
        stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn store() -> Store<MemoryBackend> {
        Store::new(MemoryBackend::new())
    }

    fn pattern(n: usize, salt: u8) -> Vec<u8> {
        (0..n).map(|i| (i as u8).wrapping_mul(31).wrapping_add(salt)).collect()
    }

    #[test]
    fn three_hundred_kib_makes_three_objects() {
        let mut s = store();
        let data: Vec<u8> = (0..300 * 1024).map(|i| (i % 251) as u8).collect();
        let root = s.put_file(&data).unwrap();
        // oracle value from an independent sha256 + base58 script
        assert_eq!(
            alloc::string::ToString::to_string(&root),
            "QmeE6fgSwG71zvGxJAaAYvBvmj39jwqdWdsucD6tzG1BX4"
        );
        assert_eq!(s.len(), 3);
        let obj = s.get_object(&root).unwrap();
        assert!(obj.data.is_empty());
        let sizes: Vec<u64> = obj.links.iter().map(|l| l.total_size).collect();
        assert_eq!(sizes, [262_144, 45_056]);
        assert_eq!(s.get_file(&root).unwrap(), data);
    }

    #[test]
    fn exact_chunk_is_single_leaf() {
        let mut s = store();
        let data = pattern(CHUNK_SIZE, 1);
        let root = s.put_file(&data).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.get_object(&root).unwrap().is_leaf());
    }

    #[test]
    fn empty_file_roundtrips() {
        let mut s = store();
        let root = s.put_file(&[]).unwrap();
        assert_eq!(s.get_file(&root).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn dedup_and_stats() {
        let mut s = store();
        assert_eq!(s.stats(), StoreStats::default());
        let mib = pattern(1 << 20, 3);
        let a = s.put_file(&mib).unwrap();
        let count = s.len();
        let b = s.put_file(&mib).unwrap();
        assert_eq!(a, b);
        assert_eq!(s.len(), count);
        // The pattern repeats every 256 bytes, so all four chunks are one leaf.
        assert_eq!(s.len(), 2);
        assert_eq!(s.stats().dedup_savings, (2 << 20) - CHUNK_SIZE as u64);

        let mut t = store();
        t.put_file(&pattern(1000, 1)).unwrap();
        t.put_file(&pattern(1000, 2)).unwrap();
        assert_eq!(t.stats().dedup_savings, 0);
    }

    #[test]
    fn unknown_cid_not_found() {
        let mut s = store();
        let missing = Cid::of_bytes(b"nope");
        assert_eq!(s.get_file(&missing), Err(CasError::NotFound(missing)));
    }

    #[test]
    fn corruption_detected_on_read() {
        let mut s = store();
        let data = pattern(CHUNK_SIZE + 10, 5);
        let root = s.put_file(&data).unwrap();
        let leaf = s.get_object(&root).unwrap().links[1].cid;
        s.backend_mut().raw_mut(&leaf).unwrap()[12] ^= 0xff;
        assert_eq!(s.get_file(&root), Err(CasError::Corrupted(leaf)));
    }

    #[test]
    fn storage_full_is_surfaced() {
        let mut s = Store::new(MemoryBackend::with_capacity(1000));
        assert!(matches!(
            s.put_file(&pattern(5000, 0)),
            Err(CasError::StorageFull { .. })
        ));
    }

    #[test]
    fn commit_history() {
        let mut s = store();
        let v1 = s.put_file(b"version one").unwrap();
        let v2 = s.put_file(b"version two").unwrap();
        let c1 = s.commit(&v1, None, "v1", 10).unwrap();
        let c2 = s.commit(&v2, Some(&c1), "v2", 20).unwrap();
        assert_eq!(s.read_commit(&c1).unwrap().parent, None);
        assert_eq!(s.read_commit(&c2).unwrap().parent, Some(c1));
        assert_eq!(s.history(&c2).unwrap(), vec![c2, c1]);
        assert_eq!(s.commit(&v2, Some(&v1), "bad", 30), Err(CasError::NotACommit(v1)));
        let missing = Cid::of_bytes(b"?");
        assert_eq!(s.commit(&missing, None, "x", 1), Err(CasError::NotFound(missing)));
    }

    #[test]
    fn pin_closure_and_shared_leaves() {
        let mut s = store();
        let shared = pattern(CHUNK_SIZE, 9);
        let mut a = shared.clone();
        a.extend(pattern(10, 1));
        let mut b = shared.clone();
        b.extend(pattern(10, 2));
        let ra = s.put_file(&a).unwrap();
        let rb = s.put_file(&b).unwrap();
        assert_eq!(s.len(), 5);
        s.pin(&ra).unwrap();
        assert_eq!(s.pinned_set().len(), 3);
        s.pin(&rb).unwrap();
        s.unpin(&ra).unwrap();
        let shared_cid = s.get_object(&rb).unwrap().links[0].cid;
        assert!(s.is_pinned(&shared_cid));
        assert!(!s.is_pinned(&ra));
        // unpin alone deletes nothing
        assert_eq!(s.len(), 5);
    }

    #[test]
    fn gc_respects_pins_and_ttl() {
        let mut s = store();
        let shared = pattern(CHUNK_SIZE, 4);
        let mut a = shared.clone();
        a.push(1);
        let mut b = shared;
        b.push(2);
        let ra = s.put_file(&a).unwrap();
        let rb = s.put_file(&b).unwrap();
        s.pin(&ra).unwrap();

        s.set_clock(100);
        assert!(s.gc(100).unwrap().is_empty());
        s.set_clock(101);
        let evicted = s.gc(100).unwrap();
        // rb's root and its private leaf go; the shared leaf stays
        assert_eq!(evicted.len(), 2);
        assert!(evicted.contains(&rb));
        assert_eq!(s.get_file(&ra).unwrap(), a);

        s.pin(&ra).unwrap();
        s.set_clock(10_000);
        assert!(s.gc(0).unwrap().is_empty());
    }

    #[test]
    fn entry_reports_pin_state() {
        let mut s = store();
        let root = s.put_file(b"x").unwrap();
        assert!(!s.entry(&root).unwrap().pinned);
        s.pin(&root).unwrap();
        assert!(s.entry(&root).unwrap().pinned);
    }
}
