//! Object files on disk: `objects/<cid>` plus an `index.json` sidecar.

use std::fs;
use std::io::{self, ErrorKind};
use std::path::{Path, PathBuf};

use pcim_core::cas::{Backend, CasError, Cid, Store, StoreIndex};

#[derive(Debug, Clone)]
pub struct DiskBackend {
    objects: PathBuf,
}

impl DiskBackend {
    pub fn open(root: &Path) -> io::Result<Self> {
        let objects = root.join("objects");
        fs::create_dir_all(&objects)?;
        Ok(Self { objects })
    }

    pub fn object_path(&self, cid: &Cid) -> PathBuf {
        self.objects.join(cid.to_string())
    }
}

fn backend_err(e: io::Error) -> CasError {
    CasError::Backend(e.to_string())
}

impl Backend for DiskBackend {
    fn read(&self, cid: &Cid) -> Result<Option<Vec<u8>>, CasError> {
        match fs::read(self.object_path(cid)) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) => Err(backend_err(e)),
        }
    }

    fn write(&mut self, cid: &Cid, bytes: &[u8]) -> Result<(), CasError> {
        let path = self.object_path(cid);
        if path.exists() {
            return Ok(());
        }
        // Write-then-rename so a crash never leaves a truncated object.
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, bytes).map_err(backend_err)?;
        fs::rename(&tmp, &path).map_err(backend_err)
    }

    fn delete(&mut self, cid: &Cid) -> Result<(), CasError> {
        match fs::remove_file(self.object_path(cid)) {
            Err(e) if e.kind() != ErrorKind::NotFound => Err(backend_err(e)),
            _ => Ok(()),
        }
    }
}

pub fn index_path(root: &Path) -> PathBuf {
    root.join("index.json")
}

/// Opens the store under `root`, loading the sidecar index if present.
pub fn open_store(root: &Path) -> io::Result<Store<DiskBackend>> {
    let backend = DiskBackend::open(root)?;
    let index = match fs::read(index_path(root)) {
        Ok(bytes) => serde_json::from_slice::<StoreIndex>(&bytes)
            .map_err(|e| io::Error::new(ErrorKind::InvalidData, e))?,
        Err(e) if e.kind() == ErrorKind::NotFound => StoreIndex::default(),
        Err(e) => return Err(e),
    };
    Ok(Store::with_index(backend, index))
}

pub fn save_index(root: &Path, store: &Store<DiskBackend>) -> io::Result<()> {
    let json = serde_json::to_vec_pretty(store.index()).map_err(io::Error::other)?;
    let tmp = index_path(root).with_extension("tmp");
    fs::write(&tmp, json)?;
    fs::rename(tmp, index_path(root))
}
