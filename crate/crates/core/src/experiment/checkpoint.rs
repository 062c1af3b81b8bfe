//! Versioned little-endian binary checkpoint of a policy network.
//!
//! Layout: magic `SSATCKPT`, format version (u32), state layout version (u32),
//! fingerprint length (u32) and UTF-8 bytes, layer count (u32), layer sizes
//! (u64 each), parameter count (u64), parameters (f64 each).

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::env::STATE_LAYOUT_VERSION;
use crate::reinforcepp::PolicyNetwork;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"SSATCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub fingerprint: String,
    pub network: PolicyNetwork,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        b.extend_from_slice(&STATE_LAYOUT_VERSION.to_le_bytes());
        b.extend_from_slice(&(self.fingerprint.len() as u32).to_le_bytes());
        b.extend_from_slice(self.fingerprint.as_bytes());
        let sizes = self.network.sizes();
        b.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        for &s in sizes {
            b.extend_from_slice(&(s as u64).to_le_bytes());
        }
        let params = self.network.params();
        b.extend_from_slice(&(params.len() as u64).to_le_bytes());
        for p in params {
            b.extend_from_slice(&p.to_le_bytes());
        }
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let layout = r.u32()?;
        if layout != STATE_LAYOUT_VERSION {
            return Err(Error::Checkpoint(format!(
                "checkpoint built for state layout {layout}, this build uses {STATE_LAYOUT_VERSION}"
            )));
        }
        let flen = r.u32()? as usize;
        let fingerprint = String::from_utf8(r.take(flen)?.to_vec())
            .map_err(|_| Error::Checkpoint("fingerprint is not UTF-8".into()))?;
        let layers = r.u32()? as usize;
        let sizes = (0..layers).map(|_| r.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let count = r.u64()? as usize;
        if count > bytes.len() / 8 {
            return Err(Error::Checkpoint("truncated parameter block".into()));
        }
        let params = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after parameters".into()));
        }
        let network = PolicyNetwork::from_params(sizes, params).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(Self { fingerprint, network })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    /// Hex SHA-256 of the serialised checkpoint.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
