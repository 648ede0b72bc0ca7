//! Versioned checkpoint container: magic, version, JSON header with the
//! architecture and seed, then the parameters as little-endian `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ParamLayout, Verifier, VerifierConfig};
use crate::error::{ArtError, Result};

const MAGIC: &[u8; 8] = b"ARTCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: VerifierConfig,
    seed: u64,
    tensors: Vec<(String, usize)>,
}

/// A trained verifier together with the seed that produced it.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub verifier: Verifier,
    pub seed: u64,
}

impl Checkpoint {
    /// Fails unless the stored architecture equals `expected`.
    pub fn ensure_config(&self, expected: &VerifierConfig) -> Result<()> {
        let found = self.verifier.config();
        if found != expected {
            return Err(ArtError::Checkpoint(format!(
                "architecture mismatch: checkpoint has {}, caller expects {}",
                serde_json::to_string(found)?,
                serde_json::to_string(expected)?
            )));
        }
        Ok(())
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let v = &ckpt.verifier;
    let header = Header {
        config: v.config().clone(),
        seed: ckpt.seed,
        tensors: v.layout().named().into_iter().map(|(n, r)| (n, r.len())).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let file = File::create(path).map_err(|e| ArtError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| ArtError::io(path, e);
    out.write_all(MAGIC).map_err(io)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io)?;
    out.write_all(&(json.len() as u64).to_le_bytes()).map_err(io)?;
    out.write_all(&json).map_err(io)?;
    for p in v.params() {
        out.write_all(&p.to_le_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Loads a checkpoint; with `expected`, any architecture difference is an
/// error.
pub fn load_checkpoint(path: &Path, expected: Option<&VerifierConfig>) -> Result<Checkpoint> {
    let bad = |msg: String| ArtError::Checkpoint(format!("{}: {msg}", path.display()));
    let file = File::open(path).map_err(|e| ArtError::io(path, e))?;
    let mut input = BufReader::new(file);
    let mut buf8 = [0u8; 8];
    input.read_exact(&mut buf8).map_err(|_| bad("truncated header".into()))?;
    if &buf8 != MAGIC {
        return Err(bad("not a verifier checkpoint".into()));
    }
    let mut buf4 = [0u8; 4];
    input.read_exact(&mut buf4).map_err(|_| bad("truncated header".into()))?;
    let version = u32::from_le_bytes(buf4);
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("version {version} unsupported (expected {CHECKPOINT_VERSION})")));
    }
    input.read_exact(&mut buf8).map_err(|_| bad("truncated header".into()))?;
    let len = u64::from_le_bytes(buf8) as usize;
    let mut json = vec![0u8; len];
    input.read_exact(&mut json).map_err(|_| bad("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&json)?;
    let layout = ParamLayout::new(&header.config);
    let stored: Vec<(String, usize)> = layout.named().into_iter().map(|(n, r)| (n, r.len())).collect();
    if stored != header.tensors {
        return Err(bad("tensor table does not match the recorded architecture".into()));
    }
    let mut params = Vec::with_capacity(layout.total);
    for _ in 0..layout.total {
        input.read_exact(&mut buf8).map_err(|_| bad("truncated parameter block".into()))?;
        params.push(f64::from_le_bytes(buf8));
    }
    if input.read(&mut buf8).map_err(|e| ArtError::io(path, e))? != 0 {
        return Err(bad("trailing bytes after parameters".into()));
    }
    let ckpt = Checkpoint {
        verifier: Verifier::from_params(header.config, params)?,
        seed: header.seed,
    };
    if let Some(expected) = expected {
        ckpt.ensure_config(expected)?;
    }
    Ok(ckpt)
}
