//! Parameter checkpoints: named tensors with shapes and raw f64 payloads, plus the
//! digest of the producing architecture config. Optimizer state is not persisted;
//! loading starts from fresh Adam moments.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"CGCKPT01";

/// Write every parameter value of `store` to `path`.
pub fn save_checkpoint(store: &ParamStore, config_digest: u64, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&config_digest.to_le_bytes())?;
    w.write_all(&(store.len() as u64).to_le_bytes())?;
    for (name, param) in store.iter() {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
        let (rows, cols) = param.value.shape();
        w.write_all(&(rows as u64).to_le_bytes())?;
        w.write_all(&(cols as u64).to_le_bytes())?;
        for v in param.value.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a checkpoint back as a fresh store plus its config digest.
pub fn load_checkpoint(path: &Path) -> Result<(ParamStore, u64)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "{} is not a parameter checkpoint",
            path.display()
        )));
    }
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8)?;
    let digest = u64::from_le_bytes(buf8);
    r.read_exact(&mut buf8)?;
    let count = u64::from_le_bytes(buf8);
    let mut store = ParamStore::new();
    for _ in 0..count {
        let mut buf4 = [0u8; 4];
        r.read_exact(&mut buf4)?;
        let name_len = u32::from_le_bytes(buf4) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Checkpoint("parameter name is not utf-8".into()))?;
        r.read_exact(&mut buf8)?;
        let rows = u64::from_le_bytes(buf8) as usize;
        r.read_exact(&mut buf8)?;
        let cols = u64::from_le_bytes(buf8) as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            r.read_exact(&mut buf8)?;
            data.push(f64::from_le_bytes(buf8));
        }
        store.insert(&name, Tensor::from_vec(rows, cols, data));
    }
    Ok((store, digest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.ckpt");
        let mut store = ParamStore::new();
        store.insert("layer.w", Tensor::from_vec(2, 3, vec![0.1, 0.2, 0.3, -0.4, 0.5, -0.6]));
        store.insert("layer.b", Tensor::from_vec(1, 3, vec![0.0, 1.5, -2.5]));
        save_checkpoint(&store, 0xfeed, &path).unwrap();
        let (loaded, digest) = load_checkpoint(&path).unwrap();
        assert_eq!(digest, 0xfeed);
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded.value("layer.w").unwrap(), store.value("layer.w").unwrap());
        assert_eq!(loaded.value("layer.b").unwrap(), store.value("layer.b").unwrap());
    }

    #[test]
    fn junk_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"definitely not a checkpoint").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Checkpoint(_))));
    }
}
