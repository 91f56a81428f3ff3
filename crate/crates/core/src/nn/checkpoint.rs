//! `UVCK` checkpoints: magic, `u32` version, `u32`-length JSON config echo,
//! `u32` blob count, then per blob a `u32`-length UTF-8 name, a `u64` value
//! count and little-endian `f32` values.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::layers::Param;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"UVCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: serde_json::Value,
    pub blobs: Vec<(String, Vec<f32>)>,
}

impl Checkpoint {
    pub fn from_params(config: serde_json::Value, params: &[&mut Param], buffers: &[(String, &mut Vec<f64>)]) -> Self {
        let mut blobs: Vec<(String, Vec<f32>)> = params
            .iter()
            .map(|p| (p.name.clone(), p.value.iter().map(|&v| v as f32).collect()))
            .collect();
        blobs.extend(buffers.iter().map(|(n, v)| (n.clone(), v.iter().map(|&x| x as f32).collect())));
        Checkpoint { config, blobs }
    }

    /// Copies blobs into matching parameters and buffers; every one of them
    /// must be present with the right length.
    pub fn restore(&self, params: &mut [&mut Param], buffers: &mut [(String, &mut Vec<f64>)]) -> Result<()> {
        let find = |name: &str, len: usize| -> Result<&Vec<f32>> {
            let (_, b) = self
                .blobs
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| Error::Format(format!("checkpoint has no blob '{name}'")))?;
            if b.len() != len {
                return Err(Error::CountMismatch {
                    what: "checkpoint blob length",
                    expected: len,
                    got: b.len(),
                });
            }
            Ok(b)
        };
        for p in params.iter_mut() {
            let b = find(&p.name, p.value.len())?;
            p.value.iter_mut().zip(b).for_each(|(v, &x)| *v = x as f64);
        }
        for (name, v) in buffers.iter_mut() {
            let b = find(name, v.len())?;
            v.iter_mut().zip(b).for_each(|(v, &x)| *v = x as f64);
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = self.config.to_string();
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        out.extend_from_slice(cfg.as_bytes());
        out.extend_from_slice(&(self.blobs.len() as u32).to_le_bytes());
        for (name, data) in &self.blobs {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(data.len() as u64).to_le_bytes());
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = buf.get(pos..pos + n).ok_or(Error::UnexpectedEof)?;
            pos += n;
            Ok(s)
        };
        if take(4).map_err(|_| Error::Format("not a checkpoint".into()))? != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint".into()));
        }
        let u32_of = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
        let version = u32_of(take(4)?);
        if version != VERSION {
            return Err(Error::Version(version));
        }
        let len = u32_of(take(4)?) as usize;
        let config = serde_json::from_slice(take(len)?).map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
        let count = u32_of(take(4)?) as usize;
        let mut blobs = Vec::with_capacity(count);
        for _ in 0..count {
            let n = u32_of(take(4)?) as usize;
            let name = String::from_utf8(take(n)?.to_vec()).map_err(|_| Error::Format("blob name is not UTF-8".into()))?;
            let len = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
            let raw = take(len.checked_mul(4).ok_or(Error::UnexpectedEof)?)?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            blobs.push((name, data));
        }
        Ok(Checkpoint { config, blobs })
    }
}

/// Writes to a temporary file next to `path`, then renames over it.
pub fn save_checkpoint(ck: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&ck.to_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_round_trip() {
        let ck = Checkpoint {
            config: serde_json::json!({"lr": 1e-4}),
            blobs: vec![("a.weight".into(), vec![1.5, -2.25]), ("b".into(), vec![])],
        };
        assert_eq!(Checkpoint::from_bytes(&ck.to_bytes()).unwrap(), ck);
        let bytes = ck.to_bytes();
        assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 2]), Err(Error::UnexpectedEof)));
    }
}
