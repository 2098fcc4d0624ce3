//! Binary checkpoint container.
//!
//! All integers are little-endian.
//!
//! ```text
//! magic        4 bytes   "MTLB"
//! version      u32       FORMAT_VERSION
//! config_len   u32       byte length of the config block
//! config       UTF-8     canonical JSON object, keys sorted, no whitespace
//! n_tensors    u32
//! per tensor:
//!   name_len   u32
//!   name       UTF-8
//!   rows       u32
//!   cols       u32
//!   data       rows·cols × f64 (IEEE-754 bits), row-major
//! ```
//!
//! Nothing follows the last tensor; trailing bytes are a format error.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 4] = b"MTLB";
pub const FORMAT_VERSION: u32 = 1;

/// Sorted key/value configuration stored at the head of a checkpoint.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigBlock {
    entries: BTreeMap<String, Value>,
}

impl ConfigBlock {
    pub fn new(kind: &str) -> Self {
        let mut b = ConfigBlock::default();
        b.set("kind", kind);
        b
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), Value::String(value.into()));
    }

    pub fn set_json<T: Serialize>(&mut self, key: &str, value: &T) {
        let v = serde_json::to_value(value).expect("config values serialize");
        self.entries.insert(key.to_string(), v);
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.entries
            .get(key)
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Format(format!("config block lacks string key {key:?}")))
    }

    pub fn get_json<T: DeserializeOwned>(&self, key: &str) -> Result<T> {
        let v = self
            .entries
            .get(key)
            .ok_or_else(|| Error::Format(format!("config block lacks key {key:?}")))?;
        serde_json::from_value(v.clone()).map_err(|e| Error::Format(format!("config key {key:?}: {e}")))
    }

    pub fn kind(&self) -> Option<&str> {
        self.entries.get("kind").and_then(Value::as_str)
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        match self.kind() {
            Some(k) if k == kind => Ok(()),
            other => Err(Error::ConfigMismatch(format!(
                "expected a {kind} checkpoint, found {other:?}"
            ))),
        }
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(&self.entries).expect("json maps serialize")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let entries = serde_json::from_str(text).map_err(|e| Error::Format(format!("config block: {e}")))?;
        Ok(ConfigBlock { entries })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ConfigBlock,
    pub tensors: Vec<(String, Matrix)>,
}

impl Checkpoint {
    pub fn new(config: ConfigBlock) -> Self {
        Checkpoint {
            config,
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, m: Matrix) {
        self.tensors.push((name.into(), m));
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    /// The named tensor, which must have `shape`.
    pub fn take_shaped(&self, name: &str, shape: (usize, usize)) -> Result<Matrix> {
        let m = self
            .get(name)
            .ok_or_else(|| Error::ConfigMismatch(format!("tensor {name:?} missing")))?;
        if m.shape() != shape {
            return Err(Error::ConfigMismatch(format!(
                "tensor {name:?} has shape {:?}, expected {shape:?}",
                m.shape()
            )));
        }
        Ok(m.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let config = self.config.to_text();
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(config.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, m) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
            for v in m.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        let magic = r.take(4, "magic")?;
        if magic != MAGIC {
            return Err(Error::Format(format!("bad magic bytes {magic:?}")));
        }
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let config_len = r.u32("config length")? as usize;
        let config_text = std::str::from_utf8(r.take(config_len, "config block")?)
            .map_err(|_| Error::Format("config block is not UTF-8".into()))?;
        let config = ConfigBlock::from_text(config_text)?;
        let count = r.u32("tensor count")?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let name_len = r.u32("tensor name length")? as usize;
            let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
                .to_string();
            let rows = r.u32("tensor rows")? as usize;
            let cols = r.u32("tensor cols")? as usize;
            let n = rows
                .checked_mul(cols)
                .and_then(|n| n.checked_mul(8))
                .ok_or_else(|| Error::Format(format!("tensor {name:?} too large")))?;
            let raw = r.take(n, &name)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            tensors.push((name, Matrix::new(rows, cols, data)?));
        }
        if r.at != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.at)));
        }
        Ok(Checkpoint { config, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.at..end];
                self.at = end;
                Ok(s)
            }
            None => Err(Error::Truncated(format!("{what} at byte {}", self.at))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Checkpoint {
        let mut config = ConfigBlock::new("test");
        config.set_json("widths", &vec![3, 2]);
        config.set("note", "tab\there\nnewline");
        let mut cp = Checkpoint::new(config);
        cp.push("w", Matrix::from_rows(&[[1.0, -0.0, f64::MIN_POSITIVE], [1e300, 0.1, -2.5]]));
        cp.push("b", Matrix::column(&[0.3]));
        cp
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let cp = sample();
        let bytes = cp.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert!(back.get("w").unwrap().bitwise_eq(cp.get("w").unwrap()));
        assert_eq!(back.config.get_json::<Vec<usize>>("widths").unwrap(), vec![3, 2]);
    }

    #[test]
    fn distinct_load_errors() {
        let bytes = sample().to_bytes();
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad_magic), Err(Error::Format(_))));
        let mut bad_version = bytes.clone();
        bad_version[4] = 9;
        assert!(matches!(
            Checkpoint::from_bytes(&bad_version),
            Err(Error::Version { found: 9, .. })
        ));
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Truncated(_))
        ));
        assert!(matches!(Checkpoint::from_bytes(&bytes[..2]), Err(Error::Truncated(_))));
        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(matches!(Checkpoint::from_bytes(&trailing), Err(Error::Format(_))));
    }

    #[test]
    fn shape_checks() {
        let cp = sample();
        assert!(cp.take_shaped("w", (2, 3)).is_ok());
        assert!(matches!(cp.take_shaped("w", (3, 2)), Err(Error::ConfigMismatch(_))));
        assert!(matches!(cp.take_shaped("nope", (1, 1)), Err(Error::ConfigMismatch(_))));
    }

    proptest! {
        #[test]
        fn arbitrary_floats_survive(values in prop::collection::vec(any::<f64>(), 1..20)) {
            let mut cp = Checkpoint::new(ConfigBlock::new("p"));
            cp.push("t", Matrix::column(&values));
            let back = Checkpoint::from_bytes(&cp.to_bytes()).unwrap();
            let got = back.get("t").unwrap();
            prop_assert!(got.data().iter().zip(&values).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
