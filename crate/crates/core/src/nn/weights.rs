//! The RAES weight file.
//!
//! Little-endian, no padding:
//!
//! ```text
//! magic        "RAES"
//! version      u32 (= 1)
//! fingerprint  [u8; 32]   SHA-256 of the architecture table
//! count        u32
//! count x {
//!     name_len u16, name (UTF-8)
//!     dtype    u8 (0 = f32)
//!     ndim     u8, dims u32 x ndim
//!     data     f32 x prod(dims)
//! }
//! ```

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use crate::error::Error;
use crate::nn::arch::Architecture;
use crate::nn::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"RAES";
pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WeightError {
    #[error("bad magic: expected \"RAES\", found {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated weight file while reading {0}")]
    Truncated(String),
    #[error("architecture fingerprint mismatch")]
    FingerprintMismatch,
    #[error("tensor `{name}` has unsupported dtype {dtype}")]
    UnsupportedDtype { name: String, dtype: u8 },
    #[error("tensor name is not valid UTF-8")]
    InvalidName,
    #[error("shape mismatch for tensor `{name}`: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("duplicate tensor `{0}`")]
    DuplicateTensor(String),
    #[error("missing tensor `{0}`")]
    MissingTensor(String),
    #[error("unexpected tensor `{0}`")]
    UnexpectedTensor(String),
    #[error("tensor `{0}` contains non-finite values")]
    NonFinite(String),
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(usize),
}

/// Immutable, validated set of named parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBundle {
    architecture: Architecture,
    tensors: Vec<(String, Tensor)>,
    index: HashMap<String, usize>,
}

impl WeightBundle {
    /// Validates `tensors` against the layer table and stores them in
    /// canonical order.
    pub fn from_tensors(
        architecture: Architecture,
        tensors: Vec<(String, Tensor)>,
    ) -> Result<Self, WeightError> {
        let mut by_name: HashMap<String, Tensor> = HashMap::with_capacity(tensors.len());
        for (name, t) in tensors {
            if by_name.contains_key(&name) {
                return Err(WeightError::DuplicateTensor(name));
            }
            by_name.insert(name, t);
        }
        let specs = architecture.tensor_specs();
        let mut ordered = Vec::with_capacity(specs.len());
        for (name, shape) in &specs {
            let t = by_name
                .remove(name)
                .ok_or_else(|| WeightError::MissingTensor(name.clone()))?;
            if t.shape() != shape.as_slice() {
                return Err(WeightError::ShapeMismatch {
                    name: name.clone(),
                    expected: shape.clone(),
                    found: t.shape().to_vec(),
                });
            }
            if !t.is_finite() {
                return Err(WeightError::NonFinite(name.clone()));
            }
            ordered.push((name.clone(), t));
        }
        if let Some(extra) = by_name.into_keys().min() {
            return Err(WeightError::UnexpectedTensor(extra));
        }
        let index = ordered
            .iter()
            .enumerate()
            .map(|(i, (n, _))| (n.clone(), i))
            .collect();
        Ok(Self {
            architecture,
            tensors: ordered,
            index,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.tensors[i].1)
    }

    pub fn tensors(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|(_, t)| t.len()).sum()
    }

    /// Serializes in canonical order; identical bundles give identical bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(44 + self.parameter_count() * 4);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.architecture.fingerprint());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(DTYPE_F32);
            out.push(t.shape().len() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> crate::Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> crate::Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(load_weights(&bytes)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], WeightError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| WeightError::Truncated(what.to_string()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, WeightError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, WeightError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, WeightError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parses and validates a weight file for the default architecture.
pub fn load_weights(bytes: &[u8]) -> Result<WeightBundle, WeightError> {
    load_weights_for(bytes, Architecture::default())
}

pub fn load_weights_for(
    bytes: &[u8],
    architecture: Architecture,
) -> Result<WeightBundle, WeightError> {
    let mut r = Reader { bytes, pos: 0 };
    if bytes.len() < 4 {
        return Err(WeightError::Truncated("magic".into()));
    }
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(WeightError::BadMagic(magic));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(WeightError::UnsupportedVersion(version));
    }
    let fingerprint: [u8; 32] = r.take(32, "fingerprint")?.try_into().unwrap();
    let count = r.u32("tensor count")? as usize;

    // Records are parsed before the fingerprint is compared so that damage
    // is reported as truncation rather than as a mismatch.
    let mut tensors = Vec::with_capacity(count.min(1024));
    for i in 0..count {
        let ctx = format!("tensor #{i}");
        let name_len = r.u16(&ctx)? as usize;
        let name = std::str::from_utf8(r.take(name_len, &ctx)?)
            .map_err(|_| WeightError::InvalidName)?
            .to_string();
        let dtype = r.u8(&name)?;
        if dtype != DTYPE_F32 {
            return Err(WeightError::UnsupportedDtype { name, dtype });
        }
        let ndim = r.u8(&name)? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.u32(&name)? as usize);
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| WeightError::Truncated(name.clone()))?;
        let raw = r.take(n, &name)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::new(dims, data).expect("length matches dims");
        tensors.push((name, t));
    }
    if r.pos != bytes.len() {
        return Err(WeightError::TrailingBytes(bytes.len() - r.pos));
    }
    if fingerprint != architecture.fingerprint() {
        return Err(WeightError::FingerprintMismatch);
    }
    WeightBundle::from_tensors(architecture, tensors)
}
