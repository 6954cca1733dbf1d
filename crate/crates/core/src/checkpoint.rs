//! Binary model checkpoints: a JSON header followed by named little-endian
//! `f64` arrays.
//!
//! Layout: `DQRK` magic, `u32` header length, header JSON, `u32` array count,
//! then per array a `u16` name length, the name, a `u64` value count and the
//! values.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::HashEncoder;
use crate::error::{Error, Result};
use crate::optim::Adam;
use crate::qnet::{QNet, QParams};
use crate::user_model::UserModel;

const MAGIC: &[u8; 4] = b"DQRK";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub encoder_id: String,
    pub d: usize,
    pub model_version: u32,
    /// Slate size and hidden width, absent for user-model-only files.
    pub n: Option<usize>,
    pub h: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: Header,
    pub arrays: BTreeMap<String, Vec<f64>>,
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let (a, b) = self.buf.split_at(n);
        self.buf = b;
        Ok(a)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        let header = serde_json::to_vec(&self.header)?;
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for (name, values) in &self.arrays {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(values.len() as u64).to_le_bytes());
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let hlen = r.u32()? as usize;
        let header: Header = serde_json::from_slice(r.take(hlen)?)?;
        let count = r.u32()?;
        let mut arrays = BTreeMap::new();
        for _ in 0..count {
            let nlen = r.u16()? as usize;
            let name = String::from_utf8(r.take(nlen)?.to_vec()).map_err(|_| Error::Checkpoint("array name is not UTF-8".into()))?;
            let len = r.u64()? as usize;
            let bytes = r.take(len.checked_mul(8).ok_or_else(|| Error::Checkpoint("array too large".into()))?)?;
            let values = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            arrays.insert(name, values);
        }
        if !r.buf.is_empty() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Checkpoint { header, arrays })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }

    fn take(&mut self, name: &str, len: usize) -> Result<Vec<f64>> {
        let v = self
            .arrays
            .remove(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing array {name}")))?;
        if v.len() != len {
            return Err(Error::Checkpoint(format!("array {name} has {} values, expected {len}", v.len())));
        }
        Ok(v)
    }

    fn put_adam(&mut self, prefix: &str, a: &Adam) {
        self.arrays.insert(format!("{prefix}.adam.t"), vec![a.t as f64]);
        self.arrays.insert(format!("{prefix}.adam.m"), a.m.clone());
        self.arrays.insert(format!("{prefix}.adam.v"), a.v.clone());
    }

    fn take_adam(&mut self, prefix: &str, len: usize) -> Result<Adam> {
        let t = self.take(&format!("{prefix}.adam.t"), 1)?[0] as u64;
        Ok(Adam {
            t,
            m: self.take(&format!("{prefix}.adam.m"), len)?,
            v: self.take(&format!("{prefix}.adam.v"), len)?,
        })
    }

    fn put_params(&mut self, prefix: &str, p: &QParams) {
        self.arrays.insert(format!("{prefix}.w1t"), p.w1t.clone());
        self.arrays.insert(format!("{prefix}.b1"), p.b1.clone());
        self.arrays.insert(format!("{prefix}.w2"), p.w2.clone());
        self.arrays.insert(format!("{prefix}.b2"), vec![p.b2]);
    }

    fn take_params(&mut self, prefix: &str, n: usize, d: usize, h: usize) -> Result<QParams> {
        Ok(QParams {
            n,
            d,
            h,
            w1t: self.take(&format!("{prefix}.w1t"), n * d * h)?,
            b1: self.take(&format!("{prefix}.b1"), h)?,
            w2: self.take(&format!("{prefix}.w2"), h)?,
            b2: self.take(&format!("{prefix}.b2"), 1)?[0],
        })
    }

    pub fn from_models(encoder: &HashEncoder, user: &UserModel, qnet: Option<&QNet>) -> Self {
        let mut c = Checkpoint {
            header: Header {
                encoder_id: encoder.id().to_string(),
                d: encoder.dim(),
                model_version: MODEL_VERSION,
                n: qnet.map(QNet::n),
                h: qnet.map(QNet::h),
            },
            arrays: BTreeMap::new(),
        };
        c.arrays.insert("u.w".into(), user.w.clone());
        c.arrays.insert("u.b".into(), user.b.to_vec());
        c.put_adam("u", user.adam());
        if let Some(q) = qnet {
            c.put_params("q.online", &q.online);
            c.put_params("q.target", &q.target);
            c.put_adam("q", q.adam());
            c.arrays.insert("q.steps".into(), vec![q.steps as f64]);
        }
        c
    }

    /// Restores the models, refusing files written for another encoder.
    pub fn into_models(mut self, encoder: &HashEncoder) -> Result<(UserModel, Option<QNet>)> {
        if self.header.encoder_id != encoder.id() || self.header.d != encoder.dim() {
            return Err(Error::Checkpoint(format!(
                "checkpoint encoder {} (d={}) does not match {} (d={})",
                self.header.encoder_id,
                self.header.d,
                encoder.id(),
                encoder.dim()
            )));
        }
        if self.header.model_version != MODEL_VERSION {
            return Err(Error::Checkpoint(format!("unsupported model version {}", self.header.model_version)));
        }
        let d = self.header.d;
        let mut user = UserModel::zeros(d);
        user.w = self.take("u.w", 2 * d)?;
        let b = self.take("u.b", 2)?;
        user.b = [b[0], b[1]];
        user.set_adam(self.take_adam("u", 2 * d + 2)?)?;
        let qnet = match (self.header.n, self.header.h) {
            (Some(n), Some(h)) => {
                let online = self.take_params("q.online", n, d, h)?;
                let target = self.take_params("q.target", n, d, h)?;
                let adam = self.take_adam("q", online.len())?;
                let steps = self.take("q.steps", 1)?[0] as u64;
                Some(QNet::from_params(online, target, adam, steps)?)
            }
            _ => None,
        };
        Ok((user, qnet))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let enc = HashEncoder::new(32).unwrap();
        let user = UserModel::init(32, 4);
        let mut q = QNet::new(3, 32, 5, 7);
        q.online.b2 = 0.1 + 0.2;
        let c = Checkpoint::from_models(&enc, &user, Some(&q));
        let back = Checkpoint::from_bytes(&c.to_bytes().unwrap()).unwrap();
        assert_eq!(back, c);
        let (u2, q2) = back.into_models(&enc).unwrap();
        assert_eq!(u2, user);
        assert_eq!(q2.unwrap(), q);
    }

    #[test]
    fn rejects_other_encoder_and_garbage() {
        let c = Checkpoint::from_models(&HashEncoder::new(32).unwrap(), &UserModel::zeros(32), None);
        assert!(matches!(c.clone().into_models(&HashEncoder::new(64).unwrap()), Err(Error::Checkpoint(_))));
        let mut bytes = c.to_bytes().unwrap();
        bytes.pop();
        assert!(Checkpoint::from_bytes(&bytes).is_err());
        assert!(Checkpoint::from_bytes(b"nope").is_err());
    }
}
