//! Binary model snapshots.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes  "BCPNNSNP"
//! version  u32
//! count    u32      number of sections
//! section  tag [u8; 4], length u64, payload
//! ...
//! checksum 32 bytes SHA-256 of every preceding byte
//! ```
//!
//! Sections: `CONF` (config JSON), `PRE ` / `POST` / `JONT` (f64 traces),
//! `MASK` (one byte per input x hidden hypercolumn pair), `UPDC` (u64
//! update count) and, for recurrent models, `RJNT` (f64 hidden x hidden
//! joint traces). Encoding is a pure function of the model, so a
//! save-load-save cycle reproduces the file byte for byte.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::{Mask, NetworkConfig};
use crate::error::{Error, Result};
use crate::network::Model;
use crate::recurrent::RecurrentTraces;
use crate::traces::TraceState;

pub const MAGIC: &[u8; 8] = b"BCPNNSNP";
pub const VERSION: u32 = 1;

fn section(out: &mut Vec<u8>, tag: &[u8; 4], payload: &[u8]) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

fn floats(xs: &[f64]) -> Vec<u8> {
    xs.iter().flat_map(|x| x.to_le_bytes()).collect()
}

pub fn encode(model: &Model) -> Result<Vec<u8>> {
    let t = model.traces();
    let mut sections: Vec<(&[u8; 4], Vec<u8>)> = vec![
        (b"CONF", serde_json::to_vec(model.config())?),
        (b"PRE ", floats(t.pre())),
        (b"POST", floats(t.post())),
        (b"JONT", floats(t.joint())),
        (b"MASK", t.mask().bits().iter().map(|&b| b as u8).collect()),
        (b"UPDC", t.update_count().to_le_bytes().to_vec()),
    ];
    if let Some(r) = model.recurrent() {
        sections.push((b"RJNT", floats(r.joint())));
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
    for (tag, payload) in &sections {
        section(&mut out, tag, payload);
    }
    let sum = Sha256::digest(&out);
    out.extend_from_slice(&sum);
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format("truncated snapshot".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn to_floats(tag: &str, b: &[u8]) -> Result<Vec<f64>> {
    if b.len() % 8 != 0 {
        return Err(Error::Format(format!("section {tag}: length {} is not a multiple of 8", b.len())));
    }
    Ok(b.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < MAGIC.len() + 8 + 32 {
        return Err(Error::Format("file too short to be a snapshot".into()));
    }
    let (body, sum) = bytes.split_at(bytes.len() - 32);
    if &body[..8] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    if Sha256::digest(body).as_slice() != sum {
        return Err(Error::Format("checksum mismatch".into()));
    }
    let mut r = Reader { bytes: body, pos: 8 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    let count = r.u32()?;
    let mut conf = None;
    let (mut pre, mut post, mut joint, mut mask, mut updates, mut rjoint) = (None, None, None, None, None, None);
    for _ in 0..count {
        let tag: [u8; 4] = r.take(4)?.try_into().unwrap();
        let len = usize::try_from(r.u64()?).map_err(|_| Error::Format("section too long".into()))?;
        let payload = r.take(len)?;
        let name = String::from_utf8_lossy(&tag).into_owned();
        match &tag {
            b"CONF" => conf = Some(serde_json::from_slice::<NetworkConfig>(payload)?),
            b"PRE " => pre = Some(to_floats(&name, payload)?),
            b"POST" => post = Some(to_floats(&name, payload)?),
            b"JONT" => joint = Some(to_floats(&name, payload)?),
            b"MASK" => mask = Some(payload.to_vec()),
            b"UPDC" => {
                let b: [u8; 8] = payload
                    .try_into()
                    .map_err(|_| Error::Format("UPDC must hold 8 bytes".into()))?;
                updates = Some(u64::from_le_bytes(b));
            }
            b"RJNT" => rjoint = Some(to_floats(&name, payload)?),
            _ => return Err(Error::Format(format!("unknown section {name:?}"))),
        }
    }
    if r.pos != body.len() {
        return Err(Error::Format("trailing bytes after last section".into()));
    }
    let missing = |s: &str| Error::Format(format!("missing section {s}"));
    let config = conf.ok_or_else(|| missing("CONF"))?;
    config.validate()?;
    let (ni, nh) = (config.input.len(), config.hidden.len());
    let bits = mask.ok_or_else(|| missing("MASK"))?;
    if bits.len() != ni * nh || bits.iter().any(|&b| b > 1) {
        return Err(Error::Format("mask section does not match the configuration".into()));
    }
    let mask = Mask::from_bits(ni, nh, bits.iter().map(|&b| b == 1).collect());
    let traces = TraceState::from_parts(
        &config,
        pre.ok_or_else(|| missing("PRE "))?,
        post.ok_or_else(|| missing("POST"))?,
        joint.ok_or_else(|| missing("JONT"))?,
        mask,
        updates.ok_or_else(|| missing("UPDC"))?,
    )?;
    let recurrent = match rjoint {
        Some(j) => Some(RecurrentTraces::from_joint(&config.hidden_layout(), j)?),
        None => None,
    };
    Model::from_traces(config, traces, recurrent)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, encode(model)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Model> {
    decode(&std::fs::read(path)?)
}

/// Hex SHA-256 of the encoded snapshot.
pub fn digest(model: &Model) -> Result<String> {
    Ok(hex::encode(Sha256::digest(encode(model)?)))
}
