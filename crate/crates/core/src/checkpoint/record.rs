use serde::{Deserialize, Serialize};

use super::StoreError;
use crate::runtime::RuntimeSnapshot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Baseline,
    Incremental,
}

impl RecordKind {
    pub fn extension(self) -> &'static str {
        match self {
            RecordKind::Baseline => "baseline",
            RecordKind::Incremental => "incr",
        }
    }
}

/// Shape of the world that wrote a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldDigest {
    pub n: usize,
    pub m: usize,
    pub epoch: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub logical_rank: usize,
    /// Position in the launch order; baselines are filed under this so a
    /// replica's baseline does not collide with its original's.
    pub launch_rank: usize,
    pub incarnation: u64,
    pub kind: RecordKind,
    pub seq: u64,
    /// Step the process resumes at.
    pub step: u64,
    pub app_state: Vec<u8>,
    pub runtime_state: RuntimeSnapshot,
    pub world: WorldDigest,
}

#[derive(Serialize, Deserialize)]
struct Header {
    logical_rank: usize,
    launch_rank: usize,
    incarnation: u64,
    kind: RecordKind,
    seq: u64,
    step: u64,
    world: WorldDigest,
    app_digest: String,
    body_len: u64,
}

#[derive(Serialize, Deserialize)]
struct Body {
    app_state: Vec<u8>,
    runtime_state: RuntimeSnapshot,
}

pub fn digest_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    use std::fmt::Write;
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

impl CheckpointRecord {
    /// `[u32 LE header len][JSON header][u64 LE body len][bincode body]`.
    pub fn encode(&self) -> Vec<u8> {
        let body = bincode::serialize(&Body {
            app_state: self.app_state.clone(),
            runtime_state: self.runtime_state.clone(),
        })
        .expect("record bodies always serialize");
        let header = serde_json::to_vec(&Header {
            logical_rank: self.logical_rank,
            launch_rank: self.launch_rank,
            incarnation: self.incarnation,
            kind: self.kind,
            seq: self.seq,
            step: self.step,
            world: self.world,
            app_digest: digest_hex(&self.app_state),
            body_len: body.len() as u64,
        })
        .expect("record headers always serialize");
        let mut out = Vec::with_capacity(12 + header.len() + body.len());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(body.len() as u64).to_le_bytes());
        out.extend_from_slice(&body);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, StoreError> {
        let corrupt = |why: &str| StoreError::Corrupt(why.to_string());
        let hlen = u32::from_le_bytes(
            bytes
                .get(..4)
                .ok_or_else(|| corrupt("short header length"))?
                .try_into()
                .unwrap(),
        ) as usize;
        let header_bytes = bytes
            .get(4..4 + hlen)
            .ok_or_else(|| corrupt("truncated header"))?;
        let header: Header =
            serde_json::from_slice(header_bytes).map_err(|e| corrupt(&e.to_string()))?;
        let at = 4 + hlen;
        let blen = u64::from_le_bytes(
            bytes
                .get(at..at + 8)
                .ok_or_else(|| corrupt("short body length"))?
                .try_into()
                .unwrap(),
        ) as usize;
        if blen as u64 != header.body_len {
            return Err(corrupt("body length disagrees with header"));
        }
        let body_bytes = bytes
            .get(at + 8..at + 8 + blen)
            .ok_or_else(|| corrupt("truncated body"))?;
        let body: Body = bincode::deserialize(body_bytes).map_err(|e| corrupt(&e.to_string()))?;
        if digest_hex(&body.app_state) != header.app_digest {
            return Err(corrupt("application state digest mismatch"));
        }
        Ok(Self {
            logical_rank: header.logical_rank,
            launch_rank: header.launch_rank,
            incarnation: header.incarnation,
            kind: header.kind,
            seq: header.seq,
            step: header.step,
            app_state: body.app_state,
            runtime_state: body.runtime_state,
            world: header.world,
        })
    }
}
