use std::fmt::Write as _;

use sha2::{Digest, Sha256};

/// Running hash of every dispatched event, with an optional NDJSON dump.
pub struct Trace {
    hasher: Sha256,
    events: u64,
    dump: Option<String>,
}

impl Trace {
    pub fn new(keep_dump: bool) -> Self {
        Self {
            hasher: Sha256::new(),
            events: 0,
            dump: keep_dump.then(String::new),
        }
    }

    pub fn record(&mut self, time: f64, seq: u64, kind: &str, uid: Option<u64>, detail: u64) {
        self.events += 1;
        self.hasher.update(seq.to_le_bytes());
        self.hasher.update(time.to_bits().to_le_bytes());
        self.hasher.update(kind.as_bytes());
        self.hasher
            .update(uid.map_or(u64::MAX, |u| u).to_le_bytes());
        self.hasher.update(detail.to_le_bytes());
        if let Some(out) = self.dump.as_mut() {
            let uid = uid.map_or("null".to_string(), |u| u.to_string());
            let _ = writeln!(
                out,
                r#"{{"seq":{seq},"t":{time},"kind":"{kind}","uid":{uid},"detail":{detail}}}"#
            );
        }
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn hash_hex(&self) -> String {
        let digest = self.hasher.clone().finalize();
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn take_dump(&mut self) -> Option<String> {
        self.dump.take()
    }
}
