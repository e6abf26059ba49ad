use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::record::{CheckpointRecord, RecordKind};
use super::StoreError;

/// Contents of the `LATEST` file: the newest complete wave.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatestMarker {
    pub incarnation: u64,
    pub seq: u64,
    pub nc: usize,
}

impl fmt::Display for LatestMarker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {} {}", self.incarnation, self.seq, self.nc)
    }
}

impl std::str::FromStr for LatestMarker {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || StoreError::Corrupt(format!("malformed LATEST marker {s:?}"));
        let mut it = s.split_whitespace();
        let mut next = || it.next().ok_or_else(bad);
        let incarnation = next()?.parse().map_err(|_| bad())?;
        let seq = next()?.parse().map_err(|_| bad())?;
        let nc = next()?.parse().map_err(|_| bad())?;
        Ok(Self {
            incarnation,
            seq,
            nc,
        })
    }
}

enum Backend {
    Memory(BTreeMap<PathBuf, Vec<u8>>),
    Dir(PathBuf),
}

/// Records filed as `<incarnation>/<seq>/<rank>.{baseline|incr}` plus a
/// `LATEST` marker, in memory or under a directory.
pub struct CheckpointStore {
    backend: Backend,
}

pub fn record_path(incarnation: u64, seq: u64, rank: usize, kind: RecordKind) -> PathBuf {
    PathBuf::from(incarnation.to_string())
        .join(seq.to_string())
        .join(format!("{rank}.{}", kind.extension()))
}

const LATEST: &str = "LATEST";

impl CheckpointStore {
    pub fn memory() -> Self {
        Self {
            backend: Backend::Memory(BTreeMap::new()),
        }
    }

    pub fn dir(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            backend: Backend::Dir(root),
        })
    }

    pub fn root(&self) -> Option<&Path> {
        match &self.backend {
            Backend::Dir(p) => Some(p),
            Backend::Memory(_) => None,
        }
    }

    fn write_file(&mut self, rel: &Path, bytes: &[u8]) -> Result<(), StoreError> {
        match &mut self.backend {
            Backend::Memory(m) => {
                m.insert(rel.to_path_buf(), bytes.to_vec());
            }
            Backend::Dir(root) => {
                let path = root.join(rel);
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::write(path, bytes)?;
            }
        }
        Ok(())
    }

    fn read_file(&self, rel: &Path) -> Result<Option<Vec<u8>>, StoreError> {
        match &self.backend {
            Backend::Memory(m) => Ok(m.get(rel).cloned()),
            Backend::Dir(root) => match fs::read(root.join(rel)) {
                Ok(b) => Ok(Some(b)),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
                Err(e) => Err(e.into()),
            },
        }
    }

    /// Files a record. Baselines go under their launch rank, incremental
    /// records under their logical rank.
    pub fn put(&mut self, rec: &CheckpointRecord) -> Result<(), StoreError> {
        let rank = match rec.kind {
            RecordKind::Baseline => rec.launch_rank,
            RecordKind::Incremental => rec.logical_rank,
        };
        self.write_file(
            &record_path(rec.incarnation, rec.seq, rank, rec.kind),
            &rec.encode(),
        )
    }

    pub fn get(
        &self,
        incarnation: u64,
        seq: u64,
        rank: usize,
        kind: RecordKind,
    ) -> Result<Option<CheckpointRecord>, StoreError> {
        match self.read_file(&record_path(incarnation, seq, rank, kind))? {
            Some(bytes) => CheckpointRecord::decode(&bytes).map(Some),
            None => Ok(None),
        }
    }

    pub fn latest(&self) -> Result<Option<LatestMarker>, StoreError> {
        match self.read_file(Path::new(LATEST))? {
            Some(bytes) => {
                let text = String::from_utf8(bytes)
                    .map_err(|_| StoreError::Corrupt("LATEST is not UTF-8".into()))?;
                text.parse().map(Some)
            }
            None => Ok(None),
        }
    }

    /// Loads every incremental record of a wave, failing unless all `nc`
    /// ranks are present, decodable and consistent.
    pub fn load_wave(&self, marker: LatestMarker) -> Result<Vec<CheckpointRecord>, StoreError> {
        let mut out = Vec::with_capacity(marker.nc);
        let mut step = None;
        for rank in 0..marker.nc {
            let rec = self
                .get(
                    marker.incarnation,
                    marker.seq,
                    rank,
                    RecordKind::Incremental,
                )?
                .ok_or(StoreError::IncompleteWave {
                    incarnation: marker.incarnation,
                    seq: marker.seq,
                    rank,
                })?;
            if rec.logical_rank != rank || rec.seq != marker.seq || rec.world.n != marker.nc {
                return Err(StoreError::Corrupt(format!(
                    "record for rank {rank} does not belong to {marker:?}"
                )));
            }
            if *step.get_or_insert(rec.step) != rec.step {
                return Err(StoreError::Corrupt(format!(
                    "wave {marker:?} mixes program points"
                )));
            }
            out.push(rec);
        }
        Ok(out)
    }

    pub fn wave_complete(&self, marker: LatestMarker) -> bool {
        self.load_wave(marker).is_ok()
    }

    /// Points `LATEST` at `marker`, which must name a complete wave. On a
    /// directory store this is a write to a temporary file plus a rename.
    pub fn commit_latest(&mut self, marker: LatestMarker) -> Result<(), StoreError> {
        self.load_wave(marker)?;
        let text = marker.to_string();
        match &mut self.backend {
            Backend::Memory(m) => {
                m.insert(PathBuf::from(LATEST), text.into_bytes());
            }
            Backend::Dir(root) => {
                let tmp = root.join("LATEST.tmp");
                let mut f = fs::File::create(&tmp)?;
                f.write_all(text.as_bytes())?;
                f.sync_all()?;
                fs::rename(&tmp, root.join(LATEST))?;
            }
        }
        Ok(())
    }

    /// Every record path currently stored, relative to the root.
    pub fn list(&self) -> Result<Vec<PathBuf>, StoreError> {
        match &self.backend {
            Backend::Memory(m) => Ok(m
                .keys()
                .filter(|p| p.as_os_str() != LATEST)
                .cloned()
                .collect()),
            Backend::Dir(root) => {
                let mut out = Vec::new();
                let mut stack = vec![root.clone()];
                while let Some(dir) = stack.pop() {
                    for entry in fs::read_dir(&dir)? {
                        let path = entry?.path();
                        if path.is_dir() {
                            stack.push(path);
                        } else if path
                            .extension()
                            .is_some_and(|e| e == "baseline" || e == "incr")
                        {
                            out.push(path.strip_prefix(root).unwrap().to_path_buf());
                        }
                    }
                }
                out.sort();
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkpoint::record::WorldDigest;
    use crate::runtime::RuntimeSnapshot;

    fn rec(rank: usize, seq: u64, kind: RecordKind) -> CheckpointRecord {
        CheckpointRecord {
            logical_rank: rank,
            launch_rank: rank,
            incarnation: 0,
            kind,
            seq,
            step: 5,
            app_state: vec![rank as u8],
            runtime_state: RuntimeSnapshot::default(),
            world: WorldDigest {
                n: 2,
                m: 0,
                epoch: 0,
            },
        }
    }

    #[test]
    fn marker_text_round_trips() {
        let m = LatestMarker {
            incarnation: 2,
            seq: 7,
            nc: 6,
        };
        assert_eq!(m.to_string(), "2 7 6\n");
        assert_eq!(m.to_string().parse::<LatestMarker>().unwrap(), m);
        assert!("2 7".parse::<LatestMarker>().is_err());
    }

    #[test]
    fn commit_refuses_incomplete_wave() {
        for mut store in [
            CheckpointStore::memory(),
            CheckpointStore::dir(tempfile::tempdir().unwrap().keep()).unwrap(),
        ] {
            let m = LatestMarker {
                incarnation: 0,
                seq: 1,
                nc: 2,
            };
            store.put(&rec(0, 1, RecordKind::Incremental)).unwrap();
            assert!(store.commit_latest(m).is_err());
            assert_eq!(store.latest().unwrap(), None);
            store.put(&rec(1, 1, RecordKind::Incremental)).unwrap();
            store.commit_latest(m).unwrap();
            assert_eq!(store.latest().unwrap(), Some(m));
            assert_eq!(store.load_wave(m).unwrap().len(), 2);
        }
    }

    #[test]
    fn directory_layout() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = CheckpointStore::dir(dir.path()).unwrap();
        store.put(&rec(1, 0, RecordKind::Baseline)).unwrap();
        store.put(&rec(0, 1, RecordKind::Incremental)).unwrap();
        store.put(&rec(1, 1, RecordKind::Incremental)).unwrap();
        store
            .commit_latest(LatestMarker {
                incarnation: 0,
                seq: 1,
                nc: 2,
            })
            .unwrap();
        assert!(dir.path().join("0/0/1.baseline").is_file());
        assert!(dir.path().join("0/1/0.incr").is_file());
        assert_eq!(
            fs::read_to_string(dir.path().join("LATEST")).unwrap(),
            "0 1 2\n"
        );
        assert_eq!(store.list().unwrap().len(), 3);
    }
}
