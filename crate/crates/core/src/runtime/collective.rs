//! Collectives as rounds of logical transfers.
//!
//! Each collective is expressed as transfers between logical ranks, keyed by
//! `(collective seq, phase, source rank)`. The same replica mapping that
//! routes point-to-point traffic routes every transfer, so the
//! computational side, the replica side and the fill-ins from unreplicated
//! ranks all fall out of one rule. Reductions fold contributions in rank
//! order so every copy of every rank computes bit-identical results.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReduceOp {
    SumF64,
    MaxF64,
    MinF64,
    SumU64,
}

impl ReduceOp {
    /// Element-wise `acc = acc (op) rhs` over little-endian 8-byte words.
    pub fn apply(self, acc: &mut [u8], rhs: &[u8]) -> Result<(), CollectiveError> {
        if acc.len() != rhs.len() || !acc.len().is_multiple_of(8) {
            return Err(CollectiveError::ReduceLength {
                left: acc.len(),
                right: rhs.len(),
            });
        }
        for (a, b) in acc.chunks_exact_mut(8).zip(rhs.chunks_exact(8)) {
            let (x, y) = (
                <[u8; 8]>::try_from(&*a).unwrap(),
                <[u8; 8]>::try_from(b).unwrap(),
            );
            let out = match self {
                ReduceOp::SumF64 => (f64::from_le_bytes(x) + f64::from_le_bytes(y)).to_le_bytes(),
                ReduceOp::MaxF64 => f64::from_le_bytes(x)
                    .max(f64::from_le_bytes(y))
                    .to_le_bytes(),
                ReduceOp::MinF64 => f64::from_le_bytes(x)
                    .min(f64::from_le_bytes(y))
                    .to_le_bytes(),
                ReduceOp::SumU64 => u64::from_le_bytes(x)
                    .wrapping_add(u64::from_le_bytes(y))
                    .to_le_bytes(),
            };
            a.copy_from_slice(&out);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CollKind {
    Barrier,
    Bcast { root: usize },
    Allreduce { op: ReduceOp },
    Gather { root: usize },
    Scatter { root: usize },
    Allgather,
    Alltoall,
}

impl CollKind {
    /// Digest of kind and parameters; every process must agree on it for a
    /// given collective sequence number.
    pub fn digest(&self) -> u64 {
        let bytes = bincode::serialize(self).expect("collective kinds always serialize");
        let d = Sha256::digest(&bytes);
        u64::from_le_bytes(d[..8].try_into().unwrap())
    }

    pub fn root(&self) -> Option<usize> {
        match self {
            CollKind::Bcast { root } | CollKind::Gather { root } | CollKind::Scatter { root } => {
                Some(*root)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CollectiveError {
    #[error("reduction buffers differ in length ({left} vs {right}) or are not 8-byte aligned")]
    ReduceLength { left: usize, right: usize },
    #[error("root {root} out of range for {n} ranks")]
    BadRoot { root: usize, n: usize },
    #[error("expected {expected} parts, got {got}")]
    PartCount { expected: usize, got: usize },
    #[error("collective {seq}: digest mismatch ({mine:#x} vs {theirs:#x})")]
    Mismatch { seq: u64, mine: u64, theirs: u64 },
}

/// What a rank contributes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollInput {
    None,
    Single(Vec<u8>),
    Parts(Vec<Vec<u8>>),
}

/// One outgoing logical transfer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub phase: u8,
    pub dest: usize,
    pub data: Vec<u8>,
}

/// A collective in progress on one rank.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollOp {
    pub seq: u64,
    pub kind: CollKind,
    pub me: usize,
    pub n: usize,
    input: CollInput,
    /// Root has already folded/forwarded and emitted its phase-1 transfers.
    forwarded: bool,
}

/// Progress made by one call to [`CollOp::progress`].
#[derive(Debug, Default, PartialEq)]
pub struct Progress {
    pub outgoing: Vec<Transfer>,
    pub result: Option<Vec<Vec<u8>>>,
}

pub type Inbox = BTreeMap<(u64, u8, usize), Vec<u8>>;

impl CollOp {
    /// Validates the call and returns the op with its first-round transfers.
    pub fn start(
        seq: u64,
        kind: CollKind,
        me: usize,
        n: usize,
        input: CollInput,
    ) -> Result<(Self, Vec<Transfer>), CollectiveError> {
        if let Some(root) = kind.root() {
            if root >= n {
                return Err(CollectiveError::BadRoot { root, n });
            }
        }
        let parts_needed = match &kind {
            CollKind::Scatter { root } if *root == me => Some(n),
            CollKind::Alltoall => Some(n),
            _ => None,
        };
        if let (Some(expected), CollInput::Parts(p)) = (parts_needed, &input) {
            if p.len() != expected {
                return Err(CollectiveError::PartCount {
                    expected,
                    got: p.len(),
                });
            }
        }
        let single = |input: &CollInput| match input {
            CollInput::Single(d) => d.clone(),
            _ => Vec::new(),
        };
        let part = |input: &CollInput, d: usize| match input {
            CollInput::Parts(p) => p.get(d).cloned().unwrap_or_default(),
            _ => Vec::new(),
        };
        let others = (0..n).filter(|d| *d != me);
        let outgoing: Vec<Transfer> = match &kind {
            CollKind::Barrier | CollKind::Allreduce { .. } => {
                if me == 0 {
                    Vec::new()
                } else {
                    vec![Transfer {
                        phase: 0,
                        dest: 0,
                        data: single(&input),
                    }]
                }
            }
            CollKind::Bcast { root } => {
                if me == *root {
                    others
                        .map(|d| Transfer {
                            phase: 0,
                            dest: d,
                            data: single(&input),
                        })
                        .collect()
                } else {
                    Vec::new()
                }
            }
            CollKind::Gather { root } => {
                if me == *root {
                    Vec::new()
                } else {
                    vec![Transfer {
                        phase: 0,
                        dest: *root,
                        data: single(&input),
                    }]
                }
            }
            CollKind::Scatter { root } => {
                if me == *root {
                    others
                        .map(|d| Transfer {
                            phase: 0,
                            dest: d,
                            data: part(&input, d),
                        })
                        .collect()
                } else {
                    Vec::new()
                }
            }
            CollKind::Allgather => others
                .map(|d| Transfer {
                    phase: 0,
                    dest: d,
                    data: single(&input),
                })
                .collect(),
            CollKind::Alltoall => others
                .map(|d| Transfer {
                    phase: 0,
                    dest: d,
                    data: part(&input, d),
                })
                .collect(),
        };
        Ok((
            Self {
                seq,
                kind,
                me,
                n,
                input,
                forwarded: false,
            },
            outgoing,
        ))
    }

    /// Every `(phase, source)` this rank must still receive.
    pub fn expected_inputs(&self) -> Vec<(u8, usize)> {
        let others = (0..self.n).filter(|s| *s != self.me);
        match &self.kind {
            CollKind::Barrier | CollKind::Allreduce { .. } => {
                if self.me == 0 {
                    others.map(|s| (0, s)).collect()
                } else {
                    vec![(1, 0)]
                }
            }
            CollKind::Bcast { root } | CollKind::Scatter { root } => {
                if self.me == *root {
                    Vec::new()
                } else {
                    vec![(0, *root)]
                }
            }
            CollKind::Gather { root } => {
                if self.me == *root {
                    others.map(|s| (0, s)).collect()
                } else {
                    Vec::new()
                }
            }
            CollKind::Allgather | CollKind::Alltoall => others.map(|s| (0, s)).collect(),
        }
    }

    fn have_all(&self, inbox: &Inbox) -> bool {
        self.expected_inputs()
            .iter()
            .all(|(p, s)| inbox.contains_key(&(self.seq, *p, *s)))
    }

    fn own_single(&self) -> Vec<u8> {
        match &self.input {
            CollInput::Single(d) => d.clone(),
            _ => Vec::new(),
        }
    }

    /// Advances the op against received transfers. Inputs consumed from the
    /// inbox are left in place; the caller clears them on completion.
    pub fn progress(&mut self, inbox: &Inbox) -> Result<Progress, CollectiveError> {
        let get = |p: u8, s: usize| inbox.get(&(self.seq, p, s)).cloned().unwrap_or_default();
        let mut out = Progress::default();
        match self.kind.clone() {
            CollKind::Barrier | CollKind::Allreduce { .. } => {
                if self.me == 0 {
                    if !self.forwarded && self.have_all(inbox) {
                        let mut acc = self.own_single();
                        if let CollKind::Allreduce { op } = self.kind {
                            for s in 1..self.n {
                                op.apply(&mut acc, &get(0, s))?;
                            }
                        }
                        self.forwarded = true;
                        out.outgoing = (1..self.n)
                            .map(|d| Transfer {
                                phase: 1,
                                dest: d,
                                data: acc.clone(),
                            })
                            .collect();
                        out.result = Some(vec![acc]);
                    }
                } else if self.have_all(inbox) {
                    out.result = Some(vec![get(1, 0)]);
                }
            }
            CollKind::Bcast { root } => {
                if self.me == root {
                    out.result = Some(vec![self.own_single()]);
                } else if self.have_all(inbox) {
                    out.result = Some(vec![get(0, root)]);
                }
            }
            CollKind::Scatter { root } => {
                if self.me == root {
                    let own = match &self.input {
                        CollInput::Parts(p) => p[root].clone(),
                        _ => Vec::new(),
                    };
                    out.result = Some(vec![own]);
                } else if self.have_all(inbox) {
                    out.result = Some(vec![get(0, root)]);
                }
            }
            CollKind::Gather { root } => {
                if self.me != root {
                    out.result = Some(Vec::new());
                } else if self.have_all(inbox) {
                    let own = self.own_single();
                    out.result = Some(
                        (0..self.n)
                            .map(|s| if s == self.me { own.clone() } else { get(0, s) })
                            .collect(),
                    );
                }
            }
            CollKind::Allgather => {
                if self.have_all(inbox) {
                    let own = self.own_single();
                    out.result = Some(
                        (0..self.n)
                            .map(|s| if s == self.me { own.clone() } else { get(0, s) })
                            .collect(),
                    );
                }
            }
            CollKind::Alltoall => {
                if self.have_all(inbox) {
                    let own = match &self.input {
                        CollInput::Parts(p) => p[self.me].clone(),
                        _ => Vec::new(),
                    };
                    out.result = Some(
                        (0..self.n)
                            .map(|s| if s == self.me { own.clone() } else { get(0, s) })
                            .collect(),
                    );
                }
            }
        }
        Ok(out)
    }
}

/// Logged record of one collective on one process, sufficient to replay
/// its outgoing transfers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectiveLogEntry {
    pub collective_seq: u64,
    pub kind: CollKind,
    pub digest: u64,
    pub outgoing: Vec<Transfer>,
    pub result: Option<Vec<Vec<u8>>>,
    pub completed_at: Option<f64>,
}

impl CollectiveLogEntry {
    pub fn bytes(&self) -> usize {
        self.outgoing.iter().map(|t| t.data.len()).sum::<usize>()
            + self.result.iter().flatten().map(Vec::len).sum::<usize>()
    }
}

pub fn encode_f64s(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_f64s(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

pub fn encode_u64s(values: &[u64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_u64s(bytes: &[u8]) -> Vec<u64> {
    bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Runs one collective among `n` ranks with instantaneous delivery.
    fn run_all(kind: CollKind, inputs: Vec<CollInput>) -> Vec<Vec<Vec<u8>>> {
        let n = inputs.len();
        let mut inboxes: Vec<Inbox> = vec![Inbox::new(); n];
        let mut ops = Vec::new();
        for (me, input) in inputs.into_iter().enumerate() {
            let (op, out) = CollOp::start(7, kind.clone(), me, n, input).unwrap();
            for t in out {
                inboxes[t.dest].insert((7, t.phase, me), t.data);
            }
            ops.push(op);
        }
        let mut results: Vec<Option<Vec<Vec<u8>>>> = vec![None; n];
        for _ in 0..3 {
            for me in 0..n {
                if results[me].is_some() {
                    continue;
                }
                let p = ops[me].progress(&inboxes[me]).unwrap();
                for t in p.outgoing {
                    inboxes[t.dest].insert((7, t.phase, me), t.data);
                }
                results[me] = p.result;
            }
        }
        results.into_iter().map(Option::unwrap).collect()
    }

    #[test]
    fn allreduce_folds_in_rank_order() {
        let vals = [0.1, 0.2, 0.3, 1e16];
        let inputs = vals
            .iter()
            .map(|v| CollInput::Single(encode_f64s(&[*v])))
            .collect();
        let res = run_all(
            CollKind::Allreduce {
                op: ReduceOp::SumF64,
            },
            inputs,
        );
        let expected = ((0.1 + 0.2) + 0.3) + 1e16;
        for r in res {
            assert_eq!(decode_f64s(&r[0]), vec![expected]);
        }
    }

    #[test]
    fn allgather_and_alltoall_shapes() {
        let inputs = (0..3u8).map(|r| CollInput::Single(vec![r])).collect();
        for r in run_all(CollKind::Allgather, inputs) {
            assert_eq!(r, vec![vec![0], vec![1], vec![2]]);
        }
        let inputs = (0..3u8)
            .map(|r| CollInput::Parts((0..3u8).map(|d| vec![r, d]).collect()))
            .collect();
        for (me, r) in run_all(CollKind::Alltoall, inputs).into_iter().enumerate() {
            let expected: Vec<Vec<u8>> = (0..3u8).map(|s| vec![s, me as u8]).collect();
            assert_eq!(r, expected);
        }
    }

    #[test]
    fn rooted_collectives() {
        let inputs = (0..4u8).map(|r| CollInput::Single(vec![r * 10])).collect();
        let res = run_all(CollKind::Gather { root: 2 }, inputs);
        assert_eq!(res[2], vec![vec![0], vec![10], vec![20], vec![30]]);
        assert!(res[0].is_empty());
        let inputs = (0..4usize)
            .map(|r| {
                if r == 1 {
                    CollInput::Parts((0..4u8).map(|d| vec![d]).collect())
                } else {
                    CollInput::None
                }
            })
            .collect();
        let res = run_all(CollKind::Scatter { root: 1 }, inputs);
        for (me, r) in res.iter().enumerate() {
            assert_eq!(r, &vec![vec![me as u8]]);
        }
        let inputs = (0..3usize)
            .map(|r| CollInput::Single(if r == 0 { vec![9] } else { vec![] }))
            .collect();
        for r in run_all(CollKind::Bcast { root: 0 }, inputs) {
            assert_eq!(r, vec![vec![9]]);
        }
    }

    #[test]
    fn reduce_ops() {
        let mut acc = encode_u64s(&[1, 2]);
        ReduceOp::SumU64
            .apply(&mut acc, &encode_u64s(&[3, 4]))
            .unwrap();
        assert_eq!(decode_u64s(&acc), vec![4, 6]);
        let mut acc = encode_f64s(&[1.0]);
        ReduceOp::MaxF64
            .apply(&mut acc, &encode_f64s(&[2.0]))
            .unwrap();
        assert_eq!(decode_f64s(&acc), vec![2.0]);
        assert!(ReduceOp::MinF64.apply(&mut acc, &[0; 16]).is_err());
    }

    #[test]
    fn bad_root_is_rejected() {
        assert!(CollOp::start(0, CollKind::Bcast { root: 3 }, 0, 3, CollInput::None).is_err());
        assert_ne!(
            CollKind::Bcast { root: 0 }.digest(),
            CollKind::Bcast { root: 1 }.digest()
        );
    }
}
