//! Per-core time accounting.
//!
//! Every core slot is always in exactly one bucket, so bucket totals sum to
//! wall time by construction. A global pause (repair, checkpoint write,
//! restart) overrides whatever the slot's process was doing.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bucket {
    Useful,
    Redundant,
    Create,
    Restore,
    Rollback,
    LogRemoval,
    Idle,
}

impl Bucket {
    pub const ALL: [Bucket; 7] = [
        Bucket::Useful,
        Bucket::Redundant,
        Bucket::Create,
        Bucket::Restore,
        Bucket::Rollback,
        Bucket::LogRemoval,
        Bucket::Idle,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// Seconds per bucket.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BucketTimes([f64; 7]);

impl BucketTimes {
    pub fn get(&self, b: Bucket) -> f64 {
        self.0[b.index()]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    fn add(&mut self, b: Bucket, secs: f64) {
        self.0[b.index()] += secs;
    }
}

#[derive(Clone, Debug)]
struct Slot {
    acc: BucketTimes,
    snap: BucketTimes,
    since: f64,
    base: Bucket,
    alive: bool,
}

#[derive(Clone, Debug)]
pub struct Ledger {
    slots: Vec<Slot>,
    pause: Option<Bucket>,
}

/// Buckets whose time since the last stable point is thrown away by a
/// rollback.
const LOSABLE: [Bucket; 4] = [
    Bucket::Useful,
    Bucket::Redundant,
    Bucket::Idle,
    Bucket::LogRemoval,
];

impl Ledger {
    pub fn new(slots: usize) -> Self {
        let slot = Slot {
            acc: BucketTimes::default(),
            snap: BucketTimes::default(),
            since: 0.0,
            base: Bucket::Idle,
            alive: false,
        };
        Self {
            slots: vec![slot; slots],
            pause: None,
        }
    }

    pub fn slots(&self) -> usize {
        self.slots.len()
    }

    fn effective(&self, s: usize) -> Bucket {
        let slot = &self.slots[s];
        match self.pause {
            Some(b) => b,
            None if !slot.alive => Bucket::Idle,
            None => slot.base,
        }
    }

    fn touch(&mut self, s: usize, now: f64) {
        let b = self.effective(s);
        let slot = &mut self.slots[s];
        slot.acc.add(b, now - slot.since);
        slot.since = now;
    }

    fn touch_all(&mut self, now: f64) {
        for s in 0..self.slots.len() {
            self.touch(s, now);
        }
    }

    pub fn set_base(&mut self, s: usize, b: Bucket, now: f64) {
        if self.slots[s].base != b {
            self.touch(s, now);
            self.slots[s].base = b;
        }
    }

    pub fn set_alive(&mut self, s: usize, alive: bool, now: f64) {
        self.touch(s, now);
        self.slots[s].alive = alive;
        if !alive {
            self.slots[s].base = Bucket::Idle;
        }
    }

    pub fn pause(&self) -> Option<Bucket> {
        self.pause
    }

    pub fn set_pause(&mut self, pause: Option<Bucket>, now: f64) {
        self.touch_all(now);
        self.pause = pause;
    }

    /// Marks the current totals as a stable point.
    pub fn snapshot(&mut self, now: f64) {
        self.touch_all(now);
        for slot in &mut self.slots {
            slot.snap = slot.acc;
        }
    }

    /// Moves work done since the last stable point into the rollback bucket.
    /// Returns the per-core average moved.
    pub fn roll_back(&mut self, now: f64) -> f64 {
        self.touch_all(now);
        let mut moved = 0.0;
        for slot in &mut self.slots {
            for b in LOSABLE {
                let lost = slot.acc.get(b) - slot.snap.get(b);
                if lost > 0.0 {
                    slot.acc.add(b, -lost);
                    slot.acc.add(Bucket::Rollback, lost);
                    moved += lost;
                }
            }
            slot.snap = slot.acc;
        }
        moved / self.slots.len().max(1) as f64
    }

    /// Closes every slot at `now` and returns per-core average bucket times.
    pub fn close(&mut self, now: f64) -> BucketTimes {
        self.touch_all(now);
        let mut out = BucketTimes::default();
        for slot in &self.slots {
            for b in Bucket::ALL {
                out.add(b, slot.acc.get(b));
            }
        }
        let n = self.slots.len().max(1) as f64;
        for v in &mut out.0 {
            *v /= n;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buckets_sum_to_wall_time() {
        let mut l = Ledger::new(2);
        l.set_alive(0, true, 0.0);
        l.set_alive(1, true, 0.0);
        l.set_base(0, Bucket::Useful, 0.0);
        l.set_base(1, Bucket::Redundant, 1.0);
        l.set_pause(Some(Bucket::Create), 3.0);
        l.set_pause(None, 4.0);
        l.set_alive(1, false, 5.0);
        let t = l.close(10.0);
        assert!((t.sum() - 10.0).abs() < 1e-12);
        assert_eq!(t.get(Bucket::Create), 1.0);
        assert_eq!(t.get(Bucket::Useful), (9.0) / 2.0);
    }

    #[test]
    fn rollback_moves_work_since_snapshot() {
        let mut l = Ledger::new(1);
        l.set_alive(0, true, 0.0);
        l.set_base(0, Bucket::Useful, 0.0);
        l.snapshot(1213.26);
        let moved = l.roll_back(1500.0);
        assert!((moved - 286.74).abs() < 1e-9);
        let t = l.close(1500.0);
        assert!((t.get(Bucket::Useful) - 1213.26).abs() < 1e-9);
        assert!((t.get(Bucket::Rollback) - 286.74).abs() < 1e-9);
    }
}
