use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(pub u64);

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("cannot schedule at {at} s, clock is at {now} s")]
    InThePast { at: f64, now: f64 },
    #[error("event time {0} is not finite")]
    NotFinite(f64),
}

/// Simulated time plus the tie-breaking counter.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SimClock {
    pub now: f64,
    pub event_seq: u64,
}

struct Scheduled<E> {
    at: f64,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap.
        other
            .at
            .total_cmp(&self.at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Priority queue dispatching in `(time, seq)` order.
pub struct EventQueue<E> {
    heap: BinaryHeap<Scheduled<E>>,
    clock: SimClock,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self {
            heap: BinaryHeap::new(),
            clock: SimClock::default(),
        }
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> f64 {
        self.clock.now
    }

    pub fn clock(&self) -> SimClock {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(&mut self, event: E, at: f64) -> Result<EventId, ScheduleError> {
        if !at.is_finite() {
            return Err(ScheduleError::NotFinite(at));
        }
        if at < self.clock.now {
            return Err(ScheduleError::InThePast {
                at,
                now: self.clock.now,
            });
        }
        let seq = self.clock.event_seq;
        self.clock.event_seq += 1;
        self.heap.push(Scheduled { at, seq, event });
        Ok(EventId(seq))
    }

    /// Schedules `delay` seconds from now. Delays are never negative.
    pub fn schedule_in(&mut self, event: E, delay: f64) -> EventId {
        let at = self.clock.now + delay.max(0.0);
        self.schedule(event, at)
            .expect("relative schedule is never in the past")
    }

    /// Pops the next event and advances the clock to its time.
    pub fn pop(&mut self) -> Option<(f64, EventId, E)> {
        let next = self.heap.pop()?;
        self.clock.now = next.at;
        Some((next.at, EventId(next.seq), next.event))
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|s| s.at)
    }
}
