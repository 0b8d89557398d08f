//! Ordered event queue and virtual clock. Events pop in `(fire_at, seq)`
//! order; ties broken by insertion sequence, which is what makes identical
//! seeds replay identically.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};
use thiserror::Error;

use super::time::SimTime;

/// Handle returned by `schedule`; permits cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

/// A scheduled occurrence.
#[derive(Debug)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub payload: P,
}

struct Entry<P> {
    fire_at: SimTime,
    seq: u64,
    payload: P,
}

impl<P> PartialEq for Entry<P> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}
impl<P> Eq for Entry<P> {}
impl<P> PartialOrd for Entry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<P> Ord for Entry<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.fire_at, self.seq).cmp(&(other.fire_at, other.seq))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RunError {
    #[error("event count exceeded safety cap of {0}; scenario is livelocked")]
    Livelock(u64),
}

/// Default safety cap on processed events per run.
pub const DEFAULT_EVENT_CAP: u64 = 10_000_000;

/// Virtual clock plus event queue. The composition root drives it with
/// [`Kernel::pop_within`] or [`Kernel::run_until`].
pub struct Kernel<P> {
    heap: BinaryHeap<Reverse<Entry<P>>>,
    cancelled: HashSet<u64>,
    next_seq: u64,
    now: SimTime,
    processed: u64,
    pub event_cap: u64,
}

impl<P> Default for Kernel<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Kernel<P> {
    pub fn new() -> Self {
        Kernel {
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            next_seq: 0,
            now: SimTime::ZERO,
            processed: 0,
            event_cap: DEFAULT_EVENT_CAP,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn pending(&self) -> usize {
        self.heap.len() - self.cancelled.len()
    }

    /// Enqueues `payload` to fire `delay` ms from now.
    pub fn schedule(&mut self, delay: u64, payload: P) -> EventHandle {
        self.schedule_at(self.now.plus(delay), payload)
    }

    /// Enqueues `payload` at an absolute time (must not pre-date the clock).
    pub fn schedule_at(&mut self, fire_at: SimTime, payload: P) -> EventHandle {
        debug_assert!(fire_at >= self.now, "scheduling into the past");
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry {
            fire_at,
            seq,
            payload,
        }));
        EventHandle(seq)
    }

    /// Marks a scheduled event so it is never delivered.
    pub fn cancel(&mut self, handle: EventHandle) {
        self.cancelled.insert(handle.0);
    }

    /// Pops the next live event with `fire_at <= limit`, advancing the clock
    /// to its fire time. When nothing is due the clock advances to `limit`.
    pub fn pop_within(&mut self, limit: SimTime) -> Option<Event<P>> {
        loop {
            match self.heap.peek() {
                Some(Reverse(e)) if e.fire_at <= limit => {
                    let Reverse(e) = self.heap.pop().expect("peeked");
                    if self.cancelled.remove(&e.seq) {
                        continue;
                    }
                    self.now = e.fire_at;
                    self.processed += 1;
                    return Some(Event {
                        fire_at: e.fire_at,
                        seq: e.seq,
                        payload: e.payload,
                    });
                }
                _ => {
                    self.now = limit;
                    return None;
                }
            }
        }
    }

    /// Processes every event due at or before `limit`, handing each to `f`.
    /// Errors with [`RunError::Livelock`] past the safety cap. Returns the
    /// number of events processed by this call.
    pub fn run_until<F>(&mut self, limit: SimTime, mut f: F) -> Result<u64, RunError>
    where
        F: FnMut(&mut Self, Event<P>),
    {
        let start = self.processed;
        while let Some(ev) = self.pop_within(limit) {
            f(self, ev);
            if self.processed > self.event_cap {
                return Err(RunError::Livelock(self.event_cap));
            }
        }
        Ok(self.processed - start)
    }
}
