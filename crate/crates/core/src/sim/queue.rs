//! Time-ordered event queue with stable tie-breaking and lazy cancellation.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("cannot schedule at {at} ms, clock is already at {clock} ms")]
pub struct SchedulingInPast {
    pub at: u64,
    pub clock: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EntryId(u64);

#[derive(Debug)]
struct Slot<T> {
    at: u64,
    seq: u64,
    item: T,
}

impl<T> PartialEq for Slot<T> {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl<T> Eq for Slot<T> {}

impl<T> PartialOrd for Slot<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Slot<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

/// Pops entries in `(at, insertion order)` order. The clock follows the
/// popped timestamps and never moves backward.
#[derive(Debug)]
pub struct EventQueue<T> {
    heap: BinaryHeap<Reverse<Slot<T>>>,
    cancelled: HashSet<u64>,
    clock: u64,
    next_seq: u64,
}

impl<T> Default for EventQueue<T> {
    fn default() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            clock: 0,
            next_seq: 0,
        }
    }
}

impl<T> EventQueue<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn advance_to(&mut self, t: u64) {
        self.clock = self.clock.max(t);
    }

    pub fn schedule(&mut self, at: u64, item: T) -> Result<EntryId, SchedulingInPast> {
        if at < self.clock {
            return Err(SchedulingInPast { at, clock: self.clock });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Slot { at, seq, item }));
        Ok(EntryId(seq))
    }

    /// Removes a pending entry. Returns false if it already fired or was
    /// cancelled before.
    pub fn cancel(&mut self, id: EntryId) -> bool {
        let pending = self.heap.iter().any(|Reverse(s)| s.seq == id.0);
        pending && self.cancelled.insert(id.0)
    }

    fn skip_cancelled(&mut self) {
        while let Some(Reverse(top)) = self.heap.peek() {
            if self.cancelled.remove(&top.seq) {
                self.heap.pop();
            } else {
                break;
            }
        }
    }

    pub fn peek_time(&mut self) -> Option<u64> {
        self.skip_cancelled();
        self.heap.peek().map(|Reverse(s)| s.at)
    }

    /// Pops the next entry and moves the clock to its timestamp, unless the
    /// clock is already past it.
    pub fn pop(&mut self) -> Option<(u64, T)> {
        self.skip_cancelled();
        let Reverse(slot) = self.heap.pop()?;
        self.advance_to(slot.at);
        Some((slot.at, slot.item))
    }

    pub fn len(&self) -> usize {
        self.heap.len() - self.cancelled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_pop_in_insertion_order() {
        let mut q = EventQueue::new();
        q.schedule(10, 'A').unwrap();
        q.schedule(10, 'B').unwrap();
        q.schedule(5, 'C').unwrap();
        let order: Vec<char> = std::iter::from_fn(|| q.pop().map(|(_, c)| c)).collect();
        assert_eq!(order, vec!['C', 'A', 'B']);
        assert_eq!(q.clock(), 10);
    }

    #[test]
    fn scheduling_in_the_past_fails() {
        let mut q = EventQueue::new();
        q.schedule(100, ()).unwrap();
        q.pop();
        assert_eq!(q.schedule(99, ()), Err(SchedulingInPast { at: 99, clock: 100 }));
        assert!(q.schedule(100, ()).is_ok());
    }

    #[test]
    fn cancelled_entries_never_pop() {
        let mut q = EventQueue::new();
        let a = q.schedule(1, "a").unwrap();
        q.schedule(2, "b").unwrap();
        assert!(q.cancel(a));
        assert!(!q.cancel(a));
        assert_eq!(q.len(), 1);
        assert_eq!(q.peek_time(), Some(2));
        assert_eq!(q.pop(), Some((2, "b")));
        assert!(q.pop().is_none());
        assert!(!q.cancel(a));
    }

    #[test]
    fn late_entries_do_not_rewind_the_clock() {
        let mut q = EventQueue::new();
        q.schedule(10, ()).unwrap();
        q.advance_to(50);
        assert_eq!(q.pop(), Some((10, ())));
        assert_eq!(q.clock(), 50);
    }

    #[test]
    fn million_inserts_drain_sorted() {
        // xorshift keeps this independent of the rand crate's stream.
        let mut x: u64 = 0x9E37_79B9_7F4A_7C15;
        let mut q = EventQueue::new();
        let mut expected = Vec::with_capacity(1_000_000);
        for i in 0..1_000_000u64 {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            let at = x % 100_000;
            q.schedule(at, i).unwrap();
            expected.push((at, i));
        }
        expected.sort();
        let drained: Vec<(u64, u64)> = std::iter::from_fn(|| q.pop()).collect();
        assert!(drained.windows(2).all(|w| w[0].0 <= w[1].0));
        assert_eq!(drained, expected);
    }

    proptest! {
        #[test]
        fn drain_matches_stable_sort(times in proptest::collection::vec(0u64..50, 0..200)) {
            let mut q = EventQueue::new();
            for (i, t) in times.iter().enumerate() {
                q.schedule(*t, i).unwrap();
            }
            let mut expected: Vec<(u64, usize)> =
                times.iter().copied().enumerate().map(|(i, t)| (t, i)).collect();
            expected.sort_by_key(|(t, _)| *t);
            let drained: Vec<(u64, usize)> = std::iter::from_fn(|| q.pop()).collect();
            prop_assert_eq!(drained, expected);
        }
    }
}
