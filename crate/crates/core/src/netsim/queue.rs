use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::SimError;
use crate::time::SimTime;

/// Events ordered by (time, insertion sequence). The heap holds only keys;
/// actions sit in a slab so sifting moves 24-byte entries.
pub struct EventQueue<A> {
    heap: BinaryHeap<Reverse<(SimTime, u64, usize)>>,
    slots: Vec<Option<A>>,
    free: Vec<usize>,
    next_seq: u64,
    now: SimTime,
}

impl<A> Default for EventQueue<A> {
    fn default() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            slots: Vec::new(),
            free: Vec::new(),
            next_seq: 0,
            now: SimTime::ZERO,
        }
    }
}

impl<A> EventQueue<A> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(&mut self, fire_at: SimTime, action: A) -> Result<(), SimError> {
        if fire_at < self.now {
            return Err(SimError::PastEvent {
                at: fire_at,
                now: self.now,
            });
        }
        let slot = match self.free.pop() {
            Some(i) => {
                self.slots[i] = Some(action);
                i
            }
            None => {
                self.slots.push(Some(action));
                self.slots.len() - 1
            }
        };
        self.heap.push(Reverse((fire_at, self.next_seq, slot)));
        self.next_seq += 1;
        Ok(())
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.0 .0)
    }

    /// Removes the earliest event and advances the clock to it.
    pub fn pop(&mut self) -> Option<(SimTime, A)> {
        let Reverse((fire_at, _, slot)) = self.heap.pop()?;
        self.now = fire_at;
        self.free.push(slot);
        let action = self.slots[slot]
            .take()
            .expect("scheduled slot holds an action");
        Some((fire_at, action))
    }
}
