//! Receive-side stream state: fragment reassembly and per-stream ordering.

use std::collections::{BTreeMap, VecDeque};

use crate::pipeline::reassemble;
use crate::wire::DataChunk;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReceivedMessage {
    pub stream_id: u16,
    pub ssn: u16,
    pub ordered: bool,
    pub payload: Vec<u8>,
}

#[derive(Clone, Debug, Default)]
pub struct StreamState {
    pub stream_id: u16,
    pub next_ssn_out: u16,
    pub next_ssn_expect_in: u16,
    /// Fragments of incomplete messages, keyed by unwrapped TSN.
    fragments: BTreeMap<u64, DataChunk>,
    /// Complete ordered messages waiting for an earlier SSN.
    reorder_buffer: BTreeMap<u16, ReceivedMessage>,
    ready: VecDeque<ReceivedMessage>,
    held_bytes: usize,
}

impl StreamState {
    pub fn new(stream_id: u16) -> Self {
        StreamState {
            stream_id,
            ..Default::default()
        }
    }

    /// Bytes buffered and not yet handed to the application.
    pub fn held_bytes(&self) -> usize {
        self.held_bytes
    }

    pub fn reorder_len(&self) -> usize {
        self.reorder_buffer.len()
    }

    /// Takes a new (non-duplicate) DATA chunk whose TSN unwraps to `tsn`.
    pub fn accept(&mut self, tsn: u64, chunk: DataChunk) {
        self.held_bytes += chunk.user_bytes.len();
        let (ssn, ordered, payload) = if chunk.fragment_begin && chunk.fragment_end {
            (chunk.ssn, chunk.ordered, chunk.user_bytes)
        } else {
            self.fragments.insert(tsn, chunk);
            let Some(first) = self.find_begin(tsn) else {
                return;
            };
            let mut last = first;
            loop {
                match self.fragments.get(&last) {
                    Some(c) if c.fragment_end => break,
                    Some(_) => last += 1,
                    None => return,
                }
            }
            let parts: Vec<DataChunk> = (first..=last)
                .map(|t| self.fragments.remove(&t).unwrap())
                .collect();
            let (ssn, ordered) = (parts[0].ssn, parts[0].ordered);
            match reassemble(&parts) {
                Ok(p) => (ssn, ordered, p),
                Err(_) => {
                    // Inconsistent flags; keep the fragments for a later arrival.
                    for (i, p) in parts.into_iter().enumerate() {
                        self.fragments.insert(first + i as u64, p);
                    }
                    return;
                }
            }
        };
        let msg = ReceivedMessage {
            stream_id: self.stream_id,
            ssn,
            ordered,
            payload,
        };
        if !ordered {
            self.ready.push_back(msg);
            return;
        }
        self.reorder_buffer.insert(ssn, msg);
        while let Some(m) = self.reorder_buffer.remove(&self.next_ssn_expect_in) {
            self.ready.push_back(m);
            self.next_ssn_expect_in = self.next_ssn_expect_in.wrapping_add(1);
        }
    }

    fn find_begin(&self, tsn: u64) -> Option<u64> {
        let mut t = tsn;
        loop {
            let c = self.fragments.get(&t)?;
            if c.fragment_begin {
                return Some(t);
            }
            if t != tsn && c.fragment_end {
                return None;
            }
            t = t.checked_sub(1)?;
        }
    }

    pub fn has_ready(&self) -> bool {
        !self.ready.is_empty()
    }

    /// Releases every message that is deliverable in order.
    pub fn deliver(&mut self) -> Vec<ReceivedMessage> {
        let out: Vec<ReceivedMessage> = Vec::from(std::mem::take(&mut self.ready));
        self.held_bytes -= out.iter().map(|m| m.payload.len()).sum::<usize>();
        out
    }
}
