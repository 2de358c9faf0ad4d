use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    EvArrivesAtCharger,
    ChargingCompletes,
    EvArrivesAtDemander,
}

/// A state change scheduled by a relocation and fired by the clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayedEvent {
    pub fire_at: f64,
    pub kind: EventKind,
    pub node: usize,
    pub driver_attached: bool,
    pub ev_charge: u8,
}

impl DelayedEvent {
    /// Firing order: time, then node index.
    pub fn order(&self, other: &Self) -> Ordering {
        self.fire_at
            .total_cmp(&other.fire_at)
            .then(self.node.cmp(&other.node))
    }
}

/// Pending events kept sorted by [`DelayedEvent::order`].
#[derive(Debug, Clone, Default)]
pub struct EventQueue {
    events: Vec<DelayedEvent>,
}

impl EventQueue {
    pub fn push(&mut self, ev: DelayedEvent) {
        // Equal keys keep insertion order.
        let at = self
            .events
            .partition_point(|e| e.order(&ev) != Ordering::Greater);
        self.events.insert(at, ev);
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.events.first().map(|e| e.fire_at)
    }

    /// Removes and returns the earliest event if it fires at or before `t`.
    pub fn pop_due(&mut self, t: f64) -> Option<DelayedEvent> {
        match self.events.first() {
            Some(e) if e.fire_at <= t => Some(self.events.remove(0)),
            _ => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &DelayedEvent> {
        self.events.iter()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn latest_time(&self) -> Option<f64> {
        self.events.last().map(|e| e.fire_at)
    }

    /// Earliest pending event of `kind` at `node`.
    pub fn next_at(&self, node: usize, kind: EventKind) -> Option<&DelayedEvent> {
        self.events
            .iter()
            .find(|e| e.node == node && e.kind == kind)
    }
}
