//! Fixed-length mouse actions from a deduplicated event stream.

use std::collections::BTreeSet;

use crate::event::{MouseEvent, MOVEMENT_EVENT};

/// An ordered window of exactly `sequence_length` consecutive filtered
/// events; the classification unit.
#[derive(Debug, Clone, PartialEq)]
pub struct MouseAction {
    pub user_id: u32,
    pub events: Vec<MouseEvent>,
    pub start_time: f64,
    pub end_time: f64,
    /// 0-based index of this action within the session.
    pub ordinal: usize,
}

/// Windowing policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmenterConfig {
    /// Events per action. At least 2 so every action has a displacement.
    pub sequence_length: usize,
    /// Step between window starts; `sequence_length` means non-overlapping.
    pub stride: usize,
    /// Event-type codes kept before windowing. Movement only by default.
    pub event_filter: BTreeSet<i32>,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            sequence_length: 10,
            stride: 10,
            event_filter: BTreeSet::from([MOVEMENT_EVENT]),
        }
    }
}

impl SegmenterConfig {
    /// Non-overlapping windows of `sequence_length` movement events.
    pub fn with_length(sequence_length: usize) -> Self {
        Self {
            sequence_length,
            stride: sequence_length,
            ..Self::default()
        }
    }

    pub(crate) fn assert_valid(&self) {
        assert!(
            self.sequence_length >= 2,
            "sequence_length must be at least 2, got {}",
            self.sequence_length
        );
        assert!(self.stride >= 1, "stride must be at least 1");
    }
}

/// Windows the filtered event stream into actions.
///
/// Events are first filtered by `event_filter`; windows then start at
/// filtered indices `0, stride, 2*stride, ...` and a trailing partial window
/// is discarded. Fewer than `sequence_length` filtered events yield an empty
/// list.
pub fn segment_actions(events: &[MouseEvent], config: &SegmenterConfig) -> Vec<MouseAction> {
    config.assert_valid();
    let filtered: Vec<MouseEvent> = events
        .iter()
        .filter(|e| config.event_filter.contains(&e.event_type))
        .copied()
        .collect();

    let len = config.sequence_length;
    if filtered.len() < len {
        return Vec::new();
    }

    let mut actions = Vec::with_capacity((filtered.len() - len) / config.stride + 1);
    let mut start = 0usize;
    let mut ordinal = 0usize;
    while start + len <= filtered.len() {
        let window = filtered[start..start + len].to_vec();
        actions.push(MouseAction {
            user_id: window[0].user_id,
            start_time: window[0].timestamp,
            end_time: window[len - 1].timestamp,
            events: window,
            ordinal,
        });
        ordinal += 1;
        start += config.stride;
    }
    actions
}
