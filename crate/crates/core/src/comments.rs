//! Comment board with idempotent upvotes and the two listing orders.

use std::collections::{HashMap, HashSet};

use crate::domain::{popularity_key, AttendeeId, CommentEntry, CommentId, CommentOrder, Event, Payload};

#[derive(Debug, Clone, Default)]
pub struct CommentBoard {
    entries: Vec<CommentEntry>,
    index: HashMap<CommentId, usize>,
    voters: HashSet<(CommentId, AttendeeId)>,
    /// seq of the event that recorded each (comment, voter) pair
    vote_seq: HashMap<(CommentId, AttendeeId), u64>,
}

impl CommentBoard {
    pub fn from_events<'a>(events: impl IntoIterator<Item = &'a Event>) -> Self {
        let mut board = Self::default();
        events.into_iter().for_each(|e| board.apply(e));
        board
    }

    pub fn apply(&mut self, event: &Event) {
        match event.payload() {
            Payload::Comment { comment_id, text } => {
                self.index.insert(comment_id.clone(), self.entries.len());
                self.entries.push(CommentEntry {
                    comment_id: comment_id.clone(),
                    seq: event.seq(),
                    ts_ms: event.ts_ms(),
                    text: text.clone(),
                    upvotes: 0,
                });
            }
            Payload::Upvote { comment_id } => {
                let key = (comment_id.clone(), event.attendee());
                if self.voters.insert(key.clone()) {
                    if let Some(&i) = self.index.get(comment_id) {
                        self.entries[i].upvotes += 1;
                    }
                    self.vote_seq.insert(key, event.seq());
                }
            }
            Payload::Reaction { .. } => {}
        }
    }

    pub fn contains(&self, comment_id: &CommentId) -> bool {
        self.index.contains_key(comment_id)
    }

    /// seq of the upvote event this attendee already cast for the comment, if any.
    pub fn existing_vote(&self, comment_id: &CommentId, voter: AttendeeId) -> Option<u64> {
        self.vote_seq.get(&(comment_id.clone(), voter)).copied()
    }

    pub fn get(&self, comment_id: &CommentId) -> Option<&CommentEntry> {
        self.index.get(comment_id).map(|&i| &self.entries[i])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Chronological (seq ascending) or popularity (upvotes desc, seq asc).
    pub fn list(&self, order: CommentOrder) -> Vec<CommentEntry> {
        let mut out = self.entries.clone();
        if order == CommentOrder::Popularity {
            out.sort_by_key(popularity_key);
        }
        out
    }
}
