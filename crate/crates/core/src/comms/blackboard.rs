//! Shared priority-resolved area used between regional agents.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::codec::Payload;
use super::{AgentKind, CommsError};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct BlackboardEntry {
    pub value: Payload,
    pub priority: u8,
    pub writer: String,
    pub t_post: SimTime,
}

impl BlackboardEntry {
    /// Retention order: priority, then later post, then smaller writer id.
    pub fn outranks(&self, other: &BlackboardEntry) -> bool {
        self.priority
            .cmp(&other.priority)
            .then(self.t_post.cmp(&other.t_post))
            .then_with(|| other.writer.cmp(&self.writer))
            == Ordering::Greater
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Blackboard {
    entries: BTreeMap<String, BlackboardEntry>,
}

impl Blackboard {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a post; the entry is kept only if it outranks the current one.
    /// Returns whether the stored entry changed.
    pub fn post(
        &mut self,
        key: &str,
        value: Payload,
        priority: u8,
        writer: &str,
        writer_kind: AgentKind,
        t: SimTime,
    ) -> Result<bool, CommsError> {
        if writer_kind != AgentKind::Regional {
            return Err(CommsError::NotRegional(writer.to_string()));
        }
        let entry = BlackboardEntry { value, priority, writer: writer.to_string(), t_post: t };
        match self.entries.get(key) {
            Some(old) if !entry.outranks(old) => Ok(false),
            _ => {
                self.entries.insert(key.to_string(), entry);
                Ok(true)
            }
        }
    }

    pub fn read(&self, key: &str) -> Option<&BlackboardEntry> {
        self.entries.get(key)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &BlackboardEntry)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: u8) -> Payload {
        Payload::TripNotice { branch_id: "B1".into(), stage: n }
    }

    #[test]
    fn higher_priority_replaces() {
        let mut bb = Blackboard::new();
        bb.post("k", v(1), 5, "R1", AgentKind::Regional, SimTime(1)).unwrap();
        bb.post("k", v(2), 7, "R2", AgentKind::Regional, SimTime(2)).unwrap();
        assert_eq!(bb.read("k").unwrap().value, v(2));
    }

    #[test]
    fn lower_priority_is_ignored() {
        let mut bb = Blackboard::new();
        bb.post("k", v(1), 7, "R1", AgentKind::Regional, SimTime(1)).unwrap();
        assert!(!bb.post("k", v(2), 5, "R2", AgentKind::Regional, SimTime(2)).unwrap());
        assert_eq!(bb.read("k").unwrap().value, v(1));
    }

    #[test]
    fn ties_break_on_time_then_writer() {
        let mut bb = Blackboard::new();
        bb.post("k", v(1), 5, "R1", AgentKind::Regional, SimTime(1)).unwrap();
        bb.post("k", v(2), 5, "R2", AgentKind::Regional, SimTime(2)).unwrap();
        assert_eq!(bb.read("k").unwrap().writer, "R2");
        bb.post("k", v(3), 5, "R1", AgentKind::Regional, SimTime(2)).unwrap();
        assert_eq!(bb.read("k").unwrap().writer, "R1");
        bb.post("k", v(4), 5, "R3", AgentKind::Regional, SimTime(2)).unwrap();
        assert_eq!(bb.read("k").unwrap().value, v(3));
    }

    #[test]
    fn terminal_cannot_post() {
        let mut bb = Blackboard::new();
        assert_eq!(
            bb.post("k", v(1), 5, "B1", AgentKind::TerminalBranch, SimTime(1)),
            Err(CommsError::NotRegional("B1".into()))
        );
        assert!(bb.is_empty());
    }
}
