//! Combined run log and the metrics derived from it.
//!
//! ```text
//! # mas-log 1
//! # agent B1 TerminalBranch
//! # events
//! t=0.100000 agent=SIM event=FAULT detail=cause=scenario branch=B2 ...
//! # messages
//! t=0.102000 seq=0 mode=DIRECT from=B2 to=R1 type=TRIP_NOTICE bytes=3
//! # end 1 1
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::SimError;
use crate::agents::{AgentEvent, EventKind};
use crate::comms::{AgentKind, LinkClass, MessageRecord};
use crate::time::SimTime;

/// Agent name used for events raised by the simulator itself.
pub const SIM_AGENT: &str = "SIM";

const HEADER: &str = "# mas-log 1";
const MODES: [&str; 3] = ["DIRECT", "RADIO", "BB"];
const TAGS: [&str; 7] =
    ["STATUS", "TRIP_NOTICE", "INSTRUCTION", "GROUP_UPDATE", "AREA_SUMMARY", "DG_DISPATCH", "LOAD_SHED"];
const LINKS: [LinkClass; 6] = [
    LinkClass::TerminalTerminal,
    LinkClass::TerminalRegional,
    LinkClass::RegionalTerminal,
    LinkClass::RegionalRegional,
    LinkClass::RegionalCentral,
    LinkClass::CentralRegional,
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LogFile {
    pub agents: Vec<(String, AgentKind)>,
    pub events: Vec<AgentEvent>,
    pub messages: Vec<MessageRecord>,
}

fn lines<T: std::fmt::Display>(items: &[T]) -> String {
    let mut s = String::new();
    for i in items {
        let _ = writeln!(s, "{i}");
    }
    s
}

impl LogFile {
    pub fn events_text(&self) -> String {
        lines(&self.events)
    }

    pub fn messages_text(&self) -> String {
        lines(&self.messages)
    }

    pub fn render(&self) -> String {
        let mut s = format!("{HEADER}\n");
        for (id, kind) in &self.agents {
            let _ = writeln!(s, "# agent {id} {}", kind.as_str());
        }
        s.push_str("# events\n");
        s.push_str(&self.events_text());
        s.push_str("# messages\n");
        s.push_str(&self.messages_text());
        let _ = writeln!(s, "# end {} {}", self.events.len(), self.messages.len());
        s
    }

    pub fn metrics(&self) -> Metrics {
        Metrics::from_log(self)
    }
}

fn parse_time(s: &str) -> Option<SimTime> {
    let (a, b) = s.split_once('.')?;
    if b.len() != 6 {
        return None;
    }
    Some(SimTime(a.parse::<u64>().ok()? * 1_000_000 + b.parse::<u64>().ok()?))
}

fn field<'a>(tok: Option<&'a str>, key: &str) -> Option<&'a str> {
    tok?.strip_prefix(key)?.strip_prefix('=')
}

fn parse_event(line: &str) -> Option<AgentEvent> {
    let (head, detail) = line.split_once(" detail=")?;
    let mut it = head.split(' ');
    let t = parse_time(field(it.next(), "t")?)?;
    let agent = field(it.next(), "agent")?;
    let kind = EventKind::parse(field(it.next(), "event")?)?;
    if it.next().is_some() || agent.is_empty() {
        return None;
    }
    Some(AgentEvent::new(t, agent, kind, detail))
}

fn parse_message(line: &str) -> Option<MessageRecord> {
    let mut it = line.split(' ');
    let t = parse_time(field(it.next(), "t")?)?;
    let seq = field(it.next(), "seq")?.parse().ok()?;
    let mode = field(it.next(), "mode")?;
    let mode = MODES.into_iter().find(|m| *m == mode)?;
    let from = field(it.next(), "from")?.to_string();
    let to = field(it.next(), "to")?.to_string();
    let tag = field(it.next(), "type")?;
    let tag = TAGS.into_iter().find(|x| *x == tag)?;
    let bytes = field(it.next(), "bytes")?.parse().ok()?;
    if it.next().is_some() {
        return None;
    }
    Some(MessageRecord { t, seq, mode, from, to, tag, bytes })
}

/// Reads a combined log. A missing or inconsistent end marker means the
/// file was truncated.
pub fn parse_log(text: &str) -> Result<LogFile, SimError> {
    #[derive(PartialEq)]
    enum Section {
        Agents,
        Events,
        Messages,
        Done,
    }
    let mut log = LogFile::default();
    let mut section = Section::Agents;
    let mut n = 0;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        n = line_no;
        let bad = |reason: &str| SimError::Parse { line: line_no, reason: reason.to_string() };
        if idx == 0 {
            if line != HEADER {
                return Err(bad("not a run log"));
            }
            continue;
        }
        if section == Section::Done {
            return Err(bad("content after end marker"));
        }
        if let Some(rest) = line.strip_prefix("# agent ") {
            if section != Section::Agents {
                return Err(bad("agent line outside the header"));
            }
            let (id, kind) = rest.split_once(' ').ok_or_else(|| bad("malformed agent line"))?;
            let kind = AgentKind::parse(kind).ok_or_else(|| bad("unknown agent kind"))?;
            log.agents.push((id.to_string(), kind));
        } else if line == "# events" {
            section = Section::Events;
        } else if line == "# messages" {
            section = Section::Messages;
        } else if let Some(rest) = line.strip_prefix("# end ") {
            let counts: Vec<usize> = rest.split(' ').filter_map(|x| x.parse().ok()).collect();
            if counts != [log.events.len(), log.messages.len()] {
                return Err(bad("record counts do not match the end marker"));
            }
            section = Section::Done;
        } else {
            match section {
                Section::Events => log.events.push(parse_event(line).ok_or_else(|| bad("malformed event"))?),
                Section::Messages => log.messages.push(parse_message(line).ok_or_else(|| bad("malformed message"))?),
                _ => return Err(bad("unexpected line")),
            }
        }
    }
    if section != Section::Done {
        return Err(SimError::Parse { line: n + 1, reason: "truncated log: no end marker".into() });
    }
    Ok(log)
}

/// Run metrics as sorted key/value pairs. Everything here is computed from
/// the log alone.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metrics(pub BTreeMap<String, String>);

impl Metrics {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn count(&self, key: &str) -> u64 {
        self.get(key).and_then(|v| v.parse().ok()).unwrap_or(0)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.0 {
            let _ = writeln!(s, "{k}\t{v}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Metrics, SimError> {
        let mut m = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('\t')
                .ok_or_else(|| SimError::Parse { line: idx + 1, reason: "expected key<TAB>value".into() })?;
            m.insert(k.to_string(), v.to_string());
        }
        Ok(Metrics(m))
    }

    /// Verdicts of the scripted faults, in order.
    pub fn verdicts(&self) -> Vec<(String, bool)> {
        (1..=self.count("faults.total"))
            .map(|k| {
                let b = self.get(&format!("fault.{k}.branch")).unwrap_or("").to_string();
                (b, self.get(&format!("fault.{k}.verdict")) == Some("PASS"))
            })
            .collect()
    }

    pub fn from_log(log: &LogFile) -> Metrics {
        let mut m: BTreeMap<String, String> = BTreeMap::new();
        let mut put = |k: String, v: String| {
            m.insert(k, v);
        };
        let kinds: BTreeMap<&str, AgentKind> = log.agents.iter().map(|(id, k)| (id.as_str(), *k)).collect();

        put("events.total".into(), log.events.len().to_string());
        for k in EventKind::ALL {
            let n = log.events.iter().filter(|e| e.kind == k).count();
            put(format!("events.{}", k.as_str()), n.to_string());
        }
        for (id, _) in log.agents.iter().filter(|(_, k)| *k == AgentKind::TerminalBranch) {
            let n = log.events.iter().filter(|e| e.kind == EventKind::Trip && e.agent == *id).count();
            put(format!("trips.{id}"), n.to_string());
        }
        put("loads_shed".into(), log.events.iter().filter(|e| e.kind == EventKind::Shed).count().to_string());
        put("dg_disconnects".into(), log.events.iter().filter(|e| e.kind == EventKind::DgOff).count().to_string());

        put("messages.total".into(), log.messages.len().to_string());
        put("bytes.total".into(), log.messages.iter().map(|r| r.bytes).sum::<usize>().to_string());
        for mode in MODES {
            let sel = log.messages.iter().filter(|r| r.mode == mode);
            put(format!("messages.mode.{mode}"), sel.clone().count().to_string());
            put(format!("bytes.mode.{mode}"), sel.map(|r| r.bytes).sum::<usize>().to_string());
        }
        let class = |r: &MessageRecord| -> Option<LinkClass> {
            if r.mode == "BB" {
                return Some(LinkClass::RegionalRegional);
            }
            LinkClass::between(*kinds.get(r.from.as_str())?, *kinds.get(r.to.as_str())?)
        };
        for lc in LINKS {
            let sel: Vec<&MessageRecord> = log.messages.iter().filter(|r| class(r) == Some(lc)).collect();
            put(format!("messages.link.{}", lc.as_str()), sel.len().to_string());
            put(format!("bytes.link.{}", lc.as_str()), sel.iter().map(|r| r.bytes).sum::<usize>().to_string());
        }

        let faults: Vec<usize> = log
            .events
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind == EventKind::Fault && e.get("cause") == Some("scenario"))
            .map(|(i, _)| i)
            .collect();
        let mut pass = 0;
        for (k, &fi) in faults.iter().enumerate() {
            let f = &log.events[fi];
            let own = f.get("branch").unwrap_or("").to_string();
            let next_fault = faults.get(k + 1).copied().unwrap_or(log.events.len());
            let cleared = (fi + 1..next_fault)
                .find(|&i| log.events[i].kind == EventKind::Cleared)
                .unwrap_or(next_fault);
            let is_prot_open = |e: &AgentEvent| e.kind == EventKind::Open && e.get("cause") == Some("protection");
            let trips: Vec<&AgentEvent> =
                log.events[fi + 1..cleared].iter().filter(|e| e.kind == EventKind::Trip).collect();
            let ok = !trips.is_empty() && trips.iter().all(|e| e.agent == own);
            let last_own = log.events[fi + 1..next_fault].iter().filter(|e| is_prot_open(e) && e.agent == own).next_back();
            let idx = k + 1;
            put(format!("fault.{idx}.branch"), own);
            put(format!("fault.{idx}.verdict"), if ok { "PASS" } else { "FAIL" }.into());
            put(
                format!("fault.{idx}.clearing_s"),
                last_own.map(|e| format!("{:.6}", (e.t - f.t).as_secs())).unwrap_or_else(|| "none".into()),
            );
            if ok {
                pass += 1;
            }
        }
        put("faults.total".into(), faults.len().to_string());
        put("faults.pass".into(), pass.to_string());
        put("faults.fail".into(), (faults.len() - pass).to_string());
        Metrics(m)
    }
}
