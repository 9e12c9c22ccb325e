use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ItemId, UserId};
use crate::error::{Error, Result};

pub const DAY_SECONDS: i64 = 86_400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Click,
    Buy,
}

/// Raw event line: click or buy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub timestamp: i64,
    pub user_id: UserId,
    pub item_id: ItemId,
    pub kind: EventKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickEvent {
    pub item_id: ItemId,
    pub timestamp: i64,
    pub user_id: UserId,
}

/// A user's clicks inside one 24h window, labelled by whether any purchase
/// happened in that window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: u64,
    pub user_id: UserId,
    pub clicks: Vec<ClickEvent>,
    pub label: bool,
    /// UTC day number (days since the epoch) of the first click.
    pub day: i64,
}

impl Session {
    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.clicks.iter().map(|c| c.item_id)
    }

    pub fn item_ids(&self) -> Vec<ItemId> {
        self.items().collect()
    }

    pub fn len(&self) -> usize {
        self.clicks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clicks.is_empty()
    }
}

struct Open {
    start: i64,
    clicks: Vec<ClickEvent>,
    bought: bool,
}

/// Groups a time-ordered event stream into per-user sessions.
///
/// A session opens at a user's first event and absorbs every later event of
/// that user up to and including `start + window`; the next event after that
/// opens a new session. Windows with no clicks are dropped. Sessions are
/// returned ordered by (first click time, user id) and numbered from 0.
pub fn sessionize(events: &[Event], window: i64) -> Vec<Session> {
    let mut ordered: Vec<&Event> = events.iter().collect();
    ordered.sort_by_key(|e| e.timestamp);

    let mut open: HashMap<UserId, Open> = HashMap::new();
    let mut done: Vec<(UserId, Open)> = Vec::new();
    for e in ordered {
        if let Some(o) = open.get(&e.user_id) {
            if e.timestamp > o.start + window {
                let closed = open.remove(&e.user_id).expect("present");
                done.push((e.user_id, closed));
            }
        }
        let o = open.entry(e.user_id).or_insert_with(|| Open { start: e.timestamp, clicks: Vec::new(), bought: false });
        match e.kind {
            EventKind::Click => o.clicks.push(ClickEvent { item_id: e.item_id, timestamp: e.timestamp, user_id: e.user_id }),
            EventKind::Buy => o.bought = true,
        }
    }
    done.extend(open);

    let mut sessions: Vec<Session> = done
        .into_iter()
        .filter(|(_, o)| !o.clicks.is_empty())
        .map(|(user, o)| {
            let first = o.clicks[0].timestamp;
            Session { session_id: 0, user_id: user, clicks: o.clicks, label: o.bought, day: first.div_euclid(DAY_SECONDS) }
        })
        .collect();
    sessions.sort_by_key(|s| (s.clicks[0].timestamp, s.user_id));
    for (i, s) in sessions.iter_mut().enumerate() {
        s.session_id = i as u64;
    }
    sessions
}

/// Writes `timestamp<TAB>user_id<TAB>item_id<TAB>click|buy` lines.
pub fn write_events<W: Write>(events: &[Event], mut out: W) -> Result<()> {
    for e in events {
        let kind = match e.kind {
            EventKind::Click => "click",
            EventKind::Buy => "buy",
        };
        writeln!(out, "{}\t{}\t{}\t{}", e.timestamp, e.user_id, e.item_id, kind)?;
    }
    Ok(())
}

pub fn read_events<R: BufRead>(input: R) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let bad = |what: &str| Error::Data(format!("events line {}: bad {what}", n + 1));
        if f.len() != 4 {
            return Err(Error::Data(format!("events line {}: expected 4 tab-separated fields, got {}", n + 1, f.len())));
        }
        let kind = match f[3] {
            "click" => EventKind::Click,
            "buy" => EventKind::Buy,
            _ => return Err(bad("event type")),
        };
        events.push(Event {
            timestamp: f[0].parse().map_err(|_| bad("timestamp"))?,
            user_id: UserId(f[1].parse().map_err(|_| bad("user id"))?),
            item_id: ItemId(f[2].parse().map_err(|_| bad("item id"))?),
            kind,
        });
    }
    Ok(events)
}
