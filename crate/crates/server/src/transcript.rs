//! Recorded client input, keyed by tick, for deterministic replay.
//!
//! File layout (JSON lines): a header
//! `{"seed":S,"tick_rate":R,"time_scale":X,"ticks":N}` followed by one
//! `{"tick":k,"line":"<raw client line>"}` per received message. A message
//! with tick `k` was applied before the `k`-th tick advanced the clock;
//! `k == N` means after the final tick.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ServerError};
use crate::session::{Session, SessionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    seed: u64,
    tick_rate: f64,
    time_scale: f64,
    ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub tick: u64,
    pub line: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub seed: u64,
    /// Hz
    pub tick_rate: f64,
    pub time_scale: f64,
    pub ticks: u64,
    pub events: Vec<Event>,
}

impl Transcript {
    /// Empty transcript for a session with this configuration.
    pub fn new(config: &SessionConfig) -> Self {
        Self {
            seed: config.seed,
            tick_rate: config.tick_rate,
            time_scale: config.time_scale,
            ticks: 0,
            events: Vec::new(),
        }
    }

    /// Notes a line received before the next tick.
    pub fn record(&mut self, line: &str) {
        self.events.push(Event {
            tick: self.ticks,
            line: line.to_string(),
        });
    }

    pub fn record_tick(&mut self) {
        self.ticks += 1;
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let bad = |line: usize, e: serde_json::Error| ServerError::Transcript {
            line: line + 1,
            message: e.to_string(),
        };
        let (n, first) = lines.next().ok_or(ServerError::Transcript {
            line: 1,
            message: "empty transcript".into(),
        })?;
        let header: Header = serde_json::from_str(first).map_err(|e| bad(n, e))?;
        let mut events: Vec<Event> = Vec::new();
        for (n, l) in lines {
            let ev: Event = serde_json::from_str(l).map_err(|e| bad(n, e))?;
            if ev.tick > header.ticks || events.last().is_some_and(|p| p.tick > ev.tick) {
                return Err(ServerError::Transcript {
                    line: n + 1,
                    message: format!("tick {} out of order or beyond {}", ev.tick, header.ticks),
                });
            }
            events.push(ev);
        }
        Ok(Self {
            seed: header.seed,
            tick_rate: header.tick_rate,
            time_scale: header.time_scale,
            ticks: header.ticks,
            events,
        })
    }

    pub fn to_text(&self) -> String {
        let header = Header {
            seed: self.seed,
            tick_rate: self.tick_rate,
            time_scale: self.time_scale,
            ticks: self.ticks,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    /// Runs the transcript against a fresh session built from `config` with
    /// the transcript's seed and clock, and returns every server line in
    /// emission order.
    pub fn replay(&self, mut config: SessionConfig) -> Result<Vec<String>> {
        config.seed = self.seed;
        config.tick_rate = self.tick_rate;
        config.time_scale = self.time_scale;
        let mut session = Session::new(config)?;
        let mut out = Vec::new();
        let mut events = self.events.iter().peekable();
        for tick in 0..=self.ticks {
            while let Some(e) = events.next_if(|e| e.tick == tick) {
                out.extend(session.handle_line(&e.line).iter().map(|m| m.to_line()));
            }
            if tick < self.ticks {
                out.push(session.tick()?.to_line());
            }
        }
        Ok(out)
    }
}
