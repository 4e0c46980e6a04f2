//! Piecewise-constant global field commands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnetics::FieldCommand;
use crate::units::{mt_to_t, t_to_mt};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub command: FieldCommand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    segments: Vec<Segment>,
    duration: f64,
}

impl ControlSchedule {
    pub fn new(segments: Vec<Segment>, duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(Error::Schedule(format!("duration must be >= 0, got {duration}")));
        }
        let first = segments
            .first()
            .ok_or_else(|| Error::Schedule("schedule has no segments".into()))?;
        if first.t_start != 0.0 {
            return Err(Error::Schedule(format!(
                "first segment must start at 0, starts at {}",
                first.t_start
            )));
        }
        for w in segments.windows(2) {
            if !(w[1].t_start > w[0].t_start) {
                return Err(Error::Schedule(format!(
                    "segment start times must increase strictly ({} then {})",
                    w[0].t_start, w[1].t_start
                )));
            }
        }
        if duration > 0.0 {
            if let Some(s) = segments.iter().find(|s| !(s.t_start < duration)) {
                return Err(Error::Schedule(format!(
                    "segment starting at {} is not before the end of the schedule ({duration})",
                    s.t_start
                )));
            }
        } else if segments.len() > 1 {
            return Err(Error::Schedule("a zero-length schedule holds a single segment".into()));
        }
        for s in &segments {
            FieldCommand::new(s.command.angle, s.command.magnitude).map_err(|e| Error::Schedule(e.to_string()))?;
        }
        Ok(Self { segments, duration })
    }

    /// One command held for the whole duration.
    pub fn constant(command: FieldCommand, duration: f64) -> Result<Self> {
        Self::new(vec![Segment { t_start: 0.0, command }], duration)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Index of the segment active at `t` (segments are closed on the left).
    pub fn segment_index(&self, t: f64) -> usize {
        self.segments.partition_point(|s| s.t_start <= t).saturating_sub(1)
    }

    pub fn command_at(&self, t: f64) -> FieldCommand {
        self.segments[self.segment_index(t)].command
    }

    /// End time of segment `i`.
    pub fn segment_end(&self, i: usize) -> f64 {
        self.segments.get(i + 1).map_or(self.duration, |s| s.t_start)
    }

    /// Segment start times lying strictly inside (t0, t1).
    pub fn switches_within(&self, t0: f64, t1: f64) -> impl Iterator<Item = f64> + '_ {
        self.segments
            .iter()
            .map(|s| s.t_start)
            .filter(move |&t| t > t0 && t < t1)
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScheduleFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ScheduleFile::from(self))?)
    }
}

/// Boundary form of a schedule: seconds, radians, millitesla.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    pub duration_s: f64,
    pub segments: Vec<SegmentFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentFile {
    pub t_start_s: f64,
    pub angle_rad: f64,
    #[serde(rename = "magnitude_mT")]
    pub magnitude_mt: f64,
}

impl TryFrom<ScheduleFile> for ControlSchedule {
    type Error = Error;

    fn try_from(f: ScheduleFile) -> Result<Self> {
        let segments = f
            .segments
            .iter()
            .map(|s| {
                Ok(Segment {
                    t_start: s.t_start_s,
                    command: FieldCommand::new(s.angle_rad, mt_to_t(s.magnitude_mt))
                        .map_err(|e| Error::Schedule(e.to_string()))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ControlSchedule::new(segments, f.duration_s)
    }
}

impl From<&ControlSchedule> for ScheduleFile {
    fn from(s: &ControlSchedule) -> Self {
        Self {
            duration_s: s.duration,
            segments: s
                .segments
                .iter()
                .map(|seg| SegmentFile {
                    t_start_s: seg.t_start,
                    angle_rad: seg.command.angle,
                    magnitude_mt: t_to_mt(seg.command.magnitude),
                })
                .collect(),
        }
    }
}
