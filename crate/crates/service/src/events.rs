//! Session events and their on-disk log.
//!
//! Every change to a session is an [`Event`]; the log is the session's
//! only persistent form. [`Session::replay`](crate::session::Session::replay)
//! rebuilds the tutor board and the agent from it.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dipl_core::agent::{AgentConfig, SkillApplication};
use dipl_core::tutor::{Domain, ProblemSpec};
use dipl_core::{InterfaceState, Sai, TrainingSignal};

use crate::error::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// The caller grades attempts and demonstrates steps.
    HumanTutor,
    /// The built-in tutor grades each attempt and demonstrates the next
    /// step after a wrong attempt or a hint request.
    AutoTutor,
}

/// Why the board changed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "cause")]
pub enum StateCause {
    Applied { sai: Sai },
    NewProblem { problem: ProblemSpec, generated: bool },
}

/// Compact view of one skill for display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillSummary {
    pub id: String,
    pub label: Option<String>,
    pub how: String,
    pub utility: f64,
    pub positives: u32,
    pub total: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillsSummary {
    pub count: usize,
    pub skills: Vec<SkillSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum Event {
    SessionCreated {
        session_id: String,
        domain: Domain,
        mode: Mode,
        seed: u64,
        agent_config: AgentConfig,
        problem: ProblemSpec,
        state: InterfaceState,
    },
    StateChanged {
        #[serde(flatten)]
        cause: StateCause,
        state: InterfaceState,
        complete: bool,
    },
    AgentAttempted {
        /// `None` is a hint request.
        action: Option<Sai>,
        conflict_set: Vec<SkillApplication>,
    },
    SkillUpdated {
        signal: TrainingSignal,
        skills_summary: SkillsSummary,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Starts at 1 and increases by one per event.
    pub seq: u64,
    #[serde(flatten)]
    pub event: Event,
}

/// Append-only NDJSON event file. Each line is one [`EventRecord`].
#[derive(Debug)]
pub struct EventLog {
    path: Option<PathBuf>,
    file: Option<File>,
    lines: Vec<String>,
}

impl EventLog {
    /// A log kept in memory only.
    pub fn in_memory() -> EventLog {
        EventLog {
            path: None,
            file: None,
            lines: Vec::new(),
        }
    }

    /// Creates a new log file; fails if it already exists.
    pub fn create(path: &Path) -> Result<EventLog, ServiceError> {
        let file = OpenOptions::new().create_new(true).append(true).open(path)?;
        Ok(EventLog {
            path: Some(path.to_path_buf()),
            file: Some(file),
            lines: Vec::new(),
        })
    }

    /// Opens an existing log for appending and returns its records.
    pub fn open(path: &Path) -> Result<(EventLog, Vec<EventRecord>), ServiceError> {
        let records = read_log(path)?;
        let lines = records.iter().map(|r| serde_json::to_string(r).expect("events serialize")).collect();
        let file = OpenOptions::new().append(true).open(path)?;
        Ok((
            EventLog {
                path: Some(path.to_path_buf()),
                file: Some(file),
                lines,
            },
            records,
        ))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn last_seq(&self) -> u64 {
        self.lines.len() as u64
    }

    /// Assigns the next sequence number, writes the line and returns it.
    pub fn append(&mut self, event: Event) -> Result<String, ServiceError> {
        let record = EventRecord {
            seq: self.last_seq() + 1,
            event,
        };
        let line = serde_json::to_string(&record).expect("events serialize");
        if let Some(f) = &mut self.file {
            f.write_all(line.as_bytes())?;
            f.write_all(b"\n")?;
            f.flush()?;
        }
        self.lines.push(line.clone());
        Ok(line)
    }

    /// Lines with a sequence number above `after`.
    pub fn lines_after(&self, after: u64) -> &[String] {
        let from = (after as usize).min(self.lines.len());
        &self.lines[from..]
    }
}

/// Reads a log file, checking that sequence numbers run 1, 2, 3, ...
pub fn read_log(path: &Path) -> Result<Vec<EventRecord>, ServiceError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out: Vec<EventRecord> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EventRecord = serde_json::from_str(&line)
            .map_err(|e| ServiceError::Log(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if record.seq != out.len() as u64 + 1 {
            return Err(ServiceError::Log(format!(
                "{}:{}: expected seq {}, found {}",
                path.display(),
                i + 1,
                out.len() + 1,
                record.seq
            )));
        }
        out.push(record);
    }
    Ok(out)
}
