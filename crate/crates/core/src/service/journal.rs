use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{Result, ServiceError};
use crate::mushra::MushraResponse;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    /// Random 128-bit id, hex encoded. Also used as the listener id.
    pub session_id: String,
    pub alias: String,
    /// Permutation of campaign trial indices.
    pub trial_order: Vec<usize>,
    /// Number of trials submitted so far.
    pub cursor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogEvent {
    Session { session: SessionRecord },
    Response { session_id: String, response: MushraResponse },
}

/// One line of the append-only log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseLogEntry {
    pub seq: u64,
    pub timestamp_ms: u64,
    #[serde(flatten)]
    pub event: LogEvent,
}

#[derive(Debug, Clone, Default)]
pub struct LogContents {
    pub entries: Vec<ResponseLogEntry>,
    /// Byte length of the complete, valid prefix.
    pub valid_len: u64,
    /// Trailing bytes without a newline, left by an interrupted append.
    pub torn_tail: bool,
}

impl LogContents {
    pub fn last_seq(&self) -> Option<u64> {
        self.entries.last().map(|e| e.seq)
    }
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Parses log bytes. Every newline-terminated line must be a valid entry
/// with a sequence number above its predecessor; an unterminated final
/// fragment is reported as a torn tail rather than an error.
pub fn parse_log(bytes: &[u8]) -> Result<LogContents> {
    let mut out = LogContents::default();
    let mut offset = 0usize;
    let mut line_no = 0usize;
    while offset < bytes.len() {
        let Some(nl) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            out.torn_tail = true;
            break;
        };
        line_no += 1;
        let line = &bytes[offset..offset + nl];
        offset += nl + 1;
        if line.iter().all(u8::is_ascii_whitespace) {
            out.valid_len = offset as u64;
            continue;
        }
        let corrupt = || ServiceError::CorruptLog {
            line: line_no,
            last_valid_seq: out.last_seq(),
        };
        let entry: ResponseLogEntry = serde_json::from_slice(line).map_err(|_| corrupt())?;
        if out.last_seq().is_some_and(|s| entry.seq <= s) {
            return Err(corrupt());
        }
        out.entries.push(entry);
        out.valid_len = offset as u64;
    }
    Ok(out)
}

pub fn read_log(path: impl AsRef<Path>) -> Result<LogContents> {
    parse_log(&std::fs::read(path)?)
}

/// Append-only writer. Each entry is flushed to stable storage before
/// `append` returns.
#[derive(Debug)]
pub struct ResponseLog {
    file: File,
    next_seq: u64,
}

impl ResponseLog {
    /// Opens (or creates) a log, truncating a torn tail, and returns the
    /// writer with the entries already present.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<ResponseLogEntry>)> {
        let path = path.as_ref();
        let contents = match std::fs::read(path) {
            Ok(bytes) => parse_log(&bytes)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => LogContents::default(),
            Err(e) => return Err(e.into()),
        };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        if contents.torn_tail {
            log::warn!(
                "{}: discarding torn entry after seq {:?}",
                path.display(),
                contents.last_seq()
            );
            file.set_len(contents.valid_len)?;
            file.sync_all()?;
        }
        let next_seq = contents.last_seq().map_or(1, |s| s + 1);
        Ok((Self { file, next_seq }, contents.entries))
    }

    pub fn append(&mut self, event: LogEvent) -> Result<ResponseLogEntry> {
        let entry = ResponseLogEntry {
            seq: self.next_seq,
            timestamp_ms: now_ms(),
            event,
        };
        let mut line = serde_json::to_vec(&entry)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        self.next_seq += 1;
        Ok(entry)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session(id: &str) -> LogEvent {
        LogEvent::Session {
            session: SessionRecord {
                session_id: id.into(),
                alias: "x".into(),
                trial_order: vec![1, 0],
                cursor: 0,
            },
        }
    }

    #[test]
    fn append_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let (mut log, existing) = ResponseLog::open(&path).unwrap();
        assert!(existing.is_empty());
        assert_eq!(log.append(session("a")).unwrap().seq, 1);
        assert_eq!(log.append(session("b")).unwrap().seq, 2);
        drop(log);
        let (mut log, existing) = ResponseLog::open(&path).unwrap();
        assert_eq!(existing.len(), 2);
        assert_eq!(log.append(session("c")).unwrap().seq, 3);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().next().unwrap().contains("\"type\":\"session\""));
    }

    #[test]
    fn torn_tail_is_reported_then_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let (mut log, _) = ResponseLog::open(&path).unwrap();
        log.append(session("a")).unwrap();
        drop(log);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"seq\":2,\"timesta").unwrap();
        drop(f);

        let contents = read_log(&path).unwrap();
        assert!(contents.torn_tail);
        assert_eq!(contents.last_seq(), Some(1));

        let (mut log, existing) = ResponseLog::open(&path).unwrap();
        assert_eq!(existing.len(), 1);
        assert_eq!(log.append(session("b")).unwrap().seq, 2);
        let contents = read_log(&path).unwrap();
        assert!(!contents.torn_tail);
        assert_eq!(contents.entries.len(), 2);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let good = serde_json::to_string(&ResponseLogEntry {
            seq: 4,
            timestamp_ms: 0,
            event: session("a"),
        })
        .unwrap();
        let bytes = format!("{good}\nnot json\n");
        assert!(matches!(
            parse_log(bytes.as_bytes()),
            Err(ServiceError::CorruptLog { line: 2, last_valid_seq: Some(4) })
        ));
        let bytes = format!("{good}\n{good}\n");
        assert!(matches!(parse_log(bytes.as_bytes()), Err(ServiceError::CorruptLog { line: 2, .. })));
    }
}
