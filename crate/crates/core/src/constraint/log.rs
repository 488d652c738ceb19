//! JSONL decision logs.

use std::io::{self, BufRead, BufWriter, Write};

use serde::{Deserialize, Serialize};

use crate::constraint::oracle::Verdict;

/// One access query: `subject` performing `action` on `object`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRecord {
    pub query_id: u64,
    pub subject: String,
    pub action: String,
    pub object: String,
    pub state_digest: String,
    pub ground_truth: Verdict,
    pub verdict: Verdict,
    pub oracle_id: String,
    pub seed: Option<u64>,
}

/// Single-writer JSONL sink.
pub struct DecisionLog<W: Write> {
    out: BufWriter<W>,
    written: usize,
}

impl<W: Write> DecisionLog<W> {
    pub fn new(inner: W) -> Self {
        DecisionLog {
            out: BufWriter::new(inner),
            written: 0,
        }
    }

    pub fn written(&self) -> usize {
        self.written
    }

    /// Flush and hand back the underlying writer.
    pub fn close(self) -> io::Result<W> {
        self.out.into_inner().map_err(|e| e.into_error())
    }
}

/// Append `record` to `sink` as one JSON line.
pub fn log_decision<W: Write>(sink: &mut DecisionLog<W>, record: &DecisionRecord) -> io::Result<()> {
    serde_json::to_writer(&mut sink.out, record)?;
    sink.out.write_all(b"\n")?;
    sink.written += 1;
    Ok(())
}

/// Read a log written by [`log_decision`]. Blank lines are skipped.
pub fn read_log<R: BufRead>(reader: R) -> io::Result<Vec<DecisionRecord>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Agreement of oracle verdicts with ground truth, treating `allow` as the
/// positive class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DecisionMetrics {
    pub total: usize,
    pub true_allow: usize,
    pub false_allow: usize,
    pub true_deny: usize,
    pub false_deny: usize,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
}

impl DecisionMetrics {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a DecisionRecord>) -> Self {
        let mut m = DecisionMetrics::default();
        for r in records {
            m.total += 1;
            match (r.verdict, r.ground_truth) {
                (Verdict::Allow, Verdict::Allow) => m.true_allow += 1,
                (Verdict::Allow, Verdict::Deny) => m.false_allow += 1,
                (Verdict::Deny, Verdict::Deny) => m.true_deny += 1,
                (Verdict::Deny, Verdict::Allow) => m.false_deny += 1,
            }
        }
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        m.precision = ratio(m.true_allow, m.true_allow + m.false_allow);
        m.recall = ratio(m.true_allow, m.true_allow + m.false_deny);
        m.accuracy = ratio(m.true_allow + m.true_deny, m.total);
        m
    }
}
