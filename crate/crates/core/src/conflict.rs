//! Short-term versus long-term intention conflicts.
//!
//! A conflict is raised when the short-term intention is farther than `δ`
//! from every entry of the long-term list: `r = 1` iff `min D > δ`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::agents::{duration_from_raw, AgentSuite, EncodedLog, DEFAULT_K};
use crate::encoding::{embed_intention, IntentionEmbedding};
use crate::error::{Error, Result};
use crate::persona::{ConflictGroundTruth, Schedule};
use crate::world::{Observation, ObservationLog, Timestamp};

pub const DEFAULT_DELTA: f64 = 0.3;

/// `1 − cos(a, b)`, in `[0, 2]`.
pub fn distance(a: &IntentionEmbedding, b: &IntentionEmbedding) -> Result<f64> {
    if a.is_zero() || b.is_zero() {
        return Err(Error::Data("distance to a zero embedding is undefined".into()));
    }
    Ok((1.0 - a.cosine(b)).clamp(0.0, 2.0))
}

/// One entry of a long-term list. The embedding is rebuilt from the text
/// when deserializing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "LongEntryText")]
pub struct LongEntry {
    pub text: String,
    pub similarity: f64,
    #[serde(skip)]
    pub embedding: IntentionEmbedding,
}

#[derive(Deserialize)]
struct LongEntryText {
    text: String,
    similarity: f64,
}

impl From<LongEntryText> for LongEntry {
    fn from(e: LongEntryText) -> Self {
        LongEntry::new(&e.text, e.similarity)
    }
}

impl LongEntry {
    pub fn new(text: &str, similarity: f64) -> LongEntry {
        LongEntry {
            text: text.to_string(),
            similarity,
            embedding: embed_intention(text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortIntention {
    pub text: String,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictReport {
    /// Position of the judged event in its log or session.
    pub event_index: usize,
    pub timestamp: Timestamp,
    pub r_conf: u8,
    pub min_distance: f64,
    pub threshold: f64,
    /// False when the duration gate skipped the comparison.
    pub evaluated: bool,
    pub short_intention: ShortIntention,
    pub long_list: Vec<LongEntry>,
    pub query_text: String,
}

pub fn query_text(planned: &str, current: &str) -> String {
    format!("You planned to {planned}; you appear to be {current}. Should I help you switch?")
}

/// Compares a short-term intention against a long-term list.
pub fn detect(
    short: &IntentionEmbedding,
    short_text: &str,
    long_list: &[LongEntry],
    delta: f64,
    event_index: usize,
    timestamp: Timestamp,
) -> Result<ConflictReport> {
    if long_list.is_empty() {
        return Err(Error::Data("long-term list is empty".into()));
    }
    if !(0.0..=2.0).contains(&delta) {
        return Err(Error::Config(format!("threshold {delta} outside [0, 2]")));
    }
    let mut min_distance = f64::INFINITY;
    for entry in long_list {
        min_distance = min_distance.min(distance(short, &entry.embedding)?);
    }
    let r_conf = u8::from(min_distance > delta);
    Ok(ConflictReport {
        event_index,
        timestamp,
        r_conf,
        min_distance,
        threshold: delta,
        evaluated: true,
        short_intention: ShortIntention {
            text: short_text.to_string(),
            embedding: short.as_slice().to_vec(),
        },
        long_list: long_list.to_vec(),
        query_text: if r_conf == 1 {
            query_text(&long_list[0].text, short_text)
        } else {
            String::new()
        },
    })
}

impl ConflictReport {
    /// Marks the report as skipped: no conflict and no query.
    fn gated(mut self) -> ConflictReport {
        self.evaluated = false;
        self.r_conf = 0;
        self.query_text.clear();
        self
    }
}

/// Duration gate: an event starting at `minute` and expected to last
/// `predicted_min` is judged only if it reaches into the tolerance-widened
/// window of the planned routine's current or next occurrence. Plans that
/// are not on the timetable are never judged.
pub fn gate_allows(schedule: &Schedule, planned: &str, weekday: u8, minute: u32, predicted_min: f64) -> bool {
    let Some(occ) = schedule.occurrence(planned, weekday, minute) else {
        return false;
    };
    let tol = schedule.tolerance_min as f64;
    let (s, e) = (minute as f64, minute as f64 + predicted_min.max(0.0));
    let (ws, we) = (occ.start as f64 - tol, (occ.start + occ.span) as f64 + tol);
    e > ws && s < we
}

/// Settings of a detection run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectConfig {
    pub delta: f64,
    pub k: usize,
    pub duration_gate: bool,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            delta: DEFAULT_DELTA,
            k: DEFAULT_K,
            duration_gate: true,
        }
    }
}

/// Detection with ground-truth texts embedded directly: the short-term
/// intention is the one acted on and the list holds the planned one.
pub fn detect_oracle(
    log: &ObservationLog,
    gt: &ConflictGroundTruth,
    schedule: &Schedule,
    config: DetectConfig,
) -> Result<Vec<ConflictReport>> {
    if gt.labels.len() != log.len() {
        return Err(Error::Data("ground truth does not cover the log".into()));
    }
    log.events
        .iter()
        .zip(&gt.labels)
        .enumerate()
        .map(|(i, (ev, label))| {
            let short = embed_intention(&label.actual_short_intention);
            let list = [LongEntry::new(&label.expected_long_intention, 1.0)];
            let report = detect(&short, &label.actual_short_intention, &list, config.delta, i, ev.start())?;
            let allowed = !config.duration_gate
                || gate_allows(schedule, &label.expected_long_intention, ev.weekday, ev.start_time, ev.duration_min as f64);
            Ok(if allowed { report } else { report.gated() })
        })
        .collect()
}

/// Judges one event with the learned agents.
pub fn detect_event(
    suite: &AgentSuite,
    log: &EncodedLog,
    event: &Observation,
    t: usize,
    config: DetectConfig,
) -> Result<ConflictReport> {
    let set = &suite.intentions;
    let short = IntentionEmbedding(suite.short.raw_at(log, t, None)?).normalized();
    let short_text = set.nearest(&short, 1)?.remove(0).0;
    let long = IntentionEmbedding(suite.long.raw_at(log, t, None)?).normalized();
    let list: Vec<LongEntry> = set
        .nearest(&long, config.k)?
        .into_iter()
        .map(|(text, sim)| LongEntry::new(&text, sim))
        .collect();
    let report = detect(&short, &short_text, &list, config.delta, t, event.start())?;
    if !config.duration_gate {
        return Ok(report);
    }
    let predicted = duration_from_raw(suite.duration.raw_at(log, t, None)?[0]);
    let allowed = gate_allows(&suite.schedule, &list[0].text, event.weekday, event.start_time, predicted);
    Ok(if allowed { report } else { report.gated() })
}

/// Learned detection over the targets in `range` that have a full window.
pub fn detect_learned(
    suite: &AgentSuite,
    encoded: &EncodedLog,
    log: &ObservationLog,
    range: Range<usize>,
    config: DetectConfig,
) -> Result<Vec<ConflictReport>> {
    let start = range.start.max(suite.hyper().long_window - 1).max(suite.hyper().window - 1);
    (start..range.end.min(log.len()))
        .map(|t| detect_event(suite, encoded, &log.events[t], t, config))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorScores {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    /// `None` when there are no conflicts to find.
    pub recall: Option<f64>,
    /// `None` when there are no conflict-free events.
    pub false_positive_rate: Option<f64>,
    /// `None` when the detector never fired.
    pub precision: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Confusion-matrix rates of reports against ground-truth labels.
pub fn evaluate_detector(reports: &[ConflictReport], gt: &ConflictGroundTruth) -> Result<DetectorScores> {
    let mut seen = vec![false; gt.labels.len()];
    let (mut tp, mut fp, mut tn, mut fneg) = (0, 0, 0, 0);
    for r in reports {
        let label = gt
            .labels
            .get(r.event_index)
            .filter(|l| l.index == r.event_index)
            .ok_or_else(|| Error::Data(format!("report for event {} has no ground truth", r.event_index)))?;
        if std::mem::replace(&mut seen[r.event_index], true) {
            return Err(Error::Data(format!("two reports for event {}", r.event_index)));
        }
        match (label.is_conflict == 1, r.r_conf == 1) {
            (true, true) => tp += 1,
            (true, false) => fneg += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(DetectorScores {
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fneg,
        recall: ratio(tp, tp + fneg),
        false_positive_rate: ratio(fp, fp + tn),
        precision: ratio(tp, tp + fp),
    })
}
