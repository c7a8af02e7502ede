//! Metrics and Table-I-style reports.

use std::fmt::Write as _;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::agents::{baseline_output, duration_from_raw, AgentKind, AgentSuite, EncodedLog, IntentionSet};
use crate::encoding::IntentionEmbedding;
use crate::error::{Error, Result};

/// Compensation added to the ground truth in [`relative_error`], in minutes.
pub const DURATION_EPS_MIN: f64 = 1.0;

/// `|(pred − gt) / (gt + ε)|`.
pub fn relative_error(pred: f64, gt: f64, eps: f64) -> f64 {
    ((pred - gt) / (gt + eps)).abs()
}

/// Indices ordered by descending score; equal scores keep ascending index.
pub fn rank(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Fraction of cases whose label is among the first `k` ranked entries.
pub fn topk_accuracy(rankings: &[Vec<usize>], labels: &[usize], k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if rankings.len() != labels.len() || rankings.is_empty() {
        return Err(Error::Data(format!(
            "{} rankings for {} labels",
            rankings.len(),
            labels.len()
        )));
    }
    let hits = rankings
        .iter()
        .zip(labels)
        .filter(|(r, l)| r.iter().take(k).any(|x| x == *l))
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Whether `gt` is among the `k` set entries most similar to `pred`.
pub fn intention_topk(pred: &IntentionEmbedding, gt: &str, set: &IntentionSet, k: usize) -> Result<bool> {
    Ok(intention_rank(pred, gt, set)? < k)
}

/// Zero-based position of `gt` when the set is ranked against `pred`.
pub fn intention_rank(pred: &IntentionEmbedding, gt: &str, set: &IntentionSet) -> Result<usize> {
    if set.embedding(gt).is_none() {
        return Err(Error::NotFound(format!("intention '{gt}' in the intention set")));
    }
    let gt = crate::encoding::normalize_text(gt);
    let ranked = set.nearest(pred, set.len())?;
    Ok(ranked.iter().position(|(t, _)| *t == gt).expect("present"))
}

/// Top-1/3/5 hit rates as fractions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TopK {
    pub top1: f64,
    pub top3: f64,
    pub top5: f64,
}

#[derive(Debug, Default)]
struct TopKCounter {
    hits: [usize; 3],
    n: usize,
}

impl TopKCounter {
    fn add(&mut self, position: usize) {
        for (slot, k) in [1, 3, 5].into_iter().enumerate() {
            if position < k {
                self.hits[slot] += 1;
            }
        }
        self.n += 1;
    }

    fn finish(&self) -> TopK {
        let f = |h: usize| if self.n == 0 { 0.0 } else { h as f64 / self.n as f64 };
        TopK {
            top1: f(self.hits[0]),
            top3: f(self.hits[1]),
            top5: f(self.hits[2]),
        }
    }
}

/// Scores of one method on one participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    /// Mean per-event relative error (a fraction, not a percentage).
    pub duration_rel_error: f64,
    pub action: TopK,
    pub short: TopK,
    /// Absent for the end-to-end baseline.
    pub long: Option<TopK>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRow {
    pub participant: String,
    pub samples: usize,
    pub structured: MethodScores,
    pub baseline: MethodScores,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<ParticipantRow>,
}

/// Scores the structured agents and the baseline of one participant on
/// targets in `range`. Every method sees the same targets: those with a full
/// long-term window of history.
pub fn evaluate_participant(
    suite: &AgentSuite,
    log: &EncodedLog,
    range: Range<usize>,
    set: &IntentionSet,
) -> Result<ParticipantRow> {
    let start = range.start.max(suite.hyper().long_window - 1).max(suite.hyper().window - 1);
    let targets: Vec<usize> = (start..range.end.min(log.len())).collect();
    if targets.is_empty() {
        return Err(Error::Data("no evaluable targets in range".into()));
    }
    let mut s_act = TopKCounter::default();
    let mut s_short = TopKCounter::default();
    let mut s_long = TopKCounter::default();
    let mut b_act = TopKCounter::default();
    let mut b_short = TopKCounter::default();
    let (mut s_dur, mut b_dur) = (0.0, 0.0);
    for &t in &targets {
        let gt_action = log.action(t);
        let gt_dur = log.duration(t) as f64;

        let logits = suite.action.raw_at(log, t, None)?;
        let ranking = rank(&logits);
        s_act.add(ranking.iter().position(|&a| a == gt_action).expect("full ranking"));
        let dur = duration_from_raw(suite.duration.raw_at(log, t, None)?[0]);
        s_dur += relative_error(dur, gt_dur, DURATION_EPS_MIN);
        let short = IntentionEmbedding(suite.short.raw_at(log, t, Some(ranking[0]))?).normalized();
        s_short.add(intention_rank(&short, log.short_text(t), set)?);
        let long = IntentionEmbedding(suite.long.raw_at(log, t, None)?).normalized();
        s_long.add(intention_rank(&long, log.long_text(t), set)?);

        let out = baseline_output(&suite.baseline.raw_at(log, t, None)?);
        let ranking = rank(&out.action_probs);
        b_act.add(ranking.iter().position(|&a| a == gt_action).expect("full ranking"));
        b_dur += relative_error(out.duration_min, gt_dur, DURATION_EPS_MIN);
        b_short.add(intention_rank(&out.intention, log.short_text(t), set)?);
    }
    let n = targets.len() as f64;
    Ok(ParticipantRow {
        participant: log.participant.clone(),
        samples: targets.len(),
        structured: MethodScores {
            duration_rel_error: s_dur / n,
            action: s_act.finish(),
            short: s_short.finish(),
            long: Some(s_long.finish()),
        },
        baseline: MethodScores {
            duration_rel_error: b_dur / n,
            action: b_act.finish(),
            short: b_short.finish(),
            long: None,
        },
    })
}

/// Checks that every agent of `suite` was trained on data like `log`.
pub fn check_suite(suite: &AgentSuite, log: &EncodedLog) -> Result<()> {
    for agent in [&suite.action, &suite.duration, &suite.short, &suite.long, &suite.baseline] {
        if agent.meta.fingerprint != log.fingerprint {
            return Err(Error::Fingerprint {
                expected: agent.meta.fingerprint.clone(),
                found: log.fingerprint.clone(),
            });
        }
    }
    debug_assert_eq!(suite.baseline.kind(), AgentKind::Baseline);
    Ok(())
}

fn pct(x: f64) -> f64 {
    (x * 10000.0).round() / 100.0
}

fn topk_json(t: &TopK) -> serde_json::Value {
    serde_json::json!({ "top1": pct(t.top1), "top3": pct(t.top3), "top5": pct(t.top5) })
}

fn method_json(m: &MethodScores) -> serde_json::Value {
    serde_json::json!({
        "duration_rel_error_pct": pct(m.duration_rel_error),
        "action": topk_json(&m.action),
        "short_term": topk_json(&m.short),
        "long_term": m.long.as_ref().map(topk_json),
    })
}

impl MetricsReport {
    /// Mean action top-1 of (structured, baseline) over rows.
    pub fn mean_action_top1(&self) -> (f64, f64) {
        let n = self.rows.len().max(1) as f64;
        (
            self.rows.iter().map(|r| r.structured.action.top1).sum::<f64>() / n,
            self.rows.iter().map(|r| r.baseline.action.top1).sum::<f64>() / n,
        )
    }

    /// Serialized form: percentages rounded to two decimals.
    pub fn to_json(&self) -> serde_json::Value {
        let (s, b) = self.mean_action_top1();
        serde_json::json!({
            "v": 1,
            "rows": self.rows.iter().map(|r| serde_json::json!({
                "participant": r.participant,
                "samples": r.samples,
                "structured": method_json(&r.structured),
                "baseline": method_json(&r.baseline),
            })).collect::<Vec<_>>(),
            "mean_action_top1_pct": { "structured": pct(s), "baseline": pct(b) },
        })
    }

    /// Aligned plain-text table with one line per participant and method.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let head = [
            "participant", "method", "dur err%", "act@1", "act@3", "act@5", "short@1", "short@3",
            "short@5", "long@1", "long@3", "long@5",
        ];
        let mut lines: Vec<Vec<String>> = vec![head.iter().map(|s| s.to_string()).collect()];
        for r in &self.rows {
            for (name, m) in [("structured", &r.structured), ("baseline", &r.baseline)] {
                let mut cells = vec![r.participant.clone(), name.to_string(), format!("{:.2}", pct(m.duration_rel_error))];
                for t in [Some(&m.action), Some(&m.short), m.long.as_ref()] {
                    match t {
                        Some(t) => cells.extend([t.top1, t.top3, t.top5].map(|x| format!("{:.2}", pct(x)))),
                        None => cells.extend(["-", "-", "-"].map(String::from)),
                    }
                }
                lines.push(cells);
            }
        }
        let widths: Vec<usize> = (0..head.len())
            .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
            .collect();
        for l in &lines {
            let row: Vec<String> = l
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, w))| if i < 2 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", row.join("  ").trim_end());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::embed_intention;

    #[test]
    fn relative_error_spot_values() {
        assert_eq!(relative_error(30.0, 30.0, 1.0), 0.0);
        assert_eq!(relative_error(45.0, 30.0, 1.0), 15.0 / 31.0);
        assert_eq!(relative_error(5.0, 0.0, 1.0), 5.0);
    }

    #[test]
    fn topk_examples() {
        // vocabulary a=0, b=1, c=2
        let r = vec![vec![1, 0, 2]];
        assert_eq!(topk_accuracy(&r, &[1], 1).unwrap(), 1.0);
        let r = vec![vec![0, 1, 2]];
        assert_eq!(topk_accuracy(&r, &[2], 1).unwrap(), 0.0);
        assert_eq!(topk_accuracy(&r, &[2], 2).unwrap(), 0.0);
        assert_eq!(topk_accuracy(&r, &[2], 3).unwrap(), 1.0);
        assert!(topk_accuracy(&r, &[2], 0).is_err());
    }

    #[test]
    fn rank_breaks_ties_by_index() {
        assert_eq!(rank(&[0.5, 0.9, 0.5, 0.9]), vec![1, 3, 0, 2]);
    }

    #[test]
    fn intention_topk_examples() {
        let set = IntentionSet::new("P", ["cook dinner", "watch tv", "sleep"]).unwrap();
        assert!(intention_topk(&embed_intention("watch tv"), "watch tv", &set, 1).unwrap());
        assert!(intention_topk(&embed_intention("zzz"), "sleep", &set, 3).unwrap());
        assert!(intention_topk(&embed_intention("x"), "fly", &set, 1).is_err());
    }
}
