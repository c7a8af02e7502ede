//! The four cooperating agents and the end-to-end baseline.
//!
//! * `action` and `duration` read the last `W - 1` events and a query made of
//!   the next slot's time features.
//! * `short_intention` additionally sees the action taken in that slot.
//! * `long_intention` reads `W_long - 1` events including their intention
//!   labels and emits one embedding, matched against an [`IntentionSet`].
//! * `baseline_end_to_end` is one trunk with three heads and a learned query.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{checkpoint, init_params, Adam, Arch, Ctx, Grads, Graph, ParamStore, Tensor, Var};
use crate::encoding::{
    binary_code, embed_intention, normalize_text, Encoder, IntentionEmbedding, ACTION_BITS, EMBED_DIM,
    TIME_FEATURES,
};
use crate::error::{Error, Result};
use crate::persona::{ConflictGroundTruth, Schedule, IDLE_INTENTION};
use crate::world::{Observation, ObservationLog, Timestamp};

pub const ACTION_CLASSES: usize = 26;
pub const DEFAULT_K: usize = 5;
const COSINE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Action,
    Duration,
    ShortIntention,
    LongIntention,
    #[serde(rename = "baseline_end_to_end")]
    Baseline,
}

impl AgentKind {
    pub const ALL: [AgentKind; 5] = [
        AgentKind::Action,
        AgentKind::Duration,
        AgentKind::ShortIntention,
        AgentKind::LongIntention,
        AgentKind::Baseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Action => "action",
            AgentKind::Duration => "duration",
            AgentKind::ShortIntention => "short_intention",
            AgentKind::LongIntention => "long_intention",
            AgentKind::Baseline => "baseline_end_to_end",
        }
    }

    /// Number of events in a training window, target included.
    pub fn window(self, hyper: &Hyper) -> usize {
        match self {
            AgentKind::LongIntention => hyper.long_window,
            _ => hyper.window,
        }
    }

    fn with_intention(self) -> bool {
        self == AgentKind::LongIntention
    }

    fn query_dim(self) -> usize {
        match self {
            AgentKind::ShortIntention => TIME_FEATURES + ACTION_BITS,
            AgentKind::Baseline => 0,
            _ => TIME_FEATURES,
        }
    }

    fn out_dim(self) -> usize {
        match self {
            AgentKind::Action => ACTION_CLASSES,
            AgentKind::Duration => 1,
            AgentKind::ShortIntention | AgentKind::LongIntention => EMBED_DIM,
            AgentKind::Baseline => ACTION_CLASSES + 1 + EMBED_DIM,
        }
    }

    pub fn arch(self, hyper: &Hyper, base_dim: usize) -> Arch {
        Arch {
            in_dim: base_dim + if self.with_intention() { EMBED_DIM } else { 0 },
            query_dim: self.query_dim(),
            d_model: hyper.d_model,
            heads: hyper.heads,
            ffn: hyper.ffn,
            out_dim: self.out_dim(),
            learned_query: self == AgentKind::Baseline,
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<AgentKind> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s || (s == "baseline" && *k == AgentKind::Baseline))
            .ok_or_else(|| Error::Config(format!("unknown agent kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub window: usize,
    pub long_window: usize,
    pub d_model: usize,
    pub heads: usize,
    pub ffn: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub max_epochs: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            window: 16,
            long_window: 64,
            d_model: 64,
            heads: 4,
            ffn: 128,
            batch_size: 32,
            learning_rate: 1e-3,
            patience: 5,
            max_epochs: 50,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 || self.long_window < 2 {
            return Err(Error::Config("windows must hold at least two events".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size and max_epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Replaces each idle plan with the next non-idle one.
fn upcoming<'a>(plans: impl DoubleEndedIterator<Item = &'a str>) -> Vec<String> {
    let mut next = IDLE_INTENTION;
    let mut out: Vec<String> = plans
        .rev()
        .map(|p| {
            if p != IDLE_INTENTION {
                next = p;
            }
            next.to_string()
        })
        .collect();
    out.reverse();
    out
}

/// A log together with the long-term intention each event belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledLog {
    pub log: ObservationLog,
    pub long_labels: Vec<String>,
}

impl LabeledLog {
    /// Labels each event with the routine it was planned to serve: its own
    /// block's scheduled intention, or for idle time the next one scheduled.
    /// Idle time after the last routine keeps the idle label.
    pub fn from_ground_truth(log: ObservationLog, gt: &ConflictGroundTruth) -> Result<LabeledLog> {
        if gt.labels.len() != log.len() || gt.labels.iter().enumerate().any(|(i, l)| l.index != i) {
            return Err(Error::Data(format!(
                "ground truth has {} labels for {} events",
                gt.labels.len(),
                log.len()
            )));
        }
        let long_labels = upcoming(gt.labels.iter().map(|l| l.expected_long_intention.as_str()));
        Ok(LabeledLog { log, long_labels })
    }

    /// Labels a log without mistakes, where every event was planned.
    pub fn untouched(log: ObservationLog) -> LabeledLog {
        let long_labels = upcoming(log.events.iter().map(|e| e.intention.as_str()));
        LabeledLog { log, long_labels }
    }

    /// Labels events from a (mined) timetable: the routine active at the
    /// event, else the next one due. Idle only when the timetable is empty.
    pub fn from_schedule(log: ObservationLog, schedule: &Schedule) -> LabeledLog {
        let long_labels = log
            .events
            .iter()
            .map(|e| {
                schedule
                    .current_or_next(e.weekday, e.start_time)
                    .map_or_else(|| IDLE_INTENTION.to_string(), |s| s.intention.clone())
            })
            .collect();
        LabeledLog { log, long_labels }
    }
}

/// Every per-event feature an agent may need, computed once per log.
#[derive(Debug, Clone)]
pub struct EncodedLog {
    pub participant: String,
    pub fingerprint: String,
    base_rows: Vec<Vec<f64>>,
    full_rows: Vec<Vec<f64>>,
    times: Vec<Vec<f64>>,
    action_codes: Vec<Vec<f64>>,
    actions: Vec<usize>,
    durations: Vec<i64>,
    short: Vec<IntentionEmbedding>,
    long: Vec<IntentionEmbedding>,
    short_texts: Vec<String>,
    long_texts: Vec<String>,
}

fn code_row(code: Vec<u8>) -> Vec<f64> {
    code.into_iter().map(f64::from).collect()
}

impl EncodedLog {
    pub fn new(encoder: &Encoder, data: &LabeledLog) -> Result<EncodedLog> {
        let log = &data.log;
        if log.fingerprint != encoder.world().fingerprint() {
            return Err(Error::Fingerprint {
                expected: encoder.world().fingerprint().to_string(),
                found: log.fingerprint.clone(),
            });
        }
        if data.long_labels.len() != log.len() {
            return Err(Error::Data("long-term labels do not cover the log".into()));
        }
        let full_rows = encoder.encode_log(log, true)?;
        let base = encoder.layout().base_dim;
        let base_rows = full_rows.iter().map(|r| r[..base].to_vec()).collect();
        let mut action_codes = Vec::with_capacity(log.len());
        let mut actions = Vec::with_capacity(log.len());
        for e in &log.events {
            let idx = encoder
                .world()
                .action_index(&e.action)
                .ok_or_else(|| Error::Encoding(format!("unregistered action '{}'", e.action)))?;
            actions.push(idx);
            action_codes.push(code_row(binary_code(idx, ACTION_BITS)?));
        }
        Ok(EncodedLog {
            participant: log.participant_id.clone(),
            fingerprint: log.fingerprint.clone(),
            base_rows,
            full_rows,
            times: log.events.iter().map(|e| encoder.time_features(e.start())).collect(),
            action_codes,
            actions,
            durations: log.events.iter().map(|e| e.duration_min).collect(),
            short: log.events.iter().map(|e| embed_intention(&e.intention)).collect(),
            long: data.long_labels.iter().map(|l| embed_intention(l)).collect(),
            short_texts: log.events.iter().map(|e| e.intention.clone()).collect(),
            long_texts: data.long_labels.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn action(&self, t: usize) -> usize {
        self.actions[t]
    }

    pub fn duration(&self, t: usize) -> i64 {
        self.durations[t]
    }

    pub fn short_text(&self, t: usize) -> &str {
        &self.short_texts[t]
    }

    pub fn long_text(&self, t: usize) -> &str {
        &self.long_texts[t]
    }

    pub fn short_embedding(&self, t: usize) -> &IntentionEmbedding {
        &self.short[t]
    }

    /// Encoder input for predicting event `t`.
    fn input(&self, kind: AgentKind, hyper: &Hyper, t: usize) -> Tensor {
        let w = kind.window(hyper) - 1;
        let rows = if kind.with_intention() {
            &self.full_rows
        } else {
            &self.base_rows
        };
        Tensor::from_rows(&rows[t - w..t]).expect("rows share one layout")
    }

    /// Decoder query for predicting event `t`, with an explicit action code
    /// for the short-term agent.
    fn query(&self, kind: AgentKind, t: usize, action: Option<usize>) -> Option<Tensor> {
        match kind {
            AgentKind::Baseline => None,
            AgentKind::ShortIntention => {
                let mut q = self.times[t].clone();
                match action {
                    Some(a) => q.extend(code_row(binary_code(a, ACTION_BITS).expect("action index fits"))),
                    None => q.extend_from_slice(&self.action_codes[t]),
                }
                Some(Tensor::row(q))
            }
            _ => Some(Tensor::row(self.times[t].clone())),
        }
    }
}

/// Indices into encoded logs that are valid prediction targets.
#[derive(Debug, Clone, Default)]
pub struct Dataset<'a> {
    pub items: Vec<(&'a EncodedLog, usize)>,
}

impl<'a> Dataset<'a> {
    /// Targets in `range` that have a full window of history before them.
    pub fn range(log: &'a EncodedLog, range: Range<usize>, window: usize) -> Dataset<'a> {
        let start = range.start.max(window - 1);
        Dataset {
            items: (start..range.end.min(log.len())).map(|t| (log, t)).collect(),
        }
    }

    pub fn extend(&mut self, other: Dataset<'a>) {
        self.items.extend(other.items);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMeta {
    pub kind: AgentKind,
    pub participant: String,
    pub fingerprint: String,
    pub seed: u64,
    pub horizon_days: u32,
    pub hyper: Hyper,
    pub arch: Arch,
}

/// Log-duration regression target.
fn duration_target(minutes: i64) -> f64 {
    (minutes.max(0) as f64).ln_1p()
}

/// Minutes from a raw duration output, clamped at zero.
pub fn duration_from_raw(raw: f64) -> f64 {
    (raw.exp() - 1.0).max(0.0)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_val_loss: f64,
    pub best_val_loss: f64,
    /// 0 when no epoch improved on the starting point.
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

/// A trained agent: metadata plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub meta: AgentMeta,
    pub params: ParamStore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutput {
    pub action_probs: Vec<f64>,
    pub duration_min: f64,
    pub intention: IntentionEmbedding,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut p = logits.to_vec();
    crate::autodiff::softmax_in_place(&mut p);
    p
}

impl Agent {
    pub fn kind(&self) -> AgentKind {
        self.meta.kind
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.meta, &self.params)
    }

    pub fn load(path: &Path) -> Result<Agent> {
        let (meta, params): (AgentMeta, ParamStore) = checkpoint::load(path)?;
        let expected = init_params(&meta.arch, 0)?;
        let shapes_match = expected.len() == params.len()
            && expected
                .iter()
                .zip(params.iter())
                .all(|((a, x), (b, y))| a == b && x.shape() == y.shape());
        if !shapes_match {
            return Err(Error::Checkpoint(format!(
                "{}: parameters do not match the recorded architecture",
                path.display()
            )));
        }
        Ok(Agent { meta, params })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        checkpoint::encode(&self.meta, &self.params)
    }

    fn forward<'p>(&'p self, g: &mut Graph<'p>, input: Tensor, query: Option<Tensor>) -> Result<Var> {
        Ctx::new(g, &self.params).forward(&self.meta.arch, input, query)
    }

    /// Raw network output for an already encoded input.
    pub fn raw(&self, input: Tensor, query: Option<Tensor>) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let out = self.forward(&mut g, input, query)?;
        Ok(g.value(out).data().to_vec())
    }

    /// Raw output for target `t` of an encoded log. `action` overrides the
    /// action code given to the short-term agent.
    pub fn raw_at(&self, log: &EncodedLog, t: usize, action: Option<usize>) -> Result<Vec<f64>> {
        let w = self.kind().window(&self.meta.hyper);
        if t + 1 < w || t >= log.len() {
            return Err(Error::Data(format!("target {t} lacks a window of {w}")));
        }
        self.check_fingerprint(&log.fingerprint)?;
        self.raw(log.input(self.kind(), &self.meta.hyper, t), log.query(self.kind(), t, action))
    }

    fn check_fingerprint(&self, found: &str) -> Result<()> {
        if found != self.meta.fingerprint {
            return Err(Error::Fingerprint {
                expected: self.meta.fingerprint.clone(),
                found: found.to_string(),
            });
        }
        Ok(())
    }

    fn require(&self, kinds: &[AgentKind]) -> Result<()> {
        if kinds.contains(&self.kind()) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "a {} agent cannot serve this prediction",
                self.kind()
            )))
        }
    }

    fn encode_window(&self, enc: &Encoder, window: &[Observation]) -> Result<Tensor> {
        self.check_fingerprint(enc.world().fingerprint())?;
        let want = self.kind().window(&self.meta.hyper) - 1;
        if window.len() != want {
            return Err(Error::Data(format!(
                "{} agent expects a window of {want} events, got {}",
                self.kind(),
                window.len()
            )));
        }
        let rows = window
            .iter()
            .map(|o| enc.encode(o, self.kind().with_intention()))
            .collect::<Result<Vec<_>>>()?;
        Tensor::from_rows(&rows)
    }

    fn time_query(&self, enc: &Encoder, at: Timestamp) -> Tensor {
        Tensor::row(enc.time_features(at))
    }

    /// Probabilities over the 26 actions for the slot starting at `at`.
    pub fn predict_action(&self, enc: &Encoder, window: &[Observation], at: Timestamp) -> Result<Vec<f64>> {
        if self.kind() == AgentKind::Baseline {
            return Ok(self.baseline_predict(enc, window)?.action_probs);
        }
        self.require(&[AgentKind::Action])?;
        let input = self.encode_window(enc, window)?;
        Ok(softmax(&self.raw(input, Some(self.time_query(enc, at)))?))
    }

    /// Expected duration in minutes of the event starting at `at`.
    pub fn predict_duration(&self, enc: &Encoder, window: &[Observation], at: Timestamp) -> Result<f64> {
        self.require(&[AgentKind::Duration])?;
        let input = self.encode_window(enc, window)?;
        Ok(duration_from_raw(self.raw(input, Some(self.time_query(enc, at)))?[0]))
    }

    /// Embedding of the intention behind `action` taken at `at`.
    pub fn predict_short_intention(
        &self,
        enc: &Encoder,
        window: &[Observation],
        at: Timestamp,
        action: &str,
    ) -> Result<IntentionEmbedding> {
        self.require(&[AgentKind::ShortIntention])?;
        let input = self.encode_window(enc, window)?;
        let mut q = enc.time_features(at);
        q.extend(code_row(enc.action_code(action)?));
        Ok(IntentionEmbedding(self.raw(input, Some(Tensor::row(q)))?).normalized())
    }

    /// Raw long-term embedding for the slot starting at `at`.
    pub fn predict_long_embedding(&self, enc: &Encoder, window: &[Observation], at: Timestamp) -> Result<IntentionEmbedding> {
        self.require(&[AgentKind::LongIntention])?;
        let input = self.encode_window(enc, window)?;
        Ok(IntentionEmbedding(self.raw(input, Some(self.time_query(enc, at)))?).normalized())
    }

    /// The `k` intention-set entries nearest to the long-term embedding.
    pub fn predict_long_intentions(
        &self,
        enc: &Encoder,
        window: &[Observation],
        at: Timestamp,
        set: &IntentionSet,
        k: usize,
    ) -> Result<Vec<(String, f64)>> {
        set.nearest(&self.predict_long_embedding(enc, window, at)?, k)
    }

    /// Joint prediction of the end-to-end model. There is no long-term
    /// output by construction.
    pub fn baseline_predict(&self, enc: &Encoder, window: &[Observation]) -> Result<BaselineOutput> {
        self.require(&[AgentKind::Baseline])?;
        let input = self.encode_window(enc, window)?;
        Ok(baseline_output(&self.raw(input, None)?))
    }
}

pub fn baseline_output(raw: &[f64]) -> BaselineOutput {
    BaselineOutput {
        action_probs: softmax(&raw[..ACTION_CLASSES]),
        duration_min: duration_from_raw(raw[ACTION_CLASSES]),
        intention: IntentionEmbedding(raw[ACTION_CLASSES + 1..].to_vec()).normalized(),
    }
}

fn sample_loss<'p>(
    g: &mut Graph<'p>,
    params: &'p ParamStore,
    kind: AgentKind,
    arch: &Arch,
    hyper: &Hyper,
    log: &EncodedLog,
    t: usize,
) -> Result<Var> {
    let out = Ctx::new(g, params).forward(arch, log.input(kind, hyper, t), log.query(kind, t, None))?;
    match kind {
        AgentKind::Action => g.cross_entropy(out, log.actions[t]),
        AgentKind::Duration => g.mse(out, &[duration_target(log.durations[t])]),
        AgentKind::ShortIntention => g.cosine_loss(out, log.short[t].as_slice(), COSINE_EPS),
        AgentKind::LongIntention => g.cosine_loss(out, log.long[t].as_slice(), COSINE_EPS),
        AgentKind::Baseline => {
            let logits = g.slice_cols(out, 0, ACTION_CLASSES)?;
            let dur = g.slice_cols(out, ACTION_CLASSES, ACTION_CLASSES + 1)?;
            let emb = g.slice_cols(out, ACTION_CLASSES + 1, ACTION_CLASSES + 1 + EMBED_DIM)?;
            let ce = g.cross_entropy(logits, log.actions[t])?;
            let mse = g.mse(dur, &[duration_target(log.durations[t])])?;
            let cos = g.cosine_loss(emb, log.short[t].as_slice(), COSINE_EPS)?;
            let s = g.add(ce, mse)?;
            g.add(s, cos)
        }
    }
}

fn mean_loss(params: &ParamStore, kind: AgentKind, arch: &Arch, hyper: &Hyper, data: &Dataset<'_>) -> Result<f64> {
    let mut total = 0.0;
    for &(log, t) in &data.items {
        let mut g = Graph::new();
        let l = sample_loss(&mut g, params, kind, arch, hyper, log, t)?;
        total += g.value(l).scalar();
    }
    Ok(total / data.len() as f64)
}

/// Early-stopped training from `params`; returns the best-validation
/// parameters, which may be the starting point itself.
fn fit(
    kind: AgentKind,
    arch: &Arch,
    mut params: ParamStore,
    train: &Dataset<'_>,
    val: &Dataset<'_>,
    hyper: &Hyper,
    seed: u64,
) -> Result<(ParamStore, TrainReport)> {
    hyper.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Data(format!(
            "need non-empty train and validation sets, got {} and {}",
            train.len(),
            val.len()
        )));
    }
    let initial = mean_loss(&params, kind, arch, hyper, val)?;
    if !initial.is_finite() {
        return Err(Error::Training("non-finite loss at epoch 0".into()));
    }
    let mut report = TrainReport {
        initial_val_loss: initial,
        best_val_loss: initial,
        ..TrainReport::default()
    };
    let mut best = params.clone();
    let mut adam = Adam::new(&params, hyper.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grads = Grads::zeros_like(&params);
    let mut stale = 0;
    for epoch in 1..=hyper.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            grads.zero();
            for &i in batch {
                let (log, t) = train.items[i];
                let mut g = Graph::new();
                let l = sample_loss(&mut g, &params, kind, arch, hyper, log, t)?;
                let v = g.value(l).scalar();
                if !v.is_finite() {
                    return Err(Error::Training(format!("non-finite loss at epoch {epoch}")));
                }
                epoch_loss += v;
                g.backward_into(l, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut params, &grads)
                .map_err(|e| Error::Training(format!("epoch {epoch}: {e}")))?;
        }
        let val_loss = mean_loss(&params, kind, arch, hyper, val)?;
        if !val_loss.is_finite() {
            return Err(Error::Training(format!("non-finite loss at epoch {epoch}")));
        }
        report.train_loss.push(epoch_loss / train.len() as f64);
        report.val_loss.push(val_loss);
        report.epochs_run = epoch;
        if val_loss < report.best_val_loss {
            report.best_val_loss = val_loss;
            report.best_epoch = epoch;
            best = params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= hyper.patience {
                break;
            }
        }
    }
    Ok((best, report))
}

fn check_data(fingerprint: &str, sets: [&Dataset<'_>; 2]) -> Result<()> {
    for set in sets {
        for (log, _) in &set.items {
            if log.fingerprint != fingerprint {
                return Err(Error::Fingerprint {
                    expected: fingerprint.to_string(),
                    found: log.fingerprint.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Everything [`train_agent`] needs besides data.
#[derive(Debug, Clone)]
pub struct TrainSpec {
    pub kind: AgentKind,
    pub hyper: Hyper,
    pub seed: u64,
    pub participant: String,
    pub fingerprint: String,
    pub horizon_days: u32,
    pub base_dim: usize,
}

/// Trains an agent from a seeded initialization.
pub fn train_agent(spec: &TrainSpec, train: &Dataset<'_>, val: &Dataset<'_>) -> Result<(Agent, TrainReport)> {
    check_data(&spec.fingerprint, [train, val])?;
    let arch = spec.kind.arch(&spec.hyper, spec.base_dim);
    let params = init_params(&arch, spec.seed)?;
    let (params, report) = fit(spec.kind, &arch, params, train, val, &spec.hyper, spec.seed)?;
    let meta = AgentMeta {
        kind: spec.kind,
        participant: spec.participant.clone(),
        fingerprint: spec.fingerprint.clone(),
        seed: spec.seed,
        horizon_days: spec.horizon_days,
        hyper: spec.hyper.clone(),
        arch,
    };
    Ok((Agent { meta, params }, report))
}

/// Continues training a base agent on one participant's data.
pub fn finetune(
    base: &Agent,
    train: &Dataset<'_>,
    val: &Dataset<'_>,
    hyper: &Hyper,
    seed: u64,
    participant: &str,
) -> Result<(Agent, TrainReport)> {
    check_data(&base.meta.fingerprint, [train, val])?;
    if hyper.window != base.meta.hyper.window
        || hyper.long_window != base.meta.hyper.long_window
        || hyper.d_model != base.meta.hyper.d_model
        || hyper.heads != base.meta.hyper.heads
        || hyper.ffn != base.meta.hyper.ffn
    {
        return Err(Error::Config("fine-tuning hyperparameters change the architecture".into()));
    }
    let (params, report) = fit(
        base.kind(),
        &base.meta.arch,
        base.params.clone(),
        train,
        val,
        hyper,
        seed,
    )?;
    let meta = AgentMeta {
        participant: participant.to_string(),
        seed,
        hyper: hyper.clone(),
        ..base.meta.clone()
    };
    Ok((Agent { meta, params }, report))
}

/// A participant's vocabulary of intentions with cached unit embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentionSet {
    pub participant: String,
    pub texts: Vec<String>,
    #[serde(skip)]
    embeddings: Vec<IntentionEmbedding>,
}

impl IntentionSet {
    /// Normalizes and deduplicates `texts`; blank entries are an error.
    pub fn new<I, S>(participant: &str, texts: I) -> Result<IntentionSet>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut unique = BTreeSet::new();
        for t in texts {
            let n = normalize_text(t.as_ref());
            if n.is_empty() {
                return Err(Error::Data("blank intention text".into()));
            }
            unique.insert(n);
        }
        let texts: Vec<String> = unique.into_iter().collect();
        let embeddings = texts.iter().map(|t| embed_intention(t)).collect();
        Ok(IntentionSet {
            participant: participant.to_string(),
            texts,
            embeddings,
        })
    }

    /// Every intention that occurs in `log`.
    pub fn from_log(log: &ObservationLog) -> Result<IntentionSet> {
        IntentionSet::new(&log.participant_id, log.events.iter().map(|e| e.intention.as_str()))
    }

    /// Recomputes embeddings after deserialization.
    pub fn rebuild(self) -> Result<IntentionSet> {
        IntentionSet::new(&self.participant, self.texts)
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn embedding(&self, text: &str) -> Option<&IntentionEmbedding> {
        let n = normalize_text(text);
        self.texts
            .binary_search(&n)
            .ok()
            .map(|i| &self.embeddings[i])
    }

    pub fn embeddings(&self) -> &[IntentionEmbedding] {
        &self.embeddings
    }

    /// The `k` most similar entries, most similar first; equal similarities
    /// are ordered by text.
    pub fn nearest(&self, query: &IntentionEmbedding, k: usize) -> Result<Vec<(String, f64)>> {
        if k > self.len() {
            return Err(Error::Config(format!(
                "asked for {k} intentions but the set holds {}",
                self.len()
            )));
        }
        let mut scored: Vec<(String, f64)> = self
            .texts
            .iter()
            .zip(&self.embeddings)
            .map(|(t, e)| (t.clone(), query.cosine(e)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }
}

/// Checkpoint paths of one participant, relative to the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub action: PathBuf,
    pub duration: PathBuf,
    pub short: PathBuf,
    pub long: PathBuf,
    pub baseline: PathBuf,
    pub intentions: Vec<String>,
    pub schedule: Schedule,
}

impl ManifestEntry {
    pub fn path(&self, kind: AgentKind) -> &Path {
        match kind {
            AgentKind::Action => &self.action,
            AgentKind::Duration => &self.duration,
            AgentKind::ShortIntention => &self.short,
            AgentKind::LongIntention => &self.long,
            AgentKind::Baseline => &self.baseline,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub v: u32,
    pub fingerprint: String,
    pub participants: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    pub fn new(fingerprint: &str) -> Manifest {
        Manifest {
            v: 1,
            fingerprint: fingerprint.to_string(),
            participants: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// The five agents of one participant, loaded.
#[derive(Debug, Clone)]
pub struct AgentSuite {
    pub participant: String,
    pub action: Agent,
    pub duration: Agent,
    pub short: Agent,
    pub long: Agent,
    pub baseline: Agent,
    pub intentions: IntentionSet,
    pub schedule: Schedule,
}

impl AgentSuite {
    pub fn load(manifest_path: &Path, participant: &str) -> Result<AgentSuite> {
        let manifest = Manifest::load(manifest_path)?;
        let entry = manifest
            .participants
            .get(participant)
            .ok_or_else(|| Error::NotFound(format!("participant {participant} in manifest")))?;
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        let load = |kind: AgentKind| -> Result<Agent> {
            let agent = Agent::load(&dir.join(entry.path(kind)))?;
            if agent.kind() != kind {
                return Err(Error::Checkpoint(format!("expected a {kind} checkpoint, found {}", agent.kind())));
            }
            if agent.meta.fingerprint != manifest.fingerprint {
                return Err(Error::Fingerprint {
                    expected: manifest.fingerprint.clone(),
                    found: agent.meta.fingerprint.clone(),
                });
            }
            Ok(agent)
        };
        Ok(AgentSuite {
            participant: participant.to_string(),
            action: load(AgentKind::Action)?,
            duration: load(AgentKind::Duration)?,
            short: load(AgentKind::ShortIntention)?,
            long: load(AgentKind::LongIntention)?,
            baseline: load(AgentKind::Baseline)?,
            intentions: IntentionSet::new(participant, &entry.intentions)?,
            schedule: entry.schedule.clone(),
        })
    }

    pub fn hyper(&self) -> &Hyper {
        &self.long.meta.hyper
    }
}
