//! Live recording sessions persisted as append-only JSON Lines.
//!
//! The first line of a session file describes the session; every further
//! line is either a posted action (with the conflict judgement made when it
//! arrived) or an annotation. State is never stored: it is the fold of
//! [`World::apply`] over the posted actions, so resuming is a replay.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentSuite, DEFAULT_K};
use crate::conflict::{detect, gate_allows, DetectConfig, LongEntry, ConflictReport};
use crate::encoding::{embed_intention, fnv1a64, normalize_text, Encoder};
use crate::error::{Error, Result};
use crate::eval::rank;
use crate::persona::{FILLER_ACTION, FILLER_ROOM, IDLE_INTENTION};
use crate::world::{Observation, ObservationLog, Timestamp, World, WorldState, NONE_OBJECT};

pub const SESSION_FORMAT_VERSION: u32 = 1;

/// Body of a posted action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRequest {
    pub action: String,
    pub object: String,
    pub room: String,
    pub intention: String,
    pub duration: i64,
    /// Defaults to the session clock; a later start leaves a gap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Timestamp>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    /// Manifest entry whose agents serve predictions.
    #[serde(default)]
    pub participant: Option<String>,
    #[serde(default)]
    pub start: Option<Timestamp>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub duration_gate: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub kind: String,
    pub event_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// One line of a session file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        v: u32,
        session_id: String,
        participant: Option<String>,
        fingerprint: String,
        start: Timestamp,
        delta: f64,
        duration_gate: bool,
    },
    Action {
        v: u32,
        index: usize,
        event: Observation,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        conflict: Option<ConflictReport>,
    },
    Annotation {
        v: u32,
        #[serde(flatten)]
        annotation: Annotation,
    },
}

/// The agents and encoder a session predicts with.
#[derive(Debug)]
pub struct Predictor {
    pub suite: AgentSuite,
    pub encoder: Encoder,
}

impl Predictor {
    pub fn new(suite: AgentSuite, world: World) -> Predictor {
        let horizon = suite.long.meta.horizon_days;
        Predictor {
            suite,
            encoder: Encoder::new(world, horizon),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionScore {
    pub action: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortPrediction {
    /// The action the short-term agent was conditioned on.
    pub action: String,
    pub text: String,
    pub similarity: f64,
}

/// Predictions for the slot that starts at the session clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub v: u32,
    pub session_id: String,
    pub at: Timestamp,
    /// Idle observations prepended because the session is still short.
    pub padded: usize,
    /// All actions, most probable first.
    pub next_actions: Vec<ActionScore>,
    pub duration_min: f64,
    pub short_intention: ShortPrediction,
    pub long_term: Vec<LongEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub v: u32,
    pub session_id: String,
    pub participant: Option<String>,
    pub fingerprint: String,
    pub event_count: usize,
    pub state: WorldState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictsView {
    pub v: u32,
    pub session_id: String,
    /// Warnings raised and not yet dismissed, oldest first.
    pub pending: Vec<ConflictReport>,
    /// The judgement of the most recent action, raised or not.
    pub latest: Option<ConflictReport>,
}

/// Result of posting an action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posted {
    pub v: u32,
    pub index: usize,
    pub event: Observation,
    pub state: WorldState,
    pub conflict: Option<ConflictReport>,
}

/// One live session. Not synchronized: callers serialize mutations.
#[derive(Debug)]
pub struct Session {
    id: String,
    participant: Option<String>,
    start: Timestamp,
    config: DetectConfig,
    world: Arc<World>,
    predictor: Option<Arc<Predictor>>,
    path: PathBuf,
    state: WorldState,
    events: Vec<Observation>,
    judgements: Vec<Option<ConflictReport>>,
    annotations: Vec<Annotation>,
}

fn write_line(file: &mut File, event: &SessionEvent) -> Result<()> {
    let mut line = serde_json::to_vec(event)?;
    line.push(b'\n');
    file.write_all(&line).and_then(|_| file.sync_data()).map_err(|e| Error::Io {
        path: PathBuf::new(),
        source: e,
    })
}

impl Session {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn participant(&self) -> Option<&str> {
        self.participant.as_deref()
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn events(&self) -> &[Observation] {
        &self.events
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn append(&self, event: &SessionEvent) -> Result<()> {
        let mut file = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        write_line(&mut file, event).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(&self.path, source),
            other => other,
        })
    }

    pub fn view(&self) -> StateView {
        StateView {
            v: SESSION_FORMAT_VERSION,
            session_id: self.id.clone(),
            participant: self.participant.clone(),
            fingerprint: self.world.fingerprint().to_string(),
            event_count: self.events.len(),
            state: self.state.clone(),
        }
    }

    /// Validates `req` against the world, judges it against the long-term
    /// list predicted before it, then appends it.
    pub fn post_action(&mut self, req: &ActionRequest) -> Result<Posted> {
        let start = req.start.unwrap_or(self.state.clock);
        let event = self.world.observe(
            &self.state,
            &self.id,
            &req.action,
            &req.object,
            &req.room,
            &normalize_text(&req.intention),
            start.absolute(),
            req.duration,
            None,
        );
        if event.intention.is_empty() {
            return Err(Error::validation("blank-intention", "intention must not be blank"));
        }
        let next = self.world.apply(&self.state, &event)?;
        let conflict = self.judge(&event)?;
        let index = self.events.len();
        self.append(&SessionEvent::Action {
            v: SESSION_FORMAT_VERSION,
            index,
            event: event.clone(),
            conflict: conflict.clone(),
        })?;
        self.state = next;
        self.events.push(event.clone());
        self.judgements.push(conflict.clone());
        Ok(Posted {
            v: SESSION_FORMAT_VERSION,
            index,
            event,
            state: self.state.clone(),
            conflict,
        })
    }

    fn judge(&self, event: &Observation) -> Result<Option<ConflictReport>> {
        let Some(p) = &self.predictor else {
            return Ok(None);
        };
        let long_window = p.suite.hyper().long_window;
        let (window, _) = self.window(long_window - 1);
        let list: Vec<LongEntry> = p
            .suite
            .long
            .predict_long_intentions(&p.encoder, &window, event.start(), &p.suite.intentions, self.config.k)?
            .into_iter()
            .map(|(t, s)| LongEntry::new(&t, s))
            .collect();
        let short = embed_intention(&event.intention);
        let mut report = detect(&short, &event.intention, &list, self.config.delta, self.events.len(), event.start())?;
        if self.config.duration_gate
            && !gate_allows(&p.suite.schedule, &list[0].text, event.weekday, event.start_time, event.duration_min as f64)
        {
            report.evaluated = false;
            report.r_conf = 0;
            report.query_text.clear();
        }
        Ok(Some(report))
    }

    /// The last `n` events, front-padded with zero-length idle observations
    /// at the session start. Returns the window and the padding count.
    fn window(&self, n: usize) -> (Vec<Observation>, usize) {
        let have = self.events.len().min(n);
        let pad = n - have;
        let idle = self.world.observe(
            &self.world.init(),
            &self.id,
            FILLER_ACTION,
            NONE_OBJECT,
            FILLER_ROOM,
            IDLE_INTENTION,
            self.start.absolute(),
            0,
            None,
        );
        let mut window = vec![idle; pad];
        window.extend_from_slice(&self.events[self.events.len() - have..]);
        (window, pad)
    }

    pub fn predictions(&self) -> Result<Predictions> {
        let p = self
            .predictor
            .as_ref()
            .ok_or_else(|| Error::NotFound(format!("agents for session {}", self.id)))?;
        let s = &p.suite;
        let at = self.state.clock.max(self.start);
        let (short_win, _) = self.window(s.hyper().window - 1);
        let (long_win, padded) = self.window(s.hyper().long_window - 1);
        let probs = s.action.predict_action(&p.encoder, &short_win, at)?;
        let vocab = &self.world.config().action_vocab;
        let next_actions: Vec<ActionScore> = rank(&probs)
            .into_iter()
            .map(|i| ActionScore {
                action: vocab[i].clone(),
                probability: probs[i],
            })
            .collect();
        let top = next_actions[0].action.clone();
        let short = s.short.predict_short_intention(&p.encoder, &short_win, at, &top)?;
        let (text, similarity) = s.intentions.nearest(&short, 1)?.remove(0);
        let long_term = s
            .long
            .predict_long_intentions(&p.encoder, &long_win, at, &s.intentions, self.config.k)?
            .into_iter()
            .map(|(t, sim)| LongEntry::new(&t, sim))
            .collect();
        Ok(Predictions {
            v: SESSION_FORMAT_VERSION,
            session_id: self.id.clone(),
            at,
            padded,
            next_actions,
            duration_min: s.duration.predict_duration(&p.encoder, &short_win, at)?,
            short_intention: ShortPrediction { action: top, text, similarity },
            long_term,
        })
    }

    pub fn conflicts(&self) -> ConflictsView {
        let dismissed: Vec<usize> = self
            .annotations
            .iter()
            .filter(|a| a.kind == DISMISS_WARNING)
            .map(|a| a.event_index)
            .collect();
        ConflictsView {
            v: SESSION_FORMAT_VERSION,
            session_id: self.id.clone(),
            pending: self
                .judgements
                .iter()
                .flatten()
                .filter(|r| r.r_conf == 1 && !dismissed.contains(&r.event_index))
                .cloned()
                .collect(),
            latest: self.judgements.last().cloned().flatten(),
        }
    }

    /// Records an annotation, such as a dismissed warning.
    pub fn annotate(&mut self, annotation: Annotation) -> Result<()> {
        if annotation.kind.trim().is_empty() {
            return Err(Error::validation("blank-annotation", "annotation kind must not be blank"));
        }
        if annotation.event_index >= self.events.len() {
            return Err(Error::validation(
                "unknown-event",
                format!("session has no event {}", annotation.event_index),
            ));
        }
        self.append(&SessionEvent::Annotation {
            v: SESSION_FORMAT_VERSION,
            annotation: annotation.clone(),
        })?;
        self.annotations.push(annotation);
        Ok(())
    }

    pub fn export(&self) -> ObservationLog {
        ObservationLog {
            participant_id: self.id.clone(),
            fingerprint: self.world.fingerprint().to_string(),
            events: self.events.clone(),
        }
    }
}

/// Annotation kind written when a warning is dismissed.
pub const DISMISS_WARNING: &str = "warning_dismissed";

/// Session files in one directory, sharing a world and a set of agents.
#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
    world: Arc<World>,
    manifest: Option<PathBuf>,
}

impl SessionStore {
    pub fn new(dir: impl Into<PathBuf>, world: World, manifest: Option<PathBuf>) -> Result<SessionStore> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(SessionStore {
            dir,
            world: Arc::new(world),
            manifest,
        })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn path_of(&self, id: &str) -> Result<PathBuf> {
        let ok = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !ok {
            return Err(Error::NotFound(format!("session {id}")));
        }
        Ok(self.dir.join(format!("{id}.jsonl")))
    }

    fn predictor(&self, participant: Option<&str>) -> Result<Option<Arc<Predictor>>> {
        match (participant, &self.manifest) {
            (None, _) => Ok(None),
            (Some(p), Some(m)) => {
                let suite = AgentSuite::load(m, p)?;
                Ok(Some(Arc::new(Predictor::new(suite, (*self.world).clone()))))
            }
            (Some(_), None) => Err(Error::Config("no checkpoint manifest is loaded".into())),
        }
    }

    fn fresh_id(&self, req: &CreateRequest) -> String {
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or(0);
        let mut salt = 0u32;
        loop {
            let seed = format!("{nanos}/{salt}/{:?}/{}", req.participant, std::process::id());
            let id = format!("s{:016x}", fnv1a64(seed.as_bytes()));
            if !self.dir.join(format!("{id}.jsonl")).exists() {
                return id;
            }
            salt += 1;
        }
    }

    pub fn create(&self, req: &CreateRequest) -> Result<Session> {
        let config = DetectConfig {
            delta: req.delta.unwrap_or(crate::conflict::DEFAULT_DELTA),
            k: DEFAULT_K,
            duration_gate: req.duration_gate.unwrap_or(true),
        };
        if !(0.0..=2.0).contains(&config.delta) {
            return Err(Error::Config(format!("threshold {} outside [0, 2]", config.delta)));
        }
        let predictor = self.predictor(req.participant.as_deref())?;
        let id = self.fresh_id(req);
        let path = self.path_of(&id)?;
        let start = req.start.unwrap_or(self.world.init().clock);
        let mut state = self.world.init();
        if start.absolute() < state.clock.absolute() {
            return Err(Error::Ordering {
                start: start.absolute(),
                clock: state.clock.absolute(),
            });
        }
        state.clock = start;
        let mut file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        write_line(
            &mut file,
            &SessionEvent::Created {
                v: SESSION_FORMAT_VERSION,
                session_id: id.clone(),
                participant: req.participant.clone(),
                fingerprint: self.world.fingerprint().to_string(),
                start,
                delta: config.delta,
                duration_gate: config.duration_gate,
            },
        )
        .map_err(|e| match e {
            Error::Io { source, .. } => Error::io(&path, source),
            other => other,
        })?;
        Ok(Session {
            id,
            participant: req.participant.clone(),
            start,
            config,
            world: Arc::clone(&self.world),
            predictor,
            path,
            state,
            events: Vec::new(),
            judgements: Vec::new(),
            annotations: Vec::new(),
        })
    }

    /// Rebuilds a session by replaying its file.
    pub fn open(&self, id: &str) -> Result<Session> {
        let path = self.path_of(id)?;
        let file = File::open(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(format!("session {id}")),
            _ => Error::io(&path, e),
        })?;
        let mut lines = BufReader::new(file).lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Data(format!("session file {} is empty", path.display())))?
            .map_err(|e| Error::io(&path, e))?;
        let SessionEvent::Created {
            participant,
            fingerprint,
            start,
            delta,
            duration_gate,
            ..
        } = serde_json::from_str(&first)?
        else {
            return Err(Error::Data("session file does not start with a header".into()));
        };
        if fingerprint != self.world.fingerprint() {
            return Err(Error::Fingerprint {
                expected: self.world.fingerprint().to_string(),
                found: fingerprint,
            });
        }
        let mut session = Session {
            id: id.to_string(),
            predictor: self.predictor(participant.as_deref())?,
            participant,
            start,
            config: DetectConfig {
                delta,
                k: DEFAULT_K,
                duration_gate,
            },
            world: Arc::clone(&self.world),
            path: path.clone(),
            state: self.world.init(),
            events: Vec::new(),
            judgements: Vec::new(),
            annotations: Vec::new(),
        };
        session.state.clock = start;
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line)? {
                SessionEvent::Action { index, event, conflict, .. } => {
                    if index != session.events.len() {
                        return Err(Error::Data(format!("line {}: action {index} out of order", n + 2)));
                    }
                    session.state = self.world.apply(&session.state, &event)?;
                    session.events.push(event);
                    session.judgements.push(conflict);
                }
                SessionEvent::Annotation { annotation, .. } => session.annotations.push(annotation),
                SessionEvent::Created { .. } => {
                    return Err(Error::Data(format!("line {}: second session header", n + 2)));
                }
            }
        }
        Ok(session)
    }
}
