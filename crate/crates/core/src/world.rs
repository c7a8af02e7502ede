//! Household environment: rooms, objects, object states and the participant,
//! with action-driven transitions and observation-log checking.
//!
//! A [`World`] wraps a validated [`WorldConfig`] together with lookup tables.
//! Every transition is a pure function from `(WorldState, Observation)` to a
//! new `WorldState`, so replaying a log from [`World::init`] always gives the
//! same final state.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const ROOMS: [&str; 6] = ["living room", "kitchen", "bathroom", "bedroom", "study", "hall"];

pub const ACTIONS: [&str; 26] = [
    "walk_to", "grab", "put", "open", "close", "turn_on", "turn_off", "sit", "stand", "lie",
    "sleep", "eat", "drink", "cook", "wash", "clean", "read", "write", "watch", "use", "play",
    "call", "dress", "undress", "brush", "pour",
];

/// Pseudo-object for actions without an object. Always encoded as index 0.
pub const NONE_OBJECT: &str = "none";
/// Room the participant starts in.
pub const START_ROOM: &str = "hall";
pub const MAX_STATES: usize = 8;
pub const MINUTES_PER_DAY: i64 = 1440;

/// Rule identifiers reported by [`World::validate_log`].
pub mod rules {
    pub const UNKNOWN_ACTION: &str = "unknown-action";
    pub const UNKNOWN_OBJECT: &str = "unknown-object";
    pub const UNKNOWN_ROOM: &str = "unknown-room";
    pub const NEGATIVE_DURATION: &str = "negative-duration";
    pub const OVERLAP: &str = "overlap";
    pub const STATE_NOT_IN_SCHEMA: &str = "state-not-in-schema";
    pub const TIME_REGRESSION: &str = "time-regression";
    pub const TIME_OUT_OF_RANGE: &str = "time-out-of-range";
    pub const WEEKDAY_MISMATCH: &str = "weekday-mismatch";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    pub name: String,
    pub home_room: String,
    pub schema: String,
    pub initial_state: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantity: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldConfig {
    /// First day of the observation horizon; the clock starts here at midnight.
    #[serde(default = "default_horizon_start")]
    pub horizon_start: NaiveDate,
    pub rooms: Vec<String>,
    pub objects: Vec<ObjectSpec>,
    pub action_vocab: Vec<String>,
    pub state_schemas: BTreeMap<String, Vec<String>>,
}

fn default_horizon_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date")
}

/// Discrete state of one object. `state` indexes into the object's schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectState {
    pub state: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantity: Option<u32>,
}

impl ObjectState {
    pub const NONE: ObjectState = ObjectState {
        state: 0,
        quantity: None,
    };
}

/// Absolute point in logical time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp {
    pub date: NaiveDate,
    pub minute: u32,
}

impl Timestamp {
    pub fn new(date: NaiveDate, minute: u32) -> Self {
        Self::from_absolute(absolute_minutes(date, minute as i64))
    }

    pub fn midnight(date: NaiveDate) -> Self {
        Self { date, minute: 0 }
    }

    /// Minutes since 0001-01-01 00:00.
    pub fn absolute(&self) -> i64 {
        absolute_minutes(self.date, self.minute as i64)
    }

    pub fn from_absolute(abs: i64) -> Self {
        let days = abs.div_euclid(MINUTES_PER_DAY);
        let minute = abs.rem_euclid(MINUTES_PER_DAY) as u32;
        let date = NaiveDate::from_num_days_from_ce_opt(days as i32).expect("date in range");
        Self { date, minute }
    }

    pub fn plus_minutes(&self, minutes: i64) -> Self {
        Self::from_absolute(self.absolute() + minutes)
    }

    pub fn weekday(&self) -> u8 {
        weekday_of(self.date)
    }
}

fn absolute_minutes(date: NaiveDate, minute: i64) -> i64 {
    date.num_days_from_ce() as i64 * MINUTES_PER_DAY + minute
}

/// Monday = 0 ... Sunday = 6.
pub fn weekday_of(date: NaiveDate) -> u8 {
    date.weekday().num_days_from_monday() as u8
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub object_states: BTreeMap<String, ObjectState>,
    pub participant_room: String,
    pub clock: Timestamp,
}

/// One behavior event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub participant_id: String,
    pub action: String,
    pub start_date: NaiveDate,
    /// Minutes since midnight, `[0, 1440)` in a valid log.
    pub start_time: u32,
    pub weekday: u8,
    pub duration_min: i64,
    pub object_id: String,
    pub post_state: ObjectState,
    pub room: String,
    pub intention: String,
}

impl Observation {
    pub fn start(&self) -> Timestamp {
        Timestamp {
            date: self.start_date,
            minute: self.start_time,
        }
    }

    pub fn start_abs(&self) -> i64 {
        absolute_minutes(self.start_date, self.start_time as i64)
    }

    pub fn end_abs(&self) -> i64 {
        self.start_abs() + self.duration_min
    }

    /// Moves the event to `abs` keeping date, time and weekday consistent.
    pub fn set_start_abs(&mut self, abs: i64) {
        let ts = Timestamp::from_absolute(abs);
        self.start_date = ts.date;
        self.start_time = ts.minute;
        self.weekday = ts.weekday();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationLog {
    pub participant_id: String,
    pub fingerprint: String,
    pub events: Vec<Observation>,
}

impl ObservationLog {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for ev in &self.events {
            serde_json::to_writer(&mut out, ev)?;
            out.write_all(b"\n")
                .map_err(|e| Error::io("<jsonl>", e))?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(
        input: R,
        participant_id: &str,
        fingerprint: &str,
    ) -> Result<ObservationLog> {
        let mut events = Vec::new();
        for line in input.lines() {
            let line = line.map_err(|e| Error::io("<jsonl>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(&line)?);
        }
        Ok(ObservationLog {
            participant_id: participant_id.to_string(),
            fingerprint: fingerprint.to_string(),
            events,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub rule: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fix {
    /// Index in the input log.
    pub index: usize,
    /// `clamp`, `shift`, `weekday` or `drop`.
    pub kind: String,
    pub rule: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SanitizeReport {
    pub fixes: Vec<Fix>,
}

impl SanitizeReport {
    pub fn is_empty(&self) -> bool {
        self.fixes.is_empty()
    }

    pub fn dropped(&self) -> usize {
        self.fixes.iter().filter(|f| f.kind == "drop").count()
    }
}

/// How an action changes its object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effect {
    Keep,
    SetState(usize),
    Consume(u32),
    Restock,
}

/// A validated configuration plus lookup tables.
#[derive(Debug, Clone)]
pub struct World {
    config: WorldConfig,
    fingerprint: String,
    action_index: HashMap<String, usize>,
    room_index: HashMap<String, usize>,
    /// Object id -> 1-based index (0 is the pseudo-object).
    object_index: HashMap<String, usize>,
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rooms.len() != ROOMS.len() {
            return Err(Error::Config(format!(
                "expected 6 rooms, found {}",
                self.rooms.len()
            )));
        }
        if self.action_vocab.len() != ACTIONS.len() {
            return Err(Error::Config(format!(
                "expected 26 actions, found {}",
                self.action_vocab.len()
            )));
        }
        unique("room", self.rooms.iter())?;
        unique("action", self.action_vocab.iter())?;
        unique("object", self.objects.iter().map(|o| &o.id))?;
        for (id, states) in &self.state_schemas {
            if states.is_empty() || states.len() > MAX_STATES {
                return Err(Error::Config(format!(
                    "state schema '{id}' must have 1..=8 states, has {}",
                    states.len()
                )));
            }
        }
        for obj in &self.objects {
            if obj.id == NONE_OBJECT {
                return Err(Error::Config("object id 'none' is reserved".into()));
            }
            let schema = self.state_schemas.get(&obj.schema).ok_or_else(|| {
                Error::Config(format!(
                    "object '{}' references unknown state schema '{}'",
                    obj.id, obj.schema
                ))
            })?;
            if !schema.contains(&obj.initial_state) {
                return Err(Error::Config(format!(
                    "object '{}' initial state '{}' is not in schema '{}'",
                    obj.id, obj.initial_state, obj.schema
                )));
            }
            if !self.rooms.contains(&obj.home_room) {
                return Err(Error::Config(format!(
                    "object '{}' has unknown home room '{}'",
                    obj.id, obj.home_room
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, first 16 hex digits.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The 40-object desk-scale apartment.
    pub fn desk_scale() -> WorldConfig {
        let schemas: BTreeMap<String, Vec<String>> = [
            ("device", vec!["off", "on"]),
            ("container", vec!["closed", "open"]),
            ("consumable", vec!["stocked"]),
            ("furniture", vec!["normal"]),
            ("washable", vec!["clean", "dirty"]),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.into_iter().map(String::from).collect()))
        .collect();

        #[rustfmt::skip]
        let catalog: [(&str, &str, &str, Option<u32>); 40] = [
            ("sofa", "living room", "furniture", None),
            ("tv", "living room", "device", None),
            ("lamp", "living room", "device", None),
            ("bookshelf", "living room", "furniture", None),
            ("game_console", "living room", "device", None),
            ("phone", "living room", "device", None),
            ("plant", "living room", "furniture", None),
            ("stove", "kitchen", "device", None),
            ("oven", "kitchen", "device", None),
            ("fridge", "kitchen", "container", None),
            ("microwave", "kitchen", "device", None),
            ("kettle", "kitchen", "device", None),
            ("coffee_maker", "kitchen", "device", None),
            ("dishwasher", "kitchen", "device", None),
            ("sink", "kitchen", "device", None),
            ("plate", "kitchen", "washable", None),
            ("cup", "kitchen", "washable", None),
            ("apple", "kitchen", "consumable", Some(6)),
            ("bread", "kitchen", "consumable", Some(8)),
            ("milk", "kitchen", "consumable", Some(4)),
            ("coffee", "kitchen", "consumable", Some(20)),
            ("tea", "kitchen", "consumable", Some(20)),
            ("cabinet", "kitchen", "container", None),
            ("shower", "bathroom", "device", None),
            ("toothbrush", "bathroom", "washable", None),
            ("toilet", "bathroom", "furniture", None),
            ("washing_machine", "bathroom", "device", None),
            ("towel", "bathroom", "washable", None),
            ("medicine", "bathroom", "consumable", Some(30)),
            ("bed", "bedroom", "furniture", None),
            ("wardrobe", "bedroom", "container", None),
            ("clothes", "bedroom", "washable", None),
            ("alarm_clock", "bedroom", "device", None),
            ("desk", "study", "furniture", None),
            ("laptop", "study", "device", None),
            ("book", "study", "furniture", None),
            ("notebook", "study", "furniture", None),
            ("desk_lamp", "study", "device", None),
            ("front_door", "hall", "container", None),
            ("shoes", "hall", "furniture", None),
        ];
        let objects = catalog
            .iter()
            .map(|&(id, room, schema, quantity)| ObjectSpec {
                id: id.to_string(),
                name: id.replace('_', " "),
                home_room: room.to_string(),
                schema: schema.to_string(),
                initial_state: schemas[schema][0].clone(),
                quantity,
            })
            .collect();
        WorldConfig {
            horizon_start: default_horizon_start(),
            rooms: ROOMS.iter().map(|s| s.to_string()).collect(),
            objects,
            action_vocab: ACTIONS.iter().map(|s| s.to_string()).collect(),
            state_schemas: schemas,
        }
    }
}

fn unique<'a>(what: &str, items: impl Iterator<Item = &'a String>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for item in items {
        if !seen.insert(item.as_str()) {
            return Err(Error::Config(format!("duplicate {what} id '{item}'")));
        }
    }
    Ok(())
}

/// Builds the initial state for `config`.
pub fn init_world(config: &WorldConfig) -> Result<WorldState> {
    Ok(World::new(config.clone())?.init())
}

impl World {
    pub fn new(config: WorldConfig) -> Result<World> {
        config.validate()?;
        let fingerprint = config.fingerprint();
        let action_index = index_map(config.action_vocab.iter(), 0);
        let room_index = index_map(config.rooms.iter(), 0);
        let object_index = index_map(config.objects.iter().map(|o| &o.id), 1);
        Ok(World {
            config,
            fingerprint,
            action_index,
            room_index,
            object_index,
        })
    }

    pub fn desk_scale() -> World {
        World::new(WorldConfig::desk_scale()).expect("built-in config is valid")
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn action_index(&self, action: &str) -> Option<usize> {
        self.action_index.get(action).copied()
    }

    pub fn room_index(&self, room: &str) -> Option<usize> {
        self.room_index.get(room).copied()
    }

    /// 0 for the pseudo-object, `1..=N` for registered objects.
    pub fn object_index(&self, object: &str) -> Option<usize> {
        if object == NONE_OBJECT {
            Some(0)
        } else {
            self.object_index.get(object).copied()
        }
    }

    pub fn object(&self, object: &str) -> Option<&ObjectSpec> {
        self.object_index
            .get(object)
            .map(|&i| &self.config.objects[i - 1])
    }

    pub fn num_objects(&self) -> usize {
        self.config.objects.len()
    }

    /// Number of states in `object`'s schema (1 for the pseudo-object).
    pub fn schema_len(&self, object: &str) -> Option<usize> {
        if object == NONE_OBJECT {
            return Some(1);
        }
        self.object(object)
            .map(|o| self.config.state_schemas[&o.schema].len())
    }

    pub fn state_name(&self, object: &str, state: usize) -> Option<&str> {
        let o = self.object(object)?;
        self.config.state_schemas[&o.schema]
            .get(state)
            .map(String::as_str)
    }

    pub fn init(&self) -> WorldState {
        let object_states = self
            .config
            .objects
            .iter()
            .map(|o| {
                let state = self.config.state_schemas[&o.schema]
                    .iter()
                    .position(|s| *s == o.initial_state)
                    .expect("validated");
                (
                    o.id.clone(),
                    ObjectState {
                        state,
                        quantity: o.quantity,
                    },
                )
            })
            .collect();
        WorldState {
            object_states,
            participant_room: START_ROOM.to_string(),
            clock: Timestamp::midnight(self.config.horizon_start),
        }
    }

    /// The effect an action has on its object by default. `override_state`
    /// names an explicit target state from the object's schema.
    pub fn effect(&self, action: &str, object: &str, override_state: Option<&str>) -> Effect {
        let Some(spec) = self.object(object) else {
            return Effect::Keep;
        };
        let schema = &self.config.state_schemas[&spec.schema];
        let find = |name: &str| schema.iter().position(|s| s == name);
        if let Some(name) = override_state {
            if let Some(i) = find(name) {
                return Effect::SetState(i);
            }
        }
        if spec.quantity.is_some() {
            return match action {
                "eat" | "drink" | "pour" => Effect::Consume(1),
                "put" => Effect::Restock,
                _ => Effect::Keep,
            };
        }
        let target = match action {
            "turn_on" | "cook" | "watch" | "play" | "call" | "use" => "on",
            "turn_off" => "off",
            "open" => "open",
            "close" => "closed",
            "wash" | "clean" => "clean",
            "eat" | "drink" | "dress" | "brush" => "dirty",
            _ => return Effect::Keep,
        };
        find(target).map_or(Effect::Keep, Effect::SetState)
    }

    /// Object state after applying `effect` in `state`.
    pub fn resolve(&self, state: &WorldState, object: &str, effect: Effect) -> ObjectState {
        let Some(current) = state.object_states.get(object).copied() else {
            return ObjectState::NONE;
        };
        match effect {
            Effect::Keep => current,
            Effect::SetState(s) => ObjectState { state: s, ..current },
            Effect::Consume(n) => ObjectState {
                quantity: current.quantity.map(|q| q.saturating_sub(n)),
                ..current
            },
            Effect::Restock => ObjectState {
                quantity: self.object(object).and_then(|o| o.quantity),
                ..current
            },
        }
    }

    fn check_refs(&self, obs: &Observation) -> Result<()> {
        if self.action_index(&obs.action).is_none() {
            return Err(Error::validation(
                rules::UNKNOWN_ACTION,
                format!("unknown action '{}'", obs.action),
            ));
        }
        if self.object_index(&obs.object_id).is_none() {
            return Err(Error::validation(
                rules::UNKNOWN_OBJECT,
                format!("unknown object '{}'", obs.object_id),
            ));
        }
        if self.room_index(&obs.room).is_none() {
            return Err(Error::validation(
                rules::UNKNOWN_ROOM,
                format!("unknown room '{}'", obs.room),
            ));
        }
        if obs.duration_min < 0 {
            return Err(Error::validation(
                rules::NEGATIVE_DURATION,
                format!("duration {} < 0", obs.duration_min),
            ));
        }
        if obs.start_time as i64 >= MINUTES_PER_DAY {
            return Err(Error::validation(
                rules::TIME_OUT_OF_RANGE,
                format!("start_time {} outside [0, 1440)", obs.start_time),
            ));
        }
        let n = self.schema_len(&obs.object_id).expect("object checked");
        if obs.post_state.state >= n {
            return Err(Error::validation(
                rules::STATE_NOT_IN_SCHEMA,
                format!(
                    "state index {} outside schema of '{}' ({n} states)",
                    obs.post_state.state, obs.object_id
                ),
            ));
        }
        Ok(())
    }

    /// Pure transition: sets the object's state, moves the participant and
    /// advances the clock to the end of the event.
    pub fn apply(&self, state: &WorldState, obs: &Observation) -> Result<WorldState> {
        self.check_refs(obs)?;
        let start = obs.start_abs();
        let clock = state.clock.absolute();
        if start < clock {
            return Err(Error::Ordering { start, clock });
        }
        let mut next = state.clone();
        if obs.object_id != NONE_OBJECT {
            next.object_states
                .insert(obs.object_id.clone(), obs.post_state);
        }
        next.participant_room = obs.room.clone();
        next.clock = Timestamp::from_absolute(start + obs.duration_min);
        Ok(next)
    }

    /// Replays `events` from the initial state.
    pub fn replay<'a>(&self, events: impl IntoIterator<Item = &'a Observation>) -> Result<WorldState> {
        events
            .into_iter()
            .try_fold(self.init(), |s, ev| self.apply(&s, ev))
    }

    pub fn validate_log(&self, log: &ObservationLog) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut prev: Option<(i64, i64)> = None;
        for (index, ev) in log.events.iter().enumerate() {
            let mut push = |rule: &str, detail: String| {
                out.push(Violation {
                    index,
                    rule: rule.to_string(),
                    detail,
                })
            };
            if let Err(Error::Validation { rule, detail }) = self.check_refs(ev) {
                push(rule, detail);
                continue;
            }
            if ev.weekday != weekday_of(ev.start_date) {
                push(
                    rules::WEEKDAY_MISMATCH,
                    format!("weekday {} but {} is {}", ev.weekday, ev.start_date, weekday_of(ev.start_date)),
                );
            }
            let start = ev.start_abs();
            if let Some((prev_start, prev_end)) = prev {
                if start < prev_start {
                    push(rules::TIME_REGRESSION, format!("starts {} min before previous event", prev_start - start));
                } else if start < prev_end {
                    push(rules::OVERLAP, format!("overlaps previous event by {} min", prev_end - start));
                }
            }
            prev = Some((start, ev.end_abs()));
        }
        out
    }

    /// Repairs what can be repaired and drops the rest. Events with unknown
    /// vocabulary, negative duration or an out-of-range time are dropped; state
    /// indices are clamped into the schema; weekdays are recomputed; events
    /// starting before the previous event's end are moved to that end.
    pub fn sanitize_log(&self, log: &ObservationLog) -> (ObservationLog, SanitizeReport) {
        let mut report = SanitizeReport::default();
        let mut events = Vec::with_capacity(log.events.len());
        let mut prev_end: Option<i64> = None;
        for (index, ev) in log.events.iter().enumerate() {
            let mut ev = ev.clone();
            let mut fix = |kind: &str, rule: &str, detail: String| {
                report.fixes.push(Fix {
                    index,
                    kind: kind.to_string(),
                    rule: rule.to_string(),
                    detail,
                })
            };
            let drop_rule = if self.action_index(&ev.action).is_none() {
                Some(rules::UNKNOWN_ACTION)
            } else if self.object_index(&ev.object_id).is_none() {
                Some(rules::UNKNOWN_OBJECT)
            } else if self.room_index(&ev.room).is_none() {
                Some(rules::UNKNOWN_ROOM)
            } else if ev.duration_min < 0 {
                Some(rules::NEGATIVE_DURATION)
            } else if ev.start_time as i64 >= MINUTES_PER_DAY {
                Some(rules::TIME_OUT_OF_RANGE)
            } else {
                None
            };
            if let Some(rule) = drop_rule {
                fix("drop", rule, format!("dropped: {rule}"));
                continue;
            }
            let n = self.schema_len(&ev.object_id).expect("checked");
            if ev.post_state.state >= n {
                fix(
                    "clamp",
                    rules::STATE_NOT_IN_SCHEMA,
                    format!("state {} -> {}", ev.post_state.state, n - 1),
                );
                ev.post_state.state = n - 1;
            }
            if let Some(end) = prev_end {
                let start = ev.start_abs();
                if start < end {
                    fix("shift", rules::OVERLAP, format!("start moved {} min later", end - start));
                    ev.set_start_abs(end);
                }
            }
            let wd = weekday_of(ev.start_date);
            if ev.weekday != wd {
                fix("weekday", rules::WEEKDAY_MISMATCH, format!("weekday {} -> {wd}", ev.weekday));
                ev.weekday = wd;
            }
            prev_end = Some(ev.end_abs());
            events.push(ev);
        }
        (
            ObservationLog {
                participant_id: log.participant_id.clone(),
                fingerprint: log.fingerprint.clone(),
                events,
            },
            report,
        )
    }

    /// An observation starting at `start`, with its post-state resolved
    /// against `state` using the default effect of the action.
    #[allow(clippy::too_many_arguments)]
    pub fn observe(
        &self,
        state: &WorldState,
        participant: &str,
        action: &str,
        object: &str,
        room: &str,
        intention: &str,
        start: i64,
        duration: i64,
        override_state: Option<&str>,
    ) -> Observation {
        let effect = self.effect(action, object, override_state);
        let ts = Timestamp::from_absolute(start);
        Observation {
            participant_id: participant.to_string(),
            action: action.to_string(),
            start_date: ts.date,
            start_time: ts.minute,
            weekday: ts.weekday(),
            duration_min: duration,
            object_id: object.to_string(),
            post_state: self.resolve(state, object, effect),
            room: room.to_string(),
            intention: intention.to_string(),
        }
    }
}

fn index_map<'a>(items: impl Iterator<Item = &'a String>, base: usize) -> HashMap<String, usize> {
    items
        .enumerate()
        .map(|(i, s)| (s.clone(), i + base))
        .collect()
}

/// Adds `days` to `date`.
pub fn add_days(date: NaiveDate, days: i64) -> NaiveDate {
    date + Duration::days(days)
}
