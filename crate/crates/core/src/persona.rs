//! Seeded synthesis of long-horizon behavior logs from routine templates.
//!
//! A [`Persona`] is a weekly timetable of [`RoutineEntry`] items, each a short
//! recipe of actions. [`generate_log`] realizes the timetable day by day with
//! jittered start times and fills the gaps with `idle` events, so a generated
//! log is contiguous. [`inject_conflicts`] swaps some routine occurrences for a
//! different routine of the same persona and records what was scheduled.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{
    add_days, weekday_of, ObjectState, Observation, ObservationLog, Timestamp, World, WorldState,
    MINUTES_PER_DAY, NONE_OBJECT,
};

pub const IDLE_INTENTION: &str = "idle";
pub const FILLER_ACTION: &str = "sit";
pub const FILLER_ROOM: &str = "living room";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecipeStep {
    pub action: String,
    pub object: String,
    pub duration: u32,
    pub room: String,
    /// Explicit post-state name; the action's default effect when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutineEntry {
    pub weekdays: Vec<u8>,
    pub nominal_start: u32,
    pub intention: String,
    pub recipe: Vec<RecipeStep>,
}

impl RoutineEntry {
    /// Nominal length of the whole recipe in minutes.
    pub fn span(&self) -> u32 {
        self.recipe.iter().map(|s| s.duration).sum()
    }

    pub fn runs_on(&self, weekday: u8) -> bool {
        self.weekdays.contains(&weekday)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub id: String,
    pub routine: Vec<RoutineEntry>,
    pub mistake_rate: f64,
    pub jitter_sigma_min: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictLabel {
    pub index: usize,
    pub expected_long_intention: String,
    pub actual_short_intention: String,
    pub is_conflict: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictGroundTruth {
    pub labels: Vec<ConflictLabel>,
}

impl ConflictGroundTruth {
    /// Ground truth for an untouched log: every event is its own plan.
    pub fn untouched(log: &ObservationLog) -> Self {
        ConflictGroundTruth {
            labels: log
                .events
                .iter()
                .enumerate()
                .map(|(index, ev)| ConflictLabel {
                    index,
                    expected_long_intention: ev.intention.clone(),
                    actual_short_intention: ev.intention.clone(),
                    is_conflict: 0,
                })
                .collect(),
        }
    }

    pub fn conflicts(&self) -> usize {
        self.labels.iter().filter(|l| l.is_conflict == 1).count()
    }
}

impl Persona {
    pub fn validate(&self, world: &World) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("persona {}: {msg}", self.id)));
        if self.routine.is_empty() {
            return bad("routine is empty".into());
        }
        if !(0.0..=1.0).contains(&self.mistake_rate) {
            return bad(format!("mistake_rate {} outside [0, 1]", self.mistake_rate));
        }
        if !(self.jitter_sigma_min >= 0.0) {
            return bad(format!("jitter_sigma_min {} < 0", self.jitter_sigma_min));
        }
        for entry in &self.routine {
            if entry.recipe.is_empty() {
                return bad(format!("routine '{}' has an empty recipe", entry.intention));
            }
            if entry.nominal_start as i64 >= MINUTES_PER_DAY {
                return bad(format!("routine '{}' starts after midnight", entry.intention));
            }
            if entry.weekdays.is_empty() || entry.weekdays.iter().any(|&d| d > 6) {
                return bad(format!("routine '{}' has invalid weekdays", entry.intention));
            }
            if entry.intention == IDLE_INTENTION {
                return bad("'idle' is reserved for filler events".into());
            }
            for step in &entry.recipe {
                if world.action_index(&step.action).is_none() {
                    return bad(format!("recipe references unknown action '{}'", step.action));
                }
                if world.object_index(&step.object).is_none() {
                    return bad(format!("recipe references unknown object '{}'", step.object));
                }
                if world.room_index(&step.room).is_none() {
                    return bad(format!("recipe references unknown room '{}'", step.room));
                }
                if step.duration == 0 {
                    return bad(format!("routine '{}' has a zero-length step", entry.intention));
                }
                if let Some(post) = &step.post {
                    let ok = world.object(&step.object).is_some_and(|o| {
                        world.config().state_schemas[&o.schema].contains(post)
                    });
                    if !ok {
                        return bad(format!("post state '{post}' invalid for '{}'", step.object));
                    }
                }
            }
        }
        for day in 0..7u8 {
            let mut todays: Vec<_> = self.routine.iter().filter(|e| e.runs_on(day)).collect();
            todays.sort_by_key(|e| e.nominal_start);
            for pair in todays.windows(2) {
                if pair[0].nominal_start + pair[0].span() > pair[1].nominal_start {
                    return bad(format!(
                        "'{}' overlaps '{}' on weekday {day}",
                        pair[0].intention, pair[1].intention
                    ));
                }
            }
        }
        Ok(())
    }

    /// Distinct routine intentions, sorted.
    pub fn intentions(&self) -> BTreeSet<String> {
        self.routine.iter().map(|e| e.intention.clone()).collect()
    }

    /// The nominal timetable, with a tolerance of three jitter deviations.
    pub fn schedule(&self) -> Schedule {
        let mut entries: Vec<ScheduleEntry> = self
            .routine
            .iter()
            .flat_map(|e| {
                e.weekdays.iter().map(move |&weekday| ScheduleEntry {
                    weekday,
                    start: e.nominal_start,
                    span: e.span(),
                    intention: e.intention.clone(),
                })
            })
            .collect();
        entries.sort_by(|a, b| (a.weekday, a.start, &a.intention).cmp(&(b.weekday, b.start, &b.intention)));
        Schedule {
            tolerance_min: (3.0 * self.jitter_sigma_min).ceil() as u32,
            entries,
        }
    }
}

pub fn load_personas(path: &Path) -> Result<Vec<Persona>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub weekday: u8,
    /// Minutes since midnight.
    pub start: u32,
    pub span: u32,
    pub intention: String,
}

/// Weekly timetable of routines, either nominal (from a persona) or mined
/// from a recorded log.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub tolerance_min: u32,
    pub entries: Vec<ScheduleEntry>,
}

impl Schedule {
    /// The occurrence of `intention` that is current or imminent at
    /// `minute` on `weekday`: the latest one starting no later than
    /// `minute + tolerance`.
    pub fn occurrence(&self, intention: &str, weekday: u8, minute: u32) -> Option<&ScheduleEntry> {
        let limit = minute + self.tolerance_min;
        self.entries
            .iter()
            .filter(|e| e.weekday == weekday && e.intention == intention && e.start <= limit)
            .max_by_key(|e| e.start)
    }

    /// The entry whose tolerance-widened window contains `minute`, if any.
    /// Overlapping windows resolve to the latest start.
    pub fn active_at(&self, weekday: u8, minute: u32) -> Option<&ScheduleEntry> {
        let tol = self.tolerance_min;
        self.entries
            .iter()
            .filter(|e| {
                e.weekday == weekday && e.start <= minute + tol && minute < e.start + e.span + tol
            })
            .max_by_key(|e| e.start)
    }

    /// The entry whose nominal span contains `minute` on `weekday`, or else
    /// the first one to start after it, wrapping around the week. Tolerance
    /// is ignored here, so back-to-back routines do not swallow each other.
    pub fn current_or_next(&self, weekday: u8, minute: u32) -> Option<&ScheduleEntry> {
        let inside = self
            .entries
            .iter()
            .filter(|e| e.weekday == weekday && e.start <= minute && minute < e.start + e.span)
            .max_by_key(|e| e.start);
        if inside.is_some() {
            return inside;
        }
        let key = |e: &ScheduleEntry| {
            let ahead = (e.weekday as i64 - weekday as i64).rem_euclid(7) * MINUTES_PER_DAY + e.start as i64 - minute as i64;
            (ahead.rem_euclid(7 * MINUTES_PER_DAY), e.start)
        };
        self.entries.iter().min_by_key(|e| key(e))
    }
}

/// Mines recurring routines from a log: runs of one non-idle intention that
/// recur at least `min_support` times within a ±`window` minute band of
/// time of day become schedule entries on the weekdays they were seen.
pub fn mine_schedule(log: &ObservationLog, window: u32, min_support: usize) -> Schedule {
    // (start minute, span, weekday) per intention
    let mut runs: BTreeMap<&str, Vec<(u32, u32, u8)>> = BTreeMap::new();
    let mut i = 0;
    while i < log.events.len() {
        let ev = &log.events[i];
        let mut j = i + 1;
        while j < log.events.len() && log.events[j].intention == ev.intention {
            j += 1;
        }
        if ev.intention != IDLE_INTENTION {
            let span = (log.events[j - 1].end_abs() - ev.start_abs()).max(0) as u32;
            runs.entry(&ev.intention)
                .or_default()
                .push((ev.start_time, span, ev.weekday));
        }
        i = j;
    }
    let mut entries = Vec::new();
    for (intention, mut occ) in runs {
        occ.sort();
        let mut k = 0;
        while k < occ.len() {
            let mut m = k + 1;
            while m < occ.len() && occ[m].0 - occ[k].0 <= 2 * window {
                m += 1;
            }
            let cluster = &occ[k..m];
            if cluster.len() >= min_support {
                let n = cluster.len() as u64;
                let start = (cluster.iter().map(|c| c.0 as u64).sum::<u64>() + n / 2) / n;
                let span = (cluster.iter().map(|c| c.1 as u64).sum::<u64>() + n / 2) / n;
                let days: BTreeSet<u8> = cluster.iter().map(|c| c.2).collect();
                for weekday in days {
                    entries.push(ScheduleEntry {
                        weekday,
                        start: start as u32,
                        span: span as u32,
                        intention: intention.to_string(),
                    });
                }
            }
            k = m;
        }
    }
    entries.sort_by(|a, b| (a.weekday, a.start, &a.intention).cmp(&(b.weekday, b.start, &b.intention)));
    Schedule {
        tolerance_min: window,
        entries,
    }
}

#[derive(Debug, Clone)]
enum StepEffect {
    Recipe(Option<String>),
    Observed(ObjectState),
}

#[derive(Debug, Clone)]
struct Step {
    action: String,
    object: String,
    room: String,
    duration: i64,
    effect: StepEffect,
}

impl Step {
    fn from_recipe(step: &RecipeStep) -> Step {
        Step {
            action: step.action.clone(),
            object: step.object.clone(),
            room: step.room.clone(),
            duration: step.duration as i64,
            effect: StepEffect::Recipe(step.post.clone()),
        }
    }

    fn from_observation(ev: &Observation) -> Step {
        Step {
            action: ev.action.clone(),
            object: ev.object_id.clone(),
            room: ev.room.clone(),
            duration: ev.duration_min,
            effect: StepEffect::Observed(ev.post_state),
        }
    }
}

/// A planned run of steps sharing one intention.
#[derive(Debug, Clone)]
struct Block {
    start: i64,
    intention: String,
    steps: Vec<Step>,
    routine: bool,
}

/// Lays blocks out back to back: a block never starts before the previous
/// one ended, and gaps become `idle` filler events. Returns the events and
/// the block each event came from (`None` for fillers).
fn realize(world: &World, participant: &str, blocks: &[Block]) -> Result<(Vec<Observation>, Vec<Option<usize>>)> {
    let mut state = world.init();
    let mut events = Vec::new();
    let mut origin = Vec::new();
    let mut cursor: Option<i64> = None;
    let mut push = |state: &mut WorldState, ev: Observation, from: Option<usize>| -> Result<()> {
        *state = world.apply(state, &ev)?;
        events.push(ev);
        origin.push(from);
        Ok(())
    };
    for (b, block) in blocks.iter().enumerate() {
        let mut t = match cursor {
            Some(c) if block.start > c => {
                let filler = world.observe(&state, participant, FILLER_ACTION, NONE_OBJECT, FILLER_ROOM, IDLE_INTENTION, c, block.start - c, None);
                push(&mut state, filler, None)?;
                block.start
            }
            Some(c) => c.max(block.start),
            None => block.start.max(state.clock.absolute()),
        };
        for step in &block.steps {
            let ev = match &step.effect {
                StepEffect::Recipe(post) => world.observe(&state, participant, &step.action, &step.object, &step.room, &block.intention, t, step.duration, post.as_deref()),
                StepEffect::Observed(observed) => {
                    let mut ev = world.observe(&state, participant, &step.action, &step.object, &step.room, &block.intention, t, step.duration, None);
                    let consumable = world.object(&step.object).is_some_and(|o| o.quantity.is_some());
                    if !consumable {
                        ev.post_state = *observed;
                    }
                    ev
                }
            };
            push(&mut state, ev, Some(b))?;
            t += step.duration;
        }
        cursor = Some(t);
    }
    Ok((events, origin))
}

fn truncated_jitter(rng: &mut ChaCha8Rng, sigma: f64) -> i64 {
    if sigma <= 0.0 {
        return 0;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma > 0");
    loop {
        let x: f64 = normal.sample(rng);
        if x.abs() <= 3.0 * sigma {
            return x.round() as i64;
        }
    }
}

/// Realizes `days` days of `persona` starting at the world's horizon start.
/// Deterministic in `(persona, world config, days, seed)`.
pub fn generate_log(persona: &Persona, world: &World, days: u32, seed: u64) -> Result<ObservationLog> {
    if days < 1 {
        return Err(Error::Config("days must be >= 1".into()));
    }
    persona.validate(world)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = world.config().horizon_start;
    let mut blocks = Vec::new();
    for day in 0..days as i64 {
        let date = add_days(first, day);
        let weekday = weekday_of(date);
        let day_abs = Timestamp::midnight(date).absolute();
        let mut todays: Vec<&RoutineEntry> = persona.routine.iter().filter(|e| e.runs_on(weekday)).collect();
        todays.sort_by_key(|e| e.nominal_start);
        for entry in todays {
            let jitter = truncated_jitter(&mut rng, persona.jitter_sigma_min);
            blocks.push(Block {
                start: day_abs + entry.nominal_start as i64 + jitter,
                intention: entry.intention.clone(),
                steps: entry.recipe.iter().map(Step::from_recipe).collect(),
                routine: true,
            });
        }
    }
    let (events, _) = realize(world, &persona.id, &blocks)?;
    Ok(ObservationLog {
        participant_id: persona.id.clone(),
        fingerprint: world.fingerprint().to_string(),
        events,
    })
}

/// Splits a log back into planned blocks. Routine occurrences are recognized
/// by matching a recipe of the persona with the same intention; anything
/// else (except fillers, which `realize` regenerates) is kept as-is.
fn parse_blocks(log: &ObservationLog, persona: &Persona) -> Vec<Block> {
    let events = &log.events;
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < events.len() {
        let ev = &events[i];
        if ev.intention == IDLE_INTENTION {
            i += 1;
            continue;
        }
        let matched = persona
            .routine
            .iter()
            .filter(|e| e.intention == ev.intention)
            .filter(|e| {
                let n = e.recipe.len();
                i + n <= events.len()
                    && e.recipe.iter().zip(&events[i..i + n]).all(|(s, o)| {
                        s.action == o.action && s.object == o.object_id && o.intention == e.intention
                    })
            })
            .map(|e| e.recipe.len())
            .max();
        let n = matched.unwrap_or(1);
        blocks.push(Block {
            start: ev.start_abs(),
            intention: ev.intention.clone(),
            steps: events[i..i + n].iter().map(Step::from_observation).collect(),
            routine: matched.is_some(),
        });
        i += n;
    }
    blocks
}

/// Replaces routine occurrences with a different routine of the persona at
/// rate `persona.mistake_rate`. The ground truth keeps the scheduled intention
/// as the expected long-term intention.
pub fn inject_conflicts(
    log: &ObservationLog,
    persona: &Persona,
    world: &World,
    seed: u64,
) -> Result<(ObservationLog, ConflictGroundTruth)> {
    if log.fingerprint != world.fingerprint() {
        return Err(Error::Fingerprint {
            expected: world.fingerprint().to_string(),
            found: log.fingerprint.clone(),
        });
    }
    let intentions: Vec<String> = persona.intentions().into_iter().collect();
    if persona.mistake_rate > 0.0 && intentions.len() < 2 {
        return Err(Error::Config(format!(
            "persona {} needs at least 2 distinct intentions to inject mistakes",
            persona.id
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = parse_blocks(log, persona);
    let mut scheduled: Vec<Option<String>> = vec![None; blocks.len()];
    for (b, block) in blocks.iter_mut().enumerate() {
        if !block.routine {
            continue;
        }
        let u: f64 = rng.random();
        if u >= persona.mistake_rate {
            continue;
        }
        let others: Vec<&String> = intentions.iter().filter(|i| **i != block.intention).collect();
        let pick = others[rng.random_range(0..others.len())];
        let weekday = Timestamp::from_absolute(block.start).weekday();
        let entry = persona
            .routine
            .iter()
            .filter(|e| &e.intention == pick)
            .find(|e| e.runs_on(weekday))
            .or_else(|| persona.routine.iter().find(|e| &e.intention == pick))
            .expect("intention comes from the routine");
        scheduled[b] = Some(std::mem::replace(&mut block.intention, pick.clone()));
        block.steps = entry.recipe.iter().map(Step::from_recipe).collect();
    }
    let (events, origin) = realize(world, &log.participant_id, &blocks)?;
    let labels = events
        .iter()
        .zip(&origin)
        .enumerate()
        .map(|(index, (ev, from))| {
            let planned = from.and_then(|b| scheduled[b].clone());
            ConflictLabel {
                index,
                is_conflict: planned.is_some() as u8,
                expected_long_intention: planned.unwrap_or_else(|| ev.intention.clone()),
                actual_short_intention: ev.intention.clone(),
            }
        })
        .collect();
    Ok((
        ObservationLog {
            participant_id: log.participant_id.clone(),
            fingerprint: log.fingerprint.clone(),
            events,
        },
        ConflictGroundTruth { labels },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

/// Chronological partition of event indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

pub fn split_ranges(n: usize, ratios: SplitRatios) -> Result<Split> {
    if n == 0 {
        return Err(Error::Data("cannot split an empty log".into()));
    }
    let sum = ratios.train + ratios.val + ratios.test;
    if (sum - 1.0).abs() > 1e-9 || ratios.train < 0.0 || ratios.val < 0.0 || ratios.test < 0.0 {
        return Err(Error::Config(format!("split ratios must be non-negative and sum to 1, got {sum}")));
    }
    let floor = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
    let train = floor(ratios.train);
    let val = floor(ratios.val);
    Ok(Split {
        train: 0..train,
        val: train..train + val,
        test: train + val..n,
    })
}

/// Chronological, non-shuffled train/val/test split.
pub fn split_dataset(log: &ObservationLog, ratios: SplitRatios) -> Result<(ObservationLog, ObservationLog, ObservationLog)> {
    let split = split_ranges(log.len(), ratios)?;
    let part = |r: Range<usize>| ObservationLog {
        participant_id: log.participant_id.clone(),
        fingerprint: log.fingerprint.clone(),
        events: log.events[r].to_vec(),
    };
    Ok((part(split.train), part(split.val), part(split.test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::step;

    fn breakfast_persona(jitter: f64, mistakes: f64) -> Persona {
        Persona {
            id: "B".into(),
            routine: vec![
                RoutineEntry {
                    weekdays: (0..7).collect(),
                    nominal_start: 8 * 60,
                    intention: "make breakfast".into(),
                    recipe: vec![step("cook", "stove", 25, "kitchen"), step("turn_off", "stove", 5, "kitchen")],
                },
                RoutineEntry {
                    weekdays: (0..7).collect(),
                    nominal_start: 20 * 60,
                    intention: "watch tv".into(),
                    recipe: vec![step("watch", "tv", 60, "living room")],
                },
            ],
            mistake_rate: mistakes,
            jitter_sigma_min: jitter,
        }
    }

    #[test]
    fn zero_jitter_breakfast_lands_on_time() {
        let world = World::desk_scale();
        let log = generate_log(&breakfast_persona(0.0, 0.0), &world, 2, 1).unwrap();
        let starts: Vec<_> = log
            .events
            .iter()
            .filter(|e| e.intention == "make breakfast" && e.action == "cook")
            .map(|e| (e.start_time, e.duration_min))
            .collect();
        assert_eq!(starts, vec![(480, 25), (480, 25)]);
        let spans: Vec<i64> = log
            .events
            .windows(2)
            .filter(|w| w[0].intention == "make breakfast" && w[1].intention == "make breakfast")
            .map(|w| w[1].end_abs() - w[0].start_abs())
            .collect();
        assert_eq!(spans, vec![30, 30]);
        assert!(world.validate_log(&log).is_empty());
    }

    #[test]
    fn unknown_recipe_object_is_a_config_error() {
        let world = World::desk_scale();
        let mut p = breakfast_persona(0.0, 0.0);
        p.routine[0].recipe[0].object = "toaster".into();
        let err = generate_log(&p, &world, 1, 0).unwrap_err().to_string();
        assert!(err.contains("toaster"), "{err}");
    }

    #[test]
    fn zero_rate_injection_is_identity() {
        let world = World::desk_scale();
        let p = breakfast_persona(10.0, 0.0);
        let log = generate_log(&p, &world, 7, 3).unwrap();
        let (out, gt) = inject_conflicts(&log, &p, &world, 9).unwrap();
        assert_eq!(out, log);
        assert_eq!(gt.conflicts(), 0);
        assert_eq!(gt, ConflictGroundTruth::untouched(&log));
    }

    #[test]
    fn full_rate_substitutes_every_occurrence() {
        let world = World::desk_scale();
        let p = breakfast_persona(0.0, 1.0);
        let log = generate_log(&p, &world, 3, 3).unwrap();
        let (out, gt) = inject_conflicts(&log, &p, &world, 9).unwrap();
        assert!(world.validate_log(&out).is_empty());
        for (ev, label) in out.events.iter().zip(&gt.labels) {
            if ev.intention == IDLE_INTENTION {
                assert_eq!(label.is_conflict, 0);
            } else {
                assert_eq!(label.is_conflict, 1);
                assert_ne!(label.expected_long_intention, label.actual_short_intention);
            }
        }
    }

    #[test]
    fn single_intention_persona_cannot_make_mistakes() {
        let world = World::desk_scale();
        let mut p = breakfast_persona(0.0, 0.5);
        p.routine.truncate(1);
        let log = generate_log(&p, &world, 1, 0).unwrap();
        assert!(matches!(inject_conflicts(&log, &p, &world, 0), Err(Error::Config(_))));
    }

    #[test]
    fn split_sizes() {
        let sizes = |n| {
            let s = split_ranges(n, SplitRatios::default()).unwrap();
            (s.train.len(), s.val.len(), s.test.len())
        };
        assert_eq!(sizes(100), (70, 10, 20));
        assert_eq!(sizes(10), (7, 1, 2));
        assert!(split_ranges(0, SplitRatios::default()).is_err());
    }

    #[test]
    fn split_is_chronological() {
        let world = World::desk_scale();
        let log = generate_log(&breakfast_persona(5.0, 0.0), &world, 10, 4).unwrap();
        let (train, val, test) = split_dataset(&log, SplitRatios::default()).unwrap();
        assert!(train.events.last().unwrap().start_abs() < val.events[0].start_abs());
        assert!(val.events.last().unwrap().start_abs() < test.events[0].start_abs());
        let joined: Vec<_> = train.events.iter().chain(&val.events).chain(&test.events).cloned().collect();
        assert_eq!(joined, log.events);
    }

    #[test]
    fn mining_recovers_nominal_schedule() {
        let world = World::desk_scale();
        let p = breakfast_persona(0.0, 0.0);
        let log = generate_log(&p, &world, 7, 0).unwrap();
        let mined = mine_schedule(&log, 60, 3);
        assert_eq!(mined.entries.len(), 14);
        let occ = mined.occurrence("make breakfast", 2, 8 * 60 + 10).unwrap();
        assert_eq!((occ.start, occ.span), (480, 30));
        assert!(mined.occurrence("watch tv", 2, 8 * 60).is_none());
    }

    #[test]
    fn current_or_next_wraps_around_the_week() {
        let entry = |weekday, start, intention: &str| ScheduleEntry {
            weekday,
            start,
            span: 30,
            intention: intention.into(),
        };
        let s = Schedule {
            tolerance_min: 0,
            entries: vec![entry(0, 480, "make breakfast"), entry(2, 1200, "cook dinner")],
        };
        let at = |w, m| s.current_or_next(w, m).map(|e| e.intention.as_str());
        assert_eq!(at(0, 490), Some("make breakfast"));
        assert_eq!(at(0, 520), Some("cook dinner"));
        assert_eq!(at(2, 1200), Some("cook dinner"));
        assert_eq!(at(2, 1300), Some("make breakfast"));
        assert_eq!(at(6, 0), Some("make breakfast"));
        assert!(Schedule { tolerance_min: 0, entries: vec![] }.current_or_next(0, 0).is_none());
    }
}
