//! The batch subcommands and the on-disk dataset layout they share.
//!
//! A dataset directory holds `world.json`, `layout.json`, `dataset.json` and,
//! per participant, `<id>.jsonl`, `<id>.truth.json` and `<id>.schedule.json`.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use intent_core::agents::{Agent, AgentKind, EncodedLog, IntentionSet, LabeledLog, Manifest, ManifestEntry, AgentSuite};
use intent_core::conflict::{detect_learned, detect_oracle, evaluate_detector, ConflictReport, DetectConfig, DetectorScores};
use intent_core::encoding::{Encoder, Layout};
use intent_core::eval::{check_suite, evaluate_participant, MetricsReport};
use intent_core::persona::{load_personas, mine_schedule, ConflictGroundTruth, Schedule};
use intent_core::pipeline::{assemble, generate_all, AgentSet, TrainPlan, BASE_PARTICIPANT};
use intent_core::world::{ObservationLog, World, WorldConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Routine mining band and support used when no schedule file exists.
pub const MINING_WINDOW_MIN: u32 = 60;
pub const MINING_SUPPORT: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub v: u32,
    pub seed: u64,
    pub days: u32,
    pub fingerprint: String,
    pub participants: Vec<String>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// The world of a dataset directory, or the default world when it has none.
pub fn load_world(path: Option<&Path>) -> Result<World> {
    match path {
        Some(p) if p.exists() => Ok(World::new(read_json::<WorldConfig>(p)?)?),
        Some(p) => Err(CliError::io(p, std::io::Error::from(std::io::ErrorKind::NotFound))),
        None => Ok(World::desk_scale()),
    }
}

pub fn generate(personas: &Path, days: u32, seed: u64, out: &Path, world: Option<&Path>) -> Result<DatasetIndex> {
    let world = load_world(world)?;
    let personas = load_personas(personas)?;
    create_dir(out)?;
    let participants = generate_all(&personas, &world, days, seed)?;
    write_json(&out.join("world.json"), world.config())?;
    write_json(&out.join("layout.json"), &Layout::for_world(&world))?;
    for p in &participants {
        let id = &p.persona.id;
        let path = out.join(format!("{id}.jsonl"));
        let mut buf = Vec::new();
        p.data.log.write_jsonl(&mut buf)?;
        fs::write(&path, buf).map_err(|e| CliError::io(&path, e))?;
        write_json(&out.join(format!("{id}.truth.json")), &p.truth)?;
        write_json(&out.join(format!("{id}.schedule.json")), &p.persona.schedule())?;
    }
    let index = DatasetIndex {
        v: 1,
        seed,
        days,
        fingerprint: world.fingerprint().to_string(),
        participants: personas.iter().map(|p| p.id.clone()).collect(),
    };
    write_json(&out.join("dataset.json"), &index)?;
    Ok(index)
}

/// One participant's files, loaded.
#[derive(Debug, Clone)]
pub struct LoadedParticipant {
    pub id: String,
    pub data: LabeledLog,
    pub truth: Option<ConflictGroundTruth>,
    pub schedule: Schedule,
}

/// Reads a JSON Lines log. The participant id comes from the events, or the
/// file name when the log is empty.
pub fn read_log(path: &Path, world: &World) -> Result<ObservationLog> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("participant").to_string();
    let mut log = ObservationLog::read_jsonl(BufReader::new(file), &stem, world.fingerprint())?;
    if let Some(first) = log.events.first() {
        log.participant_id = first.participant_id.clone();
    }
    let violations = world.validate_log(&log);
    if let Some(v) = violations.first() {
        return Err(CliError::Format(format!(
            "{}: event {} breaks rule {}: {}",
            path.display(),
            v.index,
            v.rule,
            v.detail
        )));
    }
    Ok(log)
}

fn sibling(log_path: &Path, suffix: &str) -> PathBuf {
    let stem = log_path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    log_path.with_file_name(format!("{stem}.{suffix}.json"))
}

/// Loads a log with whatever truth and schedule files sit next to it.
pub fn load_participant(log_path: &Path, world: &World) -> Result<LoadedParticipant> {
    let log = read_log(log_path, world)?;
    let truth_path = sibling(log_path, "truth");
    let truth: Option<ConflictGroundTruth> = if truth_path.exists() { Some(read_json(&truth_path)?) } else { None };
    let schedule_path = sibling(log_path, "schedule");
    let schedule = if schedule_path.exists() {
        read_json(&schedule_path)?
    } else {
        mine_schedule(&log, MINING_WINDOW_MIN, MINING_SUPPORT)
    };
    let data = match &truth {
        Some(gt) => LabeledLog::from_ground_truth(log, gt)?,
        None => LabeledLog::from_schedule(log, &schedule),
    };
    Ok(LoadedParticipant {
        id: data.log.participant_id.clone(),
        data,
        truth,
        schedule,
    })
}

/// World and participants of a dataset directory.
pub fn load_dataset(dir: &Path, only: &[String]) -> Result<(World, DatasetIndex, Vec<LoadedParticipant>)> {
    let world = load_world(Some(&dir.join("world.json")))?;
    let index: DatasetIndex = read_json(&dir.join("dataset.json"))?;
    if index.fingerprint != world.fingerprint() {
        return Err(intent_core::Error::Fingerprint {
            expected: index.fingerprint,
            found: world.fingerprint().to_string(),
        }
        .into());
    }
    let mut out = Vec::new();
    for id in &index.participants {
        if !only.is_empty() && !only.contains(id) {
            continue;
        }
        out.push(load_participant(&dir.join(format!("{id}.jsonl")), &world)?);
    }
    if let Some(missing) = only.iter().find(|id| !index.participants.contains(id)) {
        return Err(intent_core::Error::NotFound(format!("participant {missing} in {}", dir.display())).into());
    }
    Ok((world, index, out))
}

fn encode_all(encoder: &Encoder, parts: &[LoadedParticipant]) -> Result<Vec<EncodedLog>> {
    Ok(parts
        .iter()
        .map(|p| EncodedLog::new(encoder, &p.data))
        .collect::<intent_core::Result<_>>()?)
}

fn kind_file(kind: AgentKind) -> String {
    format!("{kind}.ckpt")
}

/// Pretrains base agents on the pooled training splits.
pub fn train(data: &Path, out: &Path, plan: &TrainPlan, kinds: &[AgentKind]) -> Result<Vec<(AgentKind, intent_core::agents::TrainReport)>> {
    let (world, index, parts) = load_dataset(data, &[])?;
    let encoder = Encoder::new(world, index.days);
    let logs = encode_all(&encoder, &parts)?;
    let (agents, reports) = plan.pretrain(&encoder, &logs, kinds)?;
    let dir = out.join(BASE_PARTICIPANT);
    create_dir(&dir)?;
    for (kind, agent) in &agents {
        agent.save(&dir.join(kind_file(*kind)))?;
    }
    write_json(&dir.join("reports.json"), &reports)?;
    Ok(reports.into_iter().collect())
}

/// Fine-tunes the base agents per participant and writes `manifest.json`.
pub fn finetune(data: &Path, base: &Path, out: &Path, plan: &TrainPlan, only: &[String]) -> Result<Manifest> {
    let (world, _, parts) = load_dataset(data, only)?;
    let base_dir = base.join(BASE_PARTICIPANT);
    let mut agents = AgentSet::new();
    for kind in AgentKind::ALL {
        agents.insert(kind, Agent::load(&base_dir.join(kind_file(kind)))?);
    }
    let horizon_days = agents[&AgentKind::Action].meta.horizon_days;
    let encoder = Encoder::new(world.clone(), horizon_days);
    let manifest_path = out.join("manifest.json");
    let mut manifest = if manifest_path.exists() {
        Manifest::load(&manifest_path)?
    } else {
        Manifest::new(world.fingerprint())
    };
    for p in &parts {
        let log = EncodedLog::new(&encoder, &p.data)?;
        let (tuned, reports) = plan.personalize(&agents, &log)?;
        let dir = out.join(&p.id);
        create_dir(&dir)?;
        for (kind, agent) in &tuned {
            agent.save(&dir.join(kind_file(*kind)))?;
        }
        write_json(&dir.join("reports.json"), &reports)?;
        let rel = |k: AgentKind| PathBuf::from(&p.id).join(kind_file(k));
        let set = IntentionSet::from_log(&p.data.log)?;
        manifest.participants.insert(
            p.id.clone(),
            ManifestEntry {
                action: rel(AgentKind::Action),
                duration: rel(AgentKind::Duration),
                short: rel(AgentKind::ShortIntention),
                long: rel(AgentKind::LongIntention),
                baseline: rel(AgentKind::Baseline),
                intentions: set.texts.clone(),
                schedule: p.schedule.clone(),
            },
        );
    }
    create_dir(out)?;
    manifest.save(&manifest_path)?;
    Ok(manifest)
}

/// Scores every manifest participant found in the dataset on its test split.
pub fn eval(data: &Path, manifest_path: &Path, plan: &TrainPlan) -> Result<MetricsReport> {
    let manifest = Manifest::load(manifest_path)?;
    let only: Vec<String> = manifest.participants.keys().cloned().collect();
    let (world, _, parts) = load_dataset(data, &only)?;
    let mut report = MetricsReport::default();
    for p in &parts {
        let suite = AgentSuite::load(manifest_path, &p.id)?;
        let encoder = Encoder::new(world.clone(), suite.action.meta.horizon_days);
        let log = EncodedLog::new(&encoder, &p.data)?;
        check_suite(&suite, &log)?;
        let split = plan.split(&log)?;
        report.rows.push(evaluate_participant(&suite, &log, split.test, &suite.intentions)?);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectOutcome {
    pub participant: String,
    pub reports: Vec<ConflictReport>,
    pub scores: Option<DetectorScores>,
}

/// Replays a log through the detector.
pub fn detect(
    log_path: &Path,
    world: Option<&Path>,
    manifest: Option<&Path>,
    oracle: bool,
    config: DetectConfig,
    test_split_only: bool,
    plan: &TrainPlan,
) -> Result<DetectOutcome> {
    let world_path = world
        .map(Path::to_path_buf)
        .or_else(|| Some(log_path.with_file_name("world.json")).filter(|p| p.exists()));
    let world = load_world(world_path.as_deref())?;
    let p = load_participant(log_path, &world)?;
    let reports = if oracle {
        let truth = p.truth.as_ref().ok_or_else(|| {
            CliError::Usage(format!("--oracle needs {}", sibling(log_path, "truth").display()))
        })?;
        let all = detect_oracle(&p.data.log, truth, &p.schedule, config)?;
        if test_split_only {
            let range = intent_core::persona::split_ranges(all.len(), plan.ratios)?.test;
            all.into_iter().filter(|r| range.contains(&r.event_index)).collect()
        } else {
            all
        }
    } else {
        let manifest = manifest.ok_or_else(|| CliError::Usage("learned detection needs --manifest (or pass --oracle)".into()))?;
        let mut suite = AgentSuite::load(manifest, &p.id)?;
        if suite.schedule.entries.is_empty() {
            suite.schedule = p.schedule.clone();
        }
        let encoder = Encoder::new(world, suite.action.meta.horizon_days);
        let log = EncodedLog::new(&encoder, &p.data)?;
        let range = if test_split_only { plan.split(&log)?.test } else { 0..log.len() };
        detect_learned(&suite, &log, &p.data.log, range, config)?
    };
    let scores = match &p.truth {
        Some(gt) => Some(evaluate_detector(&reports, gt)?),
        None => None,
    };
    Ok(DetectOutcome {
        participant: p.id,
        reports,
        scores,
    })
}

pub fn write_reports(path: &Path, reports: &[ConflictReport]) -> Result<()> {
    let mut text = String::new();
    for r in reports {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Assembles a suite straight from agents held in memory.
pub fn suite_from(agents: AgentSet, p: &LoadedParticipant) -> Result<AgentSuite> {
    Ok(assemble(agents, IntentionSet::from_log(&p.data.log)?, p.schedule.clone())?)
}

pub fn write_metrics(path: &Path, report: &MetricsReport) -> Result<()> {
    write_json(path, &report.to_json())
}
