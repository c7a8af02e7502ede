#![allow(dead_code)]

use std::path::{Path, PathBuf};

use intent_core::agents::{AgentKind, EncodedLog, Hyper, IntentionSet, LabeledLog, Manifest, ManifestEntry};
use intent_core::encoding::Encoder;
use intent_core::fixtures::steady_persona;
use intent_core::persona::generate_log;
use intent_core::pipeline::TrainPlan;
use intent_core::session::ActionRequest;
use intent_core::world::{ObservationLog, World};

/// Small and fast settings: the agents are barely trained, which is enough
/// for contract tests.
pub fn tiny_plan() -> TrainPlan {
    TrainPlan {
        hyper: Hyper {
            window: 4,
            long_window: 8,
            d_model: 8,
            heads: 2,
            ffn: 16,
            max_epochs: 1,
            ..Hyper::default()
        },
        pretrain_epochs: 1,
        ..TrainPlan::default()
    }
}

pub fn steady_log(days: u32) -> ObservationLog {
    generate_log(&steady_persona(), &World::desk_scale(), days, 42).unwrap()
}

/// Trains a tiny suite for the steady persona and writes it with a manifest
/// under `dir`. Returns the manifest path.
pub fn tiny_manifest(dir: &Path) -> PathBuf {
    let world = World::desk_scale();
    let persona = steady_persona();
    let log = steady_log(7);
    let encoder = Encoder::new(world.clone(), 7);
    let data = LabeledLog::untouched(log.clone());
    let encoded = EncodedLog::new(&encoder, &data).unwrap();
    let plan = tiny_plan();
    let (base, _) = plan.pretrain(&encoder, std::slice::from_ref(&encoded), &AgentKind::ALL).unwrap();
    let (agents, _) = plan.personalize(&base, &encoded).unwrap();
    std::fs::create_dir_all(dir.join("S01")).unwrap();
    for (kind, agent) in &agents {
        agent.save(&dir.join("S01").join(format!("{kind}.ckpt"))).unwrap();
    }
    let rel = |k: AgentKind| PathBuf::from("S01").join(format!("{k}.ckpt"));
    let mut manifest = Manifest::new(world.fingerprint());
    manifest.participants.insert(
        "S01".into(),
        ManifestEntry {
            action: rel(AgentKind::Action),
            duration: rel(AgentKind::Duration),
            short: rel(AgentKind::ShortIntention),
            long: rel(AgentKind::LongIntention),
            baseline: rel(AgentKind::Baseline),
            intentions: IntentionSet::from_log(&log).unwrap().texts,
            schedule: persona.schedule(),
        },
    );
    let path = dir.join("manifest.json");
    manifest.save(&path).unwrap();
    path
}

/// The events of a generated log as action requests, with explicit starts.
pub fn requests(log: &ObservationLog, n: usize) -> Vec<ActionRequest> {
    log.events
        .iter()
        .take(n)
        .map(|e| ActionRequest {
            action: e.action.clone(),
            object: e.object_id.clone(),
            room: e.room.clone(),
            intention: e.intention.clone(),
            duration: e.duration_min,
            start: Some(e.start()),
        })
        .collect()
}
