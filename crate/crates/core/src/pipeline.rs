//! End-to-end procedures shared by the command line and the tests:
//! dataset generation, pooled pretraining and per-participant fine-tuning.

use std::collections::BTreeMap;

use crate::agents::{
    finetune, train_agent, Agent, AgentKind, AgentSuite, Dataset, EncodedLog, Hyper, IntentionSet,
    LabeledLog, TrainReport, TrainSpec,
};
use crate::encoding::{fnv1a64, Encoder};
use crate::error::{Error, Result};
use crate::persona::{generate_log, inject_conflicts, split_ranges, ConflictGroundTruth, Persona, Schedule, Split, SplitRatios};
use crate::world::World;

pub const DEFAULT_DAYS: u32 = 28;
pub const BASE_PARTICIPANT: &str = "base";

/// Independent child seed for a named step.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    fnv1a64(format!("{seed}/{label}").as_bytes())
}

/// One participant's generated data.
#[derive(Debug, Clone, PartialEq)]
pub struct Participant {
    pub persona: Persona,
    pub data: LabeledLog,
    pub truth: ConflictGroundTruth,
}

pub fn generate_participant(persona: &Persona, world: &World, days: u32, seed: u64) -> Result<Participant> {
    let clean = generate_log(persona, world, days, derive_seed(seed, &format!("{}/log", persona.id)))?;
    let (log, truth) = if persona.mistake_rate > 0.0 {
        inject_conflicts(&clean, persona, world, derive_seed(seed, &format!("{}/mistakes", persona.id)))?
    } else {
        let gt = ConflictGroundTruth::untouched(&clean);
        (clean, gt)
    };
    let data = LabeledLog::from_ground_truth(log, &truth)?;
    Ok(Participant {
        persona: persona.clone(),
        data,
        truth,
    })
}

pub fn generate_all(personas: &[Persona], world: &World, days: u32, seed: u64) -> Result<Vec<Participant>> {
    personas
        .iter()
        .map(|p| generate_participant(p, world, days, seed))
        .collect()
}

/// Training settings for a whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPlan {
    pub hyper: Hyper,
    /// Epoch cap for pooled pretraining; fine-tuning uses `hyper.max_epochs`.
    pub pretrain_epochs: usize,
    pub seed: u64,
    pub ratios: SplitRatios,
}

impl Default for TrainPlan {
    fn default() -> Self {
        TrainPlan {
            hyper: Hyper::default(),
            pretrain_epochs: 10,
            seed: 7,
            ratios: SplitRatios::default(),
        }
    }
}

pub type AgentSet = BTreeMap<AgentKind, Agent>;
pub type ReportSet = BTreeMap<AgentKind, TrainReport>;

impl TrainPlan {
    pub fn split(&self, log: &EncodedLog) -> Result<Split> {
        split_ranges(log.len(), self.ratios)
    }

    fn pretrain_hyper(&self) -> Hyper {
        Hyper {
            max_epochs: self.pretrain_epochs,
            ..self.hyper.clone()
        }
    }

    /// Trains base agents of the given kinds on the pooled training splits
    /// of every participant.
    pub fn pretrain(&self, encoder: &Encoder, logs: &[EncodedLog], kinds: &[AgentKind]) -> Result<(AgentSet, ReportSet)> {
        let hyper = self.pretrain_hyper();
        let mut agents = AgentSet::new();
        let mut reports = ReportSet::new();
        for &kind in kinds {
            let w = kind.window(&hyper);
            let mut train = Dataset::default();
            let mut val = Dataset::default();
            for log in logs {
                let s = self.split(log)?;
                train.extend(Dataset::range(log, s.train, w));
                val.extend(Dataset::range(log, s.val, w));
            }
            let spec = TrainSpec {
                kind,
                hyper: hyper.clone(),
                seed: derive_seed(self.seed, &format!("{BASE_PARTICIPANT}/{kind}")),
                participant: BASE_PARTICIPANT.to_string(),
                fingerprint: encoder.world().fingerprint().to_string(),
                horizon_days: encoder.horizon_days(),
                base_dim: encoder.layout().base_dim,
            };
            let (agent, report) = train_agent(&spec, &train, &val)?;
            agents.insert(kind, agent);
            reports.insert(kind, report);
        }
        Ok((agents, reports))
    }

    /// Fine-tunes every base agent on one participant's training split.
    pub fn personalize(&self, base: &AgentSet, log: &EncodedLog) -> Result<(AgentSet, ReportSet)> {
        let s = self.split(log)?;
        let mut agents = AgentSet::new();
        let mut reports = ReportSet::new();
        for (&kind, agent) in base {
            let w = kind.window(&self.hyper);
            let train = Dataset::range(log, s.train.clone(), w);
            let val = Dataset::range(log, s.val.clone(), w);
            let seed = derive_seed(self.seed, &format!("{}/{kind}", log.participant));
            let (tuned, report) = finetune(agent, &train, &val, &self.hyper, seed, &log.participant)?;
            agents.insert(kind, tuned);
            reports.insert(kind, report);
        }
        Ok((agents, reports))
    }
}

/// Assembles a complete set of agents into a suite.
pub fn assemble(mut agents: AgentSet, intentions: IntentionSet, schedule: Schedule) -> Result<AgentSuite> {
    let mut take = |k: AgentKind| {
        agents
            .remove(&k)
            .ok_or_else(|| Error::NotFound(format!("{k} agent")))
    };
    Ok(AgentSuite {
        participant: intentions.participant.clone(),
        action: take(AgentKind::Action)?,
        duration: take(AgentKind::Duration)?,
        short: take(AgentKind::ShortIntention)?,
        long: take(AgentKind::LongIntention)?,
        baseline: take(AgentKind::Baseline)?,
        intentions,
        schedule,
    })
}
