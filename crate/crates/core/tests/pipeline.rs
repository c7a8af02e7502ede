use std::path::PathBuf;

use intent_core::agents::LabeledLog;
use intent_core::conflict::{detect_oracle, evaluate_detector, DetectConfig};
use intent_core::persona::{load_personas, mine_schedule, IDLE_INTENTION};
use intent_core::pipeline::{derive_seed, generate_all};
use intent_core::world::World;

fn fixture_personas() -> Vec<intent_core::persona::Persona> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/personas.json");
    load_personas(&path).unwrap()
}

#[test]
fn oracle_detection_is_exact_on_every_fixture_persona() {
    let world = World::desk_scale();
    let every = DetectConfig {
        duration_gate: false,
        ..DetectConfig::default()
    };
    for p in generate_all(&fixture_personas(), &world, 28, 42).unwrap() {
        assert!(world.validate_log(&p.data.log).is_empty(), "{}", p.persona.id);
        let reports = detect_oracle(&p.data.log, &p.truth, &p.persona.schedule(), every).unwrap();
        let scores = evaluate_detector(&reports, &p.truth).unwrap();
        assert!(scores.true_positives > 0, "{}", p.persona.id);
        assert_eq!(scores.recall, Some(1.0), "{}", p.persona.id);
        assert_eq!(scores.false_positive_rate, Some(0.0), "{}", p.persona.id);

        // The gate can only suppress warnings.
        let gated = detect_oracle(&p.data.log, &p.truth, &p.persona.schedule(), DetectConfig::default()).unwrap();
        for (g, r) in gated.iter().zip(&reports) {
            assert!(g.r_conf <= r.r_conf);
        }
    }
}

#[test]
fn long_labels_point_at_the_upcoming_routine() {
    let world = World::desk_scale();
    for p in generate_all(&fixture_personas()[..3], &world, 7, 5).unwrap() {
        let labels = &p.data;
        let n = labels.log.len();
        let last_routine = (0..n).rev().find(|&i| p.truth.labels[i].expected_long_intention != IDLE_INTENTION);
        for i in 0..n {
            let expected = &p.truth.labels[i].expected_long_intention;
            let label = &labels.long_labels[i];
            if expected != IDLE_INTENTION {
                assert_eq!(label, expected);
            } else if last_routine.is_some_and(|r| i < r) {
                let next = (i..n).find(|&j| p.truth.labels[j].expected_long_intention != IDLE_INTENTION).unwrap();
                assert_eq!(label, &p.truth.labels[next].expected_long_intention);
            } else {
                assert_eq!(label, IDLE_INTENTION);
            }
        }
    }
}

#[test]
fn mined_schedules_label_recordings_like_the_timetable() {
    let world = World::desk_scale();
    let p = &generate_all(&fixture_personas()[3..4], &world, 21, 8).unwrap()[0];
    let mined = mine_schedule(&p.data.log, 60, 3);
    assert!(!mined.entries.is_empty());
    let labeled = LabeledLog::from_schedule(p.data.log.clone(), &mined);
    let agree = labeled
        .long_labels
        .iter()
        .zip(&p.data.long_labels)
        .filter(|(a, b)| a == b)
        .count();
    assert!(agree as f64 / labeled.long_labels.len() as f64 > 0.8, "{agree} of {}", labeled.long_labels.len());
}

#[test]
fn derived_seeds_are_stable_and_distinct() {
    assert_eq!(derive_seed(42, "P01/log"), derive_seed(42, "P01/log"));
    assert_ne!(derive_seed(42, "P01/log"), derive_seed(42, "P01/mistakes"));
    assert_ne!(derive_seed(42, "P01/log"), derive_seed(43, "P01/log"));
}
