//! Built-in personas: eight participants with varied habits and noise levels,
//! plus one perfectly regular persona for learnability checks.
//!
//! Every persona draws its recipes from one shared activity library, so an
//! intention text always maps to the same sequence of steps.

use crate::persona::{Persona, RecipeStep, RoutineEntry};

pub fn step(action: &str, object: &str, duration: u32, room: &str) -> RecipeStep {
    RecipeStep {
        action: action.to_string(),
        object: object.to_string(),
        duration,
        room: room.to_string(),
        post: None,
    }
}

type Step = (&'static str, &'static str, u32, &'static str);

const LR: &str = "living room";
const KI: &str = "kitchen";
const BA: &str = "bathroom";
const BE: &str = "bedroom";
const ST: &str = "study";
const HA: &str = "hall";

#[rustfmt::skip]
const LIBRARY: &[(&str, &[Step])] = &[
    ("get out of bed", &[("turn_off", "alarm_clock", 2, BE), ("stand", "bed", 3, BE)]),
    ("brush teeth", &[("brush", "toothbrush", 4, BA), ("wash", "toothbrush", 1, BA)]),
    ("take a shower", &[("undress", "clothes", 3, BA), ("turn_on", "shower", 12, BA), ("turn_off", "shower", 1, BA), ("grab", "towel", 4, BA)]),
    ("get dressed", &[("open", "wardrobe", 2, BE), ("dress", "clothes", 8, BE), ("close", "wardrobe", 1, BE)]),
    ("make breakfast", &[("grab", "bread", 2, KI), ("cook", "stove", 12, KI), ("eat", "bread", 15, KI)]),
    ("brew morning coffee", &[("turn_on", "coffee_maker", 5, KI), ("pour", "coffee", 2, KI), ("drink", "cup", 10, KI)]),
    ("take medicine", &[("grab", "medicine", 1, BA), ("eat", "medicine", 1, BA)]),
    ("work on laptop", &[("sit", "desk", 3, ST), ("use", "laptop", 150, ST), ("turn_off", "laptop", 1, ST)]),
    ("answer emails", &[("turn_on", "laptop", 2, ST), ("write", "laptop", 30, ST)]),
    ("study for exams", &[("turn_on", "desk_lamp", 1, ST), ("read", "notebook", 60, ST), ("write", "notebook", 30, ST)]),
    ("cook lunch", &[("turn_on", "oven", 30, KI), ("turn_off", "oven", 1, KI), ("eat", "plate", 20, KI)]),
    ("cook dinner", &[("open", "fridge", 2, KI), ("cook", "stove", 35, KI), ("eat", "plate", 25, KI)]),
    ("warm up leftovers", &[("turn_on", "microwave", 4, KI), ("eat", "plate", 15, KI)]),
    ("wash the dishes", &[("turn_on", "sink", 10, KI), ("wash", "plate", 5, KI), ("turn_off", "sink", 1, KI)]),
    ("have a snack", &[("grab", "apple", 1, KI), ("eat", "apple", 5, KI)]),
    ("brew some tea", &[("turn_on", "kettle", 4, KI), ("pour", "tea", 2, KI), ("drink", "tea", 12, KI)]),
    ("drink a glass of milk", &[("pour", "milk", 1, KI), ("drink", "cup", 3, KI)]),
    ("water the plants", &[("grab", "cup", 1, KI), ("pour", "plant", 6, LR)]),
    ("watch the news", &[("sit", "sofa", 2, LR), ("watch", "tv", 30, LR), ("turn_off", "tv", 1, LR)]),
    ("play video games", &[("turn_on", "game_console", 2, LR), ("play", "game_console", 60, LR)]),
    ("phone my family", &[("grab", "phone", 1, LR), ("call", "phone", 20, LR)]),
    ("read a novel", &[("grab", "book", 2, ST), ("read", "book", 40, LR)]),
    ("write in journal", &[("turn_on", "desk_lamp", 1, ST), ("write", "notebook", 20, ST), ("turn_off", "desk_lamp", 1, ST)]),
    ("do the laundry", &[("grab", "clothes", 3, BE), ("turn_on", "washing_machine", 50, BA), ("put", "clothes", 4, BE)]),
    ("clean the house", &[("clean", "sofa", 20, LR), ("clean", "toilet", 15, BA)]),
    ("go for a jog", &[("dress", "shoes", 2, HA), ("open", "front_door", 1, HA), ("walk_to", "none", 45, HA)]),
    ("go to sleep", &[("undress", "clothes", 3, BE), ("lie", "bed", 5, BE), ("sleep", "bed", 420, BE)]),
];

/// Recipe of a library activity. Panics on an unknown name, which can only
/// come from a typo in the tables below.
pub fn recipe(intention: &str) -> Vec<RecipeStep> {
    let (_, steps) = LIBRARY
        .iter()
        .find(|(name, _)| *name == intention)
        .unwrap_or_else(|| panic!("no library activity named {intention:?}"));
    steps
        .iter()
        .map(|&(a, o, d, r)| step(a, o, d, r))
        .collect()
}

/// Every intention text in the activity library.
pub fn library_intentions() -> Vec<&'static str> {
    LIBRARY.iter().map(|(name, _)| *name).collect()
}

fn days(spec: &str) -> Vec<u8> {
    match spec {
        "daily" => (0..7).collect(),
        "weekdays" => (0..5).collect(),
        "weekend" => vec![5, 6],
        list => list
            .split(',')
            .map(|d| match d {
                "Mo" => 0,
                "Tu" => 1,
                "We" => 2,
                "Th" => 3,
                "Fr" => 4,
                "Sa" => 5,
                "Su" => 6,
                other => panic!("bad weekday {other:?}"),
            })
            .collect(),
    }
}

fn minute(hhmm: &str) -> u32 {
    let (h, m) = hhmm.split_once(':').expect("HH:MM");
    h.parse::<u32>().expect("hour") * 60 + m.parse::<u32>().expect("minute")
}

fn build(id: &str, jitter: f64, mistakes: f64, table: &[(&str, &str, &str)]) -> Persona {
    Persona {
        id: id.to_string(),
        routine: table
            .iter()
            .map(|&(d, t, intention)| RoutineEntry {
                weekdays: days(d),
                nominal_start: minute(t),
                intention: intention.to_string(),
                recipe: recipe(intention),
            })
            .collect(),
        mistake_rate: mistakes,
        jitter_sigma_min: jitter,
    }
}

/// The eight standard participants `P01`..`P08`.
#[rustfmt::skip]
pub fn standard_personas() -> Vec<Persona> {
    vec![
        build("P01", 5.0, 0.10, &[
            ("daily", "06:30", "get out of bed"),
            ("daily", "06:40", "brush teeth"),
            ("daily", "07:00", "make breakfast"),
            ("weekdays", "08:00", "work on laptop"),
            ("weekdays", "12:30", "cook lunch"),
            ("Mo,We,Fr", "16:00", "have a snack"),
            ("Tu,Th", "16:00", "brew some tea"),
            ("weekdays", "18:30", "cook dinner"),
            ("Mo,Tu,We,Th", "20:00", "watch the news"),
            ("Fr,Sa", "20:00", "play video games"),
            ("Sa", "09:00", "go for a jog"),
            ("Sa", "11:00", "clean the house"),
            ("Su", "10:00", "do the laundry"),
            ("weekend", "13:00", "warm up leftovers"),
            ("Su", "16:00", "phone my family"),
            ("weekend", "18:30", "wash the dishes"),
            ("Su", "20:00", "read a novel"),
            ("Mo,We", "21:30", "write in journal"),
            ("daily", "22:30", "go to sleep"),
        ]),
        build("P02", 10.0, 0.10, &[
            ("daily", "07:00", "get out of bed"),
            ("daily", "07:10", "take a shower"),
            ("daily", "07:35", "get dressed"),
            ("weekdays", "07:50", "brew morning coffee"),
            ("weekend", "09:00", "make breakfast"),
            ("weekdays", "09:00", "answer emails"),
            ("weekdays", "10:00", "study for exams"),
            ("weekdays", "13:00", "warm up leftovers"),
            ("Mo,We,Fr", "15:00", "go for a jog"),
            ("Tu,Th", "15:00", "read a novel"),
            ("Sa", "11:00", "do the laundry"),
            ("Su", "11:00", "clean the house"),
            ("weekend", "14:00", "play video games"),
            ("daily", "19:00", "cook dinner"),
            ("daily", "20:05", "wash the dishes"),
            ("Tu,Fr,Su", "21:00", "phone my family"),
            ("daily", "22:00", "brush teeth"),
            ("daily", "23:00", "go to sleep"),
        ]),
        build("P03", 15.0, 0.15, &[
            ("daily", "06:00", "get out of bed"),
            ("daily", "06:10", "take medicine"),
            ("daily", "06:20", "brew some tea"),
            ("daily", "07:00", "make breakfast"),
            ("Mo,We,Fr", "09:00", "water the plants"),
            ("Tu,Th,Sa", "09:00", "go for a jog"),
            ("Mo,Th", "10:30", "clean the house"),
            ("We", "10:30", "do the laundry"),
            ("daily", "12:00", "cook lunch"),
            ("daily", "14:00", "read a novel"),
            ("daily", "16:00", "drink a glass of milk"),
            ("Mo,Tu,We,Th,Fr,Sa", "17:00", "phone my family"),
            ("daily", "18:00", "warm up leftovers"),
            ("daily", "19:00", "watch the news"),
            ("Su", "10:00", "write in journal"),
            ("daily", "20:00", "take medicine"),
            ("daily", "21:00", "go to sleep"),
        ]),
        build("P04", 0.0, 0.05, &[
            ("daily", "07:30", "get out of bed"),
            ("daily", "07:40", "brush teeth"),
            ("weekdays", "07:50", "get dressed"),
            ("weekdays", "08:05", "brew morning coffee"),
            ("weekdays", "09:00", "work on laptop"),
            ("weekdays", "12:00", "have a snack"),
            ("weekdays", "13:00", "answer emails"),
            ("Mo,We", "17:30", "go for a jog"),
            ("Tu,Th,Fr", "17:30", "play video games"),
            ("weekend", "10:00", "make breakfast"),
            ("Sa", "11:30", "clean the house"),
            ("Su", "11:30", "do the laundry"),
            ("weekend", "15:00", "read a novel"),
            ("daily", "19:00", "cook dinner"),
            ("daily", "20:30", "wash the dishes"),
            ("weekend", "21:00", "watch the news"),
            ("daily", "23:30", "go to sleep"),
        ]),
        build("P05", 8.0, 0.12, &[
            ("daily", "05:45", "get out of bed"),
            ("daily", "06:00", "go for a jog"),
            ("daily", "07:00", "take a shower"),
            ("daily", "07:30", "drink a glass of milk"),
            ("weekdays", "08:00", "study for exams"),
            ("weekdays", "11:00", "answer emails"),
            ("daily", "12:30", "cook lunch"),
            ("Mo,Tu,We", "15:00", "water the plants"),
            ("Th,Fr", "15:00", "brew some tea"),
            ("weekend", "10:00", "do the laundry"),
            ("weekend", "15:00", "phone my family"),
            ("daily", "18:00", "cook dinner"),
            ("Mo,We,Fr,Su", "20:00", "write in journal"),
            ("Tu,Th,Sa", "20:00", "read a novel"),
            ("daily", "21:30", "brush teeth"),
            ("daily", "22:00", "go to sleep"),
        ]),
        build("P06", 12.0, 0.08, &[
            ("daily", "08:00", "get out of bed"),
            ("daily", "08:10", "brew morning coffee"),
            ("weekdays", "08:45", "take a shower"),
            ("weekdays", "09:30", "work on laptop"),
            ("weekdays", "12:30", "warm up leftovers"),
            ("Mo,Tu,We,Th", "14:00", "answer emails"),
            ("Fr", "14:00", "clean the house"),
            ("weekend", "11:00", "make breakfast"),
            ("weekend", "13:00", "play video games"),
            ("Sa", "16:00", "do the laundry"),
            ("Su", "16:00", "water the plants"),
            ("daily", "18:00", "have a snack"),
            ("daily", "19:30", "cook dinner"),
            ("Mo,We,Fr", "21:00", "watch the news"),
            ("Tu,Th,Sa,Su", "21:00", "phone my family"),
            ("daily", "23:30", "take medicine"),
            ("daily", "23:45", "go to sleep"),
        ]),
        build("P07", 20.0, 0.10, &[
            ("daily", "07:00", "get out of bed"),
            ("daily", "07:15", "brush teeth"),
            ("daily", "07:30", "make breakfast"),
            ("weekdays", "09:00", "study for exams"),
            ("weekdays", "13:00", "cook lunch"),
            ("weekdays", "15:00", "answer emails"),
            ("weekend", "10:00", "go for a jog"),
            ("weekend", "12:00", "warm up leftovers"),
            ("Sa", "14:00", "clean the house"),
            ("Su", "14:00", "phone my family"),
            ("daily", "18:00", "cook dinner"),
            ("daily", "19:30", "play video games"),
            ("daily", "23:00", "go to sleep"),
        ]),
        build("P08", 20.0, 0.15, &[
            ("daily", "06:30", "get out of bed"),
            ("daily", "06:40", "take a shower"),
            ("daily", "07:05", "get dressed"),
            ("daily", "07:30", "brew some tea"),
            ("weekdays", "08:30", "work on laptop"),
            ("weekdays", "12:00", "have a snack"),
            ("weekdays", "13:00", "study for exams"),
            ("weekend", "10:00", "water the plants"),
            ("weekend", "11:00", "read a novel"),
            ("daily", "17:00", "drink a glass of milk"),
            ("daily", "18:30", "cook dinner"),
            ("daily", "19:45", "wash the dishes"),
            ("Mo,Th", "20:30", "do the laundry"),
            ("Tu,Fr,Su", "20:30", "watch the news"),
            ("We,Sa", "20:30", "write in journal"),
            ("daily", "22:30", "go to sleep"),
        ]),
    ]
}

/// A persona with no jitter and no mistakes: its week is a fixed cycle.
#[rustfmt::skip]
pub fn steady_persona() -> Persona {
    build("S01", 0.0, 0.0, &[
        ("daily", "07:00", "get out of bed"),
        ("daily", "07:10", "brush teeth"),
        ("daily", "08:00", "make breakfast"),
        ("weekdays", "09:00", "work on laptop"),
        ("weekend", "10:00", "go for a jog"),
        ("daily", "12:30", "cook lunch"),
        ("daily", "18:30", "cook dinner"),
        ("weekdays", "20:00", "watch the news"),
        ("weekend", "20:00", "read a novel"),
        ("daily", "22:30", "go to sleep"),
    ])
}
