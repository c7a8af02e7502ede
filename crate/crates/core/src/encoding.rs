//! Feature extraction: observations become fixed-layout numeric rows, and
//! intention text becomes a deterministic 64-dimensional unit vector.
//!
//! Row layout (offsets for the 40-object catalog, `B = 6` object bits):
//!
//! | field          | offset | width |
//! |----------------|--------|-------|
//! | time_of_day    | 0      | 1     |
//! | date_index     | 1      | 1     |
//! | weekday        | 2      | 7     |
//! | action         | 9      | 5     |
//! | object         | 14     | B     |
//! | room           | 14+B   | 3     |
//! | duration       | 17+B   | 1     |
//! | post_state     | 18+B   | 8     |
//! | intention      | 26+B   | 64 (optional) |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{Observation, ObservationLog, Timestamp, World, MAX_STATES};

pub const EMBED_DIM: usize = 64;
pub const ACTION_BITS: usize = 5;
pub const ROOM_BITS: usize = 3;
pub const DURATION_CAP_MIN: f64 = 480.0;
/// time of day, date index, weekday one-hot
pub const TIME_FEATURES: usize = 9;

const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0100_0000_01b3;

/// Big-endian fixed-width base-2 code of `index`.
pub fn binary_code(index: usize, width: usize) -> Result<Vec<u8>> {
    if width == 0 || width >= usize::BITS as usize || index >= (1usize << width) {
        return Err(Error::Encoding(format!(
            "index {index} does not fit in {width} bits"
        )));
    }
    Ok((0..width)
        .rev()
        .map(|bit| ((index >> bit) & 1) as u8)
        .collect())
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET_BASIS, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Lowercase, trim and collapse internal whitespace.
pub fn normalize_text(text: &str) -> String {
    text.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Unit-norm embedding of an intention label (zero for empty text).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentionEmbedding(pub Vec<f64>);

impl IntentionEmbedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    /// Rescales to unit length; zero stays zero.
    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.0.iter_mut().for_each(|x| *x /= n);
        }
        self
    }

    /// Cosine similarity; 0 when either side is the zero vector.
    pub fn cosine(&self, other: &IntentionEmbedding) -> f64 {
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        let n = self.norm() * other.norm();
        if n == 0.0 {
            0.0
        } else {
            dot / n
        }
    }
}

/// Hashed character-trigram embedding: each trigram of `#text#` adds ±1 to
/// bucket `fnv1a(trigram) mod 64`, the sign taken from the hash's top bit.
pub fn embed_intention(text: &str) -> IntentionEmbedding {
    let norm = normalize_text(text);
    let mut v = vec![0.0; EMBED_DIM];
    if norm.is_empty() {
        return IntentionEmbedding(v);
    }
    let chars: Vec<char> = std::iter::once('#')
        .chain(norm.chars())
        .chain(std::iter::once('#'))
        .collect();
    let mut buf = [0u8; 12];
    for tri in chars.windows(3) {
        let mut len = 0;
        for c in tri {
            len += c.encode_utf8(&mut buf[len..]).len();
        }
        let h = fnv1a64(&buf[..len]);
        let bucket = (h % EMBED_DIM as u64) as usize;
        v[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
    }
    IntentionEmbedding(v).normalized()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    pub offset: usize,
    pub width: usize,
}

/// Column layout of feature rows, written next to datasets as `layout.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub v: u32,
    pub fingerprint: String,
    pub object_bits: usize,
    /// Width without the intention block.
    pub base_dim: usize,
    pub fields: Vec<Field>,
}

impl Layout {
    pub fn for_world(world: &World) -> Layout {
        let object_bits = object_bits(world.num_objects());
        let widths = [
            ("time_of_day", 1),
            ("date_index", 1),
            ("weekday", 7),
            ("action", ACTION_BITS),
            ("object", object_bits),
            ("room", ROOM_BITS),
            ("duration", 1),
            ("post_state", MAX_STATES),
            ("intention", EMBED_DIM),
        ];
        let mut offset = 0;
        let fields: Vec<Field> = widths
            .iter()
            .map(|&(name, width)| {
                let f = Field {
                    name: name.to_string(),
                    offset,
                    width,
                };
                offset += width;
                f
            })
            .collect();
        Layout {
            v: 1,
            fingerprint: world.fingerprint().to_string(),
            object_bits,
            base_dim: offset - EMBED_DIM,
            fields,
        }
    }

    pub fn dim(&self, with_intention: bool) -> usize {
        self.base_dim + if with_intention { EMBED_DIM } else { 0 }
    }

    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }
}

/// `⌈log2(n + 1)⌉`: enough bits for `n` objects plus the pseudo-object.
pub fn object_bits(n_objects: usize) -> usize {
    let mut bits = 1;
    while (1usize << bits) < n_objects + 1 {
        bits += 1;
    }
    bits
}

/// Encodes observations of one world over a horizon of `horizon_days`.
#[derive(Debug, Clone)]
pub struct Encoder {
    world: World,
    layout: Layout,
    horizon_days: u32,
}

/// What a window predicts: the event right after it.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub action: usize,
    pub duration_min: i64,
    pub intention: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub input: Vec<Vec<f64>>,
    pub query: Vec<f64>,
    pub target: Target,
}

impl Encoder {
    pub fn new(world: World, horizon_days: u32) -> Encoder {
        let layout = Layout::for_world(&world);
        Encoder {
            world,
            layout,
            horizon_days: horizon_days.max(1),
        }
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn horizon_days(&self) -> u32 {
        self.horizon_days
    }

    fn date_index(&self, date: chrono::NaiveDate) -> f64 {
        let offset = (date - self.world.config().horizon_start).num_days() as f64;
        (offset / self.horizon_days as f64).clamp(0.0, 1.0)
    }

    /// Time-of-day, date index and weekday one-hot for an instant.
    pub fn time_features(&self, ts: Timestamp) -> Vec<f64> {
        let mut row = vec![0.0; TIME_FEATURES];
        self.write_time(&mut row, ts);
        row
    }

    fn write_time(&self, row: &mut [f64], ts: Timestamp) {
        row[0] = ts.minute as f64 / 1440.0;
        row[1] = self.date_index(ts.date);
        row[2 + ts.weekday() as usize] = 1.0;
    }

    pub fn action_code(&self, action: &str) -> Result<Vec<u8>> {
        let idx = self
            .world
            .action_index(action)
            .ok_or_else(|| Error::Encoding(format!("unregistered action '{action}'")))?;
        binary_code(idx, ACTION_BITS)
    }

    pub fn encode(&self, obs: &Observation, with_intention: bool) -> Result<Vec<f64>> {
        let w = &self.world;
        let unknown = |what: &str, v: &str| Error::Encoding(format!("unregistered {what} '{v}'"));
        let action = w.action_index(&obs.action).ok_or_else(|| unknown("action", &obs.action))?;
        let object = w.object_index(&obs.object_id).ok_or_else(|| unknown("object", &obs.object_id))?;
        let room = w.room_index(&obs.room).ok_or_else(|| unknown("room", &obs.room))?;
        if obs.post_state.state >= MAX_STATES {
            return Err(Error::Encoding(format!("state index {} >= {MAX_STATES}", obs.post_state.state)));
        }
        let mut row = vec![0.0; self.layout.dim(with_intention)];
        self.write_time(&mut row, obs.start());
        let mut at = TIME_FEATURES;
        for (code, width) in [(action, ACTION_BITS), (object, self.layout.object_bits), (room, ROOM_BITS)] {
            for (i, bit) in binary_code(code, width)?.into_iter().enumerate() {
                row[at + i] = bit as f64;
            }
            at += width;
        }
        row[at] = (obs.duration_min.max(0) as f64).min(DURATION_CAP_MIN) / DURATION_CAP_MIN;
        at += 1;
        row[at + obs.post_state.state] = 1.0;
        at += MAX_STATES;
        if with_intention {
            row[at..at + EMBED_DIM].copy_from_slice(embed_intention(&obs.intention).as_slice());
        }
        Ok(row)
    }

    pub fn encode_log(&self, log: &ObservationLog, with_intention: bool) -> Result<Vec<Vec<f64>>> {
        log.events.iter().map(|e| self.encode(e, with_intention)).collect()
    }

    /// Sliding windows of `window` events, stride 1: the first `window - 1`
    /// events are the input and the last is the target.
    pub fn build_sequences(
        &self,
        log: &ObservationLog,
        window: usize,
        with_intention: bool,
    ) -> Result<Vec<SequenceSample>> {
        if window < 2 {
            return Err(Error::Data(format!("window must be >= 2, got {window}")));
        }
        if log.len() < window {
            return Err(Error::Data(format!(
                "log has {} events, shorter than the window of {window}",
                log.len()
            )));
        }
        let rows = self.encode_log(log, with_intention)?;
        Ok((window - 1..log.len())
            .map(|t| {
                let ev = &log.events[t];
                SequenceSample {
                    input: rows[t + 1 - window..t].to_vec(),
                    query: self.time_features(ev.start()),
                    target: Target {
                        action: self.world.action_index(&ev.action).expect("encoded above"),
                        duration_min: ev.duration_min,
                        intention: ev.intention.clone(),
                    },
                }
            })
            .collect())
    }
}
