//! Brute-force metric and embedding references.

/// `|pred − gt| / (gt + eps)` for non-negative ground truth.
pub fn relative_error(pred: f64, gt: f64, eps: f64) -> f64 {
    let diff = if pred > gt { pred - gt } else { gt - pred };
    diff / (gt + eps).abs()
}

/// How many entries outrank entry `i`: a higher score, or an equal score at a
/// lower index.
pub fn outranked_by(scores: &[f64], i: usize) -> usize {
    let mut n = 0;
    for (j, &s) in scores.iter().enumerate() {
        if s > scores[i] || (s == scores[i] && j < i) {
            n += 1;
        }
    }
    n
}

/// Share of cases whose label lands in the top `k` of its score vector.
pub fn topk_accuracy(scores: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    assert_eq!(scores.len(), labels.len());
    let mut hits = 0;
    for (s, &l) in scores.iter().zip(labels) {
        if outranked_by(s, l) < k {
            hits += 1;
        }
    }
    hits as f64 / labels.len() as f64
}

fn fnv(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Lowercased, whitespace-collapsed form of `text`.
pub fn normalize(text: &str) -> String {
    let lower = text.to_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    words.join(" ")
}

/// 64-bucket signed trigram hashing of `#text#`, scaled to unit length.
pub fn embed(text: &str) -> Vec<f64> {
    let padded = format!("#{}#", normalize(text));
    let chars: Vec<char> = padded.chars().collect();
    let mut v = vec![0.0; 64];
    if chars.len() == 2 {
        return v;
    }
    for i in 0..chars.len() - 2 {
        let tri: String = chars[i..i + 3].iter().collect();
        let h = fnv(tri.as_bytes());
        let sign = if h & (1 << 63) == 0 { 1.0 } else { -1.0 };
        v[(h % 64) as usize] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Whether `gt` is among the `k` texts closest to `pred`, with equal
/// similarities ordered by text.
pub fn intention_topk(pred: &[f64], gt: &str, texts: &[String], k: usize) -> bool {
    let gt = normalize(gt);
    let mut unique: Vec<String> = texts.iter().map(|t| normalize(t)).collect();
    unique.sort();
    unique.dedup();
    assert!(unique.contains(&gt), "ground truth outside the set");
    let target = cosine(pred, &embed(&gt));
    let ahead = unique
        .iter()
        .filter(|t| {
            let s = cosine(pred, &embed(t));
            s > target || (s == target && **t < gt)
        })
        .count();
    ahead < k
}
