//! Interest matching and the two-stage retrieve-then-rank pipeline.
//!
//! A user's interest vector is the (optionally recency-weighted) mean of
//! the fused vectors of their positively-labeled videos. The matching
//! score against a video is the logistic sigmoid of the dot product, read
//! as a probability of interest. Retrieval selects candidates by cosine
//! similarity so it is independent of vector magnitude; ranking then
//! scores the candidates, optionally through a privatizing mechanism, and
//! keeps the top k. Ties break by ascending video id everywhere, which
//! makes every operation deterministic.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dp_noise::Privatizer;
use crate::error::{Error, Result};
use crate::feature_store::Catalog;
use crate::fusion::{self, FusedVector, FusionWeights};

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity, defined as 0 when either vector has zero norm (or
/// the computation is not finite).
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let c = dot(a, b) / (na * nb);
    if c.is_finite() {
        c
    } else {
        0.0
    }
}

/// A user's (or group's) position in the shared embedding space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterestVector {
    pub owner_id: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub video_id: String,
    /// Display score, clamped to [0, 1]. Ordering is decided by the raw
    /// (possibly noisy) score before clamping.
    pub score: f64,
}

/// A recommendation list with non-increasing scores and unique video ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    entries: Vec<RankedEntry>,
}

impl RankedList {
    /// Build from entries already sorted best-first by raw score (ties by
    /// ascending id). Scores are clamped to [0, 1] for display.
    pub(crate) fn from_sorted_raw(entries: Vec<(String, f64)>) -> Self {
        let entries = entries
            .into_iter()
            .map(|(video_id, raw)| RankedEntry {
                video_id,
                score: raw.clamp(0.0, 1.0),
            })
            .collect();
        RankedList { entries }
    }

    pub fn empty() -> Self {
        RankedList { entries: Vec::new() }
    }

    pub fn entries(&self) -> &[RankedEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn video_ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.video_id.as_str()).collect()
    }

    /// Check the list invariants; used by tests and debug assertions.
    pub fn check_invariants(&self) -> bool {
        let mut seen = BTreeSet::new();
        let mut previous = f64::INFINITY;
        for e in &self.entries {
            if !(0.0..=1.0).contains(&e.score) || e.score > previous {
                return false;
            }
            if !seen.insert(e.video_id.as_str()) {
                return false;
            }
            previous = e.score;
        }
        true
    }

    /// Emit `rank,video_id,score` CSV with six decimal places.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["rank", "video_id", "score"])?;
        for (i, e) in self.entries.iter().enumerate() {
            csv.write_record([
                (i + 1).to_string(),
                e.video_id.clone(),
                format!("{:.6}", e.score),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Exponentially recency-weighted mean of the fused vectors the user
/// engaged with positively; the zero vector if there are none.
///
/// Each positive event contributes once, weighted by
/// `0.5^((t_max - t) / half_life)`; `half_life = None` means a plain mean.
pub fn build_user_vector(
    user_id: &str,
    catalog: &Catalog,
    weights: &FusionWeights,
    half_life: Option<f64>,
) -> Result<InterestVector> {
    if !catalog.contains_user(user_id) {
        return Err(Error::UnknownUser(user_id.to_string()));
    }
    let d = catalog.dim().unwrap_or(0);
    let positives: Vec<_> = catalog
        .user_interactions(user_id)
        .filter(|ev| ev.is_positive())
        .collect();
    if positives.is_empty() {
        return Ok(InterestVector {
            owner_id: user_id.to_string(),
            values: vec![0.0; d],
        });
    }
    let t_max = positives.iter().map(|ev| ev.timestamp).max().unwrap();
    let mut values = vec![0.0; d];
    let mut total_weight = 0.0;
    for ev in positives {
        let video = catalog
            .video(&ev.video_id)
            .ok_or_else(|| Error::UnknownVideo(ev.video_id.clone()))?;
        let weight = match half_life {
            Some(h) if h > 0.0 && h.is_finite() => {
                 0.5f64.powf((t_max - ev.timestamp) as f64 / h)
            }
            _ => 1.0,
        };
        let fused = fusion::fuse(weights, video);
        for (acc, x) in values.iter_mut().zip(fused.values.iter()) {
            *acc += weight * x;
        }
        total_weight += weight;
    }
    for x in &mut values {
        *x /= total_weight;
    }
    Ok(InterestVector {
        owner_id: user_id.to_string(),
        values,
    })
}

/// Sigmoid of the user-video dot product: the probability of interest.
pub fn match_score(u: &InterestVector, v: &FusedVector) -> Result<f64> {
    if u.values.len() != v.values.len() {
        return Err(Error::DimensionMismatch {
            left: u.values.len(),
            right: v.values.len(),
        });
    }
    Ok(sigmoid(dot(&u.values, &v.values)))
}

/// The `m` videos most cosine-similar to the user vector (the whole
/// catalog when it is smaller). Ties break by ascending video id.
pub fn retrieve_candidates(
    u: &InterestVector,
    catalog: &Catalog,
    weights: &FusionWeights,
    m: usize,
) -> BTreeSet<String> {
    let fused = fusion::fuse_catalog(catalog, weights);
    retrieve_candidates_fused(&u.values, &fused, m)
}

/// Retrieval over already-fused vectors.
pub fn retrieve_candidates_fused(u: &[f64], videos: &[FusedVector], m: usize) -> BTreeSet<String> {
    let mut scored: Vec<(f64, &str)> = videos
        .iter()
        .map(|v| (cosine(u, &v.values), v.video_id.as_str()))
        .collect();
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.cmp(b.1))
    });
    scored
        .into_iter()
        .take(m)
        .map(|(_, id)| id.to_string())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
struct HeapItem {
    raw: f64,
    video_id: String,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    // Greater means "ranks better": higher raw score, then smaller id.
    fn cmp(&self, other: &Self) -> Ordering {
        self.raw
            .total_cmp(&other.raw)
            .then_with(|| other.video_id.cmp(&self.video_id))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Rank candidates by (optionally privatized) matching score and keep the
/// top `k`, equal to sorting everything and truncating. Candidate scores
/// are computed, and noise drawn, in ascending-id order.
pub fn rank_top_k(
    u: &InterestVector,
    candidates: &BTreeSet<String>,
    catalog: &Catalog,
    weights: &FusionWeights,
    k: usize,
    privatizer: Option<&mut dyn Privatizer>,
) -> Result<RankedList> {
    let mut fused = Vec::with_capacity(candidates.len());
    for id in candidates {
        let video = catalog
            .video(id)
            .ok_or_else(|| Error::UnknownVideo(id.clone()))?;
        fused.push(fusion::fuse(weights, video));
    }
    let refs: Vec<(&str, &[f64])> = fused
        .iter()
        .map(|v| (v.video_id.as_str(), v.values.as_slice()))
        .collect();
    rank_top_k_fused(&u.values, &refs, k, privatizer)
}

/// Ranking over already-fused candidate vectors, which must be sorted by
/// ascending video id (noise draws follow that order).
pub fn rank_top_k_fused(
    u: &[f64],
    candidates: &[(&str, &[f64])],
    k: usize,
    privatizer: Option<&mut dyn Privatizer>,
) -> Result<RankedList> {
    debug_assert!(candidates.windows(2).all(|w| w[0].0 < w[1].0));
    let mut scores = Vec::with_capacity(candidates.len());
    for (_, values) in candidates {
        if values.len() != u.len() {
            return Err(Error::DimensionMismatch {
                left: u.len(),
                right: values.len(),
            });
        }
        scores.push(sigmoid(dot(u, values)));
    }
    let scores = match privatizer {
        Some(p) => p.apply(&scores)?,
        None => scores,
    };

    // Partial selection: a min-heap of the k best seen so far.
    let mut heap: std::collections::BinaryHeap<std::cmp::Reverse<HeapItem>> =
        std::collections::BinaryHeap::with_capacity(k + 1);
    for ((id, _), raw) in candidates.iter().zip(scores.into_iter()) {
        let item = HeapItem {
            raw,
            video_id: (*id).to_string(),
        };
        if heap.len() < k {
            heap.push(std::cmp::Reverse(item));
        } else if let Some(worst) = heap.peek() {
            if item > worst.0 {
                heap.pop();
                heap.push(std::cmp::Reverse(item));
            }
        }
    }
    let mut kept: Vec<HeapItem> = heap.into_iter().map(|r| r.0).collect();
    kept.sort_by(|a, b| b.cmp(a));
    Ok(RankedList::from_sorted_raw(
        kept.into_iter().map(|i| (i.video_id, i.raw)).collect(),
    ))
}
