//! Content, collaborative, hybrid, and group recommendation strategies.
//!
//! All four are neighborhood-style and operate on the catalog's implicit
//! binary feedback:
//!
//! - content: rank unliked videos by their best cosine similarity to any
//!   video the user engaged with positively;
//! - collaborative: Jaccard-similar users vote, weighted by similarity,
//!   on videos the target user has not touched;
//! - hybrid: blend the two signals after min-max normalizing each over
//!   the candidate union, optionally chaining in near-duplicates of
//!   selected videos;
//! - group: rank against the mean of the members' interest vectors,
//!   excluding only videos every member already liked.
//!
//! No strategy ever recommends a video the user (or the whole group)
//! already engaged with positively. Ties break by ascending video id.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_store::Catalog;
use crate::fusion::{self, FusionWeights};
use crate::scoring::{self, InterestVector, RankedList};

/// Behavioral similarity between two users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSimilarity {
    pub user_a: String,
    pub user_b: String,
    pub similarity: f64,
}

/// A group of users and their fused interest vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupProfile {
    pub member_ids: BTreeSet<String>,
    pub fused_interest: InterestVector,
}

/// Knobs for [`hybrid_recommend`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HybridConfig {
    /// CF share of the blended score; 0 is pure content, 1 is pure CF.
    pub blend: f64,
    /// Neighborhood size for the CF arm.
    pub neighbor_count: usize,
    /// Whether to chain content-similar videos onto selected ones.
    pub chaining: bool,
    /// Cosine threshold for chaining.
    pub chain_threshold: f64,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            blend: 0.5,
            neighbor_count: 10,
            chaining: false,
            chain_threshold: 0.95,
        }
    }
}

fn require_user(catalog: &Catalog, user_id: &str) -> Result<()> {
    if catalog.contains_user(user_id) {
        Ok(())
    } else {
        Err(Error::UnknownUser(user_id.to_string()))
    }
}

/// Jaccard similarity of the two users' positively-interacted video sets;
/// zero when either set is empty.
pub fn user_similarity(a: &str, b: &str, catalog: &Catalog) -> Result<f64> {
    require_user(catalog, a)?;
    require_user(catalog, b)?;
    let set_a: BTreeSet<String> = catalog.positive_video_ids(a).into_iter().collect();
    let set_b: BTreeSet<String> = catalog.positive_video_ids(b).into_iter().collect();
    if set_a.is_empty() || set_b.is_empty() {
        return Ok(0.0);
    }
    let intersection = set_a.intersection(&set_b).count();
    let union = set_a.union(&set_b).count();
    Ok(intersection as f64 / union as f64)
}

fn rank_and_truncate(mut scored: Vec<(String, f64)>, k: usize) -> RankedList {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    RankedList::from_sorted_raw(scored)
}

/// Content-based strategy: each unliked video scores by its maximum
/// cosine similarity to any of the user's positively-interacted videos.
/// A user with no positives gets an empty list.
pub fn content_recommend(
    user_id: &str,
    catalog: &Catalog,
    weights: &FusionWeights,
    k: usize,
) -> Result<RankedList> {
    require_user(catalog, user_id)?;
    let scored = content_scores(user_id, catalog, weights);
    Ok(rank_and_truncate(scored, k))
}

/// Raw (unclamped) content scores over the user's unliked videos.
fn content_scores(user_id: &str, catalog: &Catalog, weights: &FusionWeights) -> Vec<(String, f64)> {
    let positives: HashSet<String> = catalog.positive_video_ids(user_id).into_iter().collect();
    if positives.is_empty() {
        return Vec::new();
    }
    let fused = fusion::fuse_catalog(catalog, weights);
    let liked: Vec<&[f64]> = fused
        .iter()
        .filter(|v| positives.contains(&v.video_id))
        .map(|v| v.values.as_slice())
        .collect();
    fused
        .iter()
        .filter(|v| !positives.contains(&v.video_id))
        .map(|v| {
            let best = liked
                .iter()
                .map(|p| scoring::cosine(&v.values, p))
                .fold(f64::NEG_INFINITY, f64::max);
            (v.video_id.clone(), best)
        })
        .collect()
}

/// Similarity-weighted neighbor votes over videos the user has not
/// interacted with at all. Videos nobody in the neighborhood liked are
/// left out entirely.
pub fn cf_recommend(
    user_id: &str,
    catalog: &Catalog,
    k: usize,
    neighbor_count: usize,
) -> Result<RankedList> {
    require_user(catalog, user_id)?;
    if neighbor_count == 0 {
        return Err(Error::InvalidConfig(
            "neighbor_count must be at least 1".to_string(),
        ));
    }
    let (votes, weight_sum) = cf_votes(user_id, catalog, neighbor_count)?;
    let scored = votes
        .into_iter()
        // Display as the share of the neighborhood's total similarity;
        // a positive rescale, so the ranking is untouched.
        .map(|(id, vote)| (id, vote / weight_sum))
        .collect();
    Ok(rank_and_truncate(scored, k))
}

/// Raw neighbor votes (only videos with a positive vote) and the summed
/// similarity of the selected neighborhood.
fn cf_votes(
    user_id: &str,
    catalog: &Catalog,
    neighbor_count: usize,
) -> Result<(BTreeMap<String, f64>, f64)> {
    let mut similarities: Vec<UserSimilarity> = Vec::new();
    for other in catalog.users() {
        if other == user_id {
            continue;
        }
        let similarity = user_similarity(user_id, other, catalog)?;
        if similarity > 0.0 {
            similarities.push(UserSimilarity {
                user_a: user_id.to_string(),
                user_b: other.clone(),
                similarity,
            });
        }
    }
    similarities.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| a.user_b.cmp(&b.user_b))
    });
    similarities.truncate(neighbor_count);

    let seen: HashSet<String> = catalog.interacted_video_ids(user_id).into_iter().collect();
    let mut votes: BTreeMap<String, f64> = BTreeMap::new();
    for neighbor in &similarities {
        for video_id in catalog.positive_video_ids(&neighbor.user_b) {
            if !seen.contains(&video_id) {
                *votes.entry(video_id).or_insert(0.0) += neighbor.similarity;
            }
        }
    }
    let weight_sum: f64 = similarities.iter().map(|s| s.similarity).sum();
    Ok((votes, weight_sum.max(f64::MIN_POSITIVE)))
}

fn min_max_normalize(raw: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in raw.values() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    raw.iter()
        .map(|(id, &v)| {
            let normalized = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
            (id.clone(), normalized)
        })
        .collect()
}

/// Blend of normalized CF and content scores over the union of both
/// candidate sets. `blend` 0 and 1 delegate to the pure strategies so the
/// degenerate rankings match them exactly.
pub fn hybrid_recommend(
    user_id: &str,
    catalog: &Catalog,
    weights: &FusionWeights,
    k: usize,
    config: &HybridConfig,
) -> Result<RankedList> {
    require_user(catalog, user_id)?;
    if !(0.0..=1.0).contains(&config.blend) {
        return Err(Error::InvalidConfig(format!(
            "blend must lie in [0, 1], got {}",
            config.blend
        )));
    }
    if config.blend == 0.0 {
        return content_recommend(user_id, catalog, weights, k);
    }
    if config.blend == 1.0 {
        return cf_recommend(user_id, catalog, k, config.neighbor_count);
    }

    let (cf_raw, _) = cf_votes(user_id, catalog, config.neighbor_count)?;
    let content_raw: BTreeMap<String, f64> =
        content_scores(user_id, catalog, weights).into_iter().collect();

    let union: BTreeSet<String> = cf_raw.keys().chain(content_raw.keys()).cloned().collect();
    let with_defaults = |raw: &BTreeMap<String, f64>| -> BTreeMap<String, f64> {
        union
            .iter()
            .map(|id| (id.clone(), raw.get(id).copied().unwrap_or(0.0)))
            .collect()
    };
    let cf_norm = min_max_normalize(&with_defaults(&cf_raw));
    let content_norm = min_max_normalize(&with_defaults(&content_raw));

    let blended: Vec<(String, f64)> = union
        .iter()
        .map(|id| {
            let score =
                config.blend * cf_norm[id] + (1.0 - config.blend) * content_norm[id];
            (id.clone(), score)
        })
        .collect();
    let mut list = rank_and_truncate(blended, k);

    if config.chaining {
        list = chain_similar(user_id, catalog, weights, list, k, config.chain_threshold);
    }
    Ok(list)
}

/// Append videos within `threshold` cosine of a selected video, in anchor
/// rank order. Appended entries report the chain similarity capped by the
/// running minimum so the list's score ordering stays valid; at most `k`
/// extras are added.
fn chain_similar(
    user_id: &str,
    catalog: &Catalog,
    weights: &FusionWeights,
    list: RankedList,
    k: usize,
    threshold: f64,
) -> RankedList {
    let fused: HashMap<String, Vec<f64>> = fusion::fuse_catalog(catalog, weights)
        .into_iter()
        .map(|v| (v.video_id, v.values))
        .collect();
    let positives: HashSet<String> = catalog.positive_video_ids(user_id).into_iter().collect();
    let mut in_list: HashSet<String> =
        list.entries().iter().map(|e| e.video_id.clone()).collect();

    let mut entries: Vec<(String, f64)> = list
        .entries()
        .iter()
        .map(|e| (e.video_id.clone(), e.score))
        .collect();
    let mut floor = entries.last().map(|e| e.1).unwrap_or(1.0);
    let mut extras = 0usize;

    for anchor in list.entries() {
        if extras >= k {
            break;
        }
        let Some(anchor_values) = fused.get(&anchor.video_id) else {
            continue;
        };
        let mut chained: Vec<(String, f64)> = fused
            .iter()
            .filter(|(id, _)| !in_list.contains(*id) && !positives.contains(*id))
            .map(|(id, values)| (id.clone(), scoring::cosine(anchor_values, values)))
            .filter(|(_, c)| *c >= threshold)
            .collect();
        chained.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        for (id, cos) in chained {
            if extras >= k {
                break;
            }
            floor = floor.min(cos.clamp(0.0, 1.0));
            in_list.insert(id.clone());
            entries.push((id, floor));
            extras += 1;
        }
    }
    RankedList::from_sorted_raw(entries)
}

/// Build a group's profile: the mean of its members' interest vectors.
pub fn build_group_profile(
    member_ids: &[String],
    catalog: &Catalog,
    weights: &FusionWeights,
) -> Result<GroupProfile> {
    if member_ids.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let members: BTreeSet<String> = member_ids.iter().cloned().collect();
    let d = catalog.dim().unwrap_or(0);
    let mut mean = vec![0.0; d];
    for member in &members {
        let u = scoring::build_user_vector(member, catalog, weights, None)?;
        for (acc, x) in mean.iter_mut().zip(u.values.iter()) {
            *acc += x;
        }
    }
    for x in &mut mean {
        *x /= members.len() as f64;
    }
    let owner_id = format!("group[{}]", members.iter().cloned().collect::<Vec<_>>().join(","));
    Ok(GroupProfile {
        member_ids: members,
        fused_interest: InterestVector {
            owner_id,
            values: mean,
        },
    })
}

/// Rank by matching score against the group profile, excluding videos
/// that every member has already engaged with positively.
pub fn group_recommend(
    member_ids: &[String],
    catalog: &Catalog,
    weights: &FusionWeights,
    k: usize,
) -> Result<RankedList> {
    let profile = build_group_profile(member_ids, catalog, weights)?;
    let mut excluded: Option<BTreeSet<String>> = None;
    for member in &profile.member_ids {
        let positives: BTreeSet<String> =
            catalog.positive_video_ids(member).into_iter().collect();
        excluded = Some(match excluded {
            None => positives,
            Some(prev) => prev.intersection(&positives).cloned().collect(),
        });
    }
    let excluded = excluded.unwrap_or_default();

    let mut scored = Vec::new();
    for video in fusion::fuse_catalog(catalog, weights) {
        if excluded.contains(&video.video_id) {
            continue;
        }
        let score = scoring::match_score(&profile.fused_interest, &video)?;
        scored.push((video.video_id, score));
    }
    Ok(rank_and_truncate(scored, k))
}
