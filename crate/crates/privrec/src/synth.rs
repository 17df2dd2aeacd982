//! Synthetic implicit-feedback dataset generator.
//!
//! Generative model: `topics` centers are sampled on the unit sphere.
//! Each video takes its topic center plus independent Gaussian noise per
//! modality, so the three modalities are correlated through the topic.
//! Each user is a Dirichlet mixture of topic centers. Users interact with
//! `events_per_user` distinct videos drawn without replacement with
//! probability proportional to `exp(concentration * u.v)` — a feed
//! exposure model that keeps a user's history near their interest vector —
//! and each interaction is positive with probability `sigmoid(u.v)` of
//! the fused video vector.
//!
//! Everything is derived from the seed through fixed stream ids, so the
//! same spec always produces the same catalog, byte for byte.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_store::{Catalog, InteractionEvent, InteractionKind, ModalFeatureSet};
use crate::fusion::{self, FusionWeights};
use crate::rng::stream;
use crate::scoring::sigmoid;

const STREAM_TOPICS: u64 = 0;
const STREAM_VIDEOS: u64 = 1;
const STREAM_USERS: u64 = 2;
const STREAM_EVENTS_BASE: u64 = 1000;

fn default_events_per_user() -> usize {
    30
}

fn default_exposure_concentration() -> f64 {
    250.0
}

fn default_dirichlet_alpha() -> f64 {
    0.3
}

fn default_true_weights() -> FusionWeights {
    FusionWeights::new(0.5, 0.3, 0.2).expect("valid default weights")
}

fn default_base_timestamp() -> i64 {
    1_700_000_000
}

/// Parameters of the generative model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub users: usize,
    pub videos: usize,
    pub dim: usize,
    pub topics: usize,
    /// Per-modality Gaussian noise around the topic center.
    pub noise_sigma: f64,
    pub seed: u64,
    #[serde(default = "default_events_per_user")]
    pub events_per_user: usize,
    /// Concentration of the exposure softmax; higher keeps interactions
    /// closer to the user's interest vector.
    #[serde(default = "default_exposure_concentration")]
    pub exposure_concentration: f64,
    /// Dirichlet concentration of the users' topic mixtures.
    #[serde(default = "default_dirichlet_alpha")]
    pub dirichlet_alpha: f64,
    /// Ground-truth fusion weights the generator scores with.
    #[serde(default = "default_true_weights")]
    pub true_weights: FusionWeights,
    #[serde(default = "default_base_timestamp")]
    pub base_timestamp: i64,
}

impl SynthSpec {
    /// A spec with the generator defaults for everything but the core
    /// shape parameters.
    pub fn new(users: usize, videos: usize, dim: usize, topics: usize, noise_sigma: f64, seed: u64) -> Self {
        SynthSpec {
            users,
            videos,
            dim,
            topics,
            noise_sigma,
            seed,
            events_per_user: default_events_per_user(),
            exposure_concentration: default_exposure_concentration(),
            dirichlet_alpha: default_dirichlet_alpha(),
            true_weights: default_true_weights(),
            base_timestamp: default_base_timestamp(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.users == 0 || self.videos == 0 || self.dim == 0 || self.topics == 0 {
            return Err(Error::InvalidConfig(
                "users, videos, dim, and topics must all be at least 1".to_string(),
            ));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noise_sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        if self.events_per_user == 0 {
            return Err(Error::InvalidConfig(
                "events_per_user must be at least 1".to_string(),
            ));
        }
        if self.base_timestamp < 0 {
            return Err(Error::InvalidConfig(
                "base_timestamp must be non-negative".to_string(),
            ));
        }
        Ok(())
    }
}

fn id_width(count: usize) -> usize {
    count.saturating_sub(1).to_string().len().max(3)
}

fn unit_vector(dim: usize, rng: &mut crate::rng::Stream) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Generate a catalog from the spec. Deterministic in the seed.
pub fn synthesize(spec: &SynthSpec) -> Result<Catalog> {
    spec.validate()?;

    let mut topic_rng = stream(spec.seed, STREAM_TOPICS);
    let centers: Vec<Vec<f64>> = (0..spec.topics)
        .map(|_| unit_vector(spec.dim, &mut topic_rng))
        .collect();

    let video_width = id_width(spec.videos);
    let mut video_rng = stream(spec.seed, STREAM_VIDEOS);
    let mut videos = Vec::with_capacity(spec.videos);
    for j in 0..spec.videos {
        let center = &centers[j % spec.topics];
        let mut modality = || -> Vec<f64> {
            center
                .iter()
                .map(|&c| {
                    let noise: f64 = StandardNormal.sample(&mut video_rng);
                    c + spec.noise_sigma * noise
                })
                .collect()
        };
        videos.push(ModalFeatureSet {
            video_id: format!("v{j:0video_width$}"),
            visual: modality(),
            text: modality(),
            audio: modality(),
        });
    }

    let user_width = id_width(spec.users);
    let mut user_rng = stream(spec.seed, STREAM_USERS);
    let gamma = Gamma::new(spec.dirichlet_alpha, 1.0)
        .map_err(|e| Error::InvalidConfig(format!("dirichlet alpha: {e}")))?;
    let mut users = Vec::with_capacity(spec.users);
    let mut user_vectors = Vec::with_capacity(spec.users);
    for i in 0..spec.users {
        let mut mixture: Vec<f64> = (0..spec.topics).map(|_| gamma.sample(&mut user_rng)).collect();
        let total: f64 = mixture.iter().sum();
        if total > 0.0 {
            for m in &mut mixture {
                *m /= total;
            }
        } else {
            mixture.fill(1.0 / spec.topics as f64);
        }
        let mut values = vec![0.0; spec.dim];
        for (share, center) in mixture.iter().zip(centers.iter()) {
            for (v, c) in values.iter_mut().zip(center.iter()) {
                *v += share * c;
            }
        }
        users.push(format!("u{i:0user_width$}"));
        user_vectors.push(values);
    }

    let fused = fusion::fuse_catalog(&Catalog::new(videos.clone(), vec![], vec![]), &spec.true_weights);
    let affinities: Vec<Vec<f64>> = user_vectors
        .iter()
        .map(|u| {
            fused
                .iter()
                .map(|v| u.iter().zip(v.values.iter()).map(|(a, b)| a * b).sum::<f64>())
                .collect()
        })
        .collect();

    let mut interactions = Vec::new();
    let events = spec.events_per_user.min(spec.videos);
    for (i, user_id) in users.iter().enumerate() {
        let mut rng = stream(spec.seed, STREAM_EVENTS_BASE + i as u64);
        let affinity = &affinities[i];
        let max_affinity = affinity.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut exposure: Vec<f64> = affinity
            .iter()
            .map(|&a| (spec.exposure_concentration * (a - max_affinity)).exp())
            .collect();
        for e in 0..events {
            let total: f64 = exposure.iter().sum();
            let j = if total > 0.0 {
                let mut r = rng.gen::<f64>() * total;
                let mut picked = spec.videos - 1;
                for (idx, &w) in exposure.iter().enumerate() {
                    if r < w {
                        picked = idx;
                        break;
                    }
                    r -= w;
                }
                picked
            } else {
                exposure.iter().position(|&w| w >= 0.0).unwrap_or(0)
            };
            exposure[j] = 0.0; // without replacement

            let positive = rng.gen::<f64>() < sigmoid(affinity[j]);
            let kind = if positive {
                match rng.gen_range(0..4) {
                    0 | 1 => InteractionKind::Like,
                    2 => InteractionKind::Comment,
                    _ => InteractionKind::Watch,
                }
            } else if rng.gen_bool(0.5) {
                InteractionKind::Click
            } else {
                InteractionKind::Watch
            };
            interactions.push(InteractionEvent {
                user_id: user_id.clone(),
                video_id: videos[j].video_id.clone(),
                kind,
                timestamp: spec.base_timestamp + e as i64,
                label: positive,
            });
        }
    }

    Ok(Catalog::new(videos, users, interactions))
}
