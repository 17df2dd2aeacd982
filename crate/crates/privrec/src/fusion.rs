//! Weighted multimodal fusion and training of the modality weights.
//!
//! A video's fused representation is the weighted sum of its visual, text,
//! and audio vectors. The weights live on the probability simplex (each
//! non-negative, summing to one) so they read as modality shares and keep
//! the fused vector on the same scale as the inputs.
//!
//! Training minimizes the mean binary log-loss of the sigmoid matching
//! score against engagement labels by full-batch gradient descent on a
//! softmax reparameterization of the weights. User interest vectors are
//! computed once from the starting weights and held fixed, which keeps the
//! procedure deterministic and makes the loss a plain function of the
//! three weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_store::{Catalog, ModalFeatureSet};
use crate::scoring;

const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Simplex-constrained modality weights (visual, text, audio).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights")]
pub struct FusionWeights {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

#[derive(Deserialize)]
struct RawWeights {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl TryFrom<RawWeights> for FusionWeights {
    type Error = Error;

    fn try_from(raw: RawWeights) -> Result<Self> {
        FusionWeights::new(raw.alpha, raw.beta, raw.gamma)
    }
}

impl FusionWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        for (name, w) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "fusion weight {name} must be finite and non-negative, got {w}"
                )));
            }
        }
        let sum = alpha + beta + gamma;
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "fusion weights must sum to 1 (got {sum})"
            )));
        }
        Ok(FusionWeights { alpha, beta, gamma })
    }

    /// Equal share for every modality.
    pub fn uniform() -> Self {
        FusionWeights {
            alpha: 1.0 / 3.0,
            beta: 1.0 / 3.0,
            gamma: 1.0 / 3.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }
}

/// A video's fused feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedVector {
    pub video_id: String,
    pub values: Vec<f64>,
}

/// Componentwise weighted sum of the three modal vectors.
pub fn fuse(weights: &FusionWeights, features: &ModalFeatureSet) -> FusedVector {
    let d = features.dim();
    let mut values = Vec::with_capacity(d);
    for i in 0..d {
        values.push(
            weights.alpha * features.visual[i]
                + weights.beta * features.text[i]
                + weights.gamma * features.audio[i],
        );
    }
    FusedVector {
        video_id: features.video_id.clone(),
        values,
    }
}

/// Fuse every video in the catalog, in catalog order.
pub fn fuse_catalog(catalog: &Catalog, weights: &FusionWeights) -> Vec<FusedVector> {
    catalog.videos().iter().map(|v| fuse(weights, v)).collect()
}

/// Hyperparameters for weight training.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Gradient-descent steps.
    pub steps: usize,
    /// Fixed step size.
    pub learning_rate: f64,
    /// Recency half-life (seconds) used when building user vectors;
    /// `None` means a plain mean.
    pub half_life: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 200,
            learning_rate: 0.1,
            half_life: None,
        }
    }
}

/// One labeled training example: the user vector dotted with each modal
/// vector of the interacted video, plus the binary engagement target.
#[derive(Debug, Clone, Copy)]
pub struct TrainExample {
    pub modal_dots: [f64; 3],
    pub label: f64,
}

/// Turn a catalog into training examples. User vectors are built once with
/// the given weights and treated as constants afterwards.
pub fn build_training_examples(
    catalog: &Catalog,
    weights: &FusionWeights,
    half_life: Option<f64>,
) -> Result<Vec<TrainExample>> {
    let mut user_vectors = std::collections::HashMap::new();
    for user_id in catalog.users() {
        let u = scoring::build_user_vector(user_id, catalog, weights, half_life)?;
        user_vectors.insert(user_id.clone(), u.values);
    }
    let mut examples = Vec::with_capacity(catalog.interactions().len());
    for ev in catalog.interactions() {
        let u = &user_vectors[&ev.user_id];
        let video = catalog
            .video(&ev.video_id)
            .ok_or_else(|| Error::UnknownVideo(ev.video_id.clone()))?;
        let dot = |xs: &[f64]| xs.iter().zip(u.iter()).map(|(x, y)| x * y).sum::<f64>();
        examples.push(TrainExample {
            modal_dots: [dot(&video.visual), dot(&video.text), dot(&video.audio)],
            label: if ev.is_positive() { 1.0 } else { 0.0 },
        });
    }
    Ok(examples)
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Mean binary log-loss of the sigmoid matching score at raw weights `w`.
///
/// `w` is deliberately unconstrained here so the loss can be probed off
/// the simplex (finite differences need that); `train_weights` is what
/// enforces the simplex.
pub fn training_loss(examples: &[TrainExample], w: [f64; 3]) -> f64 {
    let n = examples.len().max(1) as f64;
    examples
        .iter()
        .map(|ex| {
            let z = w[0] * ex.modal_dots[0] + w[1] * ex.modal_dots[1] + w[2] * ex.modal_dots[2];
            softplus(z) - ex.label * z
        })
        .sum::<f64>()
        / n
}

/// Analytic gradient of [`training_loss`] with respect to the raw weights.
pub fn training_loss_gradient(examples: &[TrainExample], w: [f64; 3]) -> [f64; 3] {
    let n = examples.len().max(1) as f64;
    let mut grad = [0.0f64; 3];
    for ex in examples {
        let z = w[0] * ex.modal_dots[0] + w[1] * ex.modal_dots[1] + w[2] * ex.modal_dots[2];
        let residual = scoring::sigmoid(z) - ex.label;
        for m in 0..3 {
            grad[m] += residual * ex.modal_dots[m];
        }
    }
    for g in &mut grad {
        *g /= n;
    }
    grad
}

fn softmax(theta: [f64; 3]) -> [f64; 3] {
    let max = theta[0].max(theta[1]).max(theta[2]);
    let exps = [
        (theta[0] - max).exp(),
        (theta[1] - max).exp(),
        (theta[2] - max).exp(),
    ];
    let sum = exps[0] + exps[1] + exps[2];
    [exps[0] / sum, exps[1] / sum, exps[2] / sum]
}

/// Train the fusion weights by full-batch gradient descent on the softmax
/// parameterization, returning the best simplex point visited. With zero
/// steps the initial weights come back unchanged.
pub fn train_weights(
    catalog: &Catalog,
    initial: &FusionWeights,
    config: &TrainConfig,
) -> Result<FusionWeights> {
    let examples = build_training_examples(catalog, initial, config.half_life)?;
    let positives = examples.iter().filter(|e| e.label > 0.5).count();
    if positives == 0 || positives == examples.len() {
        return Err(Error::InvalidConfig(
            "training requires at least one positive and one negative interaction".to_string(),
        ));
    }
    if config.steps == 0 {
        return Ok(*initial);
    }

    // softmax(ln w) == w for simplex-valid w, so the starting point is the
    // initial weights (up to fp noise); exact zeros get a tiny floor since
    // softmax cannot represent them.
    let mut theta = initial.as_array().map(|w| w.max(1e-12).ln());

    let mut best_w = softmax(theta);
    let mut best_loss = training_loss(&examples, best_w);
    if !best_loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    let initial_loss = training_loss(&examples, initial.as_array());
    if initial_loss <= best_loss {
        best_w = initial.as_array();
        best_loss = initial_loss;
    }

    for _ in 0..config.steps {
        let w = softmax(theta);
        let grad_w = training_loss_gradient(&examples, w);
        let inner: f64 = (0..3).map(|m| grad_w[m] * w[m]).sum();
        for k in 0..3 {
            let grad_theta = w[k] * (grad_w[k] - inner);
            theta[k] -= config.learning_rate * grad_theta;
        }
        let w_next = softmax(theta);
        let loss = training_loss(&examples, w_next);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        if loss < best_loss {
            best_loss = loss;
            best_w = w_next;
        }
    }

    FusionWeights::new(best_w[0], best_w[1], best_w[2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_store::{InteractionEvent, InteractionKind};

    fn features(id: &str, visual: Vec<f64>, text: Vec<f64>, audio: Vec<f64>) -> ModalFeatureSet {
        ModalFeatureSet {
            video_id: id.to_string(),
            visual,
            text,
            audio,
        }
    }

    #[test]
    fn weights_must_lie_on_the_simplex() {
        assert!(FusionWeights::new(0.5, 0.3, 0.2).is_ok());
        assert!(FusionWeights::new(0.5, 0.3, 0.3).is_err());
        assert!(FusionWeights::new(-0.1, 0.6, 0.5).is_err());
        assert!(FusionWeights::new(f64::NAN, 0.5, 0.5).is_err());
    }

    #[test]
    fn weights_round_trip_as_three_field_json() {
        let w = FusionWeights::new(0.5, 0.3, 0.2).unwrap();
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(json, r#"{"alpha":0.5,"beta":0.3,"gamma":0.2}"#);
        let back: FusionWeights = serde_json::from_str(&json).unwrap();
        assert_eq!(back, w);
        assert!(serde_json::from_str::<FusionWeights>(r#"{"alpha":0.9,"beta":0.9,"gamma":0.9}"#).is_err());
    }

    #[test]
    fn fuse_with_unit_alpha_returns_visual() {
        let f = features("v", vec![1.0, -2.0, 3.5], vec![9.0, 9.0, 9.0], vec![-9.0, 0.0, 1.0]);
        let fused = fuse(&FusionWeights::new(1.0, 0.0, 0.0).unwrap(), &f);
        assert_eq!(fused.values, f.visual);
    }

    #[test]
    fn fuse_matches_hand_evaluated_weighted_sum() {
        let f = features("v", vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]);
        let fused = fuse(&FusionWeights::new(0.5, 0.3, 0.2).unwrap(), &f);
        assert!((fused.values[0] - 0.7).abs() < 1e-12);
        assert!((fused.values[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fuse_of_identical_modalities_is_identity() {
        let x = vec![0.3, -1.7, 2.2, 0.0];
        let f = features("v", x.clone(), x.clone(), x.clone());
        let fused = fuse(&FusionWeights::uniform(), &f);
        for (a, b) in fused.values.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    /// Catalog where the engagement signal lives purely in the visual
    /// modality; text and audio carry seeded noise.
    fn visual_signal_catalog() -> Catalog {
        use rand::Rng;
        let mut rng = crate::rng::stream(7, 0);
        let d = 4;
        let mut videos = Vec::new();
        let mut interactions = Vec::new();
        for j in 0..30 {
            let id = format!("v{j:02}");
            let positive = j % 2 == 0;
            let visual = if positive {
                vec![1.0, 1.0, 0.0, 0.0]
            } else {
                vec![-1.0, -1.0, 0.0, 0.0]
            };
            let text: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let audio: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            videos.push(features(&id, visual, text, audio));
            interactions.push(InteractionEvent {
                user_id: "u".to_string(),
                video_id: id,
                kind: if positive {
                    InteractionKind::Like
                } else {
                    InteractionKind::Click
                },
                timestamp: 100 + j as i64,
                label: positive,
            });
        }
        Catalog::new(videos, vec!["u".to_string()], interactions)
    }

    #[test]
    fn training_prefers_the_informative_modality() {
        let catalog = visual_signal_catalog();
        let initial = FusionWeights::uniform();
        let config = TrainConfig {
            steps: 1000,
            ..TrainConfig::default()
        };
        let trained = train_weights(&catalog, &initial, &config).unwrap();
        assert!(
            trained.alpha() > trained.beta() && trained.alpha() > trained.gamma(),
            "expected visual weight to dominate, got {trained:?}"
        );

        // Grid search over the simplex as an independent oracle: the best
        // grid point must also put the largest share on the visual weight.
        let examples = build_training_examples(&catalog, &initial, None).unwrap();
        let mut best = ([0.0f64; 3], f64::INFINITY);
        let steps = 20;
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let a = i as f64 / steps as f64;
                let b = j as f64 / steps as f64;
                let c = 1.0 - a - b;
                let loss = training_loss(&examples, [a, b, c]);
                if loss < best.1 {
                    best = ([a, b, c], loss);
                }
            }
        }
        assert!(best.0[0] > best.0[1] && best.0[0] > best.0[2], "oracle grid point {best:?}");
        let trained_loss = training_loss(&examples, trained.as_array());
        let initial_loss = training_loss(&examples, initial.as_array());
        assert!(trained_loss <= initial_loss);
        // Trained point should be in the oracle optimum's neighborhood
        // loss-wise (the grid itself is coarse and descent is first-order).
        assert!(trained_loss <= best.1 + 0.1, "trained {trained_loss} vs grid {}", best.1);
    }

    #[test]
    fn zero_steps_returns_initial_unchanged() {
        let catalog = visual_signal_catalog();
        let initial = FusionWeights::new(0.2, 0.5, 0.3).unwrap();
        let config = TrainConfig {
            steps: 0,
            ..TrainConfig::default()
        };
        let out = train_weights(&catalog, &initial, &config).unwrap();
        assert_eq!(out, initial);
    }

    #[test]
    fn identical_modalities_leave_weights_in_place() {
        let mut videos = Vec::new();
        let mut interactions = Vec::new();
        for j in 0..10 {
            let id = format!("v{j}");
            let x: Vec<f64> = vec![j as f64 / 10.0 - 0.45, 0.3, -0.2];
            videos.push(features(&id, x.clone(), x.clone(), x.clone()));
            interactions.push(InteractionEvent {
                user_id: "u".to_string(),
                video_id: id,
                kind: InteractionKind::Watch,
                timestamp: j as i64,
                label: j % 2 == 0,
            });
        }
        let catalog = Catalog::new(videos, vec!["u".to_string()], interactions);
        let initial = FusionWeights::new(0.6, 0.3, 0.1).unwrap();
        let trained = train_weights(&catalog, &initial, &TrainConfig::default()).unwrap();
        for (a, b) in trained.as_array().iter().zip(initial.as_array().iter()) {
            assert!((a - b).abs() < 1e-6, "weights moved: {trained:?}");
        }
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        use rand::Rng;
        let mut rng = crate::rng::stream(11, 0);
        for _ in 0..50 {
            let examples: Vec<TrainExample> = (0..8)
                .map(|_| TrainExample {
                    modal_dots: [
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(-2.0..2.0),
                    ],
                    label: if rng.gen_bool(0.5) { 1.0 } else { 0.0 },
                })
                .collect();
            let w = [
                rng.gen_range(0.05..0.9),
                rng.gen_range(0.05..0.9),
                rng.gen_range(0.05..0.9),
            ];
            let analytic = training_loss_gradient(&examples, w);
            let h = 1e-5;
            for m in 0..3 {
                let mut wp = w;
                let mut wn = w;
                wp[m] += h;
                wn[m] -= h;
                let fd =
                    (training_loss(&examples, wp) - training_loss(&examples, wn)) / (2.0 * h);
                let scale = analytic[m].abs().max(fd.abs()).max(1e-8);
                assert!(
                    (analytic[m] - fd).abs() / scale < 1e-4,
                    "component {m}: analytic {} vs fd {}",
                    analytic[m],
                    fd
                );
            }
        }
    }

    #[test]
    fn fuse_is_linear_in_a_global_feature_scale() {
        use rand::Rng;
        let mut rng = crate::rng::stream(13, 0);
        let weights = FusionWeights::new(0.5, 0.3, 0.2).unwrap();
        for _ in 0..100 {
            let d = rng.gen_range(1..6);
            let f = features(
                "v",
                (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect(),
            );
            let a: f64 = rng.gen_range(-2.0..2.0);
            let scaled = features(
                "v",
                f.visual.iter().map(|x| a * x).collect(),
                f.text.iter().map(|x| a * x).collect(),
                f.audio.iter().map(|x| a * x).collect(),
            );
            let lhs = fuse(&weights, &scaled);
            let rhs = fuse(&weights, &f);
            for (l, r) in lhs.values.iter().zip(rhs.values.iter()) {
                assert!((l - a * r).abs() <= 1e-9 * (1.0 + r.abs()), "{l} vs {}", a * r);
            }
        }
    }

    #[test]
    fn trained_weights_always_on_simplex() {
        let catalog = visual_signal_catalog();
        for (a, b, g) in [(0.8, 0.1, 0.1), (0.1, 0.8, 0.1), (1.0, 0.0, 0.0)] {
            let initial = FusionWeights::new(a, b, g).unwrap();
            let trained = train_weights(&catalog, &initial, &TrainConfig::default()).unwrap();
            let [ta, tb, tg] = trained.as_array();
            assert!(ta >= 0.0 && tb >= 0.0 && tg >= 0.0);
            assert!((ta + tb + tg - 1.0).abs() < 1e-9);
        }
    }
}
