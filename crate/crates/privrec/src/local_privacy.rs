//! Client-side perturbation and quantization, and the server-side
//! template/semantic-distance/clustering flow over the uploaded profiles.
//!
//! The client clamps each interest-vector component to [-1, 1], adds
//! Laplace noise calibrated to the per-component range (2.0) with the
//! budget split equally across components, and snaps the result to a
//! quantization grid (round half-up). Only the resulting
//! [`PerturbedProfile`] — carrying a salted pseudonym, never the user id —
//! crosses to the server side. Server operations accept nothing but
//! perturbed profiles, so raw vectors cannot leak through this module by
//! construction; quantization after noising is post-processing and keeps
//! the privacy guarantee.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dp_noise;
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::scoring::InterestVector;

/// A noised, grid-aligned preference vector as uploaded to the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedProfile {
    /// Salted hash of the user id; not linkable without the salt.
    pub pseudonym: String,
    pub values: Vec<f64>,
    pub epsilon_used: f64,
}

/// Server-side template: the dimension and grid all uploads are
/// standardized to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub dim: usize,
    pub grid_step: f64,
}

/// One profile's cluster membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub pseudonym: String,
    pub cluster_id: usize,
    pub distance_to_centroid: f64,
}

/// Outcome of [`cluster_profiles`]: assignments in profile order, final
/// centroids, and the objective value after every assignment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub assignments: Vec<ClusterAssignment>,
    pub centroids: Vec<Vec<f64>>,
    pub objective_trace: Vec<f64>,
}

impl Clustering {
    /// Within-cluster sum of squared distances at convergence.
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().unwrap_or(&0.0)
    }
}

/// Snap to the nearest grid point, ties rounding toward positive infinity.
pub fn quantize(value: f64, grid_step: f64) -> f64 {
    (value / grid_step + 0.5).floor() * grid_step
}

/// Salted pseudonym for a user id (first 16 hex chars of SHA-256).
pub fn pseudonymize(user_id: &str, salt: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(salt.to_le_bytes());
    hasher.update(user_id.as_bytes());
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Clamp, noise, and quantize one interest vector on the client.
///
/// Each component is clamped to [-1, 1] (range 2.0), receives
/// `Laplace(0, 2.0 / (epsilon / d))` noise — the budget split equally
/// across the `d` components — and is snapped to the grid.
pub fn perturb_profile(
    u: &InterestVector,
    epsilon: f64,
    grid_step: f64,
    salt: u64,
    rng: &mut Stream,
) -> Result<PerturbedProfile> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !grid_step.is_finite() || grid_step <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "grid_step must be positive, got {grid_step}"
        )));
    }
    let d = u.values.len();
    let scale = if d == 0 {
        0.0
    } else {
        2.0 / (epsilon / d as f64)
    };
    let mut values = Vec::with_capacity(d);
    for &x in &u.values {
        let clamped = x.clamp(-1.0, 1.0);
        let noised = clamped + dp_noise::laplace_sample(scale, rng)?;
        values.push(quantize(noised, grid_step));
    }
    Ok(PerturbedProfile {
        pseudonym: pseudonymize(&u.owner_id, salt),
        values,
        epsilon_used: epsilon,
    })
}

/// Re-quantize uploaded profiles onto the template grid. Idempotent when
/// the grids already match.
pub fn standardize(
    profiles: &[PerturbedProfile],
    template: &TemplateSpec,
) -> Result<Vec<PerturbedProfile>> {
    let mut out = Vec::with_capacity(profiles.len());
    for p in profiles {
        if p.values.len() != template.dim {
            return Err(Error::DimensionMismatch {
                left: p.values.len(),
                right: template.dim,
            });
        }
        out.push(PerturbedProfile {
            pseudonym: p.pseudonym.clone(),
            values: p.values.iter().map(|&x| quantize(x, template.grid_step)).collect(),
            epsilon_used: p.epsilon_used,
        });
    }
    Ok(out)
}

/// Euclidean distance, the semantic metric between perturbed profiles.
pub fn semantic_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means++ over semantic distance.
///
/// Runs Lloyd iterations until assignments stop changing or `max_iters`
/// is hit. The within-cluster sum of squared distances is recorded after
/// every assignment step and asserted non-increasing.
pub fn cluster_profiles(
    profiles: &[PerturbedProfile],
    k: usize,
    max_iters: usize,
    rng: &mut Stream,
) -> Result<Clustering> {
    let n = profiles.len();
    if k == 0 || k > n {
        return Err(Error::BadClusterCount { k, n });
    }
    let points: Vec<&[f64]> = profiles.iter().map(|p| p.values.as_slice()).collect();
    let mut centroids = seed_centroids(&points, k, rng);

    let mut assignments = vec![usize::MAX; n];
    let mut trace: Vec<f64> = Vec::new();
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        let mut objective = 0.0;
        for (i, point) in points.iter().enumerate() {
            let (best, d2) = nearest_centroid(point, &centroids);
            objective += d2;
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        if let Some(&previous) = trace.last() {
            assert!(
                objective <= previous + 1e-9 * (1.0 + previous),
                "k-means objective increased: {previous} -> {objective}"
            );
        }
        trace.push(objective);
        if !changed {
            break;
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&[f64]> = points
                .iter()
                .zip(assignments.iter())
                .filter(|(_, &a)| a == c)
                .map(|(p, _)| *p)
                .collect();
            if members.is_empty() {
                continue; // keep the previous centroid
            }
            for (j, v) in centroid.iter_mut().enumerate() {
                *v = members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64;
            }
        }
    }

    let assignments = profiles
        .iter()
        .zip(assignments.iter())
        .map(|(p, &c)| ClusterAssignment {
            pseudonym: p.pseudonym.clone(),
            cluster_id: c,
            distance_to_centroid: semantic_distance(&p.values, &centroids[c])
                .expect("centroid dimension matches"),
        })
        .collect();
    Ok(Clustering {
        assignments,
        centroids,
        objective_trace: trace,
    })
}

fn nearest_centroid(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d2 = squared_distance(point, centroid);
        if d2 < best_d2 {
            best = c;
            best_d2 = d2;
        }
    }
    (best, best_d2)
}

/// k-means++ seeding: subsequent centers drawn proportionally to squared
/// distance from the chosen set. When every remaining point coincides
/// with a center, the lowest unchosen index is taken.
fn seed_centroids(points: &[&[f64]], k: usize, rng: &mut Stream) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen: Vec<usize> = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, points[chosen[0]]))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut picked = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    picked = i;
                    break;
                }
                r -= w;
            }
            picked
        } else {
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, point) in points.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(point, points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].to_vec()).collect()
}
