//! Data model for videos, users, and interactions, plus JSONL load/save.
//!
//! Datasets are JSONL files, one record per line, UTF-8 with LF endings.
//! Three record shapes are distinguished by their keys:
//!
//! - video: `{"video_id", "visual":[...], "text":[...], "audio":[...]}`
//! - interaction: `{"user_id", "video_id", "kind", "timestamp", "label"}`
//! - user: `{"user_id"}`
//!
//! All three modal vectors of a video must share one dimension `d >= 1`,
//! and every component must be finite. Interactions must reference users
//! and videos declared in the same file.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-video visual/text/audio feature vectors in a shared dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalFeatureSet {
    pub video_id: String,
    pub visual: Vec<f64>,
    pub text: Vec<f64>,
    pub audio: Vec<f64>,
}

impl ModalFeatureSet {
    /// Shared dimension of the three modal vectors.
    pub fn dim(&self) -> usize {
        self.visual.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionKind {
    Click,
    Like,
    Comment,
    Watch,
}

impl fmt::Display for InteractionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InteractionKind::Click => "click",
            InteractionKind::Like => "like",
            InteractionKind::Comment => "comment",
            InteractionKind::Watch => "watch",
        };
        f.write_str(s)
    }
}

/// One engagement event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub user_id: String,
    pub video_id: String,
    pub kind: InteractionKind,
    /// Seconds since epoch; must be non-negative.
    pub timestamp: i64,
    pub label: bool,
}

impl InteractionEvent {
    /// Binary engagement: likes and comments always count as positive;
    /// clicks and watches count only when the explicit label says so.
    pub fn is_positive(&self) -> bool {
        matches!(self.kind, InteractionKind::Like | InteractionKind::Comment) || self.label
    }
}

/// An immutable dataset: videos, users, and their interaction history.
///
/// `Catalog::new` assembles and indexes the parts without checking
/// invariants; call [`Catalog::validate`] (or go through [`load_catalog`],
/// which rejects invalid data) to check them.
#[derive(Debug, Clone)]
pub struct Catalog {
    videos: Vec<ModalFeatureSet>,
    users: Vec<String>,
    interactions: Vec<InteractionEvent>,
    video_index: HashMap<String, usize>,
    user_index: HashMap<String, usize>,
    by_user: HashMap<String, Vec<usize>>,
}

impl Catalog {
    pub fn new(
        videos: Vec<ModalFeatureSet>,
        users: Vec<String>,
        interactions: Vec<InteractionEvent>,
    ) -> Self {
        let video_index = videos
            .iter()
            .enumerate()
            .map(|(i, v)| (v.video_id.clone(), i))
            .collect();
        let user_index = users
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), i))
            .collect();
        let mut by_user: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, ev) in interactions.iter().enumerate() {
            by_user.entry(ev.user_id.clone()).or_default().push(i);
        }
        Catalog {
            videos,
            users,
            interactions,
            video_index,
            user_index,
            by_user,
        }
    }

    pub fn videos(&self) -> &[ModalFeatureSet] {
        &self.videos
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn interactions(&self) -> &[InteractionEvent] {
        &self.interactions
    }

    pub fn video(&self, video_id: &str) -> Option<&ModalFeatureSet> {
        self.video_index.get(video_id).map(|&i| &self.videos[i])
    }

    pub fn contains_user(&self, user_id: &str) -> bool {
        self.user_index.contains_key(user_id)
    }

    /// Shared feature dimension, `None` for an empty catalog.
    pub fn dim(&self) -> Option<usize> {
        self.videos.first().map(|v| v.dim())
    }

    /// Events of one user, in file order.
    pub fn user_interactions(&self, user_id: &str) -> impl Iterator<Item = &InteractionEvent> {
        self.by_user
            .get(user_id)
            .into_iter()
            .flatten()
            .map(move |&i| &self.interactions[i])
    }

    /// Distinct ids of videos the user engaged with positively, sorted.
    pub fn positive_video_ids(&self, user_id: &str) -> Vec<String> {
        let mut ids: Vec<String> = self
            .user_interactions(user_id)
            .filter(|ev| ev.is_positive())
            .map(|ev| ev.video_id.clone())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Distinct ids of videos the user interacted with at all, sorted.
    pub fn interacted_video_ids(&self, user_id: &str) -> Vec<String> {
        let mut ids: Vec<String> = self
            .user_interactions(user_id)
            .map(|ev| ev.video_id.clone())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Check every catalog invariant; an empty list means the catalog is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();

        let mut seen_videos: HashMap<&str, usize> = HashMap::new();
        for v in &self.videos {
            *seen_videos.entry(v.video_id.as_str()).or_insert(0) += 1;
        }
        for (id, count) in &seen_videos {
            if *count > 1 {
                violations.push(Violation::DuplicateVideo {
                    video_id: (*id).to_string(),
                });
            }
        }
        let mut seen_users: HashMap<&str, usize> = HashMap::new();
        for u in &self.users {
            *seen_users.entry(u.as_str()).or_insert(0) += 1;
        }
        for (id, count) in &seen_users {
            if *count > 1 {
                violations.push(Violation::DuplicateUser {
                    user_id: (*id).to_string(),
                });
            }
        }

        for v in &self.videos {
            if v.visual.is_empty() {
                violations.push(Violation::EmptyFeatures {
                    video_id: v.video_id.clone(),
                });
            }
            if v.text.len() != v.visual.len() || v.audio.len() != v.visual.len() {
                violations.push(Violation::ModalDimensionMismatch {
                    video_id: v.video_id.clone(),
                    visual: v.visual.len(),
                    text: v.text.len(),
                    audio: v.audio.len(),
                });
            }
            for (modality, values) in [("visual", &v.visual), ("text", &v.text), ("audio", &v.audio)]
            {
                if values.iter().any(|x| !x.is_finite()) {
                    violations.push(Violation::NonFiniteComponent {
                        video_id: v.video_id.clone(),
                        modality,
                    });
                }
            }
        }

        if let Some(d) = self.dim() {
            for v in &self.videos[1..] {
                if v.dim() != d && v.text.len() == v.dim() && v.audio.len() == v.dim() {
                    // Internally consistent but different from the catalog dimension.
                    violations.push(Violation::CatalogDimensionMismatch {
                        video_id: v.video_id.clone(),
                        expected: d,
                        found: v.dim(),
                    });
                }
            }
        }

        for (index, ev) in self.interactions.iter().enumerate() {
            if !self.video_index.contains_key(&ev.video_id) {
                violations.push(Violation::DanglingVideoReference {
                    index,
                    video_id: ev.video_id.clone(),
                });
            }
            if !self.user_index.contains_key(&ev.user_id) {
                violations.push(Violation::DanglingUserReference {
                    index,
                    user_id: ev.user_id.clone(),
                });
            }
            if ev.timestamp < 0 {
                violations.push(Violation::NegativeTimestamp {
                    index,
                    timestamp: ev.timestamp,
                });
            }
        }

        violations.sort_by_key(|v| v.to_string());
        violations
    }
}

/// A single invariant violation, naming the offending record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateVideo {
        video_id: String,
    },
    DuplicateUser {
        user_id: String,
    },
    EmptyFeatures {
        video_id: String,
    },
    ModalDimensionMismatch {
        video_id: String,
        visual: usize,
        text: usize,
        audio: usize,
    },
    CatalogDimensionMismatch {
        video_id: String,
        expected: usize,
        found: usize,
    },
    NonFiniteComponent {
        video_id: String,
        modality: &'static str,
    },
    DanglingVideoReference {
        index: usize,
        video_id: String,
    },
    DanglingUserReference {
        index: usize,
        user_id: String,
    },
    NegativeTimestamp {
        index: usize,
        timestamp: i64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateVideo { video_id } => {
                write!(f, "duplicate video_id {video_id:?}")
            }
            Violation::DuplicateUser { user_id } => write!(f, "duplicate user_id {user_id:?}"),
            Violation::EmptyFeatures { video_id } => {
                write!(f, "video {video_id:?} has empty feature vectors")
            }
            Violation::ModalDimensionMismatch {
                video_id,
                visual,
                text,
                audio,
            } => write!(
                f,
                "video {video_id:?} modal dimension mismatch (visual {visual}, text {text}, audio {audio})"
            ),
            Violation::CatalogDimensionMismatch {
                video_id,
                expected,
                found,
            } => write!(
                f,
                "video {video_id:?} has dimension {found}, catalog uses {expected}"
            ),
            Violation::NonFiniteComponent { video_id, modality } => {
                write!(f, "video {video_id:?} has a non-finite {modality} component")
            }
            Violation::DanglingVideoReference { index, video_id } => {
                write!(f, "interaction {index} references unknown video {video_id:?}")
            }
            Violation::DanglingUserReference { index, user_id } => {
                write!(f, "interaction {index} references unknown user {user_id:?}")
            }
            Violation::NegativeTimestamp { index, timestamp } => {
                write!(f, "interaction {index} has negative timestamp {timestamp}")
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct UserRecord {
    user_id: String,
}

/// Load a catalog from a JSONL file and reject any invariant violation.
pub fn load_catalog<P: AsRef<Path>>(path: P) -> Result<Catalog> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);

    let mut videos = Vec::new();
    let mut users = Vec::new();
    let mut interactions = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        let object = value.as_object().ok_or_else(|| Error::Parse {
            line: line_no,
            message: "expected a JSON object".to_string(),
        })?;

        let parse = |message: serde_json::Error| Error::Parse {
            line: line_no,
            message: message.to_string(),
        };
        if object.contains_key("visual") {
            videos.push(serde_json::from_value::<ModalFeatureSet>(value).map_err(parse)?);
        } else if object.contains_key("kind") {
            interactions.push(serde_json::from_value::<InteractionEvent>(value).map_err(parse)?);
        } else if object.contains_key("user_id") {
            users.push(serde_json::from_value::<UserRecord>(value).map_err(parse)?.user_id);
        } else {
            return Err(Error::Parse {
                line: line_no,
                message: "record is neither a video, an interaction, nor a user".to_string(),
            });
        }
    }

    let catalog = Catalog::new(videos, users, interactions);
    let violations = catalog.validate();
    if violations.is_empty() {
        Ok(catalog)
    } else {
        Err(Error::InvalidCatalog(violations))
    }
}

/// Write a catalog as JSONL: videos first, then users, then interactions.
///
/// Numbers are emitted in shortest round-trip form, so `load_catalog`
/// reproduces the catalog exactly.
pub fn save_catalog<P: AsRef<Path>>(catalog: &Catalog, path: P) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    for video in catalog.videos() {
        serde_json::to_writer(&mut w, video)?;
        w.write_all(b"\n")?;
    }
    for user_id in catalog.users() {
        serde_json::to_writer(&mut w, &UserRecord { user_id: user_id.clone() })?;
        w.write_all(b"\n")?;
    }
    for ev in catalog.interactions() {
        serde_json::to_writer(&mut w, ev)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn video(id: &str, d: usize, fill: f64) -> ModalFeatureSet {
        ModalFeatureSet {
            video_id: id.to_string(),
            visual: vec![fill; d],
            text: vec![fill * 2.0; d],
            audio: vec![fill * 3.0; d],
        }
    }

    fn event(user: &str, video: &str, kind: InteractionKind, ts: i64, label: bool) -> InteractionEvent {
        InteractionEvent {
            user_id: user.to_string(),
            video_id: video.to_string(),
            kind,
            timestamp: ts,
            label,
        }
    }

    #[test]
    fn loads_hand_written_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"video_id":"a","visual":[1,0,0,0],"text":[0,1,0,0],"audio":[0,0,1,0]}"#,
                "\n",
                r#"{"video_id":"b","visual":[0,1,1,0],"text":[1,0,0,1],"audio":[0.5,0.5,0,0]}"#,
                "\n",
                r#"{"user_id":"u1"}"#,
                "\n",
                r#"{"user_id":"u1","video_id":"a","kind":"like","timestamp":10,"label":true}"#,
                "\n",
                r#"{"user_id":"u1","video_id":"b","kind":"click","timestamp":20,"label":false}"#,
                "\n",
                r#"{"user_id":"u1","video_id":"a","kind":"watch","timestamp":30,"label":true}"#,
                "\n",
            ),
        )
        .unwrap();
        let catalog = load_catalog(&path).unwrap();
        assert_eq!(catalog.videos().len(), 2);
        assert_eq!(catalog.users().len(), 1);
        assert_eq!(catalog.interactions().len(), 3);
        assert_eq!(catalog.dim(), Some(4));
    }

    #[test]
    fn modal_dimension_mismatch_names_the_video() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"video_id":"A","visual":[1,0,0,0],"text":[0,1,0,0],"audio":[0,0,1,0]}"#,
                "\n",
                r#"{"video_id":"B","visual":[1,0,0,0],"text":[0,1,0,0],"audio":[0,0,1]}"#,
                "\n",
            ),
        )
        .unwrap();
        let err = load_catalog(&path).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("\"B\""), "error should name B: {message}");
        assert!(message.contains("dimension mismatch"), "{message}");
    }

    #[test]
    fn dangling_reference_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"video_id":"a","visual":[1],"text":[1],"audio":[1]}"#,
                "\n",
                r#"{"user_id":"u1"}"#,
                "\n",
                r#"{"user_id":"u1","video_id":"zzz","kind":"like","timestamp":1,"label":true}"#,
                "\n",
            ),
        )
        .unwrap();
        let err = load_catalog(&path).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("unknown video"), "{message}");
        assert!(message.contains("\"zzz\""), "{message}");
    }

    #[test]
    fn parse_error_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"video_id":"a","visual":[1],"text":[1],"audio":[1]}"#,
                "\n",
                "not json\n",
            ),
        )
        .unwrap();
        match load_catalog(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn validate_flags_nan_component() {
        let mut v = video("a", 2, 1.0);
        v.text[1] = f64::NAN;
        let catalog = Catalog::new(vec![v], vec!["u".into()], vec![]);
        let violations = catalog.validate();
        assert_eq!(violations.len(), 1);
        assert!(violations[0].to_string().contains("\"a\""));
        assert!(violations[0].to_string().contains("text"));
    }

    #[test]
    fn validate_flags_duplicate_video() {
        let catalog = Catalog::new(
            vec![video("a", 2, 1.0), video("a", 2, 2.0)],
            vec!["u".into()],
            vec![],
        );
        let violations = catalog.validate();
        assert_eq!(violations.len(), 1);
        assert!(matches!(violations[0], Violation::DuplicateVideo { .. }));
    }

    #[test]
    fn validate_accepts_clean_catalog() {
        let catalog = Catalog::new(
            vec![video("a", 3, 1.0), video("b", 3, -1.0)],
            vec!["u1".into(), "u2".into()],
            vec![
                event("u1", "a", InteractionKind::Like, 5, true),
                event("u2", "b", InteractionKind::Watch, 6, false),
            ],
        );
        assert!(catalog.validate().is_empty());
    }

    #[test]
    fn positive_rule_follows_kind_and_label() {
        let like = event("u", "v", InteractionKind::Like, 0, false);
        let comment = event("u", "v", InteractionKind::Comment, 0, false);
        let click_pos = event("u", "v", InteractionKind::Click, 0, true);
        let click_neg = event("u", "v", InteractionKind::Click, 0, false);
        let watch_neg = event("u", "v", InteractionKind::Watch, 0, false);
        assert!(like.is_positive());
        assert!(comment.is_positive());
        assert!(click_pos.is_positive());
        assert!(!click_neg.is_positive());
        assert!(!watch_neg.is_positive());
    }

    #[test]
    fn round_trip_preserves_catalog() {
        let catalog = Catalog::new(
            vec![video("a", 3, 0.125), video("b", 3, -7.25e-3)],
            vec!["u1".into(), "u2".into()],
            vec![
                event("u1", "a", InteractionKind::Like, 123, true),
                event("u2", "b", InteractionKind::Click, 456, false),
            ],
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("roundtrip.jsonl");
        save_catalog(&catalog, &path).unwrap();
        let loaded = load_catalog(&path).unwrap();
        assert_eq!(loaded.videos(), catalog.videos());
        assert_eq!(loaded.users(), catalog.users());
        assert_eq!(loaded.interactions(), catalog.interactions());
    }
}
