//! Append-only JSONL persistence for an experiment directory.
//!
//! An experiment directory holds four files:
//!
//! - `manifest.json` — config snapshot, seed ids, and a content hash that
//!   gates resumption
//! - `seeds.jsonl`, `dialogues.jsonl`, `judgments.jsonl` — one record per
//!   line, UTF-8
//!
//! Writes are single-writer appends; every record is validated before it is
//! written and ids are never reused. Loading an experiment round-trips every
//! record and reports malformed lines with their line number.

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{Dialogue, Judgment, Seed, ValidationError};

pub const SEEDS_FILE: &str = "seeds.jsonl";
pub const DIALOGUES_FILE: &str = "dialogues.jsonl";
pub const JUDGMENTS_FILE: &str = "judgments.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("{file}:{line}: malformed record: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("manifest hash mismatch (stale config): manifest has {stored}, current config yields {computed}")]
    StaleConfig { stored: String, computed: String },
    #[error("manifest content hash is inconsistent with its own config and seed list")]
    CorruptManifest,
}

impl StoreError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        StoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Retry policy snapshot recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrySnapshot {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub factor: f64,
}

/// The configuration slice that defines an experiment's identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestConfig {
    pub generation_models: Vec<String>,
    /// Judges are recorded for provenance but excluded from the content hash:
    /// re-judging frozen dialogues with a new judge is an intended workflow.
    pub judge_models: Vec<String>,
    pub generation_temperature: f64,
    pub judge_temperature: f64,
    pub max_utterances: usize,
    pub termination_phrase: String,
    /// Fingerprint of all prompt templates in effect.
    pub prompt_hash: String,
    pub retry: RetrySnapshot,
}

/// Immutable description of an experiment: config snapshot, seed ids, and the
/// content hash that guards against resuming with a changed configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub config: ManifestConfig,
    pub seed_ids: Vec<String>,
    pub content_hash: String,
}

impl ExperimentManifest {
    pub fn new(config: ManifestConfig, seed_ids: Vec<String>) -> Self {
        let content_hash = compute_content_hash(&config, &seed_ids);
        Self {
            config,
            seed_ids,
            content_hash,
        }
    }

    /// Checks that the stored hash matches the manifest's own contents.
    pub fn verify(&self) -> Result<(), StoreError> {
        let computed = compute_content_hash(&self.config, &self.seed_ids);
        if computed != self.content_hash {
            return Err(StoreError::CorruptManifest);
        }
        Ok(())
    }
}

/// Deterministic hash over the generation-relevant config and the seed list.
///
/// Judge models and retry settings are deliberately left out: neither changes
/// what the stored dialogues are, and re-judging with additional judges must
/// not be rejected as a stale config.
pub fn compute_content_hash(config: &ManifestConfig, seed_ids: &[String]) -> String {
    #[derive(Serialize)]
    struct HashInput<'a> {
        generation_models: &'a [String],
        generation_temperature: f64,
        judge_temperature: f64,
        max_utterances: usize,
        termination_phrase: &'a str,
        prompt_hash: &'a str,
        seed_ids: &'a [String],
    }
    let input = HashInput {
        generation_models: &config.generation_models,
        generation_temperature: config.generation_temperature,
        judge_temperature: config.judge_temperature,
        max_utterances: config.max_utterances,
        termination_phrase: &config.termination_phrase,
        prompt_hash: &config.prompt_hash,
        seed_ids,
    };
    let bytes = serde_json::to_vec(&input).expect("hash input serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Any record the store can append.
#[derive(Debug, Clone)]
pub enum Record {
    Seed(Seed),
    Dialogue(Dialogue),
    Judgment(Judgment),
}

/// Everything persisted in one experiment directory.
#[derive(Debug, Default)]
pub struct ExperimentData {
    pub manifest: Option<ExperimentManifest>,
    pub seeds: Vec<Seed>,
    pub dialogues: Vec<Dialogue>,
    pub judgments: Vec<Judgment>,
}

/// Handle on an experiment directory with duplicate-id tracking.
#[derive(Debug)]
pub struct ExperimentStore {
    dir: PathBuf,
    seed_ids: HashSet<String>,
    dialogue_ids: HashSet<String>,
    judgment_ids: HashSet<String>,
}

impl ExperimentStore {
    /// Opens (creating if needed) an experiment directory and indexes the ids
    /// of any existing records. Fails if an existing file does not parse.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| StoreError::io(&dir, e))?;
        let mut store = Self {
            dir,
            seed_ids: HashSet::new(),
            dialogue_ids: HashSet::new(),
            judgment_ids: HashSet::new(),
        };
        let data = store.load()?;
        store.seed_ids = data.seeds.into_iter().map(|s| s.id).collect();
        store.dialogue_ids = data.dialogues.into_iter().map(|d| d.id).collect();
        store.judgment_ids = data.judgments.into_iter().map(|j| j.id).collect();
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn contains_seed(&self, id: &str) -> bool {
        self.seed_ids.contains(id)
    }

    pub fn contains_dialogue(&self, id: &str) -> bool {
        self.dialogue_ids.contains(id)
    }

    pub fn contains_judgment(&self, id: &str) -> bool {
        self.judgment_ids.contains(id)
    }

    /// Validates and appends one record as a single JSONL line, returning its
    /// id. Ids are never reused; a re-append of an existing id is an error.
    pub fn append_record(&mut self, record: Record) -> Result<String, StoreError> {
        match record {
            Record::Seed(seed) => {
                seed.validate()?;
                if !self.seed_ids.insert(seed.id.clone()) {
                    return Err(StoreError::DuplicateId {
                        kind: "seed",
                        id: seed.id,
                    });
                }
                self.append_line(SEEDS_FILE, &seed)?;
                Ok(seed.id)
            }
            Record::Dialogue(dialogue) => {
                dialogue.validate()?;
                if !self.dialogue_ids.insert(dialogue.id.clone()) {
                    return Err(StoreError::DuplicateId {
                        kind: "dialogue",
                        id: dialogue.id,
                    });
                }
                self.append_line(DIALOGUES_FILE, &dialogue)?;
                Ok(dialogue.id)
            }
            Record::Judgment(judgment) => {
                judgment.validate()?;
                if !self.judgment_ids.insert(judgment.id.clone()) {
                    return Err(StoreError::DuplicateId {
                        kind: "judgment",
                        id: judgment.id,
                    });
                }
                self.append_line(JUDGMENTS_FILE, &judgment)?;
                Ok(judgment.id)
            }
        }
    }

    pub fn append_seed(&mut self, seed: Seed) -> Result<String, StoreError> {
        self.append_record(Record::Seed(seed))
    }

    pub fn append_dialogue(&mut self, dialogue: Dialogue) -> Result<String, StoreError> {
        self.append_record(Record::Dialogue(dialogue))
    }

    pub fn append_judgment(&mut self, judgment: Judgment) -> Result<String, StoreError> {
        self.append_record(Record::Judgment(judgment))
    }

    /// Writes (or overwrites) the manifest after verifying its internal hash.
    pub fn write_manifest(&self, manifest: &ExperimentManifest) -> Result<(), StoreError> {
        manifest.verify()?;
        let path = self.dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        fs::write(&path, json).map_err(|e| StoreError::io(&path, e))
    }

    /// Loads the whole experiment. Missing files yield empty collections; a
    /// malformed line is an error naming the file and line number.
    pub fn load(&self) -> Result<ExperimentData, StoreError> {
        let manifest = self.load_manifest()?;
        let seeds = self.load_jsonl::<Seed>(SEEDS_FILE)?;
        let dialogues = self.load_jsonl::<Dialogue>(DIALOGUES_FILE)?;
        let judgments = self.load_jsonl::<Judgment>(JUDGMENTS_FILE)?;
        Ok(ExperimentData {
            manifest,
            seeds,
            dialogues,
            judgments,
        })
    }

    pub fn load_manifest(&self) -> Result<Option<ExperimentManifest>, StoreError> {
        let path = self.dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| StoreError::io(&path, e))?;
        let manifest: ExperimentManifest =
            serde_json::from_str(&text).map_err(|e| StoreError::Parse {
                file: MANIFEST_FILE.to_string(),
                line: e.line(),
                message: e.to_string(),
            })?;
        manifest.verify()?;
        Ok(Some(manifest))
    }

    fn load_jsonl<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<Vec<T>, StoreError> {
        let path = self.dir.join(name);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let file = File::open(&path).map_err(|e| StoreError::io(&path, e))?;
        let reader = BufReader::new(file);
        let mut records = Vec::new();
        for (index, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| StoreError::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: T = serde_json::from_str(&line).map_err(|e| StoreError::Parse {
                file: name.to_string(),
                line: index + 1,
                message: e.to_string(),
            })?;
            records.push(record);
        }
        Ok(records)
    }

    fn append_line<T: Serialize>(&self, name: &str, record: &T) -> Result<(), StoreError> {
        let path = self.dir.join(name);
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| StoreError::io(&path, e))?;
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        file.write_all(line.as_bytes())
            .map_err(|e| StoreError::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GenerationMethod, Speaker, Strategy, Utterance};
    use tempfile::tempdir;

    fn seed(id: &str) -> Seed {
        Seed {
            id: id.into(),
            summary: "worked in retail".into(),
        }
    }

    fn dialogue(seed_id: &str, strategy: Strategy, model: &str) -> Dialogue {
        let method = GenerationMethod::new(strategy, model);
        Dialogue {
            id: Dialogue::derive_id(seed_id, &method),
            seed_id: seed_id.into(),
            method,
            utterances: vec![
                Utterance {
                    speaker: Speaker::Interviewer,
                    text: "Good morning".into(),
                },
                Utterance {
                    speaker: Speaker::Candidate,
                    text: "Good morning to you".into(),
                },
            ],
            usage: vec![],
            normalized: false,
            terminated: None,
        }
    }

    fn test_manifest(seed_ids: Vec<String>) -> ExperimentManifest {
        ExperimentManifest::new(
            ManifestConfig {
                generation_models: vec!["m1".into()],
                judge_models: vec!["j1".into()],
                generation_temperature: 1.0,
                judge_temperature: 0.0,
                max_utterances: 30,
                termination_phrase: "done".into(),
                prompt_hash: "abc".into(),
                retry: RetrySnapshot {
                    max_attempts: 5,
                    base_delay_ms: 1000,
                    factor: 2.0,
                },
            },
            seed_ids,
        )
    }

    #[test]
    fn append_grows_file_by_one_line() {
        let dir = tempdir().unwrap();
        let mut store = ExperimentStore::open(dir.path()).unwrap();
        let id = store.append_seed(seed("s1")).unwrap();
        assert_eq!(id, "s1");
        let content = std::fs::read_to_string(dir.path().join(SEEDS_FILE)).unwrap();
        assert_eq!(content.lines().count(), 1);
    }

    #[test]
    fn one_utterance_dialogue_is_rejected() {
        let dir = tempdir().unwrap();
        let mut store = ExperimentStore::open(dir.path()).unwrap();
        let mut d = dialogue("s1", Strategy::Dual, "m");
        d.utterances.truncate(1);
        let err = store.append_dialogue(d).unwrap_err();
        assert!(matches!(err, StoreError::Validation(_)), "{err}");
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let dir = tempdir().unwrap();
        let mut store = ExperimentStore::open(dir.path()).unwrap();
        store.append_seed(seed("s1")).unwrap();
        let err = store.append_seed(seed("s1")).unwrap_err();
        assert!(matches!(err, StoreError::DuplicateId { .. }), "{err}");
    }

    #[test]
    fn duplicate_id_survives_reopen() {
        let dir = tempdir().unwrap();
        {
            let mut store = ExperimentStore::open(dir.path()).unwrap();
            store.append_seed(seed("s1")).unwrap();
        }
        let mut store = ExperimentStore::open(dir.path()).unwrap();
        assert!(store.contains_seed("s1"));
        assert!(store.append_seed(seed("s1")).is_err());
    }

    #[test]
    fn empty_store_loads_empty_collections() {
        let dir = tempdir().unwrap();
        let store = ExperimentStore::open(dir.path()).unwrap();
        let data = store.load().unwrap();
        assert!(data.manifest.is_none());
        assert!(data.seeds.is_empty());
        assert!(data.dialogues.is_empty());
        assert!(data.judgments.is_empty());
    }

    #[test]
    fn truncated_final_line_reports_line_number() {
        let dir = tempdir().unwrap();
        let mut store = ExperimentStore::open(dir.path()).unwrap();
        store.append_seed(seed("s1")).unwrap();
        let path = dir.path().join(SEEDS_FILE);
        let mut content = std::fs::read_to_string(&path).unwrap();
        content.push_str("{\"id\":\"s2\",\"summ");
        std::fs::write(&path, content).unwrap();

        let err = ExperimentStore::open(dir.path()).unwrap_err();
        match err {
            StoreError::Parse { file, line, .. } => {
                assert_eq!(file, SEEDS_FILE);
                assert_eq!(line, 2);
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn load_round_trips_records() {
        let dir = tempdir().unwrap();
        let mut store = ExperimentStore::open(dir.path()).unwrap();
        let s = seed("s1");
        let d = dialogue("s1", Strategy::Dual, "m");
        store.append_seed(s.clone()).unwrap();
        store.append_dialogue(d.clone()).unwrap();
        let data = store.load().unwrap();
        assert_eq!(data.seeds, vec![s]);
        assert_eq!(data.dialogues, vec![d]);
    }

    #[test]
    fn manifest_round_trip_and_hash_check() {
        let dir = tempdir().unwrap();
        let store = ExperimentStore::open(dir.path()).unwrap();
        let manifest = test_manifest(vec!["s1".into(), "s2".into()]);
        store.write_manifest(&manifest).unwrap();
        let loaded = store.load_manifest().unwrap().unwrap();
        assert_eq!(loaded, manifest);
    }

    #[test]
    fn tampered_manifest_is_rejected() {
        let dir = tempdir().unwrap();
        let store = ExperimentStore::open(dir.path()).unwrap();
        let manifest = test_manifest(vec!["s1".into()]);
        store.write_manifest(&manifest).unwrap();

        let path = dir.path().join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"m1\"", "\"m2\"");
        std::fs::write(&path, text).unwrap();

        let err = store.load_manifest().unwrap_err();
        assert!(matches!(err, StoreError::CorruptManifest), "{err}");
    }

    #[test]
    fn hash_changes_with_seeds_and_ignores_judges() {
        let a = test_manifest(vec!["s1".into()]);
        let b = test_manifest(vec!["s1".into(), "s2".into()]);
        assert_ne!(a.content_hash, b.content_hash);

        let mut c = test_manifest(vec!["s1".into()]);
        c.config.judge_models.push("j2".into());
        let c = ExperimentManifest::new(c.config, c.seed_ids);
        assert_eq!(a.content_hash, c.content_hash);
    }
}
