//! Domain records: seeds, dialogues, judgments, and their invariants.
//!
//! Every record type carries a `validate` method that is enforced at store
//! boundaries. Validation errors name the offending field so that bad data is
//! rejected with an actionable message instead of corrupting an experiment.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A record failed one of its declared invariants.
#[derive(Debug, Error)]
#[error("invalid {record}: field `{field}`: {message}")]
pub struct ValidationError {
    pub record: &'static str,
    pub field: &'static str,
    pub message: String,
}

impl ValidationError {
    fn new(record: &'static str, field: &'static str, message: impl Into<String>) -> Self {
        Self {
            record,
            field,
            message: message.into(),
        }
    }
}

/// A summarized job history used as grounding for interview generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed {
    pub id: String,
    pub summary: String,
}

impl Seed {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.id.trim().is_empty() {
            return Err(ValidationError::new("Seed", "id", "must be non-empty"));
        }
        if self.summary.trim().is_empty() {
            return Err(ValidationError::new("Seed", "summary", "must be non-empty"));
        }
        Ok(())
    }
}

/// The two interview roles. Serialized lowercase, matching the speaker labels
/// the single-prompt template demands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Interviewer,
    Candidate,
}

impl Speaker {
    pub fn label(self) -> &'static str {
        match self {
            Speaker::Interviewer => "interviewer",
            Speaker::Candidate => "candidate",
        }
    }

    pub fn other(self) -> Speaker {
        match self {
            Speaker::Interviewer => Speaker::Candidate,
            Speaker::Candidate => Speaker::Interviewer,
        }
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One turn of a dialogue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
}

impl Utterance {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.text.trim().is_empty() {
            return Err(ValidationError::new("Utterance", "text", "must be non-empty"));
        }
        Ok(())
    }
}

/// How a dialogue was produced: one transcript-emitting call, or two
/// independently prompted agents exchanging turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Dual,
    Single,
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::Dual => "dual",
            Strategy::Single => "single",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A generation method: strategy crossed with the model that executed it.
/// This is the unit win rates are computed for.
///
/// The derived ordering (strategy, then model) is the canonical order used by
/// the pairwise judging schedule and all reports.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GenerationMethod {
    pub strategy: Strategy,
    pub model: String,
}

impl GenerationMethod {
    pub fn new(strategy: Strategy, model: impl Into<String>) -> Self {
        Self {
            strategy,
            model: model.into(),
        }
    }
}

impl fmt::Display for GenerationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.strategy, self.model)
    }
}

/// Token usage reported by the provider for one chat-completion call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl UsageRecord {
    pub fn new(prompt_tokens: u64, completion_tokens: u64) -> Self {
        Self {
            prompt_tokens,
            completion_tokens,
        }
    }

    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

/// Why a dual-prompt dialogue stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationKind {
    /// The interviewer produced the exact termination phrase.
    Phrase,
    /// The hard utterance cap was reached.
    Cap,
}

/// A generated interview with its provenance and per-call token usage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub seed_id: String,
    pub method: GenerationMethod,
    pub utterances: Vec<Utterance>,
    pub usage: Vec<UsageRecord>,
    pub normalized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminated: Option<TerminationKind>,
}

impl Dialogue {
    /// Deterministic dialogue id for a (seed, method) pair.
    pub fn derive_id(seed_id: &str, method: &GenerationMethod) -> String {
        format!("{seed_id}/{method}")
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.id.trim().is_empty() {
            return Err(ValidationError::new("Dialogue", "id", "must be non-empty"));
        }
        if self.seed_id.trim().is_empty() {
            return Err(ValidationError::new("Dialogue", "seed_id", "must be non-empty"));
        }
        if self.utterances.len() < 2 {
            return Err(ValidationError::new(
                "Dialogue",
                "utterances",
                format!("must contain at least 2 utterances, got {}", self.utterances.len()),
            ));
        }
        for utterance in &self.utterances {
            utterance.validate()?;
        }
        if self.method.strategy == Strategy::Dual {
            for (index, utterance) in self.utterances.iter().enumerate() {
                let expected = if index % 2 == 0 {
                    Speaker::Interviewer
                } else {
                    Speaker::Candidate
                };
                if utterance.speaker != expected {
                    return Err(ValidationError::new(
                        "Dialogue",
                        "utterances",
                        format!(
                            "dual dialogues alternate starting with the interviewer; \
                             utterance {} is {}",
                            index + 1,
                            utterance.speaker
                        ),
                    ));
                }
            }
        }
        if self.normalized {
            for (index, utterance) in self.utterances.iter().enumerate() {
                if utterance.text.lines().any(|line| line.trim().is_empty()) {
                    return Err(ValidationError::new(
                        "Dialogue",
                        "utterances",
                        format!("normalized dialogue contains a blank line in utterance {}", index + 1),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// A judge's decision over one ordered presentation of two dialogues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    /// Conversation 1 was judged more likely AI-generated.
    First,
    /// Conversation 2 was judged more likely AI-generated.
    Second,
    Tie,
}

/// How the judge's raw response was decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    /// Strict JSON parse succeeded on the first attempt.
    Ok,
    /// The verdict was salvaged, either by stripping wrappers or by re-asking.
    Recovered,
    /// No verdict could be decoded; the judgment is kept but never tallied.
    Invalid,
}

/// One ordered pairwise judgment: which presented conversation the judge
/// considered more likely AI-generated (or a tie), plus the raw evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub id: String,
    pub seed_id: String,
    pub judge_model: String,
    pub first: GenerationMethod,
    pub second: GenerationMethod,
    pub choice: Option<Choice>,
    pub reason: String,
    pub raw_response: String,
    pub parse_status: ParseStatus,
    /// Usage of the judge calls behind this judgment, tracked separately from
    /// generation usage.
    #[serde(default)]
    pub usage: Vec<UsageRecord>,
}

impl Judgment {
    /// Deterministic judgment id for a (seed, judge, ordered pair) key.
    pub fn derive_id(
        seed_id: &str,
        judge_model: &str,
        first: &GenerationMethod,
        second: &GenerationMethod,
    ) -> String {
        format!("{seed_id}/{judge_model}/{first}-vs-{second}")
    }

    pub fn is_valid(&self) -> bool {
        self.parse_status != ParseStatus::Invalid
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.id.trim().is_empty() {
            return Err(ValidationError::new("Judgment", "id", "must be non-empty"));
        }
        if self.seed_id.trim().is_empty() {
            return Err(ValidationError::new("Judgment", "seed_id", "must be non-empty"));
        }
        if self.judge_model.trim().is_empty() {
            return Err(ValidationError::new("Judgment", "judge_model", "must be non-empty"));
        }
        if self.first == self.second {
            return Err(ValidationError::new(
                "Judgment",
                "second",
                format!("compared methods must differ, both are {}", self.first),
            ));
        }
        match (self.choice, self.parse_status) {
            (None, ParseStatus::Invalid) | (Some(_), ParseStatus::Ok | ParseStatus::Recovered) => Ok(()),
            (Some(_), ParseStatus::Invalid) => Err(ValidationError::new(
                "Judgment",
                "choice",
                "must be absent when parse_status is invalid",
            )),
            (None, _) => Err(ValidationError::new(
                "Judgment",
                "choice",
                "must be present when parse_status is not invalid",
            )),
        }
    }
}
