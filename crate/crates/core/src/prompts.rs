//! Prompt templates and interpolation.
//!
//! The five experiment templates ship as text files under `prompts/` and are
//! embedded verbatim; placeholders use `{name}` syntax. All of them can be
//! overridden from files, subject to the same placeholder validation.

use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

/// The exact interviewer sentence that ends a dual-prompt dialogue.
pub const TERMINATION_PHRASE: &str = "I got what I needed, thank you for your time.";

pub const INTERVIEWER_SYSTEM: &str = include_str!("../prompts/interviewer_system.txt");
pub const CANDIDATE_SYSTEM: &str = include_str!("../prompts/candidate_system.txt");
pub const SINGLE_SYSTEM: &str = include_str!("../prompts/single_system.txt");
pub const SINGLE_USER: &str = include_str!("../prompts/single_user.txt");
pub const JUDGE: &str = include_str!("../prompts/judge.txt");
pub const SUMMARIZE_SYSTEM: &str = include_str!("../prompts/summarize_system.txt");
pub const SUMMARIZE_USER: &str = include_str!("../prompts/summarize_user.txt");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("failed to read prompt template {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("prompt template `{template}` is missing required text: {missing}")]
    MissingText {
        template: &'static str,
        missing: String,
    },
}

/// The full set of templates used by one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    pub interviewer_system: String,
    pub candidate_system: String,
    pub single_system: String,
    pub single_user: String,
    pub judge: String,
    pub summarize_system: String,
    pub summarize_user: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptSet {
    /// The embedded templates.
    pub fn builtin() -> Self {
        Self {
            interviewer_system: INTERVIEWER_SYSTEM.to_string(),
            candidate_system: CANDIDATE_SYSTEM.to_string(),
            single_system: SINGLE_SYSTEM.to_string(),
            single_user: SINGLE_USER.to_string(),
            judge: JUDGE.to_string(),
            summarize_system: SUMMARIZE_SYSTEM.to_string(),
            summarize_user: SUMMARIZE_USER.to_string(),
        }
    }

    /// Replaces one template from a file and re-validates the set.
    pub fn override_from_file(
        &mut self,
        which: PromptKind,
        path: impl AsRef<Path>,
    ) -> Result<(), PromptError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PromptError::Read {
            path: path.display().to_string(),
            source,
        })?;
        *self.slot_mut(which) = text;
        self.validate()
    }

    fn slot_mut(&mut self, which: PromptKind) -> &mut String {
        match which {
            PromptKind::InterviewerSystem => &mut self.interviewer_system,
            PromptKind::CandidateSystem => &mut self.candidate_system,
            PromptKind::SingleSystem => &mut self.single_system,
            PromptKind::SingleUser => &mut self.single_user,
            PromptKind::Judge => &mut self.judge,
            PromptKind::SummarizeSystem => &mut self.summarize_system,
            PromptKind::SummarizeUser => &mut self.summarize_user,
        }
    }

    /// Checks the placeholders and fixed instructions each template must
    /// carry for the pipeline to function.
    pub fn validate(&self) -> Result<(), PromptError> {
        let required: [(&'static str, &str, &[&str]); 4] = [
            (
                "interviewer_system",
                &self.interviewer_system,
                &[TERMINATION_PHRASE, "Use those exact words."],
            ),
            ("candidate_system", &self.candidate_system, &["{seed}"]),
            ("single_user", &self.single_user, &["{seed}"]),
            ("judge", &self.judge, &["{dialog1}", "{dialog2}"]),
        ];
        for (template, text, needles) in required {
            for needle in needles {
                if !text.contains(needle) {
                    return Err(PromptError::MissingText {
                        template,
                        missing: (*needle).to_string(),
                    });
                }
            }
        }
        if !self.summarize_user.contains("{history}") {
            return Err(PromptError::MissingText {
                template: "summarize_user",
                missing: "{history}".to_string(),
            });
        }
        Ok(())
    }

    /// Fingerprint over all templates, recorded in the experiment manifest.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for text in [
            &self.interviewer_system,
            &self.candidate_system,
            &self.single_system,
            &self.single_user,
            &self.judge,
            &self.summarize_system,
            &self.summarize_user,
        ] {
            hasher.update((text.len() as u64).to_le_bytes());
            hasher.update(text.as_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Identifies one template slot for overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    InterviewerSystem,
    CandidateSystem,
    SingleSystem,
    SingleUser,
    Judge,
    SummarizeSystem,
    SummarizeUser,
}

/// Replaces every `{placeholder}` occurrence with `value`.
pub fn interpolate(template: &str, placeholder: &str, value: &str) -> String {
    template.replace(&format!("{{{placeholder}}}"), value)
}
