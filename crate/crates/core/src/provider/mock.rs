//! Deterministic scripted provider for offline runs and tests.
//!
//! A scenario file maps match keys to ordered reply lists. A request is
//! matched to the first entry whose conditions all hold, and the entry's
//! replies are consumed in order: call `i` for an entry gets reply `i`. An
//! exhausted entry is an explicit script-underrun error, never a silently
//! fabricated reply.

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::model::UsageRecord;
use crate::provider::{ChatProvider, ChatRequest, ChatResponse, ProviderError};

/// Conditions selecting which requests an entry answers. All present
/// conditions must hold; an empty matcher matches every request.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMatcher {
    /// Exact match on the request model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Substring of the system message.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_contains: Option<String>,
    /// Substring of any message content.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub any_message_contains: Option<String>,
}

impl ScenarioMatcher {
    fn matches(&self, request: &ChatRequest) -> bool {
        if let Some(model) = &self.model {
            if request.model != *model {
                return false;
            }
        }
        if let Some(needle) = &self.system_contains {
            match request.system_content() {
                Some(system) if system.contains(needle.as_str()) => {}
                _ => return false,
            }
        }
        if let Some(needle) = &self.any_message_contains {
            if !request
                .messages
                .iter()
                .any(|m| m.content.contains(needle.as_str()))
            {
                return false;
            }
        }
        true
    }
}

/// One scripted reply. When token counts are omitted, deterministic usage is
/// synthesized from the request and reply text (one token per four bytes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedReply {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
}

impl ScriptedReply {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            prompt_tokens: None,
            completion_tokens: None,
        }
    }
}

/// A tagged reply list with its matcher. The tag names the role the entry
/// scripts (e.g. `interviewer`) and appears in underrun errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub tag: String,
    #[serde(default, rename = "match")]
    pub matcher: ScenarioMatcher,
    pub replies: Vec<ScriptedReply>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub entries: Vec<ScenarioEntry>,
}

impl Scenario {
    pub fn from_json(json: &str) -> Result<Self, ProviderError> {
        serde_json::from_str(json).map_err(|e| ProviderError::Scenario(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Scenario(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Deterministic mock provider: identical request sequences yield identical
/// responses and usage. Also records every request it serves, so tests can
/// assert request-shape policies such as temperatures.
pub struct ScriptedProvider {
    scenario: Scenario,
    cursors: Mutex<Vec<usize>>,
    requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedProvider {
    pub fn new(scenario: Scenario) -> Self {
        let cursors = vec![0; scenario.entries.len()];
        Self {
            scenario,
            cursors: Mutex::new(cursors),
            requests: Mutex::new(Vec::new()),
        }
    }

    /// Loads a scenario file (JSON) and wraps it in a provider.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        Ok(Self::new(Scenario::from_file(path)?))
    }

    pub fn from_json(json: &str) -> Result<Self, ProviderError> {
        Ok(Self::new(Scenario::from_json(json)?))
    }

    /// Every request served so far, in order.
    pub fn recorded_requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().expect("requests lock").clone()
    }

    fn synthesize_usage(request: &ChatRequest, reply: &ScriptedReply) -> UsageRecord {
        let prompt_bytes: usize = request.messages.iter().map(|m| m.content.len()).sum();
        UsageRecord {
            prompt_tokens: reply
                .prompt_tokens
                .unwrap_or_else(|| (prompt_bytes as u64).div_ceil(4)),
            completion_tokens: reply
                .completion_tokens
                .unwrap_or_else(|| (reply.text.len() as u64).div_ceil(4)),
        }
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        self.requests
            .lock()
            .expect("requests lock")
            .push(request.clone());

        let entry_index = self
            .scenario
            .entries
            .iter()
            .position(|entry| entry.matcher.matches(request))
            .ok_or_else(|| ProviderError::NoScenarioMatch {
                model: request.model.clone(),
            })?;
        let entry = &self.scenario.entries[entry_index];

        let mut cursors = self.cursors.lock().expect("cursors lock");
        let call_index = cursors[entry_index];
        let reply = entry.replies.get(call_index).ok_or_else(|| {
            ProviderError::ScriptUnderrun {
                tag: entry.tag.clone(),
                scripted: entry.replies.len(),
                requested: call_index + 1,
            }
        })?;
        cursors[entry_index] += 1;

        Ok(ChatResponse {
            text: reply.text.clone(),
            usage: Self::synthesize_usage(request, reply),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::ChatMessage;

    fn scenario() -> Scenario {
        Scenario {
            entries: vec![ScenarioEntry {
                tag: "interviewer".into(),
                matcher: ScenarioMatcher {
                    model: Some("mock".into()),
                    ..Default::default()
                },
                replies: vec![
                    ScriptedReply::text("Good morning"),
                    ScriptedReply::text("Tell me more"),
                    ScriptedReply::text("Thanks"),
                ],
            }],
        }
    }

    fn request(content: &str) -> ChatRequest {
        ChatRequest::new("mock", 1.0, vec![ChatMessage::user(content)]).unwrap()
    }

    #[test]
    fn scripted_reply_is_echoed_in_order() {
        let provider = ScriptedProvider::new(scenario());
        assert_eq!(provider.complete(&request("a")).unwrap().text, "Good morning");
        assert_eq!(provider.complete(&request("b")).unwrap().text, "Tell me more");
    }

    #[test]
    fn fourth_call_underruns_three_replies() {
        let provider = ScriptedProvider::new(scenario());
        for _ in 0..3 {
            provider.complete(&request("x")).unwrap();
        }
        let err = provider.complete(&request("x")).unwrap_err();
        match err {
            ProviderError::ScriptUnderrun {
                tag,
                scripted,
                requested,
            } => {
                assert_eq!(tag, "interviewer");
                assert_eq!(scripted, 3);
                assert_eq!(requested, 4);
            }
            other => panic!("expected underrun, got {other}"),
        }
    }

    #[test]
    fn explicit_usage_is_passed_through() {
        let provider = ScriptedProvider::from_json(
            r#"{"entries":[{"tag":"t","replies":[{"text":"hi","prompt_tokens":10,"completion_tokens":5}]}]}"#,
        )
        .unwrap();
        let response = provider.complete(&request("x")).unwrap();
        assert_eq!(response.usage, UsageRecord::new(10, 5));
    }

    #[test]
    fn same_scenario_run_twice_is_byte_identical() {
        let run = || {
            let provider = ScriptedProvider::new(scenario());
            let mut transcript = String::new();
            let mut usage_total = 0;
            for content in ["first", "second", "third"] {
                let response = provider.complete(&request(content)).unwrap();
                transcript.push_str(&response.text);
                transcript.push('\n');
                usage_total += response.usage.total();
            }
            (transcript, usage_total)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn matching_falls_through_to_later_entries() {
        let provider = ScriptedProvider::from_json(
            r#"{"entries":[
                {"tag":"judge","match":{"model":"judge-1"},"replies":[{"text":"verdict"}]},
                {"tag":"catchall","replies":[{"text":"anything"}]}
            ]}"#,
        )
        .unwrap();
        assert_eq!(provider.complete(&request("x")).unwrap().text, "anything");
        let judge = ChatRequest::new("judge-1", 0.0, vec![ChatMessage::user("x")]).unwrap();
        assert_eq!(provider.complete(&judge).unwrap().text, "verdict");
    }

    #[test]
    fn system_contains_discriminates_roles() {
        let provider = ScriptedProvider::from_json(
            r#"{"entries":[
                {"tag":"interviewer","match":{"system_contains":"job interviewer"},"replies":[{"text":"Good morning"}]},
                {"tag":"candidate","match":{"system_contains":"job seeker"},"replies":[{"text":"Hello"}]}
            ]}"#,
        )
        .unwrap();
        let interviewer = ChatRequest::new(
            "m",
            1.0,
            vec![ChatMessage::system("You are an AI job interviewer ...")],
        )
        .unwrap();
        let candidate = ChatRequest::new(
            "m",
            1.0,
            vec![
                ChatMessage::system("You are an AI job seeker ..."),
                ChatMessage::user("Good morning"),
            ],
        )
        .unwrap();
        assert_eq!(provider.complete(&candidate).unwrap().text, "Hello");
        assert_eq!(provider.complete(&interviewer).unwrap().text, "Good morning");
    }
}
