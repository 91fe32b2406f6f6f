//! Translation agents: language detection, intent resolution, the
//! translation engines (recurrent NMT, remote chat service, and a
//! deterministic mock), and the routed workflow graph that ties them
//! together.

mod chat;
mod detect;
mod intent;
mod nmt;
mod pipeline;

pub use chat::{llm_translate, ChatBackend, ChatClientConfig, MockScript};
pub use detect::analyze_language;
pub use intent::{determine_intent, IntentResolution};
pub use nmt::{nmt_translate, NmtEngine};
pub use pipeline::{build_translation_graph, TranslatorEngine};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use polytrans_core::seq2seq::AttentionMatrix;

/// The three languages the system routes between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LanguageCode {
    #[serde(rename = "EN")]
    En,
    #[serde(rename = "FR")]
    Fr,
    #[serde(rename = "JP")]
    Jp,
}

impl LanguageCode {
    pub const ALL: [LanguageCode; 3] = [LanguageCode::En, LanguageCode::Fr, LanguageCode::Jp];

    pub fn as_str(&self) -> &'static str {
        match self {
            LanguageCode::En => "EN",
            LanguageCode::Fr => "FR",
            LanguageCode::Jp => "JP",
        }
    }

    /// English name used in prompts.
    pub fn display_name(&self) -> &'static str {
        match self {
            LanguageCode::En => "English",
            LanguageCode::Fr => "French",
            LanguageCode::Jp => "Japanese",
        }
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LanguageCode {
    type Err = TranslateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "en" => Ok(LanguageCode::En),
            "fr" => Ok(LanguageCode::Fr),
            "jp" => Ok(LanguageCode::Jp),
            other => Err(TranslateError::UnknownLanguage {
                code: other.to_string(),
            }),
        }
    }
}

/// Maps each language to the graph node that serves it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingTable {
    pub en: String,
    pub fr: String,
    pub jp: String,
}

impl Default for RoutingTable {
    fn default() -> Self {
        Self {
            en: "translateToEN".to_string(),
            fr: "translateToFrench".to_string(),
            jp: "translateToJP".to_string(),
        }
    }
}

impl RoutingTable {
    pub fn node_for(&self, code: LanguageCode) -> &str {
        match code {
            LanguageCode::En => &self.en,
            LanguageCode::Fr => &self.fr,
            LanguageCode::Jp => &self.jp,
        }
    }

    pub fn nodes(&self) -> [&str; 3] {
        [&self.en, &self.fr, &self.jp]
    }
}

/// Which engine produced a translation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Nmt,
    Llm,
    Mock,
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::Nmt => "nmt",
            EngineKind::Llm => "llm",
            EngineKind::Mock => "mock",
        })
    }
}

/// A completed translation. `attention` is present exactly when the
/// recurrent NMT engine produced the output.
#[derive(Debug, Clone)]
pub struct TranslationResult {
    pub output_text: String,
    pub engine: EngineKind,
    pub target: LanguageCode,
    pub attention: Option<AttentionMatrix>,
}

/// Failures across detection, intent resolution and the engines.
#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("empty input text")]
    EmptyInput,
    #[error("unknown language code `{code}`")]
    UnknownLanguage { code: String },
    #[error("cannot determine a target language: no directive found and no default configured")]
    IntentUnresolved,
    #[error("conflicting directives: prefix says {prefix}, keyword clause says {keyword}")]
    DirectiveConflict {
        prefix: LanguageCode,
        keyword: LanguageCode,
    },
    #[error("engine translates to {engine_target}, not {requested}")]
    DirectionMismatch {
        engine_target: LanguageCode,
        requested: LanguageCode,
    },
    #[error("source language {detected} does not match the engine's source {engine_source}")]
    SourceMismatch {
        detected: LanguageCode,
        engine_source: LanguageCode,
    },
    #[error("input too long for the translation model: {0}")]
    OverLength(polytrans_core::seq2seq::ModelError),
    #[error("model failure: {0}")]
    Model(polytrans_core::seq2seq::ModelError),
    #[error("invalid endpoint `{endpoint}`: {reason}")]
    InvalidEndpoint { endpoint: String, reason: String },
    #[error("auth token variable `{var}` is not set")]
    MissingToken { var: String },
    #[error("transport failure talking to {endpoint}: {reason}")]
    Transport { endpoint: String, reason: String },
    #[error("{endpoint} answered HTTP {status}")]
    HttpStatus { endpoint: String, status: u16 },
    #[error("malformed response from {endpoint}: {reason}")]
    MalformedResponse { endpoint: String, reason: String },
    #[error("timed out after {seconds}s waiting for {endpoint}")]
    Timeout { endpoint: String, seconds: u64 },
    #[error("cannot read mock script {path}: {reason}")]
    Script { path: String, reason: String },
}

impl TranslateError {
    /// Stable discriminant used in graph handler errors and traces.
    pub fn kind(&self) -> &'static str {
        match self {
            TranslateError::EmptyInput => "empty_input",
            TranslateError::UnknownLanguage { .. } => "unknown_language",
            TranslateError::IntentUnresolved => "intent_unresolved",
            TranslateError::DirectiveConflict { .. } => "directive_conflict",
            TranslateError::DirectionMismatch { .. } => "direction_mismatch",
            TranslateError::SourceMismatch { .. } => "source_mismatch",
            TranslateError::OverLength(_) => "over_length",
            TranslateError::Model(_) => "model",
            TranslateError::InvalidEndpoint { .. } => "invalid_endpoint",
            TranslateError::MissingToken { .. } => "missing_token",
            TranslateError::Transport { .. } => "transport",
            TranslateError::HttpStatus { .. } => "http_status",
            TranslateError::MalformedResponse { .. } => "malformed_response",
            TranslateError::Timeout { .. } => "timeout",
            TranslateError::Script { .. } => "script",
        }
    }
}

/// Engines keyed by target language; must be total over
/// [`LanguageCode`] for graph construction.
pub type EngineMap = BTreeMap<LanguageCode, TranslatorEngine>;
