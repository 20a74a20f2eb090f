//! Chat-model steps: ranking likely misplaced methods, choosing a target
//! class from packed summaries, and sorting every raw answer into
//! hallucination buckets.
//!
//! Prompts end with a fenced JSON payload holding the structured input; the
//! model must answer with a JSON envelope. Mock providers read the payload
//! back, which keeps offline runs deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::hash::Hasher;
use std::sync::Mutex;
use std::time::Duration;

use fnv::FnvHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::embedding::MoveCandidate;
use crate::filter::{check_feasibility, sanity_reasons};
use crate::model::{resolve_type, ClassInfo, MethodInfo, MethodRef, ProjectIndex};
use crate::retrieval::ClassSummary;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("chat provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("malformed {task} response after retry: {detail}")]
    MalformedResponse { task: String, detail: String },
    #[error("{0} needs at least one input item")]
    EmptyInput(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

pub trait ChatProvider: Send + Sync {
    fn model_id(&self) -> String;

    fn temperature(&self) -> f64 {
        0.0
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for Box<P> {
    fn model_id(&self) -> String {
        (**self).model_id()
    }
    fn temperature(&self) -> f64 {
        (**self).temperature()
    }
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        (**self).complete(messages)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for std::sync::Arc<P> {
    fn model_id(&self) -> String {
        (**self).model_id()
    }
    fn temperature(&self) -> f64 {
        (**self).temperature()
    }
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        (**self).complete(messages)
    }
}

/// Chat-completions over HTTP: `{model, temperature, messages}` in,
/// `choices[0].message.content` out.
#[derive(Debug, Clone)]
pub struct HttpChatProvider {
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub timeout: Duration,
}

impl HttpChatProvider {
    /// Reads `CHAT_API_URL`, `CHAT_API_KEY`, `CHAT_MODEL` and
    /// `CHAT_TEMPERATURE` (default 0).
    pub fn from_env() -> Option<Self> {
        let url = std::env::var("CHAT_API_URL").ok()?;
        Some(Self {
            url,
            api_key: std::env::var("CHAT_API_KEY").ok(),
            model: std::env::var("CHAT_MODEL").unwrap_or_else(|_| "default".into()),
            temperature: std::env::var("CHAT_TEMPERATURE")
                .ok()
                .and_then(|t| t.parse().ok())
                .unwrap_or(0.0),
            timeout: Duration::from_secs(120),
        })
    }
}

impl ChatProvider for HttpChatProvider {
    fn model_id(&self) -> String {
        self.model.clone()
    }

    fn temperature(&self) -> f64 {
        self.temperature
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        let mut req = agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let body =
            json!({ "model": self.model, "temperature": self.temperature, "messages": messages });
        let resp: Value = req
            .send_json(body)
            .map_err(|e| LlmError::ProviderUnavailable(e.to_string()))?
            .into_json()
            .map_err(|e| LlmError::ProviderUnavailable(format!("bad response: {e}")))?;
        resp.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| LlmError::ProviderUnavailable("response has no message content".into()))
    }
}

/// One request/response pair, kept for the run record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub task: String,
    pub attempt: u32,
    pub messages: Vec<ChatMessage>,
    pub response: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SuggestionSource {
    MethodRanking,
    TargetSelection,
}

/// A model answer before any validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSuggestion {
    pub host: String,
    pub method: String,
    /// Absent for method-ranking answers.
    pub target: Option<String>,
    pub rationale: String,
    pub source: SuggestionSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bucket {
    H1,
    H2,
    H3,
    #[serde(rename = "VALID")]
    Valid,
}

impl Bucket {
    pub const ALL: [Bucket; 4] = [Bucket::H1, Bucket::H2, Bucket::H3, Bucket::Valid];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub bucket: Bucket,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportItem {
    pub suggestion: RawSuggestion,
    pub bucket: Bucket,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HallucinationReport {
    pub counts: BTreeMap<Bucket, usize>,
    pub items: Vec<ReportItem>,
}

impl Default for HallucinationReport {
    fn default() -> Self {
        Self {
            counts: Bucket::ALL.iter().map(|b| (*b, 0)).collect(),
            items: Vec::new(),
        }
    }
}

impl HallucinationReport {
    pub fn record(&mut self, suggestion: RawSuggestion, c: Classification) {
        *self.counts.entry(c.bucket).or_default() += 1;
        self.items.push(ReportItem {
            suggestion,
            bucket: c.bucket,
            reasons: c.reasons,
        });
    }

    pub fn count(&self, bucket: Bucket) -> usize {
        self.counts.get(&bucket).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn merge(&mut self, other: HallucinationReport) {
        for item in other.items {
            let c = Classification {
                bucket: item.bucket,
                reasons: item.reasons,
            };
            self.record(item.suggestion, c);
        }
    }
}

/// Finds a method of `class` from the way a model spelled it: a full key
/// `name(T1,T2)`, optionally prefixed by the class, or a bare name that is
/// not overloaded.
pub fn resolve_method<'c>(class: &'c ClassInfo, text: &str) -> Option<&'c MethodInfo> {
    let text = text.trim();
    let text = text.rsplit_once('#').map_or(text, |(_, m)| m);
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if let Some(m) = class.method(&compact) {
        return Some(m);
    }
    let name = compact.split('(').next().unwrap_or(&compact);
    let name = name.rsplit('.').next().unwrap_or(name);
    let mut named = class.methods.iter().filter(|m| m.name == name);
    match (named.next(), named.next()) {
        (Some(m), None) => Some(m),
        _ => None,
    }
}

/// Finds a class from a model's spelling: qualified name, a name visible
/// from the host, or a unique simple name.
pub fn resolve_class<'i>(
    index: &'i ProjectIndex,
    host: &ClassInfo,
    text: &str,
) -> Option<&'i ClassInfo> {
    let text = text.trim();
    if let Some(c) = index.class(text) {
        return Some(c);
    }
    if let Some(c) = resolve_type(index, host, text).and_then(|qn| index.class(&qn)) {
        return Some(c);
    }
    if text.contains('.') {
        return None;
    }
    let mut same = index.classes.values().filter(|c| c.simple_name() == text);
    match (same.next(), same.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

/// Buckets are tested in order: H1 (target missing from the index), H3
/// (method unknown or fails the sanity filter), H2 (move infeasible), then
/// VALID. Method-ranking answers carry no target and skip the H1 and H2
/// tests.
pub fn classify_suggestion(
    index: &ProjectIndex,
    raw: &RawSuggestion,
    host: &ClassInfo,
) -> Classification {
    let target = match &raw.target {
        Some(t) => match resolve_class(index, host, t) {
            Some(c) => Some(c),
            None => {
                return Classification {
                    bucket: Bucket::H1,
                    reasons: vec!["TARGET_NOT_FOUND".into()],
                }
            }
        },
        None => None,
    };
    let Some(m) = resolve_method(host, &raw.method) else {
        return Classification {
            bucket: Bucket::H3,
            reasons: vec!["UNKNOWN_METHOD".into()],
        };
    };
    let failed = sanity_reasons(m);
    if !failed.is_empty() {
        return Classification {
            bucket: Bucket::H3,
            reasons: failed.iter().map(json_name).collect(),
        };
    }
    if let Some(t) = target {
        match check_feasibility(index, &host.method_ref(m), &t.qualified_name) {
            Ok(v) if v.feasible => {}
            Ok(v) => {
                return Classification {
                    bucket: Bucket::H2,
                    reasons: v.reasons.iter().map(json_name).collect(),
                }
            }
            Err(e) => {
                return Classification {
                    bucket: Bucket::H2,
                    reasons: vec![e.to_string()],
                }
            }
        }
    }
    Classification {
        bucket: Bucket::Valid,
        reasons: Vec::new(),
    }
}

fn json_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

const SYSTEM_PROMPT: &str = "You are a senior Java engineer reviewing class design. \
Answer with a single JSON object and nothing else.";

fn with_payload(text: &str, payload: &Value) -> String {
    format!(
        "{text}\n\n```json\n{}\n```",
        serde_json::to_string_pretty(payload).expect("payload serializes")
    )
}

/// The JSON payload at the end of the last user message.
pub fn prompt_payload(messages: &[ChatMessage]) -> Option<Value> {
    let last = messages
        .iter()
        .rev()
        .find(|m| m.role == "user" && m.content.contains("```json"))?;
    let start = last.content.rfind("```json")? + "```json".len();
    let rest = &last.content[start..];
    let end = rest.find("```")?;
    serde_json::from_str(rest[..end].trim()).ok()
}

fn parse_envelope<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    if let Ok(v) = serde_json::from_str(text.trim()) {
        return Ok(v);
    }
    let (Some(a), Some(b)) = (text.find('{'), text.rfind('}')) else {
        return Err("no JSON object in the answer".into());
    };
    if b < a {
        return Err("no JSON object in the answer".into());
    }
    serde_json::from_str(&text[a..=b]).map_err(|e| e.to_string())
}

/// Sends `messages`; on an unparsable answer asks once more, then gives up.
fn ask<T: DeserializeOwned>(
    provider: &dyn ChatProvider,
    task: &str,
    mut messages: Vec<ChatMessage>,
    log: &mut Vec<Exchange>,
) -> Result<T, LlmError> {
    let mut detail = String::new();
    for attempt in 1..=2 {
        let answer = match provider.complete(&messages) {
            Ok(a) => a,
            Err(e) => {
                log.push(Exchange {
                    task: task.into(),
                    attempt,
                    messages: messages.clone(),
                    response: None,
                    error: Some(e.to_string()),
                });
                return Err(e);
            }
        };
        let parsed = parse_envelope::<T>(&answer);
        log.push(Exchange {
            task: task.into(),
            attempt,
            messages: messages.clone(),
            response: Some(answer.clone()),
            error: parsed.as_ref().err().cloned(),
        });
        match parsed {
            Ok(v) => return Ok(v),
            Err(e) => {
                detail = e;
                messages.push(ChatMessage::assistant(answer));
                messages.push(ChatMessage::user(
                    "That answer did not match the required JSON shape. Reply again with only the JSON object.",
                ));
            }
        }
    }
    Err(LlmError::MalformedResponse {
        task: task.into(),
        detail,
    })
}

#[derive(Deserialize)]
struct RankingEnvelope {
    ranking: Vec<RankingItem>,
}

#[derive(Deserialize)]
struct RankingItem {
    method: String,
    #[serde(default)]
    reason: String,
}

#[derive(Deserialize)]
struct TargetEnvelope {
    targets: Vec<TargetItem>,
}

#[derive(Deserialize)]
struct TargetItem {
    class: String,
    #[serde(default)]
    reason: String,
}

#[derive(Deserialize)]
struct CritiqueEnvelope {
    keep: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedMethod {
    pub method: MethodRef,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodRanking {
    pub ranked: Vec<RankedMethod>,
    pub raw: Vec<RawSuggestion>,
    /// Answers that named no candidate.
    pub dropped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetChoice {
    pub target: String,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSelection {
    pub chosen: Vec<TargetChoice>,
    pub raw: Vec<RawSuggestion>,
    /// Names that matched no packed summary.
    pub excluded: Vec<String>,
}

/// Asks the model which candidates most likely belong elsewhere. Answers
/// outside `candidates` are dropped; at most `max_out` survive, in the
/// model's order.
pub fn rank_methods(
    provider: &dyn ChatProvider,
    class: &ClassInfo,
    candidates: &[MoveCandidate],
    max_out: usize,
    log: &mut Vec<Exchange>,
) -> Result<MethodRanking, LlmError> {
    if candidates.is_empty() {
        return Err(LlmError::EmptyInput("rank_methods"));
    }
    let excluded: Vec<Value> = class
        .methods
        .iter()
        .filter_map(|m| {
            let r = sanity_reasons(m);
            (!r.is_empty()).then(|| json!({ "method": m.key(), "reasons": r }))
        })
        .collect();
    let payload = json!({
        "task": "rank_methods",
        "class": class.qualified_name,
        "max_out": max_out,
        "class_methods": class.methods.iter().map(|m| m.key()).collect::<Vec<_>>(),
        "candidates": candidates
            .iter()
            .map(|c| json!({ "method": c.method.method, "score": 1.0 - c.similarity }))
            .collect::<Vec<_>>(),
        "excluded": excluded,
    });
    let mut text = format!(
        "Class {} is below. For each candidate method, think through its purpose, how cohesive it is \
         with the rest of the class, and what it depends on. Then list the candidates that would fit \
         better in another class, most misplaced first, at most {max_out} of them.\n\
         Higher scores mean the method is less similar to the rest of its class.\n\
         Answer as {{\"ranking\": [{{\"method\": \"name(T1,T2)\", \"reason\": \"...\"}}]}}.\n\n",
        class.qualified_name
    );
    text.push_str(&class.text);
    let messages = vec![
        ChatMessage::system(SYSTEM_PROMPT),
        ChatMessage::user(with_payload(&text, &payload)),
    ];
    let env: RankingEnvelope = ask(provider, "rank_methods", messages, log)?;

    let mut out = MethodRanking {
        ranked: Vec::new(),
        raw: Vec::new(),
        dropped: Vec::new(),
    };
    let allowed: BTreeSet<&str> = candidates
        .iter()
        .map(|c| c.method.method.as_str())
        .collect();
    for item in env.ranking {
        out.raw.push(RawSuggestion {
            host: class.qualified_name.clone(),
            method: item.method.clone(),
            target: None,
            rationale: item.reason.clone(),
            source: SuggestionSource::MethodRanking,
        });
        let hit = resolve_method(class, &item.method)
            .map(|m| m.key())
            .filter(|k| allowed.contains(k.as_str()));
        match hit {
            Some(key)
                if out.ranked.len() < max_out
                    && !out.ranked.iter().any(|r| r.method.method == key) =>
            {
                out.ranked.push(RankedMethod {
                    method: MethodRef {
                        class: class.qualified_name.clone(),
                        method: key,
                    },
                    rationale: item.reason,
                });
            }
            Some(_) => {}
            None => {
                log::info!(
                    "dropping ranked method {:?}: not a candidate of {}",
                    item.method,
                    class.qualified_name
                );
                out.dropped.push(item.method);
            }
        }
    }
    Ok(out)
}

/// Optional second turn: the model confirms or strikes its own picks.
pub fn critique(
    provider: &dyn ChatProvider,
    class: &ClassInfo,
    ranked: Vec<RankedMethod>,
    log: &mut Vec<Exchange>,
) -> Result<Vec<RankedMethod>, LlmError> {
    if ranked.is_empty() {
        return Ok(ranked);
    }
    let payload = json!({
        "task": "critique",
        "class": class.qualified_name,
        "items": ranked.iter().map(|r| json!({ "method": r.method.method, "reason": r.rationale })).collect::<Vec<_>>(),
    });
    let text =
        "Review your previous recommendations for this class. Keep only the methods you are \
                confident should move. Answer as {\"keep\": [\"name(T1,T2)\"]}.";
    let messages = vec![
        ChatMessage::system(SYSTEM_PROMPT),
        ChatMessage::user(with_payload(text, &payload)),
    ];
    let env: CritiqueEnvelope = ask(provider, "critique", messages, log)?;
    let keep: BTreeSet<String> = env
        .keep
        .iter()
        .filter_map(|k| resolve_method(class, k).map(|m| m.key()))
        .collect();
    Ok(ranked
        .into_iter()
        .filter(|r| keep.contains(&r.method.method))
        .collect())
}

/// Asks the model to order the packed targets for `method`. Only names that
/// match a packed summary come back in `chosen`.
pub fn choose_target(
    provider: &dyn ChatProvider,
    host: &ClassInfo,
    method: &MethodInfo,
    packed: &[ClassSummary],
    scores: &BTreeMap<String, f64>,
    log: &mut Vec<Exchange>,
) -> Result<TargetSelection, LlmError> {
    if packed.is_empty() {
        return Err(LlmError::EmptyInput("choose_target"));
    }
    let payload = json!({
        "task": "choose_target",
        "host": host.qualified_name,
        "method": method.key(),
        "candidates": packed
            .iter()
            .map(|s| json!({ "class": s.qualified_name, "score": scores.get(&s.qualified_name).copied().unwrap_or(0.0) }))
            .collect::<Vec<_>>(),
    });
    let mut text = format!(
        "Method {} of class {} should move to another class. Its code:\n\n{}\n\n\
         Candidate destination classes:\n\n",
        method.name,
        host.qualified_name,
        host.method_text(method)
    );
    for s in packed {
        text.push_str(&s.render());
        text.push('\n');
    }
    text.push_str(
        "Return the candidate classes in the order you would move the method to them, best first. \
         Answer as {\"targets\": [{\"class\": \"qualified.Name\", \"reason\": \"...\"}]}.",
    );
    let messages = vec![
        ChatMessage::system(SYSTEM_PROMPT),
        ChatMessage::user(with_payload(&text, &payload)),
    ];
    let env: TargetEnvelope = ask(provider, "choose_target", messages, log)?;

    let mut out = TargetSelection {
        chosen: Vec::new(),
        raw: Vec::new(),
        excluded: Vec::new(),
    };
    for item in env.targets {
        out.raw.push(RawSuggestion {
            host: host.qualified_name.clone(),
            method: method.key(),
            target: Some(item.class.clone()),
            rationale: item.reason.clone(),
            source: SuggestionSource::TargetSelection,
        });
        let name = item.class.trim();
        let hit = packed
            .iter()
            .find(|s| s.qualified_name == name)
            .or_else(|| {
                let mut simple = packed.iter().filter(|s| {
                    !name.contains('.') && s.qualified_name.rsplit('.').next() == Some(name)
                });
                match (simple.next(), simple.next()) {
                    (Some(s), None) => Some(s),
                    _ => None,
                }
            });
        match hit {
            Some(s) if !out.chosen.iter().any(|c| c.target == s.qualified_name) => {
                out.chosen.push(TargetChoice {
                    target: s.qualified_name.clone(),
                    rationale: item.reason,
                })
            }
            Some(_) => {}
            None => {
                log::info!(
                    "excluding target {:?}: not among the packed classes",
                    item.class
                );
                out.excluded.push(item.class);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MockBehavior {
    /// Candidates in the order given.
    EchoOrder,
    /// Candidates by descending payload score.
    SimilarityOracle,
    /// Like the oracle, but each answer slot draws `u` in [0,1) and becomes
    /// an H1, H2 or H3 hallucination when `u` falls in the matching band.
    /// Bands that cannot be realized for a task yield a genuine answer.
    Fault {
        p_h1: f64,
        p_h2: f64,
        p_h3: f64,
        seed: u64,
    },
    /// Canned answers, one per call.
    Scripted { responses: Vec<String> },
}

/// A hallucination the fault mock planted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injection {
    pub task: String,
    pub bucket: Bucket,
    pub answer: String,
}

const PHANTOM_CLASSES: &[&str] = &[
    "PolicyUtils",
    "PolicyResolutionService",
    "SessionHelper",
    "ResolverManager",
    "DataProcessor",
];

#[derive(Debug)]
pub struct MockChatProvider {
    behavior: MockBehavior,
    injections: Mutex<Vec<Injection>>,
    cursor: Mutex<usize>,
}

impl MockChatProvider {
    pub fn new(behavior: MockBehavior) -> Self {
        Self {
            behavior,
            injections: Mutex::new(Vec::new()),
            cursor: Mutex::new(0),
        }
    }

    pub fn echo_order() -> Self {
        Self::new(MockBehavior::EchoOrder)
    }

    pub fn similarity_oracle() -> Self {
        Self::new(MockBehavior::SimilarityOracle)
    }

    pub fn fault(p_h1: f64, p_h2: f64, p_h3: f64, seed: u64) -> Self {
        Self::new(MockBehavior::Fault {
            p_h1,
            p_h2,
            p_h3,
            seed,
        })
    }

    pub fn scripted<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self::new(MockBehavior::Scripted {
            responses: responses.into_iter().map(Into::into).collect(),
        })
    }

    pub fn behavior(&self) -> &MockBehavior {
        &self.behavior
    }

    pub fn injections(&self) -> Vec<Injection> {
        self.injections
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .clone()
    }

    pub fn injected(&self, bucket: Bucket) -> usize {
        self.injections()
            .iter()
            .filter(|i| i.bucket == bucket)
            .count()
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Option<Bucket> {
        let MockBehavior::Fault {
            p_h1, p_h2, p_h3, ..
        } = self.behavior
        else {
            return None;
        };
        let u: f64 = rng.gen();
        if u < p_h1 {
            Some(Bucket::H1)
        } else if u < p_h1 + p_h2 {
            Some(Bucket::H2)
        } else if u < p_h1 + p_h2 + p_h3 {
            Some(Bucket::H3)
        } else {
            None
        }
    }

    fn note(&self, task: &str, bucket: Bucket, answer: &str) {
        self.injections
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .push(Injection {
                task: task.into(),
                bucket,
                answer: answer.into(),
            });
    }

    fn order(&self, items: &[Value], key: &str) -> Vec<String> {
        let mut v: Vec<(String, f64)> = items
            .iter()
            .map(|i| {
                (
                    i[key].as_str().unwrap_or_default().to_string(),
                    i["score"].as_f64().unwrap_or(0.0),
                )
            })
            .collect();
        if !matches!(self.behavior, MockBehavior::EchoOrder) {
            v.sort_by(|a, b| b.1.total_cmp(&a.1));
        }
        v.into_iter().map(|(n, _)| n).collect()
    }

    fn answer(&self, payload: &Value) -> String {
        let task = payload["task"].as_str().unwrap_or_default();
        let seed = match self.behavior {
            MockBehavior::Fault { seed, .. } => {
                let mut h = FnvHasher::default();
                h.write(payload.to_string().as_bytes());
                seed ^ h.finish()
            }
            _ => 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let empty = Vec::new();
        match task {
            "rank_methods" => {
                let order =
                    self.order(payload["candidates"].as_array().unwrap_or(&empty), "method");
                let excluded: Vec<&str> = payload["excluded"]
                    .as_array()
                    .unwrap_or(&empty)
                    .iter()
                    .filter_map(|e| e["method"].as_str())
                    .collect();
                let slots = order
                    .len()
                    .min(payload["max_out"].as_u64().unwrap_or(3) as usize);
                let mut genuine = order.iter();
                let mut ranking = Vec::new();
                for _ in 0..slots {
                    match self.draw(&mut rng) {
                        Some(Bucket::H3) if !excluded.is_empty() => {
                            let pick = excluded[rng.gen_range(0..excluded.len())];
                            self.note(task, Bucket::H3, pick);
                            ranking.push(
                                json!({ "method": pick, "reason": "does not use the class state" }),
                            );
                        }
                        _ => {
                            if let Some(m) = genuine.next() {
                                ranking.push(
                                    json!({ "method": m, "reason": "low cohesion with its class" }),
                                );
                            }
                        }
                    }
                }
                json!({ "ranking": ranking }).to_string()
            }
            "choose_target" => {
                let order = self.order(payload["candidates"].as_array().unwrap_or(&empty), "class");
                let host = payload["host"].as_str().unwrap_or_default();
                let mut genuine = order.iter();
                let mut targets = Vec::new();
                for _ in 0..order.len() {
                    match self.draw(&mut rng) {
                        Some(Bucket::H1) => {
                            let name = format!(
                                "phantom.{}",
                                PHANTOM_CLASSES[rng.gen_range(0..PHANTOM_CLASSES.len())]
                            );
                            self.note(task, Bucket::H1, &name);
                            targets.push(
                                json!({ "class": name, "reason": "owns the related policy logic" }),
                            );
                        }
                        Some(Bucket::H2) => {
                            self.note(task, Bucket::H2, host);
                            targets.push(
                                json!({ "class": host, "reason": "keeps the code together" }),
                            );
                        }
                        _ => {
                            if let Some(c) = genuine.next() {
                                targets.push(
                                    json!({ "class": c, "reason": "works mostly with this class" }),
                                );
                            }
                        }
                    }
                }
                json!({ "targets": targets }).to_string()
            }
            "critique" => {
                let keep: Vec<&str> = payload["items"]
                    .as_array()
                    .unwrap_or(&empty)
                    .iter()
                    .filter_map(|i| i["method"].as_str())
                    .collect();
                json!({ "keep": keep }).to_string()
            }
            _ => "{}".into(),
        }
    }
}

impl ChatProvider for MockChatProvider {
    fn model_id(&self) -> String {
        match &self.behavior {
            MockBehavior::EchoOrder => "mock-echo-order".into(),
            MockBehavior::SimilarityOracle => "mock-similarity-oracle".into(),
            MockBehavior::Fault {
                p_h1,
                p_h2,
                p_h3,
                seed,
            } => format!("mock-fault-{p_h1}-{p_h2}-{p_h3}-{seed}"),
            MockBehavior::Scripted { .. } => "mock-scripted".into(),
        }
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        if let MockBehavior::Scripted { responses } = &self.behavior {
            let mut at = self.cursor.lock().unwrap_or_else(|p| p.into_inner());
            let r = responses
                .get(*at)
                .cloned()
                .ok_or_else(|| LlmError::ProviderUnavailable("script exhausted".into()))?;
            *at += 1;
            return Ok(r);
        }
        let payload = prompt_payload(messages).ok_or_else(|| {
            LlmError::ProviderUnavailable("mock needs a JSON payload in the prompt".into())
        })?;
        Ok(self.answer(&payload))
    }
}
