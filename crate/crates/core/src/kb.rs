//! Object attribution: is an object a personal belonging?
//!
//! Answers come from a static table first, then from a chat-completions
//! endpoint if one is configured, and otherwise default to `personal` so an
//! unknown object is left alone.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, RwLock};
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::constraint::{symbolic_decide, AccessDecision, ConstraintOracle, ConstraintPolicy};
use crate::pddl::{DomainAst, GroundAction, GroundAtom, ProblemAst, State};

pub const ENV_URL: &str = "REDLINE_LLM_URL";
pub const ENV_API_KEY: &str = "REDLINE_LLM_API_KEY";
pub const ENV_MODEL: &str = "REDLINE_LLM_MODEL";
const DEFAULT_MODEL: &str = "gpt-4";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Personal,
    NonPersonal,
}

impl Attribute {
    pub fn predicate(self) -> &'static str {
        match self {
            Attribute::Personal => "personal",
            Attribute::NonPersonal => "non_personal",
        }
    }

    pub fn fact(self, object: &str) -> GroundAtom {
        GroundAtom::new(self.predicate(), vec![object.to_string()])
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.predicate())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Static,
    Llm,
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KbSource {
    StaticFile,
    LlmEndpoint,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct KbQuery {
    pub object: String,
    pub context: Option<String>,
}

impl KbQuery {
    pub fn prompt(&self) -> String {
        format!(
            "Answer strictly 'yes' or 'no': would a {} in a care-home resident's room be considered a personal, private belonging? Context: {}",
            self.object.replace('_', " "),
            self.context.as_deref().filter(|c| !c.is_empty()).unwrap_or("none")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KbAnswer {
    pub object: String,
    pub attribute: Attribute,
    pub provenance: Provenance,
    /// Endpoint reply text, when the endpoint was asked.
    pub raw_response: Option<String>,
    pub warning: Option<String>,
}

#[derive(Debug, Error)]
pub enum EndpointError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected response: {0}")]
    BadResponse(String),
    #[error("no recorded reply for '{0}'")]
    NoRecording(String),
}

/// A chat model that answers one prompt with one reply.
pub trait ChatEndpoint: Send + Sync {
    fn complete(&self, query: &KbQuery, prompt: &str) -> Result<String, EndpointError>;
}

/// OpenAI-style `POST .../chat/completions` with deterministic sampling.
pub struct OpenAiEndpoint {
    url: String,
    api_key: Option<String>,
    model: String,
    client: reqwest::blocking::Client,
}

impl OpenAiEndpoint {
    /// `url` is either the full completions URL or an API base to which
    /// `/chat/completions` is appended.
    pub fn new(url: &str, api_key: Option<String>, model: Option<String>) -> Result<Self, EndpointError> {
        let url = if url.trim_end_matches('/').ends_with("/chat/completions") {
            url.trim_end_matches('/').to_string()
        } else {
            format!("{}/chat/completions", url.trim_end_matches('/'))
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| EndpointError::Transport(e.to_string()))?;
        Ok(OpenAiEndpoint {
            url,
            api_key,
            model: model.unwrap_or_else(|| DEFAULT_MODEL.to_string()),
            client,
        })
    }

    /// Configure from the environment; `None` when no URL is set.
    pub fn from_env() -> Option<Result<Self, EndpointError>> {
        let url = std::env::var(ENV_URL).ok().filter(|u| !u.is_empty())?;
        Some(Self::new(
            &url,
            std::env::var(ENV_API_KEY).ok(),
            std::env::var(ENV_MODEL).ok(),
        ))
    }

    pub fn request_body(&self, prompt: &str) -> serde_json::Value {
        json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
            "top_p": 1,
            "n": 1,
            "max_tokens": 64,
        })
    }
}

impl ChatEndpoint for OpenAiEndpoint {
    fn complete(&self, _query: &KbQuery, prompt: &str) -> Result<String, EndpointError> {
        let mut req = self.client.post(&self.url).json(&self.request_body(prompt));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| EndpointError::Transport(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() {
            return Err(EndpointError::Transport(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(EndpointError::BadResponse(format!("HTTP {status}")));
        }
        let body: serde_json::Value = resp
            .json()
            .map_err(|e| EndpointError::BadResponse(e.to_string()))?;
        body["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| EndpointError::BadResponse("missing choices[0].message.content".into()))
    }
}

/// Canned replies keyed by object name, for offline runs.
///
/// File format: a JSON object `{"diary": "Yes, a diary is ...", ...}`.
pub struct RecordedEndpoint {
    replies: BTreeMap<String, String>,
}

impl RecordedEndpoint {
    pub fn new(replies: BTreeMap<String, String>) -> Self {
        RecordedEndpoint { replies }
    }

    pub fn from_json(text: &str) -> Result<Self, KbError> {
        let replies: BTreeMap<String, String> = serde_json::from_str(text)?;
        Ok(RecordedEndpoint {
            replies: replies.into_iter().map(|(k, v)| (k.to_lowercase(), v)).collect(),
        })
    }
}

impl ChatEndpoint for RecordedEndpoint {
    fn complete(&self, query: &KbQuery, _prompt: &str) -> Result<String, EndpointError> {
        self.replies
            .get(&query.object)
            .cloned()
            .ok_or_else(|| EndpointError::NoRecording(query.object.clone()))
    }
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("invalid knowledge base JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
}

/// First `yes`/`no` word in a reply, case-insensitive.
pub fn parse_yes_no(reply: &str) -> Option<bool> {
    reply
        .split(|c: char| !c.is_alphanumeric())
        .map(str::to_lowercase)
        .find_map(|w| match w.as_str() {
            "yes" => Some(true),
            "no" => Some(false),
            _ => None,
        })
}

pub struct AttributeKb {
    entries: BTreeMap<String, Attribute>,
    endpoint: Option<Box<dyn ChatEndpoint>>,
    cache: RwLock<HashMap<KbQuery, KbAnswer>>,
    // endpoint calls are serialized per instance
    call_lock: Mutex<()>,
    calls: AtomicUsize,
}

impl AttributeKb {
    pub fn new(entries: BTreeMap<String, Attribute>) -> Self {
        AttributeKb {
            entries,
            endpoint: None,
            cache: RwLock::new(HashMap::new()),
            call_lock: Mutex::new(()),
            calls: AtomicUsize::new(0),
        }
    }

    /// Static table from `{"diary": "personal", "dishes": "non_personal"}`.
    pub fn from_json(text: &str) -> Result<Self, KbError> {
        let entries: BTreeMap<String, Attribute> = serde_json::from_str(text)?;
        Ok(Self::new(
            entries.into_iter().map(|(k, v)| (k.to_lowercase(), v)).collect(),
        ))
    }

    pub fn with_endpoint(mut self, endpoint: Box<dyn ChatEndpoint>) -> Self {
        self.endpoint = Some(endpoint);
        self
    }

    pub fn source(&self) -> KbSource {
        match (self.entries.is_empty(), self.endpoint.is_some()) {
            (false, true) => KbSource::Mixed,
            (true, true) => KbSource::LlmEndpoint,
            _ => KbSource::StaticFile,
        }
    }

    pub fn entries(&self) -> &BTreeMap<String, Attribute> {
        &self.entries
    }

    /// Number of endpoint requests made so far, retries included.
    pub fn endpoint_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn call(&self, endpoint: &dyn ChatEndpoint, query: &KbQuery) -> Result<String, EndpointError> {
        let prompt = query.prompt();
        let mut last = None;
        for _ in 0..2 {
            self.calls.fetch_add(1, Ordering::SeqCst);
            match endpoint.complete(query, &prompt) {
                Ok(reply) => return Ok(reply),
                Err(e @ EndpointError::BadResponse(_)) => return Err(e),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn ask_endpoint(&self, endpoint: &dyn ChatEndpoint, query: KbQuery) -> KbAnswer {
        if let Some(hit) = self.cache.read().unwrap().get(&query) {
            return hit.clone();
        }
        let _guard = self.call_lock.lock().unwrap();
        // another caller may have filled the cache while we waited
        if let Some(hit) = self.cache.read().unwrap().get(&query) {
            return hit.clone();
        }
        let answer = match self.call(endpoint, &query) {
            Ok(reply) => match parse_yes_no(&reply) {
                Some(yes) => KbAnswer {
                    object: query.object.clone(),
                    attribute: if yes { Attribute::Personal } else { Attribute::NonPersonal },
                    provenance: Provenance::Llm,
                    raw_response: Some(reply),
                    warning: None,
                },
                None => {
                    let msg = format!("reply for '{}' contains no yes/no; defaulting to personal", query.object);
                    warn!("{msg}");
                    KbAnswer {
                        object: query.object.clone(),
                        attribute: Attribute::Personal,
                        provenance: Provenance::Default,
                        raw_response: Some(reply),
                        warning: Some(msg),
                    }
                }
            },
            Err(e) => {
                let msg = format!("endpoint failed for '{}' ({e}); defaulting to personal", query.object);
                warn!("{msg}");
                KbAnswer {
                    object: query.object.clone(),
                    attribute: Attribute::Personal,
                    provenance: Provenance::Default,
                    raw_response: None,
                    warning: Some(msg),
                }
            }
        };
        self.cache.write().unwrap().insert(query, answer.clone());
        answer
    }
}

/// Attribute of `object`: static entry, else endpoint, else `personal`.
pub fn query_attribute(kb: &AttributeKb, object: &str, context: &str) -> KbAnswer {
    let object = object.to_lowercase();
    if let Some(&attribute) = kb.entries.get(&object) {
        return KbAnswer {
            object,
            attribute,
            provenance: Provenance::Static,
            raw_response: None,
            warning: None,
        };
    }
    match &kb.endpoint {
        Some(endpoint) => kb.ask_endpoint(
            endpoint.as_ref(),
            KbQuery {
                object,
                context: Some(context.to_string()).filter(|c| !c.is_empty()),
            },
        ),
        None => KbAnswer {
            object,
            attribute: Attribute::Personal,
            provenance: Provenance::Default,
            raw_response: None,
            warning: None,
        },
    }
}

/// The attribution fact `problem` already states for `object`, if any.
fn existing_attribute(problem: &ProblemAst, object: &str) -> Option<Attribute> {
    [Attribute::Personal, Attribute::NonPersonal]
        .into_iter()
        .find(|a| problem.init.contains(&a.fact(object)))
}

/// Problem objects of the type the `personal` predicate ranges over.
pub fn attribute_objects(domain: &DomainAst, problem: &ProblemAst) -> Vec<String> {
    let Some(ty) = domain
        .predicate(Attribute::Personal.predicate())
        .and_then(|p| p.params.first())
        .map(|t| t.ty.as_str())
    else {
        return Vec::new();
    };
    problem
        .objects
        .iter()
        .filter(|o| ty == crate::pddl::ast::OBJECT_TYPE || o.ty == ty)
        .map(|o| o.name.clone())
        .collect()
}

/// Add one attribution fact per object to the problem's init. Facts
/// already present are kept; disagreements are logged.
pub fn inject_facts(kb: &AttributeKb, problem: &ProblemAst, objects: &[String]) -> ProblemAst {
    let mut out = problem.clone();
    for object in objects {
        let answer = query_attribute(kb, object, "");
        match existing_attribute(problem, object) {
            Some(existing) if existing != answer.attribute => {
                warn!(
                    "init states ({} {object}) but the knowledge base says {}; keeping init",
                    existing.predicate(),
                    answer.attribute
                );
            }
            Some(_) => {}
            None => {
                out.init.insert(answer.attribute.fact(object));
            }
        }
    }
    out
}

/// Symbolic decisions where objects lacking an attribution fact in the
/// state get one from the knowledge base first.
pub struct KbOracle {
    policy: ConstraintPolicy,
    kb: AttributeKb,
}

impl KbOracle {
    pub const ID: &'static str = "kb";

    pub fn new(policy: ConstraintPolicy, kb: AttributeKb) -> Self {
        KbOracle { policy, kb }
    }

    fn augmented(&self, state: &State, action: &GroundAction) -> State {
        let mut s = state.clone();
        for arg in &action.args {
            let known = [Attribute::Personal, Attribute::NonPersonal]
                .iter()
                .any(|a| state.contains(&a.fact(arg)));
            if !known && self.policy.objects().contains(arg) {
                let answer = query_attribute(&self.kb, arg, "");
                s.insert(answer.attribute.fact(arg));
            }
        }
        s
    }
}

impl ConstraintOracle for KbOracle {
    fn id(&self) -> &str {
        Self::ID
    }

    fn decide(&self, _query_id: u64, state: &State, action: &GroundAction) -> AccessDecision {
        let d = symbolic_decide(&self.policy, &self.augmented(state, action), action);
        AccessDecision {
            oracle_id: Self::ID.to_string(),
            ..d
        }
    }

    fn check_state(&self, state: &State) -> AccessDecision {
        match self.policy.state_violation(state) {
            Some(v) => AccessDecision::deny(Self::ID, v.rule_id, v.kind.into(), v.detail),
            None => AccessDecision::allow(Self::ID),
        }
    }

    fn is_deterministic(&self) -> bool {
        self.kb.endpoint.is_none()
    }
}
