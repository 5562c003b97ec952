//! LLM-generated action descriptors.
//!
//! Three queries run per class (decomposition, description, context); their
//! parsed answers form a [`DescriptorSet`] that is cached on disk so the text
//! is generated once per (label, model) pair.

pub mod cache;
pub mod llm;
pub mod parse;
pub mod prompts;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};

pub use cache::{CacheError, DescriptorCache};
pub use llm::{ChatRequest, ChatTransport, HttpChatTransport, LlmConfig, TransportError};
pub use parse::ParseError;

use crate::label::{ActionClass, LabelSpace};
use crate::par::{self, Execution};

/// Structured descriptors for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub action: ActionClass,
    /// Exactly three sequential sub-actions.
    pub decomposition: Vec<String>,
    pub description: String,
    pub context: String,
    pub objects: Vec<String>,
    pub llm_model_id: String,
    pub generated_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvalidDescriptors {
    #[error("decomposition has {0} steps, expected 3")]
    StepCount(usize),
    #[error("{0} is empty")]
    EmptyField(&'static str),
}

impl DescriptorSet {
    pub fn validate(&self) -> Result<(), InvalidDescriptors> {
        if self.decomposition.len() != 3 {
            return Err(InvalidDescriptors::StepCount(self.decomposition.len()));
        }
        if self.decomposition.iter().any(|s| s.trim().is_empty()) {
            return Err(InvalidDescriptors::EmptyField("a decomposition step"));
        }
        if self.description.trim().is_empty() {
            return Err(InvalidDescriptors::EmptyField("description"));
        }
        if self.context.trim().is_empty() {
            return Err(InvalidDescriptors::EmptyField("context"));
        }
        if self.objects.is_empty() || self.objects.iter().any(|o| o.trim().is_empty()) {
            return Err(InvalidDescriptors::EmptyField("objects"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Query {
    Decomposition,
    Description,
    Context,
}

impl Query {
    pub fn system_prompt(self) -> &'static str {
        match self {
            Query::Decomposition => prompts::DECOMPOSITION,
            Query::Description => prompts::DESCRIPTION,
            Query::Context => prompts::CONTEXT,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Query::Decomposition => "decomposition",
            Query::Description => "description",
            Query::Context => "context",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DescriptorError {
    #[error("{} response for {class:?} could not be parsed after {attempts} attempt(s): {reason}", query.name())]
    Parse {
        class: String,
        query: Query,
        attempts: u32,
        reason: ParseError,
        raw: String,
    },
    #[error("{} query for {class:?} failed: {source}", query.name())]
    Transport {
        class: String,
        query: Query,
        #[source]
        source: TransportError,
    },
}

impl DescriptorError {
    /// The raw text of the last response, for diagnostics.
    pub fn raw(&self) -> &str {
        match self {
            DescriptorError::Parse { raw, .. } => raw,
            DescriptorError::Transport { source, .. } => source.raw(),
        }
    }
}

/// Sends one query up to `cfg.max_retries` times, re-sending the identical
/// request after a parse failure or a retryable transport failure.
fn run_query<T, R, P>(
    transport: &T,
    cfg: &LlmConfig,
    action: &ActionClass,
    query: Query,
    parse: P,
) -> Result<R, DescriptorError>
where
    T: ChatTransport + ?Sized,
    P: Fn(&str) -> Result<R, ParseError>,
{
    let request = ChatRequest {
        model: cfg.model_id.clone(),
        system: query.system_prompt().to_string(),
        user: action.display().to_string(),
        temperature: cfg.temperature,
    };
    let attempts = cfg.max_retries.max(1);
    let mut last_parse = None;
    for attempt in 1..=attempts {
        match transport.complete(&request) {
            Ok(raw) => match parse(&raw) {
                Ok(v) => return Ok(v),
                Err(reason) => {
                    log::debug!("{} attempt {attempt} for {:?}: {reason}", query.name(), action.display());
                    last_parse = Some((reason, raw));
                }
            },
            Err(e) if e.is_retryable() && attempt < attempts => {
                log::warn!("{} query for {:?} failed ({e}); retrying", query.name(), action.display());
            }
            Err(source) => {
                return Err(DescriptorError::Transport {
                    class: action.display().to_string(),
                    query,
                    source,
                })
            }
        }
    }
    let (reason, raw) = last_parse.expect("at least one attempt ran");
    Err(DescriptorError::Parse {
        class: action.display().to_string(),
        query,
        attempts,
        reason,
        raw,
    })
}

pub fn generate_decomposition<T: ChatTransport + ?Sized>(
    action: &ActionClass,
    cfg: &LlmConfig,
    transport: &T,
) -> Result<Vec<String>, DescriptorError> {
    run_query(transport, cfg, action, Query::Decomposition, parse::parse_decomposition)
}

pub fn generate_description<T: ChatTransport + ?Sized>(
    action: &ActionClass,
    cfg: &LlmConfig,
    transport: &T,
) -> Result<String, DescriptorError> {
    run_query(transport, cfg, action, Query::Description, parse::parse_description)
}

pub fn generate_context<T: ChatTransport + ?Sized>(
    action: &ActionClass,
    cfg: &LlmConfig,
    transport: &T,
) -> Result<(String, Vec<String>), DescriptorError> {
    run_query(transport, cfg, action, Query::Context, parse::parse_context)
}

/// Runs all three queries for one class.
pub fn generate_set<T: ChatTransport + ?Sized>(
    action: &ActionClass,
    cfg: &LlmConfig,
    transport: &T,
) -> Result<DescriptorSet, DescriptorError> {
    let decomposition = generate_decomposition(action, cfg, transport)?;
    let description = generate_description(action, cfg, transport)?;
    let (context, objects) = generate_context(action, cfg, transport)?;
    Ok(DescriptorSet {
        action: action.clone(),
        decomposition,
        description,
        context,
        objects,
        llm_model_id: cfg.model_id.clone(),
        generated_at: Utc::now(),
    })
}

#[derive(Debug)]
pub struct ClassFailure {
    pub class_index: usize,
    pub action: ActionClass,
    pub error: DescriptorError,
}

#[derive(Debug, Default)]
pub struct GenerationOutcome {
    /// Successful sets as `(class index, set)`, in label order.
    pub sets: Vec<(usize, DescriptorSet)>,
    pub failures: Vec<ClassFailure>,
    /// Number of chat requests sent.
    pub llm_calls: usize,
    /// Classes answered from the cache.
    pub cache_hits: usize,
}

impl GenerationOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

struct CountingTransport<'a, T: ?Sized> {
    inner: &'a T,
    calls: AtomicUsize,
}

impl<T: ChatTransport + ?Sized> ChatTransport for CountingTransport<'_, T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.complete(request)
    }
}

/// Returns descriptor sets for every class, generating and persisting the
/// ones missing from `cache`.
///
/// Cold classes are queried through `exec`; each success is written to the
/// cache (and saved) under a lock before the call returns, so a failure for
/// one class never loses another. Per-class failures are reported in the
/// outcome; only a cache write error aborts.
pub fn generate_all<T: ChatTransport + ?Sized>(
    labels: &LabelSpace,
    cfg: &LlmConfig,
    transport: &T,
    cache: &mut DescriptorCache,
    exec: Execution,
) -> Result<GenerationOutcome, CacheError> {
    let mut outcome = GenerationOutcome::default();
    let mut cold = Vec::new();
    for (i, action) in labels.classes().iter().enumerate() {
        match cache.get(action, &cfg.model_id) {
            Some(ds) => {
                outcome.sets.push((i, ds));
                outcome.cache_hits += 1;
            }
            None => cold.push((i, action.clone())),
        }
    }
    if cold.is_empty() {
        return Ok(outcome);
    }

    let counting = CountingTransport {
        inner: transport,
        calls: AtomicUsize::new(0),
    };
    let shared = Mutex::new((cache, None::<CacheError>));
    let results = par::map_ordered(exec, &cold, |_, (i, action)| {
        let result = generate_set(action, cfg, &counting);
        if let Ok(ds) = &result {
            let mut guard = shared.lock().unwrap_or_else(|p| p.into_inner());
            let (cache, err) = &mut *guard;
            cache.insert(ds);
            if err.is_none() {
                if let Err(e) = cache.save() {
                    *err = Some(e);
                }
            }
        }
        (*i, action.clone(), result)
    });
    let (_, write_error) = shared.into_inner().unwrap_or_else(|p| p.into_inner());
    if let Some(e) = write_error {
        return Err(e);
    }

    for (class_index, action, result) in results {
        match result {
            Ok(ds) => outcome.sets.push((class_index, ds)),
            Err(error) => outcome.failures.push(ClassFailure { class_index, action, error }),
        }
    }
    outcome.sets.sort_by_key(|(i, _)| *i);
    outcome.llm_calls = counting.calls.into_inner();
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    /// Replays canned responses per query kind.
    struct Scripted {
        decomposition: Mutex<VecDeque<Result<String, TransportError>>>,
        calls: AtomicUsize,
    }

    impl ChatTransport for Scripted {
        fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if request.system == prompts::DECOMPOSITION {
                self.decomposition.lock().unwrap().pop_front().unwrap_or(Ok("[]".into()))
            } else if request.system == prompts::DESCRIPTION {
                Ok("\"A person does it.\"".into())
            } else {
                Ok("{'context': 'a gym', 'objects': ['mat']}".into())
            }
        }
    }

    fn scripted(responses: Vec<Result<String, TransportError>>) -> Scripted {
        Scripted {
            decomposition: Mutex::new(responses.into()),
            calls: AtomicUsize::new(0),
        }
    }

    fn cfg(max_retries: u32) -> LlmConfig {
        LlmConfig { max_retries, model_id: "mock".into(), ..Default::default() }
    }

    #[test]
    fn retry_resends_until_parse_succeeds() {
        let t = scripted(vec![Ok("sure!".into()), Ok("['a','b','c']".into())]);
        let action = ActionClass::new("Cartwheel").unwrap();
        let steps = generate_decomposition(&action, &cfg(3), &t).unwrap();
        assert_eq!(steps, ["a", "b", "c"]);
        assert_eq!(t.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn parse_error_after_retry_budget_keeps_raw_text() {
        let t = scripted(vec![Ok("['a','b']".into()), Ok("['a','b']".into()), Ok("['a','b']".into())]);
        let action = ActionClass::new("Cartwheel").unwrap();
        let err = generate_decomposition(&action, &cfg(2), &t).unwrap_err();
        assert_eq!(t.calls.load(Ordering::SeqCst), 2);
        assert!(matches!(err, DescriptorError::Parse { attempts: 2, reason: ParseError::StepCount(2), .. }));
        assert_eq!(err.raw(), "['a','b']");
    }

    #[test]
    fn auth_failure_is_not_retried() {
        let t = scripted(vec![Err(TransportError::Status {
            status: 401,
            url: "u".into(),
            body: "bad key".into(),
        })]);
        let action = ActionClass::new("Cartwheel").unwrap();
        let err = generate_decomposition(&action, &cfg(5), &t).unwrap_err();
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
        assert_eq!(err.raw(), "bad key");
    }

    #[test]
    fn request_carries_prompt_and_display_label() {
        struct Echo;
        impl ChatTransport for Echo {
            fn complete(&self, r: &ChatRequest) -> Result<String, TransportError> {
                assert_eq!(r.user, "apply eye makeup");
                assert_eq!(r.model, "mock");
                assert_eq!(r.temperature, 0.0);
                assert!(r.system.starts_with("You are a chatbot specialised in video action description."));
                Ok("Description: Brushing color on eyelids.".into())
            }
        }
        let action = ActionClass::new("ApplyEyeMakeup").unwrap();
        assert_eq!(generate_description(&action, &cfg(1), &Echo).unwrap(), "Brushing color on eyelids.");
    }

    #[test]
    fn validate_rejects_bad_sets() {
        let mut ds = DescriptorSet {
            action: ActionClass::new("x").unwrap(),
            decomposition: vec!["a".into(), "b".into(), "c".into()],
            description: "d".into(),
            context: "c".into(),
            objects: vec!["o".into()],
            llm_model_id: "m".into(),
            generated_at: Utc::now(),
        };
        assert!(ds.validate().is_ok());
        ds.objects.push(" ".into());
        assert_eq!(ds.validate(), Err(InvalidDescriptors::EmptyField("objects")));
        ds.objects.pop();
        ds.decomposition.pop();
        assert_eq!(ds.validate(), Err(InvalidDescriptors::StepCount(2)));
    }
}
