//! Text-completion judges.
//!
//! A [`Judge`] turns a rendered prompt into raw response text. Three kinds
//! are provided: [`RemoteJudge`] speaks a chat-completions wire format,
//! [`ScriptedJudge`] answers from lookup tables, and [`TranscriptJudge`]
//! records or replays every exchange through a [`TranscriptStore`] so a run
//! can be repeated offline byte for byte.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::knowledge::Passage;
use crate::text::strip_citations;
use crate::types::PageId;

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited after {0} attempts")]
    RateLimited(u32),
    #[error("replay miss for request {0}")]
    ReplayMiss(String),
    #[error("invalid judge request: {0}")]
    InvalidRequest(String),
    #[error("judge configuration: {0}")]
    Config(String),
    #[error("transcript: {0}")]
    Transcript(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Decompose,
    Group,
    Verify,
    Relevance,
    CitationNli,
}

impl TemplateId {
    pub fn version(self) -> &'static str {
        match self {
            TemplateId::Decompose => "1.0.0",
            TemplateId::Group => "1.0.0",
            TemplateId::Verify => "1.0.0",
            TemplateId::Relevance => "1.0.0",
            TemplateId::CitationNli => "1.0.0",
        }
    }
}

const VERIFY_TEMPLATE: &str = include_str!("../templates/verify.txt");
const RELEVANCE_TEMPLATE: &str = include_str!("../templates/relevance.txt");
const CITATION_TEMPLATE: &str = include_str!("../templates/citation_nli.txt");
const DECOMPOSE_TEMPLATE: &str = include_str!("../templates/decompose.txt");
const GROUP_INSTRUCTION: &str = include_str!("../templates/group_instruction.txt");
const GROUP_DEMOS: &str = include_str!("../templates/group_demos.json");

/// Marker line the grouping judge inserts between fact groups.
pub const GROUP_SEPARATOR: &str = "- ===";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl SamplingParams {
    /// Greedy decoding used for every evaluation subtask.
    pub const fn evaluation() -> Self {
        SamplingParams { temperature: 0.0, top_p: 1.0, max_tokens: 512 }
    }
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self::evaluation()
    }
}

/// Structured view of what a request asks. Not part of the wire format or the
/// request hash; the scripted judge answers from it.
#[derive(Debug, Clone, PartialEq)]
pub enum Subject {
    Decompose { sentence: String },
    Group { paragraph_id: String, facts: Vec<String> },
    Verify { fact: String, page_id: Option<PageId> },
    Relevance { fact: String, name: String },
    CitationNli { sentence: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub template_id: TemplateId,
    pub template_version: String,
    pub rendered_prompt: String,
    pub params: SamplingParams,
    /// Retry counter; distinct attempts hash differently.
    #[serde(default)]
    pub attempt: u32,
    #[serde(skip)]
    pub subject: Option<Subject>,
}

#[derive(Serialize)]
struct HashKey<'a> {
    template_id: TemplateId,
    template_version: &'a str,
    rendered_prompt: &'a str,
    params: &'a SamplingParams,
    attempt: u32,
}

impl JudgeRequest {
    pub fn new(template_id: TemplateId, rendered_prompt: String, subject: Subject) -> Self {
        JudgeRequest {
            template_id,
            template_version: template_id.version().to_string(),
            rendered_prompt,
            params: SamplingParams::evaluation(),
            attempt: 0,
            subject: Some(subject),
        }
    }

    pub fn validate(&self) -> Result<(), JudgeError> {
        if self.rendered_prompt.is_empty() {
            return Err(JudgeError::InvalidRequest("empty prompt".into()));
        }
        if !(self.params.temperature >= 0.0) {
            return Err(JudgeError::InvalidRequest("temperature must be non-negative".into()));
        }
        Ok(())
    }

    /// SHA-256 over the template id and version, prompt, sampling parameters
    /// and attempt number.
    pub fn request_hash(&self) -> String {
        let key = HashKey {
            template_id: self.template_id,
            template_version: &self.template_version,
            rendered_prompt: &self.rendered_prompt,
            params: &self.params,
            attempt: self.attempt,
        };
        let bytes = serde_json::to_vec(&key).expect("hash key serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

pub trait Judge: Send + Sync {
    fn complete(&self, request: &JudgeRequest) -> Result<String, JudgeError>;

    fn provider_tag(&self) -> String;
}

impl<J: Judge + ?Sized> Judge for Arc<J> {
    fn complete(&self, request: &JudgeRequest) -> Result<String, JudgeError> {
        (**self).complete(request)
    }

    fn provider_tag(&self) -> String {
        (**self).provider_tag()
    }
}

impl<J: Judge + ?Sized> Judge for Box<J> {
    fn complete(&self, request: &JudgeRequest) -> Result<String, JudgeError> {
        (**self).complete(request)
    }

    fn provider_tag(&self) -> String {
        (**self).provider_tag()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Supported,
    NotSupported,
    Indeterminate,
}

fn leading_word(text: &str) -> String {
    text.split_whitespace()
        .next()
        .unwrap_or("")
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

pub fn parse_verdict(response_text: &str) -> Verdict {
    match leading_word(response_text).as_str() {
        "true" => Verdict::Supported,
        "false" => Verdict::NotSupported,
        _ => Verdict::Indeterminate,
    }
}

/// Leading yes/no; `None` when the response is neither.
pub fn parse_yes_no(response_text: &str) -> Option<bool> {
    match leading_word(response_text).as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

/// Single-pass `{key}` substitution, so values containing braces are never
/// expanded a second time.
fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        match after.find('}').and_then(|end| {
            let key = &after[..end];
            values.iter().find(|(k, _)| *k == key).map(|(_, v)| (end, *v))
        }) {
            Some((end, v)) => {
                out.push_str(v);
                rest = &after[end + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn strip_final_newline(s: &str) -> &str {
    s.strip_suffix('\n').unwrap_or(s)
}

/// Retrieve→LM verification prompt: titled passages in order, a blank line,
/// then the fact followed by `True or False?`.
pub fn render_verify_prompt(fact: &str, evidence: &[&Passage]) -> Result<String, JudgeError> {
    if evidence.is_empty() {
        return Err(JudgeError::InvalidRequest("verification needs at least one passage".into()));
    }
    let block: String = evidence
        .iter()
        .map(|p| format!("Title: {}\nText: {}\n\n", p.title, p.text))
        .collect();
    Ok(fill(strip_final_newline(VERIFY_TEMPLATE), &[("evidence", &block), ("fact", fact)]))
}

/// Evidence-free variant: `<fact> True or False?`.
pub fn render_no_context_prompt(fact: &str) -> String {
    format!("{fact} True or False?")
}

pub fn render_relevance_prompt(fact: &str, name: &str) -> String {
    fill(strip_final_newline(RELEVANCE_TEMPLATE), &[("fact", fact), ("name", name)])
}

pub fn render_decompose_prompt(sentence: &str) -> String {
    fill(DECOMPOSE_TEMPLATE, &[("sentence", sentence)])
}

/// `(title, text)` pairs of the cited documents.
pub fn render_citation_nli_prompt(sentence: &str, docs: &[(&str, &str)]) -> String {
    let premise = docs
        .iter()
        .map(|(t, x)| format!("Title: {t}\nText: {x}"))
        .collect::<Vec<_>>()
        .join("\n\n");
    fill(
        strip_final_newline(CITATION_TEMPLATE),
        &[("premise", &premise), ("hypothesis", &strip_citations(sentence))],
    )
}

#[derive(Deserialize)]
struct GroupDemo {
    paragraph: String,
    groups: Vec<Vec<String>>,
}

fn fact_lines(facts: &[String]) -> String {
    facts.iter().map(|f| format!("- {f}\n")).collect()
}

/// Fact lines with a separator line between consecutive groups.
pub fn render_grouped_facts(groups: &[Vec<String>]) -> String {
    groups
        .iter()
        .map(|g| fact_lines(g))
        .collect::<Vec<_>>()
        .join(&format!("{GROUP_SEPARATOR}\n"))
}

fn group_block(paragraph: &str, facts: &[String]) -> String {
    format!(
        "Please breakdown the following sentence into independent facts:\n\n{paragraph}\n\n{}\n{}\n",
        fact_lines(facts),
        strip_final_newline(GROUP_INSTRUCTION)
    )
}

/// Four demonstrations (two with several biographies, two with one) followed
/// by the paragraph and its facts; the judge re-emits the facts with
/// separators between biographies.
pub fn render_group_prompt(paragraph: &str, facts: &[String]) -> String {
    let demos: Vec<GroupDemo> = serde_json::from_str(GROUP_DEMOS).expect("bundled demos parse");
    let mut out = String::new();
    for d in &demos {
        let flat: Vec<String> = d.groups.iter().flatten().cloned().collect();
        out.push_str(&group_block(&d.paragraph, &flat));
        out.push('\n');
        out.push_str(&render_grouped_facts(&d.groups));
        out.push('\n');
    }
    out.push_str(&group_block(paragraph, facts));
    out.push('\n');
    out
}

/// A scripted grouping response: either explicit groups or raw text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedGrouping {
    Groups(Vec<Vec<String>>),
    Raw(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SupportEntry {
    pub fact: String,
    pub page_id: PageId,
    pub supported: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RelevanceEntry {
    pub fact: String,
    pub relevant: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GroupEntry {
    pub paragraph_id: String,
    pub grouping: ScriptedGrouping,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DecomposeEntry {
    pub sentence: String,
    pub facts: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CitationEntry {
    pub sentence: String,
    pub supported: bool,
}

/// On-disk form of a [`ScriptedJudge`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct JudgeScript {
    #[serde(default)]
    pub support: Vec<SupportEntry>,
    #[serde(default)]
    pub relevance: Vec<RelevanceEntry>,
    #[serde(default)]
    pub groups: Vec<GroupEntry>,
    #[serde(default)]
    pub decompose: Vec<DecomposeEntry>,
    #[serde(default)]
    pub citations: Vec<CitationEntry>,
}

impl Default for ScriptedGrouping {
    fn default() -> Self {
        ScriptedGrouping::Groups(Vec::new())
    }
}

/// Deterministic judge backed by lookup tables.
///
/// Unlisted inputs fall back to fixed answers: a fact is unsupported, a fact
/// is relevant, a sentence decomposes into itself, a paragraph forms one
/// group, and a cited sentence is unsupported.
#[derive(Debug, Clone, Default)]
pub struct ScriptedJudge {
    pub support_table: HashMap<(String, PageId), bool>,
    pub relevance_table: HashMap<String, bool>,
    pub group_script: HashMap<String, ScriptedGrouping>,
    pub decompose_table: HashMap<String, Vec<String>>,
    pub citation_table: HashMap<String, bool>,
}

impl ScriptedJudge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn support(mut self, fact: &str, page_id: &PageId, supported: bool) -> Self {
        self.support_table.insert((fact.to_string(), page_id.clone()), supported);
        self
    }

    pub fn from_script(script: JudgeScript) -> Self {
        let mut j = ScriptedJudge::default();
        for e in script.support {
            j.support_table.insert((e.fact, e.page_id), e.supported);
        }
        for e in script.relevance {
            j.relevance_table.insert(e.fact, e.relevant);
        }
        for e in script.groups {
            j.group_script.insert(e.paragraph_id, e.grouping);
        }
        for e in script.decompose {
            j.decompose_table.insert(e.sentence, e.facts);
        }
        for e in script.citations {
            j.citation_table.insert(e.sentence, e.supported);
        }
        j
    }

    /// Tables in a stable order, suitable for writing to disk.
    pub fn to_script(&self) -> JudgeScript {
        let mut support: Vec<_> = self
            .support_table
            .iter()
            .map(|((fact, page_id), &supported)| SupportEntry { fact: fact.clone(), page_id: page_id.clone(), supported })
            .collect();
        support.sort_by(|a, b| (&a.fact, &a.page_id).cmp(&(&b.fact, &b.page_id)));
        let mut relevance: Vec<_> = self
            .relevance_table
            .iter()
            .map(|(fact, &relevant)| RelevanceEntry { fact: fact.clone(), relevant })
            .collect();
        relevance.sort_by(|a, b| a.fact.cmp(&b.fact));
        let mut groups: Vec<_> = self
            .group_script
            .iter()
            .map(|(p, g)| GroupEntry { paragraph_id: p.clone(), grouping: g.clone() })
            .collect();
        groups.sort_by(|a, b| a.paragraph_id.cmp(&b.paragraph_id));
        let mut decompose: Vec<_> = self
            .decompose_table
            .iter()
            .map(|(s, f)| DecomposeEntry { sentence: s.clone(), facts: f.clone() })
            .collect();
        decompose.sort_by(|a, b| a.sentence.cmp(&b.sentence));
        let mut citations: Vec<_> = self
            .citation_table
            .iter()
            .map(|(s, &supported)| CitationEntry { sentence: s.clone(), supported })
            .collect();
        citations.sort_by(|a, b| a.sentence.cmp(&b.sentence));
        JudgeScript { support, relevance, groups, decompose, citations }
    }

    pub fn load(path: &Path) -> Result<Self, JudgeError> {
        let file = File::open(path)?;
        let script: JudgeScript = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| JudgeError::Config(format!("bad judge script {}: {e}", path.display())))?;
        Ok(Self::from_script(script))
    }
}

fn bool_word(b: bool, yes: &'static str, no: &'static str) -> String {
    if b { yes } else { no }.to_string()
}

impl Judge for ScriptedJudge {
    fn complete(&self, request: &JudgeRequest) -> Result<String, JudgeError> {
        request.validate()?;
        let subject = request
            .subject
            .as_ref()
            .ok_or_else(|| JudgeError::InvalidRequest("scripted judge needs a request subject".into()))?;
        Ok(match subject {
            Subject::Verify { fact, page_id } => {
                let supported = page_id
                    .as_ref()
                    .and_then(|p| self.support_table.get(&(fact.clone(), p.clone())))
                    .copied()
                    .unwrap_or(false);
                bool_word(supported, "True", "False")
            }
            Subject::Relevance { fact, .. } => {
                bool_word(self.relevance_table.get(fact).copied().unwrap_or(true), "Yes", "No")
            }
            Subject::Decompose { sentence } => match self.decompose_table.get(sentence) {
                Some(facts) => fact_lines(facts),
                None => format!("- {sentence}\n"),
            },
            Subject::Group { paragraph_id, facts } => match self.group_script.get(paragraph_id) {
                Some(ScriptedGrouping::Groups(g)) => render_grouped_facts(g),
                Some(ScriptedGrouping::Raw(raw)) => raw.clone(),
                None => fact_lines(facts),
            },
            Subject::CitationNli { sentence } => {
                bool_word(self.citation_table.get(sentence).copied().unwrap_or(false), "True", "False")
            }
        })
    }

    fn provider_tag(&self) -> String {
        "scripted".to_string()
    }
}

/// One recorded exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub request_hash: String,
    pub template_id: TemplateId,
    pub template_version: String,
    pub rendered_prompt: String,
    pub params: SamplingParams,
    #[serde(default)]
    pub attempt: u32,
    pub response_text: String,
    #[serde(default)]
    pub latency_ms: u64,
    #[serde(default)]
    pub provider_tag: String,
}

/// Append-only JSONL log of judge exchanges with an in-memory index.
#[derive(Debug, Default)]
pub struct TranscriptStore {
    entries: RwLock<HashMap<String, TranscriptEntry>>,
    writer: Mutex<Option<BufWriter<File>>>,
}

impl TranscriptStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    fn read_entries(path: &Path) -> Result<HashMap<String, TranscriptEntry>, JudgeError> {
        let mut entries = HashMap::new();
        for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: TranscriptEntry = serde_json::from_str(&line)
                .map_err(|err| JudgeError::Transcript(format!("{}:{}: {err}", path.display(), i + 1)))?;
            // Later entries win.
            entries.insert(e.request_hash.clone(), e);
        }
        Ok(entries)
    }

    /// Read-only store for replay.
    pub fn load(path: &Path) -> Result<Self, JudgeError> {
        Ok(TranscriptStore { entries: RwLock::new(Self::read_entries(path)?), writer: Mutex::new(None) })
    }

    /// Store that appends new exchanges to `path`, keeping any already there.
    pub fn open_append(path: &Path) -> Result<Self, JudgeError> {
        let entries = if path.exists() { Self::read_entries(path)? } else { HashMap::new() };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(TranscriptStore { entries: RwLock::new(entries), writer: Mutex::new(Some(BufWriter::new(file))) })
    }

    pub fn get(&self, request_hash: &str) -> Option<TranscriptEntry> {
        self.entries.read().unwrap().get(request_hash).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn append(&self, entry: TranscriptEntry) -> Result<(), JudgeError> {
        let mut writer = self.writer.lock().unwrap();
        if let Some(w) = writer.as_mut() {
            serde_json::to_writer(&mut *w, &entry).map_err(io::Error::from)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        self.entries.write().unwrap().insert(entry.request_hash.clone(), entry);
        Ok(())
    }

    /// Every entry ordered by request hash.
    pub fn entries(&self) -> Vec<TranscriptEntry> {
        let mut v: Vec<_> = self.entries.read().unwrap().values().cloned().collect();
        v.sort_by(|a, b| a.request_hash.cmp(&b.request_hash));
        v
    }

    /// Write a sorted, de-duplicated copy of the transcript.
    pub fn write_sorted(&self, path: &Path) -> Result<(), JudgeError> {
        let mut w = BufWriter::new(File::create(path)?);
        for e in self.entries() {
            serde_json::to_writer(&mut w, &e).map_err(io::Error::from)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Judge that consults a transcript first. In record mode a miss is forwarded
/// to the inner judge and the exchange appended; in replay mode a miss fails.
pub struct TranscriptJudge {
    inner: Option<Box<dyn Judge>>,
    store: Arc<TranscriptStore>,
}

impl TranscriptJudge {
    pub fn record(inner: Box<dyn Judge>, store: Arc<TranscriptStore>) -> Self {
        TranscriptJudge { inner: Some(inner), store }
    }

    pub fn replay(store: Arc<TranscriptStore>) -> Self {
        TranscriptJudge { inner: None, store }
    }

    pub fn store(&self) -> &Arc<TranscriptStore> {
        &self.store
    }
}

impl Judge for TranscriptJudge {
    fn complete(&self, request: &JudgeRequest) -> Result<String, JudgeError> {
        request.validate()?;
        let hash = request.request_hash();
        if let Some(hit) = self.store.get(&hash) {
            return Ok(hit.response_text);
        }
        let Some(inner) = &self.inner else {
            return Err(JudgeError::ReplayMiss(hash));
        };
        let started = Instant::now();
        let response_text = inner.complete(request)?;
        self.store.append(TranscriptEntry {
            request_hash: hash,
            template_id: request.template_id,
            template_version: request.template_version.clone(),
            rendered_prompt: request.rendered_prompt.clone(),
            params: request.params,
            attempt: request.attempt,
            response_text: response_text.clone(),
            latency_ms: started.elapsed().as_millis() as u64,
            provider_tag: inner.provider_tag(),
        })?;
        Ok(response_text)
    }

    fn provider_tag(&self) -> String {
        match &self.inner {
            Some(j) => format!("record:{}", j.provider_tag()),
            None => "replay".to_string(),
        }
    }
}

/// Counting semaphore bounding concurrent remote requests.
#[derive(Debug)]
struct Limiter {
    available: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(n: usize) -> Self {
        Limiter { available: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut n = self.available.lock().unwrap();
        while *n == 0 {
            n = self.cv.wait(n).unwrap();
        }
        *n -= 1;
        LimiterGuard(self)
    }
}

struct LimiterGuard<'a>(&'a Limiter);

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone)]
pub struct ChatConfig {
    pub endpoint: String,
    pub model: String,
    pub token: Option<String>,
    pub max_attempts: u32,
    pub backoff: Duration,
    pub max_in_flight: usize,
    pub timeout: Duration,
}

impl ChatConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        ChatConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            token: None,
            max_attempts: 3,
            backoff: Duration::from_millis(500),
            max_in_flight: 4,
            timeout: Duration::from_secs(120),
        }
    }

    /// Reads `<PREFIX>_ENDPOINT`, `<PREFIX>_MODEL` and optional
    /// `<PREFIX>_TOKEN`, e.g. with prefix `DFS_JUDGE`.
    pub fn from_env(prefix: &str) -> Result<Self, JudgeError> {
        let var = |name: &str| std::env::var(format!("{prefix}_{name}")).ok().filter(|v| !v.is_empty());
        let endpoint = var("ENDPOINT").ok_or_else(|| JudgeError::Config(format!("{prefix}_ENDPOINT is not set")))?;
        let model = var("MODEL").ok_or_else(|| JudgeError::Config(format!("{prefix}_MODEL is not set")))?;
        let mut cfg = ChatConfig::new(endpoint, model);
        cfg.token = var("TOKEN");
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatBody<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: String,
}

/// Chat-completions client with bounded retries and a cap on in-flight
/// requests.
#[derive(Debug)]
pub struct ChatClient {
    config: ChatConfig,
    agent: ureq::Agent,
    limiter: Limiter,
}

impl ChatClient {
    pub fn new(config: ChatConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(config.timeout)).build().into();
        let limiter = Limiter::new(config.max_in_flight);
        ChatClient { config, agent, limiter }
    }

    pub fn config(&self) -> &ChatConfig {
        &self.config
    }

    pub fn complete(&self, prompt: &str, params: &SamplingParams) -> Result<String, JudgeError> {
        let body = ChatBody {
            model: &self.config.model,
            messages: [ChatMessage { role: "user", content: prompt }],
            temperature: params.temperature,
            top_p: params.top_p,
            max_tokens: params.max_tokens,
        };
        let _slot = self.limiter.acquire();
        let attempts = self.config.max_attempts.max(1);
        let mut rate_limited = false;
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.config.backoff * 2u32.pow(attempt - 1));
            }
            let mut req = self.agent.post(&self.config.endpoint);
            if let Some(token) = &self.config.token {
                req = req.header("Authorization", &format!("Bearer {token}"));
            }
            match req.send_json(&body) {
                Ok(mut resp) => {
                    let parsed: ChatResponse = resp
                        .body_mut()
                        .read_json()
                        .map_err(|e| JudgeError::Transport(format!("bad response body: {e}")))?;
                    return parsed
                        .choices
                        .into_iter()
                        .next()
                        .map(|c| c.message.content)
                        .ok_or_else(|| JudgeError::Transport("response has no choices".into()));
                }
                Err(ureq::Error::StatusCode(429)) => {
                    rate_limited = true;
                    last_error = "HTTP 429".into();
                }
                Err(ureq::Error::StatusCode(code)) if code >= 500 => {
                    rate_limited = false;
                    last_error = format!("HTTP {code}");
                }
                Err(ureq::Error::StatusCode(code)) => {
                    return Err(JudgeError::Transport(format!("HTTP {code}")));
                }
                Err(e) => {
                    rate_limited = false;
                    last_error = e.to_string();
                }
            }
        }
        if rate_limited {
            Err(JudgeError::RateLimited(attempts))
        } else {
            Err(JudgeError::Transport(format!("{last_error} after {attempts} attempts")))
        }
    }
}

pub struct RemoteJudge {
    client: ChatClient,
}

impl RemoteJudge {
    pub fn new(config: ChatConfig) -> Self {
        RemoteJudge { client: ChatClient::new(config) }
    }

    pub fn from_env() -> Result<Self, JudgeError> {
        Ok(Self::new(ChatConfig::from_env("DFS_JUDGE")?))
    }
}

impl Judge for RemoteJudge {
    fn complete(&self, request: &JudgeRequest) -> Result<String, JudgeError> {
        request.validate()?;
        self.client.complete(&request.rendered_prompt, &request.params)
    }

    fn provider_tag(&self) -> String {
        format!("remote:{}", self.client.config.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn passage(title: &str, idx: usize, text: &str) -> Passage {
        Passage { page_id: PageId::from_index(0), passage_index: idx, title: title.into(), text: text.into() }
    }

    #[test]
    fn verdicts() {
        assert_eq!(parse_verdict("True."), Verdict::Supported);
        assert_eq!(parse_verdict("false, because..."), Verdict::NotSupported);
        assert_eq!(parse_verdict("Unsure"), Verdict::Indeterminate);
        assert_eq!(parse_verdict("  TRUE"), Verdict::Supported);
        assert_eq!(parse_verdict(""), Verdict::Indeterminate);
        assert_eq!(parse_verdict("Truely"), Verdict::Indeterminate);
        assert_eq!(parse_yes_no("Yes, it is."), Some(true));
        assert_eq!(parse_yes_no("no"), Some(false));
        assert_eq!(parse_yes_no("maybe"), None);
    }

    #[test]
    fn verify_prompt_is_order_sensitive() {
        let p1 = passage("A", 0, "one");
        let p2 = passage("A", 1, "two");
        let a = render_verify_prompt("f", &[&p1, &p2]).unwrap();
        let b = render_verify_prompt("f", &[&p2, &p1]).unwrap();
        assert_ne!(a, b);
        assert!(render_verify_prompt("f", &[]).is_err());
        assert!(a.ends_with("Input: f True or False?\nOutput:"));
    }

    #[test]
    fn fill_does_not_expand_twice() {
        assert_eq!(fill("{a} {b}", &[("a", "{b}"), ("b", "x")]), "{b} x");
        assert_eq!(fill("{unknown} {a}", &[("a", "1")]), "{unknown} 1");
    }

    #[test]
    fn scripted_answers() {
        let page = PageId::from_index(3);
        let judge = ScriptedJudge::new().support("He swam.", &page, true);
        let verify = |fact: &str| {
            let req = JudgeRequest::new(
                TemplateId::Verify,
                "p".into(),
                Subject::Verify { fact: fact.into(), page_id: Some(page.clone()) },
            );
            judge.complete(&req).unwrap()
        };
        assert_eq!(verify("He swam."), "True");
        assert_eq!(verify("He flew."), "False");
        let rel = JudgeRequest::new(
            TemplateId::Relevance,
            "p".into(),
            Subject::Relevance { fact: "x".into(), name: "n".into() },
        );
        assert_eq!(judge.complete(&rel).unwrap(), "Yes");
        let no_subject = JudgeRequest { subject: None, ..rel };
        assert!(judge.complete(&no_subject).is_err());
    }

    #[test]
    fn script_round_trip() {
        let judge = ScriptedJudge::new()
            .support("b", &PageId::from_index(1), true)
            .support("a", &PageId::from_index(2), false);
        let json = serde_json::to_string(&judge.to_script()).unwrap();
        let back = ScriptedJudge::from_script(serde_json::from_str(&json).unwrap());
        assert_eq!(back.support_table, judge.support_table);
        assert_eq!(serde_json::to_string(&back.to_script()).unwrap(), json);
    }

    #[test]
    fn hash_ignores_subject_but_not_attempt() {
        let a = JudgeRequest::new(TemplateId::Verify, "p".into(), Subject::Decompose { sentence: "x".into() });
        let mut b = a.clone();
        b.subject = None;
        assert_eq!(a.request_hash(), b.request_hash());
        b.attempt = 1;
        assert_ne!(a.request_hash(), b.request_hash());
        assert_eq!(a.request_hash().len(), 64);
    }

    #[test]
    fn replay_hits_and_misses() {
        let store = Arc::new(TranscriptStore::in_memory());
        let recorder = TranscriptJudge::record(Box::new(ScriptedJudge::new()), store.clone());
        let req = JudgeRequest::new(
            TemplateId::Relevance,
            "is it".into(),
            Subject::Relevance { fact: "x".into(), name: "n".into() },
        );
        assert_eq!(recorder.complete(&req).unwrap(), "Yes");
        let replay = TranscriptJudge::replay(store);
        let mut stripped = req.clone();
        stripped.subject = None;
        assert_eq!(replay.complete(&stripped).unwrap(), "Yes");
        let mut other = stripped.clone();
        other.rendered_prompt = "something else".into();
        assert!(matches!(replay.complete(&other), Err(JudgeError::ReplayMiss(_))));
    }

    #[test]
    fn transcript_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        {
            let store = Arc::new(TranscriptStore::open_append(&path).unwrap());
            let j = TranscriptJudge::record(Box::new(ScriptedJudge::new()), store);
            for s in ["a", "b"] {
                let req = JudgeRequest::new(
                    TemplateId::Decompose,
                    render_decompose_prompt(s),
                    Subject::Decompose { sentence: s.into() },
                );
                j.complete(&req).unwrap();
            }
        }
        let loaded = TranscriptStore::load(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        let e = &loaded.entries()[0];
        assert_eq!(e.provider_tag, "scripted");
        assert_eq!(e.template_version, "1.0.0");
    }

    #[test]
    fn group_prompt_has_four_demos_and_query() {
        let p = render_group_prompt("Para.", &["F1.".into(), "F2.".into()]);
        assert_eq!(p.matches("Please breakdown the following sentence").count(), 5);
        assert_eq!(p.matches("Next, refer to the paragraph again").count(), 5);
        assert!(p.ends_with("- F1.\n- F2.\n\nNext, refer to the paragraph again and see if it explicitly states that it contains the biographies of multiple individuals. If there are multiple biographies, split the independent facts from different biography using \"- ===\". If the paragraph does not contain multiple biographies from different individuals, repeat the independent facts.\n\n"));
        // Gavin Hamilton demo carries two separators.
        assert_eq!(p.matches("- ===\n").count(), 3);
    }
}
