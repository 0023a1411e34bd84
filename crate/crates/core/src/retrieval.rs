//! Query construction and top-k passage retrieval.
//!
//! The default backend is an in-process BM25 index. The embedding-service
//! backend posts the query and every passage to a remote scorer and ranks by
//! the similarities it returns.

use std::collections::{HashMap, HashSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{Passage, PassageStore, WikiPage};
use crate::types::EntityRef;

pub const DEFAULT_K: usize = 5;
pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("the passage store is empty")]
    EmptyStore,
    #[error("embedding service unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("embedding service returned an invalid response: {0}")]
    BadResponse(String),
    #[error("invalid retriever configuration: {0}")]
    InvalidConfig(String),
}

const DISAMBIGUATION_SUFFIX: &str = "(disambiguation)";

/// Strip a trailing `(disambiguation)` marker and surrounding whitespace.
pub fn clean_name(name: &str) -> &str {
    let trimmed = name.trim();
    trimmed.strip_suffix(DISAMBIGUATION_SUFFIX).map(str::trim).unwrap_or(trimmed)
}

pub fn make_query(name: &str) -> String {
    format!("Tell me a bio of {}", clean_name(name))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedPassage {
    pub passage: Passage,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Lexical,
    EmbeddingService,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieverConfig {
    pub backend: Backend,
    pub k: usize,
    pub endpoint: Option<String>,
}

impl Default for RetrieverConfig {
    fn default() -> Self {
        RetrieverConfig { backend: Backend::Lexical, k: DEFAULT_K, endpoint: None }
    }
}

impl RetrieverConfig {
    pub fn lexical(k: usize) -> Self {
        RetrieverConfig { backend: Backend::Lexical, k, endpoint: None }
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.k == 0 {
            return Err(RetrievalError::InvalidConfig("k must be at least 1".into()));
        }
        match (self.backend, &self.endpoint) {
            (Backend::EmbeddingService, None) => {
                Err(RetrievalError::InvalidConfig("embedding_service requires an endpoint".into()))
            }
            (Backend::Lexical, Some(_)) => {
                Err(RetrievalError::InvalidConfig("lexical backend takes no endpoint".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Lowercased whitespace tokens with leading and trailing punctuation removed.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Okapi BM25 over a fixed document list.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    term_freqs: Vec<HashMap<String, u32>>,
    doc_lens: Vec<f64>,
    avg_len: f64,
    doc_freq: HashMap<String, u32>,
}

impl Bm25Index {
    pub fn new<'a, I: IntoIterator<Item = &'a str>>(docs: I) -> Self {
        let mut term_freqs = Vec::new();
        let mut doc_lens = Vec::new();
        let mut doc_freq: HashMap<String, u32> = HashMap::new();
        for doc in docs {
            let tokens = tokenize(doc);
            doc_lens.push(tokens.len() as f64);
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for t in tf.keys() {
                *doc_freq.entry(t.clone()).or_default() += 1;
            }
            term_freqs.push(tf);
        }
        let avg_len = if doc_lens.is_empty() {
            0.0
        } else {
            doc_lens.iter().sum::<f64>() / doc_lens.len() as f64
        };
        Bm25Index { term_freqs, doc_lens, avg_len, doc_freq }
    }

    pub fn len(&self) -> usize {
        self.term_freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.term_freqs.is_empty()
    }

    fn idf(&self, term: &str) -> f64 {
        let n = self.len() as f64;
        let df = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Scores for every document. Repeated query terms count once.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        let mut terms = tokenize(query);
        let mut seen = HashSet::new();
        terms.retain(|t| seen.insert(t.clone()));
        let idfs: Vec<f64> = terms.iter().map(|t| self.idf(t)).collect();
        self.term_freqs
            .iter()
            .zip(&self.doc_lens)
            .map(|(tf, &len)| {
                let norm = if self.avg_len > 0.0 { len / self.avg_len } else { 0.0 };
                terms
                    .iter()
                    .zip(&idfs)
                    .map(|(t, idf)| {
                        let f = tf.get(t).copied().unwrap_or(0) as f64;
                        if f == 0.0 {
                            0.0
                        } else {
                            idf * f * (BM25_K1 + 1.0) / (f + BM25_K1 * (1.0 - BM25_B + BM25_B * norm))
                        }
                    })
                    .sum()
            })
            .collect()
    }
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    query: &'a str,
    passages: Vec<&'a str>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    scores: Vec<f64>,
}

/// Client for a remote similarity scorer.
#[derive(Debug, Clone)]
pub struct EmbeddingClient {
    endpoint: String,
    agent: ureq::Agent,
}

impl EmbeddingClient {
    pub fn new(endpoint: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        EmbeddingClient { endpoint: endpoint.into(), agent }
    }

    pub fn score(&self, query: &str, passages: &[&str]) -> Result<Vec<f64>, RetrievalError> {
        let body = EmbeddingRequest { query, passages: passages.to_vec() };
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(&body)
            .map_err(|e| RetrievalError::EndpointUnreachable(e.to_string()))?;
        let parsed: EmbeddingResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| RetrievalError::BadResponse(e.to_string()))?;
        if parsed.scores.len() != passages.len() {
            return Err(RetrievalError::BadResponse(format!(
                "expected {} scores, got {}",
                passages.len(),
                parsed.scores.len()
            )));
        }
        if parsed.scores.iter().any(|s| !s.is_finite()) {
            return Err(RetrievalError::BadResponse("non-finite score".into()));
        }
        Ok(parsed.scores)
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Lexical(Bm25Index),
    Embedding(EmbeddingClient),
}

/// A retriever bound to one store. The lexical index is built once at
/// construction and reused for every query.
#[derive(Debug, Clone)]
pub struct Retriever {
    config: RetrieverConfig,
    engine: Engine,
}

impl Retriever {
    pub fn new(config: RetrieverConfig, store: &PassageStore) -> Result<Self, RetrievalError> {
        config.validate()?;
        let engine = match config.backend {
            Backend::Lexical => Engine::Lexical(Bm25Index::new(store.passages().map(|p| p.text.as_str()))),
            Backend::EmbeddingService => {
                Engine::Embedding(EmbeddingClient::new(config.endpoint.clone().unwrap_or_default()))
            }
        };
        Ok(Retriever { config, engine })
    }

    pub fn config(&self) -> &RetrieverConfig {
        &self.config
    }

    /// Top-k passages, ties broken by `(page_id, passage_index)` ascending.
    pub fn retrieve(&self, store: &PassageStore, query: &str) -> Result<Vec<RetrievedPassage>, RetrievalError> {
        if store.passage_count() == 0 {
            return Err(RetrievalError::EmptyStore);
        }
        let passages: Vec<&Passage> = store.passages().collect();
        let scores = match &self.engine {
            Engine::Lexical(index) => {
                if index.len() != passages.len() {
                    return Err(RetrievalError::InvalidConfig("store changed since the index was built".into()));
                }
                index.scores(query)
            }
            Engine::Embedding(client) => {
                let texts: Vec<&str> = passages.iter().map(|p| p.text.as_str()).collect();
                client.score(query, &texts)?
            }
        };
        Ok(top_k(&passages, &scores, self.config.k))
    }
}

fn top_k(passages: &[&Passage], scores: &[f64], k: usize) -> Vec<RetrievedPassage> {
    let mut order: Vec<usize> = (0..passages.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| passages[a].page_id.cmp(&passages[b].page_id))
            .then_with(|| passages[a].passage_index.cmp(&passages[b].passage_index))
    });
    order
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, idx)| RetrievedPassage { passage: passages[idx].clone(), score: scores[idx], rank: i + 1 })
        .collect()
}

/// Unique entities of the retrieved passages in first-appearance order.
pub fn candidate_entities(passages: &[RetrievedPassage]) -> Vec<EntityRef> {
    let mut seen = HashSet::new();
    passages
        .iter()
        .filter(|p| seen.insert(p.passage.page_id.clone()))
        .map(|p| EntityRef { title: p.passage.title.clone(), page_id: p.passage.page_id.clone() })
        .collect()
}

/// The `m` passages of `page` that score highest against `text` under BM25
/// computed within the page, ties to the earlier passage.
pub fn select_evidence<'a>(page: &'a WikiPage, text: &str, m: usize) -> Vec<&'a Passage> {
    let index = Bm25Index::new(page.passages.iter().map(|p| p.text.as_str()));
    let scores = index.scores(text);
    let mut order: Vec<usize> = (0..page.passages.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.into_iter().take(m).map(|i| &page.passages[i]).collect()
}
