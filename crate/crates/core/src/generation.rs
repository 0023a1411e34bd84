//! Retrieval-augmented biography generation with citations.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::judge::{ChatClient, ChatConfig, JudgeError, SamplingParams};
use crate::knowledge::PassageStore;
use crate::pipeline::CitedDoc;
use crate::retrieval::{clean_name, make_query, RetrievalError, RetrievedPassage, Retriever};
use crate::text::{citation_indices, split_sentences, strip_citations};
use crate::types::SentenceCitationRecord;

const INSTRUCTION: &str = include_str!("../templates/vanilla_instruction.txt");
const DEMOS_WITH_AMBIGUITY: &str = include_str!("../templates/demos_with_ambiguity.json");
const DEMOS_WITHOUT_AMBIGUITY: &str = include_str!("../templates/demos_without_ambiguity.json");

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error(transparent)]
    Transport(#[from] JudgeError),
    #[error("retrieval returned no passages for {0:?}")]
    EmptyRetrieval(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("invalid demonstration set: {0}")]
    InvalidDemos(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoKind {
    WithAmbiguity,
    WithoutAmbiguity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoPassage {
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demo {
    pub name: String,
    pub passages: Vec<DemoPassage>,
    pub answer: String,
}

/// Two worked examples prepended to every generation prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoSet {
    pub kind: DemoKind,
    pub demos: Vec<Demo>,
}

impl DemoSet {
    pub fn bundled(kind: DemoKind) -> Self {
        let raw = match kind {
            DemoKind::WithAmbiguity => DEMOS_WITH_AMBIGUITY,
            DemoKind::WithoutAmbiguity => DEMOS_WITHOUT_AMBIGUITY,
        };
        let set: DemoSet = serde_json::from_str(raw).expect("bundled demos parse");
        set.validate().expect("bundled demos are valid");
        set
    }

    pub fn load(path: &Path) -> Result<Self, GenerationError> {
        let file = File::open(path).map_err(|e| GenerationError::InvalidDemos(e.to_string()))?;
        let set: DemoSet = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| GenerationError::InvalidDemos(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.demos.len() != 2 {
            return Err(GenerationError::InvalidDemos(format!("expected 2 demos, found {}", self.demos.len())));
        }
        Ok(())
    }
}

fn document_block(name: &str, docs: &[(&str, &str)], answer: &str) -> String {
    let mut out = String::new();
    for (i, (title, text)) in docs.iter().enumerate() {
        out.push_str(&format!("Document [{}] (Title: {title}) {text}\n", i + 1));
    }
    out.push_str(&format!("Name of the person: {name}\n"));
    if answer.is_empty() {
        out.push_str("Answer:");
    } else {
        out.push_str(&format!("Answer: {answer}"));
    }
    out
}

/// Instruction, the two demonstrations with their answers, then the query
/// block ending in `Answer:`. Titles keep their disambiguating parentheticals.
pub fn build_prompt(name: &str, passages: &[(&str, &str)], demo_set: &DemoSet) -> String {
    let mut blocks = vec![INSTRUCTION.trim_end().to_string()];
    for demo in &demo_set.demos {
        let docs: Vec<(&str, &str)> = demo.passages.iter().map(|p| (p.title.as_str(), p.text.as_str())).collect();
        blocks.push(document_block(&demo.name, &docs, &demo.answer));
    }
    blocks.push(document_block(clean_name(name), passages, ""));
    blocks.join("\n\n")
}

/// Sampling used for generation.
pub const fn generation_sampling() -> SamplingParams {
    SamplingParams { temperature: 1.0, top_p: 0.95, max_tokens: 512 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub paragraph_id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_tag: Option<String>,
    pub prompt: String,
    pub output_text: String,
    /// Same as `output_text`; lets a record be read as an evaluation input.
    pub text: String,
    pub sampling: SamplingParams,
    pub retrieved: Vec<RetrievedPassage>,
    pub citations_resolved: Vec<CitedDoc>,
}

pub trait Generator: Send + Sync {
    fn generate(&self, prompt: &str, sampling: &SamplingParams) -> Result<String, JudgeError>;

    fn tag(&self) -> String;
}

pub struct RemoteGenerator {
    client: ChatClient,
}

impl RemoteGenerator {
    pub fn new(config: ChatConfig) -> Self {
        RemoteGenerator { client: ChatClient::new(config) }
    }

    pub fn from_env() -> Result<Self, JudgeError> {
        Ok(Self::new(ChatConfig::from_env("DFS_GEN")?))
    }
}

impl Generator for RemoteGenerator {
    fn generate(&self, prompt: &str, sampling: &SamplingParams) -> Result<String, JudgeError> {
        self.client.complete(prompt, sampling)
    }

    fn tag(&self) -> String {
        format!("remote:{}", self.client.config().model)
    }
}

/// Returns a fixed output per name, or a default when the name is unlisted.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScriptedGenerator {
    #[serde(default)]
    pub outputs: HashMap<String, String>,
    #[serde(default)]
    pub default_output: String,
}

impl Generator for ScriptedGenerator {
    fn generate(&self, prompt: &str, _sampling: &SamplingParams) -> Result<String, JudgeError> {
        let name = prompt
            .rsplit("Name of the person: ")
            .next()
            .and_then(|tail| tail.lines().next())
            .unwrap_or("");
        Ok(self.outputs.get(name).cloned().unwrap_or_else(|| self.default_output.clone()))
    }

    fn tag(&self) -> String {
        "scripted".to_string()
    }
}

fn clean_output(raw: &str) -> String {
    let t = raw.trim();
    t.strip_prefix("Answer:").map(str::trim).unwrap_or(t).to_string()
}

pub fn generate_bio(
    generator: &dyn Generator,
    name: &str,
    store: &PassageStore,
    retriever: &Retriever,
    demo_set: &DemoSet,
) -> Result<GenerationRecord, GenerationError> {
    let retrieved = retriever.retrieve(store, &make_query(name))?;
    if retrieved.is_empty() {
        return Err(GenerationError::EmptyRetrieval(name.to_string()));
    }
    let docs: Vec<(&str, &str)> =
        retrieved.iter().map(|r| (r.passage.title.as_str(), r.passage.text.as_str())).collect();
    let prompt = build_prompt(name, &docs, demo_set);
    let sampling = generation_sampling();
    let output_text = clean_output(&generator.generate(&prompt, &sampling)?);
    let citations_resolved = retrieved
        .iter()
        .map(|r| CitedDoc { doc_index: r.rank, title: r.passage.title.clone(), text: r.passage.text.clone() })
        .collect();
    Ok(GenerationRecord {
        paragraph_id: name.to_string(),
        name: name.to_string(),
        model_tag: None,
        prompt,
        text: output_text.clone(),
        output_text,
        sampling,
        retrieved,
        citations_resolved,
    })
}

/// Generate one biography per name on `workers` threads. Paragraph ids are
/// `g00000`, `g00001`, ... in input order.
pub fn generate_corpus(
    generator: &dyn Generator,
    names: &[String],
    store: &PassageStore,
    retriever: &Retriever,
    demo_set: &DemoSet,
    model_tag: Option<&str>,
    workers: usize,
) -> Result<Vec<GenerationRecord>, GenerationError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool builds");
    pool.install(|| {
        names
            .par_iter()
            .enumerate()
            .map(|(i, name)| {
                let mut rec = generate_bio(generator, name, store, retriever, demo_set)?;
                rec.paragraph_id = format!("g{i:05}");
                rec.model_tag = model_tag.map(str::to_string);
                Ok(rec)
            })
            .collect()
    })
}

/// A sentence with its parsed citations, before any support judgement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationSkeleton {
    pub sentence_index: usize,
    /// Sentence with citation markers removed.
    pub sentence: String,
    /// In-range document numbers, de-duplicated in order of appearance.
    pub citation_ids: Vec<usize>,
    /// Document numbers that point past the retrieved list.
    pub dangling: Vec<usize>,
}

impl CitationSkeleton {
    /// Finish the record; a dangling citation makes the sentence unsupported.
    pub fn into_record(self, supported: bool) -> SentenceCitationRecord {
        let ok = supported && self.dangling.is_empty();
        SentenceCitationRecord::new(self.sentence_index, self.citation_ids, ok)
    }
}

/// Parse `[n]` markers per sentence; `is_valid(n)` decides whether document
/// `n` exists.
pub fn resolve_citations_with(output_text: &str, is_valid: impl Fn(usize) -> bool) -> Vec<CitationSkeleton> {
    split_sentences(output_text)
        .into_iter()
        .enumerate()
        .map(|(sentence_index, s)| {
            let mut citation_ids = Vec::new();
            let mut dangling = Vec::new();
            for n in citation_indices(&s) {
                let bucket = if is_valid(n) { &mut citation_ids } else { &mut dangling };
                if !bucket.contains(&n) {
                    bucket.push(n);
                }
            }
            CitationSkeleton { sentence_index, sentence: strip_citations(&s), citation_ids, dangling }
        })
        .collect()
}

/// Citations map to retrieved documents by 1-based rank.
pub fn resolve_citations(output_text: &str, retrieved: &[RetrievedPassage]) -> Vec<CitationSkeleton> {
    resolve_citations_with(output_text, |n| (1..=retrieved.len()).contains(&n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::Passage;
    use crate::types::PageId;

    fn retrieved(n: usize) -> Vec<RetrievedPassage> {
        (0..n)
            .map(|i| RetrievedPassage {
                passage: Passage { page_id: PageId::from_index(i), passage_index: 0, title: format!("T{i}"), text: "x".into() },
                score: 1.0,
                rank: i + 1,
            })
            .collect()
    }

    #[test]
    fn citations_per_sentence() {
        let r = resolve_citations("He swam. [2]", &retrieved(5));
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].citation_ids, vec![2]);
        assert_eq!(r[0].sentence, "He swam.");

        let r = resolve_citations("A [1][3]. B.", &retrieved(5));
        assert_eq!(r[0].citation_ids, vec![1, 3]);
        assert!(r[1].citation_ids.is_empty());

        let r = resolve_citations("He coached. [7]", &retrieved(5));
        assert_eq!(r[0].dangling, vec![7]);
        assert!(!r[0].clone().into_record(true).supported_by_citations);
        let r = resolve_citations("He coached [1][7].", &retrieved(5));
        assert!(!r[0].clone().into_record(true).supported_by_citations);
    }

    #[test]
    fn bundled_demo_sets_have_two_demos() {
        for kind in [DemoKind::WithAmbiguity, DemoKind::WithoutAmbiguity] {
            assert_eq!(DemoSet::bundled(kind).demos.len(), 2);
        }
    }

    #[test]
    fn prompt_layout() {
        let demos = DemoSet::bundled(DemoKind::WithoutAmbiguity);
        let p = build_prompt(
            "Dick Hanley (disambiguation)",
            &[("Dick Hanley (swimmer)", "An American swimmer.")],
            &demos,
        );
        assert!(p.starts_with("Write an accurate, engaging, and concise biography"));
        assert!(p.contains("Document [1] (Title: Dick Hanley (swimmer)) An American swimmer.\n"));
        assert!(p.ends_with("Name of the person: Dick Hanley\nAnswer:"));
        let demo_pos = p.find("Name of the person: Ada Lovelace").unwrap();
        assert!(demo_pos < p.find("Name of the person: Dick Hanley").unwrap());
    }

    #[test]
    fn output_prefix_is_stripped() {
        assert_eq!(clean_output("Answer: X [1]"), "X [1]");
        assert_eq!(clean_output("  X [1] "), "X [1]");
    }
}
