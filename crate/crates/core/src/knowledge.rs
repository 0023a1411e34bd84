//! Entity-page store built from a JSONL article dump, and mining of
//! ambiguous names from disambiguation entries.
//!
//! Pages are split greedily into passages of at most [`PASSAGE_WORDS`]
//! whitespace-delimited words. A store persists as a directory holding
//! `pages.jsonl` (the page index) and `passages.jsonl`.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize_whitespace;
use crate::types::{EntityRef, PageId};

pub const PASSAGE_WORDS: usize = 100;

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("duplicate title {title:?} on line {line}")]
    DuplicateTitle { title: String, line: usize },
    #[error("malformed record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("requested {requested} names but only {eligible} are eligible")]
    InsufficientNames { requested: usize, eligible: usize },
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub page_id: PageId,
    pub passage_index: usize,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WikiPage {
    pub entity: EntityRef,
    /// Whitespace-normalized article body.
    pub text: String,
    pub passages: Vec<Passage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbigName {
    pub name: String,
    pub candidate_entities: Vec<EntityRef>,
}

#[derive(Debug, Deserialize)]
struct DumpRecord {
    title: String,
    text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisambigEntry {
    pub name: String,
    pub members: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PageIndexRecord {
    page_id: PageId,
    title: String,
    passage_count: usize,
}

/// Greedy left-to-right split into passages of at most 100 words.
pub fn split_passages(page_id: &PageId, title: &str, text: &str) -> Vec<Passage> {
    let words: Vec<&str> = text.split_whitespace().collect();
    words
        .chunks(PASSAGE_WORDS)
        .enumerate()
        .map(|(passage_index, chunk)| Passage {
            page_id: page_id.clone(),
            passage_index,
            title: title.to_string(),
            text: chunk.join(" "),
        })
        .collect()
}

/// Read-only collection of entity pages.
#[derive(Debug, Clone, Default)]
pub struct PassageStore {
    pages: Vec<WikiPage>,
    by_id: HashMap<PageId, usize>,
    by_title: HashMap<String, usize>,
}

fn for_each_jsonl<R, T, F>(reader: R, mut f: F) -> Result<(), KnowledgeError>
where
    R: BufRead,
    T: for<'de> Deserialize<'de>,
    F: FnMut(usize, T) -> Result<(), KnowledgeError>,
{
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| KnowledgeError::MalformedRecord { line: i + 1, reason: e.to_string() })?;
        f(i + 1, record)?;
    }
    Ok(())
}

impl PassageStore {
    /// Builds a store from `{"title", "text"}` JSONL records. Page ids follow
    /// record order.
    pub fn ingest_dump<R: BufRead>(source: R) -> Result<Self, KnowledgeError> {
        let mut store = PassageStore::default();
        for_each_jsonl(source, |line, rec: DumpRecord| {
            if rec.title.trim().is_empty() {
                return Err(KnowledgeError::MalformedRecord { line, reason: "empty title".into() });
            }
            if store.by_title.contains_key(&rec.title) {
                return Err(KnowledgeError::DuplicateTitle { title: rec.title, line });
            }
            let page_id = PageId::from_index(store.pages.len());
            store.insert(page_id, rec.title, &rec.text);
            Ok(())
        })?;
        Ok(store)
    }

    pub fn ingest_dump_file(path: &Path) -> Result<Self, KnowledgeError> {
        Self::ingest_dump(BufReader::new(File::open(path)?))
    }

    fn insert(&mut self, page_id: PageId, title: String, body: &str) {
        let passages = split_passages(&page_id, &title, body);
        let idx = self.pages.len();
        self.by_id.insert(page_id.clone(), idx);
        self.by_title.insert(title.clone(), idx);
        self.pages.push(WikiPage {
            entity: EntityRef { title, page_id },
            text: normalize_whitespace(body),
            passages,
        });
    }

    pub fn pages(&self) -> &[WikiPage] {
        &self.pages
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }

    pub fn passages(&self) -> impl Iterator<Item = &Passage> {
        self.pages.iter().flat_map(|p| p.passages.iter())
    }

    pub fn passage_count(&self) -> usize {
        self.pages.iter().map(|p| p.passages.len()).sum()
    }

    /// The full page of `entity`, looked up by page id.
    pub fn entity_page(&self, entity: &EntityRef) -> Result<&WikiPage, KnowledgeError> {
        self.page(&entity.page_id)
    }

    pub fn page(&self, page_id: &PageId) -> Result<&WikiPage, KnowledgeError> {
        self.by_id
            .get(page_id)
            .map(|&i| &self.pages[i])
            .ok_or_else(|| KnowledgeError::UnknownEntity(page_id.to_string()))
    }

    /// Exact title match; `X` and `X (swimmer)` are different pages.
    pub fn page_by_title(&self, title: &str) -> Result<&WikiPage, KnowledgeError> {
        self.by_title
            .get(title)
            .map(|&i| &self.pages[i])
            .ok_or_else(|| KnowledgeError::UnknownEntity(title.to_string()))
    }

    pub fn save(&self, dir: &Path) -> Result<(), KnowledgeError> {
        fs::create_dir_all(dir)?;
        let mut pages = BufWriter::new(File::create(dir.join("pages.jsonl"))?);
        let mut passages = BufWriter::new(File::create(dir.join("passages.jsonl"))?);
        for page in &self.pages {
            let rec = PageIndexRecord {
                page_id: page.entity.page_id.clone(),
                title: page.entity.title.clone(),
                passage_count: page.passages.len(),
            };
            serde_json::to_writer(&mut pages, &rec).map_err(io::Error::from)?;
            pages.write_all(b"\n")?;
            for p in &page.passages {
                serde_json::to_writer(&mut passages, p).map_err(io::Error::from)?;
                passages.write_all(b"\n")?;
            }
        }
        pages.flush()?;
        passages.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, KnowledgeError> {
        let mut grouped: HashMap<PageId, Vec<Passage>> = HashMap::new();
        let passages = BufReader::new(File::open(dir.join("passages.jsonl"))?);
        for_each_jsonl(passages, |_, p: Passage| {
            grouped.entry(p.page_id.clone()).or_default().push(p);
            Ok(())
        })?;
        let mut store = PassageStore::default();
        let index = BufReader::new(File::open(dir.join("pages.jsonl"))?);
        for_each_jsonl(index, |line, rec: PageIndexRecord| {
            if store.by_title.contains_key(&rec.title) {
                return Err(KnowledgeError::DuplicateTitle { title: rec.title, line });
            }
            let mut passages = grouped.remove(&rec.page_id).unwrap_or_default();
            passages.sort_by_key(|p| p.passage_index);
            if passages.len() != rec.passage_count {
                return Err(KnowledgeError::MalformedRecord {
                    line,
                    reason: format!(
                        "page {} lists {} passages, found {}",
                        rec.page_id,
                        rec.passage_count,
                        passages.len()
                    ),
                });
            }
            let text = passages.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join(" ");
            let idx = store.pages.len();
            store.by_id.insert(rec.page_id.clone(), idx);
            store.by_title.insert(rec.title.clone(), idx);
            store.pages.push(WikiPage {
                entity: EntityRef { title: rec.title, page_id: rec.page_id },
                text,
                passages,
            });
            Ok(())
        })?;
        Ok(store)
    }
}

pub fn read_disambig<R: BufRead>(source: R) -> Result<Vec<DisambigEntry>, KnowledgeError> {
    let mut out = Vec::new();
    for_each_jsonl(source, |_, e: DisambigEntry| {
        out.push(e);
        Ok(())
    })?;
    Ok(out)
}

/// A sampled ambiguous-name corpus plus bookkeeping about what was dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmbigBio {
    pub names: Vec<AmbigName>,
    pub eligible: usize,
    pub dropped_members: usize,
}

impl AmbigBio {
    pub fn mean_entities_per_name(&self) -> f64 {
        if self.names.is_empty() {
            return 0.0;
        }
        let total: usize = self.names.iter().map(|n| n.candidate_entities.len()).sum();
        total as f64 / self.names.len() as f64
    }
}

/// Resolve disambiguation members against `store` and draw a seeded uniform
/// sample of the names with at least two resolvable members.
pub fn build_ambigbio(
    store: &PassageStore,
    disambig_source: &[DisambigEntry],
    sample_size: usize,
    seed: u64,
) -> Result<AmbigBio, KnowledgeError> {
    let mut dropped_members = 0;
    let mut eligible = Vec::new();
    for entry in disambig_source {
        if entry.name.trim().is_empty() {
            continue;
        }
        let mut seen = HashSet::new();
        let mut candidates = Vec::new();
        for title in &entry.members {
            match store.page_by_title(title) {
                Ok(page) => {
                    if seen.insert(page.entity.page_id.clone()) {
                        candidates.push(page.entity.clone());
                    }
                }
                Err(_) => dropped_members += 1,
            }
        }
        if candidates.len() >= 2 {
            eligible.push(AmbigName { name: entry.name.clone(), candidate_entities: candidates });
        }
    }
    if dropped_members > 0 {
        warn!("{dropped_members} disambiguation members have no page in the store");
    }
    if sample_size > eligible.len() {
        return Err(KnowledgeError::InsufficientNames { requested: sample_size, eligible: eligible.len() });
    }
    let n_eligible = eligible.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    eligible.shuffle(&mut rng);
    eligible.truncate(sample_size);
    Ok(AmbigBio { names: eligible, eligible: n_eligible, dropped_members })
}
