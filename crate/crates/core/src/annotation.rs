//! Annotation task scheduling, label storage and exports.
//!
//! Labels go to an append-only JSONL journal. Readers work on an immutable
//! snapshot that is replaced after each accepted submission.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{agreement_rate, HumanScore};
use crate::knowledge::{KnowledgeError, PassageStore};
use crate::pipeline::ParagraphEvaluation;
use crate::scoring::{categorize, check_partition, count_distinct_entities, d_fact_tally, ScoreError, Tally};
use crate::types::{
    fraction_to_f64, AtomicFact, Category, EntityRef, FactGroup, FactId, FactLabel, Fraction, GroupLink,
};

/// Default share of tasks labeled by two annotators, in permille.
pub const DEFAULT_OVERLAP_PERMILLE: u32 = 100;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("unknown annotator {0}")]
    UnknownAnnotator(String),
    #[error("unknown paragraph {0}")]
    UnknownTask(String),
    #[error("partition violation: {0}")]
    PartitionViolation(String),
    #[error("paragraph {paragraph_id} is not assigned to {annotator_id}")]
    NotAssigned { annotator_id: String, paragraph_id: String },
    #[error("no step-2 label from {annotator_id} for {paragraph_id}")]
    MissingStepTwo { annotator_id: String, paragraph_id: String },
    #[error("incomplete labels: {0}")]
    IncompleteLabels(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("journal line {line}: {reason}")]
    Journal { line: usize, reason: String },
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityPage {
    pub entity: EntityRef,
    pub page_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub paragraph_id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_tag: Option<String>,
    pub paragraph_text: String,
    pub facts: Vec<AtomicFact>,
    pub entity_pages: Vec<EntityPage>,
    #[serde(default)]
    pub assigned_annotators: Vec<String>,
}

impl AnnotationTask {
    pub fn validate(&self) -> Result<(), AnnotationError> {
        if self.entity_pages.is_empty() {
            return Err(AnnotationError::InvalidConfig(format!("task {} has no entity pages", self.paragraph_id)));
        }
        if self.facts.is_empty() {
            return Err(AnnotationError::InvalidConfig(format!("task {} has no facts", self.paragraph_id)));
        }
        Ok(())
    }
}

/// Build an unassigned task from a pipeline evaluation, attaching the full
/// text of every candidate page.
pub fn task_from_evaluation(
    eval: &ParagraphEvaluation,
    paragraph_text: &str,
    store: &PassageStore,
) -> Result<AnnotationTask, AnnotationError> {
    let entity_pages = eval
        .candidates
        .iter()
        .map(|e| Ok(EntityPage { entity: e.clone(), page_text: store.entity_page(e)?.text.clone() }))
        .collect::<Result<Vec<_>, AnnotationError>>()?;
    let facts = eval
        .facts
        .iter()
        .map(|f| AtomicFact::new(f.fact_id.clone(), f.text.clone(), f.source_sentence_index))
        .collect();
    Ok(AnnotationTask {
        paragraph_id: eval.report.paragraph_id.clone(),
        name: eval.report.name.clone(),
        model_tag: eval.report.model_tag.clone(),
        paragraph_text: paragraph_text.to_string(),
        facts,
        entity_pages,
        assigned_annotators: Vec::new(),
    })
}

/// Number of doubly-assigned tasks: ⌈permille·n/1000⌉.
pub fn double_count(n_tasks: usize, overlap_permille: u32) -> usize {
    (n_tasks * overlap_permille as usize).div_ceil(1000)
}

/// Assign annotators to tasks. A seeded choice of `double_count` tasks gets
/// two annotators; annotators are dealt round-robin in task order.
pub fn schedule(
    tasks: &mut [AnnotationTask],
    annotators: &[String],
    overlap_permille: u32,
    seed: u64,
) -> Result<(), AnnotationError> {
    if overlap_permille > 1000 {
        return Err(AnnotationError::InvalidConfig(format!("overlap {overlap_permille}‰ exceeds 1000")));
    }
    let unique: BTreeSet<&String> = annotators.iter().collect();
    if annotators.is_empty() || unique.len() != annotators.len() {
        return Err(AnnotationError::InvalidConfig("annotators must be non-empty and distinct".into()));
    }
    let n_double = double_count(tasks.len(), overlap_permille);
    if n_double > 0 && annotators.len() < 2 {
        return Err(AnnotationError::InvalidConfig("overlap needs at least two annotators".into()));
    }
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let doubled: BTreeSet<usize> = order.into_iter().take(n_double).collect();
    let mut next = 0usize;
    for (i, t) in tasks.iter_mut().enumerate() {
        let k = if doubled.contains(&i) { 2 } else { 1 };
        t.assigned_annotators = (0..k).map(|j| annotators[(next + j) % annotators.len()].clone()).collect();
        next += k;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTwoLabel {
    pub annotator_id: String,
    pub paragraph_id: String,
    pub num_bios: usize,
    pub bio_spans: Vec<Vec<FactId>>,
    #[serde(deserialize_with = "index_keyed")]
    pub bio_entity_links: BTreeMap<usize, GroupLink>,
}

/// JSON object keys are strings; accept them for integer-keyed maps even
/// when the value was buffered by a tagged enum.
fn index_keyed<'de, D: serde::Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, GroupLink>, D::Error> {
    let raw = BTreeMap::<String, GroupLink>::deserialize(d)?;
    raw.into_iter()
        .map(|(k, v)| k.parse().map(|k| (k, v)).map_err(|_| serde::de::Error::custom(format!("bad bio index {k:?}"))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepThreeLabel {
    pub annotator_id: String,
    pub paragraph_id: String,
    pub fact_labels: BTreeMap<FactId, FactLabel>,
    pub fs_fact_labels: BTreeMap<FactId, FactLabel>,
    pub fact_entity_attribution: BTreeMap<FactId, GroupLink>,
}

/// Scores implied by one annotator's step-2 and step-3 labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpliedScores {
    pub fs: Option<f64>,
    pub dfs: Option<f64>,
    pub fs_supported: u64,
    pub fs_relevant: u64,
    pub dfs_supported: u64,
    pub dfs_relevant: u64,
    pub num_bios: usize,
    pub num_entities: usize,
    pub category: Category,
    pub unscorable: bool,
}

impl ImpliedScores {
    pub fn fs_exact(&self) -> Option<Fraction> {
        (self.fs_relevant > 0).then(|| Fraction::new(self.fs_supported, self.fs_relevant))
    }

    pub fn dfs_exact(&self) -> Option<Fraction> {
        (self.dfs_relevant > 0).then(|| Fraction::new(self.dfs_supported, self.dfs_relevant))
    }
}

fn step_two_groups(label: &StepTwoLabel) -> Vec<FactGroup> {
    label
        .bio_spans
        .iter()
        .enumerate()
        .map(|(i, span)| FactGroup {
            member_fact_ids: span.clone(),
            linked_entity: label.bio_entity_links.get(&i).cloned(),
        })
        .collect()
}

/// Recompute scores with the core scoring functions.
pub fn implied_scores(step2: &StepTwoLabel, step3: &StepThreeLabel) -> Result<ImpliedScores, ScoreError> {
    let groups = step_two_groups(step2);
    let dfs_tally = d_fact_tally(&groups, &step3.fact_labels)?;
    let fs_tally: Tally = step3.fs_fact_labels.values().copied().collect();
    let attributions: Vec<Option<EntityRef>> =
        step3.fact_entity_attribution.values().map(|l| l.entity().cloned()).collect();
    let num_entities = count_distinct_entities(&attributions);
    let fs = fs_tally.fraction().ok();
    let dfs = dfs_tally.fraction().ok();
    Ok(ImpliedScores {
        fs: fs.map(fraction_to_f64),
        dfs: dfs.map(fraction_to_f64),
        fs_supported: fs_tally.supported,
        fs_relevant: fs_tally.relevant(),
        dfs_supported: dfs_tally.supported,
        dfs_relevant: dfs_tally.relevant(),
        num_bios: step2.num_bios,
        num_entities,
        category: categorize(step2.num_bios, num_entities),
        unscorable: dfs.is_none(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
enum JournalRecord {
    Step2 { version: u32, label: StepTwoLabel },
    Step3 { version: u32, label: StepThreeLabel, implied: ImpliedScores },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepThreeAck {
    pub version: u32,
    pub implied: ImpliedScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextTask {
    Task { task: Box<AnnotationTask> },
    Done,
}

type Key = (String, String);

#[derive(Debug, Clone, Default)]
struct Snapshot {
    step2: BTreeMap<Key, (u32, StepTwoLabel)>,
    step3: BTreeMap<Key, (u32, StepThreeLabel, ImpliedScores)>,
}

impl Snapshot {
    fn apply(&mut self, rec: JournalRecord) {
        match rec {
            JournalRecord::Step2 { version, label } => {
                // A revised grouping invalidates labels made against the old one.
                let key = (label.paragraph_id.clone(), label.annotator_id.clone());
                self.step3.remove(&key);
                self.step2.insert(key, (version, label));
            }
            JournalRecord::Step3 { version, label, implied } => {
                self.step3.insert((label.paragraph_id.clone(), label.annotator_id.clone()), (version, label, implied));
            }
        }
    }
}

/// Shared annotation state; safe to use from many request handlers.
pub struct AnnotationService {
    tasks: Vec<AnnotationTask>,
    index: HashMap<String, usize>,
    annotators: BTreeSet<String>,
    journal: Mutex<Option<File>>,
    journal_path: Option<PathBuf>,
    snapshot: RwLock<Arc<Snapshot>>,
}

impl AnnotationService {
    /// In-memory service with no journal.
    pub fn in_memory(tasks: Vec<AnnotationTask>) -> Result<Self, AnnotationError> {
        Self::build(tasks, None, Snapshot::default())
    }

    /// Service backed by `journal`, replaying any records already there.
    pub fn open(tasks: Vec<AnnotationTask>, journal: &Path) -> Result<Self, AnnotationError> {
        let mut snap = Snapshot::default();
        if journal.exists() {
            let reader = BufReader::new(File::open(journal)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: JournalRecord = serde_json::from_str(&line)
                    .map_err(|e| AnnotationError::Journal { line: i + 1, reason: e.to_string() })?;
                snap.apply(rec);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(journal)?;
        let mut svc = Self::build(tasks, Some(file), snap)?;
        svc.journal_path = Some(journal.to_path_buf());
        Ok(svc)
    }

    fn build(tasks: Vec<AnnotationTask>, file: Option<File>, snap: Snapshot) -> Result<Self, AnnotationError> {
        let mut index = HashMap::new();
        for (i, t) in tasks.iter().enumerate() {
            t.validate()?;
            if index.insert(t.paragraph_id.clone(), i).is_some() {
                return Err(AnnotationError::InvalidConfig(format!("duplicate task {}", t.paragraph_id)));
            }
        }
        let annotators = tasks.iter().flat_map(|t| t.assigned_annotators.iter().cloned()).collect();
        Ok(AnnotationService {
            tasks,
            index,
            annotators,
            journal: Mutex::new(file),
            journal_path: None,
            snapshot: RwLock::new(Arc::new(snap)),
        })
    }

    pub fn journal_path(&self) -> Option<&Path> {
        self.journal_path.as_deref()
    }

    pub fn tasks(&self) -> &[AnnotationTask] {
        &self.tasks
    }

    fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().unwrap().clone()
    }

    fn task(&self, paragraph_id: &str) -> Result<&AnnotationTask, AnnotationError> {
        self.index
            .get(paragraph_id)
            .map(|&i| &self.tasks[i])
            .ok_or_else(|| AnnotationError::UnknownTask(paragraph_id.to_string()))
    }

    fn assigned_task(&self, annotator_id: &str, paragraph_id: &str) -> Result<&AnnotationTask, AnnotationError> {
        let task = self.task(paragraph_id)?;
        if !task.assigned_annotators.iter().any(|a| a == annotator_id) {
            return Err(AnnotationError::NotAssigned {
                annotator_id: annotator_id.to_string(),
                paragraph_id: paragraph_id.to_string(),
            });
        }
        Ok(task)
    }

    /// First assigned task, in task order, without a step-3 label from
    /// this annotator.
    pub fn next_task(&self, annotator_id: &str) -> Result<NextTask, AnnotationError> {
        if !self.annotators.contains(annotator_id) {
            return Err(AnnotationError::UnknownAnnotator(annotator_id.to_string()));
        }
        let snap = self.snapshot();
        let next = self.tasks.iter().find(|t| {
            t.assigned_annotators.iter().any(|a| a == annotator_id)
                && !snap.step3.contains_key(&(t.paragraph_id.clone(), annotator_id.to_string()))
        });
        Ok(match next {
            Some(t) => NextTask::Task { task: Box::new(t.clone()) },
            None => NextTask::Done,
        })
    }

    /// Build a record from the current snapshot, append it and publish a new
    /// snapshot, all under the writer lock.
    fn commit<T>(
        &self,
        build: impl FnOnce(&Snapshot) -> Result<(JournalRecord, T), AnnotationError>,
    ) -> Result<T, AnnotationError> {
        let mut journal = self.journal.lock().unwrap();
        let (rec, out) = build(&self.snapshot())?;
        if let Some(f) = journal.as_mut() {
            let mut line = serde_json::to_string(&rec).expect("journal record serializes");
            line.push('\n');
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        let mut next = (*self.snapshot()).clone();
        next.apply(rec);
        *self.snapshot.write().unwrap() = Arc::new(next);
        Ok(out)
    }

    pub fn submit_step2(&self, label: StepTwoLabel) -> Result<Ack, AnnotationError> {
        let task = self.assigned_task(&label.annotator_id, &label.paragraph_id)?;
        if label.num_bios == 0 || label.num_bios != label.bio_spans.len() {
            return Err(AnnotationError::PartitionViolation(format!(
                "num_bios {} with {} spans",
                label.num_bios,
                label.bio_spans.len()
            )));
        }
        if label.bio_spans.iter().any(Vec::is_empty) {
            return Err(AnnotationError::PartitionViolation("empty biography span".into()));
        }
        let groups = step_two_groups(&label);
        check_partition(&groups, task.facts.iter().map(|f| &f.id))
            .map_err(|e| AnnotationError::PartitionViolation(e.to_string()))?;
        let expected: BTreeSet<usize> = (0..label.num_bios).collect();
        let linked: BTreeSet<usize> = label.bio_entity_links.keys().copied().collect();
        if expected != linked {
            return Err(AnnotationError::PartitionViolation("every biography needs exactly one link".into()));
        }
        for link in label.bio_entity_links.values() {
            if let Some(e) = link.entity() {
                if !task.entity_pages.iter().any(|p| p.entity.page_id == e.page_id) {
                    return Err(AnnotationError::PartitionViolation(format!("link to unknown page {}", e.page_id)));
                }
            }
        }
        let key = (label.paragraph_id.clone(), label.annotator_id.clone());
        self.commit(|snap| {
            let version = snap.step2.get(&key).map_or(1, |(v, _)| v + 1);
            Ok((JournalRecord::Step2 { version, label }, Ack { version }))
        })
    }

    pub fn submit_step3(&self, label: StepThreeLabel) -> Result<StepThreeAck, AnnotationError> {
        let task = self.assigned_task(&label.annotator_id, &label.paragraph_id)?;
        let ids: BTreeSet<&FactId> = task.facts.iter().map(|f| &f.id).collect();
        check_total("fact_labels", &ids, label.fact_labels.keys())?;
        check_total("fs_fact_labels", &ids, label.fs_fact_labels.keys())?;
        check_total("fact_entity_attribution", &ids, label.fact_entity_attribution.keys())?;
        let key = (label.paragraph_id.clone(), label.annotator_id.clone());
        self.commit(|snap| {
            let Some((_, step2)) = snap.step2.get(&key) else {
                return Err(AnnotationError::MissingStepTwo {
                    annotator_id: label.annotator_id.clone(),
                    paragraph_id: label.paragraph_id.clone(),
                });
            };
            let implied =
                implied_scores(step2, &label).map_err(|e| AnnotationError::PartitionViolation(e.to_string()))?;
            let version = snap.step3.get(&key).map_or(1, |(v, _, _)| v + 1);
            let ack = StepThreeAck { version, implied: implied.clone() };
            Ok((JournalRecord::Step3 { version, label, implied }, ack))
        })
    }

    pub fn progress(&self) -> Progress {
        let snap = self.snapshot();
        let mut per_annotator: BTreeMap<String, AnnotatorProgress> = BTreeMap::new();
        let mut complete_tasks = 0;
        for t in &self.tasks {
            let mut all = true;
            for a in &t.assigned_annotators {
                let done = snap.step3.contains_key(&(t.paragraph_id.clone(), a.clone()));
                let e = per_annotator.entry(a.clone()).or_default();
                e.assigned += 1;
                e.done += usize::from(done);
                all &= done;
            }
            complete_tasks += usize::from(all);
        }
        Progress {
            tasks: self.tasks.len(),
            doubly_assigned: self.tasks.iter().filter(|t| t.assigned_annotators.len() > 1).count(),
            step2_labels: snap.step2.len(),
            step3_labels: snap.step3.len(),
            complete_tasks,
            per_annotator,
        }
    }

    /// Latest-version labels, per-paragraph implied scores, then the
    /// agreement pairs, one JSON object per line.
    pub fn export(&self) -> Vec<ExportRecord> {
        let snap = self.snapshot();
        let mut out = Vec::new();
        for ((pid, aid), (v3, step3, implied)) in &snap.step3 {
            let Some((v2, step2)) = snap.step2.get(&(pid.clone(), aid.clone())) else { continue };
            out.push(ExportRecord::Label(Box::new(LabelExport {
                paragraph_id: pid.clone(),
                annotator_id: aid.clone(),
                step2_version: *v2,
                step3_version: *v3,
                step2: step2.clone(),
                step3: step3.clone(),
                implied: implied.clone(),
            })));
        }
        for t in &self.tasks {
            // The first assigned annotator with a finished label speaks for the paragraph.
            let primary = t
                .assigned_annotators
                .iter()
                .find_map(|a| snap.step3.get(&(t.paragraph_id.clone(), a.clone())));
            if let Some((_, _, implied)) = primary {
                out.push(ExportRecord::Paragraph(HumanScore {
                    paragraph_id: t.paragraph_id.clone(),
                    model_tag: t.model_tag.clone(),
                    fs: implied.fs,
                    dfs: implied.dfs,
                    num_bios: implied.num_bios,
                    num_entities: implied.num_entities,
                }));
            }
        }
        for t in self.tasks.iter().filter(|t| t.assigned_annotators.len() > 1) {
            let (a, b) = (&t.assigned_annotators[0], &t.assigned_annotators[1]);
            let la = snap.step3.get(&(t.paragraph_id.clone(), a.clone()));
            let lb = snap.step3.get(&(t.paragraph_id.clone(), b.clone()));
            let agreement = match (la, lb) {
                (Some((_, x, _)), Some((_, y, _))) => {
                    let xa: Vec<FactLabel> = x.fact_labels.values().copied().collect();
                    let ya: Vec<FactLabel> = y.fact_labels.values().copied().collect();
                    agreement_rate(&xa, &ya).ok().map(fraction_to_f64)
                }
                _ => None,
            };
            out.push(ExportRecord::AgreementPair(AgreementPair {
                paragraph_id: t.paragraph_id.clone(),
                annotators: [a.clone(), b.clone()],
                fact_label_agreement: agreement,
            }));
        }
        out
    }

    pub fn export_jsonl(&self) -> String {
        self.export()
            .iter()
            .map(|r| serde_json::to_string(r).expect("export record serializes") + "\n")
            .collect()
    }
}

fn check_total<'a>(
    what: &str,
    ids: &BTreeSet<&FactId>,
    keys: impl Iterator<Item = &'a FactId>,
) -> Result<(), AnnotationError> {
    let got: BTreeSet<&FactId> = keys.collect();
    if let Some(missing) = ids.difference(&got).next() {
        return Err(AnnotationError::IncompleteLabels(format!("{what} lacks {missing}")));
    }
    if let Some(extra) = got.difference(ids).next() {
        return Err(AnnotationError::IncompleteLabels(format!("{what} has unknown fact {extra}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorProgress {
    pub assigned: usize,
    pub done: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub tasks: usize,
    pub doubly_assigned: usize,
    pub step2_labels: usize,
    pub step3_labels: usize,
    pub complete_tasks: usize,
    pub per_annotator: BTreeMap<String, AnnotatorProgress>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelExport {
    pub paragraph_id: String,
    pub annotator_id: String,
    pub step2_version: u32,
    pub step3_version: u32,
    pub step2: StepTwoLabel,
    pub step3: StepThreeLabel,
    pub implied: ImpliedScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementPair {
    pub paragraph_id: String,
    pub annotators: [String; 2],
    pub fact_label_agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExportRecord {
    Label(Box<LabelExport>),
    Paragraph(HumanScore),
    AgreementPair(AgreementPair),
}

/// Per-paragraph human scores from an export file.
pub fn read_human_scores<R: BufRead>(reader: R) -> Result<Vec<HumanScore>, AnnotationError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ExportRecord = serde_json::from_str(&line)
            .map_err(|e| AnnotationError::Journal { line: i + 1, reason: e.to_string() })?;
        if let ExportRecord::Paragraph(h) = rec {
            out.push(h);
        }
    }
    Ok(out)
}

/// Fact-label pairs of every doubly-annotated paragraph, for agreement.
pub fn fact_label_pairs(records: &[ExportRecord]) -> Vec<(FactLabel, FactLabel)> {
    let labels: HashMap<(&str, &str), &StepThreeLabel> = records
        .iter()
        .filter_map(|r| match r {
            ExportRecord::Label(l) => Some(((l.paragraph_id.as_str(), l.annotator_id.as_str()), &l.step3)),
            _ => None,
        })
        .collect();
    let mut out = Vec::new();
    for r in records {
        if let ExportRecord::AgreementPair(p) = r {
            let a = labels.get(&(p.paragraph_id.as_str(), p.annotators[0].as_str()));
            let b = labels.get(&(p.paragraph_id.as_str(), p.annotators[1].as_str()));
            if let (Some(a), Some(b)) = (a, b) {
                for (id, la) in &a.fact_labels {
                    if let Some(lb) = b.fact_labels.get(id) {
                        out.push((*la, *lb));
                    }
                }
            }
        }
    }
    out
}
