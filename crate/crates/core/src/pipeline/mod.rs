//! Paragraph evaluation: decomposition, grouping, entity linking,
//! verification and scoring.

mod grouping;
mod linking;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generation::resolve_citations_with;
use crate::judge::{
    parse_verdict, parse_yes_no, render_citation_nli_prompt, render_decompose_prompt, render_group_prompt,
    render_no_context_prompt, render_relevance_prompt, render_verify_prompt, Judge, JudgeError, JudgeRequest,
    Subject, TemplateId, Verdict,
};
use crate::knowledge::{KnowledgeError, PassageStore};
use crate::retrieval::{candidate_entities, make_query, select_evidence, RetrievalError, Retriever};
use crate::scoring::{categorize, citation_recall, count_distinct_entities, d_fact_tally, ScoreError, Tally};
use crate::text::{split_sentences, strip_citations};
use crate::types::{
    fraction_to_f64, AtomicFact, Diagnostics, EntityRef, FactGroup, FactId, FactLabel, GroupLink, ParagraphReport,
    SentenceCitationRecord,
};

pub use grouping::{parse_fact_lines, parse_grouping, AlignmentError, GroupingOutput};
pub use linking::{assign_entities, link_entity, max_weight_assignment, AssignMode, LinkingResult};

/// Number of evidence passages shown to the verifier per (fact, page).
pub const DEFAULT_EVIDENCE_PASSAGES: usize = 5;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("paragraph decomposed into no facts")]
    EmptyDecomposition,
    #[error("paragraph {paragraph_id}: {source}")]
    Paragraph {
        paragraph_id: String,
        #[source]
        source: Box<PipelineError>,
    },
}

impl PipelineError {
    /// True when the failure came from talking to a remote service.
    pub fn is_transport(&self) -> bool {
        match self {
            PipelineError::Judge(JudgeError::Transport(_) | JudgeError::RateLimited(_)) => true,
            PipelineError::Retrieval(RetrievalError::EndpointUnreachable(_)) => true,
            PipelineError::Paragraph { source, .. } => source.is_transport(),
            _ => false,
        }
    }
}

/// A retrieved document a generated paragraph may cite as `[doc_index]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitedDoc {
    pub doc_index: usize,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParagraphInput {
    pub paragraph_id: String,
    pub name: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citations_resolved: Option<Vec<CitedDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_tag: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Fs,
    Dfs,
    #[default]
    Both,
}

impl EvalMode {
    pub fn wants_fs(self) -> bool {
        matches!(self, EvalMode::Fs | EvalMode::Both)
    }

    pub fn wants_dfs(self) -> bool {
        matches!(self, EvalMode::Dfs | EvalMode::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub mode: EvalMode,
    pub assign: AssignMode,
    pub evidence_passages: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { mode: EvalMode::Both, assign: AssignMode::Independent, evidence_passages: DEFAULT_EVIDENCE_PASSAGES }
    }
}

/// Per-fact outcome of an evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactDetail {
    pub paragraph_id: String,
    pub fact_id: FactId,
    pub text: String,
    pub source_sentence_index: usize,
    pub group: Option<usize>,
    pub linked_entity: Option<GroupLink>,
    /// First candidate, in retrieval order, whose page supports the fact.
    pub attributed_entity: Option<EntityRef>,
    pub fs_label: FactLabel,
    pub dfs_label: Option<FactLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParagraphEvaluation {
    pub report: ParagraphReport,
    pub candidates: Vec<EntityRef>,
    pub facts: Vec<FactDetail>,
    pub groups: Vec<FactGroup>,
    pub linking: Vec<LinkingResult>,
    pub citation_records: Vec<SentenceCitationRecord>,
}

/// Break each sentence (citations removed) into atomic facts.
pub fn decompose(judge: &dyn Judge, text: &str) -> Result<Vec<AtomicFact>, PipelineError> {
    let mut facts = Vec::new();
    for (si, sentence) in split_sentences(text).iter().enumerate() {
        let sentence = strip_citations(sentence);
        if sentence.is_empty() {
            continue;
        }
        let req = JudgeRequest::new(
            TemplateId::Decompose,
            render_decompose_prompt(&sentence),
            Subject::Decompose { sentence: sentence.clone() },
        );
        for f in parse_fact_lines(&judge.complete(&req)?) {
            facts.push(AtomicFact::new(FactId::from_index(facts.len()), f, si));
        }
    }
    if facts.is_empty() {
        return Err(PipelineError::EmptyDecomposition);
    }
    Ok(facts)
}

/// Result of grouping; `fallback` is set when both attempts failed to align
/// and every fact was placed in one group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grouping {
    pub groups: Vec<Vec<usize>>,
    pub raw_text: Vec<String>,
    pub fallback: bool,
}

pub fn group_facts(
    judge: &dyn Judge,
    paragraph_id: &str,
    paragraph: &str,
    facts: &[AtomicFact],
) -> Result<Grouping, PipelineError> {
    let texts: Vec<String> = facts.iter().map(|f| f.text.clone()).collect();
    let mut raw_text = Vec::new();
    for attempt in 0..2 {
        let mut req = JudgeRequest::new(
            TemplateId::Group,
            render_group_prompt(paragraph, &texts),
            Subject::Group { paragraph_id: paragraph_id.to_string(), facts: texts.clone() },
        );
        req.attempt = attempt;
        let raw = judge.complete(&req)?;
        match parse_grouping(&raw, &texts) {
            Ok(out) => {
                raw_text.push(raw);
                return Ok(Grouping { groups: out.groups, raw_text, fallback: false });
            }
            Err(e) => {
                log::warn!("paragraph {paragraph_id}: grouping attempt {attempt} misaligned: {e}");
                raw_text.push(raw);
            }
        }
    }
    Ok(Grouping { groups: vec![(0..facts.len()).collect()], raw_text, fallback: true })
}

pub fn judge_relevance(judge: &dyn Judge, fact: &str, name: &str) -> Result<bool, PipelineError> {
    let req = JudgeRequest::new(
        TemplateId::Relevance,
        render_relevance_prompt(fact, name),
        Subject::Relevance { fact: fact.to_string(), name: name.to_string() },
    );
    // An unreadable answer keeps the fact in scope.
    Ok(parse_yes_no(&judge.complete(&req)?).unwrap_or(true))
}

/// Verify `fact` against the `m` best passages of `entity`'s page.
pub fn verify_fact(
    judge: &dyn Judge,
    store: &PassageStore,
    fact: &str,
    entity: &EntityRef,
    m: usize,
) -> Result<Verdict, PipelineError> {
    let page = store.entity_page(entity)?;
    let evidence = select_evidence(page, fact, m);
    let req = JudgeRequest::new(
        TemplateId::Verify,
        render_verify_prompt(fact, &evidence)?,
        Subject::Verify { fact: fact.to_string(), page_id: Some(entity.page_id.clone()) },
    );
    Ok(parse_verdict(&judge.complete(&req)?))
}

/// Verification without evidence; not used in reported scores.
pub fn verify_no_context(judge: &dyn Judge, fact: &str) -> Result<Verdict, PipelineError> {
    let req = JudgeRequest::new(
        TemplateId::Verify,
        render_no_context_prompt(fact),
        Subject::Verify { fact: fact.to_string(), page_id: None },
    );
    Ok(parse_verdict(&judge.complete(&req)?))
}

fn citation_records(
    judge: &dyn Judge,
    text: &str,
    docs: &[CitedDoc],
    diagnostics: &mut Diagnostics,
) -> Result<Vec<SentenceCitationRecord>, PipelineError> {
    let by_index: HashMap<usize, &CitedDoc> = docs.iter().map(|d| (d.doc_index, d)).collect();
    let mut out = Vec::new();
    for sk in resolve_citations_with(text, |n| by_index.contains_key(&n)) {
        diagnostics.dangling_citations += sk.dangling.len();
        let supported = if sk.citation_ids.is_empty() || !sk.dangling.is_empty() {
            false
        } else {
            let cited: Vec<(&str, &str)> =
                sk.citation_ids.iter().map(|n| (by_index[n].title.as_str(), by_index[n].text.as_str())).collect();
            let req = JudgeRequest::new(
                TemplateId::CitationNli,
                render_citation_nli_prompt(&sk.sentence, &cited),
                Subject::CitationNli { sentence: sk.sentence.clone() },
            );
            parse_verdict(&judge.complete(&req)?) == Verdict::Supported
        };
        out.push(sk.into_record(supported));
    }
    Ok(out)
}

fn ratio_f64(t: &Tally) -> Option<f64> {
    t.fraction().ok().map(fraction_to_f64)
}

/// Evaluate one paragraph end to end.
pub fn evaluate_paragraph(
    input: &ParagraphInput,
    store: &PassageStore,
    retriever: &Retriever,
    judge: &dyn Judge,
    opts: &EvalOptions,
) -> Result<ParagraphEvaluation, PipelineError> {
    evaluate_inner(input, store, retriever, judge, opts).map_err(|e| PipelineError::Paragraph {
        paragraph_id: input.paragraph_id.clone(),
        source: Box::new(e),
    })
}

fn evaluate_inner(
    input: &ParagraphInput,
    store: &PassageStore,
    retriever: &Retriever,
    judge: &dyn Judge,
    opts: &EvalOptions,
) -> Result<ParagraphEvaluation, PipelineError> {
    let mut diagnostics = Diagnostics::default();
    let retrieved = retriever.retrieve(store, &make_query(&input.name))?;
    let candidates = candidate_entities(&retrieved);
    let facts = decompose(judge, &input.text)?;

    let mut relevant = Vec::with_capacity(facts.len());
    for f in &facts {
        relevant.push(judge_relevance(judge, &f.text, &input.name)?);
    }

    // support[i][c]: relevant fact i is supported by candidate c's page.
    let mut support = vec![vec![false; candidates.len()]; facts.len()];
    for (i, f) in facts.iter().enumerate() {
        if !relevant[i] {
            continue;
        }
        for (c, cand) in candidates.iter().enumerate() {
            let v = verify_fact(judge, store, &f.text, cand, opts.evidence_passages)?;
            if v == Verdict::Indeterminate {
                diagnostics.indeterminate_verdicts += 1;
            }
            support[i][c] = v == Verdict::Supported;
        }
    }

    let attributed: Vec<Option<EntityRef>> = support
        .iter()
        .map(|row| row.iter().position(|&s| s).map(|c| candidates[c].clone()))
        .collect();
    let fs_labels: Vec<FactLabel> = facts
        .iter()
        .enumerate()
        .map(|(i, _)| if relevant[i] { FactLabel::from_support(attributed[i].is_some()) } else { FactLabel::Irrelevant })
        .collect();
    let fs_tally: Tally = fs_labels.iter().copied().collect();
    let num_entities = count_distinct_entities(&attributed);

    let mut groups_out = Vec::new();
    let mut linking = Vec::new();
    let mut dfs_labels: Option<Vec<FactLabel>> = None;
    let mut fact_group = vec![None; facts.len()];
    let mut fact_link: Vec<Option<GroupLink>> = vec![None; facts.len()];
    let mut dfs_tally = None;
    if opts.mode.wants_dfs() {
        let grouping = group_facts(judge, &input.paragraph_id, &input.text, &facts)?;
        diagnostics.grouping_fallback = grouping.fallback;

        // Only relevant facts take part in linking.
        let member_facts: Vec<Vec<AtomicFact>> = grouping
            .groups
            .iter()
            .map(|g| g.iter().filter(|&&i| relevant[i]).map(|&i| facts[i].clone()).collect())
            .collect();
        let index_of: HashMap<&FactId, usize> = facts.iter().enumerate().map(|(i, f)| (&f.id, i)).collect();
        let cand_index: HashMap<&EntityRef, usize> = candidates.iter().enumerate().map(|(i, c)| (c, i)).collect();
        linking = member_facts
            .iter()
            .enumerate()
            .map(|(gi, g)| link_entity(gi, g, &candidates, |f, e| support[index_of[&f.id]][cand_index[e]]))
            .collect();
        let matrix: Vec<Vec<u64>> = grouping
            .groups
            .iter()
            .map(|g| (0..candidates.len()).map(|c| g.iter().filter(|&&i| support[i][c]).count() as u64).collect())
            .collect();
        let assigned = assign_entities(&matrix, opts.assign);

        let mut labels = fs_labels.clone();
        for (gi, g) in grouping.groups.iter().enumerate() {
            let link = match assigned[gi] {
                Some(c) => GroupLink::Entity(candidates[c].clone()),
                None => GroupLink::NoMatch,
            };
            for &i in g {
                fact_group[i] = Some(gi);
                fact_link[i] = Some(link.clone());
                if relevant[i] {
                    labels[i] = FactLabel::from_support(assigned[gi].is_some_and(|c| support[i][c]));
                }
            }
            groups_out.push(FactGroup {
                member_fact_ids: g.iter().map(|&i| facts[i].id.clone()).collect(),
                linked_entity: Some(link),
            });
        }
        let label_map: BTreeMap<FactId, FactLabel> = facts.iter().map(|f| f.id.clone()).zip(labels.iter().copied()).collect();
        dfs_tally = Some(d_fact_tally(&groups_out, &label_map)?);
        dfs_labels = Some(labels);
    }

    let citation_records = match &input.citations_resolved {
        Some(docs) => citation_records(judge, &input.text, docs, &mut diagnostics)?,
        None => Vec::new(),
    };
    let recall = if input.citations_resolved.is_some() {
        citation_recall(&citation_records).ok().map(fraction_to_f64)
    } else {
        None
    };

    let relevant_fact_count = fs_tally.relevant() as usize;
    let unscorable = (relevant_fact_count == 0).then(|| "no relevant facts".to_string());
    let num_bios = opts.mode.wants_dfs().then_some(groups_out.len());
    let report = ParagraphReport {
        paragraph_id: input.paragraph_id.clone(),
        name: input.name.clone(),
        model_tag: input.model_tag.clone(),
        fs: if opts.mode.wants_fs() { ratio_f64(&fs_tally) } else { None },
        dfs: dfs_tally.as_ref().and_then(ratio_f64),
        num_bios,
        num_entities,
        category: num_bios.map(|b| categorize(b, num_entities)),
        citation_recall: recall,
        fact_count: facts.len(),
        relevant_fact_count,
        fs_supported: fs_tally.supported as usize,
        dfs_supported: dfs_tally.as_ref().map(|t| t.supported as usize),
        unscorable,
        diagnostics,
    };

    let details = facts
        .iter()
        .enumerate()
        .map(|(i, f)| FactDetail {
            paragraph_id: input.paragraph_id.clone(),
            fact_id: f.id.clone(),
            text: f.text.clone(),
            source_sentence_index: f.source_sentence_index,
            group: fact_group[i],
            linked_entity: fact_link[i].clone(),
            attributed_entity: attributed[i].clone(),
            fs_label: fs_labels[i],
            dfs_label: dfs_labels.as_ref().map(|l| l[i]),
        })
        .collect();

    Ok(ParagraphEvaluation { report, candidates, facts: details, groups: groups_out, linking, citation_records })
}

/// Evaluate many paragraphs on `workers` threads. Results are ordered by
/// paragraph id whatever the worker count.
pub fn evaluate_corpus(
    inputs: &[ParagraphInput],
    store: &PassageStore,
    retriever: &Retriever,
    judge: &dyn Judge,
    opts: &EvalOptions,
    workers: usize,
) -> Result<Vec<ParagraphEvaluation>, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool builds");
    let mut out = pool.install(|| {
        inputs
            .par_iter()
            .map(|p| evaluate_paragraph(p, store, retriever, judge, opts))
            .collect::<Result<Vec<_>, _>>()
    })?;
    out.sort_by(|a, b| a.report.paragraph_id.cmp(&b.report.paragraph_id));
    Ok(out)
}
