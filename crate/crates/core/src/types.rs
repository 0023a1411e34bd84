//! Domain types shared by every stage of the evaluation.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

/// Exact score value. Scores are ratios of fact counts, so they stay exact
/// until they are rendered.
pub type Fraction = Ratio<u64>;

/// Render a fraction as a percentage with one decimal, rounding half up.
pub fn format_percent(value: Fraction) -> String {
    let tenths = (value.numer() * 1000 + value.denom() / 2) / value.denom();
    format!("{}.{}", tenths / 10, tenths % 10)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FactId(pub String);

impl FactId {
    /// Identifier for the `index`-th fact of a paragraph. Zero padded so that
    /// lexical order equals paragraph order.
    pub fn from_index(index: usize) -> Self {
        FactId(format!("f{index:04}"))
    }
}

impl fmt::Display for FactId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for FactId {
    fn from(s: &str) -> Self {
        FactId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PageId(pub String);

impl PageId {
    pub fn from_index(index: usize) -> Self {
        PageId(format!("{index:08}"))
    }
}

impl fmt::Display for PageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PageId {
    fn from(s: &str) -> Self {
        PageId(s.to_string())
    }
}

/// One decomposed claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicFact {
    pub id: FactId,
    pub text: String,
    pub source_sentence_index: usize,
}

impl AtomicFact {
    pub fn new(id: impl Into<FactId>, text: impl Into<String>, source_sentence_index: usize) -> Self {
        AtomicFact { id: id.into(), text: text.into(), source_sentence_index }
    }
}

impl From<String> for FactId {
    fn from(s: String) -> Self {
        FactId(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FactLabel {
    Supported,
    NotSupported,
    Irrelevant,
}

impl FactLabel {
    pub fn is_relevant(self) -> bool {
        self != FactLabel::Irrelevant
    }

    pub fn from_support(supported: bool) -> Self {
        if supported {
            FactLabel::Supported
        } else {
            FactLabel::NotSupported
        }
    }
}

/// A knowledge-source entity. The title keeps any disambiguating
/// parenthetical, e.g. `Dick Hanley (swimmer)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityRef {
    pub title: String,
    pub page_id: PageId,
}

impl EntityRef {
    pub fn new(title: impl Into<String>, page_id: impl Into<PageId>) -> Self {
        EntityRef { title: title.into(), page_id: page_id.into() }
    }
}

impl From<String> for PageId {
    fn from(s: String) -> Self {
        PageId(s)
    }
}

/// The entity a fact group was linked to. `NoMatch` marks an individual that
/// corresponds to no page; its facts cannot be supported.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupLink {
    Entity(EntityRef),
    NoMatch,
}

impl GroupLink {
    pub fn entity(&self) -> Option<&EntityRef> {
        match self {
            GroupLink::Entity(e) => Some(e),
            GroupLink::NoMatch => None,
        }
    }
}

/// Facts a reader would attribute to one individual, in paragraph order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactGroup {
    pub member_fact_ids: Vec<FactId>,
    pub linked_entity: Option<GroupLink>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    OneBioOneEntity,
    OneBioManyEntities,
    ManyBiosManyEntities,
    Other,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Category::OneBioOneEntity => "OneBioOneEntity",
            Category::OneBioManyEntities => "OneBioManyEntities",
            Category::ManyBiosManyEntities => "ManyBiosManyEntities",
            Category::Other => "Other",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceCitationRecord {
    pub sentence_index: usize,
    pub citation_ids: Vec<usize>,
    pub supported_by_citations: bool,
}

impl SentenceCitationRecord {
    /// Builds a record, forcing `supported_by_citations` to false when the
    /// sentence carries no citation.
    pub fn new(sentence_index: usize, citation_ids: Vec<usize>, supported: bool) -> Self {
        let supported_by_citations = supported && !citation_ids.is_empty();
        SentenceCitationRecord { sentence_index, citation_ids, supported_by_citations }
    }
}

/// Counters that do not enter the scores but explain them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(default)]
    pub grouping_fallback: bool,
    #[serde(default)]
    pub indeterminate_verdicts: usize,
    #[serde(default)]
    pub dangling_citations: usize,
}

/// Per-paragraph evaluation summary.
///
/// `fs` and `dfs` are derived from the exact counts stored alongside them;
/// use [`ParagraphReport::fs_exact`] and [`ParagraphReport::dfs_exact`] when
/// comparing scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParagraphReport {
    pub paragraph_id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_tag: Option<String>,
    pub fs: Option<f64>,
    pub dfs: Option<f64>,
    /// Absent when grouping was not run.
    pub num_bios: Option<usize>,
    pub num_entities: usize,
    pub category: Option<Category>,
    pub citation_recall: Option<f64>,
    pub fact_count: usize,
    pub relevant_fact_count: usize,
    pub fs_supported: usize,
    pub dfs_supported: Option<usize>,
    /// Set when the paragraph cannot be scored, e.g. every fact is irrelevant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unscorable: Option<String>,
    #[serde(default)]
    pub diagnostics: Diagnostics,
}

impl ParagraphReport {
    pub fn is_scorable(&self) -> bool {
        self.unscorable.is_none() && self.relevant_fact_count > 0
    }

    pub fn fs_exact(&self) -> Option<Fraction> {
        (self.relevant_fact_count > 0 && self.fs.is_some())
            .then(|| Ratio::new(self.fs_supported as u64, self.relevant_fact_count as u64))
    }

    pub fn dfs_exact(&self) -> Option<Fraction> {
        match (self.dfs_supported, self.relevant_fact_count) {
            (Some(s), n) if n > 0 => Some(Ratio::new(s as u64, n as u64)),
            _ => None,
        }
    }
}

pub fn fraction_to_f64(f: Fraction) -> f64 {
    *f.numer() as f64 / *f.denom() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_rounds_half_up() {
        assert_eq!(format_percent(Ratio::new(7, 10)), "70.0");
        assert_eq!(format_percent(Ratio::new(11, 12)), "91.7");
        assert_eq!(format_percent(Ratio::new(1, 1)), "100.0");
        assert_eq!(format_percent(Ratio::new(1, 2000)), "0.1");
        assert_eq!(format_percent(Ratio::new(0, 3)), "0.0");
    }

    #[test]
    fn citation_record_without_citations_is_unsupported() {
        let r = SentenceCitationRecord::new(0, vec![], true);
        assert!(!r.supported_by_citations);
    }

    #[test]
    fn fact_ids_sort_in_paragraph_order() {
        let mut ids: Vec<_> = [12, 3, 100, 9].iter().map(|&i| FactId::from_index(i)).collect();
        ids.sort();
        assert_eq!(ids, vec![FactId::from_index(3), FactId::from_index(9), FactId::from_index(12), FactId::from_index(100)]);
    }
}
