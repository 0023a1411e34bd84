//! Scoring math: FActScore, D-FActScore, citation recall and paragraph
//! categorization. Everything here is pure.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use num_rational::Ratio;
use thiserror::Error;

use crate::types::{
    Category, EntityRef, FactGroup, FactId, FactLabel, Fraction, GroupLink, PageId,
    SentenceCitationRecord,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("every fact is irrelevant; the paragraph cannot be scored")]
    EmptyRelevantSet,
    #[error("fact groups do not partition the paragraph: {0}")]
    PartitionViolation(String),
    #[error("group {0} has relevant facts but no linked entity")]
    MissingLink(usize),
    #[error("paragraph has no sentences")]
    EmptyParagraph,
}

/// Label counts for one paragraph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub supported: u64,
    pub not_supported: u64,
    pub irrelevant: u64,
}

impl Tally {
    pub fn add(&mut self, label: FactLabel) {
        match label {
            FactLabel::Supported => self.supported += 1,
            FactLabel::NotSupported => self.not_supported += 1,
            FactLabel::Irrelevant => self.irrelevant += 1,
        }
    }

    pub fn relevant(&self) -> u64 {
        self.supported + self.not_supported
    }

    /// Supported over relevant. Irrelevant labels are excluded from both sides.
    pub fn fraction(&self) -> Result<Fraction, ScoreError> {
        match self.relevant() {
            0 => Err(ScoreError::EmptyRelevantSet),
            n => Ok(Ratio::new(self.supported, n)),
        }
    }
}

impl FromIterator<FactLabel> for Tally {
    fn from_iter<I: IntoIterator<Item = FactLabel>>(iter: I) -> Self {
        let mut t = Tally::default();
        for l in iter {
            t.add(l);
        }
        t
    }
}

pub fn fact_score(labels: &[FactLabel]) -> Result<Fraction, ScoreError> {
    labels.iter().copied().collect::<Tally>().fraction()
}

/// Check that `groups` is a partition of the facts keyed in `labels`.
pub fn check_partition<'a, I>(groups: &[FactGroup], facts: I) -> Result<(), ScoreError>
where
    I: IntoIterator<Item = &'a FactId>,
{
    let universe: BTreeSet<&FactId> = facts.into_iter().collect();
    let mut seen: HashSet<&FactId> = HashSet::new();
    for (gi, g) in groups.iter().enumerate() {
        for id in &g.member_fact_ids {
            if !universe.contains(id) {
                return Err(ScoreError::PartitionViolation(format!(
                    "group {gi} contains unknown fact {id}"
                )));
            }
            if !seen.insert(id) {
                return Err(ScoreError::PartitionViolation(format!(
                    "fact {id} appears in more than one group"
                )));
            }
        }
    }
    if let Some(missing) = universe.iter().find(|id| !seen.contains(*id)) {
        return Err(ScoreError::PartitionViolation(format!("fact {missing} is in no group")));
    }
    Ok(())
}

/// Label counts for D-FActScore. `labels` holds each fact's verdict against
/// its own group's linked entity; facts of a `NoMatch` group count as
/// unsupported unless irrelevant.
pub fn d_fact_tally(
    groups: &[FactGroup],
    labels: &BTreeMap<FactId, FactLabel>,
) -> Result<Tally, ScoreError> {
    check_partition(groups, labels.keys())?;
    let mut tally = Tally::default();
    for (gi, g) in groups.iter().enumerate() {
        let group_labels = g.member_fact_ids.iter().map(|id| labels[id]);
        let has_relevant = g.member_fact_ids.iter().any(|id| labels[id].is_relevant());
        match &g.linked_entity {
            None if has_relevant => return Err(ScoreError::MissingLink(gi)),
            Some(GroupLink::NoMatch) => {
                for l in group_labels {
                    tally.add(if l.is_relevant() { FactLabel::NotSupported } else { l });
                }
            }
            _ => group_labels.for_each(|l| tally.add(l)),
        }
    }
    Ok(tally)
}

pub fn d_fact_score(
    groups: &[FactGroup],
    labels: &BTreeMap<FactId, FactLabel>,
) -> Result<Fraction, ScoreError> {
    d_fact_tally(groups, labels)?.fraction()
}

pub fn categorize(num_bios: usize, num_entities: usize) -> Category {
    match (num_bios, num_entities) {
        (1, 1) => Category::OneBioOneEntity,
        (1, m) if m > 1 => Category::OneBioManyEntities,
        (n, m) if n > 1 && m > 1 => Category::ManyBiosManyEntities,
        _ => Category::Other,
    }
}

pub fn count_distinct_entities(attributions: &[Option<EntityRef>]) -> usize {
    attributions
        .iter()
        .flatten()
        .map(|e| &e.page_id)
        .collect::<HashSet<&PageId>>()
        .len()
}

pub fn citation_recall(records: &[SentenceCitationRecord]) -> Result<Fraction, ScoreError> {
    if records.is_empty() {
        return Err(ScoreError::EmptyParagraph);
    }
    let ok = records
        .iter()
        .filter(|r| !r.citation_ids.is_empty() && r.supported_by_citations)
        .count();
    Ok(Ratio::new(ok as u64, records.len() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::FactLabel::*;

    fn ids(range: std::ops::Range<usize>) -> Vec<FactId> {
        range.map(FactId::from_index).collect()
    }

    fn entity(t: &str, id: &str) -> EntityRef {
        EntityRef::new(t, id)
    }

    #[test]
    fn fact_score_all_supported() {
        assert_eq!(fact_score(&[Supported; 5]).unwrap(), Ratio::new(1, 1));
    }

    #[test]
    fn fact_score_excludes_irrelevant() {
        let mut labels = vec![Supported; 11];
        labels.push(NotSupported);
        labels.push(Irrelevant);
        let fs = fact_score(&labels).unwrap();
        assert_eq!(fs, Ratio::new(11, 12));
        assert!((crate::types::fraction_to_f64(fs) - 0.9167).abs() < 1e-4);
    }

    #[test]
    fn fact_score_all_irrelevant_is_unscorable() {
        assert_eq!(fact_score(&[Irrelevant, Irrelevant]), Err(ScoreError::EmptyRelevantSet));
        assert_eq!(fact_score(&[]), Err(ScoreError::EmptyRelevantSet));
    }

    #[test]
    fn d_fact_score_single_entity_matches_fs() {
        let a = entity("A", "1");
        let labels: BTreeMap<_, _> = ids(0..8).into_iter().map(|id| (id, Supported)).collect();
        let groups = vec![FactGroup {
            member_fact_ids: ids(0..8),
            linked_entity: Some(GroupLink::Entity(a)),
        }];
        assert_eq!(d_fact_score(&groups, &labels).unwrap(), Ratio::new(1, 1));
    }

    #[test]
    fn d_fact_score_seven_of_ten() {
        // Linked to A, which supports facts 0..7 only.
        let labels: BTreeMap<_, _> = ids(0..10)
            .into_iter()
            .enumerate()
            .map(|(i, id)| (id, if i < 7 { Supported } else { NotSupported }))
            .collect();
        let groups = vec![FactGroup {
            member_fact_ids: ids(0..10),
            linked_entity: Some(GroupLink::Entity(entity("A", "1"))),
        }];
        assert_eq!(d_fact_score(&groups, &labels).unwrap(), Ratio::new(7, 10));
    }

    #[test]
    fn no_match_group_counts_unsupported() {
        let labels: BTreeMap<_, _> =
            vec![(FactId::from_index(0), Supported), (FactId::from_index(1), Supported), (FactId::from_index(2), Irrelevant)]
                .into_iter()
                .collect();
        let groups = vec![
            FactGroup {
                member_fact_ids: vec![FactId::from_index(0)],
                linked_entity: Some(GroupLink::Entity(entity("A", "1"))),
            },
            FactGroup {
                member_fact_ids: vec![FactId::from_index(1), FactId::from_index(2)],
                linked_entity: Some(GroupLink::NoMatch),
            },
        ];
        assert_eq!(d_fact_score(&groups, &labels).unwrap(), Ratio::new(1, 2));
    }

    #[test]
    fn partition_violations() {
        let labels: BTreeMap<_, _> = ids(0..3).into_iter().map(|id| (id, Supported)).collect();
        let link = Some(GroupLink::NoMatch);
        let overlap = vec![
            FactGroup { member_fact_ids: ids(0..2), linked_entity: link.clone() },
            FactGroup { member_fact_ids: ids(1..3), linked_entity: link.clone() },
        ];
        assert!(matches!(d_fact_score(&overlap, &labels), Err(ScoreError::PartitionViolation(_))));
        let omit = vec![FactGroup { member_fact_ids: ids(0..2), linked_entity: link.clone() }];
        assert!(matches!(d_fact_score(&omit, &labels), Err(ScoreError::PartitionViolation(_))));
        let unknown = vec![FactGroup { member_fact_ids: ids(0..4), linked_entity: link }];
        assert!(matches!(d_fact_score(&unknown, &labels), Err(ScoreError::PartitionViolation(_))));
    }

    #[test]
    fn missing_link_is_an_error_only_with_relevant_facts() {
        let groups = vec![FactGroup { member_fact_ids: ids(0..1), linked_entity: None }];
        let rel: BTreeMap<_, _> = ids(0..1).into_iter().map(|id| (id, Supported)).collect();
        assert_eq!(d_fact_score(&groups, &rel), Err(ScoreError::MissingLink(0)));
        let irr: BTreeMap<_, _> = ids(0..1).into_iter().map(|id| (id, Irrelevant)).collect();
        assert_eq!(d_fact_score(&groups, &irr), Err(ScoreError::EmptyRelevantSet));
    }

    #[test]
    fn categories() {
        assert_eq!(categorize(1, 1), Category::OneBioOneEntity);
        assert_eq!(categorize(1, 3), Category::OneBioManyEntities);
        assert_eq!(categorize(2, 2), Category::ManyBiosManyEntities);
        assert_eq!(categorize(3, 2), Category::ManyBiosManyEntities);
        assert_eq!(categorize(2, 1), Category::Other);
        assert_eq!(categorize(1, 0), Category::Other);
    }

    #[test]
    fn distinct_entities() {
        let a = entity("A", "1");
        let b = entity("B", "2");
        assert_eq!(count_distinct_entities(&[Some(a.clone()), Some(a.clone()), Some(a.clone())]), 1);
        assert_eq!(count_distinct_entities(&[Some(a.clone()), Some(b.clone()), Some(a), None]), 2);
        assert_eq!(count_distinct_entities(&[None, None]), 0);
        // Interleaved attributions of two same-named pages.
        let swimmer = entity("Dick Hanley (swimmer)", "10");
        let coach = entity("Dick Hanley (American football)", "11");
        let slots: Vec<_> = (0..10).map(|i| Some(if i % 3 == 0 { coach.clone() } else { swimmer.clone() })).collect();
        assert_eq!(count_distinct_entities(&slots), 2);
    }

    #[test]
    fn citation_recall_cases() {
        let full = vec![SentenceCitationRecord::new(0, vec![1], true), SentenceCitationRecord::new(1, vec![2, 3], true)];
        assert_eq!(citation_recall(&full).unwrap(), Ratio::new(1, 1));
        let half = vec![SentenceCitationRecord::new(0, vec![], false), SentenceCitationRecord::new(1, vec![1], true)];
        assert_eq!(citation_recall(&half).unwrap(), Ratio::new(1, 2));
        let uncited = vec![SentenceCitationRecord::new(0, vec![], true), SentenceCitationRecord::new(1, vec![], true)];
        assert_eq!(citation_recall(&uncited).unwrap(), Ratio::new(0, 1));
        assert_eq!(citation_recall(&[]), Err(ScoreError::EmptyParagraph));
    }
}
