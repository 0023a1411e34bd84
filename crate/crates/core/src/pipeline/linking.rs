//! Entity linking for fact groups and group-to-entity assignment.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::types::{AtomicFact, EntityRef, FactId, Fraction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkingResult {
    pub group_index: usize,
    pub entity: Option<EntityRef>,
    pub candidate_index: Option<usize>,
    pub support_fraction: Fraction,
    pub per_fact_support: BTreeMap<FactId, bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignMode {
    /// Each group takes its own best candidate; groups may share an entity.
    #[default]
    Independent,
    /// One-to-one assignment maximizing the total number of supported facts.
    Hungarian,
}

/// Link `group` to the candidate whose page supports the largest fraction of
/// its facts. Ties go to the earlier candidate.
pub fn link_entity<F>(
    group_index: usize,
    group: &[AtomicFact],
    candidates: &[EntityRef],
    mut supports: F,
) -> LinkingResult
where
    F: FnMut(&AtomicFact, &EntityRef) -> bool,
{
    let mut best: Option<(usize, u64, BTreeMap<FactId, bool>)> = None;
    for (ci, cand) in candidates.iter().enumerate() {
        let per_fact: BTreeMap<FactId, bool> = group.iter().map(|f| (f.id.clone(), supports(f, cand))).collect();
        let count = per_fact.values().filter(|&&s| s).count() as u64;
        if best.as_ref().is_none_or(|(_, c, _)| count > *c) {
            best = Some((ci, count, per_fact));
        }
    }
    match best {
        Some((ci, count, per_fact_support)) => LinkingResult {
            group_index,
            entity: Some(candidates[ci].clone()),
            candidate_index: Some(ci),
            support_fraction: if group.is_empty() { Ratio::new(0, 1) } else { Ratio::new(count, group.len() as u64) },
            per_fact_support,
        },
        None => LinkingResult {
            group_index,
            entity: None,
            candidate_index: None,
            support_fraction: Ratio::new(0, 1),
            per_fact_support: BTreeMap::new(),
        },
    }
}

/// Assign candidates to groups from a `groups × candidates` matrix of
/// supported-fact counts. Returns a candidate index per group.
pub fn assign_entities(support_matrix: &[Vec<u64>], mode: AssignMode) -> Vec<Option<usize>> {
    let cols = support_matrix.first().map_or(0, Vec::len);
    assert!(support_matrix.iter().all(|r| r.len() == cols), "ragged support matrix");
    if cols == 0 {
        return vec![None; support_matrix.len()];
    }
    match mode {
        AssignMode::Independent => support_matrix
            .iter()
            .map(|row| {
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                Some(best)
            })
            .collect(),
        AssignMode::Hungarian => max_weight_assignment(support_matrix),
    }
}

/// Maximum-weight assignment via the Hungarian method with potentials on the
/// square matrix padded with zero rows or columns. Rows matched to padding
/// come back as `None`.
pub fn max_weight_assignment(weights: &[Vec<u64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let n = rows.max(cols);
    if n == 0 {
        return Vec::new();
    }
    let max_w = weights.iter().flatten().copied().max().unwrap_or(0) as i64;
    // Minimize cost = max_w - weight; padding costs max_w.
    let cost = |i: usize, j: usize| -> i64 {
        if i < rows && j < cols {
            max_w - weights[i][j] as i64
        } else {
            max_w
        }
    };
    // 1-based arrays; index 0 is the virtual column used while augmenting.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; rows];
    for j in 1..=n {
        let i = row_of_col[j];
        if i >= 1 && i <= rows && j <= cols {
            out[i - 1] = Some(j - 1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn facts(n: usize) -> Vec<AtomicFact> {
        (0..n).map(|i| AtomicFact::new(FactId::from_index(i), format!("fact {i}"), 0)).collect()
    }

    #[test]
    fn links_to_majority_supporter() {
        let group = facts(10);
        let cands = vec![EntityRef::new("A", "0"), EntityRef::new("B", "1")];
        let r = link_entity(0, &group, &cands, |f, e| {
            let i: usize = f.text[5..].parse().unwrap();
            if e.title == "A" { i < 7 } else { i >= 7 }
        });
        assert_eq!(r.entity.unwrap().title, "A");
        assert_eq!(r.support_fraction, Ratio::new(7, 10));
        assert_eq!(r.per_fact_support.values().filter(|&&s| s).count(), 7);
    }

    #[test]
    fn singleton_candidate_is_linked_even_without_support() {
        let r = link_entity(0, &facts(3), &[EntityRef::new("A", "0")], |_, _| false);
        assert_eq!(r.entity.unwrap().title, "A");
        assert_eq!(r.support_fraction, Ratio::new(0, 1));
    }

    #[test]
    fn ties_go_to_first_candidate() {
        let cands = vec![EntityRef::new("A", "0"), EntityRef::new("B", "1"), EntityRef::new("C", "2")];
        let r = link_entity(0, &facts(4), &cands, |f, e| match e.title.as_str() {
            "A" => f.id == FactId::from_index(0),
            "B" => f.id <= FactId::from_index(1),
            _ => f.id >= FactId::from_index(2),
        });
        assert_eq!(r.candidate_index, Some(1));
    }

    #[test]
    fn no_candidates_means_no_entity() {
        let r = link_entity(2, &facts(2), &[], |_, _| true);
        assert!(r.entity.is_none());
        assert_eq!(r.group_index, 2);
    }

    #[test]
    fn hungarian_vs_independent() {
        let m = vec![vec![3, 1], vec![2, 0]];
        assert_eq!(assign_entities(&m, AssignMode::Hungarian), vec![Some(0), Some(1)]);
        assert_eq!(assign_entities(&m, AssignMode::Independent), vec![Some(0), Some(0)]);
        let single = vec![vec![4]];
        assert_eq!(assign_entities(&single, AssignMode::Hungarian), assign_entities(&single, AssignMode::Independent));
    }

    #[test]
    fn more_groups_than_candidates_leaves_some_unassigned() {
        let m = vec![vec![1], vec![5], vec![2]];
        assert_eq!(assign_entities(&m, AssignMode::Hungarian), vec![None, Some(0), None]);
        assert_eq!(assign_entities(&[vec![], vec![]], AssignMode::Hungarian), vec![None, None]);
    }
}
