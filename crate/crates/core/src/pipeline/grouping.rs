//! Parsing of decomposition and grouping responses.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::judge::GROUP_SEPARATOR;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlignmentError {
    #[error("grouping response lists {got} facts, expected {expected}")]
    CountMismatch { expected: usize, got: usize },
    #[error("grouping response fact {position} reads {got:?}, expected {expected:?}")]
    TextMismatch { position: usize, expected: String, got: String },
}

/// Parsed grouping: groups of indices into the input fact list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingOutput {
    pub raw_text: String,
    pub groups: Vec<Vec<usize>>,
}

fn fact_line(line: &str) -> Option<&str> {
    let t = line.trim();
    let rest = t.strip_prefix("- ").or_else(|| t.strip_prefix('-'))?;
    let rest = rest.trim();
    (!rest.is_empty()).then_some(rest)
}

/// Facts from a `- fact` bulleted response. Other lines are ignored.
pub fn parse_fact_lines(response: &str) -> Vec<String> {
    response
        .lines()
        .filter(|l| l.trim() != GROUP_SEPARATOR)
        .filter_map(fact_line)
        .map(str::to_string)
        .collect()
}

/// Split a grouping response at separator lines and check that the facts,
/// read in order, are exactly `facts`. Empty groups are dropped.
pub fn parse_grouping(raw: &str, facts: &[String]) -> Result<GroupingOutput, AlignmentError> {
    let mut groups: Vec<Vec<String>> = vec![Vec::new()];
    for line in raw.lines() {
        if line.trim() == GROUP_SEPARATOR {
            groups.push(Vec::new());
        } else if let Some(f) = fact_line(line) {
            groups.last_mut().unwrap().push(f.to_string());
        }
    }
    groups.retain(|g| !g.is_empty());
    let got = groups.iter().map(Vec::len).sum::<usize>();
    if got != facts.len() {
        return Err(AlignmentError::CountMismatch { expected: facts.len(), got });
    }
    let mut position = 0;
    let mut indexed = Vec::with_capacity(groups.len());
    for g in groups {
        let mut idx = Vec::with_capacity(g.len());
        for text in g {
            let expected = facts[position].trim();
            if text != expected {
                return Err(AlignmentError::TextMismatch { position, expected: expected.to_string(), got: text });
            }
            idx.push(position);
            position += 1;
        }
        indexed.push(idx);
    }
    Ok(GroupingOutput { raw_text: raw.to_string(), groups: indexed })
}
