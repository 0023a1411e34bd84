//! Model-level aggregation, correlation and agreement statistics.

use std::collections::{BTreeMap, HashSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Fraction, ParagraphReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {min} values, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("no reports to aggregate")]
    EmptyInput,
    #[error("only {0} overlapping paragraphs, need at least 2")]
    InsufficientOverlap(usize),
    #[error("csv: {0}")]
    Csv(String),
}

/// Per-paragraph human and automatic values under shared ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSeries {
    ids: Vec<String>,
    human: Vec<f64>,
    auto: Vec<f64>,
}

impl PairedSeries {
    pub fn new(ids: Vec<String>, human: Vec<f64>, auto: Vec<f64>) -> Result<Self, AnalysisError> {
        if human.len() != auto.len() {
            return Err(AnalysisError::LengthMismatch { left: human.len(), right: auto.len() });
        }
        if ids.len() != human.len() {
            return Err(AnalysisError::LengthMismatch { left: ids.len(), right: human.len() });
        }
        if human.len() < 2 {
            return Err(AnalysisError::TooShort { min: 2, got: human.len() });
        }
        let mut seen = HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(AnalysisError::DuplicateId(dup.clone()));
        }
        Ok(PairedSeries { ids, human, auto })
    }

    /// Series with ids `0..n`.
    pub fn unlabeled(human: Vec<f64>, auto: Vec<f64>) -> Result<Self, AnalysisError> {
        let ids = (0..human.len()).map(|i| i.to_string()).collect();
        Self::new(ids, human, auto)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn human(&self) -> &[f64] {
        &self.human
    }

    pub fn auto(&self) -> &[f64] {
        &self.auto
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample Pearson correlation between the human and automatic series.
pub fn pearson_r(series: &PairedSeries) -> Result<f64, AnalysisError> {
    let (x, y) = (&series.human, &series.auto);
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Fraction of positions where the two label lists agree.
pub fn agreement_rate<T: PartialEq>(a: &[T], b: &[T]) -> Result<Fraction, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(AnalysisError::TooShort { min: 1, got: 0 });
    }
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    Ok(Ratio::new(same as u64, a.len() as u64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model_tag: String,
    pub mean_fs: Option<f64>,
    pub mean_dfs: Option<f64>,
    pub mean_num_bios: Option<f64>,
    pub mean_num_entities: f64,
    pub mean_citation_recall: Option<f64>,
    pub n_paragraphs: usize,
    /// Unscorable paragraphs left out of the means.
    pub excluded: usize,
}

/// Mean of the values, summed in sorted order so the result does not depend
/// on input order.
fn stable_mean(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    Some(xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn aggregate(reports: &[ParagraphReport], model_tag: &str) -> Result<ModelSummary, AnalysisError> {
    if reports.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let scorable: Vec<&ParagraphReport> = reports.iter().filter(|r| r.is_scorable()).collect();
    if scorable.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let collect = |f: &dyn Fn(&ParagraphReport) -> Option<f64>| scorable.iter().filter_map(|r| f(r)).collect::<Vec<_>>();
    Ok(ModelSummary {
        model_tag: model_tag.to_string(),
        mean_fs: stable_mean(collect(&|r| r.fs)),
        mean_dfs: stable_mean(collect(&|r| r.dfs)),
        mean_num_bios: stable_mean(collect(&|r| r.num_bios.map(|b| b as f64))),
        mean_num_entities: stable_mean(collect(&|r| Some(r.num_entities as f64))).unwrap_or(0.0),
        mean_citation_recall: stable_mean(collect(&|r| r.citation_recall)),
        n_paragraphs: scorable.len(),
        excluded: reports.len() - scorable.len(),
    })
}

/// Human-implied scores for one paragraph, as written by the annotation
/// export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanScore {
    pub paragraph_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_tag: Option<String>,
    pub fs: Option<f64>,
    pub dfs: Option<f64>,
    pub num_bios: usize,
    pub num_entities: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    /// Model tag, or `overall` for the pooled row.
    pub model_tag: String,
    pub n: usize,
    pub dfs_r: Option<f64>,
    pub num_bios_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub rows: Vec<CorrelationRow>,
}

impl CorrelationReport {
    pub fn overall(&self) -> &CorrelationRow {
        self.rows.last().expect("report always has a pooled row")
    }
}

struct Pair<'a> {
    id: &'a str,
    model: String,
    human: &'a HumanScore,
    auto: &'a ParagraphReport,
}

fn correlate(tag: String, pairs: &[&Pair]) -> CorrelationRow {
    let mut notes = Vec::new();
    let dfs: Vec<(&str, f64, f64)> = pairs
        .iter()
        .filter_map(|p| Some((p.id, p.human.dfs?, p.auto.dfs?)))
        .collect();
    let bios: Vec<(&str, f64, f64)> = pairs
        .iter()
        .filter_map(|p| Some((p.id, p.human.num_bios as f64, p.auto.num_bios? as f64)))
        .collect();
    let mut r = |label: &str, v: Vec<(&str, f64, f64)>| {
        let ids = v.iter().map(|t| t.0.to_string()).collect();
        let res = PairedSeries::new(ids, v.iter().map(|t| t.1).collect(), v.iter().map(|t| t.2).collect())
            .and_then(|s| pearson_r(&s));
        match res {
            Ok(x) => Some(x),
            Err(e) => {
                notes.push(format!("{label}: {e}"));
                None
            }
        }
    };
    let dfs_r = r("dfs", dfs);
    let num_bios_r = r("num_bios", bios);
    CorrelationRow { model_tag: tag, n: pairs.len(), dfs_r, num_bios_r, notes }
}

/// Per-model and pooled correlations of D-FS and number of biographies,
/// paired by paragraph id.
pub fn compare_human_auto(
    human: &[HumanScore],
    auto: &[ParagraphReport],
) -> Result<CorrelationReport, AnalysisError> {
    let auto_by_id: BTreeMap<&str, &ParagraphReport> = auto.iter().map(|r| (r.paragraph_id.as_str(), r)).collect();
    let mut pairs: Vec<Pair> = human
        .iter()
        .filter_map(|h| {
            let a = auto_by_id.get(h.paragraph_id.as_str())?;
            let model = a.model_tag.clone().or_else(|| h.model_tag.clone()).unwrap_or_else(|| "unknown".into());
            Some(Pair { id: &h.paragraph_id, model, human: h, auto: a })
        })
        .collect();
    pairs.sort_by(|a, b| a.id.cmp(b.id));
    pairs.dedup_by(|a, b| a.id == b.id);
    if pairs.len() < 2 {
        return Err(AnalysisError::InsufficientOverlap(pairs.len()));
    }
    let mut by_model: BTreeMap<&str, Vec<&Pair>> = BTreeMap::new();
    for p in &pairs {
        by_model.entry(p.model.as_str()).or_default().push(p);
    }
    let mut rows: Vec<CorrelationRow> = by_model.into_iter().map(|(m, ps)| correlate(m.to_string(), &ps)).collect();
    let all: Vec<&Pair> = pairs.iter().collect();
    let pooled = correlate("overall".to_string(), &all);
    if pooled.dfs_r.is_none() && pooled.num_bios_r.is_none() {
        return Err(AnalysisError::ZeroVariance);
    }
    rows.push(pooled);
    Ok(CorrelationReport { rows })
}

/// One line of a results table: the same model evaluated with and without
/// name ambiguity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model_tag: String,
    pub left: Option<ModelSummary>,
    pub right: Option<ModelSummary>,
}

pub const TABLE_COLUMNS: [&str; 6] = ["Model", "FS", "D-FS", "#Bio", "#Ent", "Cite-R"];

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{:.1}", v * 100.0))
}

fn one_dp(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"))
}

fn cell(row: &TableRow, f: impl Fn(Option<&ModelSummary>) -> String) -> String {
    format!("{} / {}", f(row.left.as_ref()), f(row.right.as_ref()))
}

impl TableRow {
    /// Cells in `TABLE_COLUMNS` order, each `left / right`.
    pub fn cells(&self) -> Vec<String> {
        vec![
            self.model_tag.clone(),
            cell(self, |s| pct(s.and_then(|s| s.mean_fs))),
            cell(self, |s| pct(s.and_then(|s| s.mean_dfs))),
            cell(self, |s| one_dp(s.and_then(|s| s.mean_num_bios))),
            cell(self, |s| one_dp(s.map(|s| s.mean_num_entities))),
            cell(self, |s| pct(s.and_then(|s| s.mean_citation_recall))),
        ]
    }
}

pub fn render_markdown(rows: &[TableRow]) -> String {
    let mut out = format!("| {} |\n", TABLE_COLUMNS.join(" | "));
    out.push_str(&format!("|{}\n", "---|".repeat(TABLE_COLUMNS.len())));
    for r in rows {
        out.push_str(&format!("| {} |\n", r.cells().join(" | ")));
    }
    out
}

pub fn render_csv(rows: &[TableRow]) -> Result<String, AnalysisError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| AnalysisError::Csv(e.to_string());
    w.write_record(TABLE_COLUMNS).map_err(err)?;
    for r in rows {
        w.write_record(r.cells()).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| AnalysisError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
