//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use dfactscore::analysis::{agreement_rate, pearson_r, PairedSeries};
use dfactscore::annotation::{
    double_count, implied_scores, schedule, AnnotationService, AnnotationTask, EntityPage, StepThreeLabel,
    StepTwoLabel,
};
use dfactscore::judge::{render_grouped_facts, Judge, JudgeError, JudgeRequest, ScriptedGrouping, ScriptedJudge};
use dfactscore::knowledge::{split_passages, PassageStore, PASSAGE_WORDS};
use dfactscore::pipeline::{
    assign_entities, evaluate_paragraph, group_facts, link_entity, parse_grouping, AssignMode, EvalOptions,
    ParagraphInput,
};
use dfactscore::retrieval::{Retriever, RetrieverConfig, DEFAULT_K};
use dfactscore::text::normalize_whitespace;
use dfactscore::types::{AtomicFact, EntityRef, FactGroup, FactId, FactLabel, GroupLink, PageId};
use dfactscore::{d_fact_score, fact_score, Fraction};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DOMINANCE_INSTANCES: usize = 10_000;
const DOMINANCE_BUDGET: Duration = Duration::from_secs(30);
const COLLAPSE_INSTANCES: usize = 1_000;
const LINK_INSTANCES: usize = 1_000;
const HUNGARIAN_INSTANCES: usize = 1_000;
const HUNGARIAN_MAX: usize = 6;
const GROUPING_INSTANCES: usize = 500;
const PASSAGE_INSTANCES: usize = 1_000;
const PEARSON_SERIES: usize = 100;
const PEARSON_TOL: f64 = 1e-12;
const ANNOTATION_SUBMISSIONS: usize = 200;
const REPLAY_RUNS: usize = 3;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

// ---------------------------------------------------------------- synthetic paragraphs

struct Synthetic {
    store: PassageStore,
    retriever: Retriever,
    judge: ScriptedJudge,
    input: ParagraphInput,
}

/// A paragraph about "Pat Doe" with `n_cands` same-name pages, an optional
/// distractor page, a random support oracle and a random fact grouping.
fn synthetic(rng: &mut ChaCha8Rng, n_cands: usize, distractor: bool) -> Synthetic {
    let mut dump = String::new();
    for j in 0..n_cands {
        let rec = serde_json::json!({"title": format!("Pat Doe (person {j})"), "text": format!("Pat Doe is person number {j}.")});
        dump.push_str(&rec.to_string());
        dump.push('\n');
    }
    if distractor {
        dump.push_str("{\"title\": \"Lee Roe\", \"text\": \"Lee Roe is someone else.\"}\n");
    }
    let store = PassageStore::ingest_dump(dump.as_bytes()).unwrap();
    let retriever = Retriever::new(RetrieverConfig::lexical(DEFAULT_K), &store).unwrap();
    let n_pages = store.pages().len();

    let n = rng.random_range(1..=10);
    let facts: Vec<String> = (0..n).map(|i| format!("Pat Doe fact number {i}.")).collect();
    let mut judge = ScriptedJudge::new();
    for f in &facts {
        if rng.random_bool(0.1) {
            judge.relevance_table.insert(f.clone(), false);
        }
        for p in 0..n_pages {
            judge = judge.support(f, &PageId::from_index(p), rng.random_bool(0.5));
        }
    }
    let n_groups = rng.random_range(1..=n.min(4));
    let mut cuts: Vec<usize> = (1..n).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(n_groups - 1).collect();
    cuts.sort();
    let mut groups = Vec::new();
    let mut start = 0;
    for c in cuts.into_iter().chain([n]) {
        groups.push(facts[start..c].to_vec());
        start = c;
    }
    let grouping = if rng.random_bool(0.05) {
        ScriptedGrouping::Raw("- not a listed fact\n".into())
    } else {
        ScriptedGrouping::Groups(groups)
    };
    judge.group_script.insert("syn".into(), grouping);
    let input = ParagraphInput {
        paragraph_id: "syn".into(),
        name: "Pat Doe".into(),
        text: facts.join(" "),
        citations_resolved: None,
        model_tag: None,
    };
    Synthetic { store, retriever, judge, input }
}

fn dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let start = Instant::now();
    let mut compared = 0;
    for i in 0..DOMINANCE_INSTANCES {
        let (m, distractor) = (rng.random_range(1..=4), rng.random_bool(0.5));
        let s = synthetic(&mut rng, m, distractor);
        let assign = if i % 2 == 0 { AssignMode::Independent } else { AssignMode::Hungarian };
        let opts = EvalOptions { assign, ..EvalOptions::default() };
        let r = evaluate_paragraph(&s.input, &s.store, &s.retriever, &s.judge, &opts)
            .map_err(|e| format!("instance {i}: {e}"))?
            .report;
        if let (Some(fs), Some(dfs)) = (r.fs_exact(), r.dfs_exact()) {
            check(dfs <= fs, format!("instance {i}: D-FS {dfs} > FS {fs}"))?;
            compared += 1;
        }
    }
    let took = start.elapsed();
    check(took < DOMINANCE_BUDGET, format!("took {took:.1?}, budget {DOMINANCE_BUDGET:?}"))?;
    Ok(format!("{DOMINANCE_INSTANCES} instances ({compared} scorable), 0 violations, {took:.1?}"))
}

fn single_entity_collapse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    for i in 0..COLLAPSE_INSTANCES {
        let s = synthetic(&mut rng, 1, false);
        let r = evaluate_paragraph(&s.input, &s.store, &s.retriever, &s.judge, &EvalOptions::default())
            .map_err(|e| format!("instance {i}: {e}"))?
            .report;
        check(r.fs_exact() == r.dfs_exact(), format!("instance {i}: FS {:?} != D-FS {:?}", r.fs_exact(), r.dfs_exact()))?;
    }
    Ok(format!("{COLLAPSE_INSTANCES} instances, D-FS == FS exactly"))
}

// ---------------------------------------------------------------- CLI replay

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dfactscore"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), String::from_utf8_lossy(&out.stderr).to_string())
}

/// Replays `fixture` several times and with different worker counts into
/// the same output directory; returns the output bytes of the first run.
fn replay_identical(fixture: &str, workers: &[usize], runs: usize) -> Result<Vec<u8>, String> {
    let dir = root().join("fixtures").join(fixture);
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = tmp.path().join("out");
    let p = |x: &Path| x.to_str().unwrap().to_string();
    let mut first: Option<Vec<u8>> = None;
    for &w in workers {
        for _ in 0..runs {
            cli(&[
                "evaluate",
                "--store",
                &p(&dir.join("dump.jsonl")),
                "--input",
                &p(&dir.join("paragraphs.jsonl")),
                "--replay",
                &p(&dir.join("transcript.jsonl")),
                "--workers",
                &w.to_string(),
                "--out",
                &p(&out),
            ])?;
            let mut bytes = Vec::new();
            for f in ["reports.jsonl", "facts.jsonl", "manifest.json"] {
                bytes.extend(std::fs::read(out.join(f)).map_err(|e| e.to_string())?);
            }
            match &first {
                None => first = Some(bytes),
                Some(b) => check(*b == bytes, format!("output differs at workers={w}"))?,
            }
        }
    }
    Ok(first.unwrap())
}

fn reports_of(bytes: &[u8]) -> Vec<serde_json::Value> {
    let text = String::from_utf8_lossy(bytes);
    text.lines()
        .filter_map(|l| serde_json::from_str::<serde_json::Value>(l).ok())
        .filter(|v| v.get("fs_supported").is_some())
        .collect()
}

fn blended_bio_replay() -> Outcome {
    let bytes = replay_identical("blended_bio", &[1, 4], REPLAY_RUNS)?;
    let r = &reports_of(&bytes)[0];
    let want = serde_json::json!({"fs": 1.0, "dfs": 0.7, "num_bios": 1, "num_entities": 2, "category": "OneBioManyEntities"});
    for (k, v) in want.as_object().unwrap() {
        check(&r[k] == v, format!("{k} = {}, expected {v}", r[k]))?;
    }
    check(r["fs_supported"] == 10 && r["dfs_supported"] == 7, "expected 10/10 and 7/10 supported")?;
    Ok(format!("FS 1.000, D-FS 0.700, 1 bio, 2 entities, OneBioManyEntities; identical over {REPLAY_RUNS} runs x workers {{1,4}}"))
}

fn category_shapes() -> Outcome {
    let bytes = replay_identical("shapes", &[1], 1)?;
    let reports = reports_of(&bytes);
    let get = |id: &str| reports.iter().find(|r| r["paragraph_id"] == id).cloned().ok_or(format!("missing {id}"));
    let frac = |r: &serde_json::Value, k: &str| {
        Fraction::new(r[k].as_u64().unwrap(), r["relevant_fact_count"].as_u64().unwrap())
    };
    let one = get("one_bio_one_entity")?;
    check(one["category"] == "OneBioOneEntity", "one_bio_one_entity category")?;
    check(frac(&one, "fs_supported") == frac(&one, "dfs_supported"), "OneBioOneEntity FS != D-FS")?;
    let many = get("many_bios_many_entities")?;
    check(many["category"] == "ManyBiosManyEntities", "many_bios_many_entities category")?;
    check(frac(&many, "fs_supported") == frac(&many, "dfs_supported"), "ManyBiosManyEntities FS != D-FS")?;
    let blend = get("one_bio_many_entities")?;
    check(blend["category"] == "OneBioManyEntities", "one_bio_many_entities category")?;
    check(frac(&blend, "dfs_supported") < frac(&blend, "fs_supported"), "OneBioManyEntities D-FS not < FS")?;
    Ok("OneBioOneEntity FS == D-FS; ManyBiosManyEntities FS == D-FS; OneBioManyEntities D-FS < FS".into())
}

fn corpus_determinism() -> Outcome {
    let bytes = replay_identical("corpus30", &[1, 4], REPLAY_RUNS)?;
    let n = reports_of(&bytes).len();
    check(n == 30, format!("expected 30 reports, got {n}"))?;
    Ok(format!("30 paragraphs byte-identical over {REPLAY_RUNS} runs x workers {{1,4}}"))
}

// ---------------------------------------------------------------- linking and assignment

/// Exhaustive oracle: count support per candidate, keep the first maximum.
fn brute_link(oracle: &[Vec<bool>], n_cands: usize) -> Option<usize> {
    let counts: Vec<usize> = (0..n_cands).map(|c| oracle.iter().filter(|row| row[c]).count()).collect();
    let max = *counts.iter().max()?;
    counts.iter().position(|&c| c == max)
}

fn run_link(oracle: &[Vec<bool>], n_cands: usize) -> Option<usize> {
    let facts: Vec<AtomicFact> = (0..oracle.len()).map(|i| AtomicFact::new(FactId::from_index(i), i.to_string(), 0)).collect();
    let cands: Vec<EntityRef> = (0..n_cands).map(|c| EntityRef::new(format!("E{c}"), PageId::from_index(c))).collect();
    link_entity(0, &facts, &cands, |f, e| oracle[f.text.parse::<usize>().unwrap()][e.page_id.0.parse::<usize>().unwrap()])
        .candidate_index
}

fn entity_linking() -> Outcome {
    let fixtures: Vec<(Vec<Vec<bool>>, usize, Option<usize>)> = vec![
        (vec![vec![true, false]; 7].into_iter().chain(vec![vec![false, true]; 3]).collect(), 2, Some(0)),
        (vec![vec![false, true], vec![true, false]], 2, Some(0)),
        (vec![vec![false, true, true], vec![false, true, true]], 3, Some(1)),
        (vec![vec![false, false]], 2, Some(0)),
        (vec![vec![]], 0, None),
    ];
    for (i, (oracle, m, want)) in fixtures.iter().enumerate() {
        check(run_link(oracle, *m) == *want, format!("fixture {i}"))?;
        check(brute_link(oracle, *m) == *want, format!("oracle fixture {i}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let mut ties = 0;
    for i in 0..LINK_INSTANCES {
        let n = rng.random_range(0..10);
        let m = rng.random_range(1..6);
        let oracle: Vec<Vec<bool>> = (0..n).map(|_| (0..m).map(|_| rng.random_bool(0.5)).collect()).collect();
        let counts: Vec<usize> = (0..m).map(|c| oracle.iter().filter(|r| r[c]).count()).collect();
        let max = counts.iter().max().copied().unwrap_or(0);
        if counts.iter().filter(|&&c| c == max).count() > 1 {
            ties += 1;
        }
        check(run_link(&oracle, m) == brute_link(&oracle, m), format!("random instance {i}"))?;
    }
    Ok(format!("{} fixtures + {LINK_INSTANCES} random instances agree ({ties} with ties)", fixtures.len()))
}

fn brute_best(m: &[Vec<u64>], row: usize, used: &mut [bool]) -> u64 {
    if row == m.len() {
        return 0;
    }
    let mut best = brute_best(m, row + 1, used);
    for c in 0..used.len() {
        if !used[c] {
            used[c] = true;
            best = best.max(m[row][c] + brute_best(m, row + 1, used));
            used[c] = false;
        }
    }
    best
}

fn hungarian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let mut shapes = BTreeMap::new();
    for i in 0..HUNGARIAN_INSTANCES {
        // Cover every shape up to 6x6 first, then draw shapes at random.
        let (r, c) = if i < HUNGARIAN_MAX * HUNGARIAN_MAX {
            (i / HUNGARIAN_MAX + 1, i % HUNGARIAN_MAX + 1)
        } else {
            (rng.random_range(1..=HUNGARIAN_MAX), rng.random_range(1..=HUNGARIAN_MAX))
        };
        *shapes.entry((r, c)).or_insert(0) += 1;
        let hi = [2, 5, 100][i % 3];
        let m: Vec<Vec<u64>> = (0..r).map(|_| (0..c).map(|_| rng.random_range(0..hi)).collect()).collect();
        let a = assign_entities(&m, AssignMode::Hungarian);
        let mut used = vec![false; c];
        let mut total = 0;
        for (row, col) in a.iter().enumerate() {
            if let Some(col) = *col {
                check(!used[col], format!("instance {i}: column {col} assigned twice"))?;
                used[col] = true;
                total += m[row][col];
            }
        }
        let best = brute_best(&m, 0, &mut vec![false; c]);
        check(total == best, format!("instance {i}: total {total}, optimum {best}"))?;
    }
    Ok(format!("{HUNGARIAN_INSTANCES} instances over {} shapes up to {HUNGARIAN_MAX}x{HUNGARIAN_MAX}, all optimal", shapes.len()))
}

// ---------------------------------------------------------------- grouping protocol

struct Fixed(String);

impl Judge for Fixed {
    fn complete(&self, _: &JudgeRequest) -> Result<String, JudgeError> {
        Ok(self.0.clone())
    }
    fn provider_tag(&self) -> String {
        "fixed".into()
    }
}

fn grouping_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    let mut scrambled = 0;
    for i in 0..GROUPING_INSTANCES {
        let n = rng.random_range(1..=12);
        let facts: Vec<String> = (0..n).map(|j| format!("Fact {j} of case {i} holds.")).collect();
        let mut groups: Vec<Vec<String>> = vec![Vec::new()];
        for f in &facts {
            if !groups.last().unwrap().is_empty() && rng.random_bool(0.3) {
                groups.push(Vec::new());
            }
            groups.last_mut().unwrap().push(f.clone());
        }
        let raw = render_grouped_facts(&groups);
        let parsed = parse_grouping(&raw, &facts).map_err(|e| format!("case {i}: {e}"))?;
        let flat: Vec<String> = parsed.groups.iter().flatten().map(|&k| facts[k].clone()).collect();
        check(flat == facts, format!("case {i}: flatten mismatch"))?;
        check(parsed.groups.len() == groups.len(), format!("case {i}: group count"))?;

        // Scramble: drop, reword or swap a fact.
        let mut bad: Vec<Vec<String>> = groups.clone();
        match rng.random_range(0..3) {
            0 => {
                bad.last_mut().unwrap().pop();
            }
            1 => bad[0][0] = "A reworded fact.".into(),
            _ if n >= 2 => {
                let mut flat: Vec<String> = bad.concat();
                flat.swap(0, n - 1);
                if flat[0] == flat[n - 1] {
                    continue;
                }
                bad = vec![flat];
            }
            _ => bad[0][0].push('!'),
        }
        let bad_raw = render_grouped_facts(&bad);
        check(parse_grouping(&bad_raw, &facts).is_err(), format!("case {i}: scrambled response accepted"))?;
        let atoms: Vec<AtomicFact> = facts.iter().enumerate().map(|(k, f)| AtomicFact::new(FactId::from_index(k), f.clone(), 0)).collect();
        let g = group_facts(&Fixed(bad_raw), "p", "para", &atoms).map_err(|e| e.to_string())?;
        check(g.fallback && g.groups == vec![(0..n).collect::<Vec<_>>()], format!("case {i}: no single-group fallback"))?;
        scrambled += 1;
    }
    Ok(format!("{GROUPING_INSTANCES} round trips; {scrambled} scrambled responses rejected with single-group fallback"))
}

// ---------------------------------------------------------------- passages

fn passage_split() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    let seps = [" ", "  ", "\n", "\t", "\n\n", " \t "];
    let mut max_seen = 0;
    for i in 0..PASSAGE_INSTANCES {
        let words = rng.random_range(0..=450);
        let mut text = String::new();
        if rng.random_bool(0.3) {
            text.push_str("  ");
        }
        for _ in 0..words {
            let len = rng.random_range(1..=10);
            text.extend((0..len).map(|_| rng.random_range(b'a'..=b'z') as char));
            text.push_str(seps[rng.random_range(0..seps.len())]);
        }
        let ps = split_passages(&PageId::from_index(i), "T", &text);
        let joined = ps.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join(" ");
        check(joined == normalize_whitespace(&text), format!("document {i}: join differs"))?;
        for p in &ps {
            let n = p.text.split_whitespace().count();
            max_seen = max_seen.max(n);
            check(n <= PASSAGE_WORDS && n > 0, format!("document {i}: passage of {n} words"))?;
        }
    }
    Ok(format!("{PASSAGE_INSTANCES} documents, max passage {max_seen} words"))
}

// ---------------------------------------------------------------- statistics

/// Computational form of r, independent of the centered-sum implementation.
fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

fn pearson_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1007);
    let mut worst: f64 = 0.0;
    for i in 0..PEARSON_SERIES {
        let n = rng.random_range(2..=40);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + rng.random::<f64>()).collect();
        let s = PairedSeries::unlabeled(x.clone(), y.clone()).map_err(|e| e.to_string())?;
        let r = pearson_r(&s).map_err(|e| format!("series {i}: {e}"))?;
        let d = (r - pearson_oracle(&x, &y)).abs();
        worst = worst.max(d);
        check(d <= PEARSON_TOL, format!("series {i}: |diff| {d:e}"))?;
        let (a, b) = (rng.random_range(0.1..10.0), rng.random_range(-5.0..5.0));
        let t = PairedSeries::unlabeled(x.iter().map(|v| a * v + b).collect(), y.clone()).map_err(|e| e.to_string())?;
        let d2 = (pearson_r(&t).map_err(|e| e.to_string())? - r).abs();
        check(d2 <= PEARSON_TOL, format!("series {i}: affine change moved r by {d2:e}"))?;
    }
    use FactLabel::*;
    let hand: [(&[FactLabel], &[FactLabel], Fraction); 3] = [
        (&[Supported, Supported, NotSupported, Irrelevant], &[Supported, NotSupported, NotSupported, Irrelevant], Fraction::new(3, 4)),
        (&[Supported, Irrelevant], &[Supported, Irrelevant], Fraction::new(1, 1)),
        (&[Supported, NotSupported, Irrelevant], &[Irrelevant, Supported, NotSupported], Fraction::new(0, 1)),
    ];
    for (k, (a, b, want)) in hand.iter().enumerate() {
        check(agreement_rate(a, b).ok() == Some(*want), format!("agreement case {k}"))?;
    }
    Ok(format!("{PEARSON_SERIES} series within {PEARSON_TOL:e} (worst {worst:.1e}), affine invariant; {} hand-counted agreement cases", hand.len()))
}

// ---------------------------------------------------------------- annotation

fn annotation_cross_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1008);
    let pages = [EntityRef::new("A", "00000000"), EntityRef::new("B", "00000001"), EntityRef::new("C", "00000002")];
    let tasks: Vec<AnnotationTask> = (0..ANNOTATION_SUBMISSIONS)
        .map(|i| AnnotationTask {
            paragraph_id: format!("p{i:04}"),
            name: "Pat Doe".into(),
            model_tag: None,
            paragraph_text: "text".into(),
            facts: (0..rng.random_range(1..=8)).map(|k| AtomicFact::new(FactId::from_index(k), format!("fact {k}"), 0)).collect(),
            entity_pages: pages.iter().map(|e| EntityPage { entity: e.clone(), page_text: String::new() }).collect(),
            assigned_annotators: vec!["ann".into()],
        })
        .collect();
    let svc = AnnotationService::in_memory(tasks.clone()).map_err(|e| e.to_string())?;
    let labels = [FactLabel::Supported, FactLabel::NotSupported, FactLabel::Irrelevant];
    let mut unscorable = 0;
    for t in &tasks {
        let ids: Vec<FactId> = t.facts.iter().map(|f| f.id.clone()).collect();
        let n_bios = rng.random_range(1..=ids.len().min(3));
        let mut spans = vec![Vec::new(); n_bios];
        for (k, id) in ids.iter().enumerate() {
            let b = if k < n_bios { k } else { rng.random_range(0..n_bios) };
            spans[b].push(id.clone());
        }
        let link = |rng: &mut ChaCha8Rng| match rng.random_range(0..4) {
            3 => GroupLink::NoMatch,
            j => GroupLink::Entity(pages[j].clone()),
        };
        let links: BTreeMap<usize, GroupLink> = (0..n_bios).map(|b| (b, link(&mut rng))).collect();
        let s2 = StepTwoLabel { annotator_id: "ann".into(), paragraph_id: t.paragraph_id.clone(), num_bios: n_bios, bio_spans: spans, bio_entity_links: links };
        let pick = |rng: &mut ChaCha8Rng| labels[rng.random_range(0..3)];
        let s3 = StepThreeLabel {
            annotator_id: "ann".into(),
            paragraph_id: t.paragraph_id.clone(),
            fact_labels: ids.iter().map(|id| (id.clone(), pick(&mut rng))).collect(),
            fs_fact_labels: ids.iter().map(|id| (id.clone(), pick(&mut rng))).collect(),
            fact_entity_attribution: ids.iter().map(|id| (id.clone(), link(&mut rng))).collect(),
        };
        svc.submit_step2(s2.clone()).map_err(|e| format!("{}: {e}", t.paragraph_id))?;
        let ack = svc.submit_step3(s3.clone()).map_err(|e| format!("{}: {e}", t.paragraph_id))?;

        let groups: Vec<FactGroup> = s2
            .bio_spans
            .iter()
            .enumerate()
            .map(|(b, span)| FactGroup { member_fact_ids: span.clone(), linked_entity: s2.bio_entity_links.get(&b).cloned() })
            .collect();
        let dfs = d_fact_score(&groups, &s3.fact_labels).ok();
        let fs_labels: Vec<FactLabel> = s3.fs_fact_labels.values().copied().collect();
        let fs = fact_score(&fs_labels).ok();
        check(ack.implied.dfs_exact() == dfs, format!("{}: D-FS mismatch", t.paragraph_id))?;
        check(ack.implied.fs_exact() == fs, format!("{}: FS mismatch", t.paragraph_id))?;
        check(implied_scores(&s2, &s3).map_err(|e| e.to_string())? == ack.implied, "implied scores not reproducible")?;
        unscorable += usize::from(ack.implied.unscorable);
    }

    let mut counts = Vec::new();
    for n in [1, 7, 10, 95, 100, 101, 250] {
        let mut ts: Vec<AnnotationTask> = tasks.iter().cycle().take(n).enumerate().map(|(i, t)| AnnotationTask { paragraph_id: format!("q{i}"), ..t.clone() }).collect();
        schedule(&mut ts, &["a".into(), "b".into(), "c".into()], 100, 42).map_err(|e| e.to_string())?;
        let doubled = ts.iter().filter(|t| t.assigned_annotators.len() == 2).count();
        let want = (n * 10).div_ceil(100);
        check(doubled == want && double_count(n, 100) == want, format!("N={n}: {doubled} doubled, expected {want}"))?;
        check(ts.iter().all(|t| t.assigned_annotators.len() < 2 || t.assigned_annotators[0] != t.assigned_annotators[1]), "same annotator twice")?;
        counts.push(format!("{n}->{doubled}"));
    }
    Ok(format!(
        "{ANNOTATION_SUBMISSIONS} submissions match core scores ({unscorable} unscorable); doubled tasks {}",
        counts.join(", ")
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("dominance", dominance),
        ("single-entity collapse", single_entity_collapse),
        ("blended-bio replay", blended_bio_replay),
        ("category shapes", category_shapes),
        ("entity-linking oracle", entity_linking),
        ("hungarian oracle", hungarian),
        ("grouping round trip", grouping_round_trip),
        ("passage split round trip", passage_split),
        ("pearson / agreement", pearson_agreement),
        ("full-pipeline determinism", corpus_determinism),
        ("annotation cross-check", annotation_cross_check),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
