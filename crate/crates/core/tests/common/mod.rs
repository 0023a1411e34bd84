#![allow(dead_code)]

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use dfactscore::judge::ScriptedJudge;
use dfactscore::knowledge::PassageStore;
use dfactscore::pipeline::ParagraphInput;
use dfactscore::retrieval::{Retriever, RetrieverConfig, DEFAULT_K};

pub fn fixture_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub struct Fixture {
    pub store: PassageStore,
    pub retriever: Retriever,
    pub judge: ScriptedJudge,
    pub paragraphs: Vec<ParagraphInput>,
}

pub fn load(name: &str) -> Fixture {
    let dir = fixture_dir(name);
    let store = PassageStore::ingest_dump_file(&dir.join("dump.jsonl")).unwrap();
    let retriever = Retriever::new(RetrieverConfig::lexical(DEFAULT_K), &store).unwrap();
    let judge = ScriptedJudge::load(&dir.join("script.json")).unwrap();
    let paragraphs = BufReader::new(File::open(dir.join("paragraphs.jsonl")).unwrap())
        .lines()
        .map(|l| serde_json::from_str(&l.unwrap()).unwrap())
        .collect();
    Fixture { store, retriever, judge, paragraphs }
}
