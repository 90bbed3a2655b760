#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use quadmltc::corpus::{Document, LabelVector, Taxonomy};
use quadmltc::prompts::{PromptBuilder, PromptTemplates};
use quadmltc::providers::{KeyTokens, Paraphrases};

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> PathBuf {
    manifest_dir().join("fixtures").join(name)
}

pub fn golden_path(name: &str) -> PathBuf {
    manifest_dir().join("tests/golden").join(name)
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn golden_batch() -> Vec<Document> {
    vec![
        Document {
            id: "g1".into(),
            text: "Knockdown of BCL2 restored apoptosis in resistant tumor cells.".into(),
            gold: None,
        },
        Document {
            id: "g2".into(),
            text: "VEGF secretion drove angiogenesis and \"invasive\" growth in vivo.".into(),
            gold: None,
        },
    ]
}

pub fn golden_exemplars() -> Vec<Document> {
    vec![
        Document {
            id: "x1".into(),
            text: "Telomerase activity enabled unlimited replication.".into(),
            gold: Some(LabelVector::from_indices(10, &[7])),
        },
        Document {
            id: "x2".into(),
            text: "Hypoxia shifted cells toward glycolysis.".into(),
            gold: Some(LabelVector::from_indices(10, &[9, 5])),
        },
        Document {
            id: "x3".into(),
            text: "No hallmark is described here.".into(),
            gold: Some(LabelVector::zeros(10)),
        },
    ]
}

fn golden_tokens(batch: &[Document]) -> HashMap<String, KeyTokens> {
    let picks = [vec!["apoptosis", "bcl2", "resistant"], vec!["angiogenesis", "vegf", "invasive"]];
    batch
        .iter()
        .zip(picks)
        .map(|(d, p)| {
            let tokens = p.into_iter().map(String::from).collect();
            (d.id.clone(), KeyTokens::new(&d.text, tokens).expect("valid key tokens"))
        })
        .collect()
}

fn golden_paraphrases(batch: &[Document]) -> HashMap<String, Paraphrases> {
    batch
        .iter()
        .map(|d| {
            let p = Paraphrases::new(vec![format!("Put differently: {}", d.text), format!("In short, {}", d.text)])
                .expect("two variations");
            (d.id.clone(), p)
        })
        .collect()
}

/// `(file name, rendered prompt)` for every golden prompt.
pub fn golden_prompts() -> Vec<(&'static str, String)> {
    let taxonomy = Taxonomy::hallmarks();
    let templates = PromptTemplates::default();
    let builder = PromptBuilder::new(&taxonomy, &templates);
    let batch = golden_batch();
    let tokens = golden_tokens(&batch);
    let paraphrases = golden_paraphrases(&batch);
    vec![
        ("channel1.txt", builder.base(&batch).unwrap().prompt),
        ("channel2.txt", builder.key_tokens(&batch, &tokens).unwrap().prompt),
        ("channel3.txt", builder.augmented(&batch, &tokens, &paraphrases).unwrap().prompt),
        ("fewshot3.txt", builder.few_shot(&batch, &golden_exemplars(), 3).unwrap().prompt),
    ]
}
