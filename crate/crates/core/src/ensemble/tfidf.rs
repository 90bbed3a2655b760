use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::linear::{LinearHyperparams, SparseMatrix};
use super::meta::{model_seed, predict_meta, train_meta, Transformation};
use super::EnsembleError;
use crate::corpus::{Fold, LabelVector};

/// Lowercases, drops punctuation and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Smoothed TF-IDF with a sorted vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "StoredVectorizer", into = "StoredVectorizer")]
pub struct TfidfVectorizer {
    vocabulary: Vec<String>,
    idf: Vec<f64>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct StoredVectorizer {
    vocabulary: Vec<String>,
    idf: Vec<f64>,
}

impl From<StoredVectorizer> for TfidfVectorizer {
    fn from(s: StoredVectorizer) -> Self {
        let index = s.vocabulary.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            vocabulary: s.vocabulary,
            idf: s.idf,
            index,
        }
    }
}

impl From<TfidfVectorizer> for StoredVectorizer {
    fn from(v: TfidfVectorizer) -> Self {
        Self {
            vocabulary: v.vocabulary,
            idf: v.idf,
        }
    }
}

impl TfidfVectorizer {
    /// Learns vocabulary and `idf = ln((1 + N) / (1 + df)) + 1`.
    pub fn fit<S: AsRef<str>>(texts: &[S]) -> Result<Self, EnsembleError> {
        if texts.is_empty() {
            return Err(EnsembleError::Empty);
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            let mut terms = tokenize(text.as_ref());
            terms.sort();
            terms.dedup();
            for t in terms {
                *df.entry(t).or_default() += 1;
            }
        }
        if df.is_empty() {
            return Err(EnsembleError::EmptyVocabulary);
        }
        let n = texts.len() as f64;
        let (vocabulary, idf): (Vec<String>, Vec<f64>) = df
            .into_iter()
            .map(|(t, d)| (t, ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0))
            .unzip();
        Ok(StoredVectorizer { vocabulary, idf }.into())
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn idf_of(&self, term: &str) -> Option<f64> {
        self.index.get(term).map(|&i| self.idf[i])
    }

    /// Raw counts times idf, L2-normalized per row. Unknown terms are ignored.
    pub fn transform<S: AsRef<str>>(&self, texts: &[S]) -> SparseMatrix {
        let rows = texts
            .iter()
            .map(|text| {
                let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
                for t in tokenize(text.as_ref()) {
                    if let Some(&i) = self.index.get(&t) {
                        *counts.entry(i).or_default() += 1.0;
                    }
                }
                let mut row: Vec<(usize, f64)> = counts.into_iter().map(|(i, c)| (i, c * self.idf[i])).collect();
                let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.iter_mut().for_each(|(_, v)| *v /= norm);
                }
                row
            })
            .collect();
        SparseMatrix::new(self.vocabulary.len(), rows)
    }
}

pub fn tfidf_fit_transform<S: AsRef<str>>(texts: &[S]) -> Result<(TfidfVectorizer, SparseMatrix), EnsembleError> {
    let v = TfidfVectorizer::fit(texts)?;
    let m = v.transform(texts);
    Ok((v, m))
}

pub fn tfidf_transform<S: AsRef<str>>(vectorizer: &TfidfVectorizer, texts: &[S]) -> SparseMatrix {
    vectorizer.transform(texts)
}

/// Out-of-fold predictions of the TF-IDF + binary-relevance baseline.
///
/// The vectorizer is refit on each fold's training texts only.
pub fn tfidf_cross_val_predict<S: AsRef<str>>(
    texts: &[S],
    y: &[LabelVector],
    folds: &[Fold],
    hp: &LinearHyperparams,
) -> Result<Vec<LabelVector>, EnsembleError> {
    if texts.len() != y.len() {
        return Err(EnsembleError::RowMismatch {
            x: texts.len(),
            y: y.len(),
        });
    }
    let n_labels = y.first().map_or(0, LabelVector::len);
    let mut out = vec![LabelVector::zeros(n_labels); y.len()];
    for (f, fold) in folds.iter().enumerate() {
        let train_texts: Vec<&str> = fold.train.iter().map(|&i| texts[i].as_ref()).collect();
        let train_y: Vec<LabelVector> = fold.train.iter().map(|&i| y[i].clone()).collect();
        let (vectorizer, x) = tfidf_fit_transform(&train_texts)?;
        let fold_hp = LinearHyperparams {
            seed: model_seed(hp.seed, 1000 + f),
            ..*hp
        };
        let model = train_meta(&x, &train_y, &Transformation::BinaryRelevance, &fold_hp)?;
        let held_out: Vec<&str> = fold.validation.iter().map(|&i| texts[i].as_ref()).collect();
        let preds = predict_meta(&model, &vectorizer.transform(&held_out))?;
        for (&i, p) in fold.validation.iter().zip(preds) {
            out[i] = p;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idf_formula() {
        let (v, m) = tfidf_fit_transform(&["a b", "a c"]).unwrap();
        assert_eq!(v.vocabulary(), ["a", "b", "c"]);
        assert_eq!(v.idf_of("a"), Some(1.0));
        let rare = (3.0f64 / 2.0).ln() + 1.0;
        assert!((v.idf_of("b").unwrap() - rare).abs() < 1e-15);
        let norm = rare.hypot(1.0);
        assert_eq!(m.rows[0], vec![(0, 1.0 / norm), (1, rare / norm)]);
    }

    #[test]
    fn rows_are_unit_length_and_oov_ignored() {
        let (v, m) = tfidf_fit_transform(&["Tumor, tumor growth!"]).unwrap();
        let n: f64 = m.rows[0].iter().map(|(_, x)| x * x).sum();
        assert!((n - 1.0).abs() < 1e-12);
        let t = v.transform(&["unseen words only", "growth unseen"]);
        assert!(t.rows[0].is_empty());
        assert_eq!(t.rows[1], vec![(0, 1.0)]);
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        assert!(matches!(TfidfVectorizer::fit(&["!!", "..."]), Err(EnsembleError::EmptyVocabulary)));
        let v = TfidfVectorizer::fit(&["x y"]).unwrap();
        let back: TfidfVectorizer = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back, v);
    }
}
