//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use quadmltc::corpus::{load_corpus, stratified_kfold_indices, stratified_sample, Document, LabelVector, Taxonomy, Topic};
use quadmltc::ensemble::{
    cross_val_predict, grid_select, hard_vote, LinearHyperparams, LossKind, SparseMatrix, TransformationKind,
};
use quadmltc::harness::{run_chat_channel, ChannelContext, Harness, RunConfig, RunOptions};
use quadmltc::metrics::{auc, confusion, example_based_f1, f1_from_counts, micro_f1, weighted_f1, ConfusionCounts, MetricsReport};
use quadmltc::postprocess::{assemble_features, ChannelOutput, FeatureMatrix, ProbabilityTable, Source};
use quadmltc::prompts::PromptTemplates;
use quadmltc::providers::{ChatProvider, ChatResponse, ProbabilityVector, ProviderError};
use quadmltc::stats::distributions::{f_cdf, student_t_cdf};
use quadmltc::stats::{anova, descriptives, t_test, FStatistic, ReplicationSet, StatsReport, TTestKind};
use quadmltc::synthetic::{chain_dependency, complementary_channels};

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// Brute-force metric oracle, written from the definitions without reusing library code.

fn oracle_label_f1(pred: &[Vec<bool>], gold: &[Vec<bool>], j: usize) -> f64 {
    let tp = (0..pred.len()).filter(|&i| pred[i][j] && gold[i][j]).count() as f64;
    let fp = (0..pred.len()).filter(|&i| pred[i][j] && !gold[i][j]).count() as f64;
    let fn_ = (0..pred.len()).filter(|&i| !pred[i][j] && gold[i][j]).count() as f64;
    if tp + fp + fn_ == 0.0 {
        return 1.0;
    }
    if tp == 0.0 {
        return 0.0;
    }
    let p = tp / (tp + fp);
    let r = tp / (tp + fn_);
    2.0 * p * r / (p + r)
}

fn oracle_example_f1(pred: &[Vec<bool>], gold: &[Vec<bool>]) -> f64 {
    let mut total = 0.0;
    for (p, g) in pred.iter().zip(gold) {
        let ps: HashSet<usize> = (0..p.len()).filter(|&j| p[j]).collect();
        let gs: HashSet<usize> = (0..g.len()).filter(|&j| g[j]).collect();
        total += if ps.is_empty() && gs.is_empty() {
            1.0
        } else {
            2.0 * ps.intersection(&gs).count() as f64 / (ps.len() + gs.len()) as f64
        };
    }
    total / pred.len() as f64
}

fn oracle_micro_f1(pred: &[Vec<bool>], gold: &[Vec<bool>]) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    for (p, g) in pred.iter().zip(gold) {
        for j in 0..p.len() {
            match (p[j], g[j]) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fn_ += 1.0,
                _ => {}
            }
        }
    }
    if tp + fp + fn_ == 0.0 {
        1.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}

fn oracle_auc(scores: &[f64], gold: &[bool]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &gi) in gold.iter().enumerate() {
        for (k, &gk) in gold.iter().enumerate() {
            if gi && !gk {
                pairs += 1.0;
                if scores[i] > scores[k] {
                    wins += 1.0;
                } else if scores[i] == scores[k] {
                    wins += 0.5;
                }
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

fn taxonomy_of(n: usize) -> Taxonomy {
    Taxonomy::new(
        (0..n)
            .map(|j| Topic {
                name: format!("Topic {j}"),
                definition: String::new(),
                instruction: String::new(),
            })
            .collect(),
    )
    .unwrap()
}

fn metric_oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let n = rng.gen_range(1..=8);
        let l = rng.gen_range(1..=4);
        let bits = |rng: &mut ChaCha8Rng| -> Vec<Vec<bool>> {
            (0..n).map(|_| (0..l).map(|_| rng.gen_bool(0.45)).collect()).collect()
        };
        let pred = bits(&mut rng);
        let gold = bits(&mut rng);
        // Coarse scores so ties occur.
        let scores: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..l).map(|_| f64::from(rng.gen_range(0..5u8)) / 4.0).collect())
            .collect();
        let lv = |m: &[Vec<bool>]| -> Vec<LabelVector> { m.iter().map(|r| LabelVector::from_bools(r.clone())).collect() };
        let report = MetricsReport::compute(&taxonomy_of(l), &lv(&pred), &lv(&gold), Some(&scores)).map_err(|e| e.to_string())?;

        let f1s: Vec<f64> = (0..l).map(|j| oracle_label_f1(&pred, &gold, j)).collect();
        let supports: Vec<f64> = (0..l).map(|j| gold.iter().filter(|g| g[j]).count() as f64).collect();
        let total: f64 = supports.iter().sum();
        let macro_ = f1s.iter().sum::<f64>() / l as f64;
        let weighted = if total == 0.0 {
            macro_
        } else {
            f1s.iter().zip(&supports).map(|(f, s)| f * s).sum::<f64>() / total
        };
        let checks = [
            ("example", report.example_f1, oracle_example_f1(&pred, &gold)),
            ("micro", report.micro_f1, oracle_micro_f1(&pred, &gold)),
            ("macro", report.macro_f1, macro_),
            ("weighted", report.weighted_f1, weighted),
        ];
        for (name, got, want) in checks {
            ensure!(close(got, want, 1e-12), "case {case}: {name} F1 {got} vs oracle {want}");
        }
        for j in 0..l {
            let lm = &report.per_label[j];
            ensure!(close(lm.f1, f1s[j], 1e-12), "case {case}: label {j} F1 {} vs {}", lm.f1, f1s[j]);
            let column: Vec<f64> = scores.iter().map(|r| r[j]).collect();
            let truth: Vec<bool> = gold.iter().map(|g| g[j]).collect();
            match (lm.auc, oracle_auc(&column, &truth)) {
                (None, None) => {}
                (Some(a), Some(b)) if close(a, b, 1e-12) => {}
                (a, b) => return Err(format!("case {case}: label {j} AUC {a:?} vs oracle {b:?}")),
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    ensure!(elapsed < 5.0, "took {elapsed:.2}s");
    Ok(())
}

fn metric_hand_cases() -> Outcome {
    let lv = |b: &[u8]| LabelVector::from_ints(b).unwrap();
    let col = |b: &[u8]| b.iter().map(|&x| lv(&[x])).collect::<Vec<_>>();
    let c = confusion(&col(&[1, 1, 0]), &col(&[1, 0, 1])).map_err(|e| e.to_string())?[0];
    ensure!(c == ConfusionCounts { tp: 1, fp: 1, fn_: 1, tn: 0 }, "confusion {c:?}");

    let c = ConfusionCounts { tp: 2, fp: 1, fn_: 1, tn: 0 };
    ensure!(c.precision() == Some(2.0 / 3.0), "precision {:?}", c.precision());
    ensure!(c.recall() == Some(2.0 / 3.0), "recall {:?}", c.recall());
    ensure!(f1_from_counts(&c) == 2.0 / 3.0, "F1 {}", f1_from_counts(&c));

    // gold {A,B}, pred {B,C}
    let ex = example_based_f1(&[lv(&[0, 1, 1])], &[lv(&[1, 1, 0])]).map_err(|e| e.to_string())?;
    ensure!(ex == 0.5, "example F1 {ex}");

    let pooled = [ConfusionCounts { tp: 1, fp: 1, fn_: 0, tn: 0 }, ConfusionCounts { tp: 1, fp: 0, fn_: 1, tn: 0 }];
    ensure!(micro_f1(&pooled) == 2.0 / 3.0, "micro F1 {}", micro_f1(&pooled));

    let w = weighted_f1(&[1.0, 0.5], &[3, 1]);
    ensure!(w == 0.875, "weighted F1 {w}");

    let a = auc(&[0.9, 0.2, 0.8, 0.3], &[true, false, false, true]);
    ensure!(a == Some(0.75), "AUC {a:?}");
    Ok(())
}

fn mock_config(dir: &Path, corpus: &Path, sizes: Vec<usize>, seed: u64) -> RunConfig {
    let mut c = RunConfig::new(corpus);
    c.sample_sizes = sizes;
    c.seed = seed;
    c.output_dir = dir.to_path_buf();
    c
}

fn run_mock_pipeline(dir: &Path, seed: u64) -> Result<Harness, String> {
    let config = mock_config(dir, &common::fixture("hoc_synthetic_100.jsonl"), vec![100], seed);
    let err = |e: quadmltc::harness::HarnessError| e.to_string();
    let mut h = Harness::open(config, RunOptions { mock: true, ..Default::default() }).map_err(err)?;
    h.sample().map_err(err)?;
    for s in [Source::Channel1, Source::Channel2, Source::Channel3, Source::Bart] {
        h.classify(s).map_err(err)?;
    }
    h.features().map_err(err)?;
    h.train_meta(true).map_err(err)?;
    h.predict(None).map_err(err)?;
    h.evaluate().map_err(err)?;
    h.ablate().map_err(err)?;
    h.replicate(3).map_err(err)?;
    h.stats().map_err(err)?;
    Ok(h)
}

fn feature_contract() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = run_mock_pipeline(a.path(), 11)?;
    let second = run_mock_pipeline(b.path(), 11)?;

    let m = FeatureMatrix::read(&a.path().join("features/features.csv")).map_err(|e| e.to_string())?;
    ensure!(m.values.ncols() == 40, "width {}", m.values.ncols());
    ensure!(m.values.nrows() + m.excluded.len() == 100, "rows {} + excluded {}", m.values.nrows(), m.excluded.len());
    for row in m.values.rows() {
        ensure!(row.iter().take(30).all(|&v| v == 0.0 || v == 1.0), "non-binary channel flag");
        ensure!(row.iter().skip(30).all(|&v| (0.0..=1.0).contains(&v)), "probability out of range");
    }
    let digests = |h: &Harness| -> BTreeMap<String, String> {
        h.manifest().artifacts.iter().map(|(k, r)| (k.clone(), r.sha256.clone())).collect()
    };
    let (da, db) = (digests(&first), digests(&second));
    ensure!(da.len() >= 20, "only {} artifacts recorded", da.len());
    ensure!(da == db, "artifact digests differ between identical runs");
    Ok(())
}

fn hard_voting_truth_table() -> Outcome {
    let n_labels = 10;
    let combos: Vec<[bool; 3]> = (0..8u8).map(|k| [k & 1 != 0, k & 2 != 0, k & 4 != 0]).collect();
    let ids: Vec<String> = (0..8).map(|i| format!("v{i}")).collect();
    // Document i carries combination (i + j) mod 8 on label j, so every label sees all eight.
    let channel = |c: usize, source: Source| {
        let labels = ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let flags = (0..n_labels).map(|j| combos[(i + j) % 8][c]).collect();
                (id.clone(), LabelVector::from_bools(flags))
            })
            .collect();
        ChannelOutput::new(source, labels, Vec::new())
    };
    let vote = hard_vote(
        &channel(0, Source::Channel1),
        &channel(1, Source::Channel2),
        &channel(2, Source::Channel3),
    )
    .map_err(|e| e.to_string())?;
    for (i, id) in ids.iter().enumerate() {
        let got = vote.get(id).ok_or(format!("{id} missing"))?;
        for j in 0..n_labels {
            let combo = combos[(i + j) % 8];
            let majority = combo.iter().filter(|&&b| b).count() >= 2;
            ensure!(got.get(j) == majority, "{id} label {j}: combination {combo:?} voted {}", got.get(j));
        }
    }
    Ok(())
}

fn stacking_beats_channels() -> Outcome {
    let data = complementary_channels(500, 11);
    let [c1, c2, c3] = &data.channels;
    let m = assemble_features(c1, c2, c3, &data.probabilities).map_err(|e| e.to_string())?;
    let x = SparseMatrix::from_dense(m.values.view());
    let ids: Vec<&str> = data.ids.iter().map(String::as_str).collect();
    let folds = stratified_kfold_indices(&data.gold, &ids, 5, 11).map_err(|e| e.to_string())?;
    let hp = LinearHyperparams::default();
    let stacked = cross_val_predict(&x, &data.gold, &folds, &TransformationKind::ClassifierChains.with_labels(10), &hp)
        .map_err(|e| e.to_string())?;
    let stacked_f1 = example_based_f1(&stacked, &data.gold).map_err(|e| e.to_string())?;
    for c in &data.channels {
        let pred: Vec<LabelVector> = c.labels.iter().map(|(_, l)| l.clone()).collect();
        let f1 = example_based_f1(&pred, &data.gold).map_err(|e| e.to_string())?;
        ensure!(
            stacked_f1 >= f1 + 0.05,
            "stacked {stacked_f1:.4} does not beat {} {f1:.4} by 5 points",
            c.source
        );
    }
    Ok(())
}

fn chain_dependency_separation() -> Outcome {
    let mut winners = Vec::new();
    for seed in [7, 8] {
        let d = chain_dependency(40, seed);
        let x = SparseMatrix::from_dense(d.features.view());
        let ids: Vec<&str> = d.ids.iter().map(String::as_str).collect();
        let folds = stratified_kfold_indices(&d.gold, &ids, 5, seed).map_err(|e| e.to_string())?;
        let hp = LinearHyperparams::default();
        let label_b_f1 = |kind: TransformationKind| -> Result<f64, String> {
            let pred = cross_val_predict(&x, &d.gold, &folds, &kind.with_labels(10), &hp).map_err(|e| e.to_string())?;
            let counts = confusion(&pred, &d.gold).map_err(|e| e.to_string())?;
            Ok(f1_from_counts(&counts[1]))
        };
        let cc = label_b_f1(TransformationKind::ClassifierChains)?;
        let br = label_b_f1(TransformationKind::BinaryRelevance)?;
        ensure!(cc >= 0.99, "seed {seed}: chains label-B F1 {cc:.4}");
        ensure!(br <= 0.6, "seed {seed}: binary relevance label-B F1 {br:.4}");
        let grid = grid_select(&x, &d.gold, &[LossKind::Hinge, LossKind::Logistic], &TransformationKind::ALL, &folds, &hp)
            .map_err(|e| e.to_string())?;
        let best = grid.best();
        ensure!(
            best.transformation == TransformationKind::ClassifierChains,
            "seed {seed}: grid ranked {} first",
            best.transformation
        );
        let first_br = grid
            .cells
            .iter()
            .position(|c| c.transformation == TransformationKind::BinaryRelevance)
            .unwrap_or(usize::MAX);
        ensure!(first_br > 0, "seed {seed}: binary relevance outranks chains");
        winners.push((best.loss, best.transformation));
    }
    ensure!(winners[0] == winners[1], "winning cell changed with the seed: {winners:?}");
    Ok(())
}

fn proportions(gold: &[LabelVector]) -> Vec<f64> {
    let n = gold.len() as f64;
    (0..gold[0].len())
        .map(|j| gold.iter().filter(|g| g.get(j)).count() as f64 / n)
        .collect()
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn stratification() -> Outcome {
    let parent = load_corpus(common::fixture("hoc_synthetic_1499.jsonl"), Arc::new(Taxonomy::hallmarks()))
        .map_err(|e| e.to_string())?;
    ensure!(parent.len() == 1499, "parent has {} documents", parent.len());
    let parent_gold = parent.golds().map_err(|e| e.to_string())?;
    let parent_p = proportions(&parent_gold);
    for size in [300, 500, 1000] {
        let sample = stratified_sample(&parent, size, 42).map_err(|e| e.to_string())?;
        ensure!(sample.len() == size, "sample of {size} has {} documents", sample.len());
        let gold = sample.golds().map_err(|e| e.to_string())?;
        let gap = max_gap(&proportions(&gold), &parent_p);
        ensure!(gap <= 0.02, "sample {size}: proportion gap {:.2} pp", 100.0 * gap);

        let ids: Vec<String> = sample.ids();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let sample_p = proportions(&gold);
        for (f, fold) in stratified_kfold_indices(&gold, &refs, 5, 42).map_err(|e| e.to_string())?.iter().enumerate() {
            let part: Vec<LabelVector> = fold.validation.iter().map(|&i| gold[i].clone()).collect();
            let gap = max_gap(&proportions(&part), &sample_p);
            ensure!(gap <= 0.05, "sample {size} fold {f}: proportion gap {:.2} pp", 100.0 * gap);
        }
    }
    Ok(())
}

const T_CDF: [(f64, f64, f64); 14] = [
    (-3.5, 2.0, 0.036413675027234667714),
    (-2.0, 4.0, 0.058058261758407797249),
    (-1.0, 1.0, 0.25),
    (-0.5, 7.5, 0.3157054823112272023),
    (0.0, 3.0, 0.5),
    (0.3, 10.0, 0.6148396962171006936),
    (1.0, 1.0, 0.75),
    (1.5, 5.0, 0.90304815987876328393),
    (2.0, 8.0, 0.95974188102136866433),
    (2.776, 4.0, 0.97498861084001179389),
    (4.0, 30.0, 0.99980907718195812158),
    (8.25, 8.0, 0.99998251571816057139),
    (-6.14, 8.0, 0.00013850828865099172828),
    (12.0, 2.5, 0.99858189248496083809),
];

const F_CDF: [(f64, f64, f64, f64); 6] = [
    (0.5, 2.0, 12.0, 0.38137514867482844256),
    (1.0, 3.0, 7.0, 0.55292038653151644052),
    (2.5, 4.0, 20.0, 0.9248533703647253411),
    (4.0, 2.0, 3.0, 0.8575728269453381324),
    (10.0, 7.0, 32.0, 0.99999853439553494505),
    (0.1, 5.0, 5.0, 0.012241916531069725509),
];

fn statistics() -> Outcome {
    let set = |name: &str, v: &[f64]| ReplicationSet::new(name, v.to_vec());
    let err = |e: quadmltc::stats::StatsError| e.to_string();
    let tol = 1e-9;

    let d = descriptives(&set("a", &[1.0, 2.0, 3.0])).map_err(err)?;
    ensure!(d.mean == 2.0 && d.std == Some(1.0), "descriptives [1,2,3]: {d:?}");
    let d = descriptives(&set("bart", &[0.2887; 5])).map_err(err)?;
    ensure!(d.mean == 0.2887 && d.std == Some(0.0) && d.ci95.is_none(), "constant set: {d:?}");
    let d = descriptives(&set("a", &[0.7912, 0.8034, 0.7788, 0.7975, 0.8101])).map_err(err)?;
    let ci = d.ci95.ok_or("CI missing")?;
    ensure!(close(d.mean, 0.7962, tol), "mean {}", d.mean);
    ensure!(close(d.std.unwrap(), 0.011984364814206878, tol), "std {:?}", d.std);
    ensure!(close(ci.lower, 0.7813194456688594, tol) && close(ci.upper, 0.8110805543311407, tol), "CI {ci:?}");

    let a = set("a", &[0.7912, 0.8034, 0.7788, 0.7975, 0.8101]);
    let b = set("b", &[0.7366, 0.7412, 0.7290, 0.7501, 0.7333]);
    let welch = t_test(&a, &b, TTestKind::Welch).map_err(err)?;
    ensure!(close(welch.statistic, 8.994693965676824, tol), "Welch t {}", welch.statistic);
    ensure!(close(welch.df, 7.017909619158738, tol), "Welch df {}", welch.df);
    ensure!(close(welch.p_value, 4.2162415144599965e-05, tol), "Welch p {}", welch.p_value);
    let pooled = t_test(&a, &b, TTestKind::Pooled).map_err(err)?;
    ensure!(close(pooled.statistic, 8.994693965676824, tol), "pooled t {}", pooled.statistic);
    ensure!(close(pooled.p_value, 1.8611698453220487e-05, tol), "pooled p {}", pooled.p_value);

    let hand = t_test(&set("a", &[2.0, 4.0, 6.0]), &set("b", &[1.0, 3.0, 5.0]), TTestKind::Pooled).map_err(err)?;
    ensure!(close(hand.statistic, 1.0 / (2.0 * (2.0f64 / 3.0).sqrt()), tol), "hand t {}", hand.statistic);
    ensure!(hand.df == 4.0, "hand df {}", hand.df);
    ensure!(close(hand.p_value, 0.5733922538253555, tol), "hand p {}", hand.p_value);
    let same = t_test(&set("a", &[1.0, 2.0, 3.0]), &set("b", &[1.0, 2.0, 3.0]), TTestKind::Welch).map_err(err)?;
    ensure!(same.statistic == 0.0 && close(same.p_value, 1.0, tol), "identical samples {same:?}");
    ensure!(t_test(&set("a", &[0.0; 3]), &set("b", &[0.0; 3]), TTestKind::Welch).is_err(), "zero variance accepted");

    let r = anova(&[set("a", &[1.0, 2.0]), set("b", &[2.0, 3.0]), set("c", &[3.0, 4.0])]).map_err(err)?;
    ensure!(close(r.ss_between, 4.0, tol) && close(r.ss_within, 1.5, tol), "sums of squares {r:?}");
    ensure!(close(r.f.value(), 4.0, tol), "F {}", r.f);
    ensure!(close(r.eta_squared, 8.0 / 11.0, tol), "eta² {}", r.eta_squared);
    ensure!(close(r.p_value, 0.14242717305466185, tol), "ANOVA p {}", r.p_value);
    let r = anova(&[set("a", &[1.0, 1.0]), set("b", &[2.0, 2.0]), set("c", &[3.0, 3.0])]).map_err(err)?;
    ensure!(r.eta_squared == 1.0 && r.f == FStatistic::PosInfinity, "zero within-variance {r:?}");
    let r = anova(&[set("a", &[1.0, 2.0]), set("b", &[1.0, 2.0])]).map_err(err)?;
    ensure!(r.f.value() == 0.0 && r.eta_squared == 0.0, "identical groups {r:?}");

    let report = StatsReport::build(&[set("stacked", &[0.5, 0.6, 0.55]), set("bart", &[0.2887; 3])], "stacked", TTestKind::Welch)
        .map_err(err)?;
    let row = report
        .to_markdown()
        .lines()
        .find(|l| l.starts_with("| bart |"))
        .map(str::to_owned)
        .ok_or("bart row missing")?;
    ensure!(row.trim_end().ends_with("| - | - |"), "zero-std row shows a CI: {row}");

    for (t, df, want) in T_CDF {
        let got = student_t_cdf(t, df);
        ensure!(close(got, want, 1e-6), "t CDF({t}, {df}) = {got}, oracle {want}");
    }
    for (f, d1, d2, want) in F_CDF {
        let got = f_cdf(f, d1, d2);
        ensure!(close(got, want, 1e-6), "F CDF({f}, {d1}, {d2}) = {got}, oracle {want}");
    }
    Ok(())
}

fn prompt_fidelity() -> Outcome {
    let prompts = common::golden_prompts();
    for (name, prompt) in &prompts {
        let golden = common::read(&common::golden_path(name));
        ensure!(*prompt == golden, "{name} differs from its golden file");
    }
    let clauses = [
        ("channel1.txt", "You are a healthcare expert"),
        ("channel2.txt", "The keywords in this text are"),
        ("channel3.txt", "two variations of the input text"),
    ];
    for (name, clause) in clauses {
        let golden = common::read(&common::golden_path(name));
        ensure!(golden.contains(clause), "{name} lacks {clause:?}");
        ensure!(golden.contains("You are a healthcare expert"), "{name} lacks the base instruction");
    }
    Ok(())
}

#[derive(Deserialize)]
struct ParseFixture {
    batch_size: usize,
    documents: Vec<FixtureDoc>,
    replies: Vec<String>,
    expected: ParseExpectation,
}

#[derive(Deserialize)]
struct FixtureDoc {
    id: String,
    text: String,
}

#[derive(Deserialize)]
struct ParseExpectation {
    classified: Vec<String>,
    unclassified: Vec<String>,
    attempts: Vec<usize>,
    chat_calls: usize,
    unmatched: Vec<(String, String)>,
}

struct ScriptedChat {
    replies: Mutex<Vec<String>>,
    calls: Mutex<usize>,
}

impl ChatProvider for ScriptedChat {
    fn complete(&self, _prompt: &str) -> Result<ChatResponse, ProviderError> {
        *self.calls.lock().unwrap() += 1;
        let mut replies = self.replies.lock().unwrap();
        if replies.is_empty() {
            return Err(ProviderError::InvalidResponse("script exhausted".into()));
        }
        Ok(ChatResponse {
            text: replies.remove(0),
            finish_reason: Some("stop".into()),
        })
    }
}

fn robust_parsing() -> Outcome {
    let raw = common::read(&common::manifest_dir().join("tests/fixtures/parse_failures.json"));
    let fixture: ParseFixture = serde_json::from_str(&raw).map_err(|e| e.to_string())?;
    let documents: Vec<Document> = fixture
        .documents
        .iter()
        .map(|d| Document {
            id: d.id.clone(),
            text: d.text.clone(),
            gold: None,
        })
        .collect();
    let chat = ScriptedChat {
        replies: Mutex::new(fixture.replies.clone()),
        calls: Mutex::new(0),
    };
    let taxonomy = Taxonomy::hallmarks();
    let templates = PromptTemplates::default();
    let ctx = ChannelContext {
        taxonomy: &taxonomy,
        templates: &templates,
        chat: &chat,
        sidecar: None,
        exemplars: &[],
        batch_size: fixture.batch_size,
    };
    let run = run_chat_channel(Source::Channel1, &documents, &ctx).map_err(|e| e.to_string())?;
    let e = &fixture.expected;
    let classified: Vec<String> = run.output.labels.iter().map(|(id, _)| id.clone()).collect();
    ensure!(classified == e.classified, "classified {classified:?}");
    ensure!(run.output.unclassified == e.unclassified, "unclassified {:?}", run.output.unclassified);
    let attempts: Vec<usize> = run.log.batches.iter().map(|b| b.attempts).collect();
    ensure!(attempts == e.attempts, "attempts {attempts:?}");
    let calls = *chat.calls.lock().unwrap();
    ensure!(calls == e.chat_calls, "chat calls {calls}");
    let unmatched: Vec<(String, String)> = run.output.unmatched.iter().map(|u| (u.id.clone(), u.topic.clone())).collect();
    ensure!(unmatched == e.unmatched, "unmatched {unmatched:?}");
    ensure!(
        run.output.labels.len() + run.output.unclassified.len() == documents.len(),
        "documents lost from the accounting"
    );

    // The excluded documents drop out of the feature matrix and are named there.
    let complete = |source: Source| {
        ChannelOutput::new(
            source,
            documents.iter().map(|d| (d.id.clone(), LabelVector::zeros(10))).collect(),
            Vec::new(),
        )
    };
    let probs = ProbabilityTable {
        rows: documents
            .iter()
            .map(|d| (d.id.clone(), ProbabilityVector::new(vec![0.5; 10], 10).unwrap()))
            .collect(),
        unavailable: Vec::new(),
    };
    let m = assemble_features(&run.output, &complete(Source::Channel2), &complete(Source::Channel3), &probs)
        .map_err(|e| e.to_string())?;
    let excluded: Vec<String> = m.excluded.iter().map(|x| x.id.clone()).collect();
    ensure!(m.ids == e.classified, "feature rows {:?}", m.ids);
    ensure!(excluded == e.unclassified, "exclusions {excluded:?}");
    Ok(())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("metric oracle equivalence", metric_oracle_equivalence),
        ("metric hand cases", metric_hand_cases),
        ("feature contract", feature_contract),
        ("hard voting truth table", hard_voting_truth_table),
        ("stacking beats channels", stacking_beats_channels),
        ("chain-dependency separation", chain_dependency_separation),
        ("stratification", stratification),
        ("statistics", statistics),
        ("prompt fidelity", prompt_fidelity),
        ("robust parsing", robust_parsing),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("PASS  {name} ({secs:.2}s)"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name} ({secs:.2}s): {reason}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
