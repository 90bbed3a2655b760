use std::sync::Arc;

use proptest::prelude::*;

use quadmltc::corpus::{stratified_sample, Corpus, Document, LabelVector, Taxonomy};
use quadmltc::ensemble::hard_vote;
use quadmltc::metrics::MetricsReport;
use quadmltc::postprocess::{ChannelOutput, Source};
use quadmltc::prompts::render;
use quadmltc::stats::{t_test, ReplicationSet, TTestKind};

const L: usize = 10;

fn label_vector() -> impl Strategy<Value = LabelVector> {
    prop::collection::vec(any::<bool>(), L).prop_map(LabelVector::from_bools)
}

/// One to three topics per document, as in the corpus.
fn sparse_label_vector() -> impl Strategy<Value = LabelVector> {
    prop::collection::btree_set(0..L, 1..=3).prop_map(|s| LabelVector::from_indices(L, &s.into_iter().collect::<Vec<_>>()))
}

fn scores(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, n).prop_filter("needs spread", |v| {
        v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min) > 1e-6
    })
}

fn kind() -> impl Strategy<Value = TTestKind> {
    prop_oneof![Just(TTestKind::Welch), Just(TTestKind::Pooled)]
}

fn output(source: Source, rows: &[LabelVector]) -> ChannelOutput {
    let labels = rows.iter().enumerate().map(|(i, l)| (format!("d{i}"), l.clone())).collect();
    ChannelOutput::new(source, labels, Vec::new())
}

proptest! {
    #[test]
    fn label_vector_json_round_trip(v in label_vector()) {
        let json = serde_json::to_string(&v).unwrap();
        prop_assert_eq!(serde_json::from_str::<LabelVector>(&json).unwrap(), v);
    }

    #[test]
    fn t_test_is_antisymmetric(a in scores(2..12), b in scores(2..12), kind in kind()) {
        let (x, y) = (ReplicationSet::new("a", a), ReplicationSet::new("b", b));
        let ab = t_test(&x, &y, kind).unwrap();
        let ba = t_test(&y, &x, kind).unwrap();
        prop_assert!((ab.statistic + ba.statistic).abs() < 1e-9);
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-9);
        prop_assert!((ab.df - ba.df).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn t_test_ignores_shift_and_scale(
        a in scores(2..12),
        b in scores(2..12),
        shift in -5.0..5.0f64,
        scale in 0.1..10.0f64,
        kind in kind(),
    ) {
        let base = t_test(&ReplicationSet::new("a", a.clone()), &ReplicationSet::new("b", b.clone()), kind).unwrap();
        let map = |v: &[f64]| v.iter().map(|x| x * scale + shift).collect::<Vec<_>>();
        let moved = t_test(&ReplicationSet::new("a", map(&a)), &ReplicationSet::new("b", map(&b)), kind).unwrap();
        prop_assert!((base.statistic - moved.statistic).abs() < 1e-6 * base.statistic.abs().max(1.0));
        prop_assert!((base.p_value - moved.p_value).abs() < 1e-6);
    }

    #[test]
    fn p_value_shrinks_as_groups_separate(a in scores(3..10), b in scores(3..10), gap in 0.01..2.0f64) {
        let x = ReplicationSet::new("a", a.clone());
        let near: Vec<f64> = b.iter().map(|v| v + gap).collect();
        let far: Vec<f64> = b.iter().map(|v| v + gap + 1.0).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        prop_assume!(mean(&near) > mean(&a));
        let p_near = t_test(&x, &ReplicationSet::new("b", near), TTestKind::Welch).unwrap().p_value;
        let p_far = t_test(&x, &ReplicationSet::new("b", far), TTestKind::Welch).unwrap().p_value;
        prop_assert!(p_far <= p_near + 1e-12);
    }

    #[test]
    fn metrics_stay_in_unit_interval(rows in prop::collection::vec((label_vector(), label_vector()), 1..40)) {
        let (pred, gold): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let r = MetricsReport::compute(&Taxonomy::hallmarks(), &pred, &gold, None).unwrap();
        for v in [r.example_f1, r.micro_f1, r.macro_f1, r.weighted_f1] {
            prop_assert!((0.0..=1.0).contains(&v), "{}", v);
        }
        let perfect = MetricsReport::compute(&Taxonomy::hallmarks(), &gold, &gold, None).unwrap();
        prop_assert_eq!(perfect.example_f1, 1.0);
    }

    #[test]
    fn hard_vote_ignores_channel_order(rows in prop::collection::vec((label_vector(), label_vector(), label_vector()), 1..20)) {
        let a: Vec<_> = rows.iter().map(|r| r.0.clone()).collect();
        let b: Vec<_> = rows.iter().map(|r| r.1.clone()).collect();
        let c: Vec<_> = rows.iter().map(|r| r.2.clone()).collect();
        let (o1, o2, o3) = (output(Source::Channel1, &a), output(Source::Channel2, &b), output(Source::Channel3, &c));
        let abc = hard_vote(&o1, &o2, &o3).unwrap();
        let cab = hard_vote(&o3, &o1, &o2).unwrap();
        let bca = hard_vote(&o2, &o3, &o1).unwrap();
        prop_assert_eq!(&abc.labels, &cab.labels);
        prop_assert_eq!(&abc.labels, &bca.labels);
        let unanimous = hard_vote(&o1, &o1, &o1).unwrap();
        prop_assert_eq!(unanimous.labels, o1.labels);
    }

    #[test]
    fn stratified_sample_has_exact_size_and_tracks_proportions(
        golds in prop::collection::vec(sparse_label_vector(), 20..120),
        fraction in 0.1..0.9f64,
        seed in any::<u64>(),
    ) {
        let taxonomy = Arc::new(Taxonomy::hallmarks());
        let docs: Vec<Document> = golds
            .iter()
            .enumerate()
            .map(|(i, g)| Document { id: format!("d{i}"), text: format!("text {i}"), gold: Some(g.clone()) })
            .collect();
        let corpus = Corpus::new(taxonomy, docs).unwrap();
        let size = ((corpus.len() as f64 * fraction).round() as usize).clamp(1, corpus.len());
        let sample = stratified_sample(&corpus, size, seed).unwrap();
        prop_assert_eq!(sample.len(), size);

        let index = |id: &str| id[1..].parse::<usize>().unwrap();
        let order: Vec<usize> = sample.documents().iter().map(|d| index(&d.id)).collect();
        prop_assert!(order.windows(2).all(|w| w[0] < w[1]));

        let ratio = size as f64 / corpus.len() as f64;
        let deviation: f64 = (0..L)
            .map(|j| {
                let parent = golds.iter().filter(|g| g.get(j)).count() as f64;
                let drawn = sample.documents().iter().filter(|d| d.gold.as_ref().unwrap().get(j)).count() as f64;
                (drawn - parent * ratio).abs()
            })
            .sum::<f64>()
            / L as f64;
        prop_assert!(deviation <= 1.5, "mean per-label deviation {}", deviation);
        prop_assert_eq!(stratified_sample(&corpus, size, seed).unwrap().ids(), sample.ids());
    }

    #[test]
    fn render_never_rescans_substituted_values(value in "[a-z{} ]{0,30}", prefix in "[A-Za-z ]{0,10}") {
        let out = render(&format!("{prefix}{{text}}!"), &[("text", &value), ("other", "X")]).unwrap();
        prop_assert_eq!(out, format!("{prefix}{value}!"));
    }
}
