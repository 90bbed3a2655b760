//! Iterative multi-label stratification.
//!
//! Documents are assigned to subsets with fixed capacities. The label with the
//! fewest unassigned positives is handled first; each of its documents goes to
//! the subset that still wants that label most, ties broken by remaining
//! capacity and then by the seeded RNG. Documents without labels fill the
//! remaining capacity at the end.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Corpus, CorpusError, LabelVector};

/// One cross-validation split, as indices into the source corpus (ascending).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Returns the subset index for each document.
fn iterative_partition(
    labels: &[&LabelVector],
    ids: &[&str],
    capacities: &[usize],
    seed: u64,
) -> Vec<usize> {
    let n = labels.len();
    debug_assert_eq!(capacities.iter().sum::<usize>(), n);
    let n_labels = labels.first().map_or(0, |l| l.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Visit order: ids ascending, then shuffled under the seed.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ids[a].cmp(ids[b]));
    order.shuffle(&mut rng);

    let mut label_counts = vec![0usize; n_labels];
    for l in labels {
        for j in l.ones() {
            label_counts[j] += 1;
        }
    }
    let mut desired: Vec<Vec<f64>> = capacities
        .iter()
        .map(|&c| {
            let ratio = if n == 0 { 0.0 } else { c as f64 / n as f64 };
            label_counts.iter().map(|&d| d as f64 * ratio).collect()
        })
        .collect();
    let mut remaining: Vec<usize> = capacities.to_vec();
    let mut assignment = vec![usize::MAX; n];
    let mut unassigned_per_label = label_counts.clone();

    loop {
        let Some(label) = (0..n_labels)
            .filter(|&j| unassigned_per_label[j] > 0)
            .min_by_key(|&j| (unassigned_per_label[j], j))
        else {
            break;
        };
        for &doc in &order {
            if assignment[doc] != usize::MAX || !labels[doc].get(label) {
                continue;
            }
            let target = choose_subset(&desired, &remaining, label, &mut rng);
            assignment[doc] = target;
            remaining[target] -= 1;
            for j in labels[doc].ones() {
                desired[target][j] -= 1.0;
                unassigned_per_label[j] -= 1;
            }
        }
    }

    for &doc in &order {
        if assignment[doc] == usize::MAX {
            let target = (0..remaining.len())
                .max_by_key(|&k| (remaining[k], std::cmp::Reverse(k)))
                .expect("at least one subset");
            assignment[doc] = target;
            remaining[target] -= 1;
        }
    }
    assignment
}

fn choose_subset(desired: &[Vec<f64>], remaining: &[usize], label: usize, rng: &mut ChaCha8Rng) -> usize {
    let open: Vec<usize> = (0..remaining.len()).filter(|&k| remaining[k] > 0).collect();
    let best_desire = open
        .iter()
        .map(|&k| desired[k][label])
        .fold(f64::NEG_INFINITY, f64::max);
    let by_desire: Vec<usize> = open
        .into_iter()
        .filter(|&k| desired[k][label] == best_desire)
        .collect();
    let best_room = by_desire.iter().map(|&k| remaining[k]).max().unwrap_or(0);
    let tied: Vec<usize> = by_desire
        .into_iter()
        .filter(|&k| remaining[k] == best_room)
        .collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.gen_range(0..tied.len())]
    }
}

/// Draws exactly `size` documents whose per-label proportions follow the parent.
///
/// The returned corpus keeps the parent's document order.
pub fn stratified_sample(corpus: &Corpus, size: usize, seed: u64) -> Result<Corpus, CorpusError> {
    if size == 0 {
        return Err(CorpusError::SizeTooLarge {
            requested: 0,
            available: corpus.len(),
        });
    }
    if size > corpus.len() {
        return Err(CorpusError::SizeTooLarge {
            requested: size,
            available: corpus.len(),
        });
    }
    let golds = corpus.golds()?;
    let refs: Vec<&LabelVector> = golds.iter().collect();
    let ids: Vec<&str> = corpus.documents().iter().map(|d| d.id.as_str()).collect();
    let assignment = iterative_partition(&refs, &ids, &[size, corpus.len() - size], seed);
    let picked: Vec<usize> = (0..corpus.len()).filter(|&i| assignment[i] == 0).collect();
    Ok(corpus.select(&picked))
}

/// Stratified k-fold splits over raw label vectors.
///
/// Fold sizes differ by at most one document.
pub fn stratified_kfold_indices(
    labels: &[LabelVector],
    ids: &[&str],
    k: usize,
    seed: u64,
) -> Result<Vec<Fold>, CorpusError> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(CorpusError::InvalidFolds { k, n });
    }
    let capacities: Vec<usize> = (0..k).map(|f| n / k + usize::from(f < n % k)).collect();
    let refs: Vec<&LabelVector> = labels.iter().collect();
    let assignment = iterative_partition(&refs, ids, &capacities, seed);
    Ok((0..k)
        .map(|f| {
            let (validation, train): (Vec<usize>, Vec<usize>) =
                (0..n).partition(|&i| assignment[i] == f);
            Fold { train, validation }
        })
        .collect())
}

pub fn iterative_stratified_kfold(corpus: &Corpus, k: usize, seed: u64) -> Result<Vec<Fold>, CorpusError> {
    if k > corpus.len() {
        return Err(CorpusError::InvalidFolds { k, n: corpus.len() });
    }
    let golds = corpus.golds()?;
    let ids: Vec<&str> = corpus.documents().iter().map(|d| d.id.as_str()).collect();
    stratified_kfold_indices(&golds, &ids, k, seed)
}
