//! Constructed datasets with known structure, for exercising the meta-classifier.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::LabelVector;
use crate::postprocess::{ChannelOutput, ProbabilityTable, Source};
use crate::providers::ProbabilityVector;

pub const N_LABELS: usize = 10;
pub const N_FEATURES: usize = 4 * N_LABELS;

/// Relative label frequencies, most common first.
pub const LABEL_WEIGHTS: [f64; N_LABELS] = [0.30, 0.24, 0.17, 0.16, 0.13, 0.11, 0.095, 0.07, 0.06, 0.045];

/// A feature matrix with gold labels.
#[derive(Debug, Clone)]
pub struct LabeledMatrix {
    pub ids: Vec<String>,
    pub features: Array2<f64>,
    pub gold: Vec<LabelVector>,
}

fn ids(n: usize, prefix: &str) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}-{i:04}")).collect()
}

/// Label 1 depends on label 0 in a way no linear function of the features captures.
///
/// Columns 0..3 hold three bits `x`. Rows have either no bit set, exactly one
/// bit (label 1, "exactly one"), or exactly two bits (label 0, "at least two"),
/// in proportion 6:3:6 scaled by `per_unit`. Given label 0 as an extra input,
/// label 1 is `x1 + x2 + x3 − 2·label0 ≥ 1/2`. Labels 2..9 copy random binary
/// columns 3..11, so label combinations are too many for a powerset to learn.
pub fn chain_dependency(per_unit: usize, seed: u64) -> LabeledMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut patterns: Vec<[u8; 3]> = Vec::new();
    patterns.extend(std::iter::repeat([0, 0, 0]).take(6 * per_unit));
    for unit in [[1, 0, 0], [0, 1, 0], [0, 0, 1]] {
        patterns.extend(std::iter::repeat(unit).take(per_unit));
    }
    for pair in [[1, 1, 0], [1, 0, 1], [0, 1, 1]] {
        patterns.extend(std::iter::repeat(pair).take(2 * per_unit));
    }
    patterns.shuffle(&mut rng);
    let n = patterns.len();
    let mut features = Array2::zeros((n, N_FEATURES));
    let mut gold = Vec::with_capacity(n);
    for (i, bits) in patterns.iter().enumerate() {
        for (c, &b) in bits.iter().enumerate() {
            features[[i, c]] = f64::from(b);
        }
        for c in 3..3 * N_LABELS {
            features[[i, c]] = f64::from(u8::from(rng.gen_bool(0.35)));
        }
        for c in 3 * N_LABELS..N_FEATURES {
            features[[i, c]] = rng.gen::<f64>();
        }
        let sum: u8 = bits.iter().sum();
        let mut flags = vec![sum >= 2, sum == 1];
        flags.extend((3..3 + N_LABELS - 2).map(|c| features[[i, c]] == 1.0));
        gold.push(LabelVector::from_bools(flags));
    }
    LabeledMatrix {
        ids: ids(n, "chain"),
        features,
        gold,
    }
}

/// Labels copied from channel-1 flags, with the other blocks random.
pub fn identity_task(n: usize, seed: u64) -> LabeledMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Array2::zeros((n, N_FEATURES));
    for i in 0..n {
        for c in 0..3 * N_LABELS {
            features[[i, c]] = f64::from(u8::from(rng.gen_bool(0.3)));
        }
        for c in 3 * N_LABELS..N_FEATURES {
            features[[i, c]] = rng.gen::<f64>();
        }
    }
    let gold = (0..n)
        .map(|i| LabelVector::from_bools((0..N_LABELS).map(|j| features[[i, j]] == 1.0).collect()))
        .collect();
    LabeledMatrix {
        ids: ids(n, "ident"),
        features,
        gold,
    }
}

/// Draws one to three distinct labels, weighted by [`LABEL_WEIGHTS`].
pub fn draw_gold(rng: &mut ChaCha8Rng) -> LabelVector {
    let k = match rng.gen::<f64>() {
        u if u < 0.75 => 1,
        u if u < 0.95 => 2,
        _ => 3,
    };
    let mut chosen = Vec::with_capacity(k);
    while chosen.len() < k {
        let total: f64 = (0..N_LABELS).filter(|j| !chosen.contains(j)).map(|j| LABEL_WEIGHTS[j]).sum();
        let mut u = rng.gen::<f64>() * total;
        for j in (0..N_LABELS).filter(|j| !chosen.contains(j)) {
            u -= LABEL_WEIGHTS[j];
            if u <= 0.0 {
                chosen.push(j);
                break;
            }
        }
        if chosen.len() < k && u > 0.0 {
            // Rounding left a sliver; take the last free label.
            let last = (0..N_LABELS).rev().find(|j| !chosen.contains(j)).expect("free label");
            chosen.push(last);
        }
    }
    LabelVector::from_indices(N_LABELS, &chosen)
}

/// Three channels and a probability table, each reliable on its own label block.
#[derive(Debug, Clone)]
pub struct ComplementaryChannels {
    pub ids: Vec<String>,
    pub gold: Vec<LabelVector>,
    pub channels: [ChannelOutput; 3],
    pub probabilities: ProbabilityTable,
}

/// Label blocks on which channel 1, 2, 3 and the probabilities are reliable.
pub const RELIABLE_BLOCKS: [std::ops::Range<usize>; 4] = [0..3, 3..6, 6..8, 8..10];

/// Each channel copies the gold flags on its reliable block and emits
/// gold-independent noise elsewhere; the probabilities separate gold on
/// labels 8..10 and are uniform noise on the rest.
pub fn complementary_channels(n: usize, seed: u64) -> ComplementaryChannels {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = ids(n, "stack");
    let gold: Vec<LabelVector> = (0..n).map(|_| draw_gold(&mut rng)).collect();
    let sources = [Source::Channel1, Source::Channel2, Source::Channel3];
    let channels = std::array::from_fn(|c| {
        let labels = ids
            .iter()
            .zip(&gold)
            .map(|(id, g)| {
                let flags = (0..N_LABELS)
                    .map(|j| {
                        if RELIABLE_BLOCKS[c].contains(&j) {
                            g.get(j)
                        } else {
                            rng.gen_bool(0.25)
                        }
                    })
                    .collect();
                (id.clone(), LabelVector::from_bools(flags))
            })
            .collect();
        ChannelOutput::new(sources[c], labels, Vec::new())
    });
    let rows = ids
        .iter()
        .zip(&gold)
        .map(|(id, g)| {
            let probs = (0..N_LABELS)
                .map(|j| {
                    let u = rng.gen::<f64>();
                    match (RELIABLE_BLOCKS[3].contains(&j), g.get(j)) {
                        (true, true) => 0.7 + 0.3 * u,
                        (true, false) => 0.3 * u,
                        (false, _) => u,
                    }
                })
                .collect();
            (id.clone(), ProbabilityVector::new(probs, N_LABELS).expect("in range"))
        })
        .collect();
    ComplementaryChannels {
        ids,
        gold,
        channels,
        probabilities: ProbabilityTable {
            rows,
            unavailable: Vec::new(),
        },
    }
}
