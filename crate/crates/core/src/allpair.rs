//! One-vs-one multiclass layer: one quantum binary classifier per unordered
//! class pair, with the winning class resolved either by an exact majority
//! count or by the iterated amplitude-search procedure over the vote vector.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::lssvm::KernelSpec;
use crate::qsvm::{train_quantum_binary, QuantumSVMModel};
use crate::statevector::{mix_seed, InversionMode, ShotPlan};

const TAG_PAIR_VOTE: u64 = 0x5041_4952;
const TAG_GROVER: u64 = 0x4752_4f56;

/// All `g(g−1)/2` pairwise binaries of a multiclass model, ordered by
/// `(i, j)` with `i < j` lexicographically.
#[derive(Clone, Debug)]
pub struct MulticlassSVMModel {
    pub classes: usize,
    pub binaries: Vec<QuantumSVMModel>,
    /// Largest pairwise subset size across the family.
    pub m_max: usize,
}

/// The unordered class pairs of `g` classes in training order.
pub fn class_pairs(classes: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(classes * (classes - 1) / 2);
    for i in 0..classes {
        for j in (i + 1)..classes {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Votes cast by the pairwise classifiers, plus the measurement-error
/// parameter the frequency search works under.
#[derive(Clone, Debug)]
pub struct VoteRecord {
    pub votes: Vec<usize>,
    pub classes: usize,
    pub epsilon: f64,
}

impl VoteRecord {
    pub fn new(votes: Vec<usize>, classes: usize, epsilon: f64) -> Result<Self> {
        if votes.is_empty() {
            return Err(Error::Config("vote record must be nonempty".into()));
        }
        if let Some(&bad) = votes.iter().find(|&&v| v >= classes) {
            return Err(Error::Config(format!("vote {bad} outside 0..{classes}")));
        }
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::Config(format!("epsilon must be in [0, 1), got {epsilon}")));
        }
        Ok(VoteRecord { votes, classes, epsilon })
    }

    /// Exact per-class vote frequencies.
    pub fn frequencies(&self) -> Vec<f64> {
        let mut freq = vec![0.0; self.classes];
        for &v in &self.votes {
            freq[v] += 1.0;
        }
        let total = self.votes.len() as f64;
        freq.iter_mut().for_each(|f| *f /= total);
        freq
    }
}

/// How pairwise votes are combined into a class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VoteResolution {
    /// Exact arg-max vote count; ties go to the lowest class index.
    ClassicalMajority,
    /// The iterated frequency search of the all-pair procedure.
    Grover { epsilon: f64, iter_cap: usize },
}

impl VoteResolution {
    /// Search budget `⌈c·log₂ g⌉` with the default constant `c = 3`.
    pub fn default_grover(classes: usize) -> Self {
        VoteResolution::Grover { epsilon: 1e-3, iter_cap: grover_iter_cap(classes, 3.0) }
    }
}

pub fn grover_iter_cap(classes: usize, constant: f64) -> usize {
    ((constant * (classes.max(2) as f64).log2()).ceil() as usize).max(1)
}

/// Train one binary per unordered class pair on that pair's subset, with
/// class `i ↦ +1` and class `j ↦ −1`.
pub fn train_multiclass(
    data: &[Vec<f64>],
    labels: &[usize],
    kernel: &KernelSpec,
    eta: f64,
    eps_k: Option<f64>,
    mode: &InversionMode,
) -> Result<MulticlassSVMModel> {
    if data.len() != labels.len() {
        return Err(Error::DimensionMismatch { left: data.len(), right: labels.len() });
    }
    let classes = labels.iter().max().map_or(0, |&g| g + 1);
    if classes < 2 {
        return Err(Error::Config(format!("need at least 2 classes, found {classes}")));
    }
    for c in 0..classes {
        if !labels.contains(&c) {
            return Err(Error::EmptyClass(c));
        }
    }

    let pairs = class_pairs(classes);
    let m_max = pairs
        .iter()
        .map(|&(i, j)| labels.iter().filter(|&&l| l == i || l == j).count())
        .max()
        .unwrap_or(0);

    let mut binaries = Vec::with_capacity(pairs.len());
    for (i, j) in pairs {
        let mut subset = Vec::new();
        let mut subset_labels = Vec::new();
        for (row, &label) in data.iter().zip(labels) {
            if label == i {
                subset.push(row.clone());
                subset_labels.push(1.0);
            } else if label == j {
                subset.push(row.clone());
                subset_labels.push(-1.0);
            }
        }
        let mut model = train_quantum_binary(&subset, &subset_labels, kernel, eta, eps_k, mode)?;
        model.class_pair = Some((i, j));
        model.m_max = m_max;
        binaries.push(model);
    }
    Ok(MulticlassSVMModel { classes, binaries, m_max })
}

impl MulticlassSVMModel {
    pub fn feature_dim(&self) -> usize {
        self.binaries.first().map_or(0, |b| b.feature_dim())
    }

    /// One vote per pairwise binary: +1 elects class `i`, −1 elects `j`.
    pub fn collect_votes(&self, x: &[f64], plan: &ShotPlan) -> Result<Vec<usize>> {
        let mut votes = Vec::with_capacity(self.binaries.len());
        for (idx, binary) in self.binaries.iter().enumerate() {
            let (i, j) = binary.class_pair.expect("multiclass binaries carry a class pair");
            let (label, _) = binary.classify_binary(x, &plan.child(mix_seed(TAG_PAIR_VOTE, idx as u64)))?;
            votes.push(if label > 0 { i } else { j });
        }
        Ok(votes)
    }

    /// Full all-pair classification of one query.
    pub fn classify_all_pairs(
        &self,
        x: &[f64],
        plan: &ShotPlan,
        resolution: &VoteResolution,
    ) -> Result<usize> {
        let votes = self.collect_votes(x, plan)?;
        match resolution {
            VoteResolution::ClassicalMajority => {
                Ok(majority_vote(&votes, self.classes))
            }
            VoteResolution::Grover { epsilon, iter_cap } => {
                let record = VoteRecord::new(votes, self.classes, *epsilon)?;
                let (class, _) =
                    grover_frequency_search(&record, plan.child(TAG_GROVER).seed, *iter_cap);
                Ok(class)
            }
        }
    }
}

/// Exact modal class; ties resolve to the lowest index.
pub fn majority_vote(votes: &[usize], classes: usize) -> usize {
    let mut counts = vec![0usize; classes];
    for &v in votes {
        counts[v] += 1;
    }
    let mut best = 0;
    for c in 1..classes {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best
}

/// Simulated iterated frequency search over a fixed vote vector.
///
/// Each iteration measures every class frequency to within `±ε`, searches
/// out the largest measured frequency (ties to the lowest index), and
/// replaces the incumbent when the challenger clears it by `ε/2g`, or when
/// it matches it from a lower class index, which is what breaks exact ties
/// toward the lowest index. Whenever the top-two frequency gap exceeds
/// `2ε + ε/2g` the result equals the exact majority vote; the initial
/// estimate is seeded from the class of one uniformly drawn vote.
/// Deterministic given `(votes, seed, iter_cap)`.
pub fn grover_frequency_search(
    record: &VoteRecord,
    seed: u64,
    iter_cap: usize,
) -> (usize, f64) {
    let freq = record.frequencies();
    let g = record.classes as f64;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let measure = |truth: f64, rng: &mut ChaCha12Rng| -> f64 {
        if record.epsilon == 0.0 {
            truth
        } else {
            (truth + rng.gen_range(-record.epsilon..=record.epsilon)).clamp(0.0, 1.0)
        }
    };

    // initial frequency estimate from one uniformly measured vote
    let first = record.votes[rng.gen_range(0..record.votes.len())];
    let mut incumbent = first;
    let mut estimate = measure(freq[first], &mut rng);

    for _ in 0..iter_cap.max(1) {
        let measured: Vec<f64> = freq.iter().map(|&f| measure(f, &mut rng)).collect();
        let mut challenger = 0;
        for c in 1..measured.len() {
            if measured[c] > measured[challenger] {
                challenger = c;
            }
        }
        if challenger == incumbent {
            estimate = measured[challenger];
        } else if measured[challenger] > estimate + record.epsilon / (2.0 * g)
            || (measured[challenger] >= estimate && challenger < incumbent)
        {
            incumbent = challenger;
            estimate = measured[challenger];
        }
    }
    (incumbent, estimate)
}
