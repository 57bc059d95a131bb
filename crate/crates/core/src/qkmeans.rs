//! Quantum k-means: swap-test distance estimation, adiabatic reassignment
//! under the distance Hamiltonian, and the superposed cluster-label state,
//! with classical Lloyd iteration as the independent oracle.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevector::{
    composite_index, encode_amplitudes, evolve, mix_seed, swap_test_probability, ExecMode,
    ShotPlan, StateVec,
};

const TAG_DISTANCE: u64 = 0x4449_5354;
const TAG_ASSIGN: u64 = 0x4153_4e47;

/// Outcome of a clustering run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusterResult {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Mean squared distance of every point to its assigned centroid.
    pub objective: f64,
    /// One-hot pseudo-label per point; each row sums to 1.
    pub pseudo_labels: Vec<Vec<u8>>,
    /// Objective after every completed assign/update iteration.
    pub objective_history: Vec<f64>,
}

impl ClusterResult {
    fn new(
        k: usize,
        centroids: Vec<Vec<f64>>,
        assignments: Vec<usize>,
        objective_history: Vec<f64>,
    ) -> Self {
        let pseudo_labels = assignments
            .iter()
            .map(|&c| {
                let mut row = vec![0u8; k];
                row[c] = 1;
                row
            })
            .collect();
        let objective = *objective_history.last().unwrap_or(&f64::NAN);
        ClusterResult { k, centroids, assignments, objective, pseudo_labels, objective_history }
    }
}

/// The superposed cluster-label state: amplitude `1/√M` on `(c_j, j)` for
/// every point `j`, zero elsewhere.
#[derive(Clone, Debug)]
pub struct ClusterState {
    pub zeta: StateVec,
    pub copies: u32,
    pub clusters: usize,
    pub points: usize,
}

impl ClusterState {
    pub fn from_assignments(assignments: &[usize], clusters: usize, copies: u32) -> Result<Self> {
        let points = assignments.len();
        let mut amps = vec![0.0; clusters * points];
        for (j, &c) in assignments.iter().enumerate() {
            amps[composite_index(c, j, points)] = 1.0;
        }
        let (zeta, _) = encode_amplitudes(&amps)?;
        Ok(ClusterState { zeta, copies, clusters, points })
    }
}

/// Iteration budget and annealing schedule of a quantum k-means run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QKMeansParams {
    pub iters: usize,
    pub t_anneal: f64,
    pub steps: usize,
    /// State copies prepared per distance estimate; multiplies the shot
    /// budget in sampled mode and is 1 in exact mode by convention.
    pub copies: u32,
}

impl Default for QKMeansParams {
    fn default() -> Self {
        QKMeansParams { iters: 25, t_anneal: 50.0, steps: 200, copies: 1 }
    }
}

fn validate_seeds(points: usize, k: usize, seed_indices: &[usize]) -> Result<()> {
    if k == 0 || k > points {
        return Err(Error::BadSeeds(format!("k = {k} with {points} points")));
    }
    if seed_indices.len() != k {
        return Err(Error::BadSeeds(format!(
            "{} seed indices for k = {k}",
            seed_indices.len()
        )));
    }
    for (i, &s) in seed_indices.iter().enumerate() {
        if s >= points {
            return Err(Error::BadSeeds(format!("seed index {s} out of range")));
        }
        if seed_indices[..i].contains(&s) {
            return Err(Error::BadSeeds(format!("seed index {s} repeated")));
        }
    }
    Ok(())
}

fn euclidean_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn mean_of(features: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let dim = features[0].len();
    let mut mean = vec![0.0; dim];
    for &j in members {
        for (m, v) in mean.iter_mut().zip(&features[j]) {
            *m += v;
        }
    }
    let count = members.len() as f64;
    mean.iter_mut().for_each(|m| *m /= count);
    mean
}

/// Reassign one point into each empty cluster: the point farthest from its
/// own centroid moves, never emptying another cluster.
fn repair_empty_clusters(
    features: &[Vec<f64>],
    assignments: &mut [usize],
    centroids: &mut [Vec<f64>],
    k: usize,
) {
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignments.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = (0..k).find(|&c| sizes[c] == 0) else { break };
        let mut farthest = None;
        let mut worst = -1.0;
        for (j, &a) in assignments.iter().enumerate() {
            if sizes[a] <= 1 {
                continue;
            }
            let d = euclidean_sq(&features[j], &centroids[a]);
            if d > worst {
                worst = d;
                farthest = Some(j);
            }
        }
        let Some(j) = farthest else { break };
        assignments[j] = empty;
        centroids[empty] = features[j].clone();
        // donor centroid refreshes on the next mean update
    }
}

fn update_centroids(
    features: &[Vec<f64>],
    assignments: &mut [usize],
    k: usize,
) -> Vec<Vec<f64>> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (j, &a) in assignments.iter().enumerate() {
        members[a].push(j);
    }
    let dim = features[0].len();
    let mut centroids: Vec<Vec<f64>> = members
        .iter()
        .map(|m| if m.is_empty() { vec![0.0; dim] } else { mean_of(features, m) })
        .collect();
    if members.iter().any(|m| m.is_empty()) {
        repair_empty_clusters(features, assignments, &mut centroids, k);
        let mut refreshed: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (j, &a) in assignments.iter().enumerate() {
            refreshed[a].push(j);
        }
        centroids = refreshed.iter().map(|m| mean_of(features, m)).collect();
    }
    centroids
}

fn mean_objective(features: &[Vec<f64>], assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    let total: f64 = features
        .iter()
        .zip(assignments)
        .map(|(x, &a)| euclidean_sq(x, &centroids[a]))
        .sum();
    total / features.len() as f64
}

/// Classical Lloyd iteration from explicit seed points. Fully independent
/// of the quantum path: plain Euclidean arithmetic throughout.
pub fn lloyd_classical(
    features: &[Vec<f64>],
    k: usize,
    seed_indices: &[usize],
    max_iter: usize,
) -> Result<ClusterResult> {
    validate_seeds(features.len(), k, seed_indices)?;
    let mut centroids: Vec<Vec<f64>> =
        seed_indices.iter().map(|&s| features[s].clone()).collect();
    let mut assignments = vec![0usize; features.len()];
    let mut history = Vec::new();

    for iteration in 0..=max_iter {
        let mut next = vec![0usize; features.len()];
        for (j, x) in features.iter().enumerate() {
            let mut best = 0;
            let mut best_d = euclidean_sq(x, &centroids[0]);
            for (c, centroid) in centroids.iter().enumerate().skip(1) {
                let d = euclidean_sq(x, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            next[j] = best;
        }
        if iteration > 0 && next == assignments {
            break;
        }
        assignments = next;
        centroids = update_centroids(features, &mut assignments, k);
        history.push(mean_objective(features, &assignments, &centroids));
    }
    Ok(ClusterResult::new(k, centroids, assignments, history))
}

/// Squared-distance estimate `|x − y|²` through the swap-test overlap of
/// the unit directions, with the norms carried classically. Exact mode is
/// exact; sampled mode converges at `1/√shots`. Zero vectors fall back to
/// the classical norm of the other argument.
pub fn quantum_distance(x: &[f64], y: &[f64], plan: &ShotPlan) -> f64 {
    assert_eq!(x.len(), y.len(), "quantum_distance requires equal dimensions");
    let nx_sq: f64 = x.iter().map(|v| v * v).sum();
    let ny_sq: f64 = y.iter().map(|v| v * v).sum();
    if nx_sq == 0.0 || ny_sq == 0.0 {
        return nx_sq + ny_sq;
    }
    let (sx, nx) = encode_amplitudes(x).expect("nonzero vector encodes");
    let (sy, ny) = encode_amplitudes(y).expect("nonzero vector encodes");
    let p = swap_test_probability(&sx, &sy, plan).expect("dimensions already checked");
    let overlap = 1.0 - 2.0 * p;
    (nx_sq + ny_sq - 2.0 * nx * ny * overlap).max(0.0)
}

/// Final measurement distribution of the annealed cluster register: linear
/// interpolation from the uniform-superposition projector Hamiltonian to
/// the diagonal distance Hamiltonian, integrated with one exact
/// exponential per step at the midpoint coupling.
pub fn adiabatic_distribution(distances: &[f64], t_anneal: f64, steps: usize) -> Vec<f64> {
    let k = distances.len();
    assert!(k >= 1, "need at least one candidate cluster");
    if k == 1 {
        return vec![1.0];
    }
    assert!(steps >= 1 && t_anneal > 0.0, "annealing schedule must be positive");

    let uniform = 1.0 / k as f64;
    let mut state = StateVec::uniform(k);
    let dt = t_anneal / steps as f64;
    for step in 0..steps {
        let s = (step as f64 + 0.5) / steps as f64;
        let mut h = DMatrix::from_element(k, k, Complex64::new(0.0, 0.0));
        for row in 0..k {
            for col in 0..k {
                let projector = if row == col { 1.0 - uniform } else { -uniform };
                let mut value = (1.0 - s) * projector;
                if row == col {
                    value += s * distances[row];
                }
                h[(row, col)] = Complex64::new(value, 0.0);
            }
        }
        state = evolve(&state, &h, dt).expect("annealing Hamiltonian is Hermitian");
    }
    (0..k).map(|c| state.probability(c)).collect()
}

/// Measure the annealed cluster register: the most probable outcome in
/// exact mode (ties to the lowest index), one sampled draw otherwise.
pub fn adiabatic_assign(
    distances: &[f64],
    t_anneal: f64,
    steps: usize,
    plan: &ShotPlan,
) -> usize {
    let probs = adiabatic_distribution(distances, t_anneal, steps);
    match plan.mode {
        ExecMode::Exact => {
            let mut best = 0;
            for c in 1..probs.len() {
                if probs[c] > probs[best] {
                    best = c;
                }
            }
            best
        }
        ExecMode::Sampled => {
            use rand::distributions::Distribution;
            let dist = rand::distributions::WeightedIndex::new(&probs)
                .expect("probabilities are nonnegative");
            dist.sample(&mut plan.rng(TAG_ASSIGN))
        }
    }
}

fn distance_tag(iteration: usize, point: usize, cluster: usize) -> u64 {
    mix_seed(TAG_DISTANCE, ((iteration as u64) << 40) ^ ((point as u64) << 16) ^ cluster as u64)
}

fn assign_tag(iteration: usize, point: usize) -> u64 {
    mix_seed(TAG_ASSIGN, ((iteration as u64) << 40) ^ point as u64)
}

/// Full quantum k-means: nearest-seed initial assignment, then iterated
/// mean evaluation, swap-test distances and adiabatic reassignment until
/// the assignments reach a fixpoint or the budget runs out.
pub fn qkmeans_run(
    features: &[Vec<f64>],
    k: usize,
    seed_indices: &[usize],
    params: &QKMeansParams,
    plan: &ShotPlan,
) -> Result<(ClusterResult, ClusterState)> {
    validate_seeds(features.len(), k, seed_indices)?;
    let copies = params.copies.max(1);
    let distance_plan = |iteration: usize, point: usize, cluster: usize| -> ShotPlan {
        let mut child = plan.child(distance_tag(iteration, point, cluster));
        if child.mode == ExecMode::Sampled {
            child.shots *= copies as u64;
        }
        child
    };

    // iteration 0: every point joins its nearest seed
    let mut assignments = vec![0usize; features.len()];
    for (j, x) in features.iter().enumerate() {
        let mut best = 0;
        let mut best_d = quantum_distance(x, &features[seed_indices[0]], &distance_plan(0, j, 0));
        for (c, &seed) in seed_indices.iter().enumerate().skip(1) {
            let d = quantum_distance(x, &features[seed], &distance_plan(0, j, c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        assignments[j] = best;
    }
    let mut centroids = update_centroids(features, &mut assignments, k);
    let mut history = vec![mean_objective(features, &assignments, &centroids)];
    let mut state = ClusterState::from_assignments(&assignments, k, copies)?;

    for iteration in 1..=params.iters {
        let mut next = vec![0usize; features.len()];
        for (j, x) in features.iter().enumerate() {
            let dists: Vec<f64> = (0..k)
                .map(|c| quantum_distance(x, &centroids[c], &distance_plan(iteration, j, c)))
                .collect();
            // rescale the distance spectrum onto [0, 1]: the arg-min is
            // unchanged and the problem Hamiltonian stays at an energy
            // scale one annealing schedule can follow adiabatically
            let dmin = dists.iter().cloned().fold(f64::INFINITY, f64::min);
            let span = dists.iter().cloned().fold(0.0f64, f64::max) - dmin;
            let scaled: Vec<f64> = if span > 0.0 {
                dists.iter().map(|d| (d - dmin) / span).collect()
            } else {
                vec![0.0; k]
            };
            next[j] = adiabatic_assign(
                &scaled,
                params.t_anneal,
                params.steps,
                &plan.child(assign_tag(iteration, j)),
            );
        }
        if next == assignments {
            break;
        }
        assignments = next;
        centroids = update_centroids(features, &mut assignments, k);
        history.push(mean_objective(features, &assignments, &centroids));
        state = ClusterState::from_assignments(&assignments, k, copies)?;
    }

    Ok((ClusterResult::new(k, centroids, assignments, history), state))
}
