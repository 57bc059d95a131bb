//! Quantum-state representation and the simulated subroutines shared by all
//! quantum paths: amplitude encoding, swap tests, measurement sampling,
//! Hamiltonian evolution, and eigenvalue-filtered spectral inversion.
//!
//! States are immutable after construction and all operations are pure given
//! their inputs and a [`ShotPlan`]; sampled-mode randomness is derived from
//! `(seed, tag)` so concurrent scheduling never changes results.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Norm drift above this at construction is a bug in the producing
/// operation, not accumulated floating-point noise.
const NORM_BUG_LIMIT: f64 = 1e-6;

/// Process-wide record of the norm deviation of every state constructed.
///
/// Construction renormalizes away sub-`NORM_BUG_LIMIT` drift, but the
/// pre-correction deviation is recorded here so a test run can assert that
/// no operation anywhere produced a state off unit norm beyond its budget.
pub mod norm_audit {
    use std::sync::atomic::{AtomicU64, Ordering};

    static MAX_DEVIATION_BITS: AtomicU64 = AtomicU64::new(0);
    static SAMPLES: AtomicU64 = AtomicU64::new(0);

    pub(super) fn record(deviation: f64) {
        SAMPLES.fetch_add(1, Ordering::Relaxed);
        let mut current = MAX_DEVIATION_BITS.load(Ordering::Relaxed);
        loop {
            if deviation <= f64::from_bits(current) {
                return;
            }
            match MAX_DEVIATION_BITS.compare_exchange_weak(
                current,
                deviation.to_bits(),
                Ordering::Relaxed,
                Ordering::Relaxed,
            ) {
                Ok(_) => return,
                Err(seen) => current = seen,
            }
        }
    }

    /// Largest `|‖ψ‖ − 1|` observed at any state construction since the
    /// last reset.
    pub fn max_deviation() -> f64 {
        f64::from_bits(MAX_DEVIATION_BITS.load(Ordering::Relaxed))
    }

    /// Number of state constructions observed since the last reset.
    pub fn samples() -> u64 {
        SAMPLES.load(Ordering::Relaxed)
    }

    pub fn reset() {
        MAX_DEVIATION_BITS.store(0, Ordering::Relaxed);
        SAMPLES.store(0, Ordering::Relaxed);
    }
}

/// How a measurement-backed quantity is produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    /// Closed-form probabilities, no sampling noise.
    Exact,
    /// Finite-shot estimates drawn from the exact distribution.
    Sampled,
}

/// Shot budget and seed for sampled-mode estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotPlan {
    pub shots: u64,
    pub seed: u64,
    pub mode: ExecMode,
}

impl ShotPlan {
    pub fn exact() -> Self {
        ShotPlan { shots: 1, seed: 0, mode: ExecMode::Exact }
    }

    pub fn sampled(shots: u64, seed: u64) -> Self {
        ShotPlan { shots: shots.max(1), seed, mode: ExecMode::Sampled }
    }

    /// Derive an independent child stream for one call site. Children of
    /// distinct tags are statistically independent, and the derivation is a
    /// pure function of `(seed, tag)`, so evaluation order does not matter.
    pub fn child(&self, tag: u64) -> Self {
        ShotPlan { seed: mix_seed(self.seed, tag), ..*self }
    }

    pub(crate) fn rng(&self, op_tag: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(mix_seed(self.seed, op_tag))
    }
}

/// splitmix64 finalizer over the pair; good dispersion, stable forever.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const TAG_SWAP_TEST: u64 = 0x5357_4150;
const TAG_MEASURE: u64 = 0x4d45_4153;

/// A normalized complex amplitude vector. Norms of encoded classical data
/// travel separately (see [`encode_amplitudes`]); the state itself stores
/// direction only. Dimension need not be a power of two: composite registers
/// are plain index products declared by whoever builds the state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVec {
    amps: DVector<Complex64>,
}

impl StateVec {
    /// Wrap amplitudes that are already unit norm up to floating drift.
    /// The pre-correction deviation is recorded in [`norm_audit`] and the
    /// tiny drift is divided out.
    pub fn from_normalized(amps: DVector<Complex64>) -> Result<Self> {
        let norm = amps.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite("state amplitudes"));
        }
        let deviation = (norm - 1.0).abs();
        if deviation > NORM_BUG_LIMIT {
            return Err(Error::ShapeMismatch(format!(
                "amplitudes not normalized (norm {norm})"
            )));
        }
        norm_audit::record(deviation);
        Ok(StateVec { amps: amps / Complex64::new(norm, 0.0) })
    }

    /// Basis state `|index⟩` in a `dim`-dimensional register.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index out of range");
        let mut amps = DVector::from_element(dim, Complex64::new(0.0, 0.0));
        amps[index] = Complex64::new(1.0, 0.0);
        norm_audit::record(0.0);
        StateVec { amps }
    }

    /// Uniform superposition over all `dim` basis states.
    pub fn uniform(dim: usize) -> Self {
        assert!(dim >= 1, "state dimension must be >= 1");
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        let amps = DVector::from_element(dim, a);
        Self::from_normalized(amps).expect("uniform state is normalized")
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    /// Born probability of basis outcome `index`.
    pub fn probability(&self, index: usize) -> f64 {
        self.amps[index].norm_sqr()
    }

    /// ⟨self|other⟩ with the conjugate on `self`.
    pub fn inner(&self, other: &StateVec) -> Result<Complex64> {
        self.check_dim(other)?;
        Ok(self.amps.dotc(&other.amps))
    }

    /// The state with every amplitude negated (global phase flip).
    pub fn negated(&self) -> Self {
        StateVec { amps: -self.amps.clone() }
    }

    fn check_dim(&self, other: &StateVec) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { left: self.dim(), right: other.dim() });
        }
        Ok(())
    }
}

/// Flat index of `(outer, inner)` in an `outer_dim × inner_dim` composite
/// register, ordered `|outer⟩|inner⟩`.
pub fn composite_index(outer: usize, inner: usize, inner_dim: usize) -> usize {
    outer * inner_dim + inner
}

/// Amplitude-encode a real vector: direction into the state, norm returned
/// alongside for the classical bookkeeping the protocols require.
pub fn encode_amplitudes(v: &[f64]) -> Result<(StateVec, f64)> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(Error::NonFinite("encoded vector"));
    }
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let amps = DVector::from_iterator(v.len(), v.iter().map(|&x| Complex64::new(x / norm, 0.0)));
    Ok((StateVec::from_normalized(amps)?, norm))
}

/// `(1 − o)/2` snapped onto the 2⁻⁵³ lattice, where `1 − p` is exactly
/// representable; negating the overlap therefore complements the
/// probability exactly, not just to rounding.
pub(crate) fn signed_overlap_probability(overlap: f64) -> f64 {
    let magnitude = overlap.abs().min(1.0);
    let raw = 0.5 * (1.0 - magnitude);
    let snapped = ((raw * 9007199254740992.0).round() / 9007199254740992.0).clamp(0.0, 0.5);
    if overlap >= 0.0 {
        snapped
    } else {
        1.0 - snapped
    }
}

/// Success probability of the interference test between `t` and `q`:
/// `P = (1 − Re⟨t|q⟩)/2`, the signed-overlap form the ±1 decision rule
/// needs. Sampled mode returns the fraction of ancilla successes over
/// `plan.shots` Bernoulli draws with this parameter.
pub fn swap_test_probability(t: &StateVec, q: &StateVec, plan: &ShotPlan) -> Result<f64> {
    let p = signed_overlap_probability(t.inner(q)?.re);
    match plan.mode {
        ExecMode::Exact => Ok(p),
        ExecMode::Sampled => {
            let mut rng = plan.rng(TAG_SWAP_TEST);
            let dist = rand_distr::Binomial::new(plan.shots, p)
                .map_err(|_| Error::NonFinite("swap-test probability"))?;
            Ok(dist.sample(&mut rng) as f64 / plan.shots as f64)
        }
    }
}

/// Draw `plan.shots` basis-state measurements from `s`. Identical seed and
/// state reproduce identical counts.
pub fn sample_measurement(s: &StateVec, plan: &ShotPlan) -> Result<BTreeMap<usize, u64>> {
    if plan.mode != ExecMode::Sampled {
        return Err(Error::Config("sample_measurement requires a sampled-mode plan".into()));
    }
    let probs: Vec<f64> = (0..s.dim()).map(|i| s.probability(i)).collect();
    let dist = WeightedIndex::new(&probs)
        .map_err(|_| Error::NonFinite("measurement probabilities"))?;
    let mut rng = plan.rng(TAG_MEASURE);
    let mut histogram = BTreeMap::new();
    for _ in 0..plan.shots {
        *histogram.entry(dist.sample(&mut rng)).or_insert(0) += 1;
    }
    Ok(histogram)
}

fn check_hermitian(h: &DMatrix<Complex64>) -> Result<()> {
    if !h.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "Hamiltonian must be square, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let mut worst = 0.0f64;
    for i in 0..h.nrows() {
        for j in i..h.ncols() {
            let asym = (h[(i, j)] - h[(j, i)].conj()).norm();
            worst = worst.max(asym);
        }
    }
    if worst > 1e-10 {
        return Err(Error::NonHermitian(worst));
    }
    Ok(())
}

fn check_op_dim(h: &DMatrix<Complex64>, s: &StateVec) -> Result<()> {
    if h.nrows() != s.dim() {
        return Err(Error::DimensionMismatch { left: h.nrows(), right: s.dim() });
    }
    Ok(())
}

/// Exact evolution `exp(−iHt)·s` by diagonalizing the Hermitian `H`.
pub fn evolve(s: &StateVec, h: &DMatrix<Complex64>, t: f64) -> Result<StateVec> {
    check_hermitian(h)?;
    check_op_dim(h, s)?;
    let eig = h.clone().symmetric_eigen();
    let coeffs = eig.eigenvectors.adjoint() * s.amplitudes();
    let phased = DVector::from_iterator(
        coeffs.len(),
        coeffs
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(c, &lambda)| c * Complex64::from_polar(1.0, -lambda * t)),
    );
    StateVec::from_normalized(&eig.eigenvectors * phased)
}

/// First-order Lie-product evolution: each step of length `t/steps` applies
/// the term exponentials in sequence. The single-step defect against
/// [`evolve`] under the summed Hamiltonian shrinks quadratically in the
/// step length.
pub fn evolve_trotter(
    s: &StateVec,
    terms: &[DMatrix<Complex64>],
    t: f64,
    steps: usize,
) -> Result<StateVec> {
    if terms.is_empty() || steps == 0 {
        return Err(Error::Config("evolve_trotter needs >=1 term and >=1 step".into()));
    }
    let dt = t / steps as f64;
    let mut step_factors = Vec::with_capacity(terms.len());
    for term in terms {
        check_hermitian(term)?;
        check_op_dim(term, s)?;
        let eig = term.clone().symmetric_eigen();
        let phases = DMatrix::from_diagonal(&DVector::from_iterator(
            eig.eigenvalues.len(),
            eig.eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, -l * dt)),
        ));
        step_factors.push(&eig.eigenvectors * phases * eig.eigenvectors.adjoint());
    }
    let mut amps = s.amplitudes().clone();
    for _ in 0..steps {
        for factor in &step_factors {
            amps = factor * amps;
        }
    }
    StateVec::from_normalized(amps)
}

/// How eigenvalues are read off during spectral inversion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InversionMode {
    /// Direct diagonalization; the noise-free reference.
    ExactSpectral,
    /// Phase estimation on a `clock_bits`-bit clock register: eigenphases
    /// `λ·t0/2π` are rounded to the clock grid before inversion. `t0`
    /// defaults to just inside the aliasing limit `π/max|λ|`.
    Qpe { clock_bits: u32, t0: Option<f64> },
}

impl InversionMode {
    pub fn qpe(clock_bits: u32) -> Self {
        InversionMode::Qpe { clock_bits, t0: None }
    }
}

fn qpe_round(lambda: f64, t0: f64, clock_bits: u32) -> f64 {
    let grid = (1u64 << clock_bits) as f64;
    let phase = lambda * t0 / (2.0 * PI);
    let frac = phase - phase.floor();
    let mut quantized = (frac * grid).round() / grid;
    if quantized >= 1.0 {
        quantized = 0.0;
    }
    let signed = if quantized >= 0.5 { quantized - 1.0 } else { quantized };
    signed * 2.0 * PI / t0
}

/// Solve `A·u ∝ y` in the eigenbasis of the Hermitian `A`: expand `y`,
/// drop components whose (possibly quantized) eigenvalue magnitude falls
/// below `eps_k`, divide the rest by their eigenvalue, renormalize.
/// Returns the state and the pre-normalization norm so callers can carry
/// the solution scale classically.
pub fn spectral_invert(
    a: &DMatrix<Complex64>,
    y: &StateVec,
    eps_k: f64,
    mode: &InversionMode,
) -> Result<(StateVec, f64)> {
    check_hermitian(a)?;
    check_op_dim(a, y)?;
    let eig = a.clone().symmetric_eigen();
    let coeffs = eig.eigenvectors.adjoint() * y.amplitudes();

    let effective: Vec<f64> = match mode {
        InversionMode::ExactSpectral => eig.eigenvalues.iter().copied().collect(),
        InversionMode::Qpe { clock_bits, t0 } => {
            if *clock_bits == 0 || *clock_bits > 40 {
                return Err(Error::Config("clock_bits must be in 1..=40".into()));
            }
            let max_abs = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
            if max_abs == 0.0 {
                return Err(Error::AllFiltered(eps_k));
            }
            let t0 = t0.unwrap_or(PI / (1.05 * max_abs));
            eig.eigenvalues.iter().map(|&l| qpe_round(l, t0, *clock_bits)).collect()
        }
    };

    let inverted = DVector::from_iterator(
        coeffs.len(),
        coeffs.iter().zip(effective.iter()).map(|(c, &lambda)| {
            if lambda.abs() < eps_k || lambda == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                c / Complex64::new(lambda, 0.0)
            }
        }),
    );
    let norm = inverted.norm();
    if norm < 1e-12 {
        return Err(Error::AllFiltered(eps_k));
    }
    let state = StateVec::from_normalized((&eig.eigenvectors * inverted) / Complex64::new(norm, 0.0))?;
    Ok((state, norm))
}
