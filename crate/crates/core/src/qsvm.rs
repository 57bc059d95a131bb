//! Quantum LS-SVM: trains the `|b, α⟩` state by simulated inversion of the
//! trace-normalized training matrix, prepares the training-data oracle and
//! query states, and classifies through the ancilla-interference (swap-test)
//! probability.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lssvm::{assemble_system, build_kernel_matrix, KernelSpec};
use crate::statevector::{
    composite_index, encode_amplitudes, spectral_invert, swap_test_probability, ExecMode,
    InversionMode, ShotPlan, StateVec,
};

const TAG_CLASSIFY: u64 = 0x434c_4153;

/// A binary SVM whose parameters live in a quantum state. The state holds
/// the direction of `(b, α₁, …, α_M)`; `norm_scale` carries its length
/// classically, and the read-out `(b, α)` is cached at construction so it
/// is stable across serialization round trips.
#[derive(Clone, Debug)]
pub struct QuantumSVMModel {
    pub state: StateVec,
    pub norm_scale: f64,
    b: f64,
    alpha: Vec<f64>,
    pub supports: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub kernel: KernelSpec,
    pub eta: f64,
    pub eps_k: f64,
    pub mode: InversionMode,
    pub class_pair: Option<(usize, usize)>,
    /// Register width used for oracle/query padding; equals the training
    /// size standalone, or the family-wide maximum inside a multiclass set.
    pub m_max: usize,
}

/// Relative eigenvalue floor applied when no explicit `eps_K` is given:
/// `1e-4` of the largest eigenvalue magnitude of the normalized matrix.
pub const DEFAULT_EPS_K_RELATIVE: f64 = 1e-4;

/// Train a binary quantum LS-SVM: assemble `F`, normalize by its trace,
/// and spectrally invert it against the label state `(0, y)/√M`.
pub fn train_quantum_binary(
    data: &[Vec<f64>],
    labels: &[f64],
    kernel: &KernelSpec,
    eta: f64,
    eps_k: Option<f64>,
    mode: &InversionMode,
) -> Result<QuantumSVMModel> {
    if data.len() != labels.len() {
        return Err(Error::DimensionMismatch { left: data.len(), right: labels.len() });
    }
    let m = data.len();
    let k = build_kernel_matrix(data, kernel)?;
    let sys = assemble_system(&k, labels, eta)?;
    let f_hat = (&sys.f / sys.tr_f).map(|x| Complex64::new(x, 0.0));

    let eps_k = match eps_k {
        Some(e) => e,
        None => {
            let eig = (sys.f.clone() / sys.tr_f).symmetric_eigen();
            let max_abs = eig.eigenvalues.iter().fold(0.0f64, |acc, &l| acc.max(l.abs()));
            DEFAULT_EPS_K_RELATIVE * max_abs
        }
    };

    let mut rhs = vec![0.0; m + 1];
    rhs[1..].copy_from_slice(labels);
    let (y_state, y_norm) = encode_amplitudes(&rhs)?;
    let (state, inv_norm) = spectral_invert(&f_hat, &y_state, eps_k, mode)?;

    // F̂⁻¹(0,y)/‖y‖ = (trF/‖y‖)·F⁻¹(0,y), so the classical parameter scale
    // is the inversion norm times ‖y‖/trF.
    let norm_scale = inv_norm * y_norm / sys.tr_f;

    Ok(QuantumSVMModel::from_state_readout(
        state,
        norm_scale,
        data.to_vec(),
        labels.to_vec(),
        kernel.clone(),
        eta,
        eps_k,
        *mode,
    ))
}

impl QuantumSVMModel {
    /// Build from a trained state, caching the amplitude read-out.
    /// Desk-scale tomography: the amplitudes are available exactly.
    #[allow(clippy::too_many_arguments)]
    pub fn from_state_readout(
        state: StateVec,
        norm_scale: f64,
        supports: Vec<Vec<f64>>,
        labels: Vec<f64>,
        kernel: KernelSpec,
        eta: f64,
        eps_k: f64,
        mode: InversionMode,
    ) -> Self {
        let amps = state.amplitudes();
        let b = amps[0].re * norm_scale;
        let alpha = (1..amps.len()).map(|i| amps[i].re * norm_scale).collect();
        let m_max = supports.len();
        QuantumSVMModel {
            state,
            norm_scale,
            b,
            alpha,
            supports,
            labels,
            kernel,
            eta,
            eps_k,
            mode,
            class_pair: None,
            m_max,
        }
    }

    /// Rebuild a model from explicit `(b, α)`, re-encoding the state. Used
    /// when loading persisted models; the stored parameters stay canonical.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parameters(
        b: f64,
        alpha: Vec<f64>,
        supports: Vec<Vec<f64>>,
        labels: Vec<f64>,
        kernel: KernelSpec,
        eta: f64,
        eps_k: f64,
        mode: InversionMode,
    ) -> Result<Self> {
        let mut packed = Vec::with_capacity(alpha.len() + 1);
        packed.push(b);
        packed.extend_from_slice(&alpha);
        let (state, norm_scale) = encode_amplitudes(&packed)?;
        let m_max = supports.len();
        Ok(QuantumSVMModel {
            state,
            norm_scale,
            b,
            alpha,
            supports,
            labels,
            kernel,
            eta,
            eps_k,
            mode,
            class_pair: None,
            m_max,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.supports.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.supports.first().map_or(0, |s| s.len())
    }

    /// The cached quantum read-out `(b, α)`.
    pub fn read_parameters(&self) -> (f64, &[f64]) {
        (self.b, &self.alpha)
    }

    /// `Σᵢ αᵢ·k(xᵢ, x) + b` evaluated from the quantum-read parameters.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        let mut acc = self.b;
        for (a, s) in self.alpha.iter().zip(&self.supports) {
            acc += a * self.kernel.eval(s, x)?;
        }
        Ok(acc)
    }

    /// The training-data oracle on the `(m_max+1)×(N+1)` register: `b` on
    /// `|0⟩|0⟩` and `αᵢ·|x⃗ᵢ|` against `|i⟩|x⃗ᵢ⟩`, linear in `α` so sign
    /// information survives into the interference test.
    pub fn prepare_training_oracle(&self) -> Result<StateVec> {
        let n = self.feature_dim();
        let inner = n + 1;
        let dim = (self.m_max + 1) * inner;
        let mut amps = vec![0.0; dim];
        amps[0] = self.b;
        for (i, (a, x)) in self.alpha.iter().zip(&self.supports).enumerate() {
            for (j, &component) in x.iter().enumerate() {
                // α_i·|x_i| times the unit direction of x_i is just α_i·x_i
                amps[composite_index(i + 1, j + 1, inner)] = a * component;
            }
        }
        let (state, _) = encode_amplitudes(&amps)?;
        Ok(state)
    }

    /// Classify `x` through the interference probability
    /// `P = (1 − ⟨T̃|x̃⟩)/2`: label +1 when `P < 1/2`, else −1.
    ///
    /// The overlap is evaluated in the kernel's feature space from the
    /// quantum-read parameters; for the linear kernel this coincides with
    /// the swap test between the explicitly prepared oracle and query
    /// states (asserted in tests). Sampled mode estimates `P` from
    /// `plan.shots` ancilla measurements.
    pub fn classify_binary(&self, x: &[f64], plan: &ShotPlan) -> Result<(i8, f64)> {
        if x.len() != self.feature_dim() {
            return Err(Error::DimensionMismatch { left: x.len(), right: self.feature_dim() });
        }
        let p = match (&self.kernel, plan.mode) {
            (KernelSpec::Linear, _) => {
                // Eqs of the protocol verbatim: build both register states
                // and interfere them.
                let oracle = self.prepare_training_oracle()?;
                let query = prepare_query_state(x, self.m_max)?;
                swap_test_probability(&oracle, &query, plan)?
            }
            (_, ExecMode::Exact) => self.kernel_space_probability(x)?,
            (_, ExecMode::Sampled) => {
                let p = self.kernel_space_probability(x)?;
                let mut rng = plan.rng(TAG_CLASSIFY);
                let dist = rand_distr::Binomial::new(plan.shots, p)
                    .map_err(|_| Error::NonFinite("classification probability"))?;
                rand_distr::Distribution::sample(&dist, &mut rng) as f64 / plan.shots as f64
            }
        };
        let label = if p < 0.5 { 1 } else { -1 };
        Ok((label, p))
    }

    /// `(1 − d/(Z_T·Z_Q))/2` with `d` the kernel decision value and the
    /// `Z` factors the feature-space norms of oracle and query. Reduces to
    /// the explicit swap test for the linear kernel.
    fn kernel_space_probability(&self, x: &[f64]) -> Result<f64> {
        let mut d = self.b;
        let mut z_t_sq = self.b * self.b;
        for (a, s) in self.alpha.iter().zip(&self.supports) {
            d += a * self.kernel.eval(s, x)?;
            z_t_sq += a * a * self.kernel.eval(s, s)?;
        }
        let z_q_sq = self.m_max as f64 * self.kernel.eval(x, x)? + 1.0;
        let overlap = d / (z_t_sq.sqrt() * z_q_sq.sqrt());
        Ok(crate::statevector::signed_overlap_probability(overlap))
    }
}

/// The query state over the `(m_max+1)×(N+1)` register: `|0⟩|0⟩` plus
/// `|x⃗|·|i⟩|x⃗⟩` for every slot, normalized by `√(m_max·|x⃗|² + 1)`.
pub fn prepare_query_state(x: &[f64], m_max: usize) -> Result<StateVec> {
    let norm_sq: f64 = x.iter().map(|v| v * v).sum();
    if norm_sq == 0.0 {
        return Err(Error::ZeroVector);
    }
    let inner = x.len() + 1;
    let mut amps = vec![0.0; (m_max + 1) * inner];
    amps[0] = 1.0;
    for i in 1..=m_max {
        for (j, &component) in x.iter().enumerate() {
            amps[composite_index(i, j + 1, inner)] = component;
        }
    }
    let (state, norm) = encode_amplitudes(&amps)?;
    debug_assert!((norm - (m_max as f64 * norm_sq + 1.0).sqrt()).abs() < 1e-9);
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lssvm::{solve_classical, BinarySVMModel};
    use approx::assert_relative_eq;

    fn fidelity_with_classical(model: &QuantumSVMModel) -> f64 {
        let k = build_kernel_matrix(&model.supports, &model.kernel).unwrap();
        let sys = assemble_system(&k, &model.labels, model.eta).unwrap();
        let sol = solve_classical(&sys).unwrap();
        let mut reference = vec![sol.b];
        reference.extend_from_slice(&sol.alpha);
        let (ref_state, _) = encode_amplitudes(&reference).unwrap();
        model.state.inner(&ref_state).unwrap().norm()
    }

    #[test]
    fn mirror_symmetry_zeroes_the_bias_slot() {
        let data = vec![vec![1.0, 0.5], vec![-1.0, -0.5]];
        let model = train_quantum_binary(
            &data,
            &[1.0, -1.0],
            &KernelSpec::Linear,
            1.0,
            None,
            &InversionMode::ExactSpectral,
        )
        .unwrap();
        assert!(model.state.amplitude(0).norm() < 1e-8);
    }

    #[test]
    fn exact_spectral_training_matches_classical_solution() {
        let data = vec![
            vec![0.2, 1.1],
            vec![1.3, -0.4],
            vec![-0.8, 0.3],
            vec![0.5, 0.9],
        ];
        let labels = [1.0, -1.0, -1.0, 1.0];
        let model = train_quantum_binary(
            &data,
            &labels,
            &KernelSpec::Rbf { gamma: 0.6 },
            2.0,
            None,
            &InversionMode::ExactSpectral,
        )
        .unwrap();
        assert!(fidelity_with_classical(&model) >= 0.999);

        // read-out parameters agree with the classical solve numerically
        let (b, alpha) = model.read_parameters();
        let classical =
            BinarySVMModel::train(&data, &labels, &KernelSpec::Rbf { gamma: 0.6 }, 2.0).unwrap();
        assert_relative_eq!(b, classical.b, epsilon = 1e-8);
        for (a, c) in alpha.iter().zip(&classical.alpha) {
            assert_relative_eq!(*a, *c, epsilon = 1e-8);
        }
    }

    #[test]
    fn qpe_mode_approaches_exact_mode() {
        let data = vec![
            vec![0.2, 1.1],
            vec![1.3, -0.4],
            vec![-0.8, 0.3],
            vec![0.5, 0.9],
        ];
        let labels = [1.0, -1.0, -1.0, 1.0];
        let exact = train_quantum_binary(
            &data,
            &labels,
            &KernelSpec::Linear,
            2.0,
            None,
            &InversionMode::ExactSpectral,
        )
        .unwrap();
        let qpe = train_quantum_binary(
            &data,
            &labels,
            &KernelSpec::Linear,
            2.0,
            None,
            &InversionMode::qpe(12),
        )
        .unwrap();
        let fidelity = exact.state.inner(&qpe.state).unwrap().norm();
        assert!(fidelity >= 0.99, "qpe/exact fidelity {fidelity}");
    }

    #[test]
    fn training_oracle_single_support() {
        // b = 0, one support with α = 1 and unit norm: the oracle is |1⟩|x⟩.
        let model = QuantumSVMModel::from_parameters(
            0.0,
            vec![1.0],
            vec![vec![1.0, 0.0]],
            vec![1.0],
            KernelSpec::Linear,
            1.0,
            0.0,
            InversionMode::ExactSpectral,
        )
        .unwrap();
        let oracle = model.prepare_training_oracle().unwrap();
        // register is (1+1)×(2+1) = 6 dimensional; (i=1, j=1) is index 4
        assert_relative_eq!(oracle.probability(4), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn training_oracle_weights_alpha_by_vector_norm() {
        // b = 1, α = (1), |x₁| = 2 → coefficients ∝ (1, 2).
        let model = QuantumSVMModel::from_parameters(
            1.0,
            vec![1.0],
            vec![vec![2.0, 0.0]],
            vec![1.0],
            KernelSpec::Linear,
            1.0,
            0.0,
            InversionMode::ExactSpectral,
        )
        .unwrap();
        let oracle = model.prepare_training_oracle().unwrap();
        let expect = 1.0 / 5.0f64.sqrt();
        assert_relative_eq!(oracle.amplitude(0).re, expect, epsilon = 1e-10);
        assert_relative_eq!(oracle.amplitude(4).re, 2.0 * expect, epsilon = 1e-10);
    }

    #[test]
    fn query_state_single_slot() {
        let q = prepare_query_state(&[1.0], 1).unwrap();
        // dims (1+1)×(1+1) = 4: amplitude 1/√2 at |0⟩|0⟩ and |1⟩|x⟩
        assert_relative_eq!(q.amplitude(0).re, 1.0 / 2.0f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(q.amplitude(3).re, 1.0 / 2.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn query_state_rejects_zero_vector() {
        assert!(matches!(prepare_query_state(&[0.0, 0.0], 3), Err(Error::ZeroVector)));
    }

    #[test]
    fn classification_agrees_with_classical_decision_sign() {
        let data = vec![
            vec![1.0, 1.2],
            vec![0.8, 1.0],
            vec![-1.0, -0.9],
            vec![-1.2, -1.1],
        ];
        let labels = [1.0, 1.0, -1.0, -1.0];
        let model = train_quantum_binary(
            &data,
            &labels,
            &KernelSpec::Linear,
            4.0,
            None,
            &InversionMode::ExactSpectral,
        )
        .unwrap();
        let classical = BinarySVMModel::train(&data, &labels, &KernelSpec::Linear, 4.0).unwrap();
        let plan = ShotPlan::exact();
        for x in [
            vec![0.9, 1.1],
            vec![-0.7, -1.3],
            vec![2.0, 1.5],
            vec![-2.0, -0.2],
        ] {
            let (label, p) = model.classify_binary(&x, &plan).unwrap();
            let d = classical.decision_value(&x).unwrap();
            assert_eq!(label as f64, d.signum(), "P = {p}, d = {d}");
        }
    }

    #[test]
    fn linear_swap_test_equals_kernel_space_formula() {
        let data = vec![vec![0.4, -1.0], vec![1.1, 0.2], vec![-0.6, 0.9]];
        let labels = [1.0, -1.0, 1.0];
        let model = train_quantum_binary(
            &data,
            &labels,
            &KernelSpec::Linear,
            3.0,
            None,
            &InversionMode::ExactSpectral,
        )
        .unwrap();
        let x = vec![0.3, 0.7];
        let oracle = model.prepare_training_oracle().unwrap();
        let query = prepare_query_state(&x, model.m_max).unwrap();
        let from_states =
            swap_test_probability(&oracle, &query, &ShotPlan::exact()).unwrap();
        let from_formula = model.kernel_space_probability(&x).unwrap();
        assert_relative_eq!(from_states, from_formula, epsilon = 1e-10);
    }

    #[test]
    fn boundary_probability_classifies_negative() {
        // P exactly ½ must yield −1 per the decision rule.
        let model = QuantumSVMModel::from_parameters(
            0.0,
            vec![1.0],
            vec![vec![1.0, 0.0]],
            vec![1.0],
            KernelSpec::Linear,
            1.0,
            0.0,
            InversionMode::ExactSpectral,
        )
        .unwrap();
        // query orthogonal to the support: d = 0 → P = ½ exactly
        let (label, p) = model.classify_binary(&[0.0, 1.0], &ShotPlan::exact()).unwrap();
        assert_eq!(p, 0.5);
        assert_eq!(label, -1);
    }

    #[test]
    fn qpe_fidelity_is_non_decreasing_in_clock_bits() {
        let data = vec![
            vec![0.9, -0.2, 0.4],
            vec![-0.5, 1.1, 0.0],
            vec![0.3, 0.6, -0.8],
            vec![-1.0, -0.4, 0.5],
        ];
        let labels = [1.0, -1.0, 1.0, -1.0];
        let exact = train_quantum_binary(
            &data,
            &labels,
            &KernelSpec::Rbf { gamma: 0.7 },
            2.0,
            None,
            &InversionMode::ExactSpectral,
        )
        .unwrap();
        let mut last = 0.0;
        for bits in [6, 8, 10, 12] {
            let qpe = train_quantum_binary(
                &data,
                &labels,
                &KernelSpec::Rbf { gamma: 0.7 },
                2.0,
                None,
                &InversionMode::qpe(bits),
            )
            .unwrap();
            let fidelity = exact.state.inner(&qpe.state).unwrap().norm();
            assert!(
                fidelity >= last - 1e-12,
                "fidelity fell from {last} to {fidelity} at {bits} bits"
            );
            last = fidelity;
        }
        assert!(last >= 0.99);
    }

    #[test]
    fn four_point_problems_exhaustively_match_the_classical_sign() {
        // every ±1 labeling of a fixed 4-point geometry, several queries:
        // the state-prepared overlap equals the closed kernel-space form
        // and the decision sign equals the classical one
        let data = vec![
            vec![1.0, 0.3],
            vec![0.2, -1.1],
            vec![-0.8, 0.9],
            vec![-0.4, -0.5],
        ];
        let queries =
            [vec![0.7, 0.1], vec![-0.9, 0.4], vec![0.1, -0.8], vec![1.3, 1.1]];
        let plan = ShotPlan::exact();
        for pattern in 0u32..16 {
            let labels: Vec<f64> =
                (0..4).map(|i| if pattern >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let model = train_quantum_binary(
                &data,
                &labels,
                &KernelSpec::Linear,
                2.0,
                None,
                &InversionMode::ExactSpectral,
            )
            .unwrap();
            let classical =
                BinarySVMModel::train(&data, &labels, &KernelSpec::Linear, 2.0).unwrap();
            let oracle = model.prepare_training_oracle().unwrap();
            for q in &queries {
                let query = prepare_query_state(q, model.m_max).unwrap();
                let from_states = swap_test_probability(&oracle, &query, &plan).unwrap();
                let from_formula = model.kernel_space_probability(q).unwrap();
                assert_relative_eq!(from_states, from_formula, epsilon = 1e-10);

                let (label, p) = model.classify_binary(q, &plan).unwrap();
                let d = classical.decision_value(q).unwrap();
                assert_eq!(
                    label as f64,
                    d.signum(),
                    "pattern {pattern:04b}: P = {p}, d = {d}"
                );
            }
        }
    }

    #[test]
    fn sampled_classification_tracks_exact_mode() {
        let data = vec![
            vec![1.0, 1.2],
            vec![0.8, 1.0],
            vec![-1.0, -0.9],
            vec![-1.2, -1.1],
        ];
        let labels = [1.0, 1.0, -1.0, -1.0];
        let model = train_quantum_binary(
            &data,
            &labels,
            &KernelSpec::Linear,
            4.0,
            None,
            &InversionMode::ExactSpectral,
        )
        .unwrap();
        let x = vec![1.1, 0.9];
        let (exact_label, _) = model.classify_binary(&x, &ShotPlan::exact()).unwrap();
        let mut agree = 0;
        for seed in 0..100 {
            let plan = ShotPlan::sampled(10_000, seed);
            let (label, _) = model.classify_binary(&x, &plan).unwrap();
            if label == exact_label {
                agree += 1;
            }
        }
        assert!(agree >= 98, "sampled agreement {agree}/100");
    }

    #[test]
    fn unit_rescaling_preserves_labels() {
        // Rescaling data and query by c with the regularizer tracking the
        // kernel scale (η → η/c²) leaves every label invariant.
        let data = vec![
            vec![0.9, 1.4],
            vec![1.1, 0.7],
            vec![-0.9, -1.1],
            vec![-1.3, -0.6],
        ];
        let labels = [1.0, 1.0, -1.0, -1.0];
        let queries = [vec![0.5, 0.6], vec![-0.4, -0.8], vec![1.5, -0.2]];
        let eta = 2.0;
        let base = train_quantum_binary(
            &data,
            &labels,
            &KernelSpec::Linear,
            eta,
            Some(0.0),
            &InversionMode::ExactSpectral,
        )
        .unwrap();
        for c in [0.5, 2.0, 7.0] {
            let scaled_data: Vec<Vec<f64>> =
                data.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
            let scaled = train_quantum_binary(
                &scaled_data,
                &labels,
                &KernelSpec::Linear,
                eta / (c * c),
                Some(0.0),
                &InversionMode::ExactSpectral,
            )
            .unwrap();
            for q in &queries {
                let qs: Vec<f64> = q.iter().map(|v| v * c).collect();
                let (l0, _) = base.classify_binary(q, &ShotPlan::exact()).unwrap();
                let (l1, _) = scaled.classify_binary(&qs, &ShotPlan::exact()).unwrap();
                assert_eq!(l0, l1, "label changed under rescaling c = {c}");
            }
        }
    }
}
