//! Classical least-squares SVM: kernel assembly, the bordered linear system,
//! and its direct solve. This is both a usable solver and the oracle every
//! quantum-SVM test compares against.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Condition numbers above this declare the system singular.
const CONDITION_LIMIT: f64 = 1e12;

/// Kernel function selector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
    Polynomial { degree: u32, coef: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { gamma } if *gamma > 0.0 => Ok(()),
            KernelSpec::Rbf { gamma } => {
                Err(Error::Config(format!("rbf gamma must be positive, got {gamma}")))
            }
            KernelSpec::Polynomial { degree, .. } if *degree >= 1 => Ok(()),
            KernelSpec::Polynomial { .. } => {
                Err(Error::Config("polynomial degree must be >= 1".into()))
            }
        }
    }

    /// k(x, y) for equal-length vectors.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { left: x.len(), right: y.len() });
        }
        Ok(match self {
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
            KernelSpec::Polynomial { degree, coef } => (dot(x, y) + coef).powi(*degree as i32),
        })
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Gram matrix `K[i][j] = k(x_i, x_j)`, exactly symmetric by construction.
pub fn build_kernel_matrix(data: &[Vec<f64>], kernel: &KernelSpec) -> Result<DMatrix<f64>> {
    kernel.validate()?;
    let m = data.len();
    if m == 0 {
        return Err(Error::ShapeMismatch("kernel matrix needs at least one sample".into()));
    }
    let n = data[0].len();
    for row in data {
        if row.len() != n {
            return Err(Error::DimensionMismatch { left: n, right: row.len() });
        }
    }
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = kernel.eval(&data[i], &data[j])?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// The bordered `(M+1)×(M+1)` training system: a zero corner, all-ones
/// borders, and `K + η⁻¹I` in the lower-right block.
#[derive(Clone, Debug)]
pub struct LSSVMSystem {
    pub f: DMatrix<f64>,
    pub labels: Vec<f64>,
    pub eta: f64,
    pub tr_f: f64,
}

impl LSSVMSystem {
    pub fn size(&self) -> usize {
        self.labels.len()
    }
}

/// Assemble the training system from a kernel matrix, ±1 labels and the
/// regularizer `eta`.
pub fn assemble_system(k: &DMatrix<f64>, labels: &[f64], eta: f64) -> Result<LSSVMSystem> {
    let m = labels.len();
    if k.nrows() != m || k.ncols() != m {
        return Err(Error::DimensionMismatch { left: k.nrows(), right: m });
    }
    if eta <= 0.0 || !eta.is_finite() {
        return Err(Error::Config(format!("eta must be positive, got {eta}")));
    }
    for &y in labels {
        if y != 1.0 && y != -1.0 {
            return Err(Error::BadLabels(y));
        }
    }
    let mut f = DMatrix::zeros(m + 1, m + 1);
    for i in 0..m {
        f[(0, i + 1)] = 1.0;
        f[(i + 1, 0)] = 1.0;
        for j in 0..m {
            f[(i + 1, j + 1)] = k[(i, j)] + if i == j { 1.0 / eta } else { 0.0 };
        }
    }
    let tr_f = f.trace();
    Ok(LSSVMSystem { f, labels: labels.to_vec(), eta, tr_f })
}

/// Solved `(b, α)` of a training system.
#[derive(Clone, Debug, PartialEq)]
pub struct SvmSolution {
    pub b: f64,
    pub alpha: Vec<f64>,
}

/// Direct solve of `F·(b, α) = (0, y)`. Labels are absorbed into `α`;
/// downstream decision values never multiply by `y` again.
pub fn solve_classical(sys: &LSSVMSystem) -> Result<SvmSolution> {
    let kappa = condition_number(&sys.f);
    if !kappa.is_finite() || kappa > CONDITION_LIMIT {
        return Err(Error::SingularSystem(kappa));
    }
    let mut rhs = DVector::zeros(sys.size() + 1);
    for (i, &y) in sys.labels.iter().enumerate() {
        rhs[i + 1] = y;
    }
    let solution = sys
        .f
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularSystem(f64::INFINITY))?;
    let residual = (&sys.f * &solution - &rhs).norm();
    if residual > 1e-8 {
        return Err(Error::SingularSystem(kappa));
    }
    Ok(SvmSolution { b: solution[0], alpha: solution.as_slice()[1..].to_vec() })
}

/// |λ|max / |λ|min of a symmetric matrix.
pub fn condition_number(f: &DMatrix<f64>) -> f64 {
    let eig = f.clone().symmetric_eigen();
    let mut max = 0.0f64;
    let mut min = f64::INFINITY;
    for &l in eig.eigenvalues.iter() {
        max = max.max(l.abs());
        min = min.min(l.abs());
    }
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// A solved binary LS-SVM together with everything needed to evaluate it.
#[derive(Clone, Debug)]
pub struct BinarySVMModel {
    pub b: f64,
    pub alpha: Vec<f64>,
    pub supports: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub kernel: KernelSpec,
    pub eta: f64,
    /// Class pair this binary separates inside a multiclass family, if any.
    pub class_pair: Option<(usize, usize)>,
}

impl BinarySVMModel {
    /// Assemble and solve on raw data.
    pub fn train(
        data: &[Vec<f64>],
        labels: &[f64],
        kernel: &KernelSpec,
        eta: f64,
    ) -> Result<Self> {
        if data.len() != labels.len() {
            return Err(Error::DimensionMismatch { left: data.len(), right: labels.len() });
        }
        let k = build_kernel_matrix(data, kernel)?;
        let sys = assemble_system(&k, labels, eta)?;
        let sol = solve_classical(&sys)?;
        Ok(BinarySVMModel {
            b: sol.b,
            alpha: sol.alpha,
            supports: data.to_vec(),
            labels: labels.to_vec(),
            kernel: kernel.clone(),
            eta,
            class_pair: None,
        })
    }

    /// `Σᵢ αᵢ·k(xᵢ, x) + b`; the sign is the predicted class.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        let mut acc = self.b;
        for (alpha, support) in self.alpha.iter().zip(&self.supports) {
            acc += alpha * self.kernel.eval(support, x)?;
        }
        Ok(acc)
    }
}
