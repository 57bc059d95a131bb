//! The runtime cost model: exact operation counts for the feature network
//! and the classical-vs-quantum runtime expressions of every pipeline
//! stage, evaluated as arithmetic formulas with all hidden constants set
//! to 1 and explicit base-2 logarithms. Values are model units, not
//! seconds.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Every parameter the cost formulas consume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Training-set size.
    pub m: u64,
    /// Largest pairwise subset size; must not exceed `m`.
    pub m_max: u64,
    /// Raw input dimension.
    pub n: u64,
    /// Class count.
    pub g: u64,
    /// Multiclass SVMs per hidden layer.
    pub v: u64,
    /// Hidden layers in the deep SVM.
    pub l: u64,
    /// Neurons per network layer, `n⁰..n^L`.
    pub layer_sizes: Vec<u64>,
    /// Gradient-descent iteration count.
    pub gr: u64,
    pub k_clusters: u64,
    /// Feature dimension entering the clustering stage.
    pub n_features: u64,
    /// Measurement error of the all-pair search.
    pub eps: f64,
    /// Eigenvalue floor of the inversion.
    pub eps_k: f64,
    /// Accuracy factor of the clustering stage.
    pub eps_kmeans: f64,
    /// Confidence parameter of the all-pair search.
    pub delta: f64,
    /// Gradient-descent convergence factor; reported but outside every
    /// runtime formula.
    pub eps_gd: f64,
    /// Phase-estimation evolution time; reported alongside.
    pub t0: f64,
    pub well_separated: bool,
    /// Convolution cost, supplied by the caller for the concrete
    /// architecture rather than derived.
    pub t_conv: f64,
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return Err(Error::BadSizes(format!("{:?}", self.layer_sizes)));
        }
        let counts =
            [self.m, self.m_max, self.n, self.g, self.v, self.l, self.gr, self.k_clusters, self.n_features];
        if counts.contains(&0) {
            return Err(Error::Config("all cost-model counts must be positive".into()));
        }
        if self.m_max > self.m {
            return Err(Error::Config(format!("m_max {} exceeds m {}", self.m_max, self.m)));
        }
        for (name, value) in [
            ("eps", self.eps),
            ("eps_k", self.eps_k),
            ("eps_kmeans", self.eps_kmeans),
            ("delta", self.delta),
            ("eps_gd", self.eps_gd),
        ] {
            if !(0.0 < value && value < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {value}")));
            }
        }
        Ok(())
    }

    /// Network layer count `L` (the sizes list holds `n⁰..n^L`).
    pub fn cnn_layer_count(&self) -> u64 {
        self.layer_sizes.len() as u64 - 1
    }
}

/// Exact multiply/activation counts of the network runtime model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnCounts {
    pub n_mul: u64,
    pub n_act: u64,
    pub t_forward: u64,
}

/// Closed-form operation counts over the layer sizes `n⁰..n^L`: layer 1
/// is charged its weight against the input vector and each later layer the
/// product of adjacent weight matrices, plus one activation per neuron.
pub fn cnn_counts(layer_sizes: &[u64]) -> Result<CnnCounts> {
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(Error::BadSizes(format!("{layer_sizes:?}")));
    }
    let mut n_mul = layer_sizes[1] * layer_sizes[0];
    for l in 2..layer_sizes.len() {
        n_mul += layer_sizes[l] * layer_sizes[l - 1] * layer_sizes[l - 2];
    }
    let n_act: u64 = layer_sizes[1..].iter().sum();
    Ok(CnnCounts { n_mul, n_act, t_forward: n_mul + n_act })
}

/// `log₂` of an integer, split into its exact power-of-two part plus the
/// odd remainder so that doubling the argument changes the result by
/// exactly 1.0.
pub fn log2_exact(value: u128) -> f64 {
    assert!(value > 0, "log2 of zero");
    let twos = value.trailing_zeros();
    let odd = value >> twos;
    twos as f64 + log2_positive(odd as f64)
}

/// `log₂` of a positive float, exact whenever the argument is a power of
/// two; the sweep identities quoted in reports rely on that exactness.
fn log2_positive(x: f64) -> f64 {
    debug_assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let mantissa = bits & ((1u64 << 52) - 1);
    if mantissa == 0 {
        let exponent = ((bits >> 52) & 0x7ff) as i64 - 1023;
        return exponent as f64;
    }
    x.log2()
}

/// Classical runtimes of the three stages.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalCosts {
    /// Network training: `Gr·L·N³ + T_conv`.
    pub t_c1: f64,
    /// Deep multiclass SVMs: `(v+1)·l·g²·M³`.
    pub t_c2: f64,
    /// Clustering: `K·M·N_features`.
    pub t_c3: f64,
}

pub fn classical_costs(p: &CostParams) -> Result<ClassicalCosts> {
    p.validate()?;
    let n_cubed = (p.n * p.n * p.n) as f64;
    let t_c1 = (p.gr * p.cnn_layer_count()) as f64 * n_cubed + p.t_conv;
    let t_c2 = ((p.v + 1) * p.l * p.g * p.g) as f64 * (p.m * p.m * p.m) as f64;
    let t_c3 = (p.k_clusters * p.m * p.n_features) as f64;
    Ok(ClassicalCosts { t_c1, t_c2, t_c3 })
}

/// Quantum runtimes of the three stages.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumCosts {
    /// Identical to the classical network cost: no quantum advantage.
    pub t_q1: f64,
    /// Deep multiclass SVMs through state access and inversion.
    pub t_q2: f64,
    /// The same with the phase-estimation relative-error prefactor
    /// `ε_K⁻²·ε⁻³` on the access term.
    pub t_q2_phase_corrected: f64,
    /// Clustering; drops the extra `K` factor when clusters are well
    /// separated.
    pub t_q3: f64,
}

pub fn quantum_costs(p: &CostParams) -> Result<QuantumCosts> {
    p.validate()?;
    let classical = classical_costs(p)?;
    let nodes = ((p.v + 1) * p.l) as f64;
    let g = p.g as f64;
    let access = log2_exact(p.m_max as u128 * p.n as u128);
    let search = g.powf(1.5) * log2_exact_recip(p.delta) * (1.0 / p.eps);
    let vote = log2_exact(p.g as u128);
    let t_q2 = nodes * g * g * access + nodes * search + nodes * vote;
    let correction = (1.0 / (p.eps_k * p.eps_k)) * (1.0 / (p.eps * p.eps * p.eps));
    let t_q2_phase_corrected = nodes * g * g * correction * access + nodes * search + nodes * vote;
    let cluster_log = log2_exact(p.k_clusters as u128 * p.m as u128 * p.n_features as u128);
    let t_q3 = if p.well_separated {
        p.eps_kmeans * cluster_log
    } else {
        p.eps_kmeans * p.k_clusters as f64 * cluster_log
    };
    Ok(QuantumCosts { t_q1: classical.t_c1, t_q2, t_q2_phase_corrected, t_q3 })
}

/// `log₂(1/x)` for `x` in (0, 1).
fn log2_exact_recip(x: f64) -> f64 {
    log2_positive(1.0 / x)
}

/// Everything a sweep row reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub params: CostParams,
    pub n_mul: u64,
    pub n_act: u64,
    pub t_forward: u64,
    /// Back-propagation alone: `Gr·L·N³`.
    pub t_back: f64,
    pub t_c1: f64,
    pub t_c2: f64,
    pub t_c3: f64,
    pub t_q1: f64,
    pub t_q2: f64,
    pub t_q2_phase_corrected: f64,
    pub t_q3: f64,
    pub total_classical: f64,
    pub total_quantum: f64,
    pub speedup_svm: f64,
    pub speedup_clustering: f64,
    pub speedup_total: f64,
    /// `g(g−1)/2`; zero means no pairwise classifiers exist.
    pub pairwise_classifiers: u64,
}

pub fn evaluate(params: &CostParams) -> Result<CostReport> {
    let counts = cnn_counts(&params.layer_sizes)?;
    let classical = classical_costs(params)?;
    let quantum = quantum_costs(params)?;
    let t_back = (params.gr * params.cnn_layer_count()) as f64
        * (params.n * params.n * params.n) as f64;
    let total_classical = classical.t_c1 + classical.t_c2 + classical.t_c3;
    let total_quantum = quantum.t_q1 + quantum.t_q2 + quantum.t_q3;
    Ok(CostReport {
        params: params.clone(),
        n_mul: counts.n_mul,
        n_act: counts.n_act,
        t_forward: counts.t_forward,
        t_back,
        t_c1: classical.t_c1,
        t_c2: classical.t_c2,
        t_c3: classical.t_c3,
        t_q1: quantum.t_q1,
        t_q2: quantum.t_q2,
        t_q2_phase_corrected: quantum.t_q2_phase_corrected,
        t_q3: quantum.t_q3,
        total_classical,
        total_quantum,
        speedup_svm: classical.t_c2 / quantum.t_q2,
        speedup_clustering: classical.t_c3 / quantum.t_q3,
        speedup_total: total_classical / total_quantum,
        pairwise_classifiers: params.g * (params.g - 1) / 2,
    })
}

/// Flat CSV row mirror of [`CostParams`]; `layer_sizes` is
/// semicolon-separated.
#[derive(Debug, Serialize, Deserialize)]
struct CsvParamsRow {
    m: u64,
    m_max: u64,
    n: u64,
    g: u64,
    v: u64,
    l: u64,
    layer_sizes: String,
    gr: u64,
    k_clusters: u64,
    n_features: u64,
    eps: f64,
    eps_k: f64,
    eps_kmeans: f64,
    delta: f64,
    eps_gd: f64,
    t0: f64,
    well_separated: bool,
    t_conv: f64,
}

impl CsvParamsRow {
    fn into_params(self) -> Result<CostParams> {
        let layer_sizes = self
            .layer_sizes
            .split(';')
            .map(|s| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Config(format!("bad layer size entry {s:?}")))
            })
            .collect::<Result<Vec<u64>>>()?;
        Ok(CostParams {
            m: self.m,
            m_max: self.m_max,
            n: self.n,
            g: self.g,
            v: self.v,
            l: self.l,
            layer_sizes,
            gr: self.gr,
            k_clusters: self.k_clusters,
            n_features: self.n_features,
            eps: self.eps,
            eps_k: self.eps_k,
            eps_kmeans: self.eps_kmeans,
            delta: self.delta,
            eps_gd: self.eps_gd,
            t0: self.t0,
            well_separated: self.well_separated,
            t_conv: self.t_conv,
        })
    }
}

/// Read one [`CostParams`] per CSV row.
pub fn read_sweep_csv<R: Read>(reader: R) -> Result<Vec<CostParams>> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for record in csv_reader.deserialize::<CsvParamsRow>() {
        rows.push(record?.into_params()?);
    }
    Ok(rows)
}

/// Flat CSV output row for one evaluated sweep entry.
#[derive(Debug, Serialize)]
struct CsvReportRow<'a> {
    m: u64,
    m_max: u64,
    g: u64,
    v: u64,
    l: u64,
    n_mul: u64,
    n_act: u64,
    t_forward: u64,
    t_back: f64,
    t_c1: f64,
    t_c2: f64,
    t_c3: f64,
    t_q1: f64,
    t_q2: f64,
    t_q2_phase_corrected: f64,
    t_q3: f64,
    total_classical: f64,
    total_quantum: f64,
    speedup_svm: f64,
    speedup_clustering: f64,
    speedup_total: f64,
    pairwise_classifiers: u64,
    #[serde(skip)]
    _marker: std::marker::PhantomData<&'a ()>,
}

/// Write evaluated reports as CSV.
pub fn write_report_csv<W: Write>(reports: &[CostReport], writer: W) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    for r in reports {
        csv_writer.serialize(CsvReportRow {
            m: r.params.m,
            m_max: r.params.m_max,
            g: r.params.g,
            v: r.params.v,
            l: r.params.l,
            n_mul: r.n_mul,
            n_act: r.n_act,
            t_forward: r.t_forward,
            t_back: r.t_back,
            t_c1: r.t_c1,
            t_c2: r.t_c2,
            t_c3: r.t_c3,
            t_q1: r.t_q1,
            t_q2: r.t_q2,
            t_q2_phase_corrected: r.t_q2_phase_corrected,
            t_q3: r.t_q3,
            total_classical: r.total_classical,
            total_quantum: r.total_quantum,
            speedup_svm: r.speedup_svm,
            speedup_clustering: r.speedup_clustering,
            speedup_total: r.speedup_total,
            pairwise_classifiers: r.pairwise_classifiers,
            _marker: std::marker::PhantomData,
        })?;
    }
    csv_writer.flush().map_err(Error::Io)?;
    Ok(())
}
