//! The full training loop: extract features, cluster them, turn assignments
//! into pseudo-labels, train the deep SVM on them, refit the hinge head and
//! update the feature network by backpropagation, repeated for a fixed
//! number of epochs. Deep-SVM parameters are never touched by the gradient
//! steps.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::dataset::{fnv1a_hash, Dataset};
use crate::deep_svm::{train_stack, DeepSVMConfig, DeepSVMStack};
use crate::error::{Error, Result};
use crate::feature_extractor::{
    fit_head, hinge_loss, train_step, FeatureNet, HingeHead, NetSpec,
};
use crate::metrics::{nmi, purity};
use crate::qkmeans::{qkmeans_run, ClusterResult, QKMeansParams};
use crate::statevector::{mix_seed, InversionMode, ShotPlan};

const TAG_NET_INIT: u64 = 0x4e45_5449;
const TAG_SHUFFLE: u64 = 0x5348_5546;
const TAG_KMEANS: u64 = 0x4b4d_4541;

/// Hinge-head hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub c: f64,
    pub lr: f64,
    /// Gradient-descent iterations per head refit.
    pub gr_budget: usize,
}

/// Everything one run needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub epochs: usize,
    /// Cluster count; must equal the deep SVM's class count.
    pub clusters: usize,
    pub deep_svm: DeepSVMConfig,
    pub net: NetSpec,
    pub head: HeadSpec,
    pub kmeans: QKMeansParams,
    pub plan: ShotPlan,
    pub master_seed: u64,
    /// Learning rate of the feature-network sweeps.
    pub net_lr: f64,
    /// Full-dataset gradient sweeps per epoch.
    pub net_sweeps: usize,
    pub train_mode: InversionMode,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.clusters == 0 {
            return Err(Error::Config("clusters must be >= 1".into()));
        }
        if self.clusters != self.deep_svm.classes {
            return Err(Error::Config(format!(
                "clusters ({}) must equal deep-SVM classes ({})",
                self.clusters, self.deep_svm.classes
            )));
        }
        if self.head.c <= 0.0 || self.head.lr <= 0.0 {
            return Err(Error::Config("head penalty and learning rate must be positive".into()));
        }
        if self.net_lr < 0.0 {
            return Err(Error::Config("net learning rate must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Per-epoch metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub hinge_loss: f64,
    pub kmeans_objective: f64,
    /// Fraction of points whose pseudo-label changed since the previous
    /// epoch; 1.0 on the first epoch.
    pub churn: f64,
    pub purity: Option<f64>,
    pub nmi: Option<f64>,
}

/// Mutable run state between epochs.
#[derive(Clone, Debug)]
pub struct PipelineState {
    pub config: PipelineConfig,
    pub inputs: Vec<Vec<f64>>,
    pub truth: Option<Vec<usize>>,
    pub net: FeatureNet,
    pub head: HingeHead,
    pub stack: Option<DeepSVMStack>,
    pub cluster: Option<ClusterResult>,
    /// Seed point indices the most recent epoch clustered from.
    pub last_seeds: Option<Vec<usize>>,
    prev_assignments: Option<Vec<usize>>,
    prev_centroids: Option<Vec<Vec<f64>>>,
    pub epoch: usize,
}

impl PipelineState {
    pub fn init(config: PipelineConfig, dataset: &Dataset) -> Result<Self> {
        config.validate()?;
        if dataset.is_empty() {
            return Err(Error::Config("dataset is empty".into()));
        }
        if dataset.len() < config.clusters {
            return Err(Error::Config(format!(
                "{} points cannot form {} clusters",
                dataset.len(),
                config.clusters
            )));
        }
        let net = FeatureNet::build(&config.net, mix_seed(config.master_seed, TAG_NET_INIT))?;
        if net.input_dim() != dataset.dim() {
            return Err(Error::DimensionMismatch { left: net.input_dim(), right: dataset.dim() });
        }
        let head = HingeHead::zeros(
            config.clusters,
            net.output_dim(),
            config.head.c,
            config.head.lr,
            config.head.gr_budget,
        );
        Ok(PipelineState {
            config,
            inputs: dataset.features.clone(),
            truth: dataset.labels.clone(),
            net,
            head,
            stack: None,
            cluster: None,
            last_seeds: None,
            prev_assignments: None,
            prev_centroids: None,
            epoch: 0,
        })
    }

    /// Cluster seeds: the master seed's shuffle on the first epoch, the
    /// nearest points to the previous centroids afterwards.
    fn pick_seeds(&self, features: &[Vec<f64>]) -> Vec<usize> {
        let k = self.config.clusters;
        if let Some(centroids) = &self.prev_centroids {
            let mut seeds = Vec::with_capacity(k);
            for centroid in centroids {
                let mut order: Vec<usize> = (0..features.len()).collect();
                order.sort_by(|&a, &b| {
                    let da: f64 =
                        features[a].iter().zip(centroid).map(|(x, c)| (x - c) * (x - c)).sum();
                    let db: f64 =
                        features[b].iter().zip(centroid).map(|(x, c)| (x - c) * (x - c)).sum();
                    da.partial_cmp(&db).expect("finite distances").then(a.cmp(&b))
                });
                let chosen = order
                    .into_iter()
                    .find(|idx| !seeds.contains(idx))
                    .expect("more points than clusters");
                seeds.push(chosen);
            }
            return seeds;
        }
        // first epoch: first k pairwise-distinct points of the shuffle
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(mix_seed(
            self.config.master_seed,
            TAG_SHUFFLE,
        ));
        let mut order: Vec<usize> = (0..features.len()).collect();
        order.shuffle(&mut rng);
        let mut seeds: Vec<usize> = Vec::with_capacity(k);
        for idx in order {
            if seeds.iter().all(|&s| features[s] != features[idx]) {
                seeds.push(idx);
                if seeds.len() == k {
                    break;
                }
            }
        }
        seeds
    }

    /// One full epoch; returns its report.
    pub fn run_epoch(&mut self) -> Result<EpochReport> {
        let config = self.config.clone();

        // (1) extract features
        let features: Vec<Vec<f64>> = self
            .inputs
            .iter()
            .map(|x| self.net.forward(x))
            .collect::<Result<_>>()?;

        // (2) cluster them
        let seeds = self.pick_seeds(&features);
        let plan = config.plan.child(mix_seed(TAG_KMEANS, self.epoch as u64));
        let (cluster, _zeta) =
            qkmeans_run(&features, config.clusters, &seeds, &config.kmeans, &plan)?;
        self.last_seeds = Some(seeds);

        // (3) pseudo-labels from the assignments
        let churn = match &self.prev_assignments {
            None => 1.0,
            Some(prev) => {
                let changed =
                    prev.iter().zip(&cluster.assignments).filter(|(a, b)| a != b).count();
                changed as f64 / prev.len() as f64
            }
        };

        // (4) deep SVM on the pseudo-labels; a single cluster has nothing
        // to separate, so the stack stays empty in that degenerate case
        if config.clusters >= 2 {
            self.stack =
                Some(train_stack(&config.deep_svm, &features, &cluster.assignments, &config.train_mode)?);
        }

        // (5) hinge-head refit, then network sweeps; the deep SVM above is
        // never touched from here on
        self.head = fit_head(&self.head, &features, &cluster.pseudo_labels)?;
        for _ in 0..config.net_sweeps {
            let (net, head) = train_step(
                &self.net,
                &self.head,
                &self.inputs,
                &cluster.pseudo_labels,
                config.net_lr,
                false,
            )?;
            self.net = net;
            self.head = head;
        }

        let updated_features: Vec<Vec<f64>> = self
            .inputs
            .iter()
            .map(|x| self.net.forward(x))
            .collect::<Result<_>>()?;
        let loss = hinge_loss(&self.head, &updated_features, &cluster.pseudo_labels)?;

        let report = EpochReport {
            epoch: self.epoch,
            hinge_loss: loss,
            kmeans_objective: cluster.objective,
            churn,
            purity: self.truth.as_ref().map(|t| purity(&cluster.assignments, t)),
            nmi: self.truth.as_ref().map(|t| nmi(&cluster.assignments, t)),
        };

        self.prev_assignments = Some(cluster.assignments.clone());
        self.prev_centroids = Some(cluster.centroids.clone());
        self.cluster = Some(cluster);
        self.epoch += 1;
        Ok(report)
    }
}

/// Final summary of a pipeline run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub schema: u32,
    pub epochs: usize,
    pub master_seed: u64,
    pub config_hash: String,
    pub final_hinge_loss: f64,
    pub final_kmeans_objective: f64,
    pub final_churn: f64,
    pub final_purity: Option<f64>,
    pub final_nmi: Option<f64>,
}

/// A completed run: reports plus the final state and the artifact
/// directory when one was written.
pub struct PipelineOutcome {
    pub reports: Vec<EpochReport>,
    pub summary: SummaryReport,
    pub state: PipelineState,
    pub run_dir: Option<PathBuf>,
}

/// Stable hex hash of the resolved configuration; names run directories.
pub fn config_hash(config: &PipelineConfig) -> Result<String> {
    let canonical = serde_json::to_string(config)?;
    Ok(format!("{:016x}", fnv1a_hash(canonical.as_bytes())))
}

/// Run every epoch, optionally persisting reports and artifacts under
/// `<out_dir>/run-<confighash>-<seed>/`. Deterministic given the master
/// seed in exact mode.
pub fn run_pipeline(
    config: PipelineConfig,
    dataset: &Dataset,
    out_dir: Option<&Path>,
) -> Result<PipelineOutcome> {
    let hash = config_hash(&config)?;
    let mut state = PipelineState::init(config, dataset)?;
    let mut reports = Vec::with_capacity(state.config.epochs);
    for _ in 0..state.config.epochs {
        reports.push(state.run_epoch()?);
    }
    let last = reports.last().expect("at least one epoch ran");
    let summary = SummaryReport {
        schema: 1,
        epochs: reports.len(),
        master_seed: state.config.master_seed,
        config_hash: hash.clone(),
        final_hinge_loss: last.hinge_loss,
        final_kmeans_objective: last.kmeans_objective,
        final_churn: last.churn,
        final_purity: last.purity,
        final_nmi: last.nmi,
    };

    let run_dir = match out_dir {
        None => None,
        Some(base) => {
            let dir = base.join(format!("run-{hash}-{}", state.config.master_seed));
            std::fs::create_dir_all(&dir)?;
            std::fs::write(
                dir.join("resolved_config.json"),
                serde_json::to_string_pretty(&state.config)?,
            )?;
            let mut lines = String::new();
            for report in &reports {
                lines.push_str(&serde_json::to_string(report)?);
                lines.push('\n');
            }
            std::fs::write(dir.join("epochs.jsonl"), lines)?;
            std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
            if let Some(cluster) = &state.cluster {
                std::fs::write(
                    dir.join("cluster_result.json"),
                    serde_json::to_string_pretty(cluster)?,
                )?;
            }
            if let Some(stack) = &state.stack {
                std::fs::write(dir.join("stack.json"), stack.to_json()?)?;
            }
            std::fs::write(dir.join("feature_net.json"), state.net.to_json()?)?;
            Some(dir)
        }
    };

    Ok(PipelineOutcome { reports, summary, state, run_dir })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_blobs, BlobSpec};
    use crate::deep_svm::{LayerConfig, UnitConfig};
    use crate::lssvm::KernelSpec;

    fn small_config(clusters: usize) -> PipelineConfig {
        PipelineConfig {
            epochs: 2,
            clusters,
            deep_svm: DeepSVMConfig {
                hidden: vec![LayerConfig::uniform(2, KernelSpec::Linear, 4.0)],
                final_unit: UnitConfig { kernel: KernelSpec::Linear, eta: 4.0 },
                classes: clusters,
                eps_k: None,
            },
            net: NetSpec::reference(8),
            head: HeadSpec { c: 1.0, lr: 0.01, gr_budget: 10 },
            kmeans: QKMeansParams { iters: 10, t_anneal: 50.0, steps: 100, copies: 1 },
            plan: ShotPlan::exact(),
            master_seed: 7,
            net_lr: 0.001,
            net_sweeps: 2,
            train_mode: InversionMode::ExactSpectral,
        }
    }

    fn blobs() -> Dataset {
        make_blobs(&BlobSpec {
            blobs: 3,
            per_blob: 10,
            dim: 8,
            std: 1.0,
            separation: 6.0,
            seed: 99,
        })
        .unwrap()
    }

    #[test]
    fn cluster_class_mismatch_is_rejected() {
        let mut config = small_config(3);
        config.deep_svm.classes = 2;
        assert!(matches!(config.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn first_epoch_reports_full_churn() {
        let dataset = blobs();
        let mut state = PipelineState::init(small_config(3), &dataset).unwrap();
        let report = state.run_epoch().unwrap();
        assert_eq!(report.epoch, 0);
        assert_eq!(report.churn, 1.0);
        assert!(report.hinge_loss.is_finite());
        assert!(report.kmeans_objective.is_finite());
        assert!(report.purity.unwrap() > 0.3);
    }

    #[test]
    fn single_cluster_settles_immediately() {
        let dataset = blobs();
        let mut config = small_config(1);
        config.deep_svm.classes = 1;
        config.epochs = 3;
        let outcome = run_pipeline(config, &dataset, None).unwrap();
        // largest class share of three equal blobs
        let expected = 10.0 / 30.0;
        assert!((outcome.summary.final_purity.unwrap() - expected).abs() < 1e-12);
        assert_eq!(outcome.reports[1].churn, 0.0);
        assert_eq!(outcome.reports[2].churn, 0.0);
        assert!(outcome.state.stack.is_none());
    }

    #[test]
    fn deterministic_given_master_seed() {
        let dataset = blobs();
        let a = run_pipeline(small_config(3), &dataset, None).unwrap();
        let b = run_pipeline(small_config(3), &dataset, None).unwrap();
        assert_eq!(
            serde_json::to_string(&a.reports).unwrap(),
            serde_json::to_string(&b.reports).unwrap()
        );
        assert_eq!(a.state.net.to_json().unwrap(), b.state.net.to_json().unwrap());
    }

    #[test]
    fn frozen_fixpoint_epoch_changes_nothing() {
        let dataset = blobs();
        let mut config = small_config(3);
        config.net_lr = 0.0;
        config.head.gr_budget = 0;
        config.epochs = 1;
        let mut state = PipelineState::init(config, &dataset).unwrap();

        // with frozen features the warm-started clustering reaches an
        // assignment fixpoint within a few epochs
        let mut settled = false;
        for _ in 0..10 {
            if state.run_epoch().unwrap().churn == 0.0 {
                settled = true;
                break;
            }
        }
        assert!(settled, "clustering never reached a fixpoint");

        let net_snapshot = state.net.to_json().unwrap();
        let head_snapshot = serde_json::to_string(&state.head).unwrap();
        let stack_snapshot = state.stack.as_ref().unwrap().to_json().unwrap();

        let next = state.run_epoch().unwrap();
        assert_eq!(next.churn, 0.0);
        assert_eq!(state.net.to_json().unwrap(), net_snapshot);
        assert_eq!(serde_json::to_string(&state.head).unwrap(), head_snapshot);
        assert_eq!(state.stack.as_ref().unwrap().to_json().unwrap(), stack_snapshot);
    }

    #[test]
    fn first_epoch_objective_matches_lloyd_from_the_same_seeds() {
        use crate::qkmeans::lloyd_classical;
        let dataset = blobs();
        let mut config = small_config(3);
        config.net_lr = 0.0; // features stay reproducible after the epoch
        let mut state = PipelineState::init(config, &dataset).unwrap();
        let report = state.run_epoch().unwrap();

        let features: Vec<Vec<f64>> =
            state.inputs.iter().map(|x| state.net.forward(x).unwrap()).collect();
        let seeds = state.last_seeds.clone().unwrap();
        let lloyd = lloyd_classical(&features, 3, &seeds, state.config.kmeans.iters).unwrap();
        assert!(
            (report.kmeans_objective - lloyd.objective).abs() <= 1e-6,
            "quantum objective {} vs Lloyd {}",
            report.kmeans_objective,
            lloyd.objective
        );
        assert_eq!(state.cluster.as_ref().unwrap().assignments, lloyd.assignments);
    }

    #[test]
    fn frozen_features_keep_the_objective_non_increasing() {
        // with lr = 0 the features never move, so the warm-started
        // clustering behaves like pure Lloyd iteration across epochs
        let dataset = blobs();
        let mut config = small_config(3);
        config.net_lr = 0.0;
        config.epochs = 6;
        let outcome = run_pipeline(config, &dataset, None).unwrap();
        let objectives: Vec<f64> =
            outcome.reports.iter().map(|r| r.kmeans_objective).collect();
        for window in objectives.windows(2) {
            assert!(
                window[1] <= window[0] + 1e-9,
                "objective increased across epochs: {objectives:?}"
            );
        }
    }

    #[test]
    fn run_directory_contains_all_artifacts() {
        let dataset = blobs();
        let tmp = std::env::temp_dir().join(format!("qdc-pipeline-test-{}", std::process::id()));
        let outcome = run_pipeline(small_config(3), &dataset, Some(&tmp)).unwrap();
        let dir = outcome.run_dir.unwrap();
        for file in [
            "resolved_config.json",
            "epochs.jsonl",
            "summary.json",
            "cluster_result.json",
            "stack.json",
            "feature_net.json",
        ] {
            assert!(dir.join(file).exists(), "missing artifact {file}");
        }
        let lines = std::fs::read_to_string(dir.join("epochs.jsonl")).unwrap();
        assert_eq!(lines.lines().count(), 2);
        std::fs::remove_dir_all(&tmp).ok();
    }
}
