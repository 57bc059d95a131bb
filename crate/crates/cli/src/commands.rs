//! Subcommand implementations. Each run writes its resolved configuration
//! next to its reports so the directory alone reproduces the run.

use serde::Serialize;
use std::path::{Path, PathBuf};

use qdc_core::allpair::{train_multiclass, VoteResolution};
use qdc_core::dataset::{self, BlobSpec, Dataset};
use qdc_core::lssvm::{assemble_system, build_kernel_matrix, solve_classical};
use qdc_core::metrics::{nmi, purity};
use qdc_core::pipeline::{run_pipeline, PipelineConfig};
use qdc_core::qkmeans::{lloyd_classical, qkmeans_run};
use qdc_core::statevector::{encode_amplitudes, mix_seed, ExecMode, ShotPlan};
use qdc_core::{Error, Result};

use crate::config::{ClusterSection, CostSection, PipelineSection, RunConfig, SvmSection};

pub struct GenerateArgs {
    pub out: PathBuf,
    pub blobs: usize,
    pub per_blob: usize,
    pub dim: usize,
    pub std: f64,
    pub separation: f64,
    pub seed: u64,
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let spec = BlobSpec {
        blobs: args.blobs,
        per_blob: args.per_blob,
        dim: args.dim,
        std: args.std,
        separation: args.separation,
        seed: args.seed,
    };
    let data = dataset::make_blobs(&spec)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    dataset::write_csv_file(&data, &args.out)?;
    println!("wrote {} rows to {}", data.len(), args.out.display());
    Ok(())
}

fn shot_plan(config: &RunConfig) -> ShotPlan {
    match config.mode.unwrap_or(ExecMode::Exact) {
        ExecMode::Exact => ShotPlan { shots: config.shots.unwrap_or(1), seed: config.seed, mode: ExecMode::Exact },
        ExecMode::Sampled => ShotPlan::sampled(config.shots.unwrap_or(10_000), config.seed),
    }
}

fn run_dir(config: &RunConfig, command: &str) -> Result<PathBuf> {
    let base = config.out.clone().unwrap_or_else(|| PathBuf::from("qdc-runs"));
    let canonical = serde_json::to_string(config)?;
    let hash = dataset::fnv1a_hash(canonical.as_bytes());
    let dir = base.join(format!("{command}-{hash:016x}-{}", config.seed));
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("resolved_config.json"), serde_json::to_string_pretty(config)?)?;
    Ok(dir)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    std::fs::write(dir.join(name), serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn load_labeled(path: &Path) -> Result<(Dataset, Vec<usize>)> {
    let data = dataset::read_csv_file(path)?;
    let labels = data
        .labels
        .clone()
        .ok_or_else(|| Error::Config(format!("dataset {} has no label column", path.display())))?;
    Ok((data, labels))
}

#[derive(Serialize)]
struct BinaryReport {
    class_pair: (usize, usize),
    samples: usize,
    fidelity_vs_classical: f64,
}

#[derive(Serialize)]
struct SvmReport {
    schema: u32,
    classes: usize,
    training_accuracy: f64,
    classical_agreement: f64,
    min_fidelity: f64,
    binaries: Vec<BinaryReport>,
}

pub fn cmd_train_svm(config: &RunConfig, section: &SvmSection) -> Result<()> {
    let (data, labels) = load_labeled(&section.dataset)?;
    let plan = shot_plan(config);
    let model = train_multiclass(
        &data.features,
        &labels,
        &section.kernel,
        section.eta,
        section.eps_k,
        &section.train_mode,
    )?;

    let mut binaries = Vec::new();
    let mut min_fidelity = f64::INFINITY;
    for binary in &model.binaries {
        let k = build_kernel_matrix(&binary.supports, &binary.kernel)?;
        let sys = assemble_system(&k, &binary.labels, binary.eta)?;
        let sol = solve_classical(&sys)?;
        let mut packed = vec![sol.b];
        packed.extend_from_slice(&sol.alpha);
        let (reference, _) = encode_amplitudes(&packed)?;
        let fidelity = binary.state.inner(&reference)?.norm();
        min_fidelity = min_fidelity.min(fidelity);
        binaries.push(BinaryReport {
            class_pair: binary.class_pair.expect("trained pairs are tagged"),
            samples: binary.num_samples(),
            fidelity_vs_classical: fidelity,
        });
    }

    let resolution = VoteResolution::default_grover(model.classes);
    let mut hits = 0;
    let mut classical_hits = 0;
    for (x, &label) in data.features.iter().zip(&labels) {
        let predicted = model.classify_all_pairs(x, &plan, &resolution)?;
        if predicted == label {
            hits += 1;
        }
        let oracle = model.classify_all_pairs(x, &plan, &VoteResolution::ClassicalMajority)?;
        if predicted == oracle {
            classical_hits += 1;
        }
    }
    let report = SvmReport {
        schema: 1,
        classes: model.classes,
        training_accuracy: hits as f64 / data.len() as f64,
        classical_agreement: classical_hits as f64 / data.len() as f64,
        min_fidelity,
        binaries,
    };

    let dir = run_dir(config, "train-svm")?;
    write_json(&dir, "report.json", &report)?;
    println!(
        "train-svm: accuracy {:.4}, min fidelity {:.6}, artifacts in {}",
        report.training_accuracy,
        report.min_fidelity,
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ClusterReport {
    schema: u32,
    k: usize,
    objective: f64,
    iterations: usize,
    lloyd_agreement: f64,
    purity: Option<f64>,
    nmi: Option<f64>,
}

pub fn cmd_cluster(config: &RunConfig, section: &ClusterSection) -> Result<()> {
    let data = dataset::read_csv_file(&section.dataset)?;
    let plan = shot_plan(config);
    let seeds = match &section.seed_indices {
        Some(seeds) => seeds.clone(),
        None => {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(mix_seed(config.seed, 0x5345_4544));
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut rng);
            order.truncate(section.k);
            order
        }
    };
    let (result, _state) = qkmeans_run(&data.features, section.k, &seeds, &section.kmeans, &plan)?;
    let lloyd = lloyd_classical(&data.features, section.k, &seeds, section.kmeans.iters)?;
    let agree = result
        .assignments
        .iter()
        .zip(&lloyd.assignments)
        .filter(|(a, b)| a == b)
        .count() as f64
        / data.len() as f64;
    let report = ClusterReport {
        schema: 1,
        k: section.k,
        objective: result.objective,
        iterations: result.objective_history.len(),
        lloyd_agreement: agree,
        purity: data.labels.as_ref().map(|t| purity(&result.assignments, t)),
        nmi: data.labels.as_ref().map(|t| nmi(&result.assignments, t)),
    };

    let dir = run_dir(config, "cluster")?;
    write_json(&dir, "cluster_result.json", &result)?;
    write_json(&dir, "report.json", &report)?;
    println!(
        "cluster: objective {:.6}, lloyd agreement {:.4}, artifacts in {}",
        report.objective,
        report.lloyd_agreement,
        dir.display()
    );
    Ok(())
}

pub fn cmd_deep_cluster(config: &RunConfig, section: &PipelineSection) -> Result<()> {
    let data = dataset::read_csv_file(&section.dataset)?;
    let pipeline_config = PipelineConfig {
        epochs: section.epochs,
        clusters: section.clusters,
        deep_svm: section.deep_svm.clone(),
        net: section.net.clone(),
        head: section.head,
        kmeans: section.kmeans,
        plan: shot_plan(config),
        master_seed: config.seed,
        net_lr: section.net_lr,
        net_sweeps: section.net_sweeps,
        train_mode: section.train_mode,
    };
    let base = config.out.clone().unwrap_or_else(|| PathBuf::from("qdc-runs"));
    let outcome = run_pipeline(pipeline_config, &data, Some(&base))?;
    let dir = outcome.run_dir.as_ref().expect("pipeline run wrote artifacts");
    // the CLI-level resolved config sits beside the pipeline's own copy
    std::fs::write(dir.join("cli_config.json"), serde_json::to_string_pretty(config)?)?;
    println!(
        "deep-cluster: {} epochs, final purity {}, artifacts in {}",
        outcome.summary.epochs,
        outcome
            .summary
            .final_purity
            .map_or("n/a".to_string(), |p| format!("{p:.4}")),
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct CostSweepReport {
    schema: u32,
    rows: Vec<qdc_core::cost_model::CostReport>,
}

pub fn cmd_cost(config: &RunConfig, section: &CostSection) -> Result<()> {
    let file = std::fs::File::open(&section.sweep)
        .map_err(|e| Error::Config(format!("cannot read sweep {}: {e}", section.sweep.display())))?;
    let params = qdc_core::cost_model::read_sweep_csv(file)?;
    let reports = params
        .iter()
        .map(qdc_core::cost_model::evaluate)
        .collect::<Result<Vec<_>>>()?;

    let dir = run_dir(config, "cost")?;
    write_json(&dir, "report.json", &CostSweepReport { schema: 1, rows: reports.clone() })?;
    let csv_file = std::fs::File::create(dir.join("report.csv"))?;
    qdc_core::cost_model::write_report_csv(&reports, csv_file)?;
    println!("cost: evaluated {} rows, artifacts in {}", reports.len(), dir.display());
    Ok(())
}
