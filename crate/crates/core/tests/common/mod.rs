//! Shared test support: an all-classical deep LS-SVM oracle (direct solves
//! at every node, no quantum path anywhere) and random problem generators.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use qdc_core::deep_svm::DeepSVMConfig;
use qdc_core::lssvm::BinarySVMModel;
use qdc_core::KernelSpec;

/// One multiclass node made of classical pairwise solves.
pub struct ClassicalNode {
    pub classes: usize,
    pub binaries: Vec<BinarySVMModel>,
}

impl ClassicalNode {
    pub fn train(data: &[Vec<f64>], labels: &[usize], kernel: &KernelSpec, eta: f64) -> Self {
        let classes = labels.iter().max().map_or(0, |&g| g + 1);
        let mut binaries = Vec::new();
        for i in 0..classes {
            for j in (i + 1)..classes {
                let mut subset = Vec::new();
                let mut pm = Vec::new();
                for (row, &label) in data.iter().zip(labels) {
                    if label == i {
                        subset.push(row.clone());
                        pm.push(1.0);
                    } else if label == j {
                        subset.push(row.clone());
                        pm.push(-1.0);
                    }
                }
                let mut model =
                    BinarySVMModel::train(&subset, &pm, kernel, eta).expect("oracle solve");
                model.class_pair = Some((i, j));
                binaries.push(model);
            }
        }
        ClassicalNode { classes, binaries }
    }

    /// Concatenated kernel expansions of every pairwise binary, bias
    /// dropped, in training order.
    pub fn activation(&self, x: &[f64]) -> Vec<f64> {
        self.binaries
            .iter()
            .map(|binary| {
                binary
                    .alpha
                    .iter()
                    .zip(&binary.supports)
                    .map(|(a, s)| a * binary.kernel.eval(s, x).expect("kernel"))
                    .sum()
            })
            .collect()
    }

    /// Majority vote over pairwise decision signs; ties to the lowest
    /// class index.
    pub fn classify(&self, x: &[f64]) -> usize {
        let mut counts = vec![0usize; self.classes];
        for binary in &self.binaries {
            let (i, j) = binary.class_pair.expect("pairs tagged");
            let d = binary.decision_value(x).expect("decision");
            counts[if d > 0.0 { i } else { j }] += 1;
        }
        let mut best = 0;
        for c in 1..self.classes {
            if counts[c] > counts[best] {
                best = c;
            }
        }
        best
    }
}

/// The all-classical stack: same greedy layer-wise structure, classical
/// solves throughout.
pub struct ClassicalStack {
    pub hidden: Vec<Vec<ClassicalNode>>,
    pub final_node: ClassicalNode,
}

impl ClassicalStack {
    pub fn train(config: &DeepSVMConfig, data: &[Vec<f64>], labels: &[usize]) -> Self {
        let mut inputs: Vec<Vec<f64>> = data.to_vec();
        let mut hidden = Vec::new();
        for layer_cfg in &config.hidden {
            let layer: Vec<ClassicalNode> = layer_cfg
                .units
                .iter()
                .map(|unit| ClassicalNode::train(&inputs, labels, &unit.kernel, unit.eta))
                .collect();
            inputs = inputs.iter().map(|row| layer_activation(&layer, row)).collect();
            hidden.push(layer);
        }
        let final_node =
            ClassicalNode::train(&inputs, labels, &config.final_unit.kernel, config.final_unit.eta);
        ClassicalStack { hidden, final_node }
    }

    pub fn classify(&self, x: &[f64]) -> usize {
        let mut current = x.to_vec();
        for layer in &self.hidden {
            current = layer_activation(layer, &current);
        }
        self.final_node.classify(&current)
    }
}

fn layer_activation(layer: &[ClassicalNode], x: &[f64]) -> Vec<f64> {
    layer.iter().flat_map(|node| node.activation(x)).collect()
}

/// Random labeled problem with entries in ±1 boxes.
pub fn random_problem(rng: &mut ChaCha12Rng, m: usize, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let data: Vec<Vec<f64>> =
        (0..m).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let labels: Vec<f64> = (0..m).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    (data, labels)
}

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
