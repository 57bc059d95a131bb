//! The layered SVM network: every hidden layer holds `v` multiclass SVMs
//! whose per-binary kernel expansions (bias dropped) are concatenated into
//! the next layer's input; a final multiclass SVM classifies the transformed
//! vector through the swap-test path. Layers are trained greedily against
//! the same labels; there is no joint fine-tuning.

use serde::{Deserialize, Serialize};

use crate::allpair::{train_multiclass, MulticlassSVMModel, VoteResolution};
use crate::error::{Error, Result};
use crate::lssvm::KernelSpec;
use crate::qsvm::QuantumSVMModel;
use crate::statevector::{InversionMode, ShotPlan};

/// Kernel and regularizer of one SVM node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitConfig {
    pub kernel: KernelSpec,
    pub eta: f64,
}

/// One hidden layer: its width `v` is the number of units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub units: Vec<UnitConfig>,
}

impl LayerConfig {
    /// `v` identical units.
    pub fn uniform(width: usize, kernel: KernelSpec, eta: f64) -> Self {
        LayerConfig { units: vec![UnitConfig { kernel, eta }; width] }
    }

    pub fn width(&self) -> usize {
        self.units.len()
    }
}

/// Architecture of a deep SVM stack. Zero hidden layers is a bare
/// multiclass SVM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepSVMConfig {
    pub hidden: Vec<LayerConfig>,
    pub final_unit: UnitConfig,
    pub classes: usize,
    /// Eigenvalue floor forwarded to every node; `None` applies each
    /// node's relative default.
    pub eps_k: Option<f64>,
}

impl DeepSVMConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Config("deep SVM needs at least 2 classes".into()));
        }
        if self.hidden.iter().any(|l| l.units.is_empty()) {
            return Err(Error::Config("every hidden layer needs at least one unit".into()));
        }
        Ok(())
    }

    /// Binaries per multiclass node.
    pub fn pairwise_count(&self) -> usize {
        self.classes * (self.classes - 1) / 2
    }
}

/// A trained stack, keeping its training set so the persisted form can
/// reference supports by row index.
#[derive(Clone, Debug)]
pub struct DeepSVMStack {
    pub config: DeepSVMConfig,
    pub mode: InversionMode,
    pub hidden: Vec<Vec<MulticlassSVMModel>>,
    pub final_model: MulticlassSVMModel,
    pub train_features: Vec<Vec<f64>>,
    pub train_labels: Vec<usize>,
}

/// Concatenated activations of one hidden layer on input `x`: entry
/// `(unit, pair)` is `Σᵢ αᵢ·K(xᵢ, x)` of that unit's pairwise binary, with
/// the bias left out.
pub fn layer_activation(layer: &[MulticlassSVMModel], x: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for model in layer {
        for binary in &model.binaries {
            let (_, alpha) = binary.read_parameters();
            let mut acc = 0.0;
            for (a, s) in alpha.iter().zip(&binary.supports) {
                acc += a * binary.kernel.eval(s, x)?;
            }
            out.push(acc);
        }
    }
    Ok(out)
}

/// Greedy layer-wise training: each hidden layer's units are trained on the
/// previous layer's activations with the unchanged labels, then the final
/// multiclass SVM on the last activations.
pub fn train_stack(
    config: &DeepSVMConfig,
    data: &[Vec<f64>],
    labels: &[usize],
    mode: &InversionMode,
) -> Result<DeepSVMStack> {
    config.validate()?;
    if data.len() != labels.len() {
        return Err(Error::DimensionMismatch { left: data.len(), right: labels.len() });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= config.classes) {
        return Err(Error::Config(format!("label {bad} outside 0..{}", config.classes)));
    }

    let mut inputs: Vec<Vec<f64>> = data.to_vec();
    let mut hidden = Vec::with_capacity(config.hidden.len());
    for layer_cfg in &config.hidden {
        let mut layer = Vec::with_capacity(layer_cfg.units.len());
        for unit in &layer_cfg.units {
            layer.push(train_multiclass(
                &inputs,
                labels,
                &unit.kernel,
                unit.eta,
                config.eps_k,
                mode,
            )?);
        }
        let mut next = Vec::with_capacity(inputs.len());
        for row in &inputs {
            next.push(layer_activation(&layer, row)?);
        }
        hidden.push(layer);
        inputs = next;
    }
    let final_model = train_multiclass(
        &inputs,
        labels,
        &config.final_unit.kernel,
        config.final_unit.eta,
        config.eps_k,
        mode,
    )?;
    Ok(DeepSVMStack {
        config: config.clone(),
        mode: *mode,
        hidden,
        final_model,
        train_features: data.to_vec(),
        train_labels: labels.to_vec(),
    })
}

impl DeepSVMStack {
    /// Push `x` through every hidden layer.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut current = x.to_vec();
        for layer in &self.hidden {
            current = layer_activation(layer, &current)?;
        }
        Ok(current)
    }

    /// Transform and classify through the final model's swap-test path.
    pub fn classify(
        &self,
        x: &[f64],
        plan: &ShotPlan,
        resolution: &VoteResolution,
    ) -> Result<usize> {
        let transformed = self.transform(x)?;
        self.final_model.classify_all_pairs(&transformed, plan, resolution)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&StackDoc::from_stack(self))?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str::<StackDoc>(json)?.into_stack()
    }
}

#[derive(Serialize, Deserialize)]
struct BinaryDoc {
    pair: (usize, usize),
    b: f64,
    alpha: Vec<f64>,
    /// Row indices into the node's input matrix (the raw features for
    /// layer 0, the previous layer's activations above).
    support_rows: Vec<usize>,
    eps_k: f64,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    kernel: KernelSpec,
    eta: f64,
    m_max: usize,
    binaries: Vec<BinaryDoc>,
}

#[derive(Serialize, Deserialize)]
struct StackDoc {
    schema: u32,
    config: DeepSVMConfig,
    mode: InversionMode,
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    hidden: Vec<Vec<NodeDoc>>,
    final_node: NodeDoc,
}

fn node_doc(model: &MulticlassSVMModel, labels: &[usize]) -> NodeDoc {
    let binaries = model
        .binaries
        .iter()
        .map(|binary| {
            let (i, j) = binary.class_pair.expect("stack binaries carry class pairs");
            let rows: Vec<usize> = labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == i || l == j)
                .map(|(row, _)| row)
                .collect();
            let (b, alpha) = binary.read_parameters();
            BinaryDoc { pair: (i, j), b, alpha: alpha.to_vec(), support_rows: rows, eps_k: binary.eps_k }
        })
        .collect();
    let first = &model.binaries[0];
    NodeDoc { kernel: first.kernel.clone(), eta: first.eta, m_max: model.m_max, binaries }
}

fn node_from_doc(
    doc: &NodeDoc,
    inputs: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    mode: &InversionMode,
) -> Result<MulticlassSVMModel> {
    let mut binaries = Vec::with_capacity(doc.binaries.len());
    for bdoc in &doc.binaries {
        let (i, j) = bdoc.pair;
        let supports: Vec<Vec<f64>> =
            bdoc.support_rows.iter().map(|&r| inputs[r].clone()).collect();
        let pm_labels: Vec<f64> = bdoc
            .support_rows
            .iter()
            .map(|&r| if labels[r] == i { 1.0 } else { -1.0 })
            .collect();
        let mut model = QuantumSVMModel::from_parameters(
            bdoc.b,
            bdoc.alpha.clone(),
            supports,
            pm_labels,
            doc.kernel.clone(),
            doc.eta,
            bdoc.eps_k,
            *mode,
        )?;
        model.class_pair = Some((i, j));
        model.m_max = doc.m_max;
        binaries.push(model);
    }
    Ok(MulticlassSVMModel { classes, binaries, m_max: doc.m_max })
}

impl StackDoc {
    fn from_stack(stack: &DeepSVMStack) -> Self {
        let hidden = stack
            .hidden
            .iter()
            .map(|layer| layer.iter().map(|m| node_doc(m, &stack.train_labels)).collect())
            .collect();
        StackDoc {
            schema: 1,
            config: stack.config.clone(),
            mode: stack.mode,
            features: stack.train_features.clone(),
            labels: stack.train_labels.clone(),
            hidden,
            final_node: node_doc(&stack.final_model, &stack.train_labels),
        }
    }

    fn into_stack(self) -> Result<DeepSVMStack> {
        if self.schema != 1 {
            return Err(Error::Config(format!("unknown stack schema {}", self.schema)));
        }
        let mut inputs = self.features.clone();
        let mut hidden = Vec::with_capacity(self.hidden.len());
        for layer_docs in &self.hidden {
            let mut layer = Vec::with_capacity(layer_docs.len());
            for doc in layer_docs {
                layer.push(node_from_doc(doc, &inputs, &self.labels, self.config.classes, &self.mode)?);
            }
            let mut next = Vec::with_capacity(inputs.len());
            for row in &inputs {
                next.push(layer_activation(&layer, row)?);
            }
            hidden.push(layer);
            inputs = next;
        }
        let final_model =
            node_from_doc(&self.final_node, &inputs, &self.labels, self.config.classes, &self.mode)?;
        Ok(DeepSVMStack {
            config: self.config,
            mode: self.mode,
            hidden,
            final_model,
            train_features: self.features,
            train_labels: self.labels,
        })
    }
}
