//! Four-stage experiment: seen head, gate fitting on pseudo-unseen classes,
//! final alignment and unseen head, gated evaluation.

use serde::{Deserialize, Serialize};

use crate::classifier::{gate_features, train_gate, train_head, GateConfig, GzslModel, HeadConfig};
use crate::dataset::{train_test_split, FeatureMatrix};
use crate::error::{MsfError, Result, StageExt};
use crate::semantic::{fuse_semantics, FusedSemantics, SemanticBundle, SemanticMode};
use crate::vae::{synthesize_latents, train_alignment, AlignmentConfig, AlignmentModule, EpochLoss};

use super::metrics::{gzsl_metrics, zsl_accuracy, GzslMetrics};
use super::partition::partition_validation;
use super::split::SplitSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub semantic_mode: SemanticMode,
    /// Share of each seen class kept for testing.
    pub seen_test_fraction: f64,
    pub alignment: AlignmentConfig,
    pub seen_head: HeadConfig,
    pub unseen_head: HeadConfig,
    /// Latent samples synthesized per unseen class.
    pub n_per_class: usize,
    pub gate: GateConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            seed: 0,
            semantic_mode: SemanticMode::default(),
            seen_test_fraction: 0.2,
            alignment: AlignmentConfig::default(),
            seen_head: HeadConfig::default(),
            unseen_head: HeadConfig::default(),
            n_per_class: 500,
            gate: GateConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.alignment.validate()?;
        if self.n_per_class == 0 {
            return Err(MsfError::Config("n_per_class must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.seen_test_fraction) {
            return Err(MsfError::Config(format!(
                "seen_test_fraction {} outside [0, 1)",
                self.seen_test_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.gate.threshold) {
            return Err(MsfError::Config(format!(
                "gate threshold {} outside [0, 1]",
                self.gate.threshold
            )));
        }
        for (what, h) in [("seen_head", &self.seen_head), ("unseen_head", &self.unseen_head)] {
            if h.batch_size == 0 || !(h.lr >= 0.0) {
                return Err(MsfError::Config(format!("{what}: batch_size and lr must be positive")));
            }
        }
        Ok(())
    }
}

/// Independent stream for each training stage.
fn stage_seed(seed: u64, stage: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stage.wrapping_mul(0xBF58_476D_1CE4_E5B9))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPipeline {
    pub model: GzslModel,
    pub pseudo_unseen: Vec<u32>,
    /// Per-epoch losses of the alignment fitted for the gate.
    pub inner_trace: Vec<EpochLoss>,
    pub final_trace: Vec<EpochLoss>,
}

fn fit_alignment_and_unseen_head(
    train: &FeatureMatrix,
    semantics: &FusedSemantics,
    unseen: &[u32],
    config: &ExperimentConfig,
    seed: u64,
    stages: [&'static str; 2],
) -> Result<(AlignmentModule, crate::classifier::ClassifierHead, Vec<EpochLoss>)> {
    let (module, trace) = train_alignment(
        &train.features,
        &train.labels,
        semantics,
        &config.alignment,
        stage_seed(seed, 0),
    )
    .stage(stages[0])?;
    let head = (|| {
        let (z, labels) = synthesize_latents(&module, semantics, unseen, config.n_per_class, stage_seed(seed, 1))?;
        train_head(&z, &labels, &config.unseen_head, stage_seed(seed, 2))
    })()
    .stage(stages[1])?;
    Ok((module, head, trace))
}

/// Trains every component on seen-class data `train`. `semantics` must hold a
/// prototype for every class of `split`.
pub fn train_pipeline(
    train: &FeatureMatrix,
    semantics: &FusedSemantics,
    split: &SplitSpec,
    config: &ExperimentConfig,
) -> Result<TrainedPipeline> {
    config.validate()?;
    if train.is_empty() {
        return Err(MsfError::EmptyInput("no training samples".into()));
    }
    if let Some(c) = train.labels.iter().find(|&&c| !split.is_seen(c)) {
        return Err(MsfError::Config(format!("training data contains non-seen class {c}")));
    }
    for c in split.seen_ids().into_iter().chain(split.unseen_ids()) {
        semantics.prototype_for(c)?;
    }
    let seed = config.seed;

    let seen_head = train_head(&train.features, &train.labels, &config.seen_head, stage_seed(seed, 10)).stage("seen-head")?;

    let part = partition_validation(train, split, stage_seed(seed, 20)).stage("partition")?;
    let inner_seen = train_head(
        &part.inner_train.features,
        &part.inner_train.labels,
        &config.seen_head,
        stage_seed(seed, 30),
    )
    .stage("inner-seen-head")?;
    let (inner_module, inner_unseen, inner_trace) = fit_alignment_and_unseen_head(
        &part.inner_train,
        semantics,
        &part.pseudo_unseen,
        config,
        stage_seed(seed, 40),
        ["inner-alignment", "inner-unseen-head"],
    )?;
    let gate = (|| {
        let g = gate_features(
            &inner_seen,
            &inner_unseen,
            &inner_module,
            &part.gate_val.features,
            config.gate.features,
        )?;
        train_gate(&g, &part.is_unseen, &config.gate)
    })()
    .stage("gate")?;

    let (module, unseen_head, final_trace) = fit_alignment_and_unseen_head(
        train,
        semantics,
        &split.unseen_ids(),
        config,
        stage_seed(seed, 50),
        ["alignment", "unseen-head"],
    )?;

    Ok(TrainedPipeline {
        model: GzslModel {
            module,
            seen_head,
            unseen_head,
            gate,
            gate_features: config.gate.features,
        },
        pseudo_unseen: part.pseudo_unseen,
        inner_trace,
        final_trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Learned gate.
    pub gzsl: GzslMetrics,
    /// Routing by the true seen/unseen flag.
    pub oracle: GzslMetrics,
    /// Both heads side by side with no gate.
    pub joint: GzslMetrics,
    /// Unseen-only accuracy on the unseen test samples.
    pub zsl_acc: f64,
    pub predictions: Vec<u32>,
    pub routed_unseen: Vec<bool>,
    pub prob_unseen: Vec<f64>,
}

pub fn evaluate(model: &GzslModel, test: &FeatureMatrix, split: &SplitSpec) -> Result<EvalReport> {
    let routed = model.classify_gzsl(&test.features)?;
    let gzsl = gzsl_metrics(&routed.predictions, &test.labels, split)?;
    let flags: Vec<bool> = test.labels.iter().map(|&c| split.is_unseen(c)).collect();
    let oracle_pred = model.classify_with_flags(&test.features, &flags)?;
    let oracle = gzsl_metrics(&oracle_pred, &test.labels, split)?;
    let joint = gzsl_metrics(&model.classify_joint(&test.features)?, &test.labels, split)?;
    let unseen_test = test.filter(|c| split.is_unseen(c));
    let zsl_pred = crate::classifier::classify_zsl(&model.unseen_head, &model.module, &unseen_test.features)?;
    let zsl_acc = zsl_accuracy(&zsl_pred, &unseen_test.labels)?;
    Ok(EvalReport {
        gzsl,
        oracle,
        joint,
        zsl_acc,
        predictions: routed.predictions,
        routed_unseen: routed.routed_unseen,
        prob_unseen: routed.prob_unseen,
    })
}

/// Splits `data` into train and test, fuses the semantic channels of
/// `config.semantic_mode`, trains and evaluates.
pub fn run_gzssar_experiment(
    data: &FeatureMatrix,
    bundle: &SemanticBundle,
    split: &SplitSpec,
    config: &ExperimentConfig,
) -> Result<(TrainedPipeline, EvalReport)> {
    config.validate()?;
    let ids: Vec<u32> = data.indices_by_class().into_keys().collect();
    split.check_covers(&ids).stage("split")?;
    let semantics = fuse_semantics(bundle, config.semantic_mode).stage("fusion")?;
    let (train, test) =
        train_test_split(data, split, config.seen_test_fraction, stage_seed(config.seed, 1)).stage("split")?;
    let trained = train_pipeline(&train, &semantics, split, config)?;
    let report = evaluate(&trained.model, &test, split).stage("evaluate")?;
    Ok((trained, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{generate_synthetic, SyntheticConfig};

    fn small() -> (crate::io::SyntheticDataset, SplitSpec, ExperimentConfig) {
        let data = generate_synthetic(&SyntheticConfig {
            n_classes: 8,
            samples_per_class: 40,
            skel_dim: 8,
            text_dim: 3,
            correlation: 1.0,
            noise_sigma: 0.1,
            seed: 3,
        })
        .unwrap();
        let split = SplitSpec::random("toy", &data.class_ids(), 2, 1).unwrap();
        let config = ExperimentConfig {
            name: "toy".into(),
            seed: 5,
            alignment: AlignmentConfig {
                latent_dim: 4,
                hidden: vec![16],
                epochs: 20,
                batch_size: 32,
                lr: 1e-3,
                ..AlignmentConfig::default()
            },
            seen_head: HeadConfig {
                epochs: 20,
                ..HeadConfig::default()
            },
            unseen_head: HeadConfig {
                epochs: 20,
                ..HeadConfig::default()
            },
            n_per_class: 50,
            ..ExperimentConfig::default()
        };
        (data, split, config)
    }

    #[test]
    fn runs_end_to_end_and_is_deterministic() {
        let (data, split, config) = small();
        let (a, ra) = run_gzssar_experiment(&data.samples, &data.semantics, &split, &config).unwrap();
        let (b, rb) = run_gzssar_experiment(&data.samples, &data.semantics, &split, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert_eq!(a.final_trace.len(), 20);
        assert_eq!(a.pseudo_unseen.len(), 2);
        assert!(ra.oracle.h >= ra.gzsl.h - 1e-12 || ra.oracle.acc_s < ra.gzsl.acc_s);
    }

    #[test]
    fn stage_failures_are_named() {
        let (data, split, mut config) = small();
        config.alignment.lr = f64::INFINITY;
        let err = run_gzssar_experiment(&data.samples, &data.semantics, &split, &config).unwrap_err();
        assert!(matches!(err, MsfError::Stage { stage: "inner-alignment", .. }), "{err}");
    }

    #[test]
    fn bad_config_rejected() {
        let (data, split, mut config) = small();
        config.n_per_class = 0;
        assert!(matches!(
            run_gzssar_experiment(&data.samples, &data.semantics, &split, &config),
            Err(MsfError::Config(_))
        ));
    }
}
