use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::MsfError;
use crate::semantic::FusedSemantics;
use crate::tensor::{dot, grad_check, l2_norm, GradCheckOptions, Matrix, Params};

fn tiny_module(seed: u64, weights: LossWeights) -> AlignmentModule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AlignmentModule::init(3, 4, &[5], 2, weights, &mut rng).unwrap()
}

struct Fixture {
    skel: Matrix,
    text: Matrix,
    eps_s: Matrix,
    eps_t: Matrix,
}

impl Fixture {
    fn new(b: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Fixture {
            skel: Matrix::random_normal(b, 3, 1.0, &mut rng),
            text: Matrix::random_normal(b, 4, 1.0, &mut rng),
            eps_s: standard_normal_matrix(b, 2, &mut rng),
            eps_t: standard_normal_matrix(b, 2, &mut rng),
        }
    }

    fn batch(&self) -> AlignmentBatch<'_> {
        AlignmentBatch {
            skeleton: &self.skel,
            text: &self.text,
            eps_skeleton: &self.eps_s,
            eps_text: &self.eps_t,
        }
    }
}

#[test]
fn encode_shapes_and_zero_encoder() {
    let m = tiny_module(1, LossWeights::default());
    let g = m.skeleton.encode(&Matrix::from_rows(&[[0.1, 0.2, 0.3]]).unwrap()).unwrap();
    assert_eq!(g.mu.shape(), (1, 2));
    assert_eq!(g.log_var.shape(), (1, 2));
    assert!(matches!(m.skeleton.encode(&Matrix::zeros(1, 4)), Err(MsfError::Shape(_))));

    let zero = m.zeros_like();
    let g = zero.skeleton.encode(&Matrix::from_rows(&[[5.0, -1.0, 2.0]]).unwrap()).unwrap();
    assert!(g.mu.as_slice().iter().chain(g.log_var.as_slice()).all(|&v| v == 0.0));
}

#[test]
fn log_var_is_clamped() {
    let mut m = tiny_module(2, LossWeights::default());
    m.text.log_var_head.bias = vec![1e9, -1e9];
    let g = m.text.encode(&Matrix::zeros(1, 4)).unwrap();
    assert_eq!(g.log_var.row(0), &[20.0, -20.0]);
}

#[test]
fn all_terms_vanish_on_perfect_reconstruction() {
    let m = tiny_module(3, LossWeights::default()).zeros_like();
    let f = Fixture {
        skel: Matrix::zeros(2, 3),
        text: Matrix::zeros(2, 4),
        eps_s: Matrix::zeros(2, 2),
        eps_t: Matrix::zeros(2, 2),
    };
    let l = m.total_loss(&f.batch()).unwrap();
    assert_eq!(l.total, 0.0);
    assert_eq!(l.skeleton.parts, LossParts::default());
}

#[test]
fn align_term_is_euclidean_norm() {
    let m = tiny_module(3, LossWeights::default()).zeros_like();
    let f = Fixture {
        skel: Matrix::zeros(1, 3),
        text: Matrix::from_rows(&[[3.0, 4.0, 0.0, 0.0]]).unwrap(),
        eps_s: Matrix::zeros(1, 2),
        eps_t: Matrix::zeros(1, 2),
    };
    let l = m.branch_loss(Modality::Skeleton, &f.batch()).unwrap();
    assert_eq!(l.parts.align, 5.0);
    assert_eq!(l.total, 5.0);

    let sq = LossWeights {
        align_norm: AlignNorm::SquaredL2,
        ..Default::default()
    };
    let l = m.branch_loss_with(Modality::Skeleton, &f.batch(), sq).unwrap();
    assert_eq!(l.parts.align, 25.0);
}

#[test]
fn total_is_sum_of_branches() {
    let m = tiny_module(4, LossWeights { alpha: 0.7, beta: 1.3, align_norm: AlignNorm::L2 });
    let f = Fixture::new(5, 40);
    let t = m.total_loss(&f.batch()).unwrap();
    let s = m.branch_loss(Modality::Skeleton, &f.batch()).unwrap();
    let x = m.branch_loss(Modality::Text, &f.batch()).unwrap();
    assert_eq!(t.total, s.total + x.total);
}

fn check_branch(source: Option<Modality>, weights: LossWeights, seed: u64) -> f64 {
    let m = tiny_module(seed, weights);
    let f = Fixture::new(6, seed + 100);
    let loss = |flat: &[f64]| {
        let mut mm = m.clone();
        mm.load_flat(flat)?;
        let batch = f.batch();
        match source {
            Some(src) => {
                let mut g = mm.zeros_like();
                let l = mm.branch_loss_grad(src, &batch, weights, &mut g)?;
                Ok((l.total, g.flatten()))
            }
            None => {
                let (l, g) = mm.total_loss_grad(&batch, weights)?;
                Ok((l.total, g.flatten()))
            }
        }
    };
    let opts = GradCheckOptions {
        max_coords: None,
        ..Default::default()
    };
    grad_check(loss, &m.flatten(), opts).unwrap()
}

#[test]
fn branch_gradients_match_finite_differences() {
    let w = LossWeights {
        alpha: 0.8,
        beta: 0.6,
        align_norm: AlignNorm::L2,
    };
    for src in [Modality::Skeleton, Modality::Text] {
        let err = check_branch(Some(src), w, 7);
        assert!(err < 1e-4, "{src:?}: {err}");
    }
    let sq = LossWeights {
        align_norm: AlignNorm::SquaredL2,
        ..w
    };
    assert!(check_branch(Some(Modality::Skeleton), sq, 8) < 1e-4);
}

#[test]
fn total_gradient_matches_finite_differences() {
    let err = check_branch(None, LossWeights::default(), 9);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn zero_alpha_beta_decouples_branches() {
    let w = LossWeights {
        alpha: 0.0,
        beta: 0.0,
        align_norm: AlignNorm::L2,
    };
    let m = tiny_module(10, w);
    let f = Fixture::new(4, 11);
    let mut g = m.zeros_like();
    m.branch_loss_grad(Modality::Skeleton, &f.batch(), w, &mut g).unwrap();
    assert!(g.text.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    assert!(g.skeleton.decoder.flatten().iter().any(|&v| v != 0.0));
}

#[test]
fn total_loss_is_row_permutation_invariant() {
    let m = tiny_module(12, LossWeights::default());
    let f = Fixture::new(7, 13);
    let perm = [3, 0, 6, 1, 5, 2, 4];
    let p = Fixture {
        skel: f.skel.select_rows(&perm),
        text: f.text.select_rows(&perm),
        eps_s: f.eps_s.select_rows(&perm),
        eps_t: f.eps_t.select_rows(&perm),
    };
    let a = m.total_loss(&f.batch()).unwrap().total;
    let b = m.total_loss(&p.batch()).unwrap().total;
    assert!((a - b).abs() < 1e-9);
}

fn two_class_data(seed: u64, per_class: usize) -> (Matrix, Vec<u32>, FusedSemantics) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let protos = Matrix::from_rows(&[[1.0, 0.0, 0.5, -0.5], [-1.0, 0.5, 0.0, 1.0]]).unwrap();
    let centers = Matrix::from_rows(&[[2.0, -1.0, 0.0], [-1.0, 1.0, 2.0]]).unwrap();
    let noise = Matrix::random_normal(2 * per_class, 3, 0.1, &mut rng);
    let mut feats = Matrix::zeros(2 * per_class, 3);
    let mut labels = Vec::new();
    for i in 0..2 * per_class {
        let c = i % 2;
        for d in 0..3 {
            feats.set(i, d, centers.get(c, d) + noise.get(i, d));
        }
        labels.push(c as u32);
    }
    (feats, labels, FusedSemantics::new(vec![0, 1], protos).unwrap())
}

fn small_config(epochs: usize) -> AlignmentConfig {
    AlignmentConfig {
        latent_dim: 2,
        hidden: vec![8],
        epochs,
        batch_size: 8,
        lr: 1e-2,
        ..Default::default()
    }
}

#[test]
fn training_reduces_loss_and_is_deterministic() {
    let (x, y, p) = two_class_data(1, 10);
    let cfg = small_config(50);
    let (m1, trace) = train_alignment(&x, &y, &p, &cfg, 42).unwrap();
    assert_eq!(trace.len(), 50);
    assert!(trace.last().unwrap().total < trace[0].total);
    let (m2, trace2) = train_alignment(&x, &y, &p, &cfg, 42).unwrap();
    assert_eq!(m1.flatten(), m2.flatten());
    assert_eq!(trace, trace2);
}

#[test]
fn zero_learning_rate_freezes_parameters() {
    let (x, y, p) = two_class_data(1, 10);
    let cfg = AlignmentConfig {
        lr: 0.0,
        ..small_config(5)
    };
    let (trained, _) = train_alignment(&x, &y, &p, &cfg, 3).unwrap();
    let fresh = AlignmentModule::init(3, 4, &[8], 2, cfg.weights(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(trained, fresh);
}

#[test]
fn training_requires_prototypes() {
    let (x, mut y, p) = two_class_data(1, 4);
    y[0] = 9;
    assert!(matches!(
        train_alignment(&x, &y, &p, &small_config(1), 0),
        Err(MsfError::Lookup(_))
    ));
}

#[test]
fn beta_warmup_ramp() {
    let cfg = AlignmentConfig {
        beta: 2.0,
        beta_warmup: true,
        epochs: 100,
        ..Default::default()
    };
    assert!((cfg.beta_at(0) - 0.2).abs() < 1e-12);
    assert!((cfg.beta_at(4) - 1.0).abs() < 1e-12);
    assert_eq!(cfg.beta_at(9), 2.0);
    assert_eq!(cfg.beta_at(50), 2.0);
}

#[test]
fn synthesis_counts_and_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = AlignmentModule::init(3, 4, &[6], 3, LossWeights::default(), &mut rng).unwrap();
    let protos = FusedSemantics::new((10..15).collect(), Matrix::random_normal(5, 4, 1.0, &mut rng)).unwrap();
    let ids: Vec<u32> = (10..15).collect();
    let (z, labels) = synthesize_latents(&m, &protos, &ids, 500, 1).unwrap();
    assert_eq!(z.shape(), (2500, 3));
    for id in &ids {
        assert_eq!(labels.iter().filter(|&&l| l == *id).count(), 500);
    }
    let (z2, _) = synthesize_latents(&m, &protos, &ids, 500, 1).unwrap();
    assert_eq!(z, z2);
    assert!(matches!(
        synthesize_latents(&m, &protos, &[99], 1, 0),
        Err(MsfError::Lookup(_))
    ));
}

#[test]
fn degenerate_variance_collapses_to_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut m = AlignmentModule::init(3, 4, &[6], 3, LossWeights::default(), &mut rng).unwrap();
    m.text.log_var_head.weight = Matrix::zeros(3, 6);
    m.text.log_var_head.bias = vec![f64::NEG_INFINITY; 3];
    let protos = FusedSemantics::new(vec![0, 1], Matrix::random_normal(2, 4, 1.0, &mut rng)).unwrap();
    let (z, labels) = synthesize_latents(&m, &protos, &[0, 1], 50, 2).unwrap();
    let mu = embed_text(&m, protos.matrix()).unwrap();
    // σ bottoms out at exp(-10) under the clamp
    for (r, l) in labels.iter().enumerate() {
        for (a, b) in z.row(r).iter().zip(mu.row(*l as usize)) {
            assert!((a - b).abs() < 5.0 * (-10f64).exp());
        }
    }
}

#[test]
fn synthesized_mean_tracks_encoder_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = AlignmentModule::init(3, 4, &[6], 2, LossWeights::default(), &mut rng).unwrap();
    let protos = FusedSemantics::new(vec![3], Matrix::random_normal(1, 4, 1.0, &mut rng)).unwrap();
    let n = 100_000;
    let (z, _) = synthesize_latents(&m, &protos, &[3], n, 8).unwrap();
    let post = m.text.encode(protos.matrix()).unwrap();
    let mean = z.sum_rows();
    for d in 0..2 {
        let sigma = (0.5 * post.log_var.get(0, d)).exp();
        let err = (mean[d] / n as f64 - post.mu.get(0, d)).abs();
        assert!(err < 4.0 * sigma / (n as f64).sqrt(), "dim {d}: {err}");
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (l2_norm(a) * l2_norm(b))
}

#[test]
fn embeddings_align_with_own_class_text() {
    let (x, y, p) = two_class_data(2, 40);
    let cfg = AlignmentConfig {
        epochs: 300,
        ..small_config(0)
    };
    let (m, _) = train_alignment(&x, &y, &p, &cfg, 5).unwrap();
    let e1 = embed_skeleton(&m, &x).unwrap();
    let e2 = embed_skeleton(&m, &x).unwrap();
    assert_eq!(e1, e2);
    assert_eq!(e1.cols(), 2);
    let text_mu = embed_text(&m, p.matrix()).unwrap();
    let (mut within, mut between, mut nw, mut nb) = (0.0, 0.0, 0, 0);
    for (r, &l) in y.iter().enumerate() {
        for c in 0..2u32 {
            let s = cosine(e1.row(r), text_mu.row(c as usize));
            if c == l {
                within += s;
                nw += 1;
            } else {
                between += s;
                nb += 1;
            }
        }
    }
    assert!(within / nw as f64 > between / nb as f64);
}
