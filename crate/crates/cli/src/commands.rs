use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use msf_core::classifier::classify_zsl;
use msf_core::dataset::{train_test_split, FeatureMatrix};
use msf_core::eval::{evaluate, train_pipeline, zsl_accuracy, GzslMetrics, PUBLISHED_ROWS};
use msf_core::io::{
    atomic_write, generate_synthetic, read_checkpoint, read_features, read_split_manifest, write_checkpoint,
    write_class_names, write_features, write_split_manifest, Checkpoint, CheckpointHeader, Dtype,
};
use msf_core::selfcheck::{run_selfcheck, GRAD_TOLERANCE, KL_TOLERANCE};
use msf_core::semantic::Channel;
use msf_core::vae::EpochLoss;
use msf_core::{fuse_semantics, SemanticBundle, SplitSpec};

use crate::config::{require, Mode, RunConfig};

pub const SKELETON_TRAIN: &str = "skeleton_train.msff";
pub const SKELETON_TEST: &str = "skeleton_test.msff";
pub const TEXT_FILES: [(Channel, &str); 3] = [
    (Channel::Label, "text_lb.msff"),
    (Channel::Action, "text_ad.msff"),
    (Channel::Motion, "text_md.msff"),
];
pub const CHECKPOINT: &str = "model.ckpt";
pub const LOSS_TRACE: &str = "loss_trace.csv";
pub const METRICS: &str = "metrics.csv";
pub const SUMMARY: &str = "summary.txt";
pub const PREDICTIONS: &str = "predictions.csv";

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner().context("flushing csv")?)
}

fn read_labelled(path: &Path) -> Result<FeatureMatrix> {
    require(path)?;
    let (m, labels) = read_features(path)?;
    let labels = labels.with_context(|| format!("{} has no class labels", path.display()))?;
    Ok(FeatureMatrix::new(m, labels)?)
}

pub fn synth(cfg: &RunConfig, split_override: Option<&Path>) -> Result<()> {
    cfg.validate()?;
    let gen = &cfg.synthetic.generator;
    let data = generate_synthetic(gen)?;
    let ids = data.class_ids();
    let split = match split_override {
        Some(p) => read_split_manifest(p)?,
        None => SplitSpec::random(
            format!("synthetic-{}-{}", ids.len() - cfg.synthetic.n_unseen, cfg.synthetic.n_unseen),
            &ids,
            cfg.synthetic.n_unseen,
            gen.seed,
        )?,
    };
    split.check_covers(&ids)?;
    let (train, test) = train_test_split(&data.samples, &split, cfg.experiment.seen_test_fraction, gen.seed)?;

    let dir = cfg.data_dir();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_features(dir.join(SKELETON_TRAIN), &train.features, Some(&train.labels), Dtype::F64)?;
    write_features(dir.join(SKELETON_TEST), &test.features, Some(&test.labels), Dtype::F64)?;
    for (ch, name) in TEXT_FILES {
        let m = data.semantics.channel(ch).expect("generator fills every channel");
        write_features(dir.join(name), m, Some(&ids), Dtype::F64)?;
    }
    write_features(dir.join("projection.msff"), &data.projection, None, Dtype::F64)?;
    write_split_manifest(dir.join("split.txt"), &split)?;
    let names: BTreeMap<u32, String> = ids.iter().map(|&c| (c, format!("class_{c:03}"))).collect();
    write_class_names(dir.join("classes.tsv"), &names)?;
    eprintln!(
        "wrote {} train and {} test samples ({} seen / {} unseen classes) to {}",
        train.len(),
        test.len(),
        split.n_seen(),
        split.n_unseen(),
        dir.display()
    );
    Ok(())
}

fn load_split(cfg: &RunConfig, split_override: Option<&Path>) -> Result<SplitSpec> {
    let path = split_override.map(Path::to_path_buf).unwrap_or_else(|| cfg.split_path());
    require(&path)?;
    Ok(read_split_manifest(&path)?)
}

fn load_bundle(cfg: &RunConfig) -> Result<SemanticBundle> {
    let mode = cfg.experiment.semantic_mode;
    let explicit = [&cfg.data.text_lb, &cfg.data.text_ad, &cfg.data.text_md];
    let mut ids: Option<Vec<u32>> = None;
    let mut channels: [Option<msf_core::Matrix>; 3] = [None, None, None];
    for (i, ((ch, name), explicit)) in TEXT_FILES.iter().zip(explicit).enumerate() {
        if !mode.channels().contains(ch) {
            continue;
        }
        let path = cfg.data_file(explicit, name);
        let fm = read_labelled(&path)?;
        match &ids {
            None => ids = Some(fm.labels.clone()),
            Some(prev) if *prev != fm.labels => {
                bail!("{} lists different classes than the other text channels", path.display())
            }
            Some(_) => {}
        }
        channels[i] = Some(fm.features);
    }
    let [lb, ad, md] = channels;
    Ok(SemanticBundle::new(ids.unwrap_or_default(), lb, ad, md)?)
}

fn trace_rows(stage: &str, trace: &[EpochLoss]) -> Vec<Vec<String>> {
    trace
        .iter()
        .map(|e| {
            vec![
                stage.to_string(),
                e.epoch.to_string(),
                e.total.to_string(),
                e.recon_skeleton.to_string(),
                e.kl_skeleton.to_string(),
                e.align_skeleton.to_string(),
                e.recon_text.to_string(),
                e.kl_text.to_string(),
                e.align_text.to_string(),
            ]
        })
        .collect()
}

pub fn train(cfg: &RunConfig, split_override: Option<&Path>) -> Result<()> {
    cfg.validate()?;
    let split = load_split(cfg, split_override)?;
    let train = read_labelled(&cfg.data_file(&cfg.data.skeleton_train, SKELETON_TRAIN))?;
    let bundle = load_bundle(cfg)?;
    let mode = cfg.experiment.semantic_mode;
    let fused_dim = bundle.fused_dim(mode)?;
    eprintln!("semantic_mode={mode} fused_dim={fused_dim}");
    let semantics = fuse_semantics(&bundle, mode)?;
    let trained = train_pipeline(&train, &semantics, &split, &cfg.experiment)?;

    let a = &cfg.experiment.alignment;
    let header = CheckpointHeader {
        name: cfg.experiment.name.clone(),
        seed: cfg.experiment.seed,
        epochs: a.epochs,
        semantic_mode: mode,
        split_name: split.name.clone(),
        seen_ids: split.seen_ids(),
        unseen_ids: split.unseen_ids(),
        pseudo_unseen: trained.pseudo_unseen.clone(),
        skeleton_dim: train.dim(),
        text_dim: fused_dim,
        latent_dim: a.latent_dim,
        hidden: a.hidden.clone(),
        alpha: a.alpha,
        beta: a.beta,
        align_norm: a.align_norm,
        gate_features: cfg.experiment.gate.features,
        gate_threshold: cfg.experiment.gate.threshold,
    };
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_checkpoint(
        out.join(CHECKPOINT),
        &Checkpoint {
            header,
            model: trained.model,
        },
    )?;
    let mut rows = trace_rows("inner", &trained.inner_trace);
    rows.extend(trace_rows("final", &trained.final_trace));
    let header = [
        "stage",
        "epoch",
        "total",
        "recon_skeleton",
        "kl_skeleton",
        "align_skeleton",
        "recon_text",
        "kl_text",
        "align_text",
    ];
    atomic_write(&out.join(LOSS_TRACE), &csv_bytes(&header, rows)?)?;
    if let (Some(first), Some(last)) = (trained.final_trace.first(), trained.final_trace.last()) {
        eprintln!("alignment loss {:.4} -> {:.4}", first.total, last.total);
    }
    eprintln!("wrote {}", out.join(CHECKPOINT).display());
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn eval(
    cfg: &RunConfig,
    split_override: Option<&Path>,
    checkpoint: Option<&Path>,
    gate_threshold: Option<f64>,
    mode: Mode,
) -> Result<()> {
    let split = load_split(cfg, split_override)?;
    let ckpt_path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir().join(CHECKPOINT));
    require(&ckpt_path)?;
    let mut ckpt = read_checkpoint(&ckpt_path)?;
    if ckpt.header.seen_ids != split.seen_ids() || ckpt.header.unseen_ids != split.unseen_ids() {
        bail!(
            "checkpoint was trained on split `{}`, which differs from `{}`",
            ckpt.header.split_name,
            split.name
        );
    }
    if let Some(t) = gate_threshold {
        ckpt.model.gate.threshold = t;
    }
    let model = &ckpt.model;
    let test = read_labelled(&cfg.data_file(&cfg.data.skeleton_test, SKELETON_TEST))?;
    let unseen_test = test.filter(|c| split.is_unseen(c));

    let mut summary: Vec<(&str, String)> = vec![
        ("name", ckpt.header.name.clone()),
        ("split", split.name.clone()),
        ("seed", ckpt.header.seed.to_string()),
        ("mode", format!("{mode:?}").to_lowercase()),
        ("semantic_mode", ckpt.header.semantic_mode.to_string()),
        ("gate_threshold", model.gate.threshold.to_string()),
        ("n_test", test.len().to_string()),
    ];
    let pred_rows: Vec<Vec<String>>;
    let gzsl: Option<GzslMetrics>;
    let zsl_acc;
    match mode {
        Mode::Gzsl => {
            let report = evaluate(model, &test, &split)?;
            zsl_acc = report.zsl_acc;
            gzsl = Some(report.gzsl);
            summary.push(("oracle_acc_s", report.oracle.acc_s.to_string()));
            summary.push(("oracle_acc_u", report.oracle.acc_u.to_string()));
            summary.push(("oracle_h", report.oracle.h.to_string()));
            summary.push(("joint_h", report.joint.h.to_string()));
            pred_rows = (0..test.len())
                .map(|i| {
                    vec![
                        i.to_string(),
                        test.labels[i].to_string(),
                        report.predictions[i].to_string(),
                        (report.routed_unseen[i] as u8).to_string(),
                        report.prob_unseen[i].to_string(),
                    ]
                })
                .collect();
        }
        Mode::Zsl => {
            let preds = classify_zsl(&model.unseen_head, &model.module, &test.features)?;
            let unseen_preds = classify_zsl(&model.unseen_head, &model.module, &unseen_test.features)?;
            zsl_acc = zsl_accuracy(&unseen_preds, &unseen_test.labels)?;
            gzsl = None;
            pred_rows = preds
                .iter()
                .enumerate()
                .map(|(i, p)| vec![i.to_string(), test.labels[i].to_string(), p.to_string(), "1".into(), String::new()])
                .collect();
        }
    }
    summary.push(("acc_s", fmt_opt(gzsl.map(|m| m.acc_s))));
    summary.push(("acc_u", fmt_opt(gzsl.map(|m| m.acc_u))));
    summary.push(("h", fmt_opt(gzsl.map(|m| m.h))));
    summary.push(("zsl_acc", zsl_acc.to_string()));

    let out = cfg.out_dir();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let metrics = csv_bytes(
        &["name", "split", "seed", "acc_s", "acc_u", "h", "zsl_acc"],
        vec![vec![
            ckpt.header.name.clone(),
            split.name.clone(),
            ckpt.header.seed.to_string(),
            fmt_opt(gzsl.map(|m| m.acc_s)),
            fmt_opt(gzsl.map(|m| m.acc_u)),
            fmt_opt(gzsl.map(|m| m.h)),
            zsl_acc.to_string(),
        ]],
    )?;
    atomic_write(&out.join(METRICS), &metrics)?;
    atomic_write(
        &out.join(PREDICTIONS),
        &csv_bytes(&["index", "truth", "prediction", "routed_unseen", "prob_unseen"], pred_rows)?,
    )?;
    let text: String = summary.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    atomic_write(&out.join(SUMMARY), text.as_bytes())?;
    print!("{text}");
    Ok(())
}

pub fn selfcheck(seed: u64) -> Result<bool> {
    let t = std::time::Instant::now();
    let report = run_selfcheck(seed)?;
    for g in &report.gradients {
        println!(
            "grad {:<24} max_rel_error={:.3e} {}",
            g.name,
            g.max_rel_error,
            status(g.max_rel_error < GRAD_TOLERANCE)
        );
    }
    for k in &report.kl {
        println!(
            "kl mu={:?} log_var={:?} closed={:.6} monte_carlo={:.6} rel={:.2e} {}",
            k.mu,
            k.log_var,
            k.closed_form,
            k.monte_carlo,
            k.rel_error(),
            status(k.rel_error() < KL_TOLERANCE)
        );
    }
    let table_ok = print_table_summary(&report.tables.iter().map(|t| t.row).collect::<Vec<_>>(), false);
    println!("elapsed {:.2}s", t.elapsed().as_secs_f64());
    Ok(report.gradients_ok() && report.kl_ok() && table_ok)
}

fn status(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

/// Prints mismatching rows (or every row when `all`). Returns false only if
/// a row not flagged as a source erratum fails to reproduce.
fn print_table_summary(rows: &[msf_core::eval::PublishedRow], all: bool) -> bool {
    let mut unexpected = 0;
    let mut errata = 0;
    for r in rows {
        let ok = r.matches(0.01);
        if !ok {
            if r.erratum {
                errata += 1;
            } else {
                unexpected += 1;
            }
        }
        if all || !ok {
            let note = match (ok, r.erratum) {
                (true, _) => "ok",
                (false, true) => "MISMATCH (printed H inconsistent with its own accuracies)",
                (false, false) => "FAIL",
            };
            println!(
                "table {:<9} {:<16} {:<14} acc_s={:6.2} acc_u={:6.2} printed_h={:6.2} recomputed_h={:8.4} {}",
                r.table,
                r.method,
                r.benchmark,
                r.acc_s,
                r.acc_u,
                r.h,
                r.recomputed_h(),
                note
            );
        }
    }
    println!(
        "tables: {}/{} rows reproduce within 0.01; {} source errata; {} unexpected failures",
        rows.len() - errata - unexpected,
        rows.len(),
        errata,
        unexpected
    );
    unexpected == 0
}

pub fn recompute_tables() -> bool {
    print_table_summary(PUBLISHED_ROWS, true)
}
