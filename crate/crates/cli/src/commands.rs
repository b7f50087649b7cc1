use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use zeroshot::attribute_space::PrototypeSet;
use zeroshot::dataset::{gen_synthetic, load_attributes, load_features, load_split, validate_bundle, FeatureDataset};
use zeroshot::ect::{run_ect, EctManifest};
use zeroshot::eval::{emit_report, load_report, mean_per_class_top1, ReportFormat, ReportMeta, ResultGrid};
use zeroshot::model::{
    load_model, predict_batch, save_model, train_on_bundle, PredictMode, Prediction, TrainConfig, Variant,
    ZeroShotPredictor,
};

use crate::manifest::{unix_now, RunManifest};
use crate::{BundleArgs, Common, UsageError};

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

/// Sibling manifest path for a single-file output: `out.csv` -> `out.csv.manifest.json`.
fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

struct Bundle {
    features: FeatureDataset,
    table: zeroshot::dataset::ClassAttributeTable,
    split: zeroshot::dataset::SplitSpec,
}

fn load_bundle(args: &BundleArgs, manifest: &mut RunManifest) -> anyhow::Result<Bundle> {
    let features = load_features(&args.features)?;
    let table = load_attributes(&args.attributes)?;
    let split = load_split(&args.split)?;
    validate_bundle(&features, &table, &split).into_result()?;
    manifest.input("features", &args.features)?;
    manifest.input("attributes", &args.attributes)?;
    manifest.input("split", &args.split)?;
    Ok(Bundle { features, table, split })
}

pub fn write_predictions(path: &Path, ids: &[String], prediction: &Prediction) -> anyhow::Result<()> {
    let mut s = String::from("id,predicted,score\n");
    for ((id, label), score) in ids.iter().zip(prediction.labels()).zip(prediction.top_scores()) {
        s.push_str(&format!("{id},{label},{score}\n"));
    }
    std::fs::write(path, s).with_context(|| format!("writing predictions {}", path.display()))
}

fn read_predictions(path: &Path) -> anyhow::Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some("id,predicted,score") {
        bail!(UsageError(format!("{}: expected header 'id,predicted,score'", path.display())));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let cells: Vec<&str> = l.split(',').collect();
            if cells.len() != 3 {
                bail!(UsageError(format!("{}:{}: expected 3 fields", path.display(), i + 2)));
            }
            Ok((cells[0].to_string(), cells[1].to_string()))
        })
        .collect()
}

/// Mean per-class accuracy of `prediction` on pool rows with unseen labels.
fn score_pool(bundle: &Bundle, pool: &[usize], prediction: &Prediction) -> anyhow::Result<Option<serde_json::Value>> {
    let mut predicted = Vec::new();
    let mut truth = Vec::new();
    for (i, &row) in pool.iter().enumerate() {
        if let Some(label) = &bundle.features.labels[row] {
            if bundle.split.unseen.contains(label) {
                truth.push(label.clone());
                predicted.push(prediction.classes[prediction.indices[i]].clone());
            }
        }
    }
    if truth.is_empty() {
        return Ok(None);
    }
    let report = mean_per_class_top1(&predicted, &truth, &bundle.split.unseen)?;
    Ok(Some(serde_json::json!({
        "mean_per_class": report.mean_per_class,
        "overall": report.overall,
        "samples": truth.len(),
    })))
}

pub fn synth(out: &Path, common: &Common) -> anyhow::Result<()> {
    let config = common.resolve()?;
    let mut manifest = RunManifest::new("synth", &config)?;
    let bundle = gen_synthetic(&config.synth)?;
    validate_bundle(&bundle.features, &bundle.attributes, &bundle.split).into_result()?;
    create_dir(out)?;
    let paths = [
        ("features", out.join("features.csv")),
        ("attributes", out.join("attributes.csv")),
        ("split", out.join("split.json")),
    ];
    bundle.features.save_csv(&paths[0].1)?;
    bundle.attributes.save_csv(&paths[1].1)?;
    bundle.split.save_json(&paths[2].1)?;
    for (role, path) in &paths {
        manifest.output(role, path)?;
    }
    manifest.result("seen_classes", bundle.split.seen.len())?;
    manifest.result("unseen_classes", bundle.split.unseen.len())?;
    manifest.write(&out.join("manifest.json"))
}

pub fn train(args: &BundleArgs, out: &Path, baseline: bool, common: &Common) -> anyhow::Result<()> {
    let config = common.resolve()?;
    let mut manifest = RunManifest::new("train", &config)?;
    let bundle = load_bundle(args, &mut manifest)?;
    let variant = if baseline { Variant::Lfgaa } else { Variant::SfLfgaa };
    manifest.result("variant", variant)?;
    let (model, history) = train_on_bundle(&bundle.features, &bundle.table, &bundle.split, &config.train, variant)?;
    create_dir(out)?;
    let model_path = out.join("model.json");
    let history_path = out.join("history.csv");
    save_model(&model, &model_path)?;
    std::fs::write(&history_path, history.to_csv()).context("writing history")?;
    manifest.output("model", &model_path)?;
    manifest.output("history", &history_path)?;
    let skipped: usize = history.epochs.iter().map(|e| e.skipped_batches).sum();
    if skipped > 0 {
        manifest.warn(format!("{skipped} batches without a valid triplet were skipped"));
    }
    if let Some(last) = history.epochs.last() {
        manifest.result("final_loss", last)?;
    }
    let pool = bundle.features.rows_not_in(&bundle.split.seen);
    if !pool.is_empty() {
        let query = bundle.features.features.select_rows(&pool);
        let mode = config.train.predict_mode;
        let prediction = predict_batch(&model, &query, &bundle.features, &bundle.table, &bundle.split, mode)?;
        if let Some(score) = score_pool(&bundle, &pool, &prediction)? {
            manifest.result("unseen_accuracy", score)?;
        }
    }
    manifest.write(&out.join("manifest.json"))
}

pub fn predict(
    model_path: &Path,
    args: &BundleArgs,
    seen_features: Option<&Path>,
    prototypes: Option<&Path>,
    out: &Path,
    common: &Common,
) -> anyhow::Result<()> {
    let mut config = common.resolve()?;
    let model = load_model(model_path)?;
    let mode: PredictMode = match &common.mode {
        Some(m) => m.parse().map_err(|e: zeroshot::Error| UsageError(e.to_string()))?,
        None => model.config.predict_mode,
    };
    config.train = TrainConfig {
        predict_mode: mode,
        ..model.config.clone()
    };
    let mut manifest = RunManifest::new("predict", &config)?;
    manifest.input("model", model_path)?;
    let bundle = load_bundle(args, &mut manifest)?;
    let seen = match seen_features {
        Some(path) => {
            manifest.input("seen_features", path)?;
            load_features(path)?
        }
        None => bundle.features.clone(),
    };
    let pool = bundle.features.rows_not_in(&bundle.split.seen);
    if pool.is_empty() {
        bail!(UsageError("no rows outside the seen classes to predict".into()));
    }
    let query = bundle.features.features.select_rows(&pool);
    let mut predictor = ZeroShotPredictor::from_bundle(&model, &seen, &bundle.table, &bundle.split)?;
    if let Some(path) = prototypes {
        let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
        let ect: EctManifest = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("{} is not a co-training manifest: {e}", path.display())))?;
        let protos: PrototypeSet = ect
            .unseen_prototypes
            .ok_or_else(|| UsageError(format!("{} records no prototypes", path.display())))?;
        predictor = predictor.with_unseen_prototypes(protos)?;
        manifest.input("prototypes", path)?;
    }
    let prediction = predictor.predict(&query, mode)?;
    let ids: Vec<String> = pool.iter().map(|&r| bundle.features.sample_ids[r].clone()).collect();
    write_predictions(out, &ids, &prediction)?;
    manifest.output("predictions", out)?;
    manifest.result("mode", mode)?;
    if let Some(score) = score_pool(&bundle, &pool, &prediction)? {
        manifest.result("unseen_accuracy", score)?;
    }
    manifest.write(&sidecar(out))
}

pub fn eval(
    predictions: Option<&Path>,
    features: Option<&Path>,
    split: Option<&Path>,
    aggregate: &[String],
    format: &str,
    out: &Path,
    common: &Common,
) -> anyhow::Result<()> {
    let config = common.resolve()?;
    let mut manifest = RunManifest::new("eval", &config)?;
    if !aggregate.is_empty() {
        let mut loaded = Vec::new();
        for spec in aggregate {
            let mut parts = spec.splitn(3, ':');
            let (Some(method), Some(group), Some(path)) = (parts.next(), parts.next(), parts.next()) else {
                bail!(UsageError(format!("--aggregate expects METHOD:GROUP:REPORT, got '{spec}'")));
            };
            let report = load_report(path)?;
            manifest.input(&format!("{method}:{group}"), Path::new(path))?;
            loaded.push((method.to_string(), group.to_string(), report));
        }
        let grid = ResultGrid::aggregate(loaded.iter().map(|(m, g, r)| (m.as_str(), g.as_str(), r)));
        std::fs::write(out, grid.to_csv()).with_context(|| format!("writing {}", out.display()))?;
        manifest.output("grid", out)?;
        return manifest.write(&sidecar(out));
    }

    let format: ReportFormat = format.parse().map_err(|e: zeroshot::Error| UsageError(e.to_string()))?;
    let (Some(pred_path), Some(feat_path), Some(split_path)) = (predictions, features, split) else {
        bail!(UsageError("eval needs --predictions, --features and --split".into()));
    };
    let rows = read_predictions(pred_path)?;
    let data = load_features(feat_path)?;
    let split = load_split(split_path)?;
    manifest.input("predictions", pred_path)?;
    manifest.input("features", feat_path)?;
    manifest.input("split", split_path)?;
    let labels: std::collections::HashMap<&str, Option<&String>> =
        data.sample_ids.iter().map(String::as_str).zip(data.labels.iter().map(Option::as_ref)).collect();
    let mut predicted = Vec::new();
    let mut truth = Vec::new();
    for (id, label) in rows {
        match labels.get(id.as_str()) {
            None => bail!(UsageError(format!("prediction for unknown sample '{id}'"))),
            Some(None) => manifest.warn(format!("sample '{id}' has no label and is skipped")),
            Some(Some(t)) => {
                truth.push((*t).clone());
                predicted.push(label);
            }
        }
    }
    let mut report = mean_per_class_top1(&predicted, &truth, &split.unseen)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    // Carry the producing run's seed and configuration digest when its manifest is next to the predictions.
    let producer: Option<serde_json::Value> = std::fs::read_to_string(sidecar(pred_path))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    report.meta = ReportMeta {
        seed: producer
            .as_ref()
            .and_then(|v| v.pointer("/config/train/seed"))
            .and_then(serde_json::Value::as_u64)
            .or(Some(config.train.seed)),
        config_digest: producer
            .as_ref()
            .and_then(|v| v.get("config_digest"))
            .and_then(|v| v.as_str().map(str::to_string))
            .or(Some(manifest.config_digest.clone())),
        timestamp: Some(unix_now()),
    };
    emit_report(&report, out, format)?;
    manifest.output("report", out)?;
    manifest.result("mean_per_class", report.mean_per_class)?;
    manifest.result("overall", report.overall)?;
    manifest.write(&sidecar(out))
}

pub fn ect(args: &BundleArgs, out: &Path, common: &Common) -> anyhow::Result<()> {
    let config = common.resolve()?;
    let mut manifest = RunManifest::new("ect", &config)?;
    let bundle = load_bundle(args, &mut manifest)?;
    let outcome = run_ect(&bundle.features, &bundle.table, &bundle.split, &config.ect, &config.train)?;
    for w in &outcome.manifest.warnings {
        manifest.warn(w.clone());
    }
    if let Some(reason) = &outcome.manifest.aborted {
        manifest.warn(format!("co-training stopped early: {reason}"));
    }
    create_dir(out)?;
    let model_path = out.join("model.json");
    save_model(&outcome.primary, &model_path)?;
    manifest.output("model", &model_path)?;
    if let Some(secondary) = &outcome.secondary {
        let path = out.join("model_secondary.json");
        save_model(secondary, &path)?;
        manifest.output("model_secondary", &path)?;
    }
    let ect_path = out.join("ect_manifest.json");
    std::fs::write(&ect_path, serde_json::to_string_pretty(&outcome.manifest)? + "\n").context("writing ect manifest")?;
    manifest.output("ect_manifest", &ect_path)?;
    if let Some(prediction) = &outcome.pool_predictions {
        let path = out.join("predictions.csv");
        write_predictions(&path, &outcome.pool_ids, prediction)?;
        manifest.output("predictions", &path)?;
        let pool = bundle.features.rows_not_in(&bundle.split.seen);
        if let Some(score) = score_pool(&bundle, &pool, prediction)? {
            manifest.result("unseen_accuracy", score)?;
        }
    }
    manifest.result("pseudo_labels", outcome.manifest.pseudo_labels.len())?;
    manifest.result("primary_view", outcome.manifest.primary_view)?;
    manifest.write(&out.join("manifest.json"))
}
