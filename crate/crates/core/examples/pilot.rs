//! Trains on the default synthetic bundle and reports unseen-class accuracy
//! for both decision rules.
use std::time::Instant;

use zeroshot::dataset::{gen_synthetic, SynthSpec};
use zeroshot::model::{predict_batch, train_on_bundle, PredictMode, TrainConfig, Variant};

fn main() -> zeroshot::Result<()> {
    let bundle = gen_synthetic(&SynthSpec::default())?;
    let start = Instant::now();
    let config = TrainConfig::default();
    let (model, history) = train_on_bundle(&bundle.features, &bundle.attributes, &bundle.split, &config, Variant::SfLfgaa)?;
    let last = history.epochs.last().expect("epochs > 0");
    println!("trained in {:.2?}, final loss {:.4}", start.elapsed(), last.total);
    let unseen = bundle.features.subset(&bundle.features.rows_labeled_in(&bundle.split.unseen));
    for mode in [PredictMode::Latent, PredictMode::Combined] {
        let pred = predict_batch(&model, &unseen.features, &bundle.features, &bundle.attributes, &bundle.split, mode)?;
        let labels = pred.labels();
        let mut per_class = Vec::new();
        for class in &bundle.split.unseen {
            let rows: Vec<usize> = (0..labels.len()).filter(|&i| unseen.labels[i].as_deref() == Some(class)).collect();
            let hits = rows.iter().filter(|&&i| &labels[i] == class).count();
            per_class.push(hits as f64 / rows.len() as f64);
        }
        let mean = per_class.iter().sum::<f64>() / per_class.len() as f64;
        println!("{mode:?}: mean per-class top-1 {mean:.4} {per_class:?}");
    }
    Ok(())
}
