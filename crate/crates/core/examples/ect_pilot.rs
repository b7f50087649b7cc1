//! Runs co-training on the default synthetic bundle and compares the
//! resulting model against plain training.
use std::time::Instant;

use zeroshot::dataset::{gen_synthetic, SynthSpec};
use zeroshot::ect::{run_ect, EctConfig};
use zeroshot::eval::mean_per_class_top1;
use zeroshot::model::{predict_batch, train_on_bundle, SfLfgaaModel, TrainConfig, Variant};

fn main() -> zeroshot::Result<()> {
    let bundle = gen_synthetic(&SynthSpec::default())?;
    let config = TrainConfig::default();
    let pool = bundle.features.rows_not_in(&bundle.split.seen);
    let truth: Vec<String> = pool.iter().map(|&r| bundle.features.labels[r].clone().unwrap()).collect();
    let query = bundle.features.features.select_rows(&pool);
    let accuracy = |m: &SfLfgaaModel| -> zeroshot::Result<f64> {
        let p = predict_batch(m, &query, &bundle.features, &bundle.attributes, &bundle.split, config.predict_mode)?;
        Ok(mean_per_class_top1(&p.labels(), &truth, &bundle.split.unseen)?.mean_per_class)
    };

    let (plain, _) = train_on_bundle(&bundle.features, &bundle.attributes, &bundle.split, &config, Variant::SfLfgaa)?;
    println!("plain training: {:.4}", accuracy(&plain)?);

    let start = Instant::now();
    let out = run_ect(&bundle.features, &bundle.attributes, &bundle.split, &EctConfig::default(), &config)?;
    println!("co-training finished in {:.2?}", start.elapsed());
    for it in &out.manifest.iterations {
        println!(
            "iter {} thr {} reliable@high {} reliable@low {} pseudo {} precision@high {:?} precision@low {:?} retained {:?}",
            it.iteration, it.threshold, it.reliable_at_high, it.reliable_at_low, it.pseudo_count,
            it.precision_at_high, it.precision_at_low, it.retained
        );
        println!("   census {:?}", it.census);
        println!("   scores {:?}", it.scores.iter().map(|s| (s.name.clone(), s.score)).collect::<Vec<_>>());
    }
    println!("co-training primary ({:?}), transferred prototypes: {:.4}", out.manifest.primary_view, accuracy(&out.primary)?);
    let labels = out.pool_predictions.as_ref().expect("pool is not empty").labels();
    let final_acc = mean_per_class_top1(&labels, &truth, &bundle.split.unseen)?.mean_per_class;
    println!("co-training final predictions: {final_acc:.4}");
    Ok(())
}

