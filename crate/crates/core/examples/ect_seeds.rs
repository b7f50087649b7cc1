//! Co-training versus plain training over several seeds.
use zeroshot::dataset::{gen_synthetic, SynthSpec};
use zeroshot::ect::{run_ect, Anchoring, EctConfig};
use zeroshot::eval::mean_per_class_top1;
use zeroshot::model::{predict_batch, train_on_bundle, TrainConfig, Variant};

fn main() -> zeroshot::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let data_seeds: Vec<u64> = args.get(1).map_or(vec![7], |s| s.split(',').map(|x| x.parse().unwrap()).collect());
    let run_seeds: Vec<u64> = args.get(2).map_or(vec![7, 1, 2, 3, 4], |s| s.split(',').map(|x| x.parse().unwrap()).collect());
    for &data_seed in &data_seeds {
        let bundle = gen_synthetic(&SynthSpec { seed: data_seed, ..SynthSpec::default() })?;
        let pool = bundle.features.rows_not_in(&bundle.split.seen);
        let truth: Vec<String> = pool.iter().map(|&r| bundle.features.labels[r].clone().unwrap()).collect();
        let query = bundle.features.features.select_rows(&pool);
        for &seed in &run_seeds {
            let train = TrainConfig { seed, ..TrainConfig::default() };
            let (plain, _) = train_on_bundle(&bundle.features, &bundle.attributes, &bundle.split, &train, Variant::SfLfgaa)?;
            let p = predict_batch(&plain, &query, &bundle.features, &bundle.attributes, &bundle.split, train.predict_mode)?;
            let base = mean_per_class_top1(&p.labels(), &truth, &bundle.split.unseen)?.mean_per_class;
            let mut line = format!("data {data_seed} run {seed}: plain {base:.3}");
            for anchor in [Anchoring::Off, Anchoring::PerClass, Anchoring::AllClasses] {
                let ect = EctConfig { seed, anchoring: anchor, ..EctConfig::default() };
                let out = run_ect(&bundle.features, &bundle.attributes, &bundle.split, &ect, &train)?;
                let labels = out.pool_predictions.as_ref().unwrap().labels();
                let acc = mean_per_class_top1(&labels, &truth, &bundle.split.unseen)?.mean_per_class;
                let counts: Vec<usize> = out.manifest.iterations.iter().map(|i| i.pseudo_count).collect();
                let mono = out.manifest.iterations.iter().all(|i| i.precision_at_high >= i.precision_at_low);
                line += &format!(" | {anchor:?} ect {acc:.3} counts {counts:?} prec-mono {mono}");
            }
            println!("{line}");
        }
    }
    Ok(())
}
