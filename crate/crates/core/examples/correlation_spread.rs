//! How distinct the unseen-class correlation rows are at two ridge strengths.
use zeroshot::attribute_space::{cosine_similarity, ridge_correlation};
use zeroshot::dataset::{gen_synthetic, SynthSpec};
fn main() -> zeroshot::Result<()> {
    let b = gen_synthetic(&SynthSpec::default())?;
    let s = b.attributes.rows_for(&b.split.seen)?;
    let u = b.attributes.rows_for(&b.split.unseen)?;
    for lambda in [1.0, 1e-3] {
        let c = ridge_correlation(&s, &u, lambda)?;
        let t = c.transfer(&s)?;
        println!("lambda {lambda}");
        for i in 0..3 {
            let resid: f64 = t.row(i).iter().zip(u.row(i)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            println!("  beta {:.3?} |A_u - beta A_s| {resid:.3}", c.coefficients.row(i));
        }
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            println!("  cos(beta_{i}, beta_{j}) {:.4}", cosine_similarity(c.coefficients.row(i), c.coefficients.row(j))?);
        }
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        println!("cos(a_{i}, a_{j}) {:.4}", cosine_similarity(u.row(i), u.row(j))?);
    }
    Ok(())
}
