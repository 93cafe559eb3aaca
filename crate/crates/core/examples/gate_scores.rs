//! Computes the unseen-class scores for a handful of test queries and shows
//! how β mixes the latent and cross-reconstruction distances.

use gatingae::cli::Preset;
use gatingae::scores::{build_banks_for, gate, rescore, score_query};
use gatingae::{generate_synthetic, train, SynthSpec, TrainingSet};

fn main() -> gatingae::Result<()> {
    let bundle = generate_synthetic(&SynthSpec::default())?;
    let (x, y) = bundle.rows(&bundle.splits.train_idx);
    let ae = train(
        TrainingSet {
            features: &x,
            labels: &y,
            attributes: &bundle.attributes,
            seen_classes: &bundle.splits.seen_classes,
        },
        &Preset::Desk.train_config(),
    )?
    .model;
    let banks = build_banks_for(&ae, &bundle.attributes, &bundle.splits.seen_classes, &bundle.splits.unseen_classes)?;

    let queries = bundle.splits.test_seen_idx.iter().take(3).chain(bundle.splits.test_unseen_idx.iter().take(3));
    println!("{:>5} {:>7} {:>9} {:>9} {:>9} {:>9} {:>9}  gate on r_cross, τ=1", "row", "class", "r_latent", "r_cross", "β=0.01", "β=1", "β=100");
    for &row in queries {
        let s = score_query(&ae, &banks, bundle.features.row(row), 0.0)?;
        let kind = if bundle.splits.unseen_classes.contains(&bundle.labels[row]) { "unseen" } else { "seen" };
        print!("{row:>5} {kind:>7} {:>9.3} {:>9.3}", s.r_latent, s.r_cross);
        for beta in [0.01, 1.0, 100.0] {
            print!(" {:>9.3}", rescore(&s, beta).r_all);
        }
        println!("  {:?}", gate(s.r_cross, 1.0));
    }
    Ok(())
}
