//! The full protocol: tune α, β and τ on the validation split, retrain on
//! train ∪ val, then evaluate on the test rows.

use gatingae::cli::Preset;
use gatingae::{evaluate_gzsl, generate_synthetic, retrain_final, tune, PipelineConfig, SynthSpec, TuneGrids};

fn main() -> gatingae::Result<()> {
    let bundle = generate_synthetic(&SynthSpec::default())?;
    let cfg = PipelineConfig {
        train: Preset::Desk.train_config(),
        seen_clf: Preset::Desk.seen_clf_config(),
        ..PipelineConfig::default()
    };

    let tuned = tune(&bundle, &TuneGrids::default(), &cfg)?;
    println!(
        "validation picked α={} β={} τ={:.4} (H_val {:.3}, {} grid points)",
        tuned.best_alpha,
        tuned.best_beta,
        tuned.best_tau,
        tuned.val_harmonic,
        tuned.trace.len()
    );

    let (predictor, _) = retrain_final(&bundle, &tuned, &cfg)?;
    let (report, _) = evaluate_gzsl(&predictor, &bundle)?;
    print!("{}", report.render_table("gated r_all"));
    Ok(())
}
