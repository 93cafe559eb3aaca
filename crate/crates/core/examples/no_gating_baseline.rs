//! Compares the gated model with a single 1-NN classifier over the union of
//! seen and unseen class latents. The baseline is biased toward seen
//! classes, which the gate is meant to fix.

use gatingae::cli::Preset;
use gatingae::{
    evaluate_gzsl, evaluate_no_gating, generate_synthetic, retrain_final, tune, PipelineConfig, SynthSpec, TuneGrids,
};

fn main() -> gatingae::Result<()> {
    let bundle = generate_synthetic(&SynthSpec::default())?;
    let cfg = PipelineConfig {
        train: Preset::Desk.train_config(),
        seen_clf: Preset::Desk.seen_clf_config(),
        ..PipelineConfig::default()
    };
    let tuned = tune(&bundle, &TuneGrids::default(), &cfg)?;
    let (predictor, _) = retrain_final(&bundle, &tuned, &cfg)?;

    let (gated, _) = evaluate_gzsl(&predictor, &bundle)?;
    let (baseline, _) = evaluate_no_gating(&predictor, &bundle)?;
    print!("{}", baseline.render_table("no gating (1-NN)"));
    print!("{}", gated.render_table("gated r_all"));
    println!("harmonic mean gain: {:+.1} points", 100.0 * (gated.harmonic - baseline.harmonic));
    Ok(())
}
