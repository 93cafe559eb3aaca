//! Unseen-detection AUROC of each distance feature on its own and of the
//! three ratio scores, after a fixed-hyperparameter training run.

use gatingae::cli::Preset;
use gatingae::metrics::score_decomposition;
use gatingae::{evaluate_gzsl, generate_synthetic, train_final, GateConfig, PipelineConfig, SynthSpec};

fn main() -> gatingae::Result<()> {
    let bundle = generate_synthetic(&SynthSpec::default())?;
    let cfg = PipelineConfig {
        train: Preset::Desk.train_config(),
        seen_clf: Preset::Desk.seen_clf_config(),
        ..PipelineConfig::default()
    };
    let (predictor, _) = train_final(&bundle, GateConfig { beta: 1.0, tau: 1.0 }, &cfg)?;
    let (_, records) = evaluate_gzsl(&predictor, &bundle)?;

    let scores: Vec<_> = records.iter().map(|r| r.scores).collect();
    let unseen: Vec<bool> = records.iter().map(|r| r.is_unseen).collect();
    for (name, auc) in score_decomposition(&scores, &unseen)? {
        println!("{name:<16} {auc:.4}");
    }
    Ok(())
}
