//! Swaps the seen expert between the linear softmax classifier and a 1-NN
//! over seen-class latents. The gate and the unseen expert are shared, so
//! unseen accuracy cannot change.

use gatingae::cli::Preset;
use gatingae::{
    evaluate_gzsl, generate_synthetic, retrain_final, tune, PipelineConfig, SeenExpertKind, SynthSpec, TuneGrids,
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

    for kind in [SeenExpertKind::NearestNeighbor, SeenExpertKind::Linear] {
        let (report, _) = evaluate_gzsl(&predictor.with_seen_expert(kind), &bundle)?;
        print!("{}", report.render_table(&format!("seen expert {kind:?}")));
    }
    Ok(())
}
