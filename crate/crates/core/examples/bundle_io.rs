//! Writes a synthetic bundle to disk, reads it back through the validating
//! loader, and round-trips a trained checkpoint.

use gatingae::cli::Preset;
use gatingae::data::load_bundle_with_warnings;
use gatingae::{generate_synthetic, save_bundle, train_final, Checkpoint, GateConfig, PipelineConfig, SynthSpec};

fn main() -> gatingae::Result<()> {
    let dir = std::env::temp_dir().join("gatingae-bundle-example");
    let bundle = generate_synthetic(&SynthSpec {
        samples_per_class: 40,
        ..SynthSpec::default()
    })?;
    save_bundle(&bundle, &dir)?;

    let (loaded, warnings) = load_bundle_with_warnings(&dir)?;
    assert_eq!(loaded, bundle);
    println!("{} loaded with {} warnings", dir.display(), warnings.len());
    for (file, sum) in loaded.file_checksums() {
        println!("  {file:<16} fnv1a64 {sum}");
    }
    let c = loaded.counts();
    println!(
        "  rows: train {} val {} test-seen {} test-unseen {}",
        c.train, c.val, c.test_seen, c.test_unseen
    );

    let cfg = PipelineConfig {
        train: gatingae::TrainConfig {
            epochs: 5,
            ..Preset::Desk.train_config()
        },
        ..PipelineConfig::default()
    };
    let (predictor, _) = train_final(&loaded, GateConfig { beta: 0.1, tau: 1.0 }, &cfg)?;
    let path = dir.join("model.gae");
    let ck = Checkpoint {
        ae: predictor.ae.clone(),
        seen_clf: Some(predictor.seen_clf.clone()),
        gate: Some((predictor.score, predictor.gate_cfg)),
    };
    ck.save(&path)?;
    assert_eq!(Checkpoint::load(&path)?, ck);
    println!("checkpoint {} round-trips ({} bytes)", path.display(), ck.encode().len());
    Ok(())
}
