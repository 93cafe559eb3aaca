//! Trains the two-stream autoencoder on the seen-class rows of a synthetic
//! bundle and prints the per-epoch loss.
//!
//! ```text
//! cargo run --release --example train_autoencoder
//! ```

use gatingae::cli::Preset;
use gatingae::{generate_synthetic, train, SynthSpec, TrainConfig, TrainingSet};

fn main() -> gatingae::Result<()> {
    let bundle = generate_synthetic(&SynthSpec::default())?;
    let (x, y) = bundle.rows(&bundle.splits.train_idx);
    let cfg = TrainConfig {
        epochs: 40,
        ..Preset::Desk.train_config()
    };
    let out = train(
        TrainingSet {
            features: &x,
            labels: &y,
            attributes: &bundle.attributes,
            seen_classes: &bundle.splits.seen_classes,
        },
        &cfg,
    )?;

    for (epoch, loss) in out.loss_trace.iter().enumerate().step_by(5) {
        println!("epoch {:>3}  L_all {loss:.4}", epoch + 1);
    }
    let dims = out.model.dims();
    println!(
        "trained {}→{}→{} visual and {}→{}→{} attribute encoders",
        dims.dim_v, dims.hidden_v, dims.dim_z, dims.dim_a, dims.hidden_a, dims.dim_z
    );
    Ok(())
}
