//! The evaluation metrics on hand-made inputs.

use gatingae::metrics::{auroc, fpr_at_tpr, harmonic_mean, per_class_top1};

fn main() -> gatingae::Result<()> {
    // class 0 has 10 samples, class 1 has 90; per-class averaging weighs them equally
    let truths: Vec<u32> = std::iter::repeat_n(0, 10).chain(std::iter::repeat_n(1, 90)).collect();
    let preds = vec![0u32; 100];
    println!("per-class top-1: {:.2} (per-sample would be 0.10)", per_class_top1(&preds, &truths, &[0, 1])?);

    println!("H(81.3, 57.3) = {:.1}", 100.0 * harmonic_mean(0.813, 0.573));

    let unseen = [0.9, 0.8, 0.7, 0.4];
    let seen = [0.1, 0.2, 0.5, 0.8];
    println!("AUROC {:.4}", auroc(&unseen, &seen)?);
    println!("FPR at 95% TPR {:.2}", fpr_at_tpr(&unseen, &seen, 0.95)?);
    Ok(())
}
