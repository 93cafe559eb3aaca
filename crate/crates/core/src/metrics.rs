//! GZSL evaluation metrics: per-class top-1 accuracy, harmonic mean,
//! and unseen-detection quality (AUROC, FPR at a target TPR).
//!
//! Detection metrics treat "unseen" as the positive class and assume
//! larger scores mean "more likely unseen".

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scores::{GateScores, Route};

fn check_scores(name: &str, s: &[f64]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::Data(format!("{name} scores are empty")));
    }
    if s.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite(format!("{name} scores contain NaN")));
    }
    Ok(())
}

/// Accuracy of each class in `class_set` that has at least one sample.
pub fn per_class_accuracy(preds: &[u32], truths: &[u32], class_set: &[u32]) -> Result<BTreeMap<u32, f64>> {
    if class_set.is_empty() {
        return Err(Error::Data("empty class set".into()));
    }
    if preds.len() != truths.len() {
        return Err(Error::dim("predictions", truths.len(), preds.len()));
    }
    let mut tally: BTreeMap<u32, (usize, usize)> = class_set.iter().map(|&c| (c, (0, 0))).collect();
    for (&p, &t) in preds.iter().zip(truths) {
        let entry = tally
            .get_mut(&t)
            .ok_or_else(|| Error::Data(format!("true class {t} not in the class set")))?;
        entry.1 += 1;
        if p == t {
            entry.0 += 1;
        }
    }
    Ok(tally
        .into_iter()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(c, (hit, n))| (c, hit as f64 / n as f64))
        .collect())
}

/// Mean per-class top-1 accuracy; classes without samples are left out.
pub fn per_class_top1(preds: &[u32], truths: &[u32], class_set: &[u32]) -> Result<f64> {
    let acc = per_class_accuracy(preds, truths, class_set)?;
    if acc.is_empty() {
        return Ok(0.0);
    }
    Ok(acc.values().sum::<f64>() / acc.len() as f64)
}

/// `2·S·U / (S + U)`, zero when both are zero.
pub fn harmonic_mean(seen: f64, unseen: f64) -> f64 {
    if seen + unseen == 0.0 {
        0.0
    } else {
        2.0 * seen * unseen / (seen + unseen)
    }
}

/// Mann–Whitney AUROC: `(#{u > s} + ½·#{u = s}) / (n_u·n_s)`.
pub fn auroc(unseen: &[f64], seen: &[f64]) -> Result<f64> {
    check_scores("unseen", unseen)?;
    check_scores("seen", seen)?;
    let mut neg = seen.to_vec();
    neg.sort_by(|a, b| a.partial_cmp(b).expect("NaN rejected"));
    let mut twice_wins: u128 = 0;
    for &p in unseen {
        let below = neg.partition_point(|&s| s < p);
        let not_above = neg.partition_point(|&s| s <= p);
        twice_wins += 2 * below as u128 + (not_above - below) as u128;
    }
    Ok((twice_wins as f64 / 2.0) / (unseen.len() as f64 * seen.len() as f64))
}

/// False positive rate at the largest threshold `t` (rule: `score ≥ t`)
/// whose true positive rate reaches `tpr_target`.
pub fn fpr_at_tpr(unseen: &[f64], seen: &[f64], tpr_target: f64) -> Result<f64> {
    check_scores("unseen", unseen)?;
    check_scores("seen", seen)?;
    if !(tpr_target > 0.0 && tpr_target <= 1.0) {
        return Err(Error::Config(format!("tpr target must be in (0, 1], got {tpr_target}")));
    }
    let t = tpr_threshold(unseen, tpr_target);
    let fp = seen.iter().filter(|&&s| s >= t).count();
    Ok(fp as f64 / seen.len() as f64)
}

/// The `k`-th largest positive score with `k = ⌈target·n⌉`.
pub(crate) fn tpr_threshold(unseen: &[f64], tpr_target: f64) -> f64 {
    let n = unseen.len();
    // the epsilon absorbs representation error, e.g. 0.95·20
    let k = ((tpr_target * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    let mut pos = unseen.to_vec();
    pos.sort_by(|a, b| b.partial_cmp(a).expect("NaN rejected"));
    pos[k - 1]
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingCounts {
    pub seen_to_seen: usize,
    pub seen_to_unseen: usize,
    pub unseen_to_seen: usize,
    pub unseen_to_unseen: usize,
    /// Queries answered without a gate.
    pub ungated: usize,
}

impl RoutingCounts {
    pub fn total(&self) -> usize {
        self.seen_to_seen + self.seen_to_unseen + self.unseen_to_seen + self.unseen_to_unseen + self.ungated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seen_acc: f64,
    pub unseen_acc: f64,
    pub harmonic: f64,
    pub auc: f64,
    pub fpr_at_tpr95: f64,
    pub per_class_acc: BTreeMap<u32, f64>,
    pub routing: RoutingCounts,
}

/// One evaluated query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryOutcome {
    pub true_class: u32,
    pub is_unseen: bool,
    pub predicted: u32,
    pub route: Route,
    /// Unseen-class score used for AUC/FPR.
    pub score: f64,
}

impl EvalReport {
    pub fn from_outcomes(outcomes: &[QueryOutcome], seen_classes: &[u32], unseen_classes: &[u32]) -> Result<Self> {
        let split = |unseen: bool| -> (Vec<u32>, Vec<u32>, Vec<f64>) {
            let sel: Vec<&QueryOutcome> = outcomes.iter().filter(|o| o.is_unseen == unseen).collect();
            (
                sel.iter().map(|o| o.predicted).collect(),
                sel.iter().map(|o| o.true_class).collect(),
                sel.iter().map(|o| o.score).collect(),
            )
        };
        let (sp, st, ss) = split(false);
        let (up, ut, us) = split(true);
        if st.is_empty() || ut.is_empty() {
            return Err(Error::Data("evaluation needs both seen and unseen test queries".into()));
        }
        let seen_pc = per_class_accuracy(&sp, &st, seen_classes)?;
        let unseen_pc = per_class_accuracy(&up, &ut, unseen_classes)?;
        let mean = |m: &BTreeMap<u32, f64>| m.values().sum::<f64>() / m.len().max(1) as f64;
        let seen_acc = mean(&seen_pc);
        let unseen_acc = mean(&unseen_pc);

        let mut routing = RoutingCounts::default();
        for o in outcomes {
            match (o.is_unseen, o.route) {
                (false, Route::Seen) => routing.seen_to_seen += 1,
                (false, Route::Unseen) => routing.seen_to_unseen += 1,
                (true, Route::Seen) => routing.unseen_to_seen += 1,
                (true, Route::Unseen) => routing.unseen_to_unseen += 1,
                (_, Route::NoGate) => routing.ungated += 1,
            }
        }
        let mut per_class_acc = seen_pc;
        per_class_acc.extend(unseen_pc);
        Ok(EvalReport {
            seen_acc,
            unseen_acc,
            harmonic: harmonic_mean(seen_acc, unseen_acc),
            auc: auroc(&us, &ss)?,
            fpr_at_tpr95: fpr_at_tpr(&us, &ss, 0.95)?,
            per_class_acc,
            routing,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Percentages with one decimal, S / U / H first.
    pub fn render_table(&self, label: &str) -> String {
        let mut out = String::new();
        let width = label.len().max(5);
        let _ = writeln!(out, "{:<width$}  {:>5}  {:>5}  {:>5}  {:>5}  {:>5}", "model", "S", "U", "H", "AUC", "FPR");
        let _ = writeln!(
            out,
            "{:<width$}  {:>5.1}  {:>5.1}  {:>5.1}  {:>5.3}  {:>5.3}",
            label,
            100.0 * self.seen_acc,
            100.0 * self.unseen_acc,
            100.0 * self.harmonic,
            self.auc,
            self.fpr_at_tpr95
        );
        let r = &self.routing;
        let _ = writeln!(
            out,
            "routing: seen→seen {} seen→unseen {} unseen→seen {} unseen→unseen {} ungated {}",
            r.seen_to_seen, r.seen_to_unseen, r.unseen_to_seen, r.unseen_to_unseen, r.ungated
        );
        out
    }
}

/// AUROC of each individual distance feature and of their ratio scores.
///
/// Features are mapped through monotone transforms that avoid overflow
/// (`ln d_latent`, `−d_cross^U` for `1/d_cross^U`), which leaves AUROC unchanged.
pub fn score_decomposition(scores: &[GateScores], is_unseen: &[bool]) -> Result<Vec<(&'static str, f64)>> {
    if scores.len() != is_unseen.len() {
        return Err(Error::dim("score decomposition labels", scores.len(), is_unseen.len()));
    }
    type Feature = (&'static str, fn(&GateScores) -> f64);
    let features: [Feature; 7] = [
        ("d_latent_s", |s| s.log_d_latent_s),
        ("inv_d_latent_u", |s| -s.log_d_latent_u),
        ("r_latent", |s| s.log_d_latent_s - s.log_d_latent_u),
        ("d_cross_s", |s| s.d_cross_s),
        ("inv_d_cross_u", |s| -s.d_cross_u),
        ("r_cross", |s| s.r_cross),
        ("r_all", |s| s.r_all),
    ];
    features
        .iter()
        .map(|(name, f)| {
            let (mut u, mut s) = (Vec::new(), Vec::new());
            for (sc, &un) in scores.iter().zip(is_unseen) {
                if un {
                    u.push(f(sc));
                } else {
                    s.push(f(sc));
                }
            }
            Ok((*name, auroc(&u, &s)?))
        })
        .collect()
}
