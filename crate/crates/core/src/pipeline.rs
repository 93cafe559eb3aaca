//! Tuning, retraining and evaluation of the gated predictor.
//!
//! Tuning treats `val_unseen_classes` as unseen: the autoencoder is trained
//! on the remaining seen classes for every α, then each (β, τ) pair is
//! scored by the harmonic mean on the validation rows. The chosen α is
//! then used to retrain from scratch on all seen-class training rows.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ae::{train, TrainConfig, TrainOutput, TrainingSet, TwoStreamAE};
use crate::data::DatasetBundle;
use crate::error::{Error, Result};
use crate::experts::{
    no_gating_latent, seen_1nn_latent, train_seen_classifier, unseen_1nn_latent, Prediction, SeenClassifier,
    SeenClfConfig,
};
use crate::linalg::Matrix;
use crate::metrics::{harmonic_mean, per_class_top1, EvalReport, QueryOutcome};
use crate::scores::{build_banks_for, gate, rescore, scores_from_latent, GateConfig, GateScores, ReferenceBanks, Route, ScoreKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SeenExpertKind {
    #[default]
    Linear,
    #[serde(rename = "1nn")]
    NearestNeighbor,
}

impl std::str::FromStr for SeenExpertKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(SeenExpertKind::Linear),
            "1nn" => Ok(SeenExpertKind::NearestNeighbor),
            _ => Err(Error::Config(format!("unknown seen expert {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PipelineConfig {
    pub train: TrainConfig,
    pub seen_clf: SeenClfConfig,
    pub score: ScoreKind,
    pub seen_expert: SeenExpertKind,
}

/// Hyperparameter grids. `taus = None` uses the 1%..99% quantiles of the
/// validation scores for each β.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneGrids {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub taus: Option<Vec<f64>>,
}

impl Default for TuneGrids {
    fn default() -> Self {
        TuneGrids {
            alphas: (1..=10).map(|i| i as f64 / 100.0).collect(),
            betas: vec![0.0, 1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0],
            taus: None,
        }
    }
}

impl TuneGrids {
    fn normalized(&self) -> Result<TuneGrids> {
        let clean = |name: &str, v: &[f64], ok: fn(f64) -> bool| -> Result<Vec<f64>> {
            if v.is_empty() {
                return Err(Error::Config(format!("{name} grid is empty")));
            }
            if let Some(bad) = v.iter().find(|&&x| !ok(x)) {
                return Err(Error::Config(format!("invalid {name} value {bad}")));
            }
            let mut out = v.to_vec();
            out.sort_by(|a, b| a.partial_cmp(b).unwrap());
            out.dedup();
            Ok(out)
        };
        Ok(TuneGrids {
            alphas: clean("alpha", &self.alphas, |x| x > 0.0 && x.is_finite())?,
            betas: clean("beta", &self.betas, |x| x >= 0.0 && x.is_finite())?,
            taus: self
                .taus
                .as_ref()
                .map(|t| clean("tau", t, |x| x > 0.0))
                .transpose()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub s_val: f64,
    pub u_val: f64,
    pub h_val: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_alpha: f64,
    pub best_beta: f64,
    pub best_tau: f64,
    pub val_harmonic: f64,
    pub trace: Vec<TracePoint>,
}

impl TuneResult {
    /// Tab-separated trace with a header row.
    pub fn trace_tsv(&self) -> String {
        let mut out = String::from("alpha\tbeta\ttau\tS_val\tU_val\tH_val\n");
        for p in &self.trace {
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", p.alpha, p.beta, p.tau, p.s_val, p.u_val, p.h_val);
        }
        out
    }
}

/// Empirical quantiles at 1%, 2%, …, 99% (nearest rank), floored at the
/// smallest positive double so every threshold is a valid τ.
pub fn quantile_taus(scores: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("scores are not NaN"));
    let n = sorted.len();
    (1..=99)
        .map(|p| {
            let rank = ((p as f64 / 100.0) * n as f64).ceil().max(1.0) as usize;
            sorted[rank.min(n) - 1].max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// The rows and class partitions used while tuning.
struct TuningView {
    train_rows: Vec<usize>,
    seen: Vec<u32>,
    val_unseen: Vec<u32>,
    val_seen_rows: Vec<usize>,
    val_unseen_rows: Vec<usize>,
}

fn tuning_view(bundle: &DatasetBundle) -> Result<TuningView> {
    let s = &bundle.splits;
    if s.val_unseen_classes.is_empty() {
        return Err(Error::Protocol("bundle has no validation-unseen classes".into()));
    }
    let val_unseen: BTreeSet<u32> = s.val_unseen_classes.iter().copied().collect();
    let seen: Vec<u32> = s.seen_classes.iter().copied().filter(|c| !val_unseen.contains(c)).collect();
    if seen.is_empty() {
        return Err(Error::Protocol("every seen class is held out for validation".into()));
    }
    let label = |i: &usize| bundle.labels[*i];
    let mut train_rows: Vec<usize> = s.train_idx.iter().copied().filter(|i| !val_unseen.contains(&label(i))).collect();
    let mut val_seen_rows: Vec<usize> = s.val_idx.iter().copied().filter(|i| !val_unseen.contains(&label(i))).collect();
    let val_unseen_rows: Vec<usize> = s
        .val_idx
        .iter()
        .chain(&s.train_idx)
        .copied()
        .filter(|i| val_unseen.contains(&label(i)))
        .collect();
    if val_unseen_rows.is_empty() {
        return Err(Error::Protocol("no rows for the validation-unseen classes".into()));
    }
    if val_seen_rows.is_empty() {
        // hold out every fifth training row of each class
        let mut seen_count = std::collections::BTreeMap::<u32, usize>::new();
        let mut keep = Vec::new();
        for &i in &train_rows {
            let k = seen_count.entry(label(&i)).or_default();
            if *k % 5 == 4 {
                val_seen_rows.push(i);
            } else {
                keep.push(i);
            }
            *k += 1;
        }
        if val_seen_rows.is_empty() {
            return Err(Error::Protocol("too few training rows to hold out validation queries".into()));
        }
        log::info!("held out {} training rows as validation-seen queries", val_seen_rows.len());
        train_rows = keep;
    }
    if train_rows.is_empty() {
        return Err(Error::Protocol("no training rows left for tuning".into()));
    }
    Ok(TuningView {
        train_rows,
        seen,
        val_unseen: s.val_unseen_classes.clone(),
        val_seen_rows,
        val_unseen_rows,
    })
}

fn train_ae(bundle: &DatasetBundle, rows: &[usize], seen: &[u32], cfg: &TrainConfig) -> Result<TrainOutput> {
    let (x, y) = bundle.rows(rows);
    let set = TrainingSet {
        features: &x,
        labels: &y,
        attributes: &bundle.attributes,
        seen_classes: seen,
    };
    train(set, cfg)
}

fn seen_expert_predictions(
    kind: SeenExpertKind,
    clf: &SeenClassifier,
    banks: &ReferenceBanks,
    x: &Matrix,
    z: &Matrix,
) -> Result<Vec<Prediction>> {
    match kind {
        SeenExpertKind::Linear => clf.predict_batch(x),
        SeenExpertKind::NearestNeighbor => z.iter_rows().map(|r| seen_1nn_latent(banks, r)).collect(),
    }
}

/// Grid search over α, β and τ on the validation protocol of `bundle`.
/// Only training and validation rows are read.
pub fn tune(bundle: &DatasetBundle, grids: &TuneGrids, cfg: &PipelineConfig) -> Result<TuneResult> {
    let grids = grids.normalized()?;
    cfg.train.validate()?;
    let view = tuning_view(bundle)?;
    let (xt, yt) = bundle.rows(&view.train_rows);
    let clf = train_seen_classifier(&xt, &yt, &view.seen, &cfg.seen_clf)?;

    let queries: Vec<usize> = view.val_seen_rows.iter().chain(&view.val_unseen_rows).copied().collect();
    let (xq, yq) = bundle.rows(&queries);
    let is_unseen: Vec<bool> = (0..queries.len()).map(|i| i >= view.val_seen_rows.len()).collect();

    let mut trace = Vec::new();
    let mut best: Option<TracePoint> = None;
    for &alpha in &grids.alphas {
        let tcfg = TrainConfig { alpha, ..cfg.train.clone() };
        let ae = train_ae(bundle, &view.train_rows, &view.seen, &tcfg)?.model;
        let banks = build_banks_for(&ae, &bundle.attributes, &view.seen, &view.val_unseen)?;
        let z = ae.encode_visual(&xq)?;
        let base: Vec<GateScores> = (0..xq.rows())
            .map(|i| scores_from_latent(z.row(i), xq.row(i), &banks, 0.0))
            .collect::<Result<_>>()?;
        let seen_pred: Vec<u32> = seen_expert_predictions(cfg.seen_expert, &clf, &banks, &xq, &z)?
            .iter()
            .map(|p| p.class_id)
            .collect();
        let unseen_pred: Vec<u32> = z
            .iter_rows()
            .map(|r| unseen_1nn_latent(&banks, r).map(|p| p.class_id))
            .collect::<Result<_>>()?;

        for &beta in &grids.betas {
            let scores: Vec<f64> = base.iter().map(|s| rescore(s, beta).score(cfg.score)).collect();
            if let Some(i) = scores.iter().position(|s| s.is_nan()) {
                return Err(Error::NonFinite(format!("validation score of query {i}")));
            }
            let taus = grids.taus.clone().unwrap_or_else(|| quantile_taus(&scores));
            for &tau in &taus {
                let (mut sp, mut st, mut up, mut ut) = (vec![], vec![], vec![], vec![]);
                for (i, &s) in scores.iter().enumerate() {
                    let pred = match gate(s, tau) {
                        Route::Seen => seen_pred[i],
                        _ => unseen_pred[i],
                    };
                    if is_unseen[i] {
                        up.push(pred);
                        ut.push(yq[i]);
                    } else {
                        sp.push(pred);
                        st.push(yq[i]);
                    }
                }
                let s_val = per_class_top1(&sp, &st, &view.seen)?;
                let u_val = per_class_top1(&up, &ut, &view.val_unseen)?;
                let point = TracePoint {
                    alpha,
                    beta,
                    tau,
                    s_val,
                    u_val,
                    h_val: harmonic_mean(s_val, u_val),
                };
                // grids ascend, so a strict improvement keeps the lexicographically smallest tie
                if best.is_none_or(|b| point.h_val > b.h_val) {
                    best = Some(point);
                }
                trace.push(point);
            }
        }
        log::info!("alpha {alpha}: best H_val so far {:.4}", best.map_or(0.0, |b| b.h_val));
    }
    let best = best.expect("grids are non-empty");
    Ok(TuneResult {
        best_alpha: best.alpha,
        best_beta: best.beta,
        best_tau: best.tau,
        val_harmonic: best.h_val,
        trace,
    })
}

/// The complete gated classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct GatedPredictor {
    pub ae: TwoStreamAE,
    pub banks: ReferenceBanks,
    pub seen_clf: SeenClassifier,
    pub gate_cfg: GateConfig,
    pub score: ScoreKind,
    pub seen_expert: SeenExpertKind,
}

/// Every seen-class training row (train ∪ val), sorted.
pub fn final_training_rows(bundle: &DatasetBundle) -> Vec<usize> {
    let mut rows: Vec<usize> = bundle.splits.train_idx.iter().chain(&bundle.splits.val_idx).copied().collect();
    rows.sort_unstable();
    rows
}

/// Trains the final autoencoder and seen expert on all seen-class training
/// rows. Also returns the per-epoch autoencoder loss.
pub fn train_final(
    bundle: &DatasetBundle,
    gate_cfg: GateConfig,
    cfg: &PipelineConfig,
) -> Result<(GatedPredictor, Vec<f64>)> {
    gate_cfg.validate()?;
    let rows = final_training_rows(bundle);
    let seen = &bundle.splits.seen_classes;
    let TrainOutput { model: ae, loss_trace } = train_ae(bundle, &rows, seen, &cfg.train)?;
    let banks = build_banks_for(&ae, &bundle.attributes, seen, &bundle.splits.unseen_classes)?;
    let (x, y) = bundle.rows(&rows);
    let seen_clf = train_seen_classifier(&x, &y, seen, &cfg.seen_clf)?;
    let predictor = GatedPredictor {
        ae,
        banks,
        seen_clf,
        gate_cfg,
        score: cfg.score,
        seen_expert: cfg.seen_expert,
    };
    Ok((predictor, loss_trace))
}

/// Retrains from scratch with the tuned α and installs the tuned (β, τ).
pub fn retrain_final(
    bundle: &DatasetBundle,
    tuned: &TuneResult,
    cfg: &PipelineConfig,
) -> Result<(GatedPredictor, Vec<f64>)> {
    let cfg = PipelineConfig {
        train: TrainConfig {
            alpha: tuned.best_alpha,
            ..cfg.train.clone()
        },
        ..cfg.clone()
    };
    train_final(
        bundle,
        GateConfig {
            beta: tuned.best_beta,
            tau: tuned.best_tau,
        },
        &cfg,
    )
}

/// Outcome of one query, with everything the score dump records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryRecord {
    pub query_index: usize,
    pub true_class: u32,
    pub is_unseen: bool,
    pub scores: GateScores,
    pub prediction: Prediction,
}

impl GatedPredictor {
    pub fn with_seen_expert(&self, kind: SeenExpertKind) -> GatedPredictor {
        GatedPredictor {
            seen_expert: kind,
            ..self.clone()
        }
    }

    pub fn with_gate(&self, gate_cfg: GateConfig, score: ScoreKind) -> GatedPredictor {
        GatedPredictor {
            gate_cfg,
            score,
            ..self.clone()
        }
    }

    fn decide(&self, x: &[f64], z: &[f64]) -> Result<(GateScores, Prediction)> {
        let s = scores_from_latent(z, x, &self.banks, self.gate_cfg.beta)?;
        let pred = match gate(s.score(self.score), self.gate_cfg.tau) {
            Route::Seen => match self.seen_expert {
                SeenExpertKind::Linear => self.seen_clf.predict(x)?,
                SeenExpertKind::NearestNeighbor => seen_1nn_latent(&self.banks, z)?,
            },
            _ => unseen_1nn_latent(&self.banks, z)?,
        };
        Ok((s, pred))
    }

    /// Gated prediction: seen expert iff the unseen-class score is below τ.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let xm = Matrix::from_vec(1, x.len(), x.to_vec())?;
        let z = self.ae.encode_visual(&xm)?;
        Ok(self.decide(x, z.row(0))?.1)
    }

    /// Scores and predictions for every row of `x`.
    pub fn predict_batch(&self, x: &Matrix) -> Result<Vec<(GateScores, Prediction)>> {
        let z = self.ae.encode_visual(x)?;
        (0..x.rows()).map(|i| self.decide(x.row(i), z.row(i))).collect()
    }

    /// Scores and 1-NN predictions over all classes, bypassing the gate.
    pub fn predict_no_gating_batch(&self, x: &Matrix) -> Result<Vec<(GateScores, Prediction)>> {
        let z = self.ae.encode_visual(x)?;
        (0..x.rows())
            .map(|i| {
                let s = scores_from_latent(z.row(i), x.row(i), &self.banks, self.gate_cfg.beta)?;
                Ok((s, no_gating_latent(&self.banks, z.row(i))?))
            })
            .collect()
    }
}

fn test_queries(bundle: &DatasetBundle) -> Result<(Vec<usize>, usize)> {
    let s = &bundle.splits;
    if s.test_seen_idx.is_empty() || s.test_unseen_idx.is_empty() {
        return Err(Error::Data("bundle lacks seen or unseen test rows".into()));
    }
    let rows: Vec<usize> = s.test_seen_idx.iter().chain(&s.test_unseen_idx).copied().collect();
    Ok((rows, s.test_seen_idx.len()))
}

fn evaluate_with(
    pred: &GatedPredictor,
    bundle: &DatasetBundle,
    no_gating: bool,
) -> Result<(EvalReport, Vec<QueryRecord>)> {
    let (rows, n_seen) = test_queries(bundle)?;
    let (x, y) = bundle.rows(&rows);
    let out = if no_gating {
        pred.predict_no_gating_batch(&x)?
    } else {
        pred.predict_batch(&x)?
    };
    let records: Vec<QueryRecord> = out
        .into_iter()
        .enumerate()
        .map(|(i, (scores, prediction))| QueryRecord {
            query_index: rows[i],
            true_class: y[i],
            is_unseen: i >= n_seen,
            scores,
            prediction,
        })
        .collect();
    let outcomes: Vec<QueryOutcome> = records
        .iter()
        .map(|r| QueryOutcome {
            true_class: r.true_class,
            is_unseen: r.is_unseen,
            predicted: r.prediction.class_id,
            route: r.prediction.route,
            score: r.scores.score(pred.score),
        })
        .collect();
    let report = EvalReport::from_outcomes(&outcomes, &pred.banks.seen_classes, &pred.banks.unseen_classes)?;
    Ok((report, records))
}

/// Runs the gated predictor over the seen and unseen test rows.
pub fn evaluate_gzsl(pred: &GatedPredictor, bundle: &DatasetBundle) -> Result<(EvalReport, Vec<QueryRecord>)> {
    evaluate_with(pred, bundle, false)
}

/// The no-gating baseline: 1-NN over all class latents of the same model.
pub fn evaluate_no_gating(pred: &GatedPredictor, bundle: &DatasetBundle) -> Result<(EvalReport, Vec<QueryRecord>)> {
    evaluate_with(pred, bundle, true)
}

/// Per-query score dump. Columns after `route` are extensions.
pub fn scores_tsv(records: &[QueryRecord]) -> String {
    let mut out = String::from(
        "query_index\ttrue_class\tlogS\tlogU\td_cross_s\td_cross_u\tr_latent\tr_cross\tr_all\troute\tpred_class\n",
    );
    for r in records {
        let s = &r.scores;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.query_index,
            r.true_class,
            s.log_d_latent_s,
            s.log_d_latent_u,
            s.d_cross_s,
            s.d_cross_u,
            s.r_latent,
            s.r_cross,
            s.r_all,
            r.prediction.route.name(),
            r.prediction.class_id
        );
    }
    out
}
