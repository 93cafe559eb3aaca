//! Class experts: a linear softmax classifier over seen classes, and
//! nearest-neighbour classifiers in the autoencoder latent space.

use serde::{Deserialize, Serialize};

use crate::ae::{class_positions, TwoStreamAE};
use crate::error::{Error, Result};
use crate::linalg::{argmax, argmin, l2_distance, Matrix};
use crate::mlp::glorot_init;
use crate::optim::{adam_step, AdamState, Parameterized};
use crate::rng::Rng;
use crate::scores::{ReferenceBanks, Route};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_id: u32,
    pub route: Route,
    /// Logit for the linear expert, negative latent distance for 1-NN experts.
    pub score: f64,
}

/// One linear layer `x·W + b` over the seen classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SeenClassifier {
    pub(crate) w: Matrix,
    pub(crate) b: Vec<f64>,
    pub(crate) classes: Vec<u32>,
}

impl Parameterized for SeenClassifier {
    fn param_names(&self) -> &'static [&'static str] {
        &["W", "b"]
    }

    fn params(&self) -> Vec<&[f64]> {
        vec![self.w.as_slice(), &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.as_mut_slice(), &mut self.b]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeenClfConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop once the epoch loss has failed to improve by `min_delta` for
    /// `patience` consecutive epochs.
    pub patience: usize,
    pub min_delta: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for SeenClfConfig {
    fn default() -> Self {
        SeenClfConfig {
            lr: 1e-3,
            batch_size: 32,
            epochs: 50,
            patience: 5,
            min_delta: 1e-5,
            l2: 0.0,
            seed: 0,
        }
    }
}

impl SeenClassifier {
    pub fn from_parts(w: Matrix, b: Vec<f64>, classes: Vec<u32>) -> Result<Self> {
        if w.cols() != b.len() || b.len() != classes.len() {
            return Err(Error::dim("seen classifier outputs", classes.len(), w.cols()));
        }
        Ok(SeenClassifier { w, b, classes })
    }

    pub fn weights(&self) -> &Matrix {
        &self.w
    }

    pub fn bias(&self) -> &[f64] {
        &self.b
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn input_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::dim("seen classifier input", self.input_dim(), x.cols()));
        }
        let mut out = x.matmul(&self.w)?;
        out.add_row_vector(&self.b)?;
        Ok(out)
    }

    fn pick(&self, logits: &[f64]) -> Prediction {
        let (k, v) = argmax(logits).expect("at least one seen class");
        Prediction {
            class_id: self.classes[k],
            route: Route::Seen,
            score: v,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let xm = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.pick(self.logits(&xm)?.row(0)))
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Vec<Prediction>> {
        let logits = self.logits(x)?;
        Ok(logits.iter_rows().map(|r| self.pick(r)).collect())
    }
}

/// Mean softmax cross-entropy and its gradients.
fn softmax_xent(clf: &SeenClassifier, x: &Matrix, targets: &[usize], l2: f64) -> Result<(f64, Matrix, Vec<f64>)> {
    let logits = clf.logits(x)?;
    let n = x.rows() as f64;
    let mut dlogits = Matrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for (i, &y) in targets.iter().enumerate() {
        let row = logits.row(i);
        let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let sum: f64 = row.iter().map(|v| (v - m).exp()).sum();
        let lse = m + sum.ln();
        loss += lse - row[y];
        let d = dlogits.row_mut(i);
        for (j, g) in d.iter_mut().enumerate() {
            *g = ((row[j] - lse).exp() - if j == y { 1.0 } else { 0.0 }) / n;
        }
    }
    loss /= n;
    let mut dw = x.t_matmul(&dlogits)?;
    let db = dlogits.column_sums();
    if l2 > 0.0 {
        loss += 0.5 * l2 * clf.w.as_slice().iter().map(|w| w * w).sum::<f64>();
        dw.add_scaled(&clf.w, l2)?;
    }
    Ok((loss, dw, db))
}

/// Trains the seen expert with mini-batch Adam on softmax cross-entropy.
pub fn train_seen_classifier(
    x: &Matrix,
    labels: &[u32],
    classes: &[u32],
    cfg: &SeenClfConfig,
) -> Result<SeenClassifier> {
    if x.rows() == 0 {
        return Err(Error::Data("empty seen-classifier training set".into()));
    }
    if labels.len() != x.rows() {
        return Err(Error::dim("seen classifier labels", x.rows(), labels.len()));
    }
    if classes.is_empty() {
        return Err(Error::Data("seen classifier needs at least one class".into()));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 || !(cfg.lr > 0.0) || cfg.l2 < 0.0 {
        return Err(Error::Config(format!("invalid seen classifier config {cfg:?}")));
    }
    let targets = class_positions(classes, labels)?;
    let mut counts = vec![0usize; classes.len()];
    targets.iter().for_each(|&t| counts[t] += 1);
    for (c, _) in classes.iter().zip(&counts).filter(|(_, &n)| n == 0) {
        log::warn!("seen class {c} has no training samples");
    }

    let root = Rng::new(cfg.seed);
    let mut clf = SeenClassifier {
        w: glorot_init(x.cols(), classes.len(), &mut root.fork(0)),
        b: vec![0.0; classes.len()],
        classes: classes.to_vec(),
    };
    let mut order_rng = root.fork(1);
    let mut opt = AdamState::new(cfg.lr);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for epoch in 0..cfg.epochs {
        order_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = x.select_rows(batch);
            let tb: Vec<usize> = batch.iter().map(|&i| targets[i]).collect();
            let (loss, dw, db) = softmax_xent(&clf, &xb, &tb, cfg.l2)?;
            epoch_loss += loss * batch.len() as f64;
            adam_step(&mut clf, &[dw.as_slice(), &db], &mut opt)?;
        }
        epoch_loss /= x.rows() as f64;
        if epoch_loss < best - cfg.min_delta {
            best = epoch_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                log::debug!("seen classifier stopped after {} epochs", epoch + 1);
                break;
            }
        }
    }
    Ok(clf)
}

fn nearest(bank: &Matrix, ids: &[u32], z: &[f64], route: Route) -> Prediction {
    let d: Vec<f64> = bank.iter_rows().map(|r| l2_distance(z, r)).collect();
    let (k, dist) = argmin(&d).expect("bank is non-empty");
    Prediction {
        class_id: ids[k],
        route,
        score: -dist,
    }
}

/// Unseen expert on an already-encoded query.
pub fn unseen_1nn_latent(banks: &ReferenceBanks, z_v: &[f64]) -> Result<Prediction> {
    if banks.z_unseen.rows() == 0 {
        return Err(Error::Config("unseen bank is empty".into()));
    }
    if z_v.len() != banks.z_unseen.cols() {
        return Err(Error::dim("query latent", banks.z_unseen.cols(), z_v.len()));
    }
    Ok(nearest(&banks.z_unseen, &banks.unseen_classes, z_v, Route::Unseen))
}

/// Seen-class 1-NN in latent space, the alternative seen expert.
pub fn seen_1nn_latent(banks: &ReferenceBanks, z_v: &[f64]) -> Result<Prediction> {
    if banks.z_seen.rows() == 0 {
        return Err(Error::Config("seen bank is empty".into()));
    }
    if z_v.len() != banks.z_seen.cols() {
        return Err(Error::dim("query latent", banks.z_seen.cols(), z_v.len()));
    }
    Ok(nearest(&banks.z_seen, &banks.seen_classes, z_v, Route::Seen))
}

/// 1-NN over the union of seen and unseen latents (seen rows first, so
/// an exact tie goes to the seen class).
pub fn no_gating_latent(banks: &ReferenceBanks, z_v: &[f64]) -> Result<Prediction> {
    let seen = (banks.z_seen.rows() > 0).then(|| seen_1nn_latent(banks, z_v)).transpose()?;
    let unseen = (banks.z_unseen.rows() > 0).then(|| unseen_1nn_latent(banks, z_v)).transpose()?;
    let best = match (seen, unseen) {
        (Some(s), Some(u)) => {
            if u.score > s.score {
                u
            } else {
                s
            }
        }
        (Some(p), None) | (None, Some(p)) => p,
        (None, None) => return Err(Error::Config("both banks are empty".into())),
    };
    Ok(Prediction {
        route: Route::NoGate,
        ..best
    })
}

fn encode_one(ae: &TwoStreamAE, x: &[f64]) -> Result<Vec<f64>> {
    let xm = Matrix::from_vec(1, x.len(), x.to_vec())?;
    Ok(ae.encode_visual(&xm)?.into_vec())
}

pub fn predict_unseen_1nn(ae: &TwoStreamAE, banks: &ReferenceBanks, x: &[f64]) -> Result<Prediction> {
    unseen_1nn_latent(banks, &encode_one(ae, x)?)
}

pub fn predict_seen_1nn(ae: &TwoStreamAE, banks: &ReferenceBanks, x: &[f64]) -> Result<Prediction> {
    seen_1nn_latent(banks, &encode_one(ae, x)?)
}

pub fn predict_no_gating(ae: &TwoStreamAE, banks: &ReferenceBanks, x: &[f64]) -> Result<Prediction> {
    no_gating_latent(banks, &encode_one(ae, x)?)
}
