//! Two-stream autoencoder: a vision stream and an attribute stream that
//! share one latent space.
//!
//! Training combines three objectives:
//!
//! * reconstruction: `‖x − g_v(f_v(x))‖₁ + ‖a − g_a(f_a(a))‖₁`
//! * cross-reconstruction: `‖x − g_v(f_a(a))‖₁ + ‖a − g_a(f_v(x))‖₁`
//! * classification: softmax over negative latent distances between
//!   `f_v(x)` and the encoded attributes of every seen class
//!
//! with `L_all = L_recon + L_cross + α·L_cls`. Per-sample terms are
//! averaged over the batch (or summed, see [`LossReduction`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{l2_distance, Matrix};
use crate::mlp::{Mlp2, Mlp2Cache, Mlp2Grads};
use crate::optim::{adam_step, AdamState};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStreamAE {
    /// Vision encoder, `dim_v → h_v → dim_z`.
    pub f_v: Mlp2,
    /// Vision decoder, `dim_z → h_v → dim_v`.
    pub g_v: Mlp2,
    /// Attribute encoder, `dim_a → h_a → dim_z`.
    pub f_a: Mlp2,
    /// Attribute decoder, `dim_z → h_a → dim_a`.
    pub g_a: Mlp2,
}

/// Sizes of the four networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AeDims {
    pub dim_v: usize,
    pub dim_a: usize,
    pub dim_z: usize,
    pub hidden_v: usize,
    pub hidden_a: usize,
}

impl TwoStreamAE {
    pub fn new(dims: AeDims, rng: &mut Rng) -> Self {
        TwoStreamAE {
            f_v: Mlp2::new(dims.dim_v, dims.hidden_v, dims.dim_z, rng),
            g_v: Mlp2::new(dims.dim_z, dims.hidden_v, dims.dim_v, rng),
            f_a: Mlp2::new(dims.dim_a, dims.hidden_a, dims.dim_z, rng),
            g_a: Mlp2::new(dims.dim_z, dims.hidden_a, dims.dim_a, rng),
        }
    }

    /// Assembles a model from four networks, checking the shape chain.
    pub fn from_parts(f_v: Mlp2, g_v: Mlp2, f_a: Mlp2, g_a: Mlp2) -> Result<Self> {
        let dim_z = f_v.output_dim();
        for (name, got) in [
            ("f_a output", f_a.output_dim()),
            ("g_v input", g_v.input_dim()),
            ("g_a input", g_a.input_dim()),
        ] {
            if got != dim_z {
                return Err(Error::dim(name, dim_z, got));
            }
        }
        if g_v.output_dim() != f_v.input_dim() {
            return Err(Error::dim("g_v output", f_v.input_dim(), g_v.output_dim()));
        }
        if g_a.output_dim() != f_a.input_dim() {
            return Err(Error::dim("g_a output", f_a.input_dim(), g_a.output_dim()));
        }
        Ok(TwoStreamAE { f_v, g_v, f_a, g_a })
    }

    pub fn dims(&self) -> AeDims {
        AeDims {
            dim_v: self.f_v.input_dim(),
            dim_a: self.f_a.input_dim(),
            dim_z: self.f_v.output_dim(),
            hidden_v: self.f_v.hidden_dim(),
            hidden_a: self.f_a.hidden_dim(),
        }
    }

    pub fn encode_visual(&self, x: &Matrix) -> Result<Matrix> {
        self.f_v.apply(x)
    }

    pub fn encode_attributes(&self, a: &Matrix) -> Result<Matrix> {
        self.f_a.apply(a)
    }

    /// `g_v(f_a(a))`.
    pub fn cross_reconstruct_visual(&self, a: &Matrix) -> Result<Matrix> {
        self.g_v.apply(&self.f_a.apply(a)?)
    }
}

/// Gradients for all four networks.
#[derive(Debug, Clone, PartialEq)]
pub struct AeGrads {
    pub f_v: Mlp2Grads,
    pub g_v: Mlp2Grads,
    pub f_a: Mlp2Grads,
    pub g_a: Mlp2Grads,
}

impl AeGrads {
    pub fn zeros_like(ae: &TwoStreamAE) -> Self {
        AeGrads {
            f_v: Mlp2Grads::zeros_like(&ae.f_v),
            g_v: Mlp2Grads::zeros_like(&ae.g_v),
            f_a: Mlp2Grads::zeros_like(&ae.f_a),
            g_a: Mlp2Grads::zeros_like(&ae.g_a),
        }
    }

    pub fn add_scaled(&mut self, other: &AeGrads, c: f64) {
        self.f_v.add_scaled(&other.f_v, c);
        self.g_v.add_scaled(&other.g_v, c);
        self.f_a.add_scaled(&other.f_a, c);
        self.g_a.add_scaled(&other.g_a, c);
    }

    /// Gradients flattened in checkpoint order (f_v, g_v, f_a, g_a).
    pub fn flat(&self) -> Vec<f64> {
        [&self.f_v, &self.g_v, &self.f_a, &self.g_a]
            .into_iter()
            .flat_map(|g| g.slices().into_iter().flatten().copied().collect::<Vec<_>>())
            .collect()
    }
}

/// One attribute row per seen class, row `i` describing seen-class index `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeenAttributeBank {
    attrs: Matrix,
}

impl SeenAttributeBank {
    pub fn new(attrs: Matrix) -> Result<Self> {
        if attrs.rows() == 0 {
            return Err(Error::Config("seen attribute bank is empty".into()));
        }
        Ok(SeenAttributeBank { attrs })
    }

    pub fn attributes(&self) -> &Matrix {
        &self.attrs
    }

    pub fn num_classes(&self) -> usize {
        self.attrs.rows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossReduction {
    #[default]
    Mean,
    Sum,
}

/// A loss value together with its gradient for every network.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    pub grads: AeGrads,
}

/// Values of the individual objectives plus the gradient of their weighted sum.
#[derive(Debug, Clone)]
pub struct LossBreakdown {
    pub recon: f64,
    pub cross: f64,
    pub cls: f64,
    pub total: f64,
    pub grads: AeGrads,
}

#[inline]
fn l1_subgradient(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `Σ|pred − target|` and its gradient w.r.t. `pred`, scaled by `scale`.
fn l1_term(pred: &Matrix, target: &Matrix, scale: f64) -> (f64, Matrix) {
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut total = 0.0;
    for ((g, p), t) in grad
        .as_mut_slice()
        .iter_mut()
        .zip(pred.as_slice())
        .zip(target.as_slice())
    {
        let diff = p - t;
        total += diff.abs();
        *g = scale * l1_subgradient(diff);
    }
    (total, grad)
}

/// Summed per-sample classification loss plus gradients w.r.t. the visual
/// latents and the class latents, both scaled by `scale`.
fn cls_term(
    z_v: &Matrix,
    z_bank: &Matrix,
    class_idx: &[usize],
    scale: f64,
) -> (f64, Matrix, Matrix) {
    let k = z_bank.rows();
    let mut dz_v = Matrix::zeros(z_v.rows(), z_v.cols());
    let mut dz_bank = Matrix::zeros(z_bank.rows(), z_bank.cols());
    let mut total = 0.0;
    let mut dist = vec![0.0; k];
    let mut prob = vec![0.0; k];
    for (b, &y) in class_idx.iter().enumerate() {
        let zb = z_v.row(b);
        for (j, d) in dist.iter_mut().enumerate() {
            *d = l2_distance(zb, z_bank.row(j));
        }
        // log-sum-exp of the logits -d, shifted by the largest logit
        let shift = dist.iter().fold(f64::INFINITY, |m, &d| m.min(d));
        let sum: f64 = dist.iter().map(|&d| (shift - d).exp()).sum();
        let lse = -shift + sum.ln();
        total += dist[y] + lse;
        for (p, &d) in prob.iter_mut().zip(&dist) {
            *p = (-d - lse).exp();
        }
        for j in 0..k {
            // ∂loss/∂d_j = δ_jy − p_j
            let coeff = (if j == y { 1.0 } else { 0.0 }) - prob[j];
            if coeff == 0.0 || dist[j] == 0.0 {
                continue;
            }
            let c = scale * coeff / dist[j];
            let zj = z_bank.row(j);
            let dzb = dz_v.row_mut(b);
            for (i, g) in dzb.iter_mut().enumerate() {
                *g += c * (zb[i] - zj[i]);
            }
            let dzj = dz_bank.row_mut(j);
            for (i, g) in dzj.iter_mut().enumerate() {
                *g -= c * (zb[i] - zj[i]);
            }
        }
    }
    (total, dz_v, dz_bank)
}

#[derive(Clone, Copy)]
struct Weights {
    recon: f64,
    cross: f64,
    cls: f64,
}

fn check_batch(ae: &TwoStreamAE, x: &Matrix, a: Option<&Matrix>) -> Result<()> {
    let dims = ae.dims();
    if x.cols() != dims.dim_v {
        return Err(Error::dim("visual batch width", dims.dim_v, x.cols()));
    }
    if x.rows() == 0 {
        return Err(Error::Data("empty batch".into()));
    }
    if let Some(a) = a {
        if a.cols() != dims.dim_a {
            return Err(Error::dim("attribute batch width", dims.dim_a, a.cols()));
        }
        if a.rows() != x.rows() {
            return Err(Error::dim("attribute batch rows", x.rows(), a.rows()));
        }
    }
    Ok(())
}

/// Shared forward/backward for every combination of objectives. Terms with
/// zero weight are skipped entirely (value reported as 0).
fn objective(
    ae: &TwoStreamAE,
    x: &Matrix,
    a: Option<&Matrix>,
    cls: Option<(&[usize], &SeenAttributeBank)>,
    w: Weights,
    reduction: LossReduction,
) -> Result<LossBreakdown> {
    check_batch(ae, x, a)?;
    let n = x.rows();
    let norm = match reduction {
        LossReduction::Mean => 1.0 / n as f64,
        LossReduction::Sum => 1.0,
    };
    let mut grads = AeGrads::zeros_like(ae);

    let (z_v, c_fv) = ae.f_v.forward(x)?;
    let mut dz_v = Matrix::zeros(n, z_v.cols());
    let mut fa_input: Option<(Matrix, Mlp2Cache, Matrix)> = None;

    let mut recon = 0.0;
    let mut cross = 0.0;
    let mut cls_value = 0.0;

    let need_a = w.recon != 0.0 || w.cross != 0.0;
    if need_a {
        let a = a.ok_or_else(|| Error::State("attribute batch required".into()))?;
        let (z_a, c_fa) = ae.f_a.forward(a)?;
        let mut dz_a = Matrix::zeros(n, z_a.cols());

        if w.recon != 0.0 {
            let (x_rec, c) = ae.g_v.forward(&z_v)?;
            let (lx, dx) = l1_term(&x_rec, x, norm * w.recon);
            let (g, dz) = ae.g_v.backward(&c, &dx)?;
            grads.g_v.add_scaled(&g, 1.0);
            dz_v.add_scaled(&dz, 1.0)?;

            let (a_rec, c) = ae.g_a.forward(&z_a)?;
            let (la, da) = l1_term(&a_rec, a, norm * w.recon);
            let (g, dz) = ae.g_a.backward(&c, &da)?;
            grads.g_a.add_scaled(&g, 1.0);
            dz_a.add_scaled(&dz, 1.0)?;
            recon = (lx + la) * norm;
        }

        if w.cross != 0.0 {
            let (x_cross, c) = ae.g_v.forward(&z_a)?;
            let (lx, dx) = l1_term(&x_cross, x, norm * w.cross);
            let (g, dz) = ae.g_v.backward(&c, &dx)?;
            grads.g_v.add_scaled(&g, 1.0);
            dz_a.add_scaled(&dz, 1.0)?;

            let (a_cross, c) = ae.g_a.forward(&z_v)?;
            let (la, da) = l1_term(&a_cross, a, norm * w.cross);
            let (g, dz) = ae.g_a.backward(&c, &da)?;
            grads.g_a.add_scaled(&g, 1.0);
            dz_v.add_scaled(&dz, 1.0)?;
            cross = (lx + la) * norm;
        }
        fa_input = Some((z_a, c_fa, dz_a));
    }

    if w.cls != 0.0 {
        let (class_idx, bank) =
            cls.ok_or_else(|| Error::State("class indices and bank required".into()))?;
        if class_idx.len() != n {
            return Err(Error::dim("class index count", n, class_idx.len()));
        }
        if let Some(&bad) = class_idx.iter().find(|&&c| c >= bank.num_classes()) {
            return Err(Error::Data(format!(
                "class index {bad} out of range for {} seen classes",
                bank.num_classes()
            )));
        }
        if bank.attributes().cols() != ae.dims().dim_a {
            return Err(Error::dim(
                "seen attribute bank width",
                ae.dims().dim_a,
                bank.attributes().cols(),
            ));
        }
        let (z_bank, c_bank) = ae.f_a.forward(bank.attributes())?;
        let (lc, dzv, dzb) = cls_term(&z_v, &z_bank, class_idx, norm * w.cls);
        dz_v.add_scaled(&dzv, 1.0)?;
        let (g, _) = ae.f_a.backward(&c_bank, &dzb)?;
        grads.f_a.add_scaled(&g, 1.0);
        cls_value = lc * norm;
    }

    if let Some((_, c_fa, dz_a)) = fa_input {
        let (g, _) = ae.f_a.backward(&c_fa, &dz_a)?;
        grads.f_a.add_scaled(&g, 1.0);
    }
    let (g, _) = ae.f_v.backward(&c_fv, &dz_v)?;
    grads.f_v.add_scaled(&g, 1.0);

    let total = w.recon * recon + w.cross * cross + w.cls * cls_value;
    Ok(LossBreakdown {
        recon,
        cross,
        cls: cls_value,
        total,
        grads,
    })
}

const ONLY_RECON: Weights = Weights {
    recon: 1.0,
    cross: 0.0,
    cls: 0.0,
};
const ONLY_CROSS: Weights = Weights {
    recon: 0.0,
    cross: 1.0,
    cls: 0.0,
};
const ONLY_CLS: Weights = Weights {
    recon: 0.0,
    cross: 0.0,
    cls: 1.0,
};

/// Batch-mean reconstruction loss. Row `i` of `a` must be the attribute of
/// the class of row `i` of `x`.
pub fn loss_recon(ae: &TwoStreamAE, x: &Matrix, a: &Matrix) -> Result<LossOutput> {
    let out = objective(ae, x, Some(a), None, ONLY_RECON, LossReduction::Mean)?;
    Ok(LossOutput {
        value: out.recon,
        grads: out.grads,
    })
}

/// Batch-mean cross-reconstruction loss.
pub fn loss_cross(ae: &TwoStreamAE, x: &Matrix, a: &Matrix) -> Result<LossOutput> {
    let out = objective(ae, x, Some(a), None, ONLY_CROSS, LossReduction::Mean)?;
    Ok(LossOutput {
        value: out.cross,
        grads: out.grads,
    })
}

/// Batch-mean classification loss over the seen classes in `bank`.
/// The bank is re-encoded through `f_a`, so gradients reach the attribute
/// encoder through every class term.
pub fn loss_cls(
    ae: &TwoStreamAE,
    x: &Matrix,
    class_idx: &[usize],
    bank: &SeenAttributeBank,
) -> Result<LossOutput> {
    let out = objective(ae, x, None, Some((class_idx, bank)), ONLY_CLS, LossReduction::Mean)?;
    Ok(LossOutput {
        value: out.cls,
        grads: out.grads,
    })
}

/// `L_recon + L_cross + α·L_cls` with gradients of the same weighted sum.
pub fn loss_all(
    ae: &TwoStreamAE,
    x: &Matrix,
    a: &Matrix,
    class_idx: &[usize],
    bank: &SeenAttributeBank,
    alpha: f64,
) -> Result<LossBreakdown> {
    loss_all_with(ae, x, a, class_idx, bank, alpha, LossReduction::Mean)
}

pub fn loss_all_with(
    ae: &TwoStreamAE,
    x: &Matrix,
    a: &Matrix,
    class_idx: &[usize],
    bank: &SeenAttributeBank,
    alpha: f64,
    reduction: LossReduction,
) -> Result<LossBreakdown> {
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("alpha must be > 0, got {alpha}")));
    }
    let w = Weights {
        recon: 1.0,
        cross: 1.0,
        cls: alpha,
    };
    objective(ae, x, Some(a), Some((class_idx, bank)), w, reduction)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_v: usize,
    pub hidden_a: usize,
    pub latent_dim: usize,
    pub seed: u64,
    #[serde(default)]
    pub reduction: LossReduction,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.05,
            lr: 1.5e-4,
            epochs: 100,
            batch_size: 64,
            hidden_v: 512,
            hidden_a: 512,
            latent_dim: 64,
            seed: 0,
            reduction: LossReduction::Mean,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.hidden_v == 0 || self.hidden_a == 0 || self.latent_dim == 0 {
            return Err(Error::Config("layer widths must be >= 1".into()));
        }
        Ok(())
    }
}

/// Visual rows with their global class ids, plus the attribute table for
/// every class and the ordered list of seen classes used for `L_cls`.
#[derive(Debug, Clone, Copy)]
pub struct TrainingSet<'a> {
    pub features: &'a Matrix,
    pub labels: &'a [u32],
    pub attributes: &'a Matrix,
    pub seen_classes: &'a [u32],
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: TwoStreamAE,
    /// Sample-weighted mean `L_all` of each epoch.
    pub loss_trace: Vec<f64>,
}

/// Maps global class ids to positions in `classes`.
pub(crate) fn class_positions(classes: &[u32], labels: &[u32]) -> Result<Vec<usize>> {
    let max = classes.iter().copied().max().unwrap_or(0) as usize;
    let mut pos = vec![usize::MAX; max + 1];
    for (i, &c) in classes.iter().enumerate() {
        pos[c as usize] = i;
    }
    labels
        .iter()
        .map(|&l| match pos.get(l as usize) {
            Some(&p) if p != usize::MAX => Ok(p),
            _ => Err(Error::Data(format!("label {l} is not among the training classes"))),
        })
        .collect()
}

/// Trains a fresh autoencoder with mini-batch Adam, one optimizer per network.
pub fn train(set: TrainingSet<'_>, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let n = set.features.rows();
    if n == 0 {
        return Err(Error::Data("empty training set".into()));
    }
    if set.labels.len() != n {
        return Err(Error::dim("training labels", n, set.labels.len()));
    }
    if set.seen_classes.is_empty() {
        return Err(Error::Data("no seen classes".into()));
    }
    for &c in set.seen_classes {
        if c as usize >= set.attributes.rows() {
            return Err(Error::Data(format!("no attribute row for class {c}")));
        }
    }
    let class_idx = class_positions(set.seen_classes, set.labels)?;
    let seen_rows: Vec<usize> = set.seen_classes.iter().map(|&c| c as usize).collect();
    let bank = SeenAttributeBank::new(set.attributes.select_rows(&seen_rows))?;

    let dims = AeDims {
        dim_v: set.features.cols(),
        dim_a: set.attributes.cols(),
        dim_z: cfg.latent_dim,
        hidden_v: cfg.hidden_v,
        hidden_a: cfg.hidden_a,
    };
    let root = Rng::new(cfg.seed);
    let mut model = TwoStreamAE::new(dims, &mut root.fork(0));
    let mut order_rng = root.fork(1);
    let mut opt = [
        AdamState::new(cfg.lr),
        AdamState::new(cfg.lr),
        AdamState::new(cfg.lr),
        AdamState::new(cfg.lr),
    ];

    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = set.features.select_rows(batch);
            let idx: Vec<usize> = batch.iter().map(|&i| class_idx[i]).collect();
            let attr_rows: Vec<usize> = batch.iter().map(|&i| set.labels[i] as usize).collect();
            let ab = set.attributes.select_rows(&attr_rows);
            let out = loss_all_with(&model, &xb, &ab, &idx, &bank, cfg.alpha, cfg.reduction)?;
            if !out.total.is_finite() {
                return Err(Error::NonFinite(format!("L_all at epoch {epoch}")));
            }
            epoch_loss += match cfg.reduction {
                LossReduction::Mean => out.total * batch.len() as f64,
                LossReduction::Sum => out.total,
            };
            let g = &out.grads;
            adam_step(&mut model.f_v, &g.f_v.slices(), &mut opt[0])?;
            adam_step(&mut model.g_v, &g.g_v.slices(), &mut opt[1])?;
            adam_step(&mut model.f_a, &g.f_a.slices(), &mut opt[2])?;
            adam_step(&mut model.g_a, &g.g_a.slices(), &mut opt[3])?;
        }
        let mean = epoch_loss / n as f64;
        log::debug!("epoch {epoch}: L_all = {mean:.6}");
        trace.push(mean);
    }
    Ok(TrainOutput {
        model,
        loss_trace: trace,
    })
}
