//! Unseen-class scores computed from a frozen autoencoder.
//!
//! For a query `x` with latent `z_v = f_v(x)`:
//!
//! * `d_latent^S = min_i exp(‖z_v − f_a(a_i^S)‖₂)`, likewise for unseen classes
//! * `d_cross^S = min_i ‖x − g_v(f_a(a_i^S))‖₁`, likewise for unseen classes
//! * `r_latent = d_latent^S / d_latent^U`, `r_cross = d_cross^S / d_cross^U`
//! * `r_all = (d_cross^S + β·d_latent^S) / (d_cross^U + β·d_latent^U)`
//!
//! Large scores mean the query looks like an unseen class. Since `exp` is
//! monotone, latent distances are kept in the log domain (the minimum l2
//! distance itself) and only exponentiated when forming ratios.

use serde::{Deserialize, Serialize};

use crate::ae::TwoStreamAE;
use crate::error::{Error, Result};
use crate::linalg::{argmin, l1_distance, l2_distance, Matrix};

/// Encoded attribute latents and their cross-reconstructions for both class
/// partitions, built from one frozen model.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBanks {
    pub z_seen: Matrix,
    pub z_unseen: Matrix,
    pub x_seen: Matrix,
    pub x_unseen: Matrix,
    pub seen_classes: Vec<u32>,
    pub unseen_classes: Vec<u32>,
}

/// Builds the banks from per-partition attribute rows. An empty unseen
/// partition is accepted for seen-only diagnostics.
pub fn build_banks(
    ae: &TwoStreamAE,
    attrs_seen: &Matrix,
    seen_classes: &[u32],
    attrs_unseen: &Matrix,
    unseen_classes: &[u32],
) -> Result<ReferenceBanks> {
    let dim_a = ae.dims().dim_a;
    for (name, attrs, ids) in [
        ("seen attributes", attrs_seen, seen_classes),
        ("unseen attributes", attrs_unseen, unseen_classes),
    ] {
        if attrs.rows() > 0 && attrs.cols() != dim_a {
            return Err(Error::dim(name, dim_a, attrs.cols()));
        }
        if attrs.rows() != ids.len() {
            return Err(Error::dim(name, ids.len(), attrs.rows()));
        }
    }
    let encode = |attrs: &Matrix| -> Result<(Matrix, Matrix)> {
        if attrs.rows() == 0 {
            let d = ae.dims();
            return Ok((Matrix::zeros(0, d.dim_z), Matrix::zeros(0, d.dim_v)));
        }
        let z = ae.encode_attributes(attrs)?;
        let x = ae.g_v.apply(&z)?;
        Ok((z, x))
    };
    let (z_seen, x_seen) = encode(attrs_seen)?;
    let (z_unseen, x_unseen) = encode(attrs_unseen)?;
    Ok(ReferenceBanks {
        z_seen,
        z_unseen,
        x_seen,
        x_unseen,
        seen_classes: seen_classes.to_vec(),
        unseen_classes: unseen_classes.to_vec(),
    })
}

/// Convenience over [`build_banks`] taking the global attribute table.
pub fn build_banks_for(
    ae: &TwoStreamAE,
    attributes: &Matrix,
    seen_classes: &[u32],
    unseen_classes: &[u32],
) -> Result<ReferenceBanks> {
    let rows = |ids: &[u32]| -> Result<Matrix> {
        let idx: Vec<usize> = ids.iter().map(|&c| c as usize).collect();
        if let Some(&bad) = idx.iter().find(|&&i| i >= attributes.rows()) {
            return Err(Error::Data(format!("no attribute row for class {bad}")));
        }
        Ok(attributes.select_rows(&idx))
    };
    build_banks(
        ae,
        &rows(seen_classes)?,
        seen_classes,
        &rows(unseen_classes)?,
        unseen_classes,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateScores {
    /// `min_i ‖z_v − z_i^S‖₂`, i.e. `ln d_latent^S`.
    pub log_d_latent_s: f64,
    pub log_d_latent_u: f64,
    pub d_cross_s: f64,
    pub d_cross_u: f64,
    pub r_latent: f64,
    pub r_cross: f64,
    pub r_all: f64,
    /// Row in the seen bank achieving the latent minimum.
    pub nn_seen_idx: usize,
    pub nn_unseen_idx: usize,
}

/// Which unseen-class score drives the gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Latent,
    Cross,
    #[default]
    All,
}

impl ScoreKind {
    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Latent => "latent",
            ScoreKind::Cross => "cross",
            ScoreKind::All => "all",
        }
    }
}

impl std::str::FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "latent" => Ok(ScoreKind::Latent),
            "cross" => Ok(ScoreKind::Cross),
            "all" => Ok(ScoreKind::All),
            _ => Err(Error::Config(format!("unknown score kind {s:?}"))),
        }
    }
}

impl GateScores {
    pub fn score(&self, kind: ScoreKind) -> f64 {
        match kind {
            ScoreKind::Latent => self.r_latent,
            ScoreKind::Cross => self.r_cross,
            ScoreKind::All => self.r_all,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub beta: f64,
    pub tau: f64,
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be > 0, got {}", self.tau)));
        }
        Ok(())
    }
}

/// Above this, `exp(latent distance)` is factored out before dividing.
const EXP_GUARD: f64 = 1e100;

/// `num / den` with the degenerate cases pinned: `x/0 = +∞` and `0/0 = 1`.
fn safe_ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            log::warn!("0/0 unseen-class score; treating as 1.0");
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// The combined score from its four distance features.
pub fn combined_ratio(log_s: f64, log_u: f64, d_cross_s: f64, d_cross_u: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        return safe_ratio(d_cross_s, d_cross_u);
    }
    let guard = EXP_GUARD.ln();
    if log_s < guard && log_u < guard {
        safe_ratio(d_cross_s + beta * log_s.exp(), d_cross_u + beta * log_u.exp())
    } else {
        let m = log_s.min(log_u);
        let scale = (-m).exp();
        safe_ratio(
            d_cross_s * scale + beta * (log_s - m).exp(),
            d_cross_u * scale + beta * (log_u - m).exp(),
        )
    }
}

/// Scores for a query given its visual features and latent code.
pub fn scores_from_latent(z_v: &[f64], x: &[f64], banks: &ReferenceBanks, beta: f64) -> Result<GateScores> {
    if banks.z_seen.rows() == 0 || banks.z_unseen.rows() == 0 {
        return Err(Error::Config(
            "gate scores need non-empty seen and unseen banks".into(),
        ));
    }
    if !(beta >= 0.0) {
        return Err(Error::Config(format!("beta must be >= 0, got {beta}")));
    }
    if z_v.len() != banks.z_seen.cols() {
        return Err(Error::dim("query latent", banks.z_seen.cols(), z_v.len()));
    }
    if x.len() != banks.x_seen.cols() {
        return Err(Error::dim("query features", banks.x_seen.cols(), x.len()));
    }
    let nearest = |bank: &Matrix, q: &[f64], d: fn(&[f64], &[f64]) -> f64| {
        let dists: Vec<f64> = bank.iter_rows().map(|r| d(q, r)).collect();
        argmin(&dists).expect("bank is non-empty")
    };
    let (nn_s, log_s) = nearest(&banks.z_seen, z_v, l2_distance);
    let (nn_u, log_u) = nearest(&banks.z_unseen, z_v, l2_distance);
    let (_, cross_s) = nearest(&banks.x_seen, x, l1_distance);
    let (_, cross_u) = nearest(&banks.x_unseen, x, l1_distance);
    Ok(GateScores {
        log_d_latent_s: log_s,
        log_d_latent_u: log_u,
        d_cross_s: cross_s,
        d_cross_u: cross_u,
        r_latent: (log_s - log_u).exp(),
        r_cross: safe_ratio(cross_s, cross_u),
        r_all: combined_ratio(log_s, log_u, cross_s, cross_u, beta),
        nn_seen_idx: nn_s,
        nn_unseen_idx: nn_u,
    })
}

pub fn score_query(ae: &TwoStreamAE, banks: &ReferenceBanks, x: &[f64], beta: f64) -> Result<GateScores> {
    let xm = Matrix::from_vec(1, x.len(), x.to_vec())?;
    let z = ae.encode_visual(&xm)?;
    scores_from_latent(z.row(0), x, banks, beta)
}

/// Scores for every row of `queries`, encoding them in one pass.
pub fn score_batch(
    ae: &TwoStreamAE,
    banks: &ReferenceBanks,
    queries: &Matrix,
    beta: f64,
) -> Result<Vec<GateScores>> {
    let z = ae.encode_visual(queries)?;
    (0..queries.rows())
        .map(|i| scores_from_latent(z.row(i), queries.row(i), banks, beta))
        .collect()
}

/// Recomputes `r_all` for a different β from stored distance features.
pub fn rescore(s: &GateScores, beta: f64) -> GateScores {
    GateScores {
        r_all: combined_ratio(s.log_d_latent_s, s.log_d_latent_u, s.d_cross_s, s.d_cross_u, beta),
        ..*s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Seen,
    Unseen,
    NoGate,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Seen => "seen",
            Route::Unseen => "unseen",
            Route::NoGate => "nogate",
        }
    }
}

/// Hard gate: seen iff `score < tau`. A score equal to `tau` routes unseen.
pub fn gate(score: f64, tau: f64) -> Route {
    if score < tau {
        Route::Seen
    } else {
        Route::Unseen
    }
}
