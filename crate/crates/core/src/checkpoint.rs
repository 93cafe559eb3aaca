//! Model checkpoint file.
//!
//! ```text
//! "GAE1"  u32 dim_v  u32 dim_a  u32 dim_z  u32 h_v  u32 h_a
//!         f_v.{W1,b1,W2,b2}  g_v.{..}  f_a.{..}  g_a.{..}      (f64, row-major)
//! ["SCLS" u32 dim_v  u32 n_seen  W (f64)  b (f64)  class ids (u32 × n_seen)]
//! ["GATE" u32 score kind (0 latent, 1 cross, 2 all)  f64 beta  f64 tau]
//! ```
//!
//! All integers and floats are little-endian. Trailing sections are optional
//! and may appear at most once each.

use std::fs;
use std::path::Path;

use crate::ae::TwoStreamAE;
use crate::error::{Error, Result};
use crate::experts::SeenClassifier;
use crate::linalg::Matrix;
use crate::mlp::Mlp2;
use crate::scores::{GateConfig, ScoreKind};

pub const MODEL_MAGIC: &[u8; 4] = b"GAE1";
pub const CLASSIFIER_TAG: &[u8; 4] = b"SCLS";
pub const GATE_TAG: &[u8; 4] = b"GATE";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub ae: TwoStreamAE,
    pub seen_clf: Option<SeenClassifier>,
    pub gate: Option<(ScoreKind, GateConfig)>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_mlp(out: &mut Vec<u8>, net: &Mlp2) {
    put_f64s(out, net.w1().as_slice());
    put_f64s(out, net.b1());
    put_f64s(out, net.w2().as_slice());
    put_f64s(out, net.b2());
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        let d = self.ae.dims();
        for v in [d.dim_v, d.dim_a, d.dim_z, d.hidden_v, d.hidden_a] {
            put_u32(&mut out, v);
        }
        for net in [&self.ae.f_v, &self.ae.g_v, &self.ae.f_a, &self.ae.g_a] {
            put_mlp(&mut out, net);
        }
        if let Some(clf) = &self.seen_clf {
            out.extend_from_slice(CLASSIFIER_TAG);
            put_u32(&mut out, clf.weights().rows());
            put_u32(&mut out, clf.weights().cols());
            put_f64s(&mut out, clf.weights().as_slice());
            put_f64s(&mut out, clf.bias());
            for &c in clf.classes() {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        if let Some((kind, cfg)) = &self.gate {
            out.extend_from_slice(GATE_TAG);
            put_u32(
                &mut out,
                match kind {
                    ScoreKind::Latent => 0,
                    ScoreKind::Cross => 1,
                    ScoreKind::All => 2,
                },
            );
            put_f64s(&mut out, &[cfg.beta, cfg.tau]);
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(4)? != MODEL_MAGIC {
            return Err(r.corrupt_at(0, "bad magic, expected GAE1"));
        }
        let dims: Vec<usize> = (0..5).map(|_| r.u32()).collect::<Result<_>>()?;
        let (dv, da, dz, hv, ha) = (dims[0], dims[1], dims[2], dims[3], dims[4]);
        let f_v = r.mlp(dv, hv, dz)?;
        let g_v = r.mlp(dz, hv, dv)?;
        let f_a = r.mlp(da, ha, dz)?;
        let g_a = r.mlp(dz, ha, da)?;
        let ae = TwoStreamAE::from_parts(f_v, g_v, f_a, g_a)?;

        let mut seen_clf = None;
        let mut gate = None;
        while r.pos < bytes.len() {
            let at = r.pos;
            let tag = r.take(4)?;
            if tag == CLASSIFIER_TAG && seen_clf.is_none() {
                let rows = r.u32()?;
                let cols = r.u32()?;
                if rows != dv {
                    return Err(r.corrupt_at(at + 4, "classifier input width differs from dim_v"));
                }
                let w = r.matrix(rows, cols)?;
                let b = r.f64s(cols)?;
                let classes = (0..cols).map(|_| r.u32().map(|v| v as u32)).collect::<Result<_>>()?;
                seen_clf = Some(SeenClassifier::from_parts(w, b, classes)?);
            } else if tag == GATE_TAG && gate.is_none() {
                let kind = match r.u32()? {
                    0 => ScoreKind::Latent,
                    1 => ScoreKind::Cross,
                    2 => ScoreKind::All,
                    other => return Err(r.corrupt_at(at + 4, format!("unknown score kind {other}"))),
                };
                let v = r.f64s(2)?;
                gate = Some((kind, GateConfig { beta: v[0], tau: v[1] }));
            } else {
                return Err(r.corrupt_at(at, "unknown or repeated section tag"));
            }
        }
        Ok(Checkpoint { ae, seen_clf, gate })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::decode(&bytes, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn corrupt_at(&self, offset: usize, msg: impl Into<String>) -> Error {
        Error::Corrupt {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            msg: msg.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.corrupt_at(self.bytes.len(), "unexpected end of checkpoint"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let at = self.pos;
        let raw = self.take(8 * n)?;
        let vals: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
            return Err(self.corrupt_at(at + 8 * i, "non-finite parameter"));
        }
        Ok(vals)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        Matrix::from_vec(rows, cols, self.f64s(rows * cols)?)
    }

    fn mlp(&mut self, input: usize, hidden: usize, output: usize) -> Result<Mlp2> {
        let w1 = self.matrix(input, hidden)?;
        let b1 = self.f64s(hidden)?;
        let w2 = self.matrix(hidden, output)?;
        let b2 = self.f64s(output)?;
        Mlp2::from_parts(w1, b1, w2, b2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ae::AeDims;
    use crate::rng::Rng;

    fn sample() -> Checkpoint {
        let mut rng = Rng::new(3);
        let ae = TwoStreamAE::new(
            AeDims {
                dim_v: 5,
                dim_a: 3,
                dim_z: 2,
                hidden_v: 4,
                hidden_a: 6,
            },
            &mut rng,
        );
        let clf = SeenClassifier::from_parts(
            Matrix::from_vec(5, 2, (0..10).map(|i| i as f64 * 0.1).collect()).unwrap(),
            vec![0.5, -0.5],
            vec![3, 8],
        )
        .unwrap();
        Checkpoint {
            ae,
            seen_clf: Some(clf),
            gate: Some((ScoreKind::All, GateConfig { beta: 0.1, tau: 1.3 })),
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        let ck = sample();
        let bytes = ck.encode();
        assert_eq!(&bytes[..4], b"GAE1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 5);
        assert_eq!(Checkpoint::decode(&bytes, Path::new("m")).unwrap(), ck);

        let bare = Checkpoint {
            seen_clf: None,
            gate: None,
            ..ck
        };
        let n_params = 5 * 4 + 4 + 4 * 2 + 2 + 2 * 4 + 4 + 4 * 5 + 5 + 3 * 6 + 6 + 6 * 2 + 2 + 2 * 6 + 6 + 6 * 3 + 3;
        assert_eq!(bare.encode().len(), 4 + 20 + 8 * n_params);
    }

    #[test]
    fn truncation_and_garbage_are_corrupt() {
        let bytes = sample().encode();
        let p = Path::new("m");
        assert!(matches!(
            Checkpoint::decode(&bytes[..bytes.len() - 1], p),
            Err(Error::Corrupt { .. })
        ));
        let mut extra = bytes.clone();
        extra.extend_from_slice(b"JUNK");
        assert!(matches!(Checkpoint::decode(&extra, p), Err(Error::Corrupt { .. })));
        let mut magic = bytes;
        magic[3] = b'2';
        assert!(matches!(Checkpoint::decode(&magic, p), Err(Error::Corrupt { offset: 0, .. })));
    }
}
