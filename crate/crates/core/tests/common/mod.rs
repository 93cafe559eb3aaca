#![allow(dead_code)]

use gatingae::ae::{AeGrads, LossOutput, SeenAttributeBank};
use gatingae::mlp::Mlp2;
use gatingae::optim::Parameterized;
use gatingae::{AeDims, Matrix, Rng, TwoStreamAE};

pub const FD_STEP: f64 = 1e-6;

/// Denominator floor of the relative error, so entries whose true
/// gradient is ~0 are judged on absolute error instead.
pub const REL_FLOOR: f64 = 1e-3;

pub struct Problem {
    pub ae: TwoStreamAE,
    pub x: Matrix,
    pub a: Matrix,
    pub class_idx: Vec<usize>,
    pub bank: SeenAttributeBank,
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
}

/// A random small problem: dim_v 20, dim_a 8, dim_z 4, hidden 6, batch 5,
/// three seen classes. Biases are randomized too so they get exercised.
pub fn small_problem(seed: u64) -> Problem {
    let mut rng = Rng::new(seed);
    let dims = AeDims {
        dim_v: 20,
        dim_a: 8,
        dim_z: 4,
        hidden_v: 6,
        hidden_a: 6,
    };
    let mut ae = TwoStreamAE::new(dims, &mut rng);
    for net in [&mut ae.f_v, &mut ae.g_v, &mut ae.f_a, &mut ae.g_a] {
        for t in [1, 3] {
            for v in net.params_mut()[t].iter_mut() {
                *v = 0.1 * rng.normal();
            }
        }
    }
    let bank_attrs = random_matrix(3, dims.dim_a, &mut rng);
    let class_idx: Vec<usize> = (0..5).map(|_| rng.below(3)).collect();
    let rows: Vec<usize> = class_idx.clone();
    let a = bank_attrs.select_rows(&rows);
    Problem {
        ae,
        x: random_matrix(5, dims.dim_v, &mut rng),
        a,
        class_idx,
        bank: SeenAttributeBank::new(bank_attrs).unwrap(),
    }
}

fn relu_signs(net: &Mlp2, input: &Matrix, out: &mut Vec<i8>) {
    let mut pre = input.matmul(net.w1()).unwrap();
    pre.add_row_vector(net.b1()).unwrap();
    out.extend(pre.as_slice().iter().map(|&v| (v > 0.0) as i8));
}

fn residual_signs(pred: &Matrix, target: &Matrix, out: &mut Vec<i8>) {
    out.extend(
        pred.as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(p, t)| (p - t).signum() as i8),
    );
}

/// Every ReLU mask bit and l1 residual sign the losses depend on. If this
/// changes between `θ+h` and `θ−h`, the central difference straddles a
/// point where the loss is not differentiable.
pub fn kink_signature(ae: &TwoStreamAE, p: &Problem) -> Vec<i8> {
    let mut s = Vec::new();
    let zv = ae.f_v.apply(&p.x).unwrap();
    let za = ae.f_a.apply(&p.a).unwrap();
    relu_signs(&ae.f_v, &p.x, &mut s);
    relu_signs(&ae.f_a, &p.a, &mut s);
    relu_signs(&ae.f_a, p.bank.attributes(), &mut s);
    for (dec, z, target) in [
        (&ae.g_v, &zv, &p.x),
        (&ae.g_a, &za, &p.a),
        (&ae.g_v, &za, &p.x),
        (&ae.g_a, &zv, &p.a),
    ] {
        relu_signs(dec, z, &mut s);
        residual_signs(&dec.apply(z).unwrap(), target, &mut s);
    }
    s
}

#[derive(Debug, Default, Clone, Copy)]
pub struct FdStats {
    pub max_rel: f64,
    pub checked: usize,
    pub skipped: usize,
}

impl FdStats {
    pub fn merge(&mut self, o: FdStats) {
        self.max_rel = self.max_rel.max(o.max_rel);
        self.checked += o.checked;
        self.skipped += o.skipped;
    }
}

fn net_mut(ae: &mut TwoStreamAE, k: usize) -> &mut Mlp2 {
    match k {
        0 => &mut ae.f_v,
        1 => &mut ae.g_v,
        2 => &mut ae.f_a,
        _ => &mut ae.g_a,
    }
}

fn grad_slices(g: &AeGrads, k: usize) -> Vec<&[f64]> {
    [&g.f_v, &g.g_v, &g.f_a, &g.g_a][k].slices()
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Central-difference check of every parameter of every network.
pub fn fd_check(p: &Problem, loss: impl Fn(&TwoStreamAE) -> LossOutput) -> FdStats {
    let base = loss(&p.ae);
    let mut stats = FdStats::default();
    for k in 0..4 {
        let shapes: Vec<usize> = net_mut(&mut p.ae.clone(), k).params().iter().map(|s| s.len()).collect();
        for (t, &len) in shapes.iter().enumerate() {
            for j in 0..len {
                let mut plus = p.ae.clone();
                net_mut(&mut plus, k).params_mut()[t][j] += FD_STEP;
                let mut minus = p.ae.clone();
                net_mut(&mut minus, k).params_mut()[t][j] -= FD_STEP;
                if kink_signature(&plus, p) != kink_signature(&minus, p) {
                    stats.skipped += 1;
                    continue;
                }
                let numeric = (loss(&plus).value - loss(&minus).value) / (2.0 * FD_STEP);
                let analytic = grad_slices(&base.grads, k)[t][j];
                stats.max_rel = stats.max_rel.max(rel_error(analytic, numeric));
                stats.checked += 1;
            }
        }
    }
    stats
}
