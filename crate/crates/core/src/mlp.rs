//! Two-layer perceptron with hand-derived gradients.
//!
//! `y = relu(x·W1 + b1)·W2 + b2`. The ReLU subgradient at exactly zero is zero.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::optim::Parameterized;
use crate::rng::Rng;

/// Glorot-uniform weights in `±sqrt(6 / (rows + cols))`.
pub fn glorot_init(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect();
    Matrix::from_vec(rows, cols, data).expect("uniform samples are finite")
}

#[derive(Debug, Clone)]
pub struct Mlp2 {
    pub(crate) w1: Matrix,
    pub(crate) b1: Vec<f64>,
    pub(crate) w2: Matrix,
    pub(crate) b2: Vec<f64>,
    // bumped on every parameter write so old caches can be rejected
    version: u64,
}

/// Networks are equal when their parameters are; the cache version is
/// bookkeeping, not state.
impl PartialEq for Mlp2 {
    fn eq(&self, other: &Self) -> bool {
        self.w1 == other.w1 && self.b1 == other.b1 && self.w2 == other.w2 && self.b2 == other.b2
    }
}

/// Activations retained by [`Mlp2::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct Mlp2Cache {
    input: Matrix,
    pre: Matrix,
    hidden: Matrix,
    version: u64,
    dims: (usize, usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp2Grads {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl Mlp2 {
    pub fn new(input: usize, hidden: usize, output: usize, rng: &mut Rng) -> Self {
        Mlp2 {
            w1: glorot_init(input, hidden, rng),
            b1: vec![0.0; hidden],
            w2: glorot_init(hidden, output, rng),
            b2: vec![0.0; output],
            version: 0,
        }
    }

    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Mlp2 {
            w1: Matrix::zeros(input, hidden),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(hidden, output),
            b2: vec![0.0; output],
            version: 0,
        }
    }

    pub fn from_parts(w1: Matrix, b1: Vec<f64>, w2: Matrix, b2: Vec<f64>) -> Result<Self> {
        if b1.len() != w1.cols() {
            return Err(Error::dim("Mlp2 b1", w1.cols(), b1.len()));
        }
        if w2.rows() != w1.cols() {
            return Err(Error::dim("Mlp2 W2 rows", w1.cols(), w2.rows()));
        }
        if b2.len() != w2.cols() {
            return Err(Error::dim("Mlp2 b2", w2.cols(), b2.len()));
        }
        Ok(Mlp2 {
            w1,
            b1,
            w2,
            b2,
            version: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.cols()
    }

    pub fn w1(&self) -> &Matrix {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &Matrix {
        &self.w2
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::dim("mlp2 input", self.input_dim(), x.cols()));
        }
        Ok(())
    }

    fn layer1(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let mut pre = x.matmul(&self.w1)?;
        pre.add_row_vector(&self.b1)?;
        let mut hidden = pre.clone();
        hidden.as_mut_slice().iter_mut().for_each(|v| {
            if *v <= 0.0 {
                *v = 0.0
            }
        });
        Ok((pre, hidden))
    }

    /// Forward pass that keeps what [`Mlp2::backward`] needs.
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, Mlp2Cache)> {
        self.check_input(x)?;
        let (pre, hidden) = self.layer1(x)?;
        let mut y = hidden.matmul(&self.w2)?;
        y.add_row_vector(&self.b2)?;
        let cache = Mlp2Cache {
            input: x.clone(),
            pre,
            hidden,
            version: self.version,
            dims: (self.input_dim(), self.hidden_dim(), self.output_dim()),
        };
        Ok((y, cache))
    }

    /// Inference-only forward pass.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let (_, hidden) = self.layer1(x)?;
        let mut y = hidden.matmul(&self.w2)?;
        y.add_row_vector(&self.b2)?;
        Ok(y)
    }

    /// Gradients of a scalar loss given its gradient `dy` w.r.t. the output.
    /// Returns the parameter gradients and the gradient w.r.t. the input.
    pub fn backward(&self, cache: &Mlp2Cache, dy: &Matrix) -> Result<(Mlp2Grads, Matrix)> {
        let dims = (self.input_dim(), self.hidden_dim(), self.output_dim());
        if cache.version != self.version || cache.dims != dims {
            return Err(Error::State(
                "mlp2 cache does not belong to the current parameters".into(),
            ));
        }
        if dy.shape() != (cache.input.rows(), self.output_dim()) {
            return Err(Error::dim(
                "mlp2 backward dY",
                format!("{:?}", (cache.input.rows(), self.output_dim())),
                format!("{:?}", dy.shape()),
            ));
        }
        let dw2 = cache.hidden.t_matmul(dy)?;
        let db2 = dy.column_sums();
        let mut dpre = dy.matmul_t(&self.w2)?;
        for (g, &p) in dpre.as_mut_slice().iter_mut().zip(cache.pre.as_slice()) {
            if p <= 0.0 {
                *g = 0.0;
            }
        }
        let dw1 = cache.input.t_matmul(&dpre)?;
        let db1 = dpre.column_sums();
        let dx = dpre.matmul_t(&self.w1)?;
        Ok((
            Mlp2Grads {
                w1: dw1,
                b1: db1,
                w2: dw2,
                b2: db2,
            },
            dx,
        ))
    }
}

impl Parameterized for Mlp2 {
    fn param_names(&self) -> &'static [&'static str] {
        &["w1", "b1", "w2", "b2"]
    }

    fn params(&self) -> Vec<&[f64]> {
        vec![
            self.w1.as_slice(),
            &self.b1,
            self.w2.as_slice(),
            &self.b2,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.version += 1;
        vec![
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }
}

impl Mlp2Grads {
    pub fn zeros_like(net: &Mlp2) -> Self {
        Mlp2Grads {
            w1: Matrix::zeros(net.input_dim(), net.hidden_dim()),
            b1: vec![0.0; net.hidden_dim()],
            w2: Matrix::zeros(net.hidden_dim(), net.output_dim()),
            b2: vec![0.0; net.output_dim()],
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        vec![self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, other: &Mlp2Grads, c: f64) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += c * y;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.slices()
            .into_iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}
