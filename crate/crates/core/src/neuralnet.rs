//! Two-layer feedforward network with a linear output layer.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::synthgen::{stream_rng, StreamRole};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Sigmoid,
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
        }
    }

    pub fn apply(self, u: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(u),
            Activation::Relu => u.max(0.0),
        }
    }

    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = sigmoid(u);
                s * (1.0 - s)
            }
            Activation::Relu => {
                if u > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Logistic function, evaluated so that `exp` only sees non-positive
/// arguments.
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + libm::exp(-u))
    } else {
        let e = libm::exp(u);
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkDims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub bias: bool,
}

impl NetworkDims {
    pub fn new(input: usize, hidden: usize, output: usize, bias: bool) -> Result<Self> {
        if input == 0 || hidden == 0 || output == 0 {
            return Err(Error::InvalidParameter(format!(
                "network dimensions must be positive, got {input}x{hidden}x{output}"
            )));
        }
        Ok(Self {
            input,
            hidden,
            output,
            bias,
        })
    }

    /// Hidden width defaults to twice the input width.
    pub fn with_default_hidden(input: usize, output: usize) -> Result<Self> {
        Self::new(input, 2 * input, output, true)
    }

    pub fn n_params(&self) -> usize {
        let b = if self.bias { self.hidden + self.output } else { 0 };
        self.hidden * self.input + self.output * self.hidden + b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub dims: NetworkDims,
    /// `hidden x input`
    pub w2: Matrix,
    pub b2: Vec<f64>,
    /// `output x hidden`
    pub w3: Matrix,
    pub b3: Vec<f64>,
}

impl NetworkParams {
    pub fn zeros(dims: NetworkDims) -> Self {
        Self {
            dims,
            w2: Matrix::zeros(dims.hidden, dims.input),
            b2: vec![0.0; dims.hidden],
            w3: Matrix::zeros(dims.output, dims.hidden),
            b3: vec![0.0; dims.output],
        }
    }

    pub fn from_parts(dims: NetworkDims, w2: Matrix, b2: Vec<f64>, w3: Matrix, b3: Vec<f64>) -> Result<Self> {
        let ok = w2.shape() == (dims.hidden, dims.input)
            && b2.len() == dims.hidden
            && w3.shape() == (dims.output, dims.hidden)
            && b3.len() == dims.output;
        if !ok {
            return Err(Error::Shape("parameter shapes do not match network dimensions".into()));
        }
        let p = Self { dims, w2, b2, w3, b3 };
        if !p.is_finite() {
            return Err(Error::InvalidParameter("non-finite network parameter".into()));
        }
        Ok(p)
    }

    /// Every parameter as one flat vector: W2, b2, W3, b3, each row-major.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dims.n_params());
        v.extend_from_slice(self.w2.as_slice());
        v.extend_from_slice(&self.b2);
        v.extend_from_slice(self.w3.as_slice());
        v.extend_from_slice(&self.b3);
        v
    }

    /// Mutable views in the same order as [`flatten`](Self::flatten).
    pub fn blocks_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w2.as_mut_slice(),
            &mut self.b2,
            self.w3.as_mut_slice(),
            &mut self.b3,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.w2.is_finite()
            && self.w3.is_finite()
            && self.b2.iter().chain(&self.b3).all(|v| v.is_finite())
    }
}

/// Draws every weight (and bias, when enabled) i.i.d. standard normal.
/// Draw order is W2, b2, W3, b3, row-major.
pub fn init_params(dims: NetworkDims, seed: u64) -> NetworkParams {
    let mut rng = stream_rng(seed, StreamRole::NetworkInit, 0);
    let mut p = NetworkParams::zeros(dims);
    let bias = dims.bias;
    for (k, block) in p.blocks_mut().into_iter().enumerate() {
        if k % 2 == 1 && !bias {
            continue;
        }
        for v in block.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    }
    p
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub z1: Vec<f64>,
    pub u2: Vec<f64>,
    pub z2: Vec<f64>,
    /// The network output.
    pub u3: Vec<f64>,
}

impl ForwardTrace {
    pub fn new(dims: NetworkDims) -> Self {
        Self {
            z1: vec![0.0; dims.input],
            u2: vec![0.0; dims.hidden],
            z2: vec![0.0; dims.hidden],
            u3: vec![0.0; dims.output],
        }
    }
}

pub fn forward(params: &NetworkParams, input: &[f64], act: Activation) -> Result<ForwardTrace> {
    if input.len() != params.dims.input {
        return Err(Error::Shape(format!(
            "input has length {}, network expects {}",
            input.len(),
            params.dims.input
        )));
    }
    let mut trace = ForwardTrace::new(params.dims);
    forward_into(params, input, act, &mut trace);
    Ok(trace)
}

/// Allocation-free forward pass; `trace` must be sized for `params.dims`.
pub fn forward_into(params: &NetworkParams, input: &[f64], act: Activation, trace: &mut ForwardTrace) {
    trace.z1.copy_from_slice(input);
    params.w2.mul_vec_into(input, &mut trace.u2);
    for ((u, z), b) in trace.u2.iter_mut().zip(trace.z2.iter_mut()).zip(&params.b2) {
        *u += b;
        *z = act.apply(*u);
    }
    params.w3.mul_vec_into(&trace.z2, &mut trace.u3);
    for (u, b) in trace.u3.iter_mut().zip(&params.b3) {
        *u += b;
    }
}
