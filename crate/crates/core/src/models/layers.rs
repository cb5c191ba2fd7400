use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::nn::{Tape, Tensor, Var};

/// A named weight array.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

/// Allocates parameters in a fixed order, drawing conv and linear weights
/// from a Kaiming-normal distribution (`std = sqrt(2 / fan_in)`).
pub(crate) struct ParamBuilder {
    pub params: Vec<Param>,
    rng: ChaCha8Rng,
}

impl ParamBuilder {
    pub fn new(seed: u64) -> Self {
        Self {
            params: Vec::new(),
            rng: crate::seed::rng(seed),
        }
    }

    fn push(&mut self, name: String, value: Tensor) -> usize {
        self.params.push(Param { name, value });
        self.params.len() - 1
    }

    fn kaiming(&mut self, shape: (usize, usize, usize, usize), fan_in: usize) -> Tensor {
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        Tensor::from_shape_simple_fn(shape, || normal.sample(&mut self.rng))
    }

    pub fn conv(&mut self, name: &str, cin: usize, cout: usize, k: usize, stride: usize) -> Conv {
        let w = self.kaiming((cout, cin, k, k), cin * k * k);
        let weight = self.push(format!("{name}.weight"), w);
        let bias = self.push(format!("{name}.bias"), Tensor::zeros((cout, 1, 1, 1)));
        Conv {
            weight,
            bias,
            stride,
            pad: k / 2,
        }
    }

    pub fn linear(&mut self, name: &str, fin: usize, fout: usize) -> Linear {
        let w = self.kaiming((fout, fin, 1, 1), fin);
        let weight = self.push(format!("{name}.weight"), w);
        let bias = self.push(format!("{name}.bias"), Tensor::zeros((fout, 1, 1, 1)));
        Linear { weight, bias }
    }

    pub fn prelu(&mut self, name: &str) -> usize {
        self.push(format!("{name}.slope"), Tensor::from_elem((1, 1, 1, 1), 0.25))
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Conv {
    pub weight: usize,
    pub bias: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv {
    pub fn apply(&self, tape: &mut Tape, params: &[Param], x: Var) -> Result<Var> {
        let w = tape.param(self.weight, &params[self.weight].value);
        let b = tape.param(self.bias, &params[self.bias].value);
        tape.conv2d(x, w, Some(b), self.stride, self.pad)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Linear {
    pub weight: usize,
    pub bias: usize,
}

impl Linear {
    pub fn apply(&self, tape: &mut Tape, params: &[Param], x: Var) -> Result<Var> {
        let w = tape.param(self.weight, &params[self.weight].value);
        let b = tape.param(self.bias, &params[self.bias].value);
        tape.linear(x, w, b)
    }
}

pub(crate) fn prelu(tape: &mut Tape, params: &[Param], slope: usize, x: Var) -> Var {
    let a = tape.param(slope, &params[slope].value);
    tape.prelu(x, a)
}

/// Inverted dropout: zeroes each element with probability `p` and scales
/// the survivors by `1 / (1 - p)`. A no-op without a random stream or at
/// `p = 0`.
pub(crate) fn dropout(tape: &mut Tape, x: Var, p: f64, rng: Option<&mut ChaCha8Rng>) -> Result<Var> {
    let Some(rng) = rng else { return Ok(x) };
    if p <= 0.0 {
        return Ok(x);
    }
    let keep = 1.0 / (1.0 - p);
    let mask = Tensor::from_shape_simple_fn(tape.value(x).dim(), || if rng.random::<f64>() < p { 0.0 } else { keep });
    tape.mask(x, mask)
}
