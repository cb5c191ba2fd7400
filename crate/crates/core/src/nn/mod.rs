//! A small reverse-mode tape over `N x C x H x W` tensors.
//!
//! Every operation appends a node holding its forward value; `backward`
//! walks the nodes in reverse and accumulates gradients. All arithmetic is
//! sequential, so a given graph always produces bit-identical values and
//! gradients.

mod conv;
mod shuffle;

use ndarray::{s, Array2, Axis};

pub use shuffle::{pixel_shuffle, pixel_unshuffle};

use crate::error::{Error, Result};

pub type Tensor = ndarray::Array4<f64>;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf {
        requires_grad: bool,
    },
    Param(usize),
    Conv {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: conv::ConvGeom,
    },
    Add(Var, Var),
    ScaledAdd {
        base: Var,
        delta: Var,
        alpha: f64,
    },
    LeakyRelu {
        x: Var,
        slope: f64,
    },
    Prelu {
        x: Var,
        slope: Var,
    },
    Concat(Vec<Var>),
    PixelShuffle {
        x: Var,
        r: usize,
    },
    Mask {
        x: Var,
        mask: Tensor,
    },
    MaxPool2(Var),
    ChannelAffine {
        x: Var,
        scale: Vec<f64>,
    },
    GlobalAvgPool(Var),
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn take_value(self, v: Var) -> Tensor {
        let mut nodes = self.nodes;
        nodes.swap_remove(v.0).value
    }

    /// A constant or input tensor. Gradients with respect to leaves are
    /// available after `backward`.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(
            value.as_standard_layout().into_owned(),
            Op::Leaf { requires_grad: true },
        )
    }

    /// Like [`Tape::leaf`], but no gradient is propagated into it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(
            value.as_standard_layout().into_owned(),
            Op::Leaf { requires_grad: false },
        )
    }

    /// A trainable parameter tagged with `id`.
    pub fn param(&mut self, id: usize, value: &Tensor) -> Var {
        self.push(value.as_standard_layout().into_owned(), Op::Param(id))
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let (_, cin, h, wd) = self.value(x).dim();
        let (cout, wcin, k, k2) = self.value(w).dim();
        if wcin != cin || k != k2 {
            return Err(Error::shape(format!(
                "conv weight {:?} does not accept {cin} input channels",
                self.value(w).dim()
            )));
        }
        if let Some(b) = b {
            if self.value(b).len() != cout {
                return Err(Error::shape("conv bias length differs from output channels"));
            }
        }
        let geom = conv::ConvGeom::new(cin, h, wd, k, stride, pad)
            .ok_or_else(|| Error::shape(format!("{h}x{wd} input is smaller than a {k}x{k} kernel")))?;
        let out = conv::forward(self.value(x), self.value(w), b.map(|b| self.value(b)), &geom);
        Ok(self.push(out, Op::Conv { x, w, b, geom }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).dim() != self.value(b).dim() {
            return Err(Error::shape("add of mismatched tensors"));
        }
        let out = self.value(a) + self.value(b);
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// `base + alpha * delta`.
    pub fn scaled_add(&mut self, base: Var, delta: Var, alpha: f64) -> Result<Var> {
        if self.value(base).dim() != self.value(delta).dim() {
            return Err(Error::shape("scaled_add of mismatched tensors"));
        }
        let mut out = self.value(base).clone();
        out.zip_mut_with(self.value(delta), |o, d| *o += alpha * d);
        Ok(self.push(out, Op::ScaledAdd { base, delta, alpha }))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let out = self.value(x).mapv(|v| if v > 0.0 { v } else { slope * v });
        self.push(out, Op::LeakyRelu { x, slope })
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.leaky_relu(x, 0.0)
    }

    /// Parametric rectifier with one learned slope shared by all channels.
    pub fn prelu(&mut self, x: Var, slope: Var) -> Var {
        let a = self.value(slope).iter().next().copied().unwrap_or(0.0);
        let out = self.value(x).mapv(|v| if v > 0.0 { v } else { a * v });
        self.push(out, Op::Prelu { x, slope })
    }

    /// Concatenates along the channel axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = self.value(*parts.first().ok_or_else(|| Error::shape("empty concat"))?);
        let (n, _, h, w) = first.dim();
        let mut channels = 0;
        for p in parts {
            let (pn, pc, ph, pw) = self.value(*p).dim();
            if (pn, ph, pw) != (n, h, w) {
                return Err(Error::shape("concat of mismatched tensors"));
            }
            channels += pc;
        }
        let mut out = Tensor::zeros((n, channels, h, w));
        let mut c0 = 0;
        for p in parts {
            let v = self.value(*p);
            let c = v.dim().1;
            out.slice_mut(s![.., c0..c0 + c, .., ..]).assign(v);
            c0 += c;
        }
        Ok(self.push(out, Op::Concat(parts.to_vec())))
    }

    pub fn pixel_shuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let out = pixel_shuffle(self.value(x), r)?;
        Ok(self.push(out, Op::PixelShuffle { x, r }))
    }

    /// Elementwise product with a constant mask (dropout).
    pub fn mask(&mut self, x: Var, mask: Tensor) -> Result<Var> {
        if mask.dim() != self.value(x).dim() {
            return Err(Error::shape("mask shape differs from input"));
        }
        let out = self.value(x) * &mask;
        Ok(self.push(out, Op::Mask { x, mask }))
    }

    /// 2x2 max pooling with stride 2 (odd trailing rows/columns dropped).
    pub fn max_pool2(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let (n, c, h, w) = v.dim();
        if h < 2 || w < 2 {
            return Err(Error::shape(format!("cannot pool a {h}x{w} map")));
        }
        let out = Tensor::from_shape_fn((n, c, h / 2, w / 2), |(b, ch, i, j)| {
            let mut m = v[[b, ch, 2 * i, 2 * j]];
            for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                m = m.max(v[[b, ch, 2 * i + di, 2 * j + dj]]);
            }
            m
        });
        Ok(self.push(out, Op::MaxPool2(x)))
    }

    /// `x * scale[c]` per channel, with fixed (non-trainable) factors.
    pub fn channel_scale(&mut self, x: Var, scale: Vec<f64>) -> Result<Var> {
        let v = self.value(x);
        if v.dim().1 != scale.len() {
            return Err(Error::shape("channel_scale length differs from channels"));
        }
        let mut out = v.clone();
        for (c, s) in scale.iter().enumerate() {
            out.index_axis_mut(Axis(1), c).mapv_inplace(|t| t * s);
        }
        Ok(self.push(out, Op::ChannelAffine { x, scale }))
    }

    pub fn global_avg_pool(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let (n, c, h, w) = v.dim();
        let area = (h * w) as f64;
        let out = Tensor::from_shape_fn((n, c, 1, 1), |(b, ch, _, _)| v.slice(s![b, ch, .., ..]).sum() / area);
        self.push(out, Op::GlobalAvgPool(x))
    }

    /// Fully connected layer on `N x F x 1 x 1` inputs; `w` is `out x F x 1 x 1`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xv = self.value(x);
        let n = xv.dim().0;
        let f = xv.len() / n.max(1);
        let (out_f, in_f, _, _) = self.value(w).dim();
        if in_f != f || self.value(b).len() != out_f {
            return Err(Error::shape(format!("linear layer expects {in_f} features, got {f}")));
        }
        let xm = flat2(xv, n, f);
        let wm = flat2(self.value(w), out_f, in_f);
        let mut y = xm.dot(&wm.t());
        let bs = self.value(b).as_slice().expect("standard layout");
        for mut row in y.rows_mut() {
            row.iter_mut().zip(bs).for_each(|(v, b)| *v += b);
        }
        let out = y.into_shape_with_order((n, out_f, 1, 1)).expect("contiguous");
        Ok(self.push(out, Op::Linear { x, w, b }))
    }

    /// Reverse pass from `output` seeded with `seed` (same shape as output).
    pub fn backward(&self, output: Var, seed: Tensor) -> Result<Gradients> {
        if seed.dim() != self.value(output).dim() {
            return Err(Error::shape("seed gradient shape differs from output"));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(seed);
        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf { .. } | Op::Param(_)) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(&node.op, &node.value, g, &mut grads);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: Tensor, grads: &mut [Option<Tensor>]) {
        match op {
            Op::Leaf { .. } | Op::Param(_) => {}
            Op::Conv { x, w, b, geom } => {
                let need_dx = self.needs_grad(*x);
                let need_dw = self.needs_grad(*w);
                let cg = conv::backward(self.value(*x), self.value(*w), &g, geom, need_dx, need_dw);
                if let Some(dx) = cg.dx {
                    accumulate(grads, *x, dx);
                }
                if let Some(dw) = cg.dw {
                    accumulate(grads, *w, dw);
                }
                if let Some(b) = b {
                    let db = cg.db.into_shape_with_order(self.value(*b).dim()).expect("bias shape");
                    accumulate(grads, *b, db);
                }
            }
            Op::Add(a, b) => {
                accumulate(grads, *b, g.clone());
                accumulate(grads, *a, g);
            }
            Op::ScaledAdd { base, delta, alpha } => {
                accumulate(grads, *delta, g.mapv(|v| alpha * v));
                accumulate(grads, *base, g);
            }
            Op::LeakyRelu { x, slope } => {
                let mut dx = g;
                dx.zip_mut_with(self.value(*x), |d, v| {
                    if *v <= 0.0 {
                        *d *= slope
                    }
                });
                accumulate(grads, *x, dx);
            }
            Op::Prelu { x, slope } => {
                let a = self.value(*slope).iter().next().copied().unwrap_or(0.0);
                let xv = self.value(*x);
                let mut da = 0.0;
                let mut dx = g;
                dx.zip_mut_with(xv, |d, v| {
                    if *v <= 0.0 {
                        da += *d * v;
                        *d *= a;
                    }
                });
                accumulate(grads, *x, dx);
                accumulate(grads, *slope, Tensor::from_elem(self.value(*slope).dim(), da));
            }
            Op::Concat(parts) => {
                let mut c0 = 0;
                for p in parts {
                    let c = self.value(*p).dim().1;
                    accumulate(grads, *p, g.slice(s![.., c0..c0 + c, .., ..]).to_owned());
                    c0 += c;
                }
            }
            Op::PixelShuffle { x, r } => {
                accumulate(grads, *x, pixel_unshuffle(&g, *r).expect("shape checked in forward"));
            }
            Op::Mask { x, mask } => accumulate(grads, *x, g * mask),
            Op::MaxPool2(x) => {
                let v = self.value(*x);
                let mut dx = Tensor::zeros(v.dim());
                let (n, c, ho, wo) = out.dim();
                for b in 0..n {
                    for ch in 0..c {
                        for i in 0..ho {
                            for j in 0..wo {
                                let m = out[[b, ch, i, j]];
                                for (di, dj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                                    if v[[b, ch, 2 * i + di, 2 * j + dj]] == m {
                                        dx[[b, ch, 2 * i + di, 2 * j + dj]] += g[[b, ch, i, j]];
                                        break;
                                    }
                                }
                            }
                        }
                    }
                }
                accumulate(grads, *x, dx);
            }
            Op::ChannelAffine { x, scale } => {
                let mut dx = g;
                for (c, s) in scale.iter().enumerate() {
                    dx.index_axis_mut(Axis(1), c).mapv_inplace(|t| t * s);
                }
                accumulate(grads, *x, dx);
            }
            Op::GlobalAvgPool(x) => {
                let (n, c, h, w) = self.value(*x).dim();
                let area = (h * w) as f64;
                let dx = Tensor::from_shape_fn((n, c, h, w), |(b, ch, _, _)| g[[b, ch, 0, 0]] / area);
                accumulate(grads, *x, dx);
            }
            Op::Linear { x, w, b } => {
                let xv = self.value(*x);
                let n = xv.dim().0;
                let f = xv.len() / n;
                let (out_f, in_f, _, _) = self.value(*w).dim();
                let gm = flat2(&g, n, out_f);
                let dw = gm.t().dot(&flat2(xv, n, f));
                let db = gm.sum_axis(Axis(0));
                if self.needs_grad(*x) {
                    let dx = gm.dot(&flat2(self.value(*w), out_f, in_f));
                    accumulate(grads, *x, dx.into_shape_with_order(xv.dim()).expect("contiguous"));
                }
                accumulate(
                    grads,
                    *w,
                    dw.into_shape_with_order((out_f, in_f, 1, 1)).expect("contiguous"),
                );
                accumulate(
                    grads,
                    *b,
                    db.into_shape_with_order(self.value(*b).dim()).expect("contiguous"),
                );
            }
        }
    }

    fn needs_grad(&self, v: Var) -> bool {
        !matches!(self.nodes[v.0].op, Op::Leaf { requires_grad: false })
    }

    /// `(param id, var)` for every parameter node, in tape order.
    pub fn params(&self) -> impl Iterator<Item = (usize, Var)> + '_ {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n.op {
            Op::Param(id) => Some((id, Var(i))),
            _ => None,
        })
    }
}

fn flat2(t: &Tensor, rows: usize, cols: usize) -> Array2<f64> {
    t.as_standard_layout()
        .into_owned()
        .into_shape_with_order((rows, cols))
        .expect("contiguous")
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient with respect to a leaf or parameter node, if it was reached.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Sums gradients per parameter id (a parameter may appear on the tape
    /// more than once). Ids never reached get zeros of `shapes[id]`.
    pub fn collect_params(&self, tape: &Tape, shapes: &[(usize, usize, usize, usize)]) -> Vec<Tensor> {
        let mut out: Vec<Tensor> = shapes.iter().map(|s| Tensor::zeros(*s)).collect();
        for (id, var) in tape.params() {
            if let Some(g) = self.wrt(var) {
                out[id] += g;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests;
