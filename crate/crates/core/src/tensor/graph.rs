use rand::Rng;

use super::kernels::{self, ConvDims, KERNEL};
use super::{Element, Tensor};
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Whether stochastic layers are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

enum Op<T> {
    Leaf,
    Conv2d {
        input: Var,
        weight: Var,
        bias: Var,
    },
    MaxPool2d {
        input: Var,
        argmax: Vec<usize>,
    },
    Relu {
        input: Var,
    },
    /// Inverted dropout; one mask entry scales `group` consecutive elements.
    Mask {
        input: Var,
        mask: Vec<T>,
        group: usize,
    },
    Dense {
        input: Var,
        weight: Var,
        bias: Var,
    },
    Reshape {
        input: Var,
    },
    Concat {
        left: Var,
        right: Var,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        probs: Vec<T>,
        targets: Vec<usize>,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Records one forward pass so it can be differentiated in reverse.
///
/// Nodes are appended in evaluation order, so the node index is a valid
/// topological order for the backward sweep.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Element> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Element> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Inserts a leaf, keeping its `requires_grad` flag.
    pub fn leaf(&mut self, tensor: Tensor<T>) -> Var {
        self.push(tensor, Op::Leaf)
    }

    /// Inserts a copy of a trainable tensor.
    pub fn param(&mut self, tensor: &Tensor<T>) -> Var {
        let mut t = tensor.clone().with_requires_grad(true);
        t.grad = None;
        self.leaf(t)
    }

    /// Inserts a tensor no gradient flows into.
    pub fn constant(&mut self, tensor: Tensor<T>) -> Var {
        self.leaf(tensor.with_requires_grad(false))
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    pub fn grad(&self, var: Var) -> Option<&[T]> {
        self.nodes[var.0].value.grad()
    }

    pub fn take_grad(&mut self, var: Var) -> Option<Vec<T>> {
        self.nodes[var.0].value.take_grad()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn needs_grad(&self, var: Var) -> bool {
        self.nodes[var.0].value.requires_grad
    }

    fn derived(&mut self, shape: &[usize], data: Vec<T>, inputs: &[Var], op: Op<T>) -> Var {
        let requires_grad = inputs.iter().any(|&v| self.needs_grad(v));
        let value = Tensor::new(shape, data)
            .expect("kernel output matches shape")
            .with_requires_grad(requires_grad);
        self.push(value, op)
    }

    /// 3×3 convolution, zero padding 1, stride 1.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let x = self.value(input).shape();
        let w = self.value(weight).shape();
        let b = self.value(bias).shape();
        if x.len() != 4 {
            return Err(Error::dim("input rank", format!("conv2d expects [N,C,H,W], got {x:?}")));
        }
        if w.len() != 4 || w[2] != KERNEL || w[3] != KERNEL {
            return Err(Error::dim(
                "weight kernel",
                format!("expected [Cout,Cin,3,3], got {w:?}"),
            ));
        }
        if w[1] != x[1] {
            return Err(Error::dim(
                "input channels",
                format!("input has {} channels, weight expects {}", x[1], w[1]),
            ));
        }
        if b != [w[0]] {
            return Err(Error::dim("bias", format!("expected [{}], got {b:?}", w[0])));
        }
        let dims = ConvDims {
            batch: x[0],
            in_channels: x[1],
            out_channels: w[0],
            height: x[2],
            width: x[3],
        };
        let out = kernels::conv2d_forward(
            self.value(input).data(),
            self.value(weight).data(),
            self.value(bias).data(),
            &dims,
        );
        let shape = [dims.batch, dims.out_channels, dims.height, dims.width];
        Ok(self.derived(&shape, out, &[input, weight, bias], Op::Conv2d { input, weight, bias }))
    }

    /// 2×2 max pooling with stride 2.
    pub fn maxpool2d(&mut self, input: Var) -> Result<Var> {
        let s = self.value(input).shape().to_vec();
        if s.len() != 4 {
            return Err(Error::dim(
                "input rank",
                format!("maxpool2d expects [N,C,H,W], got {s:?}"),
            ));
        }
        if !s[2].is_multiple_of(2) {
            return Err(Error::dim("height", format!("height {} is odd", s[2])));
        }
        if !s[3].is_multiple_of(2) {
            return Err(Error::dim("width", format!("width {} is odd", s[3])));
        }
        let (out, argmax) = kernels::maxpool_forward(self.value(input).data(), s[0] * s[1], s[2], s[3]);
        let shape = [s[0], s[1], s[2] / 2, s[3] / 2];
        Ok(self.derived(&shape, out, &[input], Op::MaxPool2d { input, argmax }))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let x = self.value(input);
        let shape = x.shape().to_vec();
        let out = x
            .data()
            .iter()
            .map(|&v| if v > T::zero() { v } else { T::zero() })
            .collect();
        self.derived(&shape, out, &[input], Op::Relu { input })
    }

    /// Zeroes whole feature maps of a `[N,C,H,W]` tensor with probability
    /// `rate`, scaling survivors by `1/(1-rate)`. Identity in eval mode.
    pub fn spatial_dropout<R: Rng + ?Sized>(&mut self, input: Var, rate: f64, mode: Mode, rng: &mut R) -> Result<Var> {
        check_rate(rate)?;
        let shape = self.value(input).shape().to_vec();
        if shape.len() != 4 {
            return Err(Error::dim(
                "input rank",
                format!("spatial dropout expects [N,C,H,W], got {shape:?}"),
            ));
        }
        Ok(self.masked(input, rate, mode, shape[2] * shape[3], rng))
    }

    /// Element-wise inverted dropout. Identity in eval mode.
    pub fn dropout<R: Rng + ?Sized>(&mut self, input: Var, rate: f64, mode: Mode, rng: &mut R) -> Result<Var> {
        check_rate(rate)?;
        Ok(self.masked(input, rate, mode, 1, rng))
    }

    fn masked<R: Rng + ?Sized>(&mut self, input: Var, rate: f64, mode: Mode, group: usize, rng: &mut R) -> Var {
        if mode == Mode::Eval || rate == 0.0 {
            return input;
        }
        let keep_scale = T::from_f64_lossy(1.0 / (1.0 - rate));
        let x = self.value(input);
        let shape = x.shape().to_vec();
        let mask: Vec<T> = (0..x.len() / group)
            .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep_scale })
            .collect();
        let out = x
            .data()
            .chunks(group)
            .zip(&mask)
            .flat_map(|(chunk, &m)| chunk.iter().map(move |&v| v * m))
            .collect();
        self.derived(&shape, out, &[input], Op::Mask { input, mask, group })
    }

    /// Affine layer `x · Wᵀ + b` for `x: [N,Fin]`, `W: [Fout,Fin]`.
    pub fn dense(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let x = self.value(input).shape();
        let w = self.value(weight).shape();
        let b = self.value(bias).shape();
        if x.len() != 2 {
            return Err(Error::dim("input rank", format!("dense expects [N,F], got {x:?}")));
        }
        if w.len() != 2 || w[1] != x[1] {
            return Err(Error::dim(
                "input features",
                format!("input has {} features, weight shape is {w:?}", x[1]),
            ));
        }
        if b != [w[0]] {
            return Err(Error::dim("bias", format!("expected [{}], got {b:?}", w[0])));
        }
        let (batch, fan_in, fan_out) = (x[0], x[1], w[0]);
        let out = kernels::dense_forward(
            self.value(input).data(),
            self.value(weight).data(),
            self.value(bias).data(),
            batch,
            fan_in,
            fan_out,
        );
        Ok(self.derived(
            &[batch, fan_out],
            out,
            &[input, weight, bias],
            Op::Dense { input, weight, bias },
        ))
    }

    /// Collapses all but the leading axis.
    pub fn flatten(&mut self, input: Var) -> Var {
        let x = self.value(input);
        let n = x.shape()[0];
        let rest = x.len() / n;
        let data = x.data().to_vec();
        self.derived(&[n, rest], data, &[input], Op::Reshape { input })
    }

    /// Joins two `[N,A]`, `[N,B]` tensors into `[N,A+B]`.
    pub fn concat(&mut self, left: Var, right: Var) -> Result<Var> {
        let l = self.value(left).shape();
        let r = self.value(right).shape();
        if l.len() != 2 || r.len() != 2 {
            return Err(Error::dim(
                "rank",
                format!("concat expects 2-D inputs, got {l:?} and {r:?}"),
            ));
        }
        if l[0] != r[0] {
            return Err(Error::dim("batch", format!("batch sizes differ: {} vs {}", l[0], r[0])));
        }
        let (n, a, b) = (l[0], l[1], r[1]);
        let (ld, rd) = (self.value(left).data(), self.value(right).data());
        let mut out = Vec::with_capacity(n * (a + b));
        for row in 0..n {
            out.extend_from_slice(&ld[row * a..(row + 1) * a]);
            out.extend_from_slice(&rd[row * b..(row + 1) * b]);
        }
        Ok(self.derived(&[n, a + b], out, &[left, right], Op::Concat { left, right }))
    }

    /// Mean negative log-likelihood of `targets` under `softmax(logits)`.
    /// Returns the scalar loss node and the row-stochastic probabilities.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<(Var, Tensor<T>)> {
        let z = self.value(logits);
        let shape = z.shape().to_vec();
        if shape.len() != 2 {
            return Err(Error::dim("logits rank", format!("expected [N,K], got {shape:?}")));
        }
        let (n, k) = (shape[0], shape[1]);
        if targets.len() != n {
            return Err(Error::dim(
                "targets",
                format!("{} targets for batch of {n}", targets.len()),
            ));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= k) {
            return Err(Error::Label(format!("target {bad} outside [0, {k})")));
        }
        let probs = softmax_rows(z.data(), k);
        let mut total = T::zero();
        for (row, &t) in z.data().chunks(k).zip(targets) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let log_sum = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
            total = total - (row[t] - max - log_sum);
        }
        let loss = total / T::from_usize(n).expect("batch size fits");
        let probs_tensor = Tensor::new(&shape, probs.clone())?;
        let var = self.derived(
            &[1],
            vec![loss],
            &[logits],
            Op::SoftmaxCrossEntropy {
                logits,
                probs,
                targets: targets.to_vec(),
            },
        );
        Ok((var, probs_tensor))
    }

    /// Reverse sweep from a scalar node. Gradients land on every node that
    /// requires them and can be read with [`Graph::grad`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::dim(
                "loss",
                format!("backward needs a scalar, got shape {:?}", self.value(loss).shape()),
            ));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![T::one()]);

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].value.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            self.nodes[idx].value.grad = Some(g);
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { input, weight, bias } => {
                let x = self.value(*input);
                let w = self.value(*weight);
                let s = x.shape();
                let dims = ConvDims {
                    batch: s[0],
                    in_channels: s[1],
                    out_channels: w.shape()[0],
                    height: s[2],
                    width: s[3],
                };
                let out = kernels::conv2d_backward(x.data(), w.data(), g, &dims, self.needs_grad(*input));
                if let Some(dx) = out.input {
                    accumulate(grads, *input, dx);
                }
                if self.needs_grad(*weight) {
                    accumulate(grads, *weight, out.weight);
                }
                if self.needs_grad(*bias) {
                    accumulate(grads, *bias, out.bias);
                }
            }
            Op::MaxPool2d { input, argmax } => {
                if self.needs_grad(*input) {
                    let mut dx = vec![T::zero(); self.value(*input).len()];
                    for (&src, &gv) in argmax.iter().zip(g) {
                        dx[src] = dx[src] + gv;
                    }
                    accumulate(grads, *input, dx);
                }
            }
            Op::Relu { input } => {
                if self.needs_grad(*input) {
                    let dx = self
                        .value(*input)
                        .data()
                        .iter()
                        .zip(g)
                        .map(|(&x, &gv)| if x > T::zero() { gv } else { T::zero() })
                        .collect();
                    accumulate(grads, *input, dx);
                }
            }
            Op::Mask { input, mask, group } => {
                if self.needs_grad(*input) {
                    let dx = g
                        .chunks(*group)
                        .zip(mask)
                        .flat_map(|(chunk, &m)| chunk.iter().map(move |&v| v * m))
                        .collect();
                    accumulate(grads, *input, dx);
                }
            }
            Op::Dense { input, weight, bias } => {
                let x = self.value(*input);
                let w = self.value(*weight);
                let (batch, fan_in, fan_out) = (x.shape()[0], x.shape()[1], w.shape()[0]);
                let out =
                    kernels::dense_backward(x.data(), w.data(), g, batch, fan_in, fan_out, self.needs_grad(*input));
                if let Some(dx) = out.input {
                    accumulate(grads, *input, dx);
                }
                if self.needs_grad(*weight) {
                    accumulate(grads, *weight, out.weight);
                }
                if self.needs_grad(*bias) {
                    accumulate(grads, *bias, out.bias);
                }
            }
            Op::Reshape { input } => {
                if self.needs_grad(*input) {
                    accumulate(grads, *input, g.to_vec());
                }
            }
            Op::Concat { left, right } => {
                let a = self.value(*left).shape()[1];
                let b = self.value(*right).shape()[1];
                let rows = g.chunks(a + b);
                if self.needs_grad(*left) {
                    let dl = rows.clone().flat_map(|r| r[..a].iter().copied()).collect();
                    accumulate(grads, *left, dl);
                }
                if self.needs_grad(*right) {
                    let dr = rows.flat_map(|r| r[a..].iter().copied()).collect();
                    accumulate(grads, *right, dr);
                }
            }
            Op::SoftmaxCrossEntropy { logits, probs, targets } => {
                if self.needs_grad(*logits) {
                    let n = targets.len();
                    let k = probs.len() / n;
                    let scale = g[0] / T::from_usize(n).expect("batch size fits");
                    let mut dz: Vec<T> = probs.iter().map(|&p| p * scale).collect();
                    for (row, &t) in targets.iter().enumerate() {
                        dz[row * k + t] = dz[row * k + t] - scale;
                    }
                    accumulate(grads, *logits, dz);
                }
            }
        }
    }
}

fn accumulate<T: Element>(grads: &mut [Option<Vec<T>>], var: Var, g: Vec<T>) {
    match &mut grads[var.0] {
        Some(existing) => {
            for (e, v) in existing.iter_mut().zip(g) {
                *e = *e + v;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("dropout rate {rate} outside [0, 1)")))
    }
}

/// Numerically stable row-wise softmax of a row-major `[N,K]` buffer.
pub fn softmax_rows<T: Element>(logits: &[T], k: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
        let sum: T = exps.iter().copied().sum();
        out.extend(exps.into_iter().map(|e| e / sum));
    }
    out
}
