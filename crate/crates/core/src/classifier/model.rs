use crate::base::LabeledBatch;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

use super::arch::{ArchitectureSpec, LayerSpec};
use super::loss::{bce_with_logit, sigmoid};

/// Weights and biases of one layer; both empty for parameter-free layers.
///
/// Dense weights are `[out][in]`; conv weights are `[tap][in][out]` with
/// `tap = 3·ky + kx`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> LayerParams<T> {
    fn zeros_for(layer: &LayerSpec) -> Self {
        let (w, b) = layer.param_sizes().map_or((0, 0), |(w, b, _)| (w, b));
        Self {
            weight: vec![T::zero(); w],
            bias: vec![T::zero(); b],
        }
    }

    fn cast<U: Scalar>(&self) -> LayerParams<U> {
        LayerParams {
            weight: self.weight.iter().map(|v| U::of(v.as_f64())).collect(),
            bias: self.bias.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.weight.iter().chain(&self.bias)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.weight.iter_mut().chain(self.bias.iter_mut())
    }
}

/// Parameter-shaped gradient arrays, one entry per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerParams<T>>,
}

/// Single-logit classifier: parameters plus SGD momentum buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    spec: ArchitectureSpec,
    shapes: Vec<Shape>,
    params: Vec<LayerParams<T>>,
    momentum: Vec<LayerParams<T>>,
}

impl<T: Scalar> Model<T> {
    /// Weights `~ Uniform(−b, b)` with `b = √(6 / fan_in)`, drawn layer by
    /// layer from stream `(seed, layer index)`; biases and momentum zero.
    pub fn init(spec: &ArchitectureSpec, seed: u64) -> Result<Self> {
        let shapes = spec.layer_shapes()?;
        let mut params = Vec::with_capacity(spec.layers.len());
        for (i, layer) in spec.layers.iter().enumerate() {
            let mut p = LayerParams::zeros_for(layer);
            if let Some((_, _, fan_in)) = layer.param_sizes() {
                let bound = (6.0 / fan_in as f64).sqrt();
                let mut rng = RngStream::derive(seed, i as u64);
                for w in &mut p.weight {
                    *w = T::of(bound * (2.0 * rng.uniform() - 1.0));
                }
            }
            params.push(p);
        }
        let momentum = spec.layers.iter().map(LayerParams::zeros_for).collect();
        Ok(Self {
            spec: spec.clone(),
            shapes,
            params,
            momentum,
        })
    }

    /// Reassembles a model, checking shapes against `spec` and finiteness.
    pub fn from_parts(
        spec: ArchitectureSpec,
        params: Vec<LayerParams<T>>,
        momentum: Vec<LayerParams<T>>,
    ) -> Result<Self> {
        let shapes = spec.layer_shapes()?;
        for (name, set) in [("parameter", &params), ("momentum", &momentum)] {
            if set.len() != spec.layers.len() {
                return Err(Error::Dimension(format!(
                    "{} {name} arrays for {} layers",
                    set.len(),
                    spec.layers.len()
                )));
            }
            for (i, (p, l)) in set.iter().zip(&spec.layers).enumerate() {
                let want = LayerParams::<T>::zeros_for(l);
                if p.weight.len() != want.weight.len() || p.bias.len() != want.bias.len() {
                    return Err(Error::Dimension(format!(
                        "layer {i} {name} sizes ({}, {}) do not match spec ({}, {})",
                        p.weight.len(),
                        p.bias.len(),
                        want.weight.len(),
                        want.bias.len()
                    )));
                }
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("layer {i} {name} values")));
                }
            }
        }
        Ok(Self {
            spec,
            shapes,
            params,
            momentum,
        })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn input_shape(&self) -> Shape {
        self.spec.input
    }

    pub fn params(&self) -> &[LayerParams<T>] {
        &self.params
    }

    /// Direct parameter access, e.g. for finite-difference probes or to zero
    /// a layer. Values must stay finite.
    pub fn params_mut(&mut self) -> &mut [LayerParams<T>] {
        &mut self.params
    }

    pub fn momentum(&self) -> &[LayerParams<T>] {
        &self.momentum
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(LayerParams::len).sum()
    }

    /// Index of the last parametric layer (the logit head).
    pub fn head_index(&self) -> usize {
        self.spec
            .layers
            .iter()
            .rposition(|l| l.param_sizes().is_some())
            .expect("validated spec ends in a dense layer")
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            spec: self.spec.clone(),
            shapes: self.shapes.clone(),
            params: self.params.iter().map(LayerParams::cast).collect(),
            momentum: self.momentum.iter().map(LayerParams::cast).collect(),
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.shape() != self.spec.input {
            return Err(Error::Dimension(format!(
                "model expects input {}, got {}",
                self.spec.input,
                x.shape()
            )));
        }
        Ok(())
    }

    fn in_shape(&self, layer: usize) -> Shape {
        if layer == 0 {
            self.spec.input
        } else {
            self.shapes[layer - 1]
        }
    }

    /// Activations of every layer; `acts[0]` is the input, the last entry the logit.
    fn activations(&self, x: &Tensor<T>) -> Result<Vec<Vec<T>>> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.spec.layers.len() + 1);
        acts.push(x.as_slice().to_vec());
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let mut out = vec![T::zero(); self.shapes[i].len()];
            layer_forward(layer, &self.params[i], self.in_shape(i), &acts[i], &mut out);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric {
                    layer: i,
                    kind: layer.name().into(),
                });
            }
            acts.push(out);
        }
        Ok(acts)
    }

    pub fn forward_one(&self, x: &Tensor<T>) -> Result<T> {
        let acts = self.activations(x)?;
        Ok(acts.last().expect("at least one layer")[0])
    }

    /// One logit per input, in input order.
    pub fn forward(&self, inputs: &[Tensor<T>]) -> Result<Vec<T>> {
        inputs.iter().map(|x| self.forward_one(x)).collect()
    }

    /// Mean binary cross-entropy over the batch and its gradient, accumulated
    /// sample by sample in batch order.
    pub fn loss_and_grad(&self, batch: &LabeledBatch<T>) -> Result<(T, Gradients<T>)> {
        if batch.is_empty() {
            return Err(Error::Empty("loss on an empty batch".into()));
        }
        let n = T::of(batch.len() as f64);
        let mut grads = Gradients {
            layers: self.spec.layers.iter().map(LayerParams::zeros_for).collect(),
        };
        let mut total = T::zero();
        for (x, &y) in batch.inputs.iter().zip(&batch.labels) {
            let acts = self.activations(x)?;
            let z = acts.last().expect("logit")[0];
            let y = if y == 1 { T::one() } else { T::zero() };
            total += bce_with_logit(z, y);
            let mut gout = vec![(sigmoid(z) - y) / n];
            for i in (0..self.spec.layers.len()).rev() {
                let need_input_grad = i > 0;
                let mut gin = if need_input_grad {
                    vec![T::zero(); acts[i].len()]
                } else {
                    Vec::new()
                };
                layer_backward(
                    &self.spec.layers[i],
                    &self.params[i],
                    self.in_shape(i),
                    &acts[i],
                    &gout,
                    &mut grads.layers[i],
                    need_input_grad.then_some(&mut gin),
                );
                gout = gin;
            }
        }
        Ok((total / n, grads))
    }

    /// `v ← momentum·v + g`, then `θ ← θ − lr·v`.
    pub fn sgd_momentum_step(&mut self, grads: &Gradients<T>, lr: T, momentum: T) -> Result<()> {
        if grads.layers.len() != self.params.len()
            || grads.layers.iter().zip(&self.params).any(|(g, p)| {
                g.weight.len() != p.weight.len() || g.bias.len() != p.bias.len()
            })
        {
            return Err(Error::Dimension("gradient shapes do not match the model".into()));
        }
        for ((p, v), g) in self.params.iter_mut().zip(&mut self.momentum).zip(&grads.layers) {
            for ((theta, vel), &grad) in p.iter_mut().zip(v.iter_mut()).zip(g.iter()) {
                *vel = momentum * *vel + grad;
                *theta -= lr * *vel;
            }
        }
        Ok(())
    }
}

fn layer_forward<T: Scalar>(layer: &LayerSpec, p: &LayerParams<T>, s: Shape, input: &[T], out: &mut [T]) {
    match *layer {
        LayerSpec::Dense { inputs, .. } => {
            for (o, (row, &b)) in out.iter_mut().zip(p.weight.chunks_exact(inputs).zip(&p.bias)) {
                *o = b + row.iter().zip(input).fold(T::zero(), |acc, (&w, &x)| acc + w * x);
            }
        }
        LayerSpec::Conv3x3 {
            in_channels: ic,
            out_channels: oc,
        } => {
            let (h, w) = (s.height, s.width);
            for y in 0..h {
                for x in 0..w {
                    let o = &mut out[(y * w + x) * oc..][..oc];
                    o.copy_from_slice(&p.bias);
                    for_each_tap(y, x, h, w, |tap, iy, ix| {
                        let px = &input[(iy * w + ix) * ic..][..ic];
                        let wt = &p.weight[tap * ic * oc..][..ic * oc];
                        for (&v, wr) in px.iter().zip(wt.chunks_exact(oc)) {
                            if v == T::zero() {
                                continue;
                            }
                            for (oo, &ww) in o.iter_mut().zip(wr) {
                                *oo += v * ww;
                            }
                        }
                    });
                }
            }
        }
        LayerSpec::Relu => {
            for (o, &v) in out.iter_mut().zip(input) {
                *o = if v > T::zero() { v } else { T::zero() };
            }
        }
        LayerSpec::MaxPool2 => {
            let (oh, ow, c) = (s.height / 2, s.width / 2, s.channels);
            for oy in 0..oh {
                for ox in 0..ow {
                    for ch in 0..c {
                        let (idx, _) = pool_argmax(input, s, oy, ox, ch);
                        out[(oy * ow + ox) * c + ch] = input[idx];
                    }
                }
            }
        }
        LayerSpec::Flatten => out.copy_from_slice(input),
    }
}

fn layer_backward<T: Scalar>(
    layer: &LayerSpec,
    p: &LayerParams<T>,
    s: Shape,
    input: &[T],
    gout: &[T],
    g: &mut LayerParams<T>,
    gin: Option<&mut Vec<T>>,
) {
    match *layer {
        LayerSpec::Dense { inputs, .. } => {
            let mut gin = gin;
            for (o, &go) in gout.iter().enumerate() {
                g.bias[o] += go;
                if go == T::zero() {
                    continue;
                }
                let row = &p.weight[o * inputs..][..inputs];
                let grow = &mut g.weight[o * inputs..][..inputs];
                for (gw, &x) in grow.iter_mut().zip(input) {
                    *gw += go * x;
                }
                if let Some(gi) = gin.as_deref_mut() {
                    for (gx, &w) in gi.iter_mut().zip(row) {
                        *gx += go * w;
                    }
                }
            }
        }
        LayerSpec::Conv3x3 {
            in_channels: ic,
            out_channels: oc,
        } => {
            let (h, w) = (s.height, s.width);
            let mut gin = gin;
            for y in 0..h {
                for x in 0..w {
                    let go = &gout[(y * w + x) * oc..][..oc];
                    for (gb, &v) in g.bias.iter_mut().zip(go) {
                        *gb += v;
                    }
                    for_each_tap(y, x, h, w, |tap, iy, ix| {
                        let base = (iy * w + ix) * ic;
                        let px = &input[base..][..ic];
                        let wt = &p.weight[tap * ic * oc..][..ic * oc];
                        let gwt = &mut g.weight[tap * ic * oc..][..ic * oc];
                        for i in 0..ic {
                            let v = px[i];
                            let gwr = &mut gwt[i * oc..][..oc];
                            if v != T::zero() {
                                for (gw, &gv) in gwr.iter_mut().zip(go) {
                                    *gw += v * gv;
                                }
                            }
                            if let Some(gi) = gin.as_deref_mut() {
                                let wr = &wt[i * oc..][..oc];
                                gi[base + i] += wr.iter().zip(go).fold(T::zero(), |a, (&ww, &gv)| a + ww * gv);
                            }
                        }
                    });
                }
            }
        }
        LayerSpec::Relu => {
            if let Some(gi) = gin {
                for ((gx, &go), &v) in gi.iter_mut().zip(gout).zip(input) {
                    *gx = if v > T::zero() { go } else { T::zero() };
                }
            }
        }
        LayerSpec::MaxPool2 => {
            if let Some(gi) = gin {
                let (oh, ow, c) = (s.height / 2, s.width / 2, s.channels);
                for oy in 0..oh {
                    for ox in 0..ow {
                        for ch in 0..c {
                            let (idx, _) = pool_argmax(input, s, oy, ox, ch);
                            gi[idx] += gout[(oy * ow + ox) * c + ch];
                        }
                    }
                }
            }
        }
        LayerSpec::Flatten => {
            if let Some(gi) = gin {
                gi.copy_from_slice(gout);
            }
        }
    }
}

/// Calls `f(tap, iy, ix)` for each in-bounds neighbor of `(y, x)` under
/// zero padding 1.
#[inline]
fn for_each_tap(y: usize, x: usize, h: usize, w: usize, mut f: impl FnMut(usize, usize, usize)) {
    for ky in 0..3 {
        let Some(iy) = (y + ky).checked_sub(1).filter(|&v| v < h) else {
            continue;
        };
        for kx in 0..3 {
            let Some(ix) = (x + kx).checked_sub(1).filter(|&v| v < w) else {
                continue;
            };
            f(ky * 3 + kx, iy, ix);
        }
    }
}

/// Flat index and value of the window maximum; first maximum in scan order wins.
#[inline]
fn pool_argmax<T: Scalar>(input: &[T], s: Shape, oy: usize, ox: usize, ch: usize) -> (usize, T) {
    let mut best = (usize::MAX, T::neg_infinity());
    for dy in 0..2 {
        for dx in 0..2 {
            let idx = ((2 * oy + dy) * s.width + 2 * ox + dx) * s.channels + ch;
            if best.0 == usize::MAX || input[idx] > best.1 {
                best = (idx, input[idx]);
            }
        }
    }
    best
}
