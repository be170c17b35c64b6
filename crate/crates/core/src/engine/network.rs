use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{Activation, Scalar};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_width: usize,
    pub output_width: usize,
    pub activation: Activation,
}

/// Shape of a dense stack. The last layer is the output layer; every earlier
/// layer is a hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
    /// Probability of keeping a hidden unit during training.
    pub dropout_keep: f64,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>, dropout_keep: f64) -> Result<Self> {
        let spec = NetworkSpec {
            layers,
            dropout_keep,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `input -> hidden[0] -> ... -> hidden[n-1] -> output`, all hidden layers
    /// sharing one activation.
    pub fn mlp(
        input: usize,
        hidden: &[usize],
        hidden_activation: Activation,
        output: usize,
        output_activation: Activation,
        dropout_keep: f64,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = input;
        for &h in hidden {
            layers.push(LayerSpec {
                input_width: width,
                output_width: h,
                activation: hidden_activation,
            });
            width = h;
        }
        layers.push(LayerSpec {
            input_width: width,
            output_width: output,
            activation: output_activation,
        });
        Self::new(layers, dropout_keep)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidSpec("at least one layer is required".into()));
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "dropout_keep must lie in (0, 1], got {}",
                self.dropout_keep
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.input_width == 0 || l.output_width == 0 {
                return Err(Error::InvalidSpec(format!("layer {i} has a zero width")));
            }
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].output_width != pair[1].input_width {
                return Err(Error::InvalidSpec(format!(
                    "layer {i} outputs {} units but layer {} expects {}",
                    pair[0].output_width,
                    i + 1,
                    pair[1].input_width
                )));
            }
        }
        Ok(())
    }

    pub fn with_dropout_keep(mut self, keep: f64) -> Result<Self> {
        self.dropout_keep = keep;
        self.validate()?;
        Ok(self)
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].output_width
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.output_width)
            .collect()
    }

    /// Length of the concatenated hidden-activation vector.
    pub fn hidden_total(&self) -> usize {
        self.hidden_widths().iter().sum()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.output_width * (l.input_width + 1))
            .sum()
    }
}

/// Weights (`output x input`) and bias of one dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Params<T> {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Params {
            layers: spec
                .layers
                .iter()
                .map(|l| Dense {
                    weight: Array2::zeros((l.output_width, l.input_width)),
                    bias: Array1::zeros(l.output_width),
                })
                .collect(),
        }
    }

    /// Weights from `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`, zero biases.
    pub fn init<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Self {
        let mut params = Self::zeros(spec);
        for (dense, l) in params.layers.iter_mut().zip(&spec.layers) {
            let limit = (6.0 / l.input_width as f64).sqrt();
            dense
                .weight
                .mapv_inplace(|_| T::from_f64_lossy(rng.random_range(-limit..limit)));
        }
        params
    }

    pub fn check_shapes(&self, spec: &NetworkSpec) -> Result<()> {
        if self.layers.len() != spec.layers.len() {
            return Err(Error::Shape(format!(
                "spec has {} layers, params have {}",
                spec.layers.len(),
                self.layers.len()
            )));
        }
        for (i, (d, l)) in self.layers.iter().zip(&spec.layers).enumerate() {
            if d.weight.dim() != (l.output_width, l.input_width) || d.bias.len() != l.output_width
            {
                return Err(Error::Shape(format!(
                    "layer {i}: expected weight {}x{} and bias {}, found {:?} and {}",
                    l.output_width,
                    l.input_width,
                    l.output_width,
                    d.weight.dim(),
                    d.bias.len()
                )));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|d| {
            d.weight.iter().all(|x| x.is_finite()) && d.bias.iter().all(|x| x.is_finite())
        })
    }

    pub fn cast<U: Scalar>(&self) -> Params<U> {
        Params {
            layers: self
                .layers
                .iter()
                .map(|d| Dense {
                    weight: d.weight.mapv(|x| U::from_f64_lossy(x.to_f64_lossy())),
                    bias: d.bias.mapv(|x| U::from_f64_lossy(x.to_f64_lossy())),
                })
                .collect(),
        }
    }

    /// Every scalar, layer by layer, weights before biases.
    pub fn flat_values(&self) -> Vec<T> {
        let mut out = Vec::new();
        for d in &self.layers {
            out.extend(d.weight.iter().copied());
            out.extend(d.bias.iter().copied());
        }
        out
    }

    /// Mutable access to every scalar in the order of [`Params::flat_values`].
    pub fn for_each_mut(&mut self, mut f: impl FnMut(usize, &mut T)) {
        let mut k = 0;
        for d in &mut self.layers {
            for x in d.weight.iter_mut().chain(d.bias.iter_mut()) {
                f(k, x);
                k += 1;
            }
        }
    }
}

/// A spec together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub spec: NetworkSpec,
    pub params: Params<T>,
}

impl<T: Scalar> Network<T> {
    pub fn new(spec: NetworkSpec, params: Params<T>) -> Result<Self> {
        spec.validate()?;
        params.check_shapes(&spec)?;
        Ok(Network { spec, params })
    }

    pub fn init<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Self {
        let params = Params::init(&spec, rng);
        Network { spec, params }
    }

    /// Eval-mode outputs, processed in chunks of `chunk` rows.
    pub fn predict(&self, x: ArrayView2<T>, chunk: usize) -> Result<Array2<T>> {
        let mut out = Array2::zeros((x.nrows(), self.spec.output_width()));
        for start in (0..x.nrows()).step_by(chunk.max(1)) {
            let end = (start + chunk).min(x.nrows());
            let y = predict_batch(&self.spec, &self.params, x.slice(ndarray::s![start..end, ..]))?;
            out.slice_mut(ndarray::s![start..end, ..]).assign(&y);
        }
        Ok(out)
    }
}

pub enum Mode<'a> {
    /// Deterministic, no dropout.
    Eval,
    /// Inverted dropout on hidden layers, masks drawn from the generator.
    Train(&'a mut dyn RngCore),
}

/// Everything the backward pass needs from one layer of a forward pass.
#[derive(Debug, Clone)]
pub struct LayerTrace<T> {
    pub pre: Array2<T>,
    /// Post-nonlinearity, before dropout.
    pub post: Array2<T>,
    /// Per-element dropout scale (`0` or `1 / keep`), if dropout was applied.
    pub mask: Option<Array2<T>>,
}

impl<T: Scalar> LayerTrace<T> {
    /// The value that feeds the next layer.
    fn emitted(&self) -> Array2<T> {
        match &self.mask {
            Some(m) => &self.post * m,
            None => self.post.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trace<T> {
    pub input: Array2<T>,
    pub layers: Vec<LayerTrace<T>>,
}

impl<T: Scalar> Trace<T> {
    pub fn output(&self) -> &Array2<T> {
        &self.layers[self.layers.len() - 1].post
    }

    /// Hidden activations (pre-dropout), one matrix per hidden layer.
    pub fn hidden(&self) -> impl Iterator<Item = &Array2<T>> {
        self.layers[..self.layers.len() - 1].iter().map(|l| &l.post)
    }

    /// Row `i` holds sample `i`'s hidden layers laid end to end, layer 0 first.
    pub fn hidden_concat(&self) -> Array2<T> {
        let views: Vec<_> = self.hidden().map(|h| h.view()).collect();
        if views.is_empty() {
            return Array2::zeros((self.input.nrows(), 0));
        }
        ndarray::concatenate(Axis(1), &views).expect("hidden layers share the batch axis")
    }
}

fn affine<T: Scalar>(input: ArrayView2<T>, dense: &Dense<T>) -> Array2<T> {
    let mut z = input.dot(&dense.weight.t());
    z += &dense.bias;
    z
}

/// Batched forward pass over the rows of `x`.
pub fn forward_batch<T: Scalar>(
    spec: &NetworkSpec,
    params: &Params<T>,
    x: ArrayView2<T>,
    mut mode: Mode<'_>,
) -> Result<Trace<T>> {
    if x.ncols() != spec.input_width() {
        return Err(Error::Shape(format!(
            "input width {} does not match network input {}",
            x.ncols(),
            spec.input_width()
        )));
    }
    params.check_shapes(spec)?;

    let last = spec.layers.len() - 1;
    let keep = spec.dropout_keep;
    let scale = T::from_f64_lossy(1.0 / keep);
    let mut layers: Vec<LayerTrace<T>> = Vec::with_capacity(spec.layers.len());
    for (i, (l, dense)) in spec.layers.iter().zip(&params.layers).enumerate() {
        let pre = match layers.last() {
            None => affine(x, dense),
            Some(prev) => match &prev.mask {
                Some(_) => affine(prev.emitted().view(), dense),
                None => affine(prev.post.view(), dense),
            },
        };
        let act = l.activation;
        let post = pre.mapv(|v| act.apply(v));
        if !post.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericOverflow { layer: i });
        }
        let mask = match &mut mode {
            Mode::Train(rng) if i < last && keep < 1.0 => Some(post.mapv(|_| {
                if rng.random::<f64>() < keep {
                    scale
                } else {
                    T::zero()
                }
            })),
            _ => None,
        };
        layers.push(LayerTrace { pre, post, mask });
    }
    Ok(Trace {
        input: x.to_owned(),
        layers,
    })
}

/// Eval-mode outputs only; nothing is kept for a backward pass.
pub fn predict_batch<T: Scalar>(
    spec: &NetworkSpec,
    params: &Params<T>,
    x: ArrayView2<T>,
) -> Result<Array2<T>> {
    if x.ncols() != spec.input_width() {
        return Err(Error::Shape(format!(
            "input width {} does not match network input {}",
            x.ncols(),
            spec.input_width()
        )));
    }
    params.check_shapes(spec)?;
    let mut a = x.to_owned();
    for (i, (l, dense)) in spec.layers.iter().zip(&params.layers).enumerate() {
        let act = l.activation;
        a = affine(a.view(), dense);
        a.mapv_inplace(|v| act.apply(v));
        if !a.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericOverflow { layer: i });
        }
    }
    Ok(a)
}

/// Reverse pass. `d_output` is the loss gradient with respect to the network
/// output; returns the parameter gradients and the gradient with respect to
/// the network input. Parameters are not touched.
pub fn backward_batch<T: Scalar>(
    spec: &NetworkSpec,
    params: &Params<T>,
    trace: &Trace<T>,
    d_output: ArrayView2<T>,
) -> Result<(Params<T>, Array2<T>)> {
    if d_output.dim() != trace.output().dim() {
        return Err(Error::Shape(format!(
            "output gradient {:?} does not match output {:?}",
            d_output.dim(),
            trace.output().dim()
        )));
    }
    let n = spec.layers.len();
    let mut grads: Vec<Dense<T>> = Vec::with_capacity(n);
    let mut upstream = d_output.to_owned();
    for i in (0..n).rev() {
        let lt = &trace.layers[i];
        let act = spec.layers[i].activation;
        // upstream := dL/dpre
        Zip::from(&mut upstream)
            .and(&lt.pre)
            .and(&lt.post)
            .for_each(|g, &z, &a| *g = *g * act.derivative(z, a));
        let weight_grad = if i == 0 {
            upstream.t().dot(&trace.input)
        } else {
            let prev = &trace.layers[i - 1];
            match &prev.mask {
                Some(_) => upstream.t().dot(&prev.emitted()),
                None => upstream.t().dot(&prev.post),
            }
        };
        let bias_grad = upstream.sum_axis(Axis(0));
        let mut d_in = upstream.dot(&params.layers[i].weight);
        if i > 0 {
            if let Some(m) = &trace.layers[i - 1].mask {
                d_in *= m;
            }
        }
        grads.push(Dense {
            weight: weight_grad,
            bias: bias_grad,
        });
        upstream = d_in;
    }
    grads.reverse();
    Ok((Params { layers: grads }, upstream))
}

/// Mean over the batch of `(1/2) |output - target|^2`, with its gradient with
/// respect to `output`.
pub fn half_mse<T: Scalar>(output: ArrayView2<T>, target: ArrayView2<T>) -> (f64, Array2<T>) {
    assert_eq!(output.dim(), target.dim(), "output and target shapes differ");
    let n = output.nrows().max(1);
    let inv_n = T::from_f64_lossy(1.0 / n as f64);
    let diff = &output - &target;
    let loss = diff
        .iter()
        .map(|d| {
            let d = d.to_f64_lossy();
            d * d
        })
        .sum::<f64>()
        * 0.5
        / n as f64;
    (loss, diff * inv_n)
}

fn row<T: Scalar>(x: &[T]) -> ArrayView2<'_, T> {
    ArrayView2::from_shape((1, x.len()), x).expect("a slice is a contiguous row")
}

/// Single-sample forward: returns the output and every hidden layer
/// (post-nonlinearity, pre-dropout).
pub fn forward<T: Scalar>(
    spec: &NetworkSpec,
    params: &Params<T>,
    x: &[T],
    mode: Mode<'_>,
) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let trace = forward_batch(spec, params, row(x), mode)?;
    let out = trace.output().row(0).to_vec();
    let hidden = trace.hidden().map(|h| h.row(0).to_vec()).collect();
    Ok((out, hidden))
}

/// Gradient of `(1/2) |f(x) - target|^2` for one sample, in eval mode.
pub fn backward<T: Scalar>(
    spec: &NetworkSpec,
    params: &Params<T>,
    x: &[T],
    target: &[T],
) -> Result<Params<T>> {
    if target.len() != spec.output_width() {
        return Err(Error::Shape(format!(
            "target width {} does not match network output {}",
            target.len(),
            spec.output_width()
        )));
    }
    let trace = forward_batch(spec, params, row(x), Mode::Eval)?;
    let (_, d_out) = half_mse(trace.output().view(), row(target));
    let (grads, _) = backward_batch(spec, params, &trace, d_out.view())?;
    Ok(grads)
}

/// Lays hidden layers end to end, layer 0 first.
pub fn hidden_concat<T: Copy>(hidden: &[Vec<T>]) -> Result<Vec<T>> {
    if hidden.is_empty() {
        return Err(Error::InvalidInput("no hidden layers to concatenate".into()));
    }
    if let Some(i) = hidden.iter().position(|h| h.is_empty()) {
        return Err(Error::InvalidInput(format!("hidden layer {i} is empty")));
    }
    Ok(hidden.iter().flatten().copied().collect())
}
