use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    fn init_gain(self) -> f64 {
        match self {
            Activation::Relu => std::f64::consts::SQRT_2,
            Activation::Tanh | Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

impl LayerSpec {
    fn param_count(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

/// Feed-forward network with all parameters in one flat vector.
///
/// Layer `l` stores its weight as an `inputs x outputs` row-major block
/// followed by `outputs` biases, so `z = x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<LayerSpec>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

/// Intermediate values recorded by [`Network::forward_tape`], consumed by
/// [`Network::backward`].
#[derive(Debug, Clone, Default)]
pub struct Tape {
    /// Input to layer `l` is `values[l]`; the network output is `values[L]`.
    values: Vec<Matrix>,
}

impl Tape {
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn output(&self) -> Option<&Matrix> {
        self.values.last()
    }

    pub fn input(&self) -> Option<&Matrix> {
        self.values.first()
    }
}

impl Network {
    /// Network with zero parameters for the given layer stack.
    pub fn zeros(layers: Vec<LayerSpec>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::shape(format!(
                    "layer widths do not chain: {} -> {}",
                    pair[0].outputs, pair[1].inputs
                )));
            }
        }
        if layers.is_empty() {
            return Err(Error::shape("network needs at least one layer"));
        }
        let mut offsets = Vec::with_capacity(layers.len());
        let mut total = 0;
        for l in &layers {
            offsets.push(total);
            total += l.param_count();
        }
        Ok(Self {
            layers,
            offsets,
            params: vec![0.0; total],
        })
    }

    /// Gaussian init with std `gain / sqrt(fan_in)`; gain is sqrt(2) for relu
    /// layers, 1 otherwise, and `output_gain` for the last layer. Biases are 0.
    pub fn init(layers: Vec<LayerSpec>, output_gain: Option<f64>, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(layers)?;
        let n = net.layers.len();
        for l in 0..n {
            let spec = net.layers[l];
            let gain = if l + 1 == n {
                output_gain.unwrap_or_else(|| spec.activation.init_gain())
            } else {
                spec.activation.init_gain()
            };
            let std = gain / (spec.inputs as f64).sqrt();
            let off = net.offsets[l];
            for w in &mut net.params[off..off + spec.inputs * spec.outputs] {
                *w = std * rng.normal();
            }
        }
        Ok(net)
    }

    /// `sizes = [in, h1, ..., out]`; hidden layers use `hidden`, the last `output`.
    pub fn mlp(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        output_gain: Option<f64>,
        rng: &mut Rng,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::shape("mlp needs at least input and output sizes"));
        }
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| LayerSpec {
                inputs: sizes[i],
                outputs: sizes[i + 1],
                activation: if i + 1 == n { output } else { hidden },
            })
            .collect();
        Self::init(layers, output_gain, rng)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Weight of layer `l` as `(inputs x outputs)` row-major, and bias.
    pub fn layer_params(&self, l: usize) -> (&[f64], &[f64]) {
        let spec = self.layers[l];
        let off = self.offsets[l];
        let nw = spec.inputs * spec.outputs;
        (
            &self.params[off..off + nw],
            &self.params[off + nw..off + nw + spec.outputs],
        )
    }

    pub fn layer_params_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let spec = self.layers[l];
        let off = self.offsets[l];
        let nw = spec.inputs * spec.outputs;
        let (w, rest) = self.params[off..off + nw + spec.outputs].split_at_mut(nw);
        (w, rest)
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_width() {
            return Err(Error::shape(format!(
                "network expects input width {}, got {}",
                self.input_width(),
                x.cols()
            )));
        }
        Ok(())
    }

    fn layer_forward(&self, l: usize, x: &Matrix) -> Matrix {
        let spec = self.layers[l];
        let (w, b) = self.layer_params(l);
        let mut z = Matrix::zeros(x.rows(), spec.outputs);
        for i in 0..x.rows() {
            let xi = x.row(i);
            let zi = z.row_mut(i);
            zi.copy_from_slice(b);
            for (k, &xk) in xi.iter().enumerate() {
                if xk == 0.0 {
                    continue;
                }
                let wk = &w[k * spec.outputs..(k + 1) * spec.outputs];
                for (zj, &wkj) in zi.iter_mut().zip(wk) {
                    *zj += xk * wkj;
                }
            }
            if spec.activation != Activation::Identity {
                for zj in zi.iter_mut() {
                    *zj = spec.activation.apply(*zj);
                }
            }
        }
        z
    }

    /// Batched forward pass; rows are independent samples.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut h = self.layer_forward(0, x);
        for l in 1..self.layers.len() {
            h = self.layer_forward(l, &h);
        }
        Ok(h)
    }

    /// Forward pass that records the activations needed by `backward`.
    pub fn forward_tape(&self, x: &Matrix) -> Result<Tape> {
        self.check_input(x)?;
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(x.clone());
        for l in 0..self.layers.len() {
            let next = self.layer_forward(l, &values[l]);
            values.push(next);
        }
        Ok(Tape { values })
    }

    /// Reverse-mode pass. `grad_output` is dLoss/d(output) for every row of
    /// the recorded batch. Returns parameter gradients (same layout as
    /// [`Network::params`]) and dLoss/d(input).
    pub fn backward(&self, tape: &Tape, grad_output: &Matrix) -> Result<(Vec<f64>, Matrix)> {
        if tape.is_empty() {
            return Err(Error::State("backward called without a recorded forward pass".into()));
        }
        if tape.values.len() != self.layers.len() + 1 {
            return Err(Error::State("tape was recorded by a different network".into()));
        }
        let out = tape.values.last().unwrap();
        if (grad_output.rows(), grad_output.cols()) != (out.rows(), out.cols()) {
            return Err(Error::shape(format!(
                "upstream gradient {}x{} does not match output {}x{}",
                grad_output.rows(),
                grad_output.cols(),
                out.rows(),
                out.cols()
            )));
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = grad_output.clone();
        for l in (0..self.layers.len()).rev() {
            let spec = self.layers[l];
            let y = &tape.values[l + 1];
            let x = &tape.values[l];
            if spec.activation != Activation::Identity {
                for (d, &yv) in delta.as_mut_slice().iter_mut().zip(y.as_slice()) {
                    *d *= spec.activation.derivative_from_output(yv);
                }
            }
            let off = self.offsets[l];
            let nw = spec.inputs * spec.outputs;
            {
                let (gw, gb) = grads[off..off + nw + spec.outputs].split_at_mut(nw);
                for i in 0..x.rows() {
                    let di = delta.row(i);
                    for (gbj, &dj) in gb.iter_mut().zip(di) {
                        *gbj += dj;
                    }
                    for (k, &xk) in x.row(i).iter().enumerate() {
                        if xk == 0.0 {
                            continue;
                        }
                        let gwk = &mut gw[k * spec.outputs..(k + 1) * spec.outputs];
                        for (g, &dj) in gwk.iter_mut().zip(di) {
                            *g += xk * dj;
                        }
                    }
                }
            }
            let (w, _) = self.layer_params(l);
            let mut dx = Matrix::zeros(x.rows(), spec.inputs);
            for i in 0..x.rows() {
                let di = delta.row(i);
                let dxi = dx.row_mut(i);
                for (k, dxk) in dxi.iter_mut().enumerate() {
                    let wk = &w[k * spec.outputs..(k + 1) * spec.outputs];
                    *dxk = wk.iter().zip(di).map(|(a, b)| a * b).sum();
                }
            }
            delta = dx;
        }
        Ok((grads, delta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(w: f64, b: f64) -> Network {
        let mut n = Network::zeros(vec![LayerSpec {
            inputs: 1,
            outputs: 1,
            activation: Activation::Identity,
        }])
        .unwrap();
        n.params_mut().copy_from_slice(&[w, b]);
        n
    }

    #[test]
    fn identity_network_is_identity() {
        let mut n = Network::zeros(vec![LayerSpec {
            inputs: 3,
            outputs: 3,
            activation: Activation::Identity,
        }])
        .unwrap();
        let (w, _) = n.layer_params_mut(0);
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.5]]).unwrap();
        assert_eq!(n.forward(&x).unwrap(), x);
    }

    #[test]
    fn single_linear_layer() {
        let n = linear(2.0, 1.0);
        let y = n.forward(&Matrix::row_vector(&[3.0])).unwrap();
        assert_eq!(y.as_slice(), &[7.0]);
    }

    #[test]
    fn width_mismatch_is_shape_error() {
        let n = linear(2.0, 1.0);
        let x = Matrix::row_vector(&[1.0, 2.0]);
        assert!(matches!(n.forward(&x), Err(Error::Shape(_))));
    }

    #[test]
    fn linear_weight_gradient_is_input() {
        let n = linear(2.0, 0.0);
        let tape = n.forward_tape(&Matrix::row_vector(&[3.0])).unwrap();
        let (g, dx) = n.backward(&tape, &Matrix::row_vector(&[1.0])).unwrap();
        assert_eq!(g, vec![3.0, 1.0]);
        assert_eq!(dx.as_slice(), &[2.0]);
    }

    #[test]
    fn relu_blocks_negative_preactivation() {
        let mut n = Network::zeros(vec![LayerSpec {
            inputs: 1,
            outputs: 1,
            activation: Activation::Relu,
        }])
        .unwrap();
        n.params_mut().copy_from_slice(&[1.0, 0.0]);
        let tape = n.forward_tape(&Matrix::row_vector(&[-2.0])).unwrap();
        let (g, dx) = n.backward(&tape, &Matrix::row_vector(&[1.0])).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        assert_eq!(dx.as_slice(), &[0.0]);
    }

    #[test]
    fn backward_without_forward_is_state_error() {
        let n = linear(1.0, 0.0);
        let err = n.backward(&Tape::default(), &Matrix::row_vector(&[1.0]));
        assert!(matches!(err, Err(Error::State(_))));
    }

    #[test]
    fn batched_forward_equals_row_by_row() {
        let mut rng = Rng::new(5, 0);
        let net = Network::mlp(&[4, 8, 3], Activation::Tanh, Activation::Identity, None, &mut rng)
            .unwrap();
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..4).map(|_| rng.normal()).collect())
            .collect();
        let batch = net.forward(&Matrix::from_rows(&rows).unwrap()).unwrap();
        for (i, r) in rows.iter().enumerate() {
            let single = net.forward(&Matrix::row_vector(r)).unwrap();
            assert_eq!(single.row(0), batch.row(i));
        }
    }

    #[test]
    fn layers_must_chain() {
        let r = Network::zeros(vec![
            LayerSpec {
                inputs: 2,
                outputs: 3,
                activation: Activation::Tanh,
            },
            LayerSpec {
                inputs: 4,
                outputs: 1,
                activation: Activation::Identity,
            },
        ]);
        assert!(r.is_err());
    }
}
