//! Fully connected Q-network: rectifier hidden layers, linear output.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::DqnError;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `inputs x outputs`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn glorot<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights =
            Array2::from_shape_simple_fn((inputs, outputs), || rng.random_range(-limit..=limit));
        Self {
            weights,
            bias: Array1::zeros(outputs),
        }
    }

    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    pub layers: Vec<Dense>,
}

/// Per-layer parameter gradients, same shapes as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn max_abs(&self) -> f64 {
        self.flatten().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn flatten(layers: &[Dense]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend(l.weights.iter().copied());
        out.extend(l.bias.iter().copied());
    }
    out
}

/// Activations kept from a batched forward pass.
pub struct ForwardCache {
    /// `activations[0]` is the input; the last entry is the output.
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("network has layers")
    }
}

impl QNetwork {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng>(widths: &[usize], rng: &mut R) -> Self {
        assert!(widths.len() >= 2, "need input and output widths");
        Self {
            layers: widths
                .windows(2)
                .map(|w| Dense::glorot(w[0], w[1], rng))
                .collect(),
        }
    }

    pub fn zeros(widths: &[usize]) -> Self {
        assert!(widths.len() >= 2, "need input and output widths");
        Self {
            layers: widths
                .windows(2)
                .map(|w| Dense::zeros(w[0], w[1]))
                .collect(),
        }
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_width()];
        w.extend(self.layers.iter().map(|l| l.bias.len()));
        w
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().bias.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_params(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.param_count());
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
    }

    pub fn forward_cached(&self, inputs: ArrayView2<f64>) -> ForwardCache {
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(inputs.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = activations[i].dot(&layer.weights);
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            activations.push(z);
        }
        ForwardCache { activations }
    }

    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>, DqnError> {
        if inputs.ncols() != self.input_width() {
            return Err(DqnError::Dimension {
                expected: self.input_width(),
                got: inputs.ncols(),
            });
        }
        Ok(self.forward_cached(inputs).activations.pop().unwrap())
    }

    /// Q-values for a single state.
    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>, DqnError> {
        let view = ArrayView2::from_shape((1, state.len()), state).expect("contiguous");
        Ok(self.forward_batch(view)?.into_raw_vec_and_offset().0)
    }

    /// Backpropagates `grad_output` (d loss / d output, `batch x outputs`).
    pub fn backward(&self, cache: &ForwardCache, grad_output: Array2<f64>) -> Gradients {
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut delta = grad_output;
        for i in (0..self.layers.len()).rev() {
            let input = &cache.activations[i];
            let weights = input.t().dot(&delta);
            let bias = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut upstream = delta.dot(&self.layers[i].weights.t());
                // Rectifier derivative, read off the post-activation value.
                ndarray::Zip::from(&mut upstream)
                    .and(input)
                    .for_each(|g, &a| {
                        if a <= 0.0 {
                            *g = 0.0;
                        }
                    });
                delta = upstream;
            }
            grads.push(Dense { weights, bias });
        }
        grads.reverse();
        Gradients { layers: grads }
    }

    /// Gradient of the single output `q[action]` for one state.
    pub fn output_gradient(&self, state: &[f64], action: usize) -> Result<Gradients, DqnError> {
        if state.len() != self.input_width() {
            return Err(DqnError::Dimension {
                expected: self.input_width(),
                got: state.len(),
            });
        }
        let view = ArrayView2::from_shape((1, state.len()), state).expect("contiguous");
        let cache = self.forward_cached(view);
        let mut g = Array2::zeros((1, self.output_width()));
        g[[0, action]] = 1.0;
        Ok(self.backward(&cache, g))
    }
}

/// Lowest index among the maximal values.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::stream;

    #[test]
    fn zero_weights_give_zero_output() {
        let net = QNetwork::zeros(&[4, 8, 3]);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn identity_net() {
        let mut net = QNetwork::zeros(&[1, 1]);
        net.layers[0].weights[[0, 0]] = 1.0;
        assert_eq!(net.forward(&[-3.5]).unwrap(), vec![-3.5]);
    }

    #[test]
    fn dimension_mismatch() {
        let net = QNetwork::zeros(&[4, 3]);
        assert_eq!(
            net.forward(&[1.0]),
            Err(DqnError::Dimension {
                expected: 4,
                got: 1
            })
        );
    }

    #[test]
    fn widths_and_params() {
        let mut rng = stream(1, "net");
        let net = QNetwork::new(&[6, 64, 256, 64, 25], &mut rng);
        assert_eq!(net.widths(), vec![6, 64, 256, 64, 25]);
        let p = net.params();
        assert_eq!(p.len(), net.param_count());
        let limit = (6.0f64 / (6 + 64) as f64).sqrt();
        assert!(net.layers[0].weights.iter().all(|w| w.abs() <= limit));
        let mut other = QNetwork::zeros(&net.widths());
        other.set_params(&p);
        assert_eq!(other, net);
    }

    #[test]
    fn output_gradient_matches_central_differences() {
        let mut rng = stream(2, "net");
        let mut net = QNetwork::new(&[3, 5, 4, 2], &mut rng);
        for l in &mut net.layers {
            l.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        let state = [0.3, -0.7, 1.1];
        for action in 0..2 {
            let analytic = net.output_gradient(&state, action).unwrap().flatten();
            let base = net.params();
            let h = 1e-5;
            for i in 0..base.len() {
                let mut p = base.clone();
                p[i] += h;
                net.set_params(&p);
                let up = net.forward(&state).unwrap()[action];
                p[i] -= 2.0 * h;
                net.set_params(&p);
                let down = net.forward(&state).unwrap()[action];
                let numeric = (up - down) / (2.0 * h);
                let scale = analytic[i].abs().max(numeric.abs()).max(1e-6);
                assert!(
                    (analytic[i] - numeric).abs() / scale < 1e-4,
                    "param {i}: {} vs {numeric}",
                    analytic[i]
                );
            }
            net.set_params(&base);
        }
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0]), 0);
    }
}
