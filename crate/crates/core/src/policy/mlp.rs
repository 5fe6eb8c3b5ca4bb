//! Dense tanh network with hand-written backpropagation.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::scalar::Scalar;

/// Fully connected network: tanh on hidden layers, identity on the output.
///
/// Parameters live in one flat vector, layer by layer, each layer's weight
/// matrix (`out x in`, row-major) followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<S> {
    sizes: Vec<usize>,
    params: Vec<S>,
}

/// Post-activation values of every layer from one forward pass.
#[derive(Debug, Clone)]
pub struct Trace<S> {
    activations: Vec<Vec<S>>,
}

impl<S: Scalar> Trace<S> {
    pub fn output(&self) -> &[S] {
        self.activations.last().expect("trace holds the input at least")
    }
}

impl<S: Scalar> Mlp<S> {
    pub fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(
            sizes.len() >= 2 && sizes.iter().all(|&s| s > 0),
            "bad layer sizes {sizes:?}"
        );
        Self {
            sizes: sizes.to_vec(),
            params: vec![S::zero(); Self::param_count(sizes)],
        }
    }

    /// Glorot-uniform weights, zero biases. The final layer's weights are
    /// multiplied by `output_gain` (zero gives an all-zero output layer).
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], output_gain: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        let layers = sizes.len() - 1;
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let gain = if l + 1 == layers { output_gain } else { 1.0 };
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            for w in &mut net.params[offset..offset + fan_in * fan_out] {
                *w = S::lit(gain * dist.sample(rng));
            }
            offset += fan_in * fan_out + fan_out;
        }
        net
    }

    pub fn from_params(sizes: &[usize], params: Vec<S>) -> Option<Self> {
        (sizes.len() >= 2 && params.len() == Self::param_count(sizes)).then(|| Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty sizes")
    }

    pub fn params(&self) -> &[S] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [S] {
        &mut self.params
    }

    /// Parameter slice of the output layer as `(weights, bias)`.
    pub fn output_layer_mut(&mut self) -> (&mut [S], &mut [S]) {
        let l = self.sizes.len() - 2;
        let offset = Self::param_count(&self.sizes[..=l]);
        let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
        let (w, rest) = self.params[offset..].split_at_mut(fan_in * fan_out);
        (w, &mut rest[..fan_out])
    }

    pub fn forward(&self, input: &[S]) -> Vec<S> {
        let mut trace = self.forward_trace(input);
        trace.activations.pop().expect("output layer present")
    }

    pub fn forward_trace(&self, input: &[S]) -> Trace<S> {
        assert_eq!(input.len(), self.input_dim(), "network input dimension");
        let layers = self.sizes.len() - 1;
        let mut activations = Vec::with_capacity(layers + 1);
        activations.push(input.to_vec());
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let prev = &activations[l];
            let mut out = Vec::with_capacity(fan_out);
            for (row, bias) in w.chunks_exact(fan_in).zip(b) {
                let mut z = *bias;
                for (wij, aj) in row.iter().zip(prev) {
                    z += *wij * *aj;
                }
                out.push(if l + 1 < layers { z.tanh() } else { z });
            }
            activations.push(out);
            offset += fan_in * fan_out + fan_out;
        }
        Trace { activations }
    }

    /// Accumulates `d loss / d params` into `grads` given `d loss / d output`.
    pub fn backward(&self, trace: &Trace<S>, grad_output: &[S], grads: &mut [S]) {
        assert_eq!(grads.len(), self.params.len());
        let layers = self.sizes.len() - 1;
        let mut delta = grad_output.to_vec();
        let mut offset = self.params.len();
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            offset -= fan_in * fan_out + fan_out;
            let prev = &trace.activations[l];
            let w = &self.params[offset..offset + fan_in * fan_out];
            let (gw, gb) = grads[offset..offset + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            for (i, d) in delta.iter().enumerate() {
                gb[i] += *d;
                for (g, a) in gw[i * fan_in..(i + 1) * fan_in].iter_mut().zip(prev) {
                    *g += *d * *a;
                }
            }
            if l > 0 {
                let mut next = vec![S::zero(); fan_in];
                for (i, d) in delta.iter().enumerate() {
                    for (n, wij) in next.iter_mut().zip(&w[i * fan_in..(i + 1) * fan_in]) {
                        *n += *d * *wij;
                    }
                }
                // prev is tanh output
                for (n, a) in next.iter_mut().zip(prev) {
                    *n *= S::one() - *a * *a;
                }
                delta = next;
            }
        }
    }
}
