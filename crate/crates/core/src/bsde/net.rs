//! Minimal dense feed-forward approximator with tanh hidden layers and a
//! linear scalar output, operating on an externally owned flat parameter
//! slice so the optimizer can treat all trainables uniformly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub(crate) struct NetShape {
    /// Layer widths, input first, scalar output last.
    pub sizes: Vec<usize>,
}

impl NetShape {
    pub fn new(inputs: usize, width: usize, hidden_layers: usize) -> Self {
        let mut sizes = Vec::with_capacity(hidden_layers + 2);
        sizes.push(inputs);
        for _ in 0..hidden_layers {
            sizes.push(width);
        }
        sizes.push(1);
        NetShape { sizes }
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Total activation storage needed by one forward pass.
    pub fn activation_len(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Xavier-uniform weights, zero biases; the output layer is scaled down
    /// so the initial map is close to zero.
    pub fn init_params(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_params());
        let mut offset = 0;
        let n_layers = self.sizes.len() - 1;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let scale = if l == n_layers - 1 { 0.05 } else { 1.0 };
            for w in out[offset..offset + fan_in * fan_out].iter_mut() {
                *w = scale * a * (2.0 * rng.random::<f64>() - 1.0);
            }
            offset += fan_in * fan_out;
            for b in out[offset..offset + fan_out].iter_mut() {
                *b = 0.0;
            }
            offset += fan_out;
        }
    }

    /// Forward pass; fills `activations` (input followed by each layer's
    /// outputs) and returns the scalar output.
    pub fn forward(&self, params: &[f64], input: &[f64], activations: &mut [f64]) -> f64 {
        debug_assert_eq!(input.len(), self.sizes[0]);
        debug_assert_eq!(activations.len(), self.activation_len());
        activations[..input.len()].copy_from_slice(input);
        let mut act_in = 0usize;
        let mut act_out = input.len();
        let mut offset = 0usize;
        let n_layers = self.sizes.len() - 1;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let last = l == n_layers - 1;
            for j in 0..n_out {
                let w_row = &params[offset + j * n_in..offset + (j + 1) * n_in];
                let bias = params[offset + n_in * n_out + j];
                let mut z = bias;
                for (wi, ai) in w_row.iter().zip(&activations[act_in..act_in + n_in]) {
                    z += wi * ai;
                }
                activations[act_out + j] = if last { z } else { z.tanh() };
            }
            offset += n_in * n_out + n_out;
            act_in = act_out;
            act_out += n_out;
        }
        activations[activations.len() - 1]
    }

    /// Backward pass for the scalar output: accumulates parameter gradients
    /// scaled by `d_out` into `grad` (same packing as `params`), using the
    /// activations saved by [`forward`].
    pub fn backward(&self, params: &[f64], activations: &[f64], d_out: f64, grad: &mut [f64]) {
        let n_layers = self.sizes.len() - 1;
        // offsets of each layer's parameters and input activations
        let mut p_offsets = Vec::with_capacity(n_layers);
        let mut a_offsets = Vec::with_capacity(n_layers + 1);
        let mut p_acc = 0usize;
        let mut a_acc = 0usize;
        for l in 0..n_layers {
            p_offsets.push(p_acc);
            a_offsets.push(a_acc);
            p_acc += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
            a_acc += self.sizes[l];
        }
        a_offsets.push(a_acc);

        let mut delta = vec![d_out];
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let p0 = p_offsets[l];
            let a_in = &activations[a_offsets[l]..a_offsets[l] + n_in];
            let a_out = &activations[a_offsets[l + 1]..a_offsets[l + 1] + n_out];
            let last = l == n_layers - 1;
            // delta currently holds d loss / d activation of this layer's
            // output; convert to d/d pre-activation
            let dz: Vec<f64> = delta
                .iter()
                .zip(a_out)
                .map(|(d, a)| if last { *d } else { d * (1.0 - a * a) })
                .collect();
            for (j, dz_j) in dz.iter().enumerate() {
                let row = p0 + j * n_in;
                for i in 0..n_in {
                    grad[row + i] += dz_j * a_in[i];
                }
                grad[p0 + n_in * n_out + j] += dz_j;
            }
            if l > 0 {
                let mut d_prev = vec![0.0f64; n_in];
                for (j, dz_j) in dz.iter().enumerate() {
                    let row = p0 + j * n_in;
                    for (i, dp) in d_prev.iter_mut().enumerate() {
                        *dp += params[row + i] * dz_j;
                    }
                }
                delta = d_prev;
            }
        }
    }
}

/// Standard Adam state over a flat parameter vector.
#[derive(Debug, Clone)]
pub(crate) struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
