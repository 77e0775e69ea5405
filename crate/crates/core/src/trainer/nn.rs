//! Tanh multilayer perceptrons over a flat parameter vector.
//!
//! Every sample is evaluated independently with a fixed reduction order, so a
//! sample's output does not depend on which batch it is evaluated in.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Dot product with four fixed accumulation lanes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Location of one MLP inside a flat parameter vector. Each layer stores a
/// row-major `[out][in]` weight matrix followed by `out` biases. Hidden layers
/// use tanh; the output layer is linear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpLayout {
    sizes: Vec<usize>,
    offset: usize,
}

impl MlpLayout {
    pub fn new(input: usize, hidden: &[usize], output: usize, offset: usize) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self { sizes, offset }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input(&self) -> usize {
        self.sizes[0]
    }

    pub fn output(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn end(&self) -> usize {
        self.offset + self.num_params()
    }

    /// `(weight offset, bias offset, fan in, fan out)` of layer `l`.
    pub fn layer(&self, l: usize) -> (usize, usize, usize, usize) {
        let mut off = self.offset;
        for w in self.sizes.windows(2).take(l) {
            off += w[0] * w[1] + w[1];
        }
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        (off, off + n_in * n_out, n_in, n_out)
    }

    /// Gaussian init with std `gain / sqrt(fan_in)`; `output_gain` for the last layer. Biases are zero.
    pub fn init<R: Rng + ?Sized>(&self, params: &mut [f64], rng: &mut R, hidden_gain: f64, output_gain: f64) {
        let last = self.num_layers() - 1;
        for l in 0..self.num_layers() {
            let (w, b, n_in, n_out) = self.layer(l);
            let std = if l == last { output_gain } else { hidden_gain } / (n_in as f64).sqrt();
            for p in &mut params[w..w + n_in * n_out] {
                let z: f64 = StandardNormal.sample(rng);
                *p = std * z;
            }
            params[b..b + n_out].fill(0.0);
        }
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let mut cache = Vec::new();
        self.forward_cached(params, x, &mut cache)
    }

    /// Forward pass that keeps every layer input in `cache` for [`Self::backward`].
    pub fn forward_cached(&self, params: &[f64], x: &[f64], cache: &mut Vec<Vec<f64>>) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input());
        cache.clear();
        cache.push(x.to_vec());
        let last = self.num_layers() - 1;
        for l in 0..self.num_layers() {
            let (w, b, n_in, n_out) = self.layer(l);
            let input = cache.last().expect("input pushed");
            let mut out = vec![0.0; n_out];
            for (o, v) in out.iter_mut().enumerate() {
                let row = &params[w + o * n_in..w + (o + 1) * n_in];
                let z = dot(row, input) + params[b + o];
                *v = if l == last { z } else { z.tanh() };
            }
            if l == last {
                return out;
            }
            cache.push(out);
        }
        unreachable!("loop returns on the last layer")
    }

    /// Accumulates `d loss / d params` into `grad` (same indexing as `params`)
    /// given `d loss / d output` and the cache of the matching forward pass.
    pub fn backward(&self, params: &[f64], cache: &[Vec<f64>], grad_out: &[f64], grad: &mut [f64]) {
        let mut delta = grad_out.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (w, b, n_in, n_out) = self.layer(l);
            let input = &cache[l];
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    axpy(d, input, &mut grad[w + o * n_in..w + (o + 1) * n_in]);
                }
                grad[b + o] += d;
            }
            if l == 0 {
                break;
            }
            let mut prev = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, &params[w + o * n_in..w + (o + 1) * n_in], &mut prev);
                }
            }
            // The input of layer l is the tanh output of layer l - 1.
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_counts() {
        let l = MlpLayout::new(3, &[4, 2], 1, 10);
        assert_eq!(l.num_params(), 3 * 4 + 4 + 4 * 2 + 2 + 2 + 1);
        assert_eq!(l.end(), 10 + l.num_params());
        assert_eq!(l.layer(1), (10 + 16, 10 + 16 + 8, 4, 2));
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.3 - 1.0).collect();
        let b: Vec<f64> = (0..11).map(|i| (i as f64).sin()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let layout = MlpLayout::new(3, &[5, 4], 2, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = vec![0.0; layout.num_params()];
        layout.init(&mut params, &mut rng, 1.0, 1.0);
        for p in params.iter_mut() {
            *p += 0.05;
        }
        let x = [0.3, -0.7, 1.1];
        let w = [0.4, -1.3];
        let loss = |p: &[f64]| dot(&layout.forward(p, &x), &w);
        let mut cache = Vec::new();
        layout.forward_cached(&params, &x, &mut cache);
        let mut grad = vec![0.0; params.len()];
        layout.backward(&params, &cache, &w, &mut grad);
        for i in 0..params.len() {
            let h = 1e-6;
            let mut pp = params.clone();
            pp[i] += h;
            let mut pm = params.clone();
            pm[i] -= h;
            let fd = (loss(&pp) - loss(&pm)) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-7 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", grad[i]);
        }
    }
}
