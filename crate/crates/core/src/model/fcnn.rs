//! Two-hidden-layer ReLU regressor with a scalar linear head.

use alloc::vec::Vec;

use super::dense::{dot, fan_in_uniform, matvec_add, matvec_t_add, outer_add};
use super::Example;

/// Offsets of each parameter block inside the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    len: usize,
}

impl Layout {
    fn new(input: usize, h1: usize, h2: usize) -> Self {
        let w1 = 0;
        let b1 = w1 + h1 * input;
        let w2 = b1 + h1;
        let b2 = w2 + h2 * h1;
        let w3 = b2 + h2;
        let b3 = w3 + h2;
        Self { w1, b1, w2, b2, w3, b3, len: b3 + 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fcnn {
    input: usize,
    hidden: [usize; 2],
    layout: Layout,
    pub(crate) params: Vec<f64>,
}

pub(crate) struct FcnnCache {
    x: Vec<f64>,
    a1: Vec<f64>,
    h1: Vec<f64>,
    a2: Vec<f64>,
    h2: Vec<f64>,
}

impl Fcnn {
    pub fn param_count_for(input: usize, hidden: [usize; 2]) -> usize {
        Layout::new(input, hidden[0], hidden[1]).len
    }

    pub fn new<R: rand::Rng>(input: usize, hidden: [usize; 2], rng: &mut R) -> Self {
        let layout = Layout::new(input, hidden[0], hidden[1]);
        let mut params = alloc::vec![0.0; layout.len];
        let [h1, h2] = hidden;
        fan_in_uniform(rng, &mut params[layout.w1..layout.w2], input);
        fan_in_uniform(rng, &mut params[layout.w2..layout.w3], h1);
        fan_in_uniform(rng, &mut params[layout.w3..], h2);
        Self { input, hidden, layout, params }
    }

    /// Wraps an existing flat parameter vector; `None` if the length is wrong.
    pub fn from_params(input: usize, hidden: [usize; 2], params: Vec<f64>) -> Option<Self> {
        let layout = Layout::new(input, hidden[0], hidden[1]);
        (params.len() == layout.len).then_some(Self { input, hidden, layout, params })
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden(&self) -> [usize; 2] {
        self.hidden
    }

    pub(crate) fn forward_cached(&self, features: &[f32]) -> (f64, FcnnCache) {
        let x: Vec<f64> = features.iter().map(|&v| v as f64).collect();
        let l = &self.layout;
        let mut a1 = self.params[l.b1..l.w2].to_vec();
        matvec_add(&self.params[l.w1..l.b1], &x, &mut a1);
        self.head(x, a1)
    }

    /// Everything above the first pre-activation.
    fn head(&self, x: Vec<f64>, a1: Vec<f64>) -> (f64, FcnnCache) {
        let l = &self.layout;
        let p = &self.params;
        let n2 = self.hidden[1];
        let h1: Vec<f64> = a1.iter().map(|v| v.max(0.0)).collect();
        let mut a2 = p[l.b2..l.b2 + n2].to_vec();
        matvec_add(&p[l.w2..l.b2], &h1, &mut a2);
        let h2: Vec<f64> = a2.iter().map(|v| v.max(0.0)).collect();
        let out = p[l.b3] + p[l.w3..l.b3].iter().zip(&h2).map(|(w, h)| w * h).sum::<f64>();
        (out, FcnnCache { x, a1, h1, a2, h2 })
    }

    pub fn forward(&self, features: &[f32]) -> f64 {
        self.forward_cached(features).0
    }

    /// Accumulates `d_out · ∂out/∂θ` into `grad`.
    pub(crate) fn backward(&self, cache: &FcnnCache, d_out: f64, grad: &mut [f64]) {
        let d_a1 = self.backward_head(cache, d_out, grad);
        let l = &self.layout;
        outer_add(&mut grad[l.w1..l.b1], &d_a1, &cache.x);
    }

    /// Gradient of every block except the first weight matrix; returns the
    /// error at the first pre-activation.
    fn backward_head(&self, cache: &FcnnCache, d_out: f64, grad: &mut [f64]) -> Vec<f64> {
        let l = &self.layout;
        let p = &self.params;
        let [n1, n2] = self.hidden;
        grad[l.b3] += d_out;
        for (g, h) in grad[l.w3..l.b3].iter_mut().zip(&cache.h2) {
            *g += d_out * h;
        }
        let d_a2: Vec<f64> = (0..n2)
            .map(|j| if cache.a2[j] > 0.0 { d_out * p[l.w3 + j] } else { 0.0 })
            .collect();
        for (g, d) in grad[l.b2..l.w3].iter_mut().zip(&d_a2) {
            *g += d;
        }
        outer_add(&mut grad[l.w2..l.b2], &d_a2, &cache.h1);
        let mut d_h1 = alloc::vec![0.0; n1];
        matvec_t_add(&p[l.w2..l.b2], &d_a2, &mut d_h1);
        let d_a1: Vec<f64> =
            d_h1.iter().zip(&cache.a1).map(|(d, a)| if *a > 0.0 { *d } else { 0.0 }).collect();
        for (g, d) in grad[l.b1..l.w2].iter_mut().zip(&d_a1) {
            *g += d;
        }
        d_a1
    }

    /// MSE gradient of a whole minibatch, accumulated into `grad`; returns
    /// the sum of squared errors. Walks the first weight matrix row by row
    /// across the batch so each row is loaded once, giving the same sums
    /// as calling [`Self::backward`] per example.
    pub(crate) fn backward_batch(&self, batch: &[Example<'_>], grad: &mut [f64]) -> f64 {
        let l = &self.layout;
        let n = batch.len() as f64;
        let xs: Vec<Vec<f64>> = batch.iter().map(|e| e.inputs[0].iter().map(|&v| v as f64).collect()).collect();
        let mut a1s = alloc::vec![self.params[l.b1..l.w2].to_vec(); batch.len()];
        for (j, row) in self.params[l.w1..l.b1].chunks_exact(self.input).enumerate() {
            for (a1, x) in a1s.iter_mut().zip(&xs) {
                a1[j] += dot(row, x);
            }
        }
        let mut sum = 0.0;
        let mut caches = Vec::with_capacity(batch.len());
        let mut d_a1s = Vec::with_capacity(batch.len());
        for ((x, a1), ex) in xs.into_iter().zip(a1s).zip(batch) {
            let (y, cache) = self.head(x, a1);
            let err = y - ex.label;
            sum += err * err;
            d_a1s.push(self.backward_head(&cache, 2.0 * err / n, grad));
            caches.push(cache);
        }
        for (j, row) in grad[l.w1..l.b1].chunks_exact_mut(self.input).enumerate() {
            for (d_a1, cache) in d_a1s.iter().zip(&caches) {
                let d = d_a1[j];
                if d != 0.0 {
                    for (g, x) in row.iter_mut().zip(&cache.x) {
                        *g += d * x;
                    }
                }
            }
        }
        sum
    }
}
