//! Single-layer GRU unrolled over a fixed window, scalar head on the last
//! hidden state. The hidden state starts at zero for every window.
//!
//! ```text
//! z  = σ(Wz·x + Uz·h + bz)
//! r  = σ(Wr·x + Ur·h + br)
//! h~ = tanh(Wh·x + Uh·(r ⊙ h) + bh)
//! h' = (1 - z) ⊙ h + z ⊙ h~
//! y  = wo·h_T + bo
//! ```

use alloc::vec::Vec;

use super::dense::{fan_in_uniform, matvec_add, matvec_t_add, outer_add, sigmoid};

/// One gate's parameter offsets: input weights, recurrent weights, bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Gate {
    w: usize,
    u: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    update: Gate,
    reset: Gate,
    candidate: Gate,
    wo: usize,
    bo: usize,
    len: usize,
}

impl Layout {
    fn new(input: usize, hidden: usize) -> Self {
        let gate = |start: usize| Gate { w: start, u: start + hidden * input, b: start + hidden * (input + hidden) };
        let stride = hidden * (input + hidden + 1);
        let wo = 3 * stride;
        Self { update: gate(0), reset: gate(stride), candidate: gate(2 * stride), wo, bo: wo + hidden, len: wo + hidden + 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gru {
    input: usize,
    hidden: usize,
    layout: Layout,
    pub(crate) params: Vec<f64>,
}

struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    rh: Vec<f64>,
    c: Vec<f64>,
}

pub(crate) struct GruCache {
    steps: Vec<StepCache>,
    h_last: Vec<f64>,
}

impl Gru {
    pub fn param_count_for(input: usize, hidden: usize) -> usize {
        Layout::new(input, hidden).len
    }

    pub fn new<R: rand::Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let l = Layout::new(input, hidden);
        let mut params = alloc::vec![0.0; l.len];
        for g in [l.update, l.reset, l.candidate] {
            fan_in_uniform(rng, &mut params[g.w..g.u], input);
            fan_in_uniform(rng, &mut params[g.u..g.b], hidden);
        }
        fan_in_uniform(rng, &mut params[l.wo..l.bo], hidden);
        Self { input, hidden, layout: l, params }
    }

    pub fn from_params(input: usize, hidden: usize, params: Vec<f64>) -> Option<Self> {
        let layout = Layout::new(input, hidden);
        (params.len() == layout.len).then_some(Self { input, hidden, layout, params })
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn pre_activation(&self, g: Gate, x: &[f64], h: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let mut a = p[g.b..g.b + self.hidden].to_vec();
        matvec_add(&p[g.w..g.u], x, &mut a);
        matvec_add(&p[g.u..g.b], h, &mut a);
        a
    }

    pub(crate) fn forward_cached(&self, window: &[&[f32]]) -> (f64, GruCache) {
        let l = &self.layout;
        let mut h = alloc::vec![0.0; self.hidden];
        let mut steps = Vec::with_capacity(window.len());
        for frame in window {
            let x: Vec<f64> = frame.iter().map(|&v| v as f64).collect();
            let z: Vec<f64> = self.pre_activation(l.update, &x, &h).into_iter().map(sigmoid).collect();
            let r: Vec<f64> = self.pre_activation(l.reset, &x, &h).into_iter().map(sigmoid).collect();
            let rh: Vec<f64> = r.iter().zip(&h).map(|(a, b)| a * b).collect();
            let c: Vec<f64> =
                self.pre_activation(l.candidate, &x, &rh).into_iter().map(libm::tanh).collect();
            let next: Vec<f64> =
                (0..self.hidden).map(|i| (1.0 - z[i]) * h[i] + z[i] * c[i]).collect();
            steps.push(StepCache { x, h_prev: core::mem::replace(&mut h, next), z, r, rh, c });
        }
        let p = &self.params;
        let out = p[l.bo] + p[l.wo..l.bo].iter().zip(&h).map(|(w, v)| w * v).sum::<f64>();
        (out, GruCache { steps, h_last: h })
    }

    pub fn forward(&self, window: &[&[f32]]) -> f64 {
        self.forward_cached(window).0
    }

    /// Backpropagation through time; accumulates into `grad`.
    pub(crate) fn backward(&self, cache: &GruCache, d_out: f64, grad: &mut [f64]) {
        let l = &self.layout;
        let p = &self.params;
        let n = self.hidden;
        grad[l.bo] += d_out;
        for (g, h) in grad[l.wo..l.bo].iter_mut().zip(&cache.h_last) {
            *g += d_out * h;
        }
        let mut dh: Vec<f64> = p[l.wo..l.bo].iter().map(|w| w * d_out).collect();
        for s in cache.steps.iter().rev() {
            let mut dh_prev: Vec<f64> = (0..n).map(|i| dh[i] * (1.0 - s.z[i])).collect();

            let d_cand: Vec<f64> =
                (0..n).map(|i| dh[i] * s.z[i] * (1.0 - s.c[i] * s.c[i])).collect();
            let d_update: Vec<f64> = (0..n)
                .map(|i| dh[i] * (s.c[i] - s.h_prev[i]) * s.z[i] * (1.0 - s.z[i]))
                .collect();

            let cg = l.candidate;
            outer_add(&mut grad[cg.w..cg.u], &d_cand, &s.x);
            outer_add(&mut grad[cg.u..cg.b], &d_cand, &s.rh);
            for (g, d) in grad[cg.b..cg.b + n].iter_mut().zip(&d_cand) {
                *g += d;
            }
            let mut d_rh = alloc::vec![0.0; n];
            matvec_t_add(&p[cg.u..cg.b], &d_cand, &mut d_rh);
            let d_reset: Vec<f64> = (0..n)
                .map(|i| d_rh[i] * s.h_prev[i] * s.r[i] * (1.0 - s.r[i]))
                .collect();
            for i in 0..n {
                dh_prev[i] += d_rh[i] * s.r[i];
            }

            for (g, d) in [(l.update, &d_update), (l.reset, &d_reset)] {
                outer_add(&mut grad[g.w..g.u], d, &s.x);
                outer_add(&mut grad[g.u..g.b], d, &s.h_prev);
                for (gb, di) in grad[g.b..g.b + n].iter_mut().zip(d.iter()) {
                    *gb += di;
                }
                matvec_t_add(&p[g.u..g.b], d, &mut dh_prev);
            }
            dh = dh_prev;
        }
    }
}
