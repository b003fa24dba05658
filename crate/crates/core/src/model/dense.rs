//! Small dense-algebra kernels over flat row-major slices.

/// Dot product over eight independent partial sums so the loop vectorises.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `out += W·x` for `W` of shape `rows × x.len()`.
#[inline]
pub(crate) fn matvec_add(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += Wᵀ·d` for `W` of shape `d.len() × out.len()`.
#[inline]
pub(crate) fn matvec_t_add(w: &[f64], d: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (row, &di) in w.chunks_exact(cols).zip(d) {
        if di != 0.0 {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * di;
            }
        }
    }
}

/// `G += d·xᵀ`.
#[inline]
pub(crate) fn outer_add(g: &mut [f64], d: &[f64], x: &[f64]) {
    let cols = x.len();
    for (row, &di) in g.chunks_exact_mut(cols).zip(d) {
        if di != 0.0 {
            for (gi, xi) in row.iter_mut().zip(x) {
                *gi += di * xi;
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Uniform `±1/√fan_in` initialisation rounded to `f32` precision.
pub(crate) fn fan_in_uniform<R: rand::Rng>(rng: &mut R, out: &mut [f64], fan_in: usize) {
    let bound = 1.0 / libm::sqrt(fan_in as f64);
    for v in out {
        *v = (((2.0 * rng.gen::<f64>() - 1.0) * bound) as f32) as f64;
    }
}
