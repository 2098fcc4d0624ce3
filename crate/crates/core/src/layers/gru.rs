//! Gated recurrent unit.
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
//! h' = (1 − z) ⊙ h + z ⊙ h̃
//! ```
//!
//! Works on plain slices: the recurrent loop is the hot path of the encoder.

use crate::error::{Error, Result};
use crate::tensor::{dot, sigmoid, xavier_init, Matrix, SeededRng};

#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_z: Matrix,
    pub u_z: Matrix,
    pub b_z: Matrix,
    pub w_r: Matrix,
    pub u_r: Matrix,
    pub b_r: Matrix,
    pub w_h: Matrix,
    pub u_h: Matrix,
    pub b_h: Matrix,
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Matrix::zeros(hidden, input);
        let u = || Matrix::zeros(hidden, hidden);
        let b = || Matrix::zeros(hidden, 1);
        GruParams {
            w_z: w(),
            u_z: u(),
            b_z: b(),
            w_r: w(),
            u_r: u(),
            b_r: b(),
            w_h: w(),
            u_h: u(),
            b_h: b(),
        }
    }

    pub fn xavier(input: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let mut p = Self::zeros(input, hidden);
        p.w_z = xavier_init(hidden, input, rng);
        p.u_z = xavier_init(hidden, hidden, rng);
        p.w_r = xavier_init(hidden, input, rng);
        p.u_r = xavier_init(hidden, hidden, rng);
        p.w_h = xavier_init(hidden, input, rng);
        p.u_h = xavier_init(hidden, hidden, rng);
        p
    }

    pub fn input_size(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_z.rows()
    }

    pub fn tensors(&self) -> [(&'static str, &Matrix); 9] {
        [
            ("w_z", &self.w_z),
            ("u_z", &self.u_z),
            ("b_z", &self.b_z),
            ("w_r", &self.w_r),
            ("u_r", &self.u_r),
            ("b_r", &self.b_r),
            ("w_h", &self.w_h),
            ("u_h", &self.u_h),
            ("b_h", &self.b_h),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Matrix); 9] {
        [
            ("w_z", &mut self.w_z),
            ("u_z", &mut self.u_z),
            ("b_z", &mut self.b_z),
            ("w_r", &mut self.w_r),
            ("u_r", &mut self.u_r),
            ("b_r", &mut self.b_r),
            ("w_h", &mut self.w_h),
            ("u_h", &mut self.u_h),
            ("b_h", &mut self.b_h),
        ]
    }

    fn check(&self) -> Result<()> {
        let (h, e) = (self.hidden_size(), self.input_size());
        for (_, m) in self.tensors() {
            let ok = m.shape() == (h, e) || m.shape() == (h, h) || m.shape() == (h, 1);
            if !ok {
                return Err(Error::shape("GruParams", (h, e), m.shape()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GruCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    h_tilde: Vec<f64>,
}

fn affine(w: &Matrix, x: &[f64], u: &Matrix, h: &[f64], b: &Matrix) -> Vec<f64> {
    (0..w.rows())
        .map(|i| dot(w.row(i), x) + dot(u.row(i), h) + b.data()[i])
        .collect()
}

/// `out += mᵀ v`
fn add_matvec_t(m: &Matrix, v: &[f64], out: &mut [f64]) {
    for (i, &vi) in v.iter().enumerate() {
        for (o, &w) in out.iter_mut().zip(m.row(i)) {
            *o += w * vi;
        }
    }
}

/// `m += a bᵀ`
fn add_outer(m: &mut Matrix, a: &[f64], b: &[f64]) {
    for (i, &ai) in a.iter().enumerate() {
        for (o, &bj) in m.row_mut(i).iter_mut().zip(b) {
            *o += ai * bj;
        }
    }
}

fn add_vec(m: &mut Matrix, a: &[f64]) {
    for (o, &v) in m.data_mut().iter_mut().zip(a) {
        *o += v;
    }
}

pub fn gru_cell_forward(x: &[f64], h_prev: &[f64], p: &GruParams) -> Result<(Vec<f64>, GruCache)> {
    if x.len() != p.input_size() || h_prev.len() != p.hidden_size() {
        return Err(Error::shape(
            "gru_cell_forward",
            (x.len(), h_prev.len()),
            (p.input_size(), p.hidden_size()),
        ));
    }
    let z: Vec<f64> = affine(&p.w_z, x, &p.u_z, h_prev, &p.b_z).into_iter().map(sigmoid).collect();
    let r: Vec<f64> = affine(&p.w_r, x, &p.u_r, h_prev, &p.b_r).into_iter().map(sigmoid).collect();
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let h_tilde: Vec<f64> = affine(&p.w_h, x, &p.u_h, &rh, &p.b_h).into_iter().map(f64::tanh).collect();
    let h: Vec<f64> = (0..h_prev.len())
        .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * h_tilde[i])
        .collect();
    let cache = GruCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        z,
        r,
        h_tilde,
    };
    Ok((h, cache))
}

/// Backpropagates `dh` through one step, accumulating parameter gradients
/// into `grads`. Returns `(dx, dh_prev)`.
pub fn gru_cell_backward(dh: &[f64], cache: &GruCache, p: &GruParams, grads: &mut GruParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let hidden = p.hidden_size();
    if dh.len() != hidden || cache.h_prev.len() != hidden || cache.x.len() != p.input_size() {
        return Err(Error::shape(
            "gru_cell_backward",
            (dh.len(), cache.x.len()),
            (hidden, p.input_size()),
        ));
    }
    let GruCache {
        x,
        h_prev,
        z,
        r,
        h_tilde,
    } = cache;

    let mut da_z = vec![0.0; hidden];
    let mut da_h = vec![0.0; hidden];
    let mut dh_prev = vec![0.0; hidden];
    for i in 0..hidden {
        da_z[i] = dh[i] * (h_tilde[i] - h_prev[i]) * z[i] * (1.0 - z[i]);
        da_h[i] = dh[i] * z[i] * (1.0 - h_tilde[i] * h_tilde[i]);
        dh_prev[i] = dh[i] * (1.0 - z[i]);
    }
    // Gradient w.r.t. r ⊙ h_prev.
    let mut d_rh = vec![0.0; hidden];
    add_matvec_t(&p.u_h, &da_h, &mut d_rh);
    let mut da_r = vec![0.0; hidden];
    for i in 0..hidden {
        da_r[i] = d_rh[i] * h_prev[i] * r[i] * (1.0 - r[i]);
        dh_prev[i] += d_rh[i] * r[i];
    }
    add_matvec_t(&p.u_z, &da_z, &mut dh_prev);
    add_matvec_t(&p.u_r, &da_r, &mut dh_prev);

    let mut dx = vec![0.0; x.len()];
    add_matvec_t(&p.w_z, &da_z, &mut dx);
    add_matvec_t(&p.w_r, &da_r, &mut dx);
    add_matvec_t(&p.w_h, &da_h, &mut dx);

    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    add_outer(&mut grads.w_z, &da_z, x);
    add_outer(&mut grads.u_z, &da_z, h_prev);
    add_vec(&mut grads.b_z, &da_z);
    add_outer(&mut grads.w_r, &da_r, x);
    add_outer(&mut grads.u_r, &da_r, h_prev);
    add_vec(&mut grads.b_r, &da_r);
    add_outer(&mut grads.w_h, &da_h, x);
    add_outer(&mut grads.u_h, &da_h, &rh);
    add_vec(&mut grads.b_h, &da_h);

    Ok((dx, dh_prev))
}

/// Runs the cell over `inputs` in order from `h0`. Returns the final state
/// and one cache per step.
pub fn gru_sequence_forward<'a, I>(inputs: I, h0: &[f64], p: &GruParams) -> Result<(Vec<f64>, Vec<GruCache>)>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    p.check()?;
    let mut h = h0.to_vec();
    let mut caches = Vec::new();
    for x in inputs {
        let (next, cache) = gru_cell_forward(x, &h, p)?;
        h = next;
        caches.push(cache);
    }
    Ok((h, caches))
}

/// Backpropagation through time from a gradient on the final state.
/// Returns parameter gradients, per-step input gradients (in forward order)
/// and the gradient w.r.t. the initial state.
pub fn gru_sequence_backward(
    dh_final: &[f64],
    caches: &[GruCache],
    p: &GruParams,
) -> Result<(GruParams, Vec<Vec<f64>>, Vec<f64>)> {
    let mut grads = GruParams::zeros(p.input_size(), p.hidden_size());
    let mut dxs = vec![Vec::new(); caches.len()];
    let mut dh = dh_final.to_vec();
    for (t, cache) in caches.iter().enumerate().rev() {
        let (dx, dh_prev) = gru_cell_backward(&dh, cache, p, &mut grads)?;
        dxs[t] = dx;
        dh = dh_prev;
    }
    Ok((grads, dxs, dh))
}
