//! Single-layer LSTM with an affine readout, batched over independent
//! sequences. Gate blocks are stacked `[input, forget, output, candidate]`.

use ndarray::{s, Array1, Array2, Array3, ArrayView2, ArrayView3, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution};

use crate::error::{Error, Result};

/// Every trainable tensor of the network. Also used for gradients and for the
/// optimiser moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    /// `4H x F`
    pub w_x: Array2<f64>,
    /// `4H x H`
    pub w_h: Array2<f64>,
    /// `4H`
    pub b: Array1<f64>,
    /// `D x H`
    pub w_y: Array2<f64>,
    /// `D`
    pub b_y: Array1<f64>,
}

pub const TENSOR_NAMES: [&str; 5] = ["w_x", "w_h", "b", "w_y", "b_y"];

impl Weights {
    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        let g = 4 * hidden_dim;
        Self {
            w_x: Array2::zeros((g, input_dim)),
            w_h: Array2::zeros((g, hidden_dim)),
            b: Array1::zeros(g),
            w_y: Array2::zeros((output_dim, hidden_dim)),
            b_y: Array1::zeros(output_dim),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.hidden_dim(), self.output_dim())
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_h.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w_y.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn slices(&self) -> [&[f64]; 5] {
        fn f(o: Option<&[f64]>) -> &[f64] {
            o.expect("standard layout")
        }
        [
            f(self.w_x.as_slice()),
            f(self.w_h.as_slice()),
            f(self.b.as_slice()),
            f(self.w_y.as_slice()),
            f(self.b_y.as_slice()),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 5] {
        fn f(o: Option<&mut [f64]>) -> &mut [f64] {
            o.expect("standard layout")
        }
        [
            f(self.w_x.as_slice_mut()),
            f(self.w_h.as_slice_mut()),
            f(self.b.as_slice_mut()),
            f(self.w_y.as_slice_mut()),
            f(self.b_y.as_slice_mut()),
        ]
    }

    pub fn scale(&mut self, k: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|v| *v *= k);
        }
    }

    pub fn norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Order-sensitive hash of the exact bit patterns.
    fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for s in self.slices() {
            for v in s {
                h ^= v.to_bits();
                h = h.wrapping_mul(0x0100_0000_01b3).rotate_left(5);
            }
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub weights: Weights,
    pub dropout_rate: f64,
}

impl LstmParams {
    /// Uniform `±1/sqrt(H)` weights, zero biases except a forget-gate bias of 1.
    pub fn init(input_dim: usize, hidden_dim: usize, output_dim: usize, dropout_rate: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let mut weights = Weights::zeros(input_dim, hidden_dim, output_dim);
        for m in [&mut weights.w_x, &mut weights.w_h, &mut weights.w_y] {
            m.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        weights
            .b
            .slice_mut(s![hidden_dim..2 * hidden_dim])
            .fill(1.0);
        Self {
            weights,
            dropout_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        let (h, f, d) = (w.hidden_dim(), w.input_dim(), w.output_dim());
        if w.w_x.dim() != (4 * h, f)
            || w.w_h.dim() != (4 * h, h)
            || w.b.len() != 4 * h
            || w.w_y.dim() != (d, h)
            || w.b_y.len() != d
        {
            return Err(Error::Shape("inconsistent LSTM tensor shapes".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout rate {}", self.dropout_rate)));
        }
        if !w.all_finite() {
            return Err(Error::NonFinite("LSTM weights".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout masks are drawn from a generator seeded with `seed`.
    Train { seed: u64 },
}

/// Activations of one forward pass, consumed by [`lstm_backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    fingerprint: u64,
    dims: (usize, usize, usize),
    x: Array3<f64>,
    /// `T + 1` hidden states, the first being the zero initial state.
    h: Vec<Array2<f64>>,
    c: Vec<Array2<f64>>,
    /// activated gates `B x 4H` per step
    gates: Vec<Array2<f64>>,
    tanh_c: Vec<Array2<f64>>,
    /// inverted-dropout scale per unit, `None` in Eval mode
    masks: Option<Vec<Array2<f64>>>,
    h_drop: Vec<Array2<f64>>,
}

impl ForwardCache {
    /// Activated gates at step `t`, `B x 4H`.
    pub fn gates(&self, t: usize) -> ArrayView2<'_, f64> {
        self.gates[t].view()
    }

    pub fn hidden(&self, t: usize) -> ArrayView2<'_, f64> {
        self.h[t + 1].view()
    }

    pub fn cell(&self, t: usize) -> ArrayView2<'_, f64> {
        self.c[t + 1].view()
    }

    /// Readout input at step `t` (hidden state after dropout).
    pub fn readout_input(&self, t: usize) -> ArrayView2<'_, f64> {
        self.h_drop[t].view()
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Runs a batch of sequences `x` of shape `T x B x F` from zero initial state.
/// Returns outputs `T x B x D`.
pub fn lstm_forward_batch(params: &LstmParams, x: ArrayView3<'_, f64>, mode: Mode) -> Result<(Array3<f64>, ForwardCache)> {
    let w = &params.weights;
    let (t_len, batch, f) = x.dim();
    let (h_dim, d) = (w.hidden_dim(), w.output_dim());
    if f != w.input_dim() {
        return Err(Error::Shape(format!("input has {f} features, network expects {}", w.input_dim())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("LSTM input".into()));
    }

    let mut mask_rng = match mode {
        Mode::Train { seed } if params.dropout_rate > 0.0 => Some((
            ChaCha8Rng::seed_from_u64(seed),
            Bernoulli::new(1.0 - params.dropout_rate).map_err(|e| Error::Config(e.to_string()))?,
        )),
        _ => None,
    };
    let keep_scale = 1.0 / (1.0 - params.dropout_rate);

    let mut out = Array3::zeros((t_len, batch, d));
    let mut h = Vec::with_capacity(t_len + 1);
    let mut c = Vec::with_capacity(t_len + 1);
    let mut gates = Vec::with_capacity(t_len);
    let mut tanh_c = Vec::with_capacity(t_len);
    let mut h_drop = Vec::with_capacity(t_len);
    let mut masks = mask_rng.as_ref().map(|_| Vec::with_capacity(t_len));
    h.push(Array2::zeros((batch, h_dim)));
    c.push(Array2::zeros((batch, h_dim)));

    let w_xt = w.w_x.t();
    let w_ht = w.w_h.t();
    let w_yt = w.w_y.t();
    for t in 0..t_len {
        let mut z = x.index_axis(Axis(0), t).dot(&w_xt);
        z += &h[t].dot(&w_ht);
        z += &w.b;
        z.slice_mut(s![.., ..3 * h_dim]).mapv_inplace(sigmoid);
        z.slice_mut(s![.., 3 * h_dim..]).mapv_inplace(f64::tanh);

        let (i, fg, o, g) = (
            z.slice(s![.., ..h_dim]),
            z.slice(s![.., h_dim..2 * h_dim]),
            z.slice(s![.., 2 * h_dim..3 * h_dim]),
            z.slice(s![.., 3 * h_dim..]),
        );
        let mut c_t = Array2::zeros((batch, h_dim));
        Zip::from(&mut c_t)
            .and(&fg)
            .and(&c[t])
            .and(&i)
            .and(&g)
            .for_each(|ct, &fv, &cp, &iv, &gv| *ct = fv * cp + iv * gv);
        let tc = c_t.mapv(f64::tanh);
        let h_t = &o * &tc;

        let hd = match (&mut mask_rng, &mut masks) {
            (Some((rng, bern)), Some(ms)) => {
                let m = Array2::from_shape_simple_fn((batch, h_dim), || {
                    if bern.sample(rng) {
                        keep_scale
                    } else {
                        0.0
                    }
                });
                let hd = &h_t * &m;
                ms.push(m);
                hd
            }
            _ => h_t.clone(),
        };
        let mut y = hd.dot(&w_yt);
        y += &w.b_y;
        out.index_axis_mut(Axis(0), t).assign(&y);

        gates.push(z);
        tanh_c.push(tc);
        c.push(c_t);
        h.push(h_t);
        h_drop.push(hd);
    }

    let cache = ForwardCache {
        fingerprint: w.fingerprint(),
        dims: (t_len, batch, f),
        x: x.to_owned(),
        h,
        c,
        gates,
        tanh_c,
        masks,
        h_drop,
    };
    Ok((out, cache))
}

/// Single-sequence forward pass, `x` of shape `T x F`.
pub fn lstm_forward(params: &LstmParams, x: ArrayView2<'_, f64>, mode: Mode) -> Result<(Array2<f64>, ForwardCache)> {
    let (t_len, f) = x.dim();
    let x3 = x.to_shape((t_len, 1, f)).map_err(|e| Error::Shape(e.to_string()))?;
    let (y, cache) = lstm_forward_batch(params, x3.view(), mode)?;
    let d = y.dim().2;
    let y2 = y
        .into_shape_with_order((t_len, d))
        .map_err(|e| Error::Shape(e.to_string()))?;
    Ok((y2, cache))
}

/// Backpropagation through time over the whole cached window.
/// `d_out` is the loss gradient with respect to the outputs, `T x B x D`.
pub fn lstm_backward(params: &LstmParams, cache: &ForwardCache, d_out: ArrayView3<'_, f64>) -> Result<Weights> {
    let w = &params.weights;
    if cache.fingerprint != w.fingerprint() {
        return Err(Error::Shape("forward cache was produced by different parameters".into()));
    }
    let (t_len, batch, _) = cache.dims;
    if d_out.dim() != (t_len, batch, w.output_dim()) {
        return Err(Error::Shape(format!(
            "output gradient has shape {:?}, expected {:?}",
            d_out.dim(),
            (t_len, batch, w.output_dim())
        )));
    }
    let h_dim = w.hidden_dim();
    let mut grads = w.zeros_like();
    let mut dh_next = Array2::<f64>::zeros((batch, h_dim));
    let mut dc_next = Array2::<f64>::zeros((batch, h_dim));
    let mut dz = Array2::<f64>::zeros((batch, 4 * h_dim));

    for t in (0..t_len).rev() {
        let dy = d_out.index_axis(Axis(0), t);
        grads.w_y += &dy.t().dot(&cache.h_drop[t]);
        grads.b_y += &dy.sum_axis(Axis(0));

        let mut dh = dy.dot(&w.w_y);
        if let Some(ms) = &cache.masks {
            dh *= &ms[t];
        }
        dh += &dh_next;

        let gates = &cache.gates[t];
        let (i, fg, o, g) = (
            gates.slice(s![.., ..h_dim]),
            gates.slice(s![.., h_dim..2 * h_dim]),
            gates.slice(s![.., 2 * h_dim..3 * h_dim]),
            gates.slice(s![.., 3 * h_dim..]),
        );
        let tc = &cache.tanh_c[t];
        let c_prev = &cache.c[t];

        // dc = dh * o * (1 - tanh(c)^2) + dc_next
        let mut dc = Array2::zeros((batch, h_dim));
        Zip::from(&mut dc)
            .and(&dh)
            .and(&o)
            .and(tc)
            .and(&dc_next)
            .for_each(|dcv, &dhv, &ov, &tcv, &dn| *dcv = dhv * ov * (1.0 - tcv * tcv) + dn);

        {
            let (mut dzi, rest) = dz.view_mut().split_at(Axis(1), h_dim);
            let (mut dzf, rest) = rest.split_at(Axis(1), h_dim);
            let (mut dzo, mut dzg) = rest.split_at(Axis(1), h_dim);
            Zip::from(&mut dzi)
                .and(&dc)
                .and(&g)
                .and(&i)
                .for_each(|d, &dcv, &gv, &iv| *d = dcv * gv * iv * (1.0 - iv));
            Zip::from(&mut dzf)
                .and(&dc)
                .and(c_prev)
                .and(&fg)
                .for_each(|d, &dcv, &cp, &fv| *d = dcv * cp * fv * (1.0 - fv));
            Zip::from(&mut dzo)
                .and(&dh)
                .and(tc)
                .and(&o)
                .for_each(|d, &dhv, &tcv, &ov| *d = dhv * tcv * ov * (1.0 - ov));
            Zip::from(&mut dzg)
                .and(&dc)
                .and(&i)
                .and(&g)
                .for_each(|d, &dcv, &iv, &gv| *d = dcv * iv * (1.0 - gv * gv));
        }

        grads.w_x += &dz.t().dot(&cache.x.index_axis(Axis(0), t));
        grads.w_h += &dz.t().dot(&cache.h[t]);
        grads.b += &dz.sum_axis(Axis(0));

        dh_next = dz.dot(&w.w_h);
        dc_next = &dc * &fg;
    }
    Ok(grads)
}

/// Mean squared error over every element and its gradient with respect to
/// `pred`. Rows `t < burn_in` along the first axis are excluded.
pub fn mse_loss(pred: ArrayView3<'_, f64>, target: ArrayView3<'_, f64>, burn_in: usize) -> Result<(f64, Array3<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::Shape(format!("{:?} vs {:?}", pred.dim(), target.dim())));
    }
    let (t_len, b, d) = pred.dim();
    let used = t_len.saturating_sub(burn_in);
    let n = (used * b * d) as f64;
    let mut grad = Array3::zeros(pred.dim());
    if used == 0 {
        return Ok((0.0, grad));
    }
    let p = pred.slice(s![burn_in.., .., ..]);
    let y = target.slice(s![burn_in.., .., ..]);
    let mut loss = 0.0;
    Zip::from(grad.slice_mut(s![burn_in.., .., ..]))
        .and(&p)
        .and(&y)
        .for_each(|g, &pv, &yv| {
            let e = pv - yv;
            loss += e * e;
            *g = 2.0 * e / n;
        });
    Ok((loss / n, grad))
}
