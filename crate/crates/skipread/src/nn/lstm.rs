use super::ops::sigmoid;
use super::tensor::{axpy, Tensor};

/// Single LSTM cell. Gate rows are stacked in the order
/// input, forget, candidate, output — rows [0,H) of the weight matrices gate
/// the input, [H,2H) the forget path, [2H,3H) the candidate, [3H,4H) the
/// output.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// [4H, I]
    pub w_ih: Tensor,
    /// [4H, H]
    pub w_hh: Tensor,
    /// [4H]
    pub bias: Tensor,
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct LstmCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmCell {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            w_ih: Tensor::zeros(vec![4 * hidden_dim, input_dim]),
            w_hh: Tensor::zeros(vec![4 * hidden_dim, hidden_dim]),
            bias: Tensor::zeros(vec![4 * hidden_dim]),
        }
    }

    pub fn init_uniform(&mut self, rng: &mut crate::rng::Rng, bound: f64) {
        self.w_ih.init_uniform(rng, bound);
        self.w_hh.init_uniform(rng, bound);
        // biases start at zero
    }

    /// Fan-based init bound sqrt(6 / (fan_in + fan_out)).
    pub fn init_glorot(&mut self, rng: &mut crate::rng::Rng) {
        let b_ih = (6.0 / (self.input_dim + self.hidden_dim) as f64).sqrt();
        let b_hh = (6.0 / (2 * self.hidden_dim) as f64).sqrt();
        self.w_ih.init_uniform(rng, b_ih);
        self.w_hh.init_uniform(rng, b_hh);
    }

    /// One step: returns (h, c) and the cache for the backward pass.
    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>, LstmCache) {
        let hd = self.hidden_dim;
        assert_eq!(x.len(), self.input_dim);
        assert_eq!(h_prev.len(), hd);
        assert_eq!(c_prev.len(), hd);

        let mut z = self.w_ih.matvec(x);
        let zh = self.w_hh.matvec(h_prev);
        for (a, b) in z.iter_mut().zip(&zh) {
            *a += b;
        }
        for (a, b) in z.iter_mut().zip(&self.bias.data) {
            *a += b;
        }

        let i: Vec<f64> = z[0..hd].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[hd..2 * hd].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[2 * hd..3 * hd].iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * hd..4 * hd].iter().map(|&v| sigmoid(v)).collect();

        let mut c = vec![0.0; hd];
        for k in 0..hd {
            c[k] = f[k] * c_prev[k] + i[k] * g[k];
        }
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<f64> = (0..hd).map(|k| o[k] * tanh_c[k]).collect();

        let cache = LstmCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            g,
            o,
            tanh_c,
        };
        (h, c, cache)
    }

    /// Backward through one step. `dh`/`dc` are the gradients arriving at this
    /// step's outputs; gradients w.r.t. the weights accumulate into `grads`
    /// (a zeroed clone of the cell). Returns (dx, dh_prev, dc_prev).
    pub fn step_backward(
        &self,
        cache: &LstmCache,
        dh: &[f64],
        dc_in: &[f64],
        grads: &mut LstmCell,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hd = self.hidden_dim;
        let mut dz = vec![0.0; 4 * hd];
        let mut dc_prev = vec![0.0; hd];

        for k in 0..hd {
            let tc = cache.tanh_c[k];
            let d_o = dh[k] * tc;
            let dc = dc_in[k] + dh[k] * cache.o[k] * (1.0 - tc * tc);
            let d_i = dc * cache.g[k];
            let d_f = dc * cache.c_prev[k];
            let d_g = dc * cache.i[k];
            dc_prev[k] = dc * cache.f[k];

            dz[k] = d_i * cache.i[k] * (1.0 - cache.i[k]);
            dz[hd + k] = d_f * cache.f[k] * (1.0 - cache.f[k]);
            dz[2 * hd + k] = d_g * (1.0 - cache.g[k] * cache.g[k]);
            dz[3 * hd + k] = d_o * cache.o[k] * (1.0 - cache.o[k]);
        }

        grads.w_ih.add_outer(&dz, &cache.x);
        grads.w_hh.add_outer(&dz, &cache.h_prev);
        axpy(&mut grads.bias.data, 1.0, &dz);

        let dx = self.w_ih.matvec_t(&dz);
        let dh_prev = self.w_hh.matvec_t(&dz);
        (dx, dh_prev, dc_prev)
    }
}

crate::impl_parameterized!(LstmCell {
    "w_ih" => w_ih,
    "w_hh" => w_hh,
    "bias" => bias,
});

/// A full unrolled pass over a sequence. `hs[0]`/`cs[0]` hold the initial
/// state; `hs[t+1]` is the state after consuming input t.
pub struct LstmRun {
    pub hs: Vec<Vec<f64>>,
    pub cs: Vec<Vec<f64>>,
    caches: Vec<LstmCache>,
}

impl LstmRun {
    pub fn forward(cell: &LstmCell, inputs: &[Vec<f64>], h0: Vec<f64>, c0: Vec<f64>) -> Self {
        let mut hs = vec![h0];
        let mut cs = vec![c0];
        let mut caches = Vec::with_capacity(inputs.len());
        for x in inputs {
            let (h, c, cache) = cell.step(x, hs.last().unwrap(), cs.last().unwrap());
            hs.push(h);
            cs.push(c);
            caches.push(cache);
        }
        Self { hs, cs, caches }
    }

    pub fn len(&self) -> usize {
        self.caches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caches.is_empty()
    }

    pub fn final_h(&self) -> &[f64] {
        self.hs.last().unwrap()
    }

    pub fn final_c(&self) -> &[f64] {
        self.cs.last().unwrap()
    }

    /// Backward through the whole run. `dhs[t]` is the external gradient on
    /// h_{t+1} (one entry per input; the final state's gradient goes in the
    /// last entry), `dc_final` the external gradient on the final cell state.
    /// Returns per-step input gradients and (dh0, dc0).
    pub fn backward(
        &self,
        cell: &LstmCell,
        dhs: &[Vec<f64>],
        dc_final: &[f64],
        grads: &mut LstmCell,
    ) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let t_len = self.caches.len();
        assert_eq!(dhs.len(), t_len);
        let hd = cell.hidden_dim;
        let mut dh_chain = vec![0.0; hd];
        let mut dc_chain = dc_final.to_vec();
        let mut dxs = vec![Vec::new(); t_len];
        for t in (0..t_len).rev() {
            let mut dh = dhs[t].clone();
            axpy(&mut dh, 1.0, &dh_chain);
            let (dx, dh_prev, dc_prev) =
                cell.step_backward(&self.caches[t], &dh, &dc_chain, grads);
            dxs[t] = dx;
            dh_chain = dh_prev;
            dc_chain = dc_prev;
        }
        (dxs, dh_chain, dc_chain)
    }
}
