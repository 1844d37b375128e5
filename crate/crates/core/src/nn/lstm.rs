use super::{
    matvec_acc, matvec_t_acc, outer_acc, sigmoid, Gradients, Init, NnError, ParamId, ParamStore,
    Tensor,
};

/// LSTM over the columns of an `[in_dim × len]` sequence, returning the last hidden
/// state. Gate blocks in `W`, `U`, `b` are ordered input, forget, output, update.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    w: ParamId,
    u: ParamId,
    b: ParamId,
    in_dim: usize,
    hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Step {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-nonlinearity gates `[i | f | o | u]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCache {
    steps: Vec<Step>,
    seq_len: usize,
}

impl Lstm {
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, hidden: usize) -> Self {
        let w = store.add(
            format!("{name}.w"),
            &[4 * hidden, in_dim],
            Init::GlorotUniform {
                fan_in: in_dim,
                fan_out: 4 * hidden,
            },
        );
        let u = store.add(
            format!("{name}.u"),
            &[4 * hidden, hidden],
            Init::GlorotUniform {
                fan_in: hidden,
                fan_out: 4 * hidden,
            },
        );
        let b = store.add(format!("{name}.b"), &[4 * hidden], Init::Zeros);
        Self {
            w,
            u,
            b,
            in_dim,
            hidden,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    /// Runs the first `steps` columns of `x`; later columns (padding) are ignored.
    pub fn forward(
        &self,
        store: &ParamStore,
        x: &Tensor,
        steps: usize,
    ) -> Result<(Vec<f64>, LstmCache), NnError> {
        if x.rows() != self.in_dim {
            return Err(NnError::ShapeMismatch {
                context: "lstm input features",
                expected: self.in_dim,
                got: x.rows(),
            });
        }
        let len = x.cols();
        if steps == 0 || steps > len {
            return Err(NnError::ShapeMismatch {
                context: "lstm sequence length",
                expected: len,
                got: steps,
            });
        }
        let h = self.hidden;
        let (w, u, b) = (
            store.get(self.w).data(),
            store.get(self.u).data(),
            store.get(self.b).data(),
        );
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        let mut cache = Vec::with_capacity(steps);
        for t in 0..steps {
            let xt: Vec<f64> = (0..self.in_dim).map(|d| x.data()[d * len + t]).collect();
            let mut z = b.to_vec();
            matvec_acc(w, self.in_dim, &xt, &mut z);
            matvec_acc(u, h, &h_prev, &mut z);
            for (k, v) in z.iter_mut().enumerate() {
                *v = if k < 3 * h { sigmoid(*v) } else { v.tanh() };
            }
            let mut c = vec![0.0; h];
            let mut tanh_c = vec![0.0; h];
            let mut h_next = vec![0.0; h];
            for j in 0..h {
                c[j] = z[h + j] * c_prev[j] + z[j] * z[3 * h + j];
                tanh_c[j] = c[j].tanh();
                h_next[j] = z[2 * h + j] * tanh_c[j];
            }
            cache.push(Step {
                x: xt,
                h_prev: std::mem::replace(&mut h_prev, h_next),
                c_prev: std::mem::replace(&mut c_prev, c),
                gates: z,
                tanh_c,
            });
        }
        Ok((
            h_prev,
            LstmCache {
                steps: cache,
                seq_len: len,
            },
        ))
    }

    /// Returns the gradient with respect to the input sequence.
    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &LstmCache,
        dout: &[f64],
        grads: &mut Gradients,
    ) -> Tensor {
        let h = self.hidden;
        let len = cache.seq_len;
        let (w, u) = (store.get(self.w).data(), store.get(self.u).data());
        let mut dx = Tensor::zeros(&[self.in_dim, len]);
        let mut dh = dout.to_vec();
        let mut dc = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        for (t, s) in cache.steps.iter().enumerate().rev() {
            let g = &s.gates;
            for j in 0..h {
                let (i, f, o, uu) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let do_ = dh[j] * s.tanh_c[j];
                dc[j] += dh[j] * o * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
                dz[j] = dc[j] * uu * i * (1.0 - i);
                dz[h + j] = dc[j] * s.c_prev[j] * f * (1.0 - f);
                dz[2 * h + j] = do_ * o * (1.0 - o);
                dz[3 * h + j] = dc[j] * i * (1.0 - uu * uu);
                dc[j] *= f;
            }
            outer_acc(&dz, &s.x, grads.get_mut(self.w));
            outer_acc(&dz, &s.h_prev, grads.get_mut(self.u));
            for (gb, d) in grads.get_mut(self.b).iter_mut().zip(&dz) {
                *gb += d;
            }
            let mut dxt = vec![0.0; self.in_dim];
            matvec_t_acc(w, self.in_dim, &dz, &mut dxt);
            for (d, v) in dxt.into_iter().enumerate() {
                dx.data_mut()[d * len + t] = v;
            }
            dh.fill(0.0);
            matvec_t_acc(u, h, &dz, &mut dh);
        }
        dx
    }
}
