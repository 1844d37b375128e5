use super::{axpy, Gradients, Init, NnError, ParamId, ParamStore, Tensor};

pub const KERNEL_SIZES: [usize; 4] = [1, 3, 5, 7];
pub const KERNEL_COUNTS: [usize; 4] = [8, 16, 32, 64];

#[derive(Debug, Clone, PartialEq)]
struct KernelGroup {
    size: usize,
    count: usize,
    /// `[count × in_dim·size]`, element `(k, d, o)` at `k·in_dim·size + d·size + o`.
    weight: ParamId,
    bias: ParamId,
}

/// Kernels of several widths applied as valid-mode correlation with bias and relu,
/// each followed by a global max over positions. Outputs are concatenated in width
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBank {
    in_dim: usize,
    groups: Vec<KernelGroup>,
}

/// Pooled position of every output unit; `None` when the unit's maximum is not
/// positive and relu blocks the gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvCache {
    winners: Vec<Option<usize>>,
}

impl ConvBank {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        sizes: &[usize],
        counts: &[usize],
    ) -> Self {
        assert_eq!(sizes.len(), counts.len(), "one count per kernel size");
        let groups = sizes
            .iter()
            .zip(counts)
            .map(|(&size, &count)| KernelGroup {
                size,
                count,
                weight: store.add(
                    format!("{name}.size{size}.weight"),
                    &[count, in_dim * size],
                    Init::GlorotUniform {
                        fan_in: in_dim * size,
                        fan_out: count * size,
                    },
                ),
                bias: store.add(format!("{name}.size{size}.bias"), &[count], Init::Zeros),
            })
            .collect();
        Self { in_dim, groups }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    pub fn max_size(&self) -> usize {
        self.groups.iter().map(|g| g.size).max().unwrap_or(1)
    }

    /// `(size, index within size)` for every output unit, in output order.
    pub fn kernel_ids(&self) -> Vec<(usize, usize)> {
        self.groups
            .iter()
            .flat_map(|g| (0..g.count).map(move |k| (g.size, k)))
            .collect()
    }

    fn positions(&self, size: usize, len: usize, valid_len: usize) -> usize {
        (len + 1 - size).min(valid_len.saturating_sub(size - 1).max(1))
    }

    fn check(&self, x: &Tensor) -> Result<usize, NnError> {
        if x.rows() != self.in_dim {
            return Err(NnError::ShapeMismatch {
                context: "conv input features",
                expected: self.in_dim,
                got: x.rows(),
            });
        }
        let len = x.cols();
        if len < self.max_size() {
            return Err(NnError::InputTooShort {
                len,
                needed: self.max_size(),
            });
        }
        Ok(len)
    }

    /// Post-relu responses per output unit over the pooled positions.
    ///
    /// `x` is `[in_dim × len]`; only windows starting before
    /// `valid_len - size + 1` (at least one) are considered.
    pub fn activations(
        &self,
        store: &ParamStore,
        x: &Tensor,
        valid_len: usize,
    ) -> Result<Vec<Vec<f64>>, NnError> {
        let len = self.check(x)?;
        let mut out = Vec::with_capacity(self.out_dim());
        for g in &self.groups {
            let npos = self.positions(g.size, len, valid_len);
            let w = store.get(g.weight).data();
            let b = store.get(g.bias).data();
            let span = self.in_dim * g.size;
            for k in 0..g.count {
                let mut z = vec![b[k]; npos];
                let wk = &w[k * span..(k + 1) * span];
                for d in 0..self.in_dim {
                    let row = &x.data()[d * len..(d + 1) * len];
                    for o in 0..g.size {
                        let c = wk[d * g.size + o];
                        if c != 0.0 {
                            axpy(c, &row[o..o + npos], &mut z);
                        }
                    }
                }
                z.iter_mut().for_each(|v| *v = v.max(0.0));
                out.push(z);
            }
        }
        Ok(out)
    }

    pub fn forward(
        &self,
        store: &ParamStore,
        x: &Tensor,
        valid_len: usize,
    ) -> Result<(Vec<f64>, ConvCache), NnError> {
        let acts = self.activations(store, x, valid_len)?;
        let mut out = Vec::with_capacity(acts.len());
        let mut winners = Vec::with_capacity(acts.len());
        for a in &acts {
            // first position attaining the maximum
            let (pos, best) =
                a.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |(bp, bv), (p, &v)| {
                        if v > bv {
                            (p, v)
                        } else {
                            (bp, bv)
                        }
                    });
            out.push(best);
            winners.push((best > 0.0).then_some(pos));
        }
        Ok((out, ConvCache { winners }))
    }

    /// Returns the gradient with respect to `x`.
    pub fn backward(
        &self,
        store: &ParamStore,
        x: &Tensor,
        cache: &ConvCache,
        dout: &[f64],
        grads: &mut Gradients,
    ) -> Tensor {
        let len = x.cols();
        let mut dx = Tensor::zeros(x.shape());
        let mut unit = 0;
        for g in &self.groups {
            let span = self.in_dim * g.size;
            let w = store.get(g.weight).data();
            for k in 0..g.count {
                let (dy, winner) = (dout[unit], cache.winners[unit]);
                unit += 1;
                let Some(p) = winner else { continue };
                if dy == 0.0 {
                    continue;
                }
                grads.get_mut(g.bias)[k] += dy;
                let gw = &mut grads.get_mut(g.weight)[k * span..(k + 1) * span];
                for d in 0..self.in_dim {
                    let row = &x.data()[d * len + p..d * len + p + g.size];
                    axpy(dy, row, &mut gw[d * g.size..(d + 1) * g.size]);
                }
                let wk = &w[k * span..(k + 1) * span];
                let dxd = dx.data_mut();
                for d in 0..self.in_dim {
                    axpy(
                        dy,
                        &wk[d * g.size..(d + 1) * g.size],
                        &mut dxd[d * len + p..d * len + p + g.size],
                    );
                }
            }
        }
        dx
    }
}
