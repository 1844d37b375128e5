use super::{
    axpy, matvec_acc, matvec_t_acc, outer_acc, sigmoid, Gradients, Init, NnError, ParamId,
    ParamStore,
};

/// Hidden and cell state of a tree node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl NodeState {
    pub fn zeros(dim: usize) -> Self {
        Self {
            h: vec![0.0; dim],
            c: vec![0.0; dim],
        }
    }

    /// A leaf-like child carrying `h` and a zero cell.
    pub fn from_hidden(h: Vec<f64>) -> Self {
        let c = vec![0.0; h.len()];
        Self { h, c }
    }
}

fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<(), NnError> {
    if expected == got {
        Ok(())
    } else {
        Err(NnError::ShapeMismatch {
            context,
            expected,
            got,
        })
    }
}

/// Optional input projection `W [4h × in_dim]`; absent when `in_dim` is 0.
fn input_weight(
    store: &mut ParamStore,
    name: &str,
    in_dim: usize,
    hidden: usize,
) -> Option<ParamId> {
    (in_dim > 0).then(|| {
        store.add(
            format!("{name}.w"),
            &[4 * hidden, in_dim],
            Init::GlorotUniform {
                fan_in: in_dim,
                fan_out: 4 * hidden,
            },
        )
    })
}

/// Tree-LSTM unit over an unordered set of children: the gates see the sum of the
/// children's hidden states and each child gets its own forget gate. Gate blocks are
/// ordered input, forget, output, update.
#[derive(Debug, Clone, PartialEq)]
pub struct ChildSumTreeLstm {
    w: Option<ParamId>,
    /// `[4h × h]`
    u: ParamId,
    b: ParamId,
    in_dim: usize,
    hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChildSumCache {
    x: Vec<f64>,
    h_sum: Vec<f64>,
    children: Vec<NodeState>,
    /// `[i | o | u]` after nonlinearities.
    iou: Vec<f64>,
    forget: Vec<Vec<f64>>,
    tanh_c: Vec<f64>,
}

impl ChildSumTreeLstm {
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, hidden: usize) -> Self {
        let w = input_weight(store, name, in_dim, hidden);
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

    pub fn forward(
        &self,
        store: &ParamStore,
        x: &[f64],
        children: &[NodeState],
    ) -> Result<(NodeState, ChildSumCache), NnError> {
        let h = self.hidden;
        check_dim("tree unit input", self.in_dim, x.len())?;
        for ch in children {
            check_dim("child hidden state", h, ch.h.len())?;
            check_dim("child cell state", h, ch.c.len())?;
        }
        let u = store.get(self.u).data();
        let mut base = store.get(self.b).data().to_vec();
        if let Some(w) = self.w {
            matvec_acc(store.get(w).data(), self.in_dim, x, &mut base);
        }
        let mut h_sum = vec![0.0; h];
        for ch in children {
            axpy(1.0, &ch.h, &mut h_sum);
        }
        let block = |k: usize| &u[k * h * h..(k + 1) * h * h];
        let mut iou = Vec::with_capacity(3 * h);
        for (slot, k) in [0usize, 2, 3].into_iter().enumerate() {
            let mut z = base[k * h..(k + 1) * h].to_vec();
            matvec_acc(block(k), h, &h_sum, &mut z);
            iou.extend(
                z.into_iter()
                    .map(|v| if slot < 2 { sigmoid(v) } else { v.tanh() }),
            );
        }
        let forget: Vec<Vec<f64>> = children
            .iter()
            .map(|ch| {
                let mut z = base[h..2 * h].to_vec();
                matvec_acc(block(1), h, &ch.h, &mut z);
                z.into_iter().map(sigmoid).collect()
            })
            .collect();
        let mut c: Vec<f64> = (0..h).map(|j| iou[j] * iou[2 * h + j]).collect();
        for (f, ch) in forget.iter().zip(children) {
            for j in 0..h {
                c[j] += f[j] * ch.c[j];
            }
        }
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let hid = (0..h).map(|j| iou[h + j] * tanh_c[j]).collect();
        Ok((
            NodeState { h: hid, c },
            ChildSumCache {
                x: x.to_vec(),
                h_sum,
                children: children.to_vec(),
                iou,
                forget,
                tanh_c,
            },
        ))
    }

    /// Returns the gradient with respect to `x` and to each child state.
    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &ChildSumCache,
        dh: &[f64],
        dc: &[f64],
        grads: &mut Gradients,
    ) -> (Vec<f64>, Vec<NodeState>) {
        let h = self.hidden;
        let u = store.get(self.u).data();
        let iou = &cache.iou;
        let mut dcc = dc.to_vec();
        // gradient of pre-activations laid out as [i | f | o | u]
        let mut dz = vec![0.0; 4 * h];
        for j in 0..h {
            let (i, o, uu, tc) = (iou[j], iou[h + j], iou[2 * h + j], cache.tanh_c[j]);
            dcc[j] += dh[j] * o * (1.0 - tc * tc);
            dz[j] = dcc[j] * uu * i * (1.0 - i);
            dz[2 * h + j] = dh[j] * tc * o * (1.0 - o);
            dz[3 * h + j] = dcc[j] * i * (1.0 - uu * uu);
        }
        let mut dh_sum = vec![0.0; h];
        {
            let gu = grads.get_mut(self.u);
            for k in [0usize, 2, 3] {
                outer_acc(
                    &dz[k * h..(k + 1) * h],
                    &cache.h_sum,
                    &mut gu[k * h * h..(k + 1) * h * h],
                );
                matvec_t_acc(
                    &u[k * h * h..(k + 1) * h * h],
                    h,
                    &dz[k * h..(k + 1) * h],
                    &mut dh_sum,
                );
            }
        }
        let mut child_grads = Vec::with_capacity(cache.children.len());
        let mut dzf_total = vec![0.0; h];
        for (f, ch) in cache.forget.iter().zip(&cache.children) {
            let dzf: Vec<f64> = (0..h)
                .map(|j| dcc[j] * ch.c[j] * f[j] * (1.0 - f[j]))
                .collect();
            outer_acc(&dzf, &ch.h, &mut grads.get_mut(self.u)[h * h..2 * h * h]);
            let mut dhk = dh_sum.clone();
            matvec_t_acc(&u[h * h..2 * h * h], h, &dzf, &mut dhk);
            let dck = (0..h).map(|j| dcc[j] * f[j]).collect();
            axpy(1.0, &dzf, &mut dzf_total);
            child_grads.push(NodeState { h: dhk, c: dck });
        }
        dz[h..2 * h].copy_from_slice(&dzf_total);
        axpy(1.0, &dz, grads.get_mut(self.b));
        let mut dx = vec![0.0; self.in_dim];
        if let Some(w) = self.w {
            outer_acc(&dz, &cache.x, grads.get_mut(w));
            matvec_t_acc(store.get(w).data(), self.in_dim, &dz, &mut dx);
        }
        (dx, child_grads)
    }
}

/// Tree-LSTM unit with two ordered children and dedicated weights per child.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTreeLstm {
    w: Option<ParamId>,
    /// `[3h × 2h]`, rows `[i | o | u]`, columns `[left | right]`.
    u_iou: ParamId,
    /// `[2h × 2h]`, rows are the left and right forget gates.
    u_f: ParamId,
    /// `[4h]` ordered `[i | f | o | u]`; the forget bias is shared by both children.
    b: ParamId,
    in_dim: usize,
    hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTreeCache {
    x: Vec<f64>,
    h_cat: Vec<f64>,
    c_left: Vec<f64>,
    c_right: Vec<f64>,
    iou: Vec<f64>,
    /// `[f_left | f_right]`
    forget: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl BinaryTreeLstm {
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, hidden: usize) -> Self {
        let w = input_weight(store, name, in_dim, hidden);
        let u_iou = store.add(
            format!("{name}.u_iou"),
            &[3 * hidden, 2 * hidden],
            Init::GlorotUniform {
                fan_in: 2 * hidden,
                fan_out: 3 * hidden,
            },
        );
        let u_f = store.add(
            format!("{name}.u_f"),
            &[2 * hidden, 2 * hidden],
            Init::GlorotUniform {
                fan_in: 2 * hidden,
                fan_out: 2 * hidden,
            },
        );
        let b = store.add(format!("{name}.b"), &[4 * hidden], Init::Zeros);
        Self {
            w,
            u_iou,
            u_f,
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

    pub fn forward(
        &self,
        store: &ParamStore,
        x: &[f64],
        left: &NodeState,
        right: &NodeState,
    ) -> Result<(NodeState, BinaryTreeCache), NnError> {
        let h = self.hidden;
        check_dim("tree unit input", self.in_dim, x.len())?;
        for s in [left, right] {
            check_dim("child hidden state", h, s.h.len())?;
            check_dim("child cell state", h, s.c.len())?;
        }
        let mut base = store.get(self.b).data().to_vec();
        if let Some(w) = self.w {
            matvec_acc(store.get(w).data(), self.in_dim, x, &mut base);
        }
        let h_cat = [left.h.as_slice(), right.h.as_slice()].concat();
        let mut z_iou = [&base[..h], &base[2 * h..]].concat();
        matvec_acc(store.get(self.u_iou).data(), 2 * h, &h_cat, &mut z_iou);
        let iou: Vec<f64> = z_iou
            .into_iter()
            .enumerate()
            .map(|(k, v)| if k < 2 * h { sigmoid(v) } else { v.tanh() })
            .collect();
        let mut z_f = [&base[h..2 * h], &base[h..2 * h]].concat();
        matvec_acc(store.get(self.u_f).data(), 2 * h, &h_cat, &mut z_f);
        let forget: Vec<f64> = z_f.into_iter().map(sigmoid).collect();
        let c: Vec<f64> = (0..h)
            .map(|j| iou[j] * iou[2 * h + j] + forget[j] * left.c[j] + forget[h + j] * right.c[j])
            .collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let hid = (0..h).map(|j| iou[h + j] * tanh_c[j]).collect();
        Ok((
            NodeState { h: hid, c },
            BinaryTreeCache {
                x: x.to_vec(),
                h_cat,
                c_left: left.c.clone(),
                c_right: right.c.clone(),
                iou,
                forget,
                tanh_c,
            },
        ))
    }

    /// Returns the gradient with respect to `x`, the left child and the right child.
    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &BinaryTreeCache,
        dh: &[f64],
        dc: &[f64],
        grads: &mut Gradients,
    ) -> (Vec<f64>, NodeState, NodeState) {
        let h = self.hidden;
        let (iou, f) = (&cache.iou, &cache.forget);
        let mut dz_iou = vec![0.0; 3 * h];
        let mut dz_f = vec![0.0; 2 * h];
        let mut dc_left = vec![0.0; h];
        let mut dc_right = vec![0.0; h];
        for j in 0..h {
            let (i, o, uu, tc) = (iou[j], iou[h + j], iou[2 * h + j], cache.tanh_c[j]);
            let dcc = dc[j] + dh[j] * o * (1.0 - tc * tc);
            dz_iou[j] = dcc * uu * i * (1.0 - i);
            dz_iou[h + j] = dh[j] * tc * o * (1.0 - o);
            dz_iou[2 * h + j] = dcc * i * (1.0 - uu * uu);
            dz_f[j] = dcc * cache.c_left[j] * f[j] * (1.0 - f[j]);
            dz_f[h + j] = dcc * cache.c_right[j] * f[h + j] * (1.0 - f[h + j]);
            dc_left[j] = dcc * f[j];
            dc_right[j] = dcc * f[h + j];
        }
        outer_acc(&dz_iou, &cache.h_cat, grads.get_mut(self.u_iou));
        outer_acc(&dz_f, &cache.h_cat, grads.get_mut(self.u_f));
        let mut dh_cat = vec![0.0; 2 * h];
        matvec_t_acc(store.get(self.u_iou).data(), 2 * h, &dz_iou, &mut dh_cat);
        matvec_t_acc(store.get(self.u_f).data(), 2 * h, &dz_f, &mut dh_cat);
        let dz: Vec<f64> = (0..4 * h)
            .map(|k| match k / h {
                0 => dz_iou[k],
                1 => dz_f[k - h] + dz_f[k],
                _ => dz_iou[k - h],
            })
            .collect();
        axpy(1.0, &dz, grads.get_mut(self.b));
        let mut dx = vec![0.0; self.in_dim];
        if let Some(w) = self.w {
            outer_acc(&dz, &cache.x, grads.get_mut(w));
            matvec_t_acc(store.get(w).data(), self.in_dim, &dz, &mut dx);
        }
        let right_h = dh_cat.split_off(h);
        (
            dx,
            NodeState {
                h: dh_cat,
                c: dc_left,
            },
            NodeState {
                h: right_h,
                c: dc_right,
            },
        )
    }
}
