//! Central finite-difference checking of analytic gradients.

use super::{Gradients, ParamStore};

/// Denominator floor for relative errors. Central differences at step 1e-5 carry
/// absolute noise near 1e-10, so gradients smaller than this are compared in
/// absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
    (analytic - numeric).abs() / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compares `analytic` against `(loss(θ+h) - loss(θ-h)) / 2h` for every scalar.
pub fn check_gradients<F>(
    store: &ParamStore,
    analytic: &Gradients,
    step: f64,
    loss: F,
) -> GradCheckReport
where
    F: Fn(&ParamStore) -> f64,
{
    let mut probe = store.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        checked: 0,
    };
    for id in store.ids() {
        for k in 0..store.get(id).len() {
            let orig = store.get(id).data()[k];
            probe.get_mut(id).data_mut()[k] = orig + step;
            let plus = loss(&probe);
            probe.get_mut(id).data_mut()[k] = orig - step;
            let minus = loss(&probe);
            probe.get_mut(id).data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(analytic.get(id)[k], numeric);
            report.checked += 1;
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = err.max(report.max_relative_error);
                report.worst = Some((store.param(id).name.clone(), k));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::nn::{
        cross_entropy, cross_entropy_grad, Activation, BinaryTreeLstm, ChildSumTreeLstm, ConvBank,
        Dense, Embedding, Lstm, NodeState, Tensor,
    };

    const STEP: f64 = 1e-5;
    const TOL: f64 = 1e-4;

    fn weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn assert_ok(report: GradCheckReport) {
        assert!(report.checked > 0);
        assert!(report.max_relative_error < TOL, "{report:?}");
    }

    #[test]
    fn dense_layers() {
        for act in [
            Activation::Relu,
            Activation::Sigmoid,
            Activation::Tanh,
            Activation::Identity,
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut store = ParamStore::new();
            let d = Dense::new(&mut store, "d", 4, 3, act);
            store.initialize(&mut rng);
            let x = weights(&mut rng, 4);
            let r = weights(&mut rng, 3);
            let loss = |s: &ParamStore| -> f64 {
                let (y, _) = d.forward(s, &x).unwrap();
                y.iter().zip(&r).map(|(a, b)| a * b).sum()
            };
            let (_, cache) = d.forward(&store, &x).unwrap();
            let mut g = Gradients::zeros_like(&store);
            d.backward(&store, &x, &cache, &r, &mut g);
            assert_ok(check_gradients(&store, &g, STEP, loss));
        }
    }

    #[test]
    fn embedding_and_conv_bank() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let emb = Embedding::new(&mut store, "e", 3, 6);
        let conv = ConvBank::new(&mut store, "c", 3, &[1, 3], &[2, 3]);
        store.initialize(&mut rng);
        let bias = store.find("c.size3.bias").unwrap();
        store.get_mut(bias).data_mut().fill(0.3);
        let ids = [1, 4, 2, 2, 5, 0];
        let r = weights(&mut rng, conv.out_dim());
        let loss = |s: &ParamStore| -> f64 {
            let x = emb.forward(s, &ids).unwrap();
            let (y, _) = conv.forward(s, &x, 5).unwrap();
            y.iter().zip(&r).map(|(a, b)| a * b).sum()
        };
        let x = emb.forward(&store, &ids).unwrap();
        let (_, cache) = conv.forward(&store, &x, 5).unwrap();
        let mut g = Gradients::zeros_like(&store);
        let dx = conv.backward(&store, &x, &cache, &r, &mut g);
        emb.backward(&ids, &dx, &mut g);
        // the padding column's embedding never wins a pooled window
        assert!(g.get(emb.table()).chunks(6).all(|row| row[0] == 0.0));
        assert_ok(check_gradients(&store, &g, STEP, loss));
    }

    #[test]
    fn lstm_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let lstm = Lstm::new(&mut store, "l", 3, 4);
        store.initialize(&mut rng);
        let b = store.find("l.b").unwrap();
        let noise = weights(&mut rng, 16);
        store.get_mut(b).data_mut().copy_from_slice(&noise);
        let x = Tensor::from_vec(&[3, 5], weights(&mut rng, 15)).unwrap();
        let r = weights(&mut rng, 4);
        let loss = |s: &ParamStore| -> f64 {
            let (h, _) = lstm.forward(s, &x, 4).unwrap();
            h.iter().zip(&r).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = lstm.forward(&store, &x, 4).unwrap();
        let mut g = Gradients::zeros_like(&store);
        let dx = lstm.backward(&store, &cache, &r, &mut g);
        assert_ok(check_gradients(&store, &g, STEP, loss));
        // input gradient, checked by perturbing the sequence itself
        for k in 0..x.len() {
            let mut plus = x.clone();
            plus.data_mut()[k] += STEP;
            let mut minus = x.clone();
            minus.data_mut()[k] -= STEP;
            let f = |t: &Tensor| -> f64 {
                let (h, _) = lstm.forward(&store, t, 4).unwrap();
                h.iter().zip(&r).map(|(a, b)| a * b).sum()
            };
            let numeric = (f(&plus) - f(&minus)) / (2.0 * STEP);
            assert!(relative_error(dx.data()[k], numeric) < TOL, "input {k}");
        }
    }

    #[test]
    fn child_sum_unit() {
        for in_dim in [0, 2] {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut store = ParamStore::new();
            let unit = ChildSumTreeLstm::new(&mut store, "t", in_dim, 3);
            store.initialize(&mut rng);
            let b = store.find("t.b").unwrap();
            let noise = weights(&mut rng, 12);
            store.get_mut(b).data_mut().copy_from_slice(&noise);
            let x = weights(&mut rng, in_dim);
            let children: Vec<NodeState> = (0..3)
                .map(|_| NodeState {
                    h: weights(&mut rng, 3),
                    c: weights(&mut rng, 3),
                })
                .collect();
            let (rh, rc) = (weights(&mut rng, 3), weights(&mut rng, 3));
            let objective = |s: &NodeState| -> f64 {
                s.h.iter().zip(&rh).map(|(a, b)| a * b).sum::<f64>()
                    + s.c.iter().zip(&rc).map(|(a, b)| a * b).sum::<f64>()
            };
            let loss = |s: &ParamStore| objective(&unit.forward(s, &x, &children).unwrap().0);
            let (_, cache) = unit.forward(&store, &x, &children).unwrap();
            let mut g = Gradients::zeros_like(&store);
            let (dx, dchildren) = unit.backward(&store, &cache, &rh, &rc, &mut g);
            assert_ok(check_gradients(&store, &g, STEP, loss));
            for k in 0..in_dim {
                let f = |d: f64| {
                    let mut xp = x.clone();
                    xp[k] += d;
                    objective(&unit.forward(&store, &xp, &children).unwrap().0)
                };
                let numeric = (f(STEP) - f(-STEP)) / (2.0 * STEP);
                assert!(relative_error(dx[k], numeric) < TOL);
            }
            for (ci, dchild) in dchildren.iter().enumerate() {
                for j in 0..3 {
                    for which in 0..2 {
                        let f = |d: f64| {
                            let mut ch = children.clone();
                            if which == 0 {
                                ch[ci].h[j] += d;
                            } else {
                                ch[ci].c[j] += d;
                            }
                            objective(&unit.forward(&store, &x, &ch).unwrap().0)
                        };
                        let numeric = (f(STEP) - f(-STEP)) / (2.0 * STEP);
                        let a = if which == 0 { dchild.h[j] } else { dchild.c[j] };
                        assert!(relative_error(a, numeric) < TOL, "child {ci} {j} {which}");
                    }
                }
            }
        }
    }

    #[test]
    fn binary_unit() {
        for in_dim in [0, 2] {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let mut store = ParamStore::new();
            let unit = BinaryTreeLstm::new(&mut store, "t", in_dim, 3);
            store.initialize(&mut rng);
            let b = store.find("t.b").unwrap();
            let noise = weights(&mut rng, 12);
            store.get_mut(b).data_mut().copy_from_slice(&noise);
            let x = weights(&mut rng, in_dim);
            let left = NodeState {
                h: weights(&mut rng, 3),
                c: weights(&mut rng, 3),
            };
            let right = NodeState {
                h: weights(&mut rng, 3),
                c: weights(&mut rng, 3),
            };
            let (rh, rc) = (weights(&mut rng, 3), weights(&mut rng, 3));
            let objective = |s: &NodeState| -> f64 {
                s.h.iter().zip(&rh).map(|(a, b)| a * b).sum::<f64>()
                    + s.c.iter().zip(&rc).map(|(a, b)| a * b).sum::<f64>()
            };
            let loss = |s: &ParamStore| objective(&unit.forward(s, &x, &left, &right).unwrap().0);
            let (_, cache) = unit.forward(&store, &x, &left, &right).unwrap();
            let mut g = Gradients::zeros_like(&store);
            let (_, dl, dr) = unit.backward(&store, &cache, &rh, &rc, &mut g);
            assert_ok(check_gradients(&store, &g, STEP, loss));
            for j in 0..3 {
                let f = |d: f64, side: usize, cell: bool| {
                    let (mut l, mut r) = (left.clone(), right.clone());
                    let target = if side == 0 { &mut l } else { &mut r };
                    if cell {
                        target.c[j] += d;
                    } else {
                        target.h[j] += d;
                    }
                    objective(&unit.forward(&store, &x, &l, &r).unwrap().0)
                };
                for (side, grad) in [(0, &dl), (1, &dr)] {
                    let nh = (f(STEP, side, false) - f(-STEP, side, false)) / (2.0 * STEP);
                    let nc = (f(STEP, side, true) - f(-STEP, side, true)) / (2.0 * STEP);
                    assert!(relative_error(grad.h[j], nh) < TOL);
                    assert!(relative_error(grad.c[j], nc) < TOL);
                }
            }
        }
    }

    #[test]
    fn cross_entropy_through_sigmoid_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut store = ParamStore::new();
        let d = Dense::new(&mut store, "d", 3, 1, Activation::Sigmoid);
        store.initialize(&mut rng);
        let x = weights(&mut rng, 3);
        for label in [0.0, 1.0] {
            let loss = |s: &ParamStore| cross_entropy(label, d.forward(s, &x).unwrap().0[0]);
            let (p, cache) = d.forward(&store, &x).unwrap();
            let mut g = Gradients::zeros_like(&store);
            d.backward(
                &store,
                &x,
                &cache,
                &[cross_entropy_grad(label, p[0])],
                &mut g,
            );
            assert_ok(check_gradients(&store, &g, STEP, loss));
        }
    }
}
