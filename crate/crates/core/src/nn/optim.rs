use serde::{Deserialize, Serialize};

use super::{Gradients, NnError, ParamStore};

/// RMSprop with the squared-gradient average inside the square root:
/// `s ← ρ s + (1-ρ) g²`, `θ ← θ - η g / √(s + ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for RmsProp {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            rho: 0.9,
            epsilon: 1e-7,
        }
    }
}

impl RmsProp {
    pub fn step(&self, store: &mut ParamStore, grads: &Gradients) -> Result<(), NnError> {
        if grads.len() != store.len() {
            return Err(NnError::ShapeMismatch {
                context: "gradient count",
                expected: store.len(),
                got: grads.len(),
            });
        }
        for id in store.ids().collect::<Vec<_>>() {
            let g = grads.get(id);
            if g.len() != store.get(id).len() {
                return Err(NnError::ShapeMismatch {
                    context: "gradient shape",
                    expected: store.get(id).len(),
                    got: g.len(),
                });
            }
        }
        for (slot, g) in store.params_mut().iter_mut().zip(grads.iter()) {
            let values = slot.value.data_mut();
            let accum = slot.accum.data_mut();
            for ((theta, s), &gi) in values.iter_mut().zip(accum.iter_mut()).zip(g) {
                *s = self.rho * *s + (1.0 - self.rho) * gi * gi;
                *theta -= self.learning_rate * gi / (*s + self.epsilon).sqrt();
            }
        }
        store.set_step(store.step() + 1);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Init;

    fn single() -> (ParamStore, crate::nn::ParamId) {
        let mut store = ParamStore::new();
        let id = store.add("theta", &[1], Init::Zeros);
        store.get_mut(id).data_mut()[0] = 1.0;
        (store, id)
    }

    #[test]
    fn zero_gradient_decays_accumulator_only() {
        let (mut store, id) = single();
        let opt = RmsProp::default();
        let mut g = Gradients::zeros_like(&store);
        g.get_mut(id)[0] = 1.0;
        opt.step(&mut store, &g).unwrap();
        let s0 = store.param(id).accum.data()[0];
        let theta0 = store.get(id).data()[0];
        let zero = Gradients::zeros_like(&store);
        opt.step(&mut store, &zero).unwrap();
        assert_eq!(store.get(id).data()[0], theta0);
        assert!((store.param(id).accum.data()[0] - 0.9 * s0).abs() < 1e-18);
        assert_eq!(store.step(), 2);
    }

    #[test]
    fn first_step_from_fresh_state() {
        let (mut store, id) = single();
        let mut g = Gradients::zeros_like(&store);
        g.get_mut(id)[0] = 1.0;
        RmsProp::default().step(&mut store, &g).unwrap();
        let s = store.param(id).accum.data()[0];
        assert!((s - 0.1).abs() < 1e-15);
        let delta = store.get(id).data()[0] - 1.0;
        // -0.001 / sqrt(0.1 + 1e-7)
        assert!((delta - (-0.003_162_276_079_1)).abs() < 1e-12, "{delta}");
    }

    #[test]
    fn repeated_gradient_shrinks_steps() {
        let (mut store, id) = single();
        let mut g = Gradients::zeros_like(&store);
        g.get_mut(id)[0] = 1.0;
        let opt = RmsProp::default();
        let mut prev = store.get(id).data()[0];
        let mut last_delta = f64::INFINITY;
        for _ in 0..5 {
            opt.step(&mut store, &g).unwrap();
            let now = store.get(id).data()[0];
            let delta = (now - prev).abs();
            assert!(delta < last_delta);
            last_delta = delta;
            prev = now;
        }
    }

    #[test]
    fn update_magnitude_is_bounded() {
        let opt = RmsProp::default();
        for &gv in &[1e-12, 1e-3, 1.0, 1e6, -1e9] {
            let (mut store, id) = single();
            let mut g = Gradients::zeros_like(&store);
            g.get_mut(id)[0] = gv;
            opt.step(&mut store, &g).unwrap();
            let delta = (store.get(id).data()[0] - 1.0).abs();
            assert!(delta <= opt.learning_rate / opt.epsilon.sqrt());
            assert!(delta <= opt.learning_rate / (1.0 - opt.rho).sqrt() + 1e-15);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let (mut store, _) = single();
        let mut other = ParamStore::new();
        other.add("a", &[1], Init::Zeros);
        other.add("b", &[1], Init::Zeros);
        let g = Gradients::zeros_like(&other);
        assert!(RmsProp::default().step(&mut store, &g).is_err());
    }
}
