use super::{
    matvec_acc, matvec_t_acc, outer_acc, Activation, Gradients, Init, NnError, ParamId, ParamStore,
};

/// Fully connected layer `y = a(wᵀx + b)` with `w` of shape `[in × out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    weight: ParamId,
    bias: ParamId,
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseCache {
    output: Vec<f64>,
}

impl Dense {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
    ) -> Self {
        let weight = store.add(
            format!("{name}.weight"),
            &[in_dim, out_dim],
            Init::GlorotUniform {
                fan_in: in_dim,
                fan_out: out_dim,
            },
        );
        let bias = store.add(format!("{name}.bias"), &[out_dim], Init::Zeros);
        Self {
            weight,
            bias,
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight(&self) -> ParamId {
        self.weight
    }

    pub fn bias(&self) -> ParamId {
        self.bias
    }

    pub fn forward(
        &self,
        store: &ParamStore,
        x: &[f64],
    ) -> Result<(Vec<f64>, DenseCache), NnError> {
        if x.len() != self.in_dim {
            return Err(NnError::ShapeMismatch {
                context: "dense input",
                expected: self.in_dim,
                got: x.len(),
            });
        }
        let mut y = store.get(self.bias).data().to_vec();
        matvec_t_acc(store.get(self.weight).data(), self.out_dim, x, &mut y);
        for v in &mut y {
            *v = self.activation.apply(*v);
        }
        Ok((y.clone(), DenseCache { output: y }))
    }

    /// Returns the gradient with respect to `x`.
    pub fn backward(
        &self,
        store: &ParamStore,
        x: &[f64],
        cache: &DenseCache,
        dout: &[f64],
        grads: &mut Gradients,
    ) -> Vec<f64> {
        let dz: Vec<f64> = dout
            .iter()
            .zip(&cache.output)
            .map(|(g, y)| g * self.activation.derivative_from_output(*y))
            .collect();
        for (gb, d) in grads.get_mut(self.bias).iter_mut().zip(&dz) {
            *gb += d;
        }
        outer_acc(x, &dz, grads.get_mut(self.weight));
        let mut dx = vec![0.0; self.in_dim];
        matvec_acc(store.get(self.weight).data(), self.out_dim, &dz, &mut dx);
        dx
    }
}
