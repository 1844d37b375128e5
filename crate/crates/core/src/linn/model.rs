//! The link model: one encoder per side, concatenated into a small classifier.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LinnError;
use crate::corpus::tokens::{self, VOCAB_SIZE};
use crate::icc::{AbstractFilter, AbstractIntent};
use crate::matcher::LinkProbability;
use crate::nn::{
    cross_entropy, cross_entropy_grad, Activation, Dense, DenseCache, Gradients, ParamStore,
};
use crate::tde::{
    build_encoder, filter_type, intent_type, Encoder, EncoderSpec, Hyper, Instantiation, Trace,
    TypeDescriptor, Value,
};

/// Encoder input for one link under a given instantiation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkInput {
    pub intent: Value,
    pub filter: Value,
}

impl LinkInput {
    pub fn new(inst: Instantiation, intent: &AbstractIntent, filter: &AbstractFilter) -> Self {
        if inst.is_flat() {
            Self {
                intent: Value::string(&tokens::intent_tokens(intent)),
                filter: Value::string(&tokens::filter_tokens(filter)),
            }
        } else {
            Self {
                intent: Value::of_intent(intent),
                filter: Value::of_filter(filter),
            }
        }
    }
}

/// Shape of one classifier layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// Everything needed to rebuild a model's parameter layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub instantiation: Instantiation,
    pub hyper: Hyper,
    pub intent_encoder: EncoderSpec,
    pub filter_encoder: EncoderSpec,
    pub classifier: Vec<LayerSpec>,
}

impl ModelSpec {
    pub fn new(inst: Instantiation, hyper: Hyper) -> Result<Self, LinnError> {
        if hyper.mlp.last() != Some(&1) || hyper.mlp.contains(&0) {
            return Err(LinnError::InvalidConfig(
                "classifier widths must be positive and end in 1".to_owned(),
            ));
        }
        let (ity, fty) = if inst.is_flat() {
            (TypeDescriptor::string(), TypeDescriptor::string())
        } else {
            (intent_type(), filter_type())
        };
        let intent_encoder = build_encoder(&ity, inst, &hyper)?;
        let filter_encoder = build_encoder(&fty, inst, &hyper)?;
        let mut in_dim = intent_encoder.dim() + filter_encoder.dim();
        let last = hyper.mlp.len() - 1;
        let classifier = hyper
            .mlp
            .iter()
            .enumerate()
            .map(|(k, &out_dim)| {
                let layer = LayerSpec {
                    in_dim,
                    out_dim,
                    activation: if k == last {
                        Activation::Sigmoid
                    } else {
                        Activation::Relu
                    },
                };
                in_dim = out_dim;
                layer
            })
            .collect();
        Ok(Self {
            instantiation: inst,
            hyper,
            intent_encoder,
            filter_encoder,
            classifier,
        })
    }
}

/// Intermediate values of one link's forward pass.
struct LinkTrace {
    intent: Trace,
    filter: Trace,
    /// Input of every classifier layer followed by its cache.
    layers: Vec<(Vec<f64>, DenseCache)>,
    p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinnModel {
    spec: ModelSpec,
    intent_encoder: Encoder,
    filter_encoder: Encoder,
    classifier: Vec<Dense>,
    store: ParamStore,
}

impl LinnModel {
    /// Builds the model with every parameter at zero.
    pub fn build(spec: ModelSpec) -> Self {
        let mut store = ParamStore::new();
        let intent_encoder = Encoder::new(&mut store, "intent", &spec.intent_encoder);
        let filter_encoder = Encoder::new(&mut store, "filter", &spec.filter_encoder);
        let classifier = spec
            .classifier
            .iter()
            .enumerate()
            .map(|(k, l)| {
                Dense::new(
                    &mut store,
                    &format!("classifier.{k}"),
                    l.in_dim,
                    l.out_dim,
                    l.activation,
                )
            })
            .collect();
        Self {
            spec,
            intent_encoder,
            filter_encoder,
            classifier,
            store,
        }
    }

    /// Builds and randomly initializes a model.
    pub fn new(inst: Instantiation, hyper: Hyper, seed: u64) -> Result<Self, LinnError> {
        let mut model = Self::build(ModelSpec::new(inst, hyper)?);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        model.store.initialize(&mut rng);
        Ok(model)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn instantiation(&self) -> Instantiation {
        self.spec.instantiation
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn intent_encoder(&self) -> &Encoder {
        &self.intent_encoder
    }

    pub fn filter_encoder(&self) -> &Encoder {
        &self.filter_encoder
    }

    pub fn classifier(&self) -> &[Dense] {
        &self.classifier
    }

    pub fn param_count(&self) -> usize {
        self.store.scalar_count()
    }

    pub fn vocab_size(&self) -> usize {
        VOCAB_SIZE
    }

    pub fn input(&self, intent: &AbstractIntent, filter: &AbstractFilter) -> LinkInput {
        LinkInput::new(self.instantiation(), intent, filter)
    }

    fn run(&self, store: &ParamStore, input: &LinkInput) -> Result<LinkTrace, LinnError> {
        let (mut x, intent) = self.intent_encoder.forward(store, &input.intent)?;
        let (xf, filter) = self.filter_encoder.forward(store, &input.filter)?;
        x.extend(xf);
        let mut layers = Vec::with_capacity(self.classifier.len());
        for layer in &self.classifier {
            let (y, cache) = layer.forward(store, &x)?;
            layers.push((std::mem::replace(&mut x, y), cache));
        }
        Ok(LinkTrace {
            intent,
            filter,
            layers,
            p: x[0],
        })
    }

    /// Link probability for an already encoded input, using `store` as parameters.
    pub fn forward_with(&self, store: &ParamStore, input: &LinkInput) -> Result<f64, LinnError> {
        Ok(self.run(store, input)?.p)
    }

    pub fn forward_input(&self, input: &LinkInput) -> Result<f64, LinnError> {
        self.forward_with(&self.store, input)
    }

    pub fn forward(
        &self,
        intent: &AbstractIntent,
        filter: &AbstractFilter,
    ) -> Result<f64, LinnError> {
        self.forward_input(&self.input(intent, filter))
    }

    /// Output of the intent encoder.
    pub fn encode_intent(&self, intent: &AbstractIntent) -> Result<Vec<f64>, LinnError> {
        let value = if self.instantiation().is_flat() {
            Value::string(&tokens::intent_tokens(intent))
        } else {
            Value::of_intent(intent)
        };
        Ok(self.intent_encoder.forward(&self.store, &value)?.0)
    }

    /// Mean cross-entropy of `batch` (input, label) under `store`.
    pub fn batch_loss_with(
        &self,
        store: &ParamStore,
        batch: &[(LinkInput, f64)],
    ) -> Result<f64, LinnError> {
        let mut total = 0.0;
        for (input, label) in batch {
            total += cross_entropy(*label, self.forward_with(store, input)?);
        }
        Ok(total * (1.0 / batch.len().max(1) as f64))
    }

    /// Mean batch loss and its gradient with respect to every parameter.
    pub fn loss_and_gradients(
        &self,
        batch: &[(LinkInput, f64)],
    ) -> Result<(f64, Gradients), LinnError> {
        let mut grads = Gradients::zeros_like(&self.store);
        let loss =
            self.accumulate_gradients(batch.iter().map(|(i, l)| (i, *l)), batch.len(), &mut grads)?;
        Ok((loss, grads))
    }

    pub(crate) fn accumulate_gradients<'a>(
        &self,
        batch: impl Iterator<Item = (&'a LinkInput, f64)>,
        len: usize,
        grads: &mut Gradients,
    ) -> Result<f64, LinnError> {
        let store = &self.store;
        let scale = 1.0 / len.max(1) as f64;
        let mut total = 0.0;
        for (input, label) in batch {
            let trace = self.run(store, input)?;
            total += cross_entropy(label, trace.p);
            let mut d = vec![cross_entropy_grad(label, trace.p) * scale];
            for (layer, (x, cache)) in self.classifier.iter().zip(&trace.layers).rev() {
                d = layer.backward(store, x, cache, &d, grads);
            }
            let split = self.intent_encoder.out_dim();
            self.intent_encoder
                .backward(store, &trace.intent, &d[..split], grads);
            self.filter_encoder
                .backward(store, &trace.filter, &d[split..], grads);
        }
        Ok(total * scale)
    }
}

impl LinkProbability for LinnModel {
    type Error = LinnError;

    fn link_probability(
        &self,
        intent: &AbstractIntent,
        filter: &AbstractFilter,
    ) -> Result<f64, LinnError> {
        self.forward(intent, filter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link() -> (AbstractIntent, AbstractFilter) {
        (
            AbstractIntent::parse(Some("android.intent.action.(.*)"), ["default"]).unwrap(),
            AbstractFilter::parse(
                ["android.intent.action.view", "send"],
                ["default", "b(.*)e"],
            )
            .unwrap(),
        )
    }

    #[test]
    fn parameter_counts() {
        let count = |inst| {
            LinnModel::new(inst, Hyper::default(), 0)
                .unwrap()
                .param_count()
        };
        assert_eq!(count(Instantiation::StrCnn), 27_409);
        assert_eq!(count(Instantiation::StrRnn), 154_657);
    }

    #[test]
    fn classifier_widths() {
        let widths = |inst| ModelSpec::new(inst, Hyper::default()).unwrap().classifier[0].in_dim;
        assert_eq!(widths(Instantiation::StrCnn), 240);
        assert_eq!(widths(Instantiation::StrRnn), 256);
        assert_eq!(widths(Instantiation::TypedSimple), 128);
        assert_eq!(widths(Instantiation::TypedTree), 240);
        let bad = Hyper {
            mlp: vec![16, 2],
            ..Hyper::default()
        };
        assert!(ModelSpec::new(Instantiation::StrCnn, bad).is_err());
    }

    #[test]
    fn output_in_unit_interval_and_repeatable() {
        let (i, f) = link();
        for inst in Instantiation::ALL {
            let m = LinnModel::new(inst, Hyper::default(), 3).unwrap();
            let a = m.forward(&i, &f).unwrap();
            let b = m.forward(&i, &f).unwrap();
            assert!(a > 0.0 && a < 1.0, "{inst}: {a}");
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn zero_final_layer_gives_one_half() {
        let (i, f) = link();
        let mut m = LinnModel::new(Instantiation::TypedSimple, Hyper::default(), 1).unwrap();
        let last = m.classifier().last().unwrap().clone();
        m.store_mut().get_mut(last.weight()).data_mut().fill(0.0);
        assert_eq!(m.forward(&i, &f).unwrap(), 0.5);
    }

    #[test]
    fn loss_matches_forward() {
        let (i, f) = link();
        let m = LinnModel::new(Instantiation::StrCnn, Hyper::default(), 2).unwrap();
        let batch = vec![(m.input(&i, &f), 1.0), (m.input(&i, &f), 0.0)];
        let (loss, grads) = m.loss_and_gradients(&batch).unwrap();
        assert_eq!(loss, m.batch_loss_with(m.store(), &batch).unwrap());
        assert!(grads.first_non_finite().is_none());
    }
}
