//! Mini-batch training with RMSprop and parallel evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use super::model::{LinkInput, LinnModel};
use super::LinnError;
use crate::corpus::LabeledLink;
use crate::nn::{Gradients, RmsProp};

/// Environment variable bounding evaluation worker threads.
pub const THREADS_ENV: &str = "LINKORACLE_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    /// Reshuffle the training links at the start of every epoch.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let opt = RmsProp::default();
        Self {
            epochs: 10,
            batch_size: 32,
            seed: 0,
            learning_rate: opt.learning_rate,
            rho: opt.rho,
            epsilon: opt.epsilon,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LinnError> {
        if self.epochs == 0 {
            return Err(LinnError::InvalidConfig(
                "epochs must be at least 1".to_owned(),
            ));
        }
        if self.batch_size == 0 {
            return Err(LinnError::InvalidConfig(
                "batch size must be at least 1".to_owned(),
            ));
        }
        if !(self.learning_rate > 0.0 && (0.0..1.0).contains(&self.rho) && self.epsilon > 0.0) {
            return Err(LinnError::InvalidConfig(
                "invalid optimizer constants".to_owned(),
            ));
        }
        Ok(())
    }
}

/// Trains on the links' labels (the matcher's verdict for must links) and
/// returns the mean loss of every epoch.
pub fn train(
    model: &mut LinnModel,
    links: &[LabeledLink],
    cfg: &TrainConfig,
) -> Result<Vec<f64>, LinnError> {
    train_with_progress(model, links, cfg, |_, _| {})
}

/// Like [`train`], calling `on_epoch(epoch, mean_loss)` after every epoch.
pub fn train_with_progress(
    model: &mut LinnModel,
    links: &[LabeledLink],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<Vec<f64>, LinnError> {
    cfg.validate()?;
    if links.is_empty() {
        return Err(LinnError::EmptyTrainingSet);
    }
    let inputs: Vec<(LinkInput, f64)> = links
        .iter()
        .map(|l| {
            let label = if l.label() { 1.0 } else { 0.0 };
            (model.input(&l.intent, &l.filter), label)
        })
        .collect();
    let opt = RmsProp {
        learning_rate: cfg.learning_rate,
        rho: cfg.rho,
        epsilon: cfg.epsilon,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(3);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut grads = Gradients::zeros_like(model.store());
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut batch_index = 0;
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            grads.zero();
            let batch = chunk.iter().map(|&k| (&inputs[k].0, inputs[k].1));
            let loss = model.accumulate_gradients(batch, chunk.len(), &mut grads)?;
            let bad = grads
                .first_non_finite()
                .map(|id| model.store().param(id).name.clone())
                .or_else(|| (!loss.is_finite()).then(|| "loss".to_owned()));
            if let Some(param) = bad {
                return Err(LinnError::NonFiniteGradient {
                    batch: batch_index,
                    param,
                });
            }
            opt.step(model.store_mut(), &grads)?;
            total += loss * chunk.len() as f64;
            batch_index += 1;
        }
        let mean = total / inputs.len() as f64;
        on_epoch(epoch, mean);
        history.push(mean);
    }
    Ok(history)
}

/// Worker count from [`THREADS_ENV`], else the available parallelism.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Predictions in input order; work is split across [`thread_count`] threads.
pub fn predict(model: &LinnModel, links: &[LabeledLink]) -> Result<Vec<f64>, LinnError> {
    let threads = thread_count().min(links.len()).max(1);
    if threads == 1 {
        return links
            .iter()
            .map(|l| model.forward(&l.intent, &l.filter))
            .collect();
    }
    let chunk = links.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = links
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|l| model.forward(&l.intent, &l.filter))
                        .collect::<Result<Vec<f64>, LinnError>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(links.len());
        for h in handles {
            out.extend(h.join().expect("prediction worker panicked")?);
        }
        Ok(out)
    })
}

/// Metrics of the model's predictions against each link's hidden truth.
pub fn evaluate(model: &LinnModel, links: &[LabeledLink]) -> Result<Metrics, LinnError> {
    let preds = predict(model, links)?;
    let truths: Vec<bool> = links.iter().map(|l| l.truth).collect();
    Ok(Metrics::compute(&preds, &truths)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::icc::{AbstractFilter, AbstractIntent, TriLabel};
    use crate::tde::{Hyper, Instantiation};

    fn toy_links() -> Vec<LabeledLink> {
        let words = ["view", "send", "edit", "pick", "dial", "call"];
        let mut links = Vec::new();
        for (a, wa) in words.iter().enumerate() {
            for (b, wb) in words.iter().enumerate() {
                let truth = a == b;
                links.push(LabeledLink {
                    intent: AbstractIntent::parse(
                        Some(&format!("android.intent.action.{wa}")),
                        ["default"],
                    )
                    .unwrap(),
                    filter: AbstractFilter::parse(
                        [format!("android.intent.action.{wb}").as_str()],
                        ["default"],
                    )
                    .unwrap(),
                    observed: TriLabel::from(truth),
                    truth,
                });
            }
        }
        links
    }

    #[test]
    fn rejects_bad_configs() {
        let mut m = LinnModel::new(Instantiation::StrCnn, Hyper::default(), 0).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&mut m, &toy_links(), &cfg),
            Err(LinnError::InvalidConfig(_))
        ));
        assert!(matches!(
            train(&mut m, &[], &TrainConfig::default()),
            Err(LinnError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn training_is_deterministic_and_descends() {
        let links = toy_links();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 8,
            seed: 4,
            ..TrainConfig::default()
        };
        let run = || {
            let mut m = LinnModel::new(Instantiation::StrCnn, Hyper::default(), 9).unwrap();
            let h = train(&mut m, &links, &cfg).unwrap();
            (h, m)
        };
        let (h1, m1) = run();
        let (h2, m2) = run();
        assert_eq!(h1, h2);
        assert_eq!(m1.store(), m2.store());
        assert_eq!(m1.store().step(), 15);
        assert!(h1[2] < h1[0], "{h1:?}");
    }

    #[test]
    fn predict_matches_forward_under_threads() {
        let links = toy_links();
        let m = LinnModel::new(Instantiation::TypedSimple, Hyper::default(), 1).unwrap();
        let serial: Vec<f64> = links
            .iter()
            .map(|l| m.forward(&l.intent, &l.filter).unwrap())
            .collect();
        assert_eq!(predict(&m, &links).unwrap(), serial);
        let metrics = evaluate(&m, &links).unwrap();
        assert_eq!(metrics.count, links.len());
    }
}
