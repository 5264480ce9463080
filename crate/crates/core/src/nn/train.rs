use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{backward, AdamConfig, AdamState, Batch, LossVariant, MlpModel};
use crate::dataset::{Normalizer, StencilSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: u64,
    /// Records per optimizer step; `None` uses the whole corpus.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub loss: LossVariant,
    pub adam: AdamConfig,
    /// Progress is logged every this many epochs (0 disables).
    pub log_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50_000,
            batch_size: None,
            seed: 0,
            loss: LossVariant::CellWeighted,
            adam: AdamConfig::default(),
            log_every: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        let a = &self.adam;
        if !(a.learning_rate > 0.0)
            || !(0.0..1.0).contains(&a.beta1)
            || !(0.0..1.0).contains(&a.beta2)
            || !(a.epsilon > 0.0)
            || !(a.l2 >= 0.0)
        {
            return Err(Error::Config("invalid optimizer settings".into()));
        }
        Ok(())
    }
}

/// Mean data loss per epoch.
pub type LossHistory = Vec<f64>;

/// Fits `model` to `corpus` (raw records) normalized with `normalizer`.
///
/// Deterministic for a given seed: mini-batch order is drawn from a
/// ChaCha stream and all reductions run in a fixed order.
pub fn train(
    mut model: MlpModel,
    corpus: &[StencilSample],
    normalizer: Normalizer,
    config: &TrainConfig,
) -> Result<(MlpModel, LossHistory)> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Argument("training corpus is empty".into()));
    }
    normalizer.validate()?;
    let full = Batch::from_samples(corpus, &normalizer);
    full.check(&model)?;
    let mut adam = AdamState::for_model(config.adam, &model);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..full.len()).collect();
    let batch_size = config.batch_size.unwrap_or(full.len()).min(full.len());
    let mut history = Vec::with_capacity(config.epochs as usize);

    for epoch in 1..=config.epochs {
        let mut epoch_loss = 0.0;
        let mut n_batches = 0;
        if batch_size == full.len() {
            let g = backward(&model, &full, config.loss, config.adam.l2)?;
            epoch_loss = g.loss;
            n_batches = 1;
            check_finite(epoch_loss, epoch)?;
            adam.step_model(&mut model, &g)?;
        } else {
            order.shuffle(&mut rng);
            for rows in order.chunks(batch_size) {
                let b = full.select(rows);
                let g = backward(&model, &b, config.loss, config.adam.l2)?;
                check_finite(g.loss, epoch)?;
                epoch_loss += g.loss;
                n_batches += 1;
                adam.step_model(&mut model, &g)?;
            }
        }
        let mean = epoch_loss / n_batches as f64;
        history.push(mean);
        if config.log_every > 0 && (epoch % config.log_every == 0 || epoch == 1) {
            log::info!("epoch {epoch:>7}  loss {mean:.6e}");
        }
    }

    model.normalizer = Some(normalizer);
    model.meta.epochs += config.epochs;
    model.meta.final_loss = *history.last().expect("at least one epoch");
    model.meta.seed = config.seed;
    Ok((model, history))
}

fn check_finite(loss: f64, epoch: u64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::TrainingDiverged { epoch })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{fit_normalizer, INPUT_LEN, OUTPUT_LEN};
    use crate::geometry::Point;
    use rand::Rng;

    /// Records whose target is a fixed linear function of a few inputs.
    fn linear_corpus(n: usize) -> Vec<StencilSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        (0..n)
            .map(|k| {
                let inputs: Vec<f64> = (0..INPUT_LEN).map(|_| rng.random_range(0.0..1.0)).collect();
                let target = std::array::from_fn(|v| 1.0 + 0.3 * inputs[v] - 0.2 * inputs[v + 4]);
                StencilSample {
                    case_id: format!("r{k}"),
                    center: Point::new(0.0, 0.0),
                    area_weight: 1.0 + k as f64 * 0.1,
                    inputs,
                    target,
                }
            })
            .collect()
    }

    fn quick_config(epochs: u64) -> TrainConfig {
        TrainConfig {
            epochs,
            seed: 3,
            adam: AdamConfig {
                learning_rate: 1e-3,
                ..Default::default()
            },
            log_every: 0,
            ..Default::default()
        }
    }

    #[test]
    fn linear_map_is_learned() {
        let corpus = linear_corpus(10);
        let norm = fit_normalizer(&corpus).unwrap();
        let model = MlpModel::new(&[INPUT_LEN, 8, OUTPUT_LEN], 1).unwrap();
        let (model, hist) = train(model, &corpus, norm, &quick_config(2000)).unwrap();
        assert!(*hist.last().unwrap() < 1e-4, "final loss {}", hist.last().unwrap());
        assert!(hist.last() < hist.first());
        assert_eq!(model.meta.epochs, 2000);
        assert_eq!(model.normalizer, Some(norm));
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = linear_corpus(10);
        let norm = fit_normalizer(&corpus).unwrap();
        let run = |cfg: &TrainConfig| {
            train(MlpModel::new(&[INPUT_LEN, 6, OUTPUT_LEN], 1).unwrap(), &corpus, norm, cfg).unwrap()
        };
        let cfg = quick_config(50);
        assert_eq!(run(&cfg), run(&cfg));
        let mini = TrainConfig {
            batch_size: Some(3),
            ..cfg
        };
        let (a, ha) = run(&mini);
        let (b, hb) = run(&mini);
        assert_eq!(a, b);
        assert_eq!(ha, hb);
    }

    #[test]
    fn divergence_reports_epoch() {
        let corpus = linear_corpus(4);
        let norm = fit_normalizer(&corpus).unwrap();
        let mut model = MlpModel::new(&[INPUT_LEN, 4, OUTPUT_LEN], 1).unwrap();
        model.layers[0].weights[[0, 0]] = f64::NAN;
        match train(model, &corpus, norm, &quick_config(5)) {
            Err(Error::TrainingDiverged { epoch }) => assert_eq!(epoch, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let corpus = linear_corpus(4);
        let norm = fit_normalizer(&corpus).unwrap();
        let model = MlpModel::new(&[INPUT_LEN, 4, OUTPUT_LEN], 1).unwrap();
        assert!(train(model.clone(), &corpus, norm, &quick_config(0)).is_err());
        assert!(train(model, &[], norm, &quick_config(1)).is_err());
    }
}
