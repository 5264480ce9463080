//! Trains a small network on a synthetic smooth map, saves a checkpoint and
//! reloads it.
//!
//! ```text
//! cargo run --release --example train_network -- [epochs]
//! ```

use nnlci::dataset::{fit_normalizer, StencilSample, INPUT_LEN, OUTPUT_LEN};
use nnlci::geometry::Point;
use nnlci::nn::{load_checkpoint, save_checkpoint, train, AdamConfig, MlpModel, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> nnlci::Result<()> {
    let epochs: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let corpus: Vec<StencilSample> = (0..200)
        .map(|k| {
            let inputs: Vec<f64> = (0..INPUT_LEN).map(|_| rng.random_range(0.5..1.5)).collect();
            let target = std::array::from_fn(|v| inputs[v] * (1.0 + 0.5 * inputs[100 + v]).sin());
            StencilSample {
                case_id: "synthetic".into(),
                center: Point::new(k as f64, 0.0),
                area_weight: 1.0,
                inputs,
                target,
            }
        })
        .collect();
    let normalizer = fit_normalizer(&corpus)?;
    let config = TrainConfig {
        epochs,
        seed: 7,
        adam: AdamConfig {
            learning_rate: 3e-3,
            ..Default::default()
        },
        log_every: 0,
        ..Default::default()
    };
    let model = MlpModel::new(&[INPUT_LEN, 32, 32, OUTPUT_LEN], config.seed)?;
    let (model, history) = train(model, &corpus, normalizer, &config)?;
    for e in [0, history.len() / 4, history.len() / 2, history.len() - 1] {
        println!("epoch {:>5}: loss {:.4e}", e + 1, history[e]);
    }

    let path = std::env::temp_dir().join("nnlci-example-model.bin");
    save_checkpoint(&model, &path)?;
    let back = load_checkpoint(&path)?;
    assert_eq!(back, model);
    println!("checkpoint {} reloads identically ({} parameters)", path.display(), model.n_parameters());
    Ok(())
}
