//! Binary checkpoint: magic, version, layer sizes, row-major weights and
//! biases, normalizer and training metadata, all little-endian.

use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Layer, MlpModel, TrainingMeta};
use crate::dataset::Normalizer;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"NNLCIMLP";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn to_bytes(model: &MlpModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + model.n_parameters() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let sizes = model.sizes();
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for s in &sizes {
        out.extend_from_slice(&(*s as u32).to_le_bytes());
    }
    let mut put = |xs: &mut dyn Iterator<Item = f64>| {
        for x in xs {
            out.extend_from_slice(&x.to_le_bytes());
        }
    };
    for l in &model.layers {
        put(&mut l.weights.iter().copied());
        put(&mut l.bias.iter().copied());
    }
    match &model.normalizer {
        Some(n) => {
            out.push(1);
            for x in n.state_min.iter().chain(&n.state_max).chain(&n.h_min).chain(&n.h_max) {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        None => out.push(0),
    }
    out.extend_from_slice(&model.meta.epochs.to_le_bytes());
    out.extend_from_slice(&model.meta.final_loss.to_le_bytes());
    out.extend_from_slice(&model.meta.seed.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> std::result::Result<&[u8], String> {
        if self.buf.len() < n {
            return Err("checkpoint is truncated".into());
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn f64s<const N: usize>(&mut self) -> std::result::Result<[f64; N], String> {
        let mut a = [0.0; N];
        for x in &mut a {
            *x = self.f64()?;
        }
        Ok(a)
    }
}

pub fn from_bytes(bytes: &[u8]) -> std::result::Result<MlpModel, String> {
    let mut r = Reader { buf: bytes };
    if r.take(MAGIC.len())? != MAGIC {
        return Err("not a model checkpoint".into());
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("checkpoint version {version}, expected {CHECKPOINT_VERSION}"));
    }
    let n_sizes = r.u32()? as usize;
    if !(2..=64).contains(&n_sizes) {
        return Err(format!("implausible layer count {n_sizes}"));
    }
    let sizes = (0..n_sizes)
        .map(|_| r.u32().map(|s| s as usize))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if sizes.iter().any(|&s| s == 0 || s > 1 << 20) {
        return Err(format!("implausible layer sizes {sizes:?}"));
    }
    let mut layers = Vec::with_capacity(n_sizes - 1);
    for w in sizes.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        let weights = (0..n_in * n_out).map(|_| r.f64()).collect::<std::result::Result<Vec<_>, _>>()?;
        let bias = (0..n_out).map(|_| r.f64()).collect::<std::result::Result<Vec<_>, _>>()?;
        layers.push(Layer {
            weights: Array2::from_shape_vec((n_out, n_in), weights).expect("sized above"),
            bias: Array1::from(bias),
        });
    }
    let normalizer = match r.u8()? {
        0 => None,
        1 => Some(Normalizer {
            state_min: r.f64s()?,
            state_max: r.f64s()?,
            h_min: r.f64s()?,
            h_max: r.f64s()?,
        }),
        t => return Err(format!("bad normalizer tag {t}")),
    };
    let meta = TrainingMeta {
        epochs: r.u64()?,
        final_loss: r.f64()?,
        seed: r.u64()?,
    };
    if !r.buf.is_empty() {
        return Err(format!("{} trailing bytes", r.buf.len()));
    }
    Ok(MlpModel {
        layers,
        normalizer,
        meta,
    })
}

pub fn save_checkpoint(model: &MlpModel, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, &to_bytes(model))
}

pub fn load_checkpoint(path: &Path) -> Result<MlpModel> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingArtifact {
                path: path.to_path_buf(),
                command: "train".into(),
            })
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    from_bytes(&bytes).map_err(|m| Error::format(path, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> MlpModel {
        let mut m = MlpModel::new(&[202, 9, 5, 4], 8).unwrap();
        m.normalizer = Some(Normalizer {
            state_min: [0.5, 1.0, -0.3, 2.0],
            state_max: [2.5, 4.0, 0.3, 9.0],
            h_min: [0.1, 0.05],
            h_max: [0.2, 0.1],
        });
        m.meta = TrainingMeta {
            epochs: 1234,
            final_loss: 3.5e-4,
            seed: 8,
        };
        m
    }

    #[test]
    fn round_trip_preserves_everything() {
        let m = model();
        let back = from_bytes(&to_bytes(&m)).unwrap();
        assert_eq!(back, m);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let x: Vec<f64> = (0..202).map(|_| rng.random_range(-1.0..2.0)).collect();
            assert_eq!(m.forward(&x).unwrap(), back.forward(&x).unwrap());
        }
    }

    #[test]
    fn file_round_trip_and_architecture_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let two = MlpModel::new(&[202, 4], 1).unwrap();
        save_checkpoint(&two, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.sizes(), vec![202, 4]);
        assert_eq!(back, two);
    }

    #[test]
    fn corrupt_files_are_errors() {
        let bytes = to_bytes(&model());
        for cut in [0, 5, 12, 40, bytes.len() - 1] {
            assert!(from_bytes(&bytes[..cut]).is_err());
        }
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(from_bytes(&longer).is_err());
        let mut wrong_version = bytes;
        wrong_version[8] = 9;
        assert!(from_bytes(&wrong_version).unwrap_err().contains("version"));
    }

    #[test]
    fn missing_file_names_the_producing_command() {
        let err = load_checkpoint(Path::new("/nonexistent/model.bin")).unwrap_err();
        assert!(err.to_string().contains("nnlci train"));
    }
}
