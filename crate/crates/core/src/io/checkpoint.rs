//! Text checkpoint of a trained model.
//!
//! ```text
//! IVGAE1
//! model <model config as one-line JSON>
//! train <train config as one-line JSON>
//! matrix <name> <rows> <cols>
//! <row 0: cols space-separated numbers>
//! ...
//! end
//! ```
//!
//! Numbers use the shortest decimal form that parses back to the same
//! `f64`, so a checkpoint round-trips bit for bit.

use std::path::Path;

use super::{read_text, write_atomic};
use crate::error::{Error, Result};
use crate::model::{EncoderParams, ModelConfig};
use crate::numerics::DenseMatrix;
use crate::tc::DiscriminatorParams;
use crate::trainer::{TrainConfig, TrainedModel};

pub const CHECKPOINT_MAGIC: &str = "IVGAE1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub encoder: EncoderParams,
    pub discriminator: Option<DiscriminatorParams>,
}

impl Checkpoint {
    pub fn from_trained(m: &TrainedModel) -> Self {
        Self {
            model_config: m.model_config.clone(),
            train_config: m.train_config.clone(),
            encoder: m.encoder.clone(),
            discriminator: m.discriminator.clone(),
        }
    }

    pub fn rectified(&self) -> bool {
        self.model_config.rectified && !self.train_config.ablations.gaussian
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{CHECKPOINT_MAGIC}\n");
        out.push_str(&format!(
            "model {}\n",
            serde_json::to_string(&self.model_config).expect("config serializes")
        ));
        out.push_str(&format!(
            "train {}\n",
            serde_json::to_string(&self.train_config).expect("config serializes")
        ));
        let mut named = self.encoder.named();
        if let Some(d) = &self.discriminator {
            named.extend(d.named());
        }
        for (name, m) in named {
            out.push_str(&format!("matrix {name} {} {}\n", m.rows(), m.cols()));
            for i in 0..m.rows() {
                let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| err(text.lines().count() + 1, format!("unexpected end of file, expected {what}")))
        };
        let (n, magic) = next("magic")?;
        if magic != CHECKPOINT_MAGIC {
            return Err(err(n, format!("not a checkpoint (expected {CHECKPOINT_MAGIC:?})")));
        }
        let (n, model) = next("model line")?;
        let model_config: ModelConfig = model
            .strip_prefix("model ")
            .ok_or_else(|| err(n, "expected `model <json>`".into()))
            .and_then(|j| serde_json::from_str(j).map_err(|e| err(n, e.to_string())))?;
        let (n, train) = next("train line")?;
        let train_config: TrainConfig = train
            .strip_prefix("train ")
            .ok_or_else(|| err(n, "expected `train <json>`".into()))
            .and_then(|j| serde_json::from_str(j).map_err(|e| err(n, e.to_string())))?;

        let mut matrices: Vec<(String, DenseMatrix)> = Vec::new();
        loop {
            let (n, line) = next("`matrix` or `end`")?;
            if line == "end" {
                break;
            }
            let parts: Vec<&str> = line.split(' ').collect();
            let (name, rows, cols) = match parts.as_slice() {
                ["matrix", name, r, c] => (
                    name.to_string(),
                    r.parse::<usize>().map_err(|e| err(n, format!("rows: {e}")))?,
                    c.parse::<usize>().map_err(|e| err(n, format!("cols: {e}")))?,
                ),
                _ => return Err(err(n, format!("expected `matrix <name> <rows> <cols>`, found {line:?}"))),
            };
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (n, row) = next("matrix row")?;
                let values: Vec<f64> = row
                    .split(' ')
                    .map(|v| v.parse::<f64>().map_err(|e| err(n, format!("{v:?}: {e}"))))
                    .collect::<Result<_>>()?;
                if values.len() != cols {
                    return Err(err(n, format!("expected {cols} values, found {}", values.len())));
                }
                data.extend(values);
            }
            matrices.push((name, DenseMatrix::from_vec(rows, cols, data)?));
        }

        let data_err = |m: String| Error::Data(format!("{}: {m}", path.display()));
        let (disc, enc): (Vec<_>, Vec<_>) = matrices
            .into_iter()
            .partition(|(name, _)| name.starts_with("discriminator."));
        let n_relations = enc.iter().filter(|(n, _)| n.starts_with("encoder.mu.")).count();
        if n_relations == 0 {
            return Err(data_err("no encoder.mu tensors".into()));
        }
        let n_layers = enc
            .iter()
            .filter(|(n, _)| n.starts_with("encoder.hidden."))
            .count()
            / n_relations;
        let names: Vec<String> = enc.iter().map(|(n, _)| n.clone()).collect();
        let encoder = EncoderParams::from_tensors(
            n_layers,
            n_relations,
            enc.into_iter().map(|(_, m)| m).collect(),
        )?;
        let expected: Vec<String> = encoder.named().into_iter().map(|(n, _)| n).collect();
        if names != expected {
            return Err(data_err(format!("unexpected encoder tensors {names:?}")));
        }
        let discriminator = if disc.is_empty() {
            None
        } else {
            let names: Vec<String> = disc.iter().map(|(n, _)| n.clone()).collect();
            let d = DiscriminatorParams::from_tensors(disc.into_iter().map(|(_, m)| m).collect())?;
            let expected: Vec<String> = d.named().into_iter().map(|(n, _)| n).collect();
            if names != expected {
                return Err(data_err(format!("unexpected discriminator tensors {names:?}")));
            }
            Some(d)
        };
        Ok(Self {
            model_config,
            train_config,
            encoder,
            discriminator,
        })
    }
}

pub fn write_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    write_atomic(path, checkpoint.to_text().as_bytes())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::parse(&read_text(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(with_disc: bool) -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model_config = ModelConfig::default();
        let encoder = EncoderParams::init(&model_config, 7, 2, &mut rng).unwrap();
        let mut encoder = encoder;
        encoder.mu_head[1][(0, 0)] = 1e-300;
        encoder.mu_head[1][(0, 1)] = -0.1;
        Checkpoint {
            model_config,
            train_config: TrainConfig::default(),
            encoder,
            discriminator: with_disc.then(|| DiscriminatorParams::init(3, 8, &mut rng)),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        for with_disc in [true, false] {
            let c = sample(with_disc);
            let text = c.to_text();
            assert!(text.starts_with("IVGAE1\nmodel {"));
            assert!(text.ends_with("end\n"));
            let back = Checkpoint::parse(&text, Path::new("c")).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_text(), text);
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let text = sample(true).to_text();
        let p = Path::new("c");
        assert!(Checkpoint::parse("IVGAE0\n", p).is_err());
        assert!(Checkpoint::parse(&text.replace("\nend\n", "\n"), p).is_err());
        let truncated: String = text.lines().take(6).collect::<Vec<_>>().join("\n");
        assert!(matches!(Checkpoint::parse(&truncated, p), Err(Error::Parse { .. })));
        let renamed = text.replace("encoder.mu.rel1", "encoder.mu.relX");
        assert!(Checkpoint::parse(&renamed, p).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ivgae");
        let c = sample(true);
        write_checkpoint(&path, &c).unwrap();
        assert_eq!(read_checkpoint(&path).unwrap(), c);
    }
}
