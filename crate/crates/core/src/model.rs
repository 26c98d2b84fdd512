//! Graph-convolutional encoder, rectified-Gaussian sampling, inner-product
//! decoder and the two ELBO terms.
//!
//! Every piece exists in two forms: a `*_on_tape` builder that records the
//! computation on a [`Tape`] so the trainer can differentiate it, and a plain
//! function that evaluates the same builder on constants.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NormalizedGraph;
use crate::numerics::{
    glorot_uniform, standard_normal, DenseMatrix, PairTarget, SparseMatrix, Tape, Var,
};

/// Bounds applied to the log standard deviation before exponentiation.
pub const LOG_SIGMA_MIN: f64 = -6.0;
pub const LOG_SIGMA_MAX: f64 = 6.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Dimension of the latent belief space.
    pub latent_dim: usize,
    /// Widths of the hidden graph-convolution layers.
    pub hidden_dims: Vec<usize>,
    /// Rectify sampled latents (`max(z, 0)`). Off reproduces the plain
    /// Gaussian ablation.
    pub rectified: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: 3,
            hidden_dims: vec![32],
            rectified: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim < 2 {
            return Err(Error::Config(format!(
                "latent_dim must be at least 2, got {}",
                self.latent_dim
            )));
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(Error::Config(
                "hidden_dims must be a non-empty list of positive widths".into(),
            ));
        }
        Ok(())
    }
}

/// Node features fed to the first layer.
#[derive(Clone, Debug, Default)]
pub enum Features {
    /// `X = I`; the first layer multiplies the adjacency by its weights
    /// directly instead of materializing an `N x N` identity.
    #[default]
    Identity,
    Dense(DenseMatrix),
}

impl Features {
    pub fn width(&self, n_nodes: usize) -> usize {
        match self {
            Features::Identity => n_nodes,
            Features::Dense(x) => x.cols(),
        }
    }
}

/// Encoder weights. `hidden[l][r]` is the layer-`l` weight of relation `r`;
/// the two heads read the last hidden state and also have one matrix per
/// relation.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub hidden: Vec<Vec<DenseMatrix>>,
    pub mu_head: Vec<DenseMatrix>,
    pub sigma_head: Vec<DenseMatrix>,
}

impl EncoderParams {
    /// Glorot-uniform initialization.
    pub fn init<R: Rng + ?Sized>(
        config: &ModelConfig,
        n_features: usize,
        n_relations: usize,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        if n_relations == 0 {
            return Err(Error::Contract("encoder needs at least one relation".into()));
        }
        let mut dims = vec![n_features];
        dims.extend(&config.hidden_dims);
        let hidden = dims
            .windows(2)
            .map(|w| (0..n_relations).map(|_| glorot_uniform(w[0], w[1], rng)).collect())
            .collect();
        let last = *dims.last().expect("non-empty");
        let mu_head = (0..n_relations)
            .map(|_| glorot_uniform(last, config.latent_dim, rng))
            .collect();
        let sigma_head = (0..n_relations)
            .map(|_| glorot_uniform(last, config.latent_dim, rng))
            .collect();
        Ok(Self {
            hidden,
            mu_head,
            sigma_head,
        })
    }

    pub fn n_relations(&self) -> usize {
        self.mu_head.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.mu_head[0].cols()
    }

    /// All tensors with stable names, in a fixed order.
    pub fn named(&self) -> Vec<(String, &DenseMatrix)> {
        let mut out = Vec::new();
        for (l, layer) in self.hidden.iter().enumerate() {
            for (r, w) in layer.iter().enumerate() {
                out.push((format!("encoder.hidden.{l}.rel{r}"), w));
            }
        }
        for (r, w) in self.mu_head.iter().enumerate() {
            out.push((format!("encoder.mu.rel{r}"), w));
        }
        for (r, w) in self.sigma_head.iter().enumerate() {
            out.push((format!("encoder.log_sigma.rel{r}"), w));
        }
        out
    }

    pub fn tensors(&self) -> Vec<&DenseMatrix> {
        self.named().into_iter().map(|(_, m)| m).collect()
    }

    /// Rebuilds parameters from tensors in [`EncoderParams::named`] order.
    pub fn from_tensors(
        n_layers: usize,
        n_relations: usize,
        mut tensors: Vec<DenseMatrix>,
    ) -> Result<Self> {
        let expected = (n_layers + 2) * n_relations;
        if tensors.len() != expected || n_relations == 0 {
            return Err(Error::Data(format!(
                "expected {expected} encoder tensors, found {}",
                tensors.len()
            )));
        }
        let sigma_head = tensors.split_off(tensors.len() - n_relations);
        let mu_head = tensors.split_off(tensors.len() - n_relations);
        let hidden = tensors
            .chunks(n_relations)
            .map(|c| c.to_vec())
            .collect();
        Ok(Self {
            hidden,
            mu_head,
            sigma_head,
        })
    }

    pub fn into_tensors(self) -> Vec<DenseMatrix> {
        let mut out: Vec<DenseMatrix> = self.hidden.into_iter().flatten().collect();
        out.extend(self.mu_head);
        out.extend(self.sigma_head);
        out
    }

    /// Records every tensor on the tape, as leaves or as constants.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> EncoderVars {
        let mut put = |m: &DenseMatrix| {
            if trainable {
                tape.leaf(m.clone())
            } else {
                tape.constant(m.clone())
            }
        };
        EncoderVars {
            hidden: self
                .hidden
                .iter()
                .map(|layer| layer.iter().map(&mut put).collect())
                .collect(),
            mu_head: self.mu_head.iter().map(&mut put).collect(),
            sigma_head: self.sigma_head.iter().map(&mut put).collect(),
        }
    }
}

/// Tape handles mirroring [`EncoderParams`].
#[derive(Clone, Debug)]
pub struct EncoderVars {
    pub hidden: Vec<Vec<Var>>,
    pub mu_head: Vec<Var>,
    pub sigma_head: Vec<Var>,
}

impl EncoderVars {
    /// Handles in [`EncoderParams::named`] order.
    pub fn flat(&self) -> Vec<Var> {
        let mut out: Vec<Var> = self.hidden.iter().flatten().copied().collect();
        out.extend(&self.mu_head);
        out.extend(&self.sigma_head);
        out
    }

    pub fn from_flat(n_layers: usize, n_relations: usize, vars: &[Var]) -> Self {
        let hidden = vars[..n_layers * n_relations]
            .chunks(n_relations)
            .map(|c| c.to_vec())
            .collect();
        let mu_head = vars[n_layers * n_relations..(n_layers + 1) * n_relations].to_vec();
        let sigma_head = vars[(n_layers + 1) * n_relations..].to_vec();
        Self {
            hidden,
            mu_head,
            sigma_head,
        }
    }
}

/// `Σ_r Ã_r · input · W_r`.
fn relational_propagate(
    tape: &mut Tape,
    adjacency: &[Arc<SparseMatrix>],
    input: Option<Var>,
    weights: &[Var],
) -> Result<Var> {
    if adjacency.len() != weights.len() {
        return Err(Error::dim(
            "encode",
            format!(
                "{} relations in the graph, {} weight matrices",
                adjacency.len(),
                weights.len()
            ),
        ));
    }
    let mut acc: Option<Var> = None;
    for (a, &w) in adjacency.iter().zip(weights) {
        let xw = match input {
            Some(x) => tape.matmul(x, w)?,
            None => w,
        };
        let msg = tape.spmm(a, xw)?;
        acc = Some(match acc {
            Some(prev) => tape.add(prev, msg)?,
            None => msg,
        });
    }
    Ok(acc.expect("at least one relation"))
}

/// Records the encoder. Returns `(mu, log_sigma)`, with `log_sigma` already
/// clamped to `[LOG_SIGMA_MIN, LOG_SIGMA_MAX]`.
pub fn encode_on_tape(
    tape: &mut Tape,
    graph: &NormalizedGraph,
    features: &Features,
    vars: &EncoderVars,
) -> Result<(Var, Var)> {
    let adjacency = graph.relations();
    let n = graph.n_nodes();
    let mut state: Option<Var> = match features {
        Features::Identity => None,
        Features::Dense(x) => {
            if x.rows() != n {
                return Err(Error::dim(
                    "encode",
                    format!("{} feature rows for {n} nodes", x.rows()),
                ));
            }
            Some(tape.constant(x.clone()))
        }
    };
    if let Some(first) = vars.hidden.first().and_then(|l| l.first()) {
        let expected = features.width(n);
        if tape.value(*first).rows() != expected {
            return Err(Error::dim(
                "encode",
                format!(
                    "first layer expects {} input features, graph provides {expected}",
                    tape.value(*first).rows()
                ),
            ));
        }
    }
    for layer in &vars.hidden {
        let pre = relational_propagate(tape, adjacency, state, layer)?;
        state = Some(tape.relu(pre));
    }
    let mu = relational_propagate(tape, adjacency, state, &vars.mu_head)?;
    let raw_sigma = relational_propagate(tape, adjacency, state, &vars.sigma_head)?;
    let log_sigma = tape.clamp(raw_sigma, LOG_SIGMA_MIN, LOG_SIGMA_MAX)?;
    Ok((mu, log_sigma))
}

/// Evaluates the encoder. Returns `(mu, log_sigma)`.
pub fn encode(
    graph: &NormalizedGraph,
    features: &Features,
    params: &EncoderParams,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape, false);
    let (mu, ls) = encode_on_tape(&mut tape, graph, features, &vars)?;
    Ok((tape.value(mu).clone(), tape.value(ls).clone()))
}

/// A reparameterized draw from the (rectified) Gaussian posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentPosterior {
    pub mu: DenseMatrix,
    pub log_sigma: DenseMatrix,
    pub z: DenseMatrix,
    /// The standard-normal draw used to produce `z`.
    pub noise: DenseMatrix,
}

/// Records `z = mu + exp(log_sigma) * noise`, followed by `max(z, 0)` when
/// `rectified`.
pub fn sample_on_tape(
    tape: &mut Tape,
    mu: Var,
    log_sigma: Var,
    noise: &DenseMatrix,
    rectified: bool,
) -> Result<Var> {
    let sigma = tape.exp(log_sigma);
    let eps = tape.constant(noise.clone());
    let spread = tape.mul(sigma, eps)?;
    let z = tape.add(mu, spread)?;
    Ok(if rectified { tape.max_zero(z) } else { z })
}

/// Draws the noise from a generator seeded with `seed`.
pub fn sample_latent(
    mu: &DenseMatrix,
    log_sigma: &DenseMatrix,
    seed: u64,
    rectified: bool,
) -> Result<LatentPosterior> {
    mu.check_same_shape(log_sigma, "sample_latent")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = standard_normal(mu.rows(), mu.cols(), &mut rng);
    let mut tape = Tape::new();
    let m = tape.constant(mu.clone());
    let ls = tape.constant(log_sigma.clone());
    let z = sample_on_tape(&mut tape, m, ls, &noise, rectified)?;
    Ok(LatentPosterior {
        mu: mu.clone(),
        log_sigma: log_sigma.clone(),
        z: tape.value(z).clone(),
        noise,
    })
}

/// Records `sigmoid(Z Zᵀ)`.
pub fn decode_on_tape(tape: &mut Tape, z: Var) -> Result<Var> {
    let zt = tape.transpose(z);
    let logits = tape.matmul(z, zt)?;
    Ok(tape.sigmoid(logits))
}

/// Edge probabilities between every pair of nodes.
pub fn decode_all(z: &DenseMatrix) -> Result<DenseMatrix> {
    let mut tape = Tape::new();
    let zv = tape.constant(z.clone());
    let p = decode_on_tape(&mut tape, zv)?;
    Ok(tape.value(p).clone())
}

/// Reconstruction target and loss weights, prepared once per graph.
#[derive(Clone, Debug)]
pub struct ReconstructionTarget {
    pairs: PairTarget,
}

impl ReconstructionTarget {
    pub fn new(target: &SparseMatrix, pos_weight: f64, norm: f64) -> Result<Self> {
        Ok(Self {
            pairs: PairTarget::new(target, pos_weight, norm)?,
        })
    }

    /// Uses the positive-class weight `(N² - M') / M'` and unit norm.
    pub fn for_graph(graph: &NormalizedGraph) -> Result<Self> {
        Self::new(graph.target(), default_pos_weight(graph), 1.0)
    }

    pub fn pairs(&self) -> &PairTarget {
        &self.pairs
    }
}

/// `(N² - M') / M'` where `M'` counts target ones.
pub fn default_pos_weight(graph: &NormalizedGraph) -> f64 {
    let n2 = (graph.n_nodes() * graph.n_nodes()) as f64;
    let m = graph.positive_count() as f64;
    (n2 - m) / m
}

/// Records the weighted binary cross-entropy of the decoded latents `z`:
/// `-norm * mean(w⁺ t log p + (1 - t) log(1 - p))` with `p = sigmoid(z zᵀ)`.
pub fn reconstruction_loss_on_tape(
    tape: &mut Tape,
    z: Var,
    target: &ReconstructionTarget,
) -> Result<Var> {
    tape.pair_loss(z, &target.pairs)
}

/// The same loss evaluated at given probabilities `p`.
pub fn reconstruction_loss(
    p: &DenseMatrix,
    target: &SparseMatrix,
    pos_weight: f64,
    norm: f64,
) -> Result<f64> {
    ReconstructionTarget::new(target, pos_weight, norm)?
        .pairs
        .loss_at(p)
}

/// Records the per-node KL divergence of `N(mu, sigma²)` from `N(0, I)`:
/// `(1/N) Σ ½(μ² + σ² - 1 - 2 log σ)`.
pub fn kl_divergence_on_tape(tape: &mut Tape, mu: Var, log_sigma: Var) -> Result<Var> {
    let (n, t) = tape.value(mu).shape();
    if tape.value(log_sigma).shape() != (n, t) {
        return Err(Error::dim("kl_divergence", "mu and log_sigma shapes differ"));
    }
    let mu_sq = tape.mul(mu, mu)?;
    let two_ls = tape.scale(log_sigma, 2.0);
    let var = tape.exp(two_ls);
    let neg_two_ls = tape.scale(two_ls, -1.0);
    let a = tape.add(mu_sq, var)?;
    let b = tape.add(a, neg_two_ls)?;
    let total = tape.sum(b);
    let shifted = tape.add_scalar(total, -((n * t) as f64))?;
    Ok(tape.scale(shifted, 0.5 / n.max(1) as f64))
}

pub fn kl_divergence(mu: &DenseMatrix, log_sigma: &DenseMatrix) -> Result<f64> {
    let mut tape = Tape::new();
    let m = tape.constant(mu.clone());
    let ls = tape.constant(log_sigma.clone());
    let kl = kl_divergence_on_tape(&mut tape, m, ls)?;
    tape.value(kl).item()
}
