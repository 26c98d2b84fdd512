//! The joint training loop.
//!
//! Each step encodes the full graph, draws one reparameterized sample,
//! decodes every pair and minimizes
//! `recon + β·KL + λ·tc_penalty`, then takes one discriminator step on the
//! detached sample and feeds the smoothed KL to the β controller.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{Ema, PiConfig, PiController};
use crate::error::{Error, Result};
use crate::graph::{claim_projection, user_projection, Bhin, NormalizedGraph};
use crate::model::{
    encode, encode_on_tape, kl_divergence_on_tape, reconstruction_loss_on_tape,
    sample_latent, sample_on_tape, EncoderParams, EncoderVars, Features, ModelConfig,
    ReconstructionTarget,
};
use crate::numerics::{standard_normal, AdamState, DenseMatrix, Parameter, Tape, Var};
use crate::tc::{tc_penalty_on_tape, Discriminator, DiscriminatorParams};

const STREAM_INIT: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_DISCRIMINATOR: u64 = 2;

/// Switches that remove one component of the model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ablations {
    /// Drop the total-correlation penalty and the discriminator.
    pub no_tc: bool,
    /// Fix β at 1 instead of running the controller.
    pub no_pi: bool,
    /// Use a plain Gaussian latent (no rectification).
    pub gaussian: bool,
    /// Learn user and claim embeddings on separate projection graphs.
    pub separate: bool,
}

impl Ablations {
    pub fn label(&self) -> &'static str {
        match (self.no_tc, self.no_pi, self.gaussian, self.separate) {
            (false, false, false, false) => "full",
            (true, false, false, false) => "no_tc",
            (false, true, false, false) => "no_pi",
            (false, false, true, false) => "gaussian",
            (false, false, false, true) => "separate",
            _ => "combined",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    pub lr_vae: f64,
    pub lr_disc: f64,
    pub lambda_tc: f64,
    pub disc_hidden: usize,
    pub log_every: usize,
    /// Stop once the mean reconstruction loss of the last `patience` epochs
    /// is not at least `min_delta` below the mean of the `patience` epochs
    /// before them. Zero (the default) disables early stopping; a window of
    /// 50 is a reasonable choice once the KL weight has settled.
    pub patience: usize,
    pub min_delta: f64,
    pub pi: PiConfig,
    pub ablations: Ablations,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            seed: 0,
            lr_vae: 0.01,
            lr_disc: 0.001,
            lambda_tc: 0.01,
            disc_hidden: 64,
            log_every: 1,
            patience: 0,
            min_delta: 1e-5,
            pi: PiConfig::default(),
            ablations: Ablations::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.lambda_tc >= 0.0) || !self.lambda_tc.is_finite() {
            return Err(Error::Config(format!(
                "lambda_tc must be a non-negative number, got {}",
                self.lambda_tc
            )));
        }
        if !(self.lr_vae > 0.0 && self.lr_disc > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.disc_hidden == 0 || self.log_every == 0 {
            return Err(Error::Config("disc_hidden and log_every must be positive".into()));
        }
        if !(self.min_delta >= 0.0) {
            return Err(Error::Config("min_delta must be non-negative".into()));
        }
        self.pi.validate()
    }
}

/// One logged training step.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    /// 1-based step number.
    pub step: usize,
    pub recon: f64,
    pub kl: f64,
    /// Moving average of the KL seen by the controller after this step.
    pub kl_smoothed: f64,
    /// β used for this step's loss.
    pub beta: f64,
    pub tc: f64,
    pub disc: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainTrace {
    pub const HEADER: &'static str = "step,recon,kl,beta,tc,disc,wall_ms";

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn column(&self, f: impl Fn(&TraceRecord) -> f64) -> Vec<f64> {
        self.records.iter().map(f).collect()
    }

    /// Writes the trace as CSV. Floats use the shortest round-trip form.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::HEADER)?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:?},{:?},{:?},{:?},{:?},{:?}",
                r.step, r.recon, r.kl, r.beta, r.tc, r.disc, r.wall_ms
            )?;
        }
        Ok(())
    }

    /// The trace with every `wall_ms` zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> TrainTrace {
        TrainTrace {
            records: self
                .records
                .iter()
                .map(|r| TraceRecord {
                    wall_ms: 0.0,
                    ..r.clone()
                })
                .collect(),
        }
    }
}

/// Parameters and history of a finished run.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub encoder: EncoderParams,
    /// Absent when the run used the no-tc ablation.
    pub discriminator: Option<DiscriminatorParams>,
    pub trace: TrainTrace,
    /// Number of steps actually taken (early stopping may cut the run).
    pub steps: usize,
}

impl TrainedModel {
    /// Whether sampled latents were rectified during training.
    pub fn rectified(&self) -> bool {
        self.model_config.rectified && !self.train_config.ablations.gaussian
    }
}

/// Values of the loss terms at one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveTerms {
    pub recon: f64,
    pub kl: f64,
    pub tc: f64,
    pub total: f64,
}

/// Handles to the recorded objective.
#[derive(Clone, Copy, Debug)]
pub struct ObjectiveVars {
    pub z: Var,
    pub recon: Var,
    pub kl: Var,
    pub tc: Option<Var>,
    pub total: Var,
}

/// Everything the objective needs besides the encoder weights.
#[derive(Clone, Copy, Debug)]
pub struct ObjectiveInputs<'a> {
    pub graph: &'a NormalizedGraph,
    pub features: &'a Features,
    pub target: &'a ReconstructionTarget,
    pub noise: &'a DenseMatrix,
    pub rectified: bool,
    pub beta: f64,
    pub lambda_tc: f64,
    /// `None` omits the total-correlation term.
    pub discriminator: Option<&'a DiscriminatorParams>,
}

/// Records `recon + β·KL + λ·tc_penalty` on the tape.
pub fn objective_on_tape(
    tape: &mut Tape,
    vars: &EncoderVars,
    inputs: &ObjectiveInputs<'_>,
) -> Result<ObjectiveVars> {
    let (mu, log_sigma) = encode_on_tape(tape, inputs.graph, inputs.features, vars)?;
    let z = sample_on_tape(tape, mu, log_sigma, inputs.noise, inputs.rectified)?;
    let recon = reconstruction_loss_on_tape(tape, z, inputs.target)?;
    let kl = kl_divergence_on_tape(tape, mu, log_sigma)?;
    let weighted_kl = tape.scale(kl, inputs.beta);
    let mut total = tape.add(recon, weighted_kl)?;
    let tc = match inputs.discriminator {
        Some(d) => {
            let tc = tc_penalty_on_tape(tape, z, d)?;
            let weighted = tape.scale(tc, inputs.lambda_tc);
            total = tape.add(total, weighted)?;
            Some(tc)
        }
        None => None,
    };
    Ok(ObjectiveVars {
        z,
        recon,
        kl,
        tc,
        total,
    })
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Trains the model on `graph`. Deterministic given `train.seed`, apart from
/// the `wall_ms` column of the trace.
pub fn train(
    graph: &NormalizedGraph,
    features: &Features,
    model: &ModelConfig,
    train: &TrainConfig,
) -> Result<TrainedModel> {
    model.validate()?;
    train.validate()?;
    let ablations = &train.ablations;
    let rectified = model.rectified && !ablations.gaussian;
    let n = graph.n_nodes();

    let mut init_rng = stream_rng(train.seed, STREAM_INIT);
    let mut noise_rng = stream_rng(train.seed, STREAM_NOISE);
    let mut disc_rng = stream_rng(train.seed, STREAM_DISCRIMINATOR);

    let encoder = EncoderParams::init(
        model,
        features.width(n),
        graph.relations().len(),
        &mut init_rng,
    )?;
    let n_layers = encoder.hidden.len();
    let n_relations = encoder.n_relations();
    let mut params: Vec<Parameter> = encoder.into_tensors().into_iter().map(Parameter::new).collect();
    let mut adam = AdamState::new(train.lr_vae)?;
    let mut discriminator = if ablations.no_tc {
        None
    } else {
        let init = DiscriminatorParams::init(model.latent_dim, train.disc_hidden, &mut init_rng);
        Some(Discriminator::new(init, train.lr_disc)?)
    };
    let mut controller = PiController::new(train.pi.clone())?;
    let mut kl_ema = Ema::new(train.pi.ema_decay);
    let mut beta = if ablations.no_pi { 1.0 } else { controller.beta() };
    let target = ReconstructionTarget::for_graph(graph)?;

    let mut trace = TrainTrace::default();
    let mut recon_history = Vec::with_capacity(train.epochs);
    let mut steps = 0;
    let started = Instant::now();

    for step in 1..=train.epochs {
        let noise = standard_normal(n, model.latent_dim, &mut noise_rng);
        let disc_params = discriminator.as_ref().map(Discriminator::params);
        let inputs = ObjectiveInputs {
            graph,
            features,
            target: &target,
            noise: &noise,
            rectified,
            beta,
            lambda_tc: train.lambda_tc,
            discriminator: disc_params.as_ref(),
        };
        let mut tape = Tape::new();
        let vars = register(&mut tape, &params, n_layers, n_relations);
        let obj = objective_on_tape(&mut tape, &vars, &inputs)?;
        let terms = ObjectiveTerms {
            recon: tape.value(obj.recon).item()?,
            kl: tape.value(obj.kl).item()?,
            tc: match obj.tc {
                Some(v) => tape.value(v).item()?,
                None => 0.0,
            },
            total: tape.value(obj.total).item()?,
        };
        if ![terms.recon, terms.kl, terms.tc, terms.total]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::Numeric(format!(
                "non-finite loss at step {step}: recon={} kl={} tc={} beta={beta} total={}",
                terms.recon, terms.kl, terms.tc, terms.total
            )));
        }
        tape.backward(obj.total)?;
        for (p, v) in params.iter_mut().zip(vars.flat()) {
            p.grad.add_assign(tape.grad(v).expect("encoder weights are leaves"))?;
        }
        adam.step(&mut params)?;

        let disc_loss = match discriminator.as_mut() {
            Some(d) => d.step(tape.value(obj.z), &mut disc_rng)?,
            None => 0.0,
        };
        let smoothed = kl_ema.update(terms.kl);
        let used_beta = beta;
        if !ablations.no_pi {
            beta = controller.update(smoothed)?;
        }
        steps = step;

        if step % train.log_every == 0 || step == train.epochs {
            trace.records.push(TraceRecord {
                step,
                recon: terms.recon,
                kl: terms.kl,
                kl_smoothed: smoothed,
                beta: used_beta,
                tc: terms.tc,
                disc: disc_loss,
                wall_ms: started.elapsed().as_secs_f64() * 1000.0,
            });
        }

        recon_history.push(terms.recon);
        if plateaued(&recon_history, train.patience, train.min_delta) {
            if trace.records.last().map(|r| r.step) != Some(step) {
                trace.records.push(TraceRecord {
                    step,
                    recon: terms.recon,
                    kl: terms.kl,
                    kl_smoothed: smoothed,
                    beta: used_beta,
                    tc: terms.tc,
                    disc: disc_loss,
                    wall_ms: started.elapsed().as_secs_f64() * 1000.0,
                });
            }
            break;
        }
    }

    let encoder = EncoderParams::from_tensors(
        n_layers,
        n_relations,
        params.into_iter().map(|p| p.value).collect(),
    )?;
    Ok(TrainedModel {
        model_config: ModelConfig {
            rectified,
            ..model.clone()
        },
        train_config: train.clone(),
        encoder,
        discriminator: discriminator.map(|d| d.params()),
        trace,
        steps,
    })
}

/// Whether the last `window` values fail to improve on the `window` before
/// them by `min_delta` in mean. Single-sample losses are noisy, so windows
/// are compared rather than individual steps.
fn plateaued(history: &[f64], window: usize, min_delta: f64) -> bool {
    if window == 0 || history.len() < 2 * window {
        return false;
    }
    let n = history.len();
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let recent = mean(&history[n - window..]);
    let before = mean(&history[n - 2 * window..n - window]);
    before - recent < min_delta
}

fn register(tape: &mut Tape, params: &[Parameter], n_layers: usize, n_relations: usize) -> EncoderVars {
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.value.clone())).collect();
    EncoderVars::from_flat(n_layers, n_relations, &vars)
}

/// How to turn the posterior into an embedding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbedMode {
    /// The posterior mean, rectified when the model is.
    Mean,
    /// One draw with the given seed.
    Sample(u64),
}

/// N x T node embedding.
pub fn embed(
    graph: &NormalizedGraph,
    features: &Features,
    params: &EncoderParams,
    rectified: bool,
    mode: EmbedMode,
) -> Result<DenseMatrix> {
    let (mu, log_sigma) = encode(graph, features, params)?;
    match mode {
        EmbedMode::Mean if rectified => Ok(mu.map(|v| v.max(0.0))),
        EmbedMode::Mean => Ok(mu),
        EmbedMode::Sample(seed) => Ok(sample_latent(&mu, &log_sigma, seed, rectified)?.z),
    }
}

/// Embedding of a trained model in mean mode.
pub fn embed_trained(graph: &NormalizedGraph, features: &Features, m: &TrainedModel) -> Result<DenseMatrix> {
    embed(graph, features, &m.encoder, m.rectified(), EmbedMode::Mean)
}

/// Result of learning users and claims on separate projection graphs.
#[derive(Clone, Debug)]
pub struct SeparateModels {
    pub users: TrainedModel,
    pub claims: TrainedModel,
    /// User rows followed by claim rows, aligned with the joint graph's node
    /// order.
    pub embedding: DenseMatrix,
}

/// Trains one model on the user co-action graph and one on the claim
/// co-action graph, each with identity features.
pub fn train_separate(bhin: &Bhin, model: &ModelConfig, train_cfg: &TrainConfig) -> Result<SeparateModels> {
    let user_graph =
        NormalizedGraph::from_relation_edges(bhin.n_users(), bhin.n_users(), &[user_projection(bhin)], &[true])?;
    let claim_graph =
        NormalizedGraph::from_relation_edges(bhin.n_claims(), 0, &[claim_projection(bhin)], &[true])?;
    let mut claim_cfg = train_cfg.clone();
    claim_cfg.seed = train_cfg.seed.wrapping_add(1);
    let users = train(&user_graph, &Features::Identity, model, train_cfg)?;
    let claims = train(&claim_graph, &Features::Identity, model, &claim_cfg)?;
    let zu = embed_trained(&user_graph, &Features::Identity, &users)?;
    let zc = embed_trained(&claim_graph, &Features::Identity, &claims)?;
    let embedding = DenseMatrix::concat_rows(&[&zu, &zc])?;
    Ok(SeparateModels {
        users,
        claims,
        embedding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_bhin, normalize, toy_two_block_records, BuildOptions};

    fn toy() -> NormalizedGraph {
        let b = build_bhin(&toy_two_block_records(), &BuildOptions::default()).unwrap();
        normalize(&b).unwrap()
    }

    fn quick(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            patience: 0,
            ..Default::default()
        }
    }

    #[test]
    fn plateau_compares_window_means() {
        assert!(!plateaued(&[3.0, 2.0, 1.0], 2, 1e-5));
        assert!(!plateaued(&[3.0, 2.0, 1.0, 0.5], 2, 1e-5));
        // A lucky early low value does not stop an improving run.
        assert!(!plateaued(&[1.0, 5.0, 3.0, 2.0], 2, 1e-5));
        assert!(plateaued(&[2.0, 1.0, 1.0, 2.0], 2, 1e-5));
        assert!(plateaued(&[1.0; 8], 4, 1e-5));
        assert!(!plateaued(&[1.0; 8], 0, 1e-5));
    }

    #[test]
    fn flat_loss_stops_early() {
        let cfg = TrainConfig {
            epochs: 400,
            patience: 5,
            min_delta: 10.0,
            ..Default::default()
        };
        let m = train(&toy(), &Features::Identity, &ModelConfig::default(), &cfg).unwrap();
        assert_eq!(m.steps, 10);
        assert_eq!(m.trace.records.last().unwrap().step, 10);
    }

    #[test]
    fn zero_epochs_rejected() {
        let err = train(&toy(), &Features::Identity, &ModelConfig::default(), &quick(0));
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn one_epoch_moves_parameters() {
        let g = toy();
        let cfg = quick(1);
        let m = train(&g, &Features::Identity, &ModelConfig::default(), &cfg).unwrap();
        let mut rng = stream_rng(cfg.seed, STREAM_INIT);
        let init = EncoderParams::init(&ModelConfig::default(), 6, 1, &mut rng).unwrap();
        assert_ne!(init, m.encoder);
        assert_eq!(init.hidden[0][0].shape(), m.encoder.hidden[0][0].shape());
        assert_eq!(m.trace.len(), 1);
    }

    #[test]
    fn identical_seeds_give_identical_runs() {
        let g = toy();
        let cfg = quick(30);
        let a = train(&g, &Features::Identity, &ModelConfig::default(), &cfg).unwrap();
        let b = train(&g, &Features::Identity, &ModelConfig::default(), &cfg).unwrap();
        assert_eq!(a.trace.without_timing(), b.trace.without_timing());
        assert_eq!(a.encoder, b.encoder);
        assert_eq!(a.discriminator, b.discriminator);
    }

    #[test]
    fn ablation_columns() {
        let g = toy();
        let mut cfg = quick(20);
        cfg.ablations.no_pi = true;
        let m = train(&g, &Features::Identity, &ModelConfig::default(), &cfg).unwrap();
        assert!(m.trace.records.iter().all(|r| r.beta == 1.0));

        let mut cfg = quick(20);
        cfg.ablations.no_tc = true;
        let m = train(&g, &Features::Identity, &ModelConfig::default(), &cfg).unwrap();
        assert!(m.discriminator.is_none());
        assert!(m.trace.records.iter().all(|r| r.tc == 0.0 && r.disc == 0.0));
    }

    #[test]
    fn log_every_thins_the_trace() {
        let mut cfg = quick(25);
        cfg.log_every = 10;
        let m = train(&toy(), &Features::Identity, &ModelConfig::default(), &cfg).unwrap();
        let steps: Vec<usize> = m.trace.records.iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![10, 20, 25]);
    }

    #[test]
    fn trace_csv_layout() {
        let trace = TrainTrace {
            records: vec![TraceRecord {
                step: 1,
                recon: 0.5,
                kl: 0.25,
                kl_smoothed: 0.25,
                beta: 1.0,
                tc: 0.0,
                disc: 0.125,
                wall_ms: 3.0,
            }],
        };
        let mut out = Vec::new();
        trace.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "step,recon,kl,beta,tc,disc,wall_ms\n1,0.5,0.25,1.0,0.0,0.125,3.0\n"
        );
    }

    #[test]
    fn mean_embedding_rectifies_and_is_deterministic() {
        let g = toy();
        let mut params = EncoderParams::init(
            &ModelConfig::default(),
            6,
            1,
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        for w in &mut params.mu_head {
            w.fill(0.0);
        }
        // With zero mu weights the mean is 0 everywhere; push it negative by
        // making the hidden state positive and the head negative.
        for w in &mut params.hidden[0] {
            w.fill(1.0);
        }
        for w in &mut params.mu_head {
            w.fill(-1.0);
        }
        let a = embed(&g, &Features::Identity, &params, true, EmbedMode::Mean).unwrap();
        assert_eq!(a, DenseMatrix::zeros(6, 3));
        let b = embed(&g, &Features::Identity, &params, true, EmbedMode::Mean).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_with_tiny_sigma_matches_mean() {
        let g = toy();
        let mut params = EncoderParams::init(
            &ModelConfig::default(),
            6,
            1,
            &mut ChaCha8Rng::seed_from_u64(2),
        )
        .unwrap();
        for w in &mut params.sigma_head {
            w.fill(0.0);
        }
        // log sigma = 0 gives sigma = 1; force it to the lower clamp instead.
        for w in &mut params.hidden[0] {
            w.fill(1.0);
        }
        for w in &mut params.sigma_head {
            w.fill(-100.0);
        }
        let mean = embed(&g, &Features::Identity, &params, true, EmbedMode::Mean).unwrap();
        let draw = embed(&g, &Features::Identity, &params, true, EmbedMode::Sample(9)).unwrap();
        let diff = mean.zip_map(&draw, |a, b| (a - b).abs()).unwrap().max_abs();
        // sigma = exp(-6) at the clamp.
        assert!(diff < 0.02, "{diff}");
    }

    fn first_and_last_recon(cfg: &TrainConfig) -> (f64, f64) {
        let m = train(&toy(), &Features::Identity, &ModelConfig::default(), cfg).unwrap();
        let first = m.trace.records[0].recon;
        (first, m.trace.records.last().unwrap().recon)
    }

    #[test]
    #[ignore = "unattainable with rectified latents: every decoded probability is at least 0.5, \
                so the loss cannot fall below half of its all-0.5 value (see rectified_loss_floor)"]
    fn reconstruction_halves_on_toy_graph() {
        let (first, last) = first_and_last_recon(&quick(200));
        assert!(last <= 0.5 * first, "{first} -> {last}");
    }

    #[test]
    fn reconstruction_halves_on_toy_graph_without_rectification() {
        let mut cfg = quick(200);
        cfg.ablations.gaussian = true;
        let (first, last) = first_and_last_recon(&cfg);
        assert!(last <= 0.5 * first, "{first} -> {last}");
    }

    #[test]
    fn rectified_training_reduces_reconstruction() {
        let (first, last) = first_and_last_recon(&quick(200));
        assert!(last < first, "{first} -> {last}");
    }

    proptest::proptest! {
        #[test]
        fn rectified_loss_floor(values in proptest::collection::vec(0.0f64..3.0, 18)) {
            use crate::model::{decode_all, reconstruction_loss};
            let g = toy();
            let z = DenseMatrix::from_vec(6, 3, values).unwrap();
            let pw = crate::model::default_pos_weight(&g);
            let loss = reconstruction_loss(&decode_all(&z).unwrap(), g.target(), pw, 1.0).unwrap();
            let half = reconstruction_loss(&DenseMatrix::full(6, 6, 0.5), g.target(), pw, 1.0).unwrap();
            proptest::prop_assert!(loss >= 0.5 * half - 1e-12);
        }
    }
}
