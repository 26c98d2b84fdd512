//! Helpers shared by the integration tests.
#![allow(dead_code)]

use infovgae::graph::{build_bhin, normalize, toy_two_block_records, BuildOptions, NormalizedGraph};
use infovgae::model::{EncoderParams, EncoderVars, Features, ModelConfig, ReconstructionTarget};
use infovgae::numerics::{finite_difference_check, standard_normal, DenseMatrix, GradCheckOptions, Tape};
use infovgae::tc::{Discriminator, DiscriminatorParams, DEFAULT_HIDDEN};
use infovgae::trainer::{objective_on_tape, ObjectiveInputs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn toy_graph() -> NormalizedGraph {
    let bhin = build_bhin(&toy_two_block_records(), &BuildOptions::default()).unwrap();
    normalize(&bhin).unwrap()
}

/// Outcome of a finite-difference check of the training objective.
pub struct ObjectiveCheck {
    pub seed: u64,
    pub margin: f64,
    pub worst: f64,
    pub coordinates: usize,
}

/// Checks the gradient of `recon + β·KL (+ λ·tc)` with respect to every
/// encoder weight on the six-node toy graph, with frozen noise, at the first
/// seed whose parameter point keeps every kink input at least `min_margin`
/// away.
pub fn check_objective_gradient(with_tc: bool, min_margin: f64) -> ObjectiveCheck {
    let graph = toy_graph();
    let n = graph.n_nodes();
    let config = ModelConfig::default();
    let target = ReconstructionTarget::for_graph(&graph).unwrap();
    let features = Features::Identity;
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = EncoderParams::init(&config, n, graph.relations().len(), &mut rng).unwrap();
        let noise = standard_normal(n, config.latent_dim, &mut rng);
        let disc = DiscriminatorParams::init(config.latent_dim, DEFAULT_HIDDEN, &mut rng);
        let n_layers = params.hidden.len();
        let n_relations = params.n_relations();
        let inputs = ObjectiveInputs {
            graph: &graph,
            features: &features,
            target: &target,
            noise: &noise,
            rectified: true,
            beta: 0.7,
            lambda_tc: 0.5,
            discriminator: with_tc.then_some(&disc),
        };
        let loss = |tape: &mut Tape, vars: &[infovgae::numerics::Var]| {
            let vars = EncoderVars::from_flat(n_layers, n_relations, vars);
            Ok(objective_on_tape(tape, &vars, &inputs)?.total)
        };
        let point: Vec<DenseMatrix> = params.into_tensors();
        let mut tape = Tape::new();
        let vars: Vec<_> = point.iter().map(|p| tape.leaf(p.clone())).collect();
        loss(&mut tape, &vars).unwrap();
        let margin = tape.kink_margin();
        if margin < min_margin {
            continue;
        }
        let coordinates = point.iter().map(|p| p.data().len()).sum();
        let opts = GradCheckOptions {
            h: 1e-6,
            samples: usize::MAX,
            seed,
        };
        let worst = finite_difference_check(loss, &point, opts).unwrap();
        return ObjectiveCheck {
            seed,
            margin,
            worst,
            coordinates,
        };
    }
    panic!("no kink-safe parameter point in 1000 seeds");
}

pub const CALIBRATION_ROWS: usize = 4096;
pub const CALIBRATION_STEPS: usize = 500;

/// Trains a fresh discriminator on `z` for [`CALIBRATION_STEPS`] steps.
pub fn train_discriminator(z: &DenseMatrix, seed: u64) -> DiscriminatorParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = DiscriminatorParams::init(z.cols(), DEFAULT_HIDDEN, &mut rng);
    let mut d = Discriminator::new(init, 0.001).unwrap();
    for _ in 0..CALIBRATION_STEPS {
        d.step(z, &mut rng).unwrap();
    }
    d.params()
}

/// Three independent, differently shaped columns.
pub fn independent_columns(seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = DenseMatrix::zeros(CALIBRATION_ROWS, 3);
    for i in 0..CALIBRATION_ROWS {
        z[(i, 0)] = rng.random::<f64>();
        z[(i, 1)] = -rng.random::<f64>().ln();
        z[(i, 2)] = if rng.random_bool(0.3) { 1.0 } else { 0.0 } + 0.1 * rng.random::<f64>();
    }
    z
}

/// Standard normal columns with the second a copy of the first.
pub fn duplicated_column(seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = standard_normal(CALIBRATION_ROWS, 3, &mut rng);
    for i in 0..CALIBRATION_ROWS {
        z[(i, 1)] = z[(i, 0)];
    }
    z
}
