//! Total-correlation penalty estimated with a discriminator.
//!
//! The discriminator `Φ` separates latent rows drawn jointly from rows whose
//! columns were permuted independently (samples from the product of the
//! marginals). Its logit `log Φ - log(1 - Φ)` estimates the density ratio, so
//! the mean logit over joint rows estimates the total correlation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{glorot_uniform, AdamState, DenseMatrix, Parameter, Tape, Var};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const DEFAULT_HIDDEN: usize = 64;

/// Two affine layers `T -> hidden -> 1` with a leaky ReLU between them.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorParams {
    pub w1: DenseMatrix,
    pub b1: DenseMatrix,
    pub w2: DenseMatrix,
    pub b2: DenseMatrix,
}

impl DiscriminatorParams {
    pub fn init<R: Rng + ?Sized>(latent_dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            w1: glorot_uniform(latent_dim, hidden, rng),
            b1: DenseMatrix::zeros(1, hidden),
            w2: glorot_uniform(hidden, 1, rng),
            b2: DenseMatrix::zeros(1, 1),
        }
    }

    pub fn zeros(latent_dim: usize, hidden: usize) -> Self {
        Self {
            w1: DenseMatrix::zeros(latent_dim, hidden),
            b1: DenseMatrix::zeros(1, hidden),
            w2: DenseMatrix::zeros(hidden, 1),
            b2: DenseMatrix::zeros(1, 1),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn named(&self) -> Vec<(String, &DenseMatrix)> {
        vec![
            ("discriminator.w1".into(), &self.w1),
            ("discriminator.b1".into(), &self.b1),
            ("discriminator.w2".into(), &self.w2),
            ("discriminator.b2".into(), &self.b2),
        ]
    }

    pub fn from_tensors(tensors: Vec<DenseMatrix>) -> Result<Self> {
        let [w1, b1, w2, b2]: [DenseMatrix; 4] = tensors
            .try_into()
            .map_err(|v: Vec<DenseMatrix>| {
                Error::Data(format!("expected 4 discriminator tensors, found {}", v.len()))
            })?;
        if b1.shape() != (1, w1.cols()) || w2.shape() != (w1.cols(), 1) || b2.shape() != (1, 1) {
            return Err(Error::Data("discriminator tensor shapes are inconsistent".into()));
        }
        Ok(Self { w1, b1, w2, b2 })
    }

    pub fn register(&self, tape: &mut Tape, trainable: bool) -> DiscriminatorVars {
        let mut put = |m: &DenseMatrix| {
            if trainable {
                tape.leaf(m.clone())
            } else {
                tape.constant(m.clone())
            }
        };
        DiscriminatorVars {
            w1: put(&self.w1),
            b1: put(&self.b1),
            w2: put(&self.w2),
            b2: put(&self.b2),
        }
    }

    fn into_parameters(self) -> Vec<Parameter> {
        [self.w1, self.b1, self.w2, self.b2]
            .into_iter()
            .map(Parameter::new)
            .collect()
    }

    fn from_parameters(params: &[Parameter]) -> Self {
        Self {
            w1: params[0].value.clone(),
            b1: params[1].value.clone(),
            w2: params[2].value.clone(),
            b2: params[3].value.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DiscriminatorVars {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

impl DiscriminatorVars {
    pub fn flat(&self) -> [Var; 4] {
        [self.w1, self.b1, self.w2, self.b2]
    }
}

/// Joint latent rows and their column-wise permuted counterpart.
#[derive(Clone, Debug, PartialEq)]
pub struct TcBatch {
    pub joint: DenseMatrix,
    pub shuffled: DenseMatrix,
}

/// Permutes every column of `z` independently.
pub fn make_tc_batch(z: &DenseMatrix, seed: u64) -> Result<TcBatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    make_tc_batch_with(z, &mut rng)
}

pub fn make_tc_batch_with<R: Rng + ?Sized>(z: &DenseMatrix, rng: &mut R) -> Result<TcBatch> {
    if z.rows() < 2 {
        return Err(Error::Contract(format!(
            "a total-correlation batch needs at least 2 rows, got {}",
            z.rows()
        )));
    }
    let mut shuffled = z.clone();
    let mut order: Vec<usize> = (0..z.rows()).collect();
    for j in 0..z.cols() {
        order.shuffle(rng);
        for (i, &src) in order.iter().enumerate() {
            shuffled[(i, j)] = z[(src, j)];
        }
    }
    Ok(TcBatch {
        joint: z.clone(),
        shuffled,
    })
}

/// Records the discriminator logit for every row of `z`.
pub fn logits_on_tape(tape: &mut Tape, z: Var, d: &DiscriminatorVars) -> Result<Var> {
    if tape.value(z).cols() != tape.value(d.w1).rows() {
        return Err(Error::dim(
            "discriminator",
            format!(
                "latent width {} vs discriminator input {}",
                tape.value(z).cols(),
                tape.value(d.w1).rows()
            ),
        ));
    }
    let zw = tape.matmul(z, d.w1)?;
    let pre = tape.add_row(zw, d.b1)?;
    let hidden = tape.leaky_relu(pre, LEAKY_SLOPE);
    let out = tape.matmul(hidden, d.w2)?;
    tape.add_row(out, d.b2)
}

/// Column of logits, one per row of `z`.
pub fn discriminator_logit(z: &DenseMatrix, d: &DiscriminatorParams) -> Result<DenseMatrix> {
    let mut tape = Tape::new();
    let vars = d.register(&mut tape, false);
    let zv = tape.constant(z.clone());
    let l = logits_on_tape(&mut tape, zv, &vars)?;
    Ok(tape.value(l).clone())
}

/// Records the penalty `mean(ℓ(z_i))`. The discriminator enters as
/// constants, so gradients reach `z` only.
pub fn tc_penalty_on_tape(tape: &mut Tape, z: Var, d: &DiscriminatorParams) -> Result<Var> {
    let vars = d.register(tape, false);
    let logits = logits_on_tape(tape, z, &vars)?;
    Ok(tape.mean(logits))
}

pub fn tc_penalty(z: &DenseMatrix, d: &DiscriminatorParams) -> Result<f64> {
    let mut tape = Tape::new();
    let zv = tape.constant(z.clone());
    let p = tc_penalty_on_tape(&mut tape, zv, d)?;
    tape.value(p).item()
}

/// Records the binary cross-entropy with joint rows labeled 1 and shuffled
/// rows labeled 0. The batch enters as constants.
pub fn discriminator_loss_on_tape(
    tape: &mut Tape,
    batch: &TcBatch,
    d: &DiscriminatorVars,
) -> Result<Var> {
    let joint = tape.constant(batch.joint.clone());
    let shuffled = tape.constant(batch.shuffled.clone());
    let lj = logits_on_tape(tape, joint, d)?;
    let ls = logits_on_tape(tape, shuffled, d)?;
    let pj = tape.sigmoid(lj);
    let ps = tape.sigmoid(ls);
    let log_pj = tape.log(pj);
    let neg_ps = tape.scale(ps, -1.0);
    let qs = tape.add_scalar(neg_ps, 1.0)?;
    let log_qs = tape.log(qs);
    let a = tape.mean(log_pj);
    let b = tape.mean(log_qs);
    let total = tape.add(a, b)?;
    Ok(tape.scale(total, -0.5))
}

pub fn discriminator_loss(batch: &TcBatch, d: &DiscriminatorParams) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = d.register(&mut tape, false);
    let loss = discriminator_loss_on_tape(&mut tape, batch, &vars)?;
    tape.value(loss).item()
}

/// A discriminator together with its optimizer.
#[derive(Clone, Debug)]
pub struct Discriminator {
    params: Vec<Parameter>,
    adam: AdamState,
}

impl Discriminator {
    pub fn new(params: DiscriminatorParams, lr: f64) -> Result<Self> {
        Ok(Self {
            params: params.into_parameters(),
            adam: AdamState::new(lr)?,
        })
    }

    pub fn params(&self) -> DiscriminatorParams {
        DiscriminatorParams::from_parameters(&self.params)
    }

    /// One maximum-likelihood step on a fresh permutation of `z`. Returns the
    /// loss before the update.
    pub fn step<R: Rng + ?Sized>(&mut self, z: &DenseMatrix, rng: &mut R) -> Result<f64> {
        let batch = make_tc_batch_with(z, rng)?;
        let mut tape = Tape::new();
        let vars = self.params().register(&mut tape, true);
        let loss = discriminator_loss_on_tape(&mut tape, &batch, &vars)?;
        let value = tape.value(loss).item()?;
        if !value.is_finite() {
            return Err(Error::Numeric(format!("discriminator loss is {value}")));
        }
        tape.backward(loss)?;
        for (p, v) in self.params.iter_mut().zip(vars.flat()) {
            p.grad.add_assign(tape.grad(v).expect("leaf"))?;
        }
        self.adam.step(&mut self.params)?;
        Ok(value)
    }
}
