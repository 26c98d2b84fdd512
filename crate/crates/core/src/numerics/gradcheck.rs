use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Tape, Var};

/// Options for [`finite_difference_check`].
#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub h: f64,
    /// Number of coordinates to probe. All coordinates are probed when the
    /// parameters have fewer.
    pub samples: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            h: 1e-5,
            samples: 100,
            seed: 0,
        }
    }
}

/// Compares reverse-mode gradients against central differences.
///
/// `loss_fn` records a scalar loss on the tape from the given parameter
/// handles. Returns the largest
/// `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)` over the probed
/// coordinates.
pub fn finite_difference_check<F>(
    loss_fn: F,
    params: &[DenseMatrix],
    opts: GradCheckOptions,
) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(opts.h > 0.0) {
        return Err(Error::Contract(format!("step h must be positive, got {}", opts.h)));
    }

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let loss = loss_fn(&mut tape, &vars)?;
    check_finite(tape.value(loss).item()?)?;
    tape.backward(loss)?;
    let analytic: Vec<DenseMatrix> = vars
        .iter()
        .map(|&v| tape.grad(v).cloned().expect("leaf gradient"))
        .collect();
    drop(tape);

    let eval = |point: &[DenseMatrix]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = point.iter().map(|p| tape.constant(p.clone())).collect();
        let loss = loss_fn(&mut tape, &vars)?;
        check_finite(tape.value(loss).item()?)
    };

    let coords: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .flat_map(|(p, m)| (0..m.data().len()).map(move |k| (p, k)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let picked: Vec<usize> = if coords.len() <= opts.samples {
        (0..coords.len()).collect()
    } else {
        sample(&mut rng, coords.len(), opts.samples).into_vec()
    };

    let mut point = params.to_vec();
    let mut worst = 0.0f64;
    for idx in picked {
        let (p, k) = coords[idx];
        let original = point[p].data()[k];
        point[p].data_mut()[k] = original + opts.h;
        let plus = eval(&point)?;
        point[p].data_mut()[k] = original - opts.h;
        let minus = eval(&point)?;
        point[p].data_mut()[k] = original;

        let numeric = (plus - minus) / (2.0 * opts.h);
        let exact = analytic[p].data()[k];
        let err = (exact - numeric).abs() / (exact.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}

fn check_finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("loss evaluated to {v}")))
    }
}
