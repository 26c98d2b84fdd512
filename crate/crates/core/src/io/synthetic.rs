//! Two-block planted-partition interaction graphs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::InteractionRecord;

pub const SYNTHETIC_RELATION: &str = "interact";

#[derive(Clone, Debug, PartialEq)]
pub struct Synthetic {
    pub records: Vec<InteractionRecord>,
    /// Block id ("0" or "1") for every user and claim, with `user:` /
    /// `claim:` prefixes.
    pub labels: Vec<(String, String)>,
}

/// Users `u0..` and claims `c0..` split into two equal halves (the first
/// half is block 0). Each same-block user-claim pair interacts with
/// probability `p_in`, each cross-block pair with `p_out`.
pub fn generate_synthetic(
    n_users: usize,
    n_claims: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<Synthetic> {
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) {
        return Err(Error::Config(format!(
            "edge probabilities must lie in [0, 1], got {p_in} and {p_out}"
        )));
    }
    if n_users < 2 || n_claims < 2 {
        return Err(Error::Config("need at least 2 users and 2 claims".into()));
    }
    let block = |i: usize, n: usize| 2 * i / n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for u in 0..n_users {
        for c in 0..n_claims {
            let p = if block(u, n_users) == block(c, n_claims) {
                p_in
            } else {
                p_out
            };
            if rng.random_bool(p) {
                records.push(InteractionRecord::new(
                    format!("u{u}"),
                    format!("c{c}"),
                    SYNTHETIC_RELATION,
                ));
            }
        }
    }
    let labels = (0..n_users)
        .map(|u| (format!("user:u{u}"), block(u, n_users).to_string()))
        .chain((0..n_claims).map(|c| (format!("claim:c{c}"), block(c, n_claims).to_string())))
        .collect();
    Ok(Synthetic { records, labels })
}
