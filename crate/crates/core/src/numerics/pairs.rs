//! Weighted logistic loss over every pair of rows of a latent matrix.
//!
//! For `S = Z Zᵀ`, `P = sigmoid(S)` and a symmetric target `T`,
//! `L = -norm * mean(w⁺ T log P + (1 - T) log(1 - P))`. The kernel walks the
//! upper triangle once, so neither `S` nor `P` is materialized.

use crate::error::{Error, Result};
use crate::numerics::{stable_sigmoid, DenseMatrix, SparseMatrix, LOG_FLOOR};

/// Symmetric square target with its loss weights, stored row by row.
#[derive(Clone, Debug)]
pub struct PairTarget {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    pos_weight: f64,
    norm: f64,
}

impl PairTarget {
    pub fn new(target: &SparseMatrix, pos_weight: f64, norm: f64) -> Result<Self> {
        if target.rows() != target.cols() {
            return Err(Error::dim(
                "pair_target",
                format!("target is {}x{}", target.rows(), target.cols()),
            ));
        }
        if !target.is_symmetric() {
            return Err(Error::Contract("pair target must be symmetric".into()));
        }
        let n = target.rows();
        let mut row_start = vec![0; n + 1];
        let mut cols = Vec::with_capacity(target.nnz());
        let mut values = Vec::with_capacity(target.nnz());
        for &(r, c, v) in target.entries() {
            row_start[r + 1] += 1;
            cols.push(c);
            values.push(v);
        }
        for i in 0..n {
            row_start[i + 1] += row_start[i];
        }
        Ok(Self {
            n,
            row_start,
            cols,
            values,
            pos_weight,
            norm,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pos_weight(&self) -> f64 {
        self.pos_weight
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (self.row_start[i], self.row_start[i + 1]);
        self.cols[lo..hi]
            .binary_search(&j)
            .map_or(0.0, |k| self.values[lo + k])
    }

    /// Loss at probabilities `p` (an `n x n` matrix).
    pub fn loss_at(&self, p: &DenseMatrix) -> Result<f64> {
        if p.shape() != (self.n, self.n) {
            return Err(Error::dim(
                "reconstruction_loss",
                format!("p is {}x{}, target is {n}x{n}", p.rows(), p.cols(), n = self.n),
            ));
        }
        let mut total = 0.0;
        for i in 0..self.n {
            for (j, &pij) in p.row(i).iter().enumerate() {
                total += self.term(pij, self.get(i, j));
            }
        }
        Ok(self.finish(total))
    }

    fn term(&self, p: f64, t: f64) -> f64 {
        let mut term = 0.0;
        if t != 0.0 {
            term += p.max(LOG_FLOOR).ln() * (self.pos_weight * t);
        }
        if t != 1.0 {
            term += (1.0 - p).max(LOG_FLOOR).ln() * (1.0 - t);
        }
        term
    }

    /// `d term / d s` for `p = sigmoid(s)`, with the sigmoid derivative
    /// taken as `p (1 - p)` even where the output is clamped.
    fn term_slope(&self, p: f64, t: f64) -> f64 {
        let mut d = 0.0;
        if t != 0.0 && p > LOG_FLOOR {
            d += self.pos_weight * t * (1.0 - p);
        }
        if t != 1.0 && 1.0 - p > LOG_FLOOR {
            d -= (1.0 - t) * p;
        }
        d
    }

    fn finish(&self, total: f64) -> f64 {
        let count = (self.n * self.n).max(1) as f64;
        -self.norm * (total * (1.0 / count))
    }

    /// Loss of `sigmoid(Z Zᵀ)` and its gradient with respect to `Z`.
    pub fn loss_and_grad(&self, z: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
        if z.rows() != self.n {
            return Err(Error::dim(
                "reconstruction_loss",
                format!("z has {} rows, target is {n}x{n}", z.rows(), n = self.n),
            ));
        }
        let k = z.cols();
        let mut grad = DenseMatrix::zeros(self.n, k);
        let mut total = 0.0;
        for i in 0..self.n {
            let (lo, hi) = (self.row_start[i], self.row_start[i + 1]);
            let mut next = lo + self.cols[lo..hi].partition_point(|&c| c < i);
            let zi = z.row(i).to_vec();
            let mut gi = vec![0.0; k];
            for j in i..self.n {
                let t = if next < hi && self.cols[next] == j {
                    next += 1;
                    self.values[next - 1]
                } else {
                    0.0
                };
                let zj = z.row(j);
                let s: f64 = zi.iter().zip(zj).map(|(a, b)| a * b).sum();
                let p = stable_sigmoid(s);
                let slope = self.term_slope(p, t);
                if i == j {
                    total += self.term(p, t);
                    for (g, &a) in gi.iter_mut().zip(&zi) {
                        *g += 2.0 * slope * a;
                    }
                } else {
                    total += 2.0 * self.term(p, t);
                    let gj = grad.row_mut(j);
                    for c in 0..k {
                        gi[c] += 2.0 * slope * zj[c];
                        gj[c] += 2.0 * slope * zi[c];
                    }
                }
            }
            for (g, v) in grad.row_mut(i).iter_mut().zip(gi) {
                *g += v;
            }
        }
        let count = (self.n * self.n).max(1) as f64;
        let c = -self.norm / count;
        Ok((self.finish(total), grad.map(|g| c * g)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_difference_check, GradCheckOptions, Tape, Var};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_target(n: usize, seed: u64) -> SparseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut triplets = Vec::new();
        for i in 0..n {
            triplets.push((i, i, 1.0));
            for j in i + 1..n {
                if rng.random_bool(0.3) {
                    triplets.push((i, j, 1.0));
                    triplets.push((j, i, 1.0));
                }
            }
        }
        SparseMatrix::from_triplets(n, n, triplets).unwrap()
    }

    fn random_z(n: usize, k: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * k).map(|_| rng.random_range(-1.5..1.5)).collect();
        DenseMatrix::from_vec(n, k, data).unwrap()
    }

    /// The loss spelled out with elementary tape operations.
    fn unfused(tape: &mut Tape, z: Var, t: &SparseMatrix, pw: f64, norm: f64) -> Var {
        let dense = t.to_dense();
        let zt = tape.transpose(z);
        let s = tape.matmul(z, zt).unwrap();
        let p = tape.sigmoid(s);
        let log_p = tape.log(p);
        let neg = tape.scale(p, -1.0);
        let q = tape.add_scalar(neg, 1.0).unwrap();
        let log_q = tape.log(q);
        let wp = tape.constant(dense.map(|v| pw * v));
        let wn = tape.constant(dense.map(|v| 1.0 - v));
        let a = tape.mul(log_p, wp).unwrap();
        let b = tape.mul(log_q, wn).unwrap();
        let both = tape.add(a, b).unwrap();
        let mean = tape.mean(both);
        tape.scale(mean, -norm)
    }

    #[test]
    fn matches_elementary_operations() {
        for seed in 0..5 {
            let (n, k) = (9, 3);
            let t = random_target(n, seed);
            let z = random_z(n, k, seed + 100);
            let target = PairTarget::new(&t, 3.5, 0.7).unwrap();

            let mut tape = Tape::new();
            let zv = tape.leaf(z.clone());
            let fused = tape.pair_loss(zv, &target).unwrap();
            tape.backward(fused).unwrap();
            let (fv, fg) = (tape.value(fused).item().unwrap(), tape.grad(zv).unwrap().clone());

            let mut tape = Tape::new();
            let zv = tape.leaf(z);
            let loss = unfused(&mut tape, zv, &t, 3.5, 0.7);
            tape.backward(loss).unwrap();
            let uv = tape.value(loss).item().unwrap();
            assert!((fv - uv).abs() <= 1e-12 * uv.abs().max(1.0), "{fv} vs {uv}");
            let ug = tape.grad(zv).unwrap();
            for (a, b) in fg.data().iter().zip(ug.data()) {
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn loss_at_agrees_with_latent_form() {
        let t = random_target(7, 3);
        let z = random_z(7, 2, 4);
        let target = PairTarget::new(&t, 2.0, 1.0).unwrap();
        let mut p = z.matmul(&z.transpose()).unwrap();
        p = p.map(stable_sigmoid);
        let direct = target.loss_at(&p).unwrap();
        let (latent, _) = target.loss_and_grad(&z).unwrap();
        assert!((direct - latent).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let t = random_target(8, 11);
        let target = PairTarget::new(&t, 4.0, 1.0).unwrap();
        let worst = finite_difference_check(
            |tape, v| tape.pair_loss(v[0], &target),
            &[random_z(8, 3, 12)],
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn all_half_probabilities() {
        // p = 1/2 everywhere: the mean of w⁺ t + (1 - t) times ln 2.
        let t = SparseMatrix::identity(2);
        let target = PairTarget::new(&t, 3.0, 1.0).unwrap();
        let (loss, _) = target.loss_and_grad(&DenseMatrix::zeros(2, 3)).unwrap();
        let expected = (2.0 * 3.0 + 2.0) / 4.0 * std::f64::consts::LN_2;
        assert!((loss - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_targets() {
        let asym = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0)]).unwrap();
        assert!(PairTarget::new(&asym, 1.0, 1.0).is_err());
        assert!(PairTarget::new(&SparseMatrix::zeros(2, 3), 1.0, 1.0).is_err());
        let target = PairTarget::new(&SparseMatrix::identity(3), 1.0, 1.0).unwrap();
        assert!(target.loss_and_grad(&DenseMatrix::zeros(2, 3)).is_err());
        assert_eq!(target.get(1, 1), 1.0);
        assert_eq!(target.get(1, 2), 0.0);
    }
}
