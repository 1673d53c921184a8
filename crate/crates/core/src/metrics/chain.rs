//! Conditional entropy identities for small discrete joint laws.
//!
//! Entropies use the sign convention `H(P) = Σ p log p`, under which the
//! sum of full-conditional terms dominates the chain-rule sum.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use crate::error::{invalid, Error, Result};

pub const MAX_VARIABLES: usize = 4;
pub const MAX_ALPHABET: usize = 8;
const PMF_TOL: f64 = 1e-12;

/// Joint pmf of `k` finite random variables, stored row-major with the
/// last variable varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteJoint {
    sizes: Vec<usize>,
    pmf: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(sizes: Vec<usize>, pmf: Vec<f64>) -> Result<Self> {
        if sizes.is_empty() || sizes.len() > MAX_VARIABLES {
            return Err(Error::TooLarge { size: sizes.len(), limit: MAX_VARIABLES });
        }
        if let Some(&s) = sizes.iter().find(|&&s| s == 0 || s > MAX_ALPHABET) {
            return Err(invalid("alphabet", format!("size {s} outside 1..={MAX_ALPHABET}")));
        }
        let len: usize = sizes.iter().product();
        if pmf.len() != len {
            return Err(Error::DimensionMismatch { expected: len, got: pmf.len() });
        }
        if pmf.iter().any(|p| !(*p >= 0.0)) {
            return Err(invalid("pmf", "entries must be nonnegative"));
        }
        let mass: f64 = pmf.iter().sum();
        if (mass - 1.0).abs() > PMF_TOL {
            return Err(Error::NotNormalized { mass });
        }
        Ok(Self { sizes, pmf })
    }

    /// Draw a joint pmf uniformly from the simplex (flat Dirichlet).
    pub fn random_dirichlet(sizes: Vec<usize>, rng: &mut impl Rng) -> Result<Self> {
        let len: usize = sizes.iter().product();
        let gamma = Gamma::new(1.0, 1.0).expect("unit gamma");
        let mut pmf: Vec<f64> = (0..len).map(|_| gamma.sample(rng)).collect();
        let total: f64 = pmf.iter().sum();
        pmf.iter_mut().for_each(|p| *p /= total);
        // Absorb rounding so the table sums to one within tolerance.
        let residual = 1.0 - pmf.iter().sum::<f64>();
        if let Some(p) = pmf.iter_mut().max_by(|a, b| a.total_cmp(b)) {
            *p += residual;
        }
        Self::new(sizes, pmf)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    fn decode(&self, mut index: usize, out: &mut [usize]) {
        for (slot, &s) in out.iter_mut().zip(&self.sizes).rev() {
            *slot = index % s;
            index /= s;
        }
    }

    /// Marginal of the listed variables, keyed by the mixed-radix index of
    /// their values.
    fn marginal(&self, keep: &[usize]) -> Vec<f64> {
        let len: usize = keep.iter().map(|&v| self.sizes[v]).product();
        let mut out = vec![0.0; len];
        let mut state = vec![0; self.sizes.len()];
        for (idx, &p) in self.pmf.iter().enumerate() {
            self.decode(idx, &mut state);
            out[self.key(keep, &state)] += p;
        }
        out
    }

    fn key(&self, keep: &[usize], state: &[usize]) -> usize {
        keep.iter().fold(0, |acc, &v| acc * self.sizes[v] + state[v])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainEntropy {
    /// `E Σᵢ H(P_{Xⁱ | X^{−i}})`.
    pub full_conditional: f64,
    /// `Σᵢ E H(P_{Xⁱ | X^{1..i−1}})`, the first term being `H(P_{X¹})`.
    pub chain: f64,
    /// `H(P_X)`.
    pub joint: f64,
}

impl ChainEntropy {
    pub fn inequality_holds(&self, tol: f64) -> bool {
        self.full_conditional >= self.chain - tol
    }

    pub fn identity_error(&self) -> f64 {
        (self.chain - self.joint).abs()
    }
}

fn xlogx(p: f64) -> f64 {
    if p > 0.0 { p * p.ln() } else { 0.0 }
}

/// `E[H(P_{Xⁱ | X^{S}})] = Σ p(x_i, x_S) log(p(x_i, x_S) / p(x_S))`.
fn conditional_term(j: &DiscreteJoint, i: usize, given: &[usize]) -> f64 {
    let mut with: Vec<usize> = given.to_vec();
    with.push(i);
    let joint = j.marginal(&with);
    let cond = j.marginal(given);
    let s = j.sizes[i];
    joint
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(k, &p)| p * (p / cond[k / s]).ln())
        .sum()
}

/// Exact enumeration of the full-conditional sum, the chain-rule sum and
/// the joint entropy.
pub fn chain_entropy_check(j: &DiscreteJoint) -> ChainEntropy {
    let k = j.sizes.len();
    let joint = j.pmf.iter().map(|&p| xlogx(p)).sum();
    let mut full_conditional = 0.0;
    let mut chain = 0.0;
    for i in 0..k {
        let others: Vec<usize> = (0..k).filter(|&v| v != i).collect();
        full_conditional += conditional_term(j, i, &others);
        let prefix: Vec<usize> = (0..i).collect();
        chain += conditional_term(j, i, &prefix);
    }
    ChainEntropy { full_conditional, chain, joint }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn independent_product() {
        let (a, b) = ([0.3, 0.7], [0.2, 0.5, 0.3]);
        let pmf: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
        let j = DiscreteJoint::new(vec![2, 3], pmf).unwrap();
        let c = chain_entropy_check(&j);
        let marginals: f64 = a.iter().chain(&b).map(|&p| xlogx(p)).sum();
        assert!((c.full_conditional - marginals).abs() < 1e-14);
        assert!((c.chain - marginals).abs() < 1e-14);
        assert!(c.identity_error() < 1e-14);
    }

    #[test]
    fn perfectly_correlated_pair() {
        let j = DiscreteJoint::new(vec![2, 2], vec![0.4, 0.0, 0.0, 0.6]).unwrap();
        let c = chain_entropy_check(&j);
        let h1 = xlogx(0.4) + xlogx(0.6);
        assert_eq!(c.full_conditional, 0.0);
        assert!((c.chain - h1).abs() < 1e-15);
        assert!((c.joint - h1).abs() < 1e-15);
        assert!(c.inequality_holds(0.0));
    }

    #[test]
    fn marginal_by_hand() {
        // Brute-force marginal of the middle variable on a 2×3×2 table.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let j = DiscreteJoint::random_dirichlet(vec![2, 3, 2], &mut rng).unwrap();
        let m = j.marginal(&[1]);
        for v in 0..3 {
            let mut s = 0.0;
            for a in 0..2 {
                for c in 0..2 {
                    s += j.pmf()[a * 6 + v * 2 + c];
                }
            }
            assert!((m[v] - s).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(matches!(DiscreteJoint::new(vec![2], vec![0.5, 0.6]), Err(Error::NotNormalized { .. })));
        assert!(DiscreteJoint::new(vec![9], vec![1.0 / 9.0; 9]).is_err());
        assert!(DiscreteJoint::new(vec![2; 5], vec![1.0 / 32.0; 32]).is_err());
    }
}
