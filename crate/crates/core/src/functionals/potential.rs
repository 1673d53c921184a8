use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Confining potential `u` with Hessian bounds `c_low·I ≤ ∇²u ≤ c_high·I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConfiningPotential {
    /// `u(x) = (c/2)|x|²`.
    Quadratic { c: f64 },
    /// `u(x) = (c/2)|x|² + a Σ_j log cosh(x_j)`, Hessian in `[c, c + a]`.
    QuadraticLogCosh { c: f64, a: f64 },
}

impl ConfiningPotential {
    pub fn quadratic(c: f64) -> Result<Self> {
        let u = Self::Quadratic { c };
        u.validate()?;
        Ok(u)
    }

    /// `u ≡ 0`. Not confining; only useful to switch the drift off in tests.
    pub fn flat() -> Self {
        Self::Quadratic { c: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.hessian_bounds();
        if !(lo > 0.0) || !lo.is_finite() {
            return Err(invalid("potential", format!("lower Hessian bound {lo} must be positive")));
        }
        if hi < lo || !hi.is_finite() {
            return Err(invalid("potential", format!("Hessian bounds ({lo}, {hi}) are inverted")));
        }
        Ok(())
    }

    pub fn hessian_bounds(&self) -> (f64, f64) {
        match *self {
            Self::Quadratic { c } => (c, c),
            Self::QuadraticLogCosh { c, a } => (c.min(c + a), c.max(c + a)),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Self::Quadratic { c } => 0.5 * c * norm_sq(x),
            Self::QuadraticLogCosh { c, a } => {
                0.5 * c * norm_sq(x) + a * x.iter().map(|&v| log_cosh(v)).sum::<f64>()
            }
        }
    }

    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        match *self {
            Self::Quadratic { c } => {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = c * v;
                }
            }
            Self::QuadraticLogCosh { c, a } => {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = c * v + a * v.tanh();
                }
            }
        }
    }
}

pub(crate) fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn log_cosh(v: f64) -> f64 {
    let a = v.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_confining() {
        assert!(ConfiningPotential::quadratic(0.0).is_err());
        assert!(ConfiningPotential::flat().validate().is_err());
        assert!(ConfiningPotential::QuadraticLogCosh { c: 1.0, a: 0.5 }.validate().is_ok());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let u = ConfiningPotential::QuadraticLogCosh { c: 0.7, a: 0.4 };
        let probes = [[0.3, -1.2], [2.5, 0.01], [-4.0, 3.0]];
        for x in probes {
            let mut g = [0.0; 2];
            u.grad(&x, &mut g);
            for j in 0..2 {
                let h = 1e-5;
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let fd = (u.eval(&xp) - u.eval(&xm)) / (2.0 * h);
                assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1.0), "{fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn quadratic_gradient_is_linear() {
        let u = ConfiningPotential::quadratic(1.5).unwrap();
        let mut g = [0.0; 3];
        u.grad(&[1.0, -2.0, 0.5], &mut g);
        assert_eq!(g, [1.5, -3.0, 0.75]);
    }
}
