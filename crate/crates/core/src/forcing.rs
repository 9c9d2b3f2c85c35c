//! Separable forcing `f(x, t) = b(t) g(x)` and the initial conditions used in
//! the experiments.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `b(t) = (theta1 sin(omega t) + theta2 cos(omega t)) exp(nu t)`,
/// `g(x) = cos(lambda_x x_1) x_1 (1 + x_d)^2`.
///
/// In 1D the last coordinate is `x_1` itself, giving `cos(lambda x) x (1 + x)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingSpec {
    pub theta1: f64,
    pub theta2: f64,
    pub omega: f64,
    pub nu: f64,
    pub lambda_x: f64,
    pub dim: usize,
}

impl ForcingSpec {
    /// Zero forcing in dimension `dim`.
    pub fn zero(dim: usize) -> Self {
        Self {
            theta1: 0.0,
            theta2: 0.0,
            omega: 0.0,
            nu: 0.0,
            lambda_x: 0.0,
            dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.theta1, self.theta2, self.omega, self.nu, self.lambda_x];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("forcing parameters must be finite"));
        }
        if self.omega == 0.0 && self.theta1 != 0.0 {
            return Err(Error::invalid("theta1 != 0 requires a nonzero omega"));
        }
        if !(1..=2).contains(&self.dim) {
            return Err(Error::invalid(format!("unsupported dimension {}", self.dim)));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.theta1 == 0.0 && self.theta2 == 0.0
    }

    pub fn eval_b(&self, t: f64) -> f64 {
        (self.theta1 * (self.omega * t).sin() + self.theta2 * (self.omega * t).cos()) * (self.nu * t).exp()
    }

    /// Closed-form Laplace transform of `b`, valid for `Re(s) > nu`.
    pub fn eval_b_hat(&self, s: Complex64) -> Result<Complex64> {
        if s.re <= self.nu {
            return Err(Error::OutsideAbscissa { s, abscissa: self.nu });
        }
        let shifted = s - self.nu;
        let denom = shifted * shifted + self.omega * self.omega;
        Ok((self.theta1 * self.omega + self.theta2 * shifted) / denom)
    }

    pub fn eval_g(&self, x: &[f64]) -> f64 {
        let last = x[x.len() - 1];
        (self.lambda_x * x[0]).cos() * x[0] * (1.0 + last).powi(2)
    }

    /// Growth rate `nu`: the transform exists for `Re(s) > nu`.
    pub fn abscissa(&self) -> f64 {
        self.nu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialConditionKind {
    Zero,
    SineProduct,
}

/// `u0 = 0` or `u0(x) = prod_i sin(zeta_i pi (x_i - 1/2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialConditionSpec {
    pub kind: InitialConditionKind,
    #[serde(default)]
    pub zeta: Vec<u32>,
}

impl InitialConditionSpec {
    pub fn zero() -> Self {
        Self {
            kind: InitialConditionKind::Zero,
            zeta: Vec::new(),
        }
    }

    pub fn sine_product(zeta: Vec<u32>) -> Self {
        Self {
            kind: InitialConditionKind::SineProduct,
            zeta,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.kind == InitialConditionKind::SineProduct {
            if self.zeta.len() != dim {
                return Err(Error::invalid(format!(
                    "zeta has {} entries for a {dim}-dimensional domain",
                    self.zeta.len()
                )));
            }
            if self.zeta.contains(&0) {
                return Err(Error::invalid("zeta entries must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.kind {
            InitialConditionKind::Zero => 0.0,
            InitialConditionKind::SineProduct => self
                .zeta
                .iter()
                .zip(x)
                .map(|(&z, &xi)| (z as f64 * PI * (xi - 0.5)).sin())
                .product(),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> [f64; 2] {
        let mut g = [0.0, 0.0];
        if self.kind == InitialConditionKind::Zero {
            return g;
        }
        for (k, gk) in g.iter_mut().enumerate().take(x.len()) {
            *gk = self
                .zeta
                .iter()
                .zip(x)
                .enumerate()
                .map(|(i, (&z, &xi))| {
                    let a = z as f64 * PI;
                    if i == k {
                        a * (a * (xi - 0.5)).cos()
                    } else {
                        (a * (xi - 0.5)).sin()
                    }
                })
                .product();
        }
        g
    }
}
