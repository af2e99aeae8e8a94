//! Quenched bond-disorder environments.
//!
//! A bond `x` carries the conductance `xi_x` of the exchange across
//! `(x, x+1)` (before the `N^2` speedup). Draws are i.i.d. across bonds from
//! a law whose support must respect the ellipticity bounds
//! `eps <= xi <= 1/eps`. Each bond has its own counter-based stream keyed by
//! `(seed, bond index)`, so regeneration is bit-identical and windows can be
//! extended without re-drawing existing bonds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, LatticeWindow};
use crate::rng::bond_unit;

pub const DEFAULT_EPSILON: f64 = 0.25;

/// Disorder law for the i.i.d. conductances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DisorderLaw {
    Constant { c: f64 },
    Uniform { a: f64, b: f64 },
    TwoPoint { a: f64, b: f64, p: f64 },
}

impl DisorderLaw {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            DisorderLaw::Constant { c } => (c, c),
            DisorderLaw::Uniform { a, b } => (a.min(b), a.max(b)),
            DisorderLaw::TwoPoint { a, b, .. } => (a.min(b), a.max(b)),
        }
    }

    /// `gamma = E[xi^{-1}]` of the law.
    pub fn gamma(&self) -> f64 {
        match *self {
            DisorderLaw::Constant { c } => 1.0 / c,
            DisorderLaw::Uniform { a, b } => (b / a).ln() / (b - a),
            DisorderLaw::TwoPoint { a, b, p } => p / a + (1.0 - p) / b,
        }
    }

    /// Inverse-CDF draw from a uniform variate.
    fn quantile(&self, u: f64) -> f64 {
        match *self {
            DisorderLaw::Constant { c } => c,
            DisorderLaw::Uniform { a, b } => a + (b - a) * u,
            DisorderLaw::TwoPoint { a, b, p } => {
                if u < p {
                    a
                } else {
                    b
                }
            }
        }
    }

    fn validate(&self, epsilon: f64) -> Result<()> {
        if !(0.0 < epsilon && epsilon < 1.0) {
            return Err(Error::Ellipticity(format!(
                "epsilon {epsilon} outside (0,1)"
            )));
        }
        if let DisorderLaw::TwoPoint { p, .. } = self {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidArgument(format!(
                    "two-point probability {p} outside [0,1]"
                )));
            }
        }
        let (lo, hi) = self.support();
        if lo < epsilon {
            return Err(Error::Ellipticity(format!(
                "law support reaches {lo:.6} below the lower ellipticity bound {epsilon}"
            )));
        }
        if hi > 1.0 / epsilon {
            return Err(Error::Ellipticity(format!(
                "law support reaches {hi:.6} above the upper ellipticity bound {:.6}",
                1.0 / epsilon
            )));
        }
        Ok(())
    }
}

/// The canonical law used by the built-in experiments.
pub fn default_law() -> DisorderLaw {
    DisorderLaw::Uniform { a: 0.5, b: 2.0 }
}

/// A quenched environment over one window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Environment {
    pub seed: u64,
    pub law: DisorderLaw,
    pub epsilon: f64,
    pub window: LatticeWindow,
    /// `values[i]` is the conductance of bond `first_bond + i`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// Empirical mean of `xi^{-1}` over the window's bonds.
    pub gamma_hat: f64,
}

impl Environment {
    /// Leftmost bond index carried by the window (for frozen buffers the
    /// reservoir bond left of `x_min` is included).
    pub fn first_bond(&self) -> i64 {
        match self.window.boundary {
            Boundary::FrozenBuffer => self.window.x_min - 1,
            _ => self.window.x_min,
        }
    }

    /// Number of stored bonds.
    pub fn stored_bonds(&self) -> usize {
        let interior = self.window.sites() - 1;
        match self.window.boundary {
            Boundary::Periodic => interior + 1,
            Boundary::Closed => interior,
            Boundary::FrozenBuffer => interior + 2,
        }
    }

    /// Conductance of bond `(x, x+1)`.
    #[inline]
    pub fn xi(&self, x: i64) -> f64 {
        let values = self.values.as_ref().expect("environment values present");
        let i = x - self.first_bond();
        debug_assert!(
            i >= 0 && (i as usize) < values.len(),
            "bond {x} outside stored range"
        );
        values[i as usize]
    }

    #[inline]
    pub fn xi_inv(&self, x: i64) -> f64 {
        1.0 / self.xi(x)
    }

    /// `gamma_hat` recomputed from the stored interior bonds.
    fn compute_gamma_hat(values: &[f64]) -> f64 {
        values.iter().map(|x| 1.0 / x).sum::<f64>() / values.len() as f64
    }

    /// Regenerate the values from `(seed, law, window)`; bit-identical to the
    /// original generation.
    pub fn regenerate(&mut self) {
        let first = self.first_bond();
        let count = self.stored_bonds();
        let values: Vec<f64> = (0..count)
            .map(|i| self.law.quantile(bond_unit(self.seed, first + i as i64)))
            .collect();
        self.gamma_hat = Self::compute_gamma_hat(&values);
        self.values = Some(values);
    }

    /// Assert the stored values obey the ellipticity bounds; call on load.
    pub fn check_ellipticity(&self) -> Result<()> {
        let values = self
            .values
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("environment has no values".into()))?;
        for (i, &v) in values.iter().enumerate() {
            if v < self.epsilon - 1e-15 || v > 1.0 / self.epsilon + 1e-15 {
                return Err(Error::Ellipticity(format!(
                    "stored bond {} carries {v} outside [{}, {}]",
                    self.first_bond() + i as i64,
                    self.epsilon,
                    1.0 / self.epsilon
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self, include_values: bool) -> Result<String> {
        let mut clone = self.clone();
        if !include_values {
            clone.values = None;
        }
        Ok(serde_json::to_string_pretty(&clone)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut env: Environment = serde_json::from_str(text)?;
        env.law.validate(env.epsilon)?;
        match env.values {
            Some(_) => env.check_ellipticity()?,
            None => env.regenerate(),
        }
        Ok(env)
    }
}

/// Draw a fresh environment. Rejects laws whose support violates the
/// ellipticity bounds before any values are drawn.
pub fn generate(
    seed: u64,
    law: DisorderLaw,
    window: LatticeWindow,
    epsilon: f64,
) -> Result<Environment> {
    law.validate(epsilon)?;
    let mut env = Environment {
        seed,
        law,
        epsilon,
        window,
        values: None,
        gamma_hat: 0.0,
    };
    env.regenerate();
    Ok(env)
}

/// One row of the Cesaro-average table: block size and the two one-sided
/// block averages of `xi^{-1}`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GammaBlock {
    pub block: usize,
    pub right_average: f64,
    pub left_average: f64,
}

/// Block-averaged `xi^{-1}` means `(1/K) sum_{x=1..K}` and
/// `(1/K) sum_{x=-K..-1}`, the finite-window stand-in for the Cesaro limits.
pub fn gamma_convergence_report(env: &Environment, block_sizes: &[usize]) -> Result<Vec<GammaBlock>> {
    let mut out = Vec::with_capacity(block_sizes.len());
    for &k in block_sizes {
        if k == 0 {
            return Err(Error::InvalidArgument("empty block (K = 0)".into()));
        }
        if k as i64 > env.window.x_max || (k as i64) > -env.window.x_min {
            return Err(Error::InvalidArgument(format!(
                "block size {k} exceeds window [{}, {}]",
                env.window.x_min, env.window.x_max
            )));
        }
        let right = (1..=k as i64).map(|x| env.xi_inv(x)).sum::<f64>() / k as f64;
        let left = (-(k as i64)..=-1).map(|x| env.xi_inv(x)).sum::<f64>() / k as f64;
        out.push(GammaBlock {
            block: k,
            right_average: right,
            left_average: left,
        });
    }
    Ok(out)
}
