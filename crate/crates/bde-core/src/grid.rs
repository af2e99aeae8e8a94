//! Lattice windows, density profiles and test functions.
//!
//! `GridFunction` is the common currency between fields, transforms and
//! quadratures: a test function sampled at lattice sites `x/N` over an
//! explicit support range, with zero values outside it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quad::adaptive_quad;
use crate::numerics::special::{gauss_kernel, norm_cdf, norm_pdf};

/// How a finite window stands in for the infinite lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    /// Wrap around: bond `x_max -> x_min` closes the ring.
    Periodic,
    /// No bonds beyond the edges (zero-flux truncation).
    Closed,
    /// Edge sites exchange with reservoirs re-drawn Bernoulli(profile at the
    /// edge) on every attempt, clamping the one-point closure at the edges.
    FrozenBuffer,
}

/// Finite lattice window `[x_min, x_max]` at scaling parameter `N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeWindow {
    pub n: u32,
    pub x_min: i64,
    pub x_max: i64,
    pub boundary: Boundary,
}

impl LatticeWindow {
    pub fn new(n: u32, x_min: i64, x_max: i64, boundary: Boundary) -> Result<Self> {
        if n == 0 {
            return Err(Error::Window("N must be positive".into()));
        }
        if !(x_min < 0 && 0 < x_max) {
            return Err(Error::Window(format!(
                "window [{x_min}, {x_max}] must strictly contain the origin"
            )));
        }
        if (x_max - x_min + 1) < 2 * n as i64 {
            return Err(Error::Window(format!(
                "window length {} below 2N = {}",
                x_max - x_min + 1,
                2 * n
            )));
        }
        Ok(Self {
            n,
            x_min,
            x_max,
            boundary,
        })
    }

    /// Symmetric window `[-ceil(a N), +ceil(a N)]`.
    pub fn symmetric(n: u32, half_width_macro: f64, boundary: Boundary) -> Result<Self> {
        let half = (half_width_macro * n as f64).ceil() as i64;
        Self::new(n, -half, half, boundary)
    }

    pub fn sites(&self) -> usize {
        (self.x_max - self.x_min + 1) as usize
    }

    #[inline]
    pub fn index(&self, x: i64) -> usize {
        debug_assert!(x >= self.x_min && x <= self.x_max);
        (x - self.x_min) as usize
    }

    #[inline]
    pub fn site(&self, index: usize) -> i64 {
        self.x_min + index as i64
    }

    #[inline]
    pub fn macro_coord(&self, x: i64) -> f64 {
        x as f64 / self.n as f64
    }

    /// Interior bonds `(x, x+1)` indexed by the left site offset; the
    /// periodic wrap bond, when present, is the last one.
    pub fn bond_count(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.sites(),
            _ => self.sites() - 1,
        }
    }

    pub fn contains(&self, x: i64) -> bool {
        x >= self.x_min && x <= self.x_max
    }
}

/// Macroscopic density profile descriptors, `rho0: R -> [0,1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    Constant { value: f64 },
    /// `mid - amplitude * tanh(u / width)`.
    TanhStep { mid: f64, amplitude: f64, width: f64 },
    /// `base + amp * exp(-(u-center)^2 / (2 sigma^2))`.
    GaussBump { base: f64, amp: f64, center: f64, sigma: f64 },
    /// `mean + amp * sin(2 pi u / wavelength)`.
    SineWave { mean: f64, amp: f64, wavelength: f64 },
}

impl Profile {
    /// The step profile used throughout the experiments:
    /// 0.75 on the far left, 0.25 on the far right, 0.5 at the origin.
    pub fn canonical_tanh() -> Self {
        Profile::TanhStep {
            mid: 0.5,
            amplitude: 0.25,
            width: 1.0,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::TanhStep {
                mid,
                amplitude,
                width,
            } => mid - amplitude * (u / width).tanh(),
            Profile::GaussBump {
                base,
                amp,
                center,
                sigma,
            } => base + amp * (-(u - center) * (u - center) / (2.0 * sigma * sigma)).exp(),
            Profile::SineWave {
                mean,
                amp,
                wavelength,
            } => mean + amp * (2.0 * std::f64::consts::PI * u / wavelength).sin(),
        }
    }

    pub fn deriv(&self, u: f64) -> f64 {
        match *self {
            Profile::Constant { .. } => 0.0,
            Profile::TanhStep {
                amplitude, width, ..
            } => {
                let c = (u / width).cosh();
                -amplitude / (width * c * c)
            }
            Profile::GaussBump {
                amp, center, sigma, ..
            } => {
                let d = u - center;
                -amp * d / (sigma * sigma) * (-d * d / (2.0 * sigma * sigma)).exp()
            }
            Profile::SineWave {
                amp, wavelength, ..
            } => {
                let k = 2.0 * std::f64::consts::PI / wavelength;
                amp * k * (k * u).cos()
            }
        }
    }

    pub fn check_range(&self) -> Result<()> {
        let bad = |lo: f64, hi: f64| {
            Err(Error::Profile(format!(
                "profile range [{lo:.4}, {hi:.4}] leaves [0,1]"
            )))
        };
        let (lo, hi) = self.range();
        if lo < -1e-12 || hi > 1.0 + 1e-12 {
            return bad(lo, hi);
        }
        Ok(())
    }

    pub fn range(&self) -> (f64, f64) {
        match *self {
            Profile::Constant { value } => (value, value),
            Profile::TanhStep {
                mid, amplitude, ..
            } => (mid - amplitude.abs(), mid + amplitude.abs()),
            Profile::GaussBump { base, amp, .. } => {
                (base + amp.min(0.0), base + amp.max(0.0))
            }
            Profile::SineWave { mean, amp, .. } => (mean - amp.abs(), mean + amp.abs()),
        }
    }

    /// Heat-evolved profile `rho(t, u)` for `d_t rho = gamma^{-1} d_uu rho`,
    /// i.e. convolution with a Gaussian of variance `2 t / gamma`.
    pub fn heat(&self, gamma: f64, t: f64, u: f64) -> f64 {
        if t == 0.0 {
            return self.eval(u);
        }
        let var = 2.0 * t / gamma;
        match *self {
            Profile::Constant { value } => value,
            Profile::GaussBump {
                base,
                amp,
                center,
                sigma,
            } => {
                let s2 = sigma * sigma + var;
                base + amp * sigma / s2.sqrt()
                    * (-(u - center) * (u - center) / (2.0 * s2)).exp()
            }
            Profile::SineWave {
                mean,
                amp,
                wavelength,
            } => {
                let k = 2.0 * std::f64::consts::PI / wavelength;
                mean + amp * (-k * k * var / 2.0).exp() * (k * u).sin()
            }
            _ => {
                let sd = var.sqrt();
                let (v, _) =
                    adaptive_quad(|z| self.eval(u + sd * z) * norm_pdf(z), -10.0, 10.0, 1e-10);
                v
            }
        }
    }

    /// `d_u rho(t, u)` of the heat-evolved profile.
    pub fn heat_deriv(&self, gamma: f64, t: f64, u: f64) -> f64 {
        if t == 0.0 {
            return self.deriv(u);
        }
        let var = 2.0 * t / gamma;
        match *self {
            Profile::Constant { .. } => 0.0,
            Profile::GaussBump {
                amp,
                center,
                sigma,
                ..
            } => {
                let s2 = sigma * sigma + var;
                let d = u - center;
                -amp * sigma / s2.sqrt() * d / s2 * (-d * d / (2.0 * s2)).exp()
            }
            Profile::SineWave {
                amp, wavelength, ..
            } => {
                let k = 2.0 * std::f64::consts::PI / wavelength;
                amp * k * (-k * k * var / 2.0).exp() * (k * u).cos()
            }
            _ => {
                let sd = var.sqrt();
                let (v, _) =
                    adaptive_quad(|z| self.deriv(u + sd * z) * norm_pdf(z), -10.0, 10.0, 1e-10);
                v
            }
        }
    }
}

/// Regularity class of a sampled test function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FnClass {
    CompactC2,
    SchwartzSampled,
    Indicator,
    Ramp,
}

/// Analytic test functions; sampled onto windows and fed to transforms,
/// fields and the covariance quadratures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TestFn {
    /// `amp * exp(-(u-center)^2/(2 sigma^2))`, Schwartz class.
    GaussBump { center: f64, sigma: f64, amp: f64 },
    /// `amp * (1 - s^2)^3` on `|s| = |u-center|/halfwidth < 1`; compact C^2.
    SmoothBump { center: f64, halfwidth: f64, amp: f64 },
    /// The cutoff ramp `g_l`: 0 below 0, `u/l` on `[0, l)`, 1 above.
    Ramp { l: f64 },
    /// `1{u >= a}`.
    Indicator { a: f64 },
    /// Current approximation `(1 - u/n)^+ 1{u >= 0}`.
    RampGn { n: f64 },
}

impl TestFn {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            TestFn::GaussBump { center, sigma, amp } => {
                amp * (-(u - center) * (u - center) / (2.0 * sigma * sigma)).exp()
            }
            TestFn::SmoothBump {
                center,
                halfwidth,
                amp,
            } => {
                let s = (u - center) / halfwidth;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    let w = 1.0 - s * s;
                    amp * w * w * w
                }
            }
            TestFn::Ramp { l } => {
                if u < 0.0 {
                    0.0
                } else if u < l {
                    u / l
                } else {
                    1.0
                }
            }
            TestFn::Indicator { a } => {
                if u >= a {
                    1.0
                } else {
                    0.0
                }
            }
            TestFn::RampGn { n } => {
                if u < 0.0 {
                    0.0
                } else {
                    (1.0 - u / n).max(0.0)
                }
            }
        }
    }

    pub fn deriv(&self, u: f64) -> f64 {
        match *self {
            TestFn::GaussBump { center, sigma, amp } => {
                let d = u - center;
                -amp * d / (sigma * sigma) * (-d * d / (2.0 * sigma * sigma)).exp()
            }
            TestFn::SmoothBump {
                center,
                halfwidth,
                amp,
            } => {
                let s = (u - center) / halfwidth;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    let w = 1.0 - s * s;
                    -6.0 * amp * s * w * w / halfwidth
                }
            }
            TestFn::Ramp { l } => {
                if (0.0..l).contains(&u) {
                    1.0 / l
                } else {
                    0.0
                }
            }
            TestFn::Indicator { .. } => 0.0,
            TestFn::RampGn { n } => {
                if (0.0..n).contains(&u) {
                    -1.0 / n
                } else {
                    0.0
                }
            }
        }
    }

    pub fn class(&self) -> FnClass {
        match self {
            TestFn::GaussBump { .. } => FnClass::SchwartzSampled,
            TestFn::SmoothBump { .. } => FnClass::CompactC2,
            TestFn::Ramp { .. } => FnClass::Ramp,
            TestFn::Indicator { .. } => FnClass::Indicator,
            TestFn::RampGn { .. } => FnClass::Ramp,
        }
    }

    /// Support after truncating where both |G| and |G'| fall below 1e-12;
    /// the Schwartz truncation radius the transforms record.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            TestFn::GaussBump { center, sigma, amp } => {
                // |G| = 1e-12 at d = sigma sqrt(2 ln(amp/1e-12))
                let r = sigma * (2.0 * (amp.abs() / 1e-12).ln().max(1.0)).sqrt();
                (center - r, center + r)
            }
            TestFn::SmoothBump {
                center, halfwidth, ..
            } => (center - halfwidth, center + halfwidth),
            TestFn::Ramp { l } => (0.0, l),
            TestFn::Indicator { a } => (a, f64::INFINITY),
            TestFn::RampGn { n } => (0.0, n),
        }
    }

    /// Heat semigroup `T_tau G(u)` (Gaussian smoothing, variance `2 tau / gamma`).
    pub fn heat(&self, gamma: f64, tau: f64, u: f64) -> f64 {
        if tau == 0.0 {
            return self.eval(u);
        }
        let var = 2.0 * tau / gamma;
        let sd = var.sqrt();
        match *self {
            TestFn::GaussBump { center, sigma, amp } => {
                let s2 = sigma * sigma + var;
                amp * sigma / s2.sqrt() * (-(u - center) * (u - center) / (2.0 * s2)).exp()
            }
            TestFn::Indicator { a } => norm_cdf((u - a) / sd),
            TestFn::RampGn { n } => {
                // E[(1 - W/n) 1{0 <= W <= n}] for W = u + sd Z
                let alpha = -u / sd;
                let beta = (n - u) / sd;
                (1.0 - u / n) * (norm_cdf(beta) - norm_cdf(alpha))
                    - sd / n * (norm_pdf(alpha) - norm_pdf(beta))
            }
            _ => {
                let (v, _) =
                    adaptive_quad(|z| self.eval(u + sd * z) * norm_pdf(z), -10.0, 10.0, 1e-11);
                v
            }
        }
    }

    /// `d_u T_tau G(u)`.
    pub fn heat_deriv(&self, gamma: f64, tau: f64, u: f64) -> f64 {
        if tau == 0.0 {
            return self.deriv(u);
        }
        let var = 2.0 * tau / gamma;
        let sd = var.sqrt();
        match *self {
            TestFn::GaussBump { center, sigma, amp } => {
                let s2 = sigma * sigma + var;
                let d = u - center;
                -amp * sigma / s2.sqrt() * d / s2 * (-d * d / (2.0 * s2)).exp()
            }
            TestFn::Indicator { a } => gauss_kernel(u - a, var),
            TestFn::RampGn { n } => {
                // distributional derivative: delta at 0 minus (1/n) on (0, n)
                gauss_kernel(u, var)
                    - (norm_cdf(u / sd) - norm_cdf((u - n) / sd)) / n
            }
            _ => {
                let (v, _) =
                    adaptive_quad(|z| self.deriv(u + sd * z) * norm_pdf(z), -10.0, 10.0, 1e-11);
                v
            }
        }
    }
}

/// A test function sampled at lattice sites `x/N` over a finite support.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub n: u32,
    /// First site of the stored range.
    pub first: i64,
    pub values: Vec<f64>,
    pub class: FnClass,
    /// Macroscopic truncation radius recorded for Schwartz-class functions.
    pub truncation_radius: Option<f64>,
}

impl GridFunction {
    /// Sample `f` on the window, restricted to its truncated support.
    pub fn sample(f: &TestFn, window: &LatticeWindow) -> Result<Self> {
        let n = window.n;
        let (lo, hi) = f.support();
        if lo.is_infinite() || hi.is_infinite() {
            return Err(Error::InvalidArgument(
                "cannot sample a function with unbounded support onto a grid".into(),
            ));
        }
        let first = ((lo * n as f64).floor() as i64).max(window.x_min);
        let last = ((hi * n as f64).ceil() as i64).min(window.x_max);
        if first > last {
            return Err(Error::InvalidArgument(
                "test function support misses the window".into(),
            ));
        }
        let values = (first..=last)
            .map(|x| f.eval(x as f64 / n as f64))
            .collect();
        let truncation_radius = matches!(f.class(), FnClass::SchwartzSampled)
            .then(|| (hi - lo) / 2.0);
        Ok(Self {
            n,
            first,
            values,
            class: f.class(),
            truncation_radius,
        })
    }

    /// Build directly from stored values (used by transforms).
    pub fn from_values(n: u32, first: i64, values: Vec<f64>, class: FnClass) -> Self {
        Self {
            n,
            first,
            values,
            class,
            truncation_radius: None,
        }
    }

    #[inline]
    pub fn value_at(&self, x: i64) -> f64 {
        if x < self.first || x >= self.first + self.values.len() as i64 {
            0.0
        } else {
            self.values[(x - self.first) as usize]
        }
    }

    /// Inclusive stored site range.
    pub fn support_sites(&self) -> (i64, i64) {
        (self.first, self.first + self.values.len() as i64 - 1)
    }

    /// Riemann sum `(1/N) sum G(x/N)^p`.
    pub fn lp_sum(&self, p: i32) -> f64 {
        self.values.iter().map(|v| v.powi(p)).sum::<f64>() / self.n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn window_invariants_enforced() {
        assert!(LatticeWindow::new(16, -32, 32, Boundary::Periodic).is_ok());
        assert!(LatticeWindow::new(16, 1, 64, Boundary::Closed).is_err());
        assert!(LatticeWindow::new(16, -8, 8, Boundary::Closed).is_err());
    }

    #[test]
    fn canonical_tanh_matches_stated_form() {
        // (1 + tanh(-u))/4 + 1/4
        let p = Profile::canonical_tanh();
        for u in [-3.0f64, -0.7, 0.0, 0.2, 2.5] {
            let expect = (1.0 + (-u).tanh()) / 4.0 + 0.25;
            assert_relative_eq!(p.eval(u), expect, epsilon = 1e-14);
        }
        assert_relative_eq!(p.eval(-60.0), 0.75, epsilon = 1e-12);
        assert_relative_eq!(p.eval(60.0), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn heat_of_gauss_bump_matches_quadrature_route() {
        let p = Profile::GaussBump {
            base: 0.3,
            amp: 0.2,
            center: 0.1,
            sigma: 0.4,
        };
        let tanh_like = Profile::TanhStep {
            mid: 0.5,
            amplitude: 0.25,
            width: 1.0,
        };
        // closed form vs generic quadrature for the bump
        let (gamma, t): (f64, f64) = (0.9, 0.37);
        for u in [-1.0, 0.0, 0.55, 2.0] {
            let sd = (2.0 * t / gamma).sqrt();
            let (q, _) = adaptive_quad(|z| p.eval(u + sd * z) * norm_pdf(z), -10.0, 10.0, 1e-12);
            assert_relative_eq!(p.heat(gamma, t, u), q, epsilon = 1e-9);
            // derivative route consistency for the tanh profile
            let h = 1e-5;
            let num =
                (tanh_like.heat(gamma, t, u + h) - tanh_like.heat(gamma, t, u - h)) / (2.0 * h);
            assert_relative_eq!(tanh_like.heat_deriv(gamma, t, u), num, epsilon = 1e-6);
        }
    }

    #[test]
    fn ramp_gn_heat_matches_quadrature() {
        let g = TestFn::RampGn { n: 3.0 };
        let (gamma, tau): (f64, f64) = (1.0, 0.25);
        let sd = (2.0 * tau / gamma).sqrt();
        for u in [-2.0, -0.3, 0.0, 0.4, 1.5, 2.9, 3.5, 5.0] {
            let (q, _) =
                adaptive_quad(|z| g.eval(u + sd * z) * norm_pdf(z), -12.0, 12.0, 1e-12);
            assert_relative_eq!(g.heat(gamma, tau, u), q, epsilon = 1e-9);
            let h = 1e-5;
            let num = (g.heat(gamma, tau, u + h) - g.heat(gamma, tau, u - h)) / (2.0 * h);
            assert_relative_eq!(g.heat_deriv(gamma, tau, u), num, epsilon = 1e-6);
        }
    }

    #[test]
    fn indicator_heat_is_normal_cdf() {
        let g = TestFn::Indicator { a: 0.5 };
        assert_relative_eq!(g.heat(1.0, 0.5, 0.5), 0.5, epsilon = 1e-12);
        assert!(g.heat(1.0, 0.5, 3.0) > 0.99);
    }

    #[test]
    fn sampling_respects_support_and_window() {
        let w = LatticeWindow::new(64, -256, 256, Boundary::Closed).unwrap();
        let g = GridFunction::sample(&TestFn::SmoothBump { center: 0.0, halfwidth: 1.0, amp: 2.0 }, &w)
            .unwrap();
        assert_eq!(g.value_at(-65), 0.0);
        assert_relative_eq!(g.value_at(0), 2.0, epsilon = 1e-14);
        assert_eq!(g.value_at(200), 0.0);
        let gauss = GridFunction::sample(
            &TestFn::GaussBump { center: 0.0, sigma: 0.2, amp: 1.0 },
            &w,
        )
        .unwrap();
        assert!(gauss.truncation_radius.unwrap() > 1.0);
        let (lo, hi) = gauss.support_sites();
        assert!(lo >= -256 && hi <= 256);
        assert!(gauss.value_at(lo).abs() < 1e-11);
    }
}
