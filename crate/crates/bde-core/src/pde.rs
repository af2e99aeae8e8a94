//! Deterministic solvers: the discrete one-point equation, the limiting heat
//! equation, and the tagged-particle centerings `u_t` and `u_t^N`.
//!
//! The one-point equation is linear,
//! `d rho_t(x)/dt = N^2 [ xi_x (rho(x+1)-rho(x)) + xi_{x-1} (rho(x-1)-rho(x)) ]`,
//! so the default integrator is exact uniformization (series truncated at
//! 1e-12); an RKC2 stepping path covers windows too large for the series to
//! be worthwhile. Frozen-buffer windows append two reservoir slots with zero
//! generator rows, which keeps the affine boundary term inside a proper
//! substochastic generator and preserves the maximum principle.

use serde::Serialize;

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::grid::{Boundary, LatticeWindow, Profile, TestFn};
use crate::numerics::ode::{rk4_fixed, rkc2};
use crate::numerics::quad::adaptive_quad;
use crate::numerics::uniformize::uniformized_step;

/// Which time integrator backs `solve_discrete`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Integrator {
    /// Uniformization below `UNIFORMIZATION_SITE_LIMIT` sites, RKC2 above.
    Auto,
    Uniformization,
    Rkc2 { step: f64 },
}

pub const UNIFORMIZATION_SITE_LIMIT: usize = 4096;

/// Ghost-site clamp values for frozen-buffer windows: the profile evaluated
/// one site beyond each edge. Dynamics and solvers must share this.
pub fn frozen_ghosts(profile: &Profile, window: &LatticeWindow) -> (f64, f64) {
    let n = window.n as f64;
    (
        profile.eval((window.x_min - 1) as f64 / n),
        profile.eval((window.x_max + 1) as f64 / n),
    )
}

/// Deterministic one-point density trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct DiscreteProfile {
    pub window: LatticeWindow,
    pub starred: bool,
    pub env_seed: u64,
    pub times: Vec<f64>,
    /// `values[k][i]` is `rho_{times[k]}(window.site(i))`.
    pub values: Vec<Vec<f64>>,
    /// Flux integral `Q(t) = xi_{-1} int_0^t N^2 (rho_s(-1) - rho_s(0)) ds`.
    pub flux_q: Vec<f64>,
    /// `sup_x |grad_N rho_t|` per sample time.
    pub grad_sup: Vec<f64>,
}

impl DiscreteProfile {
    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn value(&self, k: usize, x: i64) -> f64 {
        self.values[k][self.window.index(x)]
    }

    /// `(1/N) sum_x G(x/N) rho_t(x)` against a sampled test function.
    pub fn pair_with(&self, k: usize, g: &crate::grid::GridFunction) -> f64 {
        let (lo, hi) = g.support_sites();
        let lo = lo.max(self.window.x_min);
        let hi = hi.min(self.window.x_max);
        let mut s = 0.0;
        for x in lo..=hi {
            s += g.value_at(x) * self.value(k, x);
        }
        s / self.window.n as f64
    }

    pub fn to_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "rho"])?;
        for (k, t) in self.times.iter().enumerate() {
            for i in 0..self.window.sites() {
                w.write_record([
                    format!("{t}"),
                    format!("{}", self.window.site(i)),
                    format!("{}", self.values[k][i]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Layout of the evolving vector: window sites, plus two trailing reservoir
/// slots in frozen-buffer mode.
struct OnePointOperator<'a> {
    env: &'a Environment,
    n2: f64,
    sites: usize,
    frozen: bool,
}

impl<'a> OnePointOperator<'a> {
    fn new(env: &'a Environment) -> Self {
        let n2 = (env.window.n as f64) * (env.window.n as f64);
        Self {
            env,
            n2,
            sites: env.window.sites(),
            frozen: env.window.boundary == Boundary::FrozenBuffer,
        }
    }

    /// Max total exit rate, the uniformization constant.
    fn lambda(&self) -> f64 {
        let w = &self.env.window;
        let mut lam: f64 = 0.0;
        for x in w.x_min..=w.x_max {
            let rate = match w.boundary {
                Boundary::Periodic => {
                    let left = if x == w.x_min { w.x_max } else { x - 1 };
                    let right = if x == w.x_max { w.x_max } else { x };
                    self.env.xi(left) + self.env.xi(right)
                }
                Boundary::Closed => {
                    let mut r = 0.0;
                    if x > w.x_min {
                        r += self.env.xi(x - 1);
                    }
                    if x < w.x_max {
                        r += self.env.xi(x);
                    }
                    r
                }
                Boundary::FrozenBuffer => self.env.xi(x - 1) + self.env.xi(x),
            };
            lam = lam.max(rate);
        }
        lam * self.n2
    }

    /// out = A v.
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let w = &self.env.window;
        let s = self.sites;
        let n2 = self.n2;
        match w.boundary {
            Boundary::Periodic => {
                for i in 0..s {
                    let x = w.x_min + i as i64;
                    let ip = if i + 1 == s { 0 } else { i + 1 };
                    let im = if i == 0 { s - 1 } else { i - 1 };
                    let xi_right = if x == w.x_max {
                        self.env.xi(w.x_max)
                    } else {
                        self.env.xi(x)
                    };
                    let xi_left = if i == 0 {
                        self.env.xi(w.x_max)
                    } else {
                        self.env.xi(x - 1)
                    };
                    out[i] = n2 * (xi_right * (v[ip] - v[i]) + xi_left * (v[im] - v[i]));
                }
            }
            Boundary::Closed => {
                for i in 0..s {
                    let x = w.x_min + i as i64;
                    let mut acc = 0.0;
                    if i + 1 < s {
                        acc += self.env.xi(x) * (v[i + 1] - v[i]);
                    }
                    if i > 0 {
                        acc += self.env.xi(x - 1) * (v[i - 1] - v[i]);
                    }
                    out[i] = n2 * acc;
                }
            }
            Boundary::FrozenBuffer => {
                // v[s], v[s+1] hold the left/right reservoir values
                for i in 0..s {
                    let x = w.x_min + i as i64;
                    let left = if i == 0 { v[s] } else { v[i - 1] };
                    let right = if i + 1 == s { v[s + 1] } else { v[i + 1] };
                    out[i] = n2
                        * (self.env.xi(x) * (right - v[i])
                            + self.env.xi(x - 1) * (left - v[i]));
                }
                out[s] = 0.0;
                out[s + 1] = 0.0;
            }
        }
    }
}

fn grad_sup_of(env: &Environment, values: &[f64]) -> f64 {
    let w = &env.window;
    let n = w.n as f64;
    let mut sup: f64 = 0.0;
    for i in 0..w.sites() - 1 {
        sup = sup.max(n * (values[i + 1] - values[i]).abs());
    }
    if w.boundary == Boundary::Periodic {
        sup = sup.max(n * (values[0] - values[w.sites() - 1]).abs());
    }
    sup
}

/// Initial lattice values for a profile, with the starred origin override.
pub fn initial_values(profile: &Profile, window: &LatticeWindow, starred: bool) -> Vec<f64> {
    let n = window.n as f64;
    let mut v: Vec<f64> = (window.x_min..=window.x_max)
        .map(|x| profile.eval(x as f64 / n))
        .collect();
    if starred {
        v[window.index(0)] = 1.0;
    }
    v
}

/// Solve the discrete one-point equation on the environment's window for the
/// requested sample times (ascending, nonnegative).
pub fn solve_discrete(
    env: &Environment,
    profile: &Profile,
    t_grid: &[f64],
    starred: bool,
    method: Integrator,
) -> Result<DiscreteProfile> {
    profile.check_range()?;
    if t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid.first().copied().unwrap_or(0.0) < 0.0 {
        return Err(Error::InvalidArgument(
            "t_grid must be ascending and nonnegative".into(),
        ));
    }
    let op = OnePointOperator::new(env);
    let mut state = initial_values(profile, &env.window, starred);
    let (lo0, hi0) = {
        let lo = state.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = state.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    if op.frozen {
        let (gl, gr) = frozen_ghosts(profile, &env.window);
        state.push(gl);
        state.push(gr);
    }
    let use_uniformization = match method {
        Integrator::Auto => env.window.sites() <= UNIFORMIZATION_SITE_LIMIT,
        Integrator::Uniformization => true,
        Integrator::Rkc2 { .. } => false,
    };

    let sites = op.sites;
    let idx_m1 = env.window.index(-1);
    let idx_0 = env.window.index(0);
    let xi_m1 = env.xi(-1);
    let n2 = op.n2;

    let mut out = Recorder {
        env,
        lo0,
        hi0,
        times: Vec::new(),
        values: Vec::new(),
        flux_q: Vec::new(),
        grad_sup: Vec::new(),
    };
    let mut q_acc = 0.0;
    let mut t_prev = 0.0;

    if use_uniformization {
        let lambda = op.lambda();
        for &t in t_grid {
            let dt = t - t_prev;
            if dt > 0.0 {
                let step = uniformized_step(
                    |v, o| op.apply(v, o),
                    lambda,
                    dt,
                    &state,
                    true,
                    1e-13,
                );
                let int = step.integral.as_ref().unwrap();
                q_acc += xi_m1 * n2 * (int[idx_m1] - int[idx_0]);
                state = step.end;
            }
            out.record(&state[..sites], t, q_acc)?;
            t_prev = t;
        }
    } else {
        let step = match method {
            Integrator::Rkc2 { step } => step,
            _ => 2.5e-3,
        };
        // an extra component integrates the flux with the same stepper
        let mut y = state.clone();
        y.push(0.0);
        let rho_bound = 2.0 * op.lambda();
        let qi = y.len() - 1;
        for &t in t_grid {
            if t > t_prev {
                y = rkc2(
                    |_t, v, o| {
                        op.apply(&v[..qi], &mut o[..qi]);
                        o[qi] = xi_m1 * n2 * (v[idx_m1] - v[idx_0]);
                    },
                    y,
                    t_prev,
                    t,
                    step,
                    rho_bound,
                    |_, _| {},
                );
            }
            q_acc = y[qi];
            out.record(&y[..sites], t, q_acc)?;
            t_prev = t;
        }
    }

    Ok(DiscreteProfile {
        window: env.window,
        starred,
        env_seed: env.seed,
        times: out.times,
        values: out.values,
        flux_q: out.flux_q,
        grad_sup: out.grad_sup,
    })
}

struct Recorder<'a> {
    env: &'a Environment,
    lo0: f64,
    hi0: f64,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    flux_q: Vec<f64>,
    grad_sup: Vec<f64>,
}

impl<'a> Recorder<'a> {
    fn record(&mut self, snap: &[f64], t: f64, q: f64) -> Result<()> {
        // maximum principle, asserted per recorded time
        let tol = 1e-9;
        for (i, &v) in snap.iter().enumerate() {
            if v < self.lo0 - tol || v > self.hi0 + tol {
                return Err(Error::Numerics(format!(
                    "maximum principle violated at t={t}, site {}: {v} outside [{}, {}]",
                    self.env.window.site(i),
                    self.lo0,
                    self.hi0
                )));
            }
        }
        self.grad_sup.push(grad_sup_of(self.env, snap));
        self.times.push(t);
        self.values.push(snap.to_vec());
        self.flux_q.push(q);
        Ok(())
    }
}

/// Continuum heat-equation solution `rho(t,u)` with diffusivity `1/gamma`.
#[derive(Clone, Debug)]
pub struct ContinuumSolution {
    pub gamma: f64,
    pub profile: Profile,
}

impl ContinuumSolution {
    pub fn new(gamma: f64, profile: Profile) -> Result<Self> {
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma {gamma} not positive")));
        }
        profile.check_range()?;
        Ok(Self { gamma, profile })
    }

    pub fn rho(&self, t: f64, u: f64) -> f64 {
        self.profile.heat(self.gamma, t, u)
    }

    pub fn rho_du(&self, t: f64, u: f64) -> f64 {
        self.profile.heat_deriv(self.gamma, t, u)
    }

    /// Compressibility `chi(rho(t,u))`.
    pub fn chi(&self, t: f64, u: f64) -> f64 {
        let r = self.rho(t, u);
        r * (1.0 - r)
    }

    /// Semigroup action `T_r G(u)` on a test function.
    pub fn semigroup(&self, g: &TestFn, r: f64, u: f64) -> f64 {
        g.heat(self.gamma, r, u)
    }

    pub fn semigroup_grad(&self, g: &TestFn, r: f64, u: f64) -> f64 {
        g.heat_deriv(self.gamma, r, u)
    }

    /// `int G(u) rho(t,u) du` over the test function's support.
    pub fn pair_with(&self, g: &TestFn, t: f64) -> f64 {
        let (lo, hi) = g.support();
        let (v, _) = adaptive_quad(|u| g.eval(u) * self.rho(t, u), lo, hi, 1e-9);
        v
    }
}

/// Tagged-particle centering `u_t` with the agreement gap between its two
/// independent computations.
#[derive(Clone, Debug, Serialize)]
pub struct CenteringPath {
    pub times: Vec<f64>,
    pub u: Vec<f64>,
    /// Root of the integral form at each grid time.
    pub u_integral_form: Vec<f64>,
    pub max_disagreement: f64,
}

/// Solve `int_0^{u_t} rho(t,v) dv = -(1/gamma) int_0^t d_u rho(s,0) ds` via
/// the ODE `du/dt = -(1/gamma) d_u rho(t,u) / rho(t,u)`, cross-checked by
/// root-finding the integral form at every grid time.
pub fn compute_ut(
    gamma: f64,
    profile: &Profile,
    t_grid: &[f64],
    agree_tol: f64,
) -> Result<CenteringPath> {
    profile.check_range()?;
    let sol = ContinuumSolution::new(gamma, *profile)?;
    if t_grid.is_empty() || t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("bad t grid".into()));
    }
    let vacuum = 1e-4;
    let mut u_ode = Vec::with_capacity(t_grid.len());
    let mut t_prev = 0.0;
    let mut y = vec![0.0];
    for &t in t_grid {
        if t > t_prev {
            let steps = (((t - t_prev) / 2e-3).ceil() as usize).max(4);
            y = rk4_fixed(
                |s, u, du| {
                    let r = sol.rho(s, u[0]);
                    du[0] = -sol.rho_du(s, u[0]) / (gamma * r.max(1e-12));
                },
                y,
                t_prev,
                t,
                steps,
            );
        }
        let r = sol.rho(t, y[0]);
        if r < vacuum {
            return Err(Error::Numerics(format!(
                "density {r} at (t={t}, u={}) too close to vacuum",
                y[0]
            )));
        }
        u_ode.push(y[0]);
        t_prev = t;
    }

    // Integral form: accumulate R(t) = -(1/gamma) int d_u rho(s,0) ds and
    // root-find the monotone mass integral.
    let mut u_int = Vec::with_capacity(t_grid.len());
    let mut r_acc = 0.0;
    let mut t_prev = 0.0;
    for (&t, &u_guess) in t_grid.iter().zip(&u_ode) {
        let (seg, _) = adaptive_quad(|s| sol.rho_du(s, 0.0), t_prev, t, 1e-10);
        r_acc += -seg / gamma;
        u_int.push(root_find_mass(&sol, t, r_acc, u_guess)?);
        t_prev = t;
    }

    let max_disagreement = u_ode
        .iter()
        .zip(&u_int)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if max_disagreement > agree_tol {
        return Err(Error::Numerics(format!(
            "ODE and integral-form centerings disagree by {max_disagreement} > {agree_tol}"
        )));
    }
    Ok(CenteringPath {
        times: t_grid.to_vec(),
        u: u_ode,
        u_integral_form: u_int,
        max_disagreement,
    })
}

fn root_find_mass(sol: &ContinuumSolution, t: f64, target: f64, guess: f64) -> Result<f64> {
    let mass = |u: f64| -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        let (v, _) = adaptive_quad(|w| sol.rho(t, w), 0.0, u, 1e-11);
        v
    };
    let mut lo = guess - 0.5;
    let mut hi = guess + 0.5;
    let mut flo = mass(lo) - target;
    let mut fhi = mass(hi) - target;
    let mut tries = 0;
    while flo > 0.0 || fhi < 0.0 {
        if flo > 0.0 {
            lo -= 0.5;
            flo = mass(lo) - target;
        }
        if fhi < 0.0 {
            hi += 0.5;
            fhi = mass(hi) - target;
        }
        tries += 1;
        if tries > 40 {
            return Err(Error::Numerics("cannot bracket the centering root".into()));
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < 1e-12 {
            break;
        }
        if mass(mid) - target <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Discrete centering `u_t^N` from a starred trajectory via the flux sandwich.
///
/// With `S` the signed two-sided partial sum (`S(u) = sum_{x=0..u} rho` for
/// `u >= 0`, `S(-1) = 0`, `S(-1-k) = -sum_{x=-k..-1} rho`), the reported value
/// is the unique `n` with `S(n-1) <= Q(t) < S(n)`: the raw sandwich shifted by
/// one so that `u_0^N = 0`.
pub fn compute_utn(traj: &DiscreteProfile, k: usize) -> Result<i64> {
    if !traj.starred {
        return Err(Error::InvalidArgument(
            "u_t^N needs a starred trajectory".into(),
        ));
    }
    let q = traj.flux_q[k];
    let w = &traj.window;
    let rho = traj.at(k);
    let s_at = |n: i64| -> f64 {
        if n >= 0 {
            (0..=n).map(|x| rho[w.index(x)]).sum()
        } else if n == -1 {
            0.0
        } else {
            -((n + 1)..=-1).map(|x| rho[w.index(x)]).sum::<f64>()
        }
    };
    let mut n = 0i64;
    let max_n = w.x_max - 1;
    let min_n = w.x_min + 1;
    loop {
        let lo = s_at(n - 1);
        let hi = s_at(n);
        if lo <= q && q < hi {
            return Ok(n);
        }
        if q >= hi {
            n += 1;
        } else {
            n -= 1;
        }
        if n > max_n || n < min_n {
            return Err(Error::Window(format!(
                "flux integral Q={q} leaves the window's partial-sum range"
            )));
        }
    }
}

/// Gradient maximum-principle check: `sup_t sup_x |grad_N rho_t|` against
/// `eps^{-2} sup_x |grad_N rho_0|`.
#[derive(Clone, Debug, Serialize)]
pub struct GradientBoundReport {
    pub initial_sup: f64,
    pub trajectory_sup: f64,
    pub bound: f64,
    pub observed_ratio: f64,
    pub pass: bool,
}

pub fn gradient_bound_check(
    env: &Environment,
    traj: &DiscreteProfile,
) -> Result<GradientBoundReport> {
    let g0 = traj.grad_sup.first().copied().ok_or_else(|| {
        Error::InvalidArgument("trajectory carries no gradient diagnostics".into())
    })?;
    let gmax = traj.grad_sup.iter().cloned().fold(0.0, f64::max);
    let bound = g0 / (env.epsilon * env.epsilon);
    let ratio = if g0 > 0.0 { gmax / g0 } else { 0.0 };
    let pass = if g0 == 0.0 {
        gmax <= 1e-9
    } else {
        gmax <= bound * (1.0 + 1e-9)
    };
    if !pass {
        return Err(Error::Numerics(format!(
            "gradient bound violated: sup {gmax} > eps^-2 * {g0}"
        )));
    }
    Ok(GradientBoundReport {
        initial_sup: g0,
        trajectory_sup: gmax,
        bound,
        observed_ratio: ratio,
        pass,
    })
}

/// Solve from explicit initial lattice values (no profile); used by oracle
/// comparisons (delta initial conditions and the like).
pub fn solve_discrete_from_values(
    env: &Environment,
    rho0: Vec<f64>,
    ghosts: (f64, f64),
    t_grid: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let op = OnePointOperator::new(env);
    if rho0.len() != op.sites {
        return Err(Error::Mismatch(format!(
            "initial values {} vs window sites {}",
            rho0.len(),
            op.sites
        )));
    }
    let mut state = rho0;
    if op.frozen {
        state.push(ghosts.0);
        state.push(ghosts.1);
    }
    let lambda = op.lambda();
    let mut out = Vec::with_capacity(t_grid.len());
    let mut t_prev = 0.0;
    for &t in t_grid {
        let dt = t - t_prev;
        if dt > 0.0 {
            let step = uniformized_step(|v, o| op.apply(v, o), lambda, dt, &state, false, 1e-13);
            state = step.end;
        }
        out.push(state[..op.sites].to_vec());
        t_prev = t;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{generate, DisorderLaw};
    use crate::numerics::special::bessel_i_scaled;
    use approx::assert_relative_eq;

    fn env_with(law: DisorderLaw, n: u32, half: i64, boundary: Boundary) -> Environment {
        let w = LatticeWindow::new(n, -half, half, boundary).unwrap();
        generate(17, law, w, 0.25).unwrap()
    }

    #[test]
    fn constant_profile_is_stationary() {
        let env = env_with(DisorderLaw::Uniform { a: 0.5, b: 2.0 }, 16, 40, Boundary::Closed);
        let traj = solve_discrete(
            &env,
            &Profile::Constant { value: 0.4 },
            &[0.1, 0.6],
            false,
            Integrator::Auto,
        )
        .unwrap();
        for row in &traj.values {
            for &v in row {
                assert_relative_eq!(v, 0.4, epsilon = 1e-11);
            }
        }
        assert!(traj.flux_q.iter().all(|q| q.abs() < 1e-9));
    }

    #[test]
    fn homogeneous_delta_matches_bessel_semigroup() {
        // xi = 1: rho_t(x) = e^{-2 tau} I_x(2 tau), tau = N^2 t
        let n = 8u32;
        let t = 0.1;
        let tau = (n * n) as f64 * t;
        let env = env_with(DisorderLaw::Constant { c: 1.0 }, n, 120, Boundary::Closed);
        let mut rho0 = vec![0.0; env.window.sites()];
        rho0[env.window.index(0)] = 1.0;
        let sol = solve_discrete_from_values(&env, rho0, (0.0, 0.0), &[t]).unwrap();
        let bessel = bessel_i_scaled(2.0 * tau, 60);
        for k in 0..=60i64 {
            let expect = bessel[k as usize];
            assert!(
                (sol[0][env.window.index(k)] - expect).abs() < 1e-8,
                "site {k}: {} vs {expect}",
                sol[0][env.window.index(k)]
            );
            assert!((sol[0][env.window.index(-k)] - expect).abs() < 1e-8);
        }
    }

    #[test]
    fn periodic_mass_is_conserved() {
        let env = env_with(
            DisorderLaw::Uniform { a: 0.5, b: 2.0 },
            16,
            32,
            Boundary::Periodic,
        );
        let p = Profile::SineWave {
            mean: 0.5,
            amp: 0.3,
            wavelength: 2.0,
        };
        let traj = solve_discrete(&env, &p, &[0.05, 0.3, 1.0], false, Integrator::Auto).unwrap();
        let mass0: f64 = initial_values(&p, &env.window, false).iter().sum();
        for row in &traj.values {
            let m: f64 = row.iter().sum();
            assert!((m - mass0).abs() < 1e-10, "mass {m} vs {mass0}");
        }
    }

    #[test]
    fn rkc2_path_agrees_with_uniformization() {
        let env = env_with(
            DisorderLaw::Uniform { a: 0.5, b: 2.0 },
            32,
            96,
            Boundary::FrozenBuffer,
        );
        let p = Profile::canonical_tanh();
        let a = solve_discrete(&env, &p, &[0.2], true, Integrator::Uniformization).unwrap();
        let b = solve_discrete(&env, &p, &[0.2], true, Integrator::Rkc2 { step: 1e-3 }).unwrap();
        let mut max = 0.0f64;
        for i in 0..env.window.sites() {
            max = max.max((a.values[0][i] - b.values[0][i]).abs());
        }
        assert!(max < 1e-7, "state gap {max}");
        assert!(
            (a.flux_q[0] - b.flux_q[0]).abs() < 1e-6,
            "flux gap {} vs {}",
            a.flux_q[0],
            b.flux_q[0]
        );
    }

    #[test]
    fn heat_solution_gaussian_bump_closed_form() {
        let gamma = 0.9242;
        let p = Profile::GaussBump {
            base: 0.3,
            amp: 0.2,
            center: 0.0,
            sigma: 0.5,
        };
        let sol = ContinuumSolution::new(gamma, p).unwrap();
        let t = 0.4;
        let s2 = 0.25 + 2.0 * t / gamma;
        for u in [-1.5f64, -0.2, 0.0, 0.8] {
            let expect = 0.3 + 0.2 * 0.5 / s2.sqrt() * (-u * u / (2.0 * s2)).exp();
            assert!((sol.rho(t, u) - expect).abs() < 1e-6);
        }
        // semigroup identity T_0 G = G
        let g = TestFn::GaussBump {
            center: 0.1,
            sigma: 0.2,
            amp: 1.0,
        };
        assert_relative_eq!(sol.semigroup(&g, 0.0, 0.3), g.eval(0.3), epsilon = 1e-14);
    }

    #[test]
    fn centering_flat_profile_is_zero() {
        let path =
            compute_ut(1.0, &Profile::Constant { value: 0.5 }, &[0.2, 0.5, 1.0], 1e-7).unwrap();
        for &u in &path.u {
            assert!(u.abs() < 1e-10);
        }
    }

    #[test]
    fn centering_tanh_profile_dual_solvers_agree() {
        // decreasing profile near 0 pushes the centering right
        let path = compute_ut(
            1.0,
            &Profile::canonical_tanh(),
            &[0.1, 0.25, 0.5, 0.75, 1.0],
            1e-6,
        )
        .unwrap();
        assert!(path.u.iter().all(|&u| u > 0.0));
        assert!(path.max_disagreement <= 1e-6, "gap {}", path.max_disagreement);
    }

    #[test]
    fn discrete_centering_conventions() {
        let env = env_with(
            DisorderLaw::Uniform { a: 0.5, b: 2.0 },
            32,
            96,
            Boundary::FrozenBuffer,
        );
        let traj = solve_discrete(
            &env,
            &Profile::canonical_tanh(),
            &[0.0, 0.25],
            true,
            Integrator::Auto,
        )
        .unwrap();
        // t = 0: Q = 0 and the shifted sandwich reports 0
        assert_eq!(compute_utn(&traj, 0).unwrap(), 0);
        // t > 0: mass flows rightward for the decreasing profile
        let u = compute_utn(&traj, 1).unwrap();
        assert!(u >= 0, "u_t^N = {u}");
    }

    #[test]
    fn discrete_centering_tracks_continuum() {
        let p = Profile::canonical_tanh();
        let t = 0.5;
        let mut per_n = Vec::new();
        for n in [128u32, 256] {
            let w = LatticeWindow::symmetric(n, 2.5, Boundary::FrozenBuffer).unwrap();
            let env = generate(23, DisorderLaw::Uniform { a: 0.5, b: 2.0 }, w, 0.25).unwrap();
            let traj = solve_discrete(&env, &p, &[t], true, Integrator::Auto).unwrap();
            let u_n = compute_utn(&traj, 0).unwrap();
            per_n.push(u_n as f64 / n as f64);
        }
        let path = compute_ut(4.0f64.ln() / 1.5, &p, &[t], 1e-6).unwrap();
        assert!(
            (per_n[1] - path.u[0]).abs() <= (per_n[0] - path.u[0]).abs() + 0.01,
            "u^N/N {per_n:?} vs u_t {}",
            path.u[0]
        );
        assert!((per_n[1] - path.u[0]).abs() < 0.05);
    }

    #[test]
    fn gradient_bound_holds_for_elliptic_environment() {
        let env = env_with(DisorderLaw::Uniform { a: 0.5, b: 2.0 }, 32, 96, Boundary::Closed);
        let traj = solve_discrete(
            &env,
            &Profile::canonical_tanh(),
            &[0.05, 0.2, 0.5],
            false,
            Integrator::Auto,
        )
        .unwrap();
        let report = gradient_bound_check(&env, &traj).unwrap();
        assert!(report.pass);
        assert!(report.observed_ratio <= 1.0 / (0.25 * 0.25));
    }

    #[test]
    fn homogeneous_gradient_sup_is_monotone() {
        let env = env_with(DisorderLaw::Constant { c: 1.0 }, 32, 96, Boundary::Closed);
        let traj = solve_discrete(
            &env,
            &Profile::canonical_tanh(),
            &[0.02, 0.1, 0.3, 0.7],
            false,
            Integrator::Auto,
        )
        .unwrap();
        for w in traj.grad_sup.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "grad sup not monotone: {:?}", traj.grad_sup);
        }
    }
}
