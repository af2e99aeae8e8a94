//! Exact master equation on `{0,1}^K`, `K <= 12`, by uniformized evolution
//! of the full distribution vector.

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::grid::{Boundary, Profile};
use crate::numerics::uniformize::uniformized_step;

pub const MAX_SITES: usize = 12;

/// Exact law of the process at the requested times, with the integrated
/// marginals needed for exact current means.
pub struct ExactLaw {
    pub env_seed: u64,
    pub sites: usize,
    pub x_min: i64,
    pub periodic: bool,
    pub times: Vec<f64>,
    /// `dist[k][state]`.
    pub dist: Vec<Vec<f64>>,
    /// `int_0^{t_k} E[eta_s(i)] ds` per site.
    marginal_integrals: Vec<Vec<f64>>,
    /// Initial one-point marginals.
    pub rho0: Vec<f64>,
    n2: f64,
    xi: Vec<f64>,
}

struct ExchangeGenerator {
    sites: usize,
    /// `(mask, rate)` per bond; rate carries the `N^2` speedup.
    bonds: Vec<(usize, f64)>,
}

impl ExchangeGenerator {
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for &(mask, rate) in &self.bonds {
            for s in 0..v.len() {
                // bits differ at the bond iff s^mask swaps an occupied and
                // an empty site; popcount test on the masked bits
                let bits = s & mask;
                if bits != 0 && bits != mask {
                    out[s] += rate * (v[s ^ mask] - v[s]);
                }
            }
        }
    }

    fn lambda(&self) -> f64 {
        self.bonds.iter().map(|&(_, r)| r).sum()
    }
}

fn bond_masks(env: &Environment) -> Result<ExchangeGenerator> {
    let w = &env.window;
    let sites = w.sites();
    if sites > MAX_SITES {
        return Err(Error::InvalidArgument(format!(
            "master equation limited to {MAX_SITES} sites, window has {sites}"
        )));
    }
    if w.boundary == Boundary::FrozenBuffer {
        return Err(Error::InvalidArgument(
            "master equation supports closed or periodic windows".into(),
        ));
    }
    let n2 = (w.n as f64) * (w.n as f64);
    let mut bonds = Vec::new();
    for i in 0..sites - 1 {
        bonds.push(((1usize << i) | (1 << (i + 1)), n2 * env.xi(w.x_min + i as i64)));
    }
    if w.boundary == Boundary::Periodic {
        bonds.push(((1usize << (sites - 1)) | 1, n2 * env.xi(w.x_max)));
    }
    Ok(ExchangeGenerator { sites, bonds })
}

/// Evolve the exact law from the product measure of `profile` (starred:
/// conditioned on a particle at the origin).
pub fn master_equation(
    env: &Environment,
    profile: &Profile,
    starred: bool,
    t_grid: &[f64],
) -> Result<ExactLaw> {
    profile.check_range()?;
    let generator = bond_masks(env)?;
    let w = &env.window;
    let sites = generator.sites;
    let n = w.n as f64;
    let mut rho0: Vec<f64> = (0..sites)
        .map(|i| profile.eval(w.site(i) as f64 / n))
        .collect();
    if starred {
        rho0[w.index(0)] = 1.0;
    }
    let mut dist0 = vec![0.0; 1 << sites];
    for (s, d) in dist0.iter_mut().enumerate() {
        let mut p = 1.0;
        for (i, &r) in rho0.iter().enumerate() {
            p *= if s >> i & 1 == 1 { r } else { 1.0 - r };
        }
        *d = p;
    }
    let lambda = generator.lambda();
    let mut state = dist0;
    let mut dist = Vec::with_capacity(t_grid.len());
    let mut marginal_integrals = Vec::with_capacity(t_grid.len());
    let mut int_acc = vec![0.0; sites];
    let mut t_prev = 0.0;
    for &t in t_grid {
        if t < t_prev {
            return Err(Error::InvalidArgument("t_grid must ascend".into()));
        }
        if t > t_prev {
            let step = uniformized_step(
                |v, o| generator.apply(v, o),
                lambda,
                t - t_prev,
                &state,
                true,
                1e-14,
            );
            let int = step.integral.unwrap();
            for i in 0..sites {
                int_acc[i] += marginal_of(&int, sites, i);
            }
            state = step.end;
        }
        dist.push(state.clone());
        marginal_integrals.push(int_acc.clone());
        t_prev = t;
    }
    let xi: Vec<f64> = (0..generator.bonds.len())
        .map(|i| {
            if i < sites - 1 {
                env.xi(w.x_min + i as i64)
            } else {
                env.xi(w.x_max)
            }
        })
        .collect();
    Ok(ExactLaw {
        env_seed: env.seed,
        sites,
        x_min: w.x_min,
        periodic: w.boundary == Boundary::Periodic,
        times: t_grid.to_vec(),
        dist,
        marginal_integrals,
        rho0,
        n2: (w.n as f64) * (w.n as f64),
        xi,
    })
}

fn marginal_of(dist: &[f64], _sites: usize, i: usize) -> f64 {
    let mut m = 0.0;
    for (s, &p) in dist.iter().enumerate() {
        if s >> i & 1 == 1 {
            m += p;
        }
    }
    m
}

impl ExactLaw {
    fn idx(&self, x: i64) -> usize {
        (x - self.x_min) as usize
    }

    /// `E[eta_t(x)]`.
    pub fn marginal(&self, k: usize, x: i64) -> f64 {
        marginal_of(&self.dist[k], self.sites, self.idx(x))
    }

    /// Centered two-point correlation `E[(eta(x)-rho(x))(eta(y)-rho(y))]`.
    pub fn two_point(&self, k: usize, x: i64, y: i64) -> f64 {
        let (i, j) = (self.idx(x), self.idx(y));
        let mut exy = 0.0;
        for (s, &p) in self.dist[k].iter().enumerate() {
            if s >> i & 1 == 1 && s >> j & 1 == 1 {
                exy += p;
            }
        }
        exy - self.marginal(k, x) * self.marginal(k, y)
    }

    /// Centered three-point correlation.
    pub fn three_point(&self, k: usize, x: i64, y: i64, z: i64) -> f64 {
        let (i, j, l) = (self.idx(x), self.idx(y), self.idx(z));
        let (mi, mj, ml) = (
            self.marginal(k, x),
            self.marginal(k, y),
            self.marginal(k, z),
        );
        let mut m = 0.0;
        for (s, &p) in self.dist[k].iter().enumerate() {
            let ei = (s >> i & 1) as f64 - mi;
            let ej = (s >> j & 1) as f64 - mj;
            let el = (s >> l & 1) as f64 - ml;
            m += p * ei * ej * el;
        }
        m
    }

    /// Exact mean current `E[J_{x,x+1}(t_k)] = N^2 xi int (rho(x) - rho(x+1))`.
    pub fn current_mean(&self, k: usize, bond: i64) -> f64 {
        let i = self.idx(bond);
        let j = if i + 1 < self.sites { i + 1 } else { 0 };
        self.n2
            * self.xi[i]
            * (self.marginal_integrals[k][i] - self.marginal_integrals[k][j])
    }

    /// Total mass `sum_x E[eta_t(x)]`.
    pub fn mass(&self, k: usize) -> f64 {
        (0..self.sites)
            .map(|i| marginal_of(&self.dist[k], self.sites, i))
            .sum()
    }
}

/// Detailed balance of the constructed generator with respect to nu_alpha:
/// exchange rates are symmetric and nu_alpha weighs exchanged configurations
/// equally, so `nu(s) q(s,s') = nu(s') q(s',s)` exactly. Verified over every
/// state and bond.
pub fn detailed_balance_check(env: &Environment, alpha: f64) -> Result<()> {
    let generator = bond_masks(env)?;
    let sites = generator.sites;
    let nu = |s: usize| -> f64 {
        let k = (s as u64).count_ones() as f64;
        alpha.powf(k) * (1.0 - alpha).powf(sites as f64 - k)
    };
    for s in 0..(1usize << sites) {
        for &(mask, rate) in &generator.bonds {
            let bits = s & mask;
            if bits != 0 && bits != mask {
                let s2 = s ^ mask;
                let lhs = nu(s) * rate;
                let rhs = nu(s2) * rate;
                if (lhs - rhs).abs() > 1e-15 * lhs.abs().max(rhs.abs()) {
                    return Err(Error::Inconsistency(format!(
                        "detailed balance fails at state {s}, mask {mask}"
                    )));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{generate, DisorderLaw};
    use crate::grid::LatticeWindow;
    use crate::pde::{solve_discrete, Integrator};
    use approx::assert_relative_eq;

    fn small_env(seed: u64, sites: i64, boundary: Boundary, law: DisorderLaw) -> Environment {
        // windows must straddle the origin; put roughly half the sites left
        let x_min = -(sites / 2);
        let x_max = sites + x_min - 1;
        let w = LatticeWindow::new((sites / 2) as u32, x_min, x_max, boundary).unwrap();
        generate(seed, law, w, 0.25).unwrap()
    }

    #[test]
    fn two_site_ring_relaxes_at_known_rate() {
        // K = 2 periodic, one particle, xi = 1: the two bonds both couple the
        // sites, so P[eta(0)=1] - 1/2 decays at rate 2 * N^2 * 2
        let w = LatticeWindow::new(1, -1, 0, Boundary::Periodic).unwrap();
        let env = generate(1, DisorderLaw::Constant { c: 1.0 }, w, 0.25).unwrap();
        let profile = Profile::Constant { value: 0.0 };
        let t = 0.3;
        let law = master_equation(&env, &profile, true, &[t]).unwrap();
        let expect = 0.5 + 0.5 * (-4.0 * t).exp();
        assert_relative_eq!(law.marginal(0, 0), expect, epsilon = 1e-10);
        assert_relative_eq!(law.mass(0), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn one_point_marginals_match_discrete_solver() {
        // closure exactness of the one-point equation
        let env = small_env(3, 8, Boundary::Closed, DisorderLaw::Uniform { a: 0.5, b: 2.0 });
        let profile = Profile::canonical_tanh();
        let ts = [0.05, 0.4, 1.0];
        let law = master_equation(&env, &profile, false, &ts).unwrap();
        let traj = solve_discrete(&env, &profile, &ts, false, Integrator::Uniformization).unwrap();
        for k in 0..ts.len() {
            for x in env.window.x_min..=env.window.x_max {
                assert!(
                    (law.marginal(k, x) - traj.value(k, x)).abs() <= 1e-8,
                    "t {} x {x}: {} vs {}",
                    ts[k],
                    law.marginal(k, x),
                    traj.value(k, x)
                );
            }
        }
    }

    #[test]
    fn starred_marginals_match_starred_solver() {
        let env = small_env(5, 8, Boundary::Closed, DisorderLaw::Uniform { a: 0.5, b: 2.0 });
        let profile = Profile::canonical_tanh();
        let ts = [0.25];
        let law = master_equation(&env, &profile, true, &ts).unwrap();
        let traj = solve_discrete(&env, &profile, &ts, true, Integrator::Uniformization).unwrap();
        for x in env.window.x_min..=env.window.x_max {
            assert!((law.marginal(0, x) - traj.value(0, x)).abs() <= 1e-8);
        }
        // flux integral consistency: Q(t) = E[J_{-1,0}(t)]
        assert!((law.current_mean(0, -1) - traj.flux_q[0]).abs() <= 1e-8);
    }

    #[test]
    fn detailed_balance_holds_exactly() {
        let env = small_env(7, 6, Boundary::Periodic, DisorderLaw::Uniform { a: 0.5, b: 2.0 });
        detailed_balance_check(&env, 0.35).unwrap();
    }

    #[test]
    fn too_many_sites_rejected() {
        let env = small_env(9, 14, Boundary::Closed, DisorderLaw::Constant { c: 1.0 });
        assert!(master_equation(&env, &Profile::Constant { value: 0.5 }, false, &[0.1]).is_err());
    }
}
