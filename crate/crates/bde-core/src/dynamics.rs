//! Event-driven simulation of the exclusion process with bond rates
//! `N^2 xi_x`.
//!
//! The engine is a uniformized chain: with total rate
//! `Lambda = N^2 sum_bonds xi`, event counts per sampling interval are
//! Poisson(`Lambda dt`) and each event picks a bond from a Walker alias table
//! with probability proportional to `xi`. Events on bonds with equal
//! endpoints are fictitious; the law of the trajectory is exactly that of the
//! generator. Runs that accumulate time integrals (martingale compensators,
//! quadratic variation) or event logs use sequential exponential waiting
//! times at the same constant rate instead.
//!
//! Frozen-buffer windows carry one reservoir bond per edge: an event there
//! redraws the edge occupation as a fresh Bernoulli(ghost density), which is
//! the linear closure matching the Dirichlet ghost sites of the solvers.

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::grid::{Boundary, GridFunction, LatticeWindow, Profile};
use crate::numerics::alias::AliasTable;
use crate::numerics::stat_util::Kahan;
use crate::pde::{frozen_ghosts, DiscreteProfile};
use crate::rng::{replica_rng, unit_f64};
use crate::transform::MartingaleCoefficients;

/// Mutable simulator state: occupation bits plus the tagged-particle index.
#[derive(Clone, Debug)]
pub struct Configuration {
    pub window: LatticeWindow,
    pub occ: Vec<u8>,
    /// Array index of the tagged particle, `usize::MAX` when absent.
    tag: usize,
    pub time: f64,
}

impl Configuration {
    pub fn tagged_site(&self) -> Option<i64> {
        (self.tag != usize::MAX).then(|| self.window.site(self.tag))
    }

    pub fn particle_count(&self) -> usize {
        self.occ.iter().map(|&b| b as usize).sum()
    }
}

/// Independent Bernoulli(`rho0(x/N)`) occupations; `star` forces a particle
/// at the origin and tags it.
pub fn init_configuration(
    env: &Environment,
    profile: &Profile,
    rng: &mut ChaCha8Rng,
    star: bool,
) -> Result<Configuration> {
    profile.check_range()?;
    let w = env.window;
    let n = w.n as f64;
    let occ: Vec<u8> = (w.x_min..=w.x_max)
        .map(|x| (unit_f64(rng.next_u64()) < profile.eval(x as f64 / n)) as u8)
        .collect();
    let mut config = Configuration {
        window: w,
        occ,
        tag: usize::MAX,
        time: 0.0,
    };
    if star {
        let o = w.index(0);
        config.occ[o] = 1;
        config.tag = o;
    }
    Ok(config)
}

/// What a field observable measures at each sample time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    /// `<pi^N, G> = (1/N) sum G(x/N) eta(x)`.
    Empirical,
    /// `Y^N(G) = (1/sqrt N) sum G(x/N) (eta - rho^N)`.
    CenteredY,
    /// `X^N(G) = (1/N) sum (T_{xi,l}G)(x) eta(x)`; pass the transformed values.
    CorrectedX,
    /// `Z^N(G) = (1/(gamma_hat sqrt N)) sum (T_{xi,l}G)(x) (eta - rho^N)`.
    CenteredZ,
}

#[derive(Clone, Debug)]
pub struct FieldObservable {
    pub label: String,
    pub kind: FieldKind,
    /// `G` sampled on the window (or `T_{xi,l} G` for the corrected kinds).
    pub values: GridFunction,
}

/// Per-replica simulation request.
#[derive(Clone)]
pub struct SimulationPlan<'a> {
    pub profile: Profile,
    pub horizon: f64,
    /// Ascending sample times in `[0, horizon]`.
    pub sample_times: Vec<f64>,
    pub fields: Vec<FieldObservable>,
    /// Deterministic centering for `CenteredY`/`CenteredZ`; its grid must
    /// contain every sample time.
    pub centering: Option<&'a DiscreteProfile>,
    /// Bonds whose integrated current is recorded.
    pub currents: Vec<i64>,
    pub record_all_currents: bool,
    pub record_occupations: bool,
    pub track_tagged: bool,
    pub star: bool,
    pub martingale: Option<&'a MartingaleCoefficients>,
    pub record_event_log: bool,
}

impl<'a> SimulationPlan<'a> {
    pub fn new(profile: Profile, horizon: f64, sample_times: Vec<f64>) -> Self {
        Self {
            profile,
            horizon,
            sample_times,
            fields: Vec::new(),
            centering: None,
            currents: Vec::new(),
            record_all_currents: false,
            record_occupations: false,
            track_tagged: false,
            star: false,
            martingale: None,
            record_event_log: false,
        }
    }

    fn needs_timed_engine(&self) -> bool {
        self.martingale.is_some() || self.record_event_log
    }
}

#[derive(Clone, Debug, Default)]
pub struct MartingaleSeries {
    /// `M^N_t(G)` at each sample time.
    pub m: Vec<f64>,
    /// Running quadratic variation at each sample time.
    pub qv: Vec<f64>,
}

/// Time-indexed record of one replica.
#[derive(Clone, Debug)]
pub struct ObservableSeries {
    pub replica_id: u64,
    pub master_seed: u64,
    pub env_seed: u64,
    pub sample_times: Vec<f64>,
    pub field_labels: Vec<String>,
    /// `fields[f][k]` at sample time `k`.
    pub fields: Vec<Vec<f64>>,
    pub current_bonds: Vec<i64>,
    /// `currents[b][k]`, integer-valued.
    pub currents: Vec<Vec<i64>>,
    /// Tagged position (site) per sample time.
    pub tagged: Option<Vec<i64>>,
    pub martingale: Option<MartingaleSeries>,
    pub occupations: Option<Vec<Vec<u8>>>,
    /// `(time, stored bond offset)` pairs, timed engine only.
    pub event_log: Option<Vec<(f64, u32)>>,
    pub warnings: Vec<String>,
}

/// Immutable per-batch context shared by replica workers.
struct BatchContext<'a> {
    env: &'a Environment,
    plan: &'a SimulationPlan<'a>,
    master_seed: u64,
    /// (left index, right index) per exchange bond.
    bond_sites: Vec<(u32, u32)>,
    /// Absolute bond id per exchange bond.
    bond_ids: Vec<i64>,
    /// Ghost densities for the two reservoir bonds (frozen mode).
    reservoir: Option<(f64, f64)>,
    alias: AliasTable,
    lambda: f64,
    /// Field evaluators.
    evals: Vec<FieldEval>,
    /// Column of `currents` to report, as indices into the engine's array.
    current_slots: Vec<usize>,
    /// Sample-time index into the centering trajectory.
    centering_rows: Vec<usize>,
    warnings: Vec<String>,
}

struct FieldEval {
    lo: usize,
    vals: Vec<f64>,
    /// Deterministic centering sum per sample time (zero when uncentered).
    centering: Vec<f64>,
    scale: f64,
}

impl<'a> BatchContext<'a> {
    fn new(env: &'a Environment, plan: &'a SimulationPlan<'a>, master_seed: u64) -> Result<Self> {
        let w = env.window;
        if plan.horizon <= 0.0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if plan
            .sample_times
            .iter()
            .any(|&t| t < 0.0 || t > plan.horizon + 1e-12)
            || plan.sample_times.windows(2).any(|p| p[1] <= p[0])
            || plan.sample_times.is_empty()
        {
            return Err(Error::InvalidArgument(
                "sample times must be ascending within [0, horizon]".into(),
            ));
        }
        // exchange bonds
        let sites = w.sites();
        let mut bond_sites = Vec::new();
        let mut bond_ids = Vec::new();
        for i in 0..sites - 1 {
            bond_sites.push((i as u32, i as u32 + 1));
            bond_ids.push(w.x_min + i as i64);
        }
        if w.boundary == Boundary::Periodic {
            bond_sites.push((sites as u32 - 1, 0));
            bond_ids.push(w.x_max);
        }
        let reservoir = (w.boundary == Boundary::FrozenBuffer)
            .then(|| frozen_ghosts(&plan.profile, &w));
        // alias weights: exchange bonds then reservoir bonds
        let mut weights: Vec<f64> = bond_ids.iter().map(|&b| env.xi(b)).collect();
        if reservoir.is_some() {
            weights.push(env.xi(w.x_min - 1));
            weights.push(env.xi(w.x_max));
        }
        let n2 = (w.n as f64) * (w.n as f64);
        let lambda = n2 * weights.iter().sum::<f64>();
        let alias = AliasTable::new(&weights);

        // centering rows
        let mut centering_rows = vec![0usize; plan.sample_times.len()];
        let needs_centering = plan
            .fields
            .iter()
            .any(|f| matches!(f.kind, FieldKind::CenteredY | FieldKind::CenteredZ));
        if needs_centering {
            let c = plan.centering.ok_or_else(|| {
                Error::Mismatch("centered fields need a centering trajectory".into())
            })?;
            if c.window != w || c.env_seed != env.seed {
                return Err(Error::Mismatch(
                    "centering trajectory window/environment differ from the simulation".into(),
                ));
            }
            for (k, &t) in plan.sample_times.iter().enumerate() {
                let row = c
                    .times
                    .iter()
                    .position(|&ct| (ct - t).abs() < 1e-12)
                    .ok_or_else(|| {
                        Error::Mismatch(format!("centering trajectory misses sample time {t}"))
                    })?;
                centering_rows[k] = row;
            }
        }

        // field evaluators + safe-zone warnings
        let gamma_hat = env.gamma_hat;
        let sqrt_n = (w.n as f64).sqrt();
        let buffer = 3.0 * (2.0 * plan.horizon / gamma_hat).sqrt();
        let mut warnings = Vec::new();
        let mut evals = Vec::new();
        for f in &plan.fields {
            if f.values.n != w.n {
                return Err(Error::Mismatch(format!(
                    "field {} sampled at different N",
                    f.label
                )));
            }
            let (lo, hi) = f.values.support_sites();
            if lo < w.x_min || hi > w.x_max {
                return Err(Error::Window(format!(
                    "field {} support leaves the window",
                    f.label
                )));
            }
            let margin = ((lo - w.x_min).min(w.x_max - hi)) as f64 / w.n as f64;
            if w.boundary != Boundary::Periodic && margin < buffer {
                warnings.push(format!(
                    "field {}: support within {margin:.2} of the window edge (diffusive range {buffer:.2}); boundary effects may contaminate it",
                    f.label
                ));
            }
            let scale = match f.kind {
                FieldKind::Empirical | FieldKind::CorrectedX => 1.0 / w.n as f64,
                FieldKind::CenteredY => 1.0 / sqrt_n,
                FieldKind::CenteredZ => 1.0 / (gamma_hat * sqrt_n),
            };
            let vals: Vec<f64> = (lo..=hi).map(|x| f.values.value_at(x)).collect();
            let centering = match f.kind {
                FieldKind::CenteredY | FieldKind::CenteredZ => {
                    let c = plan.centering.unwrap();
                    centering_rows
                        .iter()
                        .map(|&row| {
                            (lo..=hi)
                                .map(|x| f.values.value_at(x) * c.value(row, x))
                                .sum::<f64>()
                        })
                        .collect()
                }
                _ => vec![0.0; plan.sample_times.len()],
            };
            evals.push(FieldEval {
                lo: w.index(lo),
                vals,
                centering,
                scale,
            });
        }

        // current bookkeeping: engine stores one slot per stored bond
        let mut current_slots = Vec::new();
        if plan.record_all_currents {
            current_slots.extend(0..weights.len());
        } else {
            for &b in &plan.currents {
                let slot = if let Some(pos) = bond_ids.iter().position(|&id| id == b) {
                    pos
                } else if reservoir.is_some() && b == w.x_min - 1 {
                    bond_ids.len()
                } else if reservoir.is_some() && b == w.x_max {
                    bond_ids.len() + 1
                } else {
                    return Err(Error::InvalidArgument(format!(
                        "current bond {b} is not tracked by this window"
                    )));
                };
                current_slots.push(slot);
            }
        }
        if plan.martingale.is_some() {
            let mc = plan.martingale.unwrap();
            let first = mc.first_bond;
            let last = first + mc.grad_coeff.len() as i64 - 1;
            if first <= w.x_min || last >= w.x_max - 1 {
                return Err(Error::Window(
                    "martingale coefficient support touches the window edge".into(),
                ));
            }
        }
        if plan.star && plan.profile.eval(0.0) > 1.0 {
            return Err(Error::Profile("profile exceeds 1 at the origin".into()));
        }

        Ok(Self {
            env,
            plan,
            master_seed,
            bond_sites,
            bond_ids,
            reservoir,
            alias,
            lambda,
            evals,
            current_slots,
            centering_rows,
            warnings,
        })
    }

    fn n_exchange(&self) -> usize {
        self.bond_sites.len()
    }
}

/// Engine core: one replica.
struct Replica<'b, 'a> {
    ctx: &'b BatchContext<'a>,
    occ: Vec<u8>,
    tag: usize,
    currents: Vec<i64>,
    rng: ChaCha8Rng,
    // martingale accumulators (timed engine)
    drift_sum: f64,
    qv_sum: f64,
    drift_integral: Kahan,
    qv_integral: Kahan,
    x0: f64,
    event_log: Option<Vec<(f64, u32)>>,
}

impl<'b, 'a> Replica<'b, 'a> {
    fn new(ctx: &'b BatchContext<'a>, replica_id: u64) -> Result<Self> {
        let mut rng = replica_rng(ctx.master_seed, ctx.env.seed, replica_id);
        let config = init_configuration(ctx.env, &ctx.plan.profile, &mut rng, ctx.plan.star)?;
        if ctx.plan.track_tagged && config.tag == usize::MAX {
            return Err(Error::InvalidArgument(
                "tagged tracking requires a starred initial condition".into(),
            ));
        }
        let n_slots = ctx.n_exchange() + if ctx.reservoir.is_some() { 2 } else { 0 };
        let mut rep = Self {
            ctx,
            occ: config.occ,
            tag: config.tag,
            currents: vec![0; n_slots],
            rng,
            drift_sum: 0.0,
            qv_sum: 0.0,
            drift_integral: Kahan::default(),
            qv_integral: Kahan::default(),
            x0: 0.0,
            event_log: ctx.plan.record_event_log.then(Vec::new),
        };
        if let Some(mc) = ctx.plan.martingale {
            rep.x0 = rep.corrected_field(mc);
            rep.drift_sum = rep.full_drift(mc);
            rep.qv_sum = rep.full_qv(mc);
        }
        Ok(rep)
    }

    #[inline]
    fn occ_at(&self, x: i64) -> f64 {
        let w = &self.ctx.env.window;
        if x < w.x_min || x > w.x_max {
            0.0
        } else {
            self.occ[w.index(x)] as f64
        }
    }

    fn corrected_field(&self, mc: &MartingaleCoefficients) -> f64 {
        crate::transform::corrected_x(&mc.tf, |x| self.occ_at(x))
    }

    fn full_drift(&self, mc: &MartingaleCoefficients) -> f64 {
        mc.drift(|x| self.occ_at(x))
    }

    fn full_qv(&self, mc: &MartingaleCoefficients) -> f64 {
        let mut s = 0.0;
        for (i, &q) in mc.qv_coeff.iter().enumerate() {
            let x = mc.first_bond + i as i64;
            let d = self.occ_at(x + 1) - self.occ_at(x);
            s += q * d * d;
        }
        s
    }

    /// Martingale bookkeeping for a flip of sites in `[x_lo, x_hi]`:
    /// re-evaluate the bond terms `x_lo - 1 ..= x_hi`.
    #[inline]
    fn mart_terms(&self, mc: &MartingaleCoefficients, x_lo: i64, x_hi: i64) -> (f64, f64) {
        let mut drift = 0.0;
        let mut qv = 0.0;
        for b in (x_lo - 1)..=x_hi {
            let d = self.occ_at(b + 1) - self.occ_at(b);
            drift -= mc.grad_at(b) * d;
            qv += mc.qv_at(b) * d * d;
        }
        (drift, qv)
    }

    /// Apply one event; returns true if the configuration changed.
    #[inline]
    fn apply_event(&mut self, slot: usize) -> bool {
        let ne = self.ctx.n_exchange();
        if slot < ne {
            let (p, q) = self.ctx.bond_sites[slot];
            let (p, q) = (p as usize, q as usize);
            let (op, oq) = (self.occ[p], self.occ[q]);
            if op == oq {
                return false;
            }
            self.occ[p] = oq;
            self.occ[q] = op;
            self.currents[slot] += op as i64 - oq as i64;
            if self.tag == p {
                self.tag = q;
            } else if self.tag == q {
                self.tag = p;
            }
            true
        } else {
            // reservoir resample at an edge site
            let (rho_l, rho_r) = self.ctx.reservoir.unwrap();
            let left = slot == ne;
            let (idx, rho) = if left {
                (0usize, rho_l)
            } else {
                (self.occ.len() - 1, rho_r)
            };
            let new = (unit_f64(self.rng.next_u64()) < rho) as u8;
            let old = self.occ[idx];
            if new == old {
                return false;
            }
            if self.tag == idx {
                // the tagged particle would be destroyed by the reservoir
                self.tag = usize::MAX;
            }
            self.occ[idx] = new;
            // current through the edge bond: positive when a particle moves
            // rightward across it
            let delta = if left {
                new as i64 - old as i64
            } else {
                old as i64 - new as i64
            };
            self.currents[slot] += delta;
            true
        }
    }

    /// Site range affected by an event (for martingale term updates).
    #[inline]
    fn event_sites(&self, slot: usize) -> (i64, i64) {
        let w = &self.ctx.env.window;
        let ne = self.ctx.n_exchange();
        if slot < ne {
            let (p, q) = self.ctx.bond_sites[slot];
            let a = w.site(p as usize);
            let b = w.site(q as usize);
            (a.min(b), a.max(b))
        } else if slot == ne {
            (w.x_min, w.x_min)
        } else {
            (w.x_max, w.x_max)
        }
    }

    /// Fast path: apply `k` uniformized events with no clock.
    fn run_events(&mut self, k: u64) -> Result<()> {
        let ne = self.ctx.n_exchange();
        let bond_sites = self.ctx.bond_sites.as_slice();
        let alias = &self.ctx.alias;
        let reservoir = self.ctx.reservoir;
        let rng = &mut self.rng;
        let occ = self.occ.as_mut_slice();
        let currents = self.currents.as_mut_slice();
        let track_tag = self.tag != usize::MAX;
        let mut tag = self.tag;
        let last = occ.len() - 1;
        let mut lost_tag = false;
        for _ in 0..k {
            let w = rng.next_u64();
            let slot = alias.sample(w);
            if slot < ne {
                // SAFETY: slot < ne = bond_sites.len(); the stored site
                // indices are < occ.len() and slots index `currents`
                // one-to-one, all by construction in BatchContext::new.
                // The swap and the current increment are no-ops when the
                // endpoints agree, so the exchange is branch-free.
                let (p, q) = unsafe { *bond_sites.get_unchecked(slot) };
                let (p, q) = (p as usize, q as usize);
                unsafe {
                    let op = *occ.get_unchecked(p);
                    let oq = *occ.get_unchecked(q);
                    *occ.get_unchecked_mut(p) = oq;
                    *occ.get_unchecked_mut(q) = op;
                    *currents.get_unchecked_mut(slot) += op as i64 - oq as i64;
                    if track_tag {
                        let moved = (op != oq) as usize;
                        tag = if tag == p && moved == 1 {
                            q
                        } else if tag == q && moved == 1 {
                            p
                        } else {
                            tag
                        };
                    }
                }
            } else {
                // reservoir resample (rare)
                let (rho_l, rho_r) = reservoir.expect("reservoir slot without frozen buffer");
                let left = slot == ne;
                let (idx, rho) = if left { (0, rho_l) } else { (last, rho_r) };
                let new = (unit_f64(rng.next_u64()) < rho) as u8;
                let old = occ[idx];
                if new != old {
                    if track_tag && tag == idx {
                        lost_tag = true;
                    }
                    occ[idx] = new;
                    currents[slot] += if left {
                        new as i64 - old as i64
                    } else {
                        old as i64 - new as i64
                    };
                }
            }
        }
        self.tag = tag;
        if lost_tag {
            self.tag = usize::MAX;
            return Err(Error::Inconsistency(
                "tagged particle reached the frozen buffer; enlarge the window".into(),
            ));
        }
        Ok(())
    }

    /// Timed path: exponential clocks, accumulating the drift and QV
    /// integrals exactly (the integrands are constant between events).
    fn run_timed(&mut self, t_from: f64, t_to: f64, mc: Option<&MartingaleCoefficients>) -> Result<()> {
        let lambda = self.ctx.lambda;
        let mut t = t_from;
        let track_tag = self.tag != usize::MAX;
        loop {
            let u: f64 = unit_f64(self.rng.next_u64()).max(f64::MIN_POSITIVE);
            let dt = -u.ln() / lambda;
            if t + dt >= t_to {
                let hold = t_to - t;
                self.drift_integral.add(self.drift_sum * hold);
                self.qv_integral.add(self.qv_sum * hold);
                return Ok(());
            }
            t += dt;
            self.drift_integral.add(self.drift_sum * dt);
            self.qv_integral.add(self.qv_sum * dt);
            let w = self.rng.next_u64();
            let slot = self.ctx.alias.sample(w);
            if let Some(mc) = mc {
                let (lo, hi) = self.event_sites(slot);
                let (d_old, q_old) = self.mart_terms(mc, lo, hi);
                let changed = self.apply_event(slot);
                if changed {
                    let (d_new, q_new) = self.mart_terms(mc, lo, hi);
                    self.drift_sum += d_new - d_old;
                    self.qv_sum += q_new - q_old;
                    if let Some(log) = self.event_log.as_mut() {
                        log.push((t, slot as u32));
                    }
                }
            } else {
                let changed = self.apply_event(slot);
                if changed {
                    if let Some(log) = self.event_log.as_mut() {
                        log.push((t, slot as u32));
                    }
                }
            }
            if track_tag && self.tag == usize::MAX {
                return Err(Error::Inconsistency(
                    "tagged particle reached the frozen buffer; enlarge the window".into(),
                ));
            }
        }
    }

    fn sample(&self, k: usize, out: &mut ObservableSeries) {
        let ctx = self.ctx;
        for (f, ev) in ctx.evals.iter().enumerate() {
            let mut s = 0.0;
            for (i, &v) in ev.vals.iter().enumerate() {
                s += v * self.occ[ev.lo + i] as f64;
            }
            out.fields[f].push((s - ev.centering[k]) * ev.scale);
        }
        for (c, &slot) in ctx.current_slots.iter().enumerate() {
            out.currents[c].push(self.currents[slot]);
        }
        if let Some(tagged) = out.tagged.as_mut() {
            tagged.push(ctx.env.window.site(self.tag));
        }
        if let Some(m) = out.martingale.as_mut() {
            let mc = ctx.plan.martingale.unwrap();
            let x = self.corrected_field(mc);
            m.m.push(x - self.x0 - self.drift_integral.value());
            m.qv.push(self.qv_integral.value());
        }
        if let Some(occs) = out.occupations.as_mut() {
            occs.push(self.occ.clone());
        }
    }
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let p = Poisson::new(mean).expect("positive mean");
    p.sample(rng) as u64
}

/// Simulate one replica.
pub fn simulate(
    env: &Environment,
    plan: &SimulationPlan,
    master_seed: u64,
    replica_id: u64,
) -> Result<ObservableSeries> {
    let ctx = BatchContext::new(env, plan, master_seed)?;
    run_replica(&ctx, replica_id)
}

fn run_replica(ctx: &BatchContext, replica_id: u64) -> Result<ObservableSeries> {
    let plan = ctx.plan;
    let mut rep = Replica::new(ctx, replica_id)?;
    let mut out = ObservableSeries {
        replica_id,
        master_seed: ctx.master_seed,
        env_seed: ctx.env.seed,
        sample_times: plan.sample_times.clone(),
        field_labels: plan.fields.iter().map(|f| f.label.clone()).collect(),
        fields: vec![Vec::with_capacity(plan.sample_times.len()); plan.fields.len()],
        current_bonds: if plan.record_all_currents {
            let mut ids = ctx.bond_ids.clone();
            if ctx.reservoir.is_some() {
                ids.push(ctx.env.window.x_min - 1);
                ids.push(ctx.env.window.x_max);
            }
            ids
        } else {
            plan.currents.clone()
        },
        currents: vec![Vec::with_capacity(plan.sample_times.len()); ctx.current_slots.len()],
        tagged: plan.track_tagged.then(Vec::new),
        martingale: plan.martingale.is_some().then(MartingaleSeries::default),
        occupations: plan.record_occupations.then(Vec::new),
        event_log: None,
        warnings: ctx.warnings.clone(),
    };

    let timed = plan.needs_timed_engine();
    let mut t_prev = 0.0;
    for (k, &t) in plan.sample_times.iter().enumerate() {
        if t > t_prev || (k == 0 && t > 0.0) {
            if timed {
                rep.run_timed(t_prev, t, plan.martingale)?;
            } else {
                let k_events = poisson_count(&mut rep.rng, ctx.lambda * (t - t_prev));
                rep.run_events(k_events)?;
            }
        }
        rep.sample(k, &mut out);
        t_prev = t;
    }
    out.event_log = rep.event_log.take();
    Ok(out)
}

/// Simulate a batch of replicas (replica-level parallelism; results are
/// deterministic and ordered by replica id regardless of thread count).
pub fn simulate_batch(
    env: &Environment,
    plan: &SimulationPlan,
    master_seed: u64,
    replicas: u64,
) -> Result<Vec<ObservableSeries>> {
    let ctx = BatchContext::new(env, plan, master_seed)?;
    (0..replicas)
        .into_par_iter()
        .map(|r| run_replica(&ctx, r))
        .collect()
}

/// Verify the current-occupation conservation identity
/// `J_{x-1,x}(t) - J_{x,x+1}(t) = eta_t(x) - eta_0(x)` on every recorded
/// sample of every replica. Requires occupations and all currents.
pub fn current_conservation_check(series: &[ObservableSeries], window: &LatticeWindow) -> Result<()> {
    for s in series {
        let occs = s.occupations.as_ref().ok_or_else(|| {
            Error::InvalidArgument("conservation check needs recorded occupations".into())
        })?;
        let find = |b: i64| -> Option<usize> { s.current_bonds.iter().position(|&id| id == b) };
        for (k, _t) in s.sample_times.iter().enumerate() {
            for x in window.x_min..=window.x_max {
                let left_bond = if x == window.x_min {
                    match window.boundary {
                        Boundary::Periodic => window.x_max,
                        Boundary::FrozenBuffer => window.x_min - 1,
                        Boundary::Closed => continue,
                    }
                } else {
                    x - 1
                };
                let right_bond = if x == window.x_max {
                    match window.boundary {
                        Boundary::Periodic => window.x_max,
                        Boundary::FrozenBuffer => window.x_max,
                        Boundary::Closed => continue,
                    }
                } else {
                    x
                };
                // periodic wrap: for x = x_max the right bond IS the wrap bond
                let (jl, jr) = match (find(left_bond), find(right_bond)) {
                    (Some(a), Some(b)) => (s.currents[a][k], s.currents[b][k]),
                    _ => {
                        return Err(Error::InvalidArgument(
                            "conservation check needs all currents recorded".into(),
                        ))
                    }
                };
                let i = window.index(x);
                let lhs = jl - jr;
                let rhs = occs[k][i] as i64 - initial_occupation(s, window, i)? as i64;
                if lhs != rhs {
                    return Err(Error::Inconsistency(format!(
                        "conservation violated: replica {}, t={}, site {x}: J diff {lhs} vs occupation diff {rhs}",
                        s.replica_id, s.sample_times[k]
                    )));
                }
            }
        }
    }
    Ok(())
}

fn initial_occupation(s: &ObservableSeries, _window: &LatticeWindow, i: usize) -> Result<u8> {
    let occs = s.occupations.as_ref().unwrap();
    if (s.sample_times.first().copied().unwrap_or(1.0) - 0.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(
            "conservation check needs t = 0 among the sample times".into(),
        ));
    }
    Ok(occs[0][i])
}

/// Verify the tagged-particle / current order relation on every sample:
/// `{X_t >= n} <=> {J_{-1,0}(t) >= S_eta(n)}` for every integer `n` in the
/// window, where `S_eta(n) = sum_{x=0}^{n-1} eta_t(x)` for `n >= 0` and
/// `S_eta(n) = -sum_{x=n}^{-1} eta_t(x)` for `n < 0` (the same signed
/// partial-sum convention as the discrete centering). The negative branch is
/// the reflection image of the stated one combined with the conservation
/// identity; taking complements shows it is equivalent to
/// `{X_t <= -m} <=> {-J >= 1 + sum_{x=-m+1}^{-1} eta_t(x)}` for `m >= 1`.
/// Periodic windows are rejected (ordering wraps).
pub fn tagged_vs_current_check(series: &[ObservableSeries], window: &LatticeWindow) -> Result<()> {
    if window.boundary == Boundary::Periodic {
        return Err(Error::InvalidArgument(
            "the order relation does not hold on periodic windows".into(),
        ));
    }
    for s in series {
        let occs = s
            .occupations
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("check needs recorded occupations".into()))?;
        let tagged = s
            .tagged
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("check needs the tagged position".into()))?;
        let jslot = s
            .current_bonds
            .iter()
            .position(|&b| b == -1)
            .ok_or_else(|| Error::InvalidArgument("check needs the current at bond (-1,0)".into()))?;
        for (k, &t) in s.sample_times.iter().enumerate() {
            let x_t = tagged[k];
            let j = s.currents[jslot][k];
            let s_eta = |n: i64| -> i64 {
                if n >= 0 {
                    (0..n).map(|x| occs[k][window.index(x)] as i64).sum()
                } else {
                    -(n..0).map(|x| occs[k][window.index(x)] as i64).sum::<i64>()
                }
            };
            for n in (window.x_min + 1)..=(window.x_max - 1) {
                let lhs = x_t >= n;
                let rhs = j >= s_eta(n);
                if lhs != rhs {
                    return Err(Error::Inconsistency(format!(
                        "order relation violated: replica {}, t={t}, n={n}: X={x_t}, J={j}, S_eta={}",
                        s.replica_id,
                        s_eta(n)
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Replay an event log against an independent, simple-minded state machine;
/// returns (final occupations, currents per stored bond, tagged site).
/// Used to validate the engine's bookkeeping.
pub fn replay_event_log(
    env: &Environment,
    plan: &SimulationPlan,
    initial: &Configuration,
    log: &[(f64, u32)],
) -> (Vec<u8>, Vec<i64>, Option<i64>) {
    let w = env.window;
    let sites = w.sites();
    let mut occ = initial.occ.clone();
    let mut tag = initial.tagged_site();
    let mut n_ex = sites - 1;
    if w.boundary == Boundary::Periodic {
        n_ex += 1;
    }
    let n_slots = n_ex + if w.boundary == Boundary::FrozenBuffer { 2 } else { 0 };
    let mut currents = vec![0i64; n_slots];
    for &(_t, slot) in log {
        let slot = slot as usize;
        if slot < n_ex {
            let p = slot;
            let q = if p + 1 < sites { p + 1 } else { 0 };
            if occ[p] != occ[q] {
                currents[slot] += occ[p] as i64 - occ[q] as i64;
                occ.swap(p, q);
                if tag == Some(w.site(p)) {
                    tag = Some(w.site(q));
                } else if tag == Some(w.site(q)) {
                    tag = Some(w.site(p));
                }
            }
        } else {
            // logged reservoir events always flipped the edge site
            let idx = if slot == n_ex { 0 } else { sites - 1 };
            let old = occ[idx];
            occ[idx] = 1 - old;
            currents[slot] += if slot == n_ex {
                occ[idx] as i64 - old as i64
            } else {
                old as i64 - occ[idx] as i64
            };
        }
    }
    let _ = plan;
    (occ, currents, tag)
}
