//! Environment-corrected test-function transforms.
//!
//! `T_xi G(x) = sum_{j<x} xi_j^{-1} [G((j+1)/N) - G(j/N)]` straightens the
//! disorder: `N (T_xi G(x+1) - T_xi G(x)) xi_x = grad_N G(x/N)` holds exactly,
//! and after the ramp correction `T_{xi,l} G = T_xi G - (T_{xi,G}/T_{xi,g}) T_xi g_l`
//! the result is compactly supported and close to `gamma G(x/N)` in l1.

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::grid::{FnClass, GridFunction, LatticeWindow, TestFn};

/// Cutoff-width convention for the ramp `g_l`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cutoff {
    /// Fixed macroscopic width `l`.
    Fixed(f64),
    /// `l_N = N^{1/4}` macroscopic units, the fluctuation-regime choice
    /// (a ramp over `N^{1/4} * N` lattice sites).
    QuarterPower,
}

impl Cutoff {
    pub fn width(&self, n: u32) -> f64 {
        match *self {
            Cutoff::Fixed(l) => l,
            Cutoff::QuarterPower => (n as f64).powf(0.25),
        }
    }
}

/// Result of `apply_T`: per-site prefix values and the full-sum scalar.
#[derive(Clone, Debug)]
pub struct RawTransform {
    /// `(T_xi G)(x)` for `x` in the stored range starting at `first`.
    pub first: i64,
    pub values: Vec<f64>,
    /// `T_{xi,G}`, the full sum.
    pub scalar: f64,
}

impl RawTransform {
    /// Value with the constant continuations: 0 far left, `scalar` far right.
    pub fn value_at(&self, x: i64) -> f64 {
        if x <= self.first {
            if x == self.first {
                self.values[0]
            } else {
                0.0
            }
        } else if x >= self.first + self.values.len() as i64 {
            self.scalar
        } else {
            self.values[(x - self.first) as usize]
        }
    }
}

fn support_strictly_inside(g: &GridFunction, window: &LatticeWindow) -> bool {
    let (lo, hi) = g.support_sites();
    lo > window.x_min && hi < window.x_max
}

/// Prefix-sum transform of a sampled function with compact support.
///
/// The increments `xi_j^{-1} [G((j+1)/N) - G(j/N)]` vanish outside the
/// sampled support, so the prefix is 0 left of it and constantly `T_{xi,G}`
/// right of it; only the support range is stored.
pub fn apply_t(env: &Environment, g: &GridFunction) -> Result<RawTransform> {
    if g.n != env.window.n {
        return Err(Error::Mismatch("grid function N differs from window N".into()));
    }
    let window = &env.window;
    if !support_strictly_inside(g, window) {
        return Err(Error::Window(
            "test-function support touches the window edge".into(),
        ));
    }
    let (lo, hi) = g.support_sites();
    // values for x in lo..=hi+1 (prefix over bonds j in lo-1..=hi)
    let mut values = Vec::with_capacity((hi - lo + 2) as usize);
    let mut acc = 0.0;
    // bond j = lo-1 contributes G(lo/N) - G((lo-1)/N) = G(lo/N)
    for x in lo..=hi + 1 {
        let j = x - 1;
        acc += env.xi_inv(j) * (g.value_at(j + 1) - g.value_at(j));
        values.push(acc);
    }
    Ok(RawTransform {
        first: lo,
        values,
        scalar: acc,
    })
}

/// Transform of the ramp `g_l`, computed from its exact increments: `1/(lN)`
/// on each bond `0 <= j < lN`, zero elsewhere. `T_{xi,g}` is then the
/// ramp-average of `xi^{-1}`.
pub fn apply_t_ramp(env: &Environment, l: f64) -> Result<(RawTransform, i64)> {
    let window = &env.window;
    let ln = (l * window.n as f64).round() as i64;
    if ln < 1 {
        return Err(Error::InvalidArgument(format!(
            "cutoff width l = {l} too small"
        )));
    }
    if window.x_max <= ln {
        return Err(Error::Window(format!(
            "window right edge {} cannot hold the ramp up to {ln}",
            window.x_max
        )));
    }
    let mut values = Vec::with_capacity(ln as usize + 1);
    let mut acc = 0.0;
    values.push(0.0); // x = 0: empty prefix
    for j in 0..ln {
        acc += env.xi_inv(j) / ln as f64;
        values.push(acc);
    }
    Ok((
        RawTransform {
            first: 0,
            values,
            scalar: acc,
        },
        ln,
    ))
}

/// The corrected transform `T_{xi,l} G` and its defining scalars.
#[derive(Clone, Debug)]
pub struct TransformedFunction {
    pub env_seed: u64,
    pub n: u32,
    /// Cutoff width in macroscopic units (rounded to a whole ramp of sites).
    pub l: f64,
    /// `T_{xi,l} G` as a compactly supported grid function.
    pub corrected: GridFunction,
    pub t_scalar_g: f64,
    pub t_scalar_ramp: f64,
    /// `(1/N) sum_x |T_{xi,l} G(x) - gamma_hat G(x/N)|`.
    pub l1_distance: f64,
    /// Truncation radius carried over from Schwartz sampling, if any.
    pub truncation_radius: Option<f64>,
}

/// Apply the cutoff-corrected transform.
pub fn apply_tl(env: &Environment, g: &GridFunction, cutoff: Cutoff) -> Result<TransformedFunction> {
    let window = &env.window;
    let l = cutoff.width(window.n);
    let raw = apply_t(env, g)?;
    let (raw_ramp, ln) = apply_t_ramp(env, l)?;
    if raw_ramp.scalar.abs() < 1e-12 {
        return Err(Error::Numerics(
            "T_{xi,g} vanished; environment data is corrupt".into(),
        ));
    }
    let ratio = raw.scalar / raw_ramp.scalar;

    let (g_lo, g_hi) = g.support_sites();
    // support of the corrected transform: union of G's support and the ramp
    let lo = g_lo.min(0);
    let hi = (g_hi + 1).max(ln);
    let mut values = Vec::with_capacity((hi - lo + 1) as usize);
    for x in lo..=hi {
        values.push(raw.value_at(x) - ratio * raw_ramp.value_at(x));
    }
    let corrected = GridFunction::from_values(window.n, lo, values, g.class);

    let gamma_hat = env.gamma_hat;
    let mut l1 = 0.0;
    for x in lo..=hi {
        l1 += (corrected.value_at(x) - gamma_hat * g.value_at(x)).abs();
    }
    // outside the stored range both terms vanish
    let l1_distance = l1 / window.n as f64;

    Ok(TransformedFunction {
        env_seed: env.seed,
        n: window.n,
        l: ln as f64 / window.n as f64,
        corrected,
        t_scalar_g: raw.scalar,
        t_scalar_ramp: raw_ramp.scalar,
        l1_distance,
        truncation_radius: g.truncation_radius,
    })
}

/// Pathwise bound of the corrected field against the plain empirical field:
/// `sup_t |gamma <pi_t, G> - X_t(G)| <= (1/N) sum_x |gamma G(x/N) - T_{xi,l}G(x)|`.
/// The right-hand side is `l1_distance` with `gamma = gamma_hat`.
pub fn sup_uniform_bound(tf: &TransformedFunction) -> f64 {
    tf.l1_distance
}

/// Corrected empirical field `X^N(G) = (1/N) sum_x T_{xi,l}G(x) eta(x)`.
pub fn corrected_x(tf: &TransformedFunction, occ_value: impl Fn(i64) -> f64) -> f64 {
    let (lo, hi) = tf.corrected.support_sites();
    let mut s = 0.0;
    for x in lo..=hi {
        s += tf.corrected.value_at(x) * occ_value(x);
    }
    s / tf.n as f64
}

/// Corrected fluctuation field
/// `Z^N(G) = (1/(gamma_hat sqrt N)) sum_x T_{xi,l}G(x) (eta(x) - rho(x))`.
pub fn corrected_z(
    tf: &TransformedFunction,
    gamma_hat: f64,
    occ_value: impl Fn(i64) -> f64,
    rho_value: impl Fn(i64) -> f64,
) -> f64 {
    let (lo, hi) = tf.corrected.support_sites();
    let mut s = 0.0;
    for x in lo..=hi {
        s += tf.corrected.value_at(x) * (occ_value(x) - rho_value(x));
    }
    s / (gamma_hat * (tf.n as f64).sqrt())
}

/// Coefficients of the martingale `M^N_t(G)` attached to the corrected field
/// (drift and quadratic-variation weights per bond), all exact consequences
/// of the summation-by-parts identity.
#[derive(Clone, Debug)]
pub struct MartingaleCoefficients {
    /// The corrected function whose field is compensated.
    pub tf: TransformedFunction,
    /// First bond of the stored coefficient range.
    pub first_bond: i64,
    /// `c(x) = grad_N (G - r g_l)(x/N)` per bond; compact support.
    pub grad_coeff: Vec<f64>,
    /// `xi_x^{-1} c(x)^2 / N^2` per bond: QV contribution of an active bond.
    pub qv_coeff: Vec<f64>,
}

/// Build the drift and QV coefficients for `M^N(G)` with cutoff `l`.
pub fn martingale_coefficients(
    env: &Environment,
    g: &GridFunction,
    cutoff: Cutoff,
) -> Result<MartingaleCoefficients> {
    let tf = apply_tl(env, g, cutoff)?;
    let n = env.window.n as f64;
    let (lo, hi) = tf.corrected.support_sites();
    // bonds lo-1 ..= hi: N * (T~(x+1) - T~(x)) * xi_x = c(x)
    let mut grad_coeff = Vec::with_capacity((hi - lo + 2) as usize);
    let mut qv_coeff = Vec::with_capacity((hi - lo + 2) as usize);
    for x in (lo - 1)..=hi {
        let c = n * (tf.corrected.value_at(x + 1) - tf.corrected.value_at(x)) * env.xi(x);
        grad_coeff.push(c);
        qv_coeff.push(c * c / (env.xi(x) * n * n));
    }
    Ok(MartingaleCoefficients {
        tf,
        first_bond: lo - 1,
        grad_coeff,
        qv_coeff,
    })
}

impl MartingaleCoefficients {
    #[inline]
    pub fn grad_at(&self, bond: i64) -> f64 {
        let i = bond - self.first_bond;
        if i < 0 || i as usize >= self.grad_coeff.len() {
            0.0
        } else {
            self.grad_coeff[i as usize]
        }
    }

    #[inline]
    pub fn qv_at(&self, bond: i64) -> f64 {
        let i = bond - self.first_bond;
        if i < 0 || i as usize >= self.qv_coeff.len() {
            0.0
        } else {
            self.qv_coeff[i as usize]
        }
    }

    /// Drift integrand `-sum_bonds c(x) (eta(x+1) - eta(x))`; equals
    /// `<pi, Delta_N G> - r <pi, Delta_N g_l>` by summation by parts.
    pub fn drift(&self, occ_value: impl Fn(i64) -> f64) -> f64 {
        let mut s = 0.0;
        for (i, &c) in self.grad_coeff.iter().enumerate() {
            let x = self.first_bond + i as i64;
            s -= c * (occ_value(x + 1) - occ_value(x));
        }
        s
    }
}

/// CSV export of a transform table: `x, G(x/N), T_xi G, T_{xi,l} G`.
pub fn transform_table_csv<W: std::io::Write>(
    env: &Environment,
    g: &GridFunction,
    tf: &TransformedFunction,
    out: W,
) -> Result<()> {
    let raw = apply_t(env, g)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "g", "t_xi_g", "t_xi_l_g"])?;
    let (lo, hi) = tf.corrected.support_sites();
    for x in lo..=hi {
        w.write_record([
            format!("{x}"),
            format!("{}", g.value_at(x)),
            format!("{}", raw.value_at(x)),
            format!("{}", tf.corrected.value_at(x)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{generate, DisorderLaw};
    use crate::grid::Boundary;
    use crate::numerics::stat_util::loglog_slope;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn make_env(seed: u64, law: DisorderLaw, n: u32, half_macro: f64) -> Environment {
        let w = LatticeWindow::symmetric(n, half_macro, Boundary::Closed).unwrap();
        generate(seed, law, w, 0.25).unwrap()
    }

    fn bump() -> TestFn {
        TestFn::SmoothBump {
            center: 0.0,
            halfwidth: 0.8,
            amp: 1.0,
        }
    }

    #[test]
    fn homogeneous_transform_reproduces_g() {
        // xi = 1: telescoping gives T_xi G(x) = G(x/N), T_{xi,G} = 0
        let env = make_env(1, DisorderLaw::Constant { c: 1.0 }, 64, 2.0);
        let g = GridFunction::sample(&bump(), &env.window).unwrap();
        let raw = apply_t(&env, &g).unwrap();
        for x in -120..=120 {
            assert_relative_eq!(raw.value_at(x), g.value_at(x), epsilon = 1e-12);
        }
        assert!(raw.scalar.abs() < 1e-12);
        // xi = c: G / c
        let env_c = make_env(1, DisorderLaw::Constant { c: 2.0 }, 64, 2.0);
        let raw_c = apply_t(&env_c, &g).unwrap();
        for x in -120..=120 {
            assert_relative_eq!(raw_c.value_at(x), g.value_at(x) / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ramp_transform_cancels_itself() {
        // G = g_l: the correction ratio is exactly 1, so T_{xi,l} g_l = 0
        let env = make_env(5, DisorderLaw::Uniform { a: 0.5, b: 2.0 }, 32, 3.0);
        let (raw, ln) = apply_t_ramp(&env, 1.0).unwrap();
        let ratio = raw.scalar / raw.scalar;
        for x in -40..=(ln + 40) {
            assert!((raw.value_at(x) - ratio * raw.value_at(x)).abs() < 1e-15);
        }
        // and the ramp average reproduces the windowed mean of xi^{-1}
        let mean: f64 = (0..ln).map(|j| env.xi_inv(j)).sum::<f64>() / ln as f64;
        assert_relative_eq!(raw.scalar, mean, epsilon = 1e-13);
    }

    #[test]
    fn corrected_transform_boundary_identities() {
        let env = make_env(7, DisorderLaw::Uniform { a: 0.5, b: 2.0 }, 64, 3.0);
        let g = GridFunction::sample(&bump(), &env.window).unwrap();
        let raw = apply_t(&env, &g).unwrap();
        let tf = apply_tl(&env, &g, Cutoff::Fixed(1.5)).unwrap();
        let ln = (1.5f64 * 64.0).round() as i64;
        // x <= 0: identical to T_xi G; left of G's support: zero
        for x in [-130, -80, -10, 0] {
            assert_relative_eq!(tf.corrected.value_at(x), raw.value_at(x), epsilon = 1e-12);
        }
        let (g_lo, _) = g.support_sites();
        assert_eq!(tf.corrected.value_at(g_lo - 2), 0.0);
        // x >= lN: identical to T_xi G - T_{xi,G}, hence 0 beyond both supports
        for x in [ln, ln + 5, ln + 40] {
            assert_relative_eq!(
                tf.corrected.value_at(x),
                raw.value_at(x) - raw.scalar,
                epsilon = 1e-12
            );
        }
        assert!(tf.corrected.value_at(ln + 40).abs() < 1e-12);
    }

    #[test]
    fn summation_by_parts_identity_exact() {
        // N (T_xi G(x+1) - T_xi G(x)) xi_x = grad_N G(x/N) for every bond
        let env = make_env(11, DisorderLaw::Uniform { a: 0.5, b: 2.0 }, 32, 2.0);
        let g = GridFunction::sample(&bump(), &env.window).unwrap();
        let raw = apply_t(&env, &g).unwrap();
        let n = 32.0;
        for x in -63..63 {
            let lhs = n * (raw.value_at(x + 1) - raw.value_at(x)) * env.xi(x);
            let rhs = n * (g.value_at(x + 1) - g.value_at(x));
            assert_relative_eq!(lhs, rhs, epsilon = 1e-11, max_relative = 1e-11);
        }
    }

    #[test]
    fn support_touching_edge_rejected() {
        let env = make_env(3, DisorderLaw::Uniform { a: 0.5, b: 2.0 }, 32, 1.0);
        // halfwidth 1.0 运 support exactly to the edge
        let wide = TestFn::SmoothBump {
            center: 0.0,
            halfwidth: 1.0,
            amp: 1.0,
        };
        let g = GridFunction::sample(&wide, &env.window).unwrap();
        assert!(apply_t(&env, &g).is_err());
    }

    #[test]
    fn l1_distance_decays_with_n() {
        // Lemma-s2 style check: (1/N) sum |T_{xi,l}G - gamma_hat G| falls
        // with N at negative log-log slope, per fixed seed
        let law = DisorderLaw::Uniform { a: 0.5, b: 2.0 };
        let mut ns = Vec::new();
        let mut dists = Vec::new();
        for k in 8..=13 {
            let n = 1u32 << k;
            let env = make_env(42, law, n, 4.0);
            let g = GridFunction::sample(&bump(), &env.window).unwrap();
            let tf = apply_tl(&env, &g, Cutoff::Fixed(1.0)).unwrap();
            ns.push(n as f64);
            dists.push(tf.l1_distance);
        }
        let slope = loglog_slope(&ns, &dists);
        assert!(slope < -0.2, "slope {slope}, dists {dists:?}");
        assert!(
            dists.last().unwrap() < &(dists[0] * 0.5),
            "no overall decay: {dists:?}"
        );
    }

    #[test]
    fn sup_distance_beats_quarter_power() {
        // Lemma-s3 style check: N^{1/4} sup_x |T_xi G - gamma_hat G| decays
        let law = DisorderLaw::Uniform { a: 0.5, b: 2.0 };
        let g_fn = TestFn::GaussBump {
            center: 0.0,
            sigma: 0.3,
            amp: 1.0,
        };
        let mut ns = Vec::new();
        let mut sups = Vec::new();
        for k in [8u32, 10, 12, 14] {
            let n = 1u32 << k;
            let env = make_env(43, law, n, 4.0);
            let g = GridFunction::sample(&g_fn, &env.window).unwrap();
            let raw = apply_t(&env, &g).unwrap();
            let (lo, hi) = g.support_sites();
            let mut sup: f64 = 0.0;
            for x in lo..=hi + 1 {
                sup = sup.max((raw.value_at(x) - env.gamma_hat * g.value_at(x)).abs());
            }
            ns.push(n as f64);
            sups.push((n as f64).powf(0.25) * sup);
        }
        let slope = loglog_slope(&ns, &sups);
        assert!(slope < 0.0, "slope {slope}, scaled sups {sups:?}");
    }

    #[test]
    fn corrected_fields_reduce_in_simple_cases() {
        let env = make_env(9, DisorderLaw::Constant { c: 1.0 }, 32, 3.0);
        let g = GridFunction::sample(&bump(), &env.window).unwrap();
        let tf = apply_tl(&env, &g, Cutoff::Fixed(1.0)).unwrap();
        // eta = 0 everywhere: X = 0
        assert_eq!(corrected_x(&tf, |_| 0.0), 0.0);
        // xi = 1: T_{xi,l} G = G so X(G) = <pi, G> for any occupation
        let occ = |x: i64| if (x / 3) % 2 == 0 { 1.0 } else { 0.0 };
        let mut pi_g = 0.0;
        let (lo, hi) = g.support_sites();
        for x in lo..=hi {
            pi_g += g.value_at(x) * occ(x);
        }
        pi_g /= 32.0;
        assert_relative_eq!(corrected_x(&tf, occ), pi_g, epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        // Z^N(G) = gamma_hat^{-1} Y^N(T_{xi,l}G) holds by construction, and
        // the pathwise sup bound (gamma_hat <pi,G> - X(G) against the l1
        // distance) holds for arbitrary occupations.
        #[test]
        fn field_identities_hold_for_random_environments(
            seed in 0u64..1000,
            occ_bits in prop::collection::vec(prop::bool::ANY, 200),
        ) {
            let env = make_env(seed, DisorderLaw::Uniform { a: 0.5, b: 2.0 }, 16, 6.0);
            let g = GridFunction::sample(&bump(), &env.window).unwrap();
            let tf = apply_tl(&env, &g, Cutoff::Fixed(1.0)).unwrap();
            let occ = |x: i64| {
                let i = (x - env.window.x_min) as usize;
                if occ_bits[i % occ_bits.len()] { 1.0 } else { 0.0 }
            };
            // sup bound, pathwise
            let mut pi_g = 0.0;
            let (lo, hi) = g.support_sites();
            for x in lo..=hi {
                pi_g += g.value_at(x) * occ(x);
            }
            pi_g /= 16.0;
            let x_field = corrected_x(&tf, occ);
            prop_assert!((env.gamma_hat * pi_g - x_field).abs() <= tf.l1_distance + 1e-12);

            // Z = gamma_hat^{-1} Y(T_{xi,l} G) with rho = 0.37 constant
            let rho = |_x: i64| 0.37;
            let z = corrected_z(&tf, env.gamma_hat, occ, rho);
            let (clo, chi) = tf.corrected.support_sites();
            let mut y_of_tg = 0.0;
            for x in clo..=chi {
                y_of_tg += tf.corrected.value_at(x) * (occ(x) - rho(x));
            }
            y_of_tg /= (16.0f64).sqrt();
            prop_assert!((z - y_of_tg / env.gamma_hat).abs() < 1e-12);
        }
    }
}
