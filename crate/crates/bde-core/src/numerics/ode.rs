//! Time steppers: classical RK4 with fixed step for small stiff-but-cheap
//! systems, and the second-order Runge-Kutta-Chebyshev method (RKC2) for
//! large parabolic systems whose solution lives on the slow manifold.

/// Fixed-step classical RK4. `f(t, y, dy)` writes the derivative.
pub fn rk4_fixed<F>(mut f: F, y0: Vec<f64>, t0: f64, t1: f64, steps: usize) -> Vec<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    assert!(steps > 0);
    let n = y0.len();
    let h = (t1 - t0) / steps as f64;
    let mut y = y0;
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut tmp = vec![0.0; n];
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        f(t, &y, &mut k1);
        for j in 0..n {
            tmp[j] = y[j] + 0.5 * h * k1[j];
        }
        f(t + 0.5 * h, &tmp, &mut k2);
        for j in 0..n {
            tmp[j] = y[j] + 0.5 * h * k2[j];
        }
        f(t + 0.5 * h, &tmp, &mut k3);
        for j in 0..n {
            tmp[j] = y[j] + h * k3[j];
        }
        f(t + h, &tmp, &mut k4);
        for j in 0..n {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    y
}

/// RKC2 (Sommeijer-Shampine-Verwer). Integrates `y' = f(t,y)` from `t0` to
/// `t1` with fixed macro step `h`, choosing the stage count per step from the
/// spectral radius bound `rho` so that `h * rho` sits inside the stability
/// interval `~0.65 s^2`. Calls `on_step(t, y)` after every accepted step.
pub fn rkc2<F, S>(
    mut f: F,
    y0: Vec<f64>,
    t0: f64,
    t1: f64,
    h: f64,
    rho: f64,
    mut on_step: S,
) -> Vec<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64]),
{
    let n = y0.len();
    let mut y = y0;
    let mut t = t0;
    let mut f0 = vec![0.0; n];
    let mut fj = vec![0.0; n];
    let mut yjm2 = vec![0.0; n];
    let mut yjm1 = vec![0.0; n];
    let mut yj = vec![0.0; n];
    while t < t1 - 1e-14 * t1.abs().max(1.0) {
        let step = h.min(t1 - t);
        let s = (((step * rho / 0.653).sqrt()).ceil() as usize + 1).max(2);
        // Chebyshev quantities at w0 with damping
        let eps = 2.0 / 13.0;
        let w0 = 1.0 + eps / (s * s) as f64;
        // recurrences for T_j, T_j', T_j'' at w0
        let mut tj = vec![0.0; s + 1];
        let mut dtj = vec![0.0; s + 1];
        let mut d2tj = vec![0.0; s + 1];
        tj[0] = 1.0;
        dtj[0] = 0.0;
        d2tj[0] = 0.0;
        tj[1] = w0;
        dtj[1] = 1.0;
        d2tj[1] = 0.0;
        for j in 2..=s {
            tj[j] = 2.0 * w0 * tj[j - 1] - tj[j - 2];
            dtj[j] = 2.0 * tj[j - 1] + 2.0 * w0 * dtj[j - 1] - dtj[j - 2];
            d2tj[j] = 4.0 * dtj[j - 1] + 2.0 * w0 * d2tj[j - 1] - d2tj[j - 2];
        }
        let w1 = dtj[s] / d2tj[s];
        let bj: Vec<f64> = (0..=s)
            .map(|j| {
                if j < 2 {
                    d2tj[2] / (dtj[2] * dtj[2])
                } else {
                    d2tj[j] / (dtj[j] * dtj[j])
                }
            })
            .collect();
        let aj: Vec<f64> = (0..=s).map(|j| 1.0 - bj[j] * tj[j]).collect();

        f(t, &y, &mut f0);
        yjm2.copy_from_slice(&y);
        let mu1t = bj[1] * w1;
        for i in 0..n {
            yjm1[i] = y[i] + step * mu1t * f0[i];
        }
        for j in 2..=s {
            let mu = 2.0 * bj[j] * w0 / bj[j - 1];
            let nu = -bj[j] / bj[j - 2];
            let mut_ = 2.0 * bj[j] * w1 / bj[j - 1];
            let gt = -aj[j - 1] * mut_;
            let cjm1 = dtj[s] / d2tj[s] * d2tj[j - 1] / dtj[j - 1];
            f(t + step * cjm1, &yjm1, &mut fj);
            for i in 0..n {
                yj[i] = (1.0 - mu - nu) * y[i] + mu * yjm1[i] + nu * yjm2[i]
                    + step * (mut_ * fj[i] + gt * f0[i]);
            }
            std::mem::swap(&mut yjm2, &mut yjm1);
            std::mem::swap(&mut yjm1, &mut yj);
        }
        y.copy_from_slice(&yjm1);
        t += step;
        on_step(t, &y);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_exponential_decay() {
        let y = rk4_fixed(
            |_t, y, dy| dy[0] = -2.0 * y[0],
            vec![1.0],
            0.0,
            1.0,
            200,
        );
        assert!((y[0] - (-2.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rkc2_matches_rk4_on_stiff_chain() {
        // diffusion chain with a source, moderately stiff
        let n = 40;
        let rate = 800.0;
        let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
            for i in 0..n {
                let left = if i > 0 { y[i - 1] } else { y[i] };
                let right = if i + 1 < n { y[i + 1] } else { y[i] };
                dy[i] = rate * (left + right - 2.0 * y[i]);
            }
            dy[n / 2] += 1.0;
        };
        let y0 = vec![0.0; n];
        let a = rk4_fixed(rhs, y0.clone(), 0.0, 0.5, 40_000);
        let max_err = |b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        let coarse = max_err(&rkc2(rhs, y0.clone(), 0.0, 0.5, 0.01, 4.0 * rate, |_, _| {}));
        let fine = max_err(&rkc2(rhs, y0, 0.0, 0.5, 0.0025, 4.0 * rate, |_, _| {}));
        // second order: a 4x step refinement should cut the error ~16x
        assert!(coarse < 5e-5, "coarse err {coarse}");
        assert!(fine < 0.12 * coarse, "fine {fine} vs coarse {coarse}");
    }
}
