//! Normal tails and scaled modified Bessel functions.

use std::f64::consts::{PI, SQRT_2};

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF via erfc, stable in both tails.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Upper tail `P[Z >= x]` without cancellation for large `x`.
#[inline]
pub fn norm_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Gaussian density with variance `var` at displacement `d`.
#[inline]
pub fn gauss_kernel(d: f64, var: f64) -> f64 {
    (-0.5 * d * d / var).exp() / (2.0 * PI * var).sqrt()
}

/// Scaled modified Bessel functions `e^{-z} I_k(z)` for `k = 0..=k_max`,
/// via Miller's downward recurrence normalized by `e^{-z}(I_0 + 2 sum I_k) = 1`.
pub fn bessel_i_scaled(z: f64, k_max: usize) -> Vec<f64> {
    assert!(z >= 0.0);
    if z == 0.0 {
        let mut out = vec![0.0; k_max + 1];
        out[0] = 1.0;
        return out;
    }
    let start = k_max + 2 + (2.0 * (40.0 * z).sqrt()) as usize + 20;
    let mut high = 0.0_f64;
    let mut cur = 1e-280_f64;
    let mut vals = vec![0.0; start + 1];
    vals[start] = cur;
    for k in (1..=start).rev() {
        let prev = high + (2.0 * k as f64 / z) * cur;
        vals[k - 1] = prev;
        high = cur;
        cur = prev;
        if cur > 1e240 {
            // rescale to avoid overflow
            let s = 1e-240;
            cur *= s;
            high *= s;
            for v in vals.iter_mut() {
                *v *= s;
            }
        }
    }
    let norm: f64 = vals[0] + 2.0 * vals[1..].iter().sum::<f64>();
    vals.truncate(k_max + 1);
    for v in vals.iter_mut() {
        *v /= norm;
    }
    vals
}

/// `e^{-z} I_0(z)` by direct series; cross-check oracle for the recurrence.
pub fn bessel_i0_scaled_series(z: f64) -> f64 {
    let half = 0.5 * z;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 1..400 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum * (-z).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_tail_symmetry_and_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((norm_tail(1.0) - (1.0 - norm_cdf(1.0))).abs() < 1e-15);
        assert!((norm_tail(8.0) - 6.22096057427178e-16).abs() < 1e-21);
    }

    #[test]
    fn bessel_recurrence_matches_series() {
        for &z in &[0.1, 1.0, 7.3, 25.6, 60.0] {
            let rec = bessel_i_scaled(z, 5);
            assert!(
                (rec[0] - bessel_i0_scaled_series(z)).abs() < 1e-13,
                "z={z}: {} vs {}",
                rec[0],
                bessel_i0_scaled_series(z)
            );
        }
        // I_1(1)/e = 0.2079104153497085 (tabulated)
        let rec = bessel_i_scaled(1.0, 1);
        assert!((rec[1] - 0.207910415349708_f64).abs() < 1e-13);
    }
}
