//! Small statistical helpers shared by estimators and fit-style checks.

/// Compensated (Kahan) accumulator for long time integrals.
#[derive(Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n >= 2, "need at least two samples");
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var)
}

/// Standard error of the mean.
pub fn standard_error(xs: &[f64]) -> f64 {
    let (_, v) = mean_var(xs);
    (v / xs.len() as f64).sqrt()
}

/// Delete-one jackknife standard error of an arbitrary statistic given its
/// leave-one-out replicates.
pub fn jackknife_se(leave_one_out: &[f64]) -> f64 {
    let m = leave_one_out.len() as f64;
    let mean = leave_one_out.iter().sum::<f64>() / m;
    let ss: f64 = leave_one_out.iter().map(|x| (x - mean) * (x - mean)).sum();
    ((m - 1.0) / m * ss).sqrt()
}

/// Least-squares line `y ~ a + b x`; returns `(slope, intercept, rms_residual)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    assert!(n >= 2.0);
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}

/// Log-log slope of `ys` against `xs` (all positive).
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly).0
}

/// Sample skewness and excess kurtosis with their large-sample standard errors.
pub fn shape_moments(xs: &[f64]) -> ((f64, f64), (f64, f64)) {
    let n = xs.len() as f64;
    let (mean, var) = mean_var(xs);
    let sd = var.sqrt();
    let m3: f64 = xs.iter().map(|x| ((x - mean) / sd).powi(3)).sum::<f64>() / n;
    let m4: f64 = xs.iter().map(|x| ((x - mean) / sd).powi(4)).sum::<f64>() / n;
    ((m3, (6.0 / n).sqrt()), (m4 - 3.0, (24.0 / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_line() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let (b, a, r) = linear_fit(&xs, &ys);
        assert!((b + 0.5).abs() < 1e-12 && (a - 3.0).abs() < 1e-12 && r < 1e-12);
    }

    #[test]
    fn kahan_handles_many_small_terms() {
        let mut k = Kahan::default();
        for _ in 0..10_000_000 {
            k.add(0.1);
        }
        assert!((k.value() - 1e6).abs() < 1e-6);
    }
}
