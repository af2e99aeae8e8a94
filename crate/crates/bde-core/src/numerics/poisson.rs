//! Poisson weight tables for uniformization.
//!
//! For a mean `m = lambda * dt` (possibly ~1e7), computes the window
//! `[k_lo, k_hi]` of Poisson probabilities covering all but `tail_eps` of the
//! mass, together with the upper tail sums `P[K > k]` needed when a time
//! integral of the evolved vector is accumulated alongside the evolution.

/// Truncated Poisson pmf window.
pub struct PoissonWeights {
    pub k_lo: usize,
    pub k_hi: usize,
    /// `weights[i] = P[K = k_lo + i]`.
    pub weights: Vec<f64>,
    /// `tails[i] = P[K > k_lo + i]` (within truncation error).
    pub tails: Vec<f64>,
    /// Mass lost to truncation.
    pub truncation: f64,
}

impl PoissonWeights {
    pub fn new(mean: f64, tail_eps: f64) -> Self {
        assert!(mean >= 0.0 && mean.is_finite());
        if mean == 0.0 {
            return Self {
                k_lo: 0,
                k_hi: 0,
                weights: vec![1.0],
                tails: vec![0.0],
                truncation: 0.0,
            };
        }
        let mode = mean.floor().max(0.0);
        // log pmf at the mode, then two-sided multiplicative recursion.
        let ln_mode = mode * mean.ln() - mean - libm::lgamma(mode + 1.0);
        let w_mode = ln_mode.exp();
        let cut = w_mode * tail_eps * 1e-2;
        let mut down: Vec<f64> = Vec::new();
        {
            let (mut k, mut w) = (mode, w_mode);
            while k > 0.0 {
                let w_prev = w * k / mean;
                if w_prev < cut {
                    break;
                }
                down.push(w_prev);
                w = w_prev;
                k -= 1.0;
            }
        }
        let k_lo = mode as usize - down.len();
        let mut weights: Vec<f64> = down.into_iter().rev().collect();
        weights.push(w_mode);
        {
            let (mut k, mut w) = (mode, w_mode);
            loop {
                let w_next = w * mean / (k + 1.0);
                if w_next < cut {
                    break;
                }
                weights.push(w_next);
                w = w_next;
                k += 1.0;
            }
        }
        let k_hi = k_lo + weights.len() - 1;
        let mut total: f64 = weights.iter().sum();
        if total > 1.0 {
            // multiplicative recursion drift; renormalize to a probability
            for w in weights.iter_mut() {
                *w /= total;
            }
            total = 1.0;
        }
        let truncation = (1.0 - total).max(0.0);
        // Upper tails by downward accumulation; mass above k_hi is dropped.
        let mut tails = vec![0.0; weights.len()];
        let mut acc = 0.0;
        for i in (0..weights.len()).rev() {
            tails[i] = acc;
            acc += weights[i];
        }
        Self {
            k_lo,
            k_hi,
            weights,
            tails,
            truncation,
        }
    }

    /// `P[K = k]`, zero outside the stored window.
    pub fn weight(&self, k: usize) -> f64 {
        if k < self.k_lo || k > self.k_hi {
            0.0
        } else {
            self.weights[k - self.k_lo]
        }
    }

    /// `P[K > k]`; ~1 below the window, 0 above it.
    pub fn tail(&self, k: usize) -> f64 {
        if k < self.k_lo {
            1.0 - self.truncation
        } else if k > self.k_hi {
            0.0
        } else {
            self.tails[k - self.k_lo]
        }
    }
}
