//! Walker alias table: O(1) sampling from a fixed discrete distribution,
//! one u64 of randomness per draw.

pub struct AliasTable {
    /// Packed `(cutoff, alias)` per slot: cutoff in the low 32 bits, alias
    /// index in the high 32 bits. One cache line touch per draw.
    slots: Vec<u64>,
}

impl AliasTable {
    pub fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        assert!(n > 0 && n < u32::MAX as usize);
        let total: f64 = weights.iter().sum();
        assert!(total > 0.0, "alias table needs positive total weight");
        let scale = n as f64 / total;
        let mut prob: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        let mut alias = vec![0u32; n];
        let mut small: Vec<u32> = Vec::with_capacity(n);
        let mut large: Vec<u32> = Vec::with_capacity(n);
        for (i, p) in prob.iter().enumerate() {
            if *p < 1.0 {
                small.push(i as u32);
            } else {
                large.push(i as u32);
            }
        }
        while let (Some(s), Some(l)) = (small.pop(), large.pop()) {
            alias[s as usize] = l;
            prob[l as usize] -= 1.0 - prob[s as usize];
            if prob[l as usize] < 1.0 {
                small.push(l);
            } else {
                large.push(l);
            }
        }
        for rest in small.into_iter().chain(large) {
            prob[rest as usize] = 1.0;
        }
        let slots = prob
            .iter()
            .zip(&alias)
            .map(|(p, &a)| {
                let cutoff = (p.clamp(0.0, 1.0) * 4294967296.0).min(4294967295.0) as u32;
                cutoff as u64 | ((a as u64) << 32)
            })
            .collect();
        Self { slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Sample from one u64: high bits pick the slot, low bits the coin.
    #[inline(always)]
    pub fn sample(&self, word: u64) -> usize {
        let n = self.slots.len() as u64;
        let slot = (((word >> 32) * n) >> 32) as usize;
        // slot < n by construction of the fixed-point product
        let packed = unsafe { *self.slots.get_unchecked(slot) };
        if (word as u32) < packed as u32 {
            slot
        } else {
            (packed >> 32) as usize
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn frequencies_match_weights() {
        let w = [0.5, 2.0, 1.0, 0.25, 4.0];
        let table = AliasTable::new(&w);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut counts = [0u64; 5];
        let draws = 400_000;
        for _ in 0..draws {
            counts[table.sample(rng.next_u64())] += 1;
        }
        let total: f64 = w.iter().sum();
        for i in 0..5 {
            let p = w[i] / total;
            let freq = counts[i] as f64 / draws as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!(
                (freq - p).abs() < 5.0 * se + 1e-9,
                "slot {i}: {freq} vs {p}"
            );
        }
    }
}
