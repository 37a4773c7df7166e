use serde::{Deserialize, Serialize};

use crate::lagrangian::{Flags, Lagrangian};
use crate::types::norm;

/// `Φ(ξ) = Σ_n (|ξ| − M_n)⁺` with strictly increasing thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phi {
    pub thresholds: Vec<f64>,
}

impl Phi {
    pub fn eval_norm(&self, r: f64) -> f64 {
        self.thresholds.iter().map(|m| (r - m).max(0.0)).sum()
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        self.eval_norm(norm(xi))
    }

    /// `Σ mᵢ Φ(vᵢ)` over a weighted sample.
    pub fn integral(&self, samples: &[(Vec<f64>, f64)]) -> f64 {
        samples.iter().map(|(v, m)| m * self.eval(v)).sum()
    }

    pub fn lagrangian(&self) -> Lagrangian {
        let phi = self.clone();
        Lagrangian::new("phi", self.thresholds.clone(), Flags::new(true, true, false, false), move |_, _, xi| {
            phi.eval(xi)
        })
    }
}

/// Thresholds with `Σ_{|vᵢ| ≥ M_n} |vᵢ| mᵢ ≤ 2^{-n}` against the empirical
/// measure of `samples` (`(value, cell measure)` pairs).
///
/// `M_n` is the smallest sample magnitude above `M_{n-1}` meeting the tail
/// bound; when none does, `max(M_{n-1}, largest magnitude) + 1`.
pub fn construct_phi(samples: &[(Vec<f64>, f64)], terms: usize) -> Phi {
    let mut mags: Vec<(f64, f64)> = samples.iter().map(|(v, m)| (norm(v), *m)).collect();
    mags.sort_by(|a, b| a.0.total_cmp(&b.0));
    // tail[k] = Σ_{j ≥ k} |v_j| m_j over the sorted magnitudes.
    let mut tail = vec![0.0; mags.len() + 1];
    for k in (0..mags.len()).rev() {
        tail[k] = tail[k + 1] + mags[k].0 * mags[k].1;
    }
    let a_max = mags.last().map_or(0.0, |m| m.0);
    let mut thresholds = Vec::with_capacity(terms);
    let mut prev = 0.0f64;
    for n in 0..terms {
        let bound = 0.5f64.powi(n as i32);
        // First index whose magnitude exceeds prev and whose tail (ties
        // included) meets the bound.
        let start = mags.partition_point(|m| m.0 <= prev);
        let pick = (start..mags.len()).find(|&k| {
            let first = mags.partition_point(|m| m.0 < mags[k].0);
            tail[first] <= bound
        });
        let m = match pick {
            Some(k) => mags[k].0,
            None => prev.max(a_max) + 1.0,
        };
        thresholds.push(m);
        prev = m;
    }
    Phi { thresholds }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_samples_give_zero_integral() {
        let s = vec![(vec![0.0], 0.5), (vec![0.0], 0.5)];
        let phi = construct_phi(&s, 16);
        assert_eq!(phi.integral(&s), 0.0);
        assert!(phi.thresholds.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn single_unit_sample() {
        let s = vec![(vec![1.0], 1.0)];
        let phi = construct_phi(&s, 8);
        assert_eq!(phi.thresholds[0], 1.0);
        assert_eq!(phi.thresholds[1], 2.0);
        assert_eq!(phi.integral(&s), 0.0);
    }

    #[test]
    fn ratio_identity() {
        let phi = Phi { thresholds: vec![1.0, 2.0, 4.0] };
        for r in [0.5, 1.5, 3.0, 10.0] {
            let direct = phi.eval_norm(r) / r;
            let identity: f64 = phi.thresholds.iter().map(|m| (1.0 - m / r).max(0.0)).sum();
            assert!((direct - identity).abs() < 1e-15);
        }
    }
}
