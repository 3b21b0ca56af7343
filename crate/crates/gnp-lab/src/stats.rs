//! Summary statistics, chi-square goodness of fit, and least-squares fits
//! used by the experiment harness and the test suite.

use serde::{Deserialize, Serialize};

use crate::special::gamma_q;

/// Ratio statistics over per-replica values.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RatioStats {
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    /// Coefficient of variation, std / mean.
    pub cv: f64,
    pub q05: f64,
    pub q95: f64,
}

impl RatioStats {
    /// Compute from per-replica values (order does not matter).
    pub fn from_values(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "need at least one value");
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std = var.sqrt();
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        Self {
            mean,
            median: quantile_sorted(&sorted, 0.5),
            std,
            cv: std / mean,
            q05: quantile_sorted(&sorted, 0.05),
            q95: quantile_sorted(&sorted, 0.95),
        }
    }
}

/// Linearly interpolated quantile of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Result of a chi-square goodness-of-fit test.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
}

impl ChiSquare {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

/// Minimum expected count per cell; sparser cells are pooled from the right.
pub const MIN_EXPECTED: f64 = 5.0;

/// Chi-square goodness of fit of observed counts against cell probabilities.
///
/// `probs` may sum to less than one; the remainder is treated as an implicit
/// final cell with `leftover_observed` observations. Cells with expected
/// count below [`MIN_EXPECTED`] are pooled into their right neighbor.
pub fn chi_square_gof(observed: &[u64], probs: &[f64], leftover_observed: u64) -> ChiSquare {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum::<u64>() + leftover_observed;
    let nf = total as f64;
    let leftover_prob = (1.0 - probs.iter().sum::<f64>()).max(0.0);

    // pool sparse cells right-to-left, then fold the leftover cell in
    let mut cells: Vec<(f64, f64)> = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| (o as f64, p * nf))
        .collect();
    cells.push((leftover_observed as f64, leftover_prob * nf));
    let mut pooled: Vec<(f64, f64)> = Vec::with_capacity(cells.len());
    let mut carry = (0.0, 0.0);
    for &(o, e) in cells.iter().rev() {
        carry.0 += o;
        carry.1 += e;
        if carry.1 >= MIN_EXPECTED {
            pooled.push(carry);
            carry = (0.0, 0.0);
        }
    }
    if carry.1 > 0.0 || carry.0 > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += carry.0;
                last.1 += carry.1;
            }
            None => pooled.push(carry),
        }
    }

    let statistic: f64 = pooled
        .iter()
        .map(|&(o, e)| {
            let d = o - e;
            d * d / e
        })
        .sum();
    let dof = (pooled.len().max(2) - 1) as u64;
    ChiSquare {
        statistic,
        dof,
        p_value: gamma_q(dof as f64 / 2.0, statistic / 2.0),
    }
}

/// Least-squares slope of y against x.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "need at least two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Fraction of the giant component, the root of rho = 1 - exp(-(1+eps) rho),
/// solved by fixed-point iteration. Zero when 1 + eps <= 1.
pub fn giant_component_fraction(eps: f64) -> f64 {
    let c = 1.0 + eps;
    if c <= 1.0 {
        return 0.0;
    }
    let mut rho = eps.min(1.0);
    for _ in 0..10_000 {
        let next = 1.0 - (-c * rho).exp();
        if (next - rho).abs() < 1e-15 {
            return next;
        }
        rho = next;
    }
    rho
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_stats_basics() {
        let s = RatioStats::from_values(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!((s.mean - 3.0).abs() < 1e-15);
        assert!((s.median - 3.0).abs() < 1e-15);
        assert!((s.std - (2.5f64).sqrt()).abs() < 1e-15);
        assert!((s.cv - s.std / 3.0).abs() < 1e-15);
    }

    #[test]
    fn chi_square_uniform_counts() {
        // frozen reference: scipy.stats.chisquare([28,31,40,35]) ->
        // stat 2.417910447761194, p 0.4903093069653883
        let c = chi_square_gof(&[28, 31, 40, 35], &[0.25; 4], 0);
        assert!((c.statistic - 2.417910447761194).abs() < 1e-12);
        assert_eq!(c.dof, 3);
        assert!((c.p_value - 0.4903093069653883).abs() < 1e-10);
        assert!(c.passes(0.001));
    }

    #[test]
    fn chi_square_pools_sparse_cells() {
        // second cell expected 0.1*20=2 < 5, pooled with the third
        let c = chi_square_gof(&[10, 2, 8], &[0.5, 0.1, 0.4], 0);
        assert_eq!(c.dof, 1);
    }

    #[test]
    fn slope_of_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 8.0];
        assert!((least_squares_slope(&x, &y) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn giant_fraction_reference_points() {
        // 1+eps = 2: rho = 1 - exp(-2 rho) -> 0.7968121300200202
        assert!((giant_component_fraction(1.0) - 0.7968121300200202).abs() < 1e-10);
        assert_eq!(giant_component_fraction(0.0), 0.0);
        let rho = giant_component_fraction(0.05);
        // consistency: rho satisfies its own fixed point
        assert!((rho - (1.0 - (-(1.05) * rho).exp())).abs() < 1e-12);
        assert!(rho > 0.0 && rho < 0.15);
    }
}
