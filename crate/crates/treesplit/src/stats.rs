//! Chi-square goodness-of-fit and homogeneity tests used to compare
//! sampled distributions against exact references and against each other.

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Clone, Copy, Debug)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Survival function of the chi-square distribution.
pub fn chi_square_sf(statistic: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    dist.sf(statistic).clamp(0.0, 1.0)
}

pub fn chi_square_quantile(p: f64, df: usize) -> f64 {
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    dist.inverse_cdf(p)
}

const MIN_EXPECTED: f64 = 5.0;

/// Pearson test of observed counts against a reference distribution.
/// Cells with expected count below five are pooled into one remainder cell
/// so the asymptotic approximation stays honest on thin tails.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64]) -> ChiSquareResult {
    assert_eq!(observed.len(), expected_probs.len());
    let total: u64 = observed.iter().sum();
    let norm: f64 = expected_probs.iter().sum();
    assert!(norm > 0.0, "reference distribution is empty");
    let n = total as f64;

    let mut big: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut pooled_obs = 0.0;
    let mut pooled_exp = 0.0;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        let e = n * p / norm;
        if e < MIN_EXPECTED {
            pooled_obs += o as f64;
            pooled_exp += e;
        } else {
            big.push((o as f64, e));
        }
    }
    if pooled_exp > 0.0 {
        if pooled_exp >= MIN_EXPECTED || big.is_empty() {
            big.push((pooled_obs, pooled_exp));
        } else {
            // Remainder still thin: merge it into the smallest real cell.
            let idx = big
                .iter()
                .enumerate()
                .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .map(|(i, _)| i)
                .unwrap();
            big[idx].0 += pooled_obs;
            big[idx].1 += pooled_exp;
        }
    }

    let statistic: f64 = big
        .iter()
        .map(|&(o, e)| {
            let d = o - e;
            d * d / e
        })
        .sum();
    let df = big.len().saturating_sub(1);
    ChiSquareResult {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df),
    }
}

/// Two-sample homogeneity test on a pair of count vectors over the same
/// categories. Columns whose combined count is below ten are pooled.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquareResult {
    assert_eq!(a.len(), b.len());
    let mut cols: Vec<(f64, f64)> = Vec::new();
    let mut pool = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        if x + y < 10 {
            pool.0 += x as f64;
            pool.1 += y as f64;
        } else {
            cols.push((x as f64, y as f64));
        }
    }
    if pool.0 + pool.1 > 0.0 {
        cols.push(pool);
    }
    let row_a: f64 = cols.iter().map(|c| c.0).sum();
    let row_b: f64 = cols.iter().map(|c| c.1).sum();
    let grand = row_a + row_b;
    assert!(grand > 0.0);

    let mut statistic = 0.0;
    for &(x, y) in &cols {
        let col = x + y;
        if col == 0.0 {
            continue;
        }
        let ea = row_a * col / grand;
        let eb = row_b * col / grand;
        if ea > 0.0 {
            statistic += (x - ea) * (x - ea) / ea;
        }
        if eb > 0.0 {
            statistic += (y - eb) * (y - eb) / eb;
        }
    }
    let df = cols.len().saturating_sub(1);
    ChiSquareResult {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df),
    }
}

/// Least-squares slope of ln(y) against ln(x): the empirical scaling
/// exponent of a cost curve. Points must be positive.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    assert!(points.len() >= 2);
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        assert!(x > 0.0 && y > 0.0);
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn exact_fit_scores_zero() {
        let r = chi_square_gof(&[100, 100, 100, 100], &[0.25; 4]);
        assert!(r.statistic.abs() < 1e-12);
        assert_eq!(r.df, 3);
        assert!((r.p_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn known_critical_value() {
        // Upper 5% point of chi-square with one degree of freedom.
        let p = chi_square_sf(3.841459, 1);
        assert!((p - 0.05).abs() < 1e-4);
        let q = chi_square_quantile(0.95, 1);
        assert!((q - 3.841459).abs() < 1e-4);
    }

    #[test]
    fn uniform_samples_fit_uniform() {
        let mut rng = crate::rng::WalkRng::new(7, 0);
        let mut counts = [0u64; 6];
        for _ in 0..6000 {
            counts[rng.random_range(0..6)] += 1;
        }
        let r = chi_square_gof(&counts, &[1.0 / 6.0; 6]);
        assert!(r.p_value > 1e-3, "p={} stat={}", r.p_value, r.statistic);
    }

    #[test]
    fn detects_bias() {
        let r = chi_square_gof(&[900, 100], &[0.5, 0.5]);
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn two_sample_identical() {
        let r = chi_square_two_sample(&[50, 60, 70], &[50, 60, 70]);
        assert!(r.statistic.abs() < 1e-12);
        assert!(r.p_value > 0.999);
    }

    #[test]
    fn small_cells_pool() {
        // Four tiny tail cells pool into one; degrees of freedom shrink.
        let r = chi_square_gof(&[1000, 2, 1, 0, 1], &[0.996, 0.001, 0.001, 0.001, 0.001]);
        assert!(r.df <= 2);
        assert!(r.p_value > 1e-3);
    }

    #[test]
    fn slope_recovers_exact_power_laws() {
        let pts: Vec<(f64, f64)> = [32.0f64, 64.0, 128.0, 256.0]
            .iter()
            .map(|&x| (x, 3.5 * x.powf(1.5)))
            .collect();
        assert!((log_log_slope(&pts) - 1.5).abs() < 1e-9);
        let flat: Vec<(f64, f64)> = (1..5).map(|i| (f64::from(i), 2.0)).collect();
        assert!(log_log_slope(&flat).abs() < 1e-9);
    }
}
