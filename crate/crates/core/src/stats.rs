//! Small statistics helpers used by tests, metrics and the bench.

use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn std_error(x: &[f64]) -> f64 {
    (variance(x) / x.len() as f64).sqrt()
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Average ranks (1-based), ties sharing the mean rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// One-sided paired t-test of `mean(a - b) > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTTest {
    pub mean_diff: f64,
    pub t: f64,
    pub p_value: f64,
}

pub fn paired_t_test_greater(a: &[f64], b: &[f64]) -> PairedTTest {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    assert!(a.len() >= 2, "need at least two pairs");
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean_diff = mean(&diff);
    let se = std_error(&diff);
    let (t, p_value) = if se == 0.0 {
        let p = if mean_diff > 0.0 { 0.0 } else { 1.0 };
        (f64::INFINITY.copysign(mean_diff), p)
    } else {
        let t = mean_diff / se;
        let dist = StudentsT::new(0.0, 1.0, (diff.len() - 1) as f64).expect("valid dof");
        (t, 1.0 - dist.cdf(t))
    };
    PairedTTest {
        mean_diff,
        t,
        p_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_of_monotone_map_is_one() {
        let x = [0.3, -1.0, 2.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| v.exp()).collect();
        assert!((spearman(&x, &y) - 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn t_test_matches_reference() {
        // scipy.stats.ttest_rel([1,2,3,4,5],[0.5,2.1,2.2,3.5,4.1], alternative="greater")
        let r = paired_t_test_greater(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.5, 2.1, 2.2, 3.5, 4.1]);
        assert!((r.t - 2.9824045403173023).abs() < 1e-9, "{r:?}");
        assert!((r.p_value - 0.020321044360249212).abs() < 1e-9, "{r:?}");
    }
}
