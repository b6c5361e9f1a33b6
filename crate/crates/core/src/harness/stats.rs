use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Trailing moving average: entry `i` is the mean of the last `window`
/// values up to and including `i` (fewer at the start).
pub fn trailing_mean(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window > 0, "window must be positive");
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Like [`trailing_mean`], but NaN entries are skipped; a window with no
/// finite value yields NaN.
pub fn trailing_mean_finite(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window > 0, "window must be positive");
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let (sum, n) = values[lo..=i]
                .iter()
                .filter(|v| v.is_finite())
                .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if n == 0 {
                f64::NAN
            } else {
                sum / n as f64
            }
        })
        .collect()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Result of a paired t-test of `a > b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairedTest {
    pub mean_difference: f64,
    pub t: f64,
    pub p_value: f64,
}

/// One-sided paired t-test of the hypothesis that `a` exceeds `b` on
/// average.
pub fn paired_t_test_greater(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::contract("paired test needs two samples of equal length >= 2"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let md = mean(&d);
    let var = d.iter().map(|x| (x - md).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    if se == 0.0 {
        let p = if md > 0.0 { 0.0 } else { 1.0 };
        return Ok(PairedTest {
            mean_difference: md,
            t: md.signum() * f64::INFINITY,
            p_value: p,
        });
    }
    let t = md / se;
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| Error::contract(e.to_string()))?;
    Ok(PairedTest {
        mean_difference: md,
        t,
        p_value: 1.0 - dist.cdf(t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn trailing_mean_matches_direct_sums() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(trailing_mean(&v, 2), vec![1.0, 1.5, 2.5, 3.5, 4.5]);
        assert_eq!(trailing_mean(&v, 10), vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        assert_eq!(trailing_mean(&v, 1), v.to_vec());
    }

    #[test]
    fn finite_mean_skips_nan() {
        let v = [f64::NAN, 2.0, 4.0];
        let m = trailing_mean_finite(&v, 2);
        assert!(m[0].is_nan());
        assert_eq!(&m[1..], &[2.0, 3.0]);
    }

    #[test]
    fn t_test_against_reference_values() {
        // d = [1, 2, 3, 4]: mean 2.5, sd 1.290994, t = 3.872983, df 3;
        // upper tail 0.0152331 (scipy.stats.ttest_rel, alternative="greater").
        let a = [2.0, 4.0, 6.0, 8.0];
        let b = [1.0, 2.0, 3.0, 4.0];
        let r = paired_t_test_greater(&a, &b).unwrap();
        assert_abs_diff_eq!(r.t, 3.872983346207417, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_value, 0.015233145831085489, epsilon = 1e-9);
        let r = paired_t_test_greater(&b, &a).unwrap();
        assert_abs_diff_eq!(r.p_value, 1.0 - 0.015233145831085489, epsilon = 1e-9);
    }

    #[test]
    fn constant_differences() {
        assert_eq!(paired_t_test_greater(&[2.0, 3.0], &[1.0, 2.0]).unwrap().p_value, 0.0);
        assert_eq!(paired_t_test_greater(&[1.0, 2.0], &[1.0, 2.0]).unwrap().p_value, 1.0);
        assert!(paired_t_test_greater(&[1.0], &[0.0]).is_err());
    }
}
