use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Ordinary least-squares fit of `ln y = intercept + slope · ln x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence interval of the slope; `None` with fewer than three
    /// points or an exact fit.
    pub slope_ci95: Option<(f64, f64)>,
    pub residual_std: f64,
    pub points: usize,
}

/// Fits a power law through the positive pairs of `(x, y)`; `None` when
/// fewer than two remain or all `x` coincide.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Option<LogLogFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip();
    let n = lx.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = lx.iter().sum::<f64>() / nf;
    let my = ly.iter().sum::<f64>() / nf;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let dof = n.saturating_sub(2);
    let residual_std = if dof > 0 { (sse / dof as f64).sqrt() } else { 0.0 };
    let slope_ci95 = (dof > 0).then(|| {
        let se = residual_std / sxx.sqrt();
        let t = StudentsT::new(0.0, 1.0, dof as f64)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(f64::NAN);
        (slope - t * se, slope + t * se)
    });
    Some(LogLogFit {
        slope,
        intercept,
        slope_ci95,
        residual_std,
        points: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let p = 248.05;
        let h = [0.15, 0.2, 0.25, 0.3];
        let l: Vec<f64> = h.iter().map(|h| 2.0 * p * h * h * h).collect();
        let f = loglog_fit(&h, &l).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12);
        let (lo, hi) = f.slope_ci95.unwrap();
        assert!(hi - lo < 1e-9);
    }

    #[test]
    fn remainder_exponent() {
        let p = 248.05;
        let h = [0.15, 0.2, 0.25, 0.3];
        let l: Vec<f64> = h.iter().map(|h: &f64| 2.0 * p * h.powi(3) + h.powf(3.5)).collect();
        let r: Vec<f64> = h.iter().zip(&l).map(|(h, l)| (l - 2.0 * p * h.powi(3)).abs()).collect();
        let f = loglog_fit(&h, &r).unwrap();
        assert!((f.slope - 3.5).abs() < 1e-9, "{}", f.slope);
    }

    #[test]
    fn noisy_fit_has_interval() {
        let h = [0.1, 0.2, 0.3, 0.4, 0.5];
        let noise = [1.02, 0.97, 1.01, 0.99, 1.03];
        let l: Vec<f64> = h.iter().zip(noise).map(|(h, e)| h * h * e).collect();
        let f = loglog_fit(&h, &l).unwrap();
        let (lo, hi) = f.slope_ci95.unwrap();
        assert!(lo < f.slope && f.slope < hi);
        assert!(lo < 2.0 && 2.0 < hi);
        assert!(loglog_fit(&[0.1], &[1.0]).is_none());
        assert!(loglog_fit(&[0.1, 0.1], &[1.0, 2.0]).is_none());
    }
}
