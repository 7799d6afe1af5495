//! Accuracy metrics, delayed-response emulation, timing statistics and the
//! cube-law trend fit.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::sim::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub e_x: f64,
    pub e_sigma: f64,
    pub excluded_windows: Vec<(f64, f64)>,
    /// Number of rectangle-rule samples kept after exclusion.
    pub samples_used: usize,
}

fn excluded(t: f64, windows: &[(f64, f64)]) -> bool {
    windows.iter().any(|&(a, b)| t >= a && t <= b)
}

/// Rectangle-rule `E_x` and `E_σ` over series sampled on the same grid.
/// Samples whose time falls inside an excluded window are dropped from both
/// integrals.
pub fn accuracy_from_series(
    times: &[f64],
    states: &[DVector<f64>],
    sigma: &[f64],
    reference: &[DVector<f64>],
    reference_sigma: &[f64],
    exclude: &[(f64, f64)],
) -> Result<AccuracyReport> {
    let n = times.len();
    for len in [
        states.len(),
        sigma.len(),
        reference.len(),
        reference_sigma.len(),
    ] {
        if len != n {
            return Err(Error::LengthMismatch(n, len));
        }
    }
    if n < 2 {
        return Err(Error::Empty);
    }
    let (mut span, mut ex, mut sx, mut sr, mut used) = (0.0, 0.0, 0.0, 0.0, 0);
    for k in 0..n - 1 {
        if excluded(times[k], exclude) {
            continue;
        }
        let w = times[k + 1] - times[k];
        let d = &states[k] - &reference[k];
        ex += w * d.lp_norm(1) / d.len() as f64;
        sx += w * sigma[k];
        sr += w * reference_sigma[k];
        span += w;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Empty);
    }
    if !(sr > 0.0) {
        return Err(Error::ZeroReferenceCost(sr));
    }
    Ok(AccuracyReport {
        e_x: ex / span,
        e_sigma: sx / sr,
        excluded_windows: exclude.to_vec(),
        samples_used: used,
    })
}

/// [`accuracy_from_series`] for a simulated trajectory.
pub fn accuracy_metrics(
    traj: &Trajectory,
    reference: &[DVector<f64>],
    reference_sigma: &[f64],
    exclude: &[(f64, f64)],
) -> Result<AccuracyReport> {
    accuracy_from_series(
        &traj.times,
        &traj.states,
        &traj.sigma_values,
        reference,
        reference_sigma,
        exclude,
    )
}

/// Emulate the series a slow solver would deliver: the result for sample
/// `n` arrives at `n₁ = n + ⌈τ_slow(n)/τ_fast(n)⌉` and is held until the
/// next delivery. Samples are indexed from 0; the last index plays the role
/// of `N`. Samples before the first delivery hold `χ*(0)`.
pub fn emulate_delayed(
    tau_slow: &[f64],
    tau_fast: &[f64],
    chi_star: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    let len = chi_star.len();
    if tau_slow.len() != len {
        return Err(Error::LengthMismatch(len, tau_slow.len()));
    }
    if tau_fast.len() != len {
        return Err(Error::LengthMismatch(len, tau_fast.len()));
    }
    if len == 0 {
        return Err(Error::Empty);
    }
    if tau_fast.iter().any(|t| !(*t > 0.0)) || tau_slow.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidConfig("durations must be positive".into()));
    }
    let last = len - 1;
    let delay = |n: usize| ((tau_slow[n] / tau_fast[n]).ceil() as usize).max(1);
    let mut out: Vec<Option<usize>> = vec![None; len];
    let mut n = 0;
    while n <= last {
        let n1 = n.saturating_add(delay(n));
        if n1 > last {
            out[n] = Some(n);
        } else {
            let n2 = n1.saturating_add(delay(n1)).min(last);
            for slot in &mut out[n1..=n2] {
                *slot = Some(n);
            }
        }
        n = n1;
    }
    Ok(out
        .into_iter()
        .map(|src| chi_star[src.unwrap_or(0)].clone())
        .collect())
}

/// `τ̄ = (p1·d_x + p2)³`, fitted linearly on `τ̄^{1/3}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendFit {
    pub p1: f64,
    pub p2: f64,
    pub r_squared: f64,
}

pub fn fit_cube_trend(dims: &[f64], mean_times: &[f64]) -> Result<TrendFit> {
    if dims.len() != mean_times.len() {
        return Err(Error::LengthMismatch(dims.len(), mean_times.len()));
    }
    if dims.len() < 3 {
        return Err(Error::DegenerateFit("fewer than three points"));
    }
    if mean_times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::DegenerateFit("non-positive time"));
    }
    let n = dims.len() as f64;
    let y: Vec<f64> = mean_times.iter().map(|t| t.cbrt()).collect();
    let mx = dims.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = dims.iter().map(|d| (d - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("dimensions have zero variance"));
    }
    let sxy: f64 = dims.iter().zip(&y).map(|(d, v)| (d - mx) * (v - my)).sum();
    let p1 = sxy / sxx;
    let p2 = my - p1 * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = dims
        .iter()
        .zip(&y)
        .map(|(d, v)| (v - p1 * d - p2).powi(2))
        .sum();
    let r_squared = if ss_tot <= 1e-24 * my * my {
        0.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(TrendFit { p1, p2, r_squared })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
    pub mad_over_median: f64,
}

// Linear interpolation between order statistics (the common "type 7" rule).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn timing_summary(tau_c: &[f64]) -> Result<TimingSummary> {
    if tau_c.is_empty() {
        return Err(Error::Empty);
    }
    let mut s = tau_c.to_vec();
    s.sort_by(f64::total_cmp);
    let median = quantile_sorted(&s, 0.5);
    let mut dev: Vec<f64> = s.iter().map(|t| (t - median).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mad = quantile_sorted(&dev, 0.5);
    Ok(TimingSummary {
        count: s.len(),
        mean: s.iter().sum::<f64>() / s.len() as f64,
        median,
        q25: quantile_sorted(&s, 0.25),
        q75: quantile_sorted(&s, 0.75),
        min: s[0],
        max: s[s.len() - 1],
        mad_over_median: if median > 0.0 { mad / median } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn series(vals: &[f64]) -> Vec<DVector<f64>> {
        vals.iter()
            .map(|v| DVector::from_vec(vec![*v, -*v]))
            .collect()
    }

    #[test]
    fn identical_series() {
        let t: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let x = series(&t);
        let s = vec![2.0; 11];
        let r = accuracy_from_series(&t, &x, &s, &x, &s, &[]).unwrap();
        assert_eq!(r.e_x, 0.0);
        assert_eq!(r.e_sigma, 1.0);
    }

    #[test]
    fn shifted_series() {
        let t: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let x = series(&t);
        let shifted: Vec<DVector<f64>> = x.iter().map(|v| v.add_scalar(0.25)).collect();
        let s = vec![1.0; 11];
        let r = accuracy_from_series(&t, &shifted, &s, &x, &s, &[]).unwrap();
        assert_relative_eq!(r.e_x, 0.25, epsilon = 1e-14);
    }

    #[test]
    fn exclusion_and_errors() {
        let t: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let x = series(&t);
        let mut y = x.clone();
        y[5] = y[5].add_scalar(10.0);
        let s = vec![1.0; 11];
        let r = accuracy_from_series(&t, &y, &s, &x, &s, &[(0.45, 0.55)]).unwrap();
        assert_eq!(r.e_x, 0.0);
        assert_eq!(r.samples_used, 9);
        assert!(matches!(
            accuracy_from_series(&t, &x, &s, &x, &[0.0; 11], &[]),
            Err(Error::ZeroReferenceCost(_))
        ));
        assert!(matches!(
            accuracy_from_series(&t, &x[..5], &s, &x, &s, &[]),
            Err(Error::LengthMismatch(11, 5))
        ));
    }

    fn indices(out: &[DVector<f64>]) -> Vec<usize> {
        out.iter().map(|v| v[0] as usize).collect()
    }

    #[test]
    fn delay_equal_durations() {
        let chi: Vec<DVector<f64>> = (0..8).map(|k| DVector::from_element(1, k as f64)).collect();
        let out = emulate_delayed(&[1.0; 8], &[1.0; 8], &chi).unwrap();
        // One-sample delay; the final sample falls in the tail branch.
        assert_eq!(indices(&out), vec![0, 0, 1, 2, 3, 4, 5, 7]);
    }

    #[test]
    fn delay_three_samples() {
        let chi: Vec<DVector<f64>> = (0..13)
            .map(|k| DVector::from_element(1, k as f64))
            .collect();
        let out = emulate_delayed(&[3.0; 13], &[1.0; 13], &chi).unwrap();
        assert_eq!(indices(&out), vec![0, 0, 0, 0, 0, 0, 3, 3, 3, 6, 6, 6, 12]);
    }

    #[test]
    fn delay_longer_than_series() {
        let chi: Vec<DVector<f64>> = (0..5).map(|k| DVector::from_element(1, k as f64)).collect();
        let out = emulate_delayed(&[1e9; 5], &[1.0; 5], &chi).unwrap();
        assert_eq!(indices(&out), vec![0, 0, 0, 0, 0]);
        assert!(matches!(
            emulate_delayed(&[1.0; 4], &[1.0; 5], &chi),
            Err(Error::LengthMismatch(5, 4))
        ));
    }

    #[test]
    fn cube_trend() {
        let d = [32.0, 64.0, 128.0, 256.0];
        let t: Vec<f64> = d.iter().map(|d| (2.0f64 * d).powi(3)).collect();
        let f = fit_cube_trend(&d, &t).unwrap();
        assert_relative_eq!(f.p1, 2.0, epsilon = 1e-10);
        assert!(f.p2.abs() < 1e-8);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);

        let flat = fit_cube_trend(&d, &[3.0; 4]).unwrap();
        assert!(flat.p1.abs() < 1e-12);
        assert!(flat.r_squared < 1e-6);
        assert!(fit_cube_trend(&d[..2], &t[..2]).is_err());
        assert!(fit_cube_trend(&[1.0; 3], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn summary_order_statistics() {
        let s = timing_summary(&[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!(
            (s.median, s.q25, s.q75, s.min, s.max),
            (3.0, 2.0, 4.0, 1.0, 5.0)
        );
        assert_relative_eq!(s.mad_over_median, 1.0 / 3.0);
        let c = timing_summary(&[0.7; 9]).unwrap();
        assert_eq!(
            (c.median, c.q25, c.q75, c.mad_over_median),
            (0.7, 0.7, 0.7, 0.0)
        );
        assert!(matches!(timing_summary(&[]), Err(Error::Empty)));
    }
}
