use serde::{Deserialize, Serialize};

use super::AgentRun;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// 1-based problem index.
    pub problem: usize,
    pub mean_error: f64,
    pub n_agents: usize,
    pub smoothed_error: f64,
}

/// Piecewise Gaussian smoothing: each segment `(first, last, sigma)` over
/// 1-based problem indices is convolved independently, with reflection at
/// its ends. `last = None` runs to the end of the curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingSpec {
    pub segments: Vec<(usize, Option<usize>, f64)>,
}

impl Default for SmoothingSpec {
    fn default() -> Self {
        SmoothingSpec {
            segments: vec![(1, Some(10), 0.0), (11, Some(100), 2.0), (101, None, 10.0)],
        }
    }
}

fn kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let w: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Half-sample symmetric reflection of `j` into `[0, len)`.
fn reflect(mut j: i64, len: i64) -> usize {
    let period = 2 * len;
    j = j.rem_euclid(period);
    if j >= len {
        j = period - 1 - j;
    }
    j as usize
}

pub fn smooth_curve(values: &[f64], spec: &SmoothingSpec) -> Vec<f64> {
    let mut out = values.to_vec();
    for &(first, last, sigma) in &spec.segments {
        let lo = first.saturating_sub(1);
        let hi = last.unwrap_or(values.len()).min(values.len());
        if lo >= hi || sigma <= 0.0 {
            continue;
        }
        let seg = &values[lo..hi];
        let k = kernel(sigma);
        let radius = (k.len() / 2) as i64;
        let len = seg.len() as i64;
        for i in 0..seg.len() {
            out[lo + i] = k
                .iter()
                .enumerate()
                .map(|(t, w)| w * seg[reflect(i as i64 + t as i64 - radius, len)])
                .sum();
        }
    }
    out
}

/// First 1-based problem whose smoothed error is below `threshold`.
pub fn mastery_intercept(curve: &[CurvePoint], threshold: f64) -> Option<usize> {
    curve.iter().find(|c| c.smoothed_error < threshold).map(|c| c.problem)
}

/// Mean error per problem over the agents that reached it, then smoothed.
/// The result does not depend on the order of `runs`.
pub fn curve_from_runs(runs: &[AgentRun], spec: &SmoothingSpec) -> Vec<CurvePoint> {
    let len = runs.iter().map(|r| r.problems.len()).max().unwrap_or(0);
    let mut sums = vec![0.0; len];
    let mut counts = vec![0usize; len];
    let mut sorted: Vec<&AgentRun> = runs.iter().collect();
    sorted.sort_by_key(|r| r.index);
    for r in sorted {
        for (p, s) in r.problems.iter().enumerate() {
            sums[p] += s.error_rate();
            counts[p] += 1;
        }
    }
    let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let smoothed = smooth_curve(&means, spec);
    (0..len)
        .map(|p| CurvePoint {
            problem: p + 1,
            mean_error: means[p],
            n_agents: counts[p],
            smoothed_error: smoothed[p],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn point(problem: usize, e: f64) -> CurvePoint {
        CurvePoint {
            problem,
            mean_error: e,
            n_agents: 1,
            smoothed_error: e,
        }
    }

    #[test]
    fn first_segment_is_identity() {
        let v: Vec<f64> = (0..10).map(|i| (i % 3) as f64 / 2.0).collect();
        assert_eq!(smooth_curve(&v, &SmoothingSpec::default()), v);
    }

    #[test]
    fn impulse_spreads_by_kernel() {
        let mut v = vec![0.0; 100];
        v[49] = 1.0;
        let s = smooth_curve(&v, &SmoothingSpec::default());
        // Oracle: the normalized Gaussian with sigma 2 over -8..=8.
        let raw: Vec<f64> = (-8..=8).map(|k: i32| (-(k * k) as f64 / 8.0).exp()).collect();
        let z: f64 = raw.iter().sum();
        for (k, w) in (-8i64..=8).zip(&raw) {
            assert!((s[(49 + k) as usize] - w / z).abs() < 1e-12);
        }
        assert!((s[10..100].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(s[40], 0.0);
    }

    #[test]
    fn mastery_examples() {
        let flat: Vec<_> = (1..=30).map(|p| point(p, 0.05)).collect();
        assert_eq!(mastery_intercept(&flat, 0.1), Some(1));
        let falling: Vec<_> = (1..=30).map(|p| point(p, if p < 15 { 0.5 } else { 0.05 })).collect();
        assert_eq!(mastery_intercept(&falling, 0.1), Some(15));
        assert_eq!(mastery_intercept(&[point(1, 0.5)], 0.1), None);
    }

    proptest! {
        #[test]
        fn constant_is_fixed_point(c in 0.0f64..=1.0, n in 1usize..400) {
            let v = vec![c; n];
            for (a, b) in smooth_curve(&v, &SmoothingSpec::default()).iter().zip(&v) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn range_and_segment_mass_preserved(v in proptest::collection::vec(0.0f64..=1.0, 1..350)) {
            let s = smooth_curve(&v, &SmoothingSpec::default());
            prop_assert!(s.iter().all(|x| (-1e-12..=1.0 + 1e-12).contains(x)));
            for (lo, hi) in [(0usize, 10usize), (10, 100), (100, usize::MAX)] {
                let hi = hi.min(v.len());
                if lo < hi {
                    let a: f64 = v[lo..hi].iter().sum();
                    let b: f64 = s[lo..hi].iter().sum();
                    prop_assert!((a - b).abs() < 1e-9, "segment {lo}..{hi}: {a} vs {b}");
                }
            }
        }
    }
}
