//! Fitting `ln M*(n) = c n - k n^e` to simulated code sizes.

use crate::error::{HarnessError, Result};

/// Range searched for the exponent.
pub const EXPONENT_RANGE: (f64, f64) = (0.05, 0.95);
/// 95% quantile of chi-square with one degree of freedom.
const CHI2_95: f64 = 3.841_458_820_694_124;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub c_hat: f64,
    pub k_hat: f64,
    pub exponent_hat: f64,
    /// Profile-likelihood 95% interval for the exponent, clipped to the range.
    pub exponent_ci: (f64, f64),
    pub rss: f64,
    pub points: usize,
}

/// Least squares in `(c, k)` for a fixed exponent.
fn solve(points: &[(f64, f64)], e: f64) -> Option<(f64, f64, f64)> {
    let (mut saa, mut sab, mut sbb, mut say, mut sby) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(n, y) in points {
        let (a, b) = (n, -n.powf(e));
        saa += a * a;
        sab += a * b;
        sbb += b * b;
        say += a * y;
        sby += b * y;
    }
    let det = saa * sbb - sab * sab;
    if !(det.abs() > 1e-12 * saa * sbb) {
        return None;
    }
    let c = (say * sbb - sby * sab) / det;
    let k = (saa * sby - sab * say) / det;
    let rss = points.iter().map(|&(n, y)| (y - c * n + k * n.powf(e)).powi(2)).sum();
    Some((c, k, rss))
}

/// Variable-projection fit: the exponent is profiled over a grid and refined
/// by golden-section search, with `(c, k)` solved linearly at each exponent.
pub fn second_order_fit(points: &[(usize, f64)]) -> Result<FitResult> {
    let mut distinct: Vec<usize> = points.iter().map(|p| p.0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(HarnessError::FitDiverged(format!("need at least 4 distinct n, got {}", distinct.len())));
    }
    if points.iter().any(|p| !p.1.is_finite()) {
        return Err(HarnessError::FitDiverged("non-finite ln M* value".into()));
    }
    let pts: Vec<(f64, f64)> = points.iter().map(|&(n, y)| (n as f64, y)).collect();
    let rss = |e: f64| solve(&pts, e).map_or(f64::INFINITY, |s| s.2);

    let (a, b) = EXPONENT_RANGE;
    let steps = 180;
    let grid: Vec<(f64, f64)> = (0..=steps).map(|i| a + (b - a) * i as f64 / steps as f64).map(|e| (e, rss(e))).collect();
    let (i_best, _) = grid
        .iter()
        .enumerate()
        .min_by(|x, y| x.1 .1.total_cmp(&y.1 .1))
        .expect("grid is nonempty");
    if !grid[i_best].1.is_finite() {
        return Err(HarnessError::FitDiverged("singular design at every exponent".into()));
    }
    let (mut lo, mut hi) = (grid[i_best.saturating_sub(1)].0, grid[(i_best + 1).min(steps)].0);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (rss(x1), rss(x2));
    for _ in 0..100 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = rss(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = rss(x2);
        }
    }
    let mut e_hat = 0.5 * (lo + hi);
    if rss(e_hat) > grid[i_best].1 {
        e_hat = grid[i_best].0;
    }
    let (c_hat, k_hat, rss_min) = solve(&pts, e_hat).ok_or_else(|| HarnessError::FitDiverged("singular design".into()))?;
    if !(c_hat.is_finite() && k_hat.is_finite()) {
        return Err(HarnessError::FitDiverged("non-finite coefficients".into()));
    }
    if e_hat <= a + 1e-6 || e_hat >= b - 1e-6 {
        log::warn!("exponent estimate {e_hat} sits on the edge of the search range");
    }

    // Profile likelihood: exponents with m ln(RSS(e)/RSS_min) within the
    // chi-square quantile.
    let m = pts.len() as f64;
    let scale: f64 = pts.iter().map(|p| p.1 * p.1).sum();
    let ci = if rss_min <= 1e-24 * scale.max(1.0) {
        (e_hat, e_hat)
    } else {
        let cut = rss_min * (CHI2_95 / m).exp();
        let edge = |toward: f64| {
            // Walk out in grid steps, then bisect the crossing of the cut.
            let step = (b - a) / steps as f64;
            let mut inside = e_hat;
            loop {
                let next = (inside + toward * step).clamp(a, b);
                if next == inside {
                    return inside;
                }
                if rss(next) > cut {
                    let (mut i, mut o) = (inside, next);
                    for _ in 0..60 {
                        let mid = 0.5 * (i + o);
                        if rss(mid) > cut {
                            o = mid;
                        } else {
                            i = mid;
                        }
                    }
                    return i;
                }
                inside = next;
            }
        };
        (edge(-1.0), edge(1.0))
    };
    Ok(FitResult { c_hat, k_hat, exponent_hat: e_hat, exponent_ci: ci, rss: rss_min, points: pts.len() })
}
