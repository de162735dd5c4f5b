//! Largest code size whose simulated error stays below a target.

use sparsync::decoders::DecodeOptions;

use crate::config::{ExperimentConfig, Scenario};
use crate::error::{HarnessError, Result};
use crate::montecarlo::{build_params, run_trials, Prepared, Setup, Summary};

/// One Monte Carlo evaluation at a fixed `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub ln_m: f64,
    pub m: u64,
    pub errors: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectResult {
    pub ln_m_star: f64,
    pub m_star: u64,
    /// Probes sorted by `ln_m`.
    pub probes: Vec<Probe>,
    /// Pairs of probes whose intervals show the error decreasing in `M`.
    pub violations: usize,
    /// The search range's upper end was itself feasible.
    pub capped: bool,
}

/// Upper end of the search: `n C(alpha)`, limited by the codebook cap.
pub fn search_ceiling(cfg: &ExperimentConfig, setup: &Setup, n: usize) -> f64 {
    let by_cap = ((cfg.codebook_cap / n as u64).max(2) as f64).ln();
    (n as f64 * setup.cap.c_alpha).min(by_cap)
}

/// Binary search over `ln M` in `[ln 2, search_ceiling]` with at most
/// `cfg.bisect_probes` Monte Carlo probes of `trials` trials each. A probe is
/// feasible when the upper Wilson limit of the error event is at most `eps`.
/// The answer is read off the monotone envelope of all probes.
pub fn bisect_max_code_size(cfg: &ExperimentConfig, setup: &Setup, sc: &Scenario, eps: f64, trials: u64) -> Result<BisectResult> {
    let mut probes: Vec<Probe> = Vec::new();
    let run = |ln_m: f64, probes: &mut Vec<Probe>| -> Result<Probe> {
        let params = build_params(cfg, setup, sc, Some(ln_m))?;
        if let Some(p) = probes.iter().find(|p| Some(p.m) == params.m_codewords) {
            return Ok(*p);
        }
        let prep = Prepared::new(cfg, params)?;
        let opts = DecodeOptions { alignment: cfg.alignment()?, ..Default::default() };
        let records = run_trials(&prep, &setup.w, opts, trials, cfg.seed, None)?;
        let s = Summary::from_records(&records, &prep.params, prep.delay).target(prep.params.regime);
        let probe = Probe {
            ln_m: prep.params.ln_m,
            m: prep.codebook.len() as u64,
            errors: s.count,
            trials,
            p_hat: s.p,
            lower: s.lo,
            upper: s.hi,
        };
        log::debug!("probe n={} M={} p={} upper={}", sc.n, probe.m, probe.p_hat, probe.upper);
        probes.push(probe);
        Ok(probe)
    };

    let first = run(2f64.ln(), &mut probes)?;
    if first.upper > eps {
        return Err(HarnessError::NoFeasibleM { upper: first.upper, eps });
    }
    let (mut lo, mut hi) = (first.ln_m, search_ceiling(cfg, setup, sc.n));
    let mut capped = false;
    if hi > lo {
        let top = run(hi, &mut probes)?;
        hi = top.ln_m;
        if top.upper <= eps {
            capped = true;
            lo = hi;
        }
    }
    while probes.len() < cfg.bisect_probes && hi > lo {
        let mid = 0.5 * (lo + hi);
        let before = probes.len();
        let p = run(mid, &mut probes)?;
        if probes.len() == before {
            // Integer rounding of M leaves nothing between lo and hi.
            break;
        }
        if p.upper <= eps {
            lo = p.ln_m;
        } else {
            hi = p.ln_m;
        }
    }

    probes.sort_by(|a, b| a.ln_m.total_cmp(&b.ln_m));
    let (best, violations) = monotone_envelope(&probes, eps);
    for &j in &violations {
        log::warn!("n={}: error at M={} is significantly below that of a smaller code", sc.n, probes[j].m);
    }
    let best = probes[best];
    let violations = violations.len();
    Ok(BisectResult { ln_m_star: best.ln_m, m_star: best.m, probes, violations, capped })
}

/// Index of the largest probe whose running maximum of upper limits (over
/// probes sorted by `ln_m`) stays at most `eps`, and the indices of probes
/// whose interval lies entirely below that of a smaller code. The first probe
/// is returned when none qualifies.
pub fn monotone_envelope(sorted: &[Probe], eps: f64) -> (usize, Vec<usize>) {
    let violations = (0..sorted.len())
        .filter(|&j| sorted[..j].iter().any(|pi| pi.lower > sorted[j].upper))
        .collect();
    let mut envelope = f64::NEG_INFINITY;
    let mut best = 0;
    for (i, p) in sorted.iter().enumerate() {
        envelope = envelope.max(p.upper);
        if envelope <= eps {
            best = i;
        }
    }
    (best, violations)
}
