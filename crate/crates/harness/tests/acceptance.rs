//! Acceptance checks. Each test prints one `criterion N PASS|FAIL: ...` line
//! to the real stdout (not captured by the test runner) before asserting.

#[path = "../../core/tests/support/brute.rs"]
mod brute;

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparsync::capacity::{alpha_bar, async_capacity, dispersion, kkt_residual, sync_capacity, sync_threshold};
use sparsync::dmc::{
    conditional_information_variance, divergence_variance, information_density, kl_divergence, mutual_information,
    noise_llr_step, output_distribution, q_function, q_inverse, validate_dmc,
};
use sparsync::expansion::evaluate_analytic_bounds;
use sparsync::scheme::Regime;
use sparsync::{Dmc, Error, LlrState};
use sparsync_harness::bisect::bisect_max_code_size;
use sparsync_harness::config::ExperimentConfig;
use sparsync_harness::fit::second_order_fit;
use sparsync_harness::montecarlo::{build_params, simulate, Prepared, Setup};

fn report(criterion: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {criterion} {verdict}: {detail}").unwrap();
    out.flush().unwrap();
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text, fixtures()).unwrap()
}

// ---------------------------------------------------------------------------
// Capacity: independent grid oracle

/// Channel with `k` information inputs and strictly positive entries.
fn random_channel(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>) {
    let k = rng.random_range(2..=3usize);
    let ny = rng.random_range(2..=3usize);
    let mut row = || {
        let r: Vec<f64> = (0..ny).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = r.iter().sum();
        r.into_iter().map(|v| v / s).collect::<Vec<f64>>()
    };
    let rows = (0..k).map(|_| row()).collect();
    (rows, row())
}

struct Oracle {
    rows: Vec<Vec<f64>>,
    row_entropy: Vec<f64>,
    ln_noise: Vec<f64>,
}

impl Oracle {
    fn new(rows: &[Vec<f64>], noise: &[f64]) -> Self {
        let row_entropy = rows.iter().map(|r| -r.iter().map(|v| v * v.ln()).sum::<f64>()).collect();
        Self { rows: rows.to_vec(), row_entropy, ln_noise: noise.iter().map(|v| v.ln()).collect() }
    }

    /// `(I(P,W), D(PW||W*))` via `I = H(PW) - sum P H(W_x)`.
    fn eval(&self, p: &[f64]) -> (f64, f64) {
        let ny = self.ln_noise.len();
        let mut q_ln_q = 0.0;
        let mut cross = 0.0;
        for y in 0..ny {
            let q: f64 = p.iter().zip(&self.rows).map(|(a, r)| a * r[y]).sum();
            if q > 0.0 {
                q_ln_q += q * q.ln();
            }
            cross += q * self.ln_noise[y];
        }
        let cond: f64 = p.iter().zip(&self.row_entropy).map(|(a, h)| a * h).sum();
        (-q_ln_q - cond, q_ln_q - cross)
    }

    /// Feasible grid points of step `h` inside the box `center +- radius`.
    fn scan(&self, alpha: f64, h: f64, center: &[f64], radius: f64, mut visit: impl FnMut(f64, &[f64])) {
        let axis = |c: f64| {
            let lo = (c - radius).max(0.0);
            let hi = (c + radius).min(1.0);
            (lo, ((hi - lo) / h).round() as usize)
        };
        let (lo0, s0) = axis(center[0]);
        if self.rows.len() == 2 {
            for i in 0..=s0 {
                let a = (lo0 + i as f64 * h).min(1.0);
                let p = [a, 1.0 - a];
                let (v, d) = self.eval(&p);
                if d >= alpha {
                    visit(v, &p);
                }
            }
            return;
        }
        let (lo1, s1) = axis(center[1]);
        for i in 0..=s0 {
            let a = lo0 + i as f64 * h;
            for j in 0..=s1 {
                let b = lo1 + j as f64 * h;
                let c = 1.0 - a - b;
                if c < -1e-12 {
                    break;
                }
                let p = [a, b, c.max(0.0)];
                let (v, d) = self.eval(&p);
                if d >= alpha {
                    visit(v, &p);
                }
            }
        }
    }

    fn best(&self, alpha: f64, h: f64, center: &[f64], radius: f64) -> (f64, Vec<f64>) {
        let mut best = (f64::NEG_INFINITY, Vec::new());
        self.scan(alpha, h, center, radius, |v, p| {
            if v > best.0 {
                best = (v, p.to_vec());
            }
        });
        best
    }

    /// Step-1e-3 search over the whole simplex, then two refinements around
    /// up to eight well-separated near-best coarse points.
    fn capacity(&self, alpha: f64) -> f64 {
        let mut coarse: Vec<(f64, Vec<f64>)> = Vec::new();
        self.scan(alpha, 1e-3, &[0.5, 0.5], 1.0, |v, p| coarse.push((v, p.to_vec())));
        if coarse.is_empty() {
            return f64::NEG_INFINITY;
        }
        let keep = coarse.len().min(4000);
        coarse.select_nth_unstable_by(keep - 1, |a, b| b.0.total_cmp(&a.0));
        coarse.truncate(keep);
        coarse.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut centers: Vec<Vec<f64>> = Vec::new();
        for (_, p) in &coarse {
            let far = centers.iter().all(|c| c.iter().zip(p).any(|(x, y)| (x - y).abs() > 0.02));
            if far {
                centers.push(p.clone());
                if centers.len() == 8 {
                    break;
                }
            }
        }
        let mut best = coarse[0].0;
        for c in &centers {
            let (mid, p) = self.best(alpha, 2e-5, c, 2e-3);
            let (fine, _) = self.best(alpha, 5e-7, &p, 4e-5);
            best = best.max(mid).max(fine);
        }
        best
    }
}

#[test]
fn criterion_1_capacity_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_gap, mut worst_kkt, mut points, mut members) = (0.0f64, 0.0f64, 0, 0);
    let mut failures = Vec::new();
    for ch in 0..50 {
        let (rows, noise) = random_channel(&mut rng);
        let w = Dmc::with_noise(rows.clone(), noise.clone()).unwrap();
        let oracle = Oracle::new(&rows, &noise);
        let thr = sync_threshold(&w);
        for i in 0..10 {
            let alpha = 0.9 * thr * i as f64 / 9.0;
            points += 1;
            let r = match async_capacity(&w, alpha) {
                Ok(r) => r,
                Err(e) => {
                    failures.push(format!("channel {ch} alpha {alpha:.4}: {e}"));
                    continue;
                }
            };
            let o = oracle.capacity(alpha);
            let gap = (r.c_alpha - o).abs();
            worst_gap = worst_gap.max(gap);
            let mut kkts = vec![kkt_residual(&w, alpha, &r.p_star).unwrap().0];
            match dispersion(&w, alpha, 0.1) {
                Ok(d) => {
                    for p in &d.pi_alpha_samples {
                        members += 1;
                        kkts.push(kkt_residual(&w, alpha, p).unwrap().0);
                    }
                }
                Err(e) => failures.push(format!("channel {ch} alpha {alpha:.4}: dispersion {e}")),
            }
            let kkt = kkts.iter().cloned().fold(0.0, f64::max);
            worst_kkt = worst_kkt.max(kkt);
            if gap > 1e-4 || kkt > 1e-5 || r.constraint_value < alpha - 1e-9 {
                failures.push(format!("channel {ch} alpha {alpha:.4}: solver {} oracle {o} kkt {kkt:.2e}", r.c_alpha));
            }
        }
    }
    let pass = failures.is_empty();
    report(
        1,
        pass,
        &format!(
            "{points} (channel, alpha) points, max |C - grid| = {worst_gap:.2e} (tol 1e-4), max KKT residual = {worst_kkt:.2e} over {} maximizers (tol 1e-5), {} failures",
            points + members,
            failures.len()
        ),
    );
    assert!(pass, "{:#?}", &failures[..failures.len().min(10)]);
}

#[test]
fn criterion_2_capacity_is_flat_below_alpha_bar() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut channels, mut flat_worst, mut drops, mut drop_checks) = (0, 0.0f64, f64::INFINITY, 0);
    let mut failures = Vec::new();
    while channels < 30 {
        let (rows, noise) = random_channel(&mut rng);
        let w = Dmc::with_noise(rows, noise).unwrap();
        let abar = alpha_bar(&w).unwrap();
        if !(abar > 0.0) {
            continue;
        }
        channels += 1;
        let (c, _) = sync_capacity(&w).unwrap();
        for i in 0..=5 {
            let alpha = abar * i as f64 / 5.0;
            let dev = (async_capacity(&w, alpha).unwrap().c_alpha - c).abs();
            flat_worst = flat_worst.max(dev);
            if dev > 1e-6 {
                failures.push(format!("alpha {alpha} <= alpha_bar {abar}: |C(alpha) - C| = {dev:e}"));
            }
        }
        let above = abar + 0.1;
        if above < sync_threshold(&w) {
            drop_checks += 1;
            let ca = async_capacity(&w, above).unwrap().c_alpha;
            drops = drops.min(c - ca);
            if ca >= c - 1e-4 {
                failures.push(format!("alpha_bar + 0.1 = {above}: C(alpha) = {ca}, C = {c}"));
            }
        }
    }
    let pass = failures.is_empty();
    report(
        2,
        pass,
        &format!(
            "{channels} channels with alpha_bar > 0: max |C(alpha) - C| below alpha_bar = {flat_worst:.2e} (tol 1e-6); smallest drop C - C(alpha_bar + 0.1) = {drops:.3e} over {drop_checks} feasible cases (need > 1e-4)"
        ),
    );
    assert!(pass, "{failures:#?}");
}

#[test]
fn criterion_3_decoders_match_transcription() {
    let mut parts = Vec::new();
    let mut total_bad = 0;
    for (name, regime) in
        [("full", Regime::FullSampling), ("min-delay", Regime::MinDelayMultiphase), ("small-delay", Regime::SmallDelayMultiphase)]
    {
        let bad = (0..10_000u64).filter(|&i| !brute::agrees(&brute::micro_instance(regime, i), true)).count();
        total_bad += bad;
        parts.push(format!("{name} {bad}/10000"));
    }
    let pass = total_bad == 0;
    report(3, pass, &format!("mismatches: {}", parts.join(", ")));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// Monte Carlo criteria

#[test]
fn criterion_4_events_respect_analytic_bounds() {
    let cfg = ExperimentConfig::load(fixtures().join("reference.toml")).unwrap();
    let setup = Setup::load(&cfg).unwrap();
    let sc = cfg.scenarios().unwrap().remove(0);
    let prep = Prepared::new(&cfg, build_params(&cfg, &setup, &sc, None).unwrap()).unwrap();
    let sim = simulate(&cfg, &setup, &prep, cfg.trials, false).unwrap();
    let bounds = evaluate_analytic_bounds(&prep.params);
    let t = sim.summary.trials;
    let mut parts = Vec::new();
    let mut vacuous = Vec::new();
    let mut pass = true;
    for (event, key) in [("e_i", "E_I"), ("e_ii", "E_II"), ("e_iii", "E_III_paper"), ("e_iv", "E_IV"), ("e_v", "E_V")] {
        let p = sim.summary.event(event).p;
        let sigma = (p * (1.0 - p) / t as f64).sqrt();
        let b = bounds.get(key).unwrap_or(f64::NAN);
        let ok = p <= b + 3.0 * sigma;
        pass &= ok;
        if bounds.is_vacuous(key) {
            vacuous.push(key);
        }
        parts.push(format!("{event} {p:.4} <= {key} {b:.4} + 3 sigma: {ok}"));
    }
    let rigorous = bounds.get("E_III").unwrap_or(f64::NAN);
    report(
        4,
        pass,
        &format!(
            "{t} trials, A = {}, M = {}; {}; vacuous bounds: [{}]; rigorous E_III = {rigorous}",
            prep.params.a_window,
            prep.codebook.len(),
            parts.join("; "),
            vacuous.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_full_sampling_code_size_meets_target() {
    let cfg = config(
        "channel = \"reference.dmc\"\nalpha = 0.02\nn = 256\neps = 0.1\nregime = \"full_sampling\"\nln_m = \"normal\"\ntrials = 100000\nseed = 1",
    );
    let setup = Setup::load(&cfg).unwrap();
    let sc = cfg.scenarios().unwrap().remove(0);
    let (pass, detail) = match build_params(&cfg, &setup, &sc, None) {
        Err(e) => (false, format!("code size formula not evaluable at n = 256: {e}")),
        Ok(params) => {
            let m = params.m_codewords;
            match Prepared::new(&cfg, params) {
                Err(e) => (false, format!("M = {m:?} cannot be simulated: {e}")),
                Ok(prep) => {
                    let sim = simulate(&cfg, &setup, &prep, cfg.trials, false).unwrap();
                    let p = sim.summary.event("e2").p;
                    let sigma = (p * (1.0 - p) / cfg.trials as f64).sqrt();
                    (p <= cfg.eps + 3.0 * sigma, format!("M = {}, p(E2) = {p:.4} vs 0.1 + 3 sigma", prep.codebook.len()))
                }
            }
        }
    };
    report(5, pass, &detail);
    assert!(pass, "{detail}");
}

struct TrendCase {
    label: &'static str,
    regime: &'static str,
    rho: &'static str,
    extra: &'static str,
    target: f64,
}

#[test]
#[ignore = "slow: runs the full code-size search at four blocklengths"]
fn criterion_6_second_order_exponent_trend() {
    let cases = [
        TrendCase { label: "(a) fast, min delay", regime: "min_delay", rho: "0.5", extra: "", target: 0.5 },
        TrendCase {
            label: "(b) slow, min delay",
            regime: "min_delay",
            rho: "n^-0.75",
            extra: "block_rule = \"inverse_rate\"\nblock_g = 2.0\n",
            target: 0.75,
        },
        TrendCase { label: "(c) slow, small delay", regime: "small_delay", rho: "n^-0.75", extra: "", target: 0.5 },
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for case in &cases {
        let cfg = config(&format!(
            "channel = \"reference.dmc\"\nalpha = 0.02\nn = [64, 128, 256, 512]\neps = 0.1\nregime = \"{}\"\nrho = \"{}\"\ndelta = 0.25\ndelta1 = 0.05\nc_fraction = 0.9\ntrials = 4000\nseed = 1\n{}",
            case.regime, case.rho, case.extra
        ));
        let setup = Setup::load(&cfg).unwrap();
        let mut points = Vec::new();
        let mut per_n = Vec::new();
        for sc in cfg.scenarios().unwrap() {
            match bisect_max_code_size(&cfg, &setup, &sc, cfg.eps, cfg.trials) {
                Ok(b) => {
                    per_n.push(format!("n={} lnM*={:.3}{}", sc.n, b.ln_m_star, if b.capped { " (capped)" } else { "" }));
                    points.push((sc.n, b.ln_m_star));
                }
                Err(e) => per_n.push(format!("n={} error: {e}", sc.n)),
            }
        }
        let verdict = match second_order_fit(&points) {
            Ok(f) => {
                let ok = (f.exponent_hat - case.target).abs() <= 0.1;
                pass &= ok;
                format!("exponent {:.3} (target {} +- 0.1)", f.exponent_hat, case.target)
            }
            Err(e) => {
                pass = false;
                format!("no fit: {e}")
            }
        };
        parts.push(format!("{} [{}] {verdict}", case.label, per_n.join(", ")));
    }
    report(6, pass, &parts.join(" | "));
    assert!(pass, "{parts:#?}");
}

#[test]
fn criterion_7_e1_implies_e2_when_delay_covers_n() {
    let base = "channel = \"reference.dmc\"\nalpha = 0.02\nn = 256\nrho = \"0.5\"\ndelta1 = 0.05\nc_fraction = 0.9\nln_m = 4.1588830833596715\ntrials = 20000\n";
    let runs = [
        format!("{base}regime = \"min_delay\"\nseed = 11"),
        format!("{base}regime = \"min_delay\"\ndelay = \"n+block\"\nseed = 12"),
        format!("{base}regime = \"small_delay\"\nseed = 13"),
        format!("{base}regime = \"small_delay\"\ndelay = \"n\"\nseed = 14"),
        "channel = \"noisy.dmc\"\nalpha = 0.02\nn = 64\nregime = \"full_sampling\"\nln_m = 3.0\ntrials = 20000\nseed = 15".to_string(),
    ];
    let (mut trials, mut violations, mut e1) = (0u64, 0u64, 0u64);
    for text in &runs {
        let cfg = config(text);
        let setup = Setup::load(&cfg).unwrap();
        let sc = cfg.scenarios().unwrap().remove(0);
        let prep = Prepared::new(&cfg, build_params(&cfg, &setup, &sc, None).unwrap()).unwrap();
        assert!(prep.delay >= sc.n as u64);
        let sim = simulate(&cfg, &setup, &prep, cfg.trials, false).unwrap();
        trials += sim.records.len() as u64;
        e1 += sim.records.iter().filter(|r| r.e1).count() as u64;
        violations += sim.records.iter().filter(|r| r.e1 && !r.e2).count() as u64;
    }
    let pass = violations == 0;
    report(7, pass, &format!("{trials} trials in 5 configurations, {e1} labelled E1, {violations} E1 without E2"));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// Information measures

fn simpson_tail(x: f64) -> f64 {
    let (a, b, steps) = (x, x + 14.0, 40_000usize);
    let h = (b - a) / steps as f64;
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = phi(a) + phi(b);
    for i in 1..steps {
        s += phi(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn bsc(e: f64) -> Dmc {
    Dmc::with_noise(vec![vec![1.0 - e, e], vec![e, 1.0 - e]], vec![0.5, 0.5]).unwrap()
}

#[test]
fn criterion_8_information_measures() {
    let mut failed = Vec::new();
    let mut total = 0;
    let mut check = |name: &str, ok: bool| {
        total += 1;
        if !ok {
            failed.push(name.to_string());
        }
    };
    let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol;
    let noiseless = Dmc::with_noise(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.1, 0.9]).unwrap();
    let constant = Dmc::with_noise(vec![vec![0.3, 0.7], vec![0.3, 0.7]], vec![0.5, 0.5]).unwrap();
    let half = [0.5, 0.5];

    check("valid channel", validate_dmc(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]], 2).is_ok());
    check(
        "row sums to 1.1",
        matches!(validate_dmc(vec![vec![0.6, 0.5], vec![0.0, 1.0], vec![0.5, 0.5]], 2), Err(Error::RowNotStochastic { .. })),
    );
    check(
        "zero column",
        matches!(
            validate_dmc(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.5, 0.5, 0.0]], 2),
            Err(Error::UnreachableOutput { .. })
        ),
    );

    let pw = output_distribution(&[1.0, 0.0], &noiseless).unwrap();
    check("PW deterministic", pw.as_slice() == [1.0, 0.0]);
    let sym = Dmc::with_noise(vec![vec![0.9, 0.1], vec![0.1, 0.9]], vec![0.5, 0.5]).unwrap();
    let pw = output_distribution(&half, &sym).unwrap();
    check("PW symmetric", close(pw[0], 0.5, 1e-15) && close(pw[1], 0.5, 1e-15));
    let asym = Dmc::with_noise(vec![vec![0.9, 0.1], vec![0.2, 0.8]], vec![0.5, 0.5]).unwrap();
    let pw = output_distribution(&[0.3, 0.7], &asym).unwrap();
    check("PW product", close(pw[0], 0.3 * 0.9 + 0.7 * 0.2, 1e-15) && close(pw[1], 0.3 * 0.1 + 0.7 * 0.8, 1e-15));

    check("D(P||P)", kl_divergence(&[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5]) == 0.0);
    check("D two-term", close(kl_divergence(&half, &[0.1, 0.9]), 0.5 * 5f64.ln() + 0.5 * (5.0f64 / 9.0).ln(), 1e-14));
    check("D disjoint", kl_divergence(&[1.0, 0.0], &[0.0, 1.0]) == f64::INFINITY);

    check("I noiseless", close(mutual_information(&half, &noiseless).unwrap(), 2f64.ln(), 1e-14));
    check("I constant", close(mutual_information(&half, &constant).unwrap(), 0.0, 1e-15));
    let hb = |e: f64| -e * e.ln() - (1.0 - e) * (1.0 - e).ln();
    check("I BSC(0.1)", close(mutual_information(&half, &bsc(0.1)).unwrap(), 2f64.ln() - hb(0.1), 1e-14));

    check("V(P||P)", close(divergence_variance(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0, 1e-15));
    let (l0, l1) = ((0.5f64 / 0.25).ln(), (0.5f64 / 0.75).ln());
    let mean = 0.5 * l0 + 0.5 * l1;
    let v_def = 0.5 * (l0 - mean).powi(2) + 0.5 * (l1 - mean).powi(2);
    check("V two-term", close(divergence_variance(&half, &[0.25, 0.75]).unwrap(), v_def, 1e-14));
    check("V point mass", close(divergence_variance(&[1.0, 0.0], &half).unwrap(), 0.0, 1e-15));

    check("V noiseless", close(conditional_information_variance(&half, &noiseless).unwrap(), 0.0, 1e-15));
    check("V constant", close(conditional_information_variance(&half, &constant).unwrap(), 0.0, 1e-15));
    let w11 = bsc(0.11);
    let v = conditional_information_variance(&half, &w11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let draws = 1_000_000usize;
    let samples: Vec<f64> = (0..draws)
        .map(|_| {
            let x = rng.random_range(0..2usize);
            let y = if rng.random_bool(0.11) { 1 - x } else { x };
            information_density(&[x], &[y], &half, &w11).unwrap()
        })
        .collect();
    let m = samples.iter().sum::<f64>() / draws as f64;
    let var = samples.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let m4 = samples.iter().map(|s| (s - m).powi(4)).sum::<f64>() / draws as f64;
    let se = ((m4 - var * var) / draws as f64).sqrt();
    check("V BSC(0.11) vs sampling", (v - var).abs() <= 3.0 * se);

    check("LLR empty", LlrState::new().accumulated() == 0.0);
    let flat = Dmc::with_noise(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.5, 0.5]).unwrap();
    check("LLR identical", (0..2).all(|y| noise_llr_step(LlrState::new(), y, &half, &flat).unwrap().accumulated() == 0.0));
    check("LLR ln 5", close(noise_llr_step(LlrState::new(), 0, &half, &noiseless).unwrap().accumulated(), 5f64.ln(), 1e-14));

    check("i empty", information_density(&[], &[], &half, &noiseless).unwrap() == 0.0);
    check("i noiseless", close(information_density(&[0, 1, 0], &[0, 1, 0], &half, &noiseless).unwrap(), 3.0 * 2f64.ln(), 1e-14));
    check("i BSC", close(information_density(&[0], &[1], &half, &bsc(0.1)).unwrap(), -(5f64.ln()), 1e-14));

    check("Q(0)", q_function(0.0) == 0.5);
    check("Q^-1(0.5)", q_inverse(0.5).unwrap() == 0.0);
    let x = 1.2815515655;
    check("Q tail vs integration", close(q_function(x), simpson_tail(x), 1e-9) && close(q_function(x), 0.1, 1e-9));

    // Below zero Q(x) lies in [0.5, 1), where doubles are 2^-53 apart, so x
    // is only determined to within half an ulp over the density.
    let (mut worst_neg, mut worst_pos) = (0.0f64, 0.0f64);
    for i in 0..=12_000 {
        let x = -6.0 + i as f64 * 1e-3;
        let err = (q_inverse(q_function(x)).unwrap() - x).abs();
        if x < 0.0 {
            worst_neg = worst_neg.max(err);
        } else {
            worst_pos = worst_pos.max(err);
        }
    }
    let floor = 2f64.powi(-54) / ((-18.0f64).exp() / (2.0 * std::f64::consts::PI).sqrt());
    let worst = worst_neg.max(worst_pos);
    check("Q^-1(Q(x)) = x on [-6, 6]", worst <= 1e-9);

    let pass = failed.is_empty();
    report(
        8,
        pass,
        &format!(
            "{} of {total} examples pass; max |Q^-1(Q(x)) - x| = {worst_pos:.2e} on [0, 6], {worst_neg:.2e} on [-6, 0) (f64 resolution at x = -6 is {floor:.1e})",
            total - failed.len()
        ),
    );
    assert!(pass, "failed: {failed:?}");
}
