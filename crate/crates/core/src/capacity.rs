//! Divergence-constrained capacity `C(alpha)`, the dispersion set and the
//! KKT certificate.
//!
//! Distributions here are always indexed over the information inputs.
//!
//! The solver leans on the identity `D(PW||W*) = L(P) - I(P)` where
//! `L(P) = sum_x P(x) D(W(.|x)||W*)` is linear. Maximizers of the concave
//! objective `I + t L` trace a path along which `D(PW||W*)` is nondecreasing,
//! and the point on that path with `D = alpha` is a certified global maximizer
//! of the constrained problem. When the path never reaches `alpha` the optimum
//! sits on the face of inputs with the largest `D(W(.|x)||W*)`, where
//! `C(alpha) = alpha(W) - alpha`. A penalized multi-start ascent runs
//! alongside as an independent search and supplies members of the optimal set.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::dmc::{conditional_information_variance, kl_divergence, ln_ratio, Dist, Dmc};
use crate::error::{Error, Result};

/// Membership tolerance for `I(P,W) = C(alpha)`.
pub const CAPACITY_TOL: f64 = 1e-6;
/// Total-variation radius used to merge maximizers.
pub const CLUSTER_RADIUS: f64 = 1e-4;
/// Mass below which an input counts as off-support.
pub const SUPPORT_TOL: f64 = 1e-9;
/// Slack below which the divergence constraint counts as binding.
pub const BINDING_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityOptions {
    /// Number of multi-start points for the penalized ascent (at least 64).
    pub starts: usize,
    pub seed: u64,
    /// Largest input alphabet for which the optimal set is enumerated exactly.
    pub max_enumeration_inputs: usize,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        Self { starts: 64, seed: 0x0a5c_a9ac, max_enumeration_inputs: 12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    pub alpha: f64,
    pub c_alpha: f64,
    pub p_star: Dist,
    /// `D(P*W || W*)`
    pub constraint_value: f64,
    pub kkt_residual: f64,
    pub active: bool,
    /// Multiplier of the divergence constraint.
    pub lambda: f64,
    /// Other maximizers found by the multi-start search.
    pub candidates: Vec<Dist>,
    /// Which branch of the solver produced `p_star`.
    pub branch: Branch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `alpha <= alpha_bar`: the synchronous optimum is feasible.
    Unconstrained,
    /// Interior of the parametric path.
    Parametric,
    /// Optimum on the face of maximally detectable inputs.
    Face,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionResult {
    pub v_min: f64,
    pub v_max: f64,
    pub v_eps: f64,
    pub pi_alpha_samples: Vec<Dist>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktMultipliers {
    pub lambda: f64,
    pub mu: f64,
}

/// Channel quantities that do not depend on `P`.
struct Tables {
    rows: Vec<Vec<f64>>,
    noise: Vec<f64>,
    /// `D(W(.|x) || W*)`
    div: Vec<f64>,
    /// `H(W(.|x))`
    ent: Vec<f64>,
}

impl Tables {
    fn new(w: &Dmc) -> Self {
        let rows: Vec<Vec<f64>> = (0..w.info_size()).map(|k| w.info_row(k).to_vec()).collect();
        let noise = w.noise().to_vec();
        let div = rows.iter().map(|r| kl_divergence(r, &noise)).collect();
        let ent = rows
            .iter()
            .map(|r| r.iter().filter(|v| **v > 0.0).map(|v| -v * v.ln()).sum())
            .collect();
        Self { rows, noise, div, ent }
    }

    fn k(&self) -> usize {
        self.rows.len()
    }

    fn pw(&self, p: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.noise.len()];
        for (px, row) in p.iter().zip(&self.rows) {
            if *px > 0.0 {
                q.iter_mut().zip(row).for_each(|(a, b)| *a += px * b);
            }
        }
        q
    }

    fn eval(&self, p: &[f64]) -> Eval {
        let pw = self.pw(p);
        let mut ix = Vec::with_capacity(self.k());
        let mut dx = Vec::with_capacity(self.k());
        for row in &self.rows {
            let (mut a, mut b) = (0.0, 0.0);
            for ((&wy, &qy), &ny) in row.iter().zip(&pw).zip(&self.noise) {
                if wy > 0.0 {
                    a += wy * ln_ratio(wy, qy);
                    b += wy * ln_ratio(qy, ny);
                }
            }
            ix.push(a);
            dx.push(b);
        }
        let info = p.iter().zip(&ix).filter(|(px, _)| **px > 0.0).map(|(px, i)| px * i).sum::<f64>().max(0.0);
        let det = kl_divergence(&pw, &self.noise);
        Eval { pw, ix, dx, info, det }
    }
}

struct Eval {
    pw: Vec<f64>,
    /// `D(W(.|x) || PW)`
    ix: Vec<f64>,
    /// `sum_y W(y|x) ln(PW(y)/W*(y))`
    dx: Vec<f64>,
    info: f64,
    det: f64,
}

/// Maximizes `I(P) + t L(P)` over inputs allowed by `mask` with the
/// Blahut-Arimoto update `P <- P exp(I_x + t D_x)`. Returns the iterate and the
/// final duality gap.
fn blahut(tab: &Tables, t: f64, mask: &[bool], start: Option<&[f64]>, tol: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let k = tab.k();
    let allowed = mask.iter().filter(|m| **m).count() as f64;
    let mut p: Vec<f64> = match start {
        Some(s) => s.iter().zip(mask).map(|(v, m)| if *m { v.max(1e-12) } else { 0.0 }).collect(),
        None => mask.iter().map(|m| if *m { 1.0 / allowed } else { 0.0 }).collect(),
    };
    normalize(&mut p);
    let mut gap = f64::INFINITY;
    for _ in 0..max_iter {
        let ev = tab.eval(&p);
        let score: Vec<f64> = (0..k).map(|x| ev.ix[x] + scaled(t, tab.div[x])).collect();
        let top = (0..k).filter(|&x| mask[x]).map(|x| score[x]).fold(f64::NEG_INFINITY, f64::max);
        let avg: f64 = (0..k).filter(|&x| p[x] > 0.0).map(|x| p[x] * score[x]).sum();
        gap = top - avg;
        if gap < tol {
            break;
        }
        for x in 0..k {
            if mask[x] {
                p[x] *= (score[x] - top).exp();
            }
        }
        normalize(&mut p);
    }
    (p, gap)
}

/// `t * d` with `0 * inf = 0`.
fn scaled(t: f64, d: f64) -> f64 {
    if t == 0.0 { 0.0 } else { t * d }
}

fn normalize(p: &mut [f64]) {
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        acc += uj;
        let t = (acc - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

#[derive(Clone, Copy)]
enum Polish {
    Free,
    Constrained { alpha: f64, t: f64 },
}

/// Newton iteration on the KKT system with an active-set loop.
///
/// Free mode solves `I_x = K` on the support. Constrained mode solves
/// `I_x + t D_x = K` together with `L - I = alpha`, with `t` unknown.
/// Returns the polished point and `t`, or `None` if it fails to converge.
fn newton_polish(tab: &Tables, p0: &[f64], mode: Polish) -> Option<(Vec<f64>, f64)> {
    let k = tab.k();
    let mut p = p0.to_vec();
    let (mut t, alpha, constrained) = match mode {
        Polish::Free => (0.0, 0.0, false),
        Polish::Constrained { alpha, t } => (t, alpha, true),
    };
    let mut support: Vec<usize> = (0..k).filter(|&x| p[x] > 1e-12).collect();
    for x in 0..k {
        if !support.contains(&x) {
            p[x] = 0.0;
        }
    }
    normalize(&mut p);
    let mut kval = {
        let ev = tab.eval(&p);
        support.iter().map(|&x| p[x] * (ev.ix[x] + scaled(t, tab.div[x]))).sum::<f64>()
    };

    let residual = |p: &[f64], t: f64, kval: f64, support: &[usize]| -> Vec<f64> {
        let ev = tab.eval(p);
        let mut f: Vec<f64> = support.iter().map(|&x| ev.ix[x] + scaled(t, tab.div[x]) - kval).collect();
        f.push(support.iter().map(|&x| p[x]).sum::<f64>() - 1.0);
        if constrained {
            f.push(ev.det - alpha);
        }
        f
    };
    let norm = |f: &[f64]| f.iter().fold(0.0_f64, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v.abs()) });

    for _round in 0..(2 * k + 4) {
        let mut converged = false;
        for _ in 0..60 {
            let f = residual(&p, t, kval, &support);
            let fnorm = norm(&f);
            if fnorm < 1e-13 {
                converged = true;
                break;
            }
            let ev = tab.eval(&p);
            let s = support.len();
            let cols = s + 1 + usize::from(constrained);
            let mut jac = DMatrix::<f64>::zeros(f.len(), cols);
            for (a, &x) in support.iter().enumerate() {
                for (b, &xp) in support.iter().enumerate() {
                    let g: f64 = (0..ev.pw.len())
                        .filter(|&y| ev.pw[y] > 0.0)
                        .map(|y| tab.rows[x][y] * tab.rows[xp][y] / ev.pw[y])
                        .sum();
                    jac[(a, b)] = -g;
                }
                jac[(a, s)] = -1.0;
                if constrained {
                    jac[(a, s + 1)] = tab.div[x];
                }
            }
            for b in 0..s {
                jac[(s, b)] = 1.0;
            }
            if constrained {
                for (b, &xp) in support.iter().enumerate() {
                    jac[(s + 1, b)] = tab.div[xp] - ev.ix[xp] + 1.0;
                }
            }
            let rhs = DVector::from_iterator(f.len(), f.iter().map(|v| -v));
            let step = jac.svd(true, true).solve(&rhs, 1e-14).ok()?;
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let mut q = p.clone();
                for (a, &x) in support.iter().enumerate() {
                    q[x] = p[x] + scale * step[a];
                }
                let nk = kval + scale * step[s];
                let nt = if constrained { t + scale * step[s + 1] } else { t };
                if support.iter().all(|&x| q[x] >= 0.0) {
                    let fnew = residual(&q, nt, nk, &support);
                    if norm(&fnew) < fnorm * (1.0 - 1e-4 * scale) || norm(&fnew) < 1e-13 {
                        p = q;
                        kval = nk;
                        t = nt;
                        accepted = true;
                        break;
                    }
                } else if scale < 1e-3 {
                    // blocked by the boundary: drop the entries that hit zero
                    let before = support.len();
                    support.retain(|&x| q[x] > 0.0);
                    for x in 0..k {
                        if !support.contains(&x) {
                            p[x] = 0.0;
                        }
                    }
                    if support.is_empty() {
                        return None;
                    }
                    normalize(&mut p);
                    accepted = support.len() < before;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                break;
            }
            // drop entries driven to numerical zero
            let tiny: Vec<usize> = support.iter().copied().filter(|&x| p[x] < 1e-15).collect();
            if !tiny.is_empty() && support.len() > tiny.len() {
                support.retain(|x| !tiny.contains(x));
                tiny.iter().for_each(|&x| p[x] = 0.0);
                normalize(&mut p);
            }
        }
        if !converged {
            return None;
        }
        let ev = tab.eval(&p);
        let worst = (0..k)
            .filter(|x| !support.contains(x))
            .map(|x| (x, ev.ix[x] + scaled(t, tab.div[x]) - kval))
            .filter(|(_, v)| *v > 1e-11)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        match worst {
            None => {
                if constrained && t < -1e-10 {
                    return None;
                }
                return Some((p, t));
            }
            Some((x, _)) => {
                p[x] = 1e-6;
                normalize(&mut p);
                support.push(x);
                support.sort_unstable();
            }
        }
    }
    None
}

/// Synchronous capacity `C = max_P I(P,W)` and a maximizer.
pub fn sync_capacity(w: &Dmc) -> Result<(f64, Dist)> {
    let tab = Tables::new(w);
    sync_capacity_tab(&tab)
}

fn sync_capacity_tab(tab: &Tables) -> Result<(f64, Dist)> {
    let mask = vec![true; tab.k()];
    let (p, gap) = blahut(tab, 0.0, &mask, None, 1e-11, 500_000);
    let p = match newton_polish(tab, &p, Polish::Free) {
        Some((q, _)) if tab.eval(&q).info >= tab.eval(&p).info - 1e-12 => q,
        _ if gap < 1e-10 => p,
        _ => return Err(Error::NonConvergence(format!("capacity iteration stalled with gap {gap:e}"))),
    };
    let c = tab.eval(&p).info;
    Ok((c, Dist::normalized(p)?))
}

/// Critical exponent `D(P_bar W || W*)` for the capacity-achieving output law.
pub fn alpha_bar(w: &Dmc) -> Result<f64> {
    let (_, pbar) = sync_capacity(w)?;
    Ok(Tables::new(w).eval(&pbar).det)
}

/// Synchronization threshold `max_x D(W(.|x) || W*)` over information inputs.
pub fn sync_threshold(w: &Dmc) -> f64 {
    Tables::new(w).div.into_iter().fold(0.0, f64::max)
}

/// `min_y PW(y) > 0`.
pub fn pw_positivity_check(w: &Dmc, p: &Dist) -> bool {
    crate::dmc::output_distribution(p, w).map(|q| q.iter().all(|v| *v > 0.0)).unwrap_or(false)
}

pub fn async_capacity(w: &Dmc, alpha: f64) -> Result<CapacityResult> {
    async_capacity_with(w, alpha, &CapacityOptions::default())
}

/// Solves `max I(P,W)` subject to `D(PW||W*) >= alpha`.
pub fn async_capacity_with(w: &Dmc, alpha: f64, opts: &CapacityOptions) -> Result<CapacityResult> {
    let threshold = sync_threshold(w);
    if !(alpha >= 0.0) || alpha >= threshold {
        return Err(Error::Infeasible { alpha, threshold });
    }
    let tab = Tables::new(w);
    let (c, pbar) = sync_capacity_tab(&tab)?;
    let abar = tab.eval(&pbar).det;

    let (primary, branch) = if alpha <= abar {
        (pbar.as_slice().to_vec(), Branch::Unconstrained)
    } else {
        let face: Vec<bool> = tab.div.iter().map(|d| *d >= threshold - 1e-12).collect();
        let (qf, _) = blahut(&tab, 0.0, &face, None, 1e-13, 200_000);
        let qf = match newton_polish(&tab, &qf, Polish::Free) {
            Some((q, _)) if q.iter().zip(&face).all(|(v, f)| *f || *v == 0.0) => q,
            _ => qf,
        };
        let phi_face = tab.eval(&qf).info;
        if alpha >= threshold - phi_face - 1e-12 {
            (face_point(&tab, &face, &qf, threshold - alpha), Branch::Face)
        } else {
            (parametric_point(&tab, alpha, &pbar)?, Branch::Parametric)
        }
    };

    let candidates = multistart(&tab, alpha, &pbar, opts);
    let mut best = primary;
    let best_info = tab.eval(&best).info;
    let mut others = Vec::new();
    for cand in candidates {
        let ev = tab.eval(&cand);
        if ev.det < alpha - 1e-9 {
            continue;
        }
        if ev.info > best_info + 1e-9 && branch != Branch::Face {
            // The certified branches cannot be beaten; a parametric point can
            // only lose to a candidate if bisection stopped early.
            if kkt_residual_tab(&tab, alpha, &cand).0 <= 1e-5 {
                others.push(Dist::normalized(best.clone())?);
                best = cand;
                continue;
            }
        }
        if ev.info >= best_info - CAPACITY_TOL {
            others.push(Dist::normalized(cand)?);
        }
    }
    let ev = tab.eval(&best);
    let (residual, mult) = kkt_residual_tab(&tab, alpha, &best);
    let c_alpha = if branch == Branch::Unconstrained { c } else { ev.info };
    Ok(CapacityResult {
        alpha,
        c_alpha,
        p_star: Dist::normalized(best)?,
        constraint_value: ev.det,
        kkt_residual: residual,
        active: ev.det - alpha <= BINDING_TOL,
        lambda: mult.lambda,
        candidates: others,
        branch,
    })
}

/// Point on the maximal-divergence face with `I = target`, found by bisection
/// from a face vertex toward the face's mutual-information maximizer.
fn face_point(tab: &Tables, face: &[bool], qf: &[f64], target: f64) -> Vec<f64> {
    let k = tab.k();
    let v = (0..k).filter(|&x| face[x]).min_by(|a, b| qf[*a].total_cmp(&qf[*b])).unwrap();
    let mix = |th: f64| -> Vec<f64> { (0..k).map(|x| th * qf[x] + (1.0 - th) * f64::from(u8::from(x == v))).collect() };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tab.eval(&mix(mid)).info < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // the side with I <= target keeps the divergence constraint satisfied
    mix(lo)
}

/// Bisects the multiplier `t` so that the maximizer of `I + t L` has
/// `D(PW||W*) = alpha`, then polishes the KKT system.
fn parametric_point(tab: &Tables, alpha: f64, pbar: &[f64]) -> Result<Vec<f64>> {
    let mask = vec![true; tab.k()];
    let solve = |t: f64, start: &[f64]| -> Vec<f64> {
        blahut(tab, t, &mask, Some(start), 1e-12, 100_000).0
    };
    let mut lo = (0.0, pbar.to_vec());
    let mut t_hi = 1.0;
    let mut hi = loop {
        let p = solve(t_hi, &lo.1);
        if tab.eval(&p).det >= alpha {
            break (t_hi, p);
        }
        lo = (t_hi, p);
        t_hi *= 2.0;
        if t_hi > 1e9 {
            return Err(Error::NonConvergence("multiplier bracket diverged".into()));
        }
    };
    for _ in 0..100 {
        let tm = 0.5 * (lo.0 + hi.0);
        if hi.0 - lo.0 <= 1e-13 * hi.0.max(1.0) {
            break;
        }
        let p = solve(tm, &lo.1);
        let d = tab.eval(&p).det;
        if (d - alpha).abs() < 1e-10 {
            lo = (tm, p.clone());
            hi = (tm, p);
            break;
        }
        if d < alpha {
            lo = (tm, p);
        } else {
            hi = (tm, p);
        }
    }
    // The path can jump where the maximizer of I + tL is not unique; the
    // optimal set there is a segment along which D moves continuously.
    let mix = |th: f64| -> Vec<f64> { lo.1.iter().zip(&hi.1).map(|(a, b)| (1.0 - th) * a + th * b).collect() };
    let (mut a, mut b) = (0.0, 1.0);
    if tab.eval(&hi.1).det - alpha > 1e-12 {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if tab.eval(&mix(m)).det < alpha {
                a = m;
            } else {
                b = m;
            }
        }
    }
    let start = mix(b);
    let t0 = 0.5 * (lo.0 + hi.0);
    match newton_polish(tab, &start, Polish::Constrained { alpha, t: t0 }) {
        Some((p, _)) if tab.eval(&p).det >= alpha - 1e-12 && tab.eval(&p).info >= tab.eval(&start).info - 1e-9 => Ok(p),
        _ => Ok(start),
    }
}

/// Penalized projected-gradient ascent from many starting points, followed by
/// a feasibility repair toward the most detectable input and a KKT polish.
/// Returns every feasible end point.
fn multistart(tab: &Tables, alpha: f64, pbar: &[f64], opts: &CapacityOptions) -> Vec<Vec<f64>> {
    let k = tab.k();
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for x in 0..k {
        starts.push((0..k).map(|j| f64::from(u8::from(j == x))).collect());
    }
    for x in 0..k {
        for y in x + 1..k {
            let mut p = vec![0.0; k];
            p[x] = 0.5;
            p[y] = 0.5;
            starts.push(p);
        }
    }
    starts.push(pbar.to_vec());
    for x in 0..k {
        starts.push((0..k).map(|j| 0.5 * pbar[j] + 0.5 * f64::from(u8::from(j == x))).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while starts.len() < opts.starts.max(64) {
        let mut p: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        normalize(&mut p);
        starts.push(p);
    }
    let top = (0..k).max_by(|a, b| tab.div[*a].total_cmp(&tab.div[*b])).unwrap();
    starts
        .iter()
        .filter_map(|s| {
            let p = penalized_ascent(tab, alpha, s);
            let p = repair(tab, alpha, p, top)?;
            let (_, m) = kkt_residual_tab(tab, alpha, &p);
            let lam = m.lambda.min(1.0 - 1e-9);
            let t = lam / (1.0 - lam);
            let ev = tab.eval(&p);
            let mode = if ev.det - alpha > BINDING_TOL { Polish::Free } else { Polish::Constrained { alpha, t } };
            match newton_polish(tab, &p, mode) {
                Some((q, _)) => {
                    let eq = tab.eval(&q);
                    if eq.det >= alpha - 1e-12 && eq.info >= ev.info - 1e-12 {
                        Some(q)
                    } else {
                        Some(p)
                    }
                }
                None => Some(p),
            }
        })
        .collect()
}

fn penalized_ascent(tab: &Tables, alpha: f64, start: &[f64]) -> Vec<f64> {
    let k = tab.k();
    let mut p = start.to_vec();
    let clip = |v: f64| v.clamp(-1e3, 1e3);
    for kappa in [10.0, 100.0, 1e3, 1e4] {
        let objective = |ev: &Eval| ev.info - kappa * (alpha - ev.det).max(0.0).powi(2);
        let mut step = 0.5;
        let mut ev = tab.eval(&p);
        let mut f = objective(&ev);
        for _ in 0..400 {
            let slack = (alpha - ev.det).max(0.0);
            let g: Vec<f64> = (0..k).map(|x| clip(ev.ix[x]) + 2.0 * kappa * slack * clip(ev.dx[x])).collect();
            let mut moved = false;
            while step > 1e-14 {
                let q = project_simplex(&p.iter().zip(&g).map(|(a, b)| a + step * b).collect::<Vec<_>>());
                let eq = tab.eval(&q);
                let fq = objective(&eq);
                if fq > f {
                    let delta: f64 = q.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
                    p = q;
                    ev = eq;
                    f = fq;
                    step *= 1.5;
                    moved = delta > 1e-13;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
    }
    p
}

/// Moves an infeasible point along the segment toward the most detectable
/// input until the divergence constraint holds. `D` is convex along the
/// segment, so the crossing is unique.
fn repair(tab: &Tables, alpha: f64, p: Vec<f64>, top: usize) -> Option<Vec<f64>> {
    if tab.eval(&p).det >= alpha {
        return Some(p);
    }
    let mix = |th: f64| -> Vec<f64> { p.iter().enumerate().map(|(x, v)| (1.0 - th) * v + th * f64::from(u8::from(x == top))).collect() };
    if tab.eval(&mix(1.0)).det < alpha {
        return None;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if tab.eval(&mix(m)).det < alpha {
            lo = m;
        } else {
            hi = m;
        }
    }
    Some(mix(hi))
}

/// Residual of the stationarity conditions
/// `I_x = C + lambda (alpha - d_x)` on the support and
/// `I_x <= C + lambda (alpha - d_x)` off it, with
/// `d_x = sum_y W(y|x) ln(PW(y)/W*(y))`, plus complementary slackness.
pub fn kkt_residual(w: &Dmc, alpha: f64, p: &Dist) -> Result<(f64, KktMultipliers)> {
    let tab = Tables::new(w);
    if p.len() != tab.k() {
        return Err(Error::DimensionMismatch { expected: tab.k(), got: p.len() });
    }
    Ok(kkt_residual_tab(&tab, alpha, p))
}

fn kkt_residual_tab(tab: &Tables, alpha: f64, p: &[f64]) -> (f64, KktMultipliers) {
    let ev = tab.eval(p);
    let c = ev.info;
    let k = tab.k();
    let support: Vec<usize> = (0..k).filter(|&x| p[x] > SUPPORT_TOL).collect();
    let off: Vec<usize> = (0..k).filter(|&x| p[x] <= SUPPORT_TOL).collect();
    let slack = ev.det - alpha;

    let residual = |lam: f64| -> f64 {
        let mut r = (lam * slack).abs();
        if !r.is_finite() {
            r = if lam == 0.0 { 0.0 } else { f64::INFINITY };
        }
        for &x in &support {
            r = r.max((ev.ix[x] - c - lam * (alpha - ev.dx[x])).abs());
        }
        for &x in &off {
            let rhs = if lam == 0.0 { c } else { c + lam * (alpha - ev.dx[x]) };
            let v = ev.ix[x] - rhs;
            if v.is_nan() || v > r {
                r = if v.is_nan() { f64::INFINITY } else { v };
            }
        }
        r
    };

    let lambda = if slack > BINDING_TOL {
        0.0
    } else {
        // regress I_x on d_x over the support; the slope is -lambda
        let n = support.len() as f64;
        let md = support.iter().map(|&x| ev.dx[x]).sum::<f64>() / n;
        let mi = support.iter().map(|&x| ev.ix[x]).sum::<f64>() / n;
        let sxx: f64 = support.iter().map(|&x| (ev.dx[x] - md).powi(2)).sum();
        let sxy: f64 = support.iter().map(|&x| (ev.dx[x] - md) * (ev.ix[x] - mi)).sum();
        if sxx > 1e-14 && sxx.is_finite() {
            (-sxy / sxx).max(0.0)
        } else {
            // slope undetermined by the support: minimize the residual itself
            let mut hi = 1.0;
            while residual(hi * 2.0) <= residual(hi) && hi < 1e6 {
                hi *= 2.0;
            }
            let (mut a, mut b) = (0.0, 2.0 * hi);
            for _ in 0..200 {
                let m1 = a + (b - a) / 3.0;
                let m2 = b - (b - a) / 3.0;
                if residual(m1) <= residual(m2) {
                    b = m2;
                } else {
                    a = m1;
                }
            }
            0.5 * (a + b)
        }
    };
    let mu = c - 1.0 + lambda * (alpha + 1.0);
    (residual(lambda), KktMultipliers { lambda, mu })
}

/// Extremes of `V(P,W)` over the set of constrained maximizers.
pub fn dispersion(w: &Dmc, alpha: f64, eps: f64) -> Result<DispersionResult> {
    let res = async_capacity(w, alpha)?;
    dispersion_from(w, &res, eps)
}

/// Like [`dispersion`] but reuses a solved [`CapacityResult`].
///
/// Away from the maximal-divergence face every maximizer shares the output
/// law `Q = P*W`, so the optimal set is the polytope
/// `{P >= 0 : PW = Q, sum_x P(x) H(W(.|x)) = H(Q) - C(alpha)}` on which `V` is
/// linear; its vertices are enumerated for small input alphabets.
pub fn dispersion_from(w: &Dmc, res: &CapacityResult, eps: f64) -> Result<DispersionResult> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::DomainError(eps));
    }
    let tab = Tables::new(w);
    let k = tab.k();
    let mut pool: Vec<Vec<f64>> = vec![res.p_star.to_vec()];
    pool.extend(res.candidates.iter().map(|d| d.to_vec()));
    match res.branch {
        Branch::Face => {
            let threshold = sync_threshold(w);
            let face: Vec<bool> = tab.div.iter().map(|d| *d >= threshold - 1e-12).collect();
            let (qf, _) = blahut(&tab, 0.0, &face, None, 1e-13, 200_000);
            for v in (0..k).filter(|&x| face[x]) {
                let mix = |th: f64| -> Vec<f64> { (0..k).map(|x| th * qf[x] + (1.0 - th) * f64::from(u8::from(x == v))).collect() };
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..200 {
                    let m = 0.5 * (lo + hi);
                    if tab.eval(&mix(m)).info < res.c_alpha {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                pool.push(mix(lo));
            }
        }
        _ if k <= CapacityOptions::default().max_enumeration_inputs => {
            pool.extend(polytope_vertices(&tab, &res.p_star, res.c_alpha));
        }
        _ => {}
    }
    let mut members: Vec<Vec<f64>> = Vec::new();
    for p in pool {
        let ev = tab.eval(&p);
        if ev.info < res.c_alpha - CAPACITY_TOL || ev.det < res.alpha - 1e-7 || ev.pw.iter().any(|v| *v <= 0.0) {
            continue;
        }
        let dup = members.iter().any(|m| 0.5 * m.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum::<f64>() < CLUSTER_RADIUS);
        if !dup {
            members.push(p);
        }
    }
    if members.is_empty() {
        return Err(Error::NonConvergence("no maximizer passed the membership checks".into()));
    }
    let mut v_min = f64::INFINITY;
    let mut v_max = f64::NEG_INFINITY;
    let mut samples = Vec::with_capacity(members.len());
    for p in members {
        let v = conditional_information_variance(&p, w)?;
        v_min = v_min.min(v);
        v_max = v_max.max(v);
        samples.push(Dist::normalized(p)?);
    }
    let v_eps = if eps < 0.5 { v_min } else { v_max };
    Ok(DispersionResult { v_min, v_max, v_eps, pi_alpha_samples: samples })
}

/// Basic feasible solutions of `{P >= 0 : PW = Q, sum P H_x = H(Q) - C}`.
fn polytope_vertices(tab: &Tables, p_star: &[f64], c_alpha: f64) -> Vec<Vec<f64>> {
    let k = tab.k();
    let q = tab.pw(p_star);
    let hq: f64 = q.iter().filter(|v| **v > 0.0).map(|v| -v * v.ln()).sum();
    let ny = q.len();
    let rows = ny + 1;
    let b = DVector::from_iterator(rows, q.iter().copied().chain(std::iter::once(hq - c_alpha)));
    let mut out = Vec::new();
    for mask in 1u32..(1u32 << k) {
        let cols: Vec<usize> = (0..k).filter(|x| mask & (1 << x) != 0).collect();
        if cols.len() > rows {
            continue;
        }
        let a = DMatrix::from_fn(rows, cols.len(), |r, c| if r < ny { tab.rows[cols[c]][r] } else { tab.ent[cols[c]] });
        let svd = a.clone().svd(true, true);
        if svd.rank(1e-10) < cols.len() {
            continue;
        }
        let Ok(sol) = svd.solve(&b, 1e-12) else { continue };
        if sol.iter().any(|v| *v < -1e-10) || (&a * &sol - &b).amax() > 1e-9 {
            continue;
        }
        let mut p = vec![0.0; k];
        for (c, &x) in cols.iter().enumerate() {
            p[x] = sol[c].max(0.0);
        }
        normalize(&mut p);
        out.push(p);
    }
    out
}
