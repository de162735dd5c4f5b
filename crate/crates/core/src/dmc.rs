//! Channel and information-measure primitives.
//!
//! All measures are in nats. A [`Dmc`] stores every input row including the
//! idle symbol; input distributions may be given either over the non-idle
//! inputs ("information inputs", in index order with the idle row skipped) or
//! over the full input alphabet.

use std::fmt;
use std::ops::Deref;
use std::path::Path;

use crate::error::{Error, Result};

/// Probabilities below this are treated as exact zeros in log-domain math.
pub const PROB_FLOOR: f64 = 1e-300;

/// Row-sum tolerance for validated channels and distributions.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Row-sum tolerance accepted by the channel-file parser before renormalizing.
pub const PARSE_TOL: f64 = 1e-9;

/// `ln(num / den)` with explicit infinite sentinels.
///
/// `0/0` maps to `0` so that impossible symbols contribute nothing.
#[inline]
pub fn ln_ratio(num: f64, den: f64) -> f64 {
    match (num < PROB_FLOOR, den < PROB_FLOOR) {
        (true, true) => 0.0,
        (true, false) => f64::NEG_INFINITY,
        (false, true) => f64::INFINITY,
        (false, false) => (num / den).ln(),
    }
}

/// A probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Dist(Vec<f64>);

impl Dist {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        check_stochastic(&p, STOCHASTIC_TOL).map_err(Error::InvalidDistribution)?;
        Ok(Dist(p))
    }

    /// Rescales a nonnegative vector with positive mass to sum to one.
    pub fn normalized(mut p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidDistribution(
                "entries must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = p.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("zero total mass".into()));
        }
        p.iter_mut().for_each(|v| *v /= total);
        Ok(Dist(p))
    }

    pub fn uniform(k: usize) -> Self {
        Dist(vec![1.0 / k as f64; k])
    }

    pub fn point(k: usize, at: usize) -> Self {
        let mut p = vec![0.0; k];
        p[at] = 1.0;
        Dist(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Indices carrying mass above `tol`.
    pub fn support(&self, tol: f64) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i] > tol).collect()
    }

    pub fn total_variation(&self, other: &Dist) -> f64 {
        0.5 * self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

impl Deref for Dist {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn check_stochastic(p: &[f64], tol: f64) -> std::result::Result<(), String> {
    if p.is_empty() {
        return Err("empty vector".into());
    }
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(format!("entry {v} is negative or non-finite"));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(format!("sums to {sum}"));
    }
    Ok(())
}

/// Finite-alphabet channel `W(y|x)` with a designated idle input.
#[derive(Debug, Clone, PartialEq)]
pub struct Dmc {
    w: Vec<Vec<f64>>,
    star: usize,
    info: Vec<usize>,
}

/// Validates a row-per-input transition matrix and idle-symbol index.
pub fn validate_dmc(w: Vec<Vec<f64>>, star: usize) -> Result<Dmc> {
    let outputs = w.first().map_or(0, Vec::len);
    if w.is_empty() || outputs == 0 {
        return Err(Error::EmptyMatrix);
    }
    if star >= w.len() {
        return Err(Error::BadStarIndex { star, inputs: w.len() });
    }
    if w.len() < 2 {
        return Err(Error::NoInformationInputs);
    }
    for (row, r) in w.iter().enumerate() {
        if r.len() != outputs {
            return Err(Error::DimensionMismatch { expected: outputs, got: r.len() });
        }
        let sum: f64 = r.iter().sum();
        let min = r.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min >= 0.0) || (sum - 1.0).abs() > STOCHASTIC_TOL || !sum.is_finite() {
            return Err(Error::RowNotStochastic { row, sum, min });
        }
    }
    for output in 0..outputs {
        if w.iter().all(|r| r[output] <= 0.0) {
            return Err(Error::UnreachableOutput { output });
        }
    }
    let info = (0..w.len()).filter(|&x| x != star).collect();
    Ok(Dmc { w, star, info })
}

impl Dmc {
    pub fn new(w: Vec<Vec<f64>>, star: usize) -> Result<Self> {
        validate_dmc(w, star)
    }

    /// Information rows plus a noise row appended as the idle symbol.
    pub fn with_noise(rows: Vec<Vec<f64>>, noise: Vec<f64>) -> Result<Self> {
        let star = rows.len();
        let mut w = rows;
        w.push(noise);
        validate_dmc(w, star)
    }

    pub fn input_size(&self) -> usize {
        self.w.len()
    }

    pub fn output_size(&self) -> usize {
        self.w[0].len()
    }

    pub fn star(&self) -> usize {
        self.star
    }

    /// Number of non-idle inputs.
    pub fn info_size(&self) -> usize {
        self.info.len()
    }

    /// Raw input index of the `k`-th non-idle input.
    pub fn info_input(&self, k: usize) -> usize {
        self.info[k]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.w[x]
    }

    /// Row of the `k`-th non-idle input.
    pub fn info_row(&self, k: usize) -> &[f64] {
        &self.w[self.info[k]]
    }

    /// The pure-noise output law `W(.|star)`.
    pub fn noise(&self) -> &[f64] {
        &self.w[self.star]
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.w
    }

    /// Pairs each input row with its probability under `p`.
    fn weighted<'a>(&'a self, p: &[f64]) -> Result<Vec<(f64, &'a [f64])>> {
        if p.len() == self.info.len() {
            Ok(p.iter().zip(&self.info).map(|(&px, &x)| (px, self.w[x].as_slice())).collect())
        } else if p.len() == self.w.len() {
            Ok(p.iter().zip(&self.w).map(|(&px, r)| (px, r.as_slice())).collect())
        } else {
            Err(Error::DimensionMismatch { expected: self.info.len(), got: p.len() })
        }
    }

    /// Parses the plain-text channel format: a header line
    /// `inputs outputs star_index` followed by one whitespace-separated row per
    /// input. Rows within [`PARSE_TOL`] of stochastic are renormalized.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: hline, msg: format!("bad header: {e}") })?;
        let [inputs, outputs, star] = head[..] else {
            return Err(Error::Parse { line: hline, msg: "header must be `inputs outputs star_index`".into() });
        };
        let mut w = Vec::with_capacity(inputs);
        for (line, l) in lines {
            let row: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line, msg: format!("bad number: {e}") })?;
            if row.len() != outputs {
                return Err(Error::Parse { line, msg: format!("expected {outputs} entries, got {}", row.len()) });
            }
            check_stochastic(&row, PARSE_TOL).map_err(|msg| Error::Parse { line, msg })?;
            let sum: f64 = row.iter().sum();
            w.push(row.into_iter().map(|v| v / sum).collect());
        }
        if w.len() != inputs {
            return Err(Error::Parse { line: hline, msg: format!("expected {inputs} rows, got {}", w.len()) });
        }
        validate_dmc(w, star)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse { line: 0, msg: format!("{}: {e}", path.display()) })?;
        Self::parse(&text)
    }
}

impl fmt::Display for Dmc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {} {}", self.input_size(), self.output_size(), self.star)?;
        for row in &self.w {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// `PW(y) = sum_x P(x) W(y|x)`.
pub fn output_distribution(p: &[f64], w: &Dmc) -> Result<Dist> {
    let mut q = vec![0.0; w.output_size()];
    for (px, row) in w.weighted(p)? {
        if px > 0.0 {
            q.iter_mut().zip(row).for_each(|(qy, wy)| *qy += px * wy);
        }
    }
    Ok(Dist(q))
}

/// `D(P||Q)`, `+inf` when `P` puts mass outside the support of `Q`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(&pi, &qi)| pi * ln_ratio(pi, qi))
        .sum::<f64>()
        .max(0.0)
}

/// `V(P||Q)`, the variance of `ln(P/Q)` under `P`.
pub fn divergence_variance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.iter().zip(q).any(|(pi, qi)| *pi > 0.0 && *qi < PROB_FLOOR) {
        return Err(Error::SupportViolation);
    }
    let d = kl_divergence(p, q);
    Ok(p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(&pi, &qi)| pi * (ln_ratio(pi, qi) - d).powi(2))
        .sum())
}

/// `I(P,W)`.
pub fn mutual_information(p: &[f64], w: &Dmc) -> Result<f64> {
    let pw = output_distribution(p, w)?;
    Ok(w.weighted(p)?
        .into_iter()
        .filter(|(px, _)| *px > 0.0)
        .map(|(px, row)| px * kl_divergence(row, &pw))
        .sum::<f64>()
        .max(0.0))
}

/// `V(P,W) = sum_x P(x) V(W(.|x) || PW)`.
pub fn conditional_information_variance(p: &[f64], w: &Dmc) -> Result<f64> {
    let pw = output_distribution(p, w)?;
    let mut v = 0.0;
    for (px, row) in w.weighted(p)? {
        if px > 0.0 {
            v += px * divergence_variance(row, &pw)?;
        }
    }
    Ok(v)
}

/// `V(P x W || P x PW)`: the unconditional variance of the information
/// density under the joint law.
pub fn unconditional_information_variance(p: &[f64], w: &Dmc) -> Result<f64> {
    let pw = output_distribution(p, w)?;
    let info = mutual_information(p, w)?;
    let mut v = 0.0;
    for (px, row) in w.weighted(p)? {
        if px > 0.0 {
            for (&wy, &qy) in row.iter().zip(pw.iter()) {
                if wy > 0.0 {
                    v += px * wy * (ln_ratio(wy, qy) - info).powi(2);
                }
            }
        }
    }
    Ok(v)
}

/// Variance of `ln(PW/W(.|star))` under `PW`.
pub fn noise_llr_variance(p: &[f64], w: &Dmc) -> Result<f64> {
    let pw = output_distribution(p, w)?;
    divergence_variance(&pw, w.noise())
}

/// `D(PW || W(.|star))`.
pub fn detection_divergence(p: &[f64], w: &Dmc) -> Result<f64> {
    Ok(kl_divergence(&output_distribution(p, w)?, w.noise()))
}

/// Running log-likelihood sum with exact bookkeeping of infinite increments,
/// so sliding windows can subtract them again.
///
/// A window containing any `-inf` increment evaluates to `-inf`, even if it
/// also contains `+inf`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LlrState {
    finite: f64,
    pos_inf: u32,
    neg_inf: u32,
    length: usize,
}

impl LlrState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accumulated(&self) -> f64 {
        if self.neg_inf > 0 {
            f64::NEG_INFINITY
        } else if self.pos_inf > 0 {
            f64::INFINITY
        } else {
            self.finite
        }
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn push(&mut self, inc: f64) {
        if inc == f64::INFINITY {
            self.pos_inf += 1;
        } else if inc == f64::NEG_INFINITY {
            self.neg_inf += 1;
        } else {
            self.finite += inc;
        }
        self.length += 1;
    }

    /// Removes an increment previously pushed.
    pub fn pop(&mut self, inc: f64) {
        if inc == f64::INFINITY {
            self.pos_inf -= 1;
        } else if inc == f64::NEG_INFINITY {
            self.neg_inf -= 1;
        } else {
            self.finite -= inc;
        }
        self.length -= 1;
    }

    pub fn combine(&self, other: &LlrState) -> LlrState {
        LlrState {
            finite: self.finite + other.finite,
            pos_inf: self.pos_inf + other.pos_inf,
            neg_inf: self.neg_inf + other.neg_inf,
            length: self.length + other.length,
        }
    }

    pub fn from_increments(incs: impl IntoIterator<Item = f64>) -> Self {
        let mut s = Self::new();
        incs.into_iter().for_each(|i| s.push(i));
        s
    }
}

/// Appends one output symbol to the noise-vs-signal statistic `r(Y^k)`.
pub fn noise_llr_step(state: LlrState, y: usize, p: &[f64], w: &Dmc) -> Result<LlrState> {
    let pw = output_distribution(p, w)?;
    let mut next = state;
    next.push(ln_ratio(pw[y], w.noise()[y]));
    Ok(next)
}

/// `i(x^k; y^k) = sum_k ln(W(y_k|x_k)/PW(y_k))` with `x` given as
/// information-input indices.
pub fn information_density(x: &[usize], y: &[usize], p: &[f64], w: &Dmc) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    let pw = output_distribution(p, w)?;
    let mut s = LlrState::new();
    for (&xk, &yk) in x.iter().zip(y) {
        s.push(ln_ratio(w.info_row(xk)[yk], pw[yk]));
    }
    Ok(s.accumulated())
}

/// Per-symbol log-likelihood tables for one input distribution.
#[derive(Debug, Clone)]
pub struct LogLikelihoods {
    /// `ln(PW(y)/W(y|star))`
    pub noise: Vec<f64>,
    /// `ln(W(y|x)/PW(y))`, indexed `[x][y]` over information inputs.
    pub info: Vec<Vec<f64>>,
    /// Largest finite per-symbol information density.
    pub max_info: f64,
}

impl LogLikelihoods {
    pub fn new(p: &[f64], w: &Dmc) -> Result<Self> {
        let pw = output_distribution(p, w)?;
        let noise = pw.iter().zip(w.noise()).map(|(&a, &b)| ln_ratio(a, b)).collect();
        let info: Vec<Vec<f64>> = (0..w.info_size())
            .map(|k| w.info_row(k).iter().zip(pw.iter()).map(|(&a, &b)| ln_ratio(a, b)).collect())
            .collect();
        let max_info = info
            .iter()
            .flatten()
            .cloned()
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { noise, info, max_info })
    }
}

/// Standard Gaussian tail `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse of [`q_function`] on `(0, 1)`, by safeguarded Newton iteration.
pub fn q_inverse(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::DomainError(eps));
    }
    // 1 - eps is exact here, and the upper tail is where Q is accurate.
    if eps > 0.5 {
        return q_inverse(1.0 - eps).map(|x| -x);
    }
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    let mut x = 0.0_f64;
    for _ in 0..200 {
        let fx = q_function(x) - eps;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut next = x + fx / density;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-12 * x.abs().max(1.0) || hi - lo <= 1e-15 {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}
