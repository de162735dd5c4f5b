//! Experiment configuration files (TOML) and the scenario grid they span.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sparsync::decoders::Alignment;
use sparsync::scheme::{BlockRule, Composition, GammaRule, Regime, BERRY_ESSEEN, DEFAULT_CODEBOOK_CAP, DEFAULT_MAX_WINDOW};

use crate::error::{HarnessError, Result};

/// A scalar or a list of scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Sampling rate as a function of the blocklength: `coef * n^exp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoSpec {
    pub coef: f64,
    pub exp: f64,
}

impl RhoSpec {
    pub fn constant(rho: f64) -> Self {
        Self { coef: rho, exp: 0.0 }
    }

    pub fn eval(&self, n: usize) -> f64 {
        self.coef * (n as f64).powf(self.exp)
    }
}

impl FromStr for RhoSpec {
    type Err = HarnessError;

    /// Accepts `0.5`, `n^-0.75` and `2*n^-0.75`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || HarnessError::Config(format!("bad rho `{s}`: expected `c`, `n^e` or `c*n^e`"));
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (coef, power) = match t.split_once('*') {
            Some((c, p)) => (c.parse::<f64>().map_err(|_| bad())?, Some(p)),
            None if t.starts_with('n') => (1.0, Some(t.as_str())),
            None => (t.parse::<f64>().map_err(|_| bad())?, None),
        };
        let exp = match power {
            None => 0.0,
            Some(p) => {
                let e = p.strip_prefix("n^").ok_or_else(bad)?;
                e.trim_matches(|c| c == '(' || c == ')').parse::<f64>().map_err(|_| bad())?
            }
        };
        if !(coef > 0.0 && coef.is_finite() && exp.is_finite()) {
            return Err(bad());
        }
        Ok(Self { coef, exp })
    }
}

impl fmt::Display for RhoSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0.0 {
            write!(f, "{}", self.coef)
        } else {
            write!(f, "{}*n^{}", self.coef, self.exp)
        }
    }
}

/// `ln M` as a number or `"normal"` for the scheme's own choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LnMSpec {
    Value(f64),
    Named(String),
}

/// Delay bound `d`: `"n"`, `"n+block"` or an explicit count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DelaySpec {
    Count(u64),
    Named(String),
}

/// Which message a trial sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MessageSpec {
    Fixed(usize),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Channel file, relative to the config file.
    pub channel: PathBuf,
    pub alpha: f64,
    pub n: OneOrMany<usize>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_regime")]
    pub regime: OneOrMany<String>,
    #[serde(default = "default_rho")]
    pub rho: OneOrMany<String>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    #[serde(default = "default_c_fraction")]
    pub c_fraction: f64,
    #[serde(default = "default_ln_m")]
    pub ln_m: LnMSpec,
    #[serde(default = "default_gamma_rule")]
    pub gamma_rule: String,
    #[serde(default = "default_block_rule")]
    pub block_rule: String,
    /// `g` in `Delta = g / rho` when `block_rule = "inverse_rate"`.
    pub block_g: Option<f64>,
    #[serde(default = "default_delay")]
    pub delay: DelaySpec,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_window")]
    pub max_window: u64,
    #[serde(default = "default_codebook_cap")]
    pub codebook_cap: u64,
    #[serde(default = "default_composition")]
    pub composition: String,
    #[serde(default = "default_alignment")]
    pub alignment: String,
    #[serde(default = "default_message")]
    pub message: MessageSpec,
    #[serde(default)]
    pub all_messages: bool,
    #[serde(default = "default_berry_esseen")]
    pub berry_esseen: f64,
    /// Also search for the largest feasible `ln M` in every row.
    #[serde(default)]
    pub bisect: bool,
    /// Trials per bisection probe; defaults to `trials`.
    pub bisect_trials: Option<u64>,
    #[serde(default = "default_bisect_probes")]
    pub bisect_probes: usize,

    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_eps() -> f64 {
    0.1
}
fn default_regime() -> OneOrMany<String> {
    OneOrMany::One("min_delay".into())
}
fn default_rho() -> OneOrMany<String> {
    OneOrMany::One("1".into())
}
fn default_delta() -> f64 {
    0.25
}
fn default_c_fraction() -> f64 {
    0.5
}
fn default_ln_m() -> LnMSpec {
    LnMSpec::Named("normal".into())
}
fn default_gamma_rule() -> String {
    "finite_length".into()
}
fn default_block_rule() -> String {
    "standard".into()
}
fn default_delay() -> DelaySpec {
    DelaySpec::Named("scheme".into())
}
fn default_trials() -> u64 {
    10_000
}
fn default_max_window() -> u64 {
    DEFAULT_MAX_WINDOW
}
fn default_codebook_cap() -> u64 {
    DEFAULT_CODEBOOK_CAP
}
fn default_composition() -> String {
    "iid".into()
}
fn default_alignment() -> String {
    "suffix".into()
}
fn default_message() -> MessageSpec {
    MessageSpec::Named("random".into())
}
fn default_berry_esseen() -> f64 {
    BERRY_ESSEEN
}
fn default_bisect_probes() -> usize {
    20
}

/// One point of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub index: usize,
    pub n: usize,
    pub regime: Regime,
    pub rho: RhoSpec,
    pub rho_label: String,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    pub fn channel_path(&self) -> PathBuf {
        self.base_dir.join(&self.channel)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(HarnessError::Config(m));
        if self.trials == 0 {
            return err("trials must be at least 1".into());
        }
        if self.n.to_vec().iter().any(|&n| n < 2) {
            return err("every n must be at least 2".into());
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return err(format!("eps = {} must lie in (0, 1)", self.eps));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return err(format!("alpha = {} must be finite and nonnegative", self.alpha));
        }
        for r in self.regime.to_vec() {
            r.parse::<Regime>()?;
        }
        for r in self.rho.to_vec() {
            let spec: RhoSpec = r.parse()?;
            for n in self.n.to_vec() {
                let v = spec.eval(n);
                if !(v > 0.0 && v <= 1.0) {
                    return err(format!("rho `{r}` evaluates to {v} at n = {n}, outside (0, 1]"));
                }
            }
        }
        if let LnMSpec::Named(s) = &self.ln_m {
            if s != "normal" {
                return err(format!("ln_m must be a number or \"normal\", got `{s}`"));
            }
        }
        if let DelaySpec::Named(s) = &self.delay {
            if !matches!(s.as_str(), "scheme" | "n" | "n+block") {
                return err(format!("delay must be a count, \"n\", \"n+block\" or \"scheme\", got `{s}`"));
            }
        }
        if let MessageSpec::Named(s) = &self.message {
            if s != "random" {
                return err(format!("message must be an index or \"random\", got `{s}`"));
            }
        }
        self.gamma_rule()?;
        self.block_rule()?;
        self.composition()?;
        self.alignment()?;
        if self.bisect_probes < 2 {
            return err("bisect_probes must be at least 2".into());
        }
        if !self.channel_path().is_file() {
            return err(format!("channel file {} not found", self.channel_path().display()));
        }
        Ok(())
    }

    pub fn gamma_rule(&self) -> Result<GammaRule> {
        match self.gamma_rule.as_str() {
            "finite_length" => Ok(GammaRule::FiniteLength),
            "asymptotic" => Ok(GammaRule::Asymptotic),
            s => Err(HarnessError::Config(format!("unknown gamma_rule `{s}`"))),
        }
    }

    pub fn block_rule(&self) -> Result<BlockRule> {
        match (self.block_rule.as_str(), self.block_g) {
            ("standard", _) => Ok(BlockRule::Standard),
            ("inverse_rate", Some(g)) if g > 0.0 => Ok(BlockRule::InverseRate { g }),
            ("inverse_rate", _) => Err(HarnessError::Config("inverse_rate needs a positive block_g".into())),
            (s, _) => Err(HarnessError::Config(format!("unknown block_rule `{s}`"))),
        }
    }

    pub fn composition(&self) -> Result<Composition> {
        match self.composition.as_str() {
            "iid" => Ok(Composition::Iid),
            "constant" => Ok(Composition::ConstantComposition),
            s => Err(HarnessError::Config(format!("unknown composition `{s}`"))),
        }
    }

    pub fn alignment(&self) -> Result<Alignment> {
        match self.alignment.as_str() {
            "suffix" => Ok(Alignment::Suffix),
            "prefix" => Ok(Alignment::Prefix),
            s => Err(HarnessError::Config(format!("unknown alignment `{s}`"))),
        }
    }

    /// Grid rows in the order n, then rho, then regime.
    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        let regimes: Vec<Regime> = self.regime.to_vec().iter().map(|r| r.parse()).collect::<sparsync::Result<_>>()?;
        let rhos: Vec<(RhoSpec, String)> =
            self.rho.to_vec().into_iter().map(|r| Ok((r.parse()?, r))).collect::<Result<_>>()?;
        let mut out = Vec::new();
        for n in self.n.to_vec() {
            for (rho, label) in &rhos {
                for &regime in &regimes {
                    out.push(Scenario { index: out.len(), n, regime, rho: *rho, rho_label: label.clone() });
                }
            }
        }
        Ok(out)
    }
}
