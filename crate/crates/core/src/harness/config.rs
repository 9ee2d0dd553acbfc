//! Experiment specifications and their TOML file format.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::ensemble::{AmplitudeMode, Basis, NetworkConfig, PowerModel};
use crate::error::{param, Error, Result};
use crate::recovery::{StepRule, NOISE_SLACK};
use crate::spectra::MAX_SUPPORT;
use crate::stochastic::TruncatedGaussianParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MseSweep,
    HomogVsInhomog,
    EigCdf,
    TailScaling,
    DelayCurve,
    LdVerify,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::MseSweep,
        ExperimentKind::HomogVsInhomog,
        ExperimentKind::EigCdf,
        ExperimentKind::TailScaling,
        ExperimentKind::DelayCurve,
        ExperimentKind::LdVerify,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::MseSweep => "mse-sweep",
            ExperimentKind::HomogVsInhomog => "homog-vs-inhomog",
            ExperimentKind::EigCdf => "eig-cdf",
            ExperimentKind::TailScaling => "tail-scaling",
            ExperimentKind::DelayCurve => "delay-curve",
            ExperimentKind::LdVerify => "ld-verify",
        }
    }

    /// Trials per grid point; for the tail kinds this is the adaptive cap.
    pub fn default_trials(self) -> u64 {
        match self {
            ExperimentKind::MseSweep | ExperimentKind::HomogVsInhomog => 200,
            ExperimentKind::EigCdf => 2000,
            ExperimentKind::TailScaling | ExperimentKind::LdVerify => 100_000,
            ExperimentKind::DelayCurve => 1,
        }
    }

    pub fn is_tail(self) -> bool {
        matches!(self, ExperimentKind::TailScaling | ExperimentKind::LdVerify)
    }

    fn axes(self) -> &'static [Axis] {
        use Axis::*;
        match self {
            ExperimentKind::MseSweep | ExperimentKind::HomogVsInhomog => &[M, K, SnrDb],
            ExperimentKind::EigCdf => &[D, K, Supports],
            ExperimentKind::TailScaling | ExperimentKind::LdVerify => &[D, N, K, T, Supports],
            ExperimentKind::DelayCurve => &[K, SnrDb, Epsilon],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.as_str()).collect();
                param(format!("unknown experiment kind {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    M,
    K,
    SnrDb,
    D,
    N,
    T,
    Epsilon,
    Supports,
}

impl Axis {
    fn key(self) -> &'static str {
        match self {
            Axis::M => "m",
            Axis::K => "k",
            Axis::SnrDb => "snr_db",
            Axis::D => "d",
            Axis::N => "n",
            Axis::T => "t",
            Axis::Epsilon => "epsilon",
            Axis::Supports => "supports",
        }
    }
}

/// Receive-power model of the network section.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum PowerSpec {
    /// `γⱼ ~ N_tr(μ, (μ/d)²)`.
    TruncatedGaussian { mu: f64, d: f64 },
    /// Every `γⱼ` equal.
    Homogeneous { gamma: f64 },
    /// Explicit `γ` vector.
    Fixed { gamma: Vec<f64> },
    /// Explicit `(b, ν, E)` per sensor.
    Explicit { b: Vec<f64>, nu: Vec<f64>, energy: Vec<f64> },
}

#[derive(Debug, Clone, Serialize)]
pub struct NetworkSpec {
    pub n: usize,
    pub p: f64,
    #[serde(serialize_with = "serialize_basis")]
    pub basis: Basis,
    pub power: PowerSpec,
}

fn serialize_basis<S: Serializer>(basis: &Basis, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(basis.name())
}

impl NetworkSpec {
    /// Network configuration at size `n` and sparsity `k`; `d` overrides the
    /// homogeneity of a truncated-Gaussian model. Noise is set per grid point
    /// by the runners, so `σ²` is zero here.
    pub fn config(&self, n: usize, k: usize, d: Option<f64>) -> Result<NetworkConfig> {
        let power_model = match &self.power {
            PowerSpec::TruncatedGaussian { mu, d: d0 } => {
                PowerModel::Stochastic(TruncatedGaussianParams::from_homogeneity(*mu, d.unwrap_or(*d0))?)
            }
            _ if d.is_some() => return Err(param("a homogeneity sweep needs the truncated-gaussian power model")),
            PowerSpec::Homogeneous { gamma } => PowerModel::homogeneous(n, *gamma),
            PowerSpec::Fixed { gamma } => PowerModel::Fixed(gamma.clone()),
            PowerSpec::Explicit { b, nu, energy } => {
                PowerModel::Explicit { b: b.clone(), nu: nu.clone(), energy: energy.clone() }
            }
        };
        NetworkConfig::new(n, k, self.p, 0.0, self.basis.clone(), power_model)
    }

    /// Homogeneity `d` of the configured model, if it has one.
    pub fn homogeneity(&self) -> Option<f64> {
        match self.power {
            PowerSpec::TruncatedGaussian { d, .. } => Some(d),
            _ => None,
        }
    }
}

/// Parameter grid. Axes a kind does not use are empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepGrid {
    pub m: Vec<usize>,
    pub k: Vec<usize>,
    /// Average SNR in dB; `inf` means noiseless.
    pub snr_db: Vec<f64>,
    pub d: Vec<f64>,
    pub n: Vec<usize>,
    /// Tail thresholds: events `ρ_max > 1 + t`.
    pub t: Vec<f64>,
    pub epsilon: Vec<f64>,
    /// Sampled supports per realization, for the spectrum kinds.
    pub supports: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// `η = slack · √m · σ̃`.
    pub noise_slack: f64,
    #[serde(serialize_with = "serialize_step_rule")]
    pub step_rule: StepRule,
    /// Runs whose non-converged fraction exceeds this fail with exit code 3.
    pub max_nonconverged_fraction: f64,
}

fn serialize_step_rule<S: Serializer>(rule: &StepRule, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(step_rule_name(*rule))
}

fn step_rule_name(rule: StepRule) -> &'static str {
    match rule {
        StepRule::Backtracking => "backtracking",
        StepRule::FixedLipschitz => "fixed",
    }
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tolerance: 1e-7,
            max_iterations: 50_000,
            noise_slack: NOISE_SLACK,
            step_rule: StepRule::Backtracking,
            max_nonconverged_fraction: 0.1,
        }
    }
}

/// Adaptive stopping for tail probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailSettings {
    /// Stop a grid point once this many exceedances are seen.
    pub target_exceedances: u64,
    /// Points with fewer exceedances are flagged low-confidence.
    pub min_exceedances: u64,
    /// Trials per adaptive batch.
    pub batch: u64,
    /// Fraction of the largest `n` values used in the slope fit.
    pub fit_fraction: f64,
    /// Slack on the normalized log-tail in the large-deviation check.
    pub slack: f64,
}

impl Default for TailSettings {
    fn default() -> Self {
        TailSettings { target_exceedances: 50, min_exceedances: 10, batch: 1000, fit_fraction: 0.5, slack: 0.02 }
    }
}

/// Spectrum and constants for the delay curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSettings {
    pub rho_max: f64,
    pub rho_min: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for BoundSettings {
    fn default() -> Self {
        BoundSettings { rho_max: 1.09, rho_min: 0.88, c1: 1.0, c2: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub network: NetworkSpec,
    pub sweep: SweepGrid,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(serialize_with = "serialize_amplitude")]
    pub amplitude: AmplitudeMode,
    pub solver: SolverSettings,
    pub tail: TailSettings,
    pub bounds: BoundSettings,
    /// Worker threads; zero uses every core. Does not affect results.
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub output_path: Option<PathBuf>,
}

fn serialize_amplitude<S: Serializer>(mode: &AmplitudeMode, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(match mode {
        AmplitudeMode::UnitNorm => "unit-norm",
        AmplitudeMode::UnitModulus => "unit-modulus",
    })
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        let spec = Resolver { text }.resolve(raw)?;
        spec.validate().map_err(|e| Error::Config { line: 0, message: e.to_string() })?;
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Checks the invariants of a spec built in code.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(param("trials must be at least 1"));
        }
        let s = &self.sweep;
        for axis in self.kind.axes() {
            let empty = match axis {
                Axis::M => s.m.is_empty(),
                Axis::K => s.k.is_empty(),
                Axis::SnrDb => s.snr_db.is_empty(),
                Axis::D => self.d_values().is_empty(),
                Axis::N => self.n_values().is_empty(),
                Axis::T => s.t.is_empty(),
                Axis::Epsilon => s.epsilon.is_empty(),
                Axis::Supports => s.supports == 0,
            };
            if empty {
                return Err(param(format!("sweep.{} must be non-empty for {}", axis.key(), self.kind)));
            }
        }
        if s.m.iter().any(|m| *m == 0) {
            return Err(param("measurement counts must be positive"));
        }
        if s.snr_db.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(param("SNR values must be numbers or +inf"));
        }
        for (name, values) in [("d", &s.d), ("t", &s.t), ("epsilon", &s.epsilon)] {
            if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(param(format!("sweep.{name} values must be positive and finite")));
            }
        }
        let ns: Vec<usize> = if s.n.is_empty() { vec![self.network.n] } else { s.n.clone() };
        for &n in &ns {
            for &k in &s.k {
                if k == 0 || k >= n / 2 {
                    return Err(param(format!("sparsity must satisfy 1 <= k < floor(n/2), got k = {k}, n = {n}")));
                }
                if matches!(self.kind, ExperimentKind::EigCdf) || self.kind.is_tail() {
                    if k > MAX_SUPPORT {
                        return Err(param(format!("spectrum kinds support k <= {MAX_SUPPORT}")));
                    }
                }
            }
            if !s.d.is_empty() && self.network.homogeneity().is_none() {
                return Err(param("a homogeneity sweep needs the truncated-gaussian power model"));
            }
        }
        if self.kind != ExperimentKind::DelayCurve {
            for &n in &ns {
                self.network.config(n, s.k[0], None)?;
            }
        } else if !(self.network.p > 0.0 && self.network.p <= 1.0) {
            return Err(param("transmission probability must lie in (0, 1]"));
        }
        let sv = &self.solver;
        if !(sv.tolerance > 0.0) || sv.max_iterations == 0 || !(sv.noise_slack > 0.0) {
            return Err(param("solver tolerance, iteration budget and noise slack must be positive"));
        }
        if !(0.0..=1.0).contains(&sv.max_nonconverged_fraction) {
            return Err(param("max_nonconverged_fraction must lie in [0, 1]"));
        }
        let t = &self.tail;
        if t.target_exceedances == 0 || t.batch == 0 || !(t.fit_fraction > 0.0 && t.fit_fraction <= 1.0) || !(t.slack >= 0.0) {
            return Err(param("tail settings must be positive with fit_fraction in (0, 1]"));
        }
        let b = &self.bounds;
        if !(b.rho_max >= 1.0 && b.rho_min > 0.0 && b.rho_min <= 1.0 && b.c1 > 0.0 && b.c2 > 0.0) {
            return Err(param("bounds need rho_max >= 1, 0 < rho_min <= 1 and positive constants"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form. Worker count and output path are
    /// excluded because they do not affect results.
    pub fn spec_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Grid of `n` values, falling back to the network size.
    pub fn n_values(&self) -> Vec<usize> {
        if self.sweep.n.is_empty() {
            vec![self.network.n]
        } else {
            self.sweep.n.clone()
        }
    }

    /// Grid of `d` values, falling back to the network model.
    pub fn d_values(&self) -> Vec<f64> {
        if self.sweep.d.is_empty() {
            self.network.homogeneity().into_iter().collect()
        } else {
            self.sweep.d.clone()
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text.as_bytes()[..offset.min(text.len())].iter().filter(|b| **b == b'\n').count() + 1
}

/// Integer or float TOML value read as `f64`.
#[derive(Debug, Clone, Copy)]
struct Num(f64);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Num, E> {
                Ok(Num(v as f64))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IntGrid {
    List(Vec<i64>),
    Range(IntRange),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IntRange {
    start: i64,
    stop: i64,
    step: Option<i64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FloatGrid {
    List(Vec<Num>),
    Range(FloatRange),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FloatRange {
    start: Num,
    stop: Num,
    points: i64,
    scale: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    kind: Spanned<String>,
    master_seed: Spanned<i64>,
    trials: Option<Spanned<i64>>,
    workers: Option<Spanned<i64>>,
    output: Option<String>,
    amplitude: Option<Spanned<String>>,
    network: Spanned<RawNetwork>,
    sweep: Option<RawSweep>,
    solver: Option<RawSolver>,
    tail: Option<RawTail>,
    bounds: Option<RawBounds>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    n: Option<Spanned<i64>>,
    p: Spanned<Num>,
    basis: Option<Spanned<String>>,
    power: Spanned<RawPower>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPower {
    model: Spanned<String>,
    mu: Option<Spanned<Num>>,
    d: Option<Spanned<Num>>,
    omega: Option<Spanned<Num>>,
    gamma: Option<Spanned<toml::Value>>,
    b: Option<Spanned<Vec<Num>>>,
    nu: Option<Spanned<Vec<Num>>>,
    energy: Option<Spanned<Vec<Num>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    m: Option<Spanned<IntGrid>>,
    k: Option<Spanned<IntGrid>>,
    snr_db: Option<Spanned<FloatGrid>>,
    d: Option<Spanned<FloatGrid>>,
    n: Option<Spanned<IntGrid>>,
    t: Option<Spanned<FloatGrid>>,
    epsilon: Option<Spanned<FloatGrid>>,
    supports: Option<Spanned<i64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tolerance: Option<Spanned<Num>>,
    max_iterations: Option<Spanned<i64>>,
    noise_slack: Option<Spanned<Num>>,
    step_rule: Option<Spanned<String>>,
    max_nonconverged_fraction: Option<Spanned<Num>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTail {
    target_exceedances: Option<Spanned<i64>>,
    min_exceedances: Option<Spanned<i64>>,
    batch: Option<Spanned<i64>>,
    fit_fraction: Option<Spanned<Num>>,
    slack: Option<Spanned<Num>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBounds {
    rho_max: Option<Spanned<Num>>,
    rho_min: Option<Spanned<Num>>,
    c1: Option<Spanned<Num>>,
    c2: Option<Spanned<Num>>,
}

struct Resolver<'a> {
    text: &'a str,
}

impl Resolver<'_> {
    fn err<T>(&self, at: &Spanned<T>, message: impl Into<String>) -> Error {
        Error::Config { line: line_of(self.text, at.span().start), message: message.into() }
    }

    fn count(&self, v: &Spanned<i64>, name: &str, min: i64) -> Result<u64> {
        let x = *v.get_ref();
        if x < min {
            return Err(self.err(v, format!("{name} must be >= {min}, got {x}")));
        }
        Ok(x as u64)
    }

    fn positive(&self, v: &Spanned<Num>, name: &str) -> Result<f64> {
        let x = v.get_ref().0;
        if !(x > 0.0 && x.is_finite()) {
            return Err(self.err(v, format!("{name} must be positive and finite, got {x}")));
        }
        Ok(x)
    }

    fn ints(&self, grid: &Spanned<IntGrid>, name: &str, min: i64) -> Result<Vec<usize>> {
        let values = match grid.get_ref() {
            IntGrid::List(v) => v.clone(),
            IntGrid::Range(r) => {
                let step = r.step.unwrap_or(1);
                if step <= 0 || r.stop < r.start {
                    return Err(self.err(grid, format!("{name} range needs start <= stop and a positive step")));
                }
                (r.start..=r.stop).step_by(step as usize).collect()
            }
        };
        if values.is_empty() {
            return Err(self.err(grid, format!("{name} grid is empty")));
        }
        if let Some(bad) = values.iter().find(|v| **v < min) {
            return Err(self.err(grid, format!("{name} values must be >= {min}, got {bad}")));
        }
        Ok(values.into_iter().map(|v| v as usize).collect())
    }

    fn floats(&self, grid: &Spanned<FloatGrid>, name: &str) -> Result<Vec<f64>> {
        let values = match grid.get_ref() {
            FloatGrid::List(v) => v.iter().map(|x| x.0).collect::<Vec<_>>(),
            FloatGrid::Range(r) => {
                let (a, b) = (r.start.0, r.stop.0);
                if r.points < 1 || !(a.is_finite() && b.is_finite()) {
                    return Err(self.err(grid, format!("{name} range needs finite ends and points >= 1")));
                }
                let count = r.points as usize;
                let frac = |i: usize| if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
                match r.scale.as_deref().unwrap_or("linear") {
                    "linear" => (0..count).map(|i| a + (b - a) * frac(i)).collect(),
                    "log" => {
                        if !(a > 0.0 && b > 0.0) {
                            return Err(self.err(grid, format!("{name} log range needs positive ends")));
                        }
                        let (la, lb) = (a.log10(), b.log10());
                        let mut v: Vec<f64> = (0..count).map(|i| 10f64.powf(la + (lb - la) * frac(i))).collect();
                        v[0] = a;
                        v[count - 1] = b;
                        v
                    }
                    other => return Err(self.err(grid, format!("unknown range scale {other:?}; expected linear or log"))),
                }
            }
        };
        if values.is_empty() {
            return Err(self.err(grid, format!("{name} grid is empty")));
        }
        Ok(values)
    }

    fn finite_list(&self, v: &Spanned<Vec<Num>>, name: &str) -> Result<Vec<f64>> {
        let out: Vec<f64> = v.get_ref().iter().map(|x| x.0).collect();
        if out.iter().any(|x| !x.is_finite()) {
            return Err(self.err(v, format!("{name} entries must be finite")));
        }
        Ok(out)
    }

    fn resolve(&self, raw: RawSpec) -> Result<ExperimentSpec> {
        let kind: ExperimentKind = raw.kind.get_ref().parse().map_err(|e: Error| self.err(&raw.kind, inner(e)))?;
        if *raw.master_seed.get_ref() < 0 {
            return Err(self.err(&raw.master_seed, "master_seed must be a non-negative integer"));
        }
        let master_seed = *raw.master_seed.get_ref() as u64;
        let trials = match &raw.trials {
            Some(t) => self.count(t, "trials", 1)?,
            None => kind.default_trials(),
        };
        let workers = match &raw.workers {
            Some(w) => self.count(w, "workers", 0)? as usize,
            None => 0,
        };
        let amplitude = match &raw.amplitude {
            Some(a) => a.get_ref().parse().map_err(|e: Error| self.err(a, inner(e)))?,
            None => AmplitudeMode::UnitNorm,
        };

        let sweep_raw = raw.sweep.unwrap_or(RawSweep {
            m: None,
            k: None,
            snr_db: None,
            d: None,
            n: None,
            t: None,
            epsilon: None,
            supports: None,
        });
        let used = kind.axes();
        let mut sweep = SweepGrid::default();
        macro_rules! axis {
            ($field:ident, $axis:expr, $parse:expr) => {
                if let Some(v) = &sweep_raw.$field {
                    if !used.contains(&$axis) {
                        return Err(self.err(v, format!("sweep.{} is not used by {kind}", $axis.key())));
                    }
                    sweep.$field = $parse(v)?;
                }
            };
        }
        axis!(m, Axis::M, |v| self.ints(v, "m", 1));
        axis!(k, Axis::K, |v| self.ints(v, "k", 1));
        axis!(n, Axis::N, |v| self.ints(v, "n", 2));
        axis!(snr_db, Axis::SnrDb, |v| self.floats(v, "snr_db"));
        axis!(d, Axis::D, |v| self.floats(v, "d"));
        axis!(t, Axis::T, |v| self.floats(v, "t"));
        axis!(epsilon, Axis::Epsilon, |v| self.floats(v, "epsilon"));
        if let Some(s) = &sweep_raw.supports {
            if !used.contains(&Axis::Supports) {
                return Err(self.err(s, format!("sweep.supports is not used by {kind}")));
            }
            sweep.supports = self.count(s, "supports", 1)?;
        } else if used.contains(&Axis::Supports) {
            sweep.supports = if kind == ExperimentKind::EigCdf { 1000 } else { 1 };
        }

        let network = self.network(raw.network, &sweep)?;
        for (field, values) in [("d", &sweep.d), ("t", &sweep.t), ("epsilon", &sweep.epsilon)] {
            if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                let span = match field {
                    "d" => sweep_raw.d.as_ref().map(|s| s.span()),
                    "t" => sweep_raw.t.as_ref().map(|s| s.span()),
                    _ => sweep_raw.epsilon.as_ref().map(|s| s.span()),
                };
                let line = span.map(|s| line_of(self.text, s.start)).unwrap_or(0);
                return Err(Error::Config { line, message: format!("sweep.{field} values must be positive and finite") });
            }
        }
        if let Some(ks) = &sweep_raw.k {
            let ns = if sweep.n.is_empty() { vec![network.n] } else { sweep.n.clone() };
            for &n in &ns {
                if let Some(k) = sweep.k.iter().find(|k| **k >= n / 2) {
                    return Err(self.err(ks, format!("sparsity must satisfy k < floor(n/2), got k = {k}, n = {n}")));
                }
            }
        }

        let mut solver = SolverSettings::default();
        if let Some(s) = raw.solver {
            if let Some(v) = &s.tolerance {
                solver.tolerance = self.positive(v, "tolerance")?;
            }
            if let Some(v) = &s.max_iterations {
                solver.max_iterations = self.count(v, "max_iterations", 1)? as usize;
            }
            if let Some(v) = &s.noise_slack {
                solver.noise_slack = self.positive(v, "noise_slack")?;
            }
            if let Some(v) = &s.step_rule {
                solver.step_rule = match v.get_ref().as_str() {
                    "backtracking" => StepRule::Backtracking,
                    "fixed" => StepRule::FixedLipschitz,
                    other => return Err(self.err(v, format!("unknown step_rule {other:?}; expected backtracking or fixed"))),
                };
            }
            if let Some(v) = &s.max_nonconverged_fraction {
                let x = v.get_ref().0;
                if !(0.0..=1.0).contains(&x) {
                    return Err(self.err(v, "max_nonconverged_fraction must lie in [0, 1]"));
                }
                solver.max_nonconverged_fraction = x;
            }
        }

        let mut tail = TailSettings::default();
        if let Some(t) = raw.tail {
            if let Some(v) = &t.target_exceedances {
                tail.target_exceedances = self.count(v, "target_exceedances", 1)?;
            }
            if let Some(v) = &t.min_exceedances {
                tail.min_exceedances = self.count(v, "min_exceedances", 0)?;
            }
            if let Some(v) = &t.batch {
                tail.batch = self.count(v, "batch", 1)?;
            }
            if let Some(v) = &t.fit_fraction {
                let x = self.positive(v, "fit_fraction")?;
                if x > 1.0 {
                    return Err(self.err(v, "fit_fraction must lie in (0, 1]"));
                }
                tail.fit_fraction = x;
            }
            if let Some(v) = &t.slack {
                let x = v.get_ref().0;
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(self.err(v, "slack must be finite and >= 0"));
                }
                tail.slack = x;
            }
        }

        let mut bounds = BoundSettings::default();
        if let Some(b) = raw.bounds {
            if let Some(v) = &b.rho_max {
                bounds.rho_max = self.positive(v, "rho_max")?;
                if bounds.rho_max < 1.0 {
                    return Err(self.err(v, "rho_max must be >= 1"));
                }
            }
            if let Some(v) = &b.rho_min {
                bounds.rho_min = self.positive(v, "rho_min")?;
                if bounds.rho_min > 1.0 {
                    return Err(self.err(v, "rho_min must be <= 1"));
                }
            }
            if let Some(v) = &b.c1 {
                bounds.c1 = self.positive(v, "c1")?;
            }
            if let Some(v) = &b.c2 {
                bounds.c2 = self.positive(v, "c2")?;
            }
        }

        Ok(ExperimentSpec {
            kind,
            network,
            sweep,
            trials,
            master_seed,
            amplitude,
            solver,
            tail,
            bounds,
            workers,
            output_path: raw.output.map(PathBuf::from),
        })
    }

    fn network(&self, raw: Spanned<RawNetwork>, sweep: &SweepGrid) -> Result<NetworkSpec> {
        let net = raw.get_ref();
        let n = match &net.n {
            Some(v) => self.count(v, "n", 2)? as usize,
            None => match sweep.n.iter().max() {
                Some(n) => *n,
                None => return Err(self.err(&raw, "network.n is required unless sweep.n is given")),
            },
        };
        let p = net.p.get_ref().0;
        if !(p > 0.0 && p <= 1.0) {
            return Err(self.err(&net.p, format!("transmission probability must lie in (0, 1], got {p}")));
        }
        let basis = match &net.basis {
            Some(b) => b.get_ref().parse().map_err(|e: Error| self.err(b, e.to_string()))?,
            None => Basis::Dft,
        };
        let pw = net.power.get_ref();
        let given: Vec<(&str, bool)> = vec![
            ("mu", pw.mu.is_some()),
            ("d", pw.d.is_some()),
            ("omega", pw.omega.is_some()),
            ("gamma", pw.gamma.is_some()),
            ("b", pw.b.is_some()),
            ("nu", pw.nu.is_some()),
            ("energy", pw.energy.is_some()),
        ];
        let allow = |keys: &[&str]| -> Result<()> {
            if let Some((k, _)) = given.iter().find(|(k, set)| *set && !keys.contains(k)) {
                return Err(self.err(&net.power, format!("network.power.{k} is not used by model {:?}", pw.model.get_ref())));
            }
            Ok(())
        };
        let power = match pw.model.get_ref().as_str() {
            "truncated-gaussian" => {
                allow(&["mu", "d", "omega"])?;
                let mu_s = pw.mu.as_ref().ok_or_else(|| self.err(&net.power, "truncated-gaussian needs mu"))?;
                let mu = self.positive(mu_s, "mu")?;
                let d = match (&pw.d, &pw.omega) {
                    (Some(d), None) => self.positive(d, "d")?,
                    (None, Some(w)) => mu / self.positive(w, "omega")?,
                    (None, None) if !sweep.d.is_empty() => sweep.d[0],
                    (None, None) => return Err(self.err(&net.power, "truncated-gaussian needs d or omega")),
                    (Some(d), Some(_)) => return Err(self.err(d, "give either d or omega, not both")),
                };
                PowerSpec::TruncatedGaussian { mu, d }
            }
            "homogeneous" => {
                allow(&["gamma"])?;
                let g = pw.gamma.as_ref().ok_or_else(|| self.err(&net.power, "homogeneous needs gamma"))?;
                let x = match g.get_ref() {
                    toml::Value::Float(f) => *f,
                    toml::Value::Integer(i) => *i as f64,
                    _ => return Err(self.err(g, "homogeneous gamma must be a number")),
                };
                if !(x > 0.0 && x.is_finite()) {
                    return Err(self.err(g, "gamma must be positive and finite"));
                }
                PowerSpec::Homogeneous { gamma: x }
            }
            "fixed" => {
                allow(&["gamma"])?;
                let g = pw.gamma.as_ref().ok_or_else(|| self.err(&net.power, "fixed needs a gamma array"))?;
                let arr = match g.get_ref() {
                    toml::Value::Array(a) => a,
                    _ => return Err(self.err(g, "fixed gamma must be an array")),
                };
                let mut gamma = Vec::with_capacity(arr.len());
                for v in arr {
                    let x = match v {
                        toml::Value::Float(f) => *f,
                        toml::Value::Integer(i) => *i as f64,
                        _ => return Err(self.err(g, "gamma entries must be numbers")),
                    };
                    if !(x >= 0.0 && x.is_finite()) {
                        return Err(self.err(g, "gamma entries must be finite and >= 0"));
                    }
                    gamma.push(x);
                }
                if gamma.len() != n {
                    return Err(self.err(g, format!("gamma has {} entries, expected n = {n}", gamma.len())));
                }
                PowerSpec::Fixed { gamma }
            }
            "explicit" => {
                allow(&["b", "nu", "energy"])?;
                let get = |v: &Option<Spanned<Vec<Num>>>, name: &str| -> Result<Vec<f64>> {
                    let s = v.as_ref().ok_or_else(|| self.err(&net.power, format!("explicit needs {name}")))?;
                    let out = self.finite_list(s, name)?;
                    if out.len() != n {
                        return Err(self.err(s, format!("{name} has {} entries, expected n = {n}", out.len())));
                    }
                    Ok(out)
                };
                let b = get(&pw.b, "b")?;
                let nu = get(&pw.nu, "nu")?;
                let energy = get(&pw.energy, "energy")?;
                if let Some(j) = (0..n).find(|&j| p * b[j] > energy[j]) {
                    return Err(self.err(
                        pw.b.as_ref().expect("checked above"),
                        format!("sensor {j} violates p*b <= E: {} > {}", p * b[j], energy[j]),
                    ));
                }
                PowerSpec::Explicit { b, nu, energy }
            }
            other => {
                return Err(self.err(
                    &pw.model,
                    format!("unknown power model {other:?}; expected truncated-gaussian, homogeneous, fixed or explicit"),
                ))
            }
        };
        if !sweep.d.is_empty() && !matches!(power, PowerSpec::TruncatedGaussian { .. }) {
            return Err(self.err(&net.power, "a homogeneity sweep needs the truncated-gaussian power model"));
        }
        Ok(NetworkSpec { n, p, basis, power })
    }
}

fn inner(e: Error) -> String {
    match e {
        Error::Parameter(m) => m,
        other => other.to_string(),
    }
}
