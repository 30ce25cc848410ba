//! Experiment configuration files (TOML). Every table rejects unknown keys.

use std::fmt;
use std::sync::Arc;

use kronrate_core::engine::{DiscreteDistribution, IndependentProcess};
use kronrate_core::kronecker::BoundSequence;
use kronrate_core::num::parse_rat;
use kronrate_core::prob_kronecker::LeveledBoundSequence;
use kronrate_core::rates::{lift_rate_to_metastable, ConvergenceRate, Counterfunction, MetastabilityRate};
use kronrate_core::space::{NormKind, SpaceDescriptor, Vector, VectorSequence, WeightSequence};
use kronrate_core::Rat;
use num_traits::{One, Signed, Zero};
use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;

use crate::CliError;

/// A rational written as `"p/q"`, `"-p/q"`, `"n"` or a bare integer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Q(pub Rat);

impl<'de> Deserialize<'de> for Q {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Q;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a rational such as \"3/4\" or an integer")
            }

            fn visit_str<E: de::Error>(self, s: &str) -> Result<Q, E> {
                parse_rat(s).map(Q).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, n: i64) -> Result<Q, E> {
                Ok(Q(Rat::from_integer(n.into())))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub description: Option<String>,
    #[serde(default)]
    pub space: SpaceConfig,
    pub sequence: Option<SequenceConfig>,
    pub process: Option<ProcessConfig>,
    #[serde(default)]
    pub weights: WeightsConfig,
    pub rate: Option<RateConfig>,
    pub bound: Option<BoundConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    /// Quantities evaluated by `rate`.
    #[serde(default)]
    pub quantities: Vec<Quantity>,
    /// Suite run by `verify`.
    pub suite: Option<Suite>,
    pub adversary: Option<AdversaryConfig>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    #[serde(default)]
    pub kind: SpaceKind,
    pub dimension: Option<usize>,
    pub norm_exponent: Option<Q>,
    pub type_exponent: Option<Q>,
    pub type_constant: Option<Q>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    #[default]
    Reals,
    Euclidean,
    Max,
    One,
    P,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceConfig {
    /// `x_i = scale * ratio^i * direction`, zero from `length` on.
    Geometric { ratio: Q, scale: Option<Q>, length: Option<u64>, direction: Option<Vec<Q>> },
    /// `x_i = 1/((i+1)(i+2))`.
    Telescoping { length: Option<u64> },
    /// Explicit scalar terms, zero afterwards.
    Table { values: Vec<Q> },
    Zero,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessConfig {
    /// `Y_i = +-scale * ratio^i` with equal probability, for `i < length`.
    Rademacher { scale: Q, ratio: Option<Q>, length: u64 },
    /// `Y_i = +-scale * ratio^i` with probability `prob/2` each, else 0.
    DyadicThreepoint { scale: Q, prob: Q, ratio: Option<Q>, length: u64 },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    #[serde(default)]
    pub family: WeightFamily,
    pub scale: Option<Q>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFamily {
    #[default]
    Linear,
    Power2,
    SqrtCeil,
    ScaledLinear,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateConfig {
    Constant { c: u64 },
    /// `ceil(c/eps)`.
    Inverse { c: u64 },
    /// `ceil(log2(1/eps)) + c`.
    Log2Plus { c: u64 },
    /// Least `N` with `sum_{i>N} ||x_i|| < eps` for a finitely supported sequence.
    NormTail,
    /// Least `N` with `sum_{i>N} E||Y_i||^p < eps` for a finite process.
    MomentTail,
    /// The monotone-sequence metastability rate for a bound `L`.
    Monotone { bound: Q },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundConfig {
    Constant { value: u64 },
    /// Ceilings of the running maximum of `||s_n||`, tabulated up to `horizon`.
    PartialSums { horizon: u64 },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub eps: Vec<Q>,
    #[serde(default)]
    pub lambda: Vec<Q>,
    #[serde(default)]
    pub counterfunctions: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Gamma,
    Kappa,
    RateKronecker,
    Psi,
    KappaP,
    EpsTilde,
    Delta,
    KappaChung,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Gamma => "gamma",
            Quantity::Kappa => "kappa",
            Quantity::RateKronecker => "rate_kronecker",
            Quantity::Psi => "psi",
            Quantity::KappaP => "kappa_p",
            Quantity::EpsTilde => "eps_tilde",
            Quantity::Delta => "delta",
            Quantity::KappaChung => "kappa_chung",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    KroneckerGamma,
    KroneckerKappa,
    Chung,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryConfig {
    pub kind: AdversaryKind,
    pub candidate: CandidateConfig,
    pub schedule: ScheduleConfig,
    pub targets: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKind {
    /// Weighted averages of a Specker-type sequence.
    Specker,
    /// The strong-law counterexample process.
    StrongLaw,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CandidateConfig {
    Constant { c: u64 },
    Logarithmic { m: u64, c: u64 },
    Polynomial { c: u64, d: u32 },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// The enumeration listed explicitly.
    Values { values: Vec<u64> },
    /// `(index, value)` pairs; other slots take the smallest unused values.
    Reveals { length: u64, reveals: Vec<(u64, u64)> },
    /// Built from the candidate so that every target lands past its bound.
    Adversarial,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_confidence")]
    pub confidence: Q,
}

fn default_trials() -> u64 {
    10_000
}

fn default_confidence() -> Q {
    Q(Rat::new(99.into(), 100.into()))
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { trials: default_trials(), seed: 0, confidence: default_confidence() }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<String>,
    pub format: Option<Format>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Table,
    Csv,
    Json,
}

pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn space(&self) -> Result<SpaceDescriptor, CliError> {
        let s = &self.space;
        let d = s.dimension.unwrap_or(1);
        let space = match s.kind {
            SpaceKind::Reals => {
                if d != 1 {
                    return Err(bad("space.kind = \"reals\" has dimension 1"));
                }
                SpaceDescriptor::reals()
            }
            SpaceKind::Euclidean => SpaceDescriptor::euclidean(d),
            SpaceKind::Max => SpaceDescriptor::max_norm(d),
            SpaceKind::One => SpaceDescriptor::one_norm(d),
            SpaceKind::P => {
                let need = |q: &Option<Q>, name: &str| q.clone().map(|q| q.0).ok_or_else(|| bad(format!("space.{name} is required for kind = \"p\"")));
                SpaceDescriptor::new(d, NormKind::P(need(&s.norm_exponent, "norm_exponent")?), need(&s.type_exponent, "type_exponent")?, need(&s.type_constant, "type_constant")?)
                    .map_err(|e| bad(e.to_string()))?
            }
        };
        if !matches!(s.kind, SpaceKind::P) && (s.norm_exponent.is_some() || s.type_exponent.is_some() || s.type_constant.is_some()) {
            return Err(bad("norm and type exponents are only configurable for kind = \"p\""));
        }
        Ok(space)
    }

    pub fn weights(&self) -> Result<WeightSequence, CliError> {
        let w = &self.weights;
        match (w.family, &w.scale) {
            (WeightFamily::ScaledLinear, Some(c)) if c.0.is_positive() => Ok(WeightSequence::scaled_linear(c.0.clone())),
            (WeightFamily::ScaledLinear, _) => Err(bad("weights.scale must be a positive rational for scaled_linear")),
            (_, Some(_)) => Err(bad("weights.scale only applies to scaled_linear")),
            (WeightFamily::Linear, None) => Ok(WeightSequence::linear()),
            (WeightFamily::Power2, None) => Ok(WeightSequence::power2()),
            (WeightFamily::SqrtCeil, None) => Ok(WeightSequence::sqrt_ceil()),
        }
    }

    /// The sequence together with its support length, when finite.
    pub fn sequence(&self, space: &SpaceDescriptor) -> Result<(VectorSequence, Option<u64>), CliError> {
        let d = space.dimension();
        let cfg = self.sequence.as_ref().ok_or_else(|| bad("a [sequence] table is required"))?;
        const BUDGET: u64 = u64::MAX - 1;
        Ok(match cfg {
            SequenceConfig::Geometric { ratio, scale, length, direction } => {
                let dir = match direction {
                    Some(v) if v.len() == d => Vector::new(v.iter().map(|q| q.0.clone()).collect()),
                    Some(v) => return Err(bad(format!("sequence.direction has {} entries, the space has dimension {d}", v.len()))),
                    None => Vector::new(vec![Rat::one(); d]),
                };
                if ratio.0.abs() >= Rat::one() {
                    return Err(bad("sequence.ratio must have absolute value below 1"));
                }
                let (r, c, len) = (ratio.0.clone(), scale.clone().map_or_else(Rat::one, |q| q.0), *length);
                let seq = VectorSequence::new(
                    d,
                    move |i| {
                        if len.is_some_and(|l| i >= l) {
                            Vector::zero(dir.dim())
                        } else {
                            dir.scale(&(&c * num_traits::pow(r.clone(), i as usize)))
                        }
                    },
                    BUDGET,
                );
                (seq, *length)
            }
            SequenceConfig::Telescoping { length } => {
                let len = *length;
                let seq = VectorSequence::new(
                    d,
                    move |i| {
                        if len.is_some_and(|l| i >= l) {
                            Vector::zero(d)
                        } else {
                            Vector::new(vec![Rat::new(1.into(), ((i + 1) * (i + 2)).into()); d])
                        }
                    },
                    BUDGET,
                );
                (seq, len)
            }
            SequenceConfig::Table { values } => {
                if d != 1 {
                    return Err(bad("sequence family \"table\" is scalar"));
                }
                let vals: Arc<Vec<Rat>> = Arc::new(values.iter().map(|q| q.0.clone()).collect());
                let len = vals.len() as u64;
                (VectorSequence::scalar(move |i| vals.get(i as usize).cloned().unwrap_or_else(Rat::zero), BUDGET), Some(len))
            }
            SequenceConfig::Zero => (VectorSequence::zero(d), Some(0)),
        })
    }

    /// The process and its support length.
    pub fn process(&self, space: &SpaceDescriptor) -> Result<(IndependentProcess, u64), CliError> {
        if space.dimension() != 1 {
            return Err(bad("process families are scalar; use a one-dimensional space"));
        }
        let cfg = self.process.as_ref().ok_or_else(|| bad("a [process] table is required"))?;
        let (scale, ratio, length, prob) = match cfg {
            ProcessConfig::Rademacher { scale, ratio, length } => (scale, ratio, *length, None),
            ProcessConfig::DyadicThreepoint { scale, prob, ratio, length } => (scale, ratio, *length, Some(prob.0.clone())),
        };
        if !scale.0.is_positive() {
            return Err(bad("process.scale must be positive"));
        }
        if let Some(p) = &prob {
            if !p.is_positive() || *p > Rat::one() {
                return Err(bad("process.prob must lie in (0, 1]"));
            }
        }
        let (c, r) = (scale.0.clone(), ratio.clone().map_or_else(Rat::one, |q| q.0));
        let dists: Vec<DiscreteDistribution> = (0..length)
            .map(|i| {
                let ci = &c * num_traits::pow(r.clone(), i as usize);
                match &prob {
                    None => Ok(DiscreteDistribution::rademacher(ci)),
                    Some(p) => DiscreteDistribution::symmetric_three_point(ci, p.clone()),
                }
            })
            .collect::<Result<_, _>>()
            .map_err(|e| bad(e.to_string()))?;
        let process = IndependentProcess::from_vec(dists).map_err(|e| bad(e.to_string()))?;
        Ok((process, length))
    }

    pub fn rate_config(&self) -> Result<&RateConfig, CliError> {
        self.rate.as_ref().ok_or_else(|| bad("a [rate] table is required"))
    }

    pub fn bound(&self, space: &SpaceDescriptor, x: Option<&VectorSequence>) -> Result<BoundSequence, CliError> {
        match self.bound.as_ref().ok_or_else(|| bad("a [bound] table is required"))? {
            BoundConfig::Constant { value } => Ok(BoundSequence::constant(*value)),
            BoundConfig::PartialSums { horizon } => {
                let x = x.ok_or_else(|| bad("bound family \"partial_sums\" needs a [sequence]"))?;
                BoundSequence::from_partial_sums(space, x, *horizon).map_err(|e| bad(e.to_string()))
            }
        }
    }

    pub fn leveled_bound(&self, space: &SpaceDescriptor, x: Option<&VectorSequence>) -> Result<LeveledBoundSequence, CliError> {
        let z = self.bound(space, x)?;
        Ok(LeveledBoundSequence::new(move |_, n| z.eval(n)))
    }

    pub fn eps(&self) -> Result<Vec<Rat>, CliError> {
        positive(&self.grid.eps, "grid.eps")
    }

    pub fn lambda(&self) -> Result<Vec<Rat>, CliError> {
        positive(&self.grid.lambda, "grid.lambda")
    }

    pub fn counterfunctions(&self) -> Result<Vec<(String, Counterfunction)>, CliError> {
        self.grid.counterfunctions.iter().map(|s| Ok((s.clone(), parse_counterfunction(s)?))).collect()
    }
}

fn positive(v: &[Q], name: &str) -> Result<Vec<Rat>, CliError> {
    v.iter()
        .map(|q| if q.0.is_positive() { Ok(q.0.clone()) } else { Err(bad(format!("{name} entries must be positive, got {}", q.0))) })
        .collect()
}

/// `identity`, `square`, `constant:c`, `shift:c` or `affine:a:b`.
pub fn parse_counterfunction(s: &str) -> Result<Counterfunction, CliError> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |p: &str| p.parse::<u64>().map_err(|_| bad(format!("bad counterfunction parameter in {s:?}")));
    match parts.as_slice() {
        ["identity"] => Ok(Counterfunction::identity()),
        ["square"] => Ok(Counterfunction::square()),
        ["constant", c] => Ok(Counterfunction::constant(num(c)?)),
        ["shift", c] => Ok(Counterfunction::shift(num(c)?)),
        ["affine", a, b] => Ok(Counterfunction::affine(num(a)?, num(b)?)),
        _ => Err(bad(format!("unknown counterfunction {s:?}"))),
    }
}

/// Least `N` with `sum_{i>N} t_i < eps`, for finitely many nonnegative terms.
pub fn tail_rate(terms: Vec<Rat>) -> ConvergenceRate {
    let mut tails = vec![Rat::zero(); terms.len() + 1];
    for i in (0..terms.len()).rev() {
        tails[i] = &tails[i + 1] + &terms[i];
    }
    let tails = Arc::new(tails);
    ConvergenceRate::new(move |eps| {
        let n = (0..tails.len()).find(|&n| tails.get(n + 1).is_none_or(|t| t < eps)).unwrap_or(tails.len());
        Ok(n as u64)
    })
}

/// The plain rate, when the family has one.
pub fn plain_rate(
    cfg: &RateConfig,
    norm_tail: impl FnOnce() -> Result<Vec<Rat>, CliError>,
    moment_tail: impl FnOnce() -> Result<Vec<Rat>, CliError>,
) -> Result<Option<ConvergenceRate>, CliError> {
    Ok(Some(match cfg {
        RateConfig::Constant { c } => ConvergenceRate::constant(*c),
        RateConfig::Inverse { c } => ConvergenceRate::inverse(*c),
        RateConfig::Log2Plus { c } => ConvergenceRate::log2_plus(*c),
        RateConfig::NormTail => tail_rate(norm_tail()?),
        RateConfig::MomentTail => tail_rate(moment_tail()?),
        RateConfig::Monotone { .. } => return Ok(None),
    }))
}

pub fn meta_rate(
    cfg: &RateConfig,
    norm_tail: impl FnOnce() -> Result<Vec<Rat>, CliError>,
    moment_tail: impl FnOnce() -> Result<Vec<Rat>, CliError>,
) -> Result<MetastabilityRate, CliError> {
    if let RateConfig::Monotone { bound } = cfg {
        if !bound.0.is_positive() {
            return Err(bad("rate.bound must be positive"));
        }
        return Ok(MetastabilityRate::monotone(bound.0.clone()));
    }
    Ok(lift_rate_to_metastable(&plain_rate(cfg, norm_tail, moment_tail)?.expect("non-monotone family")))
}
