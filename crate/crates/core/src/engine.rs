//! Exact enumeration over small independent discrete processes and seeded
//! Monte-Carlo estimation with Hoeffding margins.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::num::{Interval, Rat};
use crate::space::{NormValue, SpaceDescriptor, Vector, WeightSequence};
use crate::{Error, Result};

/// Largest product space the exact engine will enumerate.
pub const ENUMERATION_LIMIT: u64 = 1 << 20;

/// Finitely many atoms with positive rational probabilities summing to one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscreteDistribution {
    atoms: Vec<(Vector, Rat)>,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<(Vector, Rat)>) -> Result<Self> {
        let Some(dim) = atoms.first().map(|(v, _)| v.dim()) else {
            return Err(Error::InvalidDistribution("no atoms".into()));
        };
        let mut total = Rat::zero();
        for (v, p) in &atoms {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: v.dim() });
            }
            if !p.is_positive() {
                return Err(Error::InvalidDistribution(format!("non-positive probability {p}")));
            }
            total += p;
        }
        if !total.is_one() {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(DiscreteDistribution { atoms })
    }

    pub fn scalar(atoms: Vec<(Rat, Rat)>) -> Result<Self> {
        Self::new(atoms.into_iter().map(|(v, p)| (Vector::scalar(v), p)).collect())
    }

    pub fn point(v: Vector) -> Self {
        DiscreteDistribution { atoms: vec![(v, Rat::one())] }
    }

    /// `+c` and `-c` with probability 1/2 each.
    pub fn rademacher(c: Rat) -> Self {
        let half = Rat::new(1.into(), 2.into());
        DiscreteDistribution { atoms: vec![(Vector::scalar(c.clone()), half.clone()), (Vector::scalar(-c), half)] }
    }

    /// `+c` and `-c` with probability `q` each, `0` otherwise; needs `0 < q <= 1/2`.
    pub fn symmetric_three_point(c: Rat, q: Rat) -> Result<Self> {
        let rest = Rat::one() - &q - &q;
        let mut atoms = vec![(Vector::scalar(c.clone()), q.clone()), (Vector::scalar(-c), q)];
        if rest.is_positive() {
            atoms.push((Vector::scalar(Rat::zero()), rest));
        }
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[(Vector, Rat)] {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].0.dim()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> Vector {
        let mut m = Vector::zero(self.dim());
        for (v, p) in &self.atoms {
            m.add_scaled(p, v);
        }
        m
    }

    /// `E f(X)` for a rational-valued `f`.
    pub fn expect(&self, f: impl Fn(&Vector) -> Rat) -> Rat {
        self.atoms.iter().map(|(v, p)| p * f(v)).sum()
    }

    /// The distribution of `c X`.
    pub fn scaled(&self, c: &Rat) -> Self {
        let atoms = self.atoms.iter().map(|(v, p)| (v.scale(c), p.clone())).collect();
        if c.is_zero() {
            return DiscreteDistribution::point(Vector::zero(self.dim()));
        }
        DiscreteDistribution { atoms }
    }
}

type DistFn = dyn Fn(u64) -> DiscreteDistribution + Send + Sync;

/// Independent variables `X_0, X_1, ...` with the given laws.
#[derive(Clone)]
pub struct IndependentProcess {
    dim: usize,
    dist: Arc<DistFn>,
}

impl IndependentProcess {
    pub fn new(dim: usize, dist: impl Fn(u64) -> DiscreteDistribution + Send + Sync + 'static) -> Self {
        IndependentProcess { dim, dist: Arc::new(dist) }
    }

    /// The listed laws, then the point mass at zero.
    pub fn from_vec(dists: Vec<DiscreteDistribution>) -> Result<Self> {
        let dim = dists.first().map_or(1, DiscreteDistribution::dim);
        if let Some(d) = dists.iter().find(|d| d.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: d.dim() });
        }
        let dists = Arc::new(dists);
        Ok(Self::new(dim, move |n| {
            dists.get(n as usize).cloned().unwrap_or_else(|| DiscreteDistribution::point(Vector::zero(dim)))
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dist(&self, n: u64) -> DiscreteDistribution {
        (self.dist)(n)
    }

    /// The process `X_n / a_n`.
    pub fn divided_by(&self, a: &WeightSequence) -> Self {
        let (me, a) = (self.clone(), a.clone());
        Self::new(self.dim, move |n| me.dist(n).scaled(&a.weight(n).recip()))
    }

    /// Number of trajectories of `X_0, ..., X_n`, saturating.
    pub fn outcome_count(&self, n: u64) -> u64 {
        (0..=n).fold(1u64, |acc, i| acc.saturating_mul(self.dist(i).len() as u64))
    }
}

impl fmt::Debug for IndependentProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IndependentProcess").field("dim", &self.dim).finish_non_exhaustive()
    }
}

type PredFn = dyn Fn(&[Vector]) -> bool + Send + Sync;

/// An event decided by the prefix `X_0, ..., X_horizon`.
#[derive(Clone)]
pub struct PrefixEvent {
    horizon: u64,
    pred: Arc<PredFn>,
}

impl fmt::Debug for PrefixEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrefixEvent").field("horizon", &self.horizon).finish_non_exhaustive()
    }
}

/// `||v|| >= x`, counting undecidable enclosures as true.
fn at_least(n: &NormValue, x: &Rat) -> bool {
    !n.certainly_lt(x)
}

/// `||v|| > x`, counting undecidable enclosures as true.
fn more_than(n: &NormValue, x: &Rat) -> bool {
    !n.certainly_le(x)
}

fn partial_sums(xs: &[Vector], dim: usize) -> Vec<Vector> {
    let mut acc = Vector::zero(dim);
    xs.iter()
        .map(|x| {
            acc.add_assign(x);
            acc.clone()
        })
        .collect()
}

/// Norm comparisons inside events treat an undecidable enclosure as the bad
/// outcome, so computed probabilities of bad events are upper bounds.
impl PrefixEvent {
    pub fn new(horizon: u64, pred: impl Fn(&[Vector]) -> bool + Send + Sync + 'static) -> Self {
        PrefixEvent { horizon, pred: Arc::new(pred) }
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn holds(&self, prefix: &[Vector]) -> bool {
        (self.pred)(&prefix[..=self.horizon as usize])
    }

    pub fn always() -> Self {
        Self::new(0, |_| true)
    }

    pub fn never() -> Self {
        Self::new(0, |_| false)
    }

    /// `max_{from <= n <= to} ||(1/a_n) sum_{i<=n} a_i X_i|| >= eps`.
    pub fn weighted_average_exceeds(space: &SpaceDescriptor, a: &WeightSequence, from: u64, to: u64, eps: Rat) -> Self {
        let (space, a) = (space.clone(), a.clone());
        let weights: Vec<Rat> = (0..=to).map(|i| a.weight(i)).collect();
        Self::new(to, move |xs| {
            let mut acc = Vector::zero(space.dimension());
            for (i, x) in xs.iter().enumerate() {
                if !x.is_zero() {
                    acc.add_scaled(&weights[i], x);
                }
                // ||acc / a_i|| >= eps  iff  ||acc|| >= eps a_i.
                if i as u64 >= from && space.norm(&acc).map_or(true, |n| at_least(&n, &(&eps * &weights[i]))) {
                    return true;
                }
            }
            false
        })
    }

    /// `max_{m <= n <= k} ||S_n - S_m|| >= eps`, or `> eps` when `strict`.
    pub fn fluctuation(space: &SpaceDescriptor, m: u64, k: u64, eps: Rat, strict: bool) -> Self {
        let space = space.clone();
        Self::new(k.max(m), move |xs| {
            let mut diff = Vector::zero(space.dimension());
            for x in &xs[m as usize + 1..] {
                diff.add_assign(x);
                let Ok(n) = space.norm(&diff) else { return true };
                if if strict { more_than(&n, &eps) } else { at_least(&n, &eps) } {
                    return true;
                }
            }
            false
        })
    }

    /// Some `i <= n` has `||S_i|| >= z`.
    pub fn partial_sum_reaches(space: &SpaceDescriptor, n: u64, z: Rat) -> Self {
        let space = space.clone();
        Self::new(n, move |xs| {
            partial_sums(xs, space.dimension()).iter().any(|s| space.norm(s).map_or(true, |v| at_least(&v, &z)))
        })
    }

    /// `max_{0 <= i <= n} ||S_i|| > eps`.
    pub fn max_partial_sum_exceeds(space: &SpaceDescriptor, n: u64, eps: Rat) -> Self {
        let space = space.clone();
        Self::new(n, move |xs| {
            partial_sums(xs, space.dimension()).iter().any(|s| space.norm(s).map_or(true, |v| more_than(&v, &eps)))
        })
    }

    /// Some `i <= p` has `||X_i|| > z`.
    pub fn term_exceeds(space: &SpaceDescriptor, p: u64, z: Rat) -> Self {
        let space = space.clone();
        Self::new(p, move |xs| xs.iter().any(|x| space.norm(x).map_or(true, |v| more_than(&v, &z))))
    }

    pub fn and(&self, other: &PrefixEvent) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Self::new(self.horizon.max(other.horizon), move |xs| a.holds(xs) && b.holds(xs))
    }

    pub fn or(&self, other: &PrefixEvent) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Self::new(self.horizon.max(other.horizon), move |xs| a.holds(xs) || b.holds(xs))
    }

    pub fn not(&self) -> Self {
        let a = self.clone();
        Self::new(self.horizon, move |xs| !a.holds(xs))
    }

    pub fn any(events: &[PrefixEvent]) -> Self {
        let events: Vec<_> = events.to_vec();
        let h = events.iter().map(|e| e.horizon).max().unwrap_or(0);
        Self::new(h, move |xs| events.iter().any(|e| e.holds(xs)))
    }
}

/// Visits every trajectory `X_0, ..., X_n` with its probability.
pub fn enumerate(process: &IndependentProcess, n: u64, mut visit: impl FnMut(&[Vector], &Rat)) -> Result<()> {
    if process.outcome_count(n) > ENUMERATION_LIMIT {
        return Err(Error::EnumerationBudget { limit: ENUMERATION_LIMIT });
    }
    let dists: Vec<DiscreteDistribution> = (0..=n).map(|i| process.dist(i)).collect();
    let len = dists.len();
    let mut path: Vec<Vector> = Vec::with_capacity(len);
    let mut probs: Vec<Rat> = vec![Rat::one()];
    let mut choice = vec![0usize; len];
    let mut depth = 0usize;
    // Iterative depth-first traversal over atom choices.
    loop {
        if depth == len {
            visit(&path, &probs[len]);
            depth -= 1;
            path.pop();
            probs.pop();
            choice[depth] += 1;
            loop {
                if choice[depth] < dists[depth].len() {
                    break;
                }
                choice[depth] = 0;
                if depth == 0 {
                    return Ok(());
                }
                depth -= 1;
                path.pop();
                probs.pop();
                choice[depth] += 1;
            }
        }
        let (v, p) = &dists[depth].atoms[choice[depth]];
        let next = &probs[depth] * p;
        path.push(v.clone());
        probs.push(next);
        depth += 1;
    }
}

/// `P(E)` by full enumeration.
pub fn exact_probability(process: &IndependentProcess, event: &PrefixEvent) -> Result<Rat> {
    Ok(exact_probabilities(process, core::slice::from_ref(event))?.remove(0))
}

/// Probabilities of several events from a single enumeration.
pub fn exact_probabilities(process: &IndependentProcess, events: &[PrefixEvent]) -> Result<Vec<Rat>> {
    let n = events.iter().map(PrefixEvent::horizon).max().unwrap_or(0);
    let mut out = vec![Rat::zero(); events.len()];
    enumerate(process, n, |path, p| {
        for (acc, e) in out.iter_mut().zip(events) {
            if e.holds(path) {
                *acc += p;
            }
        }
    })?;
    Ok(out)
}

/// `P(union E_i)`, `sum P(E_i)`, and whether the union bound holds.
pub fn union_bound_check(process: &IndependentProcess, events: &[PrefixEvent]) -> Result<(Rat, Rat, bool)> {
    let mut all = events.to_vec();
    all.push(PrefixEvent::any(events));
    let probs = exact_probabilities(process, &all)?;
    let union = probs[events.len()].clone();
    let sum: Rat = probs[..events.len()].iter().sum();
    let ok = union <= sum;
    Ok((union, sum, ok))
}

/// Exact `E f(X_0..X_n)` with the norm comparison `||E f|| <= E ||f||`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expectation {
    pub mean: Vector,
    pub norm_of_mean: NormValue,
    pub mean_of_norm: Interval,
    /// `||E f|| <= E ||f||`, decided exactly for rational norms and up to the
    /// enclosure width otherwise.
    pub norm_inequality: bool,
}

pub fn expectation_exact(
    process: &IndependentProcess,
    space: &SpaceDescriptor,
    n: u64,
    f: impl Fn(&[Vector]) -> Vector,
) -> Result<Expectation> {
    let mut mean = Vector::zero(space.dimension());
    let mut mean_of_norm = Interval::exact(Rat::zero());
    let mut err = None;
    enumerate(process, n, |path, p| {
        let v = f(path);
        match space.norm(&v) {
            Ok(nv) => mean_of_norm = mean_of_norm.add(&nv.enclosure().scale_nonneg(p)),
            Err(e) => err = Some(e),
        }
        mean.add_scaled(p, &v);
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let norm_of_mean = space.norm(&mean)?;
    let norm_inequality = norm_of_mean.enclosure().lo <= mean_of_norm.hi;
    Ok(Expectation { mean, norm_of_mean, mean_of_norm, norm_inequality })
}

/// Exact `E g(X_0..X_n)` for rational-valued `g`.
pub fn expectation_scalar(process: &IndependentProcess, n: u64, g: impl Fn(&[Vector]) -> Rat) -> Result<Rat> {
    let mut total = Rat::zero();
    enumerate(process, n, |path, p| total += p * g(path))?;
    Ok(total)
}

/// Two-sided Hoeffding half-width `sqrt(ln(2/delta) / (2 trials))`.
pub fn hoeffding_margin(trials: u64, delta: f64) -> f64 {
    libm::sqrt(libm::log(2.0 / delta) / (2.0 * trials as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProbabilityEstimate {
    Exact(Rat),
    MonteCarlo {
        hits: u64,
        trials: u64,
        seed: u64,
        /// Confidence level `1 - delta`.
        confidence: Rat,
        margin: f64,
    },
}

impl ProbabilityEstimate {
    pub fn point(&self) -> f64 {
        match self {
            ProbabilityEstimate::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            ProbabilityEstimate::MonteCarlo { hits, trials, .. } => *hits as f64 / *trials as f64,
        }
    }

    /// The empirical frequency as an exact rational.
    pub fn frequency(&self) -> Rat {
        match self {
            ProbabilityEstimate::Exact(r) => r.clone(),
            ProbabilityEstimate::MonteCarlo { hits, trials, .. } => {
                Rat::new(BigInt::from(*hits), BigInt::from(*trials))
            }
        }
    }

    pub fn margin(&self) -> f64 {
        match self {
            ProbabilityEstimate::Exact(_) => 0.0,
            ProbabilityEstimate::MonteCarlo { margin, .. } => *margin,
        }
    }

    /// `estimate + margin < bound` (exact `<` for exact values).
    pub fn below(&self, bound: &Rat) -> bool {
        match self {
            ProbabilityEstimate::Exact(r) => r < bound,
            _ => self.point() + self.margin() < bound.to_f64().unwrap_or(0.0),
        }
    }

    /// `estimate + margin <= bound`.
    pub fn at_most(&self, bound: &Rat) -> bool {
        match self {
            ProbabilityEstimate::Exact(r) => r <= bound,
            _ => self.point() + self.margin() <= bound.to_f64().unwrap_or(0.0),
        }
    }
}

/// Precomputed integer thresholds for inverse-CDF sampling of `X_0..X_n`.
#[derive(Clone, Debug)]
pub struct Sampler {
    atoms: Vec<Vec<Vector>>,
    thresholds: Vec<Vec<u128>>,
}

impl Sampler {
    pub fn new(process: &IndependentProcess, horizon: u64) -> Self {
        let scale = BigInt::one() << 64usize;
        let mut atoms = Vec::with_capacity(horizon as usize + 1);
        let mut thresholds = Vec::with_capacity(horizon as usize + 1);
        for i in 0..=horizon {
            let d = process.dist(i);
            let mut cum = Rat::zero();
            let mut ts = Vec::with_capacity(d.len());
            for (k, (_, p)) in d.atoms().iter().enumerate() {
                cum += p;
                let t = if k + 1 == d.len() {
                    1u128 << 64
                } else {
                    (&cum * Rat::from_integer(scale.clone())).floor().to_integer().to_u128().unwrap_or(1u128 << 64)
                };
                ts.push(t);
            }
            atoms.push(d.atoms().iter().map(|(v, _)| v.clone()).collect());
            thresholds.push(ts);
        }
        Sampler { atoms, thresholds }
    }

    pub fn horizon(&self) -> u64 {
        self.atoms.len() as u64 - 1
    }

    /// The trajectory of trial `trial` under `seed`: a ChaCha8 stream per trial,
    /// one 64-bit draw per variable, in index order.
    pub fn trajectory(&self, seed: u64, trial: u64) -> Vec<Vector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        self.atoms
            .iter()
            .zip(&self.thresholds)
            .map(|(atoms, ts)| {
                let u = rng.next_u64() as u128;
                let k = ts.iter().position(|&t| u < t).unwrap_or(ts.len() - 1);
                atoms[k].clone()
            })
            .collect()
    }

    pub fn trial_hits(&self, event: &PrefixEvent, seed: u64, trial: u64) -> bool {
        event.holds(&self.trajectory(seed, trial))
    }
}

fn confidence_delta(confidence: &Rat) -> Result<f64> {
    let delta = (Rat::one() - confidence).to_f64().unwrap_or(0.0);
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("confidence must lie strictly between 0 and 1"));
    }
    Ok(delta)
}

/// Builds the estimate record from a hit count.
pub fn monte_carlo_estimate(hits: u64, trials: u64, seed: u64, confidence: &Rat) -> Result<ProbabilityEstimate> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let delta = confidence_delta(confidence)?;
    Ok(ProbabilityEstimate::MonteCarlo {
        hits,
        trials,
        seed,
        confidence: confidence.clone(),
        margin: hoeffding_margin(trials, delta),
    })
}

/// Empirical frequency of `E` over `trials` seeded trajectories.
pub fn estimate_probability(
    process: &IndependentProcess,
    event: &PrefixEvent,
    trials: u64,
    seed: u64,
    confidence: &Rat,
) -> Result<ProbabilityEstimate> {
    confidence_delta(confidence)?;
    let sampler = Sampler::new(process, event.horizon());
    let hits = (0..trials).filter(|&t| sampler.trial_hits(event, seed, t)).count() as u64;
    monte_carlo_estimate(hits, trials, seed, confidence)
}

/// Chooses the exact engine when the product space is small enough.
pub fn probability(
    process: &IndependentProcess,
    event: &PrefixEvent,
    trials: u64,
    seed: u64,
    confidence: &Rat,
) -> Result<ProbabilityEstimate> {
    if process.outcome_count(event.horizon()) <= ENUMERATION_LIMIT {
        exact_probability(process, event).map(ProbabilityEstimate::Exact)
    } else {
        estimate_probability(process, event, trials, seed, confidence)
    }
}

/// `E(||S_n||^r)` for natural `r`.
pub fn moment_of_sum(process: &IndependentProcess, space: &SpaceDescriptor, n: u64, r: u32) -> Result<Interval> {
    let mut total = Interval::exact(Rat::zero());
    let mut err = None;
    enumerate(process, n, |path, p| {
        let s = partial_sums(path, space.dimension()).pop().unwrap();
        match space.norm(&s) {
            Ok(NormValue::Sqrt(sq)) if r.is_multiple_of(2) => {
                total = total.add(&Interval::exact(p * crate::num::powu(&sq, r / 2)));
            }
            Ok(v) => {
                let e = v.enclosure();
                let pw = Interval::new(crate::num::powu(&e.lo, r), crate::num::powu(&e.hi, r));
                total = total.add(&pw.scale_nonneg(p));
            }
            Err(e) => err = Some(e),
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Exact `sum p |x|` style helper: `E ||X_n||^r` for a single variable.
pub fn term_moment(process: &IndependentProcess, space: &SpaceDescriptor, n: u64, r: u32) -> Result<Interval> {
    let d = process.dist(n);
    let mut total = Interval::exact(Rat::zero());
    for (v, p) in d.atoms() {
        let e = match space.norm(v)? {
            NormValue::Sqrt(sq) if r.is_multiple_of(2) => Interval::exact(crate::num::powu(&sq, r / 2)),
            other => {
                let e = other.enclosure();
                Interval::new(crate::num::powu(&e.lo, r), crate::num::powu(&e.hi, r))
            }
        };
        total = total.add(&e.scale_nonneg(p));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{int, rat};

    fn rademacher_pair() -> IndependentProcess {
        IndependentProcess::from_vec(vec![DiscreteDistribution::rademacher(int(1)); 2]).unwrap()
    }

    #[test]
    fn distribution_validation() {
        assert!(DiscreteDistribution::scalar(vec![(int(1), rat(1, 2))]).is_err());
        assert!(DiscreteDistribution::scalar(vec![(int(1), rat(3, 2)), (int(0), rat(-1, 2))]).is_err());
        assert!(DiscreteDistribution::new(vec![]).is_err());
        let d = DiscreteDistribution::symmetric_three_point(int(3), rat(1, 4)).unwrap();
        assert!(d.mean().is_zero());
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn exact_examples() {
        let p = rademacher_pair();
        let r = SpaceDescriptor::reals();
        let e = PrefixEvent::new(1, |xs| (&xs[0].coords()[0] + &xs[1].coords()[0]).abs() == int(2));
        assert_eq!(exact_probability(&p, &e).unwrap(), rat(1, 2));
        assert_eq!(exact_probability(&p, &PrefixEvent::never()).unwrap(), rat(0, 1));
        assert_eq!(exact_probability(&p, &PrefixEvent::always()).unwrap(), rat(1, 1));
        let m2 = moment_of_sum(&p, &r, 1, 2).unwrap();
        assert_eq!(m2, Interval::exact(int(2)));
        let big = IndependentProcess::new(1, |_| DiscreteDistribution::rademacher(int(1)));
        assert!(matches!(
            exact_probability(&big, &PrefixEvent::new(25, |_| true)),
            Err(Error::EnumerationBudget { .. })
        ));
    }

    #[test]
    fn expectation_and_norm_inequality() {
        let p = rademacher_pair();
        let r = SpaceDescriptor::reals();
        let e = expectation_exact(&p, &r, 1, |xs| xs[0].add(&xs[1])).unwrap();
        assert!(e.mean.is_zero());
        assert!(e.norm_inequality);
        assert_eq!(e.mean_of_norm, Interval::exact(int(1)));
        let sq = expectation_scalar(&p, 1, |xs| {
            let s = &xs[0].coords()[0] + &xs[1].coords()[0];
            &s * &s
        })
        .unwrap();
        assert_eq!(sq, int(2));
    }

    #[test]
    fn union_bound() {
        let p = rademacher_pair();
        let r = SpaceDescriptor::reals();
        let evs = [
            PrefixEvent::partial_sum_reaches(&r, 0, int(1)),
            PrefixEvent::partial_sum_reaches(&r, 1, int(2)),
        ];
        let (u, s, ok) = union_bound_check(&p, &evs).unwrap();
        assert!(ok);
        assert_eq!(u, int(1));
        assert_eq!(s, rat(3, 2));
    }

    #[test]
    fn margin_value() {
        let m = hoeffding_margin(10_000, 0.01);
        assert!((m - 0.016_276).abs() < 1e-5);
    }

    #[test]
    fn seeded_estimates_are_deterministic() {
        let p = IndependentProcess::new(1, |_| DiscreteDistribution::rademacher(int(1)));
        let e = PrefixEvent::max_partial_sum_exceeds(&SpaceDescriptor::reals(), 30, int(4));
        let c = rat(99, 100);
        let a = estimate_probability(&p, &e, 500, 7, &c).unwrap();
        let b = estimate_probability(&p, &e, 500, 7, &c).unwrap();
        assert_eq!(a, b);
        let certain = estimate_probability(&p, &PrefixEvent::always(), 100, 3, &c).unwrap();
        assert_eq!(certain.frequency(), int(1));
        let s = Sampler::new(&p, 30);
        assert_eq!(s.trajectory(7, 3), s.trajectory(7, 3));
        assert_ne!(s.trajectory(7, 3), s.trajectory(7, 4));
    }

    #[test]
    fn sampling_frequencies_track_atom_weights() {
        let d = DiscreteDistribution::scalar(vec![(int(0), rat(1, 8)), (int(1), rat(7, 8))]).unwrap();
        let p = IndependentProcess::from_vec(vec![d]).unwrap();
        let e = PrefixEvent::new(0, |xs| xs[0].coords()[0].is_zero());
        let est = estimate_probability(&p, &e, 20_000, 11, &rat(99, 100)).unwrap();
        assert!((est.point() - 0.125).abs() < est.margin());
    }
}
