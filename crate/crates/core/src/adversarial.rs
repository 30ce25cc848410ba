//! Specker-style schedules that defeat candidate computable rates, for the
//! weighted averages `(1/(n+1)) sum (i+1) 2^(-a_i)` and for the strong-law
//! counterexample process.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use crate::engine::{exact_probability, DiscreteDistribution, IndependentProcess, PrefixEvent};
use crate::num::{ceil_log2_recip, ceil_u64, int, pow2, rat, Rat};
use crate::space::{SpaceDescriptor, Vector, VectorSequence};
use crate::{Error, Result};

/// Largest index an adversarial schedule may use.
pub const SCHEDULE_LIMIT: u64 = 200_000;

/// An injective finite enumeration `a_0, a_1, ...` of naturals `>= 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enumeration {
    values: Vec<u64>,
}

impl Enumeration {
    pub fn new(values: Vec<u64>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (i, &v) in values.iter().enumerate() {
            if v == 0 {
                return Err(Error::InvalidEnumeration(format!("value 0 at index {i}")));
            }
            if !seen.insert(v) {
                return Err(Error::InvalidEnumeration(format!("value {v} repeated at index {i}")));
            }
        }
        Ok(Enumeration { values })
    }

    /// A prefix of length `len` with `value` placed at each listed index and
    /// the smallest unused values elsewhere.
    pub fn from_reveals(len: u64, reveals: &[(u64, u64)]) -> Result<Self> {
        if len > SCHEDULE_LIMIT {
            return Err(Error::IndexBeyondBudget { index: len, budget: SCHEDULE_LIMIT });
        }
        let reserved: BTreeSet<u64> = reveals.iter().map(|&(_, v)| v).collect();
        let mut slots: Vec<Option<u64>> = alloc::vec![None; len as usize];
        for &(i, v) in reveals {
            let slot = slots.get_mut(i as usize).ok_or(Error::IndexBeyondBudget { index: i, budget: len })?;
            if slot.is_some() {
                return Err(Error::InvalidEnumeration(format!("index {i} revealed twice")));
            }
            *slot = Some(v);
        }
        let mut next = 1u64;
        let values = slots
            .into_iter()
            .map(|s| {
                s.unwrap_or_else(|| {
                    while reserved.contains(&next) {
                        next += 1;
                    }
                    next += 1;
                    next - 1
                })
            })
            .collect();
        Self::new(values)
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, n: u64) -> Option<u64> {
        self.values.get(n as usize).copied()
    }

    pub fn position(&self, k: u64) -> Option<u64> {
        self.values.iter().position(|&v| v == k).map(|i| i as u64)
    }
}

/// `x_i = 2^(-a_i)` over the enumerated prefix.
pub fn specker_terms(e: &Enumeration) -> VectorSequence {
    let values = Arc::new(e.values.clone());
    let budget = (e.len() as u64).saturating_sub(1);
    VectorSequence::scalar(move |i| values.get(i as usize).map_or_else(Rat::zero, |&a| pow2(-(a as i64))), budget)
}

/// `sum c_i 2^(-e_i)` held as an integer over a common power of two.
#[derive(Clone, Debug, Default)]
struct Dyadic {
    num: BigUint,
    exp: u64,
}

impl Dyadic {
    fn add(&mut self, c: u64, e: u64) {
        if e > self.exp {
            self.num <<= (e - self.exp) as usize;
            self.exp = e;
        }
        self.num += BigUint::from(c) << (self.exp - e) as usize;
    }

    fn sub(&mut self, c: u64, e: u64) {
        if e > self.exp {
            self.num <<= (e - self.exp) as usize;
            self.exp = e;
        }
        self.num -= BigUint::from(c) << (self.exp - e) as usize;
    }

    /// `self <= p/q` for naturals `p, q > 0`.
    fn le_ratio(&self, p: u64, q: u64) -> bool {
        &self.num * BigUint::from(q) <= BigUint::from(p) << self.exp as usize
    }

    fn lt_ratio(&self, p: u64, q: u64) -> bool {
        &self.num * BigUint::from(q) < BigUint::from(p) << self.exp as usize
    }

    fn to_rat(&self) -> Rat {
        Rat::new(BigInt::from(self.num.clone()), BigInt::one() << self.exp as usize)
    }
}

/// `(1/(n+1)) sum_{i<=n} (i+1) 2^(-a_i)`.
pub fn specker_average(e: &Enumeration, n: u64) -> Result<Rat> {
    if n as usize >= e.len() {
        return Err(Error::IndexBeyondBudget { index: n, budget: e.len() as u64 });
    }
    let mut acc = Dyadic::default();
    for (i, &a) in e.values[..=n as usize].iter().enumerate() {
        acc.add(i as u64 + 1, a);
    }
    Ok(acc.to_rat() / int(n + 1))
}

type DetFn = dyn Fn(&Rat) -> u64 + Send + Sync;
type ProbFn = dyn Fn(&Rat, &Rat) -> u64 + Send + Sync;

/// A candidate rate `eps -> N` for the weighted averages.
#[derive(Clone)]
pub struct RateCandidate {
    name: String,
    f: Arc<DetFn>,
}

impl fmt::Debug for RateCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateCandidate").field("name", &self.name).finish_non_exhaustive()
    }
}

impl RateCandidate {
    pub fn new(name: impl Into<String>, f: impl Fn(&Rat) -> u64 + Send + Sync + 'static) -> Self {
        RateCandidate { name: name.into(), f: Arc::new(f) }
    }

    pub fn constant(c: u64) -> Self {
        Self::new(format!("const {c}"), move |_| c)
    }

    /// `m * ceil(log2(1/eps)) + c`.
    pub fn logarithmic(m: u64, c: u64) -> Self {
        Self::new(format!("{m}*log2(1/eps)+{c}"), move |eps| ceil_log2_recip(eps).saturating_mul(m).saturating_add(c))
    }

    /// `ceil(c / eps^d)`.
    pub fn polynomial(c: u64, d: u32) -> Self {
        Self::new(format!("{c}/eps^{d}"), move |eps| {
            ceil_u64(&(int(c) / crate::num::powu(eps, d))).unwrap_or(u64::MAX)
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, eps: &Rat) -> u64 {
        (self.f)(eps)
    }
}

/// A candidate rate `(eps, lambda) -> N` of almost-sure convergence.
#[derive(Clone)]
pub struct AsRateCandidate {
    name: String,
    f: Arc<ProbFn>,
}

impl fmt::Debug for AsRateCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AsRateCandidate").field("name", &self.name).finish_non_exhaustive()
    }
}

impl AsRateCandidate {
    pub fn new(name: impl Into<String>, f: impl Fn(&Rat, &Rat) -> u64 + Send + Sync + 'static) -> Self {
        AsRateCandidate { name: name.into(), f: Arc::new(f) }
    }

    pub fn constant(c: u64) -> Self {
        Self::new(format!("const {c}"), move |_, _| c)
    }

    /// `m * ceil(log2(1/(eps lambda))) + c`.
    pub fn logarithmic(m: u64, c: u64) -> Self {
        Self::new(format!("{m}*log2(1/(eps*lambda))+{c}"), move |e, l| {
            ceil_log2_recip(&(e * l)).saturating_mul(m).saturating_add(c)
        })
    }

    /// `ceil(c / (eps lambda)^d)`.
    pub fn polynomial(c: u64, d: u32) -> Self {
        Self::new(format!("{c}/(eps*lambda)^{d}"), move |e, l| {
            ceil_u64(&(int(c) / crate::num::powu(&(e * l), d))).unwrap_or(u64::MAX)
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, eps: &Rat, lambda: &Rat) -> u64 {
        (self.f)(eps, lambda)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Refutation {
    /// `k = a_n` with `n > phi(2^-k)` and the exact average at `n` above `2^-k`.
    Witness { n: u64, k: u64, bound: u64, average: Rat },
    /// As a witness, but at `n <= 1`, where the counting argument does not apply.
    EdgeCase { n: u64, k: u64, bound: u64, average: Rat },
    /// `k` is absent from the prefix or appears no later than the candidate allows.
    None,
}

impl Refutation {
    pub fn is_witness(&self) -> bool {
        matches!(self, Refutation::Witness { .. })
    }
}

/// Looks for `n > phi(2^-k)` with `a_n = k`; there the average is at least its
/// last term `2^-k`, and strictly more once earlier terms contribute.
pub fn refute_rate(e: &Enumeration, phi: &RateCandidate, k: u64) -> Result<Refutation> {
    let tol = pow2(-(k as i64));
    let bound = phi.eval(&tol);
    let Some(n) = e.position(k) else { return Ok(Refutation::None) };
    if n <= bound {
        return Ok(Refutation::None);
    }
    let average = specker_average(e, n)?;
    if average <= tol {
        return Ok(Refutation::None);
    }
    Ok(if n <= 1 {
        Refutation::EdgeCase { n, k, bound, average }
    } else {
        Refutation::Witness { n, k, bound, average }
    })
}

/// Reveals each target `k` at the first free index past `max(phi(2^-k), 1)`.
pub fn adversarial_schedule(phi: &RateCandidate, targets: &[u64]) -> Result<Enumeration> {
    let mut reveals: Vec<(u64, u64)> = Vec::new();
    let mut used = BTreeSet::new();
    for &k in targets {
        let mut n = phi.eval(&pow2(-(k as i64))).saturating_add(1).max(2);
        while used.contains(&n) {
            n += 1;
        }
        if n >= SCHEDULE_LIMIT {
            return Err(Error::IndexBeyondBudget { index: n, budget: SCHEDULE_LIMIT });
        }
        used.insert(n);
        reveals.push((n, k));
    }
    let len = reveals.iter().map(|&(n, _)| n + 1).max().unwrap_or(0);
    Enumeration::from_reveals(len, &reveals)
}

/// The strong-law counterexample: `X_0 = 0` and, for `n >= 1` with
/// `q = 2^(-a_n - 1)` and `a_n` the `n`-th listed value, `X_n = n - nq` with
/// probability `q` and `-nq` otherwise. Variables past the prefix are zero.
pub fn slln_counterexample_process(e: &Enumeration) -> IndependentProcess {
    let values = Arc::new(e.values.clone());
    IndependentProcess::new(1, move |n| match n.checked_sub(1).and_then(|i| values.get(i as usize)) {
        Some(&a) => slln_atoms(n, a),
        None => DiscreteDistribution::point(Vector::scalar(Rat::zero())),
    })
}

fn slln_atoms(n: u64, a: u64) -> DiscreteDistribution {
    let e = a + 1;
    let odd = (BigInt::one() << e as usize) - 1;
    let high = dyadic_rat(BigInt::from(n) * &odd, e);
    let low = dyadic_rat(-BigInt::from(n), e);
    let q = dyadic_rat(BigInt::one(), e);
    let rest = dyadic_rat(odd, e);
    DiscreteDistribution::new(alloc::vec![(Vector::scalar(high), q), (Vector::scalar(low), rest)])
        .expect("two dyadic atoms summing to one")
}

/// `num / 2^exp` in lowest terms, without a gcd.
fn dyadic_rat(num: BigInt, exp: u64) -> Rat {
    if num.is_zero() {
        return Rat::zero();
    }
    let t = num.trailing_zeros().unwrap_or(0).min(exp);
    Rat::new_raw(num >> t as usize, BigInt::one() << (exp - t) as usize)
}

/// `(num, exp)` with `r = num / 2^exp`, when the denominator of `r` is a power of two.
fn dyadic_parts(r: &Rat) -> Option<(BigInt, u64)> {
    let d = r.denom().magnitude();
    let e = d.trailing_zeros().unwrap_or(0);
    (d.bits() == e + 1).then(|| (r.numer().clone(), e))
}

/// `sum c_j 2^(-e_j)` for signed integers `c_j`, as `(num, exp)`.
fn dyadic_sum(terms: impl IntoIterator<Item = (BigInt, u64)>) -> (BigInt, u64) {
    let terms: Vec<_> = terms.into_iter().collect();
    let exp = terms.iter().map(|t| t.1).max().unwrap_or(0);
    let num = terms.into_iter().map(|(c, e)| c << (exp - e) as usize).sum();
    (num, exp)
}

/// `a_n` of the counterexample process, indexed from 1.
pub fn slln_exponent(e: &Enumeration, n: u64) -> Option<u64> {
    n.checked_sub(1).and_then(|i| e.get(i))
}

/// `Var(X_n) / n^2 = q (1 - q)`.
pub fn normalized_variance(a: u64) -> Rat {
    let q = pow2(-(a as i64) - 1);
    &q * (Rat::one() - &q)
}

/// Largest partial sum of `Var(X_n)/n^2` over the prefix, and whether every
/// partial sum is at most `5/12`.
pub fn variance_series_bound(e: &Enumeration) -> (Rat, bool) {
    let mut acc = Dyadic::default();
    let mut ok = true;
    for &a in &e.values {
        acc.add(1, a + 1);
        acc.sub(1, 2 * a + 2);
        ok &= acc.le_ratio(5, 12);
    }
    (acc.to_rat(), ok)
}

/// Checks `(1/M) sum_{k<=M} k 2^(-a_k - 1) < 1/2` at every `M` of the prefix.
pub fn drift_bound_holds(e: &Enumeration) -> bool {
    let mut acc = Dyadic::default();
    for (i, &a) in e.values.iter().enumerate() {
        let m = i as u64 + 1;
        acc.add(m, a + 1);
        if !acc.lt_ratio(m, 2) {
            return false;
        }
    }
    true
}

/// Evidence that an index `M >= phi(1/2, 2^-k-1)` carries `a_M = k`, so the
/// candidate overstates `P(sup_{m>=M} |S_m/m| <= 1/2)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AsWitness {
    pub m: u64,
    /// Last index of the certificate window `[M, H]`.
    pub h: u64,
    pub k: u64,
    pub bound: u64,
    /// `(1/j) x_j < 1/2` for every `j <= H` with `x_M = sum_{j<=M} j 2^(-a_j - 1)`.
    pub drift_below_half: bool,
    /// `P(X_M = -M 2^(-a_M - 1)) = 1 - 2^(-k-1)`.
    pub low_probability: Rat,
    /// A lower bound on `P(max_{M<=j<=H} |S_j / j| > 1/2)`, exact when the prefix is enumerable.
    pub tail_lower_bound: Rat,
    pub tail_is_exact: bool,
    /// Enumerated: no outcome has `|S_M/M| <= 1/2` while `X_M` takes its high value.
    pub forcing_verified: bool,
}

impl AsWitness {
    /// The candidate claimed `P(sup_{m >= M} |S_m/m| > 1/2) <= 2^(-k-1)`; the
    /// certificate shows the window `[M, H]` already exceeds that.
    pub fn refutes(&self) -> bool {
        self.drift_below_half && self.tail_lower_bound > pow2(-(self.k as i64) - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AsRefutation {
    Witness(AsWitness),
    None,
}

/// Variables past `M` that the certificate may look at.
pub const AS_WINDOW: u64 = 3;

/// Outcome-count ceiling under which certificates enumerate instead of bounding.
const CERTIFICATE_ENUMERATION: u64 = 1 << 14;

fn abs_average_exceeds_half(xs: &[Vector], m: usize) -> bool {
    let s: Rat = xs[1..=m].iter().map(|x| x.coords()[0].clone()).sum();
    num_traits::Signed::abs(&(s / int(m as u64))) > rat(1, 2)
}

/// Looks for `M >= phi(1/2, 2^-k-1)` with `a_M = k` and certifies the violation
/// on the window `[M, H]`, `H = min(M + AS_WINDOW, prefix length)`.
pub fn refute_as_rate(e: &Enumeration, phi: &AsRateCandidate, k: u64) -> Result<AsRefutation> {
    let lambda = pow2(-(k as i64) - 1);
    let bound = phi.eval(&rat(1, 2), &lambda);
    let Some(m) = e.position(k).map(|i| i + 1) else { return Ok(AsRefutation::None) };
    if m < bound {
        return Ok(AsRefutation::None);
    }
    let h = (m + AS_WINDOW).min(e.len() as u64);
    let prefix = Enumeration { values: e.values[..h as usize].to_vec() };
    let drift_below_half = drift_bound_holds(&prefix);
    let q = |n: u64| pow2(-(slln_exponent(e, n).unwrap() as i64) - 1);
    let low_probability = Rat::one() - q(m);
    let process = slln_counterexample_process(&prefix);
    if process.outcome_count(h) <= CERTIFICATE_ENUMERATION {
        let exceeds = PrefixEvent::new(h, move |xs| (m..=h).any(|j| abs_average_exceeds_half(xs, j as usize)));
        let high_m = int(m) - int(m) * q(m);
        let forcing = PrefixEvent::new(m, move |xs| {
            !abs_average_exceeds_half(xs, m as usize) && xs[m as usize].coords()[0] == high_m
        });
        let tail = exact_probability(&process, &exceeds)?;
        let leak = exact_probability(&process, &forcing)?;
        return Ok(AsRefutation::Witness(AsWitness {
            m,
            h,
            k,
            bound,
            drift_below_half,
            low_probability,
            tail_lower_bound: tail,
            tail_is_exact: true,
            forcing_verified: leak.is_zero(),
        }));
    }
    // With the drift below 1/2 at every index, X_j high forces S_j/j > 1/2, so
    // the window event contains "some X_j high, M <= j <= H".
    let mut none_high = Rat::one();
    for j in m..=h {
        none_high *= Rat::one() - q(j);
    }
    Ok(AsRefutation::Witness(AsWitness {
        m,
        h,
        k,
        bound,
        drift_below_half,
        low_probability,
        tail_lower_bound: Rat::one() - none_high,
        tail_is_exact: false,
        forcing_verified: drift_below_half,
    }))
}

/// Reveals each target `k` at the first free index `M >= max(phi(1/2, 2^-k-1), 2)`
/// of the process (so at list position `M - 1`).
pub fn adversarial_as_schedule(phi: &AsRateCandidate, targets: &[u64]) -> Result<Enumeration> {
    let mut reveals: Vec<(u64, u64)> = Vec::new();
    let mut used = BTreeSet::new();
    for &k in targets {
        let mut m = phi.eval(&rat(1, 2), &pow2(-(k as i64) - 1)).max(2);
        while used.contains(&m) {
            m += 1;
        }
        if m >= SCHEDULE_LIMIT {
            return Err(Error::IndexBeyondBudget { index: m, budget: SCHEDULE_LIMIT });
        }
        used.insert(m);
        reveals.push((m - 1, k));
    }
    let len = reveals.iter().map(|&(i, _)| i + 1 + AS_WINDOW).max().unwrap_or(0);
    Enumeration::from_reveals(len, &reveals)
}

/// The fixed battery of candidate rates for the weighted averages.
pub fn candidate_battery() -> Vec<RateCandidate> {
    alloc::vec![
        RateCandidate::constant(0),
        RateCandidate::constant(7),
        RateCandidate::constant(250),
        RateCandidate::logarithmic(1, 0),
        RateCandidate::logarithmic(3, 5),
        RateCandidate::polynomial(1, 1),
        RateCandidate::polynomial(10, 1),
        RateCandidate::polynomial(1, 2),
    ]
}

/// The fixed battery of candidate rates of almost-sure convergence.
pub fn as_candidate_battery() -> Vec<AsRateCandidate> {
    alloc::vec![
        AsRateCandidate::constant(0),
        AsRateCandidate::constant(12),
        AsRateCandidate::logarithmic(1, 0),
        AsRateCandidate::logarithmic(2, 3),
        AsRateCandidate::polynomial(1, 1),
        AsRateCandidate::polynomial(3, 1),
    ]
}

/// Exact moments of the counterexample atoms over a prefix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MomentCheck {
    pub variables: u64,
    /// `E(X_n) = 0` for every `n`.
    pub means_zero: bool,
    /// `E(X_n^2) / n^2 = q_n (1 - q_n)` for every `n >= 1`.
    pub variances_match: bool,
}

/// Checks both moments from the atoms in integer dyadic arithmetic.
pub fn slln_moment_check(e: &Enumeration) -> Result<MomentCheck> {
    let process = slln_counterexample_process(e);
    let mut check = MomentCheck { variables: e.len() as u64, means_zero: true, variances_match: true };
    for n in 1..=e.len() as u64 {
        let mut mean = Vec::new();
        let mut second = Vec::new();
        for (v, p) in process.dist(n).atoms() {
            let (vn, ve) = dyadic_parts(&v.coords()[0]).ok_or_else(|| Error::invalid("atom is not dyadic"))?;
            let (pn, pe) = dyadic_parts(p).ok_or_else(|| Error::invalid("weight is not dyadic"))?;
            mean.push((&vn * &pn, ve + pe));
            second.push((&vn * &vn * &pn, 2 * ve + pe));
        }
        check.means_zero &= dyadic_sum(mean).0.is_zero();
        // E(X^2) = S / 2^se against n^2 (2^(a+1) - 1) / 2^(2a+2).
        let (s, se) = dyadic_sum(second);
        let a = slln_exponent(e, n).unwrap();
        let target = BigInt::from(n) * BigInt::from(n) * ((BigInt::one() << (a + 1) as usize) - 1);
        check.variances_match &= (s << (2 * a + 2) as usize) == (target << se as usize);
    }
    Ok(check)
}

/// Exact variance of `X_n` divided by `n^2`, from the atoms.
pub fn slln_normalized_variance_from_atoms(e: &Enumeration, n: u64) -> Result<Rat> {
    if n == 0 || n as usize > e.len() {
        return Err(Error::invalid("index must lie in 1..=len"));
    }
    let d = slln_counterexample_process(e).dist(n);
    let second = d.expect(|v| &v.coords()[0] * &v.coords()[0]);
    Ok(second / int(n * n))
}

/// Confirms a witness through the generic weighted-average path on the reals.
pub fn average_via_space(e: &Enumeration, n: u64) -> Result<Rat> {
    let avg = crate::space::weighted_average(&specker_terms(e), &crate::space::WeightSequence::linear(), n)?;
    match SpaceDescriptor::reals().norm(&avg)? {
        crate::space::NormValue::Exact(r) => Ok(r),
        other => Ok(other.upper()),
    }
}
